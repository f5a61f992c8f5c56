//! Rate / fidelity parameter sweeps, named presets and extraction of the
//! upper convex hull of the resulting operating points.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::bitstream::write_codes;
use crate::codec::{fidelity_report, Codec, FidelityReport};
use crate::dict_learner::{learn_dictionary, LearnOptions};
use crate::embedding_store::EmbeddingCollection;
use crate::quantizer::quantize_dictionary;
use crate::rate_model::{rate_per_item_amortized, CodecParams, CollectionSize};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Low,
    Medium,
    High,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Low, Preset::Medium, Preset::High];

    pub fn params(self) -> CodecParams {
        let (n_atoms, lambda, b_dict, b_coef) = match self {
            Preset::Low => (2, 1.6, 2, 2),
            Preset::Medium => (128, 0.2, 4, 4),
            Preset::High => (128, 0.1, 16, 16),
        };
        CodecParams::new(n_atoms, lambda, b_dict, b_coef).expect("preset parameters are valid")
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Low => "low",
            Preset::Medium => "medium",
            Preset::High => "high",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Preset::Low),
            "medium" => Ok(Preset::Medium),
            "high" => Ok(Preset::High),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

pub fn preset(name: &str) -> Result<CodecParams> {
    name.parse::<Preset>().map(Preset::params)
}

/// Which rate figure a point carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    /// Closed-form model.
    Model,
    /// Exact container bits.
    Measured,
}

impl FromStr for RateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(RateKind::Model),
            "measured" => Ok(RateKind::Measured),
            other => Err(Error::InvalidParameter(format!("rate kind {other:?} is not model|measured"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    pub params: CodecParams,
    pub n: CollectionSize,
    pub kind: RateKind,
    pub rate_bits_per_item: f64,
    /// Mean latent cosine between originals and decoded items.
    pub fidelity: f64,
}

/// Points of the upper-left concave frontier, in increasing rate.
///
/// Rate ties keep the higher fidelity; exact ties keep the earlier point.
/// Points on a chord between two frontier points are dropped.
pub fn upper_hull(points: &[RatePoint]) -> Vec<RatePoint> {
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.rate_bits_per_item, p.fidelity)).collect();
    upper_hull_indices(&coords)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

/// Index form of [`upper_hull`] over `(rate, fidelity)` pairs.
pub fn upper_hull_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[b].1.total_cmp(&points[a].1))
            .then(a.cmp(&b))
    });
    let mut pareto: Vec<usize> = Vec::new();
    for i in order {
        if pareto.last().is_none_or(|&last| points[i].1 > points[last].1) {
            pareto.push(i);
        }
    }
    let mut hull: Vec<usize> = Vec::with_capacity(pareto.len());
    for i in pareto {
        while hull.len() >= 2 {
            let o = points[hull[hull.len() - 2]];
            let a = points[hull[hull.len() - 1]];
            let b = points[i];
            let cross = (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub n_atoms: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub b_dict: Vec<u8>,
    pub b_coef: Vec<u8>,
}

impl SweepGrid {
    pub fn cells(&self) -> usize {
        self.n_atoms.len() * self.lambdas.len() * self.b_dict.len() * self.b_coef.len()
    }

    /// Every parameter tuple in sweep order: `n_a`, then `lambda`, `b_dict`,
    /// `b_coef`.
    pub fn params(&self, dim: usize) -> Result<Vec<CodecParams>> {
        let mut out = Vec::with_capacity(self.cells());
        for &n in &self.n_atoms {
            for &l in &self.lambdas {
                for &bd in &self.b_dict {
                    for &bc in &self.b_coef {
                        out.push(CodecParams::new(n, l, bd, bc)?.with_dim(dim)?);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub seed: u64,
    pub target_norm: f64,
    pub learn: LearnOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            target_norm: crate::DEFAULT_TARGET_NORM,
            learn: LearnOptions::default(),
        }
    }
}

/// Measurements of one coded cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub measured_bits: f64,
    pub fidelity: f64,
    pub null_codes: usize,
}

/// One `(parameters, n)` row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: CodecParams,
    pub n: CollectionSize,
    pub model_bits: f64,
    /// `Err` holds the failure message of a cell that could not be coded.
    pub outcome: std::result::Result<CellMetrics, String>,
    pub on_hull: bool,
}

impl SweepRow {
    pub fn point(&self, kind: RateKind) -> Option<RatePoint> {
        let m = self.outcome.as_ref().ok()?;
        Some(RatePoint {
            params: self.params,
            n: self.n,
            kind,
            rate_bits_per_item: match kind {
                RateKind::Model => self.model_bits,
                RateKind::Measured => m.measured_bits,
            },
            fidelity: m.fidelity,
        })
    }
}

struct CellResult {
    params: CodecParams,
    outcome: std::result::Result<(FidelityReport, crate::bitstream::RateReport, usize), String>,
}

/// Evaluates every grid cell on `z` for each collection size in `sizes`.
///
/// The dictionary is learned once per `(n_a, lambda)` and reused across the
/// bit depths. Cells that fail are reported, not propagated. `on_hull` marks
/// the measured-rate frontier per size.
pub fn sweep(z: &EmbeddingCollection, grid: &SweepGrid, sizes: &[CollectionSize], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if grid.cells() == 0 || sizes.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if z.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let all_params = grid.params(z.dim())?;
    let learn = opts.learn.with_seed(opts.seed);
    let per_dict = grid.b_dict.len() * grid.b_coef.len();

    let cells: Vec<CellResult> = all_params
        .par_chunks(per_dict)
        .flat_map_iter(|chunk| {
            let first = chunk[0];
            let dict = learn_dictionary(z, first.n_atoms, first.lambda, &learn);
            chunk
                .iter()
                .map(|p| CellResult {
                    params: *p,
                    outcome: dict
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|d| evaluate_cell(z, d, p, opts.target_norm).map_err(|e| e.to_string())),
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut rows = Vec::with_capacity(cells.len() * sizes.len());
    for cell in &cells {
        for &n in sizes {
            rows.push(SweepRow {
                params: cell.params,
                n,
                model_bits: rate_per_item_amortized(&cell.params, n),
                outcome: cell.outcome.as_ref().map_err(Clone::clone).map(|(fid, report, nulls)| CellMetrics {
                    measured_bits: report.measured_bits_per_item(n.items()),
                    fidelity: fid.mean_cosine,
                    null_codes: *nulls,
                }),
                on_hull: false,
            });
        }
    }
    mark_hull(&mut rows, RateKind::Measured);
    Ok(rows)
}

fn evaluate_cell(
    z: &EmbeddingCollection,
    dict: &crate::Dictionary,
    p: &CodecParams,
    target_norm: f64,
) -> Result<(FidelityReport, crate::bitstream::RateReport, usize)> {
    let qd = quantize_dictionary(dict, p.b_dict)?.with_lambda_train(p.lambda as f32);
    let codec = Codec::new(qd);
    let codes = codec.encode_all(z, p.lambda, p.b_coef)?;
    let report = write_codes(&codes, p.b_coef, codec.side_info(), std::io::sink())?;
    let (decoded, nulls) = codec.decode_all_lossy(&codes, target_norm)?;
    let fid = fidelity_report(z, &decoded, target_norm)?;
    Ok((fid, report, nulls))
}

/// Sets `on_hull` for the frontier of each collection size.
pub fn mark_hull(rows: &mut [SweepRow], kind: RateKind) {
    let mut sizes: Vec<CollectionSize> = rows.iter().map(|r| r.n).collect();
    sizes.sort();
    sizes.dedup();
    for r in rows.iter_mut() {
        r.on_hull = false;
    }
    for n in sizes {
        let members: Vec<usize> = (0..rows.len())
            .filter(|&i| rows[i].n == n && rows[i].outcome.is_ok())
            .collect();
        let coords: Vec<(f64, f64)> = members
            .iter()
            .map(|&i| {
                let p = rows[i].point(kind).expect("ok row");
                (p.rate_bits_per_item, p.fidelity)
            })
            .collect();
        for k in upper_hull_indices(&coords) {
            rows[members[k]].on_hull = true;
        }
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "n_a",
    "lambda",
    "b_dict",
    "b_coef",
    "n",
    "model_bits",
    "measured_bits",
    "fidelity",
    "null_codes",
    "on_hull",
    "status",
];

/// Writes one CSV row per `(cell, n)`. The fidelity column is the mean
/// latent cosine.
pub fn write_sweep_csv(rows: &[SweepRow], sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        let (measured, fidelity, nulls, status) = match &r.outcome {
            Ok(m) => (
                m.measured_bits.to_string(),
                m.fidelity.to_string(),
                m.null_codes.to_string(),
                "ok".to_string(),
            ),
            Err(msg) => (String::new(), String::new(), String::new(), format!("failed: {msg}")),
        };
        w.write_record([
            r.params.n_atoms.to_string(),
            r.params.lambda.to_string(),
            r.params.b_dict.to_string(),
            r.params.b_coef.to_string(),
            r.n.to_string(),
            r.model_bits.to_string(),
            measured,
            fidelity,
            nulls,
            u8::from(r.on_hull).to_string(),
            status,
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_sweep_csv`]. `dim` fills the latent
/// dimension of the recovered parameters.
pub fn read_sweep_csv(source: impl Read, dim: usize) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(source);
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Format("unexpected sweep CSV header".into()));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("column {} is not numeric: {:?}", CSV_HEADER[i], field(i))))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse::<u64>()
                .map_err(|_| Error::Format(format!("column {} is not an integer: {:?}", CSV_HEADER[i], field(i))))
        };
        let params = CodecParams::new(int(0)? as usize, num(1)?, int(2)? as u8, int(3)? as u8)?.with_dim(dim)?;
        let status = field(10);
        let outcome = if status == "ok" {
            Ok(CellMetrics {
                measured_bits: num(6)?,
                fidelity: num(7)?,
                null_codes: int(8)? as usize,
            })
        } else {
            Err(status.strip_prefix("failed: ").unwrap_or(status).to_string())
        };
        rows.push(SweepRow {
            params,
            n: field(4).parse()?,
            model_bits: num(5)?,
            outcome,
            on_hull: field(9) == "1",
        });
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
