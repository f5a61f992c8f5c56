//! Command-line front end for the `smic` codec.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use smic::bitstream::{read_dictionary, write_codes, write_dictionary, CodesReader, RateReport};
use smic::codec::Codec;
use smic::dict_learner::learn_dictionary_traced;
use smic::embedding_store::{read_embeddings, write_embeddings};
use smic::quantizer::quantize_dictionary;
use smic::rate_model::{
    bpp_to_bits, break_even_n, dict_bits_model, rate_per_item_amortized, rate_per_item_model, CollectionSize,
    DEFAULT_IMAGE_PIXELS, DEFAULT_SIC_BPP,
};
use smic::rd_optimizer::{read_sweep_csv, sweep, upper_hull_indices, write_sweep_csv, SweepGrid, SweepOptions};
use smic::semantic_ops::combine;
use smic::{CodecParams, EmbeddingCollection, LatentVector, LearnOptions, Preset, QuantizedDictionary, RateKind};

#[derive(Debug, Parser)]
#[command(name = "smic", version, about = "Dictionary-based compression of latent embedding collections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn and quantize a dictionary from an SMEB collection.
    LearnDict(LearnDict),
    /// Encode an SMEB collection against a dictionary.
    Encode(Encode),
    /// Decode an SMCD stream back to latents.
    Decode(Decode),
    /// Rate report: closed-form model versus measured container bits.
    Rate(Rate),
    /// Evaluate a parameter grid and write one CSV row per cell and size.
    Sweep(Sweep),
    /// Upper hull of a sweep CSV for one collection size.
    Hull(Hull),
    /// Latent arithmetic on two stored items.
    Ops(Ops),
    /// Split items into dictionary projection and residual.
    Project(Project),
    /// Print the parameters of a named preset.
    Preset(PresetCmd),
}

#[derive(Debug, Args)]
struct LearnDict {
    input: PathBuf,
    #[arg(long)]
    atoms: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "bits-dict", default_value_t = 16)]
    bits_dict: u8,
    /// Train on the first K items only.
    #[arg(long = "train-first")]
    train_first: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Encode {
    input: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Defaults to the dictionary's training lambda.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "bits-coef")]
    bits_coef: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Decode {
    input: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = smic::DEFAULT_TARGET_NORM)]
    norm: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Rate {
    /// Report on a named preset instead of files.
    #[arg(long, conflicts_with_all = ["dict", "codes"])]
    preset: Option<Preset>,
    #[arg(long, requires = "codes")]
    dict: Option<PathBuf>,
    #[arg(long, requires = "dict")]
    codes: Option<PathBuf>,
    #[arg(long = "sic-bpp", default_value_t = DEFAULT_SIC_BPP)]
    sic_bpp: f64,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000,inf")]
    sizes: Vec<CollectionSize>,
    #[arg(long, default_value_t = DEFAULT_IMAGE_PIXELS)]
    pixels: u64,
    /// Latent dimension for preset reports.
    #[arg(long, default_value_t = smic::rate_model::DEFAULT_DIM)]
    dim: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Sweep {
    input: PathBuf,
    #[arg(long = "grid-na", value_delimiter = ',', required = true)]
    grid_na: Vec<usize>,
    #[arg(long = "grid-lambda", value_delimiter = ',', required = true)]
    grid_lambda: Vec<f64>,
    #[arg(long = "grid-bdict", value_delimiter = ',', required = true)]
    grid_bdict: Vec<u8>,
    #[arg(long = "grid-bcoef", value_delimiter = ',', required = true)]
    grid_bcoef: Vec<u8>,
    #[arg(long, value_delimiter = ',', default_value = "inf")]
    sizes: Vec<CollectionSize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = smic::DEFAULT_TARGET_NORM)]
    norm: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RateArg {
    Model,
    Measured,
}

#[derive(Debug, Args)]
struct Hull {
    input: PathBuf,
    #[arg(long)]
    n: CollectionSize,
    #[arg(long, value_enum, default_value_t = RateArg::Measured)]
    rate: RateArg,
    /// Latent dimension recorded with the sweep.
    #[arg(long, default_value_t = smic::rate_model::DEFAULT_DIM)]
    dim: usize,
    /// Write the hull rows as CSV instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OpKind {
    Add,
    Sub,
}

#[derive(Debug, Args)]
struct Ops {
    #[arg(value_enum)]
    op: OpKind,
    /// `file.smeb#index`
    a: String,
    /// `file.smeb#index`
    b: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = smic::DEFAULT_TARGET_NORM)]
    norm: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Project {
    input: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Defaults to the dictionary's training lambda.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = smic::DEFAULT_TARGET_NORM)]
    norm: f64,
    #[arg(long = "out-proj")]
    out_proj: PathBuf,
    #[arg(long = "out-resid")]
    out_resid: PathBuf,
}

#[derive(Debug, Args)]
struct PresetCmd {
    name: String,
}

/// Parses `args` (program name first) and runs the subcommand, writing the
/// human-readable report to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::LearnDict(c) => learn_dict(c, out),
        Command::Encode(c) => encode(c, out),
        Command::Decode(c) => decode(c, out),
        Command::Rate(c) => rate(c, out),
        Command::Sweep(c) => run_sweep(c, out),
        Command::Hull(c) => hull(c, out),
        Command::Ops(c) => ops(c, out),
        Command::Project(c) => project(c, out),
        Command::Preset(c) => {
            let p = smic::rd_optimizer::preset(&c.name)?;
            writeln!(out, "{p}")?;
            Ok(())
        }
    }
}

/// Applies `SMIC_THREADS` (unset or 0 = one thread per core).
pub fn configure_threads() -> Result<()> {
    let threads = match std::env::var("SMIC_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .with_context(|| format!("SMIC_THREADS={v:?} is not a thread count"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

/// Training lambda of a stored dictionary, read back as the shortest
/// decimal that round-trips its `f32` field.
fn stored_lambda(qd: &QuantizedDictionary) -> f64 {
    qd.lambda_train().to_string().parse().expect("f32 display parses as f64")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn load_embeddings(path: &Path) -> Result<EmbeddingCollection> {
    read_embeddings(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn load_dictionary(path: &Path) -> Result<QuantizedDictionary> {
    read_dictionary(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn save_embeddings(c: &EmbeddingCollection, path: &Path) -> Result<u64> {
    let mut w = create(path)?;
    let n = write_embeddings(c, &mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(n)
}

fn learn_dict(c: LearnDict, out: &mut dyn Write) -> Result<()> {
    let mut z = load_embeddings(&c.input)?;
    if let Some(k) = c.train_first {
        if k == 0 {
            bail!("--train-first must be positive");
        }
        z = z.head(k);
    }
    let p = CodecParams::new(c.atoms, c.lambda, c.bits_dict, c.bits_dict)?.with_dim(z.dim())?;
    let opts = LearnOptions::default().with_seed(c.seed);
    let report = learn_dictionary_traced(&z, p.n_atoms, p.lambda, &opts)?;
    let qd = quantize_dictionary(&report.dictionary, c.bits_dict)?.with_lambda_train(c.lambda as f32);
    let mut w = create(&c.out)?;
    write_dictionary(&qd, &mut w)?;
    w.flush()?;
    let reseeds: usize = report.history.iter().map(|a| a.reinitialized.len()).sum();
    writeln!(out, "seed={}", c.seed)?;
    writeln!(out, "trained on {} items of dimension {}", z.len(), z.dim())?;
    writeln!(
        out,
        "n_a={} lambda={} b_dict={} alternations={} converged={} reseeded_atoms={}",
        p.n_atoms,
        p.lambda,
        c.bits_dict,
        report.history.len(),
        report.converged,
        reseeds
    )?;
    if let Some(last) = report.history.last() {
        writeln!(out, "objective {:.6} -> {:.6}", report.initial_objective, last.objective)?;
    }
    writeln!(out, "dict_id={:#018x} wrote {}", smic::bitstream::dict_id(&qd), c.out.display())?;
    Ok(())
}

fn encode(c: Encode, out: &mut dyn Write) -> Result<()> {
    let z = load_embeddings(&c.input)?;
    let qd = load_dictionary(&c.dict)?;
    let lambda = c.lambda.unwrap_or(stored_lambda(&qd));
    let codec = Codec::new(qd);
    let codes = codec.encode_all(&z, lambda, c.bits_coef)?;
    let mut w = create(&c.out)?;
    let report = write_codes(&codes, c.bits_coef, codec.side_info(), &mut w)?;
    w.flush()?;
    let nulls = codes.iter().filter(|k| k.is_empty()).count();
    writeln!(out, "encoded {} items, lambda={} b_coef={}", codes.len(), lambda, c.bits_coef)?;
    writeln!(
        out,
        "mean non-null coefficients {:.3}, null codes {}",
        codes.iter().map(|k| k.len()).sum::<usize>() as f64 / codes.len().max(1) as f64,
        nulls
    )?;
    writeln!(
        out,
        "mean item {:.2} bits, container {} bytes, wrote {}",
        report.mean_item_bits(),
        report.codes_container_bytes,
        c.out.display()
    )?;
    Ok(())
}

fn decode(c: Decode, out: &mut dyn Write) -> Result<()> {
    let qd = load_dictionary(&c.dict)?;
    let mut reader = CodesReader::open(open(&c.input)?).with_context(|| format!("reading {}", c.input.display()))?;
    reader.header().check_dictionary(&qd)?;
    let codes = reader.read_all()?;
    let codec = Codec::new(qd);
    let decoded = codec.decode_all(&codes, c.norm)?;
    let bytes = save_embeddings(&decoded, &c.out)?;
    writeln!(out, "decoded {} items to norm {}, wrote {} ({bytes} bytes)", decoded.len(), c.norm, c.out.display())?;
    Ok(())
}

fn rate(c: Rate, out: &mut dyn Write) -> Result<()> {
    let sic_bits = bpp_to_bits(c.sic_bpp, c.pixels);
    let (params, measured): (CodecParams, Option<RateReport>) = match (&c.preset, &c.dict, &c.codes) {
        (Some(p), _, _) => (p.params().with_dim(c.dim)?.with_pixels(c.pixels)?, None),
        (None, Some(d), Some(k)) => {
            let qd = load_dictionary(d)?;
            let mut reader = CodesReader::open(open(k)?).with_context(|| format!("reading {}", k.display()))?;
            reader.header().check_dictionary(&qd)?;
            let b_coef = reader.header().b_coef;
            let codes = reader.read_all()?;
            let report = write_codes(&codes, b_coef, &qd, std::io::sink())?;
            let p = CodecParams::new(qd.n_atoms(), stored_lambda(&qd), qd.bits(), b_coef)?
                .with_dim(qd.dim())?
                .with_pixels(c.pixels)?;
            (p, Some(report))
        }
        _ => bail!("rate needs --preset or both --dict and --codes"),
    };

    writeln!(out, "{params} dim={} pixels={}", params.dim, params.image_pixels)?;
    writeln!(out, "SIC reference {} BPP = {:.2} bits/item", c.sic_bpp, sic_bits)?;
    let model_dict = dict_bits_model(&params);
    let model_item = rate_per_item_model(&params);
    writeln!(out, "model: dictionary {model_dict} bits, {model_item:.4} bits/item")?;
    if let Some(m) = &measured {
        writeln!(
            out,
            "measured: dictionary {} bits, {:.4} bits/item over {} items",
            m.dict_container_bytes * 8,
            m.mean_item_bytes() * 8.0,
            m.items()
        )?;
    }

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["n", "model_bits", "model_bpp", "model_ratio", "measured_bits", "measured_bpp", "measured_ratio"])?;
    writeln!(
        out,
        "{:>10} {:>14} {:>12} {:>12} {:>14} {:>12} {:>12}",
        "n", "model_bits", "model_bpp", "model_ratio", "meas_bits", "meas_bpp", "meas_ratio"
    )?;
    for &n in &c.sizes {
        let model = rate_per_item_amortized(&params, n);
        let meas = measured.as_ref().map(|m| m.measured_bits_per_item(n.items()));
        let fmt_opt = |v: Option<f64>, f: &dyn Fn(f64) -> String| v.map(f).unwrap_or_else(|| "-".into());
        let cells = [
            n.to_string(),
            format!("{model:.4}"),
            format!("{:.4e}", model / c.pixels as f64),
            format!("{:.4}", sic_bits / model),
            fmt_opt(meas, &|b| format!("{b:.4}")),
            fmt_opt(meas, &|b| format!("{:.4e}", b / c.pixels as f64)),
            fmt_opt(meas, &|b| format!("{:.4}", sic_bits / b)),
        ];
        writeln!(
            out,
            "{:>10} {:>14} {:>12} {:>12} {:>14} {:>12} {:>12}",
            cells[0], cells[1], cells[2], cells[3], cells[4], cells[5], cells[6]
        )?;
        table.write_record(&cells)?;
    }
    match break_even_n(model_dict, sic_bits, model_item) {
        Ok(n) => writeln!(out, "n* (model) = {n}")?,
        Err(e) => writeln!(out, "n* (model): {e}")?,
    }
    if let Some(m) = &measured {
        let bits = (m.dict_container_bytes * 8) as f64;
        match break_even_n(bits, sic_bits, m.mean_item_bytes() * 8.0) {
            Ok(n) => writeln!(out, "n* (measured) = {n}")?,
            Err(e) => writeln!(out, "n* (measured): {e}")?,
        }
    }
    if let Some(path) = &c.csv {
        std::fs::write(path, table.into_inner()?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn run_sweep(c: Sweep, out: &mut dyn Write) -> Result<()> {
    let z = load_embeddings(&c.input)?;
    let grid = SweepGrid {
        n_atoms: c.grid_na,
        lambdas: c.grid_lambda,
        b_dict: c.grid_bdict,
        b_coef: c.grid_bcoef,
    };
    let opts = SweepOptions {
        seed: c.seed,
        target_norm: c.norm,
        ..SweepOptions::default()
    };
    let rows = sweep(&z, &grid, &c.sizes, &opts)?;
    let mut w = create(&c.out)?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count() / c.sizes.len();
    writeln!(out, "seed={}", c.seed)?;
    writeln!(out, "{} cells on {} items, {} failed; fidelity = mean latent cosine", grid.cells(), z.len(), failed)?;
    for n in &c.sizes {
        let on = rows.iter().filter(|r| r.n == *n && r.on_hull).count();
        writeln!(out, "n={n}: {on} hull points (measured rate)")?;
    }
    writeln!(out, "wrote {}", c.out.display())?;
    Ok(())
}

fn hull(c: Hull, out: &mut dyn Write) -> Result<()> {
    let rows = read_sweep_csv(open(&c.input)?, c.dim).with_context(|| format!("reading {}", c.input.display()))?;
    let kind = match c.rate {
        RateArg::Model => RateKind::Model,
        RateArg::Measured => RateKind::Measured,
    };
    let mut members: Vec<_> = rows.into_iter().filter(|r| r.n == c.n && r.outcome.is_ok()).collect();
    if members.is_empty() {
        bail!("no successful rows for n={}", c.n);
    }
    let coords: Vec<(f64, f64)> = members
        .iter()
        .map(|r| {
            let p = r.point(kind).expect("successful row");
            (p.rate_bits_per_item, p.fidelity)
        })
        .collect();
    let keep = upper_hull_indices(&coords);
    for r in members.iter_mut() {
        r.on_hull = false;
    }
    let hull: Vec<_> = keep
        .iter()
        .map(|&i| {
            let mut r = members[i].clone();
            r.on_hull = true;
            r
        })
        .collect();
    match &c.out {
        Some(path) => {
            let mut w = create(path)?;
            write_sweep_csv(&hull, &mut w)?;
            w.flush()?;
            writeln!(out, "{} hull points for n={}, wrote {}", hull.len(), c.n, path.display())?;
        }
        None => write_sweep_csv(&hull, &mut *out)?,
    }
    Ok(())
}

fn item_ref(spec: &str) -> Result<LatentVector> {
    let (path, index) = spec
        .rsplit_once('#')
        .with_context(|| format!("{spec:?} is not of the form file.smeb#index"))?;
    let index: usize = index.parse().with_context(|| format!("bad item index in {spec:?}"))?;
    let c = load_embeddings(Path::new(path))?;
    if index >= c.len() {
        bail!(smic::Error::IndexOutOfRange {
            index: index as u64,
            len: c.len() as u64
        });
    }
    Ok(c.item(index)?)
}

fn ops(c: Ops, out: &mut dyn Write) -> Result<()> {
    let a = item_ref(&c.a)?;
    let b = item_ref(&c.b)?;
    let alpha = match c.op {
        OpKind::Add => c.alpha,
        OpKind::Sub => -c.alpha,
    };
    let v = combine(&a, &b, alpha, c.norm)?;
    let coll = EmbeddingCollection::from_vectors(v.dim(), [&v])?;
    save_embeddings(&coll, &c.out)?;
    writeln!(
        out,
        "cosine to a {:.6}, to b {:.6}, wrote {}",
        smic::semantic_ops::cosine(&v, &a)?,
        smic::semantic_ops::cosine(&v, &b)?,
        c.out.display()
    )?;
    Ok(())
}

fn project(c: Project, out: &mut dyn Write) -> Result<()> {
    let z = load_embeddings(&c.input)?;
    let qd = load_dictionary(&c.dict)?;
    let lambda = c.lambda.unwrap_or(stored_lambda(&qd));
    let codec = Codec::new(qd);
    let mut proj = EmbeddingCollection::new(z.dim())?;
    let mut resid = EmbeddingCollection::new(z.dim())?;
    for (i, item) in z.items().enumerate() {
        let (p, r) = codec
            .project_residual(&item, lambda, c.norm)
            .with_context(|| format!("item {i}"))?;
        proj.push(&p)?;
        resid.push(&r)?;
    }
    if let Some(names) = z.names() {
        proj = proj.with_names(names.to_vec())?;
        resid = resid.with_names(names.to_vec())?;
    }
    save_embeddings(&proj, &c.out_proj)?;
    save_embeddings(&resid, &c.out_resid)?;
    writeln!(
        out,
        "projected {} items at lambda={lambda}, wrote {} and {}",
        z.len(),
        c.out_proj.display(),
        c.out_resid.display()
    )?;
    Ok(())
}
