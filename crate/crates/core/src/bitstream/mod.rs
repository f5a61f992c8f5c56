//! SMDC (quantized dictionary) and SMCD (per-item codes) containers.
//!
//! All integers are little-endian; bit-packed fields are MSB-first.
//!
//! ```text
//! SMDC: "SMDC" | version u16 = 1 | dim u32 | n_atoms u32 | b_dict u8
//!       | lambda_train f32 | scales n_atoms x f32
//!       | levels: n_atoms * dim * b_dict bits, atom-major, zero-padded to a byte
//!
//! SMCD: "SMCD" | version u16 = 1 | dict_id u64 | n_atoms u32 | b_coef u8 | count u64
//!       | offsets count x u64 (absolute byte offset of each item)
//!       | items: scale f32 | k u16 | k x (index: ceil(log2 n_atoms) bits, level: b_coef bits)
//!                zero-padded to a byte
//! ```
//!
//! `dict_id` is the 64-bit FNV-1a hash of the complete SMDC byte stream, so a
//! code file can only be decoded against the dictionary it was written for.
//! Level fields are two's complement, except one-bit fields which store the
//! sign alone (`0 = +1`, `1 = -1`).

mod bits;

use std::io::{Read, Seek, SeekFrom, Write};

pub use bits::{decode_level, encode_level, index_bits, BitReader, BitWriter};

use crate::quantizer::{check_bits, QuantizedCode, QuantizedDictionary};
use crate::wire;
use crate::{Error, Result};

pub const SMDC_MAGIC: &[u8; 4] = b"SMDC";
pub const SMCD_MAGIC: &[u8; 4] = b"SMCD";
pub const FORMAT_VERSION: u16 = 1;

/// Fixed SMDC header before the scale table.
pub const SMDC_HEADER_BYTES: u64 = 4 + 2 + 4 + 4 + 1 + 4;
/// Fixed SMCD header before the offset table.
pub const SMCD_HEADER_BYTES: u64 = 4 + 2 + 8 + 4 + 1 + 8;
/// Scale and entry count preceding every item's packed entries.
pub const ITEM_OVERHEAD_BITS: u64 = 32 + 16;

const MAX_ENTRIES: usize = u16::MAX as usize;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Exact bit and byte accounting for a dictionary and its codes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub dict_id: u64,
    /// Packed level bits of the dictionary, `n_atoms * dim * b_dict`.
    pub dict_payload_bits: u64,
    /// Level bits plus header and scale table, before byte padding.
    pub dict_bits: u64,
    /// Size of the SMDC file.
    pub dict_container_bytes: u64,
    /// `48 + k_i * (index_bits + b_coef)` per item, before byte padding.
    pub per_item_bits: Vec<u64>,
    /// Padded on-disk size of each item.
    pub per_item_bytes: Vec<u64>,
    /// SMCD header plus offset table; counted in the container but not in
    /// per-item figures.
    pub codes_overhead_bytes: u64,
    /// Size of the SMCD file.
    pub codes_container_bytes: u64,
    /// Closed-form model figures, when the caller attached them.
    pub model: Option<ModelBits>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelBits {
    pub dict_bits: f64,
    pub per_item_bits: f64,
}

impl RateReport {
    pub fn items(&self) -> usize {
        self.per_item_bits.len()
    }

    pub fn mean_item_bits(&self) -> f64 {
        mean(&self.per_item_bits)
    }

    pub fn mean_item_bytes(&self) -> f64 {
        mean(&self.per_item_bytes)
    }

    /// Measured bits per item for a collection of `n` items sharing the
    /// dictionary: SMDC file bits amortized over `n`, plus the mean padded
    /// item size. `None` means the dictionary cost is fully absorbed.
    pub fn measured_bits_per_item(&self, n: Option<u64>) -> f64 {
        let items = self.mean_item_bytes() * 8.0;
        match n {
            Some(n) => self.dict_container_bytes as f64 * 8.0 / n as f64 + items,
            None => items,
        }
    }

    pub fn with_model(mut self, model: ModelBits) -> Self {
        self.model = Some(model);
        self
    }
}

fn mean(v: &[u64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<u64>() as f64 / v.len() as f64
    }
}

/// Exact SMDC size in bytes.
pub fn smdc_size(dim: usize, n_atoms: usize, b_dict: u8) -> u64 {
    SMDC_HEADER_BYTES + 4 * n_atoms as u64 + (n_atoms as u64 * dim as u64 * b_dict as u64).div_ceil(8)
}

/// Unpadded bits of one item with `k` entries.
pub fn item_bits(n_atoms: usize, b_coef: u8, k: usize) -> u64 {
    ITEM_OVERHEAD_BITS + k as u64 * (index_bits(n_atoms) as u64 + b_coef as u64)
}

/// Exact SMCD size in bytes for items with entry counts `ks`.
pub fn smcd_size(n_atoms: usize, b_coef: u8, ks: &[usize]) -> u64 {
    SMCD_HEADER_BYTES
        + 8 * ks.len() as u64
        + ks.iter().map(|&k| item_bits(n_atoms, b_coef, k).div_ceil(8)).sum::<u64>()
}

pub fn encode_dictionary(qd: &QuantizedDictionary) -> Vec<u8> {
    let mut out = Vec::with_capacity(smdc_size(qd.dim(), qd.n_atoms(), qd.bits()) as usize);
    out.extend_from_slice(SMDC_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(qd.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(qd.n_atoms() as u32).to_le_bytes());
    out.push(qd.bits());
    out.extend_from_slice(&qd.lambda_train().to_le_bytes());
    for s in qd.scales() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    let mut w = BitWriter::new();
    for &l in qd.levels() {
        w.write(encode_level(l, qd.bits()), qd.bits() as u32);
    }
    out.extend(w.finish());
    out
}

/// Identifier a code stream records for the dictionary it was coded against.
pub fn dict_id(qd: &QuantizedDictionary) -> u64 {
    fnv1a64(&encode_dictionary(qd))
}

/// Writes `qd` as SMDC and returns the packed level bits (`n_atoms * dim * b_dict`).
pub fn write_dictionary(qd: &QuantizedDictionary, mut sink: impl Write) -> Result<u64> {
    let bytes = encode_dictionary(qd);
    sink.write_all(&bytes)?;
    sink.flush()?;
    Ok(qd.n_atoms() as u64 * qd.dim() as u64 * qd.bits() as u64)
}

pub fn read_dictionary(mut source: impl Read) -> Result<QuantizedDictionary> {
    let r = &mut source;
    wire::expect_magic(r, SMDC_MAGIC)?;
    wire::expect_version(r, FORMAT_VERSION)?;
    let dim = wire::read_u32(r)? as usize;
    let n_atoms = wire::read_u32(r)? as usize;
    let bits = wire::read_u8(r)?;
    check_bits(bits).map_err(|_| Error::Format(format!("b_dict {bits} out of range")))?;
    if dim == 0 || n_atoms == 0 {
        return Err(Error::Format("dictionary with zero atoms or dimension".into()));
    }
    let lambda_train = wire::read_f32(r)?;
    let scale_bytes = wire::read_vec(r, 4 * n_atoms)?;
    let scales = scale_bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let total = (n_atoms as u64)
        .checked_mul(dim as u64)
        .ok_or_else(|| Error::Format("dictionary size overflows".into()))?;
    let packed = wire::read_vec(r, (total * bits as u64).div_ceil(8) as usize)?;
    let mut br = BitReader::new(&packed);
    let levels = (0..total)
        .map(|_| br.read(bits as u32).map(|raw| decode_level(raw, bits)))
        .collect::<Result<Vec<_>>>()?;
    QuantizedDictionary::new(dim, bits, scales, levels, lambda_train)
}

fn encode_item(code: &QuantizedCode) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&code.scale().to_le_bytes());
    out.extend_from_slice(&(code.len() as u16).to_le_bytes());
    let ib = index_bits(code.n_atoms());
    let mut w = BitWriter::new();
    for &(j, l) in code.entries() {
        w.write(j as u64, ib);
        w.write(encode_level(l, code.bits()), code.bits() as u32);
    }
    out.extend(w.finish());
    out
}

/// Writes `codes` as SMCD against dictionary `qd`. All codes must use
/// `qd.n_atoms()` atoms and `b_coef` bits.
pub fn write_codes(codes: &[QuantizedCode], b_coef: u8, qd: &QuantizedDictionary, mut sink: impl Write) -> Result<RateReport> {
    check_bits(b_coef)?;
    let n_atoms = qd.n_atoms();
    for (i, c) in codes.iter().enumerate() {
        if c.n_atoms() != n_atoms || c.bits() != b_coef {
            return Err(Error::InvalidParameter(format!(
                "code {i} has (n_atoms {}, bits {}), stream expects ({n_atoms}, {b_coef})",
                c.n_atoms(),
                c.bits()
            )));
        }
        if c.len() > MAX_ENTRIES {
            return Err(Error::InvalidParameter(format!("code {i} has {} entries", c.len())));
        }
    }
    let dict_bytes = encode_dictionary(qd);
    let id = fnv1a64(&dict_bytes);

    let items: Vec<Vec<u8>> = codes.iter().map(encode_item).collect();
    let overhead = SMCD_HEADER_BYTES + 8 * codes.len() as u64;
    let mut header = Vec::with_capacity(overhead as usize);
    header.extend_from_slice(SMCD_MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&id.to_le_bytes());
    header.extend_from_slice(&(n_atoms as u32).to_le_bytes());
    header.push(b_coef);
    header.extend_from_slice(&(codes.len() as u64).to_le_bytes());
    let mut offset = overhead;
    for item in &items {
        header.extend_from_slice(&offset.to_le_bytes());
        offset += item.len() as u64;
    }
    sink.write_all(&header)?;
    for item in &items {
        sink.write_all(item)?;
    }
    sink.flush()?;

    let level_bits = n_atoms as u64 * qd.dim() as u64 * qd.bits() as u64;
    Ok(RateReport {
        dict_id: id,
        dict_payload_bits: level_bits,
        dict_bits: (SMDC_HEADER_BYTES + 4 * n_atoms as u64) * 8 + level_bits,
        dict_container_bytes: dict_bytes.len() as u64,
        per_item_bits: codes.iter().map(|c| item_bits(n_atoms, b_coef, c.len())).collect(),
        per_item_bytes: items.iter().map(|i| i.len() as u64).collect(),
        codes_overhead_bytes: overhead,
        codes_container_bytes: offset,
        model: None,
    })
}

/// Header of an SMCD stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodesHeader {
    pub dict_id: u64,
    pub n_atoms: usize,
    pub b_coef: u8,
    pub count: u64,
}

impl CodesHeader {
    fn read(r: &mut impl Read) -> Result<Self> {
        wire::expect_magic(r, SMCD_MAGIC)?;
        wire::expect_version(r, FORMAT_VERSION)?;
        let dict_id = wire::read_u64(r)?;
        let n_atoms = wire::read_u32(r)? as usize;
        let b_coef = wire::read_u8(r)?;
        check_bits(b_coef).map_err(|_| Error::Format(format!("b_coef {b_coef} out of range")))?;
        if n_atoms == 0 {
            return Err(Error::Format("code stream with zero atoms".into()));
        }
        let count = wire::read_u64(r)?;
        Ok(Self {
            dict_id,
            n_atoms,
            b_coef,
            count,
        })
    }

    fn items_start(&self) -> Result<u64> {
        self.count
            .checked_mul(8)
            .and_then(|t| t.checked_add(SMCD_HEADER_BYTES))
            .ok_or_else(|| Error::Format("item count too large".into()))
    }

    pub fn check_dictionary(&self, qd: &QuantizedDictionary) -> Result<()> {
        let found = dict_id(qd);
        if found != self.dict_id {
            return Err(Error::DictionaryMismatch {
                expected: self.dict_id,
                found,
            });
        }
        Ok(())
    }

    fn read_item(&self, r: &mut impl Read) -> Result<QuantizedCode> {
        let scale = wire::read_f32(r)?;
        let k = wire::read_u16(r)? as usize;
        let ib = index_bits(self.n_atoms);
        let packed_bits = k as u64 * (ib as u64 + self.b_coef as u64);
        let packed = wire::read_vec(r, packed_bits.div_ceil(8) as usize)?;
        let mut br = BitReader::new(&packed);
        let mut entries = Vec::with_capacity(k);
        for _ in 0..k {
            let j = br.read(ib)? as usize;
            let l = decode_level(br.read(self.b_coef as u32)?, self.b_coef);
            entries.push((j, l));
        }
        QuantizedCode::new(self.n_atoms, self.b_coef, scale, entries)
    }
}

/// Random-access reader over a complete SMCD stream.
#[derive(Debug)]
pub struct CodesReader<R> {
    source: R,
    header: CodesHeader,
}

impl<R: Read + Seek> CodesReader<R> {
    pub fn open(mut source: R) -> Result<Self> {
        source.seek(SeekFrom::Start(0))?;
        let header = CodesHeader::read(&mut source)?;
        header.items_start()?;
        Ok(Self { source, header })
    }

    pub fn header(&self) -> &CodesHeader {
        &self.header
    }

    pub fn len(&self) -> u64 {
        self.header.count
    }

    pub fn is_empty(&self) -> bool {
        self.header.count == 0
    }

    /// Reads item `index` through the offset table, touching no other item.
    pub fn read(&mut self, index: u64) -> Result<QuantizedCode> {
        if index >= self.header.count {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.header.count,
            });
        }
        self.source.seek(SeekFrom::Start(SMCD_HEADER_BYTES + 8 * index))?;
        let offset = wire::read_u64(&mut self.source)?;
        if offset < self.header.items_start()? {
            return Err(Error::Format(format!("item {index} offset {offset} points into the header")));
        }
        self.source.seek(SeekFrom::Start(offset))?;
        self.header.read_item(&mut self.source)
    }

    /// Reads every item in order, checking the offset table against the
    /// actual item positions.
    pub fn read_all(&mut self) -> Result<Vec<QuantizedCode>> {
        let count = usize::try_from(self.header.count).map_err(|_| Error::Format("item count too large".into()))?;
        self.source.seek(SeekFrom::Start(SMCD_HEADER_BYTES))?;
        let table = wire::read_vec(&mut self.source, count.checked_mul(8).ok_or(Error::Truncated)?)?;
        let offsets: Vec<u64> = table
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let mut pos = self.header.items_start()?;
        let mut codes = Vec::with_capacity(count.min(1 << 20));
        let mut body = CountingReader::new(&mut self.source);
        for (i, &off) in offsets.iter().enumerate() {
            if off != pos {
                return Err(Error::Format(format!("offset table entry {i} is {off}, item starts at {pos}")));
            }
            let before = body.read;
            codes.push(self.header.read_item(&mut body)?);
            pos += body.read - before;
        }
        Ok(codes)
    }
}

/// Reads one item from `source`, refusing streams coded against another
/// dictionary.
pub fn read_code<R: Read + Seek>(source: R, item_index: u64, expected_dict_id: u64) -> Result<QuantizedCode> {
    let mut reader = CodesReader::open(source)?;
    if reader.header.dict_id != expected_dict_id {
        return Err(Error::DictionaryMismatch {
            expected: reader.header.dict_id,
            found: expected_dict_id,
        });
    }
    reader.read(item_index)
}

struct CountingReader<R> {
    inner: R,
    read: u64,
}

impl<R> CountingReader<R> {
    fn new(inner: R) -> Self {
        Self { inner, read: 0 }
    }
}

impl<R: Read> Read for CountingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.read += n as u64;
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn small_dict() -> QuantizedDictionary {
        QuantizedDictionary::new(4, 2, vec![0.5, 0.25], vec![1, -1, 0, 1, 0, 0, -1, 1], 0.2).unwrap()
    }

    #[test]
    fn dictionary_payload_size() {
        let qd = small_dict();
        let mut buf = Vec::new();
        assert_eq!(write_dictionary(&qd, &mut buf).unwrap(), 16);
        assert_eq!(buf.len() as u64, SMDC_HEADER_BYTES + 8 + 2);
        assert_eq!(buf.len() as u64, smdc_size(4, 2, 2));
        assert_eq!(read_dictionary(&buf[..]).unwrap(), qd);
    }

    #[test]
    fn dictionary_guards() {
        let mut buf = Vec::new();
        write_dictionary(&small_dict(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_dictionary(&bad[..]), Err(Error::BadMagic { .. })));
        let mut bad = buf.clone();
        bad[14] = 17;
        assert!(matches!(read_dictionary(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(read_dictionary(&buf[..buf.len() - 1]), Err(Error::Truncated)));
    }

    #[test]
    fn item_sizes() {
        // 3 entries at 7 + 4 bits
        assert_eq!(item_bits(128, 4, 3), 81);
        assert_eq!(item_bits(128, 4, 3).div_ceil(8), 11);
        assert_eq!(item_bits(128, 4, 0), 48);
    }

    #[test]
    fn codes_round_trip_and_random_access() {
        let qd = small_dict();
        let codes = vec![
            QuantizedCode::new(2, 3, 1.5, vec![(0, -3), (1, 2)]).unwrap(),
            QuantizedCode::empty(2, 3).unwrap(),
            QuantizedCode::new(2, 3, 0.25, vec![(1, 1)]).unwrap(),
        ];
        let mut buf = Vec::new();
        let report = write_codes(&codes, 3, &qd, &mut buf).unwrap();
        assert_eq!(report.per_item_bits, vec![56, 48, 52]);
        assert_eq!(report.per_item_bytes, vec![7, 6, 7]);
        assert_eq!(report.codes_container_bytes, buf.len() as u64);
        assert_eq!(buf.len() as u64, smcd_size(2, 3, &[2, 0, 1]));

        let mut reader = CodesReader::open(Cursor::new(&buf)).unwrap();
        reader.header().check_dictionary(&qd).unwrap();
        assert_eq!(reader.read_all().unwrap(), codes);
        for i in (0..3).rev() {
            assert_eq!(reader.read(i).unwrap(), codes[i as usize]);
        }
        assert!(matches!(reader.read(3), Err(Error::IndexOutOfRange { index: 3, len: 3 })));
        assert_eq!(read_code(Cursor::new(&buf), 2, dict_id(&qd)).unwrap(), codes[2]);
    }

    #[test]
    fn wrong_dictionary_is_detected() {
        let qd = small_dict();
        let other = small_dict().with_lambda_train(0.3);
        let mut buf = Vec::new();
        write_codes(&[QuantizedCode::empty(2, 4).unwrap()], 4, &qd, &mut buf).unwrap();
        let reader = CodesReader::open(Cursor::new(&buf)).unwrap();
        assert!(matches!(
            reader.header().check_dictionary(&other),
            Err(Error::DictionaryMismatch { .. })
        ));
        assert!(matches!(
            read_code(Cursor::new(&buf), 0, dict_id(&other)),
            Err(Error::DictionaryMismatch { .. })
        ));
    }

    #[test]
    fn truncated_codes() {
        let qd = small_dict();
        let codes = vec![QuantizedCode::new(2, 8, 1.0, vec![(0, 100), (1, -100)]).unwrap()];
        let mut buf = Vec::new();
        write_codes(&codes, 8, &qd, &mut buf).unwrap();
        buf.pop();
        let mut reader = CodesReader::open(Cursor::new(&buf)).unwrap();
        assert!(matches!(reader.read(0), Err(Error::Truncated)));
    }

    #[test]
    fn mismatched_code_parameters_rejected() {
        let qd = small_dict();
        let c = QuantizedCode::empty(3, 4).unwrap();
        assert!(write_codes(&[c], 4, &qd, Vec::new()).is_err());
        let c = QuantizedCode::empty(2, 5).unwrap();
        assert!(write_codes(&[c], 4, &qd, Vec::new()).is_err());
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}
