use crate::{Error, Result};

/// MSB-first bit packer.
#[derive(Debug, Default)]
pub struct BitWriter {
    buf: Vec<u8>,
    acc: u64,
    pending: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the low `nbits` bits of `value`, most significant first.
    pub fn write(&mut self, value: u64, nbits: u32) {
        debug_assert!(nbits <= 32);
        if nbits == 0 {
            return;
        }
        let value = value & ((1u64 << nbits) - 1);
        self.acc = (self.acc << nbits) | value;
        self.pending += nbits;
        while self.pending >= 8 {
            self.pending -= 8;
            self.buf.push((self.acc >> self.pending) as u8);
        }
        self.acc &= (1u64 << self.pending) - 1;
    }

    pub fn bits_written(&self) -> u64 {
        self.buf.len() as u64 * 8 + self.pending as u64
    }

    /// Pads the last partial byte with zeros.
    pub fn finish(mut self) -> Vec<u8> {
        if self.pending > 0 {
            self.buf.push((self.acc << (8 - self.pending)) as u8);
        }
        self.buf
    }
}

/// MSB-first reader over a byte slice.
#[derive(Debug)]
pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn read(&mut self, nbits: u32) -> Result<u64> {
        debug_assert!(nbits <= 32);
        if self.pos + nbits as u64 > self.data.len() as u64 * 8 {
            return Err(Error::Truncated);
        }
        let mut out = 0u64;
        for _ in 0..nbits {
            let byte = self.data[(self.pos / 8) as usize];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            out = (out << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(out)
    }
}

/// Field encoding of a quantizer level. One bit stores the sign
/// (`0 = +1`, `1 = -1`); wider fields are two's complement.
pub fn encode_level(level: i32, bits: u8) -> u64 {
    if bits == 1 {
        (level < 0) as u64
    } else {
        (level as i64 as u64) & ((1u64 << bits) - 1)
    }
}

pub fn decode_level(raw: u64, bits: u8) -> i32 {
    if bits == 1 {
        if raw & 1 == 1 {
            -1
        } else {
            1
        }
    } else {
        let shift = 64 - bits as u32;
        (((raw << shift) as i64) >> shift) as i32
    }
}

/// Bits needed to address `n` atoms: `ceil(log2 n)`, zero for a single atom.
pub fn index_bits(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}
