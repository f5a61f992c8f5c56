//! Little-endian primitives shared by the container formats.

use std::io::{Read, Write};

use crate::{Error, Result};

pub(crate) fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(Error::from_read)?;
    Ok(buf)
}

pub(crate) fn read_u8(r: &mut impl Read) -> Result<u8> {
    Ok(read_array::<1>(r)?[0])
}

pub(crate) fn read_u16(r: &mut impl Read) -> Result<u16> {
    read_array(r).map(u16::from_le_bytes)
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    read_array(r).map(u32::from_le_bytes)
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    read_array(r).map(u64::from_le_bytes)
}

pub(crate) fn read_f32(r: &mut impl Read) -> Result<f32> {
    read_array(r).map(f32::from_le_bytes)
}

pub(crate) fn expect_magic(r: &mut impl Read, expected: &[u8; 4]) -> Result<()> {
    let found: [u8; 4] = read_array(r)?;
    if &found != expected {
        return Err(Error::BadMagic {
            expected: *expected,
            found,
        });
    }
    Ok(())
}

pub(crate) fn expect_version(r: &mut impl Read, supported: u16) -> Result<()> {
    let version = read_u16(r)?;
    if version != supported {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok(())
}

/// Reads exactly `len` bytes without trusting `len` for the initial allocation.
pub(crate) fn read_vec(r: &mut impl Read, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(len.min(1 << 20));
    let got = r.take(len as u64).read_to_end(&mut buf)?;
    if got != len {
        return Err(Error::Truncated);
    }
    Ok(buf)
}

/// Counts bytes passing through to the inner writer.
pub(crate) struct CountingWriter<W> {
    inner: W,
    pub(crate) written: u64,
}

impl<W: Write> CountingWriter<W> {
    pub(crate) fn new(inner: W) -> Self {
        Self { inner, written: 0 }
    }
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}
