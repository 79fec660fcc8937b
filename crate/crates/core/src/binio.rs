//! Little-endian helpers shared by the binary file formats.
//!
//! The reader never allocates more than the remaining input can back, so a
//! forged length field cannot trigger a huge allocation.

use std::io;

use crate::error::{Error, Result};

/// How a short read is reported.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Truncation {
    Io,
    Format,
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
    truncation: Truncation,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], what: &'static str, truncation: Truncation) -> Self {
        Self {
            buf,
            pos: 0,
            what,
            truncation,
        }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn err(&self, reason: impl Into<String>) -> Error {
        Error::format(self.what, reason)
    }

    fn truncated(&self, wanted: usize) -> Error {
        let msg = format!(
            "truncated {}: needed {wanted} bytes at offset {}, {} left",
            self.what,
            self.pos,
            self.remaining()
        );
        match self.truncation {
            Truncation::Io => Error::Io(io::Error::new(io::ErrorKind::UnexpectedEof, msg)),
            Truncation::Format => Error::format(self.what, msg),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(self.truncated(n));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked by take"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// A `u32` count used as a length, as `usize`.
    pub fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn sized(&mut self, count: usize, width: usize) -> Result<&'a [u8]> {
        let bytes = count.checked_mul(width).ok_or_else(|| self.truncated(usize::MAX))?;
        self.take(bytes)
    }

    /// `count` f32 values widened to f64; rejects non-finite values.
    pub fn f32_vec(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.sized(count, 4)?;
        let out: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(self.err("non-finite value"));
        }
        Ok(out)
    }

    pub fn f64_vec(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.sized(count, 8)?;
        let out: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(self.err("non-finite value"));
        }
        Ok(out)
    }

    pub fn u32_vec(&mut self, count: usize) -> Result<Vec<u32>> {
        let raw = self.sized(count, 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    /// UTF-8 string prefixed by a `u16` length.
    pub fn short_str(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.err("string is not valid UTF-8"))
    }

    pub fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(self.err(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.err(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    /// Lengths are stored as `u32`; anything larger is a caller bug.
    pub fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length exceeds u32"));
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn short_str(&mut self, s: &str) {
        self.u16(u16::try_from(s.len()).expect("string longer than u16::MAX"));
        self.bytes(s.as_bytes());
    }
}
