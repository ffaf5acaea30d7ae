//! Little-endian binary encoding shared by every on-disk format.
//!
//! Complex entries are always written as two `f64` values, real part first.
//! Matrices are written row-major with no per-row framing.

use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(cap: usize) -> Self {
        Self {
            buf: Vec::with_capacity(cap),
        }
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn c64(&mut self, v: C64) {
        self.f64(v.re);
        self.f64(v.im);
    }

    /// Writes the entries only; dimensions are the caller's business.
    pub fn matrix(&mut self, m: &CMatrix) {
        for &z in m.iter() {
            self.c64(z);
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

/// Cursor over a byte slice that reports the offset of every failure.
#[derive(Debug)]
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::format(
                self.offset(),
                format!(
                    "truncated {what}: need {n} bytes, {} left",
                    self.remaining()
                ),
            ));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn c64(&mut self, what: &str) -> Result<C64> {
        let re = self.f64(what)?;
        let im = self.f64(what)?;
        Ok(C64::new(re, im))
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<CMatrix> {
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(16))
            .ok_or_else(|| Error::format(self.offset(), format!("{what} dimensions overflow")))?;
        let start = self.offset();
        let bytes = self.take(n, what).map_err(|_| {
            Error::format(
                start,
                format!(
                    "truncated {what}: need {n} bytes for {rows}x{cols}, {} left",
                    self.remaining()
                ),
            )
        })?;
        let vals = bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect();
        Ok(CMatrix::from_shape_vec((rows, cols), vals).expect("length checked above"))
    }

    /// Fails unless every byte has been consumed.
    pub fn finish(&self, what: &str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::format(
                self.offset(),
                format!("{} trailing bytes after {what}", self.remaining()),
            ));
        }
        Ok(())
    }
}

/// Rotates `v` so its largest-magnitude entry is real and positive.
///
/// Ties go to the lowest index. A zero vector is left untouched.
pub fn normalize_phase<'a, I>(entries: I)
where
    I: IntoIterator<Item = &'a mut C64>,
{
    let mut refs: Vec<&mut C64> = entries.into_iter().collect();
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in refs.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best = i;
            best_mag = m;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let pivot = *refs[best];
    let rot = pivot.conj() / best_mag;
    for z in refs.iter_mut() {
        **z *= rot;
    }
    // exact, not merely within rounding
    *refs[best] = C64::new(best_mag, 0.0);
}
