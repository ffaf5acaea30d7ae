//! Symmetric uniform scalar quantization of complex payloads.
//!
//! One scale per matrix: the largest absolute real or imaginary component.
//! Each component maps to the nearest of `2^Q` levels evenly spaced over
//! `[-scale, +scale]`, so every complex entry costs `2Q` bits.

use bitvec::prelude::*;
use ndarray::Array2;

use crate::codec::{Reader, Writer};
use crate::{CMatrix, Error, Result, C64};

pub const MAX_Q_BITS: u8 = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedMatrix {
    /// Real-part codes, row-major.
    pub re_codes: Array2<u32>,
    pub im_codes: Array2<u32>,
    pub scale: f64,
    pub q_bits: u8,
    /// Set when the source was exactly zero. An even level count has no
    /// zero level, so this is what lets the zero matrix round-trip.
    pub all_zero: bool,
}

fn levels_minus_one(q_bits: u8) -> u64 {
    (1u64 << q_bits) - 1
}

fn check_bits(q_bits: u8) -> Result<()> {
    if q_bits == 0 || q_bits > MAX_Q_BITS {
        return Err(Error::input(format!(
            "q_bits must be in 1..={MAX_Q_BITS}, got {q_bits}"
        )));
    }
    Ok(())
}

pub fn quantize(m: &CMatrix, q_bits: u8) -> Result<QuantizedMatrix> {
    check_bits(q_bits)?;
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::input("cannot quantize non-finite values"));
    }
    let peak = m
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.re.abs()).max(z.im.abs()));
    let all_zero = peak == 0.0;
    let scale = if all_zero { 1.0 } else { peak };
    let top = levels_minus_one(q_bits) as f64;
    let code = |x: f64| -> u32 {
        let t = ((x / scale + 1.0) * 0.5 * top).round();
        t.clamp(0.0, top) as u32
    };
    Ok(QuantizedMatrix {
        re_codes: m.mapv(|z| code(z.re)),
        im_codes: m.mapv(|z| code(z.im)),
        scale,
        q_bits,
        all_zero,
    })
}

pub fn dequantize(qm: &QuantizedMatrix) -> CMatrix {
    if qm.all_zero {
        return Array2::zeros(qm.re_codes.dim());
    }
    let top = levels_minus_one(qm.q_bits) as f64;
    let level = |c: u32| qm.scale * (2.0 * c as f64 / top - 1.0);
    let mut out = Array2::zeros(qm.re_codes.dim());
    ndarray::Zip::from(&mut out)
        .and(&qm.re_codes)
        .and(&qm.im_codes)
        .for_each(|o, &r, &i| *o = C64::new(level(r), level(i)));
    out
}

impl QuantizedMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.re_codes.dim()
    }

    /// Payload bits excluding the scale: `2 Q` per entry.
    pub fn payload_bits(&self) -> u64 {
        let (r, c) = self.shape();
        2 * self.q_bits as u64 * (r * c) as u64
    }

    pub fn validate(&self) -> Result<()> {
        check_bits(self.q_bits)?;
        if self.re_codes.dim() != self.im_codes.dim() {
            return Err(Error::input("real/imag code planes differ in shape"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::input("scale must be finite and > 0"));
        }
        let top = levels_minus_one(self.q_bits);
        if self
            .re_codes
            .iter()
            .chain(self.im_codes.iter())
            .any(|&c| c as u64 > top)
        {
            return Err(Error::input("code exceeds 2^Q - 1"));
        }
        Ok(())
    }

    /// `Q u8 | all_zero u8 | rows u32 | cols u32 | scale f64 | codes`.
    ///
    /// Codes are packed LSB-first, `Q` bits each, real then imaginary per
    /// entry in row-major order, zero-padded to a whole byte.
    pub fn write(&self, w: &mut Writer) {
        let (rows, cols) = self.shape();
        w.u8(self.q_bits);
        w.u8(self.all_zero as u8);
        w.u32(rows as u32);
        w.u32(cols as u32);
        w.f64(self.scale);
        let q = self.q_bits as usize;
        let mut bits: BitVec<u8, Lsb0> = BitVec::repeat(false, 2 * q * rows * cols);
        let mut at = 0;
        for (r, i) in self.re_codes.iter().zip(self.im_codes.iter()) {
            bits[at..at + q].store_le(*r);
            bits[at + q..at + 2 * q].store_le(*i);
            at += 2 * q;
        }
        w.bytes(bits.as_raw_slice());
    }

    pub fn read(r: &mut Reader<'_>) -> Result<Self> {
        let start = r.offset();
        let q_bits = r.u8("q_bits")?;
        check_bits(q_bits).map_err(|e| Error::format(start, e.to_string()))?;
        let all_zero = match r.u8("zero flag")? {
            0 => false,
            1 => true,
            v => return Err(Error::format(start + 1, format!("bad zero flag {v}"))),
        };
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        let scale = r.f64("scale")?;
        let q = q_bits as usize;
        let n_bits = 2 * q * rows * cols;
        let raw = r.take(n_bits.div_ceil(8), "packed codes")?;
        let bits = raw.view_bits::<Lsb0>();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for e in 0..rows * cols {
            let at = 2 * q * e;
            re.push(bits[at..at + q].load_le::<u32>());
            im.push(bits[at + q..at + 2 * q].load_le::<u32>());
        }
        let qm = QuantizedMatrix {
            re_codes: Array2::from_shape_vec((rows, cols), re).unwrap(),
            im_codes: Array2::from_shape_vec((rows, cols), im).unwrap(),
            scale,
            q_bits,
            all_zero,
        };
        qm.validate().map_err(|e| Error::format(start, e.to_string()))?;
        Ok(qm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_matrix() {
        for q in [1, 4, 8] {
            let z = CMatrix::zeros((3, 2));
            let qm = quantize(&z, q).unwrap();
            assert_eq!(qm.scale, 1.0);
            assert!(qm.all_zero);
            let mid = 1u32 << (q - 1);
            assert!(qm.re_codes.iter().all(|&c| c == mid));
            assert_eq!(dequantize(&qm), z);
            assert_eq!(quantize(&dequantize(&qm), q).unwrap(), qm);
        }
    }

    #[test]
    fn one_bit_endpoints_exact() {
        let s = 2.5;
        let m = array![[C64::new(-s, s), C64::new(s, -s)]];
        let qm = quantize(&m, 1).unwrap();
        assert_eq!(dequantize(&qm), m);
    }

    #[test]
    fn rejects_bad_bits_and_nan() {
        let m = array![[C64::new(1.0, 0.0)]];
        assert!(quantize(&m, 0).is_err());
        assert!(quantize(&m, 33).is_err());
        assert!(quantize(&array![[C64::new(f64::NAN, 0.0)]], 8).is_err());
    }

    #[test]
    fn shape_preserved() {
        let m = CMatrix::from_elem((4, 7), C64::new(0.1, -0.2));
        assert_eq!(dequantize(&quantize(&m, 6).unwrap()).dim(), (4, 7));
    }

    #[test]
    fn packing_roundtrip_odd_width() {
        let m = array![
            [C64::new(0.3, -1.0), C64::new(0.9, 0.2), C64::new(-0.45, 0.0)],
        ];
        for q in [1, 3, 5, 12, 16, 32] {
            let qm = quantize(&m, q).unwrap();
            let mut w = Writer::new();
            qm.write(&mut w);
            let buf = w.into_inner();
            assert_eq!(buf.len(), 18 + (2 * q as usize * 3).div_ceil(8));
            let mut r = Reader::new(&buf);
            assert_eq!(QuantizedMatrix::read(&mut r).unwrap(), qm);
            r.finish("qm").unwrap();
        }
    }

    #[test]
    fn payload_bit_count() {
        let qm = quantize(&CMatrix::from_elem((25, 2), C64::new(1.0, 1.0)), 8).unwrap();
        assert_eq!(qm.payload_bits(), 25 * 2 * 16);
    }
}
