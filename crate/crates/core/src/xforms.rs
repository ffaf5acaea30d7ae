//! Channel representations: spatial-frequency, angular-delay and sub-band
//! eigenvectors.
//!
//! The angular-delay transform is `H_ad = F_d H_f F_a^H` with both DFT
//! matrices unitary (`F[m, n] = exp(-j 2 pi m n / dim) / sqrt(dim)`), so the
//! inverse is the conjugate transpose and Frobenius norms are preserved.
//! With this sign convention a path delay `d` lands on delay row
//! `-N scs d mod N`, i.e. small positive delays wrap to the last rows;
//! top-energy tap selection handles that transparently.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use rustfft::{FftDirection, FftPlanner};

use crate::chanforge::Cfr;
use crate::codec::{normalize_phase, Reader, Writer};
use crate::{CMatrix, Error, Result, C64};

/// Full `N x N_t` angular-delay matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDelay {
    pub data: CMatrix,
    /// Carried through from the source [`Cfr`] so the inverse can rebuild it.
    pub subcarrier_spacing: f64,
    pub sample_id: u64,
}

/// `L` retained delay rows of an angular-delay matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TapChannel {
    pub data: CMatrix,
    /// Strictly increasing row indices into the full matrix.
    pub tap_indices: Vec<usize>,
    pub n_full: usize,
}

/// `N_t x N_SB` concatenation of per-sub-band dominant eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EvMatrix {
    pub data: CMatrix,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TapPolicy {
    /// Highest row energy wins; ties go to the lower index.
    #[default]
    TopEnergy,
    /// Rows `0..L`.
    FirstL,
}

impl FromStr for TapPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top-energy" => Ok(TapPolicy::TopEnergy),
            "first-l" | "first-L" => Ok(TapPolicy::FirstL),
            _ => Err(Error::Config(format!(
                "unknown tap policy `{s}` (expected top-energy or first-l)"
            ))),
        }
    }
}

impl fmt::Display for TapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TapPolicy::TopEnergy => "top-energy",
            TapPolicy::FirstL => "first-l",
        })
    }
}

thread_local! {
    // plans are cached inside the planner
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unitary DFT of every lane along `axis`.
fn dft_along(m: &mut CMatrix, axis: Axis, direction: FftDirection) {
    let len = m.len_of(axis);
    if len == 0 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction));
    let scale = 1.0 / (len as f64).sqrt();
    let mut buf = vec![C64::new(0.0, 0.0); len];
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for mut lane in m.lanes_mut(axis) {
        for (b, z) in buf.iter_mut().zip(lane.iter()) {
            *b = *z;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (z, b) in lane.iter_mut().zip(&buf) {
            *z = b * scale;
        }
    }
}

pub fn to_angular_delay(h: &Cfr) -> AngularDelay {
    let mut data = h.data.clone();
    // F_d from the left: forward transform down each antenna column.
    dft_along(&mut data, Axis(0), FftDirection::Forward);
    // F_a^H from the right: inverse transform along each subcarrier row.
    dft_along(&mut data, Axis(1), FftDirection::Inverse);
    AngularDelay {
        data,
        subcarrier_spacing: h.subcarrier_spacing,
        sample_id: h.sample_id,
    }
}

pub fn from_angular_delay(h_ad: &AngularDelay) -> Cfr {
    let mut data = h_ad.data.clone();
    dft_along(&mut data, Axis(0), FftDirection::Inverse);
    dft_along(&mut data, Axis(1), FftDirection::Forward);
    Cfr {
        data,
        subcarrier_spacing: h_ad.subcarrier_spacing,
        sample_id: h_ad.sample_id,
    }
}

pub fn row_energies(m: &CMatrix) -> Vec<f64> {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

pub fn select_taps(h_ad: &AngularDelay, l: usize, policy: TapPolicy) -> Result<TapChannel> {
    let n = h_ad.data.nrows();
    if l == 0 || l > n {
        return Err(Error::input(format!("tap count L={l} outside 1..={n}")));
    }
    let mut idx: Vec<usize> = match policy {
        TapPolicy::FirstL => (0..l).collect(),
        TapPolicy::TopEnergy => {
            let e = row_energies(&h_ad.data);
            let mut order: Vec<usize> = (0..n).collect();
            // stable sort keeps lower index first among equal energies
            order.sort_by(|&a, &b| e[b].total_cmp(&e[a]));
            order.truncate(l);
            order
        }
    };
    idx.sort_unstable();
    let data = h_ad.data.select(Axis(0), &idx);
    Ok(TapChannel {
        data,
        tap_indices: idx,
        n_full: n,
    })
}

/// Zero-fills the rows that were not kept.
pub fn embed_taps(t: &TapChannel) -> Result<AngularDelay> {
    t.validate()?;
    let mut full = Array2::zeros((t.n_full, t.data.ncols()));
    for (row, &i) in t.data.rows().into_iter().zip(&t.tap_indices) {
        full.row_mut(i).assign(&row);
    }
    Ok(AngularDelay {
        data: full,
        subcarrier_spacing: 0.0,
        sample_id: 0,
    })
}

impl TapChannel {
    pub fn validate(&self) -> Result<()> {
        if self.tap_indices.len() != self.data.nrows() {
            return Err(Error::input(format!(
                "{} tap indices for {} rows",
                self.tap_indices.len(),
                self.data.nrows()
            )));
        }
        if self.tap_indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("tap indices must be strictly increasing"));
        }
        if let Some(&last) = self.tap_indices.last() {
            if last >= self.n_full {
                return Err(Error::input(format!(
                    "tap index {last} out of range for N={}",
                    self.n_full
                )));
            }
        }
        Ok(())
    }

    pub fn n_taps(&self) -> usize {
        self.data.nrows()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(b"TAP1");
        w.u32(self.data.nrows() as u32);
        w.u32(self.data.ncols() as u32);
        w.u32(self.n_full as u32);
        for &i in &self.tap_indices {
            w.u32(i as u32);
        }
        w.matrix(&self.data);
        w.into_inner()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        if r.take(4, "magic")? != b"TAP1" {
            return Err(Error::format(0, "bad magic, expected \"TAP1\""));
        }
        let l = r.u32("L")? as usize;
        let nt = r.u32("N_t")? as usize;
        let n_full = r.u32("N")? as usize;
        let tap_indices = (0..l)
            .map(|_| r.u32("tap index").map(|i| i as usize))
            .collect::<Result<Vec<_>>>()?;
        let data = r.matrix(l, nt, "taps")?;
        r.finish("tap channel")?;
        let t = TapChannel {
            data,
            tap_indices,
            n_full,
        };
        t.validate().map_err(|e| Error::format(16, e.to_string()))?;
        Ok(t)
    }
}

/// Mean channel row of each of `n_sb` equal-width sub-bands, as an
/// `n_sb x N_t` matrix.
pub fn subband_average(h: &Cfr, n_sb: usize) -> Result<CMatrix> {
    let n = h.n_subcarriers();
    if n_sb == 0 || n % n_sb != 0 {
        return Err(Error::input(format!(
            "N={n} subcarriers cannot be split into n_sb={n_sb} equal sub-bands"
        )));
    }
    let width = n / n_sb;
    let mut out = Array2::zeros((n_sb, h.n_ports()));
    for (k, chunk) in h.data.axis_chunks_iter(Axis(0), width).enumerate() {
        let mean = chunk.mean_axis(Axis(0)).expect("width > 0");
        out.row_mut(k).assign(&mean);
    }
    Ok(out)
}

/// Dominant eigenvector of `h_k^H h_k` for every sub-band row `h_k`.
///
/// With a single receive antenna the Gram matrix is rank one and its
/// dominant eigenvector is `h_k^H / |h_k|`, which is used directly.
pub fn subband_eigenvectors(h_list: &CMatrix) -> Result<EvMatrix> {
    let (n_sb, nt) = h_list.dim();
    let mut data = Array2::zeros((nt, n_sb));
    for (k, h_k) in h_list.rows().into_iter().enumerate() {
        let norm = h_k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::degenerate(format!(
                "sub-band {k} has a zero (or non-finite) average channel"
            )));
        }
        let mut col = data.column_mut(k);
        for (dst, z) in col.iter_mut().zip(h_k.iter()) {
            *dst = z.conj() / norm;
        }
        normalize_phase(col.iter_mut());
    }
    Ok(EvMatrix { data, rank: 1 })
}

/// Sub-band averaging followed by per-sub-band eigenvectors.
pub fn ev_matrix(h: &Cfr, n_sb: usize) -> Result<EvMatrix> {
    subband_eigenvectors(&subband_average(h, n_sb)?)
}

impl EvMatrix {
    pub fn n_ports(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_subbands(&self) -> usize {
        self.data.ncols()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(b"EVM1");
        w.u32(self.data.nrows() as u32);
        w.u32(self.data.ncols() as u32);
        w.u32(self.rank as u32);
        w.matrix(&self.data);
        w.into_inner()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        if r.take(4, "magic")? != b"EVM1" {
            return Err(Error::format(0, "bad magic, expected \"EVM1\""));
        }
        let nt = r.u32("N_t")? as usize;
        let n_sb = r.u32("N_SB")? as usize;
        let rank = r.u32("rank")? as usize;
        let data = r.matrix(nt, n_sb, "eigenvectors")?;
        r.finish("eigenvector matrix")?;
        Ok(EvMatrix { data, rank })
    }
}
