//! Reconstruction fidelity, overhead reduction and feedback-bit budgets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pca::Mode;
use crate::{CMatrix, Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GcsVariant {
    /// `|<vec(H_hat), vec(H)>| / (|H_hat|_F |H|_F)`.
    #[default]
    Vectorized,
    /// Mean over columns of the per-column cosine similarity.
    PerColumnMean,
}

impl FromStr for GcsVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vectorized" => Ok(GcsVariant::Vectorized),
            "per-column-mean" => Ok(GcsVariant::PerColumnMean),
            _ => Err(Error::Config(format!(
                "unknown gcs variant `{s}` (expected vectorized or per-column-mean)"
            ))),
        }
    }
}

impl fmt::Display for GcsVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GcsVariant::Vectorized => "vectorized",
            GcsVariant::PerColumnMean => "per-column-mean",
        })
    }
}

fn cosine<'a, I>(pairs: I) -> Option<f64>
where
    I: Iterator<Item = (&'a C64, &'a C64)>,
{
    let (mut inner, mut ee, mut rr) = (C64::new(0.0, 0.0), 0.0, 0.0);
    for (e, r) in pairs {
        inner += e.conj() * r;
        ee += e.norm_sqr();
        rr += r.norm_sqr();
    }
    if rr == 0.0 {
        return None;
    }
    if ee == 0.0 {
        return Some(0.0);
    }
    Some((inner.norm() / (ee.sqrt() * rr.sqrt())).min(1.0))
}

/// Generalized cosine similarity between an estimate and the true channel.
///
/// Invariant to any nonzero complex scaling of either argument.
pub fn gcs(h_hat: &CMatrix, h: &CMatrix, variant: GcsVariant) -> Result<f64> {
    if h_hat.dim() != h.dim() {
        return Err(Error::input(format!(
            "gcs shapes differ: {:?} vs {:?}",
            h_hat.dim(),
            h.dim()
        )));
    }
    let zero_ref = || Error::degenerate("gcs reference channel is zero");
    match variant {
        GcsVariant::Vectorized => cosine(h_hat.iter().zip(h.iter())).ok_or_else(zero_ref),
        GcsVariant::PerColumnMean => {
            let mut acc = 0.0;
            for (j, (e, r)) in h_hat.columns().into_iter().zip(h.columns()).enumerate() {
                acc += cosine(e.iter().zip(r.iter())).ok_or_else(|| {
                    Error::degenerate(format!("gcs reference column {j} is zero"))
                })?;
            }
            Ok(acc / h.ncols() as f64)
        }
    }
}

/// Fractional payload saving of an `L x N_t` AD report compressed to `k`
/// components: `(L N_t - (L + N_t) k) / (L N_t)`. Negative when PCA costs
/// more than it saves.
pub fn overhead_reduction_ad(l: usize, n_t: usize, k: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::input("L must be >= 1"));
    }
    if k == 0 || k > n_t {
        return Err(Error::input(format!("k={k} outside 1..={n_t}")));
    }
    Ok(overhead(l, n_t, k))
}

/// Same ratio for an `N_t x N_SB` eigenvector report with `k <= N_SB`.
pub fn overhead_reduction_ev(n_sb: usize, n_t: usize, k: usize) -> Result<f64> {
    if n_t == 0 {
        return Err(Error::input("N_t must be >= 1"));
    }
    if k == 0 || k > n_sb {
        return Err(Error::input(format!("k={k} outside 1..={n_sb}")));
    }
    Ok(overhead(n_sb, n_t, k))
}

fn overhead(a: usize, b: usize, k: usize) -> f64 {
    let full = (a * b) as f64;
    (full - ((a + b) * k) as f64) / full
}

/// How a fraction is turned into a printed whole percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rounding {
    HalfAwayFromZero,
    Floor,
}

/// `100 x`, rounded to a whole percent.
///
/// The scaled value is first snapped to 1e-9 so a fraction like `0.77`
/// that lands at `76.99999999999999` still floors to 77.
pub fn percent_display(x: f64, rounding: Rounding) -> i64 {
    let p = ((100.0 * x) * 1e9).round() / 1e9;
    match rounding {
        Rounding::HalfAwayFromZero => p.round() as i64,
        Rounding::Floor => p.floor() as i64,
    }
}

/// An overhead value with both display conventions attached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverheadDisplay {
    pub exact: f64,
    pub round_pct: i64,
    pub floor_pct: i64,
}

impl OverheadDisplay {
    pub fn new(exact: f64) -> Self {
        Self {
            exact,
            round_pct: percent_display(exact, Rounding::HalfAwayFromZero),
            floor_pct: percent_display(exact, Rounding::Floor),
        }
    }

    /// Whether a printed percentage agrees with either convention.
    pub fn matches(&self, printed: i64) -> bool {
        printed == self.round_pct || printed == self.floor_pct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSchedule {
    /// CSI reporting period, seconds.
    pub tau_p: f64,
    /// Transform matrices are resent every `k_refresh` reports.
    pub k_refresh: u64,
    pub q_bits: u8,
}

impl FeedbackSchedule {
    pub fn new(tau_p: f64, k_refresh: u64, q_bits: u8) -> Result<Self> {
        let s = Self {
            tau_p,
            k_refresh,
            q_bits,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_p.is_finite() && self.tau_p > 0.0) {
            return Err(Error::input("tau_p must be finite and > 0"));
        }
        if self.k_refresh == 0 {
            return Err(Error::input("k_refresh must be >= 1"));
        }
        if self.q_bits == 0 {
            return Err(Error::input("q_bits must be >= 1"));
        }
        Ok(())
    }

    /// Transform refresh period `tau_r = k tau_p`.
    pub fn tau_r(&self) -> f64 {
        self.k_refresh as f64 * self.tau_p
    }
}

/// Average bits per CSI report, and the same rounded up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackBits {
    pub average: f64,
    pub ceil: u64,
    /// Compressed payload bits, sent every report.
    pub compressed: u64,
    /// Transform bits, before amortization over `k_refresh`.
    pub transform: u64,
}

/// `B_T = B_C + B_R tau_p / tau_r`, with `2Q` bits per complex entry.
///
/// `dims` is `(L, N_t)` for AD reports and `(N_SB, N_t)` for EV reports.
pub fn feedback_bits(mode: Mode, dims: (usize, usize), k: usize, sched: &FeedbackSchedule) -> Result<FeedbackBits> {
    sched.validate()?;
    let (rows, n_t) = dims;
    if rows == 0 || n_t == 0 {
        return Err(Error::input(format!("invalid report dims {dims:?}")));
    }
    // (entries sent every report, entries sent every k_refresh reports)
    let (per_report, per_refresh, k_cap) = match mode {
        Mode::Ad => (rows * k, k * n_t, n_t),
        Mode::Ev => (n_t * k, k * rows, rows),
    };
    if k == 0 || k > k_cap {
        return Err(Error::input(format!("k={k} outside 1..={k_cap}")));
    }
    let bits_per_entry = 2 * sched.q_bits as u64;
    let compressed = per_report as u64 * bits_per_entry;
    let transform = per_refresh as u64 * bits_per_entry;
    let kr = sched.k_refresh;
    // exact rational: (compressed * kr + transform) / kr
    let num = compressed as u128 * kr as u128 + transform as u128;
    Ok(FeedbackBits {
        average: compressed as f64 + transform as f64 / kr as f64,
        ceil: num.div_ceil(kr as u128) as u64,
        compressed,
        transform,
    })
}
