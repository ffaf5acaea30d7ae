//! Per-instance PCA of a single channel matrix.
//!
//! Every channel sample gets its own basis. There is no mean-centering:
//! reconstruction is `compressed * transform^H` with nothing added back, so
//! the basis is simply the leading right singular vectors of the raw matrix
//! and compression is a truncated SVD.
//!
//! The SVD is a one-sided (Hestenes) Jacobi iteration. It is deterministic,
//! accurate to working precision for the small matrices seen here
//! (`L x N_t` and `N_t x N_SB`), and needs no LAPACK.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2};

use crate::codec::{normalize_phase, Reader, Writer};
use crate::quant::{dequantize, quantize, QuantizedMatrix};
use crate::xforms::{EvMatrix, TapChannel};
use crate::{CMatrix, Error, Result, C64};

/// Default cumulative-variance target for [`choose_components`].
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.99;

const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Angular-delay taps, PCA over the antenna axis.
    Ad,
    /// Sub-band eigenvectors, PCA over the sub-band axis.
    Ev,
}

impl Mode {
    fn tag(self) -> u8 {
        match self {
            Mode::Ad => 0,
            Mode::Ev => 1,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ad" => Ok(Mode::Ad),
            "ev" => Ok(Mode::Ev),
            _ => Err(Error::Config(format!("unknown pipeline `{s}` (expected ad or ev)"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ad => "AD",
            Mode::Ev => "EV",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    /// `D x K_max`, orthonormal columns.
    pub components: CMatrix,
    /// Nonincreasing, length `K_max`.
    pub singular_values: Vec<f64>,
    pub mode: Mode,
}

/// Thin SVD factors sorted by decreasing singular value.
struct Svd {
    /// `D x D` unitary.
    v: CMatrix,
    sigma: Vec<f64>,
}

fn jacobi_svd(a: &CMatrix) -> Svd {
    let (rows, d) = a.dim();
    let mut cols: Vec<Vec<C64>> = a.columns().into_iter().map(|c| c.to_vec()).collect();
    let mut v: Vec<Vec<C64>> = (0..d)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); d];
            e[j] = C64::new(1.0, 0.0);
            e
        })
        .collect();

    // Columns driven into the null space carry only rounding noise and
    // never become orthogonal to relative precision; leave them alone.
    let frob_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let negligible = (f64::EPSILON * f64::EPSILON) * frob_sq;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let (alpha, beta, gamma) = {
                    let (ap, aq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = C64::new(0.0, 0.0);
                    for i in 0..rows {
                        alpha += ap[i].norm_sqr();
                        beta += aq[i].norm_sqr();
                        gamma += ap[i].conj() * aq[i];
                    }
                    (alpha, beta, gamma)
                };
                let g = gamma.norm();
                if g == 0.0
                    || alpha <= negligible
                    || beta <= negligible
                    || g <= JACOBI_TOL * (alpha * beta).sqrt()
                {
                    continue;
                }
                rotated = true;
                // Rephase column q so the pair's inner product is real, then
                // apply the real two-sided Jacobi rotation.
                let unphase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut cols, &mut v] {
                    let (lo, hi) = m.split_at_mut(q);
                    let (xp, xq) = (&mut lo[p], &mut hi[0]);
                    for (zp, zq) in xp.iter_mut().zip(xq.iter_mut()) {
                        let tq = *zq * unphase;
                        let np = *zp * c - tq * s;
                        *zq = *zp * s + tq * c;
                        *zp = np;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let mut vm = Array2::zeros((d, d));
    for (dst, &src) in order.iter().enumerate() {
        for (i, z) in v[src].iter().enumerate() {
            vm[[i, dst]] = *z;
        }
    }
    Svd {
        v: vm,
        sigma: order.iter().map(|&i| norms[i]).collect(),
    }
}

/// Right singular vectors of `matrix` (rows are observations, columns the
/// reduced dimension), each rotated so its largest entry is real positive.
pub fn pca_fit(matrix: &CMatrix, mode: Mode) -> Result<PcaBasis> {
    let (rows, d) = matrix.dim();
    if rows == 0 || d == 0 {
        return Err(Error::input(format!("cannot fit PCA to a {rows}x{d} matrix")));
    }
    if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::input("PCA input contains non-finite entries"));
    }
    let k_max = rows.min(d);
    let svd = jacobi_svd(matrix);
    let mut components = svd.v.slice(s![.., ..k_max]).to_owned();
    for mut col in components.columns_mut() {
        normalize_phase(col.iter_mut());
    }
    Ok(PcaBasis {
        components,
        singular_values: svd.sigma[..k_max].to_vec(),
        mode,
    })
}

impl PcaBasis {
    pub fn k_max(&self) -> usize {
        self.singular_values.len()
    }

    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    /// Per-component share of total energy, `sigma_i^2 / sum sigma^2`.
    pub fn explained_variance(&self) -> Result<Vec<f64>> {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total <= 0.0 {
            return Err(Error::degenerate("all-zero singular value spectrum"));
        }
        Ok(self.singular_values.iter().map(|s| s * s / total).collect())
    }

    pub fn cumulative_variance(&self) -> Result<Vec<f64>> {
        let mut acc = 0.0;
        Ok(self
            .explained_variance()?
            .into_iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect())
    }
}

/// Smallest `k` whose cumulative explained variance reaches `threshold`.
///
/// Comparisons allow 1e-12 of slack so that `threshold = 1.0` yields the
/// numerical rank rather than tripping over rounding in the running sum.
pub fn choose_components(basis: &PcaBasis, variance_threshold: f64) -> Result<usize> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::input(format!(
            "variance threshold must be in (0, 1], got {variance_threshold}"
        )));
    }
    let cum = basis.cumulative_variance()?;
    let k = cum
        .iter()
        .position(|&c| c >= variance_threshold - 1e-12)
        .map_or(cum.len(), |i| i + 1);
    Ok(k)
}

/// A report payload as it travels from UE to gNB.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Raw(CMatrix),
    Quantized(QuantizedMatrix),
}

impl Payload {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Payload::Raw(m) => m.dim(),
            Payload::Quantized(q) => q.shape(),
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        match self {
            Payload::Raw(m) => m.clone(),
            Payload::Quantized(q) => dequantize(q),
        }
    }

    fn quantized(&self, q_bits: u8) -> Result<Payload> {
        match self {
            Payload::Raw(m) => Ok(Payload::Quantized(quantize(m, q_bits)?)),
            Payload::Quantized(_) => Err(Error::input("payload is already quantized")),
        }
    }
}

/// Where the retained delay rows of an AD report sit in the full matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TapLayout {
    pub indices: Vec<usize>,
    pub n_full: usize,
}

/// Compressed channel plus the transformation needed to invert it.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiReport {
    pub mode: Mode,
    /// `S x k`.
    pub compressed: Payload,
    /// `D x k`.
    pub transform: Payload,
    pub taps: Option<TapLayout>,
}

pub fn compress(matrix: &CMatrix, basis: &PcaBasis, k: usize) -> Result<CsiReport> {
    if k == 0 || k > basis.k_max() {
        return Err(Error::input(format!(
            "component count k={k} outside 1..={}",
            basis.k_max()
        )));
    }
    if matrix.ncols() != basis.dim() {
        return Err(Error::input(format!(
            "matrix has {} columns, basis expects {}",
            matrix.ncols(),
            basis.dim()
        )));
    }
    let transform = basis.components.slice(s![.., ..k]).to_owned();
    let compressed = matrix.dot(&transform);
    Ok(CsiReport {
        mode: basis.mode,
        compressed: Payload::Raw(compressed),
        transform: Payload::Raw(transform),
        taps: None,
    })
}

/// Inverse PCA: `compressed * transform^H`, dequantizing first if needed.
pub fn reconstruct(report: &CsiReport) -> Result<CMatrix> {
    let (s, kc) = report.compressed.shape();
    let (d, kt) = report.transform.shape();
    if kc != kt {
        return Err(Error::input(format!(
            "compressed is {s}x{kc} but transform is {d}x{kt}"
        )));
    }
    let c = report.compressed.to_matrix();
    let t = report.transform.to_matrix();
    Ok(c.dot(&t.t().mapv(|z| z.conj())))
}

pub fn compress_ad(t: &TapChannel, k: usize) -> Result<CsiReport> {
    t.validate()?;
    let basis = pca_fit(&t.data, Mode::Ad)?;
    let mut r = compress(&t.data, &basis, k)?;
    r.taps = Some(TapLayout {
        indices: t.tap_indices.clone(),
        n_full: t.n_full,
    });
    Ok(r)
}

/// PCA over the sub-band axis: the `N_t` antenna rows are the observations.
pub fn compress_ev(e: &EvMatrix, k: usize) -> Result<CsiReport> {
    let basis = pca_fit(&e.data, Mode::Ev)?;
    compress(&e.data, &basis, k)
}

impl CsiReport {
    pub fn k(&self) -> usize {
        self.transform.shape().1
    }

    pub fn q_bits(&self) -> Option<u8> {
        match (&self.compressed, &self.transform) {
            (Payload::Quantized(q), _) | (_, Payload::Quantized(q)) => Some(q.q_bits),
            _ => None,
        }
    }

    /// Quantizes both payloads with `q_bits` per real component.
    pub fn quantized(&self, q_bits: u8) -> Result<CsiReport> {
        Ok(CsiReport {
            mode: self.mode,
            compressed: self.compressed.quantized(q_bits)?,
            transform: self.transform.quantized(q_bits)?,
            taps: self.taps.clone(),
        })
    }

    /// Rebuilds the `L x N_t` tap channel of an AD report.
    pub fn reconstruct_taps(&self) -> Result<TapChannel> {
        let layout = self
            .taps
            .as_ref()
            .ok_or_else(|| Error::input("report carries no tap layout"))?;
        let t = TapChannel {
            data: reconstruct(self)?,
            tap_indices: layout.indices.clone(),
            n_full: layout.n_full,
        };
        t.validate()?;
        Ok(t)
    }

    /// `mode u8 | q_bits u8 | S u32 | k u32 | D u32 | [AD: N u32, S x u32
    /// tap indices] | compressed | transform`.
    ///
    /// With `q_bits == 0` payloads are raw complex f64 pairs, row-major;
    /// otherwise each is a bit-packed [`QuantizedMatrix`].
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (s, k) = self.compressed.shape();
        let (d, _) = self.transform.shape();
        let q = self.q_bits().unwrap_or(0);
        let both_raw = matches!((&self.compressed, &self.transform), (Payload::Raw(_), Payload::Raw(_)));
        let both_q = matches!(
            (&self.compressed, &self.transform),
            (Payload::Quantized(a), Payload::Quantized(b)) if a.q_bits == b.q_bits
        );
        if !(both_raw || both_q) {
            return Err(Error::input("payloads must share one quantization setting"));
        }
        let mut w = Writer::new();
        w.u8(self.mode.tag());
        w.u8(q);
        w.u32(s as u32);
        w.u32(k as u32);
        w.u32(d as u32);
        match (self.mode, &self.taps) {
            (Mode::Ad, Some(layout)) => {
                if layout.indices.len() != s {
                    return Err(Error::input("tap index count differs from compressed rows"));
                }
                w.u32(layout.n_full as u32);
                for &i in &layout.indices {
                    w.u32(i as u32);
                }
            }
            (Mode::Ad, None) => return Err(Error::input("AD report needs a tap layout")),
            (Mode::Ev, _) => {}
        }
        for p in [&self.compressed, &self.transform] {
            match p {
                Payload::Raw(m) => w.matrix(m),
                Payload::Quantized(qm) => qm.write(&mut w),
            }
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let mode = match r.u8("mode")? {
            0 => Mode::Ad,
            1 => Mode::Ev,
            v => return Err(Error::format(0, format!("unknown mode byte {v}"))),
        };
        let q = r.u8("q_bits")?;
        let s = r.u32("rows")? as usize;
        let k = r.u32("k")? as usize;
        let d = r.u32("dim")? as usize;
        let taps = if mode == Mode::Ad {
            let n_full = r.u32("N")? as usize;
            let indices = (0..s)
                .map(|_| r.u32("tap index").map(|i| i as usize))
                .collect::<Result<Vec<_>>>()?;
            Some(TapLayout { indices, n_full })
        } else {
            None
        };
        let mut read_payload = |rows: usize, what: &str| -> Result<Payload> {
            let at = r.offset();
            let p = if q == 0 {
                Payload::Raw(r.matrix(rows, k, what)?)
            } else {
                let qm = QuantizedMatrix::read(&mut r)?;
                if qm.q_bits != q || qm.shape() != (rows, k) {
                    return Err(Error::format(at, format!("{what} header disagrees with report header")));
                }
                Payload::Quantized(qm)
            };
            Ok(p)
        };
        let compressed = read_payload(s, "compressed")?;
        let transform = read_payload(d, "transform")?;
        r.finish("report")?;
        Ok(CsiReport {
            mode,
            compressed,
            transform,
            taps,
        })
    }
}

/// Frobenius norm.
pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `components^H components`, for orthonormality checks.
pub fn gram(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj()).dot(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random(rows: usize, cols: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn rank_one_spectrum() {
        let u = array![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)];
        let v = array![c(0.5, 0.5), c(2.0, 0.0)];
        let m = Array2::from_shape_fn((3, 2), |(i, j)| u[i] * v[j].conj());
        let b = pca_fit(&m, Mode::Ad).unwrap();
        let nu = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((b.singular_values[0] - nu * nv).abs() < 1e-12);
        assert!(b.singular_values[1] < 1e-12);
        // first component is v / |v| up to phase
        let inner: C64 = b.components.column(0).iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((inner.norm() - nv).abs() < 1e-12);
        assert_eq!(choose_components(&b, 0.99).unwrap(), 1);
    }

    #[test]
    fn identity_spectrum() {
        let m = Array2::from_diag(&array![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let b = pca_fit(&m, Mode::Ev).unwrap();
        for s in &b.singular_values {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fit_rejects_nan_and_empty() {
        assert!(pca_fit(&array![[c(f64::NAN, 0.0)]], Mode::Ad).is_err());
        assert!(pca_fit(&CMatrix::zeros((0, 3)), Mode::Ad).is_err());
    }

    #[test]
    fn components_are_orthonormal_and_sorted() {
        for (r, d, seed) in [(25, 32, 1), (5, 32, 2), (32, 13, 3), (7, 7, 4)] {
            let b = pca_fit(&random(r, d, seed), Mode::Ad).unwrap();
            assert_eq!(b.k_max(), r.min(d));
            let g = gram(&b.components);
            for ((i, j), z) in g.indexed_iter() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((z - c(want, 0.0)).norm() < 1e-10, "{r}x{d} gram[{i},{j}]={z}");
            }
            assert!(b.singular_values.windows(2).all(|w| w[0] >= w[1]));
            for col in b.components.columns() {
                let (imax, _) = col
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
                assert_eq!(col[imax].im, 0.0);
                assert!(col[imax].re > 0.0);
            }
        }
    }

    #[test]
    fn choose_components_by_hand() {
        let b = PcaBasis {
            components: CMatrix::zeros((3, 3)),
            singular_values: vec![0.7f64.sqrt(), 0.25f64.sqrt(), 0.05f64.sqrt()],
            mode: Mode::Ad,
        };
        assert_eq!(choose_components(&b, 0.9).unwrap(), 2);
        assert_eq!(choose_components(&b, 0.7).unwrap(), 1);
        assert_eq!(choose_components(&b, 1.0).unwrap(), 3);
        assert!(choose_components(&b, 0.0).is_err());
        assert!(choose_components(&b, 1.5).is_err());
    }

    #[test]
    fn threshold_one_gives_numerical_rank() {
        let a = random(6, 2, 9);
        let bm = random(2, 5, 10);
        let m = a.dot(&bm); // rank 2
        let b = pca_fit(&m, Mode::Ad).unwrap();
        assert_eq!(choose_components(&b, 1.0).unwrap(), 2);
    }

    #[test]
    fn zero_spectrum_is_degenerate() {
        let b = pca_fit(&CMatrix::zeros((3, 3)), Mode::Ad).unwrap();
        assert!(matches!(choose_components(&b, 0.9), Err(Error::Degenerate(_))));
    }

    #[test]
    fn full_basis_recovers_square_input() {
        let m = random(6, 6, 11);
        let b = pca_fit(&m, Mode::Ad).unwrap();
        let r = reconstruct(&compress(&m, &b, 6).unwrap()).unwrap();
        assert!(frobenius(&(&r - &m)) < 1e-10);
    }

    #[test]
    fn k_out_of_range() {
        let m = random(4, 3, 12);
        let b = pca_fit(&m, Mode::Ad).unwrap();
        assert!(matches!(compress(&m, &b, 0), Err(Error::Input(_))));
        assert!(matches!(compress(&m, &b, 4), Err(Error::Input(_))));
    }

    #[test]
    fn zero_report_reconstructs_zero() {
        let rep = CsiReport {
            mode: Mode::Ev,
            compressed: Payload::Raw(CMatrix::zeros((4, 2))),
            transform: Payload::Raw(CMatrix::zeros((3, 2))),
            taps: None,
        };
        assert_eq!(reconstruct(&rep).unwrap(), CMatrix::zeros((4, 3)));
    }

    #[test]
    fn mismatched_report_rejected() {
        let rep = CsiReport {
            mode: Mode::Ev,
            compressed: Payload::Raw(CMatrix::zeros((4, 2))),
            transform: Payload::Raw(CMatrix::zeros((3, 1))),
            taps: None,
        };
        assert!(matches!(reconstruct(&rep), Err(Error::Input(_))));
    }

    #[test]
    fn report_shapes() {
        let t = TapChannel {
            data: random(5, 32, 13),
            tap_indices: vec![0, 1, 2, 622, 623],
            n_full: 624,
        };
        let r = compress_ad(&t, 2).unwrap();
        assert_eq!(r.compressed.shape(), (5, 2));
        assert_eq!(r.transform.shape(), (32, 2));
        let e = EvMatrix { data: random(32, 13, 14), rank: 1 };
        let r = compress_ev(&e, 3).unwrap();
        assert_eq!(r.compressed.shape(), (32, 3));
        assert_eq!(r.transform.shape(), (13, 3));
    }

    #[test]
    fn fit_is_bit_deterministic() {
        let m = random(25, 32, 15);
        assert_eq!(pca_fit(&m, Mode::Ad).unwrap(), pca_fit(&m, Mode::Ad).unwrap());
    }

    #[test]
    fn report_bytes_roundtrip() {
        let t = TapChannel {
            data: random(5, 8, 16),
            tap_indices: vec![0, 3, 4, 9, 11],
            n_full: 12,
        };
        let r = compress_ad(&t, 2).unwrap();
        assert_eq!(CsiReport::from_bytes(&r.to_bytes().unwrap()).unwrap(), r);
        let rq = r.quantized(6).unwrap();
        assert_eq!(rq.q_bits(), Some(6));
        let back = CsiReport::from_bytes(&rq.to_bytes().unwrap()).unwrap();
        assert_eq!(back, rq);
        assert_eq!(reconstruct(&back).unwrap(), reconstruct(&rq).unwrap());

        let e = compress_ev(&EvMatrix { data: random(8, 4, 17), rank: 1 }, 1).unwrap();
        assert_eq!(CsiReport::from_bytes(&e.to_bytes().unwrap()).unwrap(), e);
    }
}
