//! Python bindings. Matrices cross the boundary as lists of rows of
//! Python `complex` values.

use std::borrow::Cow;

use csipca_core::bench::{run_experiment as run_exp, ExperimentConfig};
use csipca_core::chanforge::{self, ArrayGeometry, Cfr, GeneratorConfig};
use csipca_core::metrics::{self, FeedbackSchedule, GcsVariant, Rounding};
use csipca_core::pca::{self, Mode, TapLayout};
use csipca_core::quant;
use csipca_core::xforms::{self, AngularDelay, TapChannel, TapPolicy};
use csipca_core::{CMatrix, Error, C64};
use ndarray::Array2;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

type Rows = Vec<Vec<C64>>;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        Error::Audit(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_matrix(rows: Rows) -> PyResult<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(PyValueError::new_err("matrix must be non-empty"));
    }
    if rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("matrix rows differ in length"));
    }
    Ok(Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).expect("shape checked"))
}

fn to_rows(m: &CMatrix) -> Rows {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| PyValueError::new_err(e.to_string()))
}

fn cfr(rows: Rows, scs: f64) -> PyResult<Cfr> {
    Cfr::new(to_matrix(rows)?, scs, 0).map_err(err)
}

/// Unit-norm response of a `rows x cols x polarizations` panel.
#[pyfunction]
#[pyo3(signature = (azimuth_deg, zenith_deg, rows=2, cols=8, polarizations=2, element_spacing=0.5))]
fn steering_vector(
    azimuth_deg: f64,
    zenith_deg: f64,
    rows: usize,
    cols: usize,
    polarizations: usize,
    element_spacing: f64,
) -> PyResult<Vec<C64>> {
    let g = ArrayGeometry::new(rows, cols, polarizations, element_spacing).map_err(err)?;
    chanforge::steering_vector(&g, azimuth_deg, zenith_deg).map_err(err)
}

/// A collection of `N x N_t` channel frequency responses.
#[pyclass(module = "csipca")]
struct Dataset {
    inner: chanforge::Dataset,
}

#[pymethods]
impl Dataset {
    /// Generate from a stock profile name or a profile file path.
    #[staticmethod]
    #[pyo3(signature = (profile, seed, count, n_subcarriers=624, scs_hz=15e3))]
    fn generate(profile: &str, seed: u64, count: usize, n_subcarriers: usize, scs_hz: f64) -> PyResult<Self> {
        let mut cfg = GeneratorConfig::new(profile, seed, count);
        cfg.n_subcarriers = n_subcarriers;
        cfg.scs_hz = scs_hz;
        Ok(Self {
            inner: chanforge::generate_dataset(&cfg).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: chanforge::load_dataset(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        chanforge::save_dataset(&self.inner, path).map_err(err)
    }

    #[getter]
    fn dims(&self) -> (usize, usize) {
        self.inner.dims
    }

    #[getter]
    fn scs_hz(&self) -> f64 {
        self.inner.scs_hz
    }

    fn sample(&self, i: usize) -> PyResult<Rows> {
        self.inner
            .samples
            .get(i)
            .map(|s| to_rows(&s.data))
            .ok_or_else(|| PyValueError::new_err(format!("sample {i} out of range")))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        Ok(PyBytes::new(py, &self.inner.to_bytes().map_err(err)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Unitary 2-D DFT of an `N x N_t` channel into the angular-delay domain.
#[pyfunction]
fn to_angular_delay(h: Rows) -> PyResult<Rows> {
    Ok(to_rows(&xforms::to_angular_delay(&cfr(h, 0.0)?).data))
}

#[pyfunction]
fn from_angular_delay(h_ad: Rows) -> PyResult<Rows> {
    let ad = AngularDelay {
        data: to_matrix(h_ad)?,
        subcarrier_spacing: 0.0,
        sample_id: 0,
    };
    Ok(to_rows(&xforms::from_angular_delay(&ad).data))
}

/// Returns `(taps, tap_indices)` for `l` retained delay rows.
#[pyfunction]
#[pyo3(signature = (h_ad, l, policy="top-energy"))]
fn select_taps(h_ad: Rows, l: usize, policy: &str) -> PyResult<(Rows, Vec<usize>)> {
    let ad = AngularDelay {
        data: to_matrix(h_ad)?,
        subcarrier_spacing: 0.0,
        sample_id: 0,
    };
    let t = xforms::select_taps(&ad, l, parse::<TapPolicy>(policy)?).map_err(err)?;
    Ok((to_rows(&t.data), t.tap_indices))
}

/// `N_t x N_SB` matrix of per-sub-band dominant eigenvectors.
#[pyfunction]
fn ev_matrix(h: Rows, n_subbands: usize) -> PyResult<Rows> {
    Ok(to_rows(&xforms::ev_matrix(&cfr(h, 0.0)?, n_subbands).map_err(err)?.data))
}

#[pyclass(module = "csipca")]
struct PcaBasis {
    inner: pca::PcaBasis,
}

#[pymethods]
impl PcaBasis {
    #[getter]
    fn components(&self) -> Rows {
        to_rows(&self.inner.components)
    }

    #[getter]
    fn singular_values(&self) -> Vec<f64> {
        self.inner.singular_values.clone()
    }

    #[getter]
    fn k_max(&self) -> usize {
        self.inner.k_max()
    }

    fn explained_variance(&self) -> PyResult<Vec<f64>> {
        self.inner.explained_variance().map_err(err)
    }

    fn cumulative_variance(&self) -> PyResult<Vec<f64>> {
        self.inner.cumulative_variance().map_err(err)
    }

    #[pyo3(signature = (threshold=pca::DEFAULT_VARIANCE_THRESHOLD))]
    fn choose_components(&self, threshold: f64) -> PyResult<usize> {
        pca::choose_components(&self.inner, threshold).map_err(err)
    }
}

/// Right singular vectors of `matrix`; `mode` is "ad" or "ev".
#[pyfunction]
#[pyo3(signature = (matrix, mode="ad"))]
fn pca_fit(matrix: Rows, mode: &str) -> PyResult<PcaBasis> {
    Ok(PcaBasis {
        inner: pca::pca_fit(&to_matrix(matrix)?, parse::<Mode>(mode)?).map_err(err)?,
    })
}

/// Compressed payload plus transform, as fed back by the UE.
#[pyclass(module = "csipca")]
struct CsiReport {
    inner: pca::CsiReport,
}

#[pymethods]
impl CsiReport {
    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn q_bits(&self) -> Option<u8> {
        self.inner.q_bits()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[getter]
    fn compressed(&self) -> Rows {
        to_rows(&self.inner.compressed.to_matrix())
    }

    #[getter]
    fn transform(&self) -> Rows {
        to_rows(&self.inner.transform.to_matrix())
    }

    #[getter]
    fn tap_indices(&self) -> Option<Vec<usize>> {
        self.inner.taps.as_ref().map(|t| t.indices.clone())
    }

    fn quantized(&self, q_bits: u8) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.quantized(q_bits).map_err(err)?,
        })
    }

    fn reconstruct(&self) -> PyResult<Rows> {
        Ok(to_rows(&pca::reconstruct(&self.inner).map_err(err)?))
    }

    /// For AD reports: the full `N x N_t` angular-delay matrix with the
    /// reconstructed taps in place and zeros elsewhere.
    fn reconstruct_angular_delay(&self) -> PyResult<Rows> {
        let taps = self.inner.reconstruct_taps().map_err(err)?;
        Ok(to_rows(&xforms::embed_taps(&taps).map_err(err)?.data))
    }

    fn to_bytes(&self) -> PyResult<Cow<'static, [u8]>> {
        Ok(Cow::Owned(self.inner.to_bytes().map_err(err)?))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: pca::CsiReport::from_bytes(data).map_err(err)?,
        })
    }
}

/// Project `matrix` onto the first `k` components of `basis`.
///
/// For AD reports pass the retained `tap_indices` and full delay count
/// `n_full` so the gNB can put the taps back.
#[pyfunction]
#[pyo3(signature = (matrix, basis, k, tap_indices=None, n_full=None))]
fn compress(
    matrix: Rows,
    basis: &PcaBasis,
    k: usize,
    tap_indices: Option<Vec<usize>>,
    n_full: Option<usize>,
) -> PyResult<CsiReport> {
    let m = to_matrix(matrix)?;
    let mut inner = pca::compress(&m, &basis.inner, k).map_err(err)?;
    match (tap_indices, n_full) {
        (Some(indices), Some(n_full)) => {
            TapChannel {
                data: m,
                tap_indices: indices.clone(),
                n_full,
            }
            .validate()
            .map_err(err)?;
            inner.taps = Some(TapLayout { indices, n_full });
        }
        (None, None) => {}
        _ => return Err(PyValueError::new_err("tap_indices and n_full go together")),
    }
    Ok(CsiReport { inner })
}

#[pyfunction]
#[pyo3(signature = (h_hat, h, variant="vectorized"))]
fn gcs(h_hat: Rows, h: Rows, variant: &str) -> PyResult<f64> {
    metrics::gcs(&to_matrix(h_hat)?, &to_matrix(h)?, parse::<GcsVariant>(variant)?).map_err(err)
}

#[pyfunction]
fn overhead_reduction_ad(l: usize, n_t: usize, k: usize) -> PyResult<f64> {
    metrics::overhead_reduction_ad(l, n_t, k).map_err(err)
}

#[pyfunction]
fn overhead_reduction_ev(n_subbands: usize, n_t: usize, k: usize) -> PyResult<f64> {
    metrics::overhead_reduction_ev(n_subbands, n_t, k).map_err(err)
}

/// Whole percent; `rounding` is "round" (half away from zero) or "floor".
#[pyfunction]
#[pyo3(signature = (x, rounding="round"))]
fn percent_display(x: f64, rounding: &str) -> PyResult<i64> {
    let r = match rounding {
        "round" => Rounding::HalfAwayFromZero,
        "floor" => Rounding::Floor,
        other => return Err(PyValueError::new_err(format!("unknown rounding `{other}`"))),
    };
    Ok(metrics::percent_display(x, r))
}

/// Feedback payload in bits; `rows` is `L` (AD) or `N_SB` (EV).
#[pyfunction]
#[pyo3(signature = (mode, rows, n_t, k, q_bits, k_refresh=1, tau_p=5e-3))]
#[allow(clippy::too_many_arguments)]
fn feedback_bits<'py>(
    py: Python<'py>,
    mode: &str,
    rows: usize,
    n_t: usize,
    k: usize,
    q_bits: u8,
    k_refresh: u64,
    tau_p: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sched = FeedbackSchedule::new(tau_p, k_refresh, q_bits).map_err(err)?;
    let b = metrics::feedback_bits(parse::<Mode>(mode)?, (rows, n_t), k, &sched).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("average", b.average)?;
    d.set_item("ceil", b.ceil)?;
    d.set_item("compressed", b.compressed)?;
    d.set_item("transform", b.transform)?;
    Ok(d)
}

#[pyclass(module = "csipca")]
struct QuantizedMatrix {
    inner: quant::QuantizedMatrix,
}

#[pymethods]
impl QuantizedMatrix {
    #[getter]
    fn re_codes(&self) -> Vec<Vec<u32>> {
        self.inner.re_codes.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[getter]
    fn im_codes(&self) -> Vec<Vec<u32>> {
        self.inner.im_codes.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    #[getter]
    fn q_bits(&self) -> u8 {
        self.inner.q_bits
    }

    fn dequantize(&self) -> Rows {
        to_rows(&quant::dequantize(&self.inner))
    }
}

#[pyfunction]
fn quantize(matrix: Rows, q_bits: u8) -> PyResult<QuantizedMatrix> {
    Ok(QuantizedMatrix {
        inner: quant::quantize(&to_matrix(matrix)?, q_bits).map_err(err)?,
    })
}

/// Run an experiment config file; returns one dict per results row.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_path: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_file(config_path).map_err(err)?;
    let rows = py.detach(|| run_exp(&cfg)).map_err(err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("pipeline", r.pipeline)?;
            d.set_item("k", r.k)?;
            d.set_item("q", r.q)?;
            d.set_item("mean_gcs", r.mean_gcs)?;
            d.set_item("gcs_p5", r.gcs_p5)?;
            d.set_item("gcs_p50", r.gcs_p50)?;
            d.set_item("gcs_p95", r.gcs_p95)?;
            d.set_item("mean_gcs_taps", r.mean_gcs_taps)?;
            d.set_item("overhead_exact", r.overhead_exact)?;
            d.set_item("overhead_round_pct", r.overhead_round_pct)?;
            d.set_item("overhead_floor_pct", r.overhead_floor_pct)?;
            d.set_item("feedback_bits", r.feedback_bits)?;
            d.set_item("samples", r.samples)?;
            d.set_item("dataset", r.dataset)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn csipca(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<PcaBasis>()?;
    m.add_class::<CsiReport>()?;
    m.add_class::<QuantizedMatrix>()?;
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    m.add_function(wrap_pyfunction!(to_angular_delay, m)?)?;
    m.add_function(wrap_pyfunction!(from_angular_delay, m)?)?;
    m.add_function(wrap_pyfunction!(select_taps, m)?)?;
    m.add_function(wrap_pyfunction!(ev_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(pca_fit, m)?)?;
    m.add_function(wrap_pyfunction!(compress, m)?)?;
    m.add_function(wrap_pyfunction!(gcs, m)?)?;
    m.add_function(wrap_pyfunction!(overhead_reduction_ad, m)?)?;
    m.add_function(wrap_pyfunction!(overhead_reduction_ev, m)?)?;
    m.add_function(wrap_pyfunction!(percent_display, m)?)?;
    m.add_function(wrap_pyfunction!(feedback_bits, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("STOCK_PROFILES", chanforge::STOCK_PROFILES.to_vec())?;
    Ok(())
}
