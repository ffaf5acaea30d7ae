//! Config-driven experiments: run either pipeline over a dataset and emit
//! result rows, variance spectra and comparison tables.
//!
//! Per-sample work runs on the rayon pool; results are collected in
//! sample order before any reduction, so every output byte depends only on
//! the config.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chanforge::{generate_dataset, load_dataset, Cfr, Dataset, GeneratorConfig};
use crate::metrics::{
    feedback_bits, gcs, overhead_reduction_ad, overhead_reduction_ev, FeedbackSchedule, GcsVariant,
    OverheadDisplay,
};
use crate::pca::{choose_components, compress, pca_fit, reconstruct, CsiReport, Mode, PcaBasis, TapLayout};
use crate::xforms::{embed_taps, ev_matrix, from_angular_delay, select_taps, to_angular_delay, TapChannel, TapPolicy};
use crate::{Error, Result};

/// Unquantized GCS must match the spectrum identity to this tolerance.
pub const AUDIT_TOL: f64 = 1e-9;
/// Samples checked against the identity on every run.
pub const AUDIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Generate(GeneratorConfig),
    Load(PathBuf),
}

/// Quantizer setting for one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "QuantToken", into = "QuantToken")]
pub enum QuantSetting {
    Off,
    Bits(u8),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum QuantToken {
    Bits(u8),
    Word(String),
}

impl TryFrom<QuantToken> for QuantSetting {
    type Error = String;

    fn try_from(t: QuantToken) -> std::result::Result<Self, String> {
        match t {
            QuantToken::Bits(0) => Err("quantizer bits must be >= 1 (use \"off\")".into()),
            QuantToken::Bits(b) if b > crate::quant::MAX_Q_BITS => {
                Err(format!("quantizer bits must be <= {}", crate::quant::MAX_Q_BITS))
            }
            QuantToken::Bits(b) => Ok(QuantSetting::Bits(b)),
            QuantToken::Word(w) if w == "off" => Ok(QuantSetting::Off),
            QuantToken::Word(w) => w
                .parse::<u8>()
                .map_err(|_| format!("quantizer setting `{w}` is neither \"off\" nor a bit count"))
                .and_then(|b| QuantSetting::try_from(QuantToken::Bits(b))),
        }
    }
}

impl From<QuantSetting> for QuantToken {
    fn from(q: QuantSetting) -> Self {
        match q {
            QuantSetting::Off => QuantToken::Word("off".into()),
            QuantSetting::Bits(b) => QuantToken::Bits(b),
        }
    }
}

impl fmt::Display for QuantSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantSetting::Off => f.write_str("off"),
            QuantSetting::Bits(b) => write!(f, "{b}"),
        }
    }
}

impl QuantSetting {
    fn bits(self) -> Option<u8> {
        match self {
            QuantSetting::Off => None,
            QuantSetting::Bits(b) => Some(b),
        }
    }
}

fn default_threshold() -> f64 {
    crate::pca::DEFAULT_VARIANCE_THRESHOLD
}
fn default_k_refresh() -> u64 {
    1
}
fn default_tau_p() -> f64 {
    5e-3
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(with = "mode_serde")]
    pub pipeline: Mode,
    /// Retained delay taps `L` (AD only).
    #[serde(default)]
    pub taps: Option<usize>,
    /// Sub-band count `N_SB` (EV only).
    #[serde(default)]
    pub subbands: Option<usize>,
    pub components: Vec<usize>,
    pub quant: Vec<QuantSetting>,
    #[serde(default)]
    pub gcs_variant: GcsVariant,
    #[serde(default, with = "policy_serde")]
    pub tap_policy: TapPolicy,
    #[serde(default = "default_threshold")]
    pub variance_threshold: f64,
    #[serde(default = "default_k_refresh")]
    pub k_refresh: u64,
    #[serde(default = "default_tau_p")]
    pub tau_p: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

mod mode_serde {
    use super::Mode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &Mode, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&m.to_string().to_ascii_lowercase())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mode, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

mod policy_serde {
    use super::TapPolicy;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &TapPolicy, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&p.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<TapPolicy, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks that do not need the dataset.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.components.is_empty() {
            return bad("`components` must list at least one component count".into());
        }
        if self.components.contains(&0) {
            return bad("`components` entries must be >= 1".into());
        }
        if self.quant.is_empty() {
            return bad("`quant` must list at least one setting".into());
        }
        match self.pipeline {
            Mode::Ad if self.taps.is_none() => return bad("`taps` is required for the ad pipeline".into()),
            Mode::Ev if self.subbands.is_none() => return bad("`subbands` is required for the ev pipeline".into()),
            _ => {}
        }
        if self.taps == Some(0) {
            return bad("`taps` must be >= 1".into());
        }
        if self.subbands == Some(0) {
            return bad("`subbands` must be >= 1".into());
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return bad(format!("`variance_threshold` must be in (0, 1], got {}", self.variance_threshold));
        }
        if self.k_refresh == 0 {
            return bad("`k_refresh` must be >= 1".into());
        }
        if !(self.tau_p.is_finite() && self.tau_p > 0.0) {
            return bad("`tau_p` must be finite and > 0".into());
        }
        Ok(())
    }

    /// Checks against the dataset's `(N, N_t)`.
    pub fn validate_dims(&self, dims: (usize, usize)) -> Result<()> {
        let (n, n_t) = dims;
        let k_max = match self.pipeline {
            Mode::Ad => {
                let l = self.taps.unwrap_or(0);
                if l > n {
                    return Err(Error::input(format!("`taps` L={l} exceeds dataset N={n}")));
                }
                l.min(n_t)
            }
            Mode::Ev => {
                let sb = self.subbands.unwrap_or(0);
                if n % sb != 0 {
                    return Err(Error::input(format!(
                        "`subbands` N_SB={sb} does not divide dataset N={n}"
                    )));
                }
                sb.min(n_t)
            }
        };
        if let Some(&k) = self.components.iter().find(|&&k| k > k_max) {
            return Err(Error::input(format!(
                "`components` entry {k} exceeds the rank bound {k_max} for this dataset"
            )));
        }
        Ok(())
    }

    /// Rows (`L` or `N_SB`) of the representation that gets compressed.
    fn report_rows(&self) -> usize {
        match self.pipeline {
            Mode::Ad => self.taps.unwrap_or(0),
            Mode::Ev => self.subbands.unwrap_or(0),
        }
    }
}

pub fn load_source(src: &DatasetSource) -> Result<Dataset> {
    match src {
        DatasetSource::Generate(g) => generate_dataset(g),
        DatasetSource::Load(p) => load_dataset(p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pipeline: String,
    pub k: usize,
    pub q: String,
    pub mean_gcs: f64,
    pub gcs_p5: f64,
    pub gcs_p50: f64,
    pub gcs_p95: f64,
    /// AD only: GCS on the retained taps, excluding truncation loss.
    pub mean_gcs_taps: Option<f64>,
    pub overhead_exact: f64,
    pub overhead_round_pct: i64,
    pub overhead_floor_pct: i64,
    /// Empty for unquantized rows.
    pub feedback_bits: Option<f64>,
    pub samples: usize,
    pub dataset: String,
}

/// Representation handed to PCA for one sample, plus what is needed to
/// score its reconstruction.
enum Prepared {
    Ad { truth: Cfr, taps: TapChannel },
    Ev { truth: crate::xforms::EvMatrix },
}

fn prepare(cfg: &ExperimentConfig, h: &Cfr) -> Result<Prepared> {
    Ok(match cfg.pipeline {
        Mode::Ad => {
            let ad = to_angular_delay(h);
            let taps = select_taps(&ad, cfg.report_rows(), cfg.tap_policy)?;
            Prepared::Ad { truth: h.clone(), taps }
        }
        Mode::Ev => Prepared::Ev {
            truth: ev_matrix(h, cfg.report_rows())?,
        },
    })
}

impl Prepared {
    fn pca_input(&self) -> &crate::CMatrix {
        match self {
            Prepared::Ad { taps, .. } => &taps.data,
            Prepared::Ev { truth } => &truth.data,
        }
    }

    fn fit(&self) -> Result<PcaBasis> {
        let mode = match self {
            Prepared::Ad { .. } => Mode::Ad,
            Prepared::Ev { .. } => Mode::Ev,
        };
        pca_fit(self.pca_input(), mode)
    }

    /// Returns (GCS against ground truth, GCS on the compressed representation).
    fn score(&self, basis: &PcaBasis, k: usize, q: QuantSetting, variant: GcsVariant) -> Result<(f64, f64)> {
        let mut report: CsiReport = compress(self.pca_input(), basis, k)?;
        if let Prepared::Ad { taps, .. } = self {
            report.taps = Some(TapLayout {
                indices: taps.tap_indices.clone(),
                n_full: taps.n_full,
            });
        }
        if let Some(b) = q.bits() {
            report = report.quantized(b)?;
        }
        match self {
            Prepared::Ad { truth, taps } => {
                let t_hat = report.reconstruct_taps()?;
                let g_taps = gcs(&t_hat.data, &taps.data, variant)?;
                let mut ad = embed_taps(&t_hat)?;
                ad.subcarrier_spacing = truth.subcarrier_spacing;
                ad.sample_id = truth.sample_id;
                let h_hat = from_angular_delay(&ad);
                Ok((gcs(&h_hat.data, &truth.data, variant)?, g_taps))
            }
            Prepared::Ev { truth } => {
                let g = gcs(&reconstruct(&report)?, &truth.data, variant)?;
                Ok((g, g))
            }
        }
    }
}

/// Linear-interpolated percentile of an ascending slice, `p` in [0, 100].
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn sweep(cfg: &ExperimentConfig) -> Vec<(usize, QuantSetting)> {
    cfg.components
        .iter()
        .flat_map(|&k| cfg.quant.iter().map(move |&q| (k, q)))
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let ds = load_source(&cfg.dataset)?;
    run_on_dataset(cfg, &ds)
}

pub fn run_on_dataset(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::input("dataset has no samples"));
    }
    cfg.validate_dims(ds.dims)?;
    let points = sweep(cfg);

    // scores[sample][point] = (gcs, gcs_on_compressed_repr)
    let scores: Vec<Vec<(f64, f64)>> = ds
        .samples
        .par_iter()
        .map(|h| {
            let prep = prepare(cfg, h)?;
            let basis = prep.fit()?;
            let row = points
                .iter()
                .map(|&(k, q)| prep.score(&basis, k, q, cfg.gcs_variant))
                .collect::<Result<Vec<_>>>()?;
            if (h.sample_id as usize) < AUDIT_SAMPLES && cfg.gcs_variant == GcsVariant::Vectorized {
                audit_sample(h.sample_id, &basis, &points, &row)?;
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_t = ds.dims.1;
    let rows_dim = cfg.report_rows();
    let mut out = Vec::with_capacity(points.len());
    for (pi, &(k, q)) in points.iter().enumerate() {
        let mut g: Vec<f64> = scores.iter().map(|s| s[pi].0).collect();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        let mean_taps = scores.iter().map(|s| s[pi].1).sum::<f64>() / g.len() as f64;
        g.sort_by(f64::total_cmp);
        let exact = match cfg.pipeline {
            Mode::Ad => overhead_reduction_ad(rows_dim, n_t, k)?,
            Mode::Ev => overhead_reduction_ev(rows_dim, n_t, k)?,
        };
        let od = OverheadDisplay::new(exact);
        let bits = match q.bits() {
            Some(b) => {
                let sched = FeedbackSchedule::new(cfg.tau_p, cfg.k_refresh, b)?;
                Some(feedback_bits(cfg.pipeline, (rows_dim, n_t), k, &sched)?.average)
            }
            None => None,
        };
        out.push(ResultRow {
            pipeline: cfg.pipeline.to_string(),
            k,
            q: q.to_string(),
            mean_gcs: mean,
            gcs_p5: percentile(&g, 5.0),
            gcs_p50: percentile(&g, 50.0),
            gcs_p95: percentile(&g, 95.0),
            mean_gcs_taps: (cfg.pipeline == Mode::Ad).then_some(mean_taps),
            overhead_exact: od.exact,
            overhead_round_pct: od.round_pct,
            overhead_floor_pct: od.floor_pct,
            feedback_bits: bits,
            samples: ds.len(),
            dataset: ds.id(),
        });
    }
    Ok(out)
}

/// Unquantized GCS on the compressed representation must equal
/// `sqrt(cumulative explained variance)` at every `k`.
fn audit_sample(id: u64, basis: &PcaBasis, points: &[(usize, QuantSetting)], scores: &[(f64, f64)]) -> Result<()> {
    let cum = basis.cumulative_variance()?;
    for (&(k, q), &(_, g)) in points.iter().zip(scores) {
        if q != QuantSetting::Off {
            continue;
        }
        let want = cum[k - 1].sqrt();
        if (g - want).abs() > AUDIT_TOL {
            return Err(Error::Audit(format!(
                "sample {id}, k={k}: GCS {g} vs sqrt(cumulative variance) {want}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub k: usize,
    /// Mean share of variance carried by component `k`, percent.
    pub mean_pct: f64,
    pub cum_pct: f64,
    /// Fraction of samples whose threshold is met with `<= k` components.
    pub frac_samples_covered: f64,
}

pub fn emit_variance_spectrum(cfg: &ExperimentConfig) -> Result<Vec<SpectrumRow>> {
    cfg.validate()?;
    let ds = load_source(&cfg.dataset)?;
    spectrum_on_dataset(cfg, &ds)
}

pub fn spectrum_on_dataset(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Vec<SpectrumRow>> {
    if ds.is_empty() {
        return Err(Error::input("dataset has no samples"));
    }
    cfg.validate_dims(ds.dims)?;
    let per_sample: Vec<(Vec<f64>, usize)> = ds
        .samples
        .par_iter()
        .map(|h| {
            let basis = prepare(cfg, h)?.fit()?;
            let ev = basis.explained_variance()?;
            let total: f64 = ev.iter().sum();
            if (total - 1.0).abs() > AUDIT_TOL {
                return Err(Error::Audit(format!(
                    "sample {}: explained variance sums to {total}",
                    h.sample_id
                )));
            }
            Ok((ev, choose_components(&basis, cfg.variance_threshold)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let k_max = per_sample[0].0.len();
    let n = per_sample.len() as f64;
    let mut cum = 0.0;
    Ok((1..=k_max)
        .map(|k| {
            let mean = per_sample.iter().map(|(ev, _)| ev[k - 1]).sum::<f64>() / n;
            cum += mean;
            let covered = per_sample.iter().filter(|(_, need)| *need <= k).count() as f64 / n;
            SpectrumRow {
                k,
                mean_pct: 100.0 * mean,
                cum_pct: 100.0 * cum,
                frac_samples_covered: covered,
            }
        })
        .collect())
}

/// Published neural-network result, carried verbatim into tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceRow {
    pub model: String,
    pub pipeline: String,
    pub dataset: String,
    pub gcs: f64,
    pub overhead_pct: i64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceFile {
    #[serde(default)]
    reference: Vec<ReferenceRow>,
}

pub fn load_references(path: impl AsRef<Path>) -> Result<Vec<ReferenceRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_references(&text)
}

pub fn parse_references(text: &str) -> Result<Vec<ReferenceRow>> {
    let f: ReferenceFile =
        toml::from_str(text).map_err(|e| Error::Config(format!("reference constants: {e}")))?;
    Ok(f.reference)
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

pub fn emit_comparison_table(rows: &[ResultRow], refs: &[ReferenceRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::input("no result rows to tabulate"));
    }
    let mut s = String::new();
    s.push_str("| Model | Pipeline | k | Q | Mean GCS | GCS p5 | GCS p50 | GCS p95 | GCS (taps) | OR exact | OR % (round) | OR % (floor) | Bits/report | Samples | Dataset |\n");
    s.push_str("|---|---|---:|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|---:|---|\n");
    for r in rows {
        writeln!(
            s,
            "| PCA | {} | {} | {} | {:.4} | {:.4} | {:.4} | {:.4} | {} | {:.6} | {} | {} | {} | {} | {} |",
            r.pipeline,
            r.k,
            r.q,
            r.mean_gcs,
            r.gcs_p5,
            r.gcs_p50,
            r.gcs_p95,
            fmt_opt(r.mean_gcs_taps, 4),
            r.overhead_exact,
            r.overhead_round_pct,
            r.overhead_floor_pct,
            fmt_opt(r.feedback_bits, 1),
            r.samples,
            r.dataset
        )
        .unwrap();
    }
    s.push_str("\nBits/report excludes the per-matrix quantizer scale (one f64 per payload).\n");
    if !refs.is_empty() {
        s.push_str("\n**Published reference, not reproduced**\n\n");
        s.push_str("| Model | Pipeline | Dataset | GCS | OR % |\n|---|---|---|---:|---:|\n");
        for r in refs {
            writeln!(
                s,
                "| {} | {} | {} | {:.4} | {} |",
                r.model, r.pipeline, r.dataset, r.gcs, r.overhead_pct
            )
            .unwrap();
        }
    }
    Ok(s)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn results_to_csv(rows: &[ResultRow]) -> Result<String> {
    to_csv(rows)
}

pub fn spectrum_to_csv(rows: &[SpectrumRow]) -> Result<String> {
    to_csv(rows)
}

pub fn read_results_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())
        .map_err(|e| Error::format(0, format!("results csv: {e}")))?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let off = e.position().map_or(0, |p| p.byte());
                Error::format(off, format!("results csv: {e}"))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const AD_CFG: &str = r#"
pipeline = "ad"
taps = 5
components = [1, 2]
quant = ["off", 8]

[dataset.generate]
profile = "low-spread-30ns"
seed = 3
count = 4
n_subcarriers = 48
"#;

    #[test]
    fn config_parses() {
        let c = ExperimentConfig::from_toml(AD_CFG).unwrap();
        assert_eq!(c.pipeline, Mode::Ad);
        assert_eq!(c.quant, vec![QuantSetting::Off, QuantSetting::Bits(8)]);
        assert_eq!(c.tap_policy, TapPolicy::TopEnergy);
        assert_eq!(c.gcs_variant, GcsVariant::Vectorized);
        assert_eq!(c.variance_threshold, 0.99);
        match &c.dataset {
            DatasetSource::Generate(g) => assert_eq!(g.count, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn load_source_parses() {
        let c = ExperimentConfig::from_toml(
            "pipeline = \"ev\"\nsubbands = 13\ncomponents = [1]\nquant = [\"off\", \"16\"]\n[dataset]\nload = \"x.cfr\"\n",
        )
        .unwrap();
        assert_eq!(c.dataset, DatasetSource::Load("x.cfr".into()));
        assert_eq!(c.quant[1], QuantSetting::Bits(16));
    }

    #[test]
    fn config_errors_name_fields() {
        let cases = [
            (AD_CFG.replace("components = [1, 2]", "components = []"), "components"),
            (AD_CFG.replace("quant = [\"off\", 8]", "quant = [\"loud\"]"), "loud"),
            (AD_CFG.replace("taps = 5\n", ""), "taps"),
            (AD_CFG.replace("pipeline = \"ad\"", "pipeline = \"xx\""), "pipeline"),
            (format!("{AD_CFG}\nbogus = 1\n"), "bogus"),
        ];
        for (text, field) in cases {
            match ExperimentConfig::from_toml(&text) {
                Err(Error::Config(m)) => assert!(m.contains(field), "{field}: {m}"),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn dims_validation() {
        let mut c = ExperimentConfig::from_toml(AD_CFG).unwrap();
        assert!(c.validate_dims((48, 32)).is_ok());
        c.taps = Some(49);
        assert!(c.validate_dims((48, 32)).is_err());
        c.taps = Some(2);
        c.components = vec![3];
        assert!(c.validate_dims((48, 32)).is_err());
        c.pipeline = Mode::Ev;
        c.subbands = Some(5);
        c.components = vec![1];
        assert!(c.validate_dims((48, 32)).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 100.0), 5.0);
        assert!((percentile(&v, 5.0) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn small_run_rows() {
        let c = ExperimentConfig::from_toml(AD_CFG).unwrap();
        let rows = run_experiment(&c).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.gcs_p5 <= r.gcs_p50 && r.gcs_p50 <= r.gcs_p95);
            assert_eq!(r.samples, 4);
            assert_eq!(r.feedback_bits.is_some(), r.q != "off");
        }
        let csv = results_to_csv(&rows).unwrap();
        assert!(csv.starts_with("pipeline,k,q,mean_gcs"));
    }

    #[test]
    fn table_without_refs() {
        let c = ExperimentConfig::from_toml(AD_CFG).unwrap();
        let rows = run_experiment(&c).unwrap();
        let t = emit_comparison_table(&rows, &[]).unwrap();
        assert!(!t.contains("Published reference"));
        assert_eq!(t.lines().filter(|l| l.starts_with("| PCA")).count(), 4);
        assert!(emit_comparison_table(&[], &[]).is_err());
    }
}
