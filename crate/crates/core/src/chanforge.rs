//! Synthetic channel generation and dataset persistence.
//!
//! Channels come from a tapped-delay-line model: each multipath component is
//! a single delay tap whose spatial signature is a planar-array steering
//! vector, faded by a seeded circularly-symmetric complex Gaussian. The
//! frequency response over `N` subcarriers is the direct DFT of that impulse
//! response.
//!
//! Port mapping from the panel is identity, row-major, polarization-fastest:
//! port `(r * cols + c) * polarizations + p`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{Reader, Writer};
use crate::{CMatrix, Error, Result, C64};

pub const CFR1_MAGIC: &[u8; 4] = b"CFR1";
pub const CFR1_VERSION: u32 = 1;
pub const CFR1_HEADER_LEN: usize = 32;

const LOW_SPREAD: &str = include_str!("../profiles/low-spread-30ns.toml");
const HIGH_SPREAD: &str = include_str!("../profiles/high-spread-300ns.toml");

/// Names of the profiles compiled into the crate.
pub const STOCK_PROFILES: [&str; 2] = ["low-spread-30ns", "high-spread-300ns"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    pub polarizations: usize,
    /// In wavelengths.
    pub element_spacing: f64,
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize, polarizations: usize, element_spacing: f64) -> Result<Self> {
        let g = Self {
            rows,
            cols,
            polarizations,
            element_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// The 2x8x2 half-wavelength base-station panel (32 CSI-RS ports).
    pub fn uma_panel() -> Self {
        Self {
            rows: 2,
            cols: 8,
            polarizations: 2,
            element_spacing: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::input("array rows and cols must be >= 1"));
        }
        if !matches!(self.polarizations, 1 | 2) {
            return Err(Error::input(format!(
                "polarizations must be 1 or 2, got {}",
                self.polarizations
            )));
        }
        if !(self.element_spacing.is_finite() && self.element_spacing > 0.0) {
            return Err(Error::input("element spacing must be finite and > 0"));
        }
        Ok(())
    }

    pub fn n_ports(&self) -> usize {
        self.rows * self.cols * self.polarizations
    }

    pub fn port_index(&self, row: usize, col: usize, pol: usize) -> usize {
        (row * self.cols + col) * self.polarizations + pol
    }
}

/// Per-path delays, powers and departure angles of a tapped-delay-line channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathProfile {
    pub name: String,
    /// Seconds, nondecreasing.
    pub path_delays: Vec<f64>,
    pub path_powers_db: Vec<f64>,
    pub azimuth_aod_deg: Vec<f64>,
    pub zenith_aod_deg: Vec<f64>,
    /// Standard deviation of the per-path angle jitter, degrees.
    pub per_path_angular_spread_deg: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    path_delays_ns: Vec<f64>,
    path_powers_db: Vec<f64>,
    azimuth_aod_deg: Vec<f64>,
    zenith_aod_deg: Vec<f64>,
    per_path_angular_spread_deg: f64,
}

impl MultipathProfile {
    pub fn stock(name: &str) -> Result<Self> {
        match name {
            "low-spread-30ns" => Self::from_toml(LOW_SPREAD),
            "high-spread-300ns" => Self::from_toml(HIGH_SPREAD),
            _ => Err(Error::Config(format!(
                "unknown profile `{name}` (stock profiles: {})",
                STOCK_PROFILES.join(", ")
            ))),
        }
    }

    /// Stock profile name, or else a path to a profile file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if STOCK_PROFILES.contains(&name_or_path) {
            return Self::stock(name_or_path);
        }
        let p = Path::new(name_or_path);
        if p.exists() {
            return Self::from_toml(&fs::read_to_string(p)?);
        }
        Self::stock(name_or_path)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ProfileFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("profile: {e}")))?;
        let p = Self {
            name: f.name,
            path_delays: f.path_delays_ns.iter().map(|d| d * 1e-9).collect(),
            path_powers_db: f.path_powers_db,
            azimuth_aod_deg: f.azimuth_aod_deg,
            zenith_aod_deg: f.zenith_aod_deg,
            per_path_angular_spread_deg: f.per_path_angular_spread_deg,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn n_paths(&self) -> usize {
        self.path_delays.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.path_delays.len();
        if n == 0 {
            return Err(Error::input("multipath profile has no paths"));
        }
        let lens = [
            self.path_powers_db.len(),
            self.azimuth_aod_deg.len(),
            self.zenith_aod_deg.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::input(format!(
                "profile list lengths differ: delays {n}, powers {}, azimuth {}, zenith {}",
                lens[0], lens[1], lens[2]
            )));
        }
        let all = self
            .path_delays
            .iter()
            .chain(&self.path_powers_db)
            .chain(&self.azimuth_aod_deg)
            .chain(&self.zenith_aod_deg);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::input("profile contains non-finite values"));
        }
        if self.path_delays.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::input("path delays must be nondecreasing"));
        }
        if !(self.per_path_angular_spread_deg.is_finite() && self.per_path_angular_spread_deg >= 0.0) {
            return Err(Error::input("angular spread must be finite and >= 0"));
        }
        Ok(())
    }

    /// Linear path powers normalized to unit sum.
    pub fn linear_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self
            .path_powers_db
            .iter()
            .map(|db| 10f64.powf(db / 10.0))
            .collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }
}

/// Unit-norm planar-array response toward (`azimuth_deg`, `zenith_deg`).
///
/// The panel lies in the y-z plane: columns step along y, rows along z.
/// Co-located polarizations share the same phase.
pub fn steering_vector(geometry: &ArrayGeometry, azimuth_deg: f64, zenith_deg: f64) -> Result<Vec<C64>> {
    geometry.validate()?;
    if !(azimuth_deg.is_finite() && zenith_deg.is_finite()) {
        return Err(Error::input("steering angles must be finite"));
    }
    let (az, zen) = (azimuth_deg.to_radians(), zenith_deg.to_radians());
    let uy = zen.sin() * az.sin();
    let uz = zen.cos();
    let k = 2.0 * PI * geometry.element_spacing;
    let amp = 1.0 / (geometry.n_ports() as f64).sqrt();
    let mut v = vec![C64::new(0.0, 0.0); geometry.n_ports()];
    for r in 0..geometry.rows {
        for c in 0..geometry.cols {
            let phase = k * (c as f64 * uy + r as f64 * uz);
            let z = C64::from_polar(amp, phase);
            for p in 0..geometry.polarizations {
                v[geometry.port_index(r, c, p)] = z;
            }
        }
    }
    Ok(v)
}

/// One resolvable multipath component.
#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    /// Seconds.
    pub delay: f64,
    pub gains: Vec<C64>,
}

pub fn generate_cir(profile: &MultipathProfile, geometry: &ArrayGeometry, seed: u64) -> Result<Vec<Tap>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_cir_with(profile, geometry, &mut rng)
}

fn generate_cir_with<R: Rng>(profile: &MultipathProfile, geometry: &ArrayGeometry, rng: &mut R) -> Result<Vec<Tap>> {
    profile.validate()?;
    geometry.validate()?;
    let jitter = Normal::new(0.0, profile.per_path_angular_spread_deg)
        .map_err(|e| Error::input(format!("angular spread: {e}")))?;
    let powers = profile.linear_powers();
    let mut taps = Vec::with_capacity(profile.n_paths());
    for p in 0..profile.n_paths() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        let fade = C64::new(re, im) * (0.5f64).sqrt();
        let az = profile.azimuth_aod_deg[p] + jitter.sample(rng);
        let zen = profile.zenith_aod_deg[p] + jitter.sample(rng);
        let amp = fade * powers[p].sqrt();
        let gains = steering_vector(geometry, az, zen)?
            .into_iter()
            .map(|a| a * amp)
            .collect();
        taps.push(Tap {
            delay: profile.path_delays[p],
            gains,
        });
    }
    Ok(taps)
}

/// Spatial-frequency channel matrix: `N` subcarriers by `N_t` ports.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfr {
    pub data: CMatrix,
    /// Hz.
    pub subcarrier_spacing: f64,
    pub sample_id: u64,
}

impl Cfr {
    pub fn new(data: CMatrix, subcarrier_spacing: f64, sample_id: u64) -> Result<Self> {
        let c = Self {
            data,
            subcarrier_spacing,
            sample_id,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subcarriers() == 0 || self.n_ports() == 0 {
            return Err(Error::input("CFR must have N > 0 and N_t > 0"));
        }
        if self.data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::input("CFR contains non-finite entries"));
        }
        Ok(())
    }

    pub fn n_subcarriers(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_ports(&self) -> usize {
        self.data.ncols()
    }
}

/// Frequency response `H[s, t] = sum_p g_p[t] exp(-j 2 pi s scs delay_p)`.
pub fn cir_to_cfr(taps: &[Tap], n_subcarriers: usize, scs: f64) -> Result<Cfr> {
    if n_subcarriers == 0 {
        return Err(Error::input("n_subcarriers must be > 0"));
    }
    let n_ports = taps
        .first()
        .map(|t| t.gains.len())
        .ok_or_else(|| Error::input("CIR has no taps"))?;
    if taps.iter().any(|t| t.gains.len() != n_ports) {
        return Err(Error::input("taps disagree on port count"));
    }
    let mut h = Array2::<C64>::zeros((n_subcarriers, n_ports));
    for (s, mut row) in h.rows_mut().into_iter().enumerate() {
        let f = s as f64 * scs;
        for tap in taps {
            let rot = C64::from_polar(1.0, -2.0 * PI * f * tap.delay);
            for (dst, g) in row.iter_mut().zip(&tap.gains) {
                *dst += g * rot;
            }
        }
    }
    Cfr::new(h, scs, 0)
}

/// How a dataset was produced; not persisted by `CFR1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetMeta {
    pub config_hash: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Cfr>,
    pub meta: Option<DatasetMeta>,
    /// Recorded separately so an empty dataset still round-trips its header.
    pub dims: (usize, usize),
    pub scs_hz: f64,
}

impl Dataset {
    pub fn new(samples: Vec<Cfr>, dims: (usize, usize), scs_hz: f64, meta: Option<DatasetMeta>) -> Result<Self> {
        let ds = Self {
            samples,
            meta,
            dims,
            scs_hz,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.data.dim() != self.dims {
                return Err(Error::input(format!(
                    "sample {i} has shape {:?}, dataset is {:?}",
                    s.data.dim(),
                    self.dims
                )));
            }
            if s.sample_id != i as u64 {
                return Err(Error::input(format!(
                    "sample ids must run 0..n in order; position {i} holds id {}",
                    s.sample_id
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Short identifier used in result tables.
    pub fn id(&self) -> String {
        match self.meta {
            Some(m) => format!("{:016x}-s{}", m.config_hash, m.seed),
            None => format!("{}x{}-n{}", self.dims.0, self.dims.1, self.len()),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (n, nt) = self.dims;
        let to_u32 = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::input(format!("{what} {v} exceeds u32")))
        };
        let mut w = Writer::with_capacity(CFR1_HEADER_LEN + self.len() * (8 + n * nt * 16));
        w.bytes(CFR1_MAGIC);
        w.u32(CFR1_VERSION);
        w.u32(to_u32(n, "N")?);
        w.u32(to_u32(nt, "N_t")?);
        w.u64(self.len() as u64);
        w.f64(self.scs_hz);
        for s in &self.samples {
            w.u64(s.sample_id);
            w.matrix(&s.data);
        }
        Ok(w.into_inner())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let magic = r.take(4, "magic")?;
        if magic != CFR1_MAGIC {
            return Err(Error::format(0, format!("bad magic {magic:?}, expected \"CFR1\"")));
        }
        let version = r.u32("version")?;
        if version != CFR1_VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let n = r.u32("N")? as usize;
        let nt = r.u32("N_t")? as usize;
        let count = r.u64("sample_count")?;
        let scs = r.f64("scs_hz")?;
        if n == 0 || nt == 0 {
            return Err(Error::format(8, format!("dimension mismatch: N={n}, N_t={nt}")));
        }
        let record = 8 + (n as u64) * (nt as u64) * 16;
        let expected = record.checked_mul(count);
        if expected != Some(r.remaining() as u64) {
            return Err(Error::format(
                r.offset(),
                format!(
                    "payload is {} bytes, header promises {count} samples of {n}x{nt} ({} bytes)",
                    r.remaining(),
                    expected.map_or("overflow".to_string(), |e| e.to_string())
                ),
            ));
        }
        let mut samples = Vec::with_capacity(count as usize);
        for i in 0..count {
            let at = r.offset();
            let id = r.u64("sample_id")?;
            if id != i {
                return Err(Error::format(at, format!("sample id {id} out of sequence, expected {i}")));
            }
            let data = r.matrix(n, nt, "sample payload")?;
            samples.push(Cfr {
                data,
                subcarrier_spacing: scs,
                sample_id: id,
            });
        }
        r.finish("dataset")?;
        Dataset::new(samples, (n, nt), scs, None)
    }
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ds.to_bytes()?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::from_bytes(&fs::read(path)?)
}

fn default_n_subcarriers() -> usize {
    624
}
fn default_scs() -> f64 {
    15e3
}
fn default_geometry() -> ArrayGeometry {
    ArrayGeometry::uma_panel()
}

/// Dataset generation parameters. Defaults follow the 10 MHz / 15 kHz UMa
/// setup: 624 resource elements, 2x8x2 panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    /// Stock profile name or path to a profile file.
    pub profile: String,
    pub seed: u64,
    pub count: usize,
    #[serde(default = "default_n_subcarriers")]
    pub n_subcarriers: usize,
    #[serde(default = "default_scs")]
    pub scs_hz: f64,
    #[serde(default = "default_geometry")]
    pub geometry: ArrayGeometry,
}

impl GeneratorConfig {
    pub fn new(profile: impl Into<String>, seed: u64, count: usize) -> Self {
        Self {
            profile: profile.into(),
            seed,
            count,
            n_subcarriers: default_n_subcarriers(),
            scs_hz: default_scs(),
            geometry: default_geometry(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("generator config: {e}")))
    }

    /// Hash of the canonical serialization, independent of field order in the file.
    pub fn config_hash(&self) -> u64 {
        let canon = toml::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }
}

/// Generates `cfg.count` samples. Sample `i` draws from its own ChaCha stream,
/// so the result does not depend on thread scheduling.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Dataset> {
    let profile = MultipathProfile::resolve(&cfg.profile)?;
    generate_dataset_with(&profile, cfg)
}

pub fn generate_dataset_with(profile: &MultipathProfile, cfg: &GeneratorConfig) -> Result<Dataset> {
    cfg.geometry.validate()?;
    profile.validate()?;
    if cfg.n_subcarriers == 0 {
        return Err(Error::Config("n_subcarriers must be > 0".into()));
    }
    if !(cfg.scs_hz.is_finite() && cfg.scs_hz > 0.0) {
        return Err(Error::Config("scs_hz must be finite and > 0".into()));
    }
    let samples = (0..cfg.count as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(id);
            let taps = generate_cir_with(profile, &cfg.geometry, &mut rng)?;
            let mut cfr = cir_to_cfr(&taps, cfg.n_subcarriers, cfg.scs_hz)?;
            cfr.sample_id = id;
            Ok(cfr)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        samples,
        (cfg.n_subcarriers, cfg.geometry.n_ports()),
        cfg.scs_hz,
        Some(DatasetMeta {
            config_hash: cfg.config_hash(),
            seed: cfg.seed,
        }),
    )
}
