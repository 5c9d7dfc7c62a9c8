//! Run configuration: a TOML tree with typed sections, defaults for every
//! parameter, validation against each module's invariants, and a provenance
//! hash.

use std::path::{Path, PathBuf};

use radial_nls::flow::{FlowConfig, Scheme};
use radial_nls::functionals::{DissipationSpec, Gauge, Rho, Variant};
use radial_nls::measure::{HistogramRange, StationaryConfig};
use radial_nls::sde::{NoiseSpec, SdeConfig};
use radial_nls::spectral::SpectralField;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bumped whenever an output format changes.
pub const ARTIFACT_VERSION: &str = "1";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    SimulateDet,
    SimulateSde,
    StationaryStats,
    InviscidSweep,
    GrowthCheck,
    VerifyCounting,
    VerifyEigenNorms,
    VerifyProductNorms,
    VerifyMultilinear,
    VerifyRadialSobolev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub q: f64,
    pub variant: Variant,
    pub beta: f64,
    pub delta: f64,
    /// `ρ = 3ξ⁻¹` for this gauge unless `rho_constant` is set.
    pub gauge: Gauge,
    pub rho_constant: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            q: 3.0,
            variant: Variant::Subcritical,
            beta: 1.2,
            delta: 0.01,
            gauge: Gauge::Sqrt,
            rho_constant: None,
        }
    }
}

impl ModelConfig {
    pub fn dissipation(&self) -> DissipationSpec {
        DissipationSpec {
            variant: self.variant,
            q: self.q,
            beta: self.beta,
            rho: match self.rho_constant {
                Some(c) => Rho::Constant(c),
                None => Rho::Gauge(self.gauge),
            },
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// `a_n = scale · n^{−exponent}`.
    pub scale: f64,
    pub exponent: f64,
    pub admissibility_threshold: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            scale: 1.0,
            exponent: 2.0,
            admissibility_threshold: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialMode {
    pub n: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub initial: Vec<InitialMode>,
    pub record_every: usize,
    /// Extra `H^σ` columns in the trajectory log.
    pub sobolev: Vec<f64>,
    pub check_conservation: bool,
    pub tolerance: f64,
    pub picard_tolerance: f64,
    pub picard_max_iters: usize,
    pub picard_regularity: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            dt: 1e-4,
            horizon: 1.0,
            scheme: Scheme::SplitStepStrang,
            initial: vec![
                InitialMode { n: 1, re: 0.2, im: 0.0 },
                InitialMode { n: 2, re: 0.1, im: 0.0 },
            ],
            record_every: 100,
            sobolev: Vec::new(),
            check_conservation: true,
            tolerance: 1e-6,
            picard_tolerance: 1e-12,
            picard_max_iters: 200,
            picard_regularity: 1.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSection {
    pub alpha: f64,
    pub dt: f64,
    pub horizon: f64,
    pub trajectories: usize,
    /// Also run each path at `dt/2` on the same Brownian increments.
    pub coupled: bool,
    /// Snapshot stride (in steps) for the checkpoint of trajectory 0; 0 disables it.
    pub checkpoint_every: usize,
}

impl Default for SdeSection {
    fn default() -> Self {
        SdeSection {
            alpha: 0.1,
            dt: 1e-3,
            horizon: 1.0,
            trajectories: 100,
            coupled: true,
            checkpoint_every: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationarySection {
    pub dt: f64,
    pub horizon: f64,
    /// Defaults to 20% of the horizon.
    pub burn_in: Option<f64>,
    pub trajectories: usize,
    pub sample_every: usize,
    pub batches: usize,
    pub tail_radii: Vec<f64>,
    pub sobolev: Vec<f64>,
    pub mass_histogram: HistogramRange,
    pub energy_histogram: HistogramRange,
}

impl Default for StationarySection {
    fn default() -> Self {
        StationarySection {
            dt: 5e-3,
            horizon: 1000.0,
            burn_in: None,
            trajectories: 4,
            sample_every: 20,
            batches: 10,
            tail_radii: vec![0.01, 0.02, 0.05, 0.1],
            sobolev: Vec::new(),
            mass_histogram: HistogramRange {
                lo: 0.0,
                hi: 0.5,
                bins: 250,
            },
            energy_histogram: HistogramRange {
                lo: 0.0,
                hi: 5.0,
                bins: 250,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            alphas: vec![0.4, 0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthSection {
    pub samples: usize,
    /// Stationary run that supplies the initial data.
    pub sample_alpha: f64,
    pub sample_dt: f64,
    pub sample_horizon: f64,
    pub dt: f64,
    pub horizon: f64,
    pub every: usize,
    pub gauge: Gauge,
    /// Defaults to `β − δ`.
    pub sigma: Option<f64>,
}

impl Default for GrowthSection {
    fn default() -> Self {
        GrowthSection {
            samples: 8,
            sample_alpha: 0.1,
            sample_dt: 5e-3,
            sample_horizon: 50.0,
            dt: 1e-3,
            horizon: 100.0,
            every: 100,
            gauge: Gauge::Sqrt,
            sigma: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountingSection {
    pub ns: Vec<u64>,
    pub budget: u64,
    /// Oracle comparison of the pair count against a naive double loop up to this `M`.
    pub oracle_limit: u64,
    pub oracle_ns: Vec<u64>,
}

impl Default for CountingSection {
    fn default() -> Self {
        CountingSection {
            ns: (4..=10).map(|k| 1 << k).collect(),
            budget: 1 << 32,
            oracle_limit: 1_000_000,
            oracle_ns: vec![1, 2, 3, 7, 16, 45],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSection {
    pub ns: Vec<usize>,
    pub ps: Vec<f64>,
}

impl Default for EigenSection {
    fn default() -> Self {
        EigenSection {
            ns: (4..=9).map(|k| 1 << k).collect(),
            ps: vec![4.0, 6.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProductSection {
    pub ms: Vec<u32>,
    pub ns: Vec<usize>,
}

impl Default for ProductSection {
    fn default() -> Self {
        ProductSection {
            ms: vec![2, 3],
            ns: (3..=7).map(|k| 1 << k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultilinearSection {
    pub m: usize,
    pub scales: Vec<usize>,
    pub draws: usize,
    pub derivative: bool,
}

impl Default for MultilinearSection {
    fn default() -> Self {
        MultilinearSection {
            m: 3,
            scales: vec![8, 16, 32, 64],
            draws: 20,
            derivative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialSobolevSection {
    pub samples: usize,
    pub decay: f64,
}

impl Default for RadialSobolevSection {
    fn default() -> Self {
        RadialSobolevSection {
            samples: 1000,
            decay: 2.0,
        }
    }
}

fn default_dim() -> usize {
    8
}

fn default_workers() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub stationary: StationarySection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub growth: GrowthSection,
    #[serde(default)]
    pub counting: CountingSection,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub product: ProductSection,
    #[serde(default)]
    pub multilinear: MultilinearSection,
    #[serde(default)]
    pub radial_sobolev: RadialSobolevSection,
}

fn invalid(msg: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid(msg.to_string())
}

fn require(cond: bool, msg: &str) -> Result<(), ConfigError> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg))
    }
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Reads, parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = RunConfig::parse(&text, path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn noise(&self, dim: usize) -> Result<NoiseSpec, ConfigError> {
        NoiseSpec::power_law(dim, self.noise.scale, self.noise.exponent).map_err(invalid)
    }

    pub fn sde_config(&self) -> Result<SdeConfig, ConfigError> {
        Ok(SdeConfig::new(
            self.sde.alpha,
            self.sde.dt,
            self.sde.horizon,
            self.seed,
            self.model.dissipation(),
            self.noise(self.dim)?,
        ))
    }

    pub fn flow_config(&self) -> FlowConfig {
        let f = &self.flow;
        FlowConfig {
            dim: self.dim,
            q: self.model.q,
            dt: f.dt,
            horizon: f.horizon,
            scheme: f.scheme,
            picard_tolerance: f.picard_tolerance,
            picard_max_iters: f.picard_max_iters,
            picard_regularity: f.picard_regularity,
            nonlinearity: 1.0,
        }
    }

    pub fn initial_state(&self) -> Result<SpectralField, ConfigError> {
        let mut u = SpectralField::zeros(self.dim);
        for m in &self.flow.initial {
            if m.n == 0 || m.n > self.dim {
                return Err(invalid(format!("initial mode {} outside 1..={}", m.n, self.dim)));
            }
            u.coeffs_mut()[m.n - 1] = num_complex::Complex64::new(m.re, m.im);
        }
        if !u.is_finite() {
            return Err(invalid("initial coefficients must be finite"));
        }
        Ok(u)
    }

    pub fn stationary_config(&self, alpha: f64, dim: usize) -> Result<StationaryConfig, ConfigError> {
        let s = &self.stationary;
        let mut sde = self.sde_config()?;
        sde.alpha = alpha;
        sde.dt = s.dt;
        sde.noise = self.noise(dim)?;
        let mut cfg = StationaryConfig::new(sde, s.horizon, s.trajectories);
        if let Some(b) = s.burn_in {
            cfg.burn_in = b;
        }
        cfg.sample_every = s.sample_every;
        cfg.batches = s.batches;
        cfg.tail_radii = s.tail_radii.clone();
        cfg.functionals.extend(s.sobolev.iter().map(|&x| radial_nls::measure::Functional::Sobolev(x)));
        cfg.mass_range = s.mass_histogram.clone();
        cfg.energy_range = s.energy_histogram.clone();
        cfg.workers = self.workers;
        Ok(cfg)
    }

    /// Checks every parameter the command will use before anything runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        require(self.dim >= 1, "dim must be positive")?;
        require(self.workers >= 1, "workers must be positive")?;
        self.model.dissipation().validate().map_err(invalid)?;
        match self.command {
            Command::SimulateDet => {
                self.flow_config().validate().map_err(invalid)?;
                self.initial_state()?;
                require(self.flow.tolerance > 0.0, "flow.tolerance must be positive")?;
                require(self.flow.record_every >= 1, "flow.record_every must be positive")?;
            }
            Command::SimulateSde => {
                let c = self.sde_config()?;
                c.validate().map_err(invalid)?;
                require(c.alpha > 0.0, "sde.alpha must lie in (0, 1)")?;
                require(self.sde.trajectories >= 2, "sde.trajectories must be at least 2")?;
            }
            Command::StationaryStats => {
                self.stationary_config(self.sde.alpha, self.dim)?
                    .validate()
                    .map_err(invalid)?;
                require(self.sde.alpha > 0.0, "sde.alpha must lie in (0, 1)")?;
            }
            Command::InviscidSweep => {
                let a = &self.sweep.alphas;
                require(!a.is_empty(), "sweep.alphas must be nonempty")?;
                require(a.windows(2).all(|w| w[1] < w[0]), "sweep.alphas must be strictly decreasing")?;
                for &alpha in a {
                    require(alpha > 0.0 && alpha < 1.0, "sweep.alphas must lie in (0, 1)")?;
                    self.stationary_config(alpha, self.dim)?.validate().map_err(invalid)?;
                }
            }
            Command::GrowthCheck => {
                let g = &self.growth;
                require(g.samples >= 1, "growth.samples must be positive")?;
                require(g.sample_alpha > 0.0 && g.sample_alpha < 1.0, "growth.sample_alpha must lie in (0, 1)")?;
                require(g.sample_dt > 0.0 && g.sample_horizon > 0.0, "growth sampling dt and horizon must be positive")?;
                let mut f = self.flow_config();
                f.dt = g.dt;
                f.horizon = g.horizon;
                f.validate().map_err(invalid)?;
            }
            Command::VerifyCounting => {
                require(self.counting.ns.len() >= 5, "counting.ns needs at least 5 ladder points")?;
                require(self.counting.ns.iter().all(|&n| n >= 1), "counting.ns must be positive")?;
            }
            Command::VerifyEigenNorms => {
                require(self.eigen.ns.len() >= 2, "eigen.ns needs at least 2 points")?;
                require(self.eigen.ns.iter().all(|&n| n >= 1), "eigen.ns must be positive")?;
                require(self.eigen.ps.iter().all(|&p| p >= 1.0), "eigen.ps must be at least 1")?;
            }
            Command::VerifyProductNorms => {
                require(self.product.ns.len() >= 2, "product.ns needs at least 2 points")?;
                require(self.product.ns.iter().all(|&n| n >= 1), "product.ns must be positive")?;
                require(self.product.ms.iter().all(|&m| m >= 2), "product.ms must be at least 2")?;
            }
            Command::VerifyMultilinear => {
                let m = &self.multilinear;
                require(m.m >= 2, "multilinear.m must be at least 2")?;
                require(m.scales.len() >= 2, "multilinear.scales needs at least 2 rungs")?;
                require(m.scales.iter().all(|&n| n >= 1), "multilinear.scales must be positive")?;
                require(m.draws >= 1, "multilinear.draws must be positive")?;
            }
            Command::VerifyRadialSobolev => {
                require(self.radial_sobolev.samples >= 1, "radial_sobolev.samples must be positive")?;
            }
        }
        Ok(())
    }

    /// The effective configuration without the output directory and worker
    /// count, which do not affect results. Object keys are sorted.
    pub fn canonical(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
            map.remove("workers");
        }
        value
    }

    /// SHA-256 of the canonical JSON form of every setting that affects
    /// results; the output directory and worker count are excluded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("value serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    /// The hash as raw bytes, for binary headers.
    pub fn hash_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        let hex = self.hash();
        for (k, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * k..2 * k + 2], 16).expect("hex digest");
        }
        out
    }
}
