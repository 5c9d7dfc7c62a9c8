//! The damped, noise-driven Galerkin system
//! `du = i(Δu − Π|u|^{2q}u)dt − α𝓛(u)dt + √α dW`.
//!
//! One step applies, in this order: the Strang Hamiltonian step (linear and
//! pointwise nonlinear phases), the explicit damping substep with taming, and
//! the additive noise increment.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::strang;
use crate::functionals::{dissipation_operator, mass, mass_dissipation_rate, DissipationSpec};
use crate::spectral::{mode_eigenvalue, RadialGrid, SpectralField};

/// Per-trajectory random stream.
pub type TrajectoryRng = ChaCha8Rng;

/// The stream for trajectory `index` of a run seeded with `master_seed`.
/// Streams are independent of how trajectories are scheduled.
pub fn trajectory_rng(master_seed: u64, index: u64) -> TrajectoryRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Noise amplitudes `a_n` of `W = Σ a_n e_n β_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    amplitudes: Vec<Complex64>,
}

impl NoiseSpec {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Domain("noise amplitudes must be finite".into()));
        }
        if amplitudes.windows(2).any(|w| w[1].norm() > w[0].norm()) {
            return Err(Error::Domain("noise amplitudes |a_n| must be nonincreasing".into()));
        }
        Ok(NoiseSpec { amplitudes })
    }

    /// `a_n = scale · n^{−exponent}` for `n = 1..=dim`.
    pub fn power_law(dim: usize, scale: f64, exponent: f64) -> Result<Self> {
        if !(exponent >= 0.0) {
            return Err(Error::Domain(format!("noise exponent {exponent} must be nonnegative")));
        }
        NoiseSpec::new(
            (1..=dim)
                .map(|n| Complex64::new(scale * (n as f64).powf(-exponent), 0.0))
                .collect(),
        )
    }

    pub fn zero(dim: usize) -> Self {
        NoiseSpec {
            amplitudes: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.iter().all(|a| a.norm_sqr() == 0.0)
    }

    /// `A_r^N = Σ z_n^{2r} |a_n|²` with `z_n = nπ`.
    pub fn a_r(&self, r: f64) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| mode_eigenvalue(k + 1).powf(r) * a.norm_sqr())
            .sum()
    }

    /// Warning text when `A_1^N` exceeds `threshold`; any finite `N` is
    /// admissible, so this never rejects.
    pub fn admissibility_warning(&self, threshold: f64) -> Option<String> {
        let a1 = self.a_r(1.0);
        (a1 > threshold).then(|| {
            format!(
                "A_1^N = {a1:e} exceeds {threshold:e}; the amplitudes may not be admissible as N grows"
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub alpha: f64,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub dissipation: DissipationSpec,
    pub noise: NoiseSpec,
    /// Coefficient of the Hamiltonian nonlinearity; `0` leaves only the linear phase.
    pub nonlinearity: f64,
}

/// Upper bound on damping step halvings before the state is declared divergent.
pub const MAX_TAMING_HALVINGS: u32 = 40;
/// Upper bound on damping substeps within one step.
pub const MAX_DAMPING_SUBSTEPS: usize = 1 << 16;

impl SdeConfig {
    pub fn new(alpha: f64, dt: f64, horizon: f64, seed: u64, dissipation: DissipationSpec, noise: NoiseSpec) -> Self {
        SdeConfig {
            alpha,
            dt,
            horizon,
            seed,
            dissipation,
            noise,
            nonlinearity: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.noise.dim()
    }

    /// `α = 0` is accepted as the degenerate Hamiltonian case.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Domain(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Domain(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Domain(format!("horizon = {} must be nonnegative", self.horizon)));
        }
        if self.dim() == 0 {
            return Err(Error::Domain("noise must have at least one mode".into()));
        }
        self.dissipation.validate()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    fn damped(&self) -> bool {
        self.alpha > 0.0
    }

    fn forced(&self) -> bool {
        self.alpha > 0.0 && !self.noise.is_zero()
    }
}

/// `Σ a_n e_n ΔB_n` with `ΔB_n ~ N(0, dt)` real and independent.
pub fn sample_noise_increment<R: Rng + ?Sized>(spec: &NoiseSpec, dt: f64, rng: &mut R) -> SpectralField {
    let sd = dt.sqrt();
    let coeffs = spec
        .amplitudes
        .iter()
        .map(|a| {
            let db: f64 = rng.sample(StandardNormal);
            a * (db * sd)
        })
        .collect();
    SpectralField::from_coeffs(coeffs).expect("finite amplitudes give finite increments")
}

fn check_dim(u: &SpectralField, cfg: &SdeConfig) -> Result<()> {
    if u.dim() != cfg.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim(),
            found: u.dim(),
        });
    }
    Ok(())
}

/// Explicit damping `u ↦ u − α h 𝓛(u)` over `dt`, halving `h` whenever
/// `‖α h 𝓛(u)‖ > ½‖u‖`.
fn damp(u: SpectralField, cfg: &SdeConfig, grid: &RadialGrid) -> Result<SpectralField> {
    let mut v = u;
    let mut remaining = cfg.dt;
    let mut substeps = 0;
    while remaining > 0.0 {
        substeps += 1;
        if substeps > MAX_DAMPING_SUBSTEPS {
            return Err(Error::divergence(f64::NAN, "damping needs too many substeps"));
        }
        let l = dissipation_operator(&v, &cfg.dissipation, grid)?;
        let l_norm = mass(&l).sqrt();
        let v_norm = mass(&v).sqrt();
        let mut h = remaining;
        let mut halvings = 0;
        while cfg.alpha * h * l_norm > 0.5 * v_norm {
            h *= 0.5;
            halvings += 1;
            if halvings > MAX_TAMING_HALVINGS {
                return Err(Error::divergence(f64::NAN, "damping step could not be tamed"));
            }
        }
        let k = cfg.alpha * h;
        for (a, b) in v.coeffs_mut().iter_mut().zip(l.coeffs()) {
            *a -= b * k;
        }
        remaining = if h >= remaining { 0.0 } else { remaining - h };
    }
    Ok(v)
}

/// One step driven by a given Brownian increment `ΔW` (already summed over
/// the step, not yet scaled by `√α`).
pub fn sde_step_with(u: &SpectralField, cfg: &SdeConfig, grid: &RadialGrid, increment: &SpectralField) -> Result<SpectralField> {
    check_dim(u, cfg)?;
    let mut v = strang(u, cfg.dissipation.q, cfg.nonlinearity, cfg.dt, grid)?;
    if cfg.damped() {
        v = damp(v, cfg, grid)?;
    }
    if cfg.forced() {
        let s = cfg.alpha.sqrt();
        for (a, b) in v.coeffs_mut().iter_mut().zip(increment.coeffs()) {
            *a += b * s;
        }
    }
    if !v.is_finite() {
        return Err(Error::divergence(f64::NAN, "non-finite state after stochastic step"));
    }
    Ok(v)
}

pub fn sde_step<R: Rng + ?Sized>(u: &SpectralField, cfg: &SdeConfig, grid: &RadialGrid, rng: &mut R) -> Result<SpectralField> {
    let dw = if cfg.forced() {
        sample_noise_increment(&cfg.noise, cfg.dt, rng)
    } else {
        SpectralField::zeros(cfg.dim())
    };
    sde_step_with(u, cfg, grid, &dw)
}

/// Mass and mass-dissipation series of one trajectory on the step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub dissipation: Vec<f64>,
    pub final_state: SpectralField,
}

fn record(path: &mut SdePath, t: f64, u: &SpectralField, cfg: &SdeConfig, grid: &RadialGrid) -> Result<()> {
    path.times.push(t);
    path.mass.push(mass(u));
    path.dissipation.push(if cfg.damped() {
        mass_dissipation_rate(u, &cfg.dissipation, grid)?
    } else {
        0.0
    });
    Ok(())
}

/// Runs one trajectory to the horizon with increments drawn from `rng`.
pub fn simulate<R: Rng + ?Sized>(u0: &SpectralField, cfg: &SdeConfig, grid: &RadialGrid, rng: &mut R) -> Result<SdePath> {
    cfg.validate()?;
    check_dim(u0, cfg)?;
    let mut path = SdePath {
        times: Vec::new(),
        mass: Vec::new(),
        dissipation: Vec::new(),
        final_state: u0.clone(),
    };
    record(&mut path, 0.0, u0, cfg, grid)?;
    let mut u = u0.clone();
    for k in 1..=cfg.steps() {
        let t = k as f64 * cfg.dt;
        u = sde_step(&u, cfg, grid, rng).map_err(|e| e.at_time(t))?;
        record(&mut path, t, &u, cfg, grid).map_err(|e| e.at_time(t))?;
    }
    path.final_state = u;
    Ok(path)
}

/// `½M(u(t)) + α∫₀ᵗ𝓜 − ½M(u₀) − (α/2)A₀ᴺ t` for one path, time integral by
/// trapezoid over the recorded series.
pub fn path_mass_residual(path: &SdePath, cfg: &SdeConfig) -> f64 {
    let n = path.times.len();
    if n == 0 {
        return 0.0;
    }
    let t = path.times[n - 1] - path.times[0];
    let integral: f64 = path
        .times
        .windows(2)
        .zip(path.dissipation.windows(2))
        .map(|(ts, d)| 0.5 * (ts[1] - ts[0]) * (d[0] + d[1]))
        .sum();
    0.5 * (path.mass[n - 1] - path.mass[0]) + cfg.alpha * integral - 0.5 * cfg.alpha * cfg.noise.a_r(0.0) * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItoResidual {
    pub residual: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl ItoResidual {
    /// Mean and standard error of per-trajectory residuals.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        ItoResidual {
            residual: mean,
            stderr: (var / nf).sqrt(),
            samples: n,
        }
    }

    pub fn within(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.stderr
    }
}

/// The Itô mass-balance residual of an ensemble: mean over trajectories of
/// the per-path identity, with its Monte-Carlo standard error.
pub fn ito_mass_residual(paths: &[SdePath], cfg: &SdeConfig) -> ItoResidual {
    let r: Vec<f64> = paths.iter().map(|p| path_mass_residual(p, cfg)).collect();
    ItoResidual::from_samples(&r)
}

/// Residuals of the same Brownian path at steps `dt` and `dt/2`: the fine
/// path consumes increments pairwise, the coarse path their sums.
pub fn coupled_mass_residuals<R: Rng + ?Sized>(
    u0: &SpectralField,
    cfg: &SdeConfig,
    grid: &RadialGrid,
    rng: &mut R,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    check_dim(u0, cfg)?;
    let fine_cfg = SdeConfig {
        dt: 0.5 * cfg.dt,
        ..cfg.clone()
    };
    let new_path = || SdePath {
        times: Vec::new(),
        mass: Vec::new(),
        dissipation: Vec::new(),
        final_state: u0.clone(),
    };
    let (mut coarse, mut fine) = (new_path(), new_path());
    record(&mut coarse, 0.0, u0, cfg, grid)?;
    record(&mut fine, 0.0, u0, cfg, grid)?;
    let (mut uc, mut uf) = (u0.clone(), u0.clone());
    for k in 1..=cfg.steps() {
        let t = k as f64 * cfg.dt;
        let w1 = sample_noise_increment(&cfg.noise, fine_cfg.dt, rng);
        let w2 = sample_noise_increment(&cfg.noise, fine_cfg.dt, rng);
        let mid = t - fine_cfg.dt;
        uf = sde_step_with(&uf, &fine_cfg, grid, &w1).map_err(|e| e.at_time(mid))?;
        record(&mut fine, mid, &uf, cfg, grid)?;
        uf = sde_step_with(&uf, &fine_cfg, grid, &w2).map_err(|e| e.at_time(t))?;
        record(&mut fine, t, &uf, cfg, grid)?;
        let mut w = w1;
        for (a, b) in w.coeffs_mut().iter_mut().zip(w2.coeffs()) {
            *a += b;
        }
        uc = sde_step_with(&uc, cfg, grid, &w).map_err(|e| e.at_time(t))?;
        record(&mut coarse, t, &uc, cfg, grid)?;
    }
    Ok((path_mass_residual(&coarse, cfg), path_mass_residual(&fine, &fine_cfg)))
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"RNLSCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub config_hash: [u8; 32],
    pub seed: u64,
    pub dim: usize,
}

/// Appends little-endian snapshot records after a versioned header.
pub struct CheckpointWriter<W: Write> {
    inner: W,
    dim: usize,
}

impl<W: Write> CheckpointWriter<W> {
    pub fn new(mut inner: W, header: &CheckpointHeader) -> Result<Self> {
        inner.write_all(CHECKPOINT_MAGIC)?;
        inner.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        inner.write_all(&header.config_hash)?;
        inner.write_all(&header.seed.to_le_bytes())?;
        inner.write_all(&(header.dim as u64).to_le_bytes())?;
        Ok(CheckpointWriter {
            inner,
            dim: header.dim,
        })
    }

    pub fn write_snapshot(&mut self, time: f64, u: &SpectralField) -> Result<()> {
        if u.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: u.dim(),
            });
        }
        self.inner.write_all(&time.to_le_bytes())?;
        for c in u.coeffs() {
            self.inner.write_all(&c.re.to_le_bytes())?;
            self.inner.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub snapshots: Vec<(f64, SpectralField)>,
}

fn read_array<const K: usize>(r: &mut impl Read) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated stream: {e}")))?;
    Ok(buf)
}

pub fn read_checkpoint(mut r: impl Read) -> Result<Checkpoint> {
    if &read_array::<8>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config_hash = read_array::<32>(&mut r)?;
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let dim = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let record = 8 * (1 + 2 * dim);
    if rest.len() % record != 0 {
        return Err(Error::Checkpoint(format!(
            "payload of {} bytes is not a whole number of {record}-byte records",
            rest.len()
        )));
    }
    let f = |b: &[u8]| f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
    let snapshots = rest
        .chunks_exact(record)
        .map(|rec| {
            let time = f(&rec[..8]);
            let coeffs = rec[8..]
                .chunks_exact(16)
                .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
                .collect();
            (time, SpectralField::from_coeffs(coeffs).unwrap_or_else(|_| SpectralField::zeros(dim)))
        })
        .collect();
    Ok(Checkpoint {
        header: CheckpointHeader {
            config_hash,
            seed,
            dim,
        },
        snapshots,
    })
}
