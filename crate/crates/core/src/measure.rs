//! Ergodic statistics of the damped-driven system and the growth-envelope
//! diagnostic for the Hamiltonian flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{strang, FlowConfig};
use crate::functionals::{
    cutoff, energy_dissipation_rate, energy_from_parts, mass, mass_dissipation_rate, CutoffSpec, Gauge,
};
use crate::sde::{sde_step, trajectory_rng, SdeConfig};
use crate::spectral::{lp_norm, sobolev_norm, synthesize, RadialGrid, SpectralField};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Count, compensated mean and second central moment, merged with Chan's
/// pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStat {
    count: u64,
    sum: CompensatedSum,
    m2: f64,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        let old_mean = self.mean();
        self.count += 1;
        self.sum.add(x);
        let new_mean = self.mean();
        self.m2 += (x - old_mean) * (x - new_mean);
    }

    pub fn merge(&mut self, other: &RunningStat) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean() - self.mean();
        self.m2 += other.m2 + delta * delta * na * nb / (na + nb);
        self.count += other.count;
        self.sum.merge(&other.sum);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum.value() / self.count as f64
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean, treating pushes as independent.
    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean(),
            stderr: self.stderr(),
            n: self.count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Fixed-edge histogram with explicit under- and overflow counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    underflow: u64,
    overflow: u64,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::Domain(format!("histogram range [{lo}, {hi}) with {bins} bins")));
        }
        let w = (hi - lo) / bins as f64;
        Ok(Histogram {
            edges: (0..=bins).map(|k| lo + w * k as f64).collect(),
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn push(&mut self, x: f64) {
        let lo = self.edges[0];
        let hi = *self.edges.last().expect("at least two edges");
        if x < lo {
            self.underflow += 1;
        } else if x >= hi || x.is_nan() {
            self.overflow += 1;
        } else {
            let bins = self.counts.len();
            let k = (((x - lo) / (hi - lo)) * bins as f64) as usize;
            self.counts[k.min(bins - 1)] += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.edges != other.edges {
            return Err(Error::Domain("cannot merge histograms with different edges".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        Ok(())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn underflow(&self) -> u64 {
        self.underflow
    }

    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// Probability per bin, with under- and overflow as leading and trailing entries.
    pub fn masses(&self) -> Vec<f64> {
        let total = self.total().max(1) as f64;
        std::iter::once(self.underflow)
            .chain(self.counts.iter().copied())
            .chain(std::iter::once(self.overflow))
            .map(|c| c as f64 / total)
            .collect()
    }

    /// L¹ distance between the normalized histograms, over- and underflow included.
    pub fn l1_distance(&self, other: &Histogram) -> Result<f64> {
        if self.edges != other.edges {
            return Err(Error::Domain("histograms have different edges".into()));
        }
        Ok(self
            .masses()
            .iter()
            .zip(other.masses())
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

/// Scalar functionals sampled along stationary trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Functional {
    Mass,
    Energy,
    MassRate,
    EnergyRate,
    Sobolev(f64),
    Lp(f64),
}

impl Functional {
    pub fn name(&self) -> String {
        match self {
            Functional::Mass => "mass".into(),
            Functional::Energy => "energy".into(),
            Functional::MassRate => "mass_rate".into(),
            Functional::EnergyRate => "energy_rate".into(),
            Functional::Sobolev(s) => format!("h{s}"),
            Functional::Lp(p) => format!("l{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRange {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

/// One sample of the state, reduced to the quantities an accumulator tracks.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub mass: f64,
    pub energy: f64,
    pub mass_rate: f64,
    pub values: Vec<f64>,
}

pub fn observe(u: &SpectralField, functionals: &[Functional], cfg: &SdeConfig, grid: &RadialGrid) -> Result<Observation> {
    let phys = synthesize(u, grid)?;
    let q = cfg.dissipation.q;
    let m = mass(u);
    let e = energy_from_parts(u, &phys, q, grid);
    let rate = mass_dissipation_rate(u, &cfg.dissipation, grid)?;
    let values = functionals
        .iter()
        .map(|f| {
            Ok(match f {
                Functional::Mass => m,
                Functional::Energy => e,
                Functional::MassRate => rate,
                Functional::EnergyRate => energy_dissipation_rate(u, &cfg.dissipation, grid)?,
                Functional::Sobolev(s) => sobolev_norm(u, *s),
                Functional::Lp(p) => lp_norm(&phys, grid, *p)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Observation {
        mass: m,
        energy: e,
        mass_rate: rate,
        values,
    })
}

/// Running statistics of the declared functionals, histograms of `M` and
/// `E`, and the tail integrals `∫𝓜(1 − χ_R(‖u‖²))` on a ladder of `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleAccumulator {
    pub functionals: Vec<Functional>,
    pub stats: Vec<RunningStat>,
    pub mass_histogram: Histogram,
    pub energy_histogram: Histogram,
    pub tail_radii: Vec<f64>,
    pub tails: Vec<RunningStat>,
    /// Raw `M` and `E` samples, kept for density estimation when requested.
    pub mass_samples: Vec<f64>,
    pub energy_samples: Vec<f64>,
    pub keep_samples: bool,
}

impl EnsembleAccumulator {
    pub fn new(
        functionals: Vec<Functional>,
        mass_range: &HistogramRange,
        energy_range: &HistogramRange,
        tail_radii: Vec<f64>,
        keep_samples: bool,
    ) -> Result<Self> {
        Ok(EnsembleAccumulator {
            stats: vec![RunningStat::default(); functionals.len()],
            functionals,
            mass_histogram: Histogram::uniform(mass_range.lo, mass_range.hi, mass_range.bins)?,
            energy_histogram: Histogram::uniform(energy_range.lo, energy_range.hi, energy_range.bins)?,
            tails: vec![RunningStat::default(); tail_radii.len()],
            tail_radii,
            mass_samples: Vec::new(),
            energy_samples: Vec::new(),
            keep_samples,
        })
    }

    pub fn count(&self) -> u64 {
        self.mass_histogram.total()
    }

    pub fn push(&mut self, obs: &Observation) {
        for (s, v) in self.stats.iter_mut().zip(&obs.values) {
            s.push(*v);
        }
        self.mass_histogram.push(obs.mass);
        self.energy_histogram.push(obs.energy);
        for (t, &r) in self.tails.iter_mut().zip(&self.tail_radii) {
            t.push(obs.mass_rate * (1.0 - cutoff(obs.mass, CutoffSpec { radius: r })));
        }
        if self.keep_samples {
            self.mass_samples.push(obs.mass);
            self.energy_samples.push(obs.energy);
        }
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) -> Result<()> {
        if self.functionals != other.functionals || self.tail_radii != other.tail_radii {
            return Err(Error::Domain("accumulators track different quantities".into()));
        }
        for (a, b) in self.stats.iter_mut().zip(&other.stats) {
            a.merge(b);
        }
        self.mass_histogram.merge(&other.mass_histogram)?;
        self.energy_histogram.merge(&other.energy_histogram)?;
        for (a, b) in self.tails.iter_mut().zip(&other.tails) {
            a.merge(b);
        }
        self.mass_samples.extend_from_slice(&other.mass_samples);
        self.energy_samples.extend_from_slice(&other.energy_samples);
        Ok(())
    }

    pub fn stat(&self, f: Functional) -> Option<&RunningStat> {
        self.functionals.iter().position(|g| *g == f).map(|k| &self.stats[k])
    }
}

/// Runs `task(i)` for `i in 0..n` on `workers` threads and returns the
/// results in index order, so downstream reductions do not depend on
/// scheduling.
pub fn run_indexed<T, F>(workers: usize, n: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(task).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryConfig {
    pub sde: SdeConfig,
    pub burn_in: f64,
    pub horizon: f64,
    pub trajectories: usize,
    /// Sample the state every this many steps after burn-in.
    pub sample_every: usize,
    /// Batches per trajectory for the batch-means standard error.
    pub batches: usize,
    pub functionals: Vec<Functional>,
    pub mass_range: HistogramRange,
    pub energy_range: HistogramRange,
    pub tail_radii: Vec<f64>,
    pub keep_samples: bool,
    pub workers: usize,
}

impl StationaryConfig {
    /// Defaults: burn-in at 20% of the horizon, 10 batches, `M`, `E`, `𝓜`, `𝓔`.
    pub fn new(sde: SdeConfig, horizon: f64, trajectories: usize) -> Self {
        StationaryConfig {
            sde,
            burn_in: 0.2 * horizon,
            horizon,
            trajectories,
            sample_every: 10,
            batches: 10,
            functionals: vec![
                Functional::Mass,
                Functional::Energy,
                Functional::MassRate,
                Functional::EnergyRate,
            ],
            mass_range: HistogramRange {
                lo: 0.0,
                hi: 2.0,
                bins: 200,
            },
            energy_range: HistogramRange {
                lo: 0.0,
                hi: 20.0,
                bins: 200,
            },
            tail_radii: Vec::new(),
            keep_samples: false,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sde.validate()?;
        if !(self.burn_in >= 0.0 && self.burn_in < self.horizon) {
            return Err(Error::Domain(format!(
                "burn-in {} must lie in [0, horizon = {})",
                self.burn_in, self.horizon
            )));
        }
        if self.trajectories == 0 || self.sample_every == 0 || self.batches < 2 {
            return Err(Error::Domain(
                "need at least one trajectory, a positive sampling stride and two batches".into(),
            ));
        }
        if !self.functionals.contains(&Functional::MassRate) {
            return Err(Error::Domain("the mass dissipation rate must be tracked".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalEstimate {
    pub name: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryReport {
    /// `A_0^N / 2`, the exact stationary value of `⟨𝓜⟩`.
    pub target: f64,
    pub mass_rate: Estimate,
    pub relative_error: f64,
    pub functionals: Vec<FunctionalEstimate>,
    pub first_half: Estimate,
    pub second_half: Estimate,
    /// Whether the two halves agree within three combined standard errors.
    pub halves_agree: bool,
    /// Integrated autocorrelation time of `𝓜`, in time units.
    pub autocorrelation_time: f64,
    pub divergent: usize,
    #[serde(skip)]
    pub accumulator: EnsembleAccumulator,
    #[serde(skip)]
    pub final_states: Vec<SpectralField>,
}

struct TrajectoryOutcome {
    acc: EnsembleAccumulator,
    batch_means: Vec<f64>,
    rate_series: Vec<f64>,
    final_state: SpectralField,
}

fn run_stationary_trajectory(cfg: &StationaryConfig, grid: &RadialGrid, index: usize) -> Result<TrajectoryOutcome> {
    let sde = &cfg.sde;
    let mut rng = trajectory_rng(sde.seed, index as u64);
    let mut acc = EnsembleAccumulator::new(
        cfg.functionals.clone(),
        &cfg.mass_range,
        &cfg.energy_range,
        cfg.tail_radii.clone(),
        cfg.keep_samples,
    )?;
    let total = (cfg.horizon / sde.dt).round() as usize;
    let burn = (cfg.burn_in / sde.dt).round() as usize;
    let mut u = SpectralField::zeros(sde.dim());
    let mut rates = Vec::new();
    for k in 1..=total {
        u = sde_step(&u, sde, grid, &mut rng).map_err(|e| e.at_time(k as f64 * sde.dt))?;
        if k > burn && (k - burn) % cfg.sample_every == 0 {
            let obs = observe(&u, &cfg.functionals, sde, grid)?;
            rates.push(obs.mass_rate);
            acc.push(&obs);
        }
    }
    let per_batch = rates.len() / cfg.batches;
    if per_batch == 0 {
        return Err(Error::Domain("too few samples after burn-in for the requested batches".into()));
    }
    let batch_means = rates
        .chunks_exact(per_batch)
        .take(cfg.batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    Ok(TrajectoryOutcome {
        acc,
        batch_means,
        rate_series: rates,
        final_state: u,
    })
}

/// Integrated autocorrelation time in samples, with Sokal's window `M ≥ 5τ`.
pub fn integrated_autocorrelation(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for lag in 1..n / 2 {
        let c = series[..n - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * c / c0;
        if lag as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Time-plus-ensemble averages after burn-in from zero initial data.
/// Divergent trajectories are counted and excluded.
pub fn stationary_average(cfg: &StationaryConfig) -> Result<StationaryReport> {
    cfg.validate()?;
    let grid = RadialGrid::for_dim(cfg.sde.dim(), cfg.sde.dissipation.q)?;
    let outcomes = run_indexed(cfg.workers, cfg.trajectories, |i| {
        run_stationary_trajectory(cfg, &grid, i)
    })?;
    let mut acc = EnsembleAccumulator::new(
        cfg.functionals.clone(),
        &cfg.mass_range,
        &cfg.energy_range,
        cfg.tail_radii.clone(),
        cfg.keep_samples,
    )?;
    let mut batches = RunningStat::default();
    let mut halves = [RunningStat::default(), RunningStat::default()];
    let mut divergent = 0;
    let mut tau_samples = None;
    let mut final_states = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                acc.merge(&o.acc)?;
                let half = o.batch_means.len() / 2;
                for (k, b) in o.batch_means.iter().enumerate() {
                    batches.push(*b);
                    halves[usize::from(k >= half)].push(*b);
                }
                if tau_samples.is_none() {
                    tau_samples = Some(integrated_autocorrelation(&o.rate_series));
                }
                final_states.push(o.final_state);
            }
            Err(Error::Divergence { .. }) => divergent += 1,
            Err(e) => return Err(e),
        }
    }
    if final_states.is_empty() {
        return Err(Error::divergence(f64::NAN, "every trajectory diverged"));
    }
    let target = 0.5 * cfg.sde.noise.a_r(0.0);
    let mass_rate = batches.estimate();
    let (h1, h2) = (halves[0].estimate(), halves[1].estimate());
    let functionals = acc
        .functionals
        .iter()
        .zip(&acc.stats)
        .map(|(f, s)| FunctionalEstimate {
            name: f.name(),
            mean: s.mean(),
            stderr: s.stderr(),
            n: s.count(),
        })
        .collect();
    Ok(StationaryReport {
        target,
        relative_error: (mass_rate.mean - target) / target,
        mass_rate,
        functionals,
        first_half: h1,
        second_half: h2,
        halves_agree: (h1.mean - h2.mean).abs() <= 3.0 * h1.stderr.hypot(h2.stderr),
        autocorrelation_time: tau_samples.unwrap_or(1.0) * cfg.sample_every as f64 * cfg.sde.dt,
        divergent,
        accumulator: acc,
        final_states,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailRow {
    pub radius: f64,
    pub tail: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailTable {
    pub rows: Vec<TailRow>,
    /// Log-log slope of the tail against `R` over rows with a positive tail.
    pub fitted_exponent: Option<f64>,
    /// `max_k R_k·tail(R_k) / (R_0·tail(R_0))`.
    pub max_scaled_ratio: f64,
    /// `R_last·tail(R_last) / (R_0·tail(R_0))`: at most 1 when the tail falls
    /// at least like `1/R` from the first radius to the last.
    pub end_to_end_ratio: f64,
}

/// Tail integrals `∫𝓜(1 − χ_R(‖u‖²))` for the accumulator's ladder of `R`.
pub fn tail_estimate(acc: &EnsembleAccumulator) -> Result<TailTable> {
    if acc.tail_radii.is_empty() || acc.count() == 0 {
        return Err(Error::Domain("accumulator carries no tail samples".into()));
    }
    let rows: Vec<TailRow> = acc
        .tail_radii
        .iter()
        .zip(&acc.tails)
        .map(|(&radius, s)| TailRow {
            radius,
            tail: s.mean(),
            stderr: s.stderr(),
        })
        .collect();
    let positive: Vec<&TailRow> = rows.iter().filter(|r| r.tail > 0.0).collect();
    let fitted_exponent = if positive.len() >= 2 {
        let x: Vec<f64> = positive.iter().map(|r| r.radius).collect();
        let y: Vec<f64> = positive.iter().map(|r| r.tail).collect();
        Some(crate::fit::loglog_fit(&x, &y)?.slope)
    } else {
        None
    };
    let base = rows[0].radius * rows[0].tail;
    let (max_scaled_ratio, end_to_end_ratio) = if base > 0.0 {
        let last = rows.last().expect("nonempty");
        (
            rows.iter().map(|r| r.radius * r.tail / base).fold(0.0, f64::max),
            last.radius * last.tail / base,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(TailTable {
        rows,
        fitted_exponent,
        max_scaled_ratio,
        end_to_end_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub mass_rate: Estimate,
    pub energy_rate: Option<Estimate>,
    pub mass_histogram: Histogram,
    pub energy_histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// L¹ distances of the `M` histograms between successive `α`.
    pub mass_distances: Vec<f64>,
    pub energy_distances: Vec<f64>,
    /// Whether successive distances shrink as `α` decreases.
    pub stabilizing: bool,
    /// `max/min` of the average energy dissipation rate across `α`.
    pub energy_rate_spread: Option<f64>,
}

/// Stationary statistics for each `α` (decreasing). Burn-in and horizon
/// scale like `1/α` relative to the first entry, since relaxation does.
pub fn inviscid_sweep(alphas: &[f64], base: &StationaryConfig) -> Result<SweepReport> {
    if alphas.is_empty() || alphas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("alphas must be nonempty and strictly decreasing".into()));
    }
    let mut rows = Vec::new();
    for &alpha in alphas {
        let stretch = alphas[0] / alpha;
        let mut cfg = base.clone();
        cfg.sde.alpha = alpha;
        cfg.burn_in = base.burn_in * stretch;
        cfg.horizon = base.horizon * stretch;
        cfg.sample_every = ((base.sample_every as f64) * stretch).round().max(1.0) as usize;
        let report = stationary_average(&cfg)?;
        let acc = &report.accumulator;
        rows.push(SweepRow {
            alpha,
            mass_rate: report.mass_rate,
            energy_rate: acc.stat(Functional::EnergyRate).map(RunningStat::estimate),
            mass_histogram: acc.mass_histogram.clone(),
            energy_histogram: acc.energy_histogram.clone(),
        });
    }
    let dist = |f: fn(&SweepRow) -> &Histogram| -> Result<Vec<f64>> {
        rows.windows(2).map(|w| f(&w[0]).l1_distance(f(&w[1]))).collect()
    };
    let mass_distances = dist(|r| &r.mass_histogram)?;
    let energy_distances = dist(|r| &r.energy_histogram)?;
    let stabilizing = mass_distances.windows(2).all(|w| w[1] <= w[0]);
    let rates: Vec<f64> = rows.iter().filter_map(|r| r.energy_rate.map(|e| e.mean)).collect();
    let energy_rate_spread = (!rates.is_empty()).then(|| {
        rates.iter().cloned().fold(f64::MIN, f64::max) / rates.iter().cloned().fold(f64::MAX, f64::min)
    });
    Ok(SweepReport {
        rows,
        mass_distances,
        energy_distances,
        stabilizing,
        energy_rate_spread,
    })
}

/// `2ξ(1 + i + ln(1 + |t|))`.
pub fn envelope(xi: Gauge, i: u32, t: f64) -> f64 {
    2.0 * xi.xi(1.0 + i as f64 + t.abs().ln_1p())
}

/// Smallest `i` with `‖u0‖ ≤ 2ξ(1 + i)`.
pub fn envelope_offset(norm: f64, xi: Gauge) -> u32 {
    let mut i = 0u32;
    while envelope(xi, i, 0.0) < norm && i < u32::MAX {
        i += 1;
    }
    i
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeFinding {
    pub sample: usize,
    pub time: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub sigma: f64,
    pub offsets: Vec<u32>,
    /// Largest `‖u(t)‖_{H^σ} / ξ(1 + i + ln(1+t))` per sample.
    pub max_ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Times at which the ratio exceeded 2.
    pub findings: Vec<EnvelopeFinding>,
}

/// Runs the Hamiltonian flow from each sample to `cfg.horizon`, checking
/// `‖u(t)‖_{H^σ} / ξ(1+i+ln(1+t))` against 2 every `every` steps.
pub fn growth_envelope_check(
    samples: &[SpectralField],
    cfg: &FlowConfig,
    sigma: f64,
    xi: Gauge,
    every: usize,
    workers: usize,
) -> Result<EnvelopeReport> {
    cfg.validate()?;
    let grid = RadialGrid::for_dim(cfg.dim, cfg.q)?;
    let (steps, dt) = cfg.step_plan();
    let every = every.max(1);
    let results = run_indexed(workers, samples.len(), |s| -> Result<(u32, f64, Vec<EnvelopeFinding>)> {
        let mut u = samples[s].resized(cfg.dim);
        let i = envelope_offset(sobolev_norm(&u, sigma), xi);
        let ratio_at = |u: &SpectralField, t: f64| sobolev_norm(u, sigma) / xi.xi(1.0 + i as f64 + t.ln_1p());
        let mut worst = ratio_at(&u, 0.0);
        let mut findings = Vec::new();
        for k in 1..=steps {
            let t = k as f64 * dt;
            u = strang(&u, cfg.q, cfg.nonlinearity, dt, &grid).map_err(|e| e.at_time(t))?;
            if k % every == 0 || k == steps {
                let r = ratio_at(&u, t);
                worst = worst.max(r);
                if r > 2.0 {
                    findings.push(EnvelopeFinding {
                        sample: s,
                        time: t,
                        ratio: r,
                    });
                }
            }
        }
        Ok((i, worst, findings))
    })?;
    let mut report = EnvelopeReport {
        sigma,
        offsets: Vec::new(),
        max_ratios: Vec::new(),
        max_ratio: 0.0,
        findings: Vec::new(),
    };
    for r in results {
        let (i, worst, findings) = r?;
        report.offsets.push(i);
        report.max_ratios.push(worst);
        report.max_ratio = report.max_ratio.max(worst);
        report.findings.extend(findings);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    pub edges: Vec<f64>,
    /// Probability per bin; sums to one.
    pub masses: Vec<f64>,
    /// Whether some bin holds more than the atom threshold.
    pub atomic: bool,
}

/// Bin-mass fraction above which a bin is flagged as an atom.
pub const ATOM_THRESHOLD: f64 = 0.2;

/// Normalized histogram with Freedman–Diaconis bin width.
pub fn empirical_density(samples: &[f64]) -> Result<Density> {
    if samples.len() < 1000 {
        return Err(Error::Domain(format!(
            "density estimation needs at least 1000 samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let quantile = |p: f64| {
        let x = p * (n - 1) as f64;
        let (lo, frac) = (x.floor() as usize, x.fract());
        sorted[lo] + frac * (sorted[(lo + 1).min(n - 1)] - sorted[lo])
    };
    let (min, max) = (sorted[0], sorted[n - 1]);
    let iqr = quantile(0.75) - quantile(0.25);
    let width = 2.0 * iqr / (n as f64).cbrt();
    if !(width > 0.0) || max == min {
        let c = (max - min).max(1.0) * 0.5;
        return Ok(Density {
            edges: vec![min - c, max + c],
            masses: vec![1.0],
            atomic: true,
        });
    }
    let bins = (((max - min) / width).ceil() as usize).clamp(1, 100_000);
    let mut hist = Histogram::uniform(min, max + width * 1e-9, bins)?;
    for &x in &sorted {
        hist.push(x);
    }
    let masses: Vec<f64> = hist.counts().iter().map(|&c| c as f64 / n as f64).collect();
    Ok(Density {
        edges: hist.edges().to_vec(),
        atomic: masses.iter().any(|&m| m > ATOM_THRESHOLD),
        masses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::DissipationSpec;
    use crate::sde::NoiseSpec;
    use rand::{Rng, SeedableRng};

    #[test]
    fn running_stat_merge_matches_stream() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 10.0 - 3.0).collect();
        let mut whole = RunningStat::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (RunningStat::default(), RunningStat::default());
        xs[..377].iter().for_each(|&x| a.push(x));
        xs[377..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_eq!(a.count(), whole.count());
        assert!((a.mean() - whole.mean()).abs() < 1e-12 * whole.mean().abs());
        assert!((a.variance() - whole.variance()).abs() < 1e-12 * whole.variance());
        let mut empty = RunningStat::default();
        empty.merge(&whole);
        assert_eq!(empty, whole);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let mut s = CompensatedSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn histogram_bins_and_distance() {
        let mut h = Histogram::uniform(0.0, 1.0, 4).unwrap();
        for x in [-0.1, 0.0, 0.3, 0.99, 1.0, 0.5] {
            h.push(x);
        }
        assert_eq!(h.counts(), &[1, 1, 1, 1]);
        assert_eq!(h.total(), 6);
        let m: f64 = h.masses().iter().sum();
        assert!((m - 1.0).abs() < 1e-15);
        assert_eq!(h.l1_distance(&h).unwrap(), 0.0);
        let other = Histogram::uniform(0.0, 2.0, 4).unwrap();
        assert!(h.merge(&other).is_err());
    }

    #[test]
    fn autocorrelation_of_ar1() {
        let phi: f64 = 0.8;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut x = 0.0;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                x = phi * x + e;
                x
            })
            .collect();
        let exact = (1.0 + phi) / (1.0 - phi);
        let tau = integrated_autocorrelation(&series);
        assert!((tau - exact).abs() < 0.1 * exact, "{tau}");
    }

    #[test]
    fn density_of_constant_is_atomic() {
        let d = empirical_density(&vec![3.0; 2000]).unwrap();
        assert!(d.atomic);
        assert!((d.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn density_of_uniform_has_no_atom() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let d = empirical_density(&xs).unwrap();
        assert!(!d.atomic);
        assert!((d.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(empirical_density(&xs[..10]).is_err());
    }

    #[test]
    fn envelope_offset_covers_initial_norm() {
        for norm in [0.0, 1.0, 2.5, 17.0] {
            for xi in [Gauge::Sqrt, Gauge::Log1p, Gauge::Identity] {
                let i = envelope_offset(norm, xi);
                assert!(norm <= envelope(xi, i, 0.0));
                assert!(i == 0 || norm > envelope(xi, i - 1, 0.0));
            }
        }
    }

    #[test]
    fn linear_flow_never_crosses_envelope() {
        let mut cfg = FlowConfig::new(8, 3.0, 1e-2, 5.0);
        cfg.nonlinearity = 0.0;
        let u = SpectralField::mode(2, 8, num_complex::Complex64::new(1.0, 0.0)).unwrap();
        let r = growth_envelope_check(&[u], &cfg, 1.0, Gauge::Sqrt, 10, 1).unwrap();
        assert!(r.findings.is_empty());
        assert!(r.max_ratio <= 2.0);
    }

    fn small_stationary(noise_scale: f64) -> StationaryConfig {
        let sde = SdeConfig::new(
            0.1,
            0.01,
            0.0,
            3,
            DissipationSpec::subcritical(3.0, 1.2),
            NoiseSpec::power_law(4, noise_scale, 2.0).unwrap(),
        );
        let mut cfg = StationaryConfig::new(sde, 20.0, 2);
        cfg.tail_radii = vec![0.01, 0.1, 1.0];
        cfg
    }

    #[test]
    fn noiseless_damping_collapses_to_rest() {
        let report = stationary_average(&small_stationary(0.0)).unwrap();
        assert_eq!(report.target, 0.0);
        assert_eq!(report.mass_rate.mean, 0.0);
    }

    #[test]
    fn stationary_run_is_reproducible_and_consistent() {
        let cfg = small_stationary(1.0);
        let a = stationary_average(&cfg).unwrap();
        let b = stationary_average(&cfg).unwrap();
        assert_eq!(a.mass_rate, b.mass_rate);
        assert_eq!(a.divergent, 0);
        assert_eq!(a.final_states.len(), 2);
        let table = tail_estimate(&a.accumulator).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert!(table.rows.windows(2).all(|w| w[1].tail <= w[0].tail));
    }
}
