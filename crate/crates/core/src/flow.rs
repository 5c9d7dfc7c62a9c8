//! Galerkin-projected Hamiltonian flow `∂_t u = i(Δu − Π^N|u|^{2q}u)`.
//!
//! Two independent integrators: a Strang split-step scheme whose substeps
//! are exact (diagonal phases in spectral space, pointwise phases in physical
//! space) and a Picard iteration of the Duhamel map on a uniform time grid.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{energy_from_parts, mass, pointwise_power};
use crate::spectral::{
    analyze, linear_propagate, project, sobolev_norm, synthesize, RadialGrid, SpectralField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    SplitStepStrang,
    PicardOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub dim: usize,
    pub q: f64,
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub picard_tolerance: f64,
    pub picard_max_iters: usize,
    /// Sobolev index of the sup-in-time norm the Picard iteration contracts in.
    pub picard_regularity: f64,
    /// Coefficient in front of the nonlinearity; `0` gives the free flow.
    pub nonlinearity: f64,
}

impl FlowConfig {
    pub fn new(dim: usize, q: f64, dt: f64, horizon: f64) -> Self {
        FlowConfig {
            dim,
            q,
            dt,
            horizon,
            scheme: Scheme::SplitStepStrang,
            picard_tolerance: 1e-12,
            picard_max_iters: 200,
            picard_regularity: 1.6,
            nonlinearity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Domain("flow dimension must be positive".into()));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Domain(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Domain(format!("horizon = {} must be nonnegative", self.horizon)));
        }
        if !(self.picard_tolerance > 0.0) {
            return Err(Error::Domain("Picard tolerance must be positive".into()));
        }
        if !(self.q > 0.0) {
            return Err(Error::Domain(format!("q = {} must be positive", self.q)));
        }
        Ok(())
    }

    /// Number of steps to reach the horizon and the (uniform) step that lands on it.
    pub fn step_plan(&self) -> (usize, f64) {
        if self.horizon == 0.0 {
            return (0, self.dt);
        }
        let n = (self.horizon / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.horizon / n as f64)
    }
}

/// Exact solution of the pointwise ODE `∂_t u = −iκ|u|^{2q}u` over `dt`,
/// followed by projection onto the field's modes.
pub fn nonlinear_phase(u: &SpectralField, q: f64, kappa: f64, dt: f64, grid: &RadialGrid) -> Result<SpectralField> {
    if kappa == 0.0 {
        return Ok(u.clone());
    }
    let mut phys = synthesize(u, grid)?;
    for v in phys.values.iter_mut() {
        let m2 = v.norm_sqr();
        if m2 > 0.0 {
            *v *= Complex64::from_polar(1.0, -kappa * dt * m2.powf(q));
        }
    }
    analyze(&phys, grid, u.dim())
}

pub(crate) fn strang(u: &SpectralField, q: f64, kappa: f64, dt: f64, grid: &RadialGrid) -> Result<SpectralField> {
    let half = linear_propagate(u, 0.5 * dt);
    let kicked = nonlinear_phase(&half, q, kappa, dt, grid)?;
    let out = linear_propagate(&kicked, 0.5 * dt);
    if !out.is_finite() {
        return Err(Error::divergence(f64::NAN, "non-finite state after split step"));
    }
    Ok(out)
}

/// One Strang step: half linear, full nonlinear, half linear.
pub fn step_splitstep(u: &SpectralField, cfg: &FlowConfig, grid: &RadialGrid) -> Result<SpectralField> {
    if u.dim() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            found: u.dim(),
        });
    }
    strang(u, cfg.q, cfg.nonlinearity, cfg.dt, grid)
}

/// Scalar observables recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Observable {
    Mass,
    Energy,
    Sobolev(f64),
}

impl Observable {
    pub fn column_name(&self) -> String {
        match self {
            Observable::Mass => "mass".into(),
            Observable::Energy => "energy".into(),
            Observable::Sobolev(s) => format!("h{s}"),
        }
    }
}

/// Which observables to record and how often.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPlan {
    pub observables: Vec<Observable>,
    /// Record every `every` steps; the initial and final states are always recorded.
    pub every: usize,
}

impl ObservationPlan {
    pub fn conservation(every: usize) -> Self {
        ObservationPlan {
            observables: vec![Observable::Mass, Observable::Energy],
            every,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub final_state: SpectralField,
}

impl Trajectory {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Largest `|f(t) − f(0)| / |f(0)|` over the log for column `name`.
    pub fn relative_drift(&self, name: &str) -> Option<f64> {
        let col = self.column(name)?;
        let first = *col.first()?;
        Some(col.iter().map(|v| (v - first).abs()).fold(0.0, f64::max) / first.abs())
    }

    /// CSV with a `time` column first; `extra` columns carry constant values.
    pub fn write_csv<W: Write>(&self, mut w: W, extra: &[(String, String)]) -> std::io::Result<()> {
        let mut header = vec!["time".to_string()];
        header.extend(self.columns.iter().cloned());
        header.extend(extra.iter().map(|(k, _)| k.clone()));
        writeln!(w, "{}", header.join(","))?;
        for (t, row) in self.times.iter().zip(&self.rows) {
            let mut fields = vec![format!("{t}")];
            fields.extend(row.iter().map(|v| format!("{v}")));
            fields.extend(extra.iter().map(|(_, v)| v.clone()));
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

fn observe(u: &SpectralField, obs: &[Observable], q: f64, grid: &RadialGrid) -> Result<Vec<f64>> {
    let phys = if obs.contains(&Observable::Energy) {
        Some(synthesize(u, grid)?)
    } else {
        None
    };
    Ok(obs
        .iter()
        .map(|o| match o {
            Observable::Mass => mass(u),
            Observable::Energy => energy_from_parts(u, phys.as_ref().expect("synthesized"), q, grid),
            Observable::Sobolev(s) => sobolev_norm(u, *s),
        })
        .collect())
}

/// Advances `u0` to the horizon with the split-step scheme, recording the plan's
/// observables.
pub fn integrate(u0: &SpectralField, cfg: &FlowConfig, grid: &RadialGrid, plan: &ObservationPlan) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.dim() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            found: u0.dim(),
        });
    }
    let (steps, dt) = cfg.step_plan();
    let every = plan.every.max(1);
    let mut traj = Trajectory {
        columns: plan.observables.iter().map(Observable::column_name).collect(),
        times: vec![0.0],
        rows: vec![observe(u0, &plan.observables, cfg.q, grid)?],
        final_state: u0.clone(),
    };
    let mut u = u0.clone();
    for k in 1..=steps {
        let t = k as f64 * dt;
        u = strang(&u, cfg.q, cfg.nonlinearity, dt, grid).map_err(|e| e.at_time(t))?;
        if k % every == 0 || k == steps {
            traj.times.push(t);
            traj.rows.push(observe(&u, &plan.observables, cfg.q, grid)?);
        }
    }
    traj.final_state = u;
    Ok(traj)
}

/// Final state of the split-step flow at the configured horizon.
pub fn evolve(u0: &SpectralField, cfg: &FlowConfig, grid: &RadialGrid) -> Result<SpectralField> {
    let plan = ObservationPlan {
        observables: Vec::new(),
        every: usize::MAX,
    };
    Ok(integrate(u0, cfg, grid, &plan)?.final_state)
}

/// Runs the split-step flow backwards in time from `u` over the horizon.
pub fn integrate_backward(u: &SpectralField, cfg: &FlowConfig, grid: &RadialGrid) -> Result<SpectralField> {
    cfg.validate()?;
    let (steps, dt) = cfg.step_plan();
    let mut v = u.clone();
    for k in 1..=steps {
        v = strang(&v, cfg.q, cfg.nonlinearity, -dt, grid).map_err(|e| e.at_time(-(k as f64) * dt))?;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    pub path: Vec<SpectralField>,
    /// Sup-in-time `H^s` distance between the last two iterates.
    pub residual: f64,
    pub iterations: usize,
    /// Largest ratio of successive residuals over the iteration.
    pub contraction: f64,
}

impl PicardSolution {
    pub fn state(&self) -> &SpectralField {
        self.path.last().expect("path holds at least the initial state")
    }
}

/// Calibrated constants of the window heuristic for `R = ‖u₀‖_{H^{1.6}}`:
/// the measured contraction factor stays near ½ for `R ∈ [2, 20]`.
pub const PICARD_WINDOW_C: f64 = 1.0;
pub const PICARD_WINDOW_KAPPA: f64 = 1.0;

/// Local-existence window heuristic `T_R = c · R^{−2qκ}`.
pub fn picard_window(radius: f64, q: f64, c: f64, kappa: f64) -> f64 {
    c * radius.powf(-2.0 * q * kappa)
}

/// Fixed point of the Duhamel map
/// `u(t) = S(t)u0 − i ∫₀ᵗ S(t−s) Π|u|^{2q}u(s) ds`, with the time integral
/// discretized by the trapezoid rule on the grid `t_i = i·h`.
pub fn picard_solve(u0: &SpectralField, cfg: &FlowConfig, grid: &RadialGrid) -> Result<PicardSolution> {
    cfg.validate()?;
    if !(cfg.picard_regularity > 1.5) {
        return Err(Error::Domain(format!(
            "Picard iteration needs s > 3/2, got {}",
            cfg.picard_regularity
        )));
    }
    if !(cfg.q >= 1.0 && cfg.q.fract() == 0.0) {
        return Err(Error::Domain(format!("Picard oracle needs integer q ≥ 1, got {}", cfg.q)));
    }
    if u0.dim() != cfg.dim {
        return Err(Error::DimensionMismatch {
            expected: cfg.dim,
            found: u0.dim(),
        });
    }
    let (steps, h) = cfg.step_plan();
    let times: Vec<f64> = (0..=steps).map(|i| i as f64 * h).collect();
    let free: Vec<SpectralField> = times.iter().map(|&t| linear_propagate(u0, t)).collect();
    let mut path = free.clone();
    let mut previous = f64::INFINITY;
    let mut contraction: f64 = 0.0;
    let i_unit = Complex64::new(0.0, 1.0);
    for iteration in 1..=cfg.picard_max_iters {
        let forcing: Vec<SpectralField> = path
            .iter()
            .map(|u| {
                let phys = synthesize(u, grid)?;
                let g = analyze(&pointwise_power(&phys, cfg.q), grid, u.dim())?;
                Ok(g.scale(cfg.nonlinearity))
            })
            .collect::<Result<_>>()?;
        let mut integral = SpectralField::zeros(cfg.dim);
        let mut next = Vec::with_capacity(path.len());
        next.push(free[0].clone());
        for i in 0..steps {
            let mut acc = integral.clone();
            for (a, f) in acc.coeffs_mut().iter_mut().zip(forcing[i].coeffs()) {
                *a += f * (0.5 * h);
            }
            integral = linear_propagate(&acc, h);
            for (a, f) in integral.coeffs_mut().iter_mut().zip(forcing[i + 1].coeffs()) {
                *a += f * (0.5 * h);
            }
            let mut u = free[i + 1].clone();
            for (a, b) in u.coeffs_mut().iter_mut().zip(integral.coeffs()) {
                *a -= i_unit * b;
            }
            next.push(u);
        }
        let residual = path
            .iter()
            .zip(&next)
            .map(|(a, b)| sobolev_norm(&a.sub(b), cfg.picard_regularity))
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            return Err(Error::divergence(f64::NAN, "Picard iterate is not finite"));
        }
        if previous.is_finite() && previous > 0.0 {
            let ratio = residual / previous;
            contraction = contraction.max(ratio);
            if ratio > 1.0 && residual > cfg.picard_tolerance {
                return Err(Error::WindowTooLarge {
                    iteration,
                    previous,
                    current: residual,
                });
            }
        }
        path = next;
        if residual <= cfg.picard_tolerance {
            return Ok(PicardSolution {
                times,
                path,
                residual,
                iterations: iteration,
                contraction,
            });
        }
        previous = residual;
    }
    Err(Error::WindowTooLarge {
        iteration: cfg.picard_max_iters,
        previous,
        current: previous,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GalerkinRow {
    pub dim: usize,
    pub error: f64,
}

/// `‖φ_T^N Π^N u0 − φ_T^{N_ref} Π^{N_ref} u0‖_{H^σ}` for each `N`, with
/// `N_ref = 2·max(dims)`. Each dimension runs on its own dealiased grid.
pub fn galerkin_convergence(u0: &SpectralField, dims: &[usize], cfg: &FlowConfig, sigma: f64) -> Result<Vec<GalerkinRow>> {
    let n_max = *dims
        .iter()
        .max()
        .ok_or_else(|| Error::Domain("no dimensions given".into()))?;
    let reference_dim = 2 * n_max;
    let run = |dim: usize| -> Result<SpectralField> {
        let grid = RadialGrid::for_dim(dim, cfg.q)?;
        let start = project(&u0.resized(dim), dim);
        let c = FlowConfig { dim, ..cfg.clone() };
        evolve(&start, &c, &grid)
    };
    let reference = run(reference_dim)?;
    dims.iter()
        .map(|&dim| {
            let u = run(dim)?.resized(reference_dim);
            Ok(GalerkinRow {
                dim,
                error: sobolev_norm(&u.sub(&reference), sigma),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::energy;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn smooth_data(dim: usize, amp: f64) -> SpectralField {
        let mut u = SpectralField::zeros(dim);
        u.coeffs_mut()[0] = c(amp, 0.0);
        u.coeffs_mut()[1] = c(0.5 * amp, 0.0);
        u
    }

    #[test]
    fn zero_stays_zero() {
        let grid = RadialGrid::for_dim(16, 3.0).unwrap();
        let cfg = FlowConfig::new(16, 3.0, 1e-3, 0.1);
        let u = step_splitstep(&SpectralField::zeros(16), &cfg, &grid).unwrap();
        assert!(u.coeffs().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn free_flow_matches_linear_propagation() {
        let grid = RadialGrid::for_dim(16, 3.0).unwrap();
        let mut cfg = FlowConfig::new(16, 3.0, 1e-3, 0.1);
        cfg.nonlinearity = 0.0;
        let u = smooth_data(16, 1.0);
        let a = step_splitstep(&u, &cfg, &grid).unwrap();
        let b = linear_propagate(&u, cfg.dt);
        assert!(sobolev_norm(&a.sub(&b), 0.0) < 1e-13);
    }

    #[test]
    fn dimension_checked() {
        let grid = RadialGrid::for_dim(16, 3.0).unwrap();
        let cfg = FlowConfig::new(16, 3.0, 1e-3, 0.1);
        assert!(matches!(
            step_splitstep(&SpectralField::zeros(8), &cfg, &grid),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_horizon_returns_initial_state() {
        let grid = RadialGrid::for_dim(8, 3.0).unwrap();
        let cfg = FlowConfig::new(8, 3.0, 1e-3, 0.0);
        let u = smooth_data(8, 0.3);
        let traj = integrate(&u, &cfg, &grid, &ObservationPlan::conservation(1)).unwrap();
        assert_eq!(traj.final_state, u);
        assert_eq!(traj.times, vec![0.0]);
    }

    #[test]
    fn mass_drift_over_thousand_steps() {
        let dim = 64;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let cfg = FlowConfig::new(dim, 3.0, 1e-4, 0.1);
        let traj = integrate(&smooth_data(dim, 0.2), &cfg, &grid, &ObservationPlan::conservation(1)).unwrap();
        assert_eq!(traj.times.len(), 1001);
        assert!(traj.relative_drift("mass").unwrap() < 1e-6);
        let m = traj.column("mass").unwrap();
        let per_step = m.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).fold(0.0, f64::max);
        assert!(per_step < 1e-10, "{per_step}");
    }

    #[test]
    fn forward_then_backward_is_identity() {
        let dim = 32;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let cfg = FlowConfig::new(dim, 3.0, 1e-3, 0.2);
        let u0 = smooth_data(dim, 0.2);
        let fwd = evolve(&u0, &cfg, &grid).unwrap();
        let back = integrate_backward(&fwd, &cfg, &grid).unwrap();
        assert!(sobolev_norm(&back.sub(&u0), 0.0) < 1e-8 * sobolev_norm(&u0, 0.0));
    }

    #[test]
    fn flow_composes() {
        let dim = 16;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let u0 = smooth_data(dim, 0.2);
        let whole = evolve(&u0, &FlowConfig::new(dim, 3.0, 1e-3, 0.2), &grid).unwrap();
        let first = evolve(&u0, &FlowConfig::new(dim, 3.0, 1e-3, 0.08), &grid).unwrap();
        let second = evolve(&first, &FlowConfig::new(dim, 3.0, 1e-3, 0.12), &grid).unwrap();
        assert!(sobolev_norm(&whole.sub(&second), 0.0) < 1e-10);
    }

    #[test]
    fn picard_zero_data() {
        let grid = RadialGrid::for_dim(8, 3.0).unwrap();
        let cfg = FlowConfig::new(8, 3.0, 1e-3, 0.01);
        let sol = picard_solve(&SpectralField::zeros(8), &cfg, &grid).unwrap();
        assert!(sol.state().coeffs().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn picard_rejects_low_regularity_and_fractional_power() {
        let grid = RadialGrid::for_dim(8, 3.0).unwrap();
        let mut cfg = FlowConfig::new(8, 3.0, 1e-3, 0.01);
        cfg.picard_regularity = 1.4;
        assert!(picard_solve(&SpectralField::zeros(8), &cfg, &grid).is_err());
        let cfg = FlowConfig::new(8, 2.5, 1e-3, 0.01);
        assert!(picard_solve(&SpectralField::zeros(8), &cfg, &grid).is_err());
    }

    #[test]
    fn picard_reports_large_window() {
        let dim = 16;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let cfg = FlowConfig::new(dim, 3.0, 1e-3, 1.0);
        let big = smooth_data(dim, 2.0);
        assert!(matches!(picard_solve(&big, &cfg, &grid), Err(Error::WindowTooLarge { .. })));
    }

    #[test]
    fn energy_is_nearly_conserved() {
        let dim = 32;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let cfg = FlowConfig::new(dim, 3.0, 1e-4, 0.05);
        let u0 = smooth_data(dim, 0.2);
        let u = evolve(&u0, &cfg, &grid).unwrap();
        let e0 = energy(&u0, 3.0, &grid).unwrap();
        assert!((energy(&u, 3.0, &grid).unwrap() - e0).abs() < 1e-6 * e0);
    }

    #[test]
    fn strang_is_second_order() {
        let dim = 32;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let u0 = smooth_data(dim, 0.2);
        let run = |dt: f64| evolve(&u0, &FlowConfig::new(dim, 3.0, dt, 0.5), &grid).unwrap();
        let (a, b, c) = (run(1e-3), run(5e-4), run(2.5e-4));
        let ratio = sobolev_norm(&a.sub(&b), 0.0) / sobolev_norm(&b.sub(&c), 0.0);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn csv_has_declared_columns() {
        let grid = RadialGrid::for_dim(8, 3.0).unwrap();
        let cfg = FlowConfig::new(8, 3.0, 1e-3, 0.002);
        let plan = ObservationPlan {
            observables: vec![Observable::Mass, Observable::Energy, Observable::Sobolev(1.5)],
            every: 1,
        };
        let traj = integrate(&smooth_data(8, 0.2), &cfg, &grid, &plan).unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out, &[("config_hash".into(), "abc".into())]).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,mass,energy,h1.5,config_hash");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
    }
}
