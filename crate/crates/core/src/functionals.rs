//! Scalar functionals of the state and the damping operators.
//!
//! Every pairing between a spectral field and a pointwise nonlinearity goes
//! through the same quadrature, so `⟨u, 𝓛(u)⟩` reproduces the mass
//! dissipation rate to rounding: `Σ_n conj(c_n) (Π f)_n = Σ_j w_j f_j conj(u_j)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    analyze, sobolev_norm_sq, synthesize, synthesize_derivative, PhysicalField, RadialGrid,
    SobolevWeight, SpectralField,
};

/// Largest exponent evaluated before a state is declared divergent.
pub const EXP_OVERFLOW_LIMIT: f64 = 700.0;

/// Which damping operator the stochastic equation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `e^{ρ(‖u‖_{H^{β−}})}[(−Δ)^{β−1}u + Π|u|^{2q}u]`, `β ∈ [1, 3/2]`.
    Subcritical,
    /// `(1−Δ)^{β−1}u + 2e^{2‖Π|u|^{2q}u‖²}Π|u|^{2q}u + Π e^{|u|²}u`, `β ∈ (1, s_c]`.
    Supercritical,
}

/// Concave gauge `ξ` for the growth envelope; the damping weight is `ρ = 3ξ⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// `ξ(x) = √x`, giving `ρ(x) = 3x²`.
    Sqrt,
    /// `ξ(x) = ln(1+x)`, giving `ρ(x) = 3(eˣ − 1)`.
    Log1p,
    /// `ξ(x) = x`, giving `ρ(x) = 3x`.
    Identity,
}

impl Gauge {
    pub fn xi(self, x: f64) -> f64 {
        match self {
            Gauge::Sqrt => x.sqrt(),
            Gauge::Log1p => x.ln_1p(),
            Gauge::Identity => x,
        }
    }

    pub fn xi_inverse(self, y: f64) -> f64 {
        match self {
            Gauge::Sqrt => y * y,
            Gauge::Log1p => y.exp_m1(),
            Gauge::Identity => y,
        }
    }
}

/// The weight `ρ` in front of the subcritical damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rho {
    /// `ρ = 3ξ⁻¹`.
    Gauge(Gauge),
    /// A frozen value, independent of the state.
    Constant(f64),
}

impl Rho {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Rho::Gauge(g) => 3.0 * g.xi_inverse(x),
            Rho::Constant(c) => c,
        }
    }
}

impl Default for Rho {
    fn default() -> Self {
        Rho::Gauge(Gauge::Sqrt)
    }
}

/// Scaling-critical regularity `s_c = 3/2 − 1/q` in three dimensions.
pub fn critical_regularity(q: f64) -> f64 {
    1.5 - 1.0 / q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationSpec {
    pub variant: Variant,
    /// Nonlinearity power in `|u|^{2q}u`.
    pub q: f64,
    pub beta: f64,
    pub rho: Rho,
    /// `H^{β−}` is evaluated as `H^{β−δ}`.
    pub delta: f64,
}

impl DissipationSpec {
    pub fn subcritical(q: f64, beta: f64) -> Self {
        DissipationSpec {
            variant: Variant::Subcritical,
            q,
            beta,
            rho: Rho::default(),
            delta: 0.01,
        }
    }

    pub fn supercritical(q: f64, beta: f64) -> Self {
        DissipationSpec {
            variant: Variant::Supercritical,
            ..DissipationSpec::subcritical(q, beta)
        }
    }

    pub fn with_rho(mut self, rho: Rho) -> Self {
        self.rho = rho;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::Domain(format!("q = {} must be positive", self.q)));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Domain(format!("delta = {} must be positive", self.delta)));
        }
        match self.variant {
            Variant::Subcritical => {
                if !(1.0..=1.5).contains(&self.beta) {
                    return Err(Error::Domain(format!(
                        "subcritical damping requires beta in [1, 3/2], got {}",
                        self.beta
                    )));
                }
            }
            Variant::Supercritical => {
                if !(self.q > 2.0) {
                    return Err(Error::Domain(format!(
                        "supercritical damping requires q > 2, got {}",
                        self.q
                    )));
                }
                let sc = critical_regularity(self.q);
                if !(self.beta > 1.0 && self.beta <= sc) {
                    return Err(Error::Domain(format!(
                        "supercritical damping requires beta in (1, {sc}], got {}",
                        self.beta
                    )));
                }
            }
        }
        if let Rho::Constant(c) = self.rho {
            if !(c >= 0.0) {
                return Err(Error::Domain(format!("constant rho {c} must be nonnegative")));
            }
        }
        Ok(())
    }

    /// `H^{β−δ}` norm entering `ρ`.
    pub fn beta_minus_norm(&self, u: &SpectralField) -> f64 {
        sobolev_norm_sq(u, self.beta - self.delta, SobolevWeight::Homogeneous).sqrt()
    }

    /// `e^{ρ(‖u‖_{H^{β−δ}})}`, or an overflow error.
    pub fn rho_factor(&self, u: &SpectralField) -> Result<f64> {
        let exponent = self.rho.eval(self.beta_minus_norm(u));
        if !(exponent <= EXP_OVERFLOW_LIMIT) {
            return Err(Error::divergence(
                f64::NAN,
                format!("damping weight exponent {exponent:e} overflows"),
            ));
        }
        Ok(exponent.exp())
    }

    fn linear_weight(&self) -> SobolevWeight {
        match self.variant {
            Variant::Subcritical => SobolevWeight::Homogeneous,
            Variant::Supercritical => SobolevWeight::Inhomogeneous,
        }
    }
}

/// Smooth cutoff `χ_R(x) = χ(x/R)` with `χ = 1` on `[0, 1]`, `0` on `[2, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub radius: f64,
}

/// Bound on `|χ′|` for the transition profile below; `|χ_R′| ≤ C/R`.
pub const CUTOFF_SLOPE_BOUND: f64 = 2.0;

pub fn cutoff(x: f64, spec: CutoffSpec) -> f64 {
    let s = x / spec.radius;
    if s <= 1.0 {
        return 1.0;
    }
    if s >= 2.0 {
        return 0.0;
    }
    // C^∞ transition built from f(t) = e^{-1/t}.
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = f(2.0 - s);
    let b = f(s - 1.0);
    a / (a + b)
}

/// `M(u) = Σ |c_n|²`.
pub fn mass(u: &SpectralField) -> f64 {
    u.coeffs().iter().map(|c| c.norm_sqr()).sum()
}

/// `|u|^{2q} u` pointwise, with `|u| = 0` mapped to `0`.
pub fn pointwise_power(phys: &PhysicalField, q: f64) -> PhysicalField {
    PhysicalField {
        values: phys
            .values
            .iter()
            .map(|u| {
                let m2 = u.norm_sqr();
                if m2 == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    u * m2.powf(q)
                }
            })
            .collect(),
    }
}

/// `Π^N(|u|^{2q}u)`.
pub fn projected_nonlinearity(u: &SpectralField, q: f64, grid: &RadialGrid) -> Result<SpectralField> {
    let phys = synthesize(u, grid)?;
    analyze(&pointwise_power(&phys, q), grid, u.dim())
}

/// `E(u) = ½ Σ z_n²|c_n|² + ‖u‖^{2q+2}_{L^{2q+2}}/(2q+2)`.
pub fn energy(u: &SpectralField, q: f64, grid: &RadialGrid) -> Result<f64> {
    let phys = synthesize(u, grid)?;
    Ok(energy_from_parts(u, &phys, q, grid))
}

pub(crate) fn energy_from_parts(u: &SpectralField, phys: &PhysicalField, q: f64, grid: &RadialGrid) -> f64 {
    let kinetic = 0.5 * sobolev_norm_sq(u, 1.0, SobolevWeight::Homogeneous);
    let p = 2.0 * q + 2.0;
    let potential = grid.integrate(phys.values.iter().map(|v| v.norm_sqr().powf(q + 1.0)));
    kinetic + potential / p
}

// Shared pointwise data for one state.
struct Evaluation {
    phys: PhysicalField,
    /// Σ w |u|^{2q+2}
    power_integral: f64,
    /// Π(|u|^{2q}u)
    nonlin: SpectralField,
}

impl Evaluation {
    fn new(u: &SpectralField, q: f64, grid: &RadialGrid) -> Result<Self> {
        let phys = synthesize(u, grid)?;
        let power_integral = grid.integrate(phys.values.iter().map(|v| v.norm_sqr().powf(q + 1.0)));
        let nonlin = analyze(&pointwise_power(&phys, q), grid, u.dim())?;
        Ok(Evaluation {
            phys,
            power_integral,
            nonlin,
        })
    }

    fn check_exponential(&self) -> Result<()> {
        let worst = self.phys.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        if !(worst <= EXP_OVERFLOW_LIMIT) {
            return Err(Error::divergence(
                f64::NAN,
                format!("|u|² = {worst:e} at a node overflows e^(|u|²)"),
            ));
        }
        Ok(())
    }

    /// Π(e^{|u|²}u)
    fn exponential_term(&self, grid: &RadialGrid, dim: usize) -> Result<SpectralField> {
        self.check_exponential()?;
        let values = self.phys.values.iter().map(|v| v * v.norm_sqr().exp()).collect();
        analyze(&PhysicalField { values }, grid, dim)
    }

    /// ∫ |u|² e^{|u|²}
    fn exponential_moment(&self, grid: &RadialGrid) -> Result<f64> {
        self.check_exponential()?;
        Ok(grid.integrate(self.phys.values.iter().map(|v| {
            let m = v.norm_sqr();
            m * m.exp()
        })))
    }

    fn nonlin_weight(&self) -> Result<f64> {
        let exponent = 2.0 * crate::functionals::mass(&self.nonlin);
        if !(exponent <= EXP_OVERFLOW_LIMIT) {
            return Err(Error::divergence(
                f64::NAN,
                format!("e^(2‖Π|u|^(2q)u‖²) exponent {exponent:e} overflows"),
            ));
        }
        Ok(2.0 * exponent.exp())
    }
}

/// `𝓛(u)` as a spectral field.
pub fn dissipation_operator(u: &SpectralField, spec: &DissipationSpec, grid: &RadialGrid) -> Result<SpectralField> {
    let ev = Evaluation::new(u, spec.q, grid)?;
    dissipation_from(u, spec, grid, &ev)
}

fn dissipation_from(
    u: &SpectralField,
    spec: &DissipationSpec,
    grid: &RadialGrid,
    ev: &Evaluation,
) -> Result<SpectralField> {
    let weight = spec.linear_weight();
    let power = spec.beta - 1.0;
    let linear = u.map_diagonal(|z2| weight.weight(z2, power));
    match spec.variant {
        Variant::Subcritical => {
            let factor = spec.rho_factor(u)?;
            let coeffs = linear
                .coeffs()
                .iter()
                .zip(ev.nonlin.coeffs())
                .map(|(a, b)| (a + b) * factor)
                .collect();
            SpectralField::from_coeffs(coeffs)
        }
        Variant::Supercritical => {
            let k = ev.nonlin_weight()?;
            let expo = ev.exponential_term(grid, u.dim())?;
            let coeffs = linear
                .coeffs()
                .iter()
                .zip(ev.nonlin.coeffs())
                .zip(expo.coeffs())
                .map(|((a, b), c)| a + b * k + c)
                .collect();
            SpectralField::from_coeffs(coeffs)
        }
    }
}

/// Mass dissipation rate `𝓜(u) = ⟨u, 𝓛(u)⟩`, assembled in closed form.
pub fn mass_dissipation_rate(u: &SpectralField, spec: &DissipationSpec, grid: &RadialGrid) -> Result<f64> {
    let ev = Evaluation::new(u, spec.q, grid)?;
    mass_rate_from(u, spec, grid, &ev)
}

fn mass_rate_from(u: &SpectralField, spec: &DissipationSpec, grid: &RadialGrid, ev: &Evaluation) -> Result<f64> {
    let quadratic = sobolev_norm_sq(u, spec.beta - 1.0, spec.linear_weight());
    match spec.variant {
        Variant::Subcritical => Ok(spec.rho_factor(u)? * (quadratic + ev.power_integral)),
        Variant::Supercritical => {
            Ok(quadratic + ev.nonlin_weight()? * ev.power_integral + ev.exponential_moment(grid)?)
        }
    }
}

/// Energy dissipation rate `𝓔(u) = E′(u, 𝓛(u))`.
pub fn energy_dissipation_rate(u: &SpectralField, spec: &DissipationSpec, grid: &RadialGrid) -> Result<f64> {
    let ev = Evaluation::new(u, spec.q, grid)?;
    let neg_lap = u.map_diagonal(|z2| z2);
    let g = &ev.nonlin;
    let weight = spec.linear_weight();
    let power = spec.beta - 1.0;
    let damp_lin = u.map_diagonal(|z2| weight.weight(z2, power));
    // ⟨−Δu, A u⟩ + ⟨Π|u|^{2q}u, −Δu⟩ + ‖Π|u|^{2q}u‖² + ⟨A u, Π|u|^{2q}u⟩
    let h_beta = neg_lap.real_inner(&damp_lin);
    let cross = g.real_inner(&neg_lap);
    let g_sq = mass(g);
    let mixed = damp_lin.real_inner(g);
    match spec.variant {
        Variant::Subcritical => Ok(spec.rho_factor(u)? * (h_beta + cross + g_sq + mixed)),
        Variant::Supercritical => {
            let k = ev.nonlin_weight()?;
            let expo = ev.exponential_term(grid, u.dim())?;
            Ok(h_beta + mixed + k * (cross + g_sq) + expo.real_inner(&neg_lap) + expo.real_inner(g))
        }
    }
}

/// The pointwise lower bound on `𝓔(u)` obtained by integrating by parts and
/// absorbing the cross terms.
///
/// Subcritical: `e^ρ(½‖u‖²_{H^β} + ½‖g‖² + ⟨|∇u|², |u|^{2q}⟩)`.
/// Supercritical: `½[‖u‖²_β + 3K⟨|∇u|²,|u|^{2q}⟩ + K‖g‖² + ∫|∇u|² e^{|u|²}]`
/// with `K = e^{2‖g‖²}` and `‖u‖²_β = ⟨−Δu, (1−Δ)^{β−1}u⟩`.
pub fn energy_rate_lower_bound(u: &SpectralField, spec: &DissipationSpec, grid: &RadialGrid) -> Result<f64> {
    let ev = Evaluation::new(u, spec.q, grid)?;
    let du = synthesize_derivative(u, grid)?;
    let grad_weighted = grid.integrate(
        du.values
            .iter()
            .zip(&ev.phys.values)
            .map(|(d, v)| d.norm_sqr() * v.norm_sqr().powf(spec.q)),
    );
    let g_sq = mass(&ev.nonlin);
    match spec.variant {
        Variant::Subcritical => {
            let h_beta = sobolev_norm_sq(u, spec.beta, SobolevWeight::Homogeneous);
            Ok(spec.rho_factor(u)? * (0.5 * h_beta + 0.5 * g_sq + grad_weighted))
        }
        Variant::Supercritical => {
            ev.check_exponential()?;
            let h_beta: f64 = u
                .map_diagonal(|z2| z2 * (1.0 + z2).powf(spec.beta - 1.0))
                .real_inner(u);
            let k = 0.5 * ev.nonlin_weight()?;
            let grad_exp = grid.integrate(
                du.values
                    .iter()
                    .zip(&ev.phys.values)
                    .map(|(d, v)| d.norm_sqr() * v.norm_sqr().exp()),
            );
            Ok(0.5 * (h_beta + 3.0 * k * grad_weighted + k * g_sq + grad_exp))
        }
    }
}

/// Partial sums `Σ_{p=0}^{P} ‖u‖^{2p+2}_{L^{2p+2}} / p!` of the supercritical
/// series, one entry per `P`.
pub fn exponential_series_partial_sums(u: &SpectralField, grid: &RadialGrid, terms: usize) -> Result<Vec<f64>> {
    let phys = synthesize(u, grid)?;
    let mut sums = Vec::with_capacity(terms);
    let mut acc = 0.0;
    let mut factorial = 1.0;
    for p in 0..terms {
        if p > 0 {
            factorial *= p as f64;
        }
        let moment = grid.integrate(phys.values.iter().map(|v| v.norm_sqr().powi(p as i32 + 1)));
        acc += moment / factorial;
        sums.push(acc);
    }
    Ok(sums)
}

/// `∫ |u|² e^{|u|²}`, the closed form of the supercritical series.
pub fn exponential_moment(u: &SpectralField, grid: &RadialGrid) -> Result<f64> {
    let phys = synthesize(u, grid)?;
    let ev = Evaluation {
        phys,
        power_integral: 0.0,
        nonlin: SpectralField::zeros(0),
    };
    ev.exponential_moment(grid)
}

/// Number of series terms after which the tail is below `tol` relative to
/// the closed form. Uses `‖u‖_∞` to bound the remainder.
pub fn series_terms_for(u: &SpectralField, grid: &RadialGrid, tol: f64) -> Result<usize> {
    let phys = synthesize(u, grid)?;
    let sup = phys.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    // remainder after P terms ≤ ‖u‖² · sup^{P} e^{sup} / P!
    let mut p = 1usize;
    let mut bound = sup.exp();
    loop {
        bound *= sup / p as f64;
        if bound < tol || p > 10_000 {
            return Ok(p + 1);
        }
        p += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lp_norm, sobolev_norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, SQRT_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Random band-limited field with coefficients decaying like n^{-decay}
    /// and L² norm `scale`.
    fn random_field(dim: usize, decay: f64, scale: f64, rng: &mut impl Rng) -> SpectralField {
        let raw: Vec<Complex64> = (1..=dim)
            .map(|n| {
                let a = (n as f64).powf(-decay);
                c(rng.random_range(-1.0..1.0) * a, rng.random_range(-1.0..1.0) * a)
            })
            .collect();
        let f = SpectralField::from_coeffs(raw).unwrap();
        let norm = sobolev_norm(&f, 0.0);
        f.scale(scale / norm)
    }

    #[test]
    fn mass_values() {
        assert_eq!(mass(&SpectralField::mode(1, 3, c(1.0, 0.0)).unwrap()), 1.0);
        assert_eq!(mass(&SpectralField::zeros(5)), 0.0);
        let u = SpectralField::from_coeffs(vec![c(2.0, 0.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(mass(&u), 5.0);
    }

    #[test]
    fn mass_scales_quadratically() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(10, 1.0, 1.0, &mut rng);
        // λ a power of two keeps the scaling exact in binary floating point.
        let lambda = 4.0;
        assert_eq!(mass(&u.scale(lambda)), lambda * lambda * mass(&u));
    }

    #[test]
    fn energy_values() {
        let grid = RadialGrid::new(4095).unwrap();
        assert_eq!(energy(&SpectralField::zeros(4), 1.0, &grid).unwrap(), 0.0);
        // ½π² + ¼∫4 sin⁴(πr)/r² dr, the integral frozen from an independent
        // 30-digit adaptive quadrature.
        let e1 = SpectralField::mode(1, 4, c(1.0, 0.0)).unwrap();
        let expected = 7.046_175_401_665_890;
        assert!((energy(&e1, 1.0, &grid).unwrap() - expected).abs() < 1e-9);
        let eps = 1e-5;
        let small = e1.scale(eps);
        let ratio = energy(&small, 3.0, &grid).unwrap() / (0.5 * PI * PI * eps * eps);
        assert!((ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_rates_vanish() {
        let grid = RadialGrid::new(63).unwrap();
        let zero = SpectralField::zeros(8);
        for spec in [
            DissipationSpec::subcritical(3.0, 1.2),
            DissipationSpec::supercritical(3.0, 1.1),
            DissipationSpec::subcritical(3.0, 1.2).with_rho(Rho::Constant(0.5)),
        ] {
            assert_eq!(mass_dissipation_rate(&zero, &spec, &grid).unwrap(), 0.0);
            assert_eq!(energy_dissipation_rate(&zero, &spec, &grid).unwrap(), 0.0);
            assert!(dissipation_operator(&zero, &spec, &grid)
                .unwrap()
                .coeffs()
                .iter()
                .all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn linear_regime_of_subcritical_operator() {
        let beta = 1.2;
        let spec = DissipationSpec::subcritical(3.0, beta);
        let grid = RadialGrid::new(63).unwrap();
        let amp = 1e-6;
        let u = SpectralField::mode(1, 8, c(amp, 0.0)).unwrap();
        let l = dissipation_operator(&u, &spec, &grid).unwrap();
        let rho = 3.0 * (PI.powf(beta - spec.delta) * amp).powi(2);
        let expected = rho.exp() * PI.powf(2.0 * (beta - 1.0)) * amp;
        assert!((l.coeffs()[0].re - expected).abs() < 1e-8 * expected);
        assert!(l.coeffs()[1..].iter().all(|z| z.norm() < 1e-8 * expected));
    }

    #[test]
    fn pairing_identity_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let dim = 16;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let specs = [
            DissipationSpec::subcritical(3.0, 1.2),
            DissipationSpec::subcritical(1.0, 1.5),
            DissipationSpec::supercritical(3.0, 1.15),
        ];
        for _ in 0..1000 {
            let scale = rng.random_range(0.01..0.12);
            let u = random_field(dim, 2.0, scale, &mut rng);
            for spec in &specs {
                let l = dissipation_operator(&u, spec, &grid).unwrap();
                let pairing = u.real_inner(&l);
                let m = mass_dissipation_rate(&u, spec, &grid).unwrap();
                assert!(m >= 0.0);
                assert!((pairing - m).abs() <= 1e-8 * m, "{pairing} vs {m}");
            }
        }
    }

    #[test]
    fn energy_rate_matches_pairing_with_gradient_of_energy() {
        // 𝓔(u) = ⟨−Δu + Π|u|^{2q}u, 𝓛(u)⟩; checked by a centred difference of E
        // along 𝓛(u).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dim = 12;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        for spec in [DissipationSpec::subcritical(3.0, 1.3), DissipationSpec::supercritical(3.0, 1.1)] {
            let u = random_field(dim, 2.0, 0.2, &mut rng);
            let l = dissipation_operator(&u, &spec, &grid).unwrap();
            let h = 1e-5 * sobolev_norm(&u, 0.0) / sobolev_norm(&l, 0.0);
            let plus = SpectralField::from_coeffs(
                u.coeffs().iter().zip(l.coeffs()).map(|(a, b)| a + b * h).collect(),
            )
            .unwrap();
            let minus = SpectralField::from_coeffs(
                u.coeffs().iter().zip(l.coeffs()).map(|(a, b)| a - b * h).collect(),
            )
            .unwrap();
            let fd = (energy(&plus, spec.q, &grid).unwrap() - energy(&minus, spec.q, &grid).unwrap()) / (2.0 * h);
            let rate = energy_dissipation_rate(&u, &spec, &grid).unwrap();
            assert!((fd - rate).abs() < 1e-6 * rate.abs(), "{fd} vs {rate}");
        }
    }

    #[test]
    fn subcritical_lower_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let dim = 16;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let spec = DissipationSpec::subcritical(3.0, 1.2);
        for _ in 0..1000 {
            let u = random_field(dim, rng.random_range(1.5..3.0), rng.random_range(0.02..0.3), &mut rng);
            let e = energy_dissipation_rate(&u, &spec, &grid).unwrap();
            let lb = energy_rate_lower_bound(&u, &spec, &grid).unwrap();
            assert!(e >= lb * (1.0 - 1e-9), "{e} < {lb}");
        }
    }

    #[test]
    fn supercritical_lower_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let dim = 16;
        let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
        let spec = DissipationSpec::supercritical(3.0, 1.15);
        for _ in 0..1000 {
            let u = random_field(dim, rng.random_range(1.5..3.0), rng.random_range(0.01..0.12), &mut rng);
            let e = energy_dissipation_rate(&u, &spec, &grid).unwrap();
            let lb = energy_rate_lower_bound(&u, &spec, &grid).unwrap();
            assert!(e >= lb * (1.0 - 1e-9), "{e} < {lb}");
        }
    }

    #[test]
    fn mass_rate_bounded_by_energy_rate() {
        // 𝓜 ≲ 𝓔 with a constant that does not drift with the dimension.
        let spec = DissipationSpec::subcritical(3.0, 1.2);
        let mut worst = Vec::new();
        for dim in [16usize, 32] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let grid = RadialGrid::for_dim(dim, 3.0).unwrap();
            let mut c_max: f64 = 0.0;
            for _ in 0..1000 {
                let u = random_field(dim, rng.random_range(1.5..3.0), rng.random_range(0.02..0.3), &mut rng);
                let m = mass_dissipation_rate(&u, &spec, &grid).unwrap();
                let e = energy_dissipation_rate(&u, &spec, &grid).unwrap();
                c_max = c_max.max(m / e);
            }
            worst.push(c_max);
        }
        assert!(worst.iter().all(|&c| c.is_finite() && c > 0.0 && c < 1.0));
        assert!((worst[0] / worst[1] - 1.0).abs() < 0.25, "{worst:?}");
    }

    #[test]
    fn supercritical_mass_rate_against_refined_quadrature() {
        // Each term re-derived with composite Simpson on the closed form of
        // e_1, independent of the transform route.
        let eps = 0.3;
        let (q, beta) = (3.0, 1.1);
        let dim = 8;
        let spec = DissipationSpec::supercritical(q, beta);
        let grid = RadialGrid::for_dim(dim, q).unwrap();
        let u = SpectralField::mode(1, dim, c(eps, 0.0)).unwrap();
        let got = mass_dissipation_rate(&u, &spec, &grid).unwrap();

        let panels = 200_000;
        let h = 1.0 / panels as f64;
        let simpson = |f: &dyn Fn(f64) -> f64| -> f64 {
            (1..panels)
                .map(|j| {
                    let r = j as f64 * h;
                    (if j % 2 == 1 { 4.0 } else { 2.0 }) * f(r)
                })
                .sum::<f64>()
                * h
                / 3.0
        };
        let uval = |r: f64| eps * SQRT_2 * (PI * r).sin() / r;
        let en = |n: usize, r: f64| SQRT_2 * (n as f64 * PI * r).sin() / r;
        let power = simpson(&|r| uval(r).abs().powf(2.0 * q + 2.0) * r * r);
        let g_sq: f64 = (1..=dim)
            .map(|n| simpson(&|r| uval(r).abs().powf(2.0 * q) * uval(r) * en(n, r) * r * r).powi(2))
            .sum();
        let expo = simpson(&|r| uval(r).powi(2) * uval(r).powi(2).exp() * r * r);
        let expected = (1.0 + PI * PI).powf(beta - 1.0) * eps * eps + 2.0 * (2.0 * g_sq).exp() * power + expo;
        assert!((got - expected).abs() < 1e-8 * expected, "{got} vs {expected}");
    }

    #[test]
    fn exponential_series_converges_from_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = RadialGrid::for_dim(12, 3.0).unwrap();
        let u = random_field(12, 1.5, 0.5, &mut rng);
        let closed = exponential_moment(&u, &grid).unwrap();
        let terms = series_terms_for(&u, &grid, 1e-12).unwrap();
        let sums = exponential_series_partial_sums(&u, &grid, terms).unwrap();
        assert!(sums.windows(2).all(|w| w[1] >= w[0]));
        assert!(sums.iter().all(|&s| s <= closed * (1.0 + 1e-15)));
        assert!((closed - sums.last().unwrap()).abs() < 1e-10 * closed);
        // the first term is the L² mass
        let phys = synthesize(&u, &grid).unwrap();
        assert!((sums[0] - lp_norm(&phys, &grid, 2.0).unwrap().powi(2)).abs() < 1e-13);
    }

    #[test]
    fn overflow_is_reported_as_divergence() {
        let grid = RadialGrid::for_dim(4, 3.0).unwrap();
        let big = SpectralField::mode(1, 4, c(20.0, 0.0)).unwrap();
        let spec = DissipationSpec::supercritical(3.0, 1.1);
        assert!(matches!(
            mass_dissipation_rate(&big, &spec, &grid),
            Err(Error::Divergence { .. })
        ));
        let sub = DissipationSpec::subcritical(3.0, 1.2);
        assert!(matches!(
            dissipation_operator(&big, &sub, &grid),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn validation_rules() {
        assert!(DissipationSpec::subcritical(3.0, 1.2).validate().is_ok());
        assert!(DissipationSpec::subcritical(3.0, 2.0).validate().is_err());
        assert!(DissipationSpec::subcritical(3.0, 0.9).validate().is_err());
        assert!(DissipationSpec::supercritical(1.5, 1.1).validate().is_err());
        // s_c = 3/2 − 1/3 = 7/6
        assert!(DissipationSpec::supercritical(3.0, 7.0 / 6.0).validate().is_ok());
        assert!(DissipationSpec::supercritical(3.0, 1.2).validate().is_err());
        assert!(DissipationSpec::supercritical(3.0, 1.0).validate().is_err());
    }

    #[test]
    fn gauges_invert() {
        for g in [Gauge::Sqrt, Gauge::Log1p, Gauge::Identity] {
            for x in [0.0, 0.3, 2.0, 7.5] {
                assert!((g.xi_inverse(g.xi(x)) - x).abs() < 1e-12 * (1.0 + x));
            }
        }
        assert_eq!(Rho::default().eval(2.0), 12.0);
    }

    #[test]
    fn cutoff_profile() {
        let spec = CutoffSpec { radius: 3.0 };
        assert_eq!(cutoff(1.5, spec), 1.0);
        assert_eq!(cutoff(3.0, spec), 1.0);
        assert_eq!(cutoff(9.0, spec), 0.0);
        assert_eq!(cutoff(6.0, spec), 0.0);
        let xs: Vec<f64> = (0..=1000).map(|k| 3.0 + 3.0 * k as f64 / 1000.0).collect();
        let vals: Vec<f64> = xs.iter().map(|&x| cutoff(x, spec)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        let max_slope = xs
            .windows(2)
            .zip(vals.windows(2))
            .map(|(x, v)| (v[0] - v[1]) / (x[1] - x[0]))
            .fold(0.0, f64::max);
        assert!(max_slope <= CUTOFF_SLOPE_BOUND / spec.radius);
    }
}
