//! Radial Dirichlet eigenbasis of the unit ball.
//!
//! A radial field is stored by its coefficients in the orthonormal basis
//! `e_n(r) = √2 sin(nπr) / r`, `n = 1..N`, with respect to the measure
//! `r² dr` on `(0, 1)`. Under the substitution `v = r·u` the basis becomes a
//! pure sine series, so point values on the uniform grid `r_j = j/(G+1)` are
//! a type-I discrete sine transform away from the coefficients. The origin and
//! the boundary are never sampled.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value of the `n`-th radial eigenfunction at radius `r`.
pub fn eigenfunction_value(n: usize, r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("eigenfunction index starts at 1".into()));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("radius {r} outside (0, 1]")));
    }
    if r == 1.0 {
        return Ok(0.0);
    }
    Ok(SQRT_2 * (n as f64 * PI * r).sin() / r)
}

/// Eigenvalue `z_n² = (πn)²` of `−Δ` for the `n`-th mode.
pub fn eigenvalue(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("eigenvalue index starts at 1".into()));
    }
    Ok(mode_eigenvalue(n))
}

#[inline]
pub(crate) fn mode_eigenvalue(n: usize) -> f64 {
    let z = PI * n as f64;
    z * z
}

/// Coefficients `(c_1, …, c_N)` of a radial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(dim: usize) -> Self {
        SpectralField {
            coeffs: vec![Complex64::new(0.0, 0.0); dim],
        }
    }

    /// Builds a field, rejecting non-finite entries.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Result<Self> {
        if let Some(k) = coeffs.iter().position(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Domain(format!("coefficient n = {} is not finite", k + 1)));
        }
        Ok(SpectralField { coeffs })
    }

    /// `amplitude · e_n` inside a space of dimension `dim`.
    pub fn mode(n: usize, dim: usize, amplitude: Complex64) -> Result<Self> {
        if n == 0 || n > dim {
            return Err(Error::Domain(format!("mode {n} outside 1..={dim}")));
        }
        let mut f = SpectralField::zeros(dim);
        f.coeffs[n - 1] = amplitude;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient slice; index `k` holds `c_{k+1}`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&self, factor: f64) -> SpectralField {
        SpectralField {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Zero-pads or truncates to `dim` modes.
    pub fn resized(&self, dim: usize) -> SpectralField {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(dim, Complex64::new(0.0, 0.0));
        SpectralField { coeffs }
    }

    /// Real inner product `Re Σ c_n · conj(d_n)`.
    pub fn real_inner(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let dim = self.dim().max(other.dim());
        let a = self.resized(dim);
        let b = other.resized(dim);
        SpectralField {
            coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect(),
        }
    }

    /// Applies a real diagonal multiplier `w(z_n²)` mode by mode.
    pub fn map_diagonal(&self, weight: impl Fn(f64) -> f64) -> SpectralField {
        SpectralField {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| c * weight(mode_eigenvalue(k + 1)))
                .collect(),
        }
    }
}

/// Point values `u(r_j)` on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub values: Vec<Complex64>,
}

impl PhysicalField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Uniform interior grid `r_j = j/(G+1)` with weights `r_j²/(G+1)` and the
/// sine-transform plan that diagonalizes the basis on it.
#[derive(Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for RadialGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialGrid")
            .field("resolution", &self.resolution())
            .finish()
    }
}

/// Largest orthonormality defect tolerated when a grid is built.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

impl RadialGrid {
    /// Grid with `resolution` interior nodes.
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::Domain("grid resolution must be positive".into()));
        }
        let h = 1.0 / (resolution + 1) as f64;
        let nodes: Vec<f64> = (1..=resolution).map(|j| j as f64 * h).collect();
        let weights = nodes.iter().map(|r| r * r * h).collect();
        let fft = FftPlanner::new().plan_fft_forward(2 * (resolution + 1));
        let grid = RadialGrid {
            nodes,
            weights,
            fft,
        };
        grid.self_check()?;
        Ok(grid)
    }

    /// Smallest transform-friendly grid that resolves `dim` modes with
    /// products of degree `2q + 1`.
    pub fn for_dim(dim: usize, q: f64) -> Result<Self> {
        RadialGrid::new(dealiased_resolution(dim, q))
    }

    pub fn resolution(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature of `∫₀¹ f(r) r² dr` from point values.
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    // Spot-checks orthonormality at the extremes of the representable band.
    fn self_check(&self) -> Result<()> {
        let g = self.resolution();
        let mut probe = vec![1, g];
        if g > 2 {
            probe.extend([2, g / 2, g - 1]);
        }
        for &m in &probe {
            for &n in &probe {
                let ip: f64 = self
                    .nodes
                    .iter()
                    .zip(&self.weights)
                    .map(|(&r, &w)| {
                        w * 2.0 * (m as f64 * PI * r).sin() * (n as f64 * PI * r).sin() / (r * r)
                    })
                    .sum();
                let target = if m == n { 1.0 } else { 0.0 };
                if (ip - target).abs() > ORTHONORMALITY_TOLERANCE {
                    return Err(Error::Domain(format!(
                        "grid of resolution {g} fails orthonormality at ({m}, {n}): {ip}"
                    )));
                }
            }
        }
        Ok(())
    }

    // Returns S_j = Σ_{n=1}^{G} x_n sin(π n j/(G+1)) for j = 1..G.
    fn sine_transform(&self, x: &[Complex64]) -> Vec<Complex64> {
        let g = self.resolution();
        let len = 2 * (g + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (k, &v) in x.iter().enumerate() {
            buf[k + 1] = v;
            buf[len - k - 1] = -v;
        }
        self.fft.process(&mut buf);
        // X_j = -2i S_j
        buf[1..=g].iter().map(|z| Complex64::new(-z.im, z.re) * 0.5).collect()
    }

    // Returns C_j = Σ_{n=1}^{G} x_n cos(π n j/(G+1)) for j = 1..G.
    fn cosine_transform(&self, x: &[Complex64]) -> Vec<Complex64> {
        let g = self.resolution();
        let len = 2 * (g + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (k, &v) in x.iter().enumerate() {
            buf[k + 1] = v;
            buf[len - k - 1] = v;
        }
        self.fft.process(&mut buf);
        buf[1..=g].iter().map(|z| z * 0.5).collect()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim > self.resolution() {
            return Err(Error::Aliasing {
                resolution: self.resolution(),
                required: dim,
            });
        }
        Ok(())
    }
}

/// Grid size for a field of `dim` modes carrying a `|u|^{2q}u` nonlinearity:
/// `(q+1)·dim` for integer `q`, `4·dim` otherwise, rounded up so that `G+1`
/// factors into 2, 3 and 5.
pub fn dealiased_resolution(dim: usize, q: f64) -> usize {
    let factor = if q >= 0.0 && q.fract() == 0.0 {
        (q as usize + 1).max(2)
    } else {
        4
    };
    smooth_at_least(factor * dim.max(1) + 1) - 1
}

fn smooth_at_least(n: usize) -> usize {
    (n..)
        .find(|&m| {
            let mut k = m;
            for p in [2, 3, 5] {
                while k % p == 0 {
                    k /= p;
                }
            }
            k == 1
        })
        .expect("smooth numbers are unbounded")
}

/// Point values `u(r_j) = Σ c_n e_n(r_j)`.
pub fn synthesize(field: &SpectralField, grid: &RadialGrid) -> Result<PhysicalField> {
    grid.check_dim(field.dim())?;
    let scaled: Vec<Complex64> = field.coeffs.iter().map(|c| c * SQRT_2).collect();
    let v = grid.sine_transform(&scaled);
    Ok(PhysicalField {
        values: v.into_iter().zip(&grid.nodes).map(|(v, r)| v / *r).collect(),
    })
}

/// Point values of the radial derivative `∂_r u(r_j)`.
pub fn synthesize_derivative(field: &SpectralField, grid: &RadialGrid) -> Result<PhysicalField> {
    grid.check_dim(field.dim())?;
    let scaled: Vec<Complex64> = field.coeffs.iter().map(|c| c * SQRT_2).collect();
    let v = grid.sine_transform(&scaled);
    let dscaled: Vec<Complex64> = scaled
        .iter()
        .enumerate()
        .map(|(k, c)| c * (PI * (k + 1) as f64))
        .collect();
    let dv = grid.cosine_transform(&dscaled);
    // u = v/r  =>  u' = v'/r - v/r²
    Ok(PhysicalField {
        values: grid
            .nodes
            .iter()
            .zip(v.iter().zip(&dv))
            .map(|(&r, (v, dv))| dv / r - v / (r * r))
            .collect(),
    })
}

/// Coefficients `c_n = Σ_j w_j u(r_j) e_n(r_j)` for `n = 1..dim`.
pub fn analyze(phys: &PhysicalField, grid: &RadialGrid, dim: usize) -> Result<SpectralField> {
    if phys.len() != grid.resolution() {
        return Err(Error::DimensionMismatch {
            expected: grid.resolution(),
            found: phys.len(),
        });
    }
    grid.check_dim(dim)?;
    let g1 = (grid.resolution() + 1) as f64;
    let v: Vec<Complex64> = phys
        .values
        .iter()
        .zip(&grid.nodes)
        .map(|(u, r)| u * *r)
        .collect();
    let s = grid.sine_transform(&v);
    let norm = SQRT_2 / g1;
    Ok(SpectralField {
        coeffs: s[..dim].iter().map(|c| c * norm).collect(),
    })
}

/// Galerkin projection onto the first `m` modes, keeping the dimension.
pub fn project(field: &SpectralField, m: usize) -> SpectralField {
    let mut out = field.clone();
    for c in out.coeffs.iter_mut().skip(m) {
        *c = Complex64::new(0.0, 0.0);
    }
    out
}

/// Which spectral weight a Sobolev norm uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SobolevWeight {
    /// `(nπ)^{2σ}`
    Homogeneous,
    /// `(1 + (nπ)²)^{σ}`
    Inhomogeneous,
}

impl SobolevWeight {
    #[inline]
    pub fn weight(self, eigenvalue: f64, sigma: f64) -> f64 {
        match self {
            SobolevWeight::Homogeneous => eigenvalue.powf(sigma),
            SobolevWeight::Inhomogeneous => (1.0 + eigenvalue).powf(sigma),
        }
    }
}

/// Homogeneous `H^σ` norm `(Σ (nπ)^{2σ} |c_n|²)^{1/2}`; `σ` may be negative.
pub fn sobolev_norm(field: &SpectralField, sigma: f64) -> f64 {
    sobolev_norm_with(field, sigma, SobolevWeight::Homogeneous)
}

pub fn sobolev_norm_with(field: &SpectralField, sigma: f64, weight: SobolevWeight) -> f64 {
    sobolev_norm_sq(field, sigma, weight).sqrt()
}

pub(crate) fn sobolev_norm_sq(field: &SpectralField, sigma: f64, weight: SobolevWeight) -> f64 {
    field
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| weight.weight(mode_eigenvalue(k + 1), sigma) * c.norm_sqr())
        .sum()
}

/// `(Σ_j w_j |u(r_j)|^p)^{1/p}` under the `r² dr` measure.
pub fn lp_norm(phys: &PhysicalField, grid: &RadialGrid, p: f64) -> Result<f64> {
    Ok(lp_norm_pow(phys, grid, p)?.powf(1.0 / p))
}

/// `‖u‖_{L^p}^p` by quadrature.
pub fn lp_norm_pow(phys: &PhysicalField, grid: &RadialGrid, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("L^p exponent {p} below 1")));
    }
    if phys.len() != grid.resolution() {
        return Err(Error::DimensionMismatch {
            expected: grid.resolution(),
            found: phys.len(),
        });
    }
    Ok(grid.integrate(phys.values.iter().map(|u| u.norm().powf(p))))
}

/// Free Schrödinger flow `c_n ↦ e^{−i t z_n²} c_n`.
pub fn linear_propagate(field: &SpectralField, t: f64) -> SpectralField {
    SpectralField {
        coeffs: field
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * Complex64::from_polar(1.0, -t * mode_eigenvalue(k + 1)))
            .collect(),
    }
}
