//! Numerical checks of the lattice-counting, eigenfunction, product-norm,
//! multilinear and radial Sobolev estimates.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{loglog_fit, LineFit};
use crate::spectral::{
    eigenfunction_value, linear_propagate, lp_norm, sobolev_norm, synthesize, synthesize_derivative,
    PhysicalField, RadialGrid, SpectralField,
};

fn isqrt(m: u64) -> u64 {
    let mut r = (m as f64).sqrt() as u64;
    while r * r > m {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= m {
        r += 1;
    }
    r
}

/// `#{(k₁, k₂) : k₁ ∈ [lo₁, hi₁], k₂ ∈ [lo₂, hi₂], k₁² + k₂² = m}`.
fn pair_count(k1: (u64, u64), k2: (u64, u64), m: u64) -> u64 {
    let mut count = 0;
    for a in k1.0..=k1.1 {
        let a2 = a * a;
        if a2 > m {
            break;
        }
        let b = isqrt(m - a2);
        if b * b + a2 == m && (k2.0..=k2.1).contains(&b) {
            count += 1;
        }
    }
    count
}

/// `#{(k₁, k₂) ∈ ℕ² : N ≤ k₁ ≤ 2N, k₁² + k₂² = M}` with `k₂ = 0` allowed.
pub fn count_pairs(n: u64, m: u64) -> u64 {
    pair_count((n, 2 * n), (0, u64::MAX), m)
}

/// Whether the first coordinate is confined to `[N, 2N]` or only to `[0, 2N]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountVariant {
    Band,
    Unconstrained,
}

/// `max_{M ≤ 8N²}` of the pair count, from one pass over all pairs.
pub fn max_pair_count(n: u64, variant: CountVariant, budget: u128) -> Result<u64> {
    let limit = 8 * n * n;
    if limit as u128 + 1 > budget {
        return Err(Error::Budget {
            requested: limit as u128 + 1,
            budget,
        });
    }
    let mut hist = vec![0u32; limit as usize + 1];
    let lo = match variant {
        CountVariant::Band => n,
        CountVariant::Unconstrained => 0,
    };
    for a in lo..=2 * n {
        let a2 = a * a;
        for b in 0..=isqrt(limit - a2) {
            hist[(a2 + b * b) as usize] += 1;
        }
    }
    Ok(hist.into_iter().max().unwrap_or(0) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingFit {
    pub ns: Vec<u64>,
    pub max_counts: Vec<u64>,
    pub slope: f64,
    pub slope_stderr: f64,
}

/// Least-squares slope of `log max_M count(N, M)` against `log N`.
pub fn counting_exponent(ns: &[u64], variant: CountVariant, budget: u128) -> Result<CountingFit> {
    if ns.len() < 5 {
        return Err(Error::Domain(format!("need a ladder of at least 5 points, got {}", ns.len())));
    }
    let max_counts = ns
        .iter()
        .map(|&n| max_pair_count(n, variant, budget))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = max_counts.iter().map(|&c| c as f64).collect();
    let f = loglog_fit(&x, &y)?;
    Ok(CountingFit {
        ns: ns.to_vec(),
        max_counts,
        slope: f.slope,
        slope_stderr: f.slope_stderr,
    })
}

/// `Λ_{N₁,…,N_m}(τ)`: tuples with `n_j ∈ [N_j, 2N_j]` and `Σ n_j² = τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountQuery {
    pub bands: Vec<u64>,
    pub tau: u64,
}

/// Default enumeration budget, in visited tuples.
pub const DEFAULT_BUDGET: u128 = 1 << 32;

/// Exact `#Λ(τ)` by nested loops over all but the last two bands, which are
/// resolved by the pair count.
pub fn lambda_count(query: &CountQuery, budget: u128) -> Result<u64> {
    let m = query.bands.len();
    if m < 2 {
        return Err(Error::Domain(format!("need at least two bands, got {m}")));
    }
    if query.bands.contains(&0) {
        return Err(Error::Domain("band scales must be positive".into()));
    }
    let requested: u128 = query.bands[..m - 1].iter().map(|&n| n as u128 + 1).product();
    if requested > budget {
        return Err(Error::Budget { requested, budget });
    }
    fn rec(bands: &[u64], tau: u64) -> u64 {
        if let [a, b] = bands {
            return pair_count((*a, 2 * a), (*b, 2 * b), tau);
        }
        let n = bands[0];
        (n..=2 * n)
            .take_while(|k| k * k <= tau)
            .map(|k| rec(&bands[1..], tau - k * k))
            .sum()
    }
    Ok(rec(&query.bands, query.tau))
}

/// `max_τ #Λ(τ)` via a histogram of `Σ n_j²` over all tuples.
pub fn lambda_max(bands: &[u64], budget: u128) -> Result<u64> {
    let requested: u128 = bands.iter().map(|&n| n as u128 + 1).product();
    if requested > budget {
        return Err(Error::Budget { requested, budget });
    }
    let top: u64 = bands.iter().map(|&n| 4 * n * n).sum();
    let mut hist = vec![0u32; top as usize + 1];
    fn rec(bands: &[u64], acc: u64, hist: &mut [u32]) {
        match bands.split_first() {
            None => hist[acc as usize] += 1,
            Some((&n, rest)) => {
                for k in n..=2 * n {
                    rec(rest, acc + k * k, hist);
                }
            }
        }
    }
    rec(bands, 0, &mut hist);
    Ok(hist.into_iter().max().unwrap_or(0) as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeTable {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub slope_stderr: f64,
    /// Coefficient of determination of the log-log fit.
    pub r2: f64,
}

fn slope_table(xs: Vec<f64>, values: Vec<f64>) -> Result<SlopeTable> {
    let LineFit {
        slope,
        intercept,
        slope_stderr,
    } = loglog_fit(&xs, &values)?;
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mean = ly.iter().sum::<f64>() / ly.len() as f64;
    let sst: f64 = ly.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = xs
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x.ln()).powi(2))
        .sum();
    Ok(SlopeTable {
        xs,
        values,
        slope,
        slope_stderr,
        r2: if sst > 0.0 { 1.0 - sse / sst } else { 1.0 },
    })
}

/// `e_n` sampled on the grid nodes.
fn eigenfunction_on(n: usize, grid: &RadialGrid) -> Result<PhysicalField> {
    let values = grid
        .nodes()
        .iter()
        .map(|&r| eigenfunction_value(n, r).map(|v| Complex64::new(v, 0.0)))
        .collect::<Result<_>>()?;
    Ok(PhysicalField { values })
}

fn require_resolution(grid: &RadialGrid, required: usize) -> Result<()> {
    if grid.resolution() + 1 < required {
        return Err(Error::Aliasing {
            resolution: grid.resolution(),
            required,
        });
    }
    Ok(())
}

/// Fit of `log ‖e_n‖_{L^p}` against `log n`.
pub fn eigenfunction_norm_slope(p: f64, ns: &[usize], grid: &RadialGrid) -> Result<SlopeTable> {
    let n_max = *ns.iter().max().ok_or_else(|| Error::Domain("empty ladder".into()))?;
    require_resolution(grid, (p.ceil() as usize).max(2) * n_max)?;
    let values = ns
        .iter()
        .map(|&n| lp_norm(&eigenfunction_on(n, grid)?, grid, p))
        .collect::<Result<Vec<_>>>()?;
    slope_table(ns.iter().map(|&n| n as f64).collect(), values)
}

/// `‖e_n^m‖²_{L²}` by quadrature.
pub fn product_norm(m: u32, n: usize, grid: &RadialGrid) -> Result<f64> {
    if m < 1 {
        return Err(Error::Domain("product of zero factors".into()));
    }
    require_resolution(grid, 2 * m as usize * n)?;
    let e = eigenfunction_on(n, grid)?;
    Ok(grid.integrate(e.values.iter().map(|v| v.re.abs().powi(2 * m as i32))))
}

/// Fit of `log ‖e_n^m‖²_{L²}` against `log n`; the prediction is `2m − 3`.
pub fn product_norm_exponent(m: u32, ns: &[usize], grid: &RadialGrid) -> Result<SlopeTable> {
    if m < 2 {
        return Err(Error::Domain(format!("m = {m} must be at least 2")));
    }
    let values = ns
        .iter()
        .map(|&n| product_norm(m, n, grid))
        .collect::<Result<Vec<_>>>()?;
    slope_table(ns.iter().map(|&n| n as f64).collect(), values)
}

/// A field supported on modes `[N, 2N]`, stored with dimension `2N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    pub scale: usize,
    pub field: SpectralField,
}

impl FrequencyBand {
    pub fn new(scale: usize, field: SpectralField) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Domain("band scale must be positive".into()));
        }
        let outside = field
            .coeffs()
            .iter()
            .enumerate()
            .any(|(k, c)| !(scale..=2 * scale).contains(&(k + 1)) && c.norm_sqr() > 0.0);
        if outside {
            return Err(Error::Domain(format!("coefficients outside [{scale}, {}]", 2 * scale)));
        }
        Ok(FrequencyBand {
            scale,
            field: field.resized(2 * scale),
        })
    }

    /// Independent complex Gaussians on `[N, 2N]`, normalized in `L²`.
    pub fn random<R: Rng + ?Sized>(scale: usize, rng: &mut R) -> Result<Self> {
        let mut field = SpectralField::zeros(2 * scale);
        for c in &mut field.coeffs_mut()[scale - 1..] {
            *c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let norm = sobolev_norm(&field, 0.0);
        FrequencyBand::new(scale, field.scale(1.0 / norm))
    }
}

/// Normalization `N₂^{1−1/(2m−2)} (N₃⋯N_m)^{3/2−1/(2m−2)}` for bands sorted
/// in decreasing scale.
pub fn multilinear_normalization(scales: &[usize]) -> f64 {
    let m = scales.len();
    let mut sorted = scales.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let e = 1.0 / (2.0 * m as f64 - 2.0);
    let mut norm = (sorted[1] as f64).powf(1.0 - e);
    for &n in &sorted[2..] {
        norm *= (n as f64).powf(1.5 - e);
    }
    norm
}

/// One full period of the free flow: every `e^{−i(nπ)²t}` is `2/π`-periodic.
pub const FREE_PERIOD: f64 = 2.0 / PI;

/// Number of time nodes used over one period for bands up to `2N_max`.
pub fn time_nodes(max_scale: usize) -> usize {
    4 * (2 * max_scale).pow(2)
}

/// `‖∏_j S(t)u_j‖_{L²_{t,x}} / normalization` with each `u_j` normalized in
/// `L²` first. With `derivative`, the first factor is `∂_r S(t)u₁` and the
/// extra `N₁` is divided out.
pub fn multilinear_ratio(bands: &[FrequencyBand], grid: &RadialGrid, derivative: bool) -> Result<f64> {
    let m = bands.len();
    if m < 2 {
        return Err(Error::Domain(format!("need at least two bands, got {m}")));
    }
    let max_scale = bands.iter().map(|b| b.scale).max().expect("nonempty");
    require_resolution(grid, (m + 1) * 2 * max_scale)?;
    let fields: Vec<SpectralField> = bands
        .iter()
        .map(|b| b.field.scale(1.0 / sobolev_norm(&b.field, 0.0)))
        .collect();
    let steps = time_nodes(max_scale);
    let h = FREE_PERIOD / steps as f64;
    let mut total = 0.0;
    // Periodic trapezoid: uniform nodes over one period, no endpoint weights.
    for k in 0..steps {
        let t = k as f64 * h;
        let mut product: Option<Vec<Complex64>> = None;
        for (j, f) in fields.iter().enumerate() {
            let evolved = linear_propagate(f, t);
            let phys = if derivative && j == 0 {
                synthesize_derivative(&evolved, grid)?
            } else {
                synthesize(&evolved, grid)?
            };
            product = Some(match product {
                None => phys.values,
                Some(mut p) => {
                    p.iter_mut().zip(&phys.values).for_each(|(a, b)| *a *= b);
                    p
                }
            });
        }
        let p = product.expect("at least two factors");
        total += grid.integrate(p.iter().map(|v| v.norm_sqr()));
    }
    let lhs = (total * h).sqrt();
    let scales: Vec<usize> = bands.iter().map(|b| b.scale).collect();
    let mut norm = multilinear_normalization(&scales);
    if derivative {
        norm *= bands[0].scale as f64;
    }
    Ok(lhs / norm)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultilinearRung {
    pub scale: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultilinearLadder {
    pub m: usize,
    pub derivative: bool,
    pub rungs: Vec<MultilinearRung>,
    /// Slope of `log max ratio` against `log N`.
    pub slope: f64,
}

/// Equal-scale `m`-linear ratios on a dyadic ladder, `draws` random bands per rung.
pub fn multilinear_ladder<R: Rng + ?Sized>(
    m: usize,
    scales: &[usize],
    draws: usize,
    derivative: bool,
    rng: &mut R,
) -> Result<MultilinearLadder> {
    let mut rungs = Vec::new();
    for &n in scales {
        let grid = RadialGrid::for_dim(2 * n, m as f64)?;
        let mut ratios = Vec::with_capacity(draws);
        for _ in 0..draws {
            let bands = (0..m)
                .map(|_| FrequencyBand::random(n, rng))
                .collect::<Result<Vec<_>>>()?;
            ratios.push(multilinear_ratio(&bands, &grid, derivative)?);
        }
        rungs.push(MultilinearRung {
            scale: n,
            max_ratio: ratios.iter().cloned().fold(0.0, f64::max),
            mean_ratio: ratios.iter().sum::<f64>() / draws.max(1) as f64,
        });
    }
    let x: Vec<f64> = rungs.iter().map(|r| r.scale as f64).collect();
    let y: Vec<f64> = rungs.iter().map(|r| r.max_ratio).collect();
    Ok(MultilinearLadder {
        m,
        derivative,
        slope: loglog_fit(&x, &y)?.slope,
        rungs,
    })
}

/// `max_j r_j|u(r_j)| / ‖u‖_{Ḣ¹}`.
pub fn radial_sobolev_quotient(u: &SpectralField, grid: &RadialGrid) -> Result<f64> {
    let phys = synthesize(u, grid)?;
    let sup = grid
        .nodes()
        .iter()
        .zip(&phys.values)
        .map(|(r, v)| r * v.norm())
        .fold(0.0, f64::max);
    Ok(sup / sobolev_norm(u, 1.0))
}

/// Largest radial Sobolev quotient over `samples` random fields with
/// coefficients `g_n n^{−decay}`, `g_n` complex Gaussian.
pub fn radial_sobolev_ratio<R: Rng + ?Sized>(
    samples: usize,
    dim: usize,
    decay: f64,
    grid: &RadialGrid,
    rng: &mut R,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let coeffs = (1..=dim)
            .map(|n| {
                let g = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                g * (n as f64).powf(-decay)
            })
            .collect();
        worst = worst.max(radial_sobolev_quotient(&SpectralField::from_coeffs(coeffs)?, grid)?);
    }
    Ok(worst)
}
