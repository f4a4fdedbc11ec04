//! Student-t model: parameters, weighted samples, density, negative
//! log-likelihood, gradients, the ν-derivative `F`, and sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::special::raw;

/// Degrees of freedom ν, location μ and scatter Σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentTParams {
    pub nu: f64,
    pub mu: Vec<f64>,
    pub sigma: SpdMatrix,
}

impl StudentTParams {
    pub fn new(nu: f64, mu: Vec<f64>, sigma: SpdMatrix) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Domain(format!("nu must be positive, got {nu}")));
        }
        if mu.len() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                got: mu.len(),
            });
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("location has non-finite components".into()));
        }
        Ok(StudentTParams { nu, mu, sigma })
    }

    /// T_ν(0, I)
    pub fn standard(nu: f64, dim: usize) -> Result<Self> {
        Self::new(nu, vec![0.0; dim], SpdMatrix::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Points `x_1..x_n` in R^d with weights from the open probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    dim: usize,
}

impl WeightedSample {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        let n = points.len();
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidSample("empty sample".into()));
        }
        if n < dim + 1 {
            return Err(Error::InvalidSample(format!(
                "need at least d+1 = {} points, got {n}",
                dim + 1
            )));
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: weights.len(),
            });
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!("point {i} is not finite")));
            }
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSample("weights must be strictly positive".into()));
        }
        let total: f64 = weights.iter().sum();
        let tol = 1e-12 + 4.0 * n as f64 * f64::EPSILON;
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidSample(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightedSample {
            points,
            weights,
            dim,
        })
    }

    /// Equal weights `1/n`.
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `max w_i < 1/d`, the weight half of the general-position assumption.
    pub fn weights_admissible(&self) -> bool {
        self.weights.iter().cloned().fold(0.0, f64::max) < 1.0 / self.dim as f64
    }

    /// Σ w_i x_i
    pub fn weighted_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (x, &w) in self.points.iter().zip(&self.weights) {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m
    }

    /// Σ w_i (x_i − c)(x_i − c)ᵀ
    pub fn weighted_scatter(&self, center: &[f64]) -> Matrix {
        let mut s = Matrix::zeros(self.dim);
        let mut r = vec![0.0; self.dim];
        for (x, &w) in self.points.iter().zip(&self.weights) {
            for k in 0..self.dim {
                r[k] = x[k] - center[k];
            }
            s.add_outer(w, &r);
        }
        s.symmetrized()
    }
}

/// Squared Mahalanobis distances δ_i and E-step weights γ_i = (ν+d)/(ν+δ_i).
#[derive(Debug, Clone, PartialEq)]
pub struct Mahalanobis {
    pub delta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Mahalanobis {
    pub fn compute(params: &StudentTParams, data: &WeightedSample) -> Result<Self> {
        let delta = deltas(params, data)?;
        let gamma = gammas(params.nu, &delta, data.dim());
        Ok(Mahalanobis { delta, gamma })
    }
}

pub fn deltas(params: &StudentTParams, data: &WeightedSample) -> Result<Vec<f64>> {
    if params.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: data.dim(),
        });
    }
    let d = data.dim();
    let mut r = vec![0.0; d];
    data.points()
        .iter()
        .map(|x| {
            for k in 0..d {
                r[k] = x[k] - params.mu[k];
            }
            params.sigma.quad_form(&r)
        })
        .collect()
}

pub fn gammas(nu: f64, deltas: &[f64], d: usize) -> Vec<f64> {
    let d = d as f64;
    deltas.iter().map(|&dl| (nu + d) / (nu + dl)).collect()
}

/// `g − ln g − 1` where `g = 1 + h`, accurate when `h` is tiny.
pub(crate) fn excess_term(h: f64) -> f64 {
    if h.abs() < 0.05 {
        // Σ_{k≥2} (−h)^k / k
        let mut s = 0.0;
        let mut p = h * h;
        for k in 2..24 {
            let term = p / k as f64;
            s += if k % 2 == 0 { term } else { -term };
            p *= h;
        }
        s
    } else {
        h - h.ln_1p()
    }
}

/// `Σ w_i (γ_i − ln γ_i − 1)` with `γ_i = (ν+d)/(ν+δ_i)`.
pub(crate) fn weighted_excess(nu: f64, deltas: &[f64], weights: &[f64], d: f64) -> f64 {
    deltas
        .iter()
        .zip(weights)
        .map(|(&dl, &w)| w * excess_term((d - dl) / (nu + dl)))
        .sum()
}

/// Density of T_ν(μ, Σ) at `x`.
pub fn pdf(params: &StudentTParams, x: &[f64]) -> Result<f64> {
    let d = params.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let r: Vec<f64> = x.iter().zip(&params.mu).map(|(a, b)| a - b).collect();
    let delta = params.sigma.quad_form(&r)?;
    let nu = params.nu;
    let df = d as f64;
    let log_norm = raw::log_gamma(0.5 * (df + nu))
        - raw::log_gamma(0.5 * nu)
        - 0.5 * df * (nu * std::f64::consts::PI).ln()
        - 0.5 * params.sigma.log_det();
    Ok((log_norm - 0.5 * (df + nu) * (delta / nu).ln_1p()).exp())
}

/// L(ν, μ, Σ) from precomputed δ_i and log|Σ|.
///
/// The Γ-terms are grouped as `−2[ln Γ((ν+d)/2) − ln Γ(ν/2) − (d/2) ln(ν/2)]
/// + d ln 2`, which stays accurate as ν grows and tends to the Gaussian
/// objective `d ln 2 + Σ w_i δ_i + ln|Σ|`.
pub fn neg_log_likelihood_from_deltas(nu: f64, deltas: &[f64], weights: &[f64], d: usize, log_det: f64) -> f64 {
    let df = d as f64;
    let gamma_part = -2.0 * raw::log_gamma_ratio(0.5 * nu, 0.5 * df) + df * std::f64::consts::LN_2;
    let data_part: f64 = deltas
        .iter()
        .zip(weights)
        .map(|(&dl, &w)| w * (dl / nu).ln_1p())
        .sum();
    gamma_part + (df + nu) * data_part + log_det
}

/// Weighted negative log-likelihood
/// `L = −2 ln Γ((d+ν)/2) + 2 ln Γ(ν/2) − ν ln ν + (d+ν) Σ w_i ln(ν+δ_i) + ln|Σ|`.
pub fn neg_log_likelihood(params: &StudentTParams, data: &WeightedSample) -> Result<f64> {
    let dl = deltas(params, data)?;
    Ok(neg_log_likelihood_from_deltas(
        params.nu,
        &dl,
        data.weights(),
        data.dim(),
        params.sigma.log_det(),
    ))
}

/// Analytic partial derivatives of L.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub d_mu: Vec<f64>,
    pub d_sigma: Matrix,
    pub d_nu: f64,
}

impl Gradient {
    pub fn max_abs(&self) -> f64 {
        self.d_mu
            .iter()
            .chain(self.d_sigma.as_slice())
            .map(|v| v.abs())
            .fold(self.d_nu.abs(), f64::max)
    }
}

pub fn grad(params: &StudentTParams, data: &WeightedSample) -> Result<Gradient> {
    let d = data.dim();
    if params.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: d,
        });
    }
    let nu = params.nu;
    let df = d as f64;
    let mut d_mu = vec![0.0; d];
    let mut outer = Matrix::zeros(d);
    let mut deltas = Vec::with_capacity(data.len());
    let mut r = vec![0.0; d];
    for (x, &w) in data.points().iter().zip(data.weights()) {
        for k in 0..d {
            r[k] = x[k] - params.mu[k];
        }
        let s = params.sigma.solve(&r);
        let delta: f64 = r.iter().zip(&s).map(|(a, b)| a * b).sum();
        deltas.push(delta);
        let c = w / (nu + delta);
        for k in 0..d {
            d_mu[k] += c * s[k];
        }
        outer.add_outer(c, &s);
    }
    for v in d_mu.iter_mut() {
        *v *= -2.0 * (df + nu);
    }
    let inv = params.sigma.inverse();
    let d_sigma = inv.sub(&outer.scaled(df + nu)).symmetrized();
    let d_nu = f_nu(nu, &deltas, data.weights(), d)?;
    Ok(Gradient {
        d_mu,
        d_sigma,
        d_nu,
    })
}

/// ∂L/∂ν = F(ν/2) = φ(ν/2) − φ((ν+d)/2) + Σ w_i (γ_i − ln γ_i − 1).
pub fn f_nu(nu: f64, deltas: &[f64], weights: &[f64], d: usize) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    if deltas.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: deltas.len(),
            got: weights.len(),
        });
    }
    Ok(f_nu_raw(nu, deltas, weights, d as f64))
}

pub(crate) fn f_nu_raw(nu: f64, deltas: &[f64], weights: &[f64], d: f64) -> f64 {
    raw::phi(0.5 * nu) - raw::phi(0.5 * (nu + d)) + weighted_excess(nu, deltas, weights, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FZeroClass {
    NoZero,
    HasZero,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FDiagnostic {
    pub classification: FZeroClass,
    /// `[d − √(2d), d + √(2d)]`
    pub interval: (f64, f64),
}

/// Sufficient conditions for (non-)existence of a zero of F, from where the
/// δ_i fall relative to the χ²_d one-sigma band.
pub fn classify_f_zero(deltas: &[f64], d: usize) -> FDiagnostic {
    let df = d as f64;
    let half_width = (2.0 * df).sqrt();
    let interval = (df - half_width, df + half_width);
    let inside = |x: f64| x >= interval.0 && x <= interval.1;
    let n_inside = deltas.iter().filter(|&&x| inside(x)).count();
    let classification = if !deltas.is_empty() && n_inside == deltas.len() {
        FZeroClass::NoZero
    } else if !deltas.is_empty() && n_inside == 0 {
        FZeroClass::HasZero
    } else {
        FZeroClass::Indeterminate
    };
    FDiagnostic {
        classification,
        interval,
    }
}

/// Draw `n` samples from T_ν(μ, Σ) via `μ + L Z / √Y`, `Z ~ N(0, I)`,
/// `Y ~ Γ(ν/2, rate ν/2)`, where `L` is the Cholesky factor of Σ.
pub fn sample_with_rng<R: Rng + ?Sized>(params: &StudentTParams, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = params.dim();
    let gamma = Gamma::new(0.5 * params.nu, 2.0 / params.nu).expect("nu > 0");
    let l = params.sigma.chol();
    let mut z = vec![0.0; d];
    (0..n)
        .map(|_| {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            let y: f64 = gamma.sample(rng);
            let scale = 1.0 / y.sqrt();
            (0..d)
                .map(|i| {
                    let lz: f64 = (0..=i).map(|k| l[(i, k)] * z[k]).sum();
                    params.mu[i] + lz * scale
                })
                .collect()
        })
        .collect()
}

/// Seeded variant of [`sample_with_rng`].
pub fn sample(params: &StudentTParams, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(params, n, &mut rng)
}
