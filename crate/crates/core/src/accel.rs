//! SQUAREM and DAAREM acceleration of the fixed-point estimators.
//!
//! Extrapolation happens in the chart `(ln ν, μ, log-Cholesky of Σ)`, so every
//! extrapolated point decodes to a valid parameter.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    self, fixed_point_map, gaussian_scatter, initial_params, relative_change, AlgorithmKind, FitConfig, FitResult,
    FitStatus,
};
use crate::linalg::{cholesky, dot, norm_sq, Matrix, SpdMatrix};
use crate::model::{self, StudentTParams, WeightedSample};

/// Flat coordinates of a parameter triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub theta: Vec<f64>,
    pub dim: usize,
}

impl ParamVector {
    /// `1 + d + d(d+1)/2`
    pub fn len_for(dim: usize) -> usize {
        1 + dim + dim * (dim + 1) / 2
    }

    pub fn encode(params: &StudentTParams) -> Self {
        let d = params.dim();
        let mut theta = Vec::with_capacity(Self::len_for(d));
        theta.push(params.nu.ln());
        theta.extend_from_slice(&params.mu);
        let l = params.sigma.chol();
        for i in 0..d {
            for j in 0..i {
                theta.push(l[(i, j)]);
            }
            theta.push(l[(i, i)].ln());
        }
        ParamVector { theta, dim: d }
    }

    pub fn from_raw(theta: Vec<f64>, dim: usize) -> Result<Self> {
        if theta.len() != Self::len_for(dim) {
            return Err(Error::DimensionMismatch {
                expected: Self::len_for(dim),
                got: theta.len(),
            });
        }
        Ok(ParamVector { theta, dim })
    }

    pub fn decode(&self) -> Result<StudentTParams> {
        let d = self.dim;
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coordinates".into()));
        }
        let nu = self.theta[0].exp();
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::Domain(format!("ln nu = {} out of range", self.theta[0])));
        }
        let mu = self.theta[1..=d].to_vec();
        let mut l = Matrix::zeros(d);
        let mut k = 1 + d;
        for i in 0..d {
            for j in 0..i {
                l[(i, j)] = self.theta[k];
                k += 1;
            }
            l[(i, i)] = self.theta[k].exp();
            k += 1;
        }
        StudentTParams::new(nu, mu, SpdMatrix::from_cholesky(l)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    None,
    Squarem,
    Daarem,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::None, Scheme::Squarem, Scheme::Daarem];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::None => "none",
            Scheme::Squarem => "squarem",
            Scheme::Daarem => "daarem",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Scheme::None),
            "squarem" => Ok(Scheme::Squarem),
            "daarem" => Ok(Scheme::Daarem),
            other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquaremConfig {
    pub max_backtracks: usize,
}

impl Default for SquaremConfig {
    fn default() -> Self {
        SquaremConfig { max_backtracks: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaaremConfig {
    pub epsilon: f64,
    pub epsilon_c: f64,
    pub alpha: f64,
    pub kappa: i64,
    /// Lower limit `−D` of the damping counter; its upper limit is `D`.
    pub d_max: i64,
    /// History length; `None` means `min(⌈p/2⌉, 10)`.
    pub m: Option<usize>,
}

impl Default for DaaremConfig {
    fn default() -> Self {
        DaaremConfig {
            epsilon: 0.01,
            epsilon_c: 0.0,
            alpha: 1.2,
            kappa: 25,
            d_max: 50,
            m: None,
        }
    }
}

impl DaaremConfig {
    pub fn history_len(&self, p: usize) -> usize {
        self.m.unwrap_or_else(|| p.div_ceil(2).min(10))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.alpha > 1.0) {
            return Err(Error::InvalidConfig("daarem alpha must exceed 1".into()));
        }
        if self.history_len(p) == 0 {
            return Err(Error::InvalidConfig("daarem history length must be at least 1".into()));
        }
        if self.epsilon < 0.0 || self.epsilon_c < 0.0 || self.d_max < 0 || self.kappa < 0 {
            return Err(Error::InvalidConfig("daarem parameters must be nonnegative".into()));
        }
        Ok(())
    }

    /// `δ = 1/(1 + α^{κ−s})`
    pub fn damping(&self, s: i64) -> f64 {
        1.0 / (1.0 + self.alpha.powf((self.kappa - s) as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AccelConfig {
    pub squarem: SquaremConfig,
    pub daarem: DaaremConfig,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// One SQUAREM step of the map `g` with objective `obj` (`+∞` where
/// undefined). Never returns a point with a larger objective than `theta`
/// when `g` is a descent map.
pub fn squarem_step<G, L>(mut g: G, theta: &[f64], mut obj: L, cfg: &SquaremConfig) -> Result<Vec<f64>>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    L: FnMut(&[f64]) -> f64,
{
    let theta1 = g(theta)?;
    let theta2 = g(&theta1)?;
    let s = sub(&theta1, theta);
    let v: Vec<f64> = theta2.iter().zip(&theta1).zip(&s).map(|((a, b), c)| a - b - c).collect();
    let s_norm = norm_sq(&s).sqrt();
    let v_norm = norm_sq(&v).sqrt();
    if s_norm == 0.0 {
        return Ok(theta.to_vec());
    }
    if v_norm == 0.0 {
        return Ok(theta2);
    }
    let base = obj(theta);
    let mut alpha = (-s_norm / v_norm).min(-1.0);
    for _ in 0..cfg.max_backtracks {
        let cand: Vec<f64> = theta
            .iter()
            .zip(&s)
            .zip(&v)
            .map(|((t, si), vi)| t - 2.0 * alpha * si + alpha * alpha * vi)
            .collect();
        if obj(&cand) <= base {
            return g(&cand);
        }
        alpha = 0.5 * (alpha - 1.0);
    }
    Ok(theta2)
}

fn gram(cols: &[&Vec<f64>]) -> Matrix {
    let m = cols.len();
    let mut a = Matrix::zeros(m);
    for i in 0..m {
        for j in 0..=i {
            let v = dot(cols[i], cols[j]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

fn damped_coefficients(ftf: &Matrix, ftf_f: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let m = ftf.dim();
    let mut a = ftf.clone();
    for i in 0..m {
        a[(i, i)] += lambda;
    }
    cholesky(&a).ok().map(|c| c.solve(ftf_f))
}

const LOG_LAMBDA_RANGE: f64 = 12.0;

/// λ ≥ 0 with `‖(FᵀF+λI)⁻¹Fᵀf‖² = δ ‖(FᵀF)⁻¹Fᵀf‖²`, where `F` is given by
/// its columns.
///
/// The search runs over `log10(λ/s) ∈ [−12, 12]` with `s = tr(FᵀF)/m`,
/// so it adapts to the magnitude of the differences; a singular `FᵀF`
/// uses `1e-12·s` as its reference damping.
pub fn solve_damping_lambda(f_cols: &[Vec<f64>], f_vec: &[f64], delta: f64) -> f64 {
    if delta >= 1.0 || f_cols.is_empty() {
        return 0.0;
    }
    let cols: Vec<&Vec<f64>> = f_cols.iter().collect();
    let ftf = gram(&cols);
    let m = ftf.dim();
    let scale = (0..m).map(|i| ftf[(i, i)]).sum::<f64>() / m as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return 0.0;
    }
    let ftf_f: Vec<f64> = cols.iter().map(|c| dot(c, f_vec)).collect();
    let floor = scale * 10f64.powf(-LOG_LAMBDA_RANGE);
    let sq = |lambda: f64| damped_coefficients(&ftf, &ftf_f, lambda).map(|g| norm_sq(&g));
    let reference = match damped_coefficients(&ftf, &ftf_f, 0.0) {
        Some(g) if norm_sq(&g).is_finite() => norm_sq(&g),
        _ => sq(floor).unwrap_or(f64::INFINITY),
    };
    if !(reference > 0.0) || !reference.is_finite() {
        return 0.0;
    }
    let target = delta * reference;
    let ratio_above = |u: f64| sq(scale * 10f64.powf(u)).map(|v| v > target).unwrap_or(true);
    let (mut lo, mut hi) = (-LOG_LAMBDA_RANGE, LOG_LAMBDA_RANGE);
    if !ratio_above(lo) {
        return scale * 10f64.powf(lo);
    }
    if ratio_above(hi) {
        return scale * 10f64.powf(hi);
    }
    // λ relative tolerance 1e-11
    while hi - lo > 4e-12 {
        let mid = 0.5 * (lo + hi);
        if ratio_above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    scale * 10f64.powf(0.5 * (lo + hi))
}

/// Mutable state of a DAAREM run.
#[derive(Debug, Clone, PartialEq)]
pub struct DaaremState {
    /// Successive differences of θ, oldest first, at most `m` of them.
    pub x_hist: VecDeque<Vec<f64>>,
    /// Successive differences of `f(θ) = G(θ) − θ`.
    pub f_hist: VecDeque<Vec<f64>>,
    pub prev_theta: Option<Vec<f64>>,
    pub prev_f: Option<Vec<f64>>,
    /// Restart counter `c_r ∈ {1, …, m}`.
    pub c: usize,
    /// Damping counter `s_r ∈ [−D, D]`.
    pub s: i64,
    /// Objective at the last restart.
    pub l_star: f64,
    /// Steps taken, `r`.
    pub step: usize,
}

impl DaaremState {
    pub fn new(l_star: f64) -> Self {
        DaaremState {
            x_hist: VecDeque::new(),
            f_hist: VecDeque::new(),
            prev_theta: None,
            prev_f: None,
            c: 1,
            s: 0,
            l_star,
            step: 0,
        }
    }

    pub fn history_len(&self) -> usize {
        self.x_hist.len()
    }
}

/// Outcome of one DAAREM step.
#[derive(Debug, Clone, PartialEq)]
pub struct DaaremStep {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub accepted: bool,
}

/// One damped Anderson step from `theta` (with `θ_r` and `f_r` pushed into
/// the history). The returned point satisfies `L ≤ L(θ) + ε` when `g` is a
/// descent map.
pub fn daarem_step<G, L>(
    mut g: G,
    state: &mut DaaremState,
    theta: &[f64],
    mut obj: L,
    cfg: &DaaremConfig,
) -> Result<DaaremStep>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
    L: FnMut(&[f64]) -> f64,
{
    let p = theta.len();
    let m = cfg.history_len(p);
    let gt = g(theta)?;
    let f = sub(&gt, theta);
    if let (Some(pt), Some(pf)) = (&state.prev_theta, &state.prev_f) {
        state.x_hist.push_back(sub(theta, pt));
        state.f_hist.push_back(sub(&f, pf));
        while state.x_hist.len() > m {
            state.x_hist.pop_front();
            state.f_hist.pop_front();
        }
    }
    state.prev_theta = Some(theta.to_vec());
    state.prev_f = Some(f.clone());
    state.step += 1;

    let m_r = state.c.min(m).min(state.f_hist.len());
    let base = obj(theta);
    let plain = gt;
    let mut next = None;
    if m_r > 0 {
        let start = state.f_hist.len() - m_r;
        let f_cols: Vec<Vec<f64>> = state.f_hist.iter().skip(start).cloned().collect();
        let x_cols: Vec<&Vec<f64>> = state.x_hist.iter().skip(start).collect();
        let delta = cfg.damping(state.s);
        let lambda = solve_damping_lambda(&f_cols, &f, delta);
        let refs: Vec<&Vec<f64>> = f_cols.iter().collect();
        let ftf = gram(&refs);
        let scale = (0..m_r).map(|i| ftf[(i, i)]).sum::<f64>() / m_r as f64;
        let ftf_f: Vec<f64> = f_cols.iter().map(|c| dot(c, &f)).collect();
        let lambda = lambda.max(1e-12 * scale);
        if let Some(gamma) = damped_coefficients(&ftf, &ftf_f, lambda) {
            let mut t: Vec<f64> = theta.iter().zip(&f).map(|(a, b)| a + b).collect();
            for (j, gj) in gamma.iter().enumerate() {
                for k in 0..p {
                    t[k] -= (x_cols[j][k] + f_cols[j][k]) * gj;
                }
            }
            let lt = obj(&t);
            if lt <= base + cfg.epsilon {
                next = Some((t, lt));
            }
        }
    }
    let accepted = next.is_some();
    let (theta_next, l_next) = match next {
        Some(v) => v,
        None => {
            let l = obj(&plain);
            (plain, l)
        }
    };
    let mut s_new = if accepted { state.s + 1 } else { state.s };
    if state.step % m == 0 {
        if l_next > state.l_star + cfg.epsilon_c {
            s_new = (s_new - m as i64).max(-cfg.d_max);
        }
        state.c = 1;
        state.l_star = l_next;
    } else {
        state.c += 1;
    }
    state.s = s_new.min(cfg.d_max);
    Ok(DaaremStep {
        theta: theta_next,
        objective: l_next,
        accepted,
    })
}

/// Fit with the given acceleration scheme. Every accelerated step counts as
/// one iteration and the stopping rule is the one used by
/// [`estimators::fit`].
pub fn accelerated_fit(
    kind: AlgorithmKind,
    scheme: Scheme,
    data: &WeightedSample,
    cfg: &FitConfig,
    accel: &AccelConfig,
) -> Result<FitResult> {
    if scheme == Scheme::None {
        return estimators::fit(kind, data, cfg);
    }
    cfg.validate()?;
    let start = Instant::now();
    let d = data.dim();
    let p = ParamVector::len_for(d);
    if scheme == Scheme::Daarem {
        accel.daarem.validate(p)?;
    }
    let fixed_nu = cfg.fixed_nu;
    let gaussian = std::cell::Cell::new(false);
    let evaluations = std::cell::Cell::new(0usize);
    let mut map = |theta: &[f64]| -> Result<Vec<f64>> {
        let mut params = ParamVector::from_raw(theta.to_vec(), d)?.decode()?;
        if let Some(nu) = fixed_nu {
            params.nu = nu;
        }
        let step = fixed_point_map(kind, &params, data, cfg)?;
        evaluations.set(evaluations.get() + 1);
        if step.gaussian_limit {
            gaussian.set(true);
        }
        Ok(ParamVector::encode(&step.params).theta)
    };
    let obj = |theta: &[f64]| -> f64 {
        ParamVector::from_raw(theta.to_vec(), d)
            .and_then(|v| v.decode())
            .and_then(|mut params| {
                if let Some(nu) = fixed_nu {
                    params.nu = nu;
                }
                model::neg_log_likelihood(&params, data)
            })
            .unwrap_or(f64::INFINITY)
    };

    let mut params = initial_params(data, fixed_nu.unwrap_or(cfg.nu0))?;
    let mut theta = ParamVector::encode(&params).theta;
    let mut trace = vec![obj(&theta)];
    let mut status = FitStatus::MaxIters;
    let mut iterations = 0;
    let mut daarem = DaaremState::new(trace[0]);

    while iterations < cfg.max_outer_iters {
        let next = match scheme {
            Scheme::Squarem => squarem_step(&mut map, &theta, obj, &accel.squarem)?,
            Scheme::Daarem => {
                if iterations == 0 {
                    // θ₁ = θ₀ + f(θ₀) seeds the history
                    let t1 = map(&theta)?;
                    daarem.prev_theta = Some(theta.clone());
                    daarem.prev_f = Some(sub(&t1, &theta));
                    daarem.l_star = obj(&t1);
                    t1
                } else {
                    daarem_step(&mut map, &mut daarem, &theta, obj, &accel.daarem)?.theta
                }
            }
            Scheme::None => unreachable!(),
        };
        iterations += 1;
        let mut next_params = ParamVector::from_raw(next.clone(), d)?.decode()?;
        if let Some(nu) = fixed_nu {
            next_params.nu = nu;
        }
        trace.push(model::neg_log_likelihood(&next_params, data)?);
        if gaussian.get() || next_params.nu > cfg.nu_max {
            params = next_params;
            status = FitStatus::GaussianLimit;
            break;
        }
        let change = relative_change(&params, &next_params);
        params = next_params;
        theta = next;
        if change < cfg.tol {
            status = FitStatus::Converged;
            break;
        }
    }
    let gaussian_sigma = if status == FitStatus::GaussianLimit {
        Some(gaussian_scatter(data)?)
    } else {
        None
    };
    Ok(FitResult {
        params,
        iterations,
        map_evaluations: evaluations.get(),
        objective_trace: trace,
        status,
        gaussian_sigma,
        wall_time: start.elapsed(),
    })
}
