//! Fixed-point estimators for (ν, μ, Σ): EM, aEM, MMF, GMMF and ECME.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix, SpdMatrix};
use crate::model::{self, weighted_excess, Mahalanobis, StudentTParams, WeightedSample};
use crate::special::{raw, solve_increasing_zero_in, ScalarSolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Em,
    Aem,
    Mmf,
    Gmmf,
    Ecme,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 5] = [
        AlgorithmKind::Em,
        AlgorithmKind::Aem,
        AlgorithmKind::Mmf,
        AlgorithmKind::Gmmf,
        AlgorithmKind::Ecme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::Em => "em",
            AlgorithmKind::Aem => "aem",
            AlgorithmKind::Mmf => "mmf",
            AlgorithmKind::Gmmf => "gmmf",
            AlgorithmKind::Ecme => "ecme",
        }
    }

    /// Whether the scatter update is divided by Σ w_i γ_i.
    pub fn normalizes_scatter(self) -> bool {
        matches!(self, AlgorithmKind::Aem | AlgorithmKind::Mmf | AlgorithmKind::Gmmf)
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "em" => Ok(AlgorithmKind::Em),
            "aem" => Ok(AlgorithmKind::Aem),
            "mmf" => Ok(AlgorithmKind::Mmf),
            "gmmf" => Ok(AlgorithmKind::Gmmf),
            "ecme" => Ok(AlgorithmKind::Ecme),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub tol: f64,
    pub max_outer_iters: usize,
    pub nu0: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub nu_max: f64,
    /// Keep ν at this value and estimate μ, Σ only.
    pub fixed_nu: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            tol: 1e-5,
            max_outer_iters: 10_000,
            nu0: 3.0,
            inner_tol: 1e-9,
            inner_max_iters: 100,
            nu_max: 1e6,
            fixed_nu: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive(self.tol, "tol")?;
        positive(self.nu0, "nu0")?;
        positive(self.inner_tol, "inner_tol")?;
        positive(self.nu_max, "nu_max")?;
        if let Some(nu) = self.fixed_nu {
            positive(nu, "fixed_nu")?;
        }
        if self.max_outer_iters == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidConfig("iteration limits must be at least 1".into()));
        }
        Ok(())
    }

    pub fn inner(&self) -> InnerConfig {
        InnerConfig {
            tol: self.inner_tol,
            max_iters: self.inner_max_iters,
            nu_max: self.nu_max,
        }
    }
}

/// Settings of the GMMF/ECME inner ν iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub nu_max: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        FitConfig::default().inner()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitStatus {
    Converged,
    MaxIters,
    GaussianLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: StudentTParams,
    pub iterations: usize,
    /// Applications of the underlying fixed-point map; equals `iterations`
    /// without acceleration.
    pub map_evaluations: usize,
    /// L at the start value followed by one entry per iteration.
    pub objective_trace: Vec<f64>,
    pub status: FitStatus,
    /// Weighted scatter of the centered data, set when ν diverged.
    pub gaussian_sigma: Option<SpdMatrix>,
    pub wall_time: Duration,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the start value")
    }
}

pub fn e_step(params: &StudentTParams, data: &WeightedSample) -> Result<Mahalanobis> {
    Mahalanobis::compute(params, data)
}

pub fn m_step_location_scatter(
    kind: AlgorithmKind,
    data: &WeightedSample,
    gammas: &[f64],
) -> Result<(Vec<f64>, SpdMatrix)> {
    if gammas.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: gammas.len(),
        });
    }
    if gammas.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::Domain("weights gamma must be positive".into()));
    }
    let d = data.dim();
    let mut total = 0.0;
    let mut mu = vec![0.0; d];
    for ((x, &w), &g) in data.points().iter().zip(data.weights()).zip(gammas) {
        let c = w * g;
        total += c;
        for k in 0..d {
            mu[k] += c * x[k];
        }
    }
    for v in mu.iter_mut() {
        *v /= total;
    }
    let mut sigma = Matrix::zeros(d);
    let mut r = vec![0.0; d];
    for ((x, &w), &g) in data.points().iter().zip(data.weights()).zip(gammas) {
        for k in 0..d {
            r[k] = x[k] - mu[k];
        }
        sigma.add_outer(w * g, &r);
    }
    if kind.normalizes_scatter() {
        sigma = sigma.scaled(1.0 / total);
    }
    Ok((mu, cholesky(&sigma)?))
}

fn solver_cfg() -> ScalarSolverConfig {
    ScalarSolverConfig::default()
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("nu must be positive and finite, got {nu}")))
    }
}

/// Zero in ν of `φ(ν/2) + c` for `c > 0`, bracketed by `ν/2 ∈ [1/(2c), 1/c]`.
fn solve_phi_shift(c: f64, nu_start: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::NoSignChange);
    }
    let x = solve_increasing_zero_in(
        |x| raw::phi(x) + c,
        raw::phi_prime,
        0.5 * nu_start,
        0.5 / c,
        1.0 / c,
        &solver_cfg(),
    )?;
    Ok(2.0 * x)
}

/// EM update: zero of `φ(ν/2) − φ((ν_r+d)/2) + Σ w_i(γ_i − ln γ_i − 1)`.
pub fn nu_step_em(nu_r: f64, gammas: &[f64], weights: &[f64], d: usize) -> Result<f64> {
    check_nu(nu_r)?;
    let excess: f64 = gammas
        .iter()
        .zip(weights)
        .map(|(&g, &w)| w * model::excess_term(g - 1.0))
        .sum();
    let c = -raw::phi(0.5 * (nu_r + d as f64)) + excess;
    solve_phi_shift(c, nu_r)
}

/// aEM update: as [`nu_step_em`] with the weights re-evaluated at the new δ.
pub fn nu_step_aem(nu_r: f64, deltas_next: &[f64], weights: &[f64], d: usize) -> Result<f64> {
    check_nu(nu_r)?;
    let df = d as f64;
    let c = -raw::phi(0.5 * (nu_r + df)) + weighted_excess(nu_r, deltas_next, weights, df);
    solve_phi_shift(c, nu_r)
}

/// `A(x) = φ(x) − φ(x + d/2)`
fn a_fn(x: f64, half_d: f64) -> f64 {
    raw::phi(x) - raw::phi(x + half_d)
}

fn a_prime(x: f64, half_d: f64) -> f64 {
    raw::phi_prime(x) - raw::phi_prime(x + half_d)
}

/// Result of one MMF solve. `Unbounded` means the zero lies beyond the
/// representable range, i.e. the step pushes ν to infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
enum MmfSolve {
    Value(f64),
    Unbounded,
}

fn mmf_solve(nu_r: f64, deltas: &[f64], weights: &[f64], d: usize) -> Result<Option<MmfSolve>> {
    let df = d as f64;
    let b = weighted_excess(nu_r, deltas, weights, df);
    if b == 0.0 {
        return Ok(None);
    }
    let half_d = 0.5 * df;
    let x0 = 0.5 * nu_r;
    let f = |x: f64| a_fn(x, half_d) + b;
    let fp = |x: f64| a_prime(x, half_d);
    // −t/(2x²) < A(x) < −t/(2x(x+t)) gives the bracket below
    let lo = 0.5 * (-half_d + (half_d * half_d + 2.0 * half_d / b).sqrt());
    let hi = (half_d / (2.0 * b)).sqrt();
    match solve_increasing_zero_in(f, fp, x0, lo.min(hi), hi.max(lo) * 1.01, &solver_cfg()) {
        Ok(x) => Ok(Some(MmfSolve::Value(2.0 * x))),
        Err(Error::NoSignChange) => Ok(Some(MmfSolve::Unbounded)),
        Err(e) => Err(e),
    }
}

/// MMF update: zero of `A(ν/2) + b_r`, `b_r = Σ w_i(γ̃_i − ln γ̃_i − 1)`,
/// `γ̃_i = (ν_r+d)/(ν_r+δ_i)`. Returns `ν_r` when `b_r = 0` and `+∞` when
/// the zero overflows.
pub fn nu_step_mmf(nu_r: f64, deltas_next: &[f64], weights: &[f64], d: usize) -> Result<f64> {
    check_nu(nu_r)?;
    Ok(match mmf_solve(nu_r, deltas_next, weights, d)? {
        None => nu_r,
        Some(MmfSolve::Value(v)) => v,
        Some(MmfSolve::Unbounded) => f64::INFINITY,
    })
}

/// Outcome of the GMMF inner iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRun {
    pub nu: f64,
    /// `ν_{r,0} = ν_r, ν_{r,1}, …`
    pub iterates: Vec<f64>,
    /// Iterates left `(0, nu_max]`: F has no zero above the start.
    pub gaussian_limit: bool,
    pub converged: bool,
}

/// GMMF update: repeated MMF steps at the current inner iterate, converging
/// monotonically to a zero of F.
pub fn nu_step_gmmf(nu_r: f64, deltas_next: &[f64], weights: &[f64], d: usize, inner: &InnerConfig) -> Result<InnerRun> {
    check_nu(nu_r)?;
    let mut iterates = vec![nu_r];
    let mut nu = nu_r;
    for _ in 0..inner.max_iters {
        let next = match mmf_solve(nu, deltas_next, weights, d)? {
            // every δ_i = d: F = A < 0 everywhere
            None => f64::INFINITY,
            Some(MmfSolve::Value(v)) => v,
            Some(MmfSolve::Unbounded) => f64::INFINITY,
        };
        if !(next <= inner.nu_max) {
            return Ok(InnerRun {
                nu,
                iterates,
                gaussian_limit: true,
                converged: false,
            });
        }
        iterates.push(next);
        let step = (next - nu).abs();
        nu = next;
        if step <= inner.tol * iterates[iterates.len() - 2] {
            return Ok(InnerRun {
                nu,
                iterates,
                gaussian_limit: false,
                converged: true,
            });
        }
    }
    Ok(InnerRun {
        nu,
        iterates,
        gaussian_limit: false,
        converged: false,
    })
}

/// ECME conditional ν-maximization; same target and iteration as GMMF.
pub fn nu_step_ecme(nu_start: f64, deltas_next: &[f64], weights: &[f64], d: usize, inner: &InnerConfig) -> Result<InnerRun> {
    nu_step_gmmf(nu_start, deltas_next, weights, d, inner)
}

/// One application of the iteration operator.
#[derive(Debug, Clone, PartialEq)]
pub struct MapStep {
    pub params: StudentTParams,
    /// ν ran past `nu_max`; `params.nu` is the last finite iterate.
    pub gaussian_limit: bool,
}

/// One full (E, M, ν) update of `kind` starting from `params`.
pub fn fixed_point_map(
    kind: AlgorithmKind,
    params: &StudentTParams,
    data: &WeightedSample,
    cfg: &FitConfig,
) -> Result<MapStep> {
    let d = data.dim();
    let w = data.weights();
    let e = e_step(params, data)?;
    let (mu, sigma) = m_step_location_scatter(kind, data, &e.gamma)?;
    let nu_r = params.nu;
    if cfg.fixed_nu.is_some() {
        return Ok(MapStep {
            params: StudentTParams::new(nu_r, mu, sigma)?,
            gaussian_limit: false,
        });
    }
    let (nu, gaussian_limit) = match kind {
        AlgorithmKind::Em => {
            let nu = nu_step_em(nu_r, &e.gamma, w, d)?;
            (nu, nu > cfg.nu_max)
        }
        AlgorithmKind::Aem | AlgorithmKind::Mmf => {
            let probe = StudentTParams::new(nu_r, mu.clone(), sigma.clone())?;
            let dl = model::deltas(&probe, data)?;
            let nu = if kind == AlgorithmKind::Aem {
                nu_step_aem(nu_r, &dl, w, d)?
            } else {
                nu_step_mmf(nu_r, &dl, w, d)?
            };
            (nu, !(nu <= cfg.nu_max))
        }
        AlgorithmKind::Gmmf | AlgorithmKind::Ecme => {
            let probe = StudentTParams::new(nu_r, mu.clone(), sigma.clone())?;
            let dl = model::deltas(&probe, data)?;
            let run = nu_step_gmmf(nu_r, &dl, w, d, &cfg.inner())?;
            (run.nu, run.gaussian_limit)
        }
    };
    let nu = if nu.is_finite() { nu.min(cfg.nu_max) } else { cfg.nu_max };
    Ok(MapStep {
        params: StudentTParams::new(nu, mu, sigma)?,
        gaussian_limit,
    })
}

/// Weighted mean and scatter start with `ν₀`.
pub fn initial_params(data: &WeightedSample, nu0: f64) -> Result<StudentTParams> {
    let mu = data.weighted_mean();
    let sigma = cholesky(&data.weighted_scatter(&mu))?;
    StudentTParams::new(nu0, mu, sigma)
}

/// Relative parameter change used as the stopping rule:
/// `√(‖Δμ‖² + ‖ΔΣ‖_F²)/√(‖μ‖² + ‖Σ‖_F²) + |Δ ln ν|/max(|ln ν|, 1e-3)`.
pub fn relative_change(prev: &StudentTParams, next: &StudentTParams) -> f64 {
    let dm: f64 = prev.mu.iter().zip(&next.mu).map(|(a, b)| (a - b).powi(2)).sum();
    let ds = next.sigma.matrix().sub(prev.sigma.matrix()).frobenius_norm().powi(2);
    let base = prev.mu.iter().map(|a| a * a).sum::<f64>() + prev.sigma.matrix().frobenius_norm().powi(2);
    let log_prev = prev.nu.ln();
    let dnu = (next.nu.ln() - log_prev).abs() / log_prev.abs().max(1e-3);
    ((dm + ds) / base).sqrt() + dnu
}

/// Scatter of the data around its weighted mean: the Gaussian ML estimate.
pub fn gaussian_scatter(data: &WeightedSample) -> Result<SpdMatrix> {
    cholesky(&data.weighted_scatter(&data.weighted_mean()))
}

pub fn fit(kind: AlgorithmKind, data: &WeightedSample, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut params = initial_params(data, cfg.fixed_nu.unwrap_or(cfg.nu0))?;
    let mut trace = vec![model::neg_log_likelihood(&params, data)?];
    let mut status = FitStatus::MaxIters;
    let mut gaussian_sigma = None;
    let mut iterations = 0;
    while iterations < cfg.max_outer_iters {
        let step = fixed_point_map(kind, &params, data, cfg)?;
        iterations += 1;
        trace.push(model::neg_log_likelihood(&step.params, data)?);
        if step.gaussian_limit {
            params = step.params;
            status = FitStatus::GaussianLimit;
            gaussian_sigma = Some(gaussian_scatter(data)?);
            break;
        }
        let change = relative_change(&params, &step.params);
        params = step.params;
        if change < cfg.tol {
            status = FitStatus::Converged;
            break;
        }
    }
    Ok(FitResult {
        params,
        iterations,
        map_evaluations: iterations,
        objective_trace: trace,
        status,
        gaussian_sigma,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::f_nu;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn e_step_examples() {
        let p = StudentTParams::new(2.0, vec![1.0, 2.0], SpdMatrix::identity(2)).unwrap();
        let data = WeightedSample::uniform(vec![vec![1.0, 2.0], vec![0.0, 0.0], vec![3.0, 1.0]]).unwrap();
        let m = e_step(&p, &data).unwrap();
        assert_eq!(m.delta[0], 0.0);
        assert_eq!(m.gamma[0], 2.0);

        let p = StudentTParams::standard(1.0, 1).unwrap();
        let data = WeightedSample::uniform(vec![vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(e_step(&p, &data).unwrap().gamma, vec![1.0, 1.0]);

        // Σ⁻¹ = [[2/3,1/3],[1/3,2/3]], so (1,1) has δ = 2 and γ = (4+2)/(4+2)
        let sigma = cholesky(&Matrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap()).unwrap();
        let p = StudentTParams::new(4.0, vec![0.0, 0.0], sigma).unwrap();
        let data = WeightedSample::uniform(vec![vec![1.0, 1.0], vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let m = e_step(&p, &data).unwrap();
        assert!((m.delta[0] - 2.0).abs() < 1e-14);
        assert!((m.gamma[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn m_step_examples() {
        let data = WeightedSample::uniform(vec![vec![-1.0], vec![0.0], vec![2.0]]).unwrap();
        let (mu, _) = m_step_location_scatter(AlgorithmKind::Em, &data, &[0.7, 0.7, 0.7]).unwrap();
        assert!((mu[0] - 1.0 / 3.0).abs() < 1e-15);

        let g = [1.0, 2.0, 1.0];
        let (mu, s_em) = m_step_location_scatter(AlgorithmKind::Em, &data, &g).unwrap();
        assert!((mu[0] - 0.25).abs() < 1e-15);
        let expect: f64 = [(-1.0, 1.0), (0.0, 2.0), (2.0, 1.0)]
            .iter()
            .map(|&(x, g): &(f64, f64)| g * (x - 0.25).powi(2) / 3.0)
            .sum();
        assert!((s_em.matrix()[(0, 0)] - expect).abs() < 1e-15);
        let (_, s_aem) = m_step_location_scatter(AlgorithmKind::Aem, &data, &g).unwrap();
        assert!((s_aem.matrix()[(0, 0)] - expect / (4.0 / 3.0)).abs() < 1e-15);
        assert!(m_step_location_scatter(AlgorithmKind::Em, &data, &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn em_nu_step_bracket_from_constant() {
        // c_r = 0.1 puts the zero of φ(x) + c_r in (5, 10)
        let c = 0.1;
        let nu = solve_phi_shift(c, 3.0).unwrap();
        assert!(nu / 2.0 > 5.0 && nu / 2.0 < 10.0);
        assert!((raw::phi(nu / 2.0) + c).abs() < 1e-14);
    }

    #[test]
    fn em_nu_step_residual() {
        let g = [0.5, 2.0];
        let w = uniform(2);
        let nu = nu_step_em(3.0, &g, &w, 2).unwrap();
        let c = -raw::phi(2.5) + g.iter().map(|&g: &f64| 0.5 * (g - g.ln() - 1.0)).sum::<f64>();
        assert!((raw::phi(nu / 2.0) + c).abs() < 1e-10);
    }

    #[test]
    fn em_nu_step_all_gammas_one() {
        // c_r = −φ((ν_r+d)/2), so ν₊ = ν_r + d
        let nu = nu_step_em(3.0, &[1.0, 1.0], &uniform(2), 2).unwrap();
        assert!((nu - 5.0).abs() < 1e-9);
    }

    #[test]
    fn aem_nu_step_residual() {
        let dl = [1.0, 7.0];
        let w = uniform(2);
        let nu = nu_step_aem(3.0, &dl, &w, 2).unwrap();
        let c = -raw::phi(2.5) + dl.iter().map(|&x| {
            let g: f64 = 5.0 / (3.0 + x);
            0.5 * (g - g.ln() - 1.0)
        }).sum::<f64>();
        assert!((raw::phi(nu / 2.0) + c).abs() < 1e-10);
    }

    #[test]
    fn mmf_nu_step_examples() {
        let w = uniform(2);
        assert_eq!(nu_step_mmf(3.0, &[2.0, 2.0], &w, 2).unwrap(), 3.0);

        let dl = [1.0, 7.0];
        let nu = nu_step_mmf(3.0, &dl, &w, 2).unwrap();
        let b = weighted_excess(3.0, &dl, &w, 2.0);
        assert!((a_fn(nu / 2.0, 1.0) + b).abs() < 1e-10);

        // choose δ so that b_r = −A(ν_r/2): the step is a fixed point
        let nu_r: f64 = 4.0;
        let target = -a_fn(nu_r / 2.0, 1.0);
        let delta = crate::special::solve_increasing_zero(
            |x| model::excess_term((2.0 - x) / (nu_r + x)) - target,
            |x| {
                let h = (2.0 - x) / (nu_r + x);
                let dh = -(nu_r + 2.0) / (nu_r + x).powi(2);
                h / (1.0 + h) * dh
            },
            5.0,
            &ScalarSolverConfig::default(),
        )
        .unwrap();
        let nu = nu_step_mmf(nu_r, &[delta, delta], &w, 2).unwrap();
        assert!((nu - nu_r).abs() < 1e-8, "{nu}");
    }

    #[test]
    fn gmmf_converges_to_zero_of_f() {
        let dl = [9.0, 10.0, 0.1];
        let w = uniform(3);
        let run = nu_step_gmmf(3.0, &dl, &w, 2, &InnerConfig::default()).unwrap();
        assert!(run.converged && !run.gaussian_limit);
        assert!(f_nu(run.nu, &dl, &w, 2).unwrap().abs() < 1e-8);
        let up = run.iterates.windows(2).all(|p| p[1] >= p[0]);
        let down = run.iterates.windows(2).all(|p| p[1] <= p[0]);
        assert!(up || down);
        // the sign change brackets the zero
        assert!(f_nu(0.5 * run.nu, &dl, &w, 2).unwrap() < 0.0);
        assert!(f_nu(2.0 * run.nu, &dl, &w, 2).unwrap() > 0.0);
    }

    #[test]
    fn gmmf_fixed_point_start() {
        let dl = [9.0, 10.0, 0.1];
        let w = uniform(3);
        let star = nu_step_gmmf(3.0, &dl, &w, 2, &InnerConfig::default()).unwrap().nu;
        let run = nu_step_gmmf(star, &dl, &w, 2, &InnerConfig::default()).unwrap();
        assert_eq!(run.iterates.len(), 2);
        assert!((run.nu - star).abs() <= 1e-9 * star);
    }

    #[test]
    fn gmmf_diverges_when_all_inside() {
        let dl = [1.5, 2.0, 2.5, 3.0];
        let w = uniform(4);
        let inner = InnerConfig {
            max_iters: 100_000,
            ..InnerConfig::default()
        };
        let run = nu_step_gmmf(3.0, &dl, &w, 2, &inner).unwrap();
        assert!(run.gaussian_limit);
        assert!(run.iterates.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for k in AlgorithmKind::ALL {
            assert_eq!(k.name().parse::<AlgorithmKind>().unwrap(), k);
        }
        assert!("nope".parse::<AlgorithmKind>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate().is_ok());
        let bad = FitConfig {
            tol: 0.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitConfig {
            nu0: -1.0,
            ..FitConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn stopping_rule_guards_log_one() {
        let a = StudentTParams::standard(1.0, 1).unwrap();
        let b = StudentTParams::standard(1.0 + 1e-6, 1).unwrap();
        let c = relative_change(&a, &b);
        assert!(c.is_finite() && (c - 1e-3).abs() < 1e-6);
    }
}
