//! Gamma-family special functions and a safeguarded scalar root solver.
//!
//! All functions are defined on `x > 0` only. The `phi` family is evaluated
//! without forming `ψ(x) - ln x` explicitly for large arguments, which keeps
//! full relative accuracy where both terms nearly cancel.

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this the digamma/trigamma recurrences shift the argument upward.
const ASYMPTOTIC_MIN: f64 = 6.0;
/// Stirling series is used for `log_gamma` from here on.
const STIRLING_MIN: f64 = 15.0;

/// B_{2k} for k = 1..7.
const BERNOULLI: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

/// B_{2k} / (2k) for k = 1..7, the digamma tail.
const DIGAMMA_TAIL: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// B_{2k} / (2k (2k-1)) for k = 1..8, the Stirling tail.
const STIRLING_TAIL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

fn check_domain(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} requires 0 < x < inf, got {x}")))
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_domain(x, "log_gamma")?;
    Ok(raw::log_gamma(x))
}

/// Digamma ψ(x) = d/dx ln Γ(x).
pub fn digamma(x: f64) -> Result<f64> {
    check_domain(x, "digamma")?;
    Ok(raw::digamma(x))
}

/// Trigamma ψ'(x).
pub fn trigamma(x: f64) -> Result<f64> {
    check_domain(x, "trigamma")?;
    Ok(raw::trigamma(x))
}

/// φ(x) = ψ(x) − ln x. Satisfies −1/x < φ(x) < −1/(2x).
pub fn phi(x: f64) -> Result<f64> {
    check_domain(x, "phi")?;
    Ok(raw::phi(x))
}

/// φ'(x) = ψ'(x) − 1/x, strictly positive.
pub fn phi_prime(x: f64) -> Result<f64> {
    check_domain(x, "phi_prime")?;
    Ok(raw::phi_prime(x))
}

/// Unchecked kernels. Callers guarantee `x > 0`.
pub(crate) mod raw {
    use super::*;

    fn stirling_tail(z: f64) -> f64 {
        let inv = 1.0 / z;
        let inv2 = inv * inv;
        let mut term = inv;
        let mut s = 0.0;
        for c in STIRLING_TAIL {
            s += c * term;
            term *= inv2;
        }
        s
    }

    fn stirling(z: f64) -> f64 {
        (z - 0.5) * z.ln() - z + HALF_LN_2PI + stirling_tail(z)
    }

    pub fn log_gamma(x: f64) -> f64 {
        if x >= STIRLING_MIN {
            return stirling(x);
        }
        let mut z = x;
        let mut prod = 1.0;
        while z < STIRLING_MIN {
            prod *= z;
            z += 1.0;
        }
        stirling(z) - prod.ln()
    }

    /// `ln Γ(x+t) − ln Γ(x) − t ln x`, accurate for large `x`.
    pub fn log_gamma_ratio(x: f64, t: f64) -> f64 {
        if x >= STIRLING_MIN {
            (x + t - 0.5) * (t / x).ln_1p() - t + stirling_tail(x + t) - stirling_tail(x)
        } else {
            log_gamma(x + t) - log_gamma(x) - t * x.ln()
        }
    }

    /// Digamma minus the leading `ln z`, for `z >= ASYMPTOTIC_MIN`.
    fn phi_asymptotic(z: f64) -> f64 {
        let inv2 = 1.0 / (z * z);
        let mut term = inv2;
        let mut s = -0.5 / z;
        for c in DIGAMMA_TAIL {
            s -= c * term;
            term *= inv2;
        }
        s
    }

    /// Trigamma minus the leading `1/z`, for `z >= ASYMPTOTIC_MIN`.
    fn phi_prime_asymptotic(z: f64) -> f64 {
        let inv = 1.0 / z;
        let inv2 = inv * inv;
        let mut term = inv2 * inv;
        let mut s = 0.5 * inv2;
        for b in BERNOULLI {
            s += b * term;
            term *= inv2;
        }
        s
    }

    pub fn digamma(x: f64) -> f64 {
        let mut z = x;
        let mut acc = 0.0;
        while z < ASYMPTOTIC_MIN {
            acc -= 1.0 / z;
            z += 1.0;
        }
        acc + z.ln() + phi_asymptotic(z)
    }

    pub fn trigamma(x: f64) -> f64 {
        let mut z = x;
        let mut acc = 0.0;
        while z < ASYMPTOTIC_MIN {
            acc += 1.0 / (z * z);
            z += 1.0;
        }
        acc + 1.0 / z + phi_prime_asymptotic(z)
    }

    pub fn phi(x: f64) -> f64 {
        if x >= ASYMPTOTIC_MIN {
            return phi_asymptotic(x);
        }
        let mut z = x;
        let mut acc = 0.0;
        let mut shift = 0.0;
        while z < ASYMPTOTIC_MIN {
            acc -= 1.0 / z;
            z += 1.0;
            shift += 1.0;
        }
        // ψ(x) − ln x = −Σ 1/(x+j) + φ(x+k) + ln((x+k)/x)
        acc + phi_asymptotic(z) + (shift / x).ln_1p()
    }

    pub fn phi_prime(x: f64) -> f64 {
        if x >= ASYMPTOTIC_MIN {
            return phi_prime_asymptotic(x);
        }
        let mut z = x;
        let mut acc = 0.0;
        while z < ASYMPTOTIC_MIN {
            acc += 1.0 / (z * z);
            z += 1.0;
        }
        acc + phi_prime_asymptotic(z) + 1.0 / z - 1.0 / x
    }
}

/// `ln Γ(x+t) − ln Γ(x) − t ln x` for `x, t > 0`, without cancellation for
/// large `x`.
pub fn log_gamma_ratio(x: f64, t: f64) -> Result<f64> {
    check_domain(x, "log_gamma_ratio")?;
    check_domain(t, "log_gamma_ratio")?;
    Ok(raw::log_gamma_ratio(x, t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSolverConfig {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub bracket_growth: f64,
}

impl Default for ScalarSolverConfig {
    fn default() -> Self {
        ScalarSolverConfig {
            rel_tol: 1e-12,
            max_iters: 200,
            bracket_growth: 2.0,
        }
    }
}

impl ScalarSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_iters == 0 || !(self.bracket_growth > 1.0) {
            return Err(Error::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

/// Upper limit on bracket expansion steps; enough to span the positive doubles.
const MAX_EXPANSIONS: usize = 2200;

/// Find the zero of a strictly increasing `f` on `(0, ∞)`, starting at `x0`.
///
/// A bracket `[lo, hi]` with `f(lo) < 0 < f(hi)` is grown geometrically from
/// `x0`; Newton steps that leave the bracket are replaced by bisection.
pub fn solve_increasing_zero<F, D>(f: F, f_prime: D, x0: f64, cfg: &ScalarSolverConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    cfg.validate()?;
    check_domain(x0, "solve_increasing_zero start")?;
    let f0 = f(x0);
    if f0 == 0.0 {
        return Ok(x0);
    }
    if f0.is_nan() {
        return Err(Error::Domain(format!("f({x0}) is NaN")));
    }
    let g = cfg.bracket_growth;
    let (mut lo, mut hi) = (x0, x0);
    if f0 < 0.0 {
        let mut n = 0;
        loop {
            hi = lo * g;
            if !hi.is_finite() {
                return Err(Error::NoSignChange);
            }
            let fh = f(hi);
            if fh >= 0.0 {
                break;
            }
            lo = hi;
            n += 1;
            if n > MAX_EXPANSIONS || !hi.is_finite() || fh.is_nan() {
                return Err(Error::NoSignChange);
            }
        }
    } else {
        let mut n = 0;
        loop {
            lo = hi / g;
            let fl = f(lo);
            if fl <= 0.0 {
                break;
            }
            hi = lo;
            n += 1;
            if n > MAX_EXPANSIONS || lo == 0.0 || fl.is_nan() {
                return Err(Error::NoSignChange);
            }
        }
    }
    newton_in_bracket(&f, &f_prime, x0, lo, hi, cfg)
}

/// Like [`solve_increasing_zero`] but with a caller-supplied bracket; falls
/// back to bracket expansion if the bracket does not straddle the zero.
pub fn solve_increasing_zero_in<F, D>(
    f: F,
    f_prime: D,
    x0: f64,
    lo: f64,
    hi: f64,
    cfg: &ScalarSolverConfig,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    cfg.validate()?;
    if lo > 0.0 && hi > lo && f(lo) <= 0.0 && f(hi) >= 0.0 {
        newton_in_bracket(&f, &f_prime, x0, lo, hi, cfg)
    } else {
        solve_increasing_zero(f, f_prime, x0, cfg)
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 && hi > 4.0 * lo {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}

fn newton_in_bracket<F, D>(f: &F, f_prime: &D, x0: f64, mut lo: f64, mut hi: f64, cfg: &ScalarSolverConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = if x0 > lo && x0 < hi { x0 } else { midpoint(lo, hi) };
    for _ in 0..cfg.max_iters {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / f_prime(x);
        if !(next > lo && next < hi) {
            next = midpoint(lo, hi);
        }
        if (next - x).abs() <= cfg.rel_tol * next.abs() || hi - lo <= cfg.rel_tol * next.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::MaxIters(cfg.max_iters))
}
