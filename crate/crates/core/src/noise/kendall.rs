//! Kendall's τ-b rank correlation and its z-score.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Pair counts behind τ-b and its variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KendallCounts {
    pub n: u64,
    /// `n_c − n_d`
    pub s: i64,
    /// Pairs tied in x.
    pub ties_x: u64,
    /// Pairs tied in y.
    pub ties_y: u64,
    /// Pairs tied in both.
    pub ties_xy: u64,
    /// Σ t(t−1)(2t+5), Σ t(t−1)(t−2) over tie groups in x, likewise for y.
    pub var_x: [u64; 2],
    pub var_y: [u64; 2],
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidSample("kendall tau needs at least two pairs".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidSample("NaN in kendall input".into()));
    }
    Ok(())
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("NaN rejected earlier")
}

/// Tie-group statistics of a sorted sequence: (pairs, Σt(t−1)(2t+5), Σt(t−1)(t−2)).
fn tie_stats(sorted: &[f64]) -> (u64, u64, u64) {
    let (mut pairs, mut v1, mut v2) = (0u64, 0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        pairs += t * (t - 1) / 2;
        v1 += t * (t - 1) * (2 * t + 5);
        v2 += t * (t - 1) * t.saturating_sub(2);
        i = j;
    }
    (pairs, v1, v2)
}

/// Sort `v` in place by merge sort and return the number of inversions.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf.push(v[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Concordance counts in `O(n log n)`.
pub fn kendall_counts(x: &[f64], y: &[f64]) -> Result<KendallCounts> {
    check(x, y)?;
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| cmp(x[a], x[b]).then(cmp(y[a], y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let (ties_x, vx1, vx2) = tie_stats(&xs);
    let mut ties_xy = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && xs[j] == xs[i] && ys[j] == ys[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        ties_xy += t * (t - 1) / 2;
        i = j;
    }
    let mut buf = Vec::with_capacity(n);
    let swaps = merge_count(&mut ys, &mut buf);
    let (ties_y, vy1, vy2) = tie_stats(&ys);
    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let s = n0 as i64 - ties_x as i64 - ties_y as i64 + ties_xy as i64 - 2 * swaps as i64;
    Ok(KendallCounts {
        n: n as u64,
        s,
        ties_x,
        ties_y,
        ties_xy,
        var_x: [vx1, vx2],
        var_y: [vy1, vy2],
    })
}

impl KendallCounts {
    /// τ-b; zero when either sequence is constant.
    pub fn tau(&self) -> f64 {
        let n0 = self.n * (self.n - 1) / 2;
        let denom = ((n0 - self.ties_x) as f64) * ((n0 - self.ties_y) as f64);
        if denom == 0.0 {
            0.0
        } else {
            self.s as f64 / denom.sqrt()
        }
    }

    /// Null variance of `n_c − n_d` with the tie correction.
    pub fn variance_s(&self) -> f64 {
        let n = self.n as f64;
        let base = n * (n - 1.0) * (2.0 * n + 5.0);
        let mut v = (base - self.var_x[0] as f64 - self.var_y[0] as f64) / 18.0;
        if self.n > 2 {
            v += (self.var_x[1] as f64) * (self.var_y[1] as f64) / (9.0 * n * (n - 1.0) * (n - 2.0));
        }
        v += (2.0 * self.ties_x as f64) * (2.0 * self.ties_y as f64) / (2.0 * n * (n - 1.0));
        v
    }

    /// `(n_c − n_d)/√Var`; zero when the variance vanishes.
    pub fn z(&self) -> f64 {
        let v = self.variance_s();
        if v > 0.0 {
            self.s as f64 / v.sqrt()
        } else {
            0.0
        }
    }
}

pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(kendall_counts(x, y)?.tau())
}

/// Asymptotically standard normal under independence; equals
/// `3√2 (n_c − n_d)/√(n(n−1)(2n+5))` without ties.
pub fn z_score(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(kendall_counts(x, y)?.z())
}
