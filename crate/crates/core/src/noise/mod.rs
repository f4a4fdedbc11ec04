//! Student-t noise estimation in grayscale images.
//!
//! Blocks whose neighbouring pixels show no rank correlation are treated as
//! constant; their pixels are fit as i.i.d. univariate Student-t samples.

mod image;
mod kendall;

pub use image::GrayImage;
pub use kendall::{kendall_counts, kendall_tau, z_score, KendallCounts};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{fit, AlgorithmKind, FitConfig, FitStatus};
use crate::model::WeightedSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityTestConfig {
    /// Two-sided level of each of the four neighbour tests.
    pub alpha_level: f64,
    pub initial_block: usize,
    pub min_block: usize,
    /// Accepted blocks needed before the search stops shrinking.
    pub min_regions: usize,
}

impl Default for HomogeneityTestConfig {
    fn default() -> Self {
        HomogeneityTestConfig {
            alpha_level: 0.05,
            initial_block: 64,
            min_block: 8,
            min_regions: 20,
        }
    }
}

impl HomogeneityTestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::InvalidConfig("alpha_level must lie in (0, 1)".into()));
        }
        if !self.initial_block.is_power_of_two() || !self.min_block.is_power_of_two() {
            return Err(Error::InvalidConfig("block sides must be powers of two".into()));
        }
        if self.min_block < 2 || self.min_block > self.initial_block {
            return Err(Error::InvalidConfig("need 2 <= min_block <= initial_block".into()));
        }
        if self.min_regions == 0 {
            return Err(Error::InvalidConfig("min_regions must be positive".into()));
        }
        Ok(())
    }

    /// `Φ⁻¹(1 − α/2)`.
    pub fn critical_value(&self) -> f64 {
        Normal::standard().inverse_cdf(1.0 - self.alpha_level / 2.0)
    }
}

/// Square block with top-left corner `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

/// Neighbour sequences for the horizontal, vertical, diagonal and
/// anti-diagonal relations.
///
/// Pairs are taken on a stride of two so that every pixel enters at most once
/// and the two index sets of each test are disjoint.
pub fn neighbour_pairs(block: &[Vec<f64>]) -> [(Vec<f64>, Vec<f64>); 4] {
    let rows = block.len();
    let cols = block.first().map_or(0, Vec::len);
    let mut out: [(Vec<f64>, Vec<f64>); 4] = Default::default();
    for r in 0..rows {
        for c in (0..cols.saturating_sub(1)).step_by(2) {
            out[0].0.push(block[r][c]);
            out[0].1.push(block[r][c + 1]);
            if r + 1 < rows {
                out[2].0.push(block[r][c]);
                out[2].1.push(block[r + 1][c + 1]);
                out[3].0.push(block[r][c + 1]);
                out[3].1.push(block[r + 1][c]);
            }
        }
    }
    for r in (0..rows.saturating_sub(1)).step_by(2) {
        for c in 0..cols {
            out[1].0.push(block[r][c]);
            out[1].1.push(block[r + 1][c]);
        }
    }
    out
}

/// z-scores of the four neighbour tests.
pub fn block_z_scores(block: &[Vec<f64>]) -> Result<[f64; 4]> {
    let side = block.len();
    if side < 2 || block.iter().any(|r| r.len() != side) {
        return Err(Error::InvalidSample("block must be square with side >= 2".into()));
    }
    let pairs = neighbour_pairs(block);
    let mut z = [0.0; 4];
    for (k, (a, b)) in pairs.iter().enumerate() {
        z[k] = z_score(a, b)?;
    }
    Ok(z)
}

/// `true` when no neighbour test rejects constancy at `alpha_level`.
pub fn test_block_constant(block: &[Vec<f64>], alpha_level: f64) -> Result<bool> {
    let crit = HomogeneityTestConfig {
        alpha_level,
        ..Default::default()
    }
    .critical_value();
    Ok(block_z_scores(block)?.iter().all(|z| z.abs() <= crit))
}

fn accepted_at(image: &GrayImage, side: usize, crit: f64) -> Result<Vec<Block>> {
    let mut out = Vec::new();
    for by in 0..image.height() / side {
        for bx in 0..image.width() / side {
            let (x, y) = (bx * side, by * side);
            let z = block_z_scores(&image.block(x, y, side))?;
            if z.iter().all(|z| z.abs() <= crit) {
                out.push(Block { x, y, side });
            }
        }
    }
    Ok(out)
}

/// Non-overlapping constant blocks.
///
/// Tiles at `initial_block`, halving the side until `min_regions` blocks pass.
/// If no side gets there, the side with the most accepted blocks wins (larger
/// side on ties).
pub fn detect_constant_regions(image: &GrayImage, cfg: &HomogeneityTestConfig) -> Result<Vec<Block>> {
    cfg.validate()?;
    if image.width() < cfg.min_block || image.height() < cfg.min_block {
        return Err(Error::InvalidSample(format!(
            "image {}x{} is smaller than the minimum block {}",
            image.width(),
            image.height(),
            cfg.min_block
        )));
    }
    let crit = cfg.critical_value();
    let mut best: Vec<Block> = Vec::new();
    let mut side = cfg.initial_block;
    while side >= cfg.min_block {
        let found = accepted_at(image, side, crit)?;
        if found.len() >= cfg.min_regions {
            return Ok(found);
        }
        if found.len() > best.len() {
            best = found;
        }
        side /= 2;
    }
    if best.is_empty() {
        Err(Error::NoConstantRegions)
    } else {
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub block: Block,
    pub nu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseAggregate {
    pub nu_arith: f64,
    pub nu_geom: f64,
    pub sigma_arith: f64,
    pub sigma_geom: f64,
}

impl NoiseAggregate {
    fn from_estimates(est: &[BlockEstimate]) -> Option<Self> {
        if est.is_empty() {
            return None;
        }
        let n = est.len() as f64;
        let arith = |f: fn(&BlockEstimate) -> f64| est.iter().map(f).sum::<f64>() / n;
        let geom = |f: fn(&BlockEstimate) -> f64| (est.iter().map(|e| f(e).ln()).sum::<f64>() / n).exp();
        Some(NoiseAggregate {
            nu_arith: arith(|e| e.nu),
            nu_geom: geom(|e| e.nu),
            sigma_arith: arith(|e| e.sigma),
            sigma_geom: geom(|e| e.sigma),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Accepted constant blocks, whether or not their fit succeeded.
    pub blocks: Vec<Block>,
    pub per_block: Vec<BlockEstimate>,
    pub aggregate: Option<NoiseAggregate>,
    /// Blocks whose fit errored or did not converge to a finite ν.
    pub failed: usize,
    /// Set when no accepted block produced an estimate.
    pub degenerate: bool,
}

/// Fit one block's pixels with MMF in one dimension; `None` on failure.
pub fn fit_block(image: &GrayImage, block: Block, fit_cfg: &FitConfig) -> Option<BlockEstimate> {
    let points: Vec<Vec<f64>> = image
        .block(block.x, block.y, block.side)
        .into_iter()
        .flatten()
        .map(|p| vec![p])
        .collect();
    let data = WeightedSample::uniform(points).ok()?;
    let res = fit(AlgorithmKind::Mmf, &data, fit_cfg).ok()?;
    if res.status != FitStatus::Converged {
        return None;
    }
    let nu = res.params.nu;
    let sigma = res.params.sigma.matrix()[(0, 0)].sqrt();
    (nu.is_finite() && nu > 0.0 && sigma.is_finite() && sigma > 0.0).then_some(BlockEstimate { block, nu, sigma })
}

/// Detect constant blocks, fit each, and average the estimates.
pub fn estimate_noise(image: &GrayImage, cfg: &HomogeneityTestConfig, fit_cfg: &FitConfig) -> Result<RegionReport> {
    fit_cfg.validate()?;
    let blocks = detect_constant_regions(image, cfg)?;
    Ok(report_from_fits(blocks.clone(), blocks.iter().map(|&b| fit_block(image, b, fit_cfg)).collect()))
}

/// Assemble a report from per-block fit outcomes aligned with `blocks`.
pub fn report_from_fits(blocks: Vec<Block>, fits: Vec<Option<BlockEstimate>>) -> RegionReport {
    let failed = fits.iter().filter(|f| f.is_none()).count();
    let per_block: Vec<BlockEstimate> = fits.into_iter().flatten().collect();
    let aggregate = NoiseAggregate::from_estimates(&per_block);
    RegionReport {
        blocks,
        degenerate: per_block.is_empty(),
        per_block,
        aggregate,
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_gradient_blocks() {
        let flat = vec![vec![7.0; 8]; 8];
        assert_eq!(block_z_scores(&flat).unwrap(), [0.0; 4]);
        assert!(test_block_constant(&flat, 0.05).unwrap());
        let ramp: Vec<Vec<f64>> = (0..8).map(|r| (0..8).map(|c| (r * 8 + c) as f64).collect()).collect();
        let z = block_z_scores(&ramp).unwrap();
        assert!(z[0] > 5.0 && z[1] > 5.0, "{z:?}");
        assert!(!test_block_constant(&ramp, 0.05).unwrap());
        assert!(block_z_scores(&[vec![1.0]]).is_err());
    }

    #[test]
    fn pairing_is_disjoint() {
        let side = 5;
        let block: Vec<Vec<f64>> = (0..side).map(|r| (0..side).map(|c| (r * side + c) as f64).collect()).collect();
        for (a, b) in neighbour_pairs(&block) {
            assert_eq!(a.len(), b.len());
            let mut all: Vec<f64> = a.iter().chain(&b).copied().collect();
            all.sort_by(f64::total_cmp);
            all.dedup();
            assert_eq!(all.len(), 2 * a.len());
        }
    }

    #[test]
    fn config_checks() {
        assert!(HomogeneityTestConfig::default().validate().is_ok());
        let bad = HomogeneityTestConfig { min_block: 12, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = HomogeneityTestConfig { alpha_level: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let c = HomogeneityTestConfig::default().critical_value();
        assert!((c - 1.959963984540054).abs() < 1e-9);
    }
}
