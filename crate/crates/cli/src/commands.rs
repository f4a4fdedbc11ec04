//! Single-dataset fitting and image noise estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tfit_core::noise::{detect_constant_regions, fit_block, report_from_fits};
use tfit_core::{
    accelerated_fit, AccelConfig, AlgorithmKind, FitConfig, FitResult, FitStatus, GrayImage, HomogeneityTestConfig,
    RegionReport, Scheme,
};

use crate::error::{CliError, CliResult};
use crate::samples::read_samples;
use crate::simulate::status_name;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub algorithm: AlgorithmKind,
    pub scheme: Scheme,
    pub n: usize,
    pub d: usize,
    pub nu: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub iterations: usize,
    pub map_evaluations: usize,
    pub status: String,
    pub final_objective: f64,
    /// Weighted scatter of the centered data when ν diverged.
    pub gaussian_sigma: Option<Vec<Vec<f64>>>,
    pub seconds: f64,
}

impl FitReport {
    fn new(algorithm: AlgorithmKind, scheme: Scheme, n: usize, res: &FitResult) -> Self {
        FitReport {
            algorithm,
            scheme,
            n,
            d: res.params.dim(),
            nu: res.params.nu,
            mu: res.params.mu.clone(),
            sigma: res.params.sigma.matrix().to_rows(),
            iterations: res.iterations,
            map_evaluations: res.map_evaluations,
            status: status_name(res.status).into(),
            final_objective: res.final_objective(),
            gaussian_sigma: res.gaussian_sigma.as_ref().map(|s| s.matrix().to_rows()),
            seconds: res.wall_time.as_secs_f64(),
        }
    }

    /// Process exit code: MaxIters is the only non-zero outcome of a finished fit.
    pub fn exit_code(&self) -> i32 {
        if self.status == status_name(FitStatus::MaxIters) {
            1
        } else {
            0
        }
    }
}

pub fn cmd_fit(
    input: &str,
    algorithm: AlgorithmKind,
    scheme: Scheme,
    cfg: &FitConfig,
    accel: &AccelConfig,
) -> CliResult<FitReport> {
    let data = read_samples(input)?;
    let res = accelerated_fit(algorithm, scheme, &data, cfg, accel)?;
    Ok(FitReport::new(algorithm, scheme, data.len(), &res))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub nu: Vec<f64>,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseOutput {
    pub width: usize,
    pub height: usize,
    pub config: HomogeneityTestConfig,
    pub report: RegionReport,
    pub histogram: Histogram,
}

/// Detection is sequential per side; the per-block fits run in parallel.
pub fn cmd_noise_estimate(image: &GrayImage, cfg: &HomogeneityTestConfig, fit_cfg: &FitConfig) -> CliResult<NoiseOutput> {
    fit_cfg.validate()?;
    let blocks = detect_constant_regions(image, cfg).map_err(|e| match e {
        tfit_core::Error::NoConstantRegions => CliError::NoConstantRegions,
        e => e.into(),
    })?;
    let fits = blocks.par_iter().map(|&b| fit_block(image, b, fit_cfg)).collect();
    let report = report_from_fits(blocks, fits);
    Ok(NoiseOutput {
        width: image.width(),
        height: image.height(),
        config: *cfg,
        histogram: Histogram {
            nu: report.per_block.iter().map(|e| e.nu).collect(),
            sigma: report.per_block.iter().map(|e| e.sigma).collect(),
        },
        report,
    })
}
