//! Monte Carlo harness: sample, fit with every configured method, summarize.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tfit_core::linalg::cholesky;
use tfit_core::model::sample_with_rng;
use tfit_core::{
    accelerated_fit, AccelConfig, AlgorithmKind, Error, FitConfig, FitStatus, Matrix, Scheme, StudentTParams,
    WeightedSample,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSpec {
    ScaledIdentity(f64),
    Explicit(Vec<Vec<f64>>),
}

impl SigmaSpec {
    pub fn matrix(&self, d: usize) -> Result<Matrix, Error> {
        match self {
            SigmaSpec::ScaledIdentity(c) => Ok(Matrix::identity(d).scaled(*c)),
            SigmaSpec::Explicit(rows) => {
                let m = Matrix::from_rows(rows)?;
                if m.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: m.dim() });
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub algorithm: AlgorithmKind,
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub d: usize,
    pub n: usize,
    pub nu_list: Vec<f64>,
    pub sigma: SigmaSpec,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub fit: FitConfig,
    pub accel: AccelConfig,
}

impl SimulationSpec {
    /// d = 2, n = 1000, Σ = I, 100 trials.
    pub fn new(nu_list: Vec<f64>, methods: Vec<Method>) -> Self {
        SimulationSpec {
            d: 2,
            n: 1000,
            nu_list,
            sigma: SigmaSpec::ScaledIdentity(1.0),
            trials: 100,
            methods,
            seed: 0,
            fit: FitConfig::default(),
            accel: AccelConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.d == 0 {
            return bad("d must be positive");
        }
        if self.n < self.d + 1 {
            return bad("need n >= d + 1");
        }
        if self.trials == 0 {
            return bad("need at least one trial");
        }
        if self.methods.is_empty() || self.nu_list.is_empty() {
            return bad("need at least one method and one nu");
        }
        if self.nu_list.iter().any(|&nu| !(nu > 0.0)) {
            return bad("every nu must be positive");
        }
        self.fit.validate()?;
        cholesky(&self.sigma.matrix(self.d)?)?;
        Ok(())
    }

    /// RNG of one trial; independent of scheduling.
    pub fn trial_rng(&self, nu_index: usize, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((nu_index as u64) << 32) | trial as u64);
        rng
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial: usize,
    pub algo: AlgorithmKind,
    pub scheme: Scheme,
    pub nu_true: f64,
    pub nu_hat: f64,
    pub iterations: usize,
    pub map_evaluations: usize,
    pub status: String,
    pub seconds: f64,
    #[serde(rename = "final_L")]
    pub final_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanStd { mean, std: var.sqrt() }
    }
}

/// Aggregate over all trials of one (method, ν) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub algo: AlgorithmKind,
    pub scheme: Scheme,
    pub nu_true: f64,
    pub trials: usize,
    pub iterations: MeanStd,
    pub map_evaluations: MeanStd,
    pub seconds: MeanStd,
    pub converged: usize,
    pub max_iters: usize,
    pub gaussian_limit: usize,
    pub failed: usize,
    /// ν̂ of every trial, for histograms.
    pub nu_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub spec: SimulationSpec,
    pub cells: Vec<CellSummary>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl SimulationReport {
    pub fn cell(&self, algo: AlgorithmKind, scheme: Scheme, nu_true: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.algo == algo && c.scheme == scheme && c.nu_true == nu_true)
    }
}

pub fn status_name(status: FitStatus) -> &'static str {
    match status {
        FitStatus::Converged => "converged",
        FitStatus::MaxIters => "max_iters",
        FitStatus::GaussianLimit => "gaussian_limit",
    }
}

fn run_trial(spec: &SimulationSpec, nu_index: usize, trial: usize) -> Vec<TrialRecord> {
    let nu = spec.nu_list[nu_index];
    let sigma = cholesky(&spec.sigma.matrix(spec.d).expect("validated")).expect("validated");
    let truth = StudentTParams::new(nu, vec![0.0; spec.d], sigma).expect("validated");
    let mut rng = spec.trial_rng(nu_index, trial);
    let points = sample_with_rng(&truth, spec.n, &mut rng);
    let data = WeightedSample::uniform(points);
    spec.methods
        .iter()
        .map(|m| {
            let outcome = data
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|data| accelerated_fit(m.algorithm, m.scheme, data, &spec.fit, &spec.accel));
            let base = TrialRecord {
                seed: spec.seed,
                trial,
                algo: m.algorithm,
                scheme: m.scheme,
                nu_true: nu,
                nu_hat: f64::NAN,
                iterations: 0,
                map_evaluations: 0,
                status: String::new(),
                seconds: 0.0,
                final_l: f64::NAN,
            };
            match outcome {
                Ok(res) => TrialRecord {
                    nu_hat: res.params.nu,
                    iterations: res.iterations,
                    map_evaluations: res.map_evaluations,
                    status: status_name(res.status).into(),
                    seconds: res.wall_time.as_secs_f64(),
                    final_l: res.final_objective(),
                    ..base
                },
                Err(e) => TrialRecord {
                    status: format!("error: {e}"),
                    ..base
                },
            }
        })
        .collect()
}

fn summarize(spec: &SimulationSpec, records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for &nu in &spec.nu_list {
        for m in &spec.methods {
            let rows: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.nu_true == nu && r.algo == m.algorithm && r.scheme == m.scheme)
                .collect();
            let col = |f: fn(&TrialRecord) -> f64| MeanStd::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>());
            let count = |s: &str| rows.iter().filter(|r| r.status == s).count();
            cells.push(CellSummary {
                algo: m.algorithm,
                scheme: m.scheme,
                nu_true: nu,
                trials: rows.len(),
                iterations: col(|r| r.iterations as f64),
                map_evaluations: col(|r| r.map_evaluations as f64),
                seconds: col(|r| r.seconds),
                converged: count("converged"),
                max_iters: count("max_iters"),
                gaussian_limit: count("gaussian_limit"),
                failed: rows.iter().filter(|r| r.status.starts_with("error")).count(),
                nu_hat: rows.iter().map(|r| r.nu_hat).collect(),
            });
        }
    }
    cells
}

/// Run every trial on a pool of `jobs` threads (0 = rayon default).
pub fn run_simulation(spec: &SimulationSpec, jobs: usize) -> CliResult<SimulationReport> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let tasks: Vec<(usize, usize)> = (0..spec.nu_list.len())
        .flat_map(|k| (0..spec.trials).map(move |t| (k, t)))
        .collect();
    let records: Vec<TrialRecord> = pool.install(|| {
        tasks
            .par_iter()
            .flat_map_iter(|&(k, t)| run_trial(spec, k, t))
            .collect()
    });
    Ok(SimulationReport {
        spec: spec.clone(),
        cells: summarize(spec, &records),
        records,
    })
}

pub fn write_records<W: std::io::Write>(records: &[TrialRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<TrialRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SimulationSpec {
        let methods = vec![
            Method { algorithm: AlgorithmKind::Mmf, scheme: Scheme::None },
            Method { algorithm: AlgorithmKind::Gmmf, scheme: Scheme::Squarem },
        ];
        SimulationSpec { n: 60, trials: 3, seed: 9, ..SimulationSpec::new(vec![1.0, 4.0], methods) }
    }

    #[test]
    fn schedule_does_not_change_results() {
        let a = run_simulation(&tiny(), 1).unwrap();
        let b = run_simulation(&tiny(), 4).unwrap();
        assert_eq!(a.records.len(), 12);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((x.trial, x.nu_hat, x.iterations, x.final_l), (y.trial, y.nu_hat, y.iterations, y.final_l));
        }
        assert_eq!(a.cells.len(), 4);
        assert!(a.cells.iter().all(|c| c.trials == 3 && c.nu_hat.len() == 3));
    }

    #[test]
    fn records_round_trip_through_csv() {
        let report = run_simulation(&tiny(), 2).unwrap();
        let mut buf = Vec::new();
        write_records(&report.records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("seed,trial,algo,scheme,nu_true,nu_hat,iterations,map_evaluations,status,seconds,final_L"));
        assert_eq!(read_records(&buf[..]).unwrap(), report.records);
    }

    #[test]
    fn invalid_specs() {
        assert!(SimulationSpec { n: 2, ..tiny() }.validate().is_err());
        assert!(SimulationSpec { trials: 0, ..tiny() }.validate().is_err());
        assert!(SimulationSpec { sigma: SigmaSpec::ScaledIdentity(-1.0), ..tiny() }.validate().is_err());
        let s = SimulationSpec { sigma: SigmaSpec::Explicit(vec![vec![1.0]]), ..tiny() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
        assert_eq!(MeanStd::of(&[5.0]).std, 0.0);
    }
}
