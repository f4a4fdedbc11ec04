use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tfit_cli::simulate::write_records;
use tfit_cli::{cmd_fit, cmd_noise_estimate, run_simulation, CliError, CliResult, Method, SigmaSpec, SimulationSpec};
use tfit_core::{AccelConfig, AlgorithmKind, FitConfig, GrayImage, HomogeneityTestConfig, Scheme};

#[derive(Parser)]
#[command(name = "tfit", version, about = "Student-t maximum-likelihood fitting and image noise estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct FitFlags {
    /// Relative-change stopping tolerance.
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Starting degree of freedom.
    #[arg(long, default_value_t = 3.0)]
    nu0: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// ν beyond which the fit is reported as a Gaussian limit.
    #[arg(long, default_value_t = 1e6)]
    nu_max: f64,
}

impl FitFlags {
    fn config(&self, fixed_nu: Option<f64>) -> FitConfig {
        FitConfig {
            tol: self.tol,
            nu0: self.nu0,
            max_outer_iters: self.max_iters,
            nu_max: self.nu_max,
            fixed_nu,
            ..FitConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo comparison of the estimators on sampled data.
    Simulate {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// True degrees of freedom, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,100")]
        nu: Vec<f64>,
        /// Σ = c·I.
        #[arg(long, default_value_t = 1.0, conflicts_with = "sigma")]
        sigma_scale: f64,
        /// Explicit Σ, rows separated by ';' and entries by ','.
        #[arg(long)]
        sigma: Option<String>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "em,aem,mmf,gmmf")]
        algorithms: Vec<AlgorithmKind>,
        #[arg(long, value_delimiter = ',', default_value = "none")]
        schemes: Vec<Scheme>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        fit: FitFlags,
        /// `csv` writes one row per trial and method; `json` the aggregate.
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit one data set given as CSV, one sample per row.
    Fit {
        input: PathBuf,
        #[arg(long, default_value = "gmmf")]
        algorithm: AlgorithmKind,
        #[arg(long, default_value = "none")]
        scheme: Scheme,
        /// Keep ν fixed and estimate location and scatter only.
        #[arg(long)]
        fixed_nu: Option<f64>,
        #[command(flatten)]
        fit: FitFlags,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Estimate Student-t noise parameters of a PGM or CSV image.
    NoiseEstimate {
        image: PathBuf,
        /// Level of each neighbour test.
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 20)]
        min_regions: usize,
        #[arg(long, default_value_t = 64)]
        initial_block: usize,
        #[arg(long, default_value_t = 8)]
        min_block: usize,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_sigma(text: &str) -> CliResult<Vec<Vec<f64>>> {
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Usage(format!("bad --sigma entry '{v}'")))
                })
                .collect()
        })
        .collect()
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match output {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Simulate {
            d,
            n,
            nu,
            sigma_scale,
            sigma,
            trials,
            algorithms,
            schemes,
            seed,
            jobs,
            fit,
            format,
            output,
        } => {
            let sigma = match sigma {
                Some(text) => SigmaSpec::Explicit(parse_sigma(&text)?),
                None => SigmaSpec::ScaledIdentity(sigma_scale),
            };
            let methods = schemes
                .iter()
                .flat_map(|&scheme| algorithms.iter().map(move |&algorithm| Method { algorithm, scheme }))
                .collect();
            let spec = SimulationSpec {
                d,
                n,
                nu_list: nu,
                sigma,
                trials,
                methods,
                seed,
                fit: fit.config(None),
                accel: AccelConfig::default(),
            };
            let report = run_simulation(&spec, jobs)?;
            let bytes = match format {
                Format::Json => to_json(&report),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_records(&report.records, &mut buf).map_err(|e| CliError::Usage(e.to_string()))?;
                    buf
                }
            };
            emit(output.as_deref(), &bytes)?;
            Ok(0)
        }
        Command::Fit {
            input,
            algorithm,
            scheme,
            fixed_nu,
            fit,
            output,
        } => {
            let text = read_text(&input)?;
            let report = cmd_fit(&text, algorithm, scheme, &fit.config(fixed_nu), &AccelConfig::default())?;
            emit(output.as_deref(), &to_json(&report))?;
            Ok(report.exit_code())
        }
        Command::NoiseEstimate {
            image,
            alpha,
            min_regions,
            initial_block,
            min_block,
            jobs,
            output,
        } => {
            let img = GrayImage::read(&image)?;
            let cfg = HomogeneityTestConfig {
                alpha_level: alpha,
                initial_block,
                min_block,
                min_regions,
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let out = pool.install(|| cmd_noise_estimate(&img, &cfg, &FitConfig::default()))?;
            emit(output.as_deref(), &to_json(&out))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("tfit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
