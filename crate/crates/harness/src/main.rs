use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csisa::config::{show_config, ConfigFile, ExperimentConfig};
use csisa::engine::{
    generate_matrix, load_matrix, resolve_matrix, run_trial, sample, trial_seed, write_outputs,
    TrialOutcome,
};
use csisa::error::{exit, HarnessError, Result};
use csisa::histogram::Histogram;
use csisa::record::{format_trace, load_record, save_record};
use csisa::verify::{verify_record, VerifyOptions};

#[derive(Debug, Parser)]
#[command(
    name = "csisa",
    version,
    about = "Instanton search for basis pursuit decoding"
)]
struct Cli {
    /// Print the tolerance table and effective settings, then exit.
    #[arg(long, global = true)]
    show_config: bool,

    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded matrix with orthonormal rows.
    GenMatrix {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Run one search and print its trace.
    RunIsa(ExperimentArgs),
    /// Run many searches and collect the instanton length histogram.
    Sample {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Skip writing per-trial records.
        #[arg(long)]
        no_records: bool,
    },
    /// Re-check a record against a matrix.
    Verify {
        #[arg(long, value_name = "PATH")]
        matrix: PathBuf,
        #[arg(long, value_name = "PATH")]
        record: PathBuf,
        /// Skip rerunning the search from the recorded seed.
        #[arg(long)]
        no_replay: bool,
        /// Skip the dual certificate and sparsest-solution cross-checks.
        #[arg(long)]
        no_oracles: bool,
    },
    /// Draw a histogram CSV as a text bar chart.
    Histogram {
        #[arg(value_name = "CSV")]
        path: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Seed of a generated matrix.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    matrix: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    init_k: Option<usize>,
    /// Trial `i` uses seed `base_seed + i`.
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long)]
    eps_fail: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    feas_tol: Option<f64>,
    #[arg(long)]
    gap_tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl ExperimentArgs {
    fn into_config_file(self, records: Option<bool>) -> ConfigFile {
        ConfigFile {
            rows: self.rows,
            cols: self.cols,
            seed: self.seed,
            matrix: self.matrix,
            trials: self.trials,
            init_k: self.init_k,
            base_seed: self.base_seed,
            workers: self.workers,
            out: self.out,
            eps_fail: self.eps_fail,
            tau: self.tau,
            feas_tol: self.feas_tol,
            gap_tol: self.gap_tol,
            max_iter: self.max_iter,
            records,
        }
    }
}

fn resolve(file: Option<&PathBuf>, flags: ConfigFile) -> Result<ExperimentConfig> {
    let base = match file {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    base.overlay(flags).resolve()
}

fn cmd_gen_matrix(rows: usize, cols: usize, seed: u64, out: &Path) -> Result<u8> {
    let f = generate_matrix(rows, cols, seed)?;
    f.save(out).map_err(|e| match e {
        csisa_core::Error::Io(source) => HarnessError::io(out, source),
        other => other.into(),
    })?;
    let reloaded = load_matrix(out)?;
    println!("wrote {} ({rows}x{cols}, seed {seed})", out.display());
    println!("{}", reloaded.content_hash());
    println!("max |F F^T - I| = {:.3e}", reloaded.max_gram_deviation());
    Ok(exit::SUCCESS)
}

fn cmd_run_isa(cfg: &ExperimentConfig) -> Result<u8> {
    let f = resolve_matrix(&cfg.matrix)?;
    cfg.validate(f.cols(), f.rows())?;
    let init_k = cfg.effective_init_k(f.rows());
    let seed = trial_seed(cfg.base_seed, 0);
    match run_trial(&f, seed, init_k, &cfg.tolerances)? {
        TrialOutcome::Instanton(record) => {
            print!("{}", format_trace(&record));
            if let Some(path) = &cfg.output_dir {
                save_record(&record, path)?;
                println!("record written to {}", path.display());
            }
            Ok(exit::SUCCESS)
        }
        TrialOutcome::Discarded => {
            println!("discarded: basis pursuit decodes the start (seed {seed}, init_k {init_k})");
            Ok(exit::DISCARDED_INIT)
        }
        TrialOutcome::Failed(msg) => Err(HarnessError::TrialsFailed(vec![(0, msg)])),
    }
}

fn cmd_sample(cfg: &ExperimentConfig) -> Result<u8> {
    let f = resolve_matrix(&cfg.matrix)?;
    let report = sample(&f, cfg)?;
    let s = &report.summary;
    if let Some(dir) = &cfg.output_dir {
        let written = write_outputs(&report, dir, cfg.write_records)?;
        println!("wrote {} file(s) under {}", written.len(), dir.display());
    }
    println!(
        "{} trials on {}x{}: {} instantons, {} discarded, {} failed",
        s.trials, s.rows, s.cols, s.instantons, s.discarded, s.failed
    );
    match s.min_length {
        Some(m) => println!("shortest instanton: {m}"),
        None => println!("shortest instanton: none found"),
    }
    println!(
        "mean trial time: {:.3} s",
        report.mean_trial_time.as_secs_f64()
    );
    print!("{}", report.histogram.render());
    if s.failed_trials.is_empty() {
        Ok(exit::SUCCESS)
    } else {
        Err(HarnessError::TrialsFailed(s.failed_trials.clone()))
    }
}

fn cmd_verify(matrix: &Path, record: &Path, opts: &VerifyOptions) -> Result<u8> {
    let f = load_matrix(matrix)?;
    let r = load_record(record)?;
    let report = verify_record(&f, &r, opts)?;
    print!("{report}");
    Ok(if report.passed() {
        exit::SUCCESS
    } else {
        exit::VERIFICATION_FAILURE
    })
}

fn run(cli: Cli) -> Result<u8> {
    let config_file = cli.config.as_ref();
    let Some(command) = cli.command else {
        if cli.show_config {
            print!("{}", show_config(None));
            return Ok(exit::SUCCESS);
        }
        return Err(HarnessError::Usage(
            "a subcommand is required; see --help".into(),
        ));
    };
    match command {
        Command::GenMatrix {
            rows,
            cols,
            seed,
            out,
        } => {
            if cli.show_config {
                print!("{}", show_config(None));
                return Ok(exit::SUCCESS);
            }
            cmd_gen_matrix(rows, cols, seed, &out)
        }
        Command::RunIsa(exp) => {
            if exp.trials.is_some_and(|t| t != 1) {
                return Err(HarnessError::Usage("run-isa runs exactly one trial".into()));
            }
            let cfg = resolve(config_file, exp.into_config_file(None))?;
            if cli.show_config {
                print!("{}", show_config(Some(&cfg)));
                return Ok(exit::SUCCESS);
            }
            cmd_run_isa(&cfg)
        }
        Command::Sample { exp, no_records } => {
            let cfg = resolve(
                config_file,
                exp.into_config_file(no_records.then_some(false)),
            )?;
            if cli.show_config {
                print!("{}", show_config(Some(&cfg)));
                return Ok(exit::SUCCESS);
            }
            cmd_sample(&cfg)
        }
        Command::Verify {
            matrix,
            record,
            no_replay,
            no_oracles,
        } => {
            let opts = VerifyOptions {
                replay: !no_replay,
                oracles: !no_oracles,
                ..VerifyOptions::default()
            };
            cmd_verify(&matrix, &record, &opts)
        }
        Command::Histogram { path } => {
            print!("{}", Histogram::load(&path)?.render());
            Ok(exit::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                exit::USAGE
            } else {
                exit::SUCCESS
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
