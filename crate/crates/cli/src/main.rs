use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dtc_core::bench::{self, Cell, ExperimentPlan, Hyperparams, Method, Source};
use dtc_core::data::{self, MaskSpec, SynthSpec};
use dtc_core::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "dtc", version, about = "Discrete-aware low-rank tensor completion benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Complete one masked tensor and report its NMSE.
    Complete {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dalrtc")]
        method: Method,
        #[arg(long, default_value_t = 0.6)]
        ratio: f64,
        /// Record the objective in the trace.
        #[arg(long)]
        objective: bool,
    },
    /// Run every method over a grid of observation ratios.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', default_value = "dalrtc,silrtc,tmac")]
        method: Vec<Method>,
        /// Ratio grid as start:stop:step.
        #[arg(long, default_value = "0.2:0.6:0.1")]
        ratios: String,
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Emit the per-iteration trace of one solve.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "dalrtc")]
        method: Method,
        #[arg(long, default_value_t = 0.6)]
        ratio: f64,
        #[arg(long)]
        objective: bool,
    },
    /// Write a synthetic discrete low-rank tensor.
    Synth {
        #[arg(long, value_delimiter = ',', default_value = "20,20,3")]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "2,2,2")]
        ranks: Vec<usize>,
        #[arg(long, default_value_t = 8)]
        levels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// PNG image or tensor file.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 65.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    /// Mode weights, comma-separated.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// TMac ranks, comma-separated.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// SiLRTC penalties, comma-separated.
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    tmax: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long)]
    round_output: bool,
    /// Disable Soft-Impute momentum.
    #[arg(long)]
    no_accel: bool,
    /// Alphabet {0, …, levels − 1} for tensor-file inputs.
    #[arg(long, default_value_t = 256)]
    levels: usize,
    /// Observe whole pixels (fibres along the last mode).
    #[arg(long)]
    pixel_aligned: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn source(&self) -> Source {
        let is_png = self
            .input
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            Source::Image(self.input.clone())
        } else {
            Source::Tensor(self.input.clone())
        }
    }

    fn hyper(&self, track_objective: bool) -> Hyperparams {
        Hyperparams {
            alpha: self.alpha,
            lambda: self.lambda,
            zeta: self.zeta,
            mode_weights: self.gamma.clone(),
            ranks: self.ranks.clone(),
            penalties: self.beta.clone(),
            t_max: self.tmax,
            eps: self.eps,
            round_output: self.round_output,
            accelerated: !self.no_accel,
            track_objective,
        }
    }
}

fn parse_ratios(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidArgument(format!("ratio grid must be start:stop:step, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| bad())?;
    }
    bench::ratio_grid(v[0], v[1], v[2])
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// One solve; returns the outcome with the mask used.
fn single(common: &Common, method: Method, ratio: f64, objective: bool) -> Result<bench::CellOutcome> {
    let instance = common.source().load(common.levels)?;
    let spec = MaskSpec {
        ratio,
        seed: common.seed,
        pixel_aligned: common.pixel_aligned,
    };
    let mask = data::sample_mask(instance.truth.shape(), &spec)?;
    let hyper = common.hyper(objective);
    let outcome = bench::run_completion(&Cell {
        method,
        truth: &instance.truth,
        alphabet: &instance.alphabet,
        mask: &mask,
        hyper: &hyper,
        ratio,
        rep: 0,
        seed: common.seed,
    })?;
    if let Some(dir) = &common.out_dir {
        create_dir(dir)?;
        bench::write_trace_csv(&outcome.trace, dir.join("trace.csv"))?;
        if instance.is_image {
            data::save_image(&outcome.estimate, dir.join("reconstruction.png"))?;
        } else {
            data::tensor_save(&outcome.estimate, dir.join("reconstruction.dtct"))?;
        }
        data::mask_save(&mask, dir.join("mask.dtcm"))?;
    }
    Ok(outcome)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Complete { common, method, ratio, objective } => {
            let outcome = single(&common, method, ratio, objective)?;
            let report = bench::NmseReport { rows: vec![outcome.row] };
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Convergence { common, method, ratio, objective } => {
            let outcome = single(&common, method, ratio, objective)?;
            print!("{}", bench::trace_csv(&outcome.trace));
            eprintln!(
                "{method}: {} iterations, final nmse {}",
                outcome.row.iterations, outcome.row.nmse
            );
            Ok(())
        }
        Command::Sweep { common, method, ratios, reps } => {
            let plan = ExperimentPlan {
                source: common.source(),
                methods: method,
                ratios: parse_ratios(&ratios)?,
                hyper: common.hyper(false),
                reps,
                base_seed: common.seed,
                levels: common.levels,
                pixel_aligned: common.pixel_aligned,
                out_dir: common.out_dir.clone(),
            };
            let outcome = bench::run_sweep(&plan)?;
            if common.out_dir.is_none() {
                print!("{}", outcome.report.to_csv());
            }
            for &m in &plan.methods {
                for &r in &plan.ratios {
                    if let Some(med) = outcome.report.median_nmse(m, r) {
                        eprintln!("{m} ratio {r}: median nmse {med:.6}");
                    }
                }
            }
            for failure in &outcome.failures {
                eprintln!("cell failed: {failure}");
            }
            match outcome.failures.into_iter().next() {
                Some(first) => Err(first),
                None => Ok(()),
            }
        }
        Command::Synth { dims, ranks, levels, seed, output } => {
            let spec = SynthSpec { dims, ranks, levels, seed };
            let t = data::synthesize(&spec)?;
            data::tensor_save(&t, &output)?;
            eprintln!("wrote {} tensor to {}", t.shape(), output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
