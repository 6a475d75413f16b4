//! Experiment harness: NMSE, single completions and observation-ratio sweeps.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{self, MaskSpec, SynthSpec};
use crate::discrete::Alphabet;
use crate::error::{Error, Result};
use crate::solvers::{
    self, Completion, ConvergenceTrace, SilrtcConfig, SoftImputeConfig, SolverConfig, TmacConfig,
    TraceOptions,
};
use crate::tensor::{mask_project, DenseTensor, ObservationMask, Shape};

/// Header of the sweep report.
pub const REPORT_HEADER: &str = "method,ratio,rep,seed,nmse,iterations,ms";
/// Header of per-iteration trace files.
pub const TRACE_HEADER: &str = "iter,rel_change,objective,nmse";

/// `‖estimate − truth‖²_F / ‖truth‖²_F`.
pub fn nmse(estimate: &DenseTensor, truth: &DenseTensor) -> Result<f64> {
    estimate.check_same_shape(truth.shape())?;
    let denom = truth.norm_sq();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("ground truth has zero norm".into()));
    }
    Ok(estimate.dist_sq(truth) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Dalrtc,
    Silrtc,
    Tmac,
    SoftImpute,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dalrtc, Method::Silrtc, Method::Tmac, Method::SoftImpute];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Dalrtc => "dalrtc",
            Method::Silrtc => "silrtc",
            Method::Tmac => "tmac",
            Method::SoftImpute => "soft-impute",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Solver hyperparameters shared across a plan. `None` fields fall back to
/// per-method defaults derived from the tensor shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub alpha: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub mode_weights: Option<Vec<f64>>,
    /// TMac ranks; defaults to `max(2, round(0.1 · I_n))` capped by the mode size.
    pub ranks: Option<Vec<usize>>,
    /// SiLRTC penalties; defaults to `10 γ_n`.
    pub penalties: Option<Vec<f64>>,
    pub t_max: usize,
    pub eps: f64,
    pub round_output: bool,
    /// Soft-Impute momentum.
    pub accelerated: bool,
    /// Record the full objective where it costs extra SVDs.
    pub track_objective: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            lambda: 65.0,
            zeta: 0.5,
            mode_weights: None,
            ranks: None,
            penalties: None,
            t_max: 500,
            eps: 1e-5,
            round_output: false,
            accelerated: true,
            track_objective: false,
        }
    }
}

impl Hyperparams {
    fn weights(&self, order: usize) -> Vec<f64> {
        self.mode_weights
            .clone()
            .unwrap_or_else(|| solvers::uniform_weights(order))
    }

    pub fn default_ranks(shape: &Shape) -> Vec<usize> {
        shape
            .dims()
            .iter()
            .map(|&d| {
                let cap = d.min(shape.numel() / d);
                ((0.1 * d as f64).round() as usize).max(2).min(cap)
            })
            .collect()
    }
}

/// Where the ground truth comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Image(PathBuf),
    Tensor(PathBuf),
    Synthetic(SynthSpec),
}

/// Ground truth with its alphabet.
#[derive(Debug, Clone)]
pub struct Instance {
    pub truth: DenseTensor,
    pub alphabet: Alphabet,
    pub is_image: bool,
}

impl Source {
    /// Loads the ground truth. Images use `{0, …, 255}`; tensor files use
    /// `{0, …, levels − 1}`.
    pub fn load(&self, levels: usize) -> Result<Instance> {
        match self {
            Source::Image(path) => Ok(Instance {
                truth: data::load_image(path)?.tensor,
                alphabet: Alphabet::rgb8(),
                is_image: true,
            }),
            Source::Tensor(path) => Ok(Instance {
                truth: data::tensor_load(path)?,
                alphabet: Alphabet::integer_levels(levels)?,
                is_image: false,
            }),
            Source::Synthetic(spec) => Ok(Instance {
                truth: data::synthesize(spec)?,
                alphabet: spec.alphabet()?,
                is_image: false,
            }),
        }
    }
}

/// One solve of one method on one mask.
#[derive(Debug, Clone, Copy)]
pub struct Cell<'a> {
    pub method: Method,
    pub truth: &'a DenseTensor,
    pub alphabet: &'a Alphabet,
    pub mask: &'a ObservationMask,
    pub hyper: &'a Hyperparams,
    pub ratio: f64,
    pub rep: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmseRow {
    pub method: Method,
    pub ratio: f64,
    pub rep: usize,
    pub seed: u64,
    pub nmse: f64,
    pub iterations: usize,
    pub ms: f64,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub estimate: DenseTensor,
    pub trace: ConvergenceTrace,
    pub row: NmseRow,
}

/// Runs `cell.method` on `P_Ω(truth)` and scores the full-tensor NMSE.
pub fn run_completion(cell: &Cell<'_>) -> Result<CellOutcome> {
    let wrap = |source: Error| Error::Cell {
        method: cell.method.to_string(),
        ratio: cell.ratio,
        seed: cell.seed,
        source: Box::new(source),
    };
    let started = Instant::now();
    let completion = solve(cell).map_err(wrap)?;
    let ms = started.elapsed().as_secs_f64() * 1e3;
    let score = nmse(&completion.estimate, cell.truth).map_err(wrap)?;
    Ok(CellOutcome {
        row: NmseRow {
            method: cell.method,
            ratio: cell.ratio,
            rep: cell.rep,
            seed: cell.seed,
            nmse: score,
            iterations: completion.trace.iterations(),
            ms,
        },
        estimate: completion.estimate,
        trace: completion.trace,
    })
}

fn solve(cell: &Cell<'_>) -> Result<Completion> {
    let h = cell.hyper;
    let observed = mask_project(cell.truth, cell.mask, true)?;
    let shape = cell.truth.shape();
    let order = shape.order();
    let options = TraceOptions {
        truth: Some(cell.truth),
        objective: h.track_objective,
    };
    match cell.method {
        Method::Dalrtc => {
            let cfg = SolverConfig {
                lambda: h.lambda,
                zeta: h.zeta,
                alpha: h.alpha,
                mode_weights: h.weights(order),
                t_max: h.t_max,
                eps: h.eps,
                seed: cell.seed,
                round_output: h.round_output,
            };
            solvers::dalrtc(&observed, cell.mask, cell.alphabet, &cfg, options)
        }
        Method::Silrtc => {
            let mode_weights = h.weights(order);
            let penalties = h
                .penalties
                .clone()
                .unwrap_or_else(|| mode_weights.iter().map(|g| 10.0 * g).collect());
            let cfg = SilrtcConfig {
                mode_weights,
                penalties,
                t_max: h.t_max,
                eps: h.eps,
            };
            solvers::silrtc(&observed, cell.mask, &cfg, options)
        }
        Method::Tmac => {
            let mut cfg = TmacConfig::new(
                h.ranks.clone().unwrap_or_else(|| Hyperparams::default_ranks(shape)),
            );
            cfg.mode_weights = h.weights(order);
            cfg.t_max = h.t_max;
            cfg.eps = h.eps;
            solvers::tmac(&observed, cell.mask, &cfg, options)
        }
        Method::SoftImpute => {
            let cfg = SoftImputeConfig {
                lambda: h.lambda,
                accelerated: h.accelerated,
                t_max: h.t_max,
                eps: h.eps,
            };
            solvers::soft_impute(&observed, cell.mask, &cfg, options)
        }
    }
}

/// Rows of a sweep, kept sorted by (method, ratio, rep).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NmseReport {
    pub rows: Vec<NmseRow>,
}

impl NmseReport {
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.method
                .cmp(&b.method)
                .then(a.ratio.total_cmp(&b.ratio))
                .then(a.rep.cmp(&b.rep))
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.3}",
                r.method, r.ratio, r.rep, r.seed, r.nmse, r.iterations, r.ms
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Median NMSE of `method` at `ratio` over repetitions.
    pub fn median_nmse(&self, method: Method, ratio: f64) -> Option<f64> {
        let mut values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.ratio == ratio)
            .map(|r| r.nmse)
            .collect();
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        let mid = values.len() / 2;
        Some(if values.len() % 2 == 1 {
            values[mid]
        } else {
            0.5 * (values[mid - 1] + values[mid])
        })
    }
}

pub fn trace_csv(trace: &ConvergenceTrace) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iteration,
            r.rel_change,
            opt(r.objective),
            opt(r.nmse)
        );
    }
    out
}

pub fn write_trace_csv(trace: &ConvergenceTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trace_csv(trace)).map_err(|e| Error::io(path, e))
}

/// Observation ratios `start, start + step, …` up to and including `stop`.
pub fn ratio_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    let valid = |r: f64| r > 0.0 && r <= 1.0;
    if !valid(start) || !valid(stop) || stop < start || !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad ratio grid {start}:{stop}:{step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mask seed for (ratio index, repetition). Every method sees the same mask
/// in a given cell so comparisons are paired.
pub fn cell_seed(base_seed: u64, ratio_index: usize, rep: usize) -> u64 {
    mix(mix(mix(base_seed) ^ ratio_index as u64) ^ rep as u64)
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub source: Source,
    pub methods: Vec<Method>,
    pub ratios: Vec<f64>,
    pub hyper: Hyperparams,
    pub reps: usize,
    pub base_seed: u64,
    /// Alphabet size for tensor-file sources.
    pub levels: usize,
    pub pixel_aligned: bool,
    /// Where to write `report.csv`, traces and reconstructions.
    pub out_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("at least one repetition is required".into()));
        }
        if self.ratios.is_empty() || self.ratios.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "ratios must lie in (0, 1], got {:?}",
                self.ratios
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub report: NmseReport,
    /// Cells that failed; the remaining cells still ran.
    pub failures: Vec<Error>,
}

fn cell_stem(method: Method, ratio: f64, rep: usize) -> String {
    format!("{method}_ratio{ratio}_rep{rep}")
}

/// Runs every (method, ratio, repetition) cell of `plan`.
///
/// Cells execute in parallel; the report is assembled in a fixed order, so
/// its content does not depend on scheduling.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<SweepOutcome> {
    plan.validate()?;
    let instance = plan.source.load(plan.levels)?;
    let shape = instance.truth.shape().clone();

    let mut masks = Vec::new();
    for (ri, &ratio) in plan.ratios.iter().enumerate() {
        for rep in 0..plan.reps {
            let seed = cell_seed(plan.base_seed, ri, rep);
            let spec = MaskSpec {
                ratio,
                seed,
                pixel_aligned: plan.pixel_aligned,
            };
            masks.push((ratio, rep, seed, data::sample_mask(&shape, &spec)?));
        }
    }

    if let Some(dir) = &plan.out_dir {
        fs::create_dir_all(dir.join("traces")).map_err(|e| Error::io(dir, e))?;
        if instance.is_image {
            fs::create_dir_all(dir.join("recon")).map_err(|e| Error::io(dir, e))?;
        }
    }

    let jobs: Vec<(Method, usize)> = plan
        .methods
        .iter()
        .flat_map(|&m| (0..masks.len()).map(move |k| (m, k)))
        .collect();
    let results: Vec<Result<NmseRow>> = jobs
        .par_iter()
        .map(|&(method, k)| {
            let (ratio, rep, seed, mask) = &masks[k];
            let cell = Cell {
                method,
                truth: &instance.truth,
                alphabet: &instance.alphabet,
                mask,
                hyper: &plan.hyper,
                ratio: *ratio,
                rep: *rep,
                seed: *seed,
            };
            let outcome = run_completion(&cell)?;
            if let Some(dir) = &plan.out_dir {
                let stem = cell_stem(method, *ratio, *rep);
                write_trace_csv(&outcome.trace, dir.join("traces").join(format!("{stem}.csv")))?;
                if instance.is_image {
                    data::save_image(&outcome.estimate, dir.join("recon").join(format!("{stem}.png")))?;
                }
            }
            Ok(outcome.row)
        })
        .collect();

    let mut report = NmseReport::default();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => report.rows.push(row),
            Err(e) => failures.push(e),
        }
    }
    report.sort();
    if let Some(dir) = &plan.out_dir {
        report.write_csv(dir.join("report.csv"))?;
    }
    Ok(SweepOutcome { report, failures })
}
