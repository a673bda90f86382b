//! Command-line front end for `fracmild`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fracmild::config::{parse_problem, problem_to_string};
use fracmild::heat::{build_heat_example, HeatExampleParams};
use fracmild::problem::{certify_impulse_constants, ConstantsSource};
use fracmild::solver::fmt_f64;
use fracmild::stability::{write_sweep_csv, StabilityExperiment};
use fracmild::{
    a_priori_bound, check_existence_condition, check_apriori_condition, check_stability_condition, ml_scalar,
    ConditionReport, Error, GridSpec, MLOrder, Perturbation, PicardConfig, Prehistory, ProblemSpec,
};
use sha2::{Digest, Sha256};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  1  I/O failure (unreadable input, unwritable output directory)
  2  parse or usage error (malformed or unknown configuration keys, bad arguments)
  3  hypothesis violation (H1)-(H4) or divergent kernel integral
  4  Picard iteration did not converge on at least one path
  5  a checked condition is not satisfied";

#[derive(Debug, Parser)]
#[command(name = "fracmild", version, about = "Mild solutions of stochastic impulsive fractional evolution equations with infinite delay", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem on a uniform grid and write trajectories.
    #[command(after_help = EXIT_CODES)]
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        /// Overrides the seed in the problem file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Number of noise paths, each written to its own table.
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// Add a node halfway into the first step after each impulse.
        #[arg(long)]
        refined: bool,
        #[command(flatten)]
        picard: PicardArgs,
    },
    /// Evaluate the existence, a-priori and stability conditions.
    #[command(after_help = EXIT_CODES)]
    Check {
        #[arg(long)]
        problem: PathBuf,
        /// Also write the reports as `conditions.csv` plus a manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired mean-square stability sweep over perturbation sizes.
    ///
    /// The perturbation direction is the initial data itself (`phi`, `x1`),
    /// or a unit constant history in the first mode when both vanish.
    #[command(after_help = EXIT_CODES)]
    Stability {
        #[arg(long)]
        problem: PathBuf,
        /// `a:b:n`, n log-spaced sizes from a to b.
        #[arg(long, value_parser = parse_delta_grid)]
        delta_grid: DeltaGrid,
        #[arg(long, default_value_t = 500)]
        paths: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        picard: PicardArgs,
    },
    /// Evaluate `E_{q,beta}(z)`.
    #[command(after_help = EXIT_CODES)]
    MlEval {
        #[arg(long)]
        q: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Write the stochastic heat example as a problem file.
    #[command(after_help = EXIT_CODES)]
    ExampleHeat {
        #[arg(long)]
        emit: PathBuf,
        #[arg(long, default_value_t = 8)]
        modes: usize,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct PicardArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
}

impl From<PicardArgs> for PicardConfig {
    fn from(a: PicardArgs) -> Self {
        PicardConfig {
            tolerance: a.tolerance,
            max_iterations: a.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGrid {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

impl DeltaGrid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.from];
        }
        let (a, b) = (self.from.ln(), self.to.ln());
        (0..self.count)
            .map(|k| {
                if k == 0 {
                    self.from
                } else if k + 1 == self.count {
                    self.to
                } else {
                    (a + (b - a) * k as f64 / (self.count - 1) as f64).exp()
                }
            })
            .collect()
    }
}

pub fn parse_delta_grid(s: &str) -> Result<DeltaGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("expected a:b:n, got `{s}`"));
    };
    let from: f64 = a.parse().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let to: f64 = b.parse().map_err(|e| format!("bad end `{b}`: {e}"))?;
    let count: usize = n.parse().map_err(|e| format!("bad count `{n}`: {e}"))?;
    if !(from > 0.0 && to >= from && to.is_finite()) || count == 0 {
        return Err("need 0 < a <= b and n >= 1".into());
    }
    Ok(DeltaGrid { from, to, count })
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0} of {1} solves did not converge")]
    NonConvergence(usize, usize),
    #[error("condition not satisfied: {0}")]
    ConditionFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Core(Error::Hypothesis { .. } | Error::Divergent { .. }) => 3,
            CliError::Core(Error::BoundUndefined(_)) => 5,
            CliError::Core(_) => 2,
            CliError::NonConvergence(..) => 4,
            CliError::ConditionFailure(_) => 5,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Problem text and its parsed form.
fn load(path: &Path) -> Result<(String, ProblemSpec), CliError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("cannot read {}", path.display())))?;
    let spec = parse_problem(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok((text, spec))
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(format!("cannot write {}", path.display())))
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(format!("cannot create {}", dir.display())))
}

/// Flat `key = value` record of how the outputs were produced.
pub fn manifest(args: &[String], seed: Option<u64>, config_text: Option<&str>) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "command = {}", args.join(" "));
    if let Some(s) = seed {
        let _ = writeln!(m, "seed = {s}");
    }
    if let Some(text) = config_text {
        let _ = writeln!(m, "config_sha256 = {}", sha256_hex(text));
    }
    let _ = writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"));
    m
}

fn condition_row(out: &mut String, name: &str, r: &ConditionReport) {
    let _ = writeln!(
        out,
        "{name},{},{},{},{}",
        fmt_f64(r.value_a),
        fmt_f64(r.value_b),
        fmt_f64(r.threshold),
        r.satisfied
    );
}

/// Runs `cli`; `args` is the full argument vector, recorded in manifests.
pub fn run<W: Write>(cli: Cli, args: &[String], stdout: &mut W) -> Result<(), CliError> {
    let out_err = io_err("cannot write to stdout");
    match cli.command {
        Command::Solve {
            problem,
            steps,
            seed,
            out,
            paths,
            refined,
            picard,
        } => {
            let (text, mut spec) = load(&problem)?;
            if let Some(s) = seed {
                spec.noise = spec.noise.clone().with_seed(s);
            }
            if paths == 0 {
                return Err(Error::InvalidParameter {
                    name: "paths",
                    reason: "need at least one path".into(),
                }
                .into());
            }
            let solver = fracmild::Solver::new(&spec, &GridSpec::new(spec.horizon, steps).refined(refined))?;
            let runs = solver.solve_paths(0, paths, &picard.into())?;
            prepare_dir(&out)?;
            let mut diag = String::from("path,iterations,converged,final_diff\n");
            let mut failed = 0;
            for (k, (traj, d)) in runs.iter().enumerate() {
                let mut buf = Vec::new();
                traj.write_csv(&mut buf).map_err(io_err("cannot format trajectory"))?;
                write_file(&out, &format!("trajectory_{k:04}.csv"), &buf)?;
                let last = d.diffs.last().copied().unwrap_or(0.0);
                let _ = writeln!(diag, "{k},{},{},{}", d.iterations, d.converged, fmt_f64(last));
                failed += usize::from(!d.converged);
            }
            write_file(&out, "diagnostics.csv", diag.as_bytes())?;
            write_file(&out, "manifest.txt", manifest(args, Some(spec.noise.seed()), Some(&text)).as_bytes())?;
            writeln!(
                stdout,
                "solved {paths} path(s) on {} nodes; outputs in {}",
                solver.grid().len(),
                out.display()
            )
            .map_err(out_err)?;
            if failed > 0 {
                return Err(CliError::NonConvergence(failed, paths));
            }
            Ok(())
        }
        Command::Check { problem, out } => {
            let (text, spec) = load(&problem)?;
            let consts = spec.resolve_constants(400)?;
            let existence = check_existence_condition(&spec, &consts);
            let apriori = check_apriori_condition(&spec, &consts);
            let stability = check_stability_condition(&spec, &consts);
            let mut report = String::new();
            let _ = writeln!(
                report,
                "impulses: {}; constants ({}): M = {}, M_b = {}, Gamma_b = {}, N_b = {}",
                spec.impulses.len(),
                match consts.source {
                    ConstantsSource::Measured => "measured",
                    ConstantsSource::UserSupplied => "user supplied",
                },
                fmt_f64(consts.m),
                fmt_f64(consts.m_b),
                fmt_f64(consts.gamma_b),
                fmt_f64(consts.n_b)
            );
            let line = |name: &str, r: &ConditionReport| {
                format!(
                    "{name}: value = {} (a = {}, b = {}) -> {}\n",
                    fmt_f64(r.value()),
                    fmt_f64(r.value_a),
                    fmt_f64(r.value_b),
                    if r.satisfied { "satisfied" } else { "NOT satisfied" }
                )
            };
            report.push_str(&line("existence", &existence));
            report.push_str(&line("a-priori", &apriori));
            match &stability {
                Ok(r) => report.push_str(&line("stability", r)),
                Err(e) => {
                    let _ = writeln!(report, "stability: unavailable, {e}");
                }
            }
            if apriori.satisfied {
                let norm_phi = spec.norm_phi()?;
                let b = a_priori_bound(&spec, &consts, norm_phi * norm_phi, spec.coefficients.kappa.affine_bound())?;
                let _ = writeln!(report, "a-priori bound on E sup|x|^2: {}", fmt_f64(b.bound));
            }
            for w in certify_impulse_constants(&spec, 64, spec.noise.seed())? {
                let _ = writeln!(report, "warning: {w}");
            }
            stdout.write_all(report.as_bytes()).map_err(out_err)?;

            if let Some(dir) = out {
                prepare_dir(&dir)?;
                let mut csv = String::from("condition,value_a,value_b,threshold,satisfied\n");
                condition_row(&mut csv, "existence", &existence);
                condition_row(&mut csv, "a_priori", &apriori);
                if let Ok(r) = &stability {
                    condition_row(&mut csv, "stability", r);
                }
                write_file(&dir, "conditions.csv", csv.as_bytes())?;
                write_file(&dir, "manifest.txt", manifest(args, None, Some(&text)).as_bytes())?;
            }
            let mut failed = Vec::new();
            if !existence.satisfied {
                failed.push("existence");
            }
            if !apriori.satisfied {
                failed.push("a-priori");
            }
            if matches!(&stability, Ok(r) if !r.satisfied) {
                failed.push("stability");
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::ConditionFailure(failed.join(", ")))
            }
        }
        Command::Stability {
            problem,
            delta_grid,
            paths,
            seed,
            steps,
            out,
            picard,
        } => {
            let (text, spec) = load(&problem)?;
            let seed = seed.unwrap_or(spec.noise.seed());
            let n = spec.dimension();
            let mut direction = Perturbation {
                dphi: spec.phi.clone(),
                dx1: spec.x1.clone(),
            };
            if !(direction.delta(&spec)? > 0.0) {
                let mut unit = nalgebra::DVector::zeros(n);
                unit[0] = 1.0;
                direction = Perturbation {
                    dphi: Prehistory::constant(&unit),
                    dx1: nalgebra::DVector::zeros(n),
                };
            }
            let exp = StabilityExperiment::new(&spec, &GridSpec::new(spec.horizon, steps), paths, seed, &picard.into())?;
            let reports = exp.sweep(&direction, &delta_grid.values())?;
            let mut csv = Vec::new();
            write_sweep_csv(&reports, &mut csv).map_err(io_err("cannot format sweep"))?;
            stdout.write_all(&csv).map_err(out_err)?;
            if let Some(dir) = out {
                prepare_dir(&dir)?;
                write_file(&dir, "sweep.csv", &csv)?;
                write_file(&dir, "manifest.txt", manifest(args, Some(seed), Some(&text)).as_bytes())?;
            }
            let unconverged: usize = reports.iter().map(|r| r.unconverged).sum();
            if unconverged > 0 {
                return Err(CliError::NonConvergence(unconverged, 2 * paths * reports.len()));
            }
            Ok(())
        }
        Command::MlEval { q, beta, z } => {
            let v = ml_scalar(MLOrder::new(q, beta)?, z)?;
            writeln!(stdout, "{}", fmt_f64(v)).map_err(out_err)
        }
        Command::ExampleHeat { emit, modes } => {
            let spec = build_heat_example(&HeatExampleParams::default().with_modes(modes))?;
            let text = problem_to_string(&spec)?;
            if let Some(parent) = emit.parent().filter(|p| !p.as_os_str().is_empty()) {
                prepare_dir(parent)?;
            }
            fs::write(&emit, &text).map_err(io_err(format!("cannot write {}", emit.display())))?;
            writeln!(stdout, "wrote {} ({} modes)", emit.display(), modes).map_err(out_err)
        }
    }
}
