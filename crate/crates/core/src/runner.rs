//! Run orchestration: outputs, checkpoints and the command entry points.
//!
//! An output directory holds
//!
//! - `run.cfg`, the effective configuration (re-runnable as is),
//! - `diagnostics.csv`, one row per recorded step,
//! - `snapshot_<step>.chf`, the `u` and `v` blocks at the snapshot stride,
//! - `checkpoint.chk`, the latest restart point,
//! - `steady.chf`, written by the steady command.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::{parse_config, InitSpec, RunConfig};
use crate::diagnostics::{self, CSV_HEADER};
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;
use crate::snapshot::{self, fmt_f64};
use crate::solver::{self, InitKind, State, StepEvent};
use crate::spectral::ScalarField;
use crate::steady::{self, SteadySolution};

pub const CSV_FILE: &str = "diagnostics.csv";
pub const CONFIG_FILE: &str = "run.cfg";
pub const CHECKPOINT_FILE: &str = "checkpoint.chk";
pub const STEADY_FILE: &str = "steady.chf";
pub const CHECKPOINT_MAGIC: &str = "CHCHECKPOINT v1";

/// Tolerance of the stationary solve in the steady command.
pub const STEADY_TOL: f64 = 1e-10;

pub fn snapshot_name(step: u64) -> String {
    format!("snapshot_{step:08}.chf")
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop (with a checkpoint) once this many steps in total are taken.
    pub max_steps: Option<u64>,
    /// Overrides the configured end time.
    pub t_end: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub state: State,
    pub step: u64,
    /// False when the step budget stopped the run early.
    pub completed: bool,
    pub out_dir: PathBuf,
}

impl RunSummary {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "status": "ok",
            "completed": self.completed,
            "t": self.state.t,
            "step": self.step,
            "out_dir": self.out_dir.display().to_string(),
        })
    }
}

/// Machine-readable description of a failure.
pub fn failure_json(err: &Error) -> serde_json::Value {
    let details = match err {
        Error::Config(list) => list.clone(),
        _ => Vec::new(),
    };
    json!({ "status": "error", "kind": err.kind(), "message": err.to_string(), "details": details })
}

/// Process exit status for a failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::MeanInfeasible(_) | Error::InvalidGrid(_) => 2,
        Error::Io(_) | Error::Format(_) => 3,
        _ => 1,
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub state: State,
    pub step: u64,
    pub config: RunConfig,
}

/// Writes through a temporary file so a crash never leaves a torn checkpoint.
pub fn write_checkpoint(path: &Path, state: &State, step: u64, config: &RunConfig) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        writeln!(out, "{CHECKPOINT_MAGIC}")?;
        writeln!(out, "t = {}", fmt_f64(state.t))?;
        writeln!(out, "step = {step}")?;
        out.write_all(config.echo().as_bytes())?;
        writeln!(out, "END")?;
        write_pair(&mut out, state, step, &[])?;
        out.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut input = BufReader::new(File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    if line.trim_end() != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!("expected `{CHECKPOINT_MAGIC}` header")));
    }
    let (mut t, mut step, mut echo) = (None, None, String::new());
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Err(Error::Format("checkpoint header is not terminated by END".into()));
        }
        let trimmed = line.trim_end();
        if trimmed == "END" {
            break;
        }
        match trimmed.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
            Some(("t", v)) => t = Some(v.parse::<f64>().map_err(|_| Error::Format(format!("bad checkpoint time `{v}`")))?),
            Some(("step", v)) => step = Some(v.parse::<u64>().map_err(|_| Error::Format(format!("bad checkpoint step `{v}`")))?),
            _ => {
                echo.push_str(trimmed);
                echo.push('\n');
            }
        }
    }
    let t = t.ok_or_else(|| Error::Format("checkpoint lacks `t`".into()))?;
    let step = step.ok_or_else(|| Error::Format("checkpoint lacks `step`".into()))?;
    let config = parse_config(&echo, true)?.config;
    let blocks = snapshot::read_all(input)?;
    let (u, v) = split_pair(blocks)?;
    Ok(Checkpoint { state: State::new(t, u, v)?, step, config })
}

fn write_pair<W: Write>(out: &mut W, state: &State, step: u64, tags: &[&str]) -> Result<()> {
    write_pair_with(out, state, step, &[], tags)
}

fn write_pair_with<W: Write>(
    out: &mut W,
    state: &State,
    step: u64,
    extra: &[(&str, String)],
    tags: &[&str],
) -> Result<()> {
    for (name, field) in [("u", &state.u), ("v", &state.v)] {
        let mut attrs = vec![("field", name.to_string()), ("t", fmt_f64(state.t)), ("step", step.to_string())];
        attrs.extend(extra.iter().cloned());
        snapshot::write_field(&mut *out, field, &attrs, tags)?;
    }
    Ok(())
}

/// Picks the `u` and `v` blocks by their `field` attribute, falling back to
/// file order.
fn split_pair(blocks: Vec<(ScalarField, snapshot::SnapshotHeader)>) -> Result<(ScalarField, ScalarField)> {
    let by_name = |name: &str| blocks.iter().find(|(_, h)| h.attr("field") == Some(name)).map(|(f, _)| f.clone());
    match (by_name("u"), by_name("v")) {
        (Some(u), Some(v)) => Ok((u, v)),
        _ if blocks.len() >= 2 => Ok((blocks[0].0.clone(), blocks[1].0.clone())),
        _ => Err(Error::Format(format!("expected a `u` and a `v` block, found {} blocks", blocks.len()))),
    }
}

/// Reads a `u`/`v` snapshot file.
pub fn read_state_file(path: &Path) -> Result<(State, Vec<snapshot::SnapshotHeader>)> {
    let blocks = snapshot::read_all(BufReader::new(File::open(path)?))?;
    let headers: Vec<_> = blocks.iter().map(|(_, h)| h.clone()).collect();
    let t = headers.first().and_then(|h| h.attr_f64("t").ok()).unwrap_or(0.0);
    let (u, v) = split_pair(blocks)?;
    Ok((State::new(t, u, v)?, headers))
}

// ---------------------------------------------------------------------------
// Commands

fn initial_state(cfg: &RunConfig) -> Result<State> {
    let grid = cfg.grid()?;
    let kind = match &cfg.init {
        InitSpec::ConstantPlusNoise => InitKind::ConstantPlusNoise,
        InitSpec::Function(profile) => InitKind::Function(*profile),
        InitSpec::LoadedSnapshot(path) => {
            let (state, _) = read_state_file(path)?;
            InitKind::Fields { u: state.u, v: state.v }
        }
    };
    solver::initial_state(&grid, &kind, cfg.seed, cfg.amplitude, (cfg.mean_u, cfg.mean_v))
}

/// Prints the effective configuration as the run header.
fn announce(cfg: &RunConfig, out: &mut impl Write) -> Result<()> {
    writeln!(out, "# chlab {}", env!("CARGO_PKG_VERSION"))?;
    for line in cfg.echo().lines() {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Integrates `state` from `step` on, writing outputs into `dir`.
fn integrate(
    cfg: &RunConfig,
    spec: &PotentialSpec,
    dir: &Path,
    csv: File,
    state: State,
    step: u64,
    options: &RunOptions,
) -> Result<RunSummary> {
    let t_end = options.t_end.unwrap_or(cfg.t_end);
    let mut csv = BufWriter::new(csv);
    let checkpoint = dir.join(CHECKPOINT_FILE);
    let mut latest: Option<(State, u64)> = None;

    let mut observer = |ev: &StepEvent<'_>| -> Result<()> {
        if ev.step % cfg.csv_stride == 0 || ev.is_last {
            let row = diagnostics::record_event(ev, spec)?;
            writeln!(csv, "{}", row.to_csv_row())?;
        }
        let budget_hit = options.max_steps.is_some_and(|max| ev.step >= max) && !ev.is_last;
        let on_stride = cfg.snapshot_stride > 0 && ev.step % cfg.snapshot_stride == 0;
        if on_stride || ev.is_last {
            let mut out = BufWriter::new(File::create(dir.join(snapshot_name(ev.step)))?);
            write_pair(&mut out, ev.next, ev.step, &[])?;
            out.flush()?;
        }
        if on_stride || ev.is_last || budget_hit {
            csv.flush()?;
            write_checkpoint(&checkpoint, ev.next, ev.step, cfg)?;
        }
        if budget_hit {
            latest = Some((ev.next.clone(), ev.step));
            return Err(Error::Interrupted { step: ev.step });
        }
        Ok(())
    };

    let start = step;
    let result = solver::run_from(state, start, t_end, &cfg.scheme, spec, &mut observer);
    csv.flush()?;
    match result {
        Ok((state, step)) => {
            // Without steps there was no terminal checkpoint yet.
            if step == start {
                write_checkpoint(&checkpoint, &state, step, cfg)?;
            }
            Ok(RunSummary { state, step, completed: true, out_dir: dir.to_path_buf() })
        }
        Err(Error::Interrupted { .. }) => {
            let (state, step) = latest.expect("interrupted runs record their state");
            Ok(RunSummary { state, step, completed: false, out_dir: dir.to_path_buf() })
        }
        Err(e) => Err(e),
    }
}

/// Runs a configuration from its initial data. The header is printed to `log`.
pub fn cmd_run(cfg: &RunConfig, options: &RunOptions, log: &mut impl Write) -> Result<RunSummary> {
    let spec = cfg.potential()?;
    let state = initial_state(cfg)?;
    announce(cfg, log)?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.echo())?;
    let mut csv = File::create(dir.join(CSV_FILE))?;
    writeln!(csv, "{CSV_HEADER}")?;
    {
        let mut out = BufWriter::new(File::create(dir.join(snapshot_name(0)))?);
        write_pair(&mut out, &state, 0, &[])?;
        out.flush()?;
    }
    integrate(cfg, &spec, &dir, csv, state, 0, options)
}

/// Continues a run from a checkpoint. Outputs go next to the checkpoint; CSV
/// rows recorded after the checkpoint are dropped first.
pub fn cmd_resume(checkpoint: &Path, options: &RunOptions, log: &mut impl Write) -> Result<RunSummary> {
    let Checkpoint { state, step, config } = read_checkpoint(checkpoint)?;
    let spec = config.potential()?;
    announce(&config, log)?;
    writeln!(log, "# resuming at step {step}, t = {}", fmt_f64(state.t))?;
    let dir = checkpoint.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
    let csv_path = dir.join(CSV_FILE);

    let mut kept = Vec::new();
    if csv_path.exists() {
        let rows = diagnostics::read_csv(BufReader::new(File::open(&csv_path)?))?;
        kept.extend(rows.into_iter().filter(|r| r.step <= step));
    }
    let mut csv = File::create(&csv_path)?;
    diagnostics::write_csv(&mut csv, &kept)?;
    integrate(&config, &spec, &dir, csv, state, step, options)
}

#[derive(Clone, Debug)]
pub struct SteadySummary {
    pub solution: SteadySolution,
    pub path: PathBuf,
}

impl SteadySummary {
    pub fn to_json(&self) -> serde_json::Value {
        let s = &self.solution;
        json!({
            "status": "ok",
            "iterations": s.iterations,
            "multipliers": [s.multipliers.0, s.multipliers.1],
            "residual": [s.residual.0, s.residual.1],
            "mean_u": s.state.u.mean(),
            "mean_v": s.state.v.mean(),
            "path": self.path.display().to_string(),
        })
    }
}

/// Evolves the initial data up to `t_end` (no outputs), then solves the
/// stationary problem from there and writes `steady.chf`.
pub fn cmd_steady(cfg: &RunConfig, log: &mut impl Write) -> Result<SteadySummary> {
    let spec = cfg.potential()?;
    let initial = initial_state(cfg)?;
    announce(cfg, log)?;
    let guess = solver::run(&initial, cfg.t_end, &cfg.scheme, &spec, &mut solver::no_observer)?;
    let solution = steady::solve_stationary(&guess, &spec, initial.u.mean(), STEADY_TOL)?;
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join(CONFIG_FILE), cfg.echo())?;
    let path = cfg.out_dir.join(STEADY_FILE);
    let mut out = BufWriter::new(File::create(&path)?);
    let extra = [
        ("mu_u", fmt_f64(solution.multipliers.0)),
        ("mu_v", fmt_f64(solution.multipliers.1)),
        ("res_u", fmt_f64(solution.residual.0)),
        ("res_v", fmt_f64(solution.residual.1)),
        ("iterations", solution.iterations.to_string()),
    ];
    write_pair_with(&mut out, &solution.state, 0, &extra, &["STEADY"])?;
    out.flush()?;
    Ok(SteadySummary { solution, path })
}
