//! Subcommands of the `bernoulli` binary, writing their artifacts to disk.

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{boundary_csv, boundary_svg, control_points_csv, field_csv, write_artifact, FailureRecord};
use crate::optimizer::{Analysis, Termination};
use crate::studies::{self, SolveOutcome, StudyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    VerifyFem,
    GradCheck,
    StudyMonotonicity,
    StudyAsymptotics,
    StudyPenalization,
    StudySymmetry,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::VerifyFem => "verify-fem",
            Command::GradCheck => "grad-check",
            Command::StudyMonotonicity => "study-monotonicity",
            Command::StudyAsymptotics => "study-asymptotics",
            Command::StudyPenalization => "study-penalization",
            Command::StudySymmetry => "study-symmetry",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: PathBuf,
    pub dump_mesh: bool,
    pub continuation: bool,
}

/// What a command left behind. `failure` is set when a check failed or the
/// run stopped on an error; it has already been written as `failure.json`.
#[derive(Debug, Clone)]
pub struct Report {
    pub written: Vec<PathBuf>,
    pub summary: String,
    pub failure: Option<FailureRecord>,
}

struct Sink<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Sink<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<String> {
        let path = write_artifact(self.dir, name, contents)?;
        let shown = path.display().to_string();
        self.written.push(path);
        Ok(shown)
    }

    fn design(&mut self, tag: &str, an: &Analysis, dump_mesh: bool) -> Result<Vec<String>> {
        let mut names = vec![
            self.put(&format!("boundary_{tag}.csv"), &boundary_csv(an.boundary.polygon()))?,
            self.put(&format!("boundary_{tag}.svg"), &boundary_svg(an.boundary.polygon()))?,
            self.put(&format!("control_points_{tag}.csv"), &control_points_csv(&an.polygon))?,
        ];
        if dump_mesh {
            names.push(self.put(&format!("mesh_{tag}.txt"), &an.mesh.to_text())?);
            names.push(self.put(&format!("fields_{tag}.csv"), &field_csv(&an.mesh, &[("u1", &an.u1), ("u2_eps", &an.u2)])?)?);
        }
        Ok(names)
    }

    fn failure(&mut self, rec: FailureRecord) -> Result<Option<FailureRecord>> {
        self.put("failure.json", &rec.to_json())?;
        Ok(Some(rec))
    }
}

fn solve_artifacts(
    sink: &mut Sink<'_>,
    config: &RunConfig,
    opts: &Options,
    command: Command,
) -> Result<(SolveOutcome, Option<FailureRecord>)> {
    let stride = config.snapshot_stride;
    let snapshot_dir = sink.dir.join("snapshots");
    let mut snap_err: Option<Error> = None;
    let mut snapshots = Vec::new();
    let outcome = studies::solve(config, opts.continuation, |_, rec, an| {
        if stride > 0 && rec.iteration % stride == 0 && snap_err.is_none() {
            let name = format!("boundary_{:05}.svg", rec.iteration);
            match write_artifact(&snapshot_dir, &name, &boundary_svg(an.boundary.polygon())) {
                Ok(p) => snapshots.push(p),
                Err(e) => snap_err = Some(e),
            }
        }
    })?;
    if let Some(e) = snap_err {
        return Err(e);
    }
    sink.written.extend(snapshots);
    sink.put("iterations.csv", &outcome.history_csv())?;
    if outcome.stages.len() > 1 {
        sink.put("stages.csv", &outcome.stages_csv())?;
    }
    sink.design("initial", &outcome.first().initial, opts.dump_mesh)?;
    let last = sink.design("final", &outcome.last().last, opts.dump_mesh)?;
    let failure = match outcome.termination() {
        Termination::Failed(msg) => {
            let rec = FailureRecord {
                command: command.name().into(),
                kind: "OptimizationFailed".into(),
                message: msg.clone(),
                iteration: Some(outcome.iterations()),
                snapshots: last,
                checks: Vec::new(),
            };
            sink.failure(rec)?
        }
        _ => None,
    };
    Ok((outcome, failure))
}

fn study_artifacts(sink: &mut Sink<'_>, command: Command, rep: &StudyReport) -> Result<Option<FailureRecord>> {
    for (name, csv) in &rep.tables {
        sink.put(name, csv)?;
    }
    if rep.passed() {
        return Ok(None);
    }
    let rec = FailureRecord {
        command: command.name().into(),
        kind: "CheckFailed".into(),
        message: format!("{} of {} checks failed", rep.failures().len(), rep.checks.len()),
        iteration: None,
        snapshots: Vec::new(),
        checks: rep.failures().iter().map(|c| c.describe()).collect(),
    };
    sink.failure(rec)
}

/// Runs `command`, writing everything under `opts.out`. Errors that stop a
/// command before it produces results are returned as `Err`; the caller
/// records them with [`record_error`].
pub fn run(command: Command, config: &RunConfig, opts: &Options) -> Result<Report> {
    let mut sink = Sink { dir: &opts.out, written: Vec::new() };
    sink.put("config.txt", &config.to_text())?;
    let (summary, failure) = match command {
        Command::Solve => {
            let (outcome, failure) = solve_artifacts(&mut sink, config, opts, command)?;
            (outcome.summary_text(), failure)
        }
        Command::StudySymmetry => {
            let (outcome, mut failure) = solve_artifacts(&mut sink, config, opts, command)?;
            let rep = studies::symmetry_report(config, &outcome)?;
            if failure.is_none() {
                failure = study_artifacts(&mut sink, command, &rep)?;
            } else {
                for (name, csv) in &rep.tables {
                    sink.put(name, csv)?;
                }
            }
            (format!("{}{}", outcome.summary_text(), rep.summary_text()), failure)
        }
        _ => {
            let rep = match command {
                Command::VerifyFem => studies::verify_fem(config)?,
                Command::GradCheck => studies::gradient_check(config, true)?,
                Command::StudyMonotonicity => studies::monotonicity(config, opts.continuation)?,
                Command::StudyAsymptotics => studies::asymptotics(config, opts.continuation)?,
                Command::StudyPenalization => studies::penalization(config)?,
                Command::Solve | Command::StudySymmetry => unreachable!(),
            };
            let failure = study_artifacts(&mut sink, command, &rep)?;
            (rep.summary_text(), failure)
        }
    };
    sink.put("summary.txt", &summary)?;
    Ok(Report { written: sink.written, summary, failure })
}

/// Writes the failure record of an error that aborted `command`.
pub fn record_error(command: &str, out: &Path, err: &Error) -> Result<PathBuf> {
    write_artifact(out, "failure.json", &FailureRecord::from_error(command, err).to_json())
}
