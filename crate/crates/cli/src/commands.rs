//! Subcommand implementations.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use qvl_core::circuit::{count_gates, BlockTag, CircuitProgram, GateKind};
use qvl_core::code422::LogicalLabel;
use qvl_core::fidelity::{
    estimate_threshold, fidelity_campaign, AncillaFidelityRow, CampaignConfig, FidelitySummary, SweepRow,
    ThresholdOutcome, BIN_WIDTH,
};
use qvl_core::noise::{format_faults, sample_faults, NoiseConfig, NoiseModel};
use qvl_core::rng::{stream, tag, StreamPath};
use qvl_core::statevector::Register;
use qvl_core::training::{mean_final_accuracy, mean_std, train, ExperimentRecord, TrainConfig, FINAL_WINDOW};
use qvl_core::trajectory::{Architecture, PreparedCircuit};

use crate::config::{ExperimentConfig, SeedSpec};
use crate::grid::{expand, GridPoint};
use crate::output::{num, opt_num, write_atomic, CsvRows, Table};

pub const TRAIN_SCHEMA: &str = "qvl-train-iterations/1";
pub const TRAIN_SUMMARY_SCHEMA: &str = "qvl-train-summary/1";
pub const FIDELITY_SCHEMA: &str = "qvl-fidelity-shots/1";
pub const FIDELITY_SUMMARY_SCHEMA: &str = "qvl-fidelity-summary/1";
pub const HISTOGRAM_SCHEMA: &str = "qvl-fidelity-histograms/1";
pub const THRESHOLD_SCHEMA: &str = "qvl-threshold-report/1";
pub const THRESHOLD_POINTS_SCHEMA: &str = "qvl-threshold-points/1";

/// Everything a grid command needs besides its own arguments.
pub struct RunContext {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub workers: usize,
    pub seed_offset: u64,
}

#[derive(Serialize)]
struct PointTiming {
    id: String,
    status: String,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    workers: usize,
    seed_offset: u64,
    wall_seconds: f64,
    points: Vec<PointTiming>,
}

/// Runs `f`, turning a panic into an error so one grid point cannot take
/// down the sweep.
fn isolated<T>(f: impl FnOnce() -> Result<T>) -> Result<T> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            Err(anyhow!("panicked: {msg}"))
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().context("cannot start worker pool")
}

/// Maps `job` over the grid on the worker pool, isolating failures and
/// reporting progress on stderr. Results come back in grid order.
fn run_grid<T: Send>(
    ctx: &RunContext,
    command: &str,
    points: &[GridPoint],
    job: impl Fn(&GridPoint) -> Result<T> + Sync,
) -> Result<(Vec<Result<T>>, Vec<PointTiming>)> {
    let started = Instant::now();
    let total = points.len();
    let outcomes: Vec<(Result<T>, PointTiming)> = pool(ctx.workers)?.install(|| {
        points
            .par_iter()
            .map(|pt| {
                let t0 = Instant::now();
                let r = isolated(|| job(pt));
                let wall_seconds = t0.elapsed().as_secs_f64();
                let status = match &r {
                    Ok(_) => "ok".to_string(),
                    Err(e) => format!("failed: {e:#}"),
                };
                eprintln!("{command} {} {status} ({wall_seconds:.1}s)", pt.id());
                (r, PointTiming { id: pt.id(), status, wall_seconds })
            })
            .collect()
    });
    let (results, timings): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let failed = results.iter().filter(|r| r.is_err()).count();
    let meta = RunMetadata {
        command,
        workers: ctx.workers,
        seed_offset: ctx.seed_offset,
        wall_seconds: started.elapsed().as_secs_f64(),
        points: Vec::new(),
    };
    let meta = RunMetadata { points: timings, ..meta };
    write_atomic(&ctx.out.join(format!("run-{command}.json")), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    eprintln!("{command}: {}/{total} grid points completed", total - failed);
    Ok((results, meta.points))
}

fn write_snapshot(ctx: &RunContext) -> Result<()> {
    // The offset is folded in so the snapshot alone reproduces the run.
    let mut snapshot = ctx.config.clone();
    snapshot.run = Default::default();
    snapshot.noise.seed = snapshot.noise.seed.wrapping_add(ctx.seed_offset);
    snapshot.train.seeds = SeedSpec::List(ctx.config.train.seeds.seeds(ctx.seed_offset));
    let text = format!("# resolved configuration\n{}", snapshot.to_toml());
    write_atomic(&ctx.out.join("config.toml"), text.as_bytes())
}

fn failures_to_error(command: &str, results: &[Result<impl Sized>]) -> Result<()> {
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        bail!("{command}: {failed} grid point(s) failed; see the status column");
    }
    Ok(())
}

fn status_of<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("failed: {e:#}"),
    }
}

fn point_fields(pt: &GridPoint) -> Vec<String> {
    vec![
        pt.model.as_str().into(),
        pt.architecture_name().into(),
        num(pt.p_phys),
        num(pt.f_anc),
        num(pt.p_anc()),
        pt.rounds_field(),
    ]
}

const POINT_HEADER: [&str; 6] = ["model", "architecture", "p_phys", "f_anc", "p_anc", "rounds"];

fn header(extra: &[&'static str]) -> Vec<&'static str> {
    POINT_HEADER.iter().copied().chain(extra.iter().copied()).collect()
}

// ---------------------------------------------------------------- train

/// Final averaging window: iterations 61–100 of a 100-iteration run, the
/// last 40% of any other length.
fn final_window(len: usize) -> (usize, usize) {
    if len == FINAL_WINDOW.1 {
        FINAL_WINDOW
    } else {
        let width = (len * 2).div_ceil(5).max(1);
        (len - width + 1, len)
    }
}

struct TrainPoint {
    records: Vec<ExperimentRecord>,
}

fn train_point(ctx: &RunContext, pt: &GridPoint, seeds: &[u64]) -> Result<TrainPoint> {
    let t = &ctx.config.train;
    let config = TrainConfig {
        architecture: pt.architecture()?,
        noise: pt.noise,
        policy: ctx.config.shots.policy(),
        iterations: t.iterations,
        batch_size: t.batch_size,
        learning_rate: t.learning_rate,
        fd_step: t.fd_step,
        theta_init: t.theta_init()?,
    };
    let records = seeds
        .par_iter()
        .map(|&seed| train(&config, seed).map(|(_, r)| r).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(
        TRAIN_SCHEMA,
        &header(&[
            "seed",
            "iteration",
            "theta",
            "loss",
            "train_accuracy",
            "test_accuracy",
            "acceptance_rate",
            "undecodable",
        ]),
    );
    for r in &records {
        for it in &r.history {
            let mut row = point_fields(pt);
            row.extend([
                r.seed.to_string(),
                it.iteration.to_string(),
                num(it.theta),
                num(it.loss),
                num(it.train_accuracy),
                num(it.test_accuracy),
                num(it.acceptance_rate),
                it.undecodable.to_string(),
            ]);
            table.row(row);
        }
    }
    table.write(&ctx.out.join("train").join(format!("{}.csv", pt.id())))?;
    Ok(TrainPoint { records })
}

pub fn cmd_train(ctx: &RunContext) -> Result<()> {
    write_snapshot(ctx)?;
    let points = expand(&ctx.config, ctx.seed_offset);
    let seeds = ctx.config.train.seeds.seeds(ctx.seed_offset);
    let (results, _) = run_grid(ctx, "train", &points, |pt| train_point(ctx, pt, &seeds))?;

    let mut summary = Table::new(
        TRAIN_SUMMARY_SCHEMA,
        &header(&[
            "seeds",
            "window_first",
            "window_last",
            "mean_final_accuracy",
            "std_final_accuracy",
            "mean_acceptance_rate",
            "undecodable",
            "status",
        ]),
    );
    let (lo, hi) = final_window(ctx.config.train.iterations);
    for (pt, r) in points.iter().zip(&results) {
        let mut row = point_fields(pt);
        row.extend([seeds.len().to_string(), lo.to_string(), hi.to_string()]);
        match r {
            Ok(tp) => {
                let (mean, std) = window_stats(&tp.records, lo, hi)?;
                let acceptance: Vec<f64> =
                    tp.records.iter().flat_map(|r| r.history.iter().map(|h| h.acceptance_rate)).collect();
                let undecodable: usize = tp.records.iter().flat_map(|r| r.history.iter().map(|h| h.undecodable)).sum();
                row.extend([num(mean), num(std), num(mean_std(&acceptance).0), undecodable.to_string()]);
            }
            Err(_) => row.extend([String::new(), String::new(), String::new(), String::new()]),
        }
        row.push(status_of(r));
        summary.row(row);
    }
    summary.write(&ctx.out.join("train_summary.csv"))?;
    failures_to_error("train", &results)
}

fn window_stats(records: &[ExperimentRecord], lo: usize, hi: usize) -> Result<(f64, f64)> {
    let histories: Vec<Vec<f64>> = records.iter().map(|r| r.accuracies()).collect();
    if (lo, hi) == FINAL_WINDOW {
        return Ok(mean_final_accuracy(&histories)?);
    }
    let per_record: Vec<f64> =
        histories.iter().map(|h| h[lo - 1..hi].iter().sum::<f64>() / (hi - lo + 1) as f64).collect();
    Ok(mean_std(&per_record))
}

// ------------------------------------------------------------- fidelity

struct FidelityPoint {
    full: FidelitySummary,
    phys: FidelitySummary,
    anc: Option<FidelitySummary>,
    acceptance_rate: f64,
}

fn fidelity_point(ctx: &RunContext, pt: &GridPoint) -> Result<FidelityPoint> {
    let config = CampaignConfig {
        architecture: pt.architecture()?,
        noise: pt.noise,
        theta: ctx.config.fidelity.theta,
        shots_per_label: ctx.config.fidelity.shots / 4,
        max_reruns: ctx.config.shots.max_reruns,
    };
    let result = fidelity_campaign(&config, &StreamPath::root(pt.noise.seed))?;
    let mut table = Table::new(
        FIDELITY_SCHEMA,
        &["model", "architecture", "p_phys", "f_anc", "rounds", "input_label", "F_full", "F_phys", "F_anc", "accepted"],
    );
    for r in &result.records {
        table.row([
            pt.model.as_str().to_string(),
            pt.architecture_name().into(),
            num(pt.p_phys),
            num(pt.f_anc),
            pt.rounds_field(),
            r.input_label.to_string(),
            num(r.f_full),
            num(r.f_phys),
            opt_num(r.f_anc),
            r.accepted.to_string(),
        ]);
    }
    table.write(&ctx.out.join("fidelity").join(format!("{}.csv", pt.id())))?;
    Ok(FidelityPoint { full: result.full, phys: result.phys, anc: result.anc, acceptance_rate: result.acceptance_rate })
}

pub fn cmd_fidelity(ctx: &RunContext) -> Result<()> {
    write_snapshot(ctx)?;
    let points = expand(&ctx.config, ctx.seed_offset);
    let (results, _) = run_grid(ctx, "fidelity", &points, |pt| fidelity_point(ctx, pt))?;

    let mut summary = Table::new(
        FIDELITY_SUMMARY_SCHEMA,
        &header(&[
            "shots",
            "acceptance_rate",
            "F_full_mean",
            "F_anc_mean",
            "F_anc_std",
            "F_anc_below_002",
            "F_anc_above_098",
            "F_phys_mean",
            "F_phys_std",
            "F_phys_below_002",
            "F_phys_above_098",
            "status",
        ]),
    );
    let mut histograms = Table::new(HISTOGRAM_SCHEMA, &header(&["register", "bin", "bin_low", "bin_high", "count"]));
    for (pt, r) in points.iter().zip(&results) {
        let mut row = point_fields(pt);
        match r {
            Ok(fp) => {
                let anc = |f: fn(&FidelitySummary) -> f64| opt_num(fp.anc.as_ref().map(f));
                row.extend([
                    fp.phys.count.to_string(),
                    num(fp.acceptance_rate),
                    num(fp.full.mean),
                    anc(|s| s.mean),
                    anc(|s| s.std),
                    anc(|s| s.frac_below_002),
                    anc(|s| s.frac_above_098),
                    num(fp.phys.mean),
                    num(fp.phys.std),
                    num(fp.phys.frac_below_002),
                    num(fp.phys.frac_above_098),
                ]);
                let registers = [("full", Some(&fp.full)), ("physical", Some(&fp.phys)), ("ancilla", fp.anc.as_ref())];
                for (name, s) in registers {
                    let Some(s) = s else { continue };
                    for (k, count) in s.histogram.iter().enumerate() {
                        let mut h = point_fields(pt);
                        h.extend([
                            name.to_string(),
                            k.to_string(),
                            num(k as f64 * BIN_WIDTH),
                            num((k + 1) as f64 * BIN_WIDTH),
                            count.to_string(),
                        ]);
                        histograms.row(h);
                    }
                }
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 11)),
        }
        row.push(status_of(r));
        summary.row(row);
    }
    summary.write(&ctx.out.join("fidelity_summary.csv"))?;
    histograms.write(&ctx.out.join("fidelity_histograms.csv"))?;
    failures_to_error("fidelity", &results)
}

// ------------------------------------------------------------ threshold

struct SweepInput {
    rows: BTreeMap<String, Vec<SweepRow>>,
    fidelities: BTreeMap<String, Vec<AncillaFidelityRow>>,
}

fn read_sweep(dir: &Path) -> Result<SweepInput> {
    let train = CsvRows::read(&dir.join("train_summary.csv"), TRAIN_SUMMARY_SCHEMA)?;
    let mut rows: BTreeMap<String, Vec<SweepRow>> = BTreeMap::new();
    for r in &train.rows {
        if train.get(r, "status")? != "ok" || train.get(r, "architecture")? != "logical" {
            continue;
        }
        rows.entry(train.get(r, "model")?.to_string()).or_default().push(SweepRow {
            p_anc: train.parse(r, "p_anc")?,
            rounds: train.parse(r, "rounds")?,
            mean_accuracy: train.parse(r, "mean_final_accuracy")?,
            std_accuracy: train.parse(r, "std_final_accuracy")?,
        });
    }
    let mut fidelities: BTreeMap<String, Vec<AncillaFidelityRow>> = BTreeMap::new();
    let fid_path = dir.join("fidelity_summary.csv");
    if fid_path.exists() {
        let fid = CsvRows::read(&fid_path, FIDELITY_SUMMARY_SCHEMA)?;
        for r in &fid.rows {
            if fid.get(r, "status")? != "ok" || fid.get(r, "F_anc_mean")?.is_empty() {
                continue;
            }
            fidelities.entry(fid.get(r, "model")?.to_string()).or_default().push(AncillaFidelityRow {
                p_anc: fid.parse(r, "p_anc")?,
                rounds: fid.parse(r, "rounds")?,
                mean_f_anc: fid.parse(r, "F_anc_mean")?,
            });
        }
    }
    Ok(SweepInput { rows, fidelities })
}

pub fn cmd_threshold(ctx: &RunContext, sweep_dir: &Path) -> Result<()> {
    let input = read_sweep(sweep_dir)?;
    if input.rows.is_empty() {
        bail!("{}: no completed encoded-circuit rows in train_summary.csv", sweep_dir.display());
    }
    let criteria = ctx.config.threshold.criteria();
    let mut report = Table::new(
        THRESHOLD_SCHEMA,
        &["model", "outcome", "threshold_p_anc", "mean_F_anc", "plateau_rounds", "min_accuracy", "max_std", "reason"],
    );
    let mut support = Table::new(
        THRESHOLD_POINTS_SCHEMA,
        &["model", "p_anc", "passes", "rounds", "mean_final_accuracy", "std_final_accuracy"],
    );
    for (model, rows) in &input.rows {
        let fids = input.fidelities.get(model).map(Vec::as_slice).unwrap_or(&[]);
        let r = estimate_threshold(rows, fids, &criteria);
        let (outcome, p, f, reason) = match &r.outcome {
            ThresholdOutcome::Found { p_anc, f_anc } => ("found", num(*p_anc), opt_num(*f_anc), String::new()),
            ThresholdOutcome::Inconclusive { reason } => ("inconclusive", String::new(), String::new(), reason.clone()),
        };
        report.row([
            model.clone(),
            outcome.into(),
            p,
            f,
            r.plateau_rounds.to_string(),
            num(criteria.min_accuracy),
            num(criteria.max_std),
            reason,
        ]);
        for point in &r.points {
            for row in &point.rows {
                support.row([
                    model.clone(),
                    num(point.p_anc),
                    point.passes.to_string(),
                    row.rounds.to_string(),
                    num(row.mean_accuracy),
                    num(row.std_accuracy),
                ]);
            }
        }
        match &r.outcome {
            ThresholdOutcome::Found { p_anc, f_anc } => {
                eprintln!("threshold {model}: p_anc = {p_anc}, F_anc = {}", opt_num(*f_anc))
            }
            ThresholdOutcome::Inconclusive { reason } => eprintln!("threshold {model}: inconclusive ({reason})"),
        }
    }
    report.write(&ctx.out.join("threshold_report.csv"))?;
    support.write(&ctx.out.join("threshold_points.csv"))?;
    Ok(())
}

// -------------------------------------------------------------- inspect

/// What `inspect` prints.
pub struct InspectRequest {
    pub program: Option<PathBuf>,
    pub bare: bool,
    pub rounds: usize,
    pub input: LogicalLabel,
    pub theta: f64,
    /// Sample one fault list under this noise.
    pub noise: Option<NoiseConfig>,
}

pub fn render_inspect(req: &InspectRequest) -> Result<String> {
    let program: CircuitProgram = match &req.program {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            text.parse().with_context(|| format!("cannot parse {}", path.display()))?
        }
        None => {
            let arch = if req.bare { Architecture::Bare } else { Architecture::logical(req.rounds)? };
            let (a, b) = (req.input.bit(0), req.input.bit(1));
            PreparedCircuit::new(&arch, (a, b), req.theta)?.program
        }
    };
    program.validate()?;
    let mut out = String::new();
    use std::fmt::Write as _;
    writeln!(out, "qubits: {}", program.qubits.len())?;
    for reg in [Register::Physical, Register::RotationAncilla, Register::Syndrome] {
        writeln!(out, "  {:<9} {}", reg.as_str(), program.qubits_in(reg).count())?;
    }
    writeln!(out, "ops: {} ({} counted gates)", program.ops.len(), count_gates(&program))?;
    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    let mut by_block: BTreeMap<BlockTag, usize> = BTreeMap::new();
    for op in &program.ops {
        *by_kind.entry(op.gate.kind().name()).or_default() += 1;
        if op.gate.kind() != GateKind::SyndromeMeasure {
            *by_block.entry(op.block).or_default() += 1;
        }
    }
    for (k, n) in &by_kind {
        writeln!(out, "  {k:<9} {n}")?;
    }
    writeln!(out, "gates by block:")?;
    for (b, n) in &by_block {
        writeln!(out, "  {:<9} {n}", b.as_str())?;
    }
    if !program.anchors.is_empty() {
        writeln!(out, "anchors:")?;
        for a in &program.anchors {
            writeln!(out, "  {:<9} {}", a.block.as_str(), a.position)?;
        }
    }
    if let Some(noise) = &req.noise {
        let faults = sample_faults(&program, noise, &mut stream(noise.seed, &[tag::WEAVE]))?;
        writeln!(out, "sampled faults ({}, seed {}): {}", noise.model.as_str(), noise.seed, faults.len())?;
        for line in format_faults(&faults).lines() {
            writeln!(out, "  {line}")?;
        }
    }
    writeln!(out)?;
    out.push_str(&program.to_string());
    Ok(out)
}

pub fn noise_for_inspect(model: NoiseModel, p_phys: f64, f_anc: f64, seed: u64) -> Result<NoiseConfig> {
    let config = NoiseConfig { model, p_phys, f_anc, seed, ..NoiseConfig::none() };
    config.validate()?;
    Ok(config)
}
