//! `mmta`: command-line runner for multimodal traffic assignment scenarios.

mod manifest;
mod overrides;
mod tables;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use mmta::analysis::{
    modal_share, poa_upper_bound, price_of_anarchy, used_options, verify_equilibrium, EquilibriumReport,
};
use mmta::costs::Principle;
use mmta::mode::Mode;
use mmta::model::{dump_rows, BuildOptions, MathProgram, ObjectiveApprox};
use mmta::network::{scenario_from_value, validate_scenario, NodeId, Scenario};
use mmta::oracle::{brute_force_solve, DEFAULT_CAP};
use mmta::paths::PathCatalog;
use mmta::run::{initial_model, run, RunError, RunOptions, RunResult};
use mmta::solver::{export_mps, BranchingRule, SolverOptions};

use manifest::{sha256_hex, unix_now, Manifest, RunKey};
use overrides::{apply, parse_override};
use tables::{num, Table};

#[derive(Parser)]
#[command(name = "mmta", version, about = "Multimodal traffic assignment with shared mobility services")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario document and report rule violations.
    Validate(ScenarioArgs),
    /// Print the candidate path catalog as CSV.
    Paths(PathsArgs),
    /// Solve a scenario under one principle and write the result tables.
    Solve(SolveArgs),
    /// Solve under both principles and report the price of anarchy.
    Compare(CompareArgs),
    /// Solve and check that no traveller gains by switching alone.
    Verify(VerifyArgs),
    /// Solve a tiny scenario by exhaustive enumeration.
    Oracle(OracleArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario document (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Edit the document before loading, e.g. `params.TF.RS=0.9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Relative optimality gap at which the search stops.
    #[arg(long)]
    gap: Option<f64>,
    /// Wall-clock limit in seconds.
    #[arg(long = "time-limit", value_name = "SECONDS")]
    time_limit: Option<f64>,
    /// Largest number of branch-and-bound nodes.
    #[arg(long)]
    nodes: Option<usize>,
    /// Worker threads. Recorded in the manifest; the search itself runs on
    /// one thread.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Solve the continuous relaxation instead of the integer program.
    #[arg(long)]
    relax: bool,
    /// How convex cost terms enter the program.
    #[arg(long, value_enum, default_value = "refined")]
    approx: Approx,
    /// Number of uniform pieces of the initial approximation.
    #[arg(long, default_value_t = 8)]
    segments: usize,
    /// How branch-and-bound picks the variable to branch on.
    #[arg(long, value_enum, default_value = "most-fractional")]
    branching: Branching,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Branching {
    MostFractional,
    PseudoCost,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Approx {
    /// Tangent cuts added on demand until the objective is exact.
    Refined,
    /// A fixed piecewise-linear interpolation.
    Chords,
}

#[derive(Args)]
struct PathsArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Restrict to one OD pair, written `origin,destination`.
    #[arg(long)]
    od: Option<String>,
    /// Restrict to one mode label such as `car` or `car+M`.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "ue")]
    principle: Principle,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the program in free MPS format.
    #[arg(long = "export-mps", value_name = "FILE")]
    export_mps: Option<PathBuf>,
    /// Also write every constraint row as CSV.
    #[arg(long = "dump-model", value_name = "FILE")]
    dump_model: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Demand multipliers to sweep, written `demand:FIRST..LAST`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value = "ue")]
    principle: Principle,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Largest cost reduction a deviation may bring.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "ue")]
    principle: Principle,
    /// Largest number of candidate assignments to enumerate.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
}

/// A failure reported as JSON on standard error.
#[derive(Debug, Serialize)]
struct Failure {
    kind: String,
    message: String,
    #[serde(skip)]
    code: u8,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for Failure {}

fn fail(kind: &str, code: u8, message: impl Into<String>) -> anyhow::Error {
    Failure {
        kind: kind.to_string(),
        message: message.into(),
        code,
    }
    .into()
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure {
            kind: e.kind().to_string(),
            message: e.to_string(),
            code: 3,
        }
    }
}

struct Loaded {
    scenario: Scenario,
    doc: Value,
    sha256: String,
    overrides: Vec<String>,
    path: PathBuf,
}

fn load(args: &ScenarioArgs) -> Result<Loaded> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| fail("io", 2, format!("cannot read {}: {e}", args.scenario.display())))?;
    let mut doc: Value = serde_json::from_str(&text).map_err(|e| {
        fail(
            "parse",
            2,
            format!("{} (line {}, column {}): {e}", args.scenario.display(), e.line(), e.column()),
        )
    })?;
    for raw in &args.set {
        let o = parse_override(raw).map_err(|e| fail("override", 2, e.to_string()))?;
        apply(&mut doc, &o).map_err(|e| fail("override", 2, e.to_string()))?;
    }
    let source = if args.set.is_empty() {
        text.clone()
    } else {
        serde_json::to_string_pretty(&doc)?
    };
    let scenario = scenario_from_value(doc.clone(), &source).map_err(|e| fail(e.kind(), 2, e.to_string()))?;
    Ok(Loaded {
        scenario,
        doc,
        sha256: sha256_hex(text.as_bytes()),
        overrides: args.set.clone(),
        path: args.scenario.clone(),
    })
}

fn run_options(a: &SolverArgs) -> Result<RunOptions> {
    let mut solver = SolverOptions {
        threads: a.threads.max(1),
        node_limit: a.nodes,
        branching: match a.branching {
            Branching::MostFractional => BranchingRule::MostFractional,
            Branching::PseudoCost => BranchingRule::PseudoCost,
        },
        ..SolverOptions::default()
    };
    if let Some(g) = a.gap {
        if !(g > 0.0) {
            return Err(fail("usage", 2, format!("--gap must be positive, got {g}")));
        }
        solver.gap_tol = g;
    }
    if let Some(t) = a.time_limit {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(fail("usage", 2, format!("--time-limit must be a non-negative number, got {t}")));
        }
        solver.time_limit = Some(Duration::from_secs_f64(t));
    }
    Ok(RunOptions {
        build: BuildOptions {
            integer: !a.relax,
            segments: a.segments.max(1),
            approx: match a.approx {
                Approx::Refined => ObjectiveApprox::Refined,
                Approx::Chords => ObjectiveApprox::Chords,
            },
            ..BuildOptions::default()
        },
        solver,
        ..RunOptions::default()
    })
}

fn run_key(command: &str, loaded: &Loaded, principles: &[Principle], options: Value) -> RunKey {
    RunKey {
        command: command.to_string(),
        scenario_sha256: loaded.sha256.clone(),
        overrides: loaded.overrides.clone(),
        principles: principles.iter().map(|p| p.code().to_string()).collect(),
        options,
    }
}

fn manifest(key: RunKey, loaded: &Loaded, out: &Path, started: f64) -> Manifest {
    Manifest {
        manifest_hash: key.hash(),
        scenario: loaded.path.display().to_string(),
        scenario_name: loaded.scenario.name.clone(),
        key,
        toggles: loaded.doc.get("toggles").cloned().unwrap_or(Value::Null),
        output_dir: out.display().to_string(),
        started_unix_s: started,
        finished_unix_s: unix_now(),
        tool_version: env!("CARGO_PKG_VERSION"),
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| fail("io", 1, format!("cannot create {}: {e}", out.display())))
}

fn od_label(o: NodeId, d: NodeId) -> String {
    format!("{o}-{d}")
}

fn solve_once(s: &Scenario, catalog: &PathCatalog, principle: Principle, opts: &RunOptions) -> Result<RunResult> {
    run(s, catalog, principle, opts).map_err(|e| anyhow::Error::new(Failure::from(e)))
}

fn cmd_validate(args: &ScenarioArgs) -> Result<u8> {
    let loaded = load(args)?;
    let report = validate_scenario(&loaded.scenario);
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "valid": report.is_valid(),
            "violations": report.violations,
        }))?
    );
    Ok(if report.is_valid() { 0 } else { 1 })
}

fn parse_od(text: &str) -> Result<(NodeId, NodeId)> {
    let bad = || fail("usage", 2, format!("--od expects `origin,destination`, got `{text}`"));
    let (o, d) = text.split_once(',').ok_or_else(bad)?;
    Ok((o.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?))
}

fn cmd_paths(args: &PathsArgs) -> Result<u8> {
    let loaded = load(&args.scenario)?;
    let s = &loaded.scenario;
    let od = args.od.as_deref().map(parse_od).transpose()?;
    let mode: Option<Mode> = args
        .mode
        .as_deref()
        .map(|m| m.parse().map_err(|e| fail("usage", 2, format!("--mode: {e}"))))
        .transpose()?;
    let catalog = PathCatalog::build(s);
    let key = run_key("paths", &loaded, &[], json!({ "od": args.od, "mode": args.mode }));
    let mut t = Table::new(&key.hash(), &["od", "mode", "path_links", "length", "transfer_node"])?;
    for p in &catalog.paths {
        if od.is_some_and(|od| od != (p.origin, p.destination)) || mode.as_ref().is_some_and(|m| m != &p.mode) {
            continue;
        }
        t.row([
            od_label(p.origin, p.destination),
            p.mode.label(),
            p.link_label(s),
            num(p.length(s)),
            p.transfer_node(s).map(|n| n.to_string()).unwrap_or_default(),
        ])?;
    }
    print!("{}", t.into_string()?);
    Ok(0)
}

fn solution_json(r: &RunResult, hash: &str) -> Value {
    let p = &r.model.program;
    let variables: serde_json::Map<String, Value> = p
        .variables
        .iter()
        .zip(&r.solution.x)
        .filter(|(_, &v)| v.abs() > 1e-12)
        .map(|(var, &v)| (var.name.clone(), json!(v)))
        .collect();
    json!({
        "manifest_hash": hash,
        "principle": r.principle,
        "status": r.solution.status,
        "objective": r.solution.objective,
        "bound": r.solution.bound,
        "gap": r.solution.gap,
        "nodes": r.solution.nodes,
        "lp_iterations": r.solution.lp_iterations,
        "cuts": r.solution.cuts,
        "rounds": r.rounds,
        "settled": r.settled,
        "approximation_bound": r.model.approximation_bound,
        "system_cost": r.cost,
        "feasible": r.check.is_feasible(),
        "breaches": r.check.breaches,
        "variables": variables,
    })
}

fn write_solve_tables(s: &Scenario, catalog: &PathCatalog, r: &RunResult, hash: &str, out: &Path) -> Result<()> {
    let mut links = Table::new(hash, &["link", "tail", "head", "subnetwork", "flow", "travel_time"])?;
    for (i, l) in s.links.iter().enumerate() {
        let x = r.flows.link_flow[i];
        links.row([
            l.id.clone(),
            l.tail.to_string(),
            l.head.to_string(),
            l.subnetwork.code().to_string(),
            num(x),
            num(mmta::costs::link_travel_time(s, l, x)),
        ])?;
    }
    links.save(&out.join("link_flows.csv"))?;

    let mut share = Table::new(hash, &["mode", "principle", "share"])?;
    for (mode, v) in modal_share(catalog, &r.assignment) {
        share.row([mode, r.principle.code().to_string(), num(v)])?;
    }
    share.save(&out.join("modal_share.csv"))?;

    let mut used = Table::new(hash, &["od", "mode", "path", "flow", "generalized_cost"])?;
    for u in used_options(s, catalog, &r.assignment, &r.flows, r.principle) {
        used.row([od_label(u.origin, u.destination), u.mode, u.nodes, num(u.flow), num(u.cost.total)])?;
    }
    used.save(&out.join("paths_used.csv"))?;
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let started = unix_now();
    let loaded = load(&args.scenario)?;
    let s = &loaded.scenario;
    let opts = run_options(&args.solver)?;
    let key = run_key("solve", &loaded, &[args.principle], json!(opts));
    let hash = key.hash();
    create_dir(&args.out)?;
    let catalog = PathCatalog::build(s);
    let write_model = |program: &MathProgram| -> Result<()> {
        if let Some(path) = &args.export_mps {
            export_mps(program, path).map_err(|e| fail("io", 1, format!("{}: {e}", path.display())))?;
        }
        if let Some(path) = &args.dump_model {
            let text = format!("# manifest: {hash}\n{}", dump_rows(program));
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    };
    if args.export_mps.is_some() || args.dump_model.is_some() {
        let first = initial_model(s, &catalog, args.principle, &opts).map_err(|e| fail("model", 3, e.to_string()))?;
        write_model(&first.program)?;
    }
    let r = solve_once(s, &catalog, args.principle, &opts)?;
    write_model(&r.model.program)?;
    write_solve_tables(s, &catalog, &r, &hash, &args.out)?;
    let sol = solution_json(&r, &hash);
    std::fs::write(args.out.join("solution.json"), serde_json::to_string_pretty(&sol)? + "\n")?;
    manifest(key, &loaded, &args.out, started).write(&args.out)?;
    println!(
        "{}",
        serde_json::to_string(&json!({
            "status": r.solution.status,
            "objective": r.solution.objective,
            "gap": r.solution.gap,
            "system_cost": r.cost.total,
            "feasible": r.check.is_feasible(),
            "manifest_hash": hash,
        }))?
    );
    Ok(if r.check.is_feasible() { 0 } else { 1 })
}

#[derive(Serialize)]
struct Comparison {
    poa: Option<f64>,
    bound: f64,
    #[serde(rename = "C_ue")]
    cost_ue: f64,
    #[serde(rename = "C_so")]
    cost_so: f64,
    status_ue: mmta::solver::SolveStatus,
    status_so: mmta::solver::SolveStatus,
}

fn compare(s: &Scenario, opts: &RunOptions) -> Result<(Comparison, RunResult, RunResult)> {
    let catalog = PathCatalog::build(s);
    let ue = solve_once(s, &catalog, Principle::Ue, opts)?;
    let so = solve_once(s, &catalog, Principle::So, opts)?;
    let c = Comparison {
        poa: price_of_anarchy(ue.cost.total, so.cost.total),
        bound: poa_upper_bound(
            s.params.bpr_beta,
            s.links.len(),
            s.offered_modes().len(),
            s.total_demand() as f64,
        ),
        cost_ue: ue.cost.total,
        cost_so: so.cost.total,
        status_ue: ue.solution.status,
        status_so: so.solution.status,
    };
    Ok((c, ue, so))
}

/// Parses `demand:FIRST..LAST` into the multipliers it covers.
fn parse_sweep(text: &str) -> Result<Vec<u64>> {
    let bad = |why: &str| fail("usage", 2, format!("--sweep `{text}`: {why}"));
    let range = text
        .strip_prefix("demand:")
        .ok_or_else(|| bad("only `demand:FIRST..LAST` sweeps are supported"))?;
    let (a, b) = range.split_once("..").ok_or_else(|| bad("expected FIRST..LAST"))?;
    let first: u64 = a.trim().parse().map_err(|_| bad("FIRST is not a non-negative integer"))?;
    let last: u64 = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| bad("LAST is not a non-negative integer"))?;
    if first == 0 {
        return Err(bad("a demand multiplier of 0 leaves no demand and the price of anarchy undefined"));
    }
    if last < first {
        return Err(bad("LAST is smaller than FIRST"));
    }
    Ok((first..=last).collect())
}

fn cmd_compare(args: &CompareArgs) -> Result<u8> {
    let started = unix_now();
    let sweep = args.sweep.as_deref().map(parse_sweep).transpose()?;
    let loaded = load(&args.scenario)?;
    let s = &loaded.scenario;
    let opts = run_options(&args.solver)?;
    let key = run_key(
        "compare",
        &loaded,
        &[Principle::Ue, Principle::So],
        json!({ "run": opts, "sweep": args.sweep }),
    );
    let hash = key.hash();
    create_dir(&args.out)?;
    let (c, ue, so) = compare(s, &opts)?;
    let catalog = PathCatalog::build(s);
    let mut share = Table::new(&hash, &["mode", "principle", "share"])?;
    for r in [&ue, &so] {
        for (mode, v) in modal_share(&catalog, &r.assignment) {
            share.row([mode, r.principle.code().to_string(), num(v)])?;
        }
    }
    share.save(&args.out.join("modal_share.csv"))?;
    if let Some(multipliers) = sweep {
        let mut t = Table::new(&hash, &["multiplier", "C_ue", "C_so", "poa"])?;
        for k in multipliers {
            let (ck, _, _) = compare(&s.with_demand_scaled(k), &opts)?;
            t.row([
                k.to_string(),
                num(ck.cost_ue),
                num(ck.cost_so),
                ck.poa.map(num).unwrap_or_default(),
            ])?;
        }
        t.save(&args.out.join("poa_sweep.csv"))?;
    }
    let text = serde_json::to_string_pretty(&c)?;
    std::fs::write(args.out.join("poa.json"), text.clone() + "\n")?;
    manifest(key, &loaded, &args.out, started).write(&args.out)?;
    println!("{text}");
    Ok(0)
}

fn equilibrium_table(report: &EquilibriumReport, hash: &str) -> Result<Table> {
    let mut t = Table::new(
        hash,
        &["od", "option", "cost", "min_cost", "deviation_best_gain", "verdict"],
    )?;
    for row in &report.rows {
        let verdict = serde_json::to_value(row.verdict)?;
        t.row([
            od_label(row.origin, row.destination),
            row.option.clone(),
            num(row.cost),
            num(row.min_cost),
            row.deviation_best_gain.map(num).unwrap_or_default(),
            verdict.as_str().unwrap_or_default().to_string(),
        ])?;
    }
    Ok(t)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    let started = unix_now();
    let loaded = load(&args.scenario)?;
    let s = &loaded.scenario;
    let opts = run_options(&args.solver)?;
    let key = run_key("verify", &loaded, &[args.principle], json!({ "run": opts, "tol": args.tol }));
    let hash = key.hash();
    create_dir(&args.out)?;
    let catalog = PathCatalog::build(s);
    let r = solve_once(s, &catalog, args.principle, &opts)?;
    let report = verify_equilibrium(s, &catalog, &r.model.space, &r.assignment, args.principle, args.tol);
    equilibrium_table(&report, &hash)?.save(&args.out.join("equilibrium.csv"))?;
    manifest(key, &loaded, &args.out, started).write(&args.out)?;
    let mut verdicts: BTreeMap<String, usize> = BTreeMap::new();
    for row in &report.rows {
        *verdicts
            .entry(serde_json::to_value(row.verdict)?.as_str().unwrap_or_default().to_string())
            .or_default() += 1;
    }
    let worst = report
        .rows
        .iter()
        .filter_map(|r| r.deviation_best_gain)
        .fold(None, |m: Option<f64>, g| Some(m.map_or(g, |m| m.max(g))));
    println!(
        "{}",
        serde_json::to_string(&json!({
            "passed": report.passed(),
            "status": r.solution.status,
            "verdicts": verdicts,
            "max_deviation_gain": worst,
            "manifest_hash": hash,
        }))?
    );
    Ok(0)
}

fn cmd_oracle(args: &OracleArgs) -> Result<u8> {
    let loaded = load(&args.scenario)?;
    let s = &loaded.scenario;
    let catalog = PathCatalog::build(s);
    let r = brute_force_solve(s, &catalog, args.principle, None, args.cap)
        .map_err(|e| fail("oracle", 1, e.to_string()))?;
    println!(
        "{}",
        serde_json::to_string(&json!({
            "objective": r.objective,
            "optima": r.optima.len(),
            "candidates": r.candidates,
        }))?
    );
    Ok(0)
}

fn report(err: &anyhow::Error) -> u8 {
    let failure = match err.downcast_ref::<Failure>() {
        Some(f) => json!({ "error": { "kind": f.kind, "message": f.message } }),
        None => json!({ "error": { "kind": "internal", "message": format!("{err:#}") } }),
    };
    eprintln!("{failure}");
    err.downcast_ref::<Failure>().map_or(1, |f| f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let err = anyhow!(Failure {
                kind: "usage".into(),
                message: message.trim().to_string(),
                code: 2,
            });
            return ExitCode::from(report(&err));
        }
    };
    let outcome = match &cli.command {
        Command::Validate(a) => cmd_validate(a),
        Command::Paths(a) => cmd_paths(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => ExitCode::from(report(&e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges() {
        assert_eq!(parse_sweep("demand:1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_sweep("demand:2..=3").unwrap(), vec![2, 3]);
        assert!(parse_sweep("demand:0..3").is_err());
        assert!(parse_sweep("fare:1..3").is_err());
        assert!(parse_sweep("demand:4..2").is_err());
    }

    #[test]
    fn od_pairs() {
        assert_eq!(parse_od("1,2").unwrap(), (1, 2));
        assert!(parse_od("1-2").is_err());
    }
}
