mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pcosim::analysis::{
    check_firing_order, check_period_one_if_synced, check_sync_persistence, check_theorem1,
    isi_summary, AnalysisReport, RunClassification, Witness,
};
use pcosim::montecarlo::{estimate_on, sweep, CellJob, SweepRow, SweepSpec};
use pcosim::output::{firing_log_csv, heatmap_svg, raster_svg, report_json, sweep_csv};
use pcosim::{Engine, FiringLog, PhaseMap, PropertyId, PropertyReport, RegionClass, Snapshot};
use serde::Serialize;

use config::{load, load_sweep, RunConfig};

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_UNCLASSIFIED: u8 = 3;

#[derive(Parser)]
#[command(name = "pcosim", version, about = "Delay-coupled pulse oscillator simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    shared: Shared,
}

#[derive(clap::Args)]
struct Shared {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Format of tabular output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Also write SVG figures.
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads for estimation and sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 3 when a run ends unclassified.
    #[arg(long, global = true)]
    require_classified: bool,
    /// Evaluate interspike and firing properties outside their parameter region.
    #[arg(long, global = true)]
    override_region: bool,
    /// Print the resolved configuration with defaults and exit.
    #[arg(long, global = true)]
    dump_config: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write the firing log and analysis report.
    Simulate,
    /// Run one simulation and check interspike and firing properties.
    Check {
        /// Comma-separated subset of theorem1,p1,p2,p3.
        #[arg(long, value_delimiter = ',', default_value = "theorem1,p1,p2,p3")]
        properties: Vec<PropertyArg>,
    },
    /// Estimate the synchronized fraction for one parameter point.
    Estimate,
    /// Estimate the synchronized fraction over a parameter grid.
    Sweep,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PropertyArg {
    Theorem1,
    P1,
    P2,
    P3,
}

enum Failure {
    Config(String),
    Io(String),
}

type CmdResult = Result<u8, Failure>;

fn cfg<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.to_string()))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate => simulate(&cli.shared),
        Command::Check { ref properties } => check(&cli.shared, properties),
        Command::Estimate => estimate_cmd(&cli.shared),
        Command::Sweep => sweep_cmd(&cli.shared),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn config_path(shared: &Shared) -> Result<&Path, Failure> {
    shared
        .config
        .as_deref()
        .ok_or_else(|| Failure::Config("--config <path> is required".into()))
}

fn load_run(shared: &Shared) -> Result<RunConfig, Failure> {
    let mut c: RunConfig = load(config_path(shared)?).map_err(Failure::Config)?;
    if let Some(seed) = shared.seed {
        c.apply_seed(seed);
    }
    Ok(c)
}

fn dump<T: Serialize>(value: &T) -> CmdResult {
    println!("{}", serde_json::to_string_pretty(value).expect("config serializes"));
    Ok(0)
}

fn prepare_out(shared: &Shared) -> Result<(), Failure> {
    fs::create_dir_all(&shared.out).map_err(|e| Failure::Io(format!("{}: {e}", shared.out.display())))
}

struct Simulation {
    map: PhaseMap,
    topology: pcosim::NetworkTopology,
    log: FiringLog,
    snapshots: Vec<Snapshot>,
    classification: RunClassification,
}

fn run_simulation(c: &RunConfig) -> Result<Simulation, Failure> {
    let map = cfg(c.phase_map())?;
    let topology = cfg(c.topology())?;
    let phases = cfg(c.phases())?;
    cfg(c.budget.validate())?;
    let engine = Engine::with_settings(&map, &topology, c.engine);
    let (out, snapshots) = cfg(engine.run_recorded(cfg(engine.init(&phases))?, c.budget.stop(c.n())))?;
    let classification = pcosim::classify_run(&out.log, &snapshots, &topology, &c.tolerances);
    Ok(Simulation {
        map,
        topology,
        log: out.log,
        snapshots,
        classification,
    })
}

fn write_log(shared: &Shared, log: &FiringLog) -> Result<(), Failure> {
    match shared.format {
        Format::Csv => write(&shared.out.join("firing_log.csv"), &firing_log_csv(log)),
        Format::Json => write(
            &shared.out.join("firing_log.json"),
            &serde_json::to_string_pretty(log).expect("log serializes"),
        ),
    }?;
    if shared.svg {
        write(&shared.out.join("raster.svg"), &raster_svg(log))?;
    }
    Ok(())
}

fn unclassified_code(shared: &Shared, c: &RunClassification) -> u8 {
    if shared.require_classified && c.is_undecided() {
        eprintln!("run ended unclassified: {c}");
        EXIT_UNCLASSIFIED
    } else {
        0
    }
}

fn simulate(shared: &Shared) -> CmdResult {
    let c = load_run(shared)?;
    if shared.dump_config {
        return dump(&c);
    }
    let sim = run_simulation(&c)?;
    prepare_out(shared)?;
    write_log(shared, &sim.log)?;
    let report = AnalysisReport {
        classification: sim.classification.clone(),
        properties: Vec::new(),
        isi_summary: isi_summary(&sim.log),
    };
    write(&shared.out.join("report.json"), &cfg(report_json(&report))?)?;
    println!("{} firings; {}", sim.log.len(), sim.classification);
    Ok(unclassified_code(shared, &sim.classification))
}

#[derive(Serialize)]
struct CheckEntry {
    id: PropertyId,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair: Option<(usize, usize)>,
}

#[derive(Serialize)]
struct CheckReport {
    region: RegionClass,
    classification: RunClassification,
    properties: Vec<CheckEntry>,
}

fn skipped(id: PropertyId, reason: impl Into<String>) -> CheckEntry {
    CheckEntry {
        id,
        status: "skipped",
        reason: Some(reason.into()),
        witness: None,
        pair: None,
    }
}

fn entry(r: PropertyReport, pair: Option<(usize, usize)>) -> CheckEntry {
    CheckEntry {
        id: r.id,
        status: if r.holds { "holds" } else { "violated" },
        reason: r.note,
        witness: r.witness,
        pair,
    }
}

/// Checks every symmetric pair; reports the first violation or success.
fn check_pairs(
    id: PropertyId,
    pairs: &[(usize, usize)],
    mut f: impl FnMut(usize, usize) -> pcosim::Result<PropertyReport>,
) -> Result<CheckEntry, Failure> {
    if pairs.is_empty() {
        return Ok(skipped(id, "hypothesis not met: no symmetric pair in the topology"));
    }
    for &(i, j) in pairs {
        let r = cfg(f(i, j))?;
        if !r.holds {
            return Ok(entry(r, Some((i, j))));
        }
    }
    let mut ok = skipped(id, format!("{} symmetric pairs checked", pairs.len()));
    ok.status = "holds";
    Ok(ok)
}

fn check(shared: &Shared, properties: &[PropertyArg]) -> CmdResult {
    let c = load_run(shared)?;
    if shared.dump_config {
        return dump(&c);
    }
    let sim = run_simulation(&c)?;
    let region = if c.eps == 0.0 {
        RegionClass::A1
    } else {
        cfg(sim.map.classify_region(c.tau, c.eps, c.tolerances.boundary_tol))?
    };
    let gate = region.is_a1() || shared.override_region;
    let pairs = sim.topology.symmetric_pairs();
    let tol = &c.tolerances;
    let mut entries = Vec::new();
    for &p in properties {
        let id = match p {
            PropertyArg::Theorem1 => PropertyId::Theorem1,
            PropertyArg::P1 => PropertyId::P1,
            PropertyArg::P2 => PropertyId::P2,
            PropertyArg::P3 => PropertyId::P3,
        };
        if !gate {
            entries.push(skipped(id, format!("hypothesis (tau, eps) in A1 not met: region {region}")));
            continue;
        }
        let e = match p {
            PropertyArg::Theorem1 => entry(
                cfg(check_theorem1(&sim.log, c.tau, region, shared.override_region, tol.isi_slack))?,
                None,
            ),
            PropertyArg::P1 => check_pairs(id, &pairs, |i, j| {
                check_firing_order(&sim.log, &sim.topology, i, j, tol.tie_tolerance)
            })?,
            PropertyArg::P2 => check_pairs(id, &pairs, |i, j| {
                check_sync_persistence(&sim.log, &sim.snapshots, &sim.topology, i, j, tol)
            })?,
            PropertyArg::P3 => {
                if !sim.classification.is_synchronized() {
                    skipped(id, "hypothesis not met: run is not completely synchronized")
                } else if region.is_a2() {
                    skipped(id, format!("period-one check needs (tau, eps) in A1: region {region}"))
                } else {
                    entry(
                        cfg(check_period_one_if_synced(&sim.classification, c.tau, c.eps, &sim.map, tol.snapshot_tol))?,
                        None,
                    )
                }
            }
        };
        entries.push(e);
    }
    let violated = entries.iter().any(|e| e.status == "violated");
    for e in &entries {
        println!(
            "{}: {}{}",
            e.id.name(),
            e.status,
            e.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default()
        );
    }
    let report = CheckReport {
        region,
        classification: sim.classification.clone(),
        properties: entries,
    };
    prepare_out(shared)?;
    write_log(shared, &sim.log)?;
    write(
        &shared.out.join("check.json"),
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    if violated {
        return Ok(EXIT_VIOLATION);
    }
    Ok(unclassified_code(shared, &sim.classification))
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match workers {
        None => Ok(f()),
        Some(w) => rayon_pool(w).map(|p| p.install(f)),
    }
}

fn rayon_pool(workers: usize) -> Result<pcosim::montecarlo::WorkerPool, Failure> {
    pcosim::montecarlo::WorkerPool::new(workers).map_err(|e| Failure::Config(e.to_string()))
}

fn write_rows(shared: &Shared, rows: &[SweepRow], stem: &str) -> Result<(), Failure> {
    match shared.format {
        Format::Csv => write(&shared.out.join(format!("{stem}.csv")), &sweep_csv(rows)),
        Format::Json => {
            let cells: Vec<_> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "tau": r.tau,
                        "eps": r.eps,
                        "N": r.n,
                        "region": r.region.map(|g| g.label()),
                        "cell": r.cell.as_ref().ok(),
                        "error": r.cell.as_ref().err(),
                    })
                })
                .collect();
            write(
                &shared.out.join(format!("{stem}.json")),
                &serde_json::to_string_pretty(&cells).expect("rows serialize"),
            )
        }
    }
}

fn estimate_cmd(shared: &Shared) -> CmdResult {
    let c = load_run(shared)?;
    if shared.dump_config {
        return dump(&c);
    }
    let map = cfg(c.phase_map())?;
    let topology = cfg(c.topology())?;
    let job = CellJob {
        tau: c.tau,
        eps: c.eps,
        n: c.n(),
        samples: c.samples,
        seed: c.seed,
        budget: c.budget,
        tolerances: c.tolerances,
        settings: c.engine,
    };
    let cell = cfg(with_workers(shared.workers, || estimate_on(&map, &topology, &job))?)?;
    let row = SweepRow {
        tau: c.tau,
        eps: c.eps,
        n: c.n(),
        region: map.classify_region(c.tau, c.eps, c.tolerances.boundary_tol).ok(),
        cell: Ok(cell.clone()),
    };
    prepare_out(shared)?;
    write_rows(shared, std::slice::from_ref(&row), "estimate")?;
    println!(
        "P = {} [{}, {}] from {} samples ({} synchronized, {} undecided)",
        cell.p_hat, cell.ci_low, cell.ci_high, cell.samples, cell.sync_count, cell.undecided_count
    );
    Ok(if shared.require_classified && cell.undecided_count > 0 {
        EXIT_UNCLASSIFIED
    } else {
        0
    })
}

fn sweep_cmd(shared: &Shared) -> CmdResult {
    let path = config_path(shared)?;
    let mut spec: SweepSpec = load_sweep(path).map_err(Failure::Config)?;
    if let Some(seed) = shared.seed {
        spec.seed = seed;
    }
    if shared.dump_config {
        return dump(&spec);
    }
    let rows = cfg(sweep(&spec, shared.workers))?;
    prepare_out(shared)?;
    write_rows(shared, &rows, "sweep")?;
    if shared.svg {
        let map = cfg(spec.phase_map.build())?;
        for n in spec.n.values() {
            let subset: Vec<_> = rows.iter().filter(|r| r.n == n).cloned().collect();
            write(&shared.out.join(format!("heatmap_N{n}.svg")), &heatmap_svg(&subset, &map))?;
        }
    }
    let failed = rows.iter().filter(|r| r.cell.is_err()).count();
    for r in rows.iter().filter(|r| r.cell.is_err()) {
        eprintln!("cell tau={} eps={} N={}: {}", r.tau, r.eps, r.n, r.cell.as_ref().unwrap_err());
    }
    let a2: Vec<_> = rows
        .iter()
        .filter(|r| r.region.is_some_and(|g| g.is_a2()))
        .collect();
    let black_a2 = a2.iter().filter(|r| r.cell.as_ref().is_ok_and(|c| c.p_hat > 0.0)).count();
    let black_a1 = rows
        .iter()
        .filter(|r| r.region == Some(RegionClass::A1) && r.cell.as_ref().is_ok_and(|c| c.p_hat > 0.0))
        .count();
    let undecided: u64 = rows.iter().filter_map(|r| r.cell.as_ref().ok()).map(|c| c.undecided_count).sum();
    println!(
        "{} cells; {black_a2}/{} A2 cells with p_hat > 0; {black_a1} A1 cells with p_hat > 0; {undecided} undecided samples; {failed} failed cells",
        rows.len(),
        a2.len()
    );
    Ok(if shared.require_classified && undecided > 0 {
        EXIT_UNCLASSIFIED
    } else {
        0
    })
}
