//! The `see` command line.
//!
//! Every subcommand reads one TOML run file (see [`crate::io::config`]), applies the
//! command-line overrides, and writes its artifacts into the output directory:
//! `run.json` with the effective configuration plus the subcommand's report and CSV
//! tables. Each artifact carries the run seed. Failures print one JSON error record on
//! stderr and exit nonzero.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{simulate_trajectory, GameModel, StrategyProfile, ValuePair};
use crate::hc::{classify_regime, solve_hc, HcSolution};
use crate::hierarchy::{verify_hierarchy, HierarchyOptions};
use crate::io::config::{LoadedModel, RunConfig};
use crate::io::output::{to_json, write_atomic, Table};
use crate::mse::{enumerate_stationary_mpe, solve_mse, EquilibriumSet, SolveOptions};
use crate::refine::{
    run_pipeline, EquilibriumOptions, OutsideOption, PenaltyMode, PipelineOptions, RefinementReport,
};

/// Exit code of a run that failed inside a module.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code of a usage or configuration error.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "see", version, about = "Sustainable exploitation equilibria of exploiter/exploitee games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the coupled Bellman system for one certified equilibrium.
    Solve(CommonArgs),
    /// Enumerate every pure stationary equilibrium.
    Enumerate(CommonArgs),
    /// Run the viability / renegotiation / selection pipeline.
    Refine(RefineArgs),
    /// Solve the hegemon/client grid game and classify its steady state.
    Hc(CommonArgs),
    /// Certify the equilibrium hierarchy on an enumerable model.
    Hierarchy(RefineArgs),
    /// Play a profile forward from a start state.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Run file (TOML).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Bellman residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Deviation-gain certification tolerance.
    #[arg(long)]
    cert_tol: Option<f64>,
    /// Largest profile space enumerated.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Debug, Args)]
struct RefineArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Catastrophe penalty M.
    #[arg(long, conflicts_with = "find_threshold")]
    penalty: Option<f64>,
    /// Search for the smallest penalty making every equilibrium viable.
    #[arg(long)]
    find_threshold: bool,
    #[arg(long)]
    selection_state: Option<usize>,
    /// Reading of the state quantifier in the renegotiation test.
    #[arg(long, value_parser = ["some-state", "all-states"])]
    rp_quantifier: Option<String>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

fn error_record(kind: &str, message: String) -> String {
    serde_json::to_string(&ErrorRecord { error: ErrorBody { kind, message } }).expect("error record serializes")
}

/// Runs the CLI on `argv` (program name first) and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if matches!(e.kind(), ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                eprint!("{e}");
                return EXIT_USAGE;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", error_record("usage", first));
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_record(e.kind(), e.to_string()));
            match e {
                Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn load(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(t) = common.tol {
        cfg.run.tol = t;
    }
    if let Some(t) = common.cert_tol {
        cfg.run.cert_tol = t;
    }
    if let Some(b) = common.budget {
        cfg.run.budget = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_refine(args: &RefineArgs) -> Result<RunConfig> {
    let mut cfg = load(&args.common)?;
    if let Some(m) = args.penalty {
        cfg.refine.penalty = Some(m);
        cfg.refine.find_threshold = false;
    }
    if args.find_threshold {
        cfg.refine.find_threshold = true;
    }
    if let Some(s) = args.selection_state {
        cfg.refine.selection_state = Some(s);
    }
    if let Some(q) = &args.rp_quantifier {
        cfg.refine.rp_quantifier = q.parse().map_err(|_| Error::Config(format!("unknown quantifier `{q}`")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes artifacts into one output directory.
struct Sink {
    dir: PathBuf,
    seed: u64,
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    seed: u64,
    fingerprint: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    seed: u64,
    command: &'a str,
    version: &'a str,
    fingerprint: &'a str,
    config: &'a RunConfig,
}

impl Sink {
    fn new(cfg: &RunConfig) -> Self {
        Self { dir: PathBuf::from(cfg.output_dir()), seed: cfg.run.seed }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, fingerprint: &str, body: &T) -> Result<()> {
        let text = to_json(&Artifact { seed: self.seed, fingerprint, body })?;
        write_atomic(&self.path(name), text.as_bytes())
    }

    fn csv(&self, name: &str, table: &Table) -> Result<()> {
        write_atomic(&self.path(name), &table.to_csv()?)
    }

    fn run_record(&self, command: &str, fingerprint: &str, cfg: &RunConfig) -> Result<()> {
        let rec = RunRecord { seed: self.seed, command, version: env!("CARGO_PKG_VERSION"), fingerprint, config: cfg };
        write_atomic(&self.path("run.json"), to_json(&rec)?.as_bytes())
    }
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Solve(a) => cmd_solve(&load(&a)?),
        Command::Enumerate(a) => cmd_enumerate(&load(&a)?),
        Command::Refine(a) => cmd_refine(&load_refine(&a)?),
        Command::Hc(a) => cmd_hc(&load(&a)?),
        Command::Hierarchy(a) => cmd_hierarchy(&load_refine(&a)?),
        Command::Simulate(a) => {
            let mut cfg = load(&a.common)?;
            if let Some(s) = a.start {
                cfg.simulate.start = Some(s);
            }
            if let Some(h) = a.horizon {
                cfg.simulate.horizon = h;
            }
            cmd_simulate(&cfg)
        }
    }
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions { tol: cfg.run.tol, cert_tol: cfg.run.cert_tol, ..SolveOptions::default() }
}

/// Pipeline settings of a run file.
pub fn pipeline_options(cfg: &RunConfig) -> PipelineOptions {
    let r = &cfg.refine;
    let penalty = if r.find_threshold {
        PenaltyMode::Search { m_cap: r.m_cap, tol: r.threshold_tol }
    } else {
        match r.penalty {
            Some(m) if m > 0.0 => PenaltyMode::Fixed(m),
            _ => PenaltyMode::None,
        }
    };
    PipelineOptions {
        penalty,
        selection_state: r.selection_state,
        outside: r.outside.clone().map(OutsideOption),
        quantifier: r.rp_quantifier,
        compare_tol: r.compare_tol,
        equilibria: EquilibriumOptions {
            source: r.source.into(),
            cert_tol: cfg.run.cert_tol,
            budget: cfg.run.budget,
            solve: solve_options(cfg),
        },
        compare_routes: true,
    }
}

/// Per-state values and on-path actions; `profile` column distinguishes set members.
fn value_table(model: &GameModel, rows: &[(usize, &StrategyProfile, &ValuePair)], seed: u64) -> Table {
    let mut t = Table::new(["seed", "profile", "state", "label", "leader_action", "effort", "w_x", "w_e"]);
    for &(k, p, v) in rows {
        for s in 0..model.n_states() {
            let x = p.leader[s];
            t.push(vec![
                seed.into(),
                k.into(),
                s.into(),
                model.label(s).into(),
                x.into(),
                p.follower[s][x].into(),
                v.w_x[s].into(),
                v.w_e[s].into(),
            ]);
        }
    }
    t
}

fn set_table(model: &GameModel, set: &EquilibriumSet, seed: u64) -> Table {
    let rows: Vec<_> = set.members.iter().enumerate().map(|(k, m)| (k, &m.profile, &m.values)).collect();
    value_table(model, &rows, seed)
}

fn cmd_solve(cfg: &RunConfig) -> Result<String> {
    let LoadedModel { model, .. } = cfg.build_model()?;
    let sink = Sink::new(cfg);
    let fp = model.fingerprint();
    let sol = solve_mse(&model, &solve_options(cfg))?;
    sink.run_record("solve", &fp, cfg)?;
    sink.json("solution.json", &fp, &sol)?;
    sink.csv("values.csv", &value_table(&model, &[(0, &sol.profile, &sol.values)], cfg.run.seed))?;
    Ok(format!("solve: certified equilibrium after {} sweeps (max gain {:e})", sol.sweeps, sol.report.max_gain))
}

fn cmd_enumerate(cfg: &RunConfig) -> Result<String> {
    let LoadedModel { model, .. } = cfg.build_model()?;
    let sink = Sink::new(cfg);
    let fp = model.fingerprint();
    let set = enumerate_stationary_mpe(&model, cfg.run.cert_tol, cfg.run.budget)?;
    sink.run_record("enumerate", &fp, cfg)?;
    sink.json("equilibria.json", &fp, &set)?;
    sink.csv("values.csv", &set_table(&model, &set, cfg.run.seed))?;
    Ok(format!("enumerate: {} equilibria", set.len()))
}

fn profile_text(p: &StrategyProfile) -> String {
    format!("leader={:?} follower={:?}", p.leader, p.follower)
}

fn elimination_table(report: &RefinementReport, seed: u64) -> Table {
    let mut t = Table::new(["seed", "eliminated", "dominator", "state", "margin"]);
    for e in &report.eliminations {
        t.push(vec![
            seed.into(),
            profile_text(&e.eliminated).into(),
            profile_text(&e.dominator).into(),
            e.state.into(),
            e.margin.into(),
        ]);
    }
    t
}

fn cmd_refine(cfg: &RunConfig) -> Result<String> {
    let LoadedModel { model, viability, .. } = cfg.build_model()?;
    let sink = Sink::new(cfg);
    let fp = model.fingerprint();
    let report = run_pipeline(&model, &viability, &pipeline_options(cfg))?;
    sink.run_record("refine", &fp, cfg)?;
    sink.json("report.json", &fp, &report)?;
    sink.csv("equilibria.csv", &set_table(&model, &report.equilibria, cfg.run.seed))?;
    sink.csv("viable.csv", &set_table(&model, &report.viable, cfg.run.seed))?;
    sink.csv("eliminations.csv", &elimination_table(&report, cfg.run.seed))?;
    let selected: Vec<_> = report.selected.iter().map(|s| (0, &s.profile, &s.values)).collect();
    sink.csv("selected.csv", &value_table(&model, &selected, cfg.run.seed))?;
    Ok(format!(
        "refine: {} equilibria, {} viable, {} renegotiation-proof, {}",
        report.equilibria.len(),
        report.viable.len(),
        report.renegotiation_proof.len(),
        if report.selected.is_some() { "SEE selected" } else { "no SEE" }
    ))
}

fn hc_policy_table(sol: &HcSolution, seed: u64) -> Table {
    let mut t = Table::new(["seed", "state", "s", "x_star", "e_star", "v_h", "w_c", "viable"]);
    for i in 0..sol.model.n_states() {
        t.push(vec![
            seed.into(),
            i.into(),
            sol.state(i).into(),
            sol.extraction(i).into(),
            sol.effort(i).into(),
            sol.values.w_x[i].into(),
            sol.values.w_e[i].into(),
            u64::from(sol.viability.contains(i)).into(),
        ]);
    }
    t
}

fn cmd_hc(cfg: &RunConfig) -> Result<String> {
    let LoadedModel { hc, .. } = cfg.build_model()?;
    let params = hc.ok_or_else(|| Error::Config("the hc subcommand needs kind = \"hc\"".into()))?;
    let sink = Sink::new(cfg);
    let sol = solve_hc(&params)?;
    let regime = classify_regime(&sol)?;
    let fp = sol.model.fingerprint();
    sink.run_record("hc", &fp, cfg)?;
    sink.json("regime.json", &fp, &regime)?;
    sink.csv("policy.csv", &hc_policy_table(&sol, cfg.run.seed))?;
    Ok(format!("hc: {:?} regime, s* = {}, x* = {}", regime.regime, regime.steady_state, regime.extraction))
}

fn cmd_hierarchy(cfg: &RunConfig) -> Result<String> {
    let LoadedModel { model, viability, .. } = cfg.build_model()?;
    let sink = Sink::new(cfg);
    let fp = model.fingerprint();
    let opts = HierarchyOptions {
        tol: cfg.run.cert_tol,
        budget: cfg.run.budget,
        pipeline: PipelineOptions { compare_routes: false, ..pipeline_options(cfg) },
    };
    let report = verify_hierarchy(&model, &viability, &opts)?;
    sink.run_record("hierarchy", &fp, cfg)?;
    sink.json("hierarchy.json", &fp, &report)?;
    Ok(format!(
        "hierarchy: {} MPE, {} viable, {} renegotiation-proof, {} SEE; all verdicts hold",
        report.counts.mpe, report.counts.viable, report.counts.renegotiation_proof, report.counts.see
    ))
}

fn cmd_simulate(cfg: &RunConfig) -> Result<String> {
    let loaded = cfg.build_model()?;
    let sink = Sink::new(cfg);
    let (model, profile) = match (&cfg.simulate.profile, loaded.hc) {
        (Some(p), _) => (loaded.model, p.clone()),
        (None, Some(params)) => {
            let sol = solve_hc(&params)?;
            (sol.model, sol.profile)
        }
        (None, None) => {
            let sol = solve_mse(&loaded.model, &solve_options(cfg))?;
            (loaded.model, sol.profile)
        }
    };
    let start = cfg.simulate.start.unwrap_or_else(|| model.initial_state());
    let path = simulate_trajectory(&model, &profile, start, cfg.simulate.horizon, cfg.run.seed)?;
    let fp = model.fingerprint();
    let mut t = Table::new(["seed", "t", "state", "label", "leader_action", "effort", "payoff_x", "payoff_e"]);
    for (k, st) in path.iter().enumerate() {
        t.push(vec![
            cfg.run.seed.into(),
            k.into(),
            st.state.into(),
            model.label(st.state).into(),
            st.leader_action.into(),
            st.effort.into(),
            st.payoff_x.into(),
            st.payoff_e.into(),
        ]);
    }
    sink.run_record("simulate", &fp, cfg)?;
    sink.json("profile.json", &fp, &profile)?;
    sink.csv("trajectory.csv", &t)?;
    Ok(format!("simulate: {} periods from state {start}", path.len()))
}
