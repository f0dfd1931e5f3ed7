mod artifacts;

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use edgeadapt::bundled;
use edgeadapt::fsm::{parse_fsm, validate_fsm, FsmSpec};
use edgeadapt::pareto::FrontDocument;
use edgeadapt::report::{self, Format, Tabular};
use edgeadapt::sim::{compare, simulate_adaptive, simulate_static, ComparisonTable, SimConfig, DEFAULT_BLOCK_HOURS};
use edgeadapt::wgra::{parse_mode_specs, select_modes, ModeSpec, DEFAULT_ZETA};
use edgeadapt::{
    extract_front, generate_scenario, Configuration, DeviceModelParams, FsmRuntime, OperationMode, ParetoFront, Sampler,
    Scenario, ScenarioKind, SearchBudget, SearchSpace, SimulationReport, SyntheticDevice, TrialStore, DEFAULT_DIRECTIONS,
};

use artifacts::{seeded_path, sibling, to_json, Run};

#[derive(Parser)]
#[command(name = "edgeadapt", version, about = "Design and replay energy-aware self-adaptive edge applications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Configuration-space checks
    #[command(subcommand)]
    Space(SpaceCommand),
    /// Multi-objective search over the configuration space
    Search(SearchArgs),
    /// Pareto-front extraction
    #[command(subcommand)]
    Front(FrontCommand),
    /// Operation-mode selection
    #[command(subcommand)]
    Modes(ModesCommand),
    /// State-machine checks
    #[command(subcommand)]
    Fsm(FsmCommand),
    /// Replay a scenario with the adaptive FSM or a static mode
    Simulate(SimulateArgs),
    /// Compare simulation reports, the first one is the subject
    Compare(CompareArgs),
    /// Render a report, comparison or mode table
    Report(ReportArgs),
}

#[derive(Args)]
struct SpaceArgs {
    /// Space document (TOML); the bundled pedestrian space if omitted
    #[arg(long)]
    space: Option<PathBuf>,
}

#[derive(Args)]
struct DeviceArgs {
    /// Device-model document (TOML); the bundled synthetic model if omitted
    #[arg(long)]
    device: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SpaceCommand {
    /// Parse a space document and optionally check one configuration
    Validate {
        #[command(flatten)]
        space: SpaceArgs,
        /// Configuration as a JSON array, e.g. '["640x480",30,"SSD MobileNet V1",0.4,true]'
        #[arg(long)]
        config: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Nsga2,
    Random,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("budget_choice").required(true).args(["budget", "budget_frac"])))]
struct SearchArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    device: DeviceArgs,
    #[arg(long, value_enum, default_value = "nsga2")]
    sampler: SamplerArg,
    /// Maximum number of unique trials
    #[arg(long)]
    budget: Option<usize>,
    /// Budget as a fraction of the space cardinality
    #[arg(long)]
    budget_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = edgeadapt::search::DEFAULT_POPULATION)]
    population: usize,
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repeats: u32,
    /// Mode specs for the mode-frequency summary of repeated runs
    #[arg(long)]
    modes: Option<PathBuf>,
    /// Trial log (JSONL); repeated runs insert `.seedN` before the extension
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum FrontCommand {
    /// Extract the non-dominated set of a trial log
    Extract {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ModesCommand {
    /// Pick one configuration per operation mode with WGRA
    Select {
        #[command(flatten)]
        space: SpaceArgs,
        /// Front document written by `front extract`
        #[arg(long)]
        front: PathBuf,
        /// Mode-spec document (TOML); the bundled pedestrian modes if omitted
        #[arg(long)]
        modes: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ZETA)]
        zeta: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FsmCommand {
    /// Check determinism, reachability and the initial state
    Validate {
        /// FSM document (TOML); the bundled pedestrian FSM if omitted
        #[arg(long)]
        fsm: Option<PathBuf>,
        /// Mode table; when given every state must have a mode
        #[arg(long)]
        modes_table: Option<PathBuf>,
    },
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("subject").args(["fsm", "static_mode"])))]
struct SimulateArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    device: DeviceArgs,
    /// `weekdays`, `weekends` or a scenario document
    #[arg(long)]
    scenario: String,
    /// FSM document for the adaptive subject; the bundled FSM if neither this nor --static is given
    #[arg(long)]
    fsm: Option<PathBuf>,
    /// Run a single mode for the whole scenario
    #[arg(long = "static", value_name = "MODE")]
    static_mode: Option<String>,
    /// Mode table written by `modes select`
    #[arg(long)]
    modes_table: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subject name of the adaptive run
    #[arg(long, default_value = "adaptive")]
    name: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Simulation reports; the first is compared against the others
    #[arg(long, num_args = 2.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BLOCK_HOURS)]
    block_hours: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Table,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum View {
    /// Per-window rows and aggregates of a simulation report
    Windows,
    /// Aggregates and deltas of a comparison
    Aggregates,
    /// Per-block energy box plots of a comparison
    Boxplot,
    /// Per-subject radar coordinates of a comparison
    Radar,
    /// Mode table
    Modes,
}

#[derive(Args)]
struct ReportArgs {
    /// Simulation report, comparison or mode table (JSON)
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: FormatArg,
    /// Defaults to the natural view of the input
    #[arg(long, value_enum)]
    view: Option<View>,
    /// Write here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Space(SpaceCommand::Validate { space, config }) => space_validate(space, config),
        Command::Search(args) => search(args),
        Command::Front(FrontCommand::Extract { space, trials, out }) => front_extract(space, &trials, &out),
        Command::Modes(ModesCommand::Select {
            space,
            front,
            modes,
            zeta,
            out,
        }) => modes_select(space, &front, modes.as_deref(), zeta, &out),
        Command::Fsm(FsmCommand::Validate { fsm, modes_table }) => fsm_validate(fsm.as_deref(), modes_table.as_deref()),
        Command::Simulate(args) => simulate(args),
        Command::Compare(args) => compare_reports(args),
        Command::Report(args) => emit_report(args),
    }
}

fn load_space(run: &mut Run, args: &SpaceArgs) -> Result<SearchSpace> {
    let text = run.input("space", args.space.as_deref(), bundled::PEDESTRIAN_SPACE)?;
    Ok(SearchSpace::parse(&text)?)
}

fn load_device(run: &mut Run, args: &DeviceArgs, space: &SearchSpace) -> Result<SyntheticDevice> {
    let text = run.input("device", args.device.as_deref(), bundled::DEVICE_MODEL)?;
    Ok(SyntheticDevice::new(DeviceModelParams::parse(&text)?, space)?)
}

fn load_mode_specs(run: &mut Run, path: Option<&Path>) -> Result<Vec<ModeSpec>> {
    let text = run.input("modes", path, bundled::PEDESTRIAN_MODES)?;
    Ok(parse_mode_specs(&text)?)
}

fn load_modes_table(run: &mut Run, path: &Path) -> Result<Vec<OperationMode>> {
    let text = run.required_input("modes table", path)?;
    serde_json::from_str(&text).with_context(|| format!("`{}` is not a mode table", path.display()))
}

fn space_validate(args: SpaceArgs, config: Option<String>) -> Result<()> {
    let mut run = Run::new("space validate");
    let space = load_space(&mut run, &args)?;
    println!("{} parameters, {} configurations", space.parameters().len(), space.cardinality());
    if let Some(json) = config {
        let conf: Configuration = serde_json::from_str(&json).context("configuration must be a JSON array")?;
        space.validate(&conf).map_err(|d| anyhow!("invalid configuration {conf}: {d}"))?;
        println!("{conf} is valid, index {}", space.canonical_index(&conf)?);
    }
    Ok(())
}

fn search(args: SearchArgs) -> Result<()> {
    let mut run = Run::new("search");
    let space = load_space(&mut run, &args.space)?;
    let device = load_device(&mut run, &args.device, &space)?;
    let sampler = match args.sampler {
        SamplerArg::Nsga2 => Sampler::Nsga2,
        SamplerArg::Random => Sampler::Random,
    };
    let specs = if args.repeats > 1 {
        Some(load_mode_specs(&mut run, args.modes.as_deref())?)
    } else {
        None
    };

    let mut selections: BTreeMap<String, Vec<Configuration>> = BTreeMap::new();
    for k in 0..args.repeats as u64 {
        let seed = args.seed + k;
        run.seed(seed);
        let budget = match (args.budget, args.budget_frac) {
            (Some(n), _) => SearchBudget::new(&space, n, args.population, seed)?,
            (None, Some(f)) => SearchBudget::from_fraction(&space, f, args.population, seed)?,
            (None, None) => unreachable!("clap requires one budget flag"),
        };
        let store = sampler.run(&space, &device, budget, &DEFAULT_DIRECTIONS)?;
        let mut log = Vec::new();
        store.write_log(&mut log)?;
        let path = if args.repeats > 1 {
            seeded_path(&args.out, seed)
        } else {
            args.out.clone()
        };
        println!("seed {seed}: {} unique trials -> {}", store.unique_trials(), path.display());
        run.output(path, log);

        if let Some(specs) = &specs {
            let front = extract_front(&store, &DEFAULT_DIRECTIONS);
            for mode in select_modes(&front, specs, DEFAULT_ZETA)? {
                selections.entry(mode.name().to_string()).or_default().push(mode.chosen);
            }
        }
    }

    if let Some(specs) = &specs {
        let summary = mode_frequency(specs, &selections, args.repeats);
        print!("{}", summary.render(Format::Table));
        run.output(sibling(&args.out, "mode-frequency.csv"), summary.render(Format::Csv).into_bytes());
    }
    run.commit(&args.out)
}

/// Most frequent configuration per mode over repeated searches; every tied
/// configuration gets its own row.
fn mode_frequency(specs: &[ModeSpec], selections: &BTreeMap<String, Vec<Configuration>>, repeats: u32) -> Tabular {
    let mut rows = Vec::new();
    for spec in specs {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for conf in selections.get(&spec.name).into_iter().flatten() {
            *counts.entry(conf.to_string()).or_default() += 1;
        }
        let top = counts.values().copied().max().unwrap_or(0);
        let winners: Vec<&String> = counts.iter().filter(|(_, &c)| c == top).map(|(k, _)| k).collect();
        for conf in &winners {
            rows.push(vec![
                spec.name.clone(),
                conf.to_string(),
                top.to_string(),
                repeats.to_string(),
                (winners.len() > 1).to_string(),
            ]);
        }
    }
    Tabular::new(&["mode", "configuration", "count", "repeats", "tied"], rows)
}

fn front_extract(args: SpaceArgs, trials: &Path, out: &Path) -> Result<()> {
    let mut run = Run::new("front extract");
    let space = load_space(&mut run, &args)?;
    let log = run.required_input("trial log", trials)?;
    let store = TrialStore::read_log(BufReader::new(log.as_bytes()), space)
        .with_context(|| format!("cannot load trial log `{}`", trials.display()))?;
    let front = extract_front(&store, &DEFAULT_DIRECTIONS);
    println!("{} of {} unique trials are non-dominated", front.len(), store.unique_trials());
    run.output(out, to_json(&front.to_document())?);
    run.commit(out)
}

fn load_front(run: &mut Run, path: &Path, space: &SearchSpace) -> Result<ParetoFront> {
    let text = run.required_input("front", path)?;
    let doc: FrontDocument = serde_json::from_str(&text).with_context(|| format!("`{}` is not a front document", path.display()))?;
    Ok(ParetoFront::from_document(doc, space)?)
}

fn modes_select(args: SpaceArgs, front: &Path, modes: Option<&Path>, zeta: f64, out: &Path) -> Result<()> {
    let mut run = Run::new("modes select");
    let space = load_space(&mut run, &args)?;
    let front = load_front(&mut run, front, &space)?;
    let specs = load_mode_specs(&mut run, modes)?;
    let selected = select_modes(&front, &specs, zeta)?;
    print!("{}", report::mode_table(&selected).render(Format::Table));
    run.output(out, to_json(&selected)?);
    run.commit(out)
}

fn fsm_validate(fsm: Option<&Path>, modes_table: Option<&Path>) -> Result<()> {
    let mut run = Run::new("fsm validate");
    let text = run.input("fsm", fsm, bundled::PEDESTRIAN_FSM)?;
    let spec = match modes_table {
        Some(path) => parse_fsm(&text, &load_modes_table(&mut run, path)?)?,
        None => FsmSpec::parse(&text)?,
    };
    let diagnostics = validate_fsm(&spec);
    if diagnostics.is_empty() {
        println!("{} states, {} transitions, valid", spec.states.len(), spec.transitions.len());
        return Ok(());
    }
    for d in &diagnostics {
        eprintln!("{d}");
    }
    bail!("FSM failed validation with {} diagnostic(s)", diagnostics.len())
}

fn load_scenario(run: &mut Run, name: &str, seed: u64) -> Result<Scenario> {
    match name.parse::<ScenarioKind>() {
        Ok(kind) => Ok(generate_scenario(kind, seed)),
        Err(_) => {
            let path = Path::new(name);
            if !path.exists() {
                bail!("unknown scenario `{name}` (expected weekdays, weekends or a scenario file)");
            }
            let text = run.required_input("scenario", path)?;
            Ok(Scenario::parse(&text, seed)?)
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut run = Run::new("simulate");
    let space = load_space(&mut run, &args.space)?;
    let device = load_device(&mut run, &args.device, &space)?;
    let modes = load_modes_table(&mut run, &args.modes_table)?;
    run.seed(args.seed);
    let scenario = load_scenario(&mut run, &args.scenario, args.seed)?;
    let config = SimConfig::default();
    let report = match &args.static_mode {
        Some(name) => {
            let mode = modes
                .iter()
                .find(|m| m.name() == name)
                .ok_or_else(|| anyhow!("mode `{name}` is not in the mode table"))?;
            simulate_static(&scenario, mode, &device, args.seed, &config)?
        }
        None => {
            let text = run.input("fsm", args.fsm.as_deref(), bundled::PEDESTRIAN_FSM)?;
            let spec = parse_fsm(&text, &modes)?;
            let mut fsm = FsmRuntime::new(spec, &modes)?;
            simulate_adaptive(&scenario, &mut fsm, &device, args.seed, &config, &args.name)?
        }
    };
    let a = &report.aggregates;
    println!(
        "{} on {}: {:.4} Wh, {} frames, mean accuracy {:.4}",
        report.subject, report.scenario, a.total_energy_wh, a.total_frames_processed, a.accuracy_proxy
    );
    run.output(&args.out, to_json(&report)?);
    run.commit(&args.out)
}

fn compare_reports(args: CompareArgs) -> Result<()> {
    let mut run = Run::new("compare");
    let mut reports = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let text = run.required_input("report", path)?;
        let report: SimulationReport =
            serde_json::from_str(&text).with_context(|| format!("`{}` is not a simulation report", path.display()))?;
        reports.push(report);
    }
    let table = compare(&reports, args.block_hours)?;
    print!("{}", report::comparison_table(&table).render(Format::Table));
    run.output(&args.out, to_json(&table)?);
    run.commit(&args.out)
}

enum Document {
    Report(SimulationReport),
    Comparison(ComparisonTable),
    Modes(Vec<OperationMode>),
}

fn emit_report(args: ReportArgs) -> Result<()> {
    let mut run = Run::new("report");
    let text = run.required_input("input", &args.input)?;
    let doc = if let Ok(r) = serde_json::from_str(&text) {
        Document::Report(r)
    } else if let Ok(c) = serde_json::from_str(&text) {
        Document::Comparison(c)
    } else if let Ok(m) = serde_json::from_str(&text) {
        Document::Modes(m)
    } else {
        bail!("`{}` is not a simulation report, comparison or mode table", args.input.display());
    };
    let table = match (&doc, args.view) {
        (Document::Report(r), None | Some(View::Windows)) => report::report_table(r),
        (Document::Comparison(c), None | Some(View::Aggregates)) => report::comparison_table(c),
        (Document::Comparison(c), Some(View::Boxplot)) => report::boxplot_table(c),
        (Document::Comparison(c), Some(View::Radar)) => report::radar_table(c),
        (Document::Modes(m), None | Some(View::Modes)) => report::mode_table(m),
        _ => bail!("the requested view does not apply to `{}`", args.input.display()),
    };
    let format = match args.format {
        FormatArg::Table => Format::Table,
        FormatArg::Csv => Format::Csv,
    };
    let rendered = table.render(format);
    match args.out {
        Some(out) => {
            run.output(&out, rendered.into_bytes());
            run.commit(&out)
        }
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
