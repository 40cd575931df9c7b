use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use leoreward::anchors::AnchorStore;
use leoreward::architects::KpiScaler;
use leoreward::config::RootConfig;
use leoreward::exprun::{self, ExperimentPreset, ExperimentReport, PresetName};
use leoreward::probe::ProbeReport;
use leoreward::{KpiSnapshot, RegimeLabel};

/// Adaptive-reward beam scheduling experiments.
#[derive(Parser)]
#[command(name = "leoreward", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Comma-separated seeds, e.g. 42,123,456.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Training steps per run (per probe training for `probe`).
    #[arg(long, global = true)]
    steps: Option<u64>,

    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// JSON configuration file; missing fields use defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Parallel training runs (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Repeat for more detail (-v debug, -vv trace).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Architect comparison on the known regimes.
    Compare,
    /// Architect comparison on the novel regimes.
    Generalize,
    /// Component ablation on the known regimes.
    Ablate,
    /// Constant versus per-regime switching weights.
    Dilemma {
        /// Add the throttled-interpolation run.
        #[arg(long)]
        path_c: bool,
    },
    /// Single-weight perturbation probe.
    Probe {
        /// Regime to probe; repeat for several. Defaults to the configured list.
        #[arg(long = "regime")]
        regimes: Vec<RegimeLabel>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Anchor store maintenance.
    Anchors {
        #[command(subcommand)]
        action: AnchorsCommand,
    },
    /// LLM architect with and without anchor grounding.
    RagEval,
    /// Three-timescale run driven by an operator intent schedule.
    IntentRun {
        /// JSON list of {start_step, command}; defaults to a four-phase scenario.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// CSV series and SVG charts from run directories.
    Plot {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Defaults to <out-dir>/plots.
        #[arg(long)]
        to: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum AnchorsCommand {
    /// Add probe results (probe_<regime>.json files) to the store.
    Ingest {
        #[arg(required = true)]
        probes: Vec<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Top-k anchors for a raw KPI vector.
    Query {
        /// mean demand, peak demand, gini, outage rate, demand trend
        #[arg(long, num_args = 5, allow_negative_numbers = true, required = true)]
        kpi: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

fn load_config(g: &GlobalArgs) -> Result<RootConfig> {
    let mut cfg = match &g.config {
        Some(p) => RootConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RootConfig::default(),
    };
    if let Some(s) = &g.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(d) = &g.out_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn store_path(cfg: &RootConfig, explicit: &Option<PathBuf>) -> PathBuf {
    explicit
        .clone()
        .or_else(|| cfg.anchors.path.clone())
        .unwrap_or_else(|| cfg.output_dir.join("anchors.jsonl"))
}

fn print_rows(report: &ExperimentReport) {
    println!("{:<18} {:>6} {:>18} {:>10} {:>10} {:>10}", "arm", "seeds", "rate (Mbps)", "outage", "fairness", "switches");
    for r in &report.rows {
        match &r.stats {
            Some(s) => println!(
                "{:<18} {:>6} {:>10.1} ± {:<5.1} {:>10.4} {:>10.4} {:>10.1}",
                r.arm,
                r.seeds_ok,
                s.rate_mbps.mean,
                s.rate_mbps.std,
                s.outage_rate.mean,
                s.fairness.mean,
                s.switches.mean
            ),
            None => println!("{:<18} {:>6} (all seeds failed)", r.arm, 0),
        }
        if let Some(sat) = r.mean_satisfaction {
            println!("{:<18} intent satisfaction {:.3} ± {:.3}", "", sat.mean, sat.std);
        }
    }
}

fn run_named(cfg: &RootConfig, name: PresetName) -> Result<()> {
    let preset = ExperimentPreset::from_config(name, cfg);
    let report = exprun::run_preset(cfg, &preset)?;
    print_rows(&report);
    println!("report: {}", cfg.output_dir.join(name.as_str()).join("metrics.json").display());
    Ok(())
}

fn ingest(cfg: &RootConfig, probes: &[PathBuf], store: &Option<PathBuf>) -> Result<()> {
    let path = store_path(cfg, store);
    let mut anchors = if path.is_file() {
        AnchorStore::load(&path, cfg.anchors.sigma)?
    } else {
        AnchorStore::new(cfg.anchors.sigma)?
    };
    let scaler = KpiScaler::default();
    for p in probes {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let report: ProbeReport =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
        let r = anchors.ingest(report.anchor_entries(&scaler));
        println!(
            "{}: {} added, {} replaced, {} kept, {} skipped",
            p.display(),
            r.added,
            r.replaced,
            r.kept_existing,
            r.skipped
        );
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    anchors.save(&path)?;
    println!("store: {} ({} entries)", path.display(), anchors.len());
    Ok(())
}

fn query(cfg: &RootConfig, kpi: &[f64], k: usize, store: &Option<PathBuf>) -> Result<()> {
    let path = store_path(cfg, store);
    if !path.is_file() {
        bail!("anchor store {} does not exist; run `anchors ingest` first", path.display());
    }
    let anchors = AnchorStore::load(&path, cfg.anchors.sigma)?;
    let raw: [f64; 5] = kpi.try_into().context("--kpi needs exactly 5 values")?;
    let q = KpiScaler::default().transform(&KpiSnapshot::from_array(raw));
    for hit in anchors.top_k(&q, k)? {
        println!(
            "{}",
            serde_json::json!({
                "index": hit.index,
                "score": hit.score,
                "weights": hit.entry.weights,
                "performance_mbps": hit.entry.performance_mbps,
                "source": hit.entry.source,
            })
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    let steps = cli.global.steps;
    if let (Some(s), false) = (steps, matches!(cli.command, Command::Probe { .. })) {
        cfg.steps = s;
    }
    match cli.command {
        Command::Compare => run_named(&cfg, PresetName::CompareKnown),
        Command::Generalize => run_named(&cfg, PresetName::GeneralizeNovel),
        Command::Ablate => run_named(&cfg, PresetName::Ablation),
        Command::Dilemma { path_c } => {
            let name = if path_c { PresetName::PathC } else { PresetName::Dilemma };
            run_named(&cfg, name)
        }
        Command::RagEval => run_named(&cfg, PresetName::RagEval),
        Command::IntentRun { schedule } => {
            if schedule.is_some() {
                cfg.intent.schedule_path = schedule;
            }
            run_named(&cfg, PresetName::IntentPhases)
        }
        Command::Probe { regimes, delta, rounds } => {
            if let Some(s) = steps {
                cfg.probe.steps = s;
            }
            if let Some(d) = delta {
                cfg.probe.delta = d;
            }
            if let Some(r) = rounds {
                cfg.probe.rounds = r;
            }
            cfg.validate()?;
            let regimes = if regimes.is_empty() { cfg.probe.regimes.clone() } else { regimes };
            let preset = exprun::probe_preset(&cfg, &regimes);
            let report = exprun::run_preset(&cfg, &preset)?;
            let dir = cfg.output_dir.join(preset.name.as_str());
            for r in report.probe.iter().flat_map(|p| &p.reports) {
                println!("{} (baseline {:.1} Mbps):", r.spec.regime, mean(&r.baseline_rates));
                for res in &r.results {
                    println!(
                        "  {:<10} {}  Δ {:+8.2} Mbps{}",
                        res.weight_name,
                        res.direction.as_str(),
                        res.delta_rate_mbps,
                        if res.incomplete { "  (incomplete)" } else { "" }
                    );
                }
                match &r.strongest {
                    Some(s) => println!("  strongest: {}{} ({:+.2})", s.weight_name, s.direction.as_str(), s.delta_rate_mbps),
                    None => println!("  strongest: none"),
                }
                println!("  wrote {}", dir.join(format!("probe_{}.json", r.spec.regime)).display());
            }
            Ok(())
        }
        Command::Anchors { action } => match action {
            AnchorsCommand::Ingest { probes, store } => ingest(&cfg, &probes, &store),
            AnchorsCommand::Query { kpi, k, store } => query(&cfg, &kpi, k, &store),
        },
        Command::Plot { runs, to } => {
            let out = to.unwrap_or_else(|| cfg.output_dir.join("plots"));
            let files = exprun::emit_plots(&runs, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
    }
}

fn mean(v: &[Option<f64>]) -> f64 {
    let ok: Vec<f64> = v.iter().flatten().copied().collect();
    ok.iter().sum::<f64>() / ok.len().max(1) as f64
}

fn init_logging(g: &GlobalArgs) {
    let level = if g.quiet {
        log::LevelFilter::Warn
    } else {
        match g.verbose {
            0 => log::LevelFilter::Info,
            1 => log::LevelFilter::Debug,
            _ => log::LevelFilter::Trace,
        }
    };
    env_logger::Builder::new().filter_level(level).init();
}

fn main() {
    let cli = Cli::parse();
    init_logging(&cli.global);
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
