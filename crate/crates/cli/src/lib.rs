//! Implementation of the `jaf` command line.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use jointaction::experiment::{balanced_latin_square, run_experiment, summarize, Metric, ResultsTable};
use jointaction::stats::{analyze, RankTest};
use jointaction::trace::digest_json;
use jointaction::{run, Condition, Scenario};
use serde_json::json;

pub use config::JafConfig;

const GENERATOR: &str = concat!("jaf ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "jaf", version, about = "Human-robot joint action: simulate, run experiments, analyze, serve live sessions")]
pub struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "JAF_CONFIG")]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set scenario.robot.announce_duration=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulated trial and report its metrics.
    Simulate(SimulateArgs),
    /// Run every simulated participant through all four conditions.
    Experiment(ExperimentArgs),
    /// Statistical report for a results CSV.
    Analyze(AnalyzeArgs),
    /// Host live sessions over websockets.
    Serve(ServeArgs),
    /// Print a balanced Latin square.
    LatinSquare(LatinSquareArgs),
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    Both,
    Ar,
    Gaze,
    None,
}

impl From<ConditionArg> for Condition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::Both => Condition::FULL,
            ConditionArg::Ar => Condition::AR_ONLY,
            ConditionArg::Gaze => Condition::GAZE_ONLY,
            ConditionArg::None => Condition::BASELINE,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, env = "JAF_SEED")]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub condition: Option<ConditionArg>,
    /// Write the JSONL trace here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the metrics JSON here instead of stdout.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, env = "JAF_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "JAF_PARTICIPANTS")]
    pub participants: Option<u32>,
    /// Worker threads; 0 uses every core, 1 runs serially.
    #[arg(long, value_name = "N")]
    pub parallel: Option<usize>,
    /// Results CSV.
    #[arg(long, default_value = "results.csv")]
    pub out: PathBuf,
    /// Summary JSON; defaults to the CSV path with a `.summary.json` suffix.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub results: PathBuf,
    #[arg(long, value_enum)]
    pub rank_test: Option<RankTestArg>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankTestArg {
    SignedRank,
    RankSum,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long, env = "JAF_PORT")]
    pub port: Option<u16>,
    /// Seed for sessions whose hello carries none.
    #[arg(long, env = "JAF_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LatinSquareArgs {
    pub n: usize,
    /// Label columns with condition names (n = 4 only).
    #[arg(long)]
    pub names: bool,
}

pub fn run_cli(cli: Cli) -> Result<()> {
    let mut config = JafConfig::load(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::Simulate(a) => simulate(&mut config, a),
        Command::Experiment(a) => experiment(&mut config, a),
        Command::Analyze(a) => analyze_cmd(&config, a),
        Command::Serve(a) => serve(&mut config, a),
        Command::LatinSquare(a) => latin_square(a),
        Command::ShowConfig => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn simulate(config: &mut JafConfig, a: SimulateArgs) -> Result<()> {
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(c) = a.condition {
        config.scenario.condition = c.into();
    }
    let scenario = Scenario { master_seed: config.seed, ..config.scenario.clone() };
    let (metrics, trace) = run(&scenario).context("simulation failed")?;
    if let Some(out) = &a.out {
        fs::write(out, trace.to_jsonl()).with_context(|| format!("cannot write {}", out.display()))?;
    }
    let report = json!({
        "metadata": {
            "generator": GENERATOR,
            "seed": config.seed,
            "condition": scenario.condition.name(),
            "config_digest": scenario.digest(),
            "trace_hash": trace.content_hash(),
        },
        "config": scenario,
        "metrics": metrics,
    });
    emit(a.metrics.as_deref(), &serde_json::to_string_pretty(&report)?)
}

fn experiment(config: &mut JafConfig, a: ExperimentArgs) -> Result<()> {
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(n) = a.participants {
        config.experiment.participants = n;
    }
    if let Some(n) = a.parallel {
        config.experiment.threads = n;
    }
    let exp = config.experiment_config();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.experiment.threads).build()?;
    let mut table = pool.install(|| run_experiment(&exp)).context("experiment failed")?;
    table.metadata.push(("tool".to_string(), GENERATOR.to_string()));
    table.metadata.push((
        "config".to_string(),
        serde_json::to_string(&json!({
            "participants": exp.participants,
            "seed": exp.seed,
            "scenario": exp.scenario,
            "variation": exp.variation,
        }))?,
    ));
    fs::write(&a.out, table.to_csv_string()).with_context(|| format!("cannot write {}", a.out.display()))?;

    let summary = summarize(&table);
    let summary_path = a.summary.unwrap_or_else(|| a.out.with_extension("summary.json"));
    let doc = json!({ "metadata": metadata_map(&table), "conditions": summary });
    fs::write(&summary_path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("cannot write {}", summary_path.display()))?;

    let mut out = std::io::stdout().lock();
    write!(out, "{:<12}", "condition")?;
    for m in Metric::ALL {
        write!(out, " {:>16}", m.name())?;
    }
    writeln!(out)?;
    for c in &summary {
        write!(out, "{:<12}", c.condition)?;
        for m in Metric::ALL {
            write!(out, " {:>16}", c.get(m).display())?;
        }
        writeln!(out)?;
    }
    writeln!(out, "wrote {} and {}", a.out.display(), summary_path.display())?;
    Ok(())
}

fn analyze_cmd(config: &JafConfig, a: AnalyzeArgs) -> Result<()> {
    let file = fs::File::open(&a.results).with_context(|| format!("cannot open {}", a.results.display()))?;
    let table = ResultsTable::read_csv(file).with_context(|| format!("cannot parse {}", a.results.display()))?;
    if table.rows.is_empty() {
        bail!("{} has no result rows", a.results.display());
    }
    for row in &table.rows {
        row.condition()?;
    }
    let rank_test = match a.rank_test {
        Some(RankTestArg::SignedRank) => RankTest::SignedRank,
        Some(RankTestArg::RankSum) => RankTest::RankSum,
        None => config.experiment.rank_test,
    };
    let report = analyze(&table, rank_test);
    let doc = json!({
        "metadata": {
            "generator": GENERATOR,
            "source": a.results.display().to_string(),
            "source_digest": digest_json(&table.rows),
            "results": metadata_map(&table),
        },
        "report": report,
    });
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&doc)?)
}

fn serve(config: &mut JafConfig, a: ServeArgs) -> Result<()> {
    if let Some(h) = a.host {
        config.server.host = h;
    }
    if let Some(p) = a.port {
        config.server.port = p;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(d) = a.trace_dir {
        config.server.trace_dir = Some(d);
    }
    if let Some(d) = a.static_dir {
        config.server.static_dir = Some(d);
    }
    let server_config = config.server_config();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let server = jointaction_server::Server::bind(server_config).await?;
        eprintln!("listening on ws://{}/ws (ctrl-c to stop)", server.local_addr()?);
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn latin_square(a: LatinSquareArgs) -> Result<()> {
    let rows = balanced_latin_square(a.n)?;
    if a.names && a.n != Condition::ALL.len() {
        bail!("--names needs n = {}", Condition::ALL.len());
    }
    let mut out = std::io::stdout().lock();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|&c| if a.names { Condition::ALL[c].name().to_string() } else { c.to_string() })
            .collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

fn metadata_map(table: &ResultsTable) -> serde_json::Map<String, serde_json::Value> {
    table.metadata.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect()
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("cannot write {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
