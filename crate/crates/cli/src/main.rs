//! `rmt-eth-lab run <experiment>`: resolve a config, run experiments, write
//! CSVs, per-experiment reports and a manifest.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rmt_eth_lab::exec::Execution;
use rmt_eth_lab::experiments::{
    run_clt, run_dbm, run_equipartition, run_eth, run_local_law, run_mde, ExperimentConfig, Verdict,
};
use rmt_eth_lab::LabError;

use output::{ExperimentVerdicts, OutputDir, RunManifest};

#[derive(Parser)]
#[command(name = "rmt-eth-lab", version, about = "Random-matrix ETH and eigenvector CLT experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment or all of them.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    experiment: Experiment,
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override `key=value`; the value is parsed as JSON, else as a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "RMT_ETH_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Validate the config and print the plan without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Experiment {
    Mde,
    Eth,
    Clt,
    Equipartition,
    Locallaw,
    Dbm,
    All,
}

impl Experiment {
    const EACH: [Experiment; 6] = [
        Experiment::Mde,
        Experiment::Eth,
        Experiment::Clt,
        Experiment::Equipartition,
        Experiment::Locallaw,
        Experiment::Dbm,
    ];

    fn expand(self) -> Vec<Experiment> {
        if self == Experiment::All {
            Self::EACH.to_vec()
        } else {
            vec![self]
        }
    }

    fn name(self) -> &'static str {
        match self {
            Experiment::Mde => "mde",
            Experiment::Eth => "eth",
            Experiment::Clt => "clt",
            Experiment::Equipartition => "equipartition",
            Experiment::Locallaw => "locallaw",
            Experiment::Dbm => "dbm",
            Experiment::All => "all",
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Experiment::Mde => &["density.csv", "quantiles.csv", "report_mde.json"],
            Experiment::Eth => &["eth.csv", "report_eth.json"],
            Experiment::Clt => &["clt.csv", "report_clt.json"],
            Experiment::Equipartition => &["equipartition.csv", "covariance.csv", "report_equipartition.json"],
            Experiment::Locallaw => &["locallaw.csv", "report_locallaw.json"],
            Experiment::Dbm => &["dbm.csv", "report_dbm.json"],
            Experiment::All => &[],
        }
    }
}

/// Process outcome other than success.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let Command::Run(args) = cli.command;
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Returns whether every verdict passed.
fn run(args: &RunArgs) -> Result<bool, Failure> {
    let cfg = config::resolve(args.config.as_deref(), &args.overrides)?;
    let hash = config::config_hash(&cfg);
    let threads = match args.threads {
        Some(0) => return Err(Failure::Usage("threads: must be at least 1".into())),
        Some(k) => k,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let experiments = args.experiment.expand();

    if args.dry_run {
        let plan = serde_json::json!({
            "experiments": experiments.iter().map(|e| e.name()).collect::<Vec<_>>(),
            "outputs": experiments.iter().flat_map(|e| e.outputs()).map(|f| args.out.join(f)).collect::<Vec<_>>(),
            "threads": threads,
            "config_hash": hash,
            "config": cfg,
        });
        println!("{}", serde_json::to_string_pretty(&plan).expect("plan serializes"));
        return Ok(true);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Usage(format!("threads: {e}")))?;
    let started_at = now();
    let mut out = OutputDir::create(&args.out)?;
    let mut all = Vec::new();
    for &exp in &experiments {
        let verdicts = pool.install(|| run_one(exp, &cfg, &mut out))?;
        for v in &verdicts {
            println!("{} {}", exp.name(), v.line());
        }
        all.push(ExperimentVerdicts { experiment: exp.name(), verdicts });
    }
    let passed = all.iter().flat_map(|e| &e.verdicts).all(|v| v.pass);

    out.json("verdicts.json", &all.iter().flat_map(|e| &e.verdicts).collect::<Vec<_>>())?;
    let manifest = RunManifest {
        config_hash: hash,
        tool_version: env!("CARGO_PKG_VERSION"),
        started_at,
        finished_at: now(),
        threads,
        experiments: experiments.iter().map(|e| e.name()).collect(),
        outputs: out.written.iter().map(|p| p.display().to_string()).collect(),
        verdicts: all,
        config: serde_json::to_value(&cfg).expect("config serializes"),
    };
    out.json("manifest.json", &manifest)?;
    println!("{}", if passed { "all checks passed" } else { "some checks failed" });
    Ok(passed)
}

fn run_one(exp: Experiment, cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<Verdict>, Failure> {
    let exec = Execution::Parallel;
    let name = format!("report_{}.json", exp.name());
    Ok(match exp {
        Experiment::Mde => {
            let r = run_mde(cfg)?;
            out.csv("density.csv", &r.density)?;
            out.csv("quantiles.csv", &r.quantiles)?;
            out.report(&name, &r, &["density", "quantiles"])?;
            r.verdicts
        }
        Experiment::Eth => {
            let r = run_eth(cfg, exec)?;
            out.csv("eth.csv", &r.rows)?;
            out.report(&name, &r, &["rows"])?;
            r.verdicts
        }
        Experiment::Clt => {
            let r = run_clt(cfg, exec)?;
            out.csv("clt.csv", &r.rows)?;
            out.report(&name, &r, &["rows"])?;
            r.verdicts
        }
        Experiment::Equipartition => {
            let r = run_equipartition(cfg, exec)?;
            out.csv("equipartition.csv", &r.rows)?;
            out.csv("covariance.csv", &r.covariance)?;
            out.report(&name, &r, &["rows"])?;
            r.verdicts
        }
        Experiment::Locallaw => {
            let r = run_local_law(cfg, exec)?;
            out.csv("locallaw.csv", &r.records)?;
            out.report(&name, &r, &["records"])?;
            r.verdicts
        }
        Experiment::Dbm => {
            let r = run_dbm(cfg, exec)?;
            out.csv("dbm.csv", &r.rows)?;
            out.report(&name, &r, &["rows"])?;
            r.verdicts
        }
        Experiment::All => unreachable!("expanded before dispatch"),
    })
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
