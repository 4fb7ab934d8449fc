use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use deepthermal::circuit::CircuitConfig;
use deepthermal::runner::{
    aggregate, default_ratio_times, emit_plot_data, parse_panels, read_aggregate, read_records, run_experiment,
    write_aggregate, write_records, Provenance, RunFileConfig,
};
use deepthermal::verify::{run_suite, Suite};
use deepthermal::{Error, Result};

#[derive(Parser)]
#[command(name = "deepthermal", version, about = "Deep-thermalization experiments on bottlenecked random circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate realizations and write `records.csv` and `config.json`.
    Run(RunArgs),
    /// Reduce a run directory to per-(T, k) statistics.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one CSV per figure panel from an aggregate file.
    PlotData {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "a,b,c,d,e,f")]
        panels: String,
        /// Depths of the three ratio panels d, e, f.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        times: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an acceptance suite; prints a JSON report.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON file with any of the flag names as keys; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "dA")]
    d_a: Option<usize>,
    #[arg(long = "dB1")]
    d_b1: Option<usize>,
    /// Total qubit count; sets `q = 2^(L-2)`.
    #[arg(long = "L", conflicts_with = "q")]
    l: Option<u32>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn file_config(&self) -> Result<RunFileConfig> {
        let flags = RunFileConfig {
            d_a: self.d_a,
            d_b1: self.d_b1,
            l: self.l,
            q: self.q,
            tmax: self.tmax,
            kmax: self.kmax,
            realizations: self.realizations,
            seed: self.seed,
            out: self.out.clone(),
        };
        let base = match &self.config {
            Some(p) => RunFileConfig::load(p)?,
            None => RunFileConfig::default(),
        };
        // an explicit L or q on the command line replaces either one from the file
        let base = if flags.l.is_some() || flags.q.is_some() { RunFileConfig { l: None, q: None, ..base } } else { base };
        Ok(base.overlay(flags))
    }
}

fn run(args: RunArgs) -> Result<()> {
    let file = args.file_config()?;
    let out = file.out.clone().ok_or_else(|| Error::InvalidArgument("--out is required".into()))?;
    let cfg = file.resolve()?;
    fs::create_dir_all(&out)?;
    info!("running {cfg:?}");
    let (records, summary) = run_experiment(&cfg)?;
    write_records(&out.join("records.csv"), &records)?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(&cfg)?)?;
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn run_aggregate(input: PathBuf, out: PathBuf) -> Result<()> {
    let cfg: CircuitConfig = serde_json::from_str(&fs::read_to_string(input.join("config.json"))?)?;
    let records = read_records(&input.join("records.csv"))?;
    let aggs = aggregate(&records, &cfg)?;
    write_aggregate(&out, &aggs, &Provenance::new(cfg))?;
    Ok(())
}

fn plot_data(input: PathBuf, panels: String, times: Option<Vec<usize>>, out: PathBuf) -> Result<()> {
    let panels = parse_panels(&panels)?;
    let (prov, aggs) = read_aggregate(&input)?;
    let times = match times {
        Some(t) => [t[0], t[1], t[2]],
        None => default_ratio_times(prov.config.t_max),
    };
    for path in emit_plot_data(&aggs, &prov, &panels, &times, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

/// `Ok(true)` when every gating check passed.
fn verify(suite: String, seed: u64, report: Option<PathBuf>) -> Result<bool> {
    let suite: Suite = suite.parse()?;
    let rep = run_suite(suite, seed)?;
    for c in &rep.checks {
        eprintln!("{c}");
    }
    let json = serde_json::to_string_pretty(&rep)?;
    if let Some(p) = report {
        fs::write(p, &json)?;
    }
    println!("{json}");
    Ok(rep.passed)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Aggregate { input, out } => run_aggregate(input, out).map(|_| true),
        Command::PlotData { input, panels, times, out } => plot_data(input, panels, times, out).map(|_| true),
        Command::Verify { suite, seed, report } => verify(suite, seed, report),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
