//! `espf`: run scenarios, compare filters and inspect sparse grids.
//!
//! Exit codes: 0 success, 2 scenario/input error, 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use espf_core::sparse_grid::smolyak_grid;
use espf_harness::output::write_outputs;
use espf_harness::spec::split_override;
use espf_harness::{
    scenarios, summarize, FilterChoice, HarnessError, OrbitScenario, ScenarioSpec, Summary,
};

#[derive(Parser)]
#[command(name = "espf", version, about = "Support-point filter scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Espf,
    Ukf,
    Both,
}

impl From<FilterArg> for FilterChoice {
    fn from(f: FilterArg) -> Self {
        match f {
            FilterArg::Espf => FilterChoice::Espf,
            FilterArg::Ukf => FilterChoice::Ukf,
            FilterArg::Both => FilterChoice::Both,
        }
    }
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Override a config value, e.g. `espf.eta=0.8` or
    /// `stations.0.ra_bias_arcsec=10`. Repeatable; the last one wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Noise seed; applied after `--set`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "both")]
    filter: FilterArg,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, summary.json and
    /// config_resolved.txt.
    Run {
        /// Scenario file (the `.toml` extension may be omitted) or the name
        /// of a built-in scenario.
        scenario: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        args: ScenarioArgs,
    },
    /// Run scenarios and print a tab-separated comparison table.
    Compare {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        args: ScenarioArgs,
    },
    /// Print the size of a Smolyak grid on [-1, 1]^dim.
    Grid {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        level: usize,
        /// Also print the points as CSV, one per row.
        #[arg(long)]
        dump: bool,
    },
}

fn load(path: &Path, args: &ScenarioArgs) -> Result<ScenarioSpec, HarnessError> {
    let spec = match path.to_str() {
        Some(name) if scenarios::NAMES.contains(&name) && !path.exists() => {
            scenarios::builtin(name)?
        }
        _ => ScenarioSpec::load(path)?,
    };
    let overrides = args
        .set
        .iter()
        .map(|a| split_override(a))
        .collect::<Result<Vec<_>, _>>()?;
    let mut spec = spec.with_overrides(&overrides)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn run_one(
    spec: &ScenarioSpec,
    filter: FilterArg,
) -> Result<(espf_harness::RunTrace, Summary), HarnessError> {
    let trace = OrbitScenario::new(spec.clone())?.run(filter.into())?;
    let summary = summarize(&trace)?;
    Ok((trace, summary))
}

fn table_rows(summary: &Summary) -> Vec<String> {
    let na =
        |x: Option<f64>, digits: usize| x.map_or("N/A".to_string(), |v| format!("{v:.digits$}"));
    let mut rows = Vec::new();
    for (name, s) in [("ESPF", &summary.espf), ("UKF", &summary.ukf)] {
        if let Some(s) = s {
            rows.push(format!(
                "{}\t{name}\t{:.6}\t{}\t{}",
                summary.scenario,
                s.final_rms,
                na(s.avg_surprisal, 4),
                na(s.necessity_retention_pct, 1)
            ));
        }
    }
    rows
}

const TABLE_HEADER: &str = "scenario\tfilter\tfinal_rms\tavg_surprisal\tnecessity_retention_pct";

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run {
            scenario,
            out,
            args,
        } => {
            let spec = load(&scenario, &args)?;
            let (trace, summary) = run_one(&spec, args.filter)?;
            write_outputs(&out, &spec.resolved_text()?, &trace, &summary)?;
            println!("{TABLE_HEADER}");
            for row in table_rows(&summary) {
                println!("{row}");
            }
        }
        Command::Compare { scenarios, args } => {
            let specs = scenarios
                .iter()
                .map(|p| load(p, &args))
                .collect::<Result<Vec<_>, _>>()?;
            println!("{TABLE_HEADER}");
            for spec in &specs {
                let (_, summary) = run_one(spec, args.filter)?;
                for row in table_rows(&summary) {
                    println!("{row}");
                }
            }
        }
        Command::Grid { dim, level, dump } => {
            let grid = smolyak_grid(dim, level).map_err(|e| HarnessError::Spec(e.to_string()))?;
            println!("points\t{}", grid.len());
            if dump {
                let header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
                println!("{}", header.join(","));
                for p in &grid.points {
                    let row: Vec<String> = p.iter().map(|x| format!("{x:.16e}")).collect();
                    println!("{}", row.join(","));
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ESPF_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
