//! Command-line front end for the planning toolkit.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 solver limit
//! reached, 3 proven infeasible.

use clap::{Args, Parser, Subcommand};
use h2plan::model::build_model;
use h2plan::report;
use h2plan::scenario::{
    self, builtin_scenario_file, comparison_csv, resolve, ResolvedScenario, RunResult,
    ScenarioError, ScenarioId,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(name = "h2plan", version, about = "Multi-period hydrogen transportation network planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Path to a scenario JSON file.
    #[arg(long, conflicts_with = "builtin")]
    scenario: Option<PathBuf>,
    /// One of the builtin case studies (S1..S5).
    #[arg(long)]
    builtin: Option<String>,
    /// Override the number of planning periods (shortens the horizon).
    #[arg(long)]
    periods: Option<usize>,
    /// Override the clustering seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved spec of a builtin case study as JSON.
    Scenario {
        /// S1..S5
        id: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the per-node demand series as CSV.
    Forecast {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output format (only csv).
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Place hubs over the demand nodes and emit them as CSV.
    Cluster {
        #[command(flatten)]
        source: Source,
        /// Number of hubs.
        #[arg(short, long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Compile the model and write it in MPS format.
    Build {
        #[command(flatten)]
        source: Source,
        /// Output path, default model.mps.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and persist a run directory.
    Solve {
        #[command(flatten)]
        source: Source,
        /// Runs root; defaults to $H2PLAN_RUNS or ./runs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stop branch and bound after this many nodes.
        #[arg(long)]
        node_limit: Option<usize>,
        /// Stop after this many seconds.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Recompute metric CSVs from a persisted run directory.
    Report {
        /// Run directory (runs_root/<fingerprint>).
        run: PathBuf,
        /// Output directory, default the run directory itself.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Align several runs side by side.
    Compare {
        /// Two or more run directories.
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems always exit 1, including unknown flags.
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn check_format(format: &str) -> Result<(), ScenarioError> {
    if format == "csv" {
        Ok(())
    } else {
        Err(ScenarioError::Validation(vec![format!(
            "format: only csv is supported, got {format}"
        )]))
    }
}

fn load_source(source: &Source) -> Result<ResolvedScenario, ScenarioError> {
    let mut file = match (&source.scenario, &source.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?
        }
        (None, Some(id)) => {
            let id = ScenarioId::from_str(id).map_err(|e| ScenarioError::Validation(vec![e]))?;
            builtin_scenario_file(id)?
        }
        _ => {
            return Err(ScenarioError::Validation(vec![
                "give exactly one of --scenario or --builtin".to_string(),
            ]))
        }
    };
    if let Some(p) = source.periods {
        file.horizon.periods = p;
    }
    if let Some(seed) = source.seed {
        let hubs = file.hubs.get_or_insert(scenario::HubSection {
            count: None,
            seed: None,
            hubs: None,
            assignment: None,
        });
        hubs.seed = Some(seed);
    }
    resolve(file)
}

fn write_out(out: Option<&Path>, content: &str) -> Result<(), ScenarioError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn load_run_dir(dir: &Path) -> Result<(RunResult, h2plan::domain::ScenarioSpec), ScenarioError> {
    let result_path = dir.join("result.json");
    if !result_path.exists() {
        return Err(ScenarioError::Validation(vec![format!(
            "no run found at {}",
            result_path.display()
        )]));
    }
    let result: RunResult = serde_json::from_str(&std::fs::read_to_string(&result_path)?)
        .map_err(|e| ScenarioError::Parse(format!("{}: {e}", result_path.display())))?;
    let spec_path = dir.join("resolved_spec.json");
    let spec = serde_json::from_str(&std::fs::read_to_string(&spec_path)?)
        .map_err(|e| ScenarioError::Parse(format!("{}: {e}", spec_path.display())))?;
    Ok((result, spec))
}

fn dispatch(cli: Cli) -> Result<ExitCode, ScenarioError> {
    match cli.command {
        Command::Scenario { id, out } => {
            let id = ScenarioId::from_str(&id).map_err(|e| ScenarioError::Validation(vec![e]))?;
            let resolved = scenario::builtin_scenario(id)?;
            let mut doc = serde_json::to_value(&resolved.spec).expect("spec serializes");
            doc["provenance"] = serde_json::to_value(&resolved.provenance).unwrap();
            let text = serde_json::to_string_pretty(&doc).unwrap() + "\n";
            write_out(out.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Forecast { source, out, format } => {
            check_format(&format)?;
            let resolved = load_source(&source)?;
            let spec = &resolved.spec;
            let mut csv = String::from("node,year,period,demand_kg\n");
            for d in &spec.demand_nodes {
                for (t, &q) in d.demand.iter().enumerate() {
                    csv.push_str(&format!("{},{},{},{}\n", d.name, spec.horizon.year_of(t), t, q));
                }
            }
            write_out(out.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cluster { source, k, out, format } => {
            check_format(&format)?;
            let resolved = load_source(&source)?;
            let spec = &resolved.spec;
            let points: Vec<_> = spec
                .demand_nodes
                .iter()
                .map(|d| (d.location, d.demand.iter().sum::<f64>().max(1.0)))
                .collect();
            let result = h2plan::cluster::kmeans_hubs(&points, k, resolved.seed, 200)?;
            let mut csv = String::from("kind,name,lat,lon,hub\n");
            for (idx, c) in result.centroids.iter().enumerate() {
                csv.push_str(&format!("hub,hub{idx},{},{},{idx}\n", c.lat(), c.lon()));
            }
            for (j, d) in spec.demand_nodes.iter().enumerate() {
                csv.push_str(&format!(
                    "demand,{},{},{},{}\n",
                    d.name,
                    d.location.lat(),
                    d.location.lon(),
                    result.assignment[j]
                ));
            }
            write_out(out.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Build { source, out } => {
            let resolved = load_source(&source)?;
            let built = build_model(&resolved.spec)?;
            let path = out.unwrap_or_else(|| PathBuf::from("model.mps"));
            let file = std::fs::File::create(&path)?;
            h2opt::write_mps(&built.model, &mut std::io::BufWriter::new(file))?;
            eprintln!(
                "wrote {} ({} columns, {} rows)",
                path.display(),
                built.model.num_columns(),
                built.model.num_rows()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve {
            source,
            out,
            node_limit,
            time_limit,
        } => {
            let mut resolved = load_source(&source)?;
            if node_limit.is_some() {
                resolved.options.node_limit = node_limit;
            }
            if let Some(secs) = time_limit {
                resolved.options.time_limit = Some(std::time::Duration::from_secs_f64(secs));
            }
            let root = scenario::runs_root(out.as_deref());
            let result = scenario::run(&resolved, Some(&root))?;
            println!("run: {}", root.join(&result.fingerprint).display());
            println!("status: {}", result.status);
            if let Some(lch2) = result.lch2 {
                println!("levelized cost: {lch2:.6} $/kg");
            }
            for d in &result.diagnostics {
                println!("diagnostic: {d}");
            }
            let code = match result.status.as_str() {
                "optimal" | "degenerate_denominator" => ExitCode::SUCCESS,
                "node_limit" | "time_limit" => ExitCode::from(2),
                "infeasible" => ExitCode::from(3),
                _ => ExitCode::from(2),
            };
            Ok(code)
        }
        Command::Report { run, out, format } => {
            check_format(&format)?;
            let (result, spec) = load_run_dir(&run)?;
            let sol = result.solution.as_ref().ok_or_else(|| {
                ScenarioError::Validation(vec![format!("run {} has no solution to report on", run.display())])
            })?;
            let metrics = report::metrics(&spec, sol)?;
            let dir = out.unwrap_or(run);
            std::fs::create_dir_all(&dir)?;
            let y0 = spec.horizon.start_year;
            std::fs::write(dir.join("mode_share.csv"), report::mode_share_csv(&metrics, y0))?;
            std::fs::write(dir.join("coverage.csv"), report::coverage_csv(&metrics, y0))?;
            std::fs::write(dir.join("vehicles.csv"), report::vehicles_csv(&metrics, y0))?;
            std::fs::write(dir.join("costs.csv"), report::costs_csv(&metrics, y0))?;
            std::fs::write(dir.join("network.csv"), report::network_csv(&spec, sol))?;
            eprintln!("wrote metric CSVs to {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { runs, out, format } => {
            check_format(&format)?;
            let mut results = Vec::new();
            for dir in &runs {
                results.push(load_run_dir(dir)?.0);
            }
            let table = scenario::compare(&results)?;
            for w in &table.warnings {
                eprintln!("warning: {w}");
            }
            write_out(out.as_deref(), &comparison_csv(&table))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
