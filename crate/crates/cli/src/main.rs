use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use glosa_sim::config::{load, ScenarioConfigDocument};
use glosa_sim::engine::run;
use glosa_sim::experiments::{
    best_cells, check_results, read_summary, run_sweep, write_heatmaps, Metric, SweepGrid,
    RESULTS_FILE, SUMMARY_FILE,
};
use glosa_sim::Error;

/// Traffic simulator with green-light speed advisories.
#[derive(Parser, Debug)]
#[command(name = "glosa-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one simulation and write per-vehicle metrics.
    Run {
        /// Built-in name (ring, ring-traffic, grid, corridor, corridor-low,
        /// corridor-medium, corridor-high) or path to a JSON document.
        #[arg(long)]
        scenario: String,
        /// Fraction of equipped vehicles.
        #[arg(long = "veh-pen")]
        veh_pen: f64,
        /// Fraction of equipped traffic lights.
        #[arg(long = "tls-pen")]
        tls_pen: f64,
        #[arg(long)]
        seed: u64,
        /// Simulated duration in seconds (overrides the document).
        #[arg(long)]
        duration: Option<f64>,
        /// Per-step trace CSV (t, vehicle, position, speed, co2_rate).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Per-vehicle CSV; aggregates go to the same path with a .json extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep vehicle and light penetration rates over several seeds.
    Sweep {
        #[arg(long)]
        scenario: String,
        /// Comma-separated vehicle penetration rates.
        #[arg(long = "veh-pens", value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        veh_pens: Vec<f64>,
        /// Comma-separated light penetration rates.
        #[arg(long = "tls-pens", value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        tls_pens: Vec<f64>,
        /// Number of seeds (0..n).
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long)]
        duration: Option<f64>,
        /// Output directory for results.csv and summary.csv.
        #[arg(long)]
        out: PathBuf,
        /// Also write one SVG heatmap per metric.
        #[arg(long)]
        svg: bool,
    },
    /// Print the best cell per metric from a sweep directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Also write one SVG heatmap per metric.
        #[arg(long)]
        svg: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            scenario,
            veh_pen,
            tls_pen,
            seed,
            duration,
            trace,
            out,
        } => cmd_run(&scenario, veh_pen, tls_pen, seed, duration, trace.as_deref(), &out),
        Command::Sweep {
            scenario,
            veh_pens,
            tls_pens,
            seeds,
            duration,
            out,
            svg,
        } => cmd_sweep(&scenario, veh_pens, tls_pens, seeds, duration, &out, svg),
        Command::Report { input, svg } => cmd_report(&input, svg),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn document(scenario: &str, duration: Option<f64>) -> Result<ScenarioConfigDocument, Error> {
    let mut doc = load(scenario)?;
    if let Some(d) = duration {
        doc.sim.duration_s = d;
    }
    Ok(doc)
}

fn cmd_run(
    scenario: &str,
    veh_pen: f64,
    tls_pen: f64,
    seed: u64,
    duration: Option<f64>,
    trace: Option<&Path>,
    out: &Path,
) -> Result<(), Error> {
    let doc = document(scenario, duration)?;
    let mut config = doc.sim_config(seed);
    config.comm.vehicle_penetration = veh_pen;
    config.comm.light_penetration = tls_pen;
    config.trace = trace.is_some();
    config.validate()?;
    let instance = doc.build(seed)?;
    let result = run(&instance, &config)?;

    result.write_vehicle_csv(std::fs::File::create(out)?)?;
    let mut summary = serde_json::to_value(&result)?;
    if let Some(obj) = summary.as_object_mut() {
        obj.remove("vehicles");
        obj.remove("trace");
    }
    let json_path = out.with_extension("json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    if let Some(path) = trace {
        result.write_trace_csv(std::fs::File::create(path)?)?;
    }

    let show = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.2}"));
    println!(
        "{}: {} finished, {} unfinished, {} not inserted",
        doc.name, result.n_finished, result.n_unfinished, result.n_not_inserted
    );
    println!(
        "mean CO2 {} g, waiting {} s, travel {} s",
        show(result.all.mean_co2_g),
        show(result.all.mean_wait_s),
        show(result.all.mean_travel_s)
    );
    println!("wrote {} and {}", out.display(), json_path.display());
    Ok(())
}

fn cmd_sweep(
    scenario: &str,
    veh_pens: Vec<f64>,
    tls_pens: Vec<f64>,
    seeds: u64,
    duration: Option<f64>,
    out: &Path,
    svg: bool,
) -> Result<(), Error> {
    let doc = document(scenario, duration)?;
    let grid = SweepGrid {
        vehicle_rates: veh_pens,
        light_rates: tls_pens,
        seeds: (0..seeds).collect(),
    };
    let result = run_sweep(&doc.name, &doc.scenario, &grid, &doc.sim_config(0))?;
    result.write_dir(out, svg)?;
    print_best(&doc.name, &result.cells);
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_report(input: &Path, svg: bool) -> Result<(), Error> {
    let results = input.join(RESULTS_FILE);
    let summary = input.join(SUMMARY_FILE);
    for p in [&results, &summary] {
        if !p.is_file() {
            return Err(Error::Input(format!("missing {}", p.display())));
        }
    }
    if check_results(&results)? == 0 {
        return Err(Error::Input(format!("{}: no rows", results.display())));
    }
    let cells = read_summary(&summary)?;
    let name = cells[0].scenario.clone();
    print_best(&name, &cells);
    if svg {
        write_heatmaps(input, &cells)?;
        println!("wrote heatmaps to {}", input.display());
    }
    Ok(())
}

fn print_best(name: &str, cells: &[glosa_sim::experiments::CellSummary]) {
    println!("best cells for {name}");
    println!("{:<16} {:>9} {:>9} {:>12}", "metric", "veh_rate", "tls_rate", "reduction_%");
    for m in Metric::ALL {
        match best_cells(cells, m) {
            Some((v, l, r)) => println!("{:<16} {v:>9} {l:>9} {r:>12.2}", m.label()),
            None => println!("{:<16} {:>9} {:>9} {:>12}", m.label(), "NA", "NA", "NA"),
        }
    }
}
