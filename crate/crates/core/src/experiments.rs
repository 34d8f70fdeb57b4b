//! Penetration-rate sweeps against a no-advisory baseline.
//!
//! For every seed the scenario is built once and run once with no equipped
//! lights (the baseline), then once per `(vehicle rate, light rate)` cell.
//! All runs of a seed share routes, departures and signal offsets, so
//! differences come from equipment alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run, Aggregate, SimConfig, SimulationResult, VehicleRecord};
use crate::error::{Error, Result};
use crate::scenarios::{build, ScenarioSpec};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
/// Caps the number of worker threads used by [`run_sweep`].
pub const THREADS_ENV: &str = "GLOSA_SIM_THREADS";

const RESULTS_HEADER: [&str; 10] = [
    "scenario",
    "veh_rate",
    "tls_rate",
    "seed",
    "n_finished",
    "mean_co2_g",
    "mean_wait_s",
    "mean_travel_s",
    "mean_co2_g_unequipped",
    "mean_wait_s_unequipped",
];

const SUMMARY_HEADER: [&str; 19] = [
    "scenario",
    "veh_rate",
    "tls_rate",
    "n_seeds",
    "mean_co2_g",
    "sd_co2_g",
    "mean_wait_s",
    "sd_wait_s",
    "mean_travel_s",
    "sd_travel_s",
    "base_co2_g",
    "base_wait_s",
    "base_travel_s",
    "red_co2_pct",
    "red_wait_pct",
    "red_travel_pct",
    "red_co2_unequipped_pct",
    "red_wait_unequipped_pct",
    "n_unfinished",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub vehicle_rates: Vec<f64>,
    pub light_rates: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            vehicle_rates: (1..=10).map(|i| i as f64 / 10.0).collect(),
            light_rates: (0..=10).map(|i| i as f64 / 10.0).collect(),
            seeds: (0..10).collect(),
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, rates) in [("vehicle", &self.vehicle_rates), ("light", &self.light_rates)] {
            if rates.is_empty() {
                return Err(Error::Config(format!("{name} rate list is empty")));
            }
            if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::Config(format!("{name} penetration out of range: {r} not in [0, 1]")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        Ok(())
    }
}

/// Percentage reduction of `treated` relative to `baseline`.
///
/// Negative when the treated mean is worse. `None` when the baseline is not
/// positive, where a relative change is undefined.
pub fn reduction(baseline: f64, treated: f64) -> Option<f64> {
    if baseline > 0.0 && baseline.is_finite() && treated.is_finite() {
        Some(100.0 * (baseline - treated) / baseline)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Co2,
    Wait,
    Travel,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Co2, Metric::Wait, Metric::Travel];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Co2 => "co2",
            Metric::Wait => "wait",
            Metric::Travel => "travel",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Metric::Co2 => "CO2 emissions",
            Metric::Wait => "waiting time",
            Metric::Travel => "travel time",
        }
    }

    fn of(self, a: &Aggregate) -> Option<f64> {
        match self {
            Metric::Co2 => a.mean_co2_g,
            Metric::Wait => a.mean_wait_s,
            Metric::Travel => a.mean_travel_s,
        }
    }
}

/// One treated run of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub veh_rate: f64,
    pub tls_rate: f64,
    pub seed: u64,
    pub n_finished: usize,
    pub n_unfinished: usize,
    pub all: Aggregate,
    pub equipped: Aggregate,
    pub unequipped: Aggregate,
    /// The baseline run restricted to the vehicles unequipped in this cell.
    pub unequipped_baseline: Aggregate,
}

/// The no-advisory run of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRun {
    pub seed: u64,
    pub n_finished: usize,
    pub all: Aggregate,
}

/// Across-seed view of one `(vehicle rate, light rate)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scenario: String,
    pub veh_rate: f64,
    pub tls_rate: f64,
    pub n_seeds: usize,
    pub mean_co2_g: Option<f64>,
    pub sd_co2_g: Option<f64>,
    pub mean_wait_s: Option<f64>,
    pub sd_wait_s: Option<f64>,
    pub mean_travel_s: Option<f64>,
    pub sd_travel_s: Option<f64>,
    pub base_co2_g: Option<f64>,
    pub base_wait_s: Option<f64>,
    pub base_travel_s: Option<f64>,
    pub red_co2_pct: Option<f64>,
    pub red_wait_pct: Option<f64>,
    pub red_travel_pct: Option<f64>,
    pub red_co2_unequipped_pct: Option<f64>,
    pub red_wait_unequipped_pct: Option<f64>,
    pub n_unfinished: usize,
}

impl CellSummary {
    pub fn reduction(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Co2 => self.red_co2_pct,
            Metric::Wait => self.red_wait_pct,
            Metric::Travel => self.red_travel_pct,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    pub grid: SweepGrid,
    /// Sorted by seed.
    pub baselines: Vec<BaselineRun>,
    /// Sorted by `(veh_rate, tls_rate, seed)`.
    pub runs: Vec<CellRun>,
    /// Sorted by `(veh_rate, tls_rate)`.
    pub cells: Vec<CellSummary>,
}

/// Runs the baseline and every cell of `grid` for each seed.
///
/// Runs execute on a rayon pool; set `GLOSA_SIM_THREADS` to cap its size.
/// Results do not depend on scheduling.
pub fn run_sweep(
    scenario_name: &str,
    spec: &ScenarioSpec,
    grid: &SweepGrid,
    config: &SimConfig,
) -> Result<SweepResult> {
    grid.validate()?;
    config.validate()?;
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| sweep_inner(scenario_name, spec, grid, config))
}

fn sweep_inner(
    scenario_name: &str,
    spec: &ScenarioSpec,
    grid: &SweepGrid,
    config: &SimConfig,
) -> Result<SweepResult> {
    let mut seeds = grid.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();

    let baselines: Vec<(BaselineRun, Vec<VehicleRecord>)> = seeds
        .par_iter()
        .map(|&seed| {
            let instance = build(spec, seed).map_err(|e| cell_error(0.0, 0.0, seed, e))?;
            let mut cfg = config.clone();
            cfg.seed = seed;
            cfg.comm.vehicle_penetration = 0.0;
            cfg.comm.light_penetration = 0.0;
            let r = run(&instance, &cfg).map_err(|e| cell_error(0.0, 0.0, seed, e))?;
            Ok((
                BaselineRun {
                    seed,
                    n_finished: r.n_finished,
                    all: r.all,
                },
                r.vehicles,
            ))
        })
        .collect::<Result<_>>()?;
    let instances = seeds
        .par_iter()
        .map(|&seed| build(spec, seed).map_err(|e| cell_error(0.0, 0.0, seed, e)))
        .collect::<Result<Vec<_>>>()?;

    let mut tasks = Vec::new();
    for &v in &grid.vehicle_rates {
        for &l in &grid.light_rates {
            for i in 0..seeds.len() {
                tasks.push((v, l, i));
            }
        }
    }
    let mut runs: Vec<CellRun> = tasks
        .par_iter()
        .map(|&(v, l, i)| {
            let seed = seeds[i];
            let mut cfg = config.clone();
            cfg.seed = seed;
            cfg.comm.vehicle_penetration = v;
            cfg.comm.light_penetration = l;
            let r = run(&instances[i], &cfg).map_err(|e| cell_error(v, l, seed, e))?;
            Ok(cell_run(v, l, &r, &baselines[i].1))
        })
        .collect::<Result<_>>()?;
    runs.sort_by(|a, b| {
        (a.veh_rate, a.tls_rate, a.seed)
            .partial_cmp(&(b.veh_rate, b.tls_rate, b.seed))
            .expect("rates are finite")
    });
    let baselines: Vec<BaselineRun> = baselines.into_iter().map(|(b, _)| b).collect();
    let cells = summarize(scenario_name, &baselines, &runs);
    Ok(SweepResult {
        scenario: scenario_name.to_string(),
        grid: SweepGrid {
            seeds,
            ..grid.clone()
        },
        baselines,
        runs,
        cells,
    })
}

fn cell_error(veh_rate: f64, tls_rate: f64, seed: u64, source: Error) -> Error {
    Error::Cell {
        veh_rate,
        tls_rate,
        seed,
        source: Box::new(source),
    }
}

fn cell_run(veh_rate: f64, tls_rate: f64, r: &SimulationResult, baseline: &[VehicleRecord]) -> CellRun {
    let unequipped_ids: Vec<bool> = r.vehicles.iter().map(|v| !v.equipped).collect();
    let unequipped_baseline =
        Aggregate::over(baseline.iter().filter(|b| unequipped_ids[b.id as usize]));
    CellRun {
        veh_rate,
        tls_rate,
        seed: r.seed,
        n_finished: r.n_finished,
        n_unfinished: r.n_unfinished + r.n_not_inserted,
        all: r.all,
        equipped: r.equipped,
        unequipped: r.unequipped,
        unequipped_baseline,
    }
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        Some((xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        Some(0.0)
    };
    (Some(mean), sd)
}

fn mean_of<'a>(aggs: impl Iterator<Item = &'a Aggregate>, metric: Metric) -> (Option<f64>, Option<f64>) {
    let xs: Vec<f64> = aggs.filter_map(|a| metric.of(a)).collect();
    mean_sd(&xs)
}

/// Across-seed means and reductions per cell.
///
/// Reductions compare across-seed means over the seeds that have a value
/// in both the cell and the baseline.
pub fn summarize(scenario: &str, baselines: &[BaselineRun], runs: &[CellRun]) -> Vec<CellSummary> {
    let base_by_seed: BTreeMap<u64, &BaselineRun> = baselines.iter().map(|b| (b.seed, b)).collect();
    let mut sorted: Vec<&CellRun> = runs.iter().collect();
    sorted.sort_by(|a, b| {
        (a.veh_rate, a.tls_rate, a.seed)
            .partial_cmp(&(b.veh_rate, b.tls_rate, b.seed))
            .expect("rates are finite")
    });
    let mut groups: Vec<((f64, f64), Vec<&CellRun>)> = Vec::new();
    for r in sorted {
        match groups.last_mut() {
            Some((key, members)) if *key == (r.veh_rate, r.tls_rate) => members.push(r),
            _ => groups.push(((r.veh_rate, r.tls_rate), vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((veh_rate, tls_rate), members)| {
            let paired = |m: Metric| -> (Option<f64>, Option<f64>) {
                let (mut b, mut t) = (Vec::new(), Vec::new());
                for r in &members {
                    if let (Some(x), Some(y)) = (
                        base_by_seed.get(&r.seed).and_then(|base| m.of(&base.all)),
                        m.of(&r.all),
                    ) {
                        b.push(x);
                        t.push(y);
                    }
                }
                (mean_sd(&b).0, mean_sd(&t).0)
            };
            let paired_unequipped = |m: Metric| -> Option<f64> {
                let (mut b, mut t) = (Vec::new(), Vec::new());
                for r in &members {
                    if let (Some(x), Some(y)) = (m.of(&r.unequipped_baseline), m.of(&r.unequipped)) {
                        b.push(x);
                        t.push(y);
                    }
                }
                reduction(mean_sd(&b).0?, mean_sd(&t).0?)
            };
            let red = |m: Metric| {
                let (b, t) = paired(m);
                reduction(b?, t?)
            };
            let (mean_co2_g, sd_co2_g) = mean_of(members.iter().map(|r| &r.all), Metric::Co2);
            let (mean_wait_s, sd_wait_s) = mean_of(members.iter().map(|r| &r.all), Metric::Wait);
            let (mean_travel_s, sd_travel_s) = mean_of(members.iter().map(|r| &r.all), Metric::Travel);
            let seeds = members.iter().filter_map(|r| base_by_seed.get(&r.seed));
            let base: Vec<&Aggregate> = seeds.map(|b| &b.all).collect();
            CellSummary {
                scenario: scenario.to_string(),
                veh_rate,
                tls_rate,
                n_seeds: members.len(),
                mean_co2_g,
                sd_co2_g,
                mean_wait_s,
                sd_wait_s,
                mean_travel_s,
                sd_travel_s,
                base_co2_g: mean_of(base.iter().copied(), Metric::Co2).0,
                base_wait_s: mean_of(base.iter().copied(), Metric::Wait).0,
                base_travel_s: mean_of(base.iter().copied(), Metric::Travel).0,
                red_co2_pct: red(Metric::Co2),
                red_wait_pct: red(Metric::Wait),
                red_travel_pct: red(Metric::Travel),
                red_co2_unequipped_pct: paired_unequipped(Metric::Co2),
                red_wait_unequipped_pct: paired_unequipped(Metric::Wait),
                n_unfinished: members.iter().map(|r| r.n_unfinished).sum(),
            }
        })
        .collect()
}

/// Best cell for `metric`: highest reduction, ties to the lowest total
/// equipment, then the lowest vehicle rate. `None` if no cell has a value.
pub fn best_cells(cells: &[CellSummary], metric: Metric) -> Option<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for c in cells {
        let Some(r) = c.reduction(metric) else { continue };
        let better = match best {
            None => true,
            Some((bv, bl, br)) => {
                r > br || (r == br && (c.veh_rate + c.tls_rate, c.veh_rate) < (bv + bl, bv))
            }
        };
        if better {
            best = Some((c.veh_rate, c.tls_rate, r));
        }
    }
    best
}

/// Spearman rank correlation (average ranks for ties). `None` when either
/// side is constant or the lengths differ or are below two.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn parse_opt(field: &str, s: &str) -> Result<Option<f64>> {
    if s == "NA" {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Input(format!("column {field}: not a number: '{s}'")))
}

impl SweepResult {
    /// Writes `results.csv`, `summary.csv` and, if asked, one SVG heatmap per metric.
    pub fn write_dir(&self, dir: &Path, svg: bool) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(RESULTS_FILE))?;
        w.write_record(RESULTS_HEADER)?;
        for r in &self.runs {
            w.write_record([
                self.scenario.clone(),
                r.veh_rate.to_string(),
                r.tls_rate.to_string(),
                r.seed.to_string(),
                r.n_finished.to_string(),
                fmt_opt(r.all.mean_co2_g),
                fmt_opt(r.all.mean_wait_s),
                fmt_opt(r.all.mean_travel_s),
                fmt_opt(r.unequipped.mean_co2_g),
                fmt_opt(r.unequipped.mean_wait_s),
            ])?;
        }
        w.flush()?;
        write_summary(&dir.join(SUMMARY_FILE), &self.cells)?;
        if svg {
            write_heatmaps(dir, &self.cells)?;
        }
        Ok(())
    }
}

pub fn write_summary(path: &Path, cells: &[CellSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for c in cells {
        w.write_record([
            c.scenario.clone(),
            c.veh_rate.to_string(),
            c.tls_rate.to_string(),
            c.n_seeds.to_string(),
            fmt_opt(c.mean_co2_g),
            fmt_opt(c.sd_co2_g),
            fmt_opt(c.mean_wait_s),
            fmt_opt(c.sd_wait_s),
            fmt_opt(c.mean_travel_s),
            fmt_opt(c.sd_travel_s),
            fmt_opt(c.base_co2_g),
            fmt_opt(c.base_wait_s),
            fmt_opt(c.base_travel_s),
            fmt_opt(c.red_co2_pct),
            fmt_opt(c.red_wait_pct),
            fmt_opt(c.red_travel_pct),
            fmt_opt(c.red_co2_unequipped_pct),
            fmt_opt(c.red_wait_unequipped_pct),
            c.n_unfinished.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a summary written by [`write_summary`], checking the header.
pub fn read_summary(path: &Path) -> Result<Vec<CellSummary>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Input(format!("{}: unexpected header", path.display())));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| parse_opt(SUMMARY_HEADER[k], get(k));
        let req = |k: usize| -> Result<f64> {
            num(k)?.ok_or_else(|| Error::Input(format!("row {}: {} missing", i + 1, SUMMARY_HEADER[k])))
        };
        let count = |k: usize| -> Result<usize> {
            get(k)
                .parse()
                .map_err(|_| Error::Input(format!("row {}: {} is not a count", i + 1, SUMMARY_HEADER[k])))
        };
        let veh_rate = req(1)?;
        let tls_rate = req(2)?;
        if !(0.0..=1.0).contains(&veh_rate) || !(0.0..=1.0).contains(&tls_rate) {
            return Err(Error::Input(format!("row {}: rate outside [0, 1]", i + 1)));
        }
        out.push(CellSummary {
            scenario: get(0).to_string(),
            veh_rate,
            tls_rate,
            n_seeds: count(3)?,
            mean_co2_g: num(4)?,
            sd_co2_g: num(5)?,
            mean_wait_s: num(6)?,
            sd_wait_s: num(7)?,
            mean_travel_s: num(8)?,
            sd_travel_s: num(9)?,
            base_co2_g: num(10)?,
            base_wait_s: num(11)?,
            base_travel_s: num(12)?,
            red_co2_pct: num(13)?,
            red_wait_pct: num(14)?,
            red_travel_pct: num(15)?,
            red_co2_unequipped_pct: num(16)?,
            red_wait_unequipped_pct: num(17)?,
            n_unfinished: count(18)?,
        });
    }
    if out.is_empty() {
        return Err(Error::Input(format!("{}: no cells", path.display())));
    }
    Ok(out)
}

/// Checks a results file written by [`SweepResult::write_dir`]; returns its row count.
pub fn check_results(path: &Path) -> Result<usize> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(Error::Input(format!("{}: unexpected header", path.display())));
    }
    let mut n = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        for k in 1..RESULTS_HEADER.len() {
            let v = rec.get(k).unwrap_or("");
            if v != "NA" && v.parse::<f64>().is_err() {
                return Err(Error::Input(format!(
                    "{}: row {}: column {} is not a number",
                    path.display(),
                    i + 1,
                    RESULTS_HEADER[k]
                )));
            }
        }
        n += 1;
    }
    Ok(n)
}

pub fn write_heatmaps(dir: &Path, cells: &[CellSummary]) -> Result<()> {
    for m in Metric::ALL {
        fs::write(dir.join(format!("heatmap_{}.svg", m.name())), heatmap_svg(cells, m))?;
    }
    Ok(())
}

/// Reduction heatmap: light rate on x, vehicle rate on y (growing upwards).
pub fn heatmap_svg(cells: &[CellSummary], metric: Metric) -> String {
    let mut vs: Vec<f64> = cells.iter().map(|c| c.veh_rate).collect();
    let mut ls: Vec<f64> = cells.iter().map(|c| c.tls_rate).collect();
    for v in [&mut vs, &mut ls] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let (cw, ch, left, top) = (56.0, 32.0, 70.0, 40.0);
    let width = left + cw * ls.len() as f64 + 20.0;
    let height = top + ch * vs.len() as f64 + 50.0;
    let scale = cells
        .iter()
        .filter_map(|c| c.reduction(metric))
        .fold(0.0f64, |m, r| m.max(r.abs()))
        .max(1e-9);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="14">Reduction of {} (%)</text>"#,
        metric.label()
    );
    for c in cells {
        let col = ls.iter().position(|&l| l == c.tls_rate).unwrap_or(0) as f64;
        let row = (vs.len() - 1 - vs.iter().position(|&v| v == c.veh_rate).unwrap_or(0)) as f64;
        let (x, y) = (left + col * cw, top + row * ch);
        let (fill, label) = match c.reduction(metric) {
            Some(r) => (color(r / scale), format!("{r:.1}")),
            None => ("#dddddd".to_string(), "NA".to_string()),
        };
        let _ = writeln!(
            s,
            r#"<rect x="{x}" y="{y}" width="{cw}" height="{ch}" fill="{fill}" stroke="white"/><text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
            x + cw / 2.0,
            y + ch / 2.0 + 4.0
        );
    }
    for (i, v) in vs.iter().enumerate() {
        let y = top + (vs.len() - 1 - i) as f64 * ch + ch / 2.0 + 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{v}</text>"#, left - 6.0);
    }
    for (i, l) in ls.iter().enumerate() {
        let x = left + i as f64 * cw + cw / 2.0;
        let y = top + vs.len() as f64 * ch + 16.0;
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="middle">{l}</text>"#);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">light penetration</text>"#,
        left + cw * ls.len() as f64 / 2.0,
        top + vs.len() as f64 * ch + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">vehicle penetration</text>"#,
        top + vs.len() as f64 * ch / 2.0,
        top + vs.len() as f64 * ch / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Diverging color: red for negative, white at zero, green for positive.
fn color(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0 * (1.0 - t), 255.0 - 80.0 * t, 255.0 * (1.0 - t))
    } else {
        (255.0 + 0.0 * t, 255.0 * (1.0 + t), 255.0 * (1.0 + t))
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(v: f64, l: f64, red_wait: Option<f64>) -> CellSummary {
        CellSummary {
            scenario: "t".into(),
            veh_rate: v,
            tls_rate: l,
            n_seeds: 1,
            mean_co2_g: Some(1.0),
            sd_co2_g: Some(0.0),
            mean_wait_s: Some(1.0),
            sd_wait_s: Some(0.0),
            mean_travel_s: Some(1.0),
            sd_travel_s: Some(0.0),
            base_co2_g: Some(1.0),
            base_wait_s: Some(1.0),
            base_travel_s: Some(1.0),
            red_co2_pct: Some(0.0),
            red_wait_pct: red_wait,
            red_travel_pct: Some(0.0),
            red_co2_unequipped_pct: None,
            red_wait_unequipped_pct: None,
            n_unfinished: 0,
        }
    }

    #[test]
    fn reduction_examples() {
        assert!((reduction(100.0, 89.0).unwrap() - 11.0).abs() < 1e-12);
        assert_eq!(reduction(42.0, 42.0), Some(0.0));
        assert!((reduction(50.0, 55.0).unwrap() + 10.0).abs() < 1e-12);
        assert_eq!(reduction(0.0, 3.0), None);
    }

    #[test]
    fn best_cell_tie_breaks_to_least_equipment() {
        let cells = vec![cell(1.0, 0.0, Some(0.0)), cell(0.1, 0.5, Some(0.0)), cell(0.1, 0.0, Some(0.0))];
        assert_eq!(best_cells(&cells, Metric::Wait), Some((0.1, 0.0, 0.0)));
    }

    #[test]
    fn best_cell_single_and_planted() {
        assert_eq!(best_cells(&[cell(0.3, 0.4, Some(7.0))], Metric::Wait), Some((0.3, 0.4, 7.0)));
        let mut cells: Vec<_> = (1..=3)
            .flat_map(|v| (0..=3).map(move |l| cell(v as f64 / 10.0, l as f64 / 10.0, Some(v as f64 + l as f64))))
            .collect();
        cells[5].red_wait_pct = Some(99.0);
        let planted = (cells[5].veh_rate, cells[5].tls_rate);
        assert_eq!(best_cells(&cells, Metric::Wait), Some((planted.0, planted.1, 99.0)));
        assert_eq!(best_cells(&[cell(0.1, 0.1, None)], Metric::Wait), None);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // Ties share the average rank: x ranks [1.5, 1.5, 3], y ranks [1, 2, 3].
        let r = spearman(&[5.0, 5.0, 9.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.8660254037844386).abs() < 1e-12, "{r}");
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::default().validate().is_ok());
        let g = SweepGrid {
            vehicle_rates: vec![1.5],
            ..SweepGrid::default()
        };
        assert!(g.validate().is_err());
        let g = SweepGrid {
            seeds: vec![],
            ..SweepGrid::default()
        };
        assert!(g.validate().is_err());
        assert_eq!(SweepGrid::default().vehicle_rates.len(), 10);
        assert_eq!(SweepGrid::default().light_rates.len(), 11);
    }

    #[test]
    fn summary_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(SUMMARY_FILE);
        let cells = vec![cell(0.1, 0.0, Some(0.0)), cell(0.2, 1.0, None)];
        write_summary(&p, &cells).unwrap();
        assert_eq!(read_summary(&p).unwrap(), cells);
    }

    #[test]
    fn heatmap_is_svg() {
        let svg = heatmap_svg(&[cell(0.1, 0.0, Some(-3.0)), cell(0.1, 0.5, Some(12.0))], Metric::Wait);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 2);
    }
}
