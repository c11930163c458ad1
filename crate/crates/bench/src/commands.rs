//! `solve`, `verify`, `bench` and `report`.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cavity_core::decomp::{choose_dims, grow_grid, DecompMode, GrowthType};
use cavity_core::halo::Strategy;
use cavity_core::metrics::{io_guard, RunRecord, Scaling, ScalingSeries};
use cavity_core::mesh::{interior_box, Var};
use cavity_core::run::{run, RunOutcome, RunSpec};
use serde::{Deserialize, Serialize};

use crate::config::{GridSize, RunConfig};
use crate::dump::write_dump;
use crate::svg::{Plot, Series};

/// Schedulable cores on this host.
pub fn available_cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

pub fn record_for(spec: &RunSpec<f64>, mode: DecompMode, growth: Option<GrowthType>, out: &RunOutcome<f64>) -> RunRecord {
    let np = spec.dims.ranks();
    let mut r = RunRecord {
        np,
        mode,
        dims: spec.dims,
        strategy: spec.strategy,
        overlap: spec.overlap,
        growth,
        size: spec.n.iter().map(|&n| n as u64).product(),
        steps: out.timed_steps as u64,
        wall_time: out.wall_time,
        ssspnt: None,
        speedup: None,
        efficiency: None,
        bytes_sent: out.bytes_per_iteration(),
        oversubscribed: np > available_cores(),
    };
    r.compute_ssspnt();
    r
}

pub struct SolveResult {
    pub record: RunRecord,
    pub outcome: RunOutcome<f64>,
    pub dump: Option<PathBuf>,
}

/// Marches one configuration; writes `solution.bin` and `record.csv` into
/// the output directory, if any, after the timed loop has finished.
/// `progress` prints relative residuals every that many iterations.
pub fn cmd_solve(cfg: &RunConfig, progress: Option<usize>) -> Result<SolveResult> {
    let mut spec = cfg.to_spec()?;
    spec.progress = progress;
    let outcome = run(&spec)?;
    let record = record_for(&spec, cfg.mode, None, &outcome);
    let mut dump = None;
    if let Some(dir) = &cfg.out {
        debug_assert!(io_guard());
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("solution.bin");
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_dump(&outcome.fields, BufWriter::new(file))?;
        write_csv(&dir.join("record.csv"), std::slice::from_ref(&record))?;
        fs::write(dir.join("config.txt"), cfg.to_text())?;
        dump = Some(path);
    }
    Ok(SolveResult { record, outcome, dump })
}

/// Interior comparison of two runs.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    /// `max |test − ref| / max |ref|` per variable (absolute where `ref` is
    /// identically zero), in `p, u, v, w, T` order.
    pub rel_diff: [f64; 5],
    pub tolerance: f64,
    pub steps: usize,
    pub pass: bool,
}

impl VerifyReport {
    pub fn compare(reference: &RunOutcome<f64>, test: &RunOutcome<f64>, tolerance: f64) -> Result<Self> {
        if reference.fields.grid().n() != test.fields.grid().n() {
            bail!("grids differ: {:?} vs {:?}", reference.fields.grid().n(), test.fields.grid().n());
        }
        if reference.steps != test.steps {
            bail!("step counts differ: {} vs {}", reference.steps, test.steps);
        }
        let n = reference.fields.grid().n();
        let rel_diff = std::array::from_fn(|v| {
            let var = Var::ALL[v];
            let (a, b) = (&reference.fields[var], &test.fields[var]);
            let (mut diff, mut scale) = (0f64, 0f64);
            let mut nan = false;
            interior_box(n).for_each(|i, j, k| {
                let d = (a.get(i, j, k) - b.get(i, j, k)).abs();
                nan |= d.is_nan();
                diff = diff.max(d);
                scale = scale.max(a.get(i, j, k).abs());
            });
            if nan {
                f64::NAN
            } else if scale > 0.0 {
                diff / scale
            } else {
                diff
            }
        });
        let pass = rel_diff.iter().all(|&d| d <= tolerance);
        Ok(VerifyReport { rel_diff, tolerance, steps: reference.steps, pass })
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (var, d) in Var::ALL.iter().zip(self.rel_diff) {
            writeln!(f, "{:>2}  max rel diff {d:.3e}", var.name())?;
        }
        write!(f, "{} after {} steps (tolerance {:.1e})", if self.pass { "PASS" } else { "FAIL" }, self.steps, self.tolerance)
    }
}

/// Default verification tolerance for fixed-step runs.
pub const VERIFY_TOL: f64 = 1e-12;
/// Looser bound for converged runs whose step counts may round differently.
pub const VERIFY_TOL_FALLBACK: f64 = 1e-8;

/// Runs both specs for the same number of fixed steps and compares them.
pub fn verify_specs(reference: &RunSpec<f64>, test: &RunSpec<f64>, tolerance: f64) -> Result<VerifyReport> {
    if reference.n != test.n {
        bail!("grids differ: {:?} vs {:?}", reference.n, test.n);
    }
    if reference.config != test.config || reference.params != test.params {
        bail!("physics or marching settings differ between reference and test");
    }
    let a = run(reference)?;
    let b = run(test)?;
    VerifyReport::compare(&a, &b, tolerance)
}

pub fn cmd_verify(reference: &RunConfig, test: &RunConfig, tolerance: f64) -> Result<VerifyReport> {
    verify_specs(&reference.to_spec()?, &test.to_spec()?, tolerance)
}

/// One sweep over ranks, strategies, decompositions and overlap settings.
#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub scaling: Scaling,
    /// Total grid (strong) or per-rank base grid (weak).
    pub grid: GridSize,
    pub nps: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub modes: Vec<DecompMode>,
    pub overlaps: Vec<bool>,
    pub growth: GrowthType,
    /// Timed iterations per point; one untimed warm-up is added.
    pub steps: usize,
    pub base: RunConfig,
}

#[derive(Debug)]
pub struct BenchPoint {
    pub mode: DecompMode,
    pub strategy: Strategy,
    pub overlap: bool,
    pub np: usize,
    pub result: std::result::Result<RunRecord, String>,
}

pub fn point_grid(plan: &BenchPlan, np: usize, mode: DecompMode) -> Result<[usize; 3]> {
    Ok(match plan.scaling {
        Scaling::Strong => plan.grid.0,
        Scaling::Weak => grow_grid(plan.grid.0, np, mode, plan.growth)?,
    })
}

fn run_point(plan: &BenchPlan, mode: DecompMode, strategy: Strategy, overlap: bool, np: usize) -> Result<RunRecord> {
    let mut spec = plan.base.to_spec()?;
    spec.n = point_grid(plan, np, mode)?;
    spec.dims = choose_dims(np, mode)?;
    spec.strategy = strategy;
    spec.overlap = overlap;
    spec.config.max_steps = plan.steps + 1;
    // fixed-length runs: only an exactly zero residual can stop early
    spec.config.conv_tol = f64::MIN_POSITIVE;
    spec.warmup = true;
    let out = run(&spec)?;
    let growth = matches!(plan.scaling, Scaling::Weak).then_some(plan.growth);
    Ok(record_for(&spec, mode, growth, &out))
}

/// Runs every point; failures are kept per point and the sweep continues.
pub fn cmd_bench(plan: &BenchPlan) -> Vec<BenchPoint> {
    let mut points = Vec::new();
    for &mode in &plan.modes {
        for &strategy in &plan.strategies {
            for &overlap in &plan.overlaps {
                for &np in &plan.nps {
                    let result = run_point(plan, mode, strategy, overlap, np).map_err(|e| format!("{e:#}"));
                    points.push(BenchPoint { mode, strategy, overlap, np, result });
                }
            }
        }
    }
    let mut groups: BTreeMap<(String, Strategy, bool), Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        groups.entry((p.mode.to_string(), p.strategy, p.overlap)).or_default().push(i);
    }
    for idx in groups.values() {
        let records = idx.iter().filter_map(|&i| points[i].result.as_ref().ok().cloned()).collect();
        let mut series = ScalingSeries::new(plan.scaling, records);
        series.fill_relative();
        for r in series.records {
            if let Some(p) = points.iter_mut().find(|p| {
                p.np == r.np && p.mode == r.mode && p.strategy == r.strategy && p.overlap == r.overlap
            }) {
                p.result = Ok(r);
            }
        }
    }
    points
}

pub const CSV_HEADER: [&str; 12] = [
    "np", "mode", "dims", "strategy", "overlap", "size", "steps", "wall_time_s", "ssspnt", "speedup", "efficiency",
    "bytes_sent",
];

/// One CSV line; field order is the stable schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub np: usize,
    pub mode: String,
    pub dims: String,
    pub strategy: String,
    pub overlap: bool,
    pub size: u64,
    pub steps: u64,
    pub wall_time_s: f64,
    pub ssspnt: Option<f64>,
    pub speedup: Option<f64>,
    pub efficiency: Option<f64>,
    pub bytes_sent: u64,
}

impl From<&RunRecord> for CsvRow {
    fn from(r: &RunRecord) -> Self {
        CsvRow {
            np: r.np,
            mode: r.mode.to_string(),
            dims: r.dims.to_string(),
            strategy: r.strategy.to_string(),
            overlap: r.overlap,
            size: r.size,
            steps: r.steps,
            wall_time_s: r.wall_time,
            ssspnt: r.ssspnt,
            speedup: r.speedup,
            efficiency: r.efficiency,
            bytes_sent: r.bytes_sent,
        }
    }
}

pub fn write_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in records {
        w.serialize(CsvRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        bail!("unexpected CSV header {header:?}");
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Throughput and efficiency plots, one polyline per (mode, strategy, overlap).
pub fn plots(rows: &[CsvRow], log: bool) -> [Plot; 2] {
    let mut groups: BTreeMap<String, Vec<&CsvRow>> = BTreeMap::new();
    for r in rows {
        let label = format!("{} {}{}", r.mode, r.strategy, if r.overlap { " ovl" } else { "" });
        groups.entry(label).or_default().push(r);
    }
    let series = |f: &dyn Fn(&CsvRow) -> Option<f64>| -> Vec<Series> {
        groups
            .iter()
            .map(|(label, rs)| {
                let mut points: Vec<(f64, f64)> = rs.iter().filter_map(|r| Some((r.np as f64, f(r)?))).collect();
                points.sort_by(|a, b| a.0.total_cmp(&b.0));
                Series { label: label.clone(), points }
            })
            .collect()
    };
    [
        Plot {
            title: "ssspnt vs ranks".into(),
            x_label: "np".into(),
            y_label: "ssspnt".into(),
            log_x: log,
            log_y: log,
            series: series(&|r| r.ssspnt),
        },
        Plot {
            title: "parallel efficiency".into(),
            x_label: "np".into(),
            y_label: "efficiency".into(),
            log_x: log,
            log_y: false,
            series: series(&|r| r.efficiency),
        },
    ]
}

/// Writes `bench.csv`, `ssspnt.svg` and `efficiency.svg` into `dir`.
pub fn write_bench_outputs(dir: &Path, points: &[BenchPoint], log: bool) -> Result<Vec<CsvRow>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let records: Vec<RunRecord> = points.iter().filter_map(|p| p.result.as_ref().ok().cloned()).collect();
    write_csv(&dir.join("bench.csv"), &records)?;
    let rows: Vec<CsvRow> = records.iter().map(CsvRow::from).collect();
    write_plots(dir, &rows, log)?;
    Ok(rows)
}

pub fn write_plots(dir: &Path, rows: &[CsvRow], log: bool) -> Result<()> {
    let [s, e] = plots(rows, log);
    fs::write(dir.join("ssspnt.svg"), s.render())?;
    fs::write(dir.join("efficiency.svg"), e.render())?;
    Ok(())
}

/// Aligned text table of CSV rows.
pub fn format_table(rows: &[CsvRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"));
    let mut out = format!(
        "{:>4} {:>5} {:>9} {:>8} {:>7} {:>10} {:>6} {:>11} {:>9} {:>8} {:>10} {:>12}\n",
        "np", "mode", "dims", "strategy", "overlap", "size", "steps", "wall_time_s", "ssspnt", "speedup", "efficiency",
        "bytes_sent"
    );
    for r in rows {
        out.push_str(&format!(
            "{:>4} {:>5} {:>9} {:>8} {:>7} {:>10} {:>6} {:>11.4} {:>9} {:>8} {:>10} {:>12}\n",
            r.np,
            r.mode,
            r.dims,
            r.strategy,
            r.overlap,
            r.size,
            r.steps,
            r.wall_time_s,
            opt(r.ssspnt),
            opt(r.speedup),
            opt(r.efficiency),
            r.bytes_sent
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_keeps_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let rec = RunRecord {
            np: 2,
            mode: DecompMode::TwoD,
            dims: cavity_core::decomp::Dims([1, 1, 2]),
            strategy: Strategy::V2,
            overlap: true,
            growth: None,
            size: 1000,
            steps: 10,
            wall_time: 0.5,
            ssspnt: Some(1e-4),
            speedup: None,
            efficiency: None,
            bytes_sent: 4800,
            oversubscribed: false,
        };
        write_csv(&path, std::slice::from_ref(&rec)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(read_csv(&path).unwrap(), vec![CsvRow::from(&rec)]);
    }
}
