//! Benchmark harness: runs one method over a list of rank counts on the
//! same generated problem and reports speedups against the in-invocation
//! serial baseline.

use gridsolve::error::{Error, Result};

use crate::run::{run_solve, SolveConfig};

pub const CSV_HEADER: &str =
    "method,n,ranks,grid,nb,backend,precision,wall_time_s,flops,iterations,final_relres,speedup_vs_serial";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: String,
    pub n: usize,
    pub ranks: usize,
    pub grid: String,
    pub nb: usize,
    pub backend: String,
    pub precision: String,
    pub wall_time_s: f64,
    pub flops: u64,
    /// Iterative methods only; direct solves leave the field empty.
    pub iterations: Option<usize>,
    pub final_relres: f64,
    pub speedup_vs_serial: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub solve: SolveConfig,
    pub ranks_list: Vec<usize>,
    /// Runs per configuration; the median wall time is reported.
    pub repeat: usize,
}

/// Runs the sweep. The serial baseline always runs (first), even when 1 is
/// missing from the list, so every speedup is computed against a baseline
/// from this same invocation.
pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if cfg.repeat == 0 {
        return Err(Error::InvalidInput("repeat must be >= 1".into()));
    }
    let mut ranks_list: Vec<usize> = Vec::new();
    if !cfg.ranks_list.contains(&1) {
        ranks_list.push(1);
    }
    ranks_list.extend(cfg.ranks_list.iter().copied());

    let mut records = Vec::with_capacity(ranks_list.len());
    let mut serial_time: Option<f64> = None;
    for &ranks in &ranks_list {
        let mut solve_cfg = cfg.solve.clone();
        solve_cfg.ranks = ranks;
        // grid shapes vary with the rank count; each step gets the most
        // square factorization
        solve_cfg.grid = None;
        let mut walls = Vec::with_capacity(cfg.repeat);
        let mut last = None;
        for _ in 0..cfg.repeat {
            let out = run_solve(&solve_cfg)?;
            walls.push(out.wall_time_s);
            last = Some(out);
        }
        walls.sort_by(f64::total_cmp);
        let wall = walls[walls.len() / 2];
        let out = last.expect("repeat >= 1");
        if ranks == 1 {
            serial_time = Some(wall);
        }
        let baseline = serial_time.ok_or_else(|| {
            Error::InvalidInput("serial baseline missing from the sweep".into())
        })?;
        records.push(BenchRecord {
            method: cfg.solve.method.name().to_string(),
            n: out.n,
            ranks,
            grid: format!("{}x{}", out.grid.0, out.grid.1),
            nb: solve_cfg.nb,
            backend: solve_cfg.backend.clone(),
            precision: solve_cfg.precision.to_string(),
            wall_time_s: wall,
            flops: out.flops,
            iterations: cfg.solve.method.is_iterative().then_some(out.report.iterations),
            final_relres: out.report.final_relres,
            speedup_vs_serial: baseline / wall,
        });
    }
    Ok(records)
}

pub fn render_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let iters = r.iterations.map(|i| i.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.n,
            r.ranks,
            r.grid,
            r.nb,
            r.backend,
            r.precision,
            r.wall_time_s,
            r.flops,
            iters,
            r.final_relres,
            r.speedup_vs_serial
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty csv".into()))?;
    if header != CSV_HEADER {
        return Err(Error::InvalidInput(format!("unexpected csv header `{header}`")));
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(Error::InvalidInput(format!(
                "csv line {} has {} fields, expected 12",
                lineno + 2,
                cols.len()
            )));
        }
        let bad = |what: &str| Error::InvalidInput(format!("csv line {}: bad {what}", lineno + 2));
        records.push(BenchRecord {
            method: cols[0].to_string(),
            n: cols[1].parse().map_err(|_| bad("n"))?,
            ranks: cols[2].parse().map_err(|_| bad("ranks"))?,
            grid: cols[3].to_string(),
            nb: cols[4].parse().map_err(|_| bad("nb"))?,
            backend: cols[5].to_string(),
            precision: cols[6].to_string(),
            wall_time_s: cols[7].parse().map_err(|_| bad("wall_time_s"))?,
            flops: cols[8].parse().map_err(|_| bad("flops"))?,
            iterations: if cols[9].is_empty() {
                None
            } else {
                Some(cols[9].parse().map_err(|_| bad("iterations"))?)
            },
            final_relres: cols[10].parse().map_err(|_| bad("final_relres"))?,
            speedup_vs_serial: cols[11].parse().map_err(|_| bad("speedup_vs_serial"))?,
        });
    }
    Ok(records)
}
