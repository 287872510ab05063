//! Experiment harness: matrix sources, batch sweeps, grid-search tuning and
//! metric aggregation.
//!
//! A sweep runs one solver per (method, batch, seed) cell at a fixed oracle
//! budget. Cells are independent, so the scheduler may run them in parallel;
//! records are sorted by configuration key afterwards, which makes the output
//! identical for any parallelism degree.

pub mod generators;
pub mod trace_csv;

pub use generators::{generate_policeman_burglar, generate_ramp_matrix, DEFAULT_THETA};
pub use trace_csv::{
    parse_trace_csv, read_trace_csv, records_to_csv, write_records_csv, TRACE_HEADER,
};

use crate::problems::{Decomposition, Matrix, MatrixGame, ProblemError};
use crate::solvers::{
    MethodParams, MethodRegistry, RunOptions, RunRecord, SolverError,
};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    BadPlan(String),
    #[error("all grid points diverged (non-finite final gap); grid: {0}")]
    AllDiverged(String),
    #[error("csv error in {path}, line {line}: {reason}")]
    Csv {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Where the benchmark matrix comes from.
#[derive(Clone, Debug)]
pub enum MatrixSource {
    PolicemanBurglar { n: usize, seed: u64, theta: f64 },
    Ramp { n: usize },
    File(PathBuf),
}

impl MatrixSource {
    /// Load or generate the matrix together with a short label for records.
    pub fn load(&self) -> Result<(Matrix, String), HarnessError> {
        match self {
            MatrixSource::PolicemanBurglar { n, seed, theta } => Ok((
                generate_policeman_burglar(*n, *seed, *theta)?,
                format!("pb{n}s{seed}"),
            )),
            MatrixSource::Ramp { n } => Ok((generate_ramp_matrix(*n)?, format!("ramp{n}"))),
            MatrixSource::File(path) => {
                let m = if path.extension().and_then(|e| e.to_str()) == Some("csv") {
                    Matrix::read_csv(path)?
                } else {
                    Matrix::read_binary(path)?
                };
                let label = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("matrix")
                    .to_string();
                Ok((m, label))
            }
        }
    }

    pub fn game(&self) -> Result<MatrixGame, HarnessError> {
        let (matrix, label) = self.load()?;
        Ok(MatrixGame::new(matrix, Decomposition::Rows)?.with_label(label))
    }
}

/// A registered method plus the knobs to build it with.
#[derive(Clone, Debug)]
pub struct MethodSpec {
    pub name: String,
    pub params: MethodParams,
}

/// Full description of a sweep: one run per (method, batch, seed) cell,
/// every cell at the same oracle budget.
#[derive(Clone, Debug)]
pub struct ExperimentPlan {
    pub source: MatrixSource,
    pub methods: Vec<MethodSpec>,
    pub batches: Vec<usize>,
    pub seeds: Vec<u64>,
    pub budget: u64,
    pub gap_every: u64,
    pub out_dir: Option<PathBuf>,
    /// Upper bound on concurrently running cells; 0 means the scheduler
    /// default.
    pub parallel: usize,
    pub timing: bool,
}

impl ExperimentPlan {
    fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::BadPlan("no methods given".into()));
        }
        if self.batches.is_empty() {
            return Err(HarnessError::BadPlan("no batch sizes given".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::BadPlan("no seeds given".into()));
        }
        if self.budget == 0 {
            return Err(HarnessError::BadPlan("budget must be positive".into()));
        }
        Ok(())
    }
}

/// Run every cell of the plan and return the records sorted by
/// (method, batch, seed). Content is independent of execution order and of
/// the parallelism degree. When `out_dir` is set, traces land in
/// `traces.csv` and the aggregate in `summary.csv` under that directory.
pub fn sweep_batches(plan: &ExperimentPlan) -> Result<Vec<RunRecord>, HarnessError> {
    plan.validate()?;
    let game = plan.source.game()?;
    let registry = MethodRegistry::with_builtins();
    let mut cells = Vec::new();
    for spec in &plan.methods {
        for &b in &plan.batches {
            for &seed in &plan.seeds {
                cells.push((spec.clone(), b, seed));
            }
        }
    }
    let run_cell = |(spec, b, seed): &(MethodSpec, usize, u64)| -> Result<RunRecord, HarnessError> {
        let mut params = spec.params.clone();
        params.b = *b;
        let method = registry.build(&spec.name, &params)?;
        let mut opts = RunOptions::new(plan.budget, plan.gap_every, *seed);
        opts.timing = plan.timing;
        Ok(method.run(&game, &opts)?)
    };
    let results: Vec<Result<RunRecord, HarnessError>> = if plan.parallel == 1 {
        cells.iter().map(run_cell).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.parallel)
            .build()
            .map_err(|e| HarnessError::BadPlan(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            cells.par_iter().map(run_cell).collect()
        })
    };
    let mut records = Vec::with_capacity(results.len());
    for r in results {
        records.push(r?);
    }
    records.sort_by(|a, b| {
        (&a.method, a.b, a.seed)
            .partial_cmp(&(&b.method, b.b, b.seed))
            .unwrap()
    });
    if let Some(dir) = &plan.out_dir {
        std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        write_records_csv(&records, &dir.join("traces.csv"))?;
        let rows = aggregate(&records)?;
        std::fs::write(dir.join("summary.csv"), aggregate_to_csv(&rows)).map_err(|source| {
            HarnessError::Io {
                path: dir.join("summary.csv").display().to_string(),
                source,
            }
        })?;
    }
    Ok(records)
}

/// One grid cell of a tuning run.
#[derive(Clone, Copy, Debug)]
pub struct GridCell {
    pub eta: f64,
    pub gamma: f64,
    pub median_final_gap: f64,
}

/// Result of a grid search: the winning (eta, gamma) pair and the whole
/// leaderboard sorted best-first, ties toward smaller eta then gamma.
#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub best_eta: f64,
    pub best_gamma: f64,
    pub leaderboard: Vec<GridCell>,
}

/// Evaluate the final gap at a fixed budget for every grid point over a
/// fixed seed set; the winner minimizes the median final gap.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    game: &MatrixGame,
    method_name: &str,
    base: &MethodParams,
    eta_grid: &[f64],
    gamma_grid: &[f64],
    budget: u64,
    gap_every: u64,
    seeds: &[u64],
) -> Result<GridOutcome, HarnessError> {
    if eta_grid.is_empty() || gamma_grid.is_empty() {
        return Err(HarnessError::BadPlan("empty tuning grid".into()));
    }
    if seeds.is_empty() {
        return Err(HarnessError::BadPlan("no seeds given".into()));
    }
    let registry = MethodRegistry::with_builtins();
    let mut leaderboard = Vec::new();
    for &eta in eta_grid {
        for &gamma in gamma_grid {
            let mut params = base.clone();
            params.eta = Some(eta);
            params.gamma = Some(gamma);
            params.theory = None;
            let method = registry.build(method_name, &params)?;
            let mut gaps = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let rec = method.run(game, &RunOptions::new(budget, gap_every, seed))?;
                gaps.push(rec.final_gap());
            }
            leaderboard.push(GridCell {
                eta,
                gamma,
                median_final_gap: median(&mut gaps),
            });
        }
    }
    leaderboard.sort_by(|a, b| {
        let key = |c: &GridCell| (c.median_final_gap, c.eta, c.gamma);
        key(a).partial_cmp(&key(b)).unwrap_or(std::cmp::Ordering::Equal)
    });
    let best = leaderboard
        .iter()
        .find(|c| c.median_final_gap.is_finite())
        .copied()
        .ok_or_else(|| {
            let grid: Vec<String> = leaderboard
                .iter()
                .map(|c| format!("(eta={}, gamma={})", c.eta, c.gamma))
                .collect();
            HarnessError::AllDiverged(grid.join(", "))
        })?;
    Ok(GridOutcome {
        best_eta: best.eta,
        best_gamma: best.gamma,
        leaderboard,
    })
}

/// Median/interquartile summary of gap traces across seeds.
#[derive(Clone, Debug)]
pub struct AggregateRow {
    pub method: String,
    pub matrix: String,
    pub n: usize,
    pub b: usize,
    pub eta: f64,
    pub gamma: f64,
    pub oracle_calls: u64,
    pub gap_median: f64,
    pub gap_q25: f64,
    pub gap_q75: f64,
}

/// Group records by configuration (everything but the seed) and reduce each
/// checkpoint to median and quartiles across seeds. All records of a group
/// must share the same checkpoint grid.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<AggregateRow>, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::BadPlan("nothing to aggregate".into()));
    }
    use std::collections::BTreeMap;
    type Key = (String, String, usize, usize, u64, u64);
    let key = |r: &RunRecord| -> Key {
        (
            r.method.clone(),
            r.matrix.clone(),
            r.n,
            r.b,
            r.eta.to_bits(),
            r.gamma.to_bits(),
        )
    };
    let mut groups: BTreeMap<Key, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (_, group) in groups {
        let first = group[0];
        let grid: Vec<u64> = first.trace.iter().map(|t| t.oracle_calls).collect();
        for r in &group {
            let g: Vec<u64> = r.trace.iter().map(|t| t.oracle_calls).collect();
            if g != grid {
                return Err(HarnessError::BadPlan(format!(
                    "heterogeneous checkpoint grids for {} b={} (seeds {} vs {})",
                    first.method, first.b, first.seed, r.seed
                )));
            }
        }
        for (i, &calls) in grid.iter().enumerate() {
            let mut gaps: Vec<f64> = group.iter().map(|r| r.trace[i].gap).collect();
            rows.push(AggregateRow {
                method: first.method.clone(),
                matrix: first.matrix.clone(),
                n: first.n,
                b: first.b,
                eta: first.eta,
                gamma: first.gamma,
                oracle_calls: calls,
                gap_median: median(&mut gaps.clone()),
                gap_q25: quantile(&mut gaps.clone(), 0.25),
                gap_q75: quantile(&mut gaps, 0.75),
            });
        }
    }
    Ok(rows)
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut out =
        String::from("method,matrix,n,b,eta,gamma,oracle_calls,gap_median,gap_q25,gap_q75\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.matrix,
            r.n,
            r.b,
            r.eta,
            r.gamma,
            r.oracle_calls,
            r.gap_median,
            r.gap_q25,
            r.gap_q75
        ));
    }
    out
}

/// Linear-interpolation quantile of an unsorted sample (sorted in place).
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        values[lo]
    } else {
        let frac = pos - lo as f64;
        values[lo] * (1.0 - frac) + values[hi] * frac
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    quantile(values, 0.5)
}
