//! Double-loop variance-reduced mirror prox baseline.
//!
//! Snapshot epochs: the extrapolation step reuses the cached full operator at
//! the snapshot w, the correction step evaluates one mini-batch at the
//! extrapolated point through the SVRG-style estimate F(w) + F_j(.) - F_j(w).
//! Iterates are pulled toward the snapshot by a dual-space mixing weight
//! alpha. Defaults follow the cited scheme's theoretical scaling: epoch
//! length ceil(M / 2b) (one epoch of corrections costs about one snapshot
//! refresh), alpha = 1 - 1/K, step sqrt((1 - alpha) b) / (2 barL2).

use super::{Method, MethodParams, RunOptions, RunRecord, SolverError, TraceRecorder};
use crate::geometry::{CompositeTerm, DualVector};
use crate::problems::{FiniteSumOperator, GapProblem, OracleCounter, SamplingScheme};
use crate::rng::SplitMix64;

/// SVRG-style estimate of F at `point`, anchored at the snapshot `w` with
/// cached value `f_w`: F(w) + (1/b) sum_j (F_j(point) - F_j(w)). Unbiased for
/// F(point) over a uniform batch; costs 2 component calls per index.
pub fn snapshot_corrected_estimate(
    problem: &dyn FiniteSumOperator,
    point: &[f64],
    w: &[f64],
    f_w: &[f64],
    batch: &[usize],
) -> Vec<f64> {
    let dim = problem.dim();
    let b = batch.len() as f64;
    let mut est = f_w.to_vec();
    let mut at_point = vec![0.0; dim];
    let mut at_w = vec![0.0; dim];
    for &j in batch {
        problem.component(j, point, &mut at_point);
        problem.component(j, w, &mut at_w);
        for i in 0..dim {
            est[i] += (at_point[i] - at_w[i]) / b;
        }
    }
    est
}

pub struct VrMirrorProxMethod {
    params: MethodParams,
}

struct Resolved {
    eta: f64,
    alpha: f64,
    k_inner: usize,
    b: usize,
}

impl VrMirrorProxMethod {
    pub fn new(params: MethodParams) -> Self {
        VrMirrorProxMethod { params }
    }

    fn resolve(&self, problem: &dyn GapProblem) -> Result<Resolved, SolverError> {
        let m = problem.components();
        let b = self.params.b;
        if b == 0 || b > m {
            return Err(SolverError::Config(format!(
                "batch size must lie in 1..={m}, got {b}"
            )));
        }
        let k_inner = m.div_ceil(2 * b).max(1);
        let alpha = 1.0 - 1.0 / k_inner as f64;
        let eta = match self.params.eta {
            Some(e) => e,
            None => {
                let bar = problem.lipschitz().bar_l2;
                if bar > 0.0 {
                    ((1.0 - alpha) * b as f64).sqrt() / (2.0 * bar)
                } else {
                    1.0
                }
            }
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(SolverError::Config(format!(
                "vr-mirror-prox needs a positive step size, got {eta}"
            )));
        }
        Ok(Resolved { eta, alpha, k_inner, b })
    }
}

impl Method for VrMirrorProxMethod {
    fn name(&self) -> &str {
        "vr-mirror-prox"
    }

    fn run(&self, problem: &dyn GapProblem, opts: &RunOptions) -> Result<RunRecord, SolverError> {
        if opts.budget == 0 {
            return Err(SolverError::ZeroBudget);
        }
        let r = self.resolve(problem)?;
        let geom = problem.geometry();
        let dim = problem.dim();
        let m = problem.components();
        let refresh_cost = m as u64;
        let step_cost = 2 * r.b as u64;
        let zero_anchor = DualVector(vec![0.0; dim]);

        let mut rng = SplitMix64::new(opts.seed);
        let mut counter = OracleCounter::new();
        let mut recorder = TraceRecorder::new(opts.gap_every, opts.timing);
        let mut z = problem.start_point();
        let mut w = z.clone();
        let mut f_w = vec![0.0; dim];
        problem.full(&w, &mut f_w);
        counter.charge(refresh_cost);
        let mut avg_sum = vec![0.0; dim];
        let mut avg_len = 0usize;
        let mut inner_steps = 0u64;
        let mut refreshes = 0u64;
        recorder.record_initial(problem, &z);

        'outer: loop {
            for _ in 0..r.k_inner {
                if counter.total() + step_cost > opts.budget {
                    break 'outer;
                }
                // dual-space mixing toward the snapshot
                let gz = geom.grad(&z)?;
                let gw = geom.grad(&w)?;
                let mixed: Vec<f64> = gz
                    .iter()
                    .zip(gw.iter())
                    .map(|(a, b)| r.alpha * a + (1.0 - r.alpha) * b)
                    .collect();
                let z_bar = geom.grad_inverse(&mixed)?;
                // extrapolation with the cached snapshot operator
                let y = geom.prox_step(
                    &z_bar,
                    &zero_anchor,
                    0.0,
                    r.eta,
                    &DualVector(f_w.clone()),
                    CompositeTerm::Zero,
                )?;
                let batch = SamplingScheme::Uniform.draw(r.b, m, &mut rng)?;
                let est = snapshot_corrected_estimate(
                    problem as &dyn FiniteSumOperator,
                    &y,
                    &w,
                    &f_w,
                    &batch,
                );
                counter.charge(step_cost);
                z = geom.prox_step(
                    &z_bar,
                    &zero_anchor,
                    0.0,
                    r.eta,
                    &DualVector(est),
                    CompositeTerm::Zero,
                )?;
                for (a, v) in avg_sum.iter_mut().zip(&y) {
                    *a += v;
                }
                avg_len += 1;
                inner_steps += 1;
                let avg: Vec<f64> = avg_sum.iter().map(|v| v / avg_len as f64).collect();
                recorder.tick(problem, counter.total(), &avg);
            }
            if counter.total() + refresh_cost > opts.budget {
                break;
            }
            w = z.clone();
            problem.full(&w, &mut f_w);
            counter.charge(refresh_cost);
            refreshes += 1;
            let avg: Vec<f64> = if avg_len == 0 {
                z.clone()
            } else {
                avg_sum.iter().map(|v| v / avg_len as f64).collect()
            };
            recorder.tick(problem, counter.total(), &avg);
        }
        let final_point = if avg_len == 0 {
            problem.start_point()
        } else {
            avg_sum.iter().map(|v| v / avg_len as f64).collect()
        };
        if inner_steps > 0 || refreshes > 0 {
            recorder.finish(problem, counter.total(), &final_point);
        }
        let (trace, gap_meter_units) = recorder.into_parts();
        Ok(RunRecord {
            method: self.name().into(),
            matrix: problem.label(),
            n: dim / 2,
            b: r.b,
            seed: opts.seed,
            eta: r.eta,
            gamma: r.alpha,
            trace,
            final_point,
            total_calls: counter.total(),
            inner_steps,
            refreshes,
            gap_meter_units,
            iterate_log: None,
        })
    }
}
