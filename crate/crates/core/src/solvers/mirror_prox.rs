//! Deterministic mirror prox: the classic two-call extragradient scheme in
//! Bregman geometry. Each iteration evaluates the full operator twice
//! (2M oracle units) and the reported point is the ergodic average of the
//! extrapolated iterates.

use super::{Method, MethodParams, RunOptions, RunRecord, SolverError, TraceRecorder};
use crate::geometry::{CompositeTerm, DualVector};
use crate::problems::{GapProblem, OracleCounter};

pub struct MirrorProxMethod {
    params: MethodParams,
}

impl MirrorProxMethod {
    pub fn new(params: MethodParams) -> Self {
        MirrorProxMethod { params }
    }

    /// Step size: explicit, or the classical 1/(sqrt(2) L) with L the
    /// dual-norm Lipschitz constant of the problem.
    fn resolve_eta(&self, problem: &dyn GapProblem) -> Result<f64, SolverError> {
        let eta = match self.params.eta {
            Some(e) => e,
            None => {
                let l = problem.lipschitz().l_dual;
                if l > 0.0 {
                    1.0 / (std::f64::consts::SQRT_2 * l)
                } else {
                    1.0
                }
            }
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(SolverError::Config(format!(
                "mirror-prox needs a positive step size, got {eta}"
            )));
        }
        Ok(eta)
    }
}

impl Method for MirrorProxMethod {
    fn name(&self) -> &str {
        "mirror-prox"
    }

    fn run(&self, problem: &dyn GapProblem, opts: &RunOptions) -> Result<RunRecord, SolverError> {
        if opts.budget == 0 {
            return Err(SolverError::ZeroBudget);
        }
        let eta = self.resolve_eta(problem)?;
        let geom = problem.geometry();
        let dim = problem.dim();
        let m = problem.components() as u64;
        let zero_anchor = DualVector(vec![0.0; dim]);

        let mut counter = OracleCounter::new();
        let mut recorder = TraceRecorder::new(opts.gap_every, opts.timing);
        let mut x = problem.start_point();
        let mut avg_sum = vec![0.0; dim];
        let mut avg_len = 0usize;
        let mut f_at = vec![0.0; dim];
        let mut iters = 0u64;
        let mut log = if opts.log_iterates { Some(Vec::new()) } else { None };

        recorder.record_initial(problem, &x);
        loop {
            if counter.total() + 2 * m > opts.budget {
                break;
            }
            problem.full(&x, &mut f_at);
            counter.charge(m);
            let y = geom.prox_step(
                &x,
                &zero_anchor,
                0.0,
                eta,
                &DualVector(f_at.clone()),
                CompositeTerm::Zero,
            )?;
            problem.full(&y, &mut f_at);
            counter.charge(m);
            x = geom.prox_step(
                &x,
                &zero_anchor,
                0.0,
                eta,
                &DualVector(f_at.clone()),
                CompositeTerm::Zero,
            )?;
            for (a, v) in avg_sum.iter_mut().zip(&y) {
                *a += v;
            }
            avg_len += 1;
            iters += 1;
            if let Some(log) = log.as_mut() {
                log.push(y.clone());
            }
            let avg: Vec<f64> = avg_sum.iter().map(|v| v / avg_len as f64).collect();
            recorder.tick(problem, counter.total(), &avg);
        }
        let final_point = if avg_len == 0 {
            problem.start_point()
        } else {
            avg_sum.iter().map(|v| v / avg_len as f64).collect()
        };
        if iters > 0 {
            recorder.finish(problem, counter.total(), &final_point);
        }
        let (trace, gap_meter_units) = recorder.into_parts();
        Ok(RunRecord {
            method: self.name().into(),
            matrix: problem.label(),
            n: dim / 2,
            b: problem.components(), // full-operator method: batch = M
            seed: opts.seed,
            eta,
            gamma: 0.0,
            trace,
            final_point,
            total_calls: counter.total(),
            inner_steps: iters,
            refreshes: 0,
            gap_meter_units,
            iterate_log: log,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Decomposition, Matrix, MatrixGame};

    #[test]
    fn fixed_point_at_saddle() {
        let a = Matrix::new(2, 2, vec![1.0, -1.0, -1.0, 1.0]);
        let game = MatrixGame::new(a, Decomposition::Rows).unwrap();
        let method = MirrorProxMethod::new(MethodParams {
            eta: Some(0.3),
            ..MethodParams::default()
        });
        let rec = method.run(&game, &RunOptions::new(200, 8, 0)).unwrap();
        // start = saddle: the averaged iterate never moves
        for t in &rec.trace {
            assert!(t.gap.abs() < 1e-14);
        }
        for &v in &rec.final_point {
            assert!((v - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn averaged_gap_decreases_on_rotation_game() {
        let a = Matrix::new(2, 2, vec![0.0, 1.0, -1.0, 0.0]);
        let game = MatrixGame::new(a, Decomposition::Rows).unwrap();
        // eta = 1/(8 L) with L = max|A| = 1
        let method = MirrorProxMethod::new(MethodParams {
            eta: Some(1.0 / 8.0),
            ..MethodParams::default()
        });
        // 100 iterations at 4 units each, checkpoint every iteration
        let rec = method.run(&game, &RunOptions::new(400, 4, 0)).unwrap();
        assert!(rec.trace.len() > 100);
        for pair in rec.trace[1..].windows(2) {
            assert!(
                pair[1].gap <= pair[0].gap + 1e-12,
                "gap increased: {} -> {}",
                pair[0].gap,
                pair[1].gap
            );
        }
    }

    #[test]
    fn rerun_is_bit_identical() {
        let a = Matrix::new(3, 3, vec![0.4, -0.2, 0.7, 0.1, 0.0, -0.5, 0.3, 0.9, -0.1]);
        let game = MatrixGame::new(a, Decomposition::Rows).unwrap();
        let method = MirrorProxMethod::new(MethodParams::default());
        let r1 = method.run(&game, &RunOptions::new(300, 12, 1)).unwrap();
        let r2 = method.run(&game, &RunOptions::new(300, 12, 1)).unwrap();
        assert_eq!(r1.trace.len(), r2.trace.len());
        for (a, b) in r1.trace.iter().zip(&r2.trace) {
            assert_eq!(a.gap.to_bits(), b.gap.to_bits());
        }
        assert_eq!(r1.final_point, r2.final_point);
    }

    #[test]
    fn charges_two_full_operators_per_iteration() {
        let a = Matrix::new(2, 2, vec![0.0, 1.0, -1.0, 0.0]);
        let game = MatrixGame::new(a, Decomposition::Rows).unwrap();
        let method = MirrorProxMethod::new(MethodParams::default());
        let rec = method.run(&game, &RunOptions::new(41, 100, 0)).unwrap();
        // M = 2: 10 iterations of 4 units fit in 41
        assert_eq!(rec.inner_steps, 10);
        assert_eq!(rec.total_calls, 40);
    }

    #[test]
    fn nonpositive_eta_is_an_error() {
        let a = Matrix::new(2, 2, vec![0.0, 1.0, -1.0, 0.0]);
        let game = MatrixGame::new(a, Decomposition::Rows).unwrap();
        let method = MirrorProxMethod::new(MethodParams {
            eta: Some(0.0),
            ..MethodParams::default()
        });
        assert!(method.run(&game, &RunOptions::new(100, 10, 0)).is_err());
    }
}
