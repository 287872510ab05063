//! Batched optimistic method with variance reduction and snapshot momentum.
//!
//! Double-loop structure: an epoch runs K inner prox steps driven by the
//! optimistic variance-reduced estimate (three component evaluations per
//! sampled index), then refreshes the snapshot w as the primal average of the
//! epoch's iterates and the auxiliary anchor wbar as their dual-space
//! average. The momentum weight gamma pulls every prox step toward wbar.
//! The reported point is the running average of all inner iterates.

use super::{
    theoretical_params, Method, MethodParams, RunOptions, RunRecord, SchemeKind, SolverConfig,
    SolverError, TraceRecorder,
};
use crate::geometry::{CompositeTerm, DualVector};
use crate::problems::{estimate_delta, GapProblem, OracleCounter, SamplingScheme};
use crate::rng::SplitMix64;

/// Iterate tuple and epoch accumulators of the optimistic method.
pub struct OmbState {
    pub x_cur: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub w: Vec<f64>,
    pub f_w: Vec<f64>,
    pub w_bar_dual: DualVector,
    epoch_primal_sum: Vec<f64>,
    epoch_dual_sum: Vec<f64>,
    epoch_len: usize,
    run_sum: Vec<f64>,
    run_len: usize,
    start: Vec<f64>,
    pub k: usize,
    pub s: usize,
}

impl OmbState {
    /// Line-2 initialization: all anchors at the start point, one full
    /// operator evaluation for the snapshot (charges M units).
    pub fn init(problem: &dyn GapProblem, counter: &mut OracleCounter) -> Result<Self, SolverError> {
        let start = problem.start_point();
        let dim = problem.dim();
        let mut f_w = vec![0.0; dim];
        problem.full(&start, &mut f_w);
        counter.charge(problem.components() as u64);
        let w_bar_dual = problem.geometry().grad(&start)?;
        Ok(OmbState {
            x_cur: start.clone(),
            x_prev: start.clone(),
            w: start.clone(),
            f_w,
            w_bar_dual,
            epoch_primal_sum: vec![0.0; dim],
            epoch_dual_sum: vec![0.0; dim],
            epoch_len: 0,
            run_sum: vec![0.0; dim],
            run_len: 0,
            start,
            k: 0,
            s: 0,
        })
    }

    /// Running average over all produced iterates (the reported point);
    /// the start point before any step.
    pub fn run_average(&self) -> Vec<f64> {
        if self.run_len == 0 {
            return self.start.clone();
        }
        let inv = 1.0 / self.run_len as f64;
        self.run_sum.iter().map(|v| v * inv).collect()
    }

    pub fn iterates_produced(&self) -> usize {
        self.run_len
    }

    /// Draw batch(es) for the current state and form the optimistic
    /// variance-reduced estimate. Charges exactly 3b units.
    fn draw_delta(
        &self,
        problem: &dyn GapProblem,
        config: &SolverConfig,
        rng: &mut SplitMix64,
        counter: &mut OracleCounter,
    ) -> Result<DualVector, SolverError> {
        let m = problem.components();
        let b = config.b;
        match (config.shared_batch, problem.block_oracle()) {
            (false, Some(blocks)) => {
                // One batch per half: rows against the y-side difference,
                // columns against the x-side difference.
                let split = blocks.split();
                let dim = problem.dim();
                let (row_scheme, col_scheme) = match config.scheme {
                    SchemeKind::Uniform => (SamplingScheme::Uniform, SamplingScheme::Uniform),
                    SchemeKind::Importance => {
                        let d_y: Vec<f64> = (split..dim)
                            .map(|i| 2.0 * self.x_cur[i] - self.w[i] - self.x_prev[i])
                            .collect();
                        let d_x: Vec<f64> = (0..split)
                            .map(|i| 2.0 * self.x_cur[i] - self.w[i] - self.x_prev[i])
                            .collect();
                        (
                            SamplingScheme::importance_from(&d_y),
                            SamplingScheme::importance_from(&d_x),
                        )
                    }
                };
                let rows = row_scheme.draw(b, m, rng)?;
                let cols = col_scheme.draw(b, m, rng)?;
                let delta = blocks.estimate_delta_blocks(
                    &self.x_cur,
                    &self.x_prev,
                    &self.w,
                    &self.f_w,
                    &rows,
                    &cols,
                    &row_scheme,
                    &col_scheme,
                )?;
                counter.charge(3 * b as u64);
                Ok(delta)
            }
            _ => {
                let scheme = match config.scheme {
                    SchemeKind::Uniform => SamplingScheme::Uniform,
                    SchemeKind::Importance => {
                        let d: Vec<f64> = (0..problem.dim())
                            .map(|i| 2.0 * self.x_cur[i] - self.w[i] - self.x_prev[i])
                            .collect();
                        let weights = problem.shared_importance_weights(&d).ok_or_else(|| {
                            SolverError::Config(
                                "importance sampling with a shared batch needs problem-defined weights"
                                    .into(),
                            )
                        })?;
                        SamplingScheme::Importance { weights }
                    }
                };
                let batch = scheme.draw(b, m, rng)?;
                Ok(estimate_delta(
                    problem as &dyn crate::problems::FiniteSumOperator,
                    &self.x_cur,
                    &self.x_prev,
                    &self.w,
                    &self.f_w,
                    &batch,
                    &scheme,
                    counter,
                )?)
            }
        }
    }

    /// Prox update with a caller-supplied estimate, then the iterate shift
    /// and epoch/run accumulation. Exposed so tests can substitute the exact
    /// expectation for the sampled estimate.
    pub fn apply_delta(
        &mut self,
        problem: &dyn GapProblem,
        config: &SolverConfig,
        delta: &DualVector,
    ) -> Result<(), SolverError> {
        let geom = problem.geometry();
        let x_new = geom.prox_step(
            &self.x_cur,
            &self.w_bar_dual,
            config.gamma,
            config.eta,
            delta,
            CompositeTerm::Zero,
        )?;
        let g_new = geom.grad(&x_new)?;
        std::mem::swap(&mut self.x_prev, &mut self.x_cur);
        self.x_cur = x_new;
        for i in 0..self.x_cur.len() {
            self.epoch_primal_sum[i] += self.x_cur[i];
            self.epoch_dual_sum[i] += g_new[i];
            self.run_sum[i] += self.x_cur[i];
        }
        self.epoch_len += 1;
        self.run_len += 1;
        self.k += 1;
        Ok(())
    }

    /// One inner iteration: sample, estimate, prox, shift. Charges 3b units.
    pub fn inner_step(
        &mut self,
        problem: &dyn GapProblem,
        config: &SolverConfig,
        rng: &mut SplitMix64,
        counter: &mut OracleCounter,
    ) -> Result<(), SolverError> {
        let delta = self.draw_delta(problem, config, rng, counter)?;
        self.apply_delta(problem, config, &delta)
    }

    /// Epoch boundary: snapshot w becomes the primal average of the epoch's
    /// K iterates, the anchor's dual image their dual average, and the full
    /// operator is re-evaluated at w (charges M units). The iterate pair
    /// carries over unchanged.
    pub fn epoch_end(
        &mut self,
        problem: &dyn GapProblem,
        k_expected: usize,
        counter: &mut OracleCounter,
    ) -> Result<(), SolverError> {
        if self.epoch_len != k_expected || self.epoch_len == 0 {
            return Err(SolverError::MidEpoch {
                completed: self.epoch_len,
                expected: k_expected,
            });
        }
        let inv = 1.0 / self.epoch_len as f64;
        for i in 0..self.w.len() {
            self.w[i] = self.epoch_primal_sum[i] * inv;
            self.w_bar_dual.0[i] = self.epoch_dual_sum[i] * inv;
            self.epoch_primal_sum[i] = 0.0;
            self.epoch_dual_sum[i] = 0.0;
        }
        problem.full(&self.w, &mut self.f_w);
        counter.charge(problem.components() as u64);
        self.epoch_len = 0;
        self.s += 1;
        self.k = 0;
        Ok(())
    }
}

/// The optimistic momentum-batching method as a registry strategy.
pub struct OmbMethod {
    params: MethodParams,
}

impl OmbMethod {
    pub fn new(params: MethodParams) -> Self {
        OmbMethod { params }
    }

    /// Resolve the run configuration against a concrete problem: either the
    /// theoretical tuning or an explicit step size.
    pub fn resolve_config(
        &self,
        problem: &dyn GapProblem,
        seed: u64,
    ) -> Result<SolverConfig, SolverError> {
        let m = problem.components();
        let p = &self.params;
        let mut config = match (p.theory, p.eta) {
            (Some(variant), _) => theoretical_params(
                m,
                p.b,
                &problem.lipschitz(),
                variant,
                p.c_const,
                problem.dim() / 2,
                p.epochs,
                p.eta_scale,
            )?,
            (None, Some(eta)) => {
                let k = ((m as f64 / (3.0 * p.b as f64)).round() as usize).max(1);
                SolverConfig {
                    eta,
                    gamma: p.gamma.unwrap_or(1.0 / k as f64),
                    p: p.gamma.unwrap_or(1.0 / k as f64),
                    b: p.b,
                    k_inner: k,
                    epochs: p.epochs,
                    seed,
                    scheme: p.scheme,
                    shared_batch: p.shared_batch,
                }
            }
            (None, None) => {
                return Err(SolverError::Config(
                    "omb needs either a theory variant or an explicit eta".into(),
                ))
            }
        };
        config.seed = seed;
        config.scheme = p.scheme;
        config.shared_batch = p.shared_batch;
        if let Some(gamma) = p.gamma {
            config.gamma = gamma;
            config.p = gamma;
        }
        config.validate(m)?;
        Ok(config)
    }
}

impl Method for OmbMethod {
    fn name(&self) -> &str {
        "omb"
    }

    fn run(&self, problem: &dyn GapProblem, opts: &RunOptions) -> Result<RunRecord, SolverError> {
        if opts.budget == 0 {
            return Err(SolverError::ZeroBudget);
        }
        let config = self.resolve_config(problem, opts.seed)?;
        let mut rng = SplitMix64::new(opts.seed);
        let mut counter = OracleCounter::new();
        let mut recorder = TraceRecorder::new(opts.gap_every, opts.timing);
        let mut state = OmbState::init(problem, &mut counter)?;
        recorder.record_initial(problem, &state.run_average());
        let mut log = if opts.log_iterates { Some(Vec::new()) } else { None };

        let step_cost = 3 * config.b as u64;
        let refresh_cost = problem.components() as u64;
        let mut inner_steps = 0u64;
        'outer: while state.s < config.epochs {
            for _ in 0..config.k_inner {
                if counter.total() + step_cost > opts.budget {
                    break 'outer;
                }
                state.inner_step(problem, &config, &mut rng, &mut counter)?;
                inner_steps += 1;
                if let Some(log) = log.as_mut() {
                    log.push(state.x_cur.clone());
                }
                recorder.tick(problem, counter.total(), &state.run_average());
            }
            if counter.total() + refresh_cost > opts.budget {
                break;
            }
            state.epoch_end(problem, config.k_inner, &mut counter)?;
            recorder.tick(problem, counter.total(), &state.run_average());
        }
        let final_point = state.run_average();
        if inner_steps > 0 || state.s > 0 {
            recorder.finish(problem, counter.total(), &final_point);
        }
        let (trace, gap_meter_units) = recorder.into_parts();
        Ok(RunRecord {
            method: self.name().into(),
            matrix: problem.label(),
            n: problem.dim() / 2,
            b: config.b,
            seed: opts.seed,
            eta: config.eta,
            gamma: config.gamma,
            trace,
            final_point,
            total_calls: counter.total(),
            inner_steps,
            refreshes: state.s as u64,
            gap_meter_units,
            iterate_log: log,
        })
    }
}
