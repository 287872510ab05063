//! Finite-sum variational inequality problems and stochastic oracles.
//!
//! A problem exposes the operator F = (1/M) sum of components F_m over a
//! mirror-map geometry, plus Lipschitz metadata. The estimator in
//! [`estimate_delta`] is the variance-reduced optimistic combination built
//! from three component evaluations per sampled index, anchored at a snapshot
//! with a cached full operator value.

pub mod matrix;
pub mod matrix_game;

pub use matrix::Matrix;
pub use matrix_game::{lipschitz_estimates, matrix_game_operator, Decomposition, MatrixGame};

use crate::geometry::{DualVector, MirrorMap};
use crate::rng::SplitMix64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("sampled index {index} has zero probability weight")]
    ZeroWeight { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("component index {index} out of range (M = {m})")]
    BadComponent { index: usize, m: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{0} is not supported by this problem")]
    Unsupported(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad matrix file {path}: {reason}")]
    Format { path: String, reason: String },
}

/// Lipschitz constants of the operator family.
///
/// `l2` bounds the full operator in the Euclidean norm, `bar_l2` is the
/// root-mean-square of the per-component Euclidean constants, and `l_dual`
/// bounds the full operator in the primal/dual norm pair of the geometry.
/// Always `l_dual <= bar_l2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzInfo {
    pub l2: f64,
    pub bar_l2: f64,
    pub l_dual: f64,
}

/// Finite-sum operator F(z) = (1/M) sum_m F_m(z) with component access.
pub trait FiniteSumOperator: Sync {
    /// Number of components M.
    fn components(&self) -> usize;
    /// Ambient (product) dimension of points and operator values.
    fn dim(&self) -> usize;
    /// Evaluate component F_m into `out`. Costs one oracle unit.
    fn component(&self, m: usize, z: &[f64], out: &mut [f64]);
    /// Evaluate the full operator into `out`. Costs M oracle units.
    fn full(&self, z: &[f64], out: &mut [f64]);
    fn geometry(&self) -> &MirrorMap;
    fn lipschitz(&self) -> LipschitzInfo;
}

/// A problem the benchmark loop can drive: finite-sum oracle plus a duality
/// gap and a canonical start point.
pub trait GapProblem: FiniteSumOperator {
    /// Duality gap at z; zero exactly at solutions. Evaluating it costs one
    /// full operator (M units), metered separately from solver accounting.
    fn gap(&self, z: &[f64]) -> f64;

    fn start_point(&self) -> Vec<f64> {
        self.geometry().center()
    }

    /// Short label for records and CSV output.
    fn label(&self) -> String {
        "problem".into()
    }

    /// Two-block structure for samplers that draw one batch per block.
    fn block_oracle(&self) -> Option<&dyn BlockOracle> {
        None
    }

    /// Importance weights over component indices for a shared batch, derived
    /// from the optimistic difference vector d. None when the problem defines
    /// no such weighting.
    fn shared_importance_weights(&self, _d: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Saddle problems whose components split into an x-half driven by one index
/// family and a y-half driven by another, each estimated from its own batch.
pub trait BlockOracle {
    /// Length of the x-block; the y-block is the rest.
    fn split(&self) -> usize;

    /// Variance-reduced optimistic estimate with independent row/column
    /// batches. Pure: oracle accounting is the caller's job (3b units for
    /// b index pairs).
    #[allow(clippy::too_many_arguments)]
    fn estimate_delta_blocks(
        &self,
        x_cur: &[f64],
        x_prev: &[f64],
        w: &[f64],
        f_w: &[f64],
        row_batch: &[usize],
        col_batch: &[usize],
        row_scheme: &SamplingScheme,
        col_scheme: &SamplingScheme,
    ) -> Result<DualVector, ProblemError>;
}

/// How batch indices are drawn: uniform, or importance-weighted with
/// probabilities proportional to supplied weights.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplingScheme {
    Uniform,
    Importance { weights: Vec<f64> },
}

impl SamplingScheme {
    /// Importance scheme with r_i = |d_i| / ||d||_1 (uniform fallback at d = 0).
    pub fn importance_from(d: &[f64]) -> SamplingScheme {
        SamplingScheme::Importance {
            weights: importance_distribution(d),
        }
    }

    /// Draw a batch of size b with replacement from {0..m}.
    pub fn draw(
        &self,
        b: usize,
        m: usize,
        rng: &mut SplitMix64,
    ) -> Result<Vec<usize>, ProblemError> {
        if b == 0 {
            return Err(ProblemError::EmptyBatch);
        }
        match self {
            SamplingScheme::Uniform => Ok((0..b).map(|_| rng.next_index(m)).collect()),
            SamplingScheme::Importance { weights } => {
                if weights.len() != m {
                    return Err(ProblemError::DimensionMismatch {
                        expected: m,
                        got: weights.len(),
                    });
                }
                let total: f64 = weights.iter().sum();
                let mut batch = Vec::with_capacity(b);
                for _ in 0..b {
                    let target = rng.next_f64() * total;
                    let mut cum = 0.0;
                    let mut chosen = None;
                    for (i, &w) in weights.iter().enumerate() {
                        cum += w;
                        if cum > target {
                            chosen = Some(i);
                            break;
                        }
                    }
                    // Guard against cumulative rounding: last positive weight.
                    let idx = chosen.unwrap_or_else(|| {
                        weights.iter().rposition(|&w| w > 0.0).unwrap_or(m - 1)
                    });
                    batch.push(idx);
                }
                Ok(batch)
            }
        }
    }

    /// Unbiasedness reweight for a sampled index: 1 under uniform sampling,
    /// 1/(M r_j) under importance sampling.
    pub fn reweight(&self, j: usize, m: usize) -> Result<f64, ProblemError> {
        match self {
            SamplingScheme::Uniform => Ok(1.0),
            SamplingScheme::Importance { weights } => {
                let r = *weights.get(j).ok_or(ProblemError::BadComponent {
                    index: j,
                    m: weights.len(),
                })?;
                if r <= 0.0 {
                    return Err(ProblemError::ZeroWeight { index: j });
                }
                Ok(1.0 / (m as f64 * r))
            }
        }
    }
}

/// Probability vector proportional to |d_i|; uniform when d = 0.
pub fn importance_distribution(d: &[f64]) -> Vec<f64> {
    let l1: f64 = d.iter().map(|v| v.abs()).sum();
    if l1 == 0.0 {
        return vec![1.0 / d.len() as f64; d.len()];
    }
    d.iter().map(|v| v.abs() / l1).collect()
}

/// Oracle-call meter, in component-evaluation units: one component = 1 unit,
/// one full operator = M units. Totals never decrease.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleCounter {
    units: u64,
}

impl OracleCounter {
    pub fn new() -> Self {
        OracleCounter { units: 0 }
    }

    pub fn charge(&mut self, units: u64) {
        self.units += units;
    }

    pub fn total(&self) -> u64 {
        self.units
    }
}

/// Variance-reduced optimistic estimate over one batch:
///
/// delta = (1/b) sum_{j in batch} w_j (F_j(x_cur) - F_j(w)
///         + (F_j(x_cur) - F_j(x_prev))) + F(w)
///
/// with w_j the scheme's reweight. In expectation over the batch this equals
/// 2 F(x_cur) - F(x_prev). `f_w` must be the cached full operator value at the
/// snapshot `w`. Charges exactly 3b units (three component evaluations per
/// sampled index).
#[allow(clippy::too_many_arguments)]
pub fn estimate_delta(
    problem: &dyn FiniteSumOperator,
    x_cur: &[f64],
    x_prev: &[f64],
    w: &[f64],
    f_w: &[f64],
    batch: &[usize],
    scheme: &SamplingScheme,
    counter: &mut OracleCounter,
) -> Result<DualVector, ProblemError> {
    if batch.is_empty() {
        return Err(ProblemError::EmptyBatch);
    }
    let dim = problem.dim();
    for v in [x_cur, x_prev, w, f_w] {
        if v.len() != dim {
            return Err(ProblemError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let m = problem.components();
    let b = batch.len() as f64;
    let mut delta = f_w.to_vec();
    let mut at_cur = vec![0.0; dim];
    let mut at_w = vec![0.0; dim];
    let mut at_prev = vec![0.0; dim];
    for &j in batch {
        if j >= m {
            return Err(ProblemError::BadComponent { index: j, m });
        }
        let weight = scheme.reweight(j, m)?;
        problem.component(j, x_cur, &mut at_cur);
        problem.component(j, w, &mut at_w);
        problem.component(j, x_prev, &mut at_prev);
        let scale = weight / b;
        for i in 0..dim {
            delta[i] += scale * (2.0 * at_cur[i] - at_w[i] - at_prev[i]);
        }
    }
    counter.charge(3 * batch.len() as u64);
    Ok(DualVector(delta))
}


#[cfg(test)]
mod tests {
    use super::test_problems::TwoComponentAffine;
    use super::*;

    #[test]
    fn importance_distribution_examples() {
        assert_eq!(importance_distribution(&[1.0, -1.0]), vec![0.5, 0.5]);
        let u = importance_distribution(&[0.0, 0.0, 0.0]);
        for v in u {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(importance_distribution(&[3.0, -1.0, 0.0]), vec![0.75, 0.25, 0.0]);
    }

    #[test]
    fn importance_is_probability_vector() {
        let mut rng = SplitMix64::new(2);
        for _ in 0..100 {
            let d: Vec<f64> = (0..7).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            let r = importance_distribution(&d);
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn importance_never_samples_zero_weight() {
        let mut rng = SplitMix64::new(3);
        let scheme = SamplingScheme::importance_from(&[3.0, 0.0, -1.0]);
        for _ in 0..200 {
            let batch = scheme.draw(4, 3, &mut rng).unwrap();
            assert!(batch.iter().all(|&j| j != 1));
        }
    }

    #[test]
    fn reweight_uniform_and_importance() {
        let u = SamplingScheme::Uniform;
        assert_eq!(u.reweight(0, 5).unwrap(), 1.0);
        let s = SamplingScheme::importance_from(&[3.0, -1.0]);
        // r = (0.75, 0.25), M = 2: reweights 1/(2*0.75), 1/(2*0.25)
        assert!((s.reweight(0, 2).unwrap() - 1.0 / 1.5).abs() < 1e-15);
        assert!((s.reweight(1, 2).unwrap() - 2.0).abs() < 1e-15);
        let z = SamplingScheme::importance_from(&[1.0, 0.0]);
        assert!(matches!(z.reweight(1, 2), Err(ProblemError::ZeroWeight { index: 1 })));
    }

    #[test]
    fn estimate_delta_collapses_at_snapshot() {
        // x_cur = x_prev = w makes every correction term vanish.
        let p = TwoComponentAffine::new();
        let z = vec![0.3, -0.7];
        let mut f_w = vec![0.0; 2];
        p.full(&z, &mut f_w);
        let mut counter = OracleCounter::new();
        for batch in [vec![0], vec![1], vec![0, 1, 1]] {
            let d = estimate_delta(
                &p,
                &z,
                &z,
                &z,
                &f_w,
                &batch,
                &SamplingScheme::Uniform,
                &mut counter,
            )
            .unwrap();
            for (a, b) in d.iter().zip(&f_w) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert_eq!(counter.total(), 3 * (1 + 1 + 3));
    }

    #[test]
    fn estimate_delta_enumerated_batches_are_unbiased() {
        // Averaging over all M^b ordered batches reproduces 2F(cur) - F(prev).
        let p = TwoComponentAffine::new();
        let x_cur = vec![0.2, 0.9];
        let x_prev = vec![-0.4, 0.1];
        let w = vec![1.0, -1.0];
        let mut f_w = vec![0.0; 2];
        p.full(&w, &mut f_w);
        let mut acc = vec![0.0; 2];
        let mut counter = OracleCounter::new();
        let batches = [[0, 0], [0, 1], [1, 0], [1, 1]];
        for batch in &batches {
            let d = estimate_delta(
                &p,
                &x_cur,
                &x_prev,
                &w,
                &f_w,
                batch,
                &SamplingScheme::Uniform,
                &mut counter,
            )
            .unwrap();
            for (a, v) in acc.iter_mut().zip(d.iter()) {
                *a += v / batches.len() as f64;
            }
        }
        let mut f_cur = vec![0.0; 2];
        let mut f_prev = vec![0.0; 2];
        p.full(&x_cur, &mut f_cur);
        p.full(&x_prev, &mut f_prev);
        for i in 0..2 {
            let expected = 2.0 * f_cur[i] - f_prev[i];
            assert!((acc[i] - expected).abs() < 1e-12, "coord {i}");
        }
        assert_eq!(counter.total(), 4 * 3 * 2);
    }

    #[test]
    fn estimate_delta_monte_carlo_mean() {
        let p = TwoComponentAffine::new();
        let x_cur = vec![0.5, 0.25];
        let x_prev = vec![0.1, -0.3];
        let w = vec![-0.2, 0.6];
        let mut f_w = vec![0.0; 2];
        p.full(&w, &mut f_w);
        let mut rng = SplitMix64::new(77);
        let scheme = SamplingScheme::Uniform;
        let n = 10_000;
        let mut sums = vec![0.0; 2];
        let mut sumsq = vec![0.0; 2];
        let mut counter = OracleCounter::new();
        for _ in 0..n {
            let batch = scheme.draw(1, 2, &mut rng).unwrap();
            let d = estimate_delta(
                &p, &x_cur, &x_prev, &w, &f_w, &batch, &scheme, &mut counter,
            )
            .unwrap();
            for i in 0..2 {
                sums[i] += d[i];
                sumsq[i] += d[i] * d[i];
            }
        }
        let mut f_cur = vec![0.0; 2];
        let mut f_prev = vec![0.0; 2];
        p.full(&x_cur, &mut f_cur);
        p.full(&x_prev, &mut f_prev);
        for i in 0..2 {
            let mean = sums[i] / n as f64;
            let var = (sumsq[i] / n as f64 - mean * mean).max(0.0);
            let se = (var / n as f64).sqrt();
            let expected = 2.0 * f_cur[i] - f_prev[i];
            assert!(
                (mean - expected).abs() <= 3.0 * se + 1e-12,
                "coord {i}: mean {mean} vs {expected} (se {se})"
            );
        }
    }

    #[test]
    fn estimate_delta_rejects_empty_batch() {
        let p = TwoComponentAffine::new();
        let z = vec![0.0, 0.0];
        let mut counter = OracleCounter::new();
        assert!(matches!(
            estimate_delta(&p, &z, &z, &z, &z, &[], &SamplingScheme::Uniform, &mut counter),
            Err(ProblemError::EmptyBatch)
        ));
    }

    #[test]
    fn finite_sum_consistency_of_test_problem() {
        let p = TwoComponentAffine::new();
        let mut rng = SplitMix64::new(9);
        for _ in 0..50 {
            let z: Vec<f64> = (0..2).map(|_| rng.next_f64() * 4.0 - 2.0).collect();
            let mut full = vec![0.0; 2];
            p.full(&z, &mut full);
            let mut avg = vec![0.0; 2];
            let mut out = vec![0.0; 2];
            for m in 0..2 {
                p.component(m, &z, &mut out);
                for i in 0..2 {
                    avg[i] += out[i] / 2.0;
                }
            }
            for i in 0..2 {
                assert!((full[i] - avg[i]).abs() < 1e-10);
            }
        }
    }
}
