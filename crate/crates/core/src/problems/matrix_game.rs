//! Bilinear matrix games on a product of probability simplices.
//!
//! The game min over x, max over y of <Ax, y> induces the monotone operator
//! F(x, y) = (A^T y, -Ax) over the entropic product geometry. Rewriting A as
//! a sum of rows (or columns) turns F into a finite sum of n components, so
//! the stochastic machinery of this crate applies with M = n.

use super::{
    BlockOracle, FiniteSumOperator, GapProblem, LipschitzInfo, Matrix, ProblemError,
    SamplingScheme,
};
use crate::geometry::{DualVector, MirrorMap};
use crate::rng::SplitMix64;

/// Which finite-sum rewriting indexes the components.
///
/// `Rows` pairs component m with row m on the x-half (scaled by the y
/// coordinate y_m) and column m on the y-half (scaled by x_m); this is the
/// scatter form whose importance weights come from single coordinates of the
/// optimistic difference. `Columns` is the gather form: component m reads the
/// whole opposing vector and writes only coordinate m of each half.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decomposition {
    Rows,
    Columns,
}

/// The operator of the bilinear game: (A^T y, -Ax) for z = (x, y).
pub fn matrix_game_operator(a: &Matrix, z: &[f64]) -> Result<DualVector, ProblemError> {
    let n = a.rows();
    if a.cols() != n || z.len() != 2 * n {
        return Err(ProblemError::DimensionMismatch {
            expected: 2 * n,
            got: z.len(),
        });
    }
    let (x, y) = z.split_at(n);
    let mut out = a.matvec_t(y);
    out.extend(a.matvec(x).into_iter().map(|v| -v));
    Ok(DualVector(out))
}

/// Lipschitz constants for the game operator of `a`.
///
/// `l2` is the spectral norm of A (power iteration, relative tolerance 1e-8);
/// `bar_l2` aggregates the exact spectral norms of the scaled rank-one
/// row/column component blocks; `l_dual` is max |A_ij|, the l1-to-linf
/// operator norm matching the simplex/entropy norm pair.
pub fn lipschitz_estimates(a: &Matrix) -> Result<LipschitzInfo, ProblemError> {
    if !a.is_finite() {
        return Err(ProblemError::NonFinite("matrix entries".into()));
    }
    let n = a.rows();
    let l2 = spectral_norm(a);
    let mut sum_max = 0.0;
    for m in 0..n {
        sum_max += a.row_norm_sq(m).max(a.col_norm_sq(m));
    }
    let bar_l2 = (n as f64 * sum_max).sqrt();
    Ok(LipschitzInfo {
        l2,
        bar_l2,
        l_dual: a.max_abs(),
    })
}

/// Largest singular value by power iteration on A^T A, relative tolerance
/// 1e-8. The start vector comes from a fixed-seed generator so the estimate
/// is reproducible.
fn spectral_norm(a: &Matrix) -> f64 {
    if a.data().iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let mut rng = SplitMix64::new(0x5EED_5150);
    let mut v: Vec<f64> = (0..a.cols()).map(|_| rng.next_f64() + 0.5).collect();
    let norm = |u: &[f64]| u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut sigma_prev = 0.0;
    for _ in 0..50_000 {
        let u = a.matvec(&v);
        let sigma = norm(&u);
        if sigma == 0.0 {
            // v landed in the null space; perturb and continue.
            for x in &mut v {
                *x += rng.next_f64() * 1e-3;
            }
            let nv = norm(&v);
            for x in &mut v {
                *x /= nv;
            }
            continue;
        }
        let w = a.matvec_t(&u);
        let nw = norm(&w);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if (sigma - sigma_prev).abs() <= 1e-8 * sigma {
            return sigma;
        }
        sigma_prev = sigma;
    }
    sigma_prev
}

/// A bilinear matrix game over the entropic product simplex geometry.
pub struct MatrixGame {
    a: Matrix,
    decomposition: Decomposition,
    geometry: MirrorMap,
    lipschitz: LipschitzInfo,
    label: String,
}

impl MatrixGame {
    pub fn new(a: Matrix, decomposition: Decomposition) -> Result<Self, ProblemError> {
        if a.rows() != a.cols() {
            return Err(ProblemError::DimensionMismatch {
                expected: a.rows(),
                got: a.cols(),
            });
        }
        let n = a.rows();
        let lipschitz = lipschitz_estimates(&a)?;
        let geometry = MirrorMap::product(&[
            MirrorMap::entropy_simplex(n),
            MirrorMap::entropy_simplex(n),
        ]);
        Ok(MatrixGame {
            a,
            decomposition,
            geometry,
            lipschitz,
            label: format!("game{n}"),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn decomposition(&self) -> Decomposition {
        self.decomposition
    }

    /// Duality gap at z = (x, y): max_i (Ax)_i - min_j (A^T y)_j, the excess
    /// of the best pure response payoffs over each player's current value.
    /// Zero exactly at saddle points. One evaluation costs a full operator
    /// (M units) on whatever meter the caller keeps.
    pub fn duality_gap(&self, z: &[f64]) -> f64 {
        let n = self.n();
        assert_eq!(z.len(), 2 * n, "gap needs a product point");
        let (x, y) = z.split_at(n);
        let ax = self.a.matvec(x);
        let aty = self.a.matvec_t(y);
        let best_y = ax.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let best_x = aty.iter().cloned().fold(f64::INFINITY, f64::min);
        best_y - best_x
    }
}

impl FiniteSumOperator for MatrixGame {
    fn components(&self) -> usize {
        self.n()
    }

    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn component(&self, m: usize, z: &[f64], out: &mut [f64]) {
        let n = self.n();
        debug_assert!(m < n);
        debug_assert_eq!(z.len(), 2 * n);
        debug_assert_eq!(out.len(), 2 * n);
        let (x, y) = z.split_at(n);
        let scale = n as f64;
        match self.decomposition {
            Decomposition::Rows => {
                // (n y_m A_{m:}, -n x_m A_{:m})
                let ym = scale * y[m];
                for (o, &aij) in out[..n].iter_mut().zip(self.a.row(m)) {
                    *o = ym * aij;
                }
                let xm = scale * x[m];
                for (i, o) in out[n..].iter_mut().enumerate() {
                    *o = -xm * self.a.get(i, m);
                }
            }
            Decomposition::Columns => {
                // (n (A_{:m} . y) e_m, -n (A_{m:} . x) e_m)
                out.fill(0.0);
                out[m] = scale * self.a.col_dot(m, y);
                out[n + m] = -scale
                    * self
                        .a
                        .row(m)
                        .iter()
                        .zip(x)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
            }
        }
    }

    fn full(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n();
        debug_assert_eq!(z.len(), 2 * n);
        let (x, y) = z.split_at(n);
        let aty = self.a.matvec_t(y);
        let ax = self.a.matvec(x);
        out[..n].copy_from_slice(&aty);
        for (o, v) in out[n..].iter_mut().zip(ax) {
            *o = -v;
        }
    }

    fn geometry(&self) -> &MirrorMap {
        &self.geometry
    }

    fn lipschitz(&self) -> LipschitzInfo {
        self.lipschitz
    }
}

impl GapProblem for MatrixGame {
    fn gap(&self, z: &[f64]) -> f64 {
        self.duality_gap(z)
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn block_oracle(&self) -> Option<&dyn BlockOracle> {
        match self.decomposition {
            Decomposition::Rows => Some(self),
            Decomposition::Columns => None,
        }
    }

    fn shared_importance_weights(&self, d: &[f64]) -> Option<Vec<f64>> {
        if self.decomposition != Decomposition::Rows || d.len() != 2 * self.n() {
            return None;
        }
        // Component m touches y_m on the x-half and x_m on the y-half.
        let n = self.n();
        let weights: Vec<f64> = (0..n).map(|m| d[m].abs() + d[n + m].abs()).collect();
        Some(super::importance_distribution(&weights))
    }
}

impl BlockOracle for MatrixGame {
    fn split(&self) -> usize {
        self.n()
    }

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
    ) -> Result<DualVector, ProblemError> {
        if row_batch.is_empty() || col_batch.is_empty() {
            return Err(ProblemError::EmptyBatch);
        }
        if row_batch.len() != col_batch.len() {
            return Err(ProblemError::Unsupported(
                "row and column batches must have equal size".into(),
            ));
        }
        let n = self.n();
        for v in [x_cur, x_prev, w, f_w] {
            if v.len() != 2 * n {
                return Err(ProblemError::DimensionMismatch {
                    expected: 2 * n,
                    got: v.len(),
                });
            }
        }
        let b = row_batch.len() as f64;
        let scale = n as f64;
        let mut delta = f_w.to_vec();
        // x-half: rows of A sampled against the y-side optimistic difference.
        for &i in row_batch {
            if i >= n {
                return Err(ProblemError::BadComponent { index: i, m: n });
            }
            let d_y = 2.0 * x_cur[n + i] - w[n + i] - x_prev[n + i];
            let coef = row_scheme.reweight(i, n)? * scale * d_y / b;
            for (o, &aij) in delta[..n].iter_mut().zip(self.a.row(i)) {
                *o += coef * aij;
            }
        }
        // y-half: columns of A sampled against the x-side difference.
        for &j in col_batch {
            if j >= n {
                return Err(ProblemError::BadComponent { index: j, m: n });
            }
            let d_x = 2.0 * x_cur[j] - w[j] - x_prev[j];
            let coef = col_scheme.reweight(j, n)? * scale * d_x / b;
            for (i, o) in delta[n..].iter_mut().enumerate() {
                *o -= coef * self.a.get(i, j);
            }
        }
        Ok(DualVector(delta))
    }
}
