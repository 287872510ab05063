//! Mirror maps and Bregman geometry.
//!
//! A [`MirrorMap`] is a distance-generating function h together with its
//! domain: half squared Euclidean norm on full space, or negative entropy on
//! the probability simplex (generating the KL divergence). Saddle-point
//! problems use a product of per-block maps; every operation here works
//! blockwise, so a product map behaves exactly like its factors side by side.
//!
//! All functions are pure; values can be shared freely across threads.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported prox combination: {0}")]
    UnsupportedProx(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    HalfSquaredEuclidean,
    NegativeEntropy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    FullSpace,
    Simplex,
}

/// A vector living in the dual (gradient) space of a mirror map.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVector(pub Vec<f64>);

impl DualVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for DualVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Composite term g in the prox objective. Only g = 0 ships (the simplex
/// constraint is folded into the map's domain); any future variant must admit
/// a closed-form or iterative argmin of the prox objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CompositeTerm {
    #[default]
    Zero,
}

#[derive(Clone, Copy, Debug)]
struct Block {
    kind: MapKind,
    domain: DomainKind,
    dim: usize,
}

/// Distance-generating function with domain, possibly a product over blocks.
#[derive(Clone, Debug)]
pub struct MirrorMap {
    blocks: Vec<Block>,
    dim: usize,
}

impl MirrorMap {
    /// h = (1/2)||x||_2^2 on all of R^n.
    pub fn euclidean(dim: usize) -> Self {
        Self::single(MapKind::HalfSquaredEuclidean, DomainKind::FullSpace, dim)
    }

    /// h = (1/2)||x||_2^2 restricted to the simplex.
    pub fn euclidean_on_simplex(dim: usize) -> Self {
        Self::single(MapKind::HalfSquaredEuclidean, DomainKind::Simplex, dim)
    }

    /// Negative entropy h = sum x_i log x_i on the simplex; V is the
    /// KL divergence. Entropy pairs only with the simplex domain.
    pub fn entropy_simplex(dim: usize) -> Self {
        Self::single(MapKind::NegativeEntropy, DomainKind::Simplex, dim)
    }

    fn single(kind: MapKind, domain: DomainKind, dim: usize) -> Self {
        assert!(dim > 0, "mirror map dimension must be positive");
        if kind == MapKind::NegativeEntropy {
            assert_eq!(
                domain,
                DomainKind::Simplex,
                "negative entropy pairs only with the simplex domain"
            );
        }
        MirrorMap {
            blocks: vec![Block { kind, domain, dim }],
            dim,
        }
    }

    /// Product geometry: h(z) = sum of the factors' h on consecutive slices.
    pub fn product(factors: &[MirrorMap]) -> Self {
        assert!(!factors.is_empty());
        let mut blocks = Vec::new();
        for f in factors {
            blocks.extend_from_slice(&f.blocks);
        }
        let dim = blocks.iter().map(|b| b.dim).sum();
        MirrorMap { blocks, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Map kind of a single-block map.
    pub fn kind(&self) -> MapKind {
        assert_eq!(self.blocks.len(), 1, "kind() requires a single-block map");
        self.blocks[0].kind
    }

    pub fn domain(&self) -> DomainKind {
        assert_eq!(self.blocks.len(), 1, "domain() requires a single-block map");
        self.blocks[0].domain
    }

    /// Canonical interior start point: uniform on simplex blocks, the origin
    /// on full-space blocks.
    pub fn center(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            match b.domain {
                DomainKind::Simplex => x.extend(std::iter::repeat(1.0 / b.dim as f64).take(b.dim)),
                DomainKind::FullSpace => x.extend(std::iter::repeat(0.0).take(b.dim)),
            }
        }
        x
    }

    fn check_dim(&self, v: &[f64]) -> Result<(), GeometryError> {
        if v.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// True when every simplex block of x is strictly positive.
    pub fn is_interior(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        let mut off = 0;
        for b in &self.blocks {
            let xs = &x[off..off + b.dim];
            if b.domain == DomainKind::Simplex && xs.iter().any(|&v| v <= 0.0) {
                return false;
            }
            off += b.dim;
        }
        true
    }

    /// Bregman distance V(x, y) = h(x) - h(y) - <grad h(y), x - y>.
    ///
    /// Euclidean blocks give (1/2)||x-y||_2^2; entropy blocks give
    /// sum x_i log(x_i / y_i) with 0 log 0 := 0. The second argument must be
    /// interior for entropy blocks.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64, GeometryError> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let mut total = 0.0;
        let mut off = 0;
        for b in &self.blocks {
            let xs = &x[off..off + b.dim];
            let ys = &y[off..off + b.dim];
            match b.kind {
                MapKind::HalfSquaredEuclidean => {
                    total += xs
                        .iter()
                        .zip(ys)
                        .map(|(a, c)| (a - c) * (a - c))
                        .sum::<f64>()
                        * 0.5;
                }
                MapKind::NegativeEntropy => {
                    for (&xi, &yi) in xs.iter().zip(ys) {
                        if yi <= 0.0 {
                            return Err(GeometryError::Domain(
                                "entropy Bregman distance needs an interior second argument"
                                    .into(),
                            ));
                        }
                        if xi < 0.0 {
                            return Err(GeometryError::Domain(
                                "negative coordinate in first argument".into(),
                            ));
                        }
                        if xi > 0.0 {
                            total += xi * (xi / yi).ln();
                        }
                    }
                }
            }
            off += b.dim;
        }
        Ok(total)
    }

    /// grad h: identity for Euclidean blocks, 1 + log x_i for entropy blocks.
    pub fn grad(&self, x: &[f64]) -> Result<DualVector, GeometryError> {
        self.check_dim(x)?;
        let mut g = Vec::with_capacity(self.dim);
        let mut off = 0;
        for b in &self.blocks {
            let xs = &x[off..off + b.dim];
            match b.kind {
                MapKind::HalfSquaredEuclidean => g.extend_from_slice(xs),
                MapKind::NegativeEntropy => {
                    for &xi in xs {
                        if xi <= 0.0 {
                            return Err(GeometryError::Domain(
                                "entropy gradient needs strictly positive coordinates".into(),
                            ));
                        }
                        g.push(1.0 + xi.ln());
                    }
                }
            }
            off += b.dim;
        }
        Ok(DualVector(g))
    }

    /// Inverse of grad h, i.e. argmin of h(x) - <theta, x> over the domain.
    ///
    /// Euclidean blocks: identity. Entropy blocks: the simplex point
    /// proportional to exp(theta_i), computed with max subtraction so the
    /// result is invariant to adding a constant to every entry of theta
    /// (the gauge freedom of the simplex-restricted inverse).
    pub fn grad_inverse(&self, theta: &[f64]) -> Result<Vec<f64>, GeometryError> {
        self.check_dim(theta)?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::Domain("non-finite dual vector".into()));
        }
        let mut x = Vec::with_capacity(self.dim);
        let mut off = 0;
        for b in &self.blocks {
            let ts = &theta[off..off + b.dim];
            match b.kind {
                MapKind::HalfSquaredEuclidean => x.extend_from_slice(ts),
                MapKind::NegativeEntropy => {
                    let m = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let start = x.len();
                    let mut sum = 0.0;
                    for &t in ts {
                        let e = (t - m).exp();
                        sum += e;
                        x.push(e);
                    }
                    for v in &mut x[start..] {
                        *v /= sum;
                    }
                }
            }
            off += b.dim;
        }
        Ok(x)
    }

    /// One composite Bregman prox step:
    ///
    /// argmin_x { g(x) + (1-gamma)/eta V(x, x0) + gamma/eta V(x, wbar)
    ///            + <delta, x> }
    ///
    /// where wbar is given through its dual image `w_bar_dual` = grad h(wbar).
    /// The minimizer satisfies grad h(x+) = (1-gamma) grad h(x0)
    /// + gamma w_bar_dual - eta delta up to the domain's gauge, so the step is
    /// grad_inverse of that combination. On the simplex the output sums to one
    /// with strictly positive entries; gamma = 0 and delta = 0 returns x0.
    pub fn prox_step(
        &self,
        x0: &[f64],
        w_bar_dual: &DualVector,
        gamma: f64,
        eta: f64,
        delta: &DualVector,
        g: CompositeTerm,
    ) -> Result<Vec<f64>, GeometryError> {
        if eta <= 0.0 || !eta.is_finite() {
            return Err(GeometryError::InvalidParameter(format!(
                "eta must be positive, got {eta}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(GeometryError::InvalidParameter(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        self.check_dim(w_bar_dual)?;
        self.check_dim(delta)?;
        let CompositeTerm::Zero = g;
        for b in &self.blocks {
            let supported = matches!(
                (b.kind, b.domain),
                (MapKind::NegativeEntropy, DomainKind::Simplex)
                    | (MapKind::HalfSquaredEuclidean, DomainKind::FullSpace)
            );
            if !supported {
                return Err(GeometryError::UnsupportedProx(format!(
                    "no closed form for {:?} on {:?} with g = 0",
                    b.kind, b.domain
                )));
            }
        }
        let gx = self.grad(x0)?;
        let theta: Vec<f64> = gx
            .iter()
            .zip(w_bar_dual.iter())
            .zip(delta.iter())
            .map(|((&g0, &wb), &d)| (1.0 - gamma) * g0 + gamma * wb - eta * d)
            .collect();
        self.grad_inverse(&theta)
    }

    /// Average of grad h over a non-empty list of interior points
    /// (the dual-space average defining the auxiliary snapshot).
    pub fn dual_average(&self, points: &[Vec<f64>]) -> Result<DualVector, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::InvalidParameter(
                "dual_average needs a non-empty list".into(),
            ));
        }
        let mut acc = vec![0.0; self.dim];
        for p in points {
            let g = self.grad(p)?;
            for (a, v) in acc.iter_mut().zip(g.iter()) {
                *a += v;
            }
        }
        let inv = 1.0 / points.len() as f64;
        for a in &mut acc {
            *a *= inv;
        }
        Ok(DualVector(acc))
    }

    /// Squared reference norm: l2 for Euclidean blocks, l1 for entropy
    /// blocks, summed over blocks. h is 1-strongly convex in this norm.
    pub fn ref_norm_sq(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim);
        let mut total = 0.0;
        let mut off = 0;
        for b in &self.blocks {
            let vs = &v[off..off + b.dim];
            let n = match b.kind {
                MapKind::HalfSquaredEuclidean => vs.iter().map(|x| x * x).sum::<f64>().sqrt(),
                MapKind::NegativeEntropy => vs.iter().map(|x| x.abs()).sum::<f64>(),
            };
            total += n * n;
            off += b.dim;
        }
        total
    }
}
