//! Benchmark matrix generators.
//!
//! Both generators are pure functions of their arguments. Randomness comes
//! from SplitMix64 with an inverse-CDF normal transform, so the same
//! (n, seed, theta) triple yields the same matrix on any platform that
//! agrees on libm's exp/ln.

use super::HarnessError;
use crate::problems::Matrix;
use crate::rng::SplitMix64;

/// Police-pursuit payoff matrix: A_ij = |w_i| (1 - exp(-theta |i - j|)) with
/// w_i independent standard normals from the seeded generator. Diagonal
/// entries vanish and row i scales with |w_i|.
pub fn generate_policeman_burglar(n: usize, seed: u64, theta: f64) -> Result<Matrix, HarnessError> {
    if n < 2 {
        return Err(HarnessError::BadPlan(format!(
            "policeman-burglar needs n >= 2, got {n}"
        )));
    }
    if !(theta > 0.0) {
        return Err(HarnessError::BadPlan(format!(
            "policeman-burglar needs theta > 0, got {theta}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.next_standard_normal()).collect();
    Ok(Matrix::from_fn(n, n, |i, j| {
        let dist = (i as f64 - j as f64).abs();
        w[i].abs() * (1.0 - (-theta * dist).exp())
    }))
}

pub const DEFAULT_THETA: f64 = 0.8;

/// Deterministic ramp matrix A_ij = (i + j - 1) / (2n - 1) with 1-based
/// indices: symmetric, increasing toward the bottom-right corner, A_nn = 1.
pub fn generate_ramp_matrix(n: usize) -> Result<Matrix, HarnessError> {
    if n < 2 {
        return Err(HarnessError::BadPlan(format!("ramp needs n >= 2, got {n}")));
    }
    let denom = (2 * n - 1) as f64;
    Ok(Matrix::from_fn(n, n, |i, j| {
        ((i + 1) + (j + 1) - 1) as f64 / denom
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pb_diagonal_is_zero() {
        for n in [2usize, 5, 17] {
            let a = generate_policeman_burglar(n, 1, DEFAULT_THETA).unwrap();
            for i in 0..n {
                assert_eq!(a.get(i, i), 0.0);
            }
        }
    }

    #[test]
    fn pb_entries_nonnegative_and_rows_scale_with_weight() {
        let n = 6;
        let a = generate_policeman_burglar(n, 9, DEFAULT_THETA).unwrap();
        // Recover |w_i| from the same stream and check the row scaling.
        let mut rng = SplitMix64::new(9);
        let w: Vec<f64> = (0..n).map(|_| rng.next_standard_normal().abs()).collect();
        for i in 0..n {
            for j in 0..n {
                let v = a.get(i, j);
                assert!(v >= 0.0);
                if i != j && w[i] > 0.0 {
                    let mask = v / w[i];
                    assert!((0.0..1.0).contains(&mask));
                }
            }
        }
        // doubling |i - j| increases the mask monotonically
        assert!(a.get(0, 2) >= a.get(0, 1));
    }

    #[test]
    fn pb_matches_formula_recomputation() {
        let n = 4;
        let seed = 1234;
        let theta = 0.8;
        let a = generate_policeman_burglar(n, seed, theta).unwrap();
        let mut rng = SplitMix64::new(seed);
        let w: Vec<f64> = (0..n).map(|_| rng.next_standard_normal()).collect();
        for i in 0..n {
            for j in 0..n {
                let expected = w[i].abs() * (1.0 - (-theta * (i as f64 - j as f64).abs()).exp());
                assert_eq!(a.get(i, j).to_bits(), expected.to_bits());
            }
        }
    }

    #[test]
    fn pb_is_deterministic() {
        let a = generate_policeman_burglar(50, 7, DEFAULT_THETA).unwrap();
        let b = generate_policeman_burglar(50, 7, DEFAULT_THETA).unwrap();
        assert_eq!(a, b);
        let c = generate_policeman_burglar(50, 8, DEFAULT_THETA).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pb_rejects_bad_arguments() {
        assert!(generate_policeman_burglar(1, 0, 0.8).is_err());
        assert!(generate_policeman_burglar(4, 0, 0.0).is_err());
        assert!(generate_policeman_burglar(4, 0, -1.0).is_err());
    }

    #[test]
    fn ramp_hand_values() {
        let a = generate_ramp_matrix(2).unwrap();
        assert!((a.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.get(1, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.get(1, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ramp_extremes_and_symmetry() {
        let n = 7;
        let a = generate_ramp_matrix(n).unwrap();
        let min = a.data().iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(min, a.get(0, 0));
        assert_eq!(a.get(n - 1, n - 1), 1.0);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(a.get(i, j), a.get(j, i));
            }
        }
        assert!(generate_ramp_matrix(1).is_err());
    }
}
