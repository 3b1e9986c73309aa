//! Mutual coupling surrogate.
//!
//! Closely spaced elements do not radiate independently; each element's
//! excitation leaks into its neighbors' effective fields. Full-wave
//! simulation of that interaction is out of scope here, so this module
//! provides a deterministic surrogate with the right qualitative shape: a
//! symmetric Toeplitz matrix with unit diagonal whose off-diagonal magnitude
//! decays geometrically with element index distance, and whose phases are
//! drawn reproducibly from a seed.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Complex M x M coupling matrix applied on the element axis of a field
/// matrix. `strength` 0 produces the identity (no coupling).
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    values: Array2<Complex64>,
    strength: f64,
    seed: u64,
}

/// Build the coupling surrogate: |C[i][j]| = strength^|i - j|, unit diagonal,
/// seeded pseudo-random phases, symmetric in the element indices.
pub fn make_coupling(m: usize, strength: f64, seed: u64) -> Result<CouplingMatrix> {
    if m == 0 {
        return Err(Error::InvalidInput("coupling needs at least one element".into()));
    }
    if !(strength.is_finite() && (0.0..1.0).contains(&strength)) {
        return Err(Error::InvalidInput(format!(
            "coupling strength must lie in [0, 1), got {strength}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One complex value per index offset keeps the matrix Toeplitz.
    let mut offsets = Vec::with_capacity(m);
    offsets.push(Complex64::new(1.0, 0.0));
    for k in 1..m {
        let phase: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        offsets.push(Complex64::from_polar(strength.powi(k as i32), phase));
    }
    let values = Array2::from_shape_fn((m, m), |(i, j)| offsets[i.abs_diff(j)]);
    Ok(CouplingMatrix { values, strength, seed })
}

impl CouplingMatrix {
    #[inline]
    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    #[inline]
    pub fn strength(&self) -> f64 {
        self.strength
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_identity(&self) -> bool {
        self.strength == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_strength_is_identity() {
        let c = make_coupling(4, 0.0, 9).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(c.values()[[i, j]], Complex64::new(expect, 0.0));
            }
        }
        assert!(c.is_identity());
    }

    #[test]
    fn magnitudes_decay_geometrically_with_offset() {
        let c = make_coupling(3, 0.3, 7).unwrap();
        assert_eq!(c.values()[[0, 0]], Complex64::new(1.0, 0.0));
        assert!((c.values()[[0, 1]].norm() - 0.3).abs() < 1e-12);
        assert!((c.values()[[0, 2]].norm() - 0.09).abs() < 1e-12);
        // strict decay along increasing offset
        assert!(c.values()[[0, 1]].norm() > c.values()[[0, 2]].norm());
    }

    #[test]
    fn toeplitz_and_symmetric() {
        let c = make_coupling(5, 0.4, 21).unwrap();
        let v = c.values();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(v[[i, j]], v[[j, i]]);
                if i + 1 < 5 && j + 1 < 5 {
                    assert_eq!(v[[i, j]], v[[i + 1, j + 1]]);
                }
            }
        }
    }

    #[test]
    fn same_seed_reproduces_different_seed_differs() {
        let a = make_coupling(4, 0.25, 11).unwrap();
        let b = make_coupling(4, 0.25, 11).unwrap();
        let c = make_coupling(4, 0.25, 12).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn invalid_strength_rejected() {
        assert!(make_coupling(4, 1.0, 0).is_err());
        assert!(make_coupling(4, -0.1, 0).is_err());
        assert!(make_coupling(4, f64::NAN, 0).is_err());
        assert!(make_coupling(0, 0.5, 0).is_err());
    }
}
