//! The quantized action space: Q evenly-spaced binary projective qubit
//! measurements, crossed with the choice of subsystem.
//!
//! Member ℓ (1-based, ℓ = 1..Q) measures along angle θ_ℓ = ℓπ/(2Q): its first
//! effect projects onto (sin θ_ℓ, cos θ_ℓ), the second onto the orthogonal
//! direction. In code the POVMs are stored 0-based, so `povms()[i]` carries
//! label ℓ = i+1; ℓ starts at 1 because ℓ = 0 would duplicate ℓ = Q with the
//! effects swapped.

use crate::error::{Error, Result};
use crate::mat::SquareMat;
use crate::qstate::Povm;

#[derive(Clone, Debug)]
pub struct QuantizedPovmSet {
    resolution: usize,
    povms: Vec<Povm>,
}

impl QuantizedPovmSet {
    pub fn new(resolution: usize) -> Self {
        assert!(resolution >= 1, "quantization must be positive");
        let povms = (1..=resolution)
            .map(|l| binary_projective(l as f64 * std::f64::consts::FRAC_PI_2 / resolution as f64))
            .collect();
        QuantizedPovmSet { resolution, povms }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    /// Measurement angle of the 0-based member index.
    pub fn angle(&self, index: usize) -> f64 {
        (index + 1) as f64 * std::f64::consts::FRAC_PI_2 / self.resolution as f64
    }
}

/// Binary projective measurement at angle θ: effects project onto
/// (sin θ, cos θ) and (cos θ, −sin θ).
pub fn binary_projective(theta: f64) -> Povm {
    let (s, c) = theta.sin_cos();
    let first = SquareMat::two_by_two(s * s, s * c, s * c, c * c);
    let second = SquareMat::two_by_two(c * c, -s * c, -s * c, s * s);
    Povm::new(vec![first, second]).expect("projective pair is a valid POVM")
}

/// The computational-basis measurement {diag(1,0), diag(0,1)}.
pub fn computational_povm() -> Povm {
    Povm::new(vec![
        SquareMat::two_by_two(1.0, 0.0, 0.0, 0.0),
        SquareMat::two_by_two(0.0, 0.0, 0.0, 1.0),
    ])
    .expect("computational basis is a valid POVM")
}

/// One agent action: measure `subsystem` with quantized member `povm_idx`
/// (both 0-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Action {
    pub povm_idx: usize,
    pub subsystem: usize,
}

impl Action {
    /// Flat id, subsystem-major: id = subsystem·Q + povm_idx.
    pub fn encode(&self, q: usize) -> usize {
        self.subsystem * q + self.povm_idx
    }
}

/// Inverse of the flat encoding.
pub fn decode_action(id: usize, q: usize, n: usize) -> Result<Action> {
    if id >= n * q {
        return Err(Error::Index { index: id, limit: n * q });
    }
    Ok(Action { povm_idx: id % q, subsystem: id / q })
}

/// The POVM family plus the n·Q flat action list, subsystem-major.
pub fn build_action_set(q: usize, n: usize) -> (QuantizedPovmSet, Vec<Action>) {
    assert!(n >= 1);
    let set = QuantizedPovmSet::new(q);
    let actions =
        (0..n * q).map(|id| decode_action(id, q, n).expect("id in range")).collect();
    (set, actions)
}

pub const DEFAULT_QUANTIZATION: usize = 20;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_member_is_computational() {
        let set = QuantizedPovmSet::new(20);
        let last = &set.povms()[19]; // ℓ = Q → angle π/2
        let e = last.effects();
        assert!((e[0].get(0, 0) - 1.0).abs() < 1e-12);
        assert!(e[0].get(0, 1).abs() < 1e-12);
        assert!((e[1].get(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q2_first_member() {
        // ℓ=1 of Q=2 → angle π/4.
        let set = QuantizedPovmSet::new(2);
        let e = set.povms()[0].effects();
        for (i, j, want) in [(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)] {
            assert!((e[0].get(i, j) - want).abs() < 1e-15);
        }
        for (i, j, want) in [(0, 0, 0.5), (0, 1, -0.5), (1, 0, -0.5), (1, 1, 0.5)] {
            assert!((e[1].get(i, j) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn effects_match_angle_formula() {
        let set = QuantizedPovmSet::new(7);
        for (i, povm) in set.povms().iter().enumerate() {
            let th = set.angle(i);
            let (s, c) = th.sin_cos();
            let first = povm.effects()[0].clone();
            assert!((first.get(0, 0) - s * s).abs() < 1e-12);
            assert!((first.get(0, 1) - s * c).abs() < 1e-12);
            assert!((first.get(1, 1) - c * c).abs() < 1e-12);
            // Completeness by construction.
            let sum = povm.effects()[0].add(&povm.effects()[1]);
            assert!(sum.sub(&SquareMat::identity(2)).max_abs_entry() < 1e-15);
        }
    }

    #[test]
    fn effects_are_projective() {
        let set = QuantizedPovmSet::new(13);
        for povm in set.povms() {
            for e in povm.effects() {
                let (vals, _) = e.sym_eig();
                assert!(vals[0].abs() < 1e-12);
                assert!((vals[1] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn angular_gap_is_uniform() {
        let q = 20;
        let set = QuantizedPovmSet::new(q);
        let step = std::f64::consts::FRAC_PI_2 / q as f64;
        for i in 1..q {
            let gap = set.angle(i) - set.angle(i - 1);
            assert!((gap - step).abs() <= 8.0 * f64::EPSILON);
        }
    }

    #[test]
    fn decode_examples() {
        let a = decode_action(0, 20, 3).unwrap();
        assert_eq!((a.povm_idx, a.subsystem), (0, 0)); // ℓ=1, k=1
        let b = decode_action(20, 20, 3).unwrap();
        assert_eq!((b.povm_idx, b.subsystem), (0, 1)); // ℓ=1, k=2
        assert!(decode_action(60, 20, 3).is_err());
    }

    #[test]
    fn encode_decode_roundtrip() {
        let (_, actions) = build_action_set(20, 3);
        assert_eq!(actions.len(), 60);
        for (id, a) in actions.iter().enumerate() {
            assert_eq!(a.encode(20), id);
            let back = decode_action(id, 20, 3).unwrap();
            assert_eq!(*a, back);
        }
    }
}
