//! Random ensemble generation (the trial protocol) and the rotation noise
//! channel used by the robustness sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use qsd_core::qstate::{Ensemble, ProductState, QubitDensity};
use qsd_core::Result;

use crate::schema::TrialSpec;

/// Draw one ensemble under the spec's law with an explicit seed (the spec's
/// own seed field names the whole run; trials perturb it). Factors are real
/// pure qubits (cos φ, sin φ), φ ~ U[0, π); with `pure_states` unset each
/// factor is then depolarized, ρ ← (1−p)ρ + p·I/2, p ~ U[lo, hi] per factor.
/// The prior is uniform.
pub fn generate_ensemble(spec: &TrialSpec, seed: u64) -> Result<Ensemble> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let mut factors = Vec::with_capacity(spec.n);
        for _ in 0..spec.n {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            let mut q = QubitDensity::pure(phi);
            if !spec.pure_states {
                let p: f64 = rng.gen_range(spec.noise_range[0]..=spec.noise_range[1]);
                q = q.depolarize(p);
            }
            factors.push(q);
        }
        states.push(ProductState::new(factors));
    }
    Ensemble::new(states, vec![1.0 / spec.m as f64; spec.m])
}

/// Conjugate every factor of every hypothesis by the rotation
/// U(θ) = [[cos θ, sin θ], [−sin θ, cos θ]].
pub fn apply_rotation_noise(ensemble: &Ensemble, theta: f64) -> Result<Ensemble> {
    let (c, s) = (theta.cos(), theta.sin());
    let rotate = |e: [[f64; 2]; 2]| -> [[f64; 2]; 2] {
        // U · E · Uᵀ, written out for the 2×2 real case.
        let row = |a: f64, b: f64| [a * c + b * s, -a * s + b * c];
        let top = row(e[0][0], e[0][1]);
        let bot = row(e[1][0], e[1][1]);
        [
            [c * top[0] + s * bot[0], c * top[1] + s * bot[1]],
            [-s * top[0] + c * bot[0], -s * top[1] + c * bot[1]],
        ]
    };
    let states: Result<Vec<ProductState>> = (0..ensemble.m())
        .map(|j| {
            let factors: Result<Vec<QubitDensity>> = (0..ensemble.n())
                .map(|k| QubitDensity::new(rotate(ensemble.factor(j, k).entries())))
                .collect();
            Ok(ProductState::new(factors?))
        })
        .collect();
    Ensemble::new(states?, ensemble.prior().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::TrialSpec;

    fn pure_spec() -> TrialSpec {
        TrialSpec { m: 3, n: 2, pure_states: true, ..TrialSpec::default() }
    }

    #[test]
    fn pure_flag_gives_rank_one_factors() {
        let e = generate_ensemble(&pure_spec(), 5).unwrap();
        for j in 0..e.m() {
            for k in 0..e.n() {
                let ent = e.factor(j, k).entries();
                let det = ent[0][0] * ent[1][1] - ent[0][1] * ent[1][0];
                assert!(det.abs() < 1e-12, "factor ({j},{k}) has det {det}");
            }
        }
    }

    #[test]
    fn full_depolarization_flattens_every_factor() {
        let spec = TrialSpec {
            pure_states: false,
            noise_range: [1.0, 1.0],
            ..pure_spec()
        };
        let e = generate_ensemble(&spec, 9).unwrap();
        for j in 0..e.m() {
            for k in 0..e.n() {
                let ent = e.factor(j, k).entries();
                assert!((ent[0][0] - 0.5).abs() < 1e-15);
                assert!((ent[1][1] - 0.5).abs() < 1e-15);
                assert!(ent[0][1].abs() < 1e-15);
            }
        }
    }

    #[test]
    fn same_seed_reproduces_byte_identical_json() {
        let spec = TrialSpec { pure_states: false, ..pure_spec() };
        let a = crate::schema::EnsembleFile::from_ensemble(
            &generate_ensemble(&spec, 77).unwrap(),
            serde_json::Value::Null,
        );
        let b = crate::schema::EnsembleFile::from_ensemble(
            &generate_ensemble(&spec, 77).unwrap(),
            serde_json::Value::Null,
        );
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn zero_rotation_is_the_identity() {
        let e = generate_ensemble(&pure_spec(), 3).unwrap();
        let rotated = apply_rotation_noise(&e, 0.0).unwrap();
        for j in 0..e.m() {
            for k in 0..e.n() {
                assert_eq!(rotated.factor(j, k).entries(), e.factor(j, k).entries());
            }
        }
    }

    #[test]
    fn quarter_rotation_swaps_computational_projectors() {
        let e = Ensemble::new(
            vec![
                ProductState::new(vec![QubitDensity::diagonal(1.0)]),
                ProductState::new(vec![QubitDensity::diagonal(0.0)]),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let rotated = apply_rotation_noise(&e, std::f64::consts::FRAC_PI_2).unwrap();
        let ent = rotated.factor(0, 0).entries();
        assert!((ent[0][0]).abs() < 1e-15 && (ent[1][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_preserves_eigenvalues() {
        let spec = TrialSpec { pure_states: false, ..pure_spec() };
        let e = generate_ensemble(&spec, 21).unwrap();
        for &theta in &[0.1, 0.7, 2.9] {
            let rotated = apply_rotation_noise(&e, theta).unwrap();
            for j in 0..e.m() {
                for k in 0..e.n() {
                    let (a, b) = (e.factor(j, k).entries(), rotated.factor(j, k).entries());
                    let eig = |m: [[f64; 2]; 2]| {
                        let tr = m[0][0] + m[1][1];
                        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
                        (tr / 2.0 - disc, tr / 2.0 + disc)
                    };
                    let (l1, l2) = eig(a);
                    let (r1, r2) = eig(b);
                    assert!((l1 - r1).abs() < 1e-12 && (l2 - r2).abs() < 1e-12);
                }
            }
        }
    }
}
