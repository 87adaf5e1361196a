//! Rotation-noise robustness sweep: evaluate a fixed adaptive policy on
//! rotated copies of its ensemble and check the √2·n·|θ| stability bound.

use serde::{Deserialize, Serialize};

use qsd_core::local::{evaluate_policy, AdaptivePolicy};
use qsd_core::qstate::Ensemble;
use qsd_core::{Error, Result};

use crate::generate::apply_rotation_noise;

/// Default rotation angles: three decades from well inside the linear regime
/// up to where the bound starts to bite.
pub const DEFAULT_THETA_GRID: [f64; 6] = [0.001, 0.005, 0.01, 0.05, 0.075, 0.1];

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseRecord {
    pub theta: f64,
    pub p_original: f64,
    pub p_perturbed: f64,
    pub diff: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseSweepResult {
    pub n: usize,
    pub records: Vec<NoiseRecord>,
}

/// Evaluate `policy` (built for `ensemble`) on each rotated ensemble.
/// diff(θ) = P_succ(original) − P_succ(rotated); every record must satisfy
/// |diff| ≤ √2·n·|θ|, which holds for any fixed adaptive protocol — a
/// violation is reported as an error, not clamped.
pub fn noise_sweep(
    ensemble: &Ensemble,
    policy: &AdaptivePolicy,
    thetas: &[f64],
) -> Result<NoiseSweepResult> {
    let n = ensemble.n();
    let p_original = evaluate_policy(ensemble, policy)?;
    let mut records = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let rotated = apply_rotation_noise(ensemble, theta)?;
        let p_perturbed = evaluate_policy(&rotated, policy)?;
        let diff = p_original - p_perturbed;
        let bound = std::f64::consts::SQRT_2 * n as f64 * theta.abs();
        if diff.abs() > bound {
            return Err(Error::BoundViolation { theta, diff: diff.abs(), bound });
        }
        records.push(NoiseRecord { theta, p_original, p_perturbed, diff, bound });
    }
    Ok(NoiseSweepResult { n, records })
}

impl NoiseSweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,p_original,p_perturbed,diff,bound\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.theta, r.p_original, r.p_perturbed, r.diff, r.bound
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep serializes") + "\n"
    }
}
