//! Randomized-trial comparison harness: draw ensembles under a TrialSpec,
//! run every requested solver, train the RL agent `repetitions` times, and
//! emit rows sorted by increasing collective success probability.

use serde::{Deserialize, Serialize};

use qsd_core::collective::optimal_success;
use qsd_core::local::{dp_optimal_local, locally_greedy, minentropy_local, ActionCatalog};
use qsd_core::rl::{train, PpoConfig};
use qsd_core::Result;

use crate::generate::generate_ensemble;
use crate::schema::{SolverKind, TrialSpec};

/// DP is exponential in n; past this the oracle column is left empty.
pub const DP_MAX_N: usize = 6;
/// Min-entropy lookahead solves an SDP per candidate action; past this the
/// column is left empty.
pub const MINENTROPY_MAX_N: usize = 5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub trial: usize,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub p_sdp: Option<f64>,
    pub p_dp: Option<f64>,
    pub p_greedy: Option<f64>,
    pub p_minentropy: Option<f64>,
    pub p_rlnn_mean: Option<f64>,
    pub p_rlnn_std: Option<f64>,
    /// Human-readable reasons for any empty cells; the run continues.
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub spec: TrialSpec,
    pub rows: Vec<ComparisonRow>,
}

fn record<T>(cell: &mut Option<T>, errors: &mut Vec<String>, what: &str, r: Result<T>) {
    match r {
        Ok(v) => *cell = Some(v),
        Err(e) => errors.push(format!("{what}: {e}")),
    }
}

/// Seed for trial `t`'s ensemble draw.
pub fn trial_seed(spec_seed: u64, trial: usize) -> u64 {
    spec_seed.wrapping_add(trial as u64)
}

/// Seed for repetition `r` of RL training on trial `t`.
fn rl_seed(spec_seed: u64, trial: usize, repetition: usize) -> u64 {
    trial_seed(spec_seed, trial).wrapping_mul(1_000).wrapping_add(repetition as u64)
}

fn run_trial(spec: &TrialSpec, ppo: &PpoConfig, trial: usize) -> Result<ComparisonRow> {
    let seed = trial_seed(spec.seed, trial);
    let ensemble = generate_ensemble(spec, seed)?;
    let catalog = ActionCatalog::new(spec.quantization, spec.n);
    let mut row = ComparisonRow {
        trial,
        seed,
        m: spec.m,
        n: spec.n,
        p_sdp: None,
        p_dp: None,
        p_greedy: None,
        p_minentropy: None,
        p_rlnn_mean: None,
        p_rlnn_std: None,
        errors: Vec::new(),
    };
    for solver in &spec.solvers {
        match solver {
            SolverKind::Sdp => {
                let all: Vec<usize> = (0..spec.n).collect();
                let r = ensemble
                    .joint_densities(&all)
                    .and_then(|joint| optimal_success(&joint, ensemble.prior()));
                record(&mut row.p_sdp, &mut row.errors, "sdp", r);
            }
            SolverKind::Dp if spec.n <= DP_MAX_N => {
                let r = dp_optimal_local(&ensemble, &catalog).map(|p| p.value());
                record(&mut row.p_dp, &mut row.errors, "dp", r);
            }
            SolverKind::Greedy => {
                let r = locally_greedy(&ensemble, &catalog).map(|p| p.value());
                record(&mut row.p_greedy, &mut row.errors, "greedy", r);
            }
            SolverKind::Minentropy if spec.n <= MINENTROPY_MAX_N => {
                let r = minentropy_local(&ensemble, &catalog).map(|p| p.value());
                record(&mut row.p_minentropy, &mut row.errors, "minentropy", r);
            }
            SolverKind::Rlnn => {
                let mut values = Vec::with_capacity(spec.repetitions);
                for rep in 0..spec.repetitions {
                    match train(
                        &ensemble,
                        spec.quantization,
                        ppo,
                        spec.iterations,
                        rl_seed(spec.seed, trial, rep),
                    ) {
                        Ok(out) => values.push(out.policy.value()),
                        Err(e) => row.errors.push(format!("rlnn rep {rep}: {e}")),
                    }
                }
                if !values.is_empty() {
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    let var = if values.len() > 1 {
                        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                            / (values.len() - 1) as f64
                    } else {
                        0.0
                    };
                    row.p_rlnn_mean = Some(mean);
                    row.p_rlnn_std = Some(var.sqrt());
                }
            }
            // Out-of-range Dp/Minentropy requests: leave the column empty.
            SolverKind::Dp | SolverKind::Minentropy => {}
        }
    }
    Ok(row)
}

/// Run every trial, sorted by increasing P_SDP (trials whose SDP cell is
/// empty keep their trial order at the end).
pub fn run_comparison(spec: &TrialSpec, ppo: &PpoConfig) -> Result<ComparisonTable> {
    spec.validate()?;
    ppo.validate()?;
    let mut rows = Vec::with_capacity(spec.trials);
    for trial in 0..spec.trials {
        rows.push(run_trial(spec, ppo, trial)?);
    }
    rows.sort_by(|a, b| match (a.p_sdp, b.p_sdp) {
        (Some(x), Some(y)) => x.partial_cmp(&y).expect("finite probabilities"),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.trial.cmp(&b.trial),
    });
    Ok(ComparisonTable { spec: spec.clone(), rows })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("trial,seed,m,n,p_sdp,p_dp,p_greedy,p_minentropy,p_rlnn_mean,p_rlnn_std\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.trial,
                r.seed,
                r.m,
                r.n,
                cell(r.p_sdp),
                cell(r.p_dp),
                cell(r.p_greedy),
                cell(r.p_minentropy),
                cell(r.p_rlnn_mean),
                cell(r.p_rlnn_std),
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    /// The row invariants every emitted table must satisfy: probabilities in
    /// [max_j q_j − 1e-9, 1 + 1e-9] (uniform prior → 1/m), and the dominance
    /// chain P_SDP ≥ P_DP − 1e-9 ≥ P_greedy − 1e-9 where present.
    pub fn check_invariants(&self) -> Result<()> {
        let floor = 1.0 / self.spec.m as f64 - 1e-9;
        for r in &self.rows {
            for (name, v) in [
                ("p_sdp", r.p_sdp),
                ("p_dp", r.p_dp),
                ("p_greedy", r.p_greedy),
                ("p_minentropy", r.p_minentropy),
                ("p_rlnn_mean", r.p_rlnn_mean),
            ] {
                if let Some(x) = v {
                    if !(floor..=1.0 + 1e-9).contains(&x) {
                        return Err(qsd_core::Error::invalid(
                            "comparison row",
                            format!("trial {}: {name} = {x} outside [{floor}, 1]", r.trial),
                        ));
                    }
                }
            }
            if let (Some(dp), Some(greedy)) = (r.p_dp, r.p_greedy) {
                if dp < greedy - 1e-9 {
                    return Err(qsd_core::Error::invalid(
                        "comparison row",
                        format!("trial {}: dp {dp} below greedy {greedy}", r.trial),
                    ));
                }
            }
            if let (Some(sdp), Some(dp)) = (r.p_sdp, r.p_dp) {
                if sdp < dp - 1e-9 {
                    return Err(qsd_core::Error::invalid(
                        "comparison row",
                        format!("trial {}: sdp {sdp} below dp {dp}", r.trial),
                    ));
                }
            }
        }
        Ok(())
    }
}
