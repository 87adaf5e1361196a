//! On-disk formats: the trial protocol spec and the ensemble JSON schema
//! ({"m", "n", "prior", "states": [[[2×2 row-major]×n]×m], "meta"}).

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qsd_core::qstate::{Ensemble, ProductState, QubitDensity};
use qsd_core::{Error, Result};

/// Which success-probability columns a comparison run fills in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Sdp,
    Dp,
    Greedy,
    Minentropy,
    Rlnn,
}

/// The randomized-trial protocol: how many ensembles to draw, their shape,
/// the noise law, and the solver/training budget. Serializes losslessly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub m: usize,
    pub n: usize,
    pub quantization: usize,
    /// Rank-1 factors when set; otherwise each factor is depolarized with
    /// p drawn uniformly from `noise_range`.
    pub pure_states: bool,
    pub noise_range: [f64; 2],
    pub seed: u64,
    pub trials: usize,
    pub solvers: Vec<SolverKind>,
    /// PPO training iterations per RLNN run.
    pub iterations: usize,
    /// Independent RLNN trainings per trial (mean ± std columns).
    pub repetitions: usize,
}

impl Default for TrialSpec {
    fn default() -> Self {
        TrialSpec {
            m: 2,
            n: 3,
            quantization: 20,
            pure_states: true,
            noise_range: [0.0, 0.5],
            seed: 0,
            trials: 10,
            solvers: vec![
                SolverKind::Sdp,
                SolverKind::Dp,
                SolverKind::Greedy,
                SolverKind::Minentropy,
                SolverKind::Rlnn,
            ],
            iterations: 1000,
            repetitions: 5,
        }
    }
}

impl TrialSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::invalid("trial spec", "need at least two hypotheses"));
        }
        if self.n < 1 || self.quantization < 1 || self.trials < 1 {
            return Err(Error::invalid("trial spec", "n, Q, and trials must be positive"));
        }
        let [lo, hi] = self.noise_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::invalid(
                "trial spec",
                format!("noise range [{lo}, {hi}] outside 0 ≤ lo ≤ hi ≤ 1"),
            ));
        }
        Ok(())
    }
}

/// JSON wire form of an ensemble; `states[j][k]` is hypothesis j's qubit k
/// as a row-major 2×2 real matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub m: usize,
    pub n: usize,
    pub prior: Vec<f64>,
    pub states: Vec<Vec<[[f64; 2]; 2]>>,
    #[serde(default)]
    pub meta: Value,
}

impl EnsembleFile {
    pub fn from_ensemble(ensemble: &Ensemble, meta: Value) -> Self {
        let states = (0..ensemble.m())
            .map(|j| (0..ensemble.n()).map(|k| ensemble.factor(j, k).entries()).collect())
            .collect();
        EnsembleFile {
            m: ensemble.m(),
            n: ensemble.n(),
            prior: ensemble.prior().to_vec(),
            states,
            meta,
        }
    }

    pub fn to_ensemble(&self) -> Result<Ensemble> {
        if self.states.len() != self.m {
            return Err(Error::invalid(
                "ensemble file",
                format!("{} state rows for m={}", self.states.len(), self.m),
            ));
        }
        let mut states = Vec::with_capacity(self.m);
        for factors in &self.states {
            if factors.len() != self.n {
                return Err(Error::invalid(
                    "ensemble file",
                    format!("{} factors for n={}", factors.len(), self.n),
                ));
            }
            let qubits: Result<Vec<QubitDensity>> =
                factors.iter().map(|e| QubitDensity::new(*e)).collect();
            states.push(ProductState::new(qubits?));
        }
        Ensemble::new(states, self.prior.clone())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble file serializes") + "\n"
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::invalid("ensemble file", format!("json parse: {e}")))
    }
}
