//! Episodic measurement environment. One episode discriminates one sampled
//! hypothesis: the agent measures unmeasured qubits one at a time, outcomes
//! are drawn from the true hypothesis's Born distribution, and the posterior
//! it observes is the full Bayesian update (the agent never sees the sample).

use rand::Rng;

use crate::action::Action;
use crate::collective::optimal_success;
use crate::error::{Error, Result};
use crate::local::ActionCatalog;
use crate::mat::SquareMat;
use crate::qstate::{born_probabilities, posterior_update, BeliefState, Ensemble};

/// Reward for attempting to re-measure an already measured subsystem. The
/// state is left unchanged and the episode continues.
pub const RE_MEASURE_PENALTY: f64 = -0.3;

/// Episodes end after `STEP_CAP_FACTOR · n` steps regardless of progress, so
/// undertrained policies that keep paying the penalty still terminate.
pub const STEP_CAP_FACTOR: usize = 4;

pub struct MeasurementEnv<'a> {
    ensemble: &'a Ensemble,
    catalog: &'a ActionCatalog,
    belief: BeliefState,
    true_hypothesis: usize,
    steps_taken: usize,
}

impl<'a> MeasurementEnv<'a> {
    /// Fresh episode: mask zeroed, posterior = prior, hypothesis sampled from
    /// the prior using `rng`.
    pub fn reset<R: Rng>(
        ensemble: &'a Ensemble,
        catalog: &'a ActionCatalog,
        rng: &mut R,
    ) -> Result<Self> {
        if catalog.n() != ensemble.n() {
            return Err(Error::Dimension(format!(
                "catalog over {} subsystems, ensemble over {}",
                catalog.n(),
                ensemble.n()
            )));
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut hypothesis = ensemble.m() - 1;
        for (j, &q) in ensemble.prior().iter().enumerate() {
            acc += q;
            if u < acc {
                hypothesis = j;
                break;
            }
        }
        Ok(MeasurementEnv {
            ensemble,
            catalog,
            belief: BeliefState::initial(ensemble),
            true_hypothesis: hypothesis,
            steps_taken: 0,
        })
    }

    /// Observation s = (v, p): the mask as 0/1 entries, then the posterior.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.ensemble.n() + self.ensemble.m());
        obs.extend(self.belief.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        obs.extend_from_slice(&self.belief.posterior);
        obs
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    pub fn true_hypothesis(&self) -> usize {
        self.true_hypothesis
    }

    pub fn observation_width(&self) -> usize {
        self.ensemble.n() + self.ensemble.m()
    }

    fn step_cap(&self) -> usize {
        STEP_CAP_FACTOR * self.ensemble.n()
    }

    /// Execute one action. Returns (reward, done). Re-measurement leaves the
    /// state unchanged at `RE_MEASURE_PENALTY`; a fresh measurement samples an
    /// outcome from the true hypothesis's factor, updates the posterior, and
    /// pays the terminal reward — the optimal expected success probability of
    /// the best final measurement on the last unmeasured qubit — once exactly
    /// one subsystem remains.
    pub fn step<R: Rng>(&mut self, action: Action, rng: &mut R) -> Result<(f64, bool)> {
        self.steps_taken += 1;
        let capped = self.steps_taken >= self.step_cap();
        if self.belief.mask[action.subsystem] {
            return Ok((RE_MEASURE_PENALTY, capped));
        }
        let povm = self.catalog.povm(action.povm_idx)?;
        let factor = self.ensemble.factor(self.true_hypothesis, action.subsystem);
        let probs = born_probabilities(factor, povm)?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut outcome = probs.len() - 1;
        for (d, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                outcome = d;
                break;
            }
        }
        self.belief =
            posterior_update(self.ensemble, &self.belief, action.subsystem, povm, outcome)?;
        if self.belief.measured_count() == self.ensemble.n() - 1 {
            let last = self
                .belief
                .mask
                .iter()
                .position(|&b| !b)
                .expect("one subsystem left unmeasured");
            let factors: Vec<SquareMat> = (0..self.ensemble.m())
                .map(|j| self.ensemble.factor(j, last).mat().clone())
                .collect();
            let reward = optimal_success(&factors, &self.belief.posterior)?;
            return Ok((reward, true));
        }
        Ok((0.0, capped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{ProductState, QubitDensity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn pure_ensemble(angles: &[Vec<f64>], prior: &[f64]) -> Ensemble {
        let states: Vec<ProductState> = angles
            .iter()
            .map(|f| ProductState::new(f.iter().map(|&a| QubitDensity::pure(a)).collect()))
            .collect();
        Ensemble::new(states, prior.to_vec()).unwrap()
    }

    #[test]
    fn reset_observation_is_mask_then_prior() {
        let e = pure_ensemble(
            &[vec![0.1, 0.2], vec![0.5, 0.9], vec![1.1, 1.4]],
            &[1.0 / 3.0; 3],
        );
        let catalog = ActionCatalog::new(4, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let env = MeasurementEnv::reset(&e, &catalog, &mut rng).unwrap();
        let obs = env.observation();
        assert_eq!(obs.len(), 5);
        assert_eq!(&obs[..2], &[0.0, 0.0]);
        for &p in &obs[2..] {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_prior_always_samples_hypothesis_zero() {
        let e = pure_ensemble(&[vec![0.3, 0.3], vec![1.0, 1.0]], &[1.0, 0.0]);
        let catalog = ActionCatalog::new(4, 2);
        for seed in 0..20 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let env = MeasurementEnv::reset(&e, &catalog, &mut rng).unwrap();
            assert_eq!(env.true_hypothesis(), 0);
        }
    }

    #[test]
    fn same_seed_same_hypothesis_draws() {
        let e = pure_ensemble(
            &[vec![0.1, 0.2], vec![0.5, 0.9], vec![1.1, 1.4]],
            &[0.2, 0.5, 0.3],
        );
        let catalog = ActionCatalog::new(4, 2);
        let draw = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (0..10)
                .map(|_| MeasurementEnv::reset(&e, &catalog, &mut rng).unwrap().true_hypothesis())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
    }

    #[test]
    fn re_measurement_pays_penalty_and_leaves_state_unchanged() {
        let e = pure_ensemble(&[vec![0.2, 0.4, 0.6], vec![0.9, 1.2, 1.5]], &[0.5, 0.5]);
        let catalog = ActionCatalog::new(4, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut env = MeasurementEnv::reset(&e, &catalog, &mut rng).unwrap();
        let (r, done) = env.step(Action { povm_idx: 0, subsystem: 1 }, &mut rng).unwrap();
        assert_eq!(r, 0.0);
        assert!(!done);
        let before = env.observation();
        let (r, done) = env.step(Action { povm_idx: 2, subsystem: 1 }, &mut rng).unwrap();
        assert_eq!(r, RE_MEASURE_PENALTY);
        assert!(!done);
        assert_eq!(env.observation(), before);
    }

    #[test]
    fn n2_first_valid_measurement_terminates_with_bounded_reward() {
        let e = pure_ensemble(&[vec![0.15, 0.8], vec![1.3, 0.2]], &[0.4, 0.6]);
        let catalog = ActionCatalog::new(6, 2);
        for seed in 0..10 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut env = MeasurementEnv::reset(&e, &catalog, &mut rng).unwrap();
            let (r, done) = env.step(Action { povm_idx: 3, subsystem: 0 }, &mut rng).unwrap();
            assert!(done);
            let mode = env.belief().posterior.iter().cloned().fold(0.0, f64::max);
            assert!(r >= mode - 1e-12 && r <= 1.0 + 1e-12, "terminal reward {r} vs mode {mode}");
        }
    }

    #[test]
    fn orthogonal_ensemble_informative_action_gives_reward_one() {
        let e = pure_ensemble(
            &[vec![0.0, 0.0], vec![std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2]],
            &[0.5, 0.5],
        );
        let catalog = ActionCatalog::new(4, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut env = MeasurementEnv::reset(&e, &catalog, &mut rng).unwrap();
        // povm index Q−1 = 4−1 is the computational basis (angle π/2).
        let (r, done) = env.step(Action { povm_idx: 3, subsystem: 0 }, &mut rng).unwrap();
        assert!(done);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_loop_hits_step_cap() {
        let e = pure_ensemble(&[vec![0.2, 0.4, 0.6], vec![0.9, 1.2, 1.5]], &[0.5, 0.5]);
        let catalog = ActionCatalog::new(4, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let mut env = MeasurementEnv::reset(&e, &catalog, &mut rng).unwrap();
        let (_, done) = env.step(Action { povm_idx: 0, subsystem: 0 }, &mut rng).unwrap();
        assert!(!done);
        let mut done = false;
        let mut steps = 1;
        while !done {
            let (r, d) = env.step(Action { povm_idx: 0, subsystem: 0 }, &mut rng).unwrap();
            assert_eq!(r, RE_MEASURE_PENALTY);
            done = d;
            steps += 1;
            assert!(steps <= STEP_CAP_FACTOR * 3 + 1, "episode failed to terminate");
        }
        assert_eq!(steps, STEP_CAP_FACTOR * 3);
    }
}
