//! Clipped-surrogate proximal policy optimization with Monte-Carlo
//! advantages, an entropy bonus, and a squared-error value head, all driven
//! by hand-written gradients. The objective per sample is
//!
//!   min(R·A, clip(R, 1−ε, 1+ε)·A) + c_H·H(π(s)) − c_V·(V(s) − R̂)²
//!
//! with ratio R = π_θ(a|s)/π_θold(a|s), ascended with adaptive-moment steps.

use rand::Rng;

use super::net::{log_softmax, softmax, PolicyValueNet, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::exec;

/// Hyperparameters. Clip ε, discount γ, and learning rate η follow the
/// reference setup (0.3, 0.99, 5·10⁻⁵); batch shape, entropy and value
/// coefficients, and hidden width are tunable knobs.
#[derive(Clone, Debug)]
pub struct PpoConfig {
    pub clip: f64,
    pub discount: f64,
    pub learning_rate: f64,
    pub episodes_per_iteration: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.3,
            discount: 0.99,
            learning_rate: 5e-5,
            episodes_per_iteration: 512,
            epochs: 4,
            minibatch: 128,
            entropy_coef: 0.01,
            value_coef: 0.5,
            hidden: DEFAULT_HIDDEN,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        // NaN fails every comparison, so each field is checked for it
        // explicitly rather than relying on a negated comparison.
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(Error::invalid("ppo config", format!("clip {} ≤ 0", self.clip)));
        }
        if self.discount.is_nan() || self.discount <= 0.0 || self.discount > 1.0 {
            return Err(Error::invalid("ppo config", format!("discount {}", self.discount)));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("ppo config", "learning rate must be positive"));
        }
        if self.episodes_per_iteration == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::invalid("ppo config", "batch shape must be nonzero"));
        }
        if self.hidden == 0 {
            return Err(Error::invalid("ppo config", "hidden width must be nonzero"));
        }
        Ok(())
    }
}

/// One environment transition as the learner sees it.
#[derive(Clone, Debug)]
pub struct TrajectoryStep {
    pub observation: Vec<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
    pub value: f64,
}

/// One episode: the behavior policy's steps plus whether the episode ended by
/// completing the protocol (false means the step cap truncated it).
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    pub terminated: bool,
}

/// clip(x, min, max) as printed in the surrogate definition.
pub fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Discounted Monte-Carlo returns and advantages A_t = G_t − V(s_t).
/// Returns (advantages, return targets).
pub fn compute_advantages(rewards: &[f64], values: &[f64], gamma: f64) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(rewards.len(), values.len());
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        returns[t] = acc;
    }
    let advantages = returns.iter().zip(values).map(|(g, v)| g - v).collect();
    (advantages, returns)
}

/// A flattened training sample.
#[derive(Clone, Debug)]
pub struct Sample {
    pub observation: Vec<f64>,
    pub action: usize,
    pub log_prob_old: f64,
    pub advantage: f64,
    pub return_target: f64,
}

/// Flatten a batch of trajectories into samples with Monte-Carlo advantages.
pub fn flatten_batch(batch: &[Trajectory], gamma: f64) -> Vec<Sample> {
    let mut samples = Vec::new();
    for traj in batch {
        let rewards: Vec<f64> = traj.steps.iter().map(|s| s.reward).collect();
        let values: Vec<f64> = traj.steps.iter().map(|s| s.value).collect();
        let (advantages, returns) = compute_advantages(&rewards, &values, gamma);
        for (step, (a, g)) in traj.steps.iter().zip(advantages.iter().zip(&returns)) {
            samples.push(Sample {
                observation: step.observation.clone(),
                action: step.action,
                log_prob_old: step.log_prob,
                advantage: *a,
                return_target: *g,
            });
        }
    }
    samples
}

/// Mean per-sample diagnostics of one objective evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossDiagnostics {
    pub surrogate: f64,
    pub value_mse: f64,
    pub entropy: f64,
}

fn sample_terms(net: &PolicyValueNet, s: &Sample, cfg: &PpoConfig) -> (f64, f64, f64) {
    let logits = net.logits(&s.observation);
    let logp = log_softmax(&logits);
    let p = softmax(&logits);
    let ratio = (logp[s.action] - s.log_prob_old).exp();
    let surr = (ratio * s.advantage).min(clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage);
    let entropy: f64 = -p.iter().zip(&logp).map(|(&pi, &li)| if pi > 0.0 { pi * li } else { 0.0 }).sum::<f64>();
    let v = net.value_estimate(&s.observation);
    let verr = (v - s.return_target) * (v - s.return_target);
    (surr, entropy, verr)
}

/// The scalar objective PPO ascends, averaged over `samples`. Exposed so the
/// analytic gradient can be checked against finite differences.
pub fn surrogate_objective(
    net: &PolicyValueNet,
    samples: &[Sample],
    cfg: &PpoConfig,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("ppo batch", "no samples"));
    }
    let mut total = 0.0;
    for s in samples {
        let (surr, entropy, verr) = sample_terms(net, s, cfg);
        total += surr + cfg.entropy_coef * entropy - cfg.value_coef * verr;
    }
    let objective = total / samples.len() as f64;
    if !objective.is_finite() {
        return Err(Error::Numerics(format!("surrogate objective {objective}")));
    }
    Ok(objective)
}

/// Analytic parameter gradient of `surrogate_objective` plus diagnostics.
pub fn surrogate_gradient(
    net: &PolicyValueNet,
    samples: &[Sample],
    cfg: &PpoConfig,
) -> Result<(Vec<f64>, LossDiagnostics)> {
    if samples.is_empty() {
        return Err(Error::invalid("ppo batch", "no samples"));
    }
    let dim = net.param_count();
    let scale = 1.0 / samples.len() as f64;
    let zero = || (vec![0.0; dim], LossDiagnostics::default());
    let map = |chunk: &[Sample]| -> Result<(Vec<f64>, LossDiagnostics)> {
        let (mut grad, mut diag) = zero();
        for s in chunk {
            if !(s.advantage.is_finite() && s.log_prob_old.is_finite() && s.return_target.is_finite())
            {
                return Err(Error::Numerics("non-finite sample in ppo batch".into()));
            }
            let cache = net.policy_forward(&s.observation);
            let logp = log_softmax(&cache.out);
            let p = softmax(&cache.out);
            let ratio = (logp[s.action] - s.log_prob_old).exp();
            if !ratio.is_finite() {
                return Err(Error::Numerics(format!("likelihood ratio {ratio}")));
            }
            let surr1 = ratio * s.advantage;
            let surr2 = clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * s.advantage;

            // d/dlogits of the clipped surrogate: the unclipped branch moves
            // with ∇logπ(a) scaled by ratio·A; the clipped branch is flat.
            let mut dlogits = vec![0.0; p.len()];
            if surr1 <= surr2 {
                let coef = ratio * s.advantage * scale;
                for (k, dl) in dlogits.iter_mut().enumerate() {
                    let indicator = if k == s.action { 1.0 } else { 0.0 };
                    *dl += coef * (indicator - p[k]);
                }
            }
            let entropy: f64 =
                -p.iter().zip(&logp).map(|(&pi, &li)| if pi > 0.0 { pi * li } else { 0.0 }).sum::<f64>();
            for (k, dl) in dlogits.iter_mut().enumerate() {
                *dl -= cfg.entropy_coef * scale * p[k] * (logp[k] + entropy);
            }
            net.policy_backward(&cache, &dlogits, &mut grad);

            let vcache = net.value_forward(&s.observation);
            let v = vcache.out[0];
            net.value_backward(
                &vcache,
                -2.0 * cfg.value_coef * (v - s.return_target) * scale,
                &mut grad,
            );

            diag.surrogate += surr1.min(surr2) * scale;
            diag.value_mse += (v - s.return_target) * (v - s.return_target) * scale;
            diag.entropy += entropy * scale;
        }
        Ok((grad, diag))
    };
    let fold = |acc: Result<(Vec<f64>, LossDiagnostics)>, part: Result<(Vec<f64>, LossDiagnostics)>| {
        let (mut grad, mut diag) = acc?;
        let (g, d) = part?;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
        diag.surrogate += d.surrogate;
        diag.value_mse += d.value_mse;
        diag.entropy += d.entropy;
        Ok((grad, diag))
    };
    let (grad, diag) = exec::chunked_fold(samples, 32, map, fold, Ok(zero()))?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerics("non-finite surrogate gradient".into()));
    }
    Ok((grad, diag))
}

/// Adaptive-moment ascent (the β₁=0.9, β₂=0.999 defaults); state persists
/// across updates for the whole training run.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Adam { m: vec![0.0; dim], v: vec![0.0; dim], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One ascent step along `grad` with step size `lr`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in
            params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p += lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// One PPO update on a rollout batch: epochs × shuffled minibatches of
/// ascent steps. Returns diagnostics averaged over every minibatch step.
pub fn ppo_update<R: Rng>(
    net: &mut PolicyValueNet,
    adam: &mut Adam,
    batch: &[Trajectory],
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<LossDiagnostics> {
    if batch.is_empty() {
        return Err(Error::invalid("ppo batch", "no trajectories"));
    }
    cfg.validate()?;
    let samples = flatten_batch(batch, cfg.discount);
    if samples.is_empty() {
        return Err(Error::invalid("ppo batch", "no steps in batch"));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut totals = LossDiagnostics::default();
    let mut steps = 0usize;
    for _ in 0..cfg.epochs {
        // Fisher–Yates with the caller's stream keeps the whole update
        // deterministic for a fixed seed.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for mb in order.chunks(cfg.minibatch) {
            let view: Vec<Sample> = mb.iter().map(|&i| samples[i].clone()).collect();
            let (grad, diag) = surrogate_gradient(net, &view, cfg)?;
            let mut params = net.params();
            adam.step(&mut params, &grad, cfg.learning_rate);
            net.set_params(&params)?;
            totals.surrogate += diag.surrogate;
            totals.value_mse += diag.value_mse;
            totals.entropy += diag.entropy;
            steps += 1;
        }
    }
    totals.surrogate /= steps as f64;
    totals.value_mse /= steps as f64;
    totals.entropy /= steps as f64;
    Ok(totals)
}
