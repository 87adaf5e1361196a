//! Locally-adaptive strategies: the exact dynamic-programming oracle over the
//! quantized action set, the locally-greedy and min-entropy baselines, policy
//! evaluation, and the closed-form trine analytics.
//!
//! All strategies share the same protocol shape: measure one unmeasured qubit
//! per round with a catalog POVM, update the posterior, stop when a single
//! qubit remains, and hand that qubit to the collective solver for the final
//! optimal measurement. A policy is therefore a tree over outcome histories
//! with exactly n−1 decision levels.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::action::{Action, QuantizedPovmSet};
use crate::collective::optimal_success;
use crate::error::{Error, Result};
use crate::exec;
use crate::mat::SquareMat;
use crate::qstate::{
    outcome_marginals, posterior_update, BeliefState, Ensemble, Povm, ProductState, QubitDensity,
};

/// Outcome branches with at most this probability are not stored in policy
/// trees. Kept at exact zero: only outcomes ruled out by the algebra (an
/// effect orthogonal to every live hypothesis) are pruned, so the exact
/// evaluation walk and the builder walk prune identically.
const PRUNE_TOL: f64 = 0.0;

/// evaluate_policy tolerates a missing child when the branch carries at most
/// this much probability (round-off siblings of builder-pruned exact zeros);
/// anything heavier is a genuine hole in the policy.
const EVAL_SKIP_TOL: f64 = 1e-9;

/// Posterior entries are keyed at 12 decimal digits in the DP memo.
const KEY_SCALE: f64 = 1e12;

/// The action set a strategy optimizes over: the quantized binary family,
/// optionally extended with extra single-qubit POVMs (e.g. the 3-outcome
/// anti-trine, which no binary member can express). Flat action ids are
/// subsystem-major over the whole catalog, matching the quantized convention
/// when there are no extras.
#[derive(Clone, Debug)]
pub struct ActionCatalog {
    n: usize,
    quantized: QuantizedPovmSet,
    extras: Vec<Povm>,
}

impl ActionCatalog {
    pub fn new(quantization: usize, n: usize) -> Self {
        assert!(n >= 1, "need at least one subsystem");
        ActionCatalog { n, quantized: QuantizedPovmSet::new(quantization), extras: Vec::new() }
    }

    /// Catalog with extra POVMs appended after the quantized members, so extra
    /// k has povm index Q+k.
    pub fn with_extras(quantization: usize, n: usize, extras: Vec<Povm>) -> Result<Self> {
        for p in &extras {
            if p.dim() != 2 {
                return Err(Error::Dimension(format!("{}-dim extra in a local catalog", p.dim())));
            }
        }
        let mut catalog = Self::new(quantization, n);
        catalog.extras = extras;
        Ok(catalog)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn quantization(&self) -> usize {
        self.quantized.resolution()
    }

    /// Number of distinct POVMs (quantized members plus extras).
    pub fn catalog_len(&self) -> usize {
        self.quantized.resolution() + self.extras.len()
    }

    /// Total number of flat actions, n · catalog_len.
    pub fn action_count(&self) -> usize {
        self.n * self.catalog_len()
    }

    pub fn povm(&self, povm_idx: usize) -> Result<&Povm> {
        let q = self.quantized.resolution();
        if povm_idx < q {
            Ok(&self.quantized.povms()[povm_idx])
        } else {
            self.extras.get(povm_idx - q).ok_or(Error::Index {
                index: povm_idx,
                limit: self.catalog_len(),
            })
        }
    }

    pub fn encode(&self, action: Action) -> usize {
        action.subsystem * self.catalog_len() + action.povm_idx
    }

    pub fn decode(&self, flat: usize) -> Result<Action> {
        let c = self.catalog_len();
        if flat >= self.action_count() {
            return Err(Error::Index { index: flat, limit: self.action_count() });
        }
        Ok(Action { povm_idx: flat % c, subsystem: flat / c })
    }
}

/// One internal node of a policy tree: the prescribed measurement and one
/// child per outcome (None where the branch is unreachable or, at the deepest
/// level, where the final round needs no decision).
#[derive(Clone, Debug)]
pub struct PolicyNode {
    pub action: Action,
    pub children: Vec<Option<Box<PolicyNode>>>,
}

/// A locally-adaptive measurement policy: a decision tree keyed by outcome
/// history, carrying the catalog it indexes into and the expected success
/// probability computed by whichever algorithm built it. `root` is None when
/// n = 1 (no local rounds; the single qubit goes straight to the collective
/// final measurement).
#[derive(Clone, Debug)]
pub struct AdaptivePolicy {
    catalog: ActionCatalog,
    root: Option<Box<PolicyNode>>,
    value: f64,
}

impl AdaptivePolicy {
    /// Assemble a policy by hand (value not yet known; evaluate to get it).
    pub fn from_root(catalog: ActionCatalog, root: Option<Box<PolicyNode>>) -> Self {
        AdaptivePolicy { catalog, root, value: f64::NAN }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn catalog(&self) -> &ActionCatalog {
        &self.catalog
    }

    pub fn root(&self) -> Option<&PolicyNode> {
        self.root.as_deref()
    }

    /// Same tree with `value` replaced by its exact evaluation on `ensemble`.
    pub fn evaluated(mut self, ensemble: &Ensemble) -> Result<Self> {
        self.value = evaluate_policy(ensemble, &self)?;
        Ok(self)
    }

    /// Depth (number of decision levels) if every stored path from the root
    /// has the same length, else None. A well-formed policy for n qubits has
    /// uniform depth n−1.
    pub fn uniform_decision_depth(&self) -> Option<usize> {
        fn walk(node: Option<&PolicyNode>) -> Option<usize> {
            let node = match node {
                None => return Some(0),
                Some(n) => n,
            };
            let mut depth = None;
            for child in node.children.iter() {
                let d = walk(child.as_deref())?;
                match depth {
                    None => depth = Some(d),
                    Some(prev) if prev != d => return None,
                    _ => {}
                }
            }
            // A node with no stored children is one decision above the leaves.
            Some(depth.unwrap_or(0) + 1)
        }
        walk(self.root())
    }
}

fn unmeasured(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect()
}

fn factor_densities(ensemble: &Ensemble, subsystem: usize) -> Vec<SquareMat> {
    (0..ensemble.m()).map(|j| ensemble.factor(j, subsystem).mat().clone()).collect()
}

/// Value of the terminal round: the optimal measurement on the one unmeasured
/// qubit under the current posterior, solved by the collective machinery.
fn final_round_value(ensemble: &Ensemble, belief: &BeliefState, subsystem: usize) -> Result<f64> {
    optimal_success(&factor_densities(ensemble, subsystem), &belief.posterior)
}

/// Exact expected success probability of a policy: sum over outcome paths of
/// path probability times the final-round optimum. Decoding at the end is
/// "guess the posterior mode", which the final-round solver realizes.
pub fn evaluate_policy(ensemble: &Ensemble, policy: &AdaptivePolicy) -> Result<f64> {
    if ensemble.n() != policy.catalog.n() {
        return Err(Error::Dimension(format!(
            "ensemble over {} qubits, catalog over {}",
            ensemble.n(),
            policy.catalog.n()
        )));
    }
    let belief = BeliefState::initial(ensemble);
    eval_node(ensemble, &policy.catalog, policy.root(), &belief)
}

fn eval_node(
    ensemble: &Ensemble,
    catalog: &ActionCatalog,
    node: Option<&PolicyNode>,
    belief: &BeliefState,
) -> Result<f64> {
    let open = unmeasured(&belief.mask);
    if open.len() == 1 {
        return final_round_value(ensemble, belief, open[0]);
    }
    let node = node.ok_or_else(|| Error::PolicyGap { mask: belief.mask.clone() })?;
    if belief.mask[node.action.subsystem] {
        return Err(Error::invalid("policy", "prescribes measuring a subsystem twice"));
    }
    let povm = catalog.povm(node.action.povm_idx)?;
    let marginals = outcome_marginals(ensemble, belief, node.action.subsystem, povm);
    let mut total = 0.0;
    for (d, &pr) in marginals.iter().enumerate() {
        if pr <= PRUNE_TOL {
            continue;
        }
        let child = node.children.get(d).and_then(|c| c.as_deref());
        if child.is_none() && open.len() > 2 {
            // An internal decision is missing. Walk differences of round-off
            // size are forgiven; real mass means the policy has a hole.
            if pr <= EVAL_SKIP_TOL {
                continue;
            }
            let next = posterior_update(ensemble, belief, node.action.subsystem, povm, d)?;
            return Err(Error::PolicyGap { mask: next.mask });
        }
        let next = posterior_update(ensemble, belief, node.action.subsystem, povm, d)?;
        total += pr * eval_node(ensemble, catalog, child, &next)?;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Dynamic-programming oracle
// ---------------------------------------------------------------------------

type BeliefKey = (u64, Vec<u64>);

fn mask_bits(mask: &[bool]) -> u64 {
    mask.iter().enumerate().fold(0u64, |acc, (i, &b)| if b { acc | (1 << i) } else { acc })
}

fn quantize_posterior(posterior: &[f64]) -> Vec<u64> {
    posterior.iter().map(|&p| (p * KEY_SCALE).round() as u64).collect()
}

/// The belief a key stands for. Values are computed on this dequantized
/// posterior — not the exact one that led here — so each memo entry is a pure
/// function of its key and concurrent subtree evaluations agree bitwise.
fn dequantize_posterior(key: &[u64]) -> Vec<f64> {
    let raw: Vec<f64> = key.iter().map(|&u| u as f64 / KEY_SCALE).collect();
    let norm: f64 = raw.iter().sum();
    raw.iter().map(|&p| p / norm).collect()
}

struct DpMemo {
    map: Mutex<HashMap<BeliefKey, (f64, Option<Action>)>>,
}

fn dp_value(
    ensemble: &Ensemble,
    catalog: &ActionCatalog,
    mask: &[bool],
    key: BeliefKey,
    memo: &DpMemo,
) -> Result<(f64, Option<Action>)> {
    if let Some(hit) = memo.map.lock().unwrap().get(&key) {
        return Ok(*hit);
    }
    let belief = BeliefState { mask: mask.to_vec(), posterior: dequantize_posterior(&key.1) };
    let open = unmeasured(mask);
    let entry = if open.len() == 1 {
        (final_round_value(ensemble, &belief, open[0])?, None)
    } else {
        let mut best_value = f64::NEG_INFINITY;
        let mut best_action = None;
        for flat in 0..catalog.action_count() {
            let action = catalog.decode(flat)?;
            if belief.mask[action.subsystem] {
                continue;
            }
            let povm = catalog.povm(action.povm_idx)?;
            let marginals = outcome_marginals(ensemble, &belief, action.subsystem, povm);
            let mut value = 0.0;
            for (d, &pr) in marginals.iter().enumerate() {
                if pr <= PRUNE_TOL {
                    continue;
                }
                let next = posterior_update(ensemble, &belief, action.subsystem, povm, d)?;
                let child_key = (mask_bits(&next.mask), quantize_posterior(&next.posterior));
                let (child_value, _) = dp_value(ensemble, catalog, &next.mask, child_key, memo)?;
                value += pr * child_value;
            }
            // Strict improvement keeps the lowest flat id on ties.
            if value > best_value {
                best_value = value;
                best_action = Some(action);
            }
        }
        (best_value, best_action)
    };
    memo.map.lock().unwrap().insert(key, entry);
    Ok(entry)
}

/// Rebuild the decision tree by re-walking the rounded belief states the value
/// pass memoized. Keys are threaded down rather than recomputed: quantizing a
/// dequantized posterior does not round-trip (the normalization inside
/// dequantize can shift an entry across a rounding boundary), so recomputing
/// would miss memo entries.
fn dp_tree(
    ensemble: &Ensemble,
    catalog: &ActionCatalog,
    mask: &[bool],
    key: &BeliefKey,
    memo: &DpMemo,
) -> Result<Option<Box<PolicyNode>>> {
    if unmeasured(mask).len() == 1 {
        return Ok(None);
    }
    let action = match memo.map.lock().unwrap().get(key) {
        Some((_, Some(action))) => *action,
        _ => return Err(Error::PolicyGap { mask: mask.to_vec() }),
    };
    let belief = BeliefState { mask: mask.to_vec(), posterior: dequantize_posterior(&key.1) };
    let povm = catalog.povm(action.povm_idx)?;
    let marginals = outcome_marginals(ensemble, &belief, action.subsystem, povm);
    let mut children = Vec::with_capacity(marginals.len());
    for (d, &pr) in marginals.iter().enumerate() {
        if pr <= PRUNE_TOL {
            children.push(None);
            continue;
        }
        let next = posterior_update(ensemble, &belief, action.subsystem, povm, d)?;
        let child_key = (mask_bits(&next.mask), quantize_posterior(&next.posterior));
        children.push(dp_tree(ensemble, catalog, &next.mask, &child_key, memo)?);
    }
    Ok(Some(Box::new(PolicyNode { action, children })))
}

/// The exact optimum over the catalog: full dynamic programming over belief
/// states, memoized on (measured mask, posterior rounded to 12 digits) so
/// numerically identical branches merge. First-round subtrees are evaluated
/// concurrently; every memo value is a pure function of its key, so the
/// schedule cannot change results. Cost grows like O(2^n · n · Q), so keep
/// n ≤ 6 at desk scale.
pub fn dp_optimal_local(ensemble: &Ensemble, catalog: &ActionCatalog) -> Result<AdaptivePolicy> {
    check_compatible(ensemble, catalog)?;
    let memo = DpMemo { map: Mutex::new(HashMap::new()) };
    let root_belief = BeliefState::initial(ensemble);
    let root_key = (mask_bits(&root_belief.mask), quantize_posterior(&root_belief.posterior));

    if ensemble.n() == 1 {
        let value = final_round_value(ensemble, &root_belief, 0)?;
        let mut policy = AdaptivePolicy::from_root(catalog.clone(), None);
        policy.value = value;
        return Ok(policy);
    }

    // Root level by hand so first-round actions fan out concurrently.
    let rounded_root =
        BeliefState { mask: root_belief.mask.clone(), posterior: dequantize_posterior(&root_key.1) };
    let evals: Vec<Result<f64>> = exec::map_indexed(catalog.action_count(), |flat| {
        let action = catalog.decode(flat)?;
        let povm = catalog.povm(action.povm_idx)?;
        let marginals = outcome_marginals(ensemble, &rounded_root, action.subsystem, povm);
        let mut value = 0.0;
        for (d, &pr) in marginals.iter().enumerate() {
            if pr <= PRUNE_TOL {
                continue;
            }
            let next = posterior_update(ensemble, &rounded_root, action.subsystem, povm, d)?;
            let child_key = (mask_bits(&next.mask), quantize_posterior(&next.posterior));
            let (child_value, _) = dp_value(ensemble, catalog, &next.mask, child_key, &memo)?;
            value += pr * child_value;
        }
        Ok(value)
    });
    let mut best_value = f64::NEG_INFINITY;
    let mut best_action = None;
    for (flat, value) in evals.into_iter().enumerate() {
        let value = value?;
        if value > best_value {
            best_value = value;
            best_action = Some(catalog.decode(flat)?);
        }
    }
    memo.map.lock().unwrap().insert(root_key.clone(), (best_value, best_action));

    let root = dp_tree(ensemble, catalog, &rounded_root.mask, &root_key, &memo)?;
    let mut policy = AdaptivePolicy::from_root(catalog.clone(), root);
    policy.value = evaluate_policy(ensemble, &policy)?;
    Ok(policy)
}

// ---------------------------------------------------------------------------
// Heuristic baselines
// ---------------------------------------------------------------------------

fn check_compatible(ensemble: &Ensemble, catalog: &ActionCatalog) -> Result<()> {
    if ensemble.n() != catalog.n() {
        return Err(Error::Dimension(format!(
            "ensemble over {} qubits, catalog over {}",
            ensemble.n(),
            catalog.n()
        )));
    }
    Ok(())
}

/// Immediate single-subsystem success of measuring `subsystem` with `povm`:
/// the probability that guessing the posterior mode right after this one
/// outcome is correct, Σ_d max_j p_j·Tr[E_d ρ_j^{(k)}].
fn immediate_success(
    ensemble: &Ensemble,
    belief: &BeliefState,
    subsystem: usize,
    povm: &Povm,
) -> f64 {
    povm.effects()
        .iter()
        .map(|e| {
            (0..ensemble.m())
                .map(|j| belief.posterior[j] * e.frob_dot(ensemble.factor(j, subsystem).mat()))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

/// Score-driven recursive tree builder shared by the greedy and min-entropy
/// baselines: at each belief state pick the action maximizing `score`, ties to
/// the lowest flat id.
fn build_by_score<S>(
    ensemble: &Ensemble,
    catalog: &ActionCatalog,
    belief: &BeliefState,
    score: &S,
) -> Result<Option<Box<PolicyNode>>>
where
    S: Fn(&BeliefState, Action, &Povm) -> Result<f64>,
{
    if unmeasured(&belief.mask).len() == 1 {
        return Ok(None);
    }
    let mut best_score = f64::NEG_INFINITY;
    let mut best: Option<(Action, &Povm)> = None;
    for flat in 0..catalog.action_count() {
        let action = catalog.decode(flat)?;
        if belief.mask[action.subsystem] {
            continue;
        }
        let povm = catalog.povm(action.povm_idx)?;
        let s = score(belief, action, povm)?;
        if s > best_score {
            best_score = s;
            best = Some((action, povm));
        }
    }
    let (action, povm) = best.expect("at least one subsystem open");
    let marginals = outcome_marginals(ensemble, belief, action.subsystem, povm);
    let mut children = Vec::with_capacity(marginals.len());
    for (d, &pr) in marginals.iter().enumerate() {
        if pr <= PRUNE_TOL {
            children.push(None);
            continue;
        }
        let next = posterior_update(ensemble, belief, action.subsystem, povm, d)?;
        children.push(build_by_score(ensemble, catalog, &next, score)?);
    }
    Ok(Some(Box::new(PolicyNode { action, children })))
}

/// The locally-greedy baseline: each round measures whichever (POVM,
/// subsystem) maximizes the immediate single-subsystem success probability
/// under the current posterior.
pub fn locally_greedy(ensemble: &Ensemble, catalog: &ActionCatalog) -> Result<AdaptivePolicy> {
    check_compatible(ensemble, catalog)?;
    let belief = BeliefState::initial(ensemble);
    let root = build_by_score(ensemble, catalog, &belief, &|b: &BeliefState, a: Action, p: &Povm| {
        Ok(immediate_success(ensemble, b, a.subsystem, p))
    })?;
    let mut policy = AdaptivePolicy::from_root(catalog.clone(), root);
    policy.value = evaluate_policy(ensemble, &policy)?;
    Ok(policy)
}

/// The min-entropy (SDP-based) baseline: each round measures whichever action
/// maximizes the outcome-weighted optimal collective success probability of
/// the still-unmeasured subsystems, Σ_d Pr(d)·P_coll(rest | posterior_d) —
/// equivalently, minimizes the expected min-entropy of the remainder. Each
/// candidate at a round with k open subsystems costs one 2^{k−1}-dimensional
/// solve per outcome, so keep n ≤ 5 at desk scale.
pub fn minentropy_local(ensemble: &Ensemble, catalog: &ActionCatalog) -> Result<AdaptivePolicy> {
    check_compatible(ensemble, catalog)?;
    let belief = BeliefState::initial(ensemble);
    let score = |b: &BeliefState, a: Action, p: &Povm| -> Result<f64> {
        let rest: Vec<usize> =
            unmeasured(&b.mask).into_iter().filter(|&k| k != a.subsystem).collect();
        let joints = ensemble.joint_densities(&rest)?;
        let marginals = outcome_marginals(ensemble, b, a.subsystem, p);
        let mut expected = 0.0;
        for (d, &pr) in marginals.iter().enumerate() {
            if pr <= PRUNE_TOL {
                continue;
            }
            let next = posterior_update(ensemble, b, a.subsystem, p, d)?;
            expected += pr * optimal_success(&joints, &next.posterior)?;
        }
        Ok(expected)
    };
    let root = build_by_score(ensemble, catalog, &belief, &score)?;
    let mut policy = AdaptivePolicy::from_root(catalog.clone(), root);
    policy.value = evaluate_policy(ensemble, &policy)?;
    Ok(policy)
}

// ---------------------------------------------------------------------------
// Trine analytics
// ---------------------------------------------------------------------------

fn trine_angle(j: usize) -> f64 {
    // j mod 3 keeps U³ = I exact: state 3 is built from angle 0, not 2π.
    2.0 * std::f64::consts::PI * ((j % 3) as f64) / 3.0
}

fn trine_qubit(j: usize) -> QubitDensity {
    QubitDensity::pure(trine_angle(j))
}

/// The symmetric trine of n-fold product states: hypothesis j (1-based) is
/// the n-fold copy of the projector onto the Bloch direction rotated by
/// 2πj/3, with uniform prior.
pub fn trine_ensemble(copies: usize) -> Result<Ensemble> {
    if copies == 0 {
        return Err(Error::invalid("copies", "need at least one qubit"));
    }
    let states =
        (1..=3).map(|j| ProductState::new(vec![trine_qubit(j); copies])).collect();
    Ensemble::new(states, vec![1.0 / 3.0; 3])
}

/// The diagonal-state product codebook of Sasaki et al.: all 2^n length-n
/// words over the letters ρ₁ = diag(0.85, 0.15) and ρ₂ = diag(0.15, 0.85)
/// with the product (uniform) prior. The letters commute, so the optimal
/// measurement is the computational product POVM: every strategy class — the
/// collective optimum, the local DP, and per-qubit greedy decoding — achieves
/// exactly 0.85^n, which makes this the standard zero-quantization-loss
/// benchmark for adaptive learners.
pub fn sasaki_ensemble(copies: usize) -> Result<Ensemble> {
    if copies == 0 || copies > 20 {
        return Err(Error::invalid("copies", "need 1 ≤ n ≤ 20 qubits"));
    }
    let letters = [QubitDensity::diagonal(0.85), QubitDensity::diagonal(0.15)];
    let count = 1usize << copies;
    let states = (0..count)
        .map(|word| {
            ProductState::new(
                (0..copies).map(|k| letters[(word >> k) & 1].clone()).collect(),
            )
        })
        .collect();
    Ensemble::new(states, vec![1.0 / count as f64; count])
}

/// The aligned trine POVM {⅔·ρ_j}: the optimal single-qubit measurement for
/// the uniform trine (it is also its pretty-good measurement), succeeding with
/// probability ⅔.
pub fn trine_povm() -> Povm {
    let effects = (1..=3).map(|j| trine_qubit(j).mat().scale(2.0 / 3.0)).collect();
    Povm::new(effects).expect("aligned trine sums to identity")
}

/// The anti-trine POVM: effect j is ⅔ times the projector orthogonal to trine
/// state j, so each outcome excludes one hypothesis and the posterior after
/// any outcome is a permutation of (½, ½, 0). The ⅔ factor normalizes the
/// effects to completeness.
pub fn anti_trine_povm() -> Povm {
    let effects = (1..=3)
        .map(|j| {
            let (s, c) = trine_angle(j).sin_cos();
            // Projector onto (−s, c); its off-diagonal is the exact negation
            // of the product s·c, which keeps Tr[E_j ρ_j] at round-off scale.
            SquareMat::two_by_two(s * s, -(s * c), -(s * c), c * c).scale(2.0 / 3.0)
        })
        .collect();
    Povm::new(effects).expect("anti-trine sums to identity")
}

/// Closed-form expected success of the two-round protocol that measures one
/// trine qubit with the binary POVM at angle θ and then measures the second
/// qubit optimally (two-element first round).
pub fn trine_two_element_curve(theta: f64) -> f64 {
    let sqrt3 = 3.0_f64.sqrt();
    let cos2 = (2.0 * theta).cos();
    let cs = theta.cos() * theta.sin();
    let radicand = 5.0 / 12.0 - cos2 / 6.0 - cs / sqrt3;
    1.0 / 3.0 - cos2 / 12.0 - cs / (2.0 * sqrt3) + 0.5 * radicand.max(0.0).sqrt()
}

/// Maximize the two-element curve over θ ∈ [0, π): coarse 1e-5 grid, then
/// golden-section refinement of the bracketing interval. Returns (θ*, value).
pub fn trine_two_element_max() -> (f64, f64) {
    let step = 1e-5;
    let count = (std::f64::consts::PI / step) as usize;
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..count {
        let v = trine_two_element_curve(i as f64 * step);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut lo = (best_i.saturating_sub(1)) as f64 * step;
    let mut hi = ((best_i + 1) as f64 * step).min(std::f64::consts::PI);
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = trine_two_element_curve(x1);
    let mut f2 = trine_two_element_curve(x2);
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = trine_two_element_curve(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = trine_two_element_curve(x1);
        }
    }
    let theta = 0.5 * (lo + hi);
    (theta, trine_two_element_curve(theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::DEFAULT_QUANTIZATION;
    use crate::collective::sdp_min_error;
    use rand::{Rng, SeedableRng};

    fn collective_value(ensemble: &Ensemble) -> f64 {
        let all: Vec<usize> = (0..ensemble.n()).collect();
        let joints = ensemble.joint_densities(&all).unwrap();
        sdp_min_error(&joints, ensemble.prior()).unwrap().success_probability
    }

    #[test]
    fn trine_overlaps_are_quarter() {
        let e = trine_ensemble(1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let overlap = e.factor(i, 0).mat().frob_dot(e.factor(j, 0).mat());
                let want = if i == j { 1.0 } else { 0.25 };
                assert!((overlap - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trine_third_state_is_ground_projector() {
        let e = trine_ensemble(2).unwrap();
        let rho3 = e.states()[2].factors[0].entries();
        assert_eq!(rho3, [[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn anti_trine_is_complete_and_orthogonal() {
        let povm = anti_trine_povm();
        let e = trine_ensemble(1).unwrap();
        let mut sum = SquareMat::zeros(2);
        for eff in povm.effects() {
            sum.add_scaled(eff, 1.0);
        }
        assert!(sum.sub(&SquareMat::identity(2)).max_abs_entry() < 1e-12);
        for j in 0..3 {
            let hit = povm.effects()[j].frob_dot(e.factor(j, 0).mat());
            assert!(hit.abs() < 1e-12, "effect {j} does not annihilate its state: {hit:e}");
        }
    }

    #[test]
    fn anti_trine_posterior_is_half_half_zero() {
        let e = trine_ensemble(2).unwrap();
        let belief = BeliefState::initial(&e);
        let povm = anti_trine_povm();
        for d in 0..3 {
            let next = posterior_update(&e, &belief, 0, &povm, d).unwrap();
            let mut sorted = next.posterior.clone();
            sorted.sort_by(f64::total_cmp);
            assert_eq!(sorted[0], 0.0, "excluded hypothesis must be an exact zero");
            assert!((sorted[1] - 0.5).abs() < 1e-12);
            assert!((sorted[2] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_endpoints_and_max() {
        assert!((trine_two_element_curve(0.0) - 0.5).abs() < 1e-15);
        let (_, max) = trine_two_element_max();
        let target = 0.5 + 3.0_f64.sqrt() / 4.0;
        assert!((max - target).abs() < 1e-6, "max {max} vs {target}");
        let mut grid_max = f64::NEG_INFINITY;
        let mut th = 0.0;
        while th < std::f64::consts::PI {
            grid_max = grid_max.max(trine_two_element_curve(th));
            th += 1e-4;
        }
        assert!(grid_max <= 0.93302);
    }

    #[test]
    fn empty_tree_value_is_single_qubit_optimum() {
        let e = trine_ensemble(1).unwrap();
        let policy = AdaptivePolicy::from_root(ActionCatalog::new(4, 1), None);
        let v = evaluate_policy(&e, &policy).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn anti_trine_first_round_hits_closed_form() {
        let e = trine_ensemble(2).unwrap();
        let q = DEFAULT_QUANTIZATION;
        let catalog =
            ActionCatalog::with_extras(q, 2, vec![anti_trine_povm()]).unwrap();
        let root = PolicyNode {
            action: Action { povm_idx: q, subsystem: 0 },
            children: vec![None, None, None],
        };
        let policy = AdaptivePolicy::from_root(catalog, Some(Box::new(root)));
        let v = evaluate_policy(&e, &policy).unwrap();
        let target = 0.5 + 3.0_f64.sqrt() / 4.0;
        assert!((v - target).abs() < 1e-9, "{v} vs {target}");
    }

    #[test]
    fn orthogonal_factors_discriminate_perfectly() {
        let zero = QubitDensity::pure(std::f64::consts::FRAC_PI_2); // (sin, cos) convention below
        // Build |0⟩ vs |1⟩ per factor directly to keep it exact.
        let up = QubitDensity::new([[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let down = QubitDensity::new([[0.0, 0.0], [0.0, 1.0]]).unwrap();
        let _ = zero;
        let e = Ensemble::new(
            vec![ProductState::new(vec![up; 2]), ProductState::new(vec![down; 2])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let catalog = ActionCatalog::new(DEFAULT_QUANTIZATION, 2);
        let greedy = locally_greedy(&e, &catalog).unwrap();
        assert!((greedy.value() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_on_trine_pair_is_point_eight() {
        let e = trine_ensemble(2).unwrap();
        let catalog = ActionCatalog::with_extras(
            DEFAULT_QUANTIZATION,
            2,
            vec![anti_trine_povm(), trine_povm()],
        )
        .unwrap();
        let greedy = locally_greedy(&e, &catalog).unwrap();
        assert!((greedy.value() - 0.8).abs() < 1e-9, "greedy {}", greedy.value());
    }

    #[test]
    fn dp_on_trine_pair_prefers_anti_trine_and_stays_local() {
        let e = trine_ensemble(2).unwrap();
        let catalog =
            ActionCatalog::with_extras(60, 2, vec![anti_trine_povm(), trine_povm()]).unwrap();
        let dp = dp_optimal_local(&e, &catalog).unwrap();
        assert!(dp.value() >= 0.9329 && dp.value() <= 0.9331, "dp {}", dp.value());
        let coll = (3.0 + 2.0 * 2.0_f64.sqrt()) / 6.0;
        assert!(dp.value() < coll - 0.03, "local {} vs collective {}", dp.value(), coll);
        // The optimal first move is the 3-outcome anti-trine (extra index 60).
        assert_eq!(dp.root().unwrap().action.povm_idx, 60);
        assert_eq!(dp.uniform_decision_depth(), Some(1));
    }

    #[test]
    fn sasaki_dp_matches_powers() {
        for n in 1..=3usize {
            let e = sasaki_ensemble(n).unwrap();
            let catalog = ActionCatalog::new(DEFAULT_QUANTIZATION, n);
            let dp = dp_optimal_local(&e, &catalog).unwrap();
            let want = 0.85_f64.powi(n as i32);
            assert!((dp.value() - want).abs() < 1e-9, "n={n}: {} vs {want}", dp.value());
            if n > 1 {
                assert_eq!(dp.uniform_decision_depth(), Some(n - 1));
            }
        }
    }

    #[test]
    fn dp_beats_every_single_node_policy_exhaustively() {
        // n=2, Q=4, m=2: the whole policy space is one root action (the final
        // round is forced), so enumeration is exact.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(11);
        for _ in 0..3 {
            let states: Vec<ProductState> = (0..2)
                .map(|_| {
                    ProductState::new(
                        (0..2)
                            .map(|_| QubitDensity::pure(rng.gen_range(0.0..std::f64::consts::PI)))
                            .collect(),
                    )
                })
                .collect();
            let q0 = rng.gen_range(0.2..0.8);
            let e = Ensemble::new(states, vec![q0, 1.0 - q0]).unwrap();
            let catalog = ActionCatalog::new(4, 2);
            let dp = dp_optimal_local(&e, &catalog).unwrap();
            let mut brute_best = f64::NEG_INFINITY;
            for flat in 0..catalog.action_count() {
                let action = catalog.decode(flat).unwrap();
                let node = PolicyNode { action, children: vec![None, None] };
                let policy =
                    AdaptivePolicy::from_root(catalog.clone(), Some(Box::new(node)));
                brute_best = brute_best.max(evaluate_policy(&e, &policy).unwrap());
            }
            assert!((dp.value() - brute_best).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_pure_symmetric_copies_greedy_equals_dp() {
        // Greedy is optimal for two pure product states when the per-round
        // optimal measurement exists in the catalog. Hypotheses mirrored about
        // π/4 make every objective symmetric with its peak at the computational
        // member (ℓ = Q), so greedy and DP build the identical tree and agree
        // to round-off, not merely to quantization scale.
        for delta in [0.3, 0.55] {
            let e = Ensemble::new(
                vec![
                    ProductState::new(vec![
                        QubitDensity::pure(std::f64::consts::FRAC_PI_4 + delta);
                        2
                    ]),
                    ProductState::new(vec![
                        QubitDensity::pure(std::f64::consts::FRAC_PI_4 - delta);
                        2
                    ]),
                ],
                vec![0.5, 0.5],
            )
            .unwrap();
            let catalog = ActionCatalog::new(DEFAULT_QUANTIZATION, 2);
            let dp = dp_optimal_local(&e, &catalog).unwrap();
            let greedy = locally_greedy(&e, &catalog).unwrap();
            assert!(
                (dp.value() - greedy.value()).abs() < 1e-9,
                "delta {delta}: dp {} greedy {}",
                dp.value(),
                greedy.value()
            );
            assert!(dp.value() < 1.0 - 1e-3, "instance should not be trivial");
        }
    }

    #[test]
    fn binary_pure_products_dominance_and_quantization_gap() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(23);
        for trial in 0..3 {
            let states: Vec<ProductState> = (0..2)
                .map(|_| {
                    ProductState::new(
                        (0..3)
                            .map(|_| QubitDensity::pure(rng.gen_range(0.0..std::f64::consts::PI)))
                            .collect(),
                    )
                })
                .collect();
            let e = Ensemble::uniform(states).unwrap();
            let catalog = ActionCatalog::new(DEFAULT_QUANTIZATION, 3);
            let dp = dp_optimal_local(&e, &catalog).unwrap();
            let greedy = locally_greedy(&e, &catalog).unwrap();
            let mine = minentropy_local(&e, &catalog).unwrap();
            // At finite Q the greedy and min-entropy choices can lag the DP
            // optimum by quantization skew, but no further.
            assert!((dp.value() - greedy.value()).abs() < 1e-3, "trial {trial}");
            assert!((mine.value() - greedy.value()).abs() < 1e-3);
            // Dominance chain and the collective ceiling.
            let coll = collective_value(&e);
            let mode = e.prior().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(dp.value() >= greedy.value() - 1e-12);
            assert!(dp.value() >= mine.value() - 1e-12);
            assert!(greedy.value() >= mode - 1e-12);
            assert!(dp.value() <= coll + 1e-9);
            // Quantization gap bound from the acceptance contract.
            assert!(coll - dp.value() <= 0.006);
        }
    }

    #[test]
    fn minentropy_matches_dp_on_identical_copies() {
        // Typical m=n=3 identical-copy instances: for n=3 every sub-root
        // decision of the min-entropy heuristic is already DP-optimal, so any
        // gap lives in the root action and is usually tiny (often exactly 0).
        use rand::{Rng, SeedableRng};
        let catalog = ActionCatalog::new(DEFAULT_QUANTIZATION, 3);
        for seed in [0u64, 2] {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            let states: Vec<ProductState> = (0..3)
                .map(|_| {
                    let a = rng.gen_range(0.0..core::f64::consts::PI);
                    ProductState::new(vec![QubitDensity::pure(a); 3])
                })
                .collect();
            let e = Ensemble::new(states, vec![1.0 / 3.0; 3]).unwrap();
            let dp = dp_optimal_local(&e, &catalog).unwrap();
            let mine = minentropy_local(&e, &catalog).unwrap();
            assert!(
                (dp.value() - mine.value()).abs() < 2e-3,
                "seed {} dp {} minentropy {}",
                seed,
                dp.value(),
                mine.value()
            );
            assert!(dp.value() >= mine.value() - 1e-12, "minentropy is a feasible policy");
        }
    }

    #[test]
    fn minentropy_stays_feasible_on_an_adversarial_instance() {
        // Root-action divergence can cost ~1e-2 on unlucky geometries (the
        // heuristic is greedy-in-expectation, not optimal). Dominance must
        // still hold: the tree is a feasible local policy.
        let e = Ensemble::new(
            vec![
                ProductState::new(vec![QubitDensity::pure(0.4); 3]),
                ProductState::new(vec![QubitDensity::pure(1.5); 3]),
                ProductState::new(vec![QubitDensity::pure(2.3); 3]),
            ],
            vec![1.0 / 3.0; 3],
        )
        .unwrap();
        let catalog = ActionCatalog::new(DEFAULT_QUANTIZATION, 3);
        let dp = dp_optimal_local(&e, &catalog).unwrap();
        let mine = minentropy_local(&e, &catalog).unwrap();
        assert!(dp.value() >= mine.value() - 1e-12, "minentropy is a feasible policy");
        assert!(mine.value() > 0.9, "heuristic still lands close: {}", mine.value());
        assert!(dp.value() - mine.value() < 0.03, "gap stays moderate: {}", dp.value());
    }

    #[test]
    fn minentropy_root_matches_dp_at_single_decision() {
        // With n=2 both algorithms optimize the identical one-round objective,
        // including the tie-break, so the chosen root action must agree.
        let e = Ensemble::new(
            vec![
                ProductState::new(vec![QubitDensity::pure(0.3), QubitDensity::pure(0.9)]),
                ProductState::new(vec![QubitDensity::pure(2.0), QubitDensity::pure(2.6)]),
            ],
            vec![0.4, 0.6],
        )
        .unwrap();
        let catalog = ActionCatalog::new(8, 2);
        let dp = dp_optimal_local(&e, &catalog).unwrap();
        let mine = minentropy_local(&e, &catalog).unwrap();
        let da = dp.root().unwrap().action;
        let ma = mine.root().unwrap().action;
        assert_eq!(catalog.encode(da), catalog.encode(ma));
    }

    #[test]
    fn policy_gap_is_reported() {
        let e = Ensemble::new(
            vec![
                ProductState::new(vec![QubitDensity::pure(0.2); 3]),
                ProductState::new(vec![QubitDensity::pure(1.3); 3]),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let catalog = ActionCatalog::new(4, 3);
        // Root only; the second decision level is missing.
        let root = PolicyNode {
            action: Action { povm_idx: 0, subsystem: 0 },
            children: vec![None, None],
        };
        let policy = AdaptivePolicy::from_root(catalog, Some(Box::new(root)));
        match evaluate_policy(&e, &policy) {
            Err(Error::PolicyGap { mask }) => assert_eq!(mask, vec![true, false, false]),
            other => panic!("expected PolicyGap, got {other:?}"),
        }
    }
}
