//! Qubit density-matrix algebra: states, ensembles, POVMs, Born-rule
//! probabilities and Bayesian posterior updates.
//!
//! All states are real-valued 2×2 density matrices (one qubit per subsystem);
//! the candidate hypotheses are tensor products of such factors. Collective
//! operators live on the 2^k-dimensional joint space.

use crate::error::{Error, Result};
use crate::mat::SquareMat;

const STATE_PSD_TOL: f64 = -1e-12;
const EFFECT_PSD_TOL: f64 = -1e-10;

/// One qubit factor of one hypothesis: real symmetric, PSD, trace 1.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitDensity {
    mat: SquareMat,
}

impl QubitDensity {
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        let m = SquareMat::two_by_two(entries[0][0], entries[0][1], entries[1][0], entries[1][1]);
        if (entries[0][1] - entries[1][0]).abs() > 1e-12 {
            return Err(Error::invalid("qubit density", "not symmetric"));
        }
        if (m.trace() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("qubit density", format!("trace {} != 1", m.trace())));
        }
        if m.min_eigenvalue() < STATE_PSD_TOL {
            return Err(Error::invalid(
                "qubit density",
                format!("negative eigenvalue {}", m.min_eigenvalue()),
            ));
        }
        Ok(QubitDensity { mat: m })
    }

    /// Pure state (cos φ, sin φ).
    pub fn pure(phi: f64) -> Self {
        let (s, c) = phi.sin_cos();
        QubitDensity { mat: SquareMat::projector(&[c, s]) }
    }

    /// Pure state along an explicit real direction.
    pub fn pure_direction(x: f64, y: f64) -> Self {
        QubitDensity { mat: SquareMat::projector(&[x, y]) }
    }

    pub fn diagonal(p: f64) -> Self {
        QubitDensity { mat: SquareMat::two_by_two(p, 0.0, 0.0, 1.0 - p) }
    }

    pub fn maximally_mixed() -> Self {
        Self::diagonal(0.5)
    }

    /// ρ ← (1−p)ρ + p·I/2.
    pub fn depolarize(&self, p: f64) -> Self {
        let mut m = self.mat.scale(1.0 - p);
        m.add_scaled(&SquareMat::identity(2), 0.5 * p);
        QubitDensity { mat: m }
    }

    pub fn mat(&self) -> &SquareMat {
        &self.mat
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        [[self.mat.get(0, 0), self.mat.get(0, 1)], [self.mat.get(1, 0), self.mat.get(1, 1)]]
    }
}

/// One hypothesis: an ordered tensor product of qubit factors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    pub factors: Vec<QubitDensity>,
}

impl ProductState {
    pub fn new(factors: Vec<QubitDensity>) -> Self {
        ProductState { factors }
    }

    pub fn n(&self) -> usize {
        self.factors.len()
    }
}

/// The discrimination instance: m product-state hypotheses with priors.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    states: Vec<ProductState>,
    prior: Vec<f64>,
}

impl Ensemble {
    pub fn new(states: Vec<ProductState>, prior: Vec<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::invalid("ensemble", "no hypotheses"));
        }
        if states.len() != prior.len() {
            return Err(Error::Dimension(format!(
                "{} states but {} prior entries",
                states.len(),
                prior.len()
            )));
        }
        let n = states[0].n();
        if n == 0 || states.iter().any(|s| s.n() != n) {
            return Err(Error::invalid("ensemble", "states must share the same positive n"));
        }
        if prior.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid("ensemble", "negative prior entry"));
        }
        let sum: f64 = prior.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("ensemble", format!("prior sums to {sum}")));
        }
        Ok(Ensemble { states, prior })
    }

    pub fn uniform(states: Vec<ProductState>) -> Result<Self> {
        let m = states.len();
        Self::new(states, vec![1.0 / m as f64; m])
    }

    pub fn m(&self) -> usize {
        self.states.len()
    }

    pub fn n(&self) -> usize {
        self.states[0].n()
    }

    pub fn states(&self) -> &[ProductState] {
        &self.states
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn factor(&self, hypothesis: usize, subsystem: usize) -> &QubitDensity {
        &self.states[hypothesis].factors[subsystem]
    }

    /// Joint density of each hypothesis over the given subsystems.
    pub fn joint_densities(&self, subset: &[usize]) -> Result<Vec<SquareMat>> {
        self.states.iter().map(|s| joint_density(s, subset)).collect()
    }
}

/// A measurement: PSD effects summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<SquareMat>,
}

impl Povm {
    pub fn new(effects: Vec<SquareMat>) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::invalid("povm", "no effects"));
        }
        let d = effects[0].dim();
        let mut sum = SquareMat::zeros(d);
        for e in &effects {
            if e.dim() != d {
                return Err(Error::Dimension("effect dimensions differ".into()));
            }
            if !e.is_symmetric(1e-10) {
                return Err(Error::invalid("povm", "effect not symmetric"));
            }
            if e.min_eigenvalue() < EFFECT_PSD_TOL {
                return Err(Error::invalid(
                    "povm",
                    format!("effect eigenvalue {}", e.min_eigenvalue()),
                ));
            }
            sum.add_scaled(e, 1.0);
        }
        let dev = sum.sub(&SquareMat::identity(d)).max_abs_entry();
        if dev > 1e-10 {
            return Err(Error::invalid("povm", format!("effects sum off identity by {dev:.3e}")));
        }
        Ok(Povm { effects })
    }

    pub fn effects(&self) -> &[SquareMat] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }
}

/// The adaptive-measurement state: which subsystems are spent, and the
/// posterior over hypotheses given all outcomes so far.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    pub mask: Vec<bool>,
    pub posterior: Vec<f64>,
}

impl BeliefState {
    pub fn initial(ensemble: &Ensemble) -> Self {
        BeliefState { mask: vec![false; ensemble.n()], posterior: ensemble.prior().to_vec() }
    }

    pub fn measured_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Born rule: Tr[E_i ρ] for each effect.
pub fn born_probabilities(state: &QubitDensity, povm: &Povm) -> Result<Vec<f64>> {
    if povm.dim() != 2 {
        return Err(Error::Dimension(format!("{}-dim POVM against a qubit", povm.dim())));
    }
    Ok(povm.effects().iter().map(|e| e.frob_dot(state.mat())).collect())
}

/// Bayes update after measuring `subsystem` with `povm` and seeing `outcome`:
/// p'_j ∝ p_j · Tr[E_d ρ_j^{(k)}]. The subsystem is marked measured.
pub fn posterior_update(
    ensemble: &Ensemble,
    belief: &BeliefState,
    subsystem: usize,
    povm: &Povm,
    outcome: usize,
) -> Result<BeliefState> {
    if subsystem >= ensemble.n() {
        return Err(Error::Index { index: subsystem, limit: ensemble.n() });
    }
    if outcome >= povm.len() {
        return Err(Error::Index { index: outcome, limit: povm.len() });
    }
    debug_assert!(!belief.mask[subsystem], "subsystem measured twice");
    let effect = &povm.effects()[outcome];
    let mut post: Vec<f64> = (0..ensemble.m())
        .map(|j| belief.posterior[j] * effect.frob_dot(ensemble.factor(j, subsystem).mat()))
        .collect();
    // Numerators are products of probabilities, so a clean entry is ≥ 0 and an
    // entry within ~1e-14 of the peak's scale is round-off where the algebra
    // gives an exact zero (e.g. an effect constructed orthogonal to one
    // hypothesis). Flush those so downstream dispatch sees the hypothesis as
    // excluded rather than carrying ~1e-17 ghosts through the tree.
    let peak = post.iter().cloned().fold(0.0f64, f64::max);
    for p in &mut post {
        if *p < 1e-14 * peak {
            debug_assert!(*p > -1e-12 * peak.max(1e-300));
            *p = 0.0;
        }
    }
    let norm: f64 = post.iter().sum();
    if norm <= 0.0 {
        return Err(Error::ImpossibleOutcome { outcome });
    }
    for p in &mut post {
        *p /= norm;
    }
    let mut mask = belief.mask.clone();
    mask[subsystem] = true;
    Ok(BeliefState { mask, posterior: post })
}

/// Marginal outcome distribution Σ_j p_j·Tr[E_d ρ_j^{(k)}].
pub fn outcome_marginals(
    ensemble: &Ensemble,
    belief: &BeliefState,
    subsystem: usize,
    povm: &Povm,
) -> Vec<f64> {
    povm.effects()
        .iter()
        .map(|e| {
            (0..ensemble.m())
                .map(|j| belief.posterior[j] * e.frob_dot(ensemble.factor(j, subsystem).mat()))
                .sum()
        })
        .collect()
}

/// Kronecker product of the selected factors in ascending index order.
pub fn joint_density(state: &ProductState, subset: &[usize]) -> Result<SquareMat> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut idx = subset.to_vec();
    idx.sort_unstable();
    for w in idx.windows(2) {
        if w[0] == w[1] {
            return Err(Error::invalid("subset", "duplicate subsystem index"));
        }
    }
    if *idx.last().unwrap() >= state.n() {
        return Err(Error::Index { index: *idx.last().unwrap(), limit: state.n() });
    }
    let mut out = state.factors[idx[0]].mat().clone();
    for &k in &idx[1..] {
        out = out.kron(state.factors[k].mat());
    }
    Ok(out)
}

/// Sum of absolute eigenvalues of a symmetric matrix.
pub fn trace_norm(matrix: &SquareMat) -> f64 {
    assert!(
        matrix.is_symmetric(1e-9 * (1.0 + matrix.max_abs_entry())),
        "trace_norm expects a symmetric matrix"
    );
    matrix.sym_eig().0.iter().map(|l| l.abs()).sum()
}

/// Largest singular value of a general real matrix.
pub fn operator_norm(matrix: &SquareMat) -> f64 {
    let gram = matrix.transpose().matmul(matrix);
    gram.symmetrize().max_eigenvalue().max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::computational_povm;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn born_diagonal_case() {
        let rho = QubitDensity::diagonal(0.85);
        let p = born_probabilities(&rho, &computational_povm()).unwrap();
        assert_close(p[0], 0.85, 1e-15);
        assert_close(p[1], 0.15, 1e-15);
    }

    #[test]
    fn born_completeness_single_effect() {
        let rho = QubitDensity::pure(0.3);
        let povm = Povm::new(vec![SquareMat::identity(2)]).unwrap();
        let p = born_probabilities(&rho, &povm).unwrap();
        assert_eq!(p.len(), 1);
        assert_close(p[0], 1.0, 1e-14);
    }

    #[test]
    fn born_matches_brute_force_product() {
        // Oracle: Tr[Eρ] via explicit matrix product, independent of frob_dot.
        let phi: f64 = 0.4217;
        let rho = QubitDensity::pure(phi);
        let set = crate::action::build_action_set(20, 1).0;
        for povm in set.povms() {
            let fast = born_probabilities(&rho, povm).unwrap();
            for (e, got) in povm.effects().iter().zip(&fast) {
                let prod = e.matmul(rho.mat());
                assert_close(*got, prod.trace(), 1e-14);
            }
            assert_close(fast.iter().sum::<f64>(), 1.0, 1e-12);
        }
    }

    #[test]
    fn posterior_orthogonal_states() {
        let e = Ensemble::uniform(vec![
            ProductState::new(vec![QubitDensity::diagonal(1.0)]),
            ProductState::new(vec![QubitDensity::diagonal(0.0)]),
        ])
        .unwrap();
        let b = BeliefState::initial(&e);
        let b2 = posterior_update(&e, &b, 0, &computational_povm(), 0).unwrap();
        assert_eq!(b2.posterior, vec![1.0, 0.0]);
        assert_eq!(b2.mask, vec![true]);
    }

    #[test]
    fn posterior_non_informative() {
        let e = Ensemble::uniform(vec![
            ProductState::new(vec![QubitDensity::pure(0.2)]),
            ProductState::new(vec![QubitDensity::pure(1.1)]),
        ])
        .unwrap();
        let half = SquareMat::identity(2).scale(0.5);
        let povm = Povm::new(vec![half.clone(), half]).unwrap();
        let b = BeliefState::initial(&e);
        for outcome in 0..2 {
            let b2 = posterior_update(&e, &b, 0, &povm, outcome).unwrap();
            assert_close(b2.posterior[0], 0.5, 1e-15);
            assert_close(b2.posterior[1], 0.5, 1e-15);
        }
    }

    #[test]
    fn posterior_impossible_outcome() {
        let e = Ensemble::uniform(vec![
            ProductState::new(vec![QubitDensity::diagonal(1.0)]),
            ProductState::new(vec![QubitDensity::diagonal(1.0)]),
        ])
        .unwrap();
        let b = BeliefState::initial(&e);
        let err = posterior_update(&e, &b, 0, &computational_povm(), 1).unwrap_err();
        assert!(matches!(err, Error::ImpossibleOutcome { outcome: 1 }));
    }

    #[test]
    fn joint_single_index_is_identity_map() {
        let s = ProductState::new(vec![QubitDensity::pure(0.9), QubitDensity::diagonal(0.3)]);
        let j = joint_density(&s, &[1]).unwrap();
        assert_eq!(&j, s.factors[1].mat());
    }

    #[test]
    fn joint_diagonal_kron() {
        let s = ProductState::new(vec![QubitDensity::diagonal(0.8), QubitDensity::diagonal(0.6)]);
        let j = joint_density(&s, &[0, 1]).unwrap();
        let expect = [0.48, 0.32, 0.12, 0.08];
        for (i, e) in expect.iter().enumerate() {
            assert_close(j.get(i, i), *e, 1e-15);
        }
        assert_close(j.trace(), 1.0, 1e-12);
    }

    #[test]
    fn joint_pure_kron_matches_outer_product() {
        // Oracle: build the joint pure state vector first, then its projector.
        let phi = 2.0 * std::f64::consts::PI / 3.0;
        let f = QubitDensity::pure(phi);
        let s = ProductState::new(vec![f.clone(), f]);
        let j = joint_density(&s, &[0, 1]).unwrap();
        let v1 = [phi.cos(), phi.sin()];
        let mut v = [0.0; 4];
        for a in 0..2 {
            for b in 0..2 {
                v[2 * a + b] = v1[a] * v1[b];
            }
        }
        let oracle = SquareMat::projector(&v);
        assert!(j.sub(&oracle).max_abs_entry() < 1e-14);
    }

    #[test]
    fn joint_rejects_empty_and_duplicates() {
        let s = ProductState::new(vec![QubitDensity::maximally_mixed(); 2]);
        assert!(matches!(joint_density(&s, &[]), Err(Error::EmptySubset)));
        assert!(joint_density(&s, &[0, 0]).is_err());
        assert!(joint_density(&s, &[2]).is_err());
    }

    #[test]
    fn trace_norm_cases() {
        let m = SquareMat::two_by_two(0.3, 0.0, 0.0, -0.3);
        assert_close(trace_norm(&m), 0.6, 1e-15);
        let rho = QubitDensity::pure(1.3);
        assert_close(trace_norm(rho.mat()), 1.0, 1e-14);
    }

    #[test]
    fn trace_norm_orthogonal_difference() {
        // Oracle: eigendecomposition of q1ρ1 − q2ρ2 for orthogonal pure states
        // gives eigenvalues ±1/2, so the trace norm must be 1.
        let r1 = QubitDensity::pure(0.25);
        let r2 = QubitDensity::pure(0.25 + std::f64::consts::FRAC_PI_2);
        let diff = r1.mat().scale(0.5).sub(&r2.mat().scale(0.5));
        let (vals, _) = diff.sym_eig();
        assert_close(vals[0], -0.5, 1e-14);
        assert_close(vals[1], 0.5, 1e-14);
        assert_close(trace_norm(&diff), 1.0, 1e-14);
    }

    #[test]
    fn operator_norm_cases() {
        assert_close(operator_norm(&SquareMat::identity(3)), 1.0, 1e-14);
        let m = SquareMat::two_by_two(2.0, 0.0, 0.0, -3.0);
        assert_close(operator_norm(&m), 3.0, 1e-14);
    }

    #[test]
    fn operator_norm_rotation_gap() {
        // ‖U(θ)−I‖∞ = √2·√(1−cos θ) ≤ |θ|
        let theta: f64 = 0.1;
        let u = SquareMat::two_by_two(theta.cos(), theta.sin(), -theta.sin(), theta.cos());
        let gap = operator_norm(&u.sub(&SquareMat::identity(2)));
        let analytic = (2.0 * (1.0 - theta.cos())).sqrt();
        assert_close(gap, analytic, 1e-12);
        assert!(gap <= theta);
        assert_close(gap, 0.0999583, 1e-6);
    }

    #[test]
    fn ensemble_validation() {
        let good = ProductState::new(vec![QubitDensity::maximally_mixed()]);
        assert!(Ensemble::new(vec![good.clone()], vec![0.5]).is_err()); // prior sum
        assert!(Ensemble::new(vec![good.clone(), good.clone()], vec![0.5]).is_err()); // length
        let other_n = ProductState::new(vec![QubitDensity::maximally_mixed(); 2]);
        assert!(Ensemble::new(vec![good, other_n], vec![0.5, 0.5]).is_err()); // mixed n
        assert!(QubitDensity::new([[0.6, 0.2], [0.3, 0.4]]).is_err()); // asymmetric
        assert!(QubitDensity::new([[1.2, 0.0], [0.0, -0.2]]).is_err()); // not PSD
    }
}
