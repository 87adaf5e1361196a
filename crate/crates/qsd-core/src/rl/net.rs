//! Policy/value network: two parallel multilayer perceptrons over the shared
//! observation (mask ++ posterior), each with two tanh hidden layers — one
//! ending in n·Q action logits, the other in a scalar value. Parameters live
//! in plain `Vec<f64>`s with hand-written backprop; the flat parameter order
//! is policy (w1,b1,w2,b2,w3,b3) then value (same order), rows major.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
struct Mlp {
    in_width: usize,
    hidden: usize,
    out_width: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
    w3: Vec<f64>,
    b3: Vec<f64>,
}

/// Post-activation values cached by a forward pass, enough to backpropagate.
#[derive(Clone, Debug)]
pub(crate) struct MlpCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    pub(crate) out: Vec<f64>,
}

fn xavier<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl Mlp {
    fn new<R: Rng>(in_width: usize, hidden: usize, out_width: usize, rng: &mut R) -> Self {
        Mlp {
            in_width,
            hidden,
            out_width,
            w1: xavier(hidden, in_width, rng),
            b1: vec![0.0; hidden],
            w2: xavier(hidden, hidden, rng),
            b2: vec![0.0; hidden],
            w3: xavier(out_width, hidden, rng),
            b3: vec![0.0; out_width],
        }
    }

    fn param_count(&self) -> usize {
        self.hidden * self.in_width
            + self.hidden
            + self.hidden * self.hidden
            + self.hidden
            + self.out_width * self.hidden
            + self.out_width
    }

    fn forward(&self, x: &[f64]) -> MlpCache {
        debug_assert_eq!(x.len(), self.in_width);
        let mut a1 = vec![0.0; self.hidden];
        for (r, a) in a1.iter_mut().enumerate() {
            let row = &self.w1[r * self.in_width..(r + 1) * self.in_width];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[r];
            *a = z.tanh();
        }
        let mut a2 = vec![0.0; self.hidden];
        for (r, a) in a2.iter_mut().enumerate() {
            let row = &self.w2[r * self.hidden..(r + 1) * self.hidden];
            let z: f64 = row.iter().zip(&a1).map(|(w, v)| w * v).sum::<f64>() + self.b2[r];
            *a = z.tanh();
        }
        let mut out = vec![0.0; self.out_width];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.w3[r * self.hidden..(r + 1) * self.hidden];
            *o = row.iter().zip(&a2).map(|(w, v)| w * v).sum::<f64>() + self.b3[r];
        }
        MlpCache { x: x.to_vec(), a1, a2, out }
    }

    /// Accumulate ∂out·dout/∂θ into `grad` (laid out like this subnet's
    /// parameter segment).
    fn backward(&self, cache: &MlpCache, dout: &[f64], grad: &mut [f64]) {
        let (h, iw, ow) = (self.hidden, self.in_width, self.out_width);
        let (gw1, rest) = grad.split_at_mut(h * iw);
        let (gb1, rest) = rest.split_at_mut(h);
        let (gw2, rest) = rest.split_at_mut(h * h);
        let (gb2, rest) = rest.split_at_mut(h);
        let (gw3, gb3) = rest.split_at_mut(ow * h);

        let mut da2 = vec![0.0; h];
        for r in 0..ow {
            let d = dout[r];
            if d == 0.0 {
                continue;
            }
            let row = &self.w3[r * h..(r + 1) * h];
            for c in 0..h {
                gw3[r * h + c] += d * cache.a2[c];
                da2[c] += d * row[c];
            }
            gb3[r] += d;
        }
        let mut da1 = vec![0.0; h];
        for r in 0..h {
            let dz = da2[r] * (1.0 - cache.a2[r] * cache.a2[r]);
            if dz == 0.0 {
                continue;
            }
            let row = &self.w2[r * h..(r + 1) * h];
            for c in 0..h {
                gw2[r * h + c] += dz * cache.a1[c];
                da1[c] += dz * row[c];
            }
            gb2[r] += dz;
        }
        for r in 0..h {
            let dz = da1[r] * (1.0 - cache.a1[r] * cache.a1[r]);
            if dz == 0.0 {
                continue;
            }
            for c in 0..iw {
                gw1[r * iw + c] += dz * cache.x[c];
            }
            gb1[r] += dz;
        }
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.extend_from_slice(&self.b2);
        out.extend_from_slice(&self.w3);
        out.extend_from_slice(&self.b3);
    }

    fn read_params(&mut self, mut src: &[f64]) {
        for field in [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ] {
            let (head, tail) = src.split_at(field.len());
            field.copy_from_slice(head);
            src = tail;
        }
        debug_assert!(src.is_empty());
    }
}

/// The agent's function approximator: policy and value subnets side by side
/// over the (mask ++ posterior) observation.
#[derive(Clone, Debug)]
pub struct PolicyValueNet {
    n: usize,
    m: usize,
    actions: usize,
    hidden: usize,
    policy: Mlp,
    value: Mlp,
}

/// Reference architecture: two hidden layers of 256 units each.
pub const DEFAULT_HIDDEN: usize = 256;

impl PolicyValueNet {
    /// Fresh Xavier-initialized net for an n-qubit, m-hypothesis problem with
    /// `actions` flat action logits. `hidden` is the per-layer width (256 in
    /// the reference setup; tests shrink it).
    pub fn new<R: Rng>(n: usize, m: usize, actions: usize, hidden: usize, rng: &mut R) -> Self {
        let input = n + m;
        PolicyValueNet {
            n,
            m,
            actions,
            hidden,
            policy: Mlp::new(input, hidden, actions, rng),
            value: Mlp::new(input, hidden, 1, rng),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden
    }

    pub fn input_width(&self) -> usize {
        self.n + self.m
    }

    pub fn param_count(&self) -> usize {
        self.policy.param_count() + self.value.param_count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.policy.write_params(&mut out);
        self.value.write_params(&mut out);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "{} parameters for a net with {}",
                params.len(),
                self.param_count()
            )));
        }
        let split = self.policy.param_count();
        self.policy.read_params(&params[..split]);
        self.value.read_params(&params[split..]);
        Ok(())
    }

    pub(crate) fn policy_forward(&self, obs: &[f64]) -> MlpCache {
        self.policy.forward(obs)
    }

    pub(crate) fn value_forward(&self, obs: &[f64]) -> MlpCache {
        self.value.forward(obs)
    }

    /// Action logits for an observation.
    pub fn logits(&self, obs: &[f64]) -> Vec<f64> {
        self.policy.forward(obs).out
    }

    /// Scalar state-value estimate.
    pub fn value_estimate(&self, obs: &[f64]) -> f64 {
        self.value.forward(obs).out[0]
    }

    /// Accumulate the policy subnet's parameter gradient of `dlogits·logits`
    /// into the matching segment of `grad` (flat, full-net layout).
    pub(crate) fn policy_backward(&self, cache: &MlpCache, dlogits: &[f64], grad: &mut [f64]) {
        self.policy.backward(cache, dlogits, &mut grad[..self.policy.param_count()]);
    }

    /// Accumulate the value subnet's gradient of `dvalue·V` into `grad`.
    pub(crate) fn value_backward(&self, cache: &MlpCache, dvalue: f64, grad: &mut [f64]) {
        let split = self.policy.param_count();
        self.value.backward(cache, &[dvalue], &mut grad[split..]);
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let peak = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - peak).exp()).collect();
    let norm: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / norm).collect()
}

/// log softmax, stable for large logit spreads.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let peak = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_norm: f64 = logits.iter().map(|&z| (z - peak).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - peak - log_norm).collect()
}
