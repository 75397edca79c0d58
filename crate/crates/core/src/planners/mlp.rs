//! Dense policy network over tape nodes and plain floats.
//!
//! The network is stored as one flat parameter vector (per layer: weights
//! row-major `[out][in]`, then biases), which is what the optimizer, the
//! serializer and the tape variable mapping all operate on. Inputs are
//! normalized as `(s - center) / scale` before the first layer; the head
//! squashes outputs into the domain's action range. The tape forward pass and
//! the numeric forward pass share [`dot_kernel`] and mirror each other
//! operation for operation, so their outputs agree bitwise; the staged
//! trainer depends on that.

use crate::autodiff::{dot_kernel, softplus, Graph, NodeId};
use crate::domains::{ActionHead, DomainSpec};
use crate::rng::CounterRng;

#[derive(Debug, Clone)]
pub struct PolicyParams {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub head: ActionHead,
    /// Input normalization offset, one entry per state dimension.
    pub input_center: Vec<f64>,
    /// Input normalization divisor.
    pub input_scale: f64,
    pub values: Vec<f64>,
}

impl PolicyParams {
    /// He-style uniform fan-in initialization, biases zero, with the domain's
    /// head and input normalization.
    pub fn init(domain: &DomainSpec, hidden: &[usize], seed: u64) -> Self {
        Self::init_raw(
            domain.state_dim(),
            domain.action_dim(),
            hidden,
            domain.action_head(),
            domain.policy_input_center(),
            domain.policy_input_scale(),
            seed,
        )
    }

    pub fn init_raw(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        head: ActionHead,
        input_center: Vec<f64>,
        input_scale: f64,
        seed: u64,
    ) -> Self {
        assert_eq!(input_center.len(), state_dim);
        assert!(input_scale > 0.0);
        let mut p = PolicyParams {
            state_dim,
            action_dim,
            hidden: hidden.to_vec(),
            head,
            input_center,
            input_scale,
            values: Vec::new(),
        };
        let mut rng = CounterRng::new(seed);
        for (fan_in, fan_out) in p.layer_dims() {
            let limit = (6.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                p.values.push((2.0 * rng.next_uniform() - 1.0) * limit);
            }
            p.values.extend(std::iter::repeat(0.0).take(fan_out));
        }
        p
    }

    /// `(fan_in, fan_out)` per layer, chaining state_dim through the hidden
    /// widths to action_dim.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.state_dim;
        for &h in &self.hidden {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.action_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    #[inline]
    fn apply_head(&self, z: f64) -> f64 {
        match self.head {
            ActionHead::TanhBound(b) => z.tanh() * b,
            // sigmoid written through tanh exactly as the tape composes it
            ActionHead::ScaledSigmoid(b) => ((z * 0.5).tanh() + 1.0) * (0.5 * b),
            ActionHead::ScaledSoftplus(c) => softplus(z) * c,
            ActionHead::Linear => z,
        }
    }

    /// Numeric forward pass; writes the post-head action into `out`.
    pub fn forward(&self, s: &[f64], x: &mut Vec<f64>, y: &mut Vec<f64>, out: &mut Vec<f64>) {
        debug_assert_eq!(s.len(), self.state_dim);
        let inv = 1.0 / self.input_scale;
        x.clear();
        for (k, &sk) in s.iter().enumerate() {
            x.push((sk - self.input_center[k]) * inv);
        }
        let dims = self.layer_dims();
        let last = dims.len() - 1;
        let mut off = 0;
        for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
            y.clear();
            for j in 0..fan_out {
                let row = &self.values[off + j * fan_in..off + (j + 1) * fan_in];
                let z = dot_kernel(x, row) + self.values[off + fan_in * fan_out + j];
                y.push(if l < last {
                    if z > 0.0 {
                        z
                    } else {
                        0.0
                    }
                } else {
                    z
                });
            }
            std::mem::swap(x, y);
            off += fan_in * fan_out + fan_out;
        }
        out.clear();
        out.extend(x.iter().map(|&z| self.apply_head(z)));
    }
}

/// The tape variables holding one copy of the flat parameter vector,
/// contiguous from `first`.
#[derive(Debug, Clone, Copy)]
pub struct GraphParams {
    pub first: NodeId,
    pub count: usize,
}

/// Declares the parameter vector as tape variables (one contiguous range).
pub fn declare_params(g: &mut Graph, p: &PolicyParams) -> GraphParams {
    let first = g.variable_range(&p.values);
    GraphParams { first, count: p.values.len() }
}

/// Tape forward pass mirroring [`PolicyParams::forward`]. The normalized
/// inputs are laid out as one contiguous node range so every layer can use
/// the fused dot node against its weight rows; the same holds for each relu
/// layer, whose nodes are emitted back to back.
pub fn forward_node(p: &PolicyParams, g: &mut Graph, gp: &GraphParams, s: &[NodeId]) -> Vec<NodeId> {
    debug_assert_eq!(s.len(), p.state_dim);
    let inv = 1.0 / p.input_scale;
    let centers: Vec<NodeId> = p.input_center.iter().map(|&c| g.constant(c)).collect();
    let diffs: Vec<NodeId> = s.iter().zip(&centers).map(|(&sk, &c)| g.sub(sk, c)).collect();
    let inv_node = g.constant(inv);
    let mut x_start = NodeId(g.len() as u32);
    let mut x_len = s.len();
    for &d in &diffs {
        g.mul(d, inv_node);
    }
    let dims = p.layer_dims();
    let last = dims.len() - 1;
    let mut off = 0usize;
    let mut zs: Vec<NodeId> = Vec::new();
    for (l, &(fan_in, fan_out)) in dims.iter().enumerate() {
        debug_assert_eq!(x_len, fan_in);
        zs.clear();
        for j in 0..fan_out {
            let row = NodeId(gp.first.0 + (off + j * fan_in) as u32);
            let d = g.dot(x_start, row, fan_in);
            let bias = NodeId(gp.first.0 + (off + fan_in * fan_out + j) as u32);
            zs.push(g.add(d, bias));
        }
        if l < last {
            let act_start = NodeId(g.len() as u32);
            for &z in zs.iter() {
                g.relu(z);
            }
            x_start = act_start;
            x_len = fan_out;
        } else {
            return zs
                .iter()
                .map(|&z| match p.head {
                    ActionHead::TanhBound(b) => {
                        let t = g.tanh(z);
                        g.scale(t, b)
                    }
                    ActionHead::ScaledSigmoid(b) => {
                        let half = g.scale(z, 0.5);
                        let t = g.tanh(half);
                        let shifted = g.add_const(t, 1.0);
                        g.scale(shifted, 0.5 * b)
                    }
                    ActionHead::ScaledSoftplus(c) => {
                        let sp = g.softplus(z);
                        g.scale(sp, c)
                    }
                    ActionHead::Linear => z,
                })
                .collect();
        }
        off += fan_in * fan_out + fan_out;
    }
    unreachable!("layer loop always returns at the output layer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn raw(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        head: ActionHead,
        seed: u64,
    ) -> PolicyParams {
        PolicyParams::init_raw(state_dim, action_dim, hidden, head, vec![0.0; state_dim], 1.0, seed)
    }

    #[test]
    fn zero_network_with_tanh_head_emits_zero_actions() {
        let mut p = raw(2, 2, &[8, 4], ActionHead::TanhBound(1.0), 3);
        for v in p.values.iter_mut() {
            *v = 0.0;
        }
        let (mut a, mut b, mut out) = (Vec::new(), Vec::new(), Vec::new());
        p.forward(&[5.0, -3.0], &mut a, &mut b, &mut out);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn tanh_head_respects_the_bound() {
        let p = raw(2, 2, &[16, 8], ActionHead::TanhBound(0.7), 11);
        let (mut a, mut b, mut out) = (Vec::new(), Vec::new(), Vec::new());
        for case in 0..10_000 {
            let key = rng::child(61, case);
            let s = [rng::normal(key, 0) * 20.0, rng::normal(key, 1) * 20.0];
            p.forward(&s, &mut a, &mut b, &mut out);
            for &v in &out {
                assert!(v.abs() <= 0.7, "{v}");
            }
        }
    }

    #[test]
    fn sigmoid_head_stays_inside_its_band() {
        let p = raw(2, 3, &[12], ActionHead::ScaledSigmoid(1.0), 13);
        let (mut a, mut b, mut out) = (Vec::new(), Vec::new(), Vec::new());
        for case in 0..5_000 {
            let key = rng::child(62, case);
            let s = [rng::normal(key, 0) * 30.0, rng::normal(key, 1) * 30.0];
            p.forward(&s, &mut a, &mut b, &mut out);
            for &v in &out {
                assert!((0.0..=1.0).contains(&v), "{v}");
            }
        }
    }

    #[test]
    fn single_identity_layer_with_softplus_head() {
        let mut p = raw(1, 1, &[], ActionHead::ScaledSoftplus(1.0), 1);
        p.values = vec![1.0, 0.0]; // weight 1, bias 0
        let (mut a, mut b, mut out) = (Vec::new(), Vec::new(), Vec::new());
        p.forward(&[0.3], &mut a, &mut b, &mut out);
        assert_eq!(out[0], softplus(0.3));
    }

    #[test]
    fn input_normalization_recenters_states() {
        let mut p = PolicyParams::init_raw(
            1,
            1,
            &[],
            ActionHead::Linear,
            vec![20.0],
            5.0,
            1,
        );
        p.values = vec![1.0, 0.0];
        let (mut a, mut b, mut out) = (Vec::new(), Vec::new(), Vec::new());
        p.forward(&[30.0], &mut a, &mut b, &mut out);
        assert_eq!(out[0], 2.0); // (30 - 20) / 5
    }

    #[test]
    fn graph_forward_matches_numeric_bitwise() {
        let heads = [
            ActionHead::TanhBound(0.8),
            ActionHead::ScaledSigmoid(1.0),
            ActionHead::ScaledSoftplus(20.0),
            ActionHead::Linear,
        ];
        for (case, head) in heads.into_iter().enumerate() {
            let p = PolicyParams::init_raw(
                3,
                2,
                &[7, 5],
                head,
                vec![4.0, -1.0, 0.5],
                3.0,
                100 + case as u64,
            );
            let key = rng::child(67, case as u64);
            let s: Vec<f64> = (0..3).map(|k| rng::normal(key, k as u64) * 4.0).collect();
            let (mut a, mut b, mut out) = (Vec::new(), Vec::new(), Vec::new());
            p.forward(&s, &mut a, &mut b, &mut out);

            let mut g = Graph::new();
            let gp = declare_params(&mut g, &p);
            let sn: Vec<NodeId> = s.iter().map(|&v| g.constant(v)).collect();
            let nodes = forward_node(&p, &mut g, &gp, &sn);
            assert_eq!(nodes.len(), out.len());
            for (k, id) in nodes.iter().enumerate() {
                assert_eq!(out[k].to_bits(), g.value(*id).to_bits(), "head {head:?} coord {k}");
            }
        }
    }

    #[test]
    fn init_is_deterministic_in_the_seed() {
        let a = raw(2, 2, &[32, 16], ActionHead::Linear, 9);
        let b = raw(2, 2, &[32, 16], ActionHead::Linear, 9);
        assert_eq!(a.values, b.values);
        let c = raw(2, 2, &[32, 16], ActionHead::Linear, 10);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn param_count_matches_layout() {
        let p = raw(2, 2, &[256, 128, 64, 32], ActionHead::TanhBound(1.0), 5);
        let expect = 2 * 256 + 256 + 256 * 128 + 128 + 128 * 64 + 64 + 64 * 32 + 32 + 32 * 2 + 2;
        assert_eq!(p.param_count(), expect);
        assert_eq!(p.values.len(), expect);
    }
}
