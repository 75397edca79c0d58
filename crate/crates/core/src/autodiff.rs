//! Scalar reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an append-only tape of scalar nodes. Parents always have
//! smaller indices than their children, so topological order is insertion
//! order and one reverse sweep propagates adjoints exactly once per node.
//! Local partial derivatives are cached at construction time, which makes the
//! backward pass a pure read of the tape: values never change, and repeated
//! [`Graph::backward`] calls return identical gradients.
//!
//! Conventions at non-differentiable points, chosen once and applied
//! everywhere: `relu'(0) = 0`, `abs'(0) = 0`, `sqrt'(0) = 0`, and ties in
//! `min`/`max` send the subgradient to the right (second) operand. Branch
//! indicators are recorded through [`Graph::indicator_zero`] /
//! [`Graph::stop_gradient`], whose forward values are exact while their
//! partials are identically zero, so comparison-driven branches behave as
//! constants under differentiation.
//!
//! Besides elementwise ops the tape has three aggregate nodes: `sum` and
//! `mean` over an explicit parent list, and `dot`, a fused inner product of
//! two contiguous node ranges whose partials are the opposing range's stored
//! values. `dot` is what keeps dense-layer rollouts at one node per output
//! unit instead of one node per weight.

use crate::error::{Error, Result};

/// Index of a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Operation tag, kept for diagnostics; the backward pass itself only reads
/// cached partials.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Const,
    Var,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Pow,
    Sqrt,
    Abs,
    Relu,
    Tanh,
    Softplus,
    Min,
    Max,
    StopGrad,
    IndicatorZero,
    Sum,
    Mean,
    Dot,
}

#[derive(Clone, Copy, Debug)]
enum Payload {
    Leaf,
    Unary { p: u32, d: f64 },
    Binary { l: u32, r: u32, dl: f64, dr: f64 },
    /// Parents are `arena[start..start+len]`; every local partial equals `d`.
    Reduce { start: u32, len: u32, d: f64 },
    /// Inner product of `values[xs..xs+len]` and `values[ys..ys+len]`.
    Dot { xs: u32, ys: u32, len: u32 },
}

/// Append-only scalar computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    kinds: Vec<OpKind>,
    payloads: Vec<Payload>,
    values: Vec<f64>,
    variables: Vec<NodeId>,
    arena: Vec<u32>,
}

/// Gradients of one scalar output with respect to every variable of a graph,
/// in variable declaration order. Variables unreachable from the output get
/// an explicit zero.
#[derive(Debug, Clone)]
pub struct GradientMap {
    ids: Vec<NodeId>,
    grads: Vec<f64>,
}

impl GradientMap {
    pub fn get(&self, id: NodeId) -> f64 {
        match self.ids.binary_search(&id) {
            Ok(i) => self.grads[i],
            Err(_) => 0.0,
        }
    }

    /// Gradients aligned with [`Graph::variables`] order.
    pub fn dense(&self) -> &[f64] {
        &self.grads
    }
}

/// Inner product with a fixed 4-accumulator association order. Shared by the
/// tape's `dot` forward pass and the plain-f64 policy evaluation so both
/// produce bitwise-identical values.
#[inline]
pub fn dot_kernel(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    ((s0 + s1) + (s2 + s3)) + tail
}

/// Numerically stable softplus, `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, the derivative of softplus.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Pre-sizes the tape for `nodes` entries.
    pub fn with_capacity(nodes: usize) -> Self {
        Graph {
            kinds: Vec::with_capacity(nodes),
            payloads: Vec::with_capacity(nodes),
            values: Vec::with_capacity(nodes),
            variables: Vec::new(),
            arena: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn value(&self, id: NodeId) -> f64 {
        self.values[id.idx()]
    }

    pub fn kind(&self, id: NodeId) -> OpKind {
        self.kinds[id.idx()]
    }

    /// Ids marked optimizable, in declaration order.
    pub fn variables(&self) -> &[NodeId] {
        &self.variables
    }

    #[inline]
    fn push(&mut self, kind: OpKind, payload: Payload, value: f64) -> NodeId {
        let id = NodeId(self.values.len() as u32);
        self.kinds.push(kind);
        self.payloads.push(payload);
        self.values.push(value);
        id
    }

    pub fn constant(&mut self, v: f64) -> NodeId {
        self.push(OpKind::Const, Payload::Leaf, v)
    }

    pub fn variable(&mut self, v: f64) -> NodeId {
        let id = self.push(OpKind::Var, Payload::Leaf, v);
        self.variables.push(id);
        id
    }

    /// Declares `vals.len()` consecutive variables and returns the first id.
    pub fn variable_range(&mut self, vals: &[f64]) -> NodeId {
        let first = NodeId(self.values.len() as u32);
        for &v in vals {
            self.variable(v);
        }
        first
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(
            OpKind::Add,
            Payload::Binary { l: a.0, r: b.0, dl: 1.0, dr: 1.0 },
            v,
        )
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) - self.value(b);
        self.push(
            OpKind::Sub,
            Payload::Binary { l: a.0, r: b.0, dl: 1.0, dr: -1.0 },
            v,
        )
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(
            OpKind::Mul,
            Payload::Binary { l: a.0, r: b.0, dl: vb, dr: va },
            va * vb,
        )
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if vb == 0.0 {
            return Err(Error::MathDomain {
                op: "div",
                node: self.len(),
                detail: format!("division of {va} by zero"),
            });
        }
        Ok(self.push(
            OpKind::Div,
            Payload::Binary { l: a.0, r: b.0, dl: 1.0 / vb, dr: -va / (vb * vb) },
            va / vb,
        ))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = -self.value(a);
        self.push(OpKind::Neg, Payload::Unary { p: a.0, d: -1.0 }, v)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).exp();
        self.push(OpKind::Exp, Payload::Unary { p: a.0, d: v }, v)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va <= 0.0 {
            return Err(Error::MathDomain {
                op: "log",
                node: self.len(),
                detail: format!("log of non-positive value {va}"),
            });
        }
        Ok(self.push(OpKind::Log, Payload::Unary { p: a.0, d: 1.0 / va }, va.ln()))
    }

    /// `a` raised to the immediate exponent `e`. Negative bases require an
    /// integer exponent; `0^e` requires `e >= 1` (so the partial stays finite).
    pub fn pow(&mut self, a: NodeId, e: f64) -> Result<NodeId> {
        let va = self.value(a);
        let integral = e.fract() == 0.0;
        if (va < 0.0 && !integral) || (va == 0.0 && e < 1.0) {
            return Err(Error::MathDomain {
                op: "pow",
                node: self.len(),
                detail: format!("{va}^{e} outside the supported domain"),
            });
        }
        let v = va.powf(e);
        let d = if va == 0.0 {
            if e == 1.0 {
                1.0
            } else {
                0.0
            }
        } else {
            e * va.powf(e - 1.0)
        };
        Ok(self.push(OpKind::Pow, Payload::Unary { p: a.0, d }, v))
    }

    /// Square root; the kink at 0 takes partial 0.
    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va < 0.0 {
            return Err(Error::MathDomain {
                op: "sqrt",
                node: self.len(),
                detail: format!("sqrt of negative value {va}"),
            });
        }
        let v = va.sqrt();
        let d = if v == 0.0 { 0.0 } else { 0.5 / v };
        Ok(self.push(OpKind::Sqrt, Payload::Unary { p: a.0, d }, v))
    }

    pub fn abs(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let d = if va > 0.0 {
            1.0
        } else if va < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.push(OpKind::Abs, Payload::Unary { p: a.0, d }, va.abs())
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let (v, d) = if va > 0.0 { (va, 1.0) } else { (0.0, 0.0) };
        self.push(OpKind::Relu, Payload::Unary { p: a.0, d }, v)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).tanh();
        self.push(OpKind::Tanh, Payload::Unary { p: a.0, d: 1.0 - v * v }, v)
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        self.push(
            OpKind::Softplus,
            Payload::Unary { p: a.0, d: sigmoid(va) },
            softplus(va),
        )
    }

    /// Minimum of two nodes; on ties the subgradient goes to `b`.
    pub fn min(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        let (v, dl, dr) = if va < vb { (va, 1.0, 0.0) } else { (vb, 0.0, 1.0) };
        self.push(OpKind::Min, Payload::Binary { l: a.0, r: b.0, dl, dr }, v)
    }

    /// Maximum of two nodes; on ties the subgradient goes to `b`.
    pub fn max(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        let (v, dl, dr) = if va > vb { (va, 1.0, 0.0) } else { (vb, 0.0, 1.0) };
        self.push(OpKind::Max, Payload::Binary { l: a.0, r: b.0, dl, dr }, v)
    }

    /// Passes the parent's value through with a zero partial.
    pub fn stop_gradient(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        self.push(OpKind::StopGrad, Payload::Unary { p: a.0, d: 0.0 }, v)
    }

    /// `1` when the parent's value is exactly zero, else `0`; the partial is
    /// zero either way, so the branch condition is a constant to the gradient.
    pub fn indicator_zero(&mut self, a: NodeId) -> NodeId {
        let v = if self.value(a) == 0.0 { 1.0 } else { 0.0 };
        self.push(OpKind::IndicatorZero, Payload::Unary { p: a.0, d: 0.0 }, v)
    }

    pub fn sum(&mut self, ids: &[NodeId]) -> NodeId {
        self.reduce(OpKind::Sum, ids, 1.0)
    }

    pub fn mean(&mut self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty(), "mean over an empty parent list");
        self.reduce(OpKind::Mean, ids, 1.0 / ids.len() as f64)
    }

    fn reduce(&mut self, kind: OpKind, ids: &[NodeId], d: f64) -> NodeId {
        let start = self.arena.len() as u32;
        self.arena.extend(ids.iter().map(|id| id.0));
        let mut acc = 0.0;
        for id in ids {
            acc += self.value(*id);
        }
        let v = if kind == OpKind::Mean { acc * d } else { acc };
        self.push(kind, Payload::Reduce { start, len: ids.len() as u32, d }, v)
    }

    /// Inner product of the `len` consecutive nodes starting at `xs` with the
    /// `len` consecutive nodes starting at `ys`.
    pub fn dot(&mut self, xs: NodeId, ys: NodeId, len: usize) -> NodeId {
        let a = &self.values[xs.idx()..xs.idx() + len];
        let b = &self.values[ys.idx()..ys.idx() + len];
        let v = dot_kernel(a, b);
        self.push(OpKind::Dot, Payload::Dot { xs: xs.0, ys: ys.0, len: len as u32 }, v)
    }

    /// Convenience: `a + c` with an immediate constant.
    pub fn add_const(&mut self, a: NodeId, c: f64) -> NodeId {
        let cn = self.constant(c);
        self.add(a, cn)
    }

    /// Convenience: `a * c` with an immediate constant.
    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let cn = self.constant(c);
        self.mul(a, cn)
    }

    /// Reverse sweep from `output` with adjoint seed `seed`; adjoints land in
    /// `adj`, which is resized to the tape length.
    fn backprop(&self, output: NodeId, seed: f64, adj: &mut Vec<f64>) {
        adj.clear();
        adj.resize(self.len(), 0.0);
        adj[output.idx()] = seed;
        for i in (0..=output.idx()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            match self.payloads[i] {
                Payload::Leaf => {}
                Payload::Unary { p, d } => adj[p as usize] += a * d,
                Payload::Binary { l, r, dl, dr } => {
                    adj[l as usize] += a * dl;
                    adj[r as usize] += a * dr;
                }
                Payload::Reduce { start, len, d } => {
                    let ad = a * d;
                    for k in start..start + len {
                        adj[self.arena[k as usize] as usize] += ad;
                    }
                }
                Payload::Dot { xs, ys, len } => {
                    let (xs, ys, len) = (xs as usize, ys as usize, len as usize);
                    for k in 0..len {
                        adj[xs + k] += a * self.values[ys + k];
                        adj[ys + k] += a * self.values[xs + k];
                    }
                }
            }
        }
    }

    /// Exact reverse-mode gradients of `output` with respect to every
    /// variable. The graph is not modified.
    pub fn backward(&self, output: NodeId) -> GradientMap {
        let mut adj = Vec::new();
        self.backprop(output, 1.0, &mut adj);
        GradientMap {
            ids: self.variables.clone(),
            grads: self.variables.iter().map(|id| adj[id.idx()]).collect(),
        }
    }

    /// Accumulates `seed` times the gradients of `output` into `acc`, which is
    /// aligned with [`Graph::variables`] order. Used by the staged trainer to
    /// fold per-rollout contributions without materializing one merged graph.
    pub fn backward_seeded_into(&self, output: NodeId, seed: f64, scratch: &mut Vec<f64>, acc: &mut [f64]) {
        assert_eq!(acc.len(), self.variables.len());
        self.backprop(output, seed, scratch);
        for (slot, id) in acc.iter_mut().zip(&self.variables) {
            *slot += scratch[id.idx()];
        }
    }
}

/// Result of a finite-difference validation of the tape's gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst_coord: usize,
    pub ad_at_worst: f64,
    pub fd_at_worst: f64,
}

/// Compares reverse-mode gradients of the scalar graph produced by `build`
/// against central finite differences with step `eps`, returning the maximum
/// relative error `|ad - fd| / max(1, |ad|)` over the coordinates of `point`
/// and the coordinate that attains it.
pub fn check_gradients<F>(build: F, point: &[f64], eps: f64) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    assert!(eps > 0.0, "finite-difference step must be positive");
    let eval = |p: &[f64]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<NodeId> = p.iter().map(|&v| g.variable(v)).collect();
        let out = build(&mut g, &vars)?;
        Ok(g.value(out))
    };

    let mut g = Graph::new();
    let vars: Vec<NodeId> = point.iter().map(|&v| g.variable(v)).collect();
    let out = build(&mut g, &vars)?;
    let grads = g.backward(out);

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_coord: 0,
        ad_at_worst: grads.dense().first().copied().unwrap_or(0.0),
        fd_at_worst: 0.0,
    };
    let mut shifted = point.to_vec();
    for k in 0..point.len() {
        shifted[k] = point[k] + eps;
        let up = eval(&shifted)?;
        shifted[k] = point[k] - eps;
        let down = eval(&shifted)?;
        shifted[k] = point[k];
        let fd = (up - down) / (2.0 * eps);
        let ad = grads.dense()[k];
        let rel = (ad - fd).abs() / ad.abs().max(1.0);
        if rel > report.max_rel_error {
            report = GradCheck { max_rel_error: rel, worst_coord: k, ad_at_worst: ad, fd_at_worst: fd };
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_caches_unit_partials() {
        let mut g = Graph::new();
        let a = g.variable(2.0);
        let b = g.variable(3.0);
        let s = g.add(a, b);
        assert_eq!(g.value(s), 5.0);
        let grads = g.backward(s);
        assert_eq!(grads.get(a), 1.0);
        assert_eq!(grads.get(b), 1.0);
    }

    #[test]
    fn exp_at_zero() {
        let mut g = Graph::new();
        let x = g.variable(0.0);
        let y = g.exp(x);
        assert_eq!(g.value(y), 1.0);
        assert_eq!(g.backward(y).get(x), 1.0);
    }

    #[test]
    fn relu_piecewise() {
        let mut g = Graph::new();
        let a = g.variable(-0.5);
        let b = g.variable(0.5);
        let ra = g.relu(a);
        let rb = g.relu(b);
        let out = g.add(ra, rb);
        assert_eq!(g.value(ra), 0.0);
        assert_eq!(g.value(rb), 0.5);
        let grads = g.backward(out);
        assert_eq!(grads.get(a), 0.0);
        assert_eq!(grads.get(b), 1.0);
    }

    #[test]
    fn square_gradient() {
        let mut g = Graph::new();
        let x = g.variable(3.0);
        let y = g.mul(x, x);
        assert_eq!(g.backward(y).get(x), 6.0);
    }

    #[test]
    fn mean_gradient_is_reciprocal_count() {
        let mut g = Graph::new();
        let xs: Vec<NodeId> = (0..4).map(|i| g.variable(i as f64)).collect();
        let m = g.mean(&xs);
        assert_eq!(g.value(m), 1.5);
        let grads = g.backward(m);
        for &x in &xs {
            assert_eq!(grads.get(x), 0.25);
        }
    }

    #[test]
    fn exp_log_composition_has_unit_gradient() {
        let mut g = Graph::new();
        let x = g.variable(2.0);
        let l = g.log(x).unwrap();
        let y = g.exp(l);
        let grad = g.backward(y).get(x);
        assert!((grad - 1.0).abs() < 1e-15, "grad {grad}");
    }

    #[test]
    fn quadratic_matches_finite_differences() {
        // f(x) = 3x^2 + 2x
        let report = check_gradients(
            |g, vars| {
                let sq = g.mul(vars[0], vars[0]);
                let t1 = g.scale(sq, 3.0);
                let t2 = g.scale(vars[0], 2.0);
                Ok(g.add(t1, t2))
            },
            &[1.0],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error <= 1e-6, "{report:?}");
    }

    #[test]
    fn stop_gradient_blocks_all_paths() {
        let mut g = Graph::new();
        let x = g.variable(2.0);
        let sg = g.stop_gradient(x);
        let y = g.mul(x, sg); // forward value x^2, gradient only via the left factor
        assert_eq!(g.value(y), 4.0);
        assert_eq!(g.backward(y).get(x), 2.0);

        let mut g = Graph::new();
        let x = g.variable(0.0);
        let ind = g.indicator_zero(x);
        assert_eq!(g.value(ind), 1.0);
        assert_eq!(g.backward(ind).get(x), 0.0);
    }

    #[test]
    fn min_max_tie_goes_right() {
        let mut g = Graph::new();
        let a = g.variable(1.0);
        let b = g.variable(1.0);
        let m = g.max(a, b);
        let grads = g.backward(m);
        assert_eq!(grads.get(a), 0.0);
        assert_eq!(grads.get(b), 1.0);
    }

    #[test]
    fn dot_matches_explicit_sum_of_products() {
        let mut g = Graph::new();
        let xs = g.variable_range(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let ys = g.variable_range(&[0.5, -1.0, 2.0, 0.0, 3.0]);
        let d = g.dot(xs, ys, 5);
        assert_eq!(g.value(d), 0.5 - 2.0 + 6.0 + 0.0 + 15.0);
        let grads = g.backward(d);
        assert_eq!(grads.get(NodeId(xs.0 + 1)), -1.0);
        assert_eq!(grads.get(NodeId(ys.0 + 4)), 5.0);
    }

    #[test]
    fn dot_with_itself_doubles() {
        let mut g = Graph::new();
        let xs = g.variable_range(&[1.5, -2.0]);
        let d = g.dot(xs, xs, 2);
        assert_eq!(g.value(d), 1.5 * 1.5 + 4.0);
        let grads = g.backward(d);
        assert_eq!(grads.get(xs), 3.0);
        assert_eq!(grads.get(NodeId(xs.0 + 1)), -4.0);
    }

    #[test]
    fn unreachable_variable_gets_zero() {
        let mut g = Graph::new();
        let x = g.variable(1.0);
        let dead = g.variable(2.0);
        let y = g.mul(x, x);
        let grads = g.backward(y);
        assert_eq!(grads.get(dead), 0.0);
        assert_eq!(grads.dense().len(), 2);
    }

    #[test]
    fn backward_is_repeatable_and_leaves_values_alone() {
        let mut g = Graph::new();
        let x = g.variable(0.7);
        let t = g.tanh(x);
        let e = g.exp(t);
        let before: Vec<u64> = (0..g.len()).map(|i| g.value(NodeId(i as u32)).to_bits()).collect();
        let g1 = g.backward(e).get(x).to_bits();
        let g2 = g.backward(e).get(x).to_bits();
        assert_eq!(g1, g2);
        let after: Vec<u64> = (0..g.len()).map(|i| g.value(NodeId(i as u32)).to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn identical_construction_is_bitwise_deterministic() {
        let build = || {
            let mut g = Graph::new();
            let x = g.variable(0.37);
            let y = g.variable(-1.2);
            let m = g.mul(x, y);
            let s = g.softplus(m);
            let t = g.tanh(s);
            let out = g.mul(t, t);
            let grads = g.backward(out);
            (g.value(out).to_bits(), grads.get(x).to_bits(), grads.get(y).to_bits())
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn domain_errors_are_reported() {
        let mut g = Graph::new();
        let x = g.variable(-1.0);
        assert!(g.log(x).is_err());
        assert!(g.sqrt(x).is_err());
        let z = g.constant(0.0);
        assert!(g.div(x, z).is_err());
        assert!(g.pow(x, 0.5).is_err());
    }

    #[test]
    fn linearity_of_backward() {
        // backward(alpha*f + beta*g) == alpha*backward(f) + beta*backward(g)
        let (alpha, beta) = (2.5, -0.75);
        let mut g = Graph::new();
        let x = g.variable(0.8);
        let y = g.variable(-0.3);
        let f = {
            let m = g.mul(x, y);
            g.tanh(m)
        };
        let h = {
            let e = g.exp(y);
            g.mul(x, e)
        };
        let fg = g.backward(f);
        let hg = g.backward(h);
        let fa = g.scale(f, alpha);
        let hb = g.scale(h, beta);
        let combined = g.add(fa, hb);
        let cg = g.backward(combined);
        for id in [x, y] {
            let expect = alpha * fg.get(id) + beta * hg.get(id);
            assert!((cg.get(id) - expect).abs() <= 1e-12, "{} vs {}", cg.get(id), expect);
        }
    }

    #[test]
    fn sqrt_kink_convention() {
        let mut g = Graph::new();
        let x = g.variable(0.0);
        let s = g.sqrt(x).unwrap();
        assert_eq!(g.value(s), 0.0);
        assert_eq!(g.backward(s).get(x), 0.0);
    }

    #[test]
    fn softplus_is_stable_at_large_inputs() {
        let mut g = Graph::new();
        let x = g.variable(800.0);
        let s = g.softplus(x);
        assert!((g.value(s) - 800.0).abs() < 1e-9);
        assert_eq!(g.backward(s).get(x), 1.0);

        let y = g.variable(-800.0);
        let sy = g.softplus(y);
        assert_eq!(g.value(sy), 0.0);
    }
}
