//! Multi-room heating control.
//!
//! Each room receives heated air at temperature `T_c` in a volume set by the
//! action, exchanges heat with adjacent rooms through cubic dispersion, and
//! leaks heat to the outdoors. Reward penalizes deviation from the set
//! temperature, air volume, and (with a fixed penalty) letting a room fall to
//! the cold threshold.
//!
//! Noise enters three ways per step: an actuation draw per room, a dispersion
//! draw per adjacent pair (shared by both endpoints), and one outdoor draw
//! shared by all rooms. The outdoor term is implemented as exchange,
//! `(T_o + sigma_o * xi - s_i) / rho_out`, which keeps the dynamics stationary.
//!
//! The cubic dispersion is saturated at `dispersion_cap` degrees per step.
//! The raw cubic under explicit per-step integration diverges as soon as an
//! inter-room gap exceeds `sqrt(2 rho)`, which an untrained policy produces
//! immediately; the cap leaves the formula exact across the operating band
//! and merely bounds the flux outside it. The default resistance and cap are
//! chosen so the per-edge flux slope `3 d^2 / rho` stays below ~0.4
//! everywhere: larger slopes put the per-step state Jacobian outside the
//! unit circle and the 125-step backward product explodes even though the
//! states themselves stay bounded.

use crate::autodiff::{Graph, NodeId};

#[derive(Debug, Clone)]
pub struct HvacParams {
    pub rooms: usize,
    /// Adjacent room pairs; one dispersion noise draw per pair.
    pub edges: Vec<(usize, usize)>,
    /// Thermal resistance per adjacent pair.
    pub edge_resistance: Vec<f64>,
    /// Dispersion noise scale per adjacent pair.
    pub edge_noise: Vec<f64>,
    /// Dispersion flux saturation, degrees per step.
    pub dispersion_cap: f64,
    pub heater_temp: f64,
    pub set_temps: Vec<f64>,
    pub cold_threshold: f64,
    pub cold_penalty: f64,
    pub outdoor_mean: f64,
    pub outdoor_noise: f64,
    pub outdoor_resistance: f64,
    pub actuation_noise: f64,
    pub action_max: f64,
}

impl Default for HvacParams {
    /// Five rooms on a ring.
    fn default() -> Self {
        let n = 5;
        let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        HvacParams {
            rooms: n,
            edge_resistance: vec![120.0; edges.len()],
            edge_noise: vec![0.1; edges.len()],
            edges,
            dispersion_cap: 0.5,
            heater_temp: 40.0,
            set_temps: vec![21.0; n],
            cold_threshold: 19.0,
            cold_penalty: 20.0,
            outdoor_mean: 6.0,
            outdoor_noise: 2.0,
            outdoor_resistance: 4.0,
            actuation_noise: 0.25,
            // enough to hold the set point (equilibrium a is ~0.2) with
            // headroom to recover, without the 19-degree-per-step authority
            // that makes 125-step closed-loop gradients explode
            action_max: 0.4,
        }
    }
}

#[inline]
fn rmax0(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Noise layout per step: `[actuation per room | dispersion per edge | outdoor]`.
#[inline]
fn outdoor_index(p: &HvacParams) -> usize {
    p.rooms + p.edges.len()
}

/// Mirrors the tape's max node value rule.
#[inline]
fn nmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

/// Mirrors the tape's min node value rule.
#[inline]
fn nmin(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}

pub fn step(p: &HvacParams, s: &[f64], a: &[f64], xi: &[f64], next: &mut Vec<f64>) {
    let c_out = p.outdoor_mean + p.outdoor_noise * xi[outdoor_index(p)];
    let inv_rho_out = 1.0 / p.outdoor_resistance;
    for i in 0..p.rooms {
        let heat = a[i] * (p.heater_temp - s[i]);
        let mut v = (s[i] + heat) + p.actuation_noise * xi[i];
        for (e, &(u, w)) in p.edges.iter().enumerate() {
            let j = if u == i {
                w
            } else if w == i {
                u
            } else {
                continue;
            };
            let d = s[j] - s[i];
            let cube = (d * d) * d;
            let raw = cube * (1.0 / p.edge_resistance[e]);
            let capped = nmin(nmax(raw, -p.dispersion_cap), p.dispersion_cap);
            let flow = capped + p.edge_noise[e] * xi[p.rooms + e];
            v += flow;
        }
        let exchange = (c_out - s[i]) * inv_rho_out;
        next.push(v + exchange);
    }
}

pub fn step_node(p: &HvacParams, g: &mut Graph, s: &[NodeId], a: &[NodeId], xi: &[f64]) -> Vec<NodeId> {
    let c_out = p.outdoor_mean + p.outdoor_noise * xi[outdoor_index(p)];
    let inv_rho_out = 1.0 / p.outdoor_resistance;
    let mut next = Vec::with_capacity(p.rooms);
    for i in 0..p.rooms {
        let tc = g.constant(p.heater_temp);
        let gap = g.sub(tc, s[i]);
        let heat = g.mul(a[i], gap);
        let drift = g.add(s[i], heat);
        let mut v = g.add_const(drift, p.actuation_noise * xi[i]);
        for (e, &(u, w)) in p.edges.iter().enumerate() {
            let j = if u == i {
                w
            } else if w == i {
                u
            } else {
                continue;
            };
            let d = g.sub(s[j], s[i]);
            let sq = g.mul(d, d);
            let cube = g.mul(sq, d);
            let raw = g.scale(cube, 1.0 / p.edge_resistance[e]);
            let lo = g.constant(-p.dispersion_cap);
            let floored = g.max(raw, lo);
            let hi = g.constant(p.dispersion_cap);
            let capped = g.min(floored, hi);
            let flow = g.add_const(capped, p.edge_noise[e] * xi[p.rooms + e]);
            v = g.add(v, flow);
        }
        let out_c = g.constant(c_out);
        let gap_out = g.sub(out_c, s[i]);
        let exchange = g.scale(gap_out, inv_rho_out);
        next.push(g.add(v, exchange));
    }
    next
}

/// `-|s_i - T_i| - a_i`, minus the cold penalty when `s_i <= T_l`, summed over
/// rooms. The threshold indicator contributes no gradient.
pub fn reward(p: &HvacParams, s: &[f64], a: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.rooms {
        let dev = (s[i] - p.set_temps[i]).abs();
        let above = rmax0(s[i] - p.cold_threshold);
        let cold = if above == 0.0 { 1.0 } else { 0.0 };
        acc += -((dev + a[i]) + cold * p.cold_penalty);
    }
    acc
}

pub fn reward_node(p: &HvacParams, g: &mut Graph, s: &[NodeId], a: &[NodeId]) -> NodeId {
    let mut terms = Vec::with_capacity(p.rooms);
    for i in 0..p.rooms {
        let set = g.constant(p.set_temps[i]);
        let diff = g.sub(s[i], set);
        let dev = g.abs(diff);
        let thr = g.constant(p.cold_threshold);
        let margin = g.sub(s[i], thr);
        let above = g.relu(margin);
        let cold = g.indicator_zero(above);
        let base = g.add(dev, a[i]);
        let pen = g.scale(cold, p.cold_penalty);
        let total = g.add(base, pen);
        terms.push(g.neg(total));
    }
    g.sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(rooms: usize, edges: Vec<(usize, usize)>) -> HvacParams {
        let ne = edges.len();
        HvacParams {
            rooms,
            edge_resistance: vec![2.0; ne],
            edge_noise: vec![0.1; ne],
            edges,
            set_temps: vec![21.0; rooms],
            ..HvacParams::default()
        }
    }

    #[test]
    fn equal_temperatures_kill_dispersion() {
        let p = HvacParams::default();
        let s = vec![22.0; 5];
        let a = vec![0.0; 5];
        let xi = vec![0.0; 11];
        let mut next = Vec::new();
        step(&p, &s, &a, &xi, &mut next);
        let expect = 22.0 + (6.0 - 22.0) / 4.0;
        for &v in &next {
            assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        }
    }

    #[test]
    fn full_air_volume_pulls_toward_heater_temp() {
        let p = tiny(1, vec![]);
        let s = vec![20.0];
        let mut next = Vec::new();
        step(&p, &s, &[1.0], &[0.0, 0.0], &mut next);
        // + (T_c - s) from the heater, + exchange with outdoors
        let expect = 20.0 + (40.0 - 20.0) + (6.0 - 20.0) / 4.0;
        assert!((next[0] - expect).abs() < 1e-12, "{} vs {expect}", next[0]);
    }

    #[test]
    fn dispersion_flows_into_the_colder_room() {
        let p = tiny(2, vec![(0, 1)]);
        let s = vec![21.0, 20.0];
        let xi = vec![0.0; 4];
        let mut next = Vec::new();
        step(&p, &s, &[0.0, 0.0], &xi, &mut next);
        let base_warm = 21.0 + (6.0 - 21.0) / 4.0;
        let base_cold = 20.0 + (6.0 - 20.0) / 4.0;
        assert!((next[0] - (base_warm - 0.5)).abs() < 1e-12, "{}", next[0]);
        assert!((next[1] - (base_cold + 0.5)).abs() < 1e-12, "{}", next[1]);
    }

    #[test]
    fn reward_examples() {
        let p = tiny(1, vec![]);
        // at set point, no air, above threshold: free
        assert_eq!(reward(&p, &[21.0], &[0.0]), 0.0);

        let q = HvacParams {
            set_temps: vec![20.0],
            cold_threshold: 19.0,
            cold_penalty: 10.0,
            ..tiny(1, vec![])
        };
        // s = T_l - 1 = 18, deviation 2, air 0.3, penalty 10
        let r = reward(&q, &[18.0], &[0.3]);
        assert!((r - (-12.3)).abs() < 1e-12, "{r}");
        // threshold boundary is penalized (s <= T_l)
        let r = reward(&q, &[19.0], &[0.0]);
        assert!((r - (-11.0)).abs() < 1e-12, "{r}");
    }

    #[test]
    fn reward_strictly_decreases_in_air_volume() {
        let p = HvacParams::default();
        let s = vec![21.0; 5];
        let mut prev = reward(&p, &s, &[0.0; 5]);
        for k in 1..5 {
            let a = vec![0.1 * k as f64; 5];
            let r = reward(&p, &s, &a);
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn graph_step_and_reward_match_numeric_bitwise() {
        let p = HvacParams::default();
        let s = vec![20.0, 21.5, 19.25, 23.0, 18.0];
        let a = vec![0.3, 0.0, 1.0, 0.55, 0.8];
        let xi: Vec<f64> = (0..11).map(|k| (k as f64 - 5.0) * 0.37).collect();
        let mut num = Vec::new();
        step(&p, &s, &a, &xi, &mut num);
        let mut g = Graph::new();
        let sn: Vec<NodeId> = s.iter().map(|&v| g.constant(v)).collect();
        let an: Vec<NodeId> = a.iter().map(|&v| g.variable(v)).collect();
        let out = step_node(&p, &mut g, &sn, &an, &xi);
        for (k, id) in out.iter().enumerate() {
            assert_eq!(num[k].to_bits(), g.value(*id).to_bits(), "room {k}");
        }
        let rn = reward(&p, &s, &a);
        let rg = reward_node(&p, &mut g, &sn, &an);
        assert_eq!(rn.to_bits(), g.value(rg).to_bits());
    }

    #[test]
    fn cold_penalty_indicator_has_zero_gradient() {
        let p = tiny(1, vec![]);
        let mut g = Graph::new();
        let s = vec![g.variable(18.0)]; // below threshold
        let a = vec![g.constant(0.0)];
        let r = reward_node(&p, &mut g, &s, &a);
        // d reward / d s = +1 through -|s - T_i| (s below set point); the
        // penalty step contributes nothing.
        assert_eq!(g.backward(r).get(s[0]), 1.0);
    }
}
