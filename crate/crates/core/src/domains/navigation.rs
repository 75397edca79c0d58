//! Two-dimensional navigation with a high-variance zone.
//!
//! The agent moves by bounded displacements toward a goal; reward is the
//! negative Euclidean distance to the goal center. Transition noise scales
//! with the length of the sub-segment of the move that crosses an axis-aligned
//! zone, so cutting through the zone is fast but risky.

use crate::autodiff::{Graph, NodeId};

#[derive(Debug, Clone)]
pub struct NavigationParams {
    pub goal: [f64; 2],
    /// Per-coordinate action bound `b`: actions live in `[-b, b]^2`.
    pub action_bound: f64,
    pub zone_lo: [f64; 2],
    pub zone_hi: [f64; 2],
    /// Noise scale per unit of crossing length.
    pub sigma_high: f64,
    /// Noise scale away from the zone.
    pub sigma_low: f64,
}

impl Default for NavigationParams {
    fn default() -> Self {
        NavigationParams {
            goal: [8.0, 9.0],
            action_bound: 1.0,
            zone_lo: [3.5, 3.5],
            zone_hi: [6.5, 6.5],
            sigma_high: 1.0,
            sigma_low: 0.05,
        }
    }
}

/// `max` with the same value rule as the tape's max node.
#[inline]
fn nmax(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else {
        b
    }
}

/// `min` with the same value rule as the tape's min node.
#[inline]
fn nmin(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else {
        b
    }
}

/// Euclidean length of the intersection of the segment `[s, s+a]` with the
/// closed rectangle `[lo, hi]`, by entry/exit parameter clipping.
pub fn crossing_length(s: &[f64], a: &[f64], lo: &[f64; 2], hi: &[f64; 2]) -> f64 {
    let mut t0 = 0.0;
    let mut t1 = 1.0;
    for k in 0..2 {
        if a[k] == 0.0 {
            if s[k] < lo[k] || s[k] > hi[k] {
                return 0.0;
            }
            // axis imposes no constraint
        } else {
            let ta = (lo[k] - s[k]) / a[k];
            let tb = (hi[k] - s[k]) / a[k];
            t0 = nmax(t0, nmin(ta, tb));
            t1 = nmin(t1, nmax(ta, tb));
        }
    }
    let d = t1 - t0;
    let span = if d > 0.0 { d } else { 0.0 };
    let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
    span * norm
}

/// Tape version of [`crossing_length`], mirrored operation for operation.
/// Clip-parameter branch selection happens through min/max subgradients; the
/// degenerate axis cases are fixed at construction time.
pub fn crossing_length_node(
    g: &mut Graph,
    s: &[NodeId],
    a: &[NodeId],
    lo: &[f64; 2],
    hi: &[f64; 2],
) -> NodeId {
    let mut t0 = g.constant(0.0);
    let mut t1 = g.constant(1.0);
    for k in 0..2 {
        let av = g.value(a[k]);
        if av == 0.0 {
            let sv = g.value(s[k]);
            if sv < lo[k] || sv > hi[k] {
                return g.constant(0.0);
            }
        } else {
            let lo_c = g.constant(lo[k]);
            let hi_c = g.constant(hi[k]);
            let num_a = g.sub(lo_c, s[k]);
            let num_b = g.sub(hi_c, s[k]);
            let ta = g.div(num_a, a[k]).expect("direction checked nonzero");
            let tb = g.div(num_b, a[k]).expect("direction checked nonzero");
            let en = g.min(ta, tb);
            let ex = g.max(ta, tb);
            t0 = g.max(t0, en);
            t1 = g.min(t1, ex);
        }
    }
    let d = g.sub(t1, t0);
    let span = g.relu(d);
    let sq0 = g.mul(a[0], a[0]);
    let sq1 = g.mul(a[1], a[1]);
    let ssum = g.add(sq0, sq1);
    let norm = g.sqrt(ssum).expect("sum of squares is nonnegative");
    g.mul(span, norm)
}

/// `s' = s + a + crossing * sigma_h * xi + 1[crossing = 0] * sigma_l * xi`.
pub fn step(p: &NavigationParams, s: &[f64], a: &[f64], xi: &[f64], next: &mut Vec<f64>) {
    let cr = crossing_length(s, a, &p.zone_lo, &p.zone_hi);
    let ind = if cr == 0.0 { 1.0 } else { 0.0 };
    for k in 0..2 {
        let drift = s[k] + a[k];
        let high = cr * (p.sigma_high * xi[k]);
        let low = ind * (p.sigma_low * xi[k]);
        next.push(drift + (high + low));
    }
}

pub fn step_node(p: &NavigationParams, g: &mut Graph, s: &[NodeId], a: &[NodeId], xi: &[f64]) -> Vec<NodeId> {
    let cr = crossing_length_node(g, s, a, &p.zone_lo, &p.zone_hi);
    let ind = g.indicator_zero(cr);
    let mut next = Vec::with_capacity(2);
    for k in 0..2 {
        let drift = g.add(s[k], a[k]);
        let high = g.scale(cr, p.sigma_high * xi[k]);
        let low = g.scale(ind, p.sigma_low * xi[k]);
        let noise = g.add(high, low);
        next.push(g.add(drift, noise));
    }
    next
}

/// `-(distance from s to the goal center)`; independent of the action.
pub fn reward(p: &NavigationParams, s: &[f64]) -> f64 {
    let dx = s[0] - p.goal[0];
    let dy = s[1] - p.goal[1];
    -((dx * dx + dy * dy).sqrt())
}

pub fn reward_node(p: &NavigationParams, g: &mut Graph, s: &[NodeId]) -> NodeId {
    let gx = g.constant(p.goal[0]);
    let gy = g.constant(p.goal[1]);
    let dx = g.sub(s[0], gx);
    let dy = g.sub(s[1], gy);
    let sx = g.mul(dx, dx);
    let sy = g.mul(dy, dy);
    let ssum = g.add(sx, sy);
    let dist = g.sqrt(ssum).expect("sum of squares is nonnegative");
    g.neg(dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    /// Monte Carlo oracle: fraction of uniformly sampled points on the
    /// segment that land in the closed rectangle, times the segment length.
    fn crossing_mc(s: &[f64], a: &[f64], lo: &[f64; 2], hi: &[f64; 2], n: usize) -> f64 {
        let mut inside = 0usize;
        for c in 0..n {
            let t = rng::uniform(0xC0FFEE, c as u64);
            let x = s[0] + t * a[0];
            let y = s[1] + t * a[1];
            if x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] {
                inside += 1;
            }
        }
        let norm = (a[0] * a[0] + a[1] * a[1]).sqrt();
        inside as f64 / n as f64 * norm
    }

    #[test]
    fn disjoint_segment_has_zero_crossing() {
        let lo = [1.0, -1.0];
        let hi = [3.0, 1.0];
        assert_eq!(crossing_length(&[0.0, 5.0], &[2.0, 0.0], &lo, &hi), 0.0);
        assert_eq!(crossing_length(&[-3.0, 0.0], &[1.0, 0.0], &lo, &hi), 0.0);
    }

    #[test]
    fn contained_segment_crosses_its_full_length() {
        let lo = [0.0, 0.0];
        let hi = [10.0, 10.0];
        let c = crossing_length(&[2.0, 2.0], &[3.0, 4.0], &lo, &hi);
        assert!((c - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unit_crossing_example_matches_monte_carlo() {
        let lo = [1.0, -1.0];
        let hi = [3.0, 1.0];
        let s = [0.0, 0.0];
        let a = [2.0, 0.0];
        let exact = crossing_length(&s, &a, &lo, &hi);
        assert!((exact - 1.0).abs() < 1e-12, "exact {exact}");
        let mc = crossing_mc(&s, &a, &lo, &hi, 100_000);
        assert!((exact - mc).abs() < 0.01, "exact {exact} vs mc {mc}");
    }

    #[test]
    fn oblique_crossing_matches_monte_carlo() {
        let p = NavigationParams::default();
        let s = [2.0, 3.0];
        let a = [3.0, 2.5];
        let exact = crossing_length(&s, &a, &p.zone_lo, &p.zone_hi);
        let mc = crossing_mc(&s, &a, &p.zone_lo, &p.zone_hi, 100_000);
        assert!(exact > 0.0);
        assert!((exact - mc).abs() < 0.02, "exact {exact} vs mc {mc}");
    }

    #[test]
    fn zero_noise_step_is_pure_drift() {
        let p = NavigationParams::default();
        let mut next = Vec::new();
        step(&p, &[0.0, 0.0], &[0.5, -0.25], &[0.0, 0.0], &mut next);
        assert_eq!(next, vec![0.5, -0.25]);
    }

    #[test]
    fn low_noise_applies_outside_zone() {
        let p = NavigationParams::default();
        let mut next = Vec::new();
        step(&p, &[0.0, 0.0], &[0.5, 0.5], &[1.0, 1.0], &mut next);
        assert!((next[0] - 0.55).abs() < 1e-12);
        assert!((next[1] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn high_noise_scales_with_crossing_inside_zone() {
        let p = NavigationParams {
            sigma_high: 0.5,
            ..NavigationParams::default()
        };
        // unit-length move fully inside the zone
        let s = [4.0, 5.0];
        let a = [1.0, 0.0];
        assert_eq!(crossing_length(&s, &a, &p.zone_lo, &p.zone_hi), 1.0);
        let mut next = Vec::new();
        step(&p, &s, &a, &[1.0, 0.0], &mut next);
        assert!((next[0] - (5.0 + 0.5)).abs() < 1e-12);
        assert!((next[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn reward_examples() {
        let p = NavigationParams {
            goal: [3.0, 4.0],
            ..NavigationParams::default()
        };
        assert_eq!(reward(&p, &[3.0, 4.0]), 0.0);
        assert_eq!(reward(&p, &[0.0, 0.0]), -5.0);
    }

    #[test]
    fn step_gradient_is_identity_when_disjoint() {
        let p = NavigationParams::default();
        let mut g = Graph::new();
        let s: Vec<NodeId> = [0.0, 0.0].iter().map(|&v| g.constant(v)).collect();
        let a: Vec<NodeId> = [0.5, 0.25].iter().map(|&v| g.variable(v)).collect();
        let next = step_node(&p, &mut g, &s, &a, &[0.7, -0.3]);
        for (k, &out) in next.iter().enumerate() {
            let grads = g.backward(out);
            for (j, &aj) in a.iter().enumerate() {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert_eq!(grads.get(aj), expect, "d next[{k}] / d a[{j}]");
            }
        }
    }

    #[test]
    fn graph_and_numeric_crossing_agree_bitwise() {
        for case in 0..200 {
            let key = rng::child(31, case);
            let s = [rng::uniform(key, 0) * 10.0, rng::uniform(key, 1) * 10.0];
            let a = [rng::uniform(key, 2) * 4.0 - 2.0, rng::uniform(key, 3) * 4.0 - 2.0];
            let p = NavigationParams::default();
            let num = crossing_length(&s, &a, &p.zone_lo, &p.zone_hi);
            let mut g = Graph::new();
            let sn: Vec<NodeId> = s.iter().map(|&v| g.constant(v)).collect();
            let an: Vec<NodeId> = a.iter().map(|&v| g.constant(v)).collect();
            let cn = crossing_length_node(&mut g, &sn, &an, &p.zone_lo, &p.zone_hi);
            assert_eq!(num.to_bits(), g.value(cn).to_bits());
        }
    }

    proptest! {
        #[test]
        fn crossing_is_symmetric_under_reversal(
            sx in -10.0f64..10.0, sy in -10.0f64..10.0,
            ax in -3.0f64..3.0, ay in -3.0f64..3.0,
        ) {
            let p = NavigationParams::default();
            let fwd = crossing_length(&[sx, sy], &[ax, ay], &p.zone_lo, &p.zone_hi);
            let rev = crossing_length(&[sx + ax, sy + ay], &[-ax, -ay], &p.zone_lo, &p.zone_hi);
            prop_assert!((fwd - rev).abs() <= 1e-9, "fwd {fwd} rev {rev}");
        }

        #[test]
        fn reward_is_nonpositive_and_zero_only_at_goal(
            x in -20.0f64..20.0, y in -20.0f64..20.0,
        ) {
            let p = NavigationParams::default();
            let r = reward(&p, &[x, y]);
            prop_assert!(r <= 0.0);
            prop_assert_eq!(r == 0.0, x == p.goal[0] && y == p.goal[1]);
        }
    }
}
