//! Differentiable risk objectives over a batch of rollout returns.
//!
//! Three utilities over per-rollout returns `G^1..G^m`: the risk-neutral mean,
//! the mean-variance objective `mu + (beta/2) * sigma^2` (population variance,
//! `1/m` normalizer), and the exact entropic utility
//! `(1/beta) log mean(exp(beta G))`, evaluated in shifted log-sum-exp form so
//! large `|beta G|` cannot overflow. Negative `beta` is risk-averse.
//!
//! Every objective exists twice: over tape nodes (differentiable, used in
//! training) and over plain slices (used for evaluation and reporting).

use crate::autodiff::{Graph, NodeId};
use crate::error::{Error, Result};

/// Per-rollout returns as live tape nodes.
#[derive(Debug, Clone)]
pub struct ReturnBatch {
    pub returns: Vec<NodeId>,
}

impl ReturnBatch {
    pub fn new(returns: Vec<NodeId>) -> Self {
        assert!(!returns.is_empty(), "a return batch needs at least one rollout");
        ReturnBatch { returns }
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    RiskNeutral,
    MeanVariance,
    ExactEntropic,
}

impl UtilityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UtilityKind::RiskNeutral => "risk-neutral",
            UtilityKind::MeanVariance => "mean-variance",
            UtilityKind::ExactEntropic => "exact-entropic",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        match s {
            "risk-neutral" => Some(UtilityKind::RiskNeutral),
            "mean-variance" => Some(UtilityKind::MeanVariance),
            "exact-entropic" => Some(UtilityKind::ExactEntropic),
            _ => None,
        }
    }
}

/// Which utility to optimize and how risk-averse to be.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityConfig {
    pub kind: UtilityKind,
    pub beta: f64,
}

impl UtilityConfig {
    pub fn risk_neutral() -> Self {
        UtilityConfig { kind: UtilityKind::RiskNeutral, beta: 0.0 }
    }

    pub fn mean_variance(beta: f64) -> Self {
        UtilityConfig { kind: UtilityKind::MeanVariance, beta }
    }

    pub fn exact_entropic(beta: f64) -> Self {
        UtilityConfig { kind: UtilityKind::ExactEntropic, beta }
    }

    /// The exact entropic utility is undefined at `beta = 0`; mean-variance
    /// with `beta = 0` is permitted and reduces to the risk-neutral mean.
    pub fn validate(&self) -> Result<()> {
        if self.kind == UtilityKind::ExactEntropic && self.beta == 0.0 {
            return Err(Error::Config(
                "exact-entropic requires beta != 0; use the risk-neutral kind instead".into(),
            ));
        }
        if !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be finite, got {}", self.beta)));
        }
        Ok(())
    }

    /// Builds the configured utility node over a return batch.
    pub fn build(&self, g: &mut Graph, batch: &ReturnBatch) -> Result<NodeId> {
        self.validate()?;
        Ok(match self.kind {
            UtilityKind::RiskNeutral => risk_neutral_value(g, batch),
            UtilityKind::MeanVariance => mean_variance_utility(g, batch, self.beta),
            UtilityKind::ExactEntropic => exact_entropic_utility(g, batch, self.beta)?,
        })
    }

    /// Numeric value of the configured utility over realized returns.
    pub fn value(&self, returns: &[f64]) -> f64 {
        match self.kind {
            UtilityKind::RiskNeutral => mean_and_population_variance(returns).0,
            UtilityKind::MeanVariance => mean_variance_value(returns, self.beta),
            UtilityKind::ExactEntropic => exact_entropic_value(returns, self.beta),
        }
    }

    /// The risk parameter actually in force: zero for the risk-neutral kind
    /// regardless of the stored field.
    pub fn effective_beta(&self) -> f64 {
        if self.kind == UtilityKind::RiskNeutral {
            0.0
        } else {
            self.beta
        }
    }
}

/// Sample mean and population variance (`1/m` normalizer) as nodes.
pub fn sufficient_stats(g: &mut Graph, batch: &ReturnBatch) -> (NodeId, NodeId) {
    let mu = g.mean(&batch.returns);
    let squared: Vec<NodeId> = batch
        .returns
        .iter()
        .map(|&gi| {
            let d = g.sub(gi, mu);
            g.mul(d, d)
        })
        .collect();
    let var = g.mean(&squared);
    (mu, var)
}

/// `mu + (beta/2) * sigma^2`.
pub fn mean_variance_utility(g: &mut Graph, batch: &ReturnBatch, beta: f64) -> NodeId {
    let (mu, var) = sufficient_stats(g, batch);
    let half = g.scale(var, beta / 2.0);
    g.add(mu, half)
}

/// The risk-neutral objective: the batch mean.
pub fn risk_neutral_value(g: &mut Graph, batch: &ReturnBatch) -> NodeId {
    g.mean(&batch.returns)
}

/// `(1/beta) log mean(exp(beta G))` in shifted form:
/// `M + (1/beta) log mean(exp(beta (G - M)))` with `M = max(beta G) / beta`.
/// The shifted exponents are all `<= 0`, so the computation cannot overflow.
pub fn exact_entropic_utility(g: &mut Graph, batch: &ReturnBatch, beta: f64) -> Result<NodeId> {
    if beta == 0.0 {
        return Err(Error::Config("entropic utility undefined at beta = 0".into()));
    }
    let scaled: Vec<NodeId> = batch.returns.iter().map(|&gi| g.scale(gi, beta)).collect();
    let mut peak = scaled[0];
    for &s in &scaled[1..] {
        peak = g.max(peak, s);
    }
    let exps: Vec<NodeId> = scaled
        .iter()
        .map(|&s| {
            let d = g.sub(s, peak);
            g.exp(d)
        })
        .collect();
    let mean_exp = g.mean(&exps);
    // mean of exps is at least 1/m since the peak term is exp(0) = 1
    let lg = g.log(mean_exp).expect("mean of exponentials is positive");
    let tail = g.scale(lg, 1.0 / beta);
    let shift = g.scale(peak, 1.0 / beta);
    Ok(g.add(shift, tail))
}

/// Overflow diagnostics for the exact entropic path.
#[derive(Debug, Clone, Copy)]
pub struct EntropicDiagnostics {
    /// Largest pre-shift exponent magnitude `|beta * G|` seen.
    pub max_exponent: f64,
    /// Set when the unshifted formula would be at risk of overflowing.
    pub overflow_risk: bool,
}

/// Exponent threshold past which `exp` overflows an f64.
pub const OVERFLOW_EXPONENT: f64 = 700.0;

pub fn entropic_diagnostics(returns: &[f64], beta: f64) -> EntropicDiagnostics {
    let max_exponent = returns.iter().fold(0.0f64, |m, &gi| m.max((beta * gi).abs()));
    EntropicDiagnostics { max_exponent, overflow_risk: max_exponent > OVERFLOW_EXPONENT }
}

/// Two-pass mean and population variance of a slice.
pub fn mean_and_population_variance(xs: &[f64]) -> (f64, f64) {
    assert!(!xs.is_empty());
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / m;
    (mean, var)
}

/// Numeric `mu + (beta/2) * sigma^2`.
pub fn mean_variance_value(xs: &[f64], beta: f64) -> f64 {
    let (mean, var) = mean_and_population_variance(xs);
    mean + beta / 2.0 * var
}

/// Numeric shifted entropic utility; `beta` must be nonzero.
pub fn exact_entropic_value(xs: &[f64], beta: f64) -> f64 {
    assert!(beta != 0.0, "entropic utility undefined at beta = 0");
    assert!(!xs.is_empty());
    let peak = xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(beta * x));
    let mean_exp = xs.iter().map(|&x| (beta * x - peak).exp()).sum::<f64>() / xs.len() as f64;
    peak / beta + mean_exp.ln() / beta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn batch(g: &mut Graph, values: &[f64]) -> ReturnBatch {
        ReturnBatch::new(values.iter().map(|&v| g.variable(v)).collect())
    }

    #[test]
    fn constant_batch_collapses_every_utility() {
        let c = -7.25;
        let mut g = Graph::new();
        let b = batch(&mut g, &[c; 6]);
        let (mu, var) = sufficient_stats(&mut g, &b);
        assert_eq!(g.value(mu), c);
        assert_eq!(g.value(var), 0.0);
        let mv = mean_variance_utility(&mut g, &b, -3.0);
        assert_eq!(g.value(mv), c);
        let ent = exact_entropic_utility(&mut g, &b, -3.0).unwrap();
        assert!((g.value(ent) - c).abs() < 1e-12);
    }

    #[test]
    fn two_point_batch_statistics() {
        let mut g = Graph::new();
        let b = batch(&mut g, &[0.0, 2.0]);
        let (mu, var) = sufficient_stats(&mut g, &b);
        assert_eq!(g.value(mu), 1.0);
        assert_eq!(g.value(var), 1.0);
        let mv = mean_variance_utility(&mut g, &b, -1.0);
        assert_eq!(g.value(mv), 0.5);
    }

    #[test]
    fn two_point_entropic_closed_form() {
        // (1/-1) ln((e^0 + e^-2)/2) = -ln((1 + e^-2)/2)
        let expect = -(((1.0f64) + (-2.0f64).exp()) / 2.0).ln();
        assert!((expect - 0.566219).abs() < 1e-6);
        let mut g = Graph::new();
        let b = batch(&mut g, &[0.0, 2.0]);
        let ent = exact_entropic_utility(&mut g, &b, -1.0).unwrap();
        assert!((g.value(ent) - expect).abs() < 1e-12);
        assert!((exact_entropic_value(&[0.0, 2.0], -1.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn mean_gradient_is_uniform() {
        let mut g = Graph::new();
        let b = batch(&mut g, &[1.0, 4.0, -2.0, 0.5]);
        let mu = risk_neutral_value(&mut g, &b);
        let grads = g.backward(mu);
        for &gi in &b.returns {
            assert_eq!(grads.get(gi), 0.25);
        }
    }

    #[test]
    fn beta_zero_mean_variance_is_the_mean() {
        let mut g = Graph::new();
        let b = batch(&mut g, &[1.0, 2.0, 3.0]);
        let mv = mean_variance_utility(&mut g, &b, 0.0);
        let mu = risk_neutral_value(&mut g, &b);
        assert_eq!(g.value(mv), g.value(mu));
        assert_eq!(g.value(mu), 2.0);
    }

    #[test]
    fn entropic_limit_approaches_the_mean() {
        for case in 0..20 {
            let key = rng::child(41, case);
            let xs: Vec<f64> = (0..16).map(|k| rng::normal(key, k) * 3.0 + 1.0).collect();
            let (mu, var) = mean_and_population_variance(&xs);
            let ent = exact_entropic_value(&xs, -1e-6);
            assert!((ent - mu).abs() <= 1e-4 * var.max(1e-9), "case {case}");
        }
    }

    #[test]
    fn utilities_increase_in_beta() {
        let xs = [0.0, 1.5, -2.0, 3.0, 0.25];
        let grid = [-2.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0];
        let mut prev_mv = f64::NEG_INFINITY;
        let mut prev_ent = f64::NEG_INFINITY;
        for &beta in &grid {
            let mv = mean_variance_value(&xs, beta);
            let ent = exact_entropic_value(&xs, beta);
            assert!(mv > prev_mv, "mean-variance not increasing at beta {beta}");
            assert!(ent > prev_ent, "entropic not increasing at beta {beta}");
            prev_mv = mv;
            prev_ent = ent;
        }
    }

    #[test]
    fn risk_averse_utilities_sit_below_the_mean() {
        for case in 0..20 {
            let key = rng::child(43, case);
            let xs: Vec<f64> = (0..12).map(|k| rng::normal(key, k) * 2.0).collect();
            let (mu, _) = mean_and_population_variance(&xs);
            assert!(mean_variance_value(&xs, -0.5) <= mu);
            assert!(exact_entropic_value(&xs, -0.5) <= mu);
        }
    }

    #[test]
    fn translation_invariance() {
        let xs = [0.3, -1.2, 2.0, 0.9];
        let c = 13.75;
        let shifted: Vec<f64> = xs.iter().map(|&x| x + c).collect();
        for &beta in &[-1.0, -0.1] {
            let mv = mean_variance_value(&xs, beta);
            let mv_s = mean_variance_value(&shifted, beta);
            assert!((mv_s - (mv + c)).abs() <= 1e-9);
            let ent = exact_entropic_value(&xs, beta);
            let ent_s = exact_entropic_value(&shifted, beta);
            assert!((ent_s - (ent + c)).abs() <= 1e-9);
        }
    }

    #[test]
    fn shifted_and_naive_entropic_agree_when_naive_is_finite() {
        for case in 0..50 {
            let key = rng::child(47, case);
            let xs: Vec<f64> = (0..10).map(|k| rng::normal(key, k) * 5.0).collect();
            let beta = -0.3;
            let naive = {
                let mean_exp = xs.iter().map(|&x| (beta * x).exp()).sum::<f64>() / xs.len() as f64;
                mean_exp.ln() / beta
            };
            assert!(naive.is_finite());
            let shifted = exact_entropic_value(&xs, beta);
            assert!((naive - shifted).abs() <= 1e-9, "case {case}: {naive} vs {shifted}");
        }
    }

    #[test]
    fn gaussian_moment_generating_oracle() {
        // For X ~ N(mu, sigma^2): U(X) = mu + beta sigma^2 / 2 exactly.
        let m = 1_000_000;
        let beta = -0.1;
        let xs: Vec<f64> = (0..m).map(|c| rng::normal(53, c as u64)).collect();
        let ent = exact_entropic_value(&xs, beta);
        assert!((ent - (-0.05)).abs() < 0.005, "entropic {ent}");
        let mv = mean_variance_value(&xs, beta);
        assert!((mv - (-0.05)).abs() < 0.005, "mean-variance {mv}");
    }

    #[test]
    fn overflow_diagnostics_flag_large_exponents() {
        let d = entropic_diagnostics(&[1.0, 2.0], -1000.0);
        assert!(d.overflow_risk);
        assert_eq!(d.max_exponent, 2000.0);
        let d = entropic_diagnostics(&[1.0, 2.0], -1e-3);
        assert!(!d.overflow_risk);
    }

    #[test]
    fn entropic_survives_huge_exponents_via_the_shift() {
        let xs = [1000.0, 990.0, 1010.0];
        let u = exact_entropic_value(&xs, -5.0);
        assert!(u.is_finite());
        // the risk-averse utility leans toward the worst return
        assert!(u < 1000.0 && u >= 990.0, "{u}");
    }

    #[test]
    fn entropic_rejects_beta_zero() {
        let mut g = Graph::new();
        let b = batch(&mut g, &[1.0]);
        assert!(exact_entropic_utility(&mut g, &b, 0.0).is_err());
        assert!(UtilityConfig::exact_entropic(0.0).validate().is_err());
    }
}
