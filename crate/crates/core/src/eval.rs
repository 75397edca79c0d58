//! Post-training evaluation and comparison.
//!
//! Trained representations are rolled out numerically (no tape) on a fresh
//! evaluation noise stream, producing per-episode returns and trajectories.
//! Summary statistics cover the usual moments, quantiles and a histogram plus
//! the empirical risk utilities at the training beta. Distribution claims
//! (lower variance, mean ordering) are settled with bootstrap confidence
//! intervals rather than parametric tests, since the return distributions are
//! visibly non-normal.

use rayon::prelude::*;

use crate::domains::{DomainParams, DomainSpec};
use crate::error::{Error, Result};
use crate::objectives::{
    exact_entropic_value, mean_and_population_variance, mean_variance_value, UtilityConfig,
    UtilityKind,
};
use crate::planners::{rollout_return, Representation, RolloutBuffers, Trajectory};
use crate::rng::{self, CounterRng};

/// Per-episode cumulative rewards from one evaluation run.
#[derive(Debug, Clone)]
pub struct ReturnSamples {
    pub returns: Vec<f64>,
    pub seed: u64,
    pub requested: usize,
    /// Episodes dropped because a state went non-finite (divergent policy).
    pub excluded_nonfinite: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TrajectoryDump {
    pub episodes: Vec<Trajectory>,
}

/// Rolls out `n_episodes` fresh episodes. The evaluation noise stream is
/// derived from the master seed under its own label, so it never overlaps the
/// training stream. Episodes are independent and evaluated in parallel;
/// results are ordered by episode index.
pub fn evaluate(
    domain: &DomainSpec,
    rep: &Representation,
    n_episodes: usize,
    master_seed: u64,
) -> Result<(ReturnSamples, TrajectoryDump)> {
    evaluate_with_capture(domain, rep, n_episodes, master_seed, true)
}

pub fn evaluate_with_capture(
    domain: &DomainSpec,
    rep: &Representation,
    n_episodes: usize,
    master_seed: u64,
    capture: bool,
) -> Result<(ReturnSamples, TrajectoryDump)> {
    if n_episodes == 0 {
        return Err(Error::Config("evaluation needs at least one episode".into()));
    }
    let stream = rng::child(master_seed, rng::stream::EVAL_SCENARIOS);
    let episodes: Vec<Option<(f64, Trajectory)>> = (0..n_episodes)
        .into_par_iter()
        .map_init(RolloutBuffers::default, |bufs, i| {
            let scenario = domain.sample_scenario_rollout(stream, i);
            let mut traj = Trajectory::default();
            let cap = if capture { Some(&mut traj) } else { None };
            match rollout_return(domain, rep, &scenario, 0, cap, bufs) {
                Ok(ret) => Some((ret, traj)),
                Err(_) => None,
            }
        })
        .collect();

    let mut returns = Vec::with_capacity(n_episodes);
    let mut dump = TrajectoryDump::default();
    let mut excluded = 0usize;
    for ep in episodes {
        match ep {
            Some((ret, traj)) => {
                returns.push(ret);
                if capture {
                    dump.episodes.push(traj);
                }
            }
            None => excluded += 1,
        }
    }
    if returns.is_empty() {
        return Err(Error::Config("every evaluation episode diverged".into()));
    }
    Ok((
        ReturnSamples { returns, seed: master_seed, requested: n_episodes, excluded_nonfinite: excluded },
        dump,
    ))
}

#[derive(Debug, Clone)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    /// `(percent, value)` at 1, 5, 25, 50, 75, 95, 99.
    pub quantiles: Vec<(f64, f64)>,
    pub histogram: Histogram,
    pub beta: f64,
    pub mean_variance_utility: f64,
    /// Empirical entropic utility at `beta`; equals the mean at `beta = 0`.
    pub entropic_utility: f64,
}

/// Linear interpolation of order statistics at percent `p`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Freedman-Diaconis bin count with a floor of 10 bins.
fn histogram(sorted: &[f64]) -> Histogram {
    let n = sorted.len();
    let min = sorted[0];
    let max = sorted[n - 1];
    let span = max - min;
    let iqr = quantile(sorted, 75.0) - quantile(sorted, 25.0);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let bins = if span > 0.0 && width > 0.0 {
        ((span / width).ceil() as usize).clamp(10, 10_000)
    } else {
        10
    };
    let (lo, hi) = if span > 0.0 { (min, max) } else { (min - 0.5, max + 0.5) };
    let bin_span = hi - lo;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + bin_span * k as f64 / bins as f64).collect();
    let mut counts = vec![0u64; bins];
    for &x in sorted {
        let idx = (((x - lo) / bin_span) * bins as f64).floor() as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    Histogram { edges, counts }
}

pub fn summarize(samples: &ReturnSamples, beta: f64) -> SummaryStats {
    assert!(!samples.returns.is_empty(), "summarize needs samples");
    let mut sorted = samples.returns.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite returns"));
    let (mean, variance) = mean_and_population_variance(&samples.returns);
    let quantiles: Vec<(f64, f64)> = [1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0]
        .iter()
        .map(|&p| (p, quantile(&sorted, p)))
        .collect();
    SummaryStats {
        count: samples.returns.len(),
        mean,
        variance,
        std_dev: variance.sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        quantiles,
        histogram: histogram(&sorted),
        beta,
        mean_variance_utility: mean_variance_value(&samples.returns, beta),
        entropic_utility: if beta == 0.0 { mean } else { exact_entropic_value(&samples.returns, beta) },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ALowerVariance,
    BLowerVariance,
    Indistinguishable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ALowerVariance => "a-lower-variance",
            Verdict::BLowerVariance => "b-lower-variance",
            Verdict::Indistinguishable => "indistinguishable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarianceComparison {
    pub var_a: f64,
    pub var_b: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Bootstrap CI for `Var(a) - Var(b)`.
    pub var_diff_ci: (f64, f64),
    /// Bootstrap CI for `Mean(a) - Mean(b)`.
    pub mean_diff_ci: (f64, f64),
    pub resamples: usize,
    pub confidence: f64,
    pub verdict: Verdict,
}

/// Two-sided bootstrap comparison of variances (and means) of two independent
/// samples. Verdict `a-lower-variance` iff the upper CI bound of
/// `Var(a) - Var(b)` is below zero.
pub fn compare_variance(
    a: &ReturnSamples,
    b: &ReturnSamples,
    resamples: usize,
    confidence: f64,
    seed: u64,
) -> VarianceComparison {
    assert!(!a.returns.is_empty() && !b.returns.is_empty());
    assert!(resamples >= 100, "too few bootstrap resamples");
    assert!(confidence > 0.0 && confidence < 1.0);
    let stream = rng::child(seed, rng::stream::BOOTSTRAP);
    let reps: Vec<(f64, f64)> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let key = rng::child(stream, r as u64);
            let va = resampled_stats(&a.returns, rng::child(key, 0));
            let vb = resampled_stats(&b.returns, rng::child(key, 1));
            (va.1 - vb.1, va.0 - vb.0)
        })
        .collect();
    let mut var_diffs: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let mut mean_diffs: Vec<f64> = reps.iter().map(|r| r.1).collect();
    var_diffs.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    mean_diffs.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let alpha = (1.0 - confidence) * 100.0;
    let var_ci = (quantile(&var_diffs, alpha / 2.0), quantile(&var_diffs, 100.0 - alpha / 2.0));
    let mean_ci = (quantile(&mean_diffs, alpha / 2.0), quantile(&mean_diffs, 100.0 - alpha / 2.0));
    let verdict = if var_ci.1 < 0.0 {
        Verdict::ALowerVariance
    } else if var_ci.0 > 0.0 {
        Verdict::BLowerVariance
    } else {
        Verdict::Indistinguishable
    };
    let (mean_a, var_a) = mean_and_population_variance(&a.returns);
    let (mean_b, var_b) = mean_and_population_variance(&b.returns);
    VarianceComparison {
        var_a,
        var_b,
        mean_a,
        mean_b,
        var_diff_ci: var_ci,
        mean_diff_ci: mean_ci,
        resamples,
        confidence,
        verdict,
    }
}

fn resampled_stats(xs: &[f64], key: u64) -> (f64, f64) {
    let mut rng = CounterRng::new(key);
    let n = xs.len();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        let x = xs[rng.next_index(n)];
        sum += x;
        sumsq += x * x;
    }
    let mean = sum / n as f64;
    (mean, sumsq / n as f64 - mean * mean)
}

/// Empirical check of the open-loop lower bound: the trained reactive policy
/// should achieve at least the straight-line plan's utility, up to estimation
/// noise. Both representations are evaluated on the same episodes and the
/// difference is bootstrapped pairwise.
#[derive(Debug, Clone)]
pub struct UtilityBoundReport {
    pub utility_slp: f64,
    pub utility_drp: f64,
    /// `U_drp - U_slp`.
    pub diff: f64,
    pub diff_se: f64,
    pub diff_ci: (f64, f64),
    /// `diff >= -diff_se` (soft check).
    pub holds_within_se: bool,
}

pub fn slp_utility_bound_check(
    domain: &DomainSpec,
    slp: &Representation,
    drp: &Representation,
    utility: &UtilityConfig,
    n_episodes: usize,
    seed: u64,
    resamples: usize,
) -> Result<UtilityBoundReport> {
    let (slp_samples, _) = evaluate_with_capture(domain, slp, n_episodes, seed, false)?;
    let (drp_samples, _) = evaluate_with_capture(domain, drp, n_episodes, seed, false)?;
    let n = slp_samples.returns.len().min(drp_samples.returns.len());
    let sr = &slp_samples.returns[..n];
    let dr = &drp_samples.returns[..n];
    let u = |xs: &[f64]| utility.value(xs);
    let u_slp = u(sr);
    let u_drp = u(dr);
    let stream = rng::child(seed, rng::stream::BOOTSTRAP);
    let diffs: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = CounterRng::new(rng::child(stream, r as u64));
            let mut s_res = Vec::with_capacity(n);
            let mut d_res = Vec::with_capacity(n);
            for _ in 0..n {
                let idx = rng.next_index(n);
                s_res.push(sr[idx]);
                d_res.push(dr[idx]);
            }
            u(&d_res) - u(&s_res)
        })
        .collect();
    let (dmean, dvar) = mean_and_population_variance(&diffs);
    let mut sorted = diffs;
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    let diff = u_drp - u_slp;
    let se = dvar.sqrt();
    let _ = dmean;
    Ok(UtilityBoundReport {
        utility_slp: u_slp,
        utility_drp: u_drp,
        diff,
        diff_se: se,
        diff_ci: (quantile(&sorted, 2.5), quantile(&sorted, 97.5)),
        holds_within_se: diff >= -se,
    })
}

/// Constraint-incident rates over an evaluation dump: the fraction of
/// episodes with at least one incident, and the fraction of unit-steps with
/// an incident (a unit is a move, a reservoir, or a room depending on the
/// domain).
#[derive(Debug, Clone, Copy)]
pub struct IncidentStats {
    pub episode_fraction: f64,
    pub unit_fraction: f64,
}

pub fn incident_stats(domain: &DomainSpec, dump: &TrajectoryDump) -> IncidentStats {
    let mut episodes_hit = 0usize;
    let mut incidents = 0u64;
    let mut opportunities = 0u64;
    // moves happen at steps 0..H; final-state incidents still count for the
    // state-threshold domains
    let moves_only = matches!(domain.params, DomainParams::Navigation(_));
    for ep in &dump.episodes {
        let steps = ep.states.len();
        let mut hit = false;
        for t in 0..steps {
            if moves_only && t + 1 == steps {
                continue;
            }
            let (inc, opp) = domain.incidents(&ep.states[t], &ep.actions[t]);
            incidents += inc;
            opportunities += opp;
            hit |= inc > 0;
        }
        episodes_hit += hit as usize;
    }
    IncidentStats {
        episode_fraction: episodes_hit as f64 / dump.episodes.len().max(1) as f64,
        unit_fraction: incidents as f64 / opportunities.max(1) as f64,
    }
}

/// One trained-and-evaluated point of a risk-aversion sweep.
#[derive(Debug)]
pub struct BetaSweepEntry {
    pub beta: f64,
    pub stats: Result<SummaryStats>,
}

/// Trains one agent per `beta` (shared seed and settings) and evaluates each.
/// Betas must be sorted descending (risk aversion increases along the list).
/// Training failures are recorded per entry without aborting the sweep.
pub fn beta_sweep(
    domain: &DomainSpec,
    method: crate::planners::Method,
    betas: &[f64],
    hidden: &[usize],
    base: &crate::planners::TrainSettings,
    eval_episodes: usize,
) -> Result<Vec<BetaSweepEntry>> {
    if betas.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Config("beta list must be sorted descending".into()));
    }
    let mut entries = Vec::with_capacity(betas.len());
    for &beta in betas {
        let mut settings = base.clone();
        settings.utility = if beta == 0.0 {
            UtilityConfig::risk_neutral()
        } else {
            match base.utility.kind {
                UtilityKind::ExactEntropic => UtilityConfig::exact_entropic(beta),
                _ => UtilityConfig::mean_variance(beta),
            }
        };
        let rep = Representation::init(
            domain,
            method,
            hidden,
            rng::child(settings.seed, rng::stream::WEIGHTS_INIT),
        );
        let stats = crate::planners::train(domain, rep, &settings).and_then(|out| {
            let (samples, _) =
                evaluate_with_capture(domain, &out.representation, eval_episodes, settings.seed, false)?;
            Ok(summarize(&samples, beta))
        });
        entries.push(BetaSweepEntry { beta, stats });
    }
    Ok(entries)
}

/// `episode,return` rows, full precision.
pub fn returns_csv(samples: &ReturnSamples) -> String {
    let mut out = String::with_capacity(samples.returns.len() * 24 + 16);
    out.push_str("episode,return\n");
    for (i, r) in samples.returns.iter().enumerate() {
        out.push_str(&format!("{i},{r:.17e}\n"));
    }
    out
}

pub fn parse_returns_csv(text: &str, path: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == "episode,return" => {}
        other => {
            return Err(Error::Parse {
                path: path.into(),
                detail: format!("expected 'episode,return' header, got {other:?}"),
            })
        }
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let val = line.split(',').nth(1).ok_or_else(|| Error::Parse {
            path: path.into(),
            detail: format!("line {}: missing return column", ln + 2),
        })?;
        out.push(val.trim().parse::<f64>().map_err(|e| Error::Parse {
            path: path.into(),
            detail: format!("line {}: {e}", ln + 2),
        })?);
    }
    if out.is_empty() {
        return Err(Error::Parse { path: path.into(), detail: "no samples".into() });
    }
    Ok(out)
}

/// `episode,t,s_0..s_{n-1},a_0..a_{m-1},reward` rows.
pub fn trajectories_csv(dump: &TrajectoryDump, state_dim: usize, action_dim: usize) -> String {
    let mut header = String::from("episode,t");
    for k in 0..state_dim {
        header.push_str(&format!(",s_{k}"));
    }
    for k in 0..action_dim {
        header.push_str(&format!(",a_{k}"));
    }
    header.push_str(",reward\n");
    let mut out = header;
    for (ep, traj) in dump.episodes.iter().enumerate() {
        for t in 0..traj.states.len() {
            out.push_str(&format!("{ep},{t}"));
            for v in &traj.states[t] {
                out.push_str(&format!(",{v:.9e}"));
            }
            for v in &traj.actions[t] {
                out.push_str(&format!(",{v:.9e}"));
            }
            out.push_str(&format!(",{:.9e}\n", traj.rewards[t]));
        }
    }
    out
}

/// Human-readable summary document.
pub fn summary_text(stats: &SummaryStats, header_lines: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in header_lines {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push_str(&format!("episodes = {}\n", stats.count));
    out.push_str(&format!("mean = {:.9}\n", stats.mean));
    out.push_str(&format!("variance = {:.9}\n", stats.variance));
    out.push_str(&format!("std-dev = {:.9}\n", stats.std_dev));
    out.push_str(&format!("min = {:.9}\n", stats.min));
    out.push_str(&format!("max = {:.9}\n", stats.max));
    for (p, v) in &stats.quantiles {
        out.push_str(&format!("quantile-{p} = {v:.9}\n"));
    }
    out.push_str(&format!("beta = {}\n", stats.beta));
    out.push_str(&format!("mean-variance-utility = {:.9}\n", stats.mean_variance_utility));
    out.push_str(&format!("entropic-utility = {:.9}\n", stats.entropic_utility));
    out.push_str("histogram-edges = ");
    out.push_str(
        &stats.histogram.edges.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(","),
    );
    out.push('\n');
    out.push_str("histogram-counts = ");
    out.push_str(
        &stats.histogram.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
    );
    out.push('\n');
    out
}
