//! Runtime invariant suite.
//!
//! Everything the modules promise (gradient exactness against finite
//! differences, conservation laws, determinism, bootstrap sanity) verified in
//! one pass, so a fresh build can be validated from the command line without
//! the test harness. Each check returns a one-line detail string; failures
//! carry the offending numbers.

use crate::autodiff::Graph;
use crate::domains::{crossing_length, DomainParams, DomainSpec, NavigationParams};
use crate::error::Result;
use crate::eval;
use crate::objectives::{
    exact_entropic_value, mean_and_population_variance, mean_variance_value, UtilityConfig,
};
use crate::planners::{
    merged_return_batch, rollout_return, train, Method, Representation, RolloutBuffers,
    TrainSettings, utility_and_gradient,
};
use crate::rng::{self, CounterRng};

#[derive(Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn from(name: &'static str, outcome: Result<String>) -> Self {
        match outcome {
            Ok(detail) => CheckResult { name, passed: true, detail },
            Err(e) => CheckResult { name, passed: false, detail: e.to_string() },
        }
    }
}

fn fail(detail: String) -> crate::Error {
    crate::Error::Config(detail)
}

/// Runs every invariant check; order is stable.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        CheckResult::from("autodiff-linearity", autodiff_linearity()),
        CheckResult::from("autodiff-stop-gradient", autodiff_stop_gradient()),
        CheckResult::from("autodiff-determinism", autodiff_determinism()),
        CheckResult::from("scenario-determinism", scenario_determinism()),
        CheckResult::from("crossing-symmetry", crossing_symmetry()),
        CheckResult::from("crossing-monte-carlo", crossing_monte_carlo()),
        CheckResult::from("reservoir-conservation", reservoir_conservation()),
        CheckResult::from("reservoir-nonnegativity", reservoir_nonnegativity()),
        CheckResult::from("rewards-nonpositive", rewards_nonpositive()),
        CheckResult::from("navigation-identity-gradient", navigation_identity_gradient()),
        CheckResult::from("projection-idempotent", projection_idempotent()),
        CheckResult::from("objective-beta-monotone", objective_beta_monotone()),
        CheckResult::from("objective-risk-averse-ordering", objective_ordering()),
        CheckResult::from("objective-translation-invariance", objective_translation()),
        CheckResult::from("objective-risk-neutral-limit", objective_risk_neutral_limit()),
        CheckResult::from("objective-logsumexp-shift", objective_logsumexp_shift()),
        CheckResult::from("gradient-oracle", gradient_oracle_all(6)),
        CheckResult::from("evaluation-purity", evaluation_purity()),
        CheckResult::from("staged-equals-merged", staged_equals_merged()),
        CheckResult::from("summary-vs-naive", summary_vs_naive()),
        CheckResult::from("bootstrap-sanity", bootstrap_sanity()),
        CheckResult::from("reward-shift-invariance", reward_shift_invariance()),
        CheckResult::from("risk-neutral-consistency", risk_neutral_consistency()),
        CheckResult::from("slp-feasibility", slp_feasibility()),
        CheckResult::from("train-eval-bitwise-repro", train_eval_bitwise_repro()),
    ]
}

fn autodiff_linearity() -> Result<String> {
    let mut worst = 0.0f64;
    for case in 0..50 {
        let key = rng::child(101, case);
        let (alpha, beta) = (rng::normal(key, 0) * 2.0, rng::normal(key, 1) * 2.0);
        let mut g = Graph::new();
        let x = g.variable(rng::normal(key, 2));
        let y = g.variable(rng::normal(key, 3));
        let f = {
            let m = g.mul(x, y);
            g.tanh(m)
        };
        let h = {
            let e = g.exp(y);
            let s = g.add(x, e);
            g.softplus(s)
        };
        let fg = g.backward(f);
        let hg = g.backward(h);
        let fa = g.scale(f, alpha);
        let hb = g.scale(h, beta);
        let combo = g.add(fa, hb);
        let cg = g.backward(combo);
        for id in [x, y] {
            let expect = alpha * fg.get(id) + beta * hg.get(id);
            worst = worst.max((cg.get(id) - expect).abs());
        }
    }
    if worst > 1e-12 {
        return Err(fail(format!("linearity violated by {worst}")));
    }
    Ok(format!("max deviation {worst:.2e}"))
}

fn autodiff_stop_gradient() -> Result<String> {
    let mut g = Graph::new();
    let x = g.variable(1.5);
    let sg = g.stop_gradient(x);
    let ind = g.indicator_zero(x);
    let a = g.mul(sg, sg);
    let b = g.mul(ind, x);
    let out = g.add(a, b);
    let grad = g.backward(out).get(x);
    // only the direct x path in b contributes, and ind(1.5) = 0
    if grad != 0.0 {
        return Err(fail(format!("gradient leaked through stop-gradient: {grad}")));
    }
    Ok("no gradient flows through stop-gradient paths".into())
}

fn autodiff_determinism() -> Result<String> {
    let build = || {
        let mut g = Graph::new();
        let xs = g.variable_range(&[0.3, -1.7, 2.4]);
        let a = g.tanh(xs);
        let b = g.softplus(a);
        let c = g.dot(xs, xs, 3);
        let d = g.mul(b, c);
        let grads = g.backward(d);
        (g.value(d).to_bits(), grads.dense().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    if build() != build() {
        return Err(fail("identical construction produced different bits".into()));
    }
    Ok("values and gradients bitwise stable".into())
}

fn scenario_determinism() -> Result<String> {
    for name in ["navigation", "reservoir", "hvac"] {
        let d = DomainSpec::from_name(name).unwrap();
        let a = d.sample_scenario(6, 31);
        let b = d.sample_scenario(6, 31);
        if a.raw().iter().zip(b.raw()).any(|(x, y)| x.to_bits() != y.to_bits()) {
            return Err(fail(format!("{name}: same seed produced different noise")));
        }
        if a.raw().len() != 6 * (d.horizon + 1) * d.noise_dims_per_step() {
            return Err(fail(format!("{name}: wrong scenario shape")));
        }
    }
    let r = DomainSpec::reservoir_default().sample_scenario(64, 3);
    if r.raw().iter().any(|&x| x < 0.0) {
        return Err(fail("negative rainfall draw".into()));
    }
    Ok("scenarios reproduce bitwise with correct shapes".into())
}

fn crossing_symmetry() -> Result<String> {
    let p = NavigationParams::default();
    let mut worst = 0.0f64;
    for case in 0..500 {
        let key = rng::child(103, case);
        let s = [rng::uniform(key, 0) * 12.0 - 1.0, rng::uniform(key, 1) * 12.0 - 1.0];
        let a = [rng::normal(key, 2), rng::normal(key, 3)];
        let fwd = crossing_length(&s, &a, &p.zone_lo, &p.zone_hi);
        let rev = crossing_length(&[s[0] + a[0], s[1] + a[1]], &[-a[0], -a[1]], &p.zone_lo, &p.zone_hi);
        worst = worst.max((fwd - rev).abs());
    }
    if worst > 1e-9 {
        return Err(fail(format!("reversal asymmetry {worst}")));
    }
    Ok(format!("max asymmetry {worst:.2e}"))
}

fn crossing_monte_carlo() -> Result<String> {
    let lo = [1.0, -1.0];
    let hi = [3.0, 1.0];
    let s = [0.0, 0.0];
    let a = [2.0, 0.0];
    let exact = crossing_length(&s, &a, &lo, &hi);
    let n = 100_000;
    let mut inside = 0usize;
    for c in 0..n {
        let t = rng::uniform(0xFEED, c as u64);
        let (x, y) = (s[0] + t * a[0], s[1] + t * a[1]);
        if x >= lo[0] && x <= hi[0] && y >= lo[1] && y <= hi[1] {
            inside += 1;
        }
    }
    let mc = inside as f64 / n as f64 * (a[0] * a[0] + a[1] * a[1]).sqrt();
    if (exact - 1.0).abs() > 1e-12 || (exact - mc).abs() > 0.01 {
        return Err(fail(format!("exact {exact} vs monte-carlo {mc}")));
    }
    Ok(format!("exact {exact} vs monte-carlo {mc:.4}"))
}

fn reservoir_conservation() -> Result<String> {
    let d = DomainSpec::reservoir_default();
    let p = match &d.params {
        DomainParams::Reservoir(p) => p,
        _ => unreachable!(),
    };
    let mut worst = 0.0f64;
    for case in 0..200 {
        let key = rng::child(107, case);
        let s: Vec<f64> = (0..5).map(|i| rng::uniform(key, i) * 90.0).collect();
        let mut a: Vec<f64> = (0..5).map(|e| rng::uniform(key, 10 + e as u64) * 70.0).collect();
        d.project_action(&s, &mut a);
        let xi: Vec<f64> = (0..5).map(|k| rng::exponential(key, 100 + k as u64, p.rain_rate)).collect();
        let mut next = Vec::new();
        d.step(&s, &a, &xi, &mut next);
        let terminal: f64 = p
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.to.is_none())
            .map(|(e, _)| a[e])
            .sum();
        let lhs = next.iter().sum::<f64>() - s.iter().sum::<f64>();
        let rhs = xi.iter().sum::<f64>() - terminal;
        worst = worst.max((lhs - rhs).abs());
    }
    if worst > 1e-9 {
        return Err(fail(format!("conservation violated by {worst}")));
    }
    Ok(format!("max imbalance {worst:.2e}"))
}

fn reservoir_nonnegativity() -> Result<String> {
    let d = DomainSpec::reservoir_default();
    for case in 0..10_000u64 {
        let key = rng::child(109, case);
        let mut s: Vec<f64> = (0..5).map(|i| rng::uniform(key, i) * 60.0).collect();
        for t in 0..5u64 {
            let sk = rng::child(key, 900 + t);
            let mut a: Vec<f64> = (0..5).map(|e| rng::uniform(sk, e as u64) * 100.0 - 20.0).collect();
            d.project_action(&s, &mut a);
            let xi: Vec<f64> = (0..5).map(|k| rng::exponential(sk, 50 + k as u64, 0.1)).collect();
            let mut next = Vec::new();
            d.step(&s, &a, &xi, &mut next);
            if let Some(v) = next.iter().find(|v| **v < 0.0) {
                return Err(fail(format!("level {v} below zero in case {case} step {t}")));
            }
            s = next;
        }
    }
    Ok("levels nonnegative over 10k random projected rollouts".into())
}

fn rewards_nonpositive() -> Result<String> {
    let res = DomainSpec::reservoir_default();
    let hvac = DomainSpec::hvac_default();
    let nav = DomainSpec::navigation_default();
    for case in 0..2000 {
        let key = rng::child(113, case);
        let rs: Vec<f64> = (0..5).map(|i| rng::uniform(key, i) * 120.0 - 10.0).collect();
        if res.reward(&rs, &[0.0; 5]) > 0.0 {
            return Err(fail("positive reservoir reward".into()));
        }
        let hs: Vec<f64> = (0..5).map(|i| rng::uniform(key, 10 + i) * 30.0 + 5.0).collect();
        let ha: Vec<f64> = (0..5).map(|i| rng::uniform(key, 20 + i)).collect();
        if hvac.reward(&hs, &ha) > 0.0 {
            return Err(fail("positive hvac reward".into()));
        }
        let ns = [rng::normal(key, 30) * 8.0, rng::normal(key, 31) * 8.0];
        let r = nav.reward(&ns, &[0.0, 0.0]);
        let at_goal = ns == [8.0, 9.0];
        if r > 0.0 || (r == 0.0) != at_goal {
            return Err(fail(format!("navigation reward {r} at {ns:?}")));
        }
    }
    Ok("rewards nonpositive with equality only at the navigation goal".into())
}

fn navigation_identity_gradient() -> Result<String> {
    let d = DomainSpec::navigation_default();
    let mut g = Graph::new();
    let s: Vec<_> = [0.0, 0.0].iter().map(|&v| g.constant(v)).collect();
    let a: Vec<_> = [0.4, -0.3].iter().map(|&v| g.variable(v)).collect();
    let xi = [1.3, -0.9];
    let next = d.step_node(&mut g, &s, &a, &xi);
    for (k, &out) in next.iter().enumerate() {
        let grads = g.backward(out);
        for (j, &aj) in a.iter().enumerate() {
            let expect = if j == k { 1.0 } else { 0.0 };
            if grads.get(aj) != expect {
                return Err(fail(format!(
                    "d next[{k}]/d a[{j}] = {} away from the zone",
                    grads.get(aj)
                )));
            }
        }
    }
    Ok("transition Jacobian is the identity off the zone".into())
}

fn projection_idempotent() -> Result<String> {
    for name in ["navigation", "reservoir", "hvac"] {
        let d = DomainSpec::from_name(name).unwrap();
        for case in 0..500 {
            let key = rng::child(127, case);
            let s: Vec<f64> = (0..d.state_dim()).map(|i| rng::uniform(key, i as u64) * 50.0).collect();
            let mut a: Vec<f64> =
                (0..d.action_dim()).map(|i| rng::normal(key, 100 + i as u64) * 30.0).collect();
            d.project_action(&s, &mut a);
            let once = a.clone();
            d.project_action(&s, &mut a);
            if once.iter().zip(&a).any(|(x, y)| x.to_bits() != y.to_bits()) {
                return Err(fail(format!("{name}: projection not idempotent in case {case}")));
            }
        }
    }
    Ok("double projection is a bitwise no-op".into())
}

fn objective_beta_monotone() -> Result<String> {
    let xs: Vec<f64> = (0..32).map(|k| rng::normal(131, k) * 2.5).collect();
    let grid = [-5.0, -2.0, -1.0, -0.3, -0.05, 0.05, 0.3, 1.0];
    let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &b in &grid {
        let mv = mean_variance_value(&xs, b);
        let ent = exact_entropic_value(&xs, b);
        if mv <= prev.0 || ent <= prev.1 {
            return Err(fail(format!("utility not increasing at beta {b}")));
        }
        prev = (mv, ent);
    }
    Ok("both utilities strictly increase in beta".into())
}

fn objective_ordering() -> Result<String> {
    for case in 0..100 {
        let key = rng::child(137, case);
        let xs: Vec<f64> = (0..24).map(|k| rng::normal(key, k) * 3.0 + 1.0).collect();
        let (mu, _) = mean_and_population_variance(&xs);
        for &b in &[-2.0, -0.5, -0.01] {
            if mean_variance_value(&xs, b) > mu || exact_entropic_value(&xs, b) > mu {
                return Err(fail(format!("risk-averse utility above the mean at beta {b}")));
            }
        }
    }
    Ok("risk-averse utilities never exceed the mean".into())
}

fn objective_translation() -> Result<String> {
    let mut worst = 0.0f64;
    for case in 0..100 {
        let key = rng::child(139, case);
        let xs: Vec<f64> = (0..16).map(|k| rng::normal(key, k)).collect();
        let c = rng::normal(key, 500) * 20.0;
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        for &b in &[-1.0, -0.1] {
            worst = worst
                .max((mean_variance_value(&shifted, b) - mean_variance_value(&xs, b) - c).abs());
            worst = worst
                .max((exact_entropic_value(&shifted, b) - exact_entropic_value(&xs, b) - c).abs());
        }
    }
    if worst > 1e-9 {
        return Err(fail(format!("translation drift {worst}")));
    }
    Ok(format!("max translation drift {worst:.2e}"))
}

fn objective_risk_neutral_limit() -> Result<String> {
    for case in 0..50 {
        let key = rng::child(149, case);
        let xs: Vec<f64> = (0..20).map(|k| rng::normal(key, k) * 2.0).collect();
        let (mu, var) = mean_and_population_variance(&xs);
        let ent = exact_entropic_value(&xs, -1e-6);
        if (ent - mu).abs() > 1e-4 * var.max(1e-9) {
            return Err(fail(format!("entropic limit off: {} vs mean {mu}", ent)));
        }
    }
    Ok("entropic utility converges to the mean as beta -> 0-".into())
}

fn objective_logsumexp_shift() -> Result<String> {
    let mut worst = 0.0f64;
    for case in 0..100 {
        let key = rng::child(151, case);
        let xs: Vec<f64> = (0..12).map(|k| rng::normal(key, k) * 4.0).collect();
        let beta = -0.4;
        let naive = {
            let me = xs.iter().map(|&x| (beta * x).exp()).sum::<f64>() / xs.len() as f64;
            me.ln() / beta
        };
        if naive.is_finite() {
            worst = worst.max((naive - exact_entropic_value(&xs, beta)).abs());
        }
    }
    if worst > 1e-9 {
        return Err(fail(format!("shifted form deviates by {worst}")));
    }
    Ok(format!("max deviation from the naive form {worst:.2e}"))
}

/// Central-difference validation of the full training gradient on one random
/// small instance. Returns the max relative error over the parameters.
///
/// The instance point is randomized away from the piecewise boundaries:
/// freshly initialized networks have zero biases, which parks every first
/// pre-activation exactly on the relu kink when the initial state is zero,
/// and central differences straddle kinks.
pub fn gradient_oracle_instance(
    domain: &DomainSpec,
    method: Method,
    m: usize,
    seed: u64,
    eps: f64,
) -> Result<f64> {
    let hidden = [6, 4];
    let mut rep = Representation::init(domain, method, &hidden, rng::child(seed, 7));
    let mut jiggle = CounterRng::new(rng::child(seed, 8));
    match &mut rep {
        Representation::Plan(p) => {
            // strictly interior rows: entries pinned at a bound sit on the
            // projection clamp's kink
            for v in p.values.iter_mut() {
                *v = match domain.action_head() {
                    crate::domains::ActionHead::TanhBound(b) => {
                        (2.0 * jiggle.next_uniform() - 1.0) * 0.4 * b
                    }
                    crate::domains::ActionHead::ScaledSigmoid(b) => {
                        (0.1 + 0.8 * jiggle.next_uniform()) * b
                    }
                    _ => 0.05 + 0.4 * jiggle.next_uniform(),
                };
            }
            p.project_static(domain);
        }
        Representation::Policy(p) => {
            for v in p.values.iter_mut() {
                *v += (2.0 * jiggle.next_uniform() - 1.0) * 0.2;
            }
        }
    }
    let scenario = domain.sample_scenario(m, rng::child(seed, 9));
    let ucfg = UtilityConfig::mean_variance(-1.0);
    let ad = utility_and_gradient(domain, &rep, &scenario, &ucfg)?;

    let numeric_utility = |rep: &Representation| -> Result<f64> {
        let mut bufs = RolloutBuffers::default();
        let mut returns = Vec::with_capacity(m);
        for i in 0..m {
            returns.push(rollout_return(domain, rep, &scenario, i, None, &mut bufs)?);
        }
        Ok(ucfg.value(&returns))
    };

    let mut worst = 0.0f64;
    for k in 0..rep.values().len() {
        let base = rep.values()[k];
        let mut up = rep.clone();
        up.values_mut()[k] = base + eps;
        let mut down = rep.clone();
        down.values_mut()[k] = base - eps;
        let fd = (numeric_utility(&up)? - numeric_utility(&down)?) / (2.0 * eps);
        let rel = (ad.gradient[k] - fd).abs() / ad.gradient[k].abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Domain instance used by the gradient oracle: dynamics and rewards as
/// shipped, but at unit-ish numeric scale. The production reservoir runs at
/// levels near 80 with penalty weight 100, which puts utilities around 1e5;
/// central differences at step 1e-5 then carry ~1e-16 * |U| / eps of roundoff,
/// right at the tolerance. Small instances keep the roundoff three orders of
/// magnitude below it.
pub fn gradient_oracle_domain(name: &str) -> DomainSpec {
    let mut domain = DomainSpec::from_name(name).expect("known domain");
    domain.horizon = 3;
    match &mut domain.params {
        DomainParams::Reservoir(p) => {
            p.level_low = vec![2.0; p.reservoirs];
            p.level_high = vec![8.0; p.reservoirs];
            p.penalty_high = 10.0;
            p.penalty_low = 0.5;
            p.rain_rate = 1.0;
            domain.initial_state = vec![4.5; p.reservoirs];
        }
        DomainParams::Hvac(p) => {
            // same shape, one order of magnitude cooler
            p.heater_temp = 4.0;
            p.set_temps = vec![2.1; p.rooms];
            p.cold_threshold = 1.9;
            p.cold_penalty = 2.0;
            p.outdoor_mean = 0.6;
            p.outdoor_noise = 0.2;
            domain.initial_state = vec![2.0; p.rooms];
        }
        _ => {}
    }
    domain
}

/// Gradient oracle over all three domains and both representations. A kink
/// straddle (finite difference across a branch) shows up as a large error,
/// and the instance is resampled, per the small-instance protocol.
pub fn gradient_oracle_all(instances_per_domain: u64) -> Result<String> {
    let mut worst = 0.0f64;
    for name in ["navigation", "reservoir", "hvac"] {
        let domain = gradient_oracle_domain(name);
        for method in [Method::Slp, Method::Drp] {
            for j in 0..instances_per_domain {
                let mut err = f64::INFINITY;
                for retry in 0..3u64 {
                    let seed = rng::child(157, (j + 1) * 1000 + retry) ^ rng::child(163, method as u64);
                    err = gradient_oracle_instance(&domain, method, 4, seed, 1e-5)?;
                    if err <= 1e-4 {
                        break;
                    }
                }
                if err > 1e-4 {
                    return Err(fail(format!(
                        "{name} {:?} instance {j}: gradient error {err} after resampling",
                        method
                    )));
                }
                worst = worst.max(err);
            }
        }
    }
    Ok(format!("max relative gradient error {worst:.2e}"))
}

fn evaluation_purity() -> Result<String> {
    for name in ["navigation", "reservoir", "hvac"] {
        let mut domain = DomainSpec::from_name(name).unwrap();
        domain.horizon = 4;
        for method in [Method::Slp, Method::Drp] {
            let rep = Representation::init(&domain, method, &[6, 4], rng::child(167, method as u64));
            let scenario = domain.sample_scenario(3, 5);
            let mut g = Graph::new();
            let (batch, _) = merged_return_batch(&mut g, &domain, &rep, &scenario)?;
            let mut bufs = RolloutBuffers::default();
            for i in 0..3 {
                let numeric = rollout_return(&domain, &rep, &scenario, i, None, &mut bufs)?;
                let tape = g.value(batch.returns[i]);
                if numeric.to_bits() != tape.to_bits() {
                    return Err(fail(format!(
                        "{name} {:?}: numeric {numeric} vs tape {tape}",
                        method
                    )));
                }
            }
        }
    }
    Ok("numeric rollouts equal tape forward values bitwise".into())
}

fn staged_equals_merged() -> Result<String> {
    let mut worst = 0.0f64;
    for name in ["navigation", "reservoir", "hvac"] {
        let mut domain = DomainSpec::from_name(name).unwrap();
        domain.horizon = 2;
        for method in [Method::Slp, Method::Drp] {
            let rep = Representation::init(&domain, method, &[5, 3], rng::child(173, method as u64));
            let scenario = domain.sample_scenario(4, 6);
            let ucfg = UtilityConfig::mean_variance(-1.0);
            let staged = utility_and_gradient(&domain, &rep, &scenario, &ucfg)?;
            let mut g = Graph::new();
            let (batch, _) = merged_return_batch(&mut g, &domain, &rep, &scenario)?;
            let unode = ucfg.build(&mut g, &batch)?;
            let merged = g.backward(unode);
            for (a, b) in staged.gradient.iter().zip(merged.dense()) {
                let rel = (a - b).abs() / b.abs().max(1.0);
                worst = worst.max(rel);
            }
        }
    }
    if worst > 1e-12 {
        return Err(fail(format!("staged gradient deviates by {worst}")));
    }
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn summary_vs_naive() -> Result<String> {
    for case in 0..50 {
        let key = rng::child(179, case);
        let xs: Vec<f64> = (0..200).map(|k| rng::normal(key, k) * 7.0 + 3.0).collect();
        let samples = eval::ReturnSamples {
            returns: xs.clone(),
            seed: 0,
            requested: xs.len(),
            excluded_nonfinite: 0,
        };
        let stats = eval::summarize(&samples, 0.0);
        let naive_mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let naive_var =
            xs.iter().map(|x| (x - naive_mean) * (x - naive_mean)).sum::<f64>() / xs.len() as f64;
        if (stats.mean - naive_mean).abs() > 1e-12 || (stats.variance - naive_var).abs() > 1e-12 {
            return Err(fail("summary statistics deviate from the naive reference".into()));
        }
        if stats.histogram.counts.iter().sum::<u64>() as usize != xs.len() {
            return Err(fail("histogram counts do not sum to the sample count".into()));
        }
    }
    Ok("summary matches the naive two-pass reference".into())
}

fn bootstrap_sanity() -> Result<String> {
    let trials = 10;
    let mut ok = 0;
    for trial in 0..trials {
        let key = rng::child(181, trial as u64);
        let xs: Vec<f64> = (0..1000).map(|k| rng::normal(key, k)).collect();
        let (a, b) = xs.split_at(500);
        let mk = |v: &[f64]| eval::ReturnSamples {
            returns: v.to_vec(),
            seed: 0,
            requested: v.len(),
            excluded_nonfinite: 0,
        };
        let cmp = eval::compare_variance(&mk(a), &mk(b), 1000, 0.95, trial as u64);
        if cmp.verdict == eval::Verdict::Indistinguishable {
            ok += 1;
        }
    }
    if ok * 10 < trials * 9 {
        return Err(fail(format!("only {ok}/{trials} split halves indistinguishable")));
    }
    Ok(format!("{ok}/{trials} split halves declared indistinguishable"))
}

fn reward_shift_invariance() -> Result<String> {
    let mut base = DomainSpec::navigation_default();
    base.horizon = 3;
    let mut shifted = base.clone();
    shifted.reward_offset = 4.75;
    let rep = Representation::init(&base, Method::Slp, &[], 0);
    let scenario = base.sample_scenario(6, 9);
    let ucfg = UtilityConfig::mean_variance(-1.0);
    let a = utility_and_gradient(&base, &rep, &scenario, &ucfg)?;
    let b = utility_and_gradient(&shifted, &rep, &scenario, &ucfg)?;
    let expected_shift = (base.horizon + 1) as f64 * 4.75;
    if ((b.utility - a.utility) - expected_shift).abs() > 1e-9 {
        return Err(fail(format!(
            "utility shifted by {} instead of {expected_shift}",
            b.utility - a.utility
        )));
    }
    let mut worst = 0.0f64;
    for (x, y) in a.gradient.iter().zip(&b.gradient) {
        worst = worst.max((x - y).abs() / x.abs().max(1.0));
    }
    if worst > 1e-9 {
        return Err(fail(format!("gradients drifted by {worst} under a reward shift")));
    }
    Ok(format!("utility shifts exactly; gradient drift {worst:.2e}"))
}

fn risk_neutral_consistency() -> Result<String> {
    let domain = DomainSpec { horizon: 2, ..DomainSpec::navigation_default() };
    let settings = |utility| TrainSettings {
        epochs: 4,
        batch: 6,
        learning_rate: 0.3,
        optimizer: crate::planners::OptimizerKind::RmsProp,
        grad_clip: Some(10.0),
        fixed_scenarios: false,
        seed: 21,
        utility,
        entropic_guard: true,
    };
    let run = |utility| {
        let rep = Representation::init(&domain, Method::Slp, &[], 0);
        train(&domain, rep, &settings(utility))
    };
    let rn = run(UtilityConfig::risk_neutral())?;
    let mv = run(UtilityConfig::mean_variance(0.0))?;
    for (a, b) in rn.trace.iter().zip(&mv.trace) {
        if !a.same_numbers(b) {
            return Err(fail(format!("traces diverge at epoch {}", a.epoch)));
        }
    }
    if rn
        .representation
        .values()
        .iter()
        .zip(mv.representation.values())
        .any(|(x, y)| x.to_bits() != y.to_bits())
    {
        return Err(fail("parameters diverge between risk-neutral and beta=0".into()));
    }
    Ok("risk-neutral and beta=0 mean-variance train identically".into())
}

fn slp_feasibility() -> Result<String> {
    let domain = DomainSpec { horizon: 4, ..DomainSpec::reservoir_default() };
    let settings = TrainSettings {
        epochs: 5,
        batch: 8,
        learning_rate: 0.2,
        optimizer: crate::planners::OptimizerKind::RmsProp,
        grad_clip: Some(10.0),
        fixed_scenarios: false,
        seed: 33,
        utility: UtilityConfig::mean_variance(-1.0),
        entropic_guard: true,
    };
    let rep = Representation::init(&domain, Method::Slp, &[], 0);
    let out = train(&domain, rep, &settings)?;
    if let Representation::Plan(p) = &out.representation {
        let mut re = p.clone();
        re.project_static(&domain);
        if re.values.iter().zip(&p.values).any(|(x, y)| x.to_bits() != y.to_bits()) {
            return Err(fail("trained plan is not a fixed point of the projection".into()));
        }
        if p.values.iter().any(|&v| v < 0.0) {
            return Err(fail("trained reservoir plan has negative discharges".into()));
        }
    }
    Ok("plan rows remain a projection fixed point after training".into())
}

fn train_eval_bitwise_repro() -> Result<String> {
    let domain = DomainSpec { horizon: 5, ..DomainSpec::navigation_default() };
    let settings = TrainSettings {
        epochs: 8,
        batch: 16,
        learning_rate: 0.5,
        optimizer: crate::planners::OptimizerKind::RmsProp,
        grad_clip: Some(10.0),
        fixed_scenarios: false,
        seed: 77,
        utility: UtilityConfig::mean_variance(-10.0),
        entropic_guard: true,
    };
    let run = || -> Result<(Vec<u64>, Vec<u64>)> {
        let rep = Representation::init(&domain, Method::Slp, &[], rng::child(77, rng::stream::WEIGHTS_INIT));
        let out = train(&domain, rep, &settings)?;
        let (samples, _) = eval::evaluate_with_capture(&domain, &out.representation, 64, 77, false)?;
        Ok((
            out.representation.values().iter().map(|v| v.to_bits()).collect(),
            samples.returns.iter().map(|v| v.to_bits()).collect(),
        ))
    };
    let a = run()?;
    let b = run()?;
    if a != b {
        return Err(fail("train+eval did not reproduce bitwise".into()));
    }
    Ok("full train+eval run reproduces bitwise".into())
}
