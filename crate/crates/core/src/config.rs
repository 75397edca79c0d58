//! Experiment configuration.
//!
//! A config is a flat `key = value` text file with `[section]` headers
//! (domain / method / objective / training / eval). Defaults come from the
//! per-domain hyperparameter tables; a file or command line only overrides
//! them. Every run writes its fully resolved config next to its outputs, and
//! that file alone reconstructs the run: parsing starts from the named
//! domain's defaults and re-applies every key.

use std::collections::BTreeMap;

use crate::domains::{DomainParams, DomainSpec, ReservoirEdge};
use crate::error::{Error, Result};
use crate::objectives::{UtilityConfig, UtilityKind};
use crate::planners::{Method, OptimizerKind, TrainSettings};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Fully resolved domain (defaults plus overrides).
    pub domain: DomainSpec,
    pub method: Method,
    pub utility: UtilityConfig,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub eval_episodes: usize,
    pub output_dir: String,
    pub fixed_scenarios: bool,
    pub optimizer: OptimizerKind,
    /// Global-norm gradient clip; zero or negative disables it.
    pub grad_clip: f64,
    pub entropic_guard: bool,
}

impl ExperimentConfig {
    /// Per-domain defaults (training tables), per-method learning rate.
    pub fn defaults(domain_name: &str, method: Method) -> Result<Self> {
        let domain = DomainSpec::from_name(domain_name)
            .ok_or_else(|| Error::Config(format!("unknown domain '{domain_name}'")))?;
        let (epochs, batch, beta, lr_slp, lr_drp) = match domain_name {
            "navigation" => (1001, 8192, -1000.0, 0.5, 2.5e-4),
            "reservoir" => (501, 1024, -100.0, 0.2, 5e-3),
            "hvac" => (501, 128, -40.0, 5e-3, 5e-3),
            "toy-quadratic" => (500, 1, 0.0, 0.4, 1e-2),
            _ => unreachable!("from_name succeeded"),
        };
        let learning_rate = match method {
            Method::Slp => lr_slp,
            Method::Drp => lr_drp,
        };
        let utility = if beta == 0.0 {
            UtilityConfig::risk_neutral()
        } else {
            UtilityConfig::mean_variance(beta)
        };
        let optimizer = if domain_name == "toy-quadratic" {
            // the paper's plain update rule is all the deterministic toy needs
            OptimizerKind::Sgd
        } else {
            OptimizerKind::RmsProp
        };
        Ok(ExperimentConfig {
            domain,
            method,
            utility,
            epochs,
            batch,
            learning_rate,
            hidden: vec![256, 128, 64, 32],
            seed: 42,
            eval_episodes: 10_000,
            output_dir: "runs".into(),
            fixed_scenarios: false,
            optimizer,
            grad_clip: 10.0,
            entropic_guard: true,
        })
    }

    pub fn train_settings(&self) -> TrainSettings {
        TrainSettings {
            epochs: self.epochs,
            batch: self.batch,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            grad_clip: if self.grad_clip > 0.0 { Some(self.grad_clip) } else { None },
            fixed_scenarios: self.fixed_scenarios,
            seed: self.seed,
            utility: self.utility,
            entropic_guard: self.entropic_guard,
        }
    }

    /// Fully resolved flat text; parsing it back yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[domain]\n");
        out.push_str(&format!("name = {}\n", self.domain.name()));
        out.push_str(&format!("horizon = {}\n", self.domain.horizon));
        out.push_str(&format!("initial-state = {}\n", join_f64(&self.domain.initial_state)));
        out.push_str(&format!("reward-offset = {}\n", self.domain.reward_offset));
        match &self.domain.params {
            DomainParams::Navigation(p) => {
                out.push_str(&format!("goal = {}\n", join_f64(&p.goal)));
                out.push_str(&format!("action-bound = {}\n", p.action_bound));
                out.push_str(&format!("zone-lo = {}\n", join_f64(&p.zone_lo)));
                out.push_str(&format!("zone-hi = {}\n", join_f64(&p.zone_hi)));
                out.push_str(&format!("sigma-high = {}\n", p.sigma_high));
                out.push_str(&format!("sigma-low = {}\n", p.sigma_low));
            }
            DomainParams::Reservoir(p) => {
                out.push_str(&format!("reservoirs = {}\n", p.reservoirs));
                let edges: Vec<String> = p
                    .edges
                    .iter()
                    .map(|e| match e.to {
                        Some(t) => format!("{}>{}", e.from, t),
                        None => format!("{}>out", e.from),
                    })
                    .collect();
                out.push_str(&format!("edges = {}\n", edges.join(",")));
                out.push_str(&format!("level-low = {}\n", join_f64(&p.level_low)));
                out.push_str(&format!("level-high = {}\n", join_f64(&p.level_high)));
                out.push_str(&format!("penalty-low = {}\n", p.penalty_low));
                out.push_str(&format!("penalty-high = {}\n", p.penalty_high));
                out.push_str(&format!("rain-rate = {}\n", p.rain_rate));
            }
            DomainParams::Hvac(p) => {
                out.push_str(&format!("rooms = {}\n", p.rooms));
                let edges: Vec<String> =
                    p.edges.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                out.push_str(&format!("edges = {}\n", edges.join(",")));
                out.push_str(&format!("edge-resistance = {}\n", join_f64(&p.edge_resistance)));
                out.push_str(&format!("edge-noise = {}\n", join_f64(&p.edge_noise)));
                out.push_str(&format!("dispersion-cap = {}\n", p.dispersion_cap));
                out.push_str(&format!("heater-temp = {}\n", p.heater_temp));
                out.push_str(&format!("set-temps = {}\n", join_f64(&p.set_temps)));
                out.push_str(&format!("cold-threshold = {}\n", p.cold_threshold));
                out.push_str(&format!("cold-penalty = {}\n", p.cold_penalty));
                out.push_str(&format!("outdoor-mean = {}\n", p.outdoor_mean));
                out.push_str(&format!("outdoor-noise = {}\n", p.outdoor_noise));
                out.push_str(&format!("outdoor-resistance = {}\n", p.outdoor_resistance));
                out.push_str(&format!("actuation-noise = {}\n", p.actuation_noise));
                out.push_str(&format!("action-max = {}\n", p.action_max));
            }
            DomainParams::QuadraticToy(p) => {
                out.push_str(&format!("target = {}\n", p.target));
            }
        }
        out.push_str("\n[method]\n");
        out.push_str(&format!("kind = {}\n", self.method.as_str()));
        out.push_str("\n[objective]\n");
        out.push_str(&format!("kind = {}\n", self.utility.kind.as_str()));
        out.push_str(&format!("beta = {}\n", self.utility.beta));
        out.push_str("\n[training]\n");
        out.push_str(&format!("epochs = {}\n", self.epochs));
        out.push_str(&format!("batch = {}\n", self.batch));
        out.push_str(&format!("learning-rate = {}\n", self.learning_rate));
        out.push_str(&format!("optimizer = {}\n", self.optimizer.as_str()));
        out.push_str(&format!("grad-clip = {}\n", self.grad_clip));
        out.push_str(&format!("fixed-scenarios = {}\n", self.fixed_scenarios));
        out.push_str(&format!("entropic-guard = {}\n", self.entropic_guard));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!(
            "hidden = {}\n",
            self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
        ));
        out.push_str("\n[eval]\n");
        out.push_str(&format!("episodes = {}\n", self.eval_episodes));
        out.push_str(&format!("output-dir = {}\n", self.output_dir));
        out
    }

    /// FNV-1a over the resolved text, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_text().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Parses a (possibly partial) config file: the named domain's defaults
    /// are built first, then every key present is applied on top.
    pub fn from_text(text: &str, path: &str) -> Result<Self> {
        let entries = parse_sections(text, path)?;
        let name = entries
            .get("domain.name")
            .ok_or_else(|| Error::Parse { path: path.into(), detail: "missing [domain] name".into() })?
            .clone();
        let method = match entries.get("method.kind") {
            Some(m) => Method::from_str(m)
                .ok_or_else(|| Error::Config(format!("unknown method '{m}'")))?,
            None => Method::Slp,
        };
        let mut config = ExperimentConfig::defaults(&name, method)?;
        for (key, value) in &entries {
            if key == "domain.name" || key == "method.kind" {
                continue;
            }
            let (section, k) = key.split_once('.').expect("keys are section-qualified");
            config.apply(section, k, value)?;
        }
        Ok(config)
    }

    /// Applies one `section.key = value` override.
    pub fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let unknown = || Error::Config(format!("unknown config key [{section}] {key}"));
        match section {
            "domain" => self.apply_domain(key, value),
            "method" => match key {
                "kind" => {
                    self.method = Method::from_str(value)
                        .ok_or_else(|| Error::Config(format!("unknown method '{value}'")))?;
                    Ok(())
                }
                _ => Err(unknown()),
            },
            "objective" => match key {
                "kind" => {
                    self.utility.kind = UtilityKind::from_str(value)
                        .ok_or_else(|| Error::Config(format!("unknown objective '{value}'")))?;
                    Ok(())
                }
                "beta" => {
                    self.utility.beta = parse_f64(value)?;
                    Ok(())
                }
                _ => Err(unknown()),
            },
            "training" => match key {
                "epochs" => set_usize(&mut self.epochs, value),
                "batch" => set_usize(&mut self.batch, value),
                "learning-rate" => {
                    self.learning_rate = parse_f64(value)?;
                    Ok(())
                }
                "optimizer" => {
                    self.optimizer = OptimizerKind::from_str(value)
                        .ok_or_else(|| Error::Config(format!("unknown optimizer '{value}'")))?;
                    Ok(())
                }
                "grad-clip" => {
                    self.grad_clip = parse_f64(value)?;
                    Ok(())
                }
                "fixed-scenarios" => set_bool(&mut self.fixed_scenarios, value),
                "entropic-guard" => set_bool(&mut self.entropic_guard, value),
                "seed" => {
                    self.seed = value
                        .parse::<u64>()
                        .map_err(|e| Error::Config(format!("bad seed '{value}': {e}")))?;
                    Ok(())
                }
                "hidden" => {
                    self.hidden = parse_usize_list(value)?;
                    Ok(())
                }
                _ => Err(unknown()),
            },
            "eval" => match key {
                "episodes" => set_usize(&mut self.eval_episodes, value),
                "output-dir" => {
                    self.output_dir = value.to_string();
                    Ok(())
                }
                _ => Err(unknown()),
            },
            _ => Err(Error::Config(format!("unknown config section [{section}]"))),
        }
    }

    fn apply_domain(&mut self, key: &str, value: &str) -> Result<()> {
        let domain_name = self.domain.name();
        let unknown = move || Error::Config(format!("unknown [domain] key '{key}' for {domain_name}"));
        match key {
            "horizon" => return set_usize(&mut self.domain.horizon, value),
            "initial-state" => {
                let state = parse_f64_list(value)?;
                self.domain.initial_state = broadcast(state, self.domain.state_dim())?;
                return Ok(());
            }
            "reward-offset" => {
                self.domain.reward_offset = parse_f64(value)?;
                return Ok(());
            }
            _ => {}
        }
        match &mut self.domain.params {
            DomainParams::Navigation(p) => match key {
                "goal" => p.goal = pair(value)?,
                "action-bound" => p.action_bound = parse_f64(value)?,
                "zone-lo" => p.zone_lo = pair(value)?,
                "zone-hi" => p.zone_hi = pair(value)?,
                "sigma-high" => p.sigma_high = parse_f64(value)?,
                "sigma-low" => p.sigma_low = parse_f64(value)?,
                _ => return Err(unknown()),
            },
            DomainParams::Reservoir(p) => match key {
                "reservoirs" => {
                    let n: usize = value
                        .parse()
                        .map_err(|e| Error::Config(format!("bad count '{value}': {e}")))?;
                    p.reservoirs = n;
                    resize_broadcast(&mut p.level_low, n);
                    resize_broadcast(&mut p.level_high, n);
                    self.domain.initial_state =
                        broadcast(self.domain.initial_state.clone(), n)?;
                }
                "edges" => {
                    let mut edges = Vec::new();
                    for part in value.split(',') {
                        let (from, to) = part.trim().split_once('>').ok_or_else(|| {
                            Error::Config(format!("bad edge '{part}', expected from>to"))
                        })?;
                        let from = from
                            .parse()
                            .map_err(|e| Error::Config(format!("bad edge source: {e}")))?;
                        let to = if to == "out" {
                            None
                        } else {
                            Some(to.parse().map_err(|e| {
                                Error::Config(format!("bad edge target: {e}"))
                            })?)
                        };
                        edges.push(ReservoirEdge { from, to });
                    }
                    p.edges = edges;
                }
                "level-low" => p.level_low = broadcast(parse_f64_list(value)?, p.reservoirs)?,
                "level-high" => p.level_high = broadcast(parse_f64_list(value)?, p.reservoirs)?,
                "penalty-low" => p.penalty_low = parse_f64(value)?,
                "penalty-high" => p.penalty_high = parse_f64(value)?,
                "rain-rate" => p.rain_rate = parse_f64(value)?,
                _ => return Err(unknown()),
            },
            DomainParams::Hvac(p) => match key {
                "rooms" => {
                    let n: usize = value
                        .parse()
                        .map_err(|e| Error::Config(format!("bad count '{value}': {e}")))?;
                    p.rooms = n;
                    resize_broadcast(&mut p.set_temps, n);
                    self.domain.initial_state =
                        broadcast(self.domain.initial_state.clone(), n)?;
                }
                "edges" => {
                    let mut edges = Vec::new();
                    for part in value.split(',') {
                        let (a, b) = part.trim().split_once('-').ok_or_else(|| {
                            Error::Config(format!("bad edge '{part}', expected a-b"))
                        })?;
                        edges.push((
                            a.parse().map_err(|e| Error::Config(format!("bad room: {e}")))?,
                            b.parse().map_err(|e| Error::Config(format!("bad room: {e}")))?,
                        ));
                    }
                    p.edges = edges;
                    resize_broadcast(&mut p.edge_resistance, p.edges.len());
                    resize_broadcast(&mut p.edge_noise, p.edges.len());
                }
                "edge-resistance" => {
                    p.edge_resistance = broadcast(parse_f64_list(value)?, p.edges.len())?
                }
                "edge-noise" => p.edge_noise = broadcast(parse_f64_list(value)?, p.edges.len())?,
                "dispersion-cap" => p.dispersion_cap = parse_f64(value)?,
                "heater-temp" => p.heater_temp = parse_f64(value)?,
                "set-temps" => p.set_temps = broadcast(parse_f64_list(value)?, p.rooms)?,
                "cold-threshold" => p.cold_threshold = parse_f64(value)?,
                "cold-penalty" => p.cold_penalty = parse_f64(value)?,
                "outdoor-mean" => p.outdoor_mean = parse_f64(value)?,
                "outdoor-noise" => p.outdoor_noise = parse_f64(value)?,
                "outdoor-resistance" => p.outdoor_resistance = parse_f64(value)?,
                "actuation-noise" => p.actuation_noise = parse_f64(value)?,
                "action-max" => p.action_max = parse_f64(value)?,
                _ => return Err(unknown()),
            },
            DomainParams::QuadraticToy(p) => match key {
                "target" => p.target = parse_f64(value)?,
                _ => return Err(unknown()),
            },
        }
        Ok(())
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number '{s}': {e}")))
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_f64).collect()
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim().parse::<usize>().map_err(|e| Error::Config(format!("bad integer '{p}': {e}")))
        })
        .collect()
}

fn set_usize(slot: &mut usize, value: &str) -> Result<()> {
    *slot = value
        .trim()
        .parse::<usize>()
        .map_err(|e| Error::Config(format!("bad integer '{value}': {e}")))?;
    Ok(())
}

fn set_bool(slot: &mut bool, value: &str) -> Result<()> {
    *slot = match value.trim() {
        "true" => true,
        "false" => false,
        other => return Err(Error::Config(format!("bad boolean '{other}'"))),
    };
    Ok(())
}

fn pair(s: &str) -> Result<[f64; 2]> {
    let v = parse_f64_list(s)?;
    if v.len() != 2 {
        return Err(Error::Config(format!("expected two comma-separated numbers, got '{s}'")));
    }
    Ok([v[0], v[1]])
}

/// A one-element list broadcasts to `n`; otherwise the length must match.
fn broadcast(v: Vec<f64>, n: usize) -> Result<Vec<f64>> {
    if v.len() == n {
        Ok(v)
    } else if v.len() == 1 {
        Ok(vec![v[0]; n])
    } else {
        Err(Error::Config(format!("expected 1 or {n} values, got {}", v.len())))
    }
}

fn resize_broadcast(v: &mut Vec<f64>, n: usize) {
    let fill = v.last().copied().unwrap_or(0.0);
    v.resize(n, fill);
}

fn parse_sections(text: &str, path: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.into(),
            detail: format!("line {}: expected 'key = value', got '{raw}'", ln + 1),
        })?;
        if section.is_empty() {
            return Err(Error::Parse {
                path: path.into(),
                detail: format!("line {}: key before any [section]", ln + 1),
            });
        }
        out.insert(format!("{section}.{}", key.trim()), value.trim().to_string());
    }
    Ok(out)
}
