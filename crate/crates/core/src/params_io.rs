//! Trained-parameter files.
//!
//! Versioned flat text: a header naming the domain, method, shapes, seed and
//! resolved-config hash, then one parameter per line at 17 significant digits
//! (enough for an exact f64 round trip, so save/load/eval reproduces in-memory
//! evaluation bitwise).

use std::path::Path;

use crate::domains::ActionHead;
use crate::error::{Error, Result};
use crate::planners::{Method, Plan, PolicyParams, Representation};

const MAGIC: &str = "riskplan-params v1";

#[derive(Debug)]
pub struct LoadedParams {
    pub representation: Representation,
    pub domain: String,
    pub seed: u64,
    pub config_hash: String,
}

pub fn params_text(rep: &Representation, domain: &str, seed: u64, config_hash: &str) -> String {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("domain = {domain}\n"));
    out.push_str(&format!("method = {}\n", rep.method().as_str()));
    out.push_str(&format!("seed = {seed}\n"));
    out.push_str(&format!("config-hash = {config_hash}\n"));
    match rep {
        Representation::Plan(p) => {
            out.push_str(&format!("shape = plan:{}x{}\n", p.rows(), p.action_dim));
        }
        Representation::Policy(p) => {
            let mut dims = vec![p.state_dim.to_string()];
            dims.extend(p.hidden.iter().map(|h| h.to_string()));
            dims.push(p.action_dim.to_string());
            out.push_str(&format!("shape = policy:{}\n", dims.join(",")));
            let head = match p.head {
                ActionHead::TanhBound(b) => format!("tanh-bound:{b}"),
                ActionHead::ScaledSigmoid(b) => format!("scaled-sigmoid:{b}"),
                ActionHead::ScaledSoftplus(c) => format!("scaled-softplus:{c}"),
                ActionHead::Linear => "linear".into(),
            };
            out.push_str(&format!("head = {head}\n"));
            let center: Vec<String> = p.input_center.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&format!("input-center = {}\n", center.join(",")));
            out.push_str(&format!("input-scale = {:.16e}\n", p.input_scale));
        }
    }
    out.push_str("values:\n");
    for v in rep.values() {
        out.push_str(&format!("{v:.16e}\n"));
    }
    out
}

pub fn save_params(path: &Path, rep: &Representation, domain: &str, seed: u64, config_hash: &str) -> Result<()> {
    std::fs::write(path, params_text(rep, domain, seed, config_hash))?;
    Ok(())
}

pub fn parse_params(text: &str, path: &str) -> Result<LoadedParams> {
    let perr = |detail: String| Error::Parse { path: path.into(), detail };
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim() == MAGIC => {}
        other => return Err(perr(format!("expected '{MAGIC}' header, got {other:?}"))),
    }
    let mut domain = None;
    let mut method = None;
    let mut seed = 0u64;
    let mut config_hash = String::new();
    let mut shape = None;
    let mut head = ActionHead::Linear;
    let mut input_center: Option<Vec<f64>> = None;
    let mut input_scale = 1.0;
    for line in lines.by_ref() {
        let line = line.trim();
        if line == "values:" {
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| perr(format!("expected 'key = value' before values, got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "domain" => domain = Some(value.to_string()),
            "method" => {
                method = Some(
                    Method::from_str(value).ok_or_else(|| perr(format!("unknown method '{value}'")))?,
                )
            }
            "seed" => seed = value.parse().map_err(|e| perr(format!("bad seed: {e}")))?,
            "config-hash" => config_hash = value.to_string(),
            "shape" => shape = Some(value.to_string()),
            "head" => {
                head = if value == "linear" {
                    ActionHead::Linear
                } else if let Some(b) = value.strip_prefix("tanh-bound:") {
                    ActionHead::TanhBound(b.parse().map_err(|e| perr(format!("bad head bound: {e}")))?)
                } else if let Some(b) = value.strip_prefix("scaled-sigmoid:") {
                    ActionHead::ScaledSigmoid(
                        b.parse().map_err(|e| perr(format!("bad head bound: {e}")))?,
                    )
                } else if let Some(c) = value.strip_prefix("scaled-softplus:") {
                    ActionHead::ScaledSoftplus(
                        c.parse().map_err(|e| perr(format!("bad head scale: {e}")))?,
                    )
                } else {
                    return Err(perr(format!("unknown head '{value}'")));
                }
            }
            "input-center" => {
                input_center = Some(
                    value
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| perr(format!("bad input-center: {e}")))?,
                )
            }
            "input-scale" => {
                input_scale = value.parse().map_err(|e| perr(format!("bad input-scale: {e}")))?
            }
            _ => return Err(perr(format!("unknown header key '{key}'"))),
        }
    }
    let domain = domain.ok_or_else(|| perr("missing domain".into()))?;
    let method = method.ok_or_else(|| perr("missing method".into()))?;
    let shape = shape.ok_or_else(|| perr("missing shape".into()))?;

    let mut values = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(line.parse::<f64>().map_err(|e| perr(format!("bad value '{line}': {e}")))?);
    }

    let representation = match method {
        Method::Slp => {
            let spec = shape
                .strip_prefix("plan:")
                .ok_or_else(|| perr(format!("plan shape expected, got '{shape}'")))?;
            let (rows, dim) = spec
                .split_once('x')
                .ok_or_else(|| perr("plan shape must be ROWSxDIM".into()))?;
            let rows: usize = rows.parse().map_err(|e| perr(format!("bad rows: {e}")))?;
            let dim: usize = dim.parse().map_err(|e| perr(format!("bad dim: {e}")))?;
            if values.len() != rows * dim {
                return Err(perr(format!(
                    "plan {rows}x{dim} needs {} values, file has {}",
                    rows * dim,
                    values.len()
                )));
            }
            Representation::Plan(Plan { action_dim: dim, values })
        }
        Method::Drp => {
            let spec = shape
                .strip_prefix("policy:")
                .ok_or_else(|| perr(format!("policy shape expected, got '{shape}'")))?;
            let dims: Vec<usize> = spec
                .split(',')
                .map(|d| d.parse::<usize>().map_err(|e| perr(format!("bad layer dim: {e}"))))
                .collect::<Result<_>>()?;
            if dims.len() < 2 {
                return Err(perr("policy shape needs at least input and output dims".into()));
            }
            let state_dim = dims[0];
            let center = input_center.unwrap_or_else(|| vec![0.0; state_dim]);
            if center.len() != state_dim {
                return Err(perr(format!(
                    "input-center has {} entries for state dim {state_dim}",
                    center.len()
                )));
            }
            let policy = PolicyParams {
                state_dim,
                action_dim: dims[dims.len() - 1],
                hidden: dims[1..dims.len() - 1].to_vec(),
                head,
                input_center: center,
                input_scale,
                values,
            };
            if policy.values.len() != policy.param_count() {
                return Err(perr(format!(
                    "policy shape {spec} needs {} values, file has {}",
                    policy.param_count(),
                    policy.values.len()
                )));
            }
            Representation::Policy(policy)
        }
    };
    Ok(LoadedParams { representation, domain, seed, config_hash })
}

pub fn load_params(path: &Path) -> Result<LoadedParams> {
    let text = std::fs::read_to_string(path)?;
    parse_params(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainSpec;

    #[test]
    fn plan_roundtrip_is_bitwise() {
        let domain = DomainSpec::navigation_default();
        let mut plan = Plan::zeros(&domain);
        for (k, v) in plan.values.iter_mut().enumerate() {
            *v = (k as f64 * 0.7).sin() / 3.0;
        }
        let rep = Representation::Plan(plan);
        let text = params_text(&rep, "navigation", 9, "deadbeef");
        let loaded = parse_params(&text, "mem").unwrap();
        assert_eq!(loaded.domain, "navigation");
        assert_eq!(loaded.seed, 9);
        assert_eq!(loaded.config_hash, "deadbeef");
        let bits = |r: &Representation| r.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&rep), bits(&loaded.representation));
    }

    #[test]
    fn policy_roundtrip_preserves_shape_head_and_normalization() {
        let p = PolicyParams::init_raw(
            3,
            2,
            &[8, 4],
            ActionHead::TanhBound(0.5),
            vec![1.0, -2.0, 0.25],
            7.5,
            7,
        );
        let rep = Representation::Policy(p);
        let text = params_text(&rep, "navigation", 1, "00");
        let loaded = parse_params(&text, "mem").unwrap();
        match &loaded.representation {
            Representation::Policy(q) => {
                assert_eq!(q.hidden, vec![8, 4]);
                assert_eq!(q.head, ActionHead::TanhBound(0.5));
                assert_eq!(q.input_center, vec![1.0, -2.0, 0.25]);
                assert_eq!(q.input_scale, 7.5);
                assert_eq!(q.values, rep.values());
            }
            _ => panic!("expected policy"),
        }
    }

    #[test]
    fn truncated_files_are_rejected() {
        let p = PolicyParams::init_raw(
            2,
            1,
            &[4],
            ActionHead::ScaledSoftplus(1.0),
            vec![0.0; 2],
            1.0,
            3,
        );
        let rep = Representation::Policy(p);
        let text = params_text(&rep, "hvac", 1, "00");
        let cut = &text[..text.len() - 30];
        assert!(parse_params(cut, "mem").is_err());
        assert!(parse_params("not a params file", "mem").is_err());
    }
}
