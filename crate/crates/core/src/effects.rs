//! Mediation (indirect effects along structural chains) and moderation
//! reporting on top of the PLS and bootstrap results.

use serde::Serialize;

use crate::bootstrap::{bc_interval, t_and_p, BootstrapResult, TTest};
use crate::error::{Error, Result};
use crate::model_spec::{ModelSpec, PathRole};
use crate::pls::PlsEstimate;

/// Directed simple chains of two or more structural edges ending at a
/// terminal construct, ordered by length and then lexicographically.
///
/// A chain must pass through at least one construct that is not a
/// second-order composite: component -> composite edges describe
/// composition, so `FA -> UE -> ITI` alone is not a mediation chain while
/// `FA -> UE -> IMG -> ITI` is.
pub fn enumerate_indirect(m: &ModelSpec) -> Vec<Vec<String>> {
    let sinks = m.sinks();
    let edges: Vec<(&str, &str)> = m
        .paths
        .iter()
        .filter(|p| p.role == PathRole::Structural)
        .map(|p| (p.source.as_str(), p.target.as_str()))
        .collect();
    let higher = |n: &str| m.construct(n).map(|c| c.is_higher_order()).unwrap_or(false);

    let mut chains: Vec<Vec<String>> = Vec::new();
    let mut stack: Vec<&str> = Vec::new();

    fn walk<'a>(
        node: &'a str,
        edges: &[(&'a str, &'a str)],
        sinks: &[&str],
        stack: &mut Vec<&'a str>,
        out: &mut Vec<Vec<String>>,
        higher: &dyn Fn(&str) -> bool,
    ) {
        stack.push(node);
        if stack.len() >= 3 && sinks.contains(&node) {
            let mediated = stack[1..stack.len() - 1].iter().any(|n| !higher(n));
            if mediated {
                out.push(stack.iter().map(|s| s.to_string()).collect());
            }
        }
        for &(s, t) in edges {
            if s == node && !stack.contains(&t) {
                walk(t, edges, sinks, stack, out, higher);
            }
        }
        stack.pop();
    }

    for c in &m.constructs {
        walk(&c.name, &edges, &sinks, &mut stack, &mut chains, &higher);
    }
    chains.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    chains.dedup();
    chains
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndirectEffect {
    pub chain: Vec<String>,
    pub estimate: f64,
    pub test: TTest,
    pub interval: Option<(f64, f64)>,
    pub supported: bool,
}

impl IndirectEffect {
    pub fn label(&self) -> String {
        self.chain.join(" -> ")
    }
}

/// Product of the chain's path estimates, tested against the
/// per-replication product distribution.
pub fn indirect_effect(
    chain: &[String],
    e: &PlsEstimate,
    b: &BootstrapResult,
    alpha: f64,
) -> Result<IndirectEffect> {
    if chain.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "indirect chain needs at least 3 constructs, got {}",
            chain.len()
        )));
    }
    let mut estimate = 1.0;
    let mut resamples = vec![1.0; b.successful_reps()];
    for w in chain.windows(2) {
        let missing = || Error::InvalidParameter(format!("no estimated path {} -> {}", w[0], w[1]));
        estimate *= e.path(&w[0], &w[1]).ok_or_else(missing)?;
        let ps = b.path(&w[0], &w[1]).ok_or_else(missing)?;
        for (r, v) in resamples.iter_mut().zip(&ps.resamples) {
            *r *= v;
        }
    }
    let test = t_and_p(&resamples, estimate)?;
    Ok(IndirectEffect {
        chain: chain.to_vec(),
        estimate,
        interval: bc_interval(&resamples, estimate, b.level).ok(),
        supported: test.t.is_some() && test.p < alpha,
        test,
    })
}

/// Direct, indirect, and total effect between two constructs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalEffect {
    pub source: String,
    pub target: String,
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
}

/// Total effects over all structural and control paths, for every ordered
/// pair of constructs connected by at least one directed path.
pub fn total_effects(m: &ModelSpec, e: &PlsEstimate) -> Vec<TotalEffect> {
    let names: Vec<&str> = m.constructs.iter().map(|c| c.name.as_str()).collect();
    let mut out = Vec::new();
    for &s in &names {
        for &t in &names {
            if s == t {
                continue;
            }
            let mut direct = 0.0;
            let mut indirect = 0.0;
            let mut connected = false;
            let mut stack = vec![s];
            sum_chains(m, e, s, t, 1.0, &mut stack, &mut |prod, len| {
                connected = true;
                if len == 2 {
                    direct += prod;
                } else {
                    indirect += prod;
                }
            });
            if connected {
                out.push(TotalEffect {
                    source: s.into(),
                    target: t.into(),
                    direct,
                    indirect,
                    total: direct + indirect,
                });
            }
        }
    }
    out
}

fn sum_chains<'a>(
    m: &'a ModelSpec,
    e: &PlsEstimate,
    node: &str,
    target: &str,
    prod: f64,
    stack: &mut Vec<&'a str>,
    visit: &mut dyn FnMut(f64, usize),
) {
    for p in m.paths.iter().filter(|p| p.source == node) {
        if stack.contains(&p.target.as_str()) {
            continue;
        }
        let Some(coef) = e.path(&p.source, &p.target) else { continue };
        stack.push(&p.target);
        if p.target == target {
            visit(prod * coef, stack.len());
        } else {
            sum_chains(m, e, &p.target, target, prod * coef, stack, visit);
        }
        stack.pop();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModerationVerdict {
    pub interaction: String,
    pub target: String,
    pub coefficient: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub sign: Sign,
    pub supported: bool,
    pub verdict: String,
}

/// Verdict text for one interaction term, e.g. "negative, significant at 0.05".
pub fn moderation_verdict(coefficient: f64, p: Option<f64>, alpha: f64) -> (Sign, bool, String) {
    let sign = if coefficient > 0.0 {
        Sign::Positive
    } else if coefficient < 0.0 {
        Sign::Negative
    } else {
        Sign::Zero
    };
    let supported = matches!(p, Some(p) if p < alpha);
    let word = match sign {
        Sign::Positive => "positive",
        Sign::Negative => "negative",
        Sign::Zero => "zero",
    };
    let text = match p {
        None => format!("{word}, not tested"),
        Some(_) if supported => format!("{word}, significant at {alpha}"),
        Some(_) => format!("{word}, not significant at {alpha}"),
    };
    (sign, supported, text)
}

/// One verdict per interaction term. Without a bootstrap the terms are
/// reported untested.
pub fn moderation_report(
    m: &ModelSpec,
    e: &PlsEstimate,
    b: Option<&BootstrapResult>,
    alpha: f64,
) -> Result<Vec<ModerationVerdict>> {
    m.interactions
        .iter()
        .map(|ix| {
            let name = ix.name();
            let coefficient = e.path(&name, &ix.target).ok_or_else(|| {
                Error::InvalidParameter(format!("interaction {name} -> {} not estimated", ix.target))
            })?;
            let (t, p) = match b.and_then(|b| b.path(&name, &ix.target)) {
                Some(ps) => (ps.test.t, ps.test.t.map(|_| ps.test.p)),
                None => (None, None),
            };
            let (sign, supported, verdict) = moderation_verdict(coefficient, p, alpha);
            Ok(ModerationVerdict {
                interaction: name,
                target: ix.target.clone(),
                coefficient,
                t,
                p,
                sign,
                supported,
                verdict,
            })
        })
        .collect()
}
