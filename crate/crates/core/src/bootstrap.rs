//! Case-resampling bootstrap over every PLS parameter, with normal-theory
//! t/p statistics and bias-corrected percentile intervals.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::StandardizedDataset;
use crate::effects::enumerate_indirect;
use crate::error::{Error, Result};
use crate::model_spec::ModelSpec;
use crate::pls::{self, PlsEstimate};
use crate::stats;

/// More failed replications than this fraction aborts the run.
pub const MAX_FAILED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ParamKey {
    Weight { construct: String, indicator: String },
    Loading { construct: String, indicator: String },
    Path { source: String, target: String },
    Indirect { chain: Vec<String> },
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKey::Weight { construct, indicator } => write!(f, "weight {indicator} <- {construct}"),
            ParamKey::Loading { construct, indicator } => write!(f, "loading {indicator} <- {construct}"),
            ParamKey::Path { source, target } => write!(f, "{source} -> {target}"),
            ParamKey::Indirect { chain } => write!(f, "{}", chain.join(" -> ")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTest {
    pub std_error: f64,
    /// `None` when the standard error is zero.
    pub t: Option<f64>,
    /// Two-tailed, standard normal. Zero by convention when `t` is undefined.
    pub p: f64,
}

/// Bootstrap standard error with a normal-theory t statistic.
pub fn t_and_p(resamples: &[f64], estimate: f64) -> Result<TTest> {
    if resamples.len() < 2 {
        return Err(Error::InvalidParameter("t statistic needs at least 2 resamples".into()));
    }
    let se = stats::sample_sd(resamples);
    let scale = resamples.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(se > 1e-12 * scale) {
        return Ok(TTest {
            std_error: 0.0,
            t: None,
            p: 0.0,
        });
    }
    let t = estimate / se;
    Ok(TTest {
        std_error: se,
        t: Some(t),
        p: stats::two_tailed_p(t),
    })
}

/// Bias-corrected (non-accelerated) percentile interval.
pub fn bc_interval(resamples: &[f64], estimate: f64, level: f64) -> Result<(f64, f64)> {
    if resamples.is_empty() {
        return Err(Error::InvalidParameter("no resamples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("interval level {level} outside (0, 1)")));
    }
    let mut sorted = resamples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if lo == hi && lo == estimate {
        return Ok((lo, hi));
    }
    let below = sorted.iter().filter(|&&r| r < estimate).count();
    if below == 0 || below == sorted.len() {
        return Err(Error::Numerical(format!(
            "all resamples on one side of the estimate {estimate}; bias correction is infinite"
        )));
    }
    let z0 = stats::normal_quantile(below as f64 / sorted.len() as f64);
    let z = stats::normal_quantile((1.0 - level) / 2.0);
    let p_lo = stats::normal_cdf(2.0 * z0 + z);
    let p_hi = stats::normal_cdf(2.0 * z0 - z);
    Ok((
        stats::quantile_sorted(&sorted, p_lo),
        stats::quantile_sorted(&sorted, p_hi),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamStats {
    pub estimate: f64,
    pub resamples: Vec<f64>,
    pub mean: f64,
    pub test: TTest,
    /// `None` when the bias correction is undefined; see `interval_note`.
    pub interval: Option<(f64, f64)>,
    pub interval_note: Option<String>,
}

impl ParamStats {
    pub fn from_resamples(estimate: f64, resamples: Vec<f64>, level: f64) -> Result<Self> {
        let test = t_and_p(&resamples, estimate)?;
        let (interval, interval_note) = match bc_interval(&resamples, estimate, level) {
            Ok(iv) => (Some(iv), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Ok(Self {
            estimate,
            mean: stats::mean(&resamples),
            resamples,
            test,
            interval,
            interval_note,
        })
    }

    pub fn bias(&self) -> f64 {
        self.mean - self.estimate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub reps: usize,
    pub failed_reps: usize,
    pub level: f64,
    pub keys: Vec<ParamKey>,
    pub params: Vec<ParamStats>,
}

impl BootstrapResult {
    pub fn get(&self, key: &ParamKey) -> Option<&ParamStats> {
        self.keys.iter().position(|k| k == key).map(|i| &self.params[i])
    }

    pub fn path(&self, source: &str, target: &str) -> Option<&ParamStats> {
        self.get(&ParamKey::Path {
            source: source.into(),
            target: target.into(),
        })
    }

    pub fn successful_reps(&self) -> usize {
        self.reps - self.failed_reps
    }
}

/// Every reported parameter of an estimate, in a fixed order: weights,
/// loadings, paths, then indirect effects along `chains`.
pub fn parameter_keys(e: &PlsEstimate, chains: &[Vec<String>]) -> Vec<ParamKey> {
    let mut keys = Vec::new();
    for b in &e.blocks {
        for ind in &b.indicators {
            keys.push(ParamKey::Weight {
                construct: b.construct.clone(),
                indicator: ind.clone(),
            });
        }
    }
    for b in &e.blocks {
        for ind in &b.indicators {
            keys.push(ParamKey::Loading {
                construct: b.construct.clone(),
                indicator: ind.clone(),
            });
        }
    }
    for p in &e.paths {
        keys.push(ParamKey::Path {
            source: p.source.clone(),
            target: p.target.clone(),
        });
    }
    for c in chains {
        keys.push(ParamKey::Indirect { chain: c.clone() });
    }
    keys
}

/// Values of `keys` in `e`, or `None` if one is absent.
pub fn parameter_values(e: &PlsEstimate, keys: &[ParamKey]) -> Option<Vec<f64>> {
    keys.iter()
        .map(|k| match k {
            ParamKey::Weight { construct, indicator } => {
                let b = e.block(construct)?;
                let i = b.indicators.iter().position(|x| x == indicator)?;
                Some(b.weights[i])
            }
            ParamKey::Loading { construct, indicator } => {
                let b = e.block(construct)?;
                let i = b.indicators.iter().position(|x| x == indicator)?;
                Some(b.loadings[i])
            }
            ParamKey::Path { source, target } => e.path(source, target),
            ParamKey::Indirect { chain } => chain
                .windows(2)
                .map(|w| e.path(&w[0], &w[1]))
                .product::<Option<f64>>(),
        })
        .collect()
}

/// Row indices of replication `rep`. Each replication owns an independent
/// ChaCha stream, so results do not depend on scheduling.
pub fn resample_indices(n: usize, seed: u64, rep: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Runs `reps` case-resampling replications on the current rayon pool.
pub fn run_bootstrap(
    m: &ModelSpec,
    d: &StandardizedDataset,
    reps: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult> {
    let full = pls::fit(m, d)?;
    run_bootstrap_from(m, d, &full, reps, seed, level)
}

/// As [`run_bootstrap`], reusing an existing full-sample estimate.
pub fn run_bootstrap_from(
    m: &ModelSpec,
    d: &StandardizedDataset,
    full: &PlsEstimate,
    reps: usize,
    seed: u64,
    level: f64,
) -> Result<BootstrapResult> {
    if reps < 2 {
        return Err(Error::InvalidParameter("bootstrap needs at least 2 replications".into()));
    }
    let n = d.n_cases();
    if n < 2 {
        return Err(Error::EmptyDataset("bootstrap needs at least 2 cases".into()));
    }
    let chains = enumerate_indirect(m);
    let keys = parameter_keys(full, &chains);
    let estimates = parameter_values(full, &keys).expect("keys come from the estimate");

    let draws: Vec<Option<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rows = resample_indices(n, seed, rep);
            let boot = d.resample(&rows).ok()?;
            let e = pls::fit(m, &boot).ok()?;
            parameter_values(&e, &keys)
        })
        .collect();

    let failed = draws.iter().filter(|d| d.is_none()).count();
    if failed as f64 > MAX_FAILED_FRACTION * reps as f64 {
        return Err(Error::UnstableBootstrap { failed, reps });
    }
    let ok: Vec<Vec<f64>> = draws.into_iter().flatten().collect();
    if ok.len() < 2 {
        return Err(Error::UnstableBootstrap { failed, reps });
    }

    let params = keys
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let resamples: Vec<f64> = ok.iter().map(|row| row[i]).collect();
            ParamStats::from_resamples(estimates[i], resamples, level)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BootstrapResult {
        reps,
        failed_reps: failed,
        level,
        keys,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_resamples() {
        let r = vec![0.3; 10];
        let t = t_and_p(&r, 0.3).unwrap();
        assert_eq!(t.std_error, 0.0);
        assert!(t.t.is_none());
        assert_eq!(t.p, 0.0);
        assert_eq!(bc_interval(&r, 0.3, 0.95).unwrap(), (0.3, 0.3));
    }

    #[test]
    fn one_sided_resamples_are_flagged() {
        let r = [1.0, 2.0, 3.0];
        assert!(bc_interval(&r, 0.5, 0.95).is_err());
        assert!(bc_interval(&r, 3.5, 0.95).is_err());
        assert!(bc_interval(&[], 0.0, 0.95).is_err());
        assert!(bc_interval(&r, 2.0, 1.0).is_err());
    }

    #[test]
    fn zero_estimate_has_unit_p() {
        let t = t_and_p(&[-1.0, 0.0, 1.0], 0.0).unwrap();
        assert_eq!(t.t, Some(0.0));
        assert_eq!(t.p, 1.0);
    }

    #[test]
    fn reported_indirect_test_p_value() {
        // estimate 0.107 with t = 2.669
        let se = 0.107 / 2.669;
        let h = se / 2f64.sqrt();
        let t = t_and_p(&[0.107 - h, 0.107 + h], 0.107).unwrap();
        assert!((t.t.unwrap() - 2.669).abs() < 1e-9);
        assert!((t.p - 0.0076).abs() < 5e-5);
        assert_eq!((t.p * 1000.0).round() / 1000.0, 0.008);
    }

    #[test]
    fn normal_reference_value() {
        let t = t_and_p(&[-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()], 1.96).unwrap();
        assert!((t.std_error - 1.0).abs() < 1e-12);
        assert!((t.p - 0.0500).abs() < 5e-5);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        assert_eq!(resample_indices(50, 9, 3), resample_indices(50, 9, 3));
        assert_ne!(resample_indices(50, 9, 3), resample_indices(50, 9, 4));
        assert!(resample_indices(50, 9, 0).iter().all(|&i| i < 50));
    }
}
