//! PLS path modeling: alternating outer and inner approximation with the
//! path weighting scheme, then OLS inner regressions on the converged
//! latent scores. Interaction terms are built afterwards from the
//! main-effects scores (two-stage approach).

use nalgebra::{DMatrix, DVector};

use crate::dataset::StandardizedDataset;
use crate::error::{Error, Result};
use crate::model_spec::{expand_higher_order, Mode, ModelSpec, PathRole};
use crate::stats::{self, ols_centered};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlsSettings {
    pub max_iterations: usize,
    /// Stop once the largest absolute change in any outer weight is below this.
    pub tolerance: f64,
}

impl Default for PlsSettings {
    fn default() -> Self {
        Self {
            max_iterations: 300,
            tolerance: 1e-7,
        }
    }
}

/// Measurement estimates for one construct.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub construct: String,
    pub mode: Mode,
    /// Repeated-indicator block of a second-order construct.
    pub higher_order: bool,
    /// First-order constructs whose indicators a second-order block repeats.
    pub components: Vec<String>,
    pub indicators: Vec<String>,
    pub weights: Vec<f64>,
    pub loadings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEstimate {
    pub source: String,
    pub target: String,
    pub role: PathRole,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlsEstimate {
    /// Score column names: model constructs, then interaction terms.
    pub constructs: Vec<String>,
    pub blocks: Vec<Block>,
    /// Standardized latent scores, one column per entry of `constructs`.
    pub scores: DMatrix<f64>,
    pub paths: Vec<PathEstimate>,
    /// R² per endogenous construct.
    pub r_squared: Vec<(String, f64)>,
    pub iterations: usize,
}

impl PlsEstimate {
    pub fn score_index(&self, name: &str) -> Option<usize> {
        self.constructs.iter().position(|c| c == name)
    }

    pub fn score(&self, name: &str) -> Option<&[f64]> {
        let j = self.score_index(name)?;
        let n = self.scores.nrows();
        Some(&self.scores.as_slice()[j * n..(j + 1) * n])
    }

    pub fn block(&self, construct: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.construct == construct)
    }

    pub fn path(&self, source: &str, target: &str) -> Option<f64> {
        self.paths
            .iter()
            .find(|p| p.source == source && p.target == target)
            .map(|p| p.coefficient)
    }

    pub fn n_cases(&self) -> usize {
        self.scores.nrows()
    }
}

/// Coefficient of determination of `target`'s inner regression.
pub fn r_squared(e: &PlsEstimate, target: &str) -> Result<f64> {
    e.r_squared
        .iter()
        .find(|(t, _)| t == target)
        .map(|(_, r)| *r)
        .ok_or_else(|| {
            Error::InvalidParameter(format!("`{target}` is exogenous; it has no R²"))
        })
}

struct BlockData {
    x: DMatrix<f64>,
    // Mode B only: X'X
    gram: Option<DMatrix<f64>>,
}

/// Main-effects PLS estimation. Interaction terms are not included; see
/// [`build_interaction_scores`] or [`fit`].
pub fn estimate(m: &ModelSpec, d: &StandardizedDataset) -> Result<PlsEstimate> {
    estimate_with(m, d, &PlsSettings::default())
}

pub fn estimate_with(
    m: &ModelSpec,
    d: &StandardizedDataset,
    settings: &PlsSettings,
) -> Result<PlsEstimate> {
    let m = expand_higher_order(m)?;
    let n = d.n_cases();
    if n < 2 {
        return Err(Error::EmptyDataset("estimation needs at least 2 cases".into()));
    }
    let nm1 = (n - 1) as f64;
    let k = m.constructs.len();

    let mut blocks = Vec::with_capacity(k);
    for c in &m.constructs {
        let cols: Vec<usize> = c
            .indicators
            .iter()
            .map(|ind| {
                d.column_index(ind).ok_or_else(|| {
                    Error::Spec(format!(
                        "indicator `{ind}` of construct `{}` is not a dataset column",
                        c.name
                    ))
                })
            })
            .collect::<Result<_>>()?;
        let x = DMatrix::from_fn(n, cols.len(), |i, j| d.column(cols[j])[i]);
        let gram = match c.mode {
            Mode::Formative => {
                let g = x.tr_mul(&x);
                // surface collinear blocks before iterating
                stats::solve_spd(g.clone(), DVector::zeros(cols.len()), &c.name)?;
                Some(g)
            }
            Mode::Reflective => None,
        };
        blocks.push(BlockData { x, gram });
    }

    let idx = |name: &str| m.construct_index(name).expect("validated construct");
    let preds: Vec<Vec<usize>> = m
        .constructs
        .iter()
        .map(|c| m.predecessors(&c.name).into_iter().map(idx).collect())
        .collect();
    let succs: Vec<Vec<usize>> = m
        .constructs
        .iter()
        .map(|c| m.successors(&c.name).into_iter().map(idx).collect())
        .collect();

    let mut weights: Vec<DVector<f64>> = blocks
        .iter()
        .map(|b| {
            let w = DVector::from_element(b.x.ncols(), 1.0);
            normalize_weights(&b.x, w.clone(), &w)
        })
        .collect();
    let mut scores = score_matrix(&blocks, &weights);

    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    while last_change >= settings.tolerance {
        if iterations == settings.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                last_change,
            });
        }
        iterations += 1;

        // inner approximation, path weighting scheme
        let mut proxies = Vec::with_capacity(k);
        for j in 0..k {
            let yj = scores.column(j);
            let mut z = DVector::<f64>::zeros(n);
            if !preds[j].is_empty() {
                let xp = scores.select_columns(&preds[j]);
                let fit = ols_centered(&xp, yj.as_slice(), &m.constructs[j].name)?;
                for (b, &p) in fit.coefficients.iter().zip(&preds[j]) {
                    z.axpy(*b, &scores.column(p), 1.0);
                }
            }
            for &s in &succs[j] {
                let r = yj.dot(&scores.column(s)) / nm1;
                z.axpy(r, &scores.column(s), 1.0);
            }
            if preds[j].is_empty() && succs[j].is_empty() {
                z.copy_from(&yj);
            }
            proxies.push(z);
        }

        // outer approximation
        last_change = 0.0;
        for j in 0..k {
            let b = &blocks[j];
            let xtz = b.x.tr_mul(&proxies[j]);
            let raw = match &b.gram {
                None => xtz / nm1,
                Some(g) => stats::solve_spd(g.clone(), xtz, &m.constructs[j].name)?,
            };
            let w = normalize_weights(&b.x, raw, &weights[j]);
            let change = (&w - &weights[j]).amax();
            last_change = last_change.max(change);
            weights[j] = w;
        }
        scores = score_matrix(&blocks, &weights);
    }

    let mut out_blocks = Vec::with_capacity(k);
    for (j, c) in m.constructs.iter().enumerate() {
        let y = scores.column(j);
        let loadings = blocks[j]
            .x
            .column_iter()
            .map(|xc| stats::correlation(xc.as_slice(), y.as_slice()))
            .collect();
        out_blocks.push(Block {
            construct: c.name.clone(),
            mode: c.mode,
            higher_order: c.is_higher_order(),
            components: c.expanded_from.clone(),
            indicators: c.indicators.clone(),
            weights: weights[j].iter().copied().collect(),
            loadings,
        });
    }

    let mut est = PlsEstimate {
        constructs: m.constructs.iter().map(|c| c.name.clone()).collect(),
        blocks: out_blocks,
        scores,
        paths: Vec::new(),
        r_squared: Vec::new(),
        iterations,
    };
    for target in m.endogenous() {
        let sources: Vec<(String, PathRole)> = m
            .paths
            .iter()
            .filter(|p| p.target == target)
            .map(|p| (p.source.clone(), p.role))
            .collect();
        if sources.is_empty() {
            continue;
        }
        inner_regression(&mut est, target, &sources)?;
    }
    Ok(est)
}

/// Scales `w` so that `x w` has unit sample variance. Keeps `fallback` when
/// the proxy carries no signal.
fn normalize_weights(x: &DMatrix<f64>, w: DVector<f64>, fallback: &DVector<f64>) -> DVector<f64> {
    let y = x * &w;
    let sd = stats::sample_sd(y.as_slice());
    if sd > 1e-300 && sd.is_finite() {
        w / sd
    } else {
        fallback.clone()
    }
}

fn score_matrix(blocks: &[BlockData], weights: &[DVector<f64>]) -> DMatrix<f64> {
    let n = blocks[0].x.nrows();
    let mut s = DMatrix::zeros(n, blocks.len());
    for (j, (b, w)) in blocks.iter().zip(weights).enumerate() {
        s.set_column(j, &(&b.x * w));
    }
    s
}

/// Regresses `target` on `sources`, replacing any existing path estimates
/// into `target` and its R².
fn inner_regression(
    est: &mut PlsEstimate,
    target: &str,
    sources: &[(String, PathRole)],
) -> Result<()> {
    let cols: Vec<usize> = sources
        .iter()
        .map(|(s, _)| est.score_index(s).expect("score column"))
        .collect();
    let t = est.score_index(target).expect("score column");
    let x = est.scores.select_columns(&cols);
    let y = est.scores.column(t).clone_owned();
    let fit = ols_centered(&x, y.as_slice(), &format!("inner regression of {target}"))?;

    est.paths.retain(|p| p.target != target);
    for ((source, role), coef) in sources.iter().zip(&fit.coefficients) {
        est.paths.push(PathEstimate {
            source: source.clone(),
            target: target.to_string(),
            role: *role,
            coefficient: *coef,
        });
    }
    match est.r_squared.iter_mut().find(|(n, _)| n == target) {
        Some(slot) => slot.1 = fit.r_squared,
        None => est.r_squared.push((target.to_string(), fit.r_squared)),
    }
    Ok(())
}

/// Appends one re-standardized product score per interaction term and
/// re-runs the inner regression of each affected target with the products
/// included.
pub fn build_interaction_scores(e: &PlsEstimate, m: &ModelSpec) -> Result<PlsEstimate> {
    let mut est = e.clone();
    if m.interactions.is_empty() {
        return Ok(est);
    }
    let n = est.n_cases();
    for ix in &m.interactions {
        let name = ix.name();
        if est.score_index(&name).is_some() {
            continue;
        }
        let a = est
            .score(&ix.moderator)
            .ok_or_else(|| Error::Spec(format!("no score for moderator `{}`", ix.moderator)))?;
        let b = est
            .score(&ix.focal)
            .ok_or_else(|| Error::Spec(format!("no score for focal `{}`", ix.focal)))?;
        let mut prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
        if stats::standardize_in_place(&mut prod).is_none() {
            return Err(Error::ZeroVariance(name));
        }
        let c = est.scores.ncols();
        est.scores = est.scores.clone().insert_column(c, 0.0);
        est.scores.set_column(c, &DVector::from_vec(prod));
        est.constructs.push(name);
    }
    debug_assert_eq!(est.scores.nrows(), n);

    let mut targets: Vec<&str> = Vec::new();
    for ix in &m.interactions {
        if !targets.contains(&ix.target.as_str()) {
            targets.push(&ix.target);
        }
    }
    for target in targets {
        let mut sources: Vec<(String, PathRole)> = m
            .paths
            .iter()
            .filter(|p| p.target == target)
            .map(|p| (p.source.clone(), p.role))
            .collect();
        sources.extend(m.interactions_on(target).map(|i| (i.name(), PathRole::Interaction)));
        // keep declaration order stable: rebuild this target's block of paths in place
        let first = est.paths.iter().position(|p| p.target == target);
        inner_regression(&mut est, target, &sources)?;
        if let Some(pos) = first {
            let moved: Vec<PathEstimate> = est.paths.drain(est.paths.len() - sources.len()..).collect();
            for (i, p) in moved.into_iter().enumerate() {
                est.paths.insert(pos + i, p);
            }
        }
    }
    Ok(est)
}

/// Main effects followed by interaction terms, when the model has any.
pub fn fit(m: &ModelSpec, d: &StandardizedDataset) -> Result<PlsEstimate> {
    let e = estimate(m, d)?;
    build_interaction_scores(&e, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_spec::parse_spec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_single(extra: &str) -> ModelSpec {
        parse_spec(&format!(
            r#"{{"constructs":[{{"name":"A","mode":"reflective","indicators":["a"]}},
                {{"name":"B","mode":"reflective","indicators":["b"]}}],
                "paths":[{{"from":"A","to":"B"}}]{extra}}}"#
        ))
        .unwrap()
    }

    fn data(cols: &[&str], rows: usize, f: impl Fn(usize, &mut ChaCha8Rng) -> Vec<f64>) -> StandardizedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut m = DMatrix::zeros(rows, cols.len());
        for i in 0..rows {
            let r = f(i, &mut rng);
            for j in 0..cols.len() {
                m[(i, j)] = r[j];
            }
        }
        StandardizedDataset::from_matrix(cols.iter().map(|s| s.to_string()).collect(), m).unwrap()
    }

    #[test]
    fn single_indicator_score_is_the_indicator() {
        let d = data(&["a", "b"], 50, |_, r| {
            let x: f64 = StandardNormal.sample(r);
            let e: f64 = StandardNormal.sample(r);
            vec![x, 0.6 * x + e]
        });
        let e = estimate(&two_single(""), &d).unwrap();
        for (s, x) in e.score("A").unwrap().iter().zip(d.column(0)) {
            assert!((s - x).abs() < 1e-12);
        }
        let r = stats::correlation(d.column(0), d.column(1));
        assert!((e.path("A", "B").unwrap() - r).abs() < 1e-10);
        assert!((r_squared(&e, "B").unwrap() - r * r).abs() < 1e-10);
    }

    #[test]
    fn exogenous_r_squared_is_an_error() {
        let d = data(&["a", "b"], 20, |_, r| {
            vec![StandardNormal.sample(r), StandardNormal.sample(r)]
        });
        let e = estimate(&two_single(""), &d).unwrap();
        assert!(r_squared(&e, "A").is_err());
    }

    #[test]
    fn collinear_formative_block_is_singular() {
        let m = parse_spec(
            r#"{"constructs":[{"name":"F","mode":"formative","indicators":["x","y","z"]},
                {"name":"B","mode":"reflective","indicators":["b"]}],
                "paths":[{"from":"F","to":"B"}]}"#,
        )
        .unwrap();
        let d = data(&["x", "y", "z", "b"], 40, |_, r| {
            let x: f64 = StandardNormal.sample(r);
            let y: f64 = StandardNormal.sample(r);
            let b: f64 = StandardNormal.sample(r);
            vec![x, y, x - 2.0 * y, b]
        });
        match estimate(&m, &d).unwrap_err() {
            Error::Singular(c) => assert_eq!(c, "F"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn target_equal_to_predictor_has_unit_r_squared() {
        let d = data(&["a", "b"], 30, |_, r| {
            let x: f64 = StandardNormal.sample(r);
            vec![x, 3.0 * x + 1.0]
        });
        let e = estimate(&two_single(""), &d).unwrap();
        assert!((r_squared(&e, "B").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let m = parse_spec(
            r#"{"constructs":[{"name":"A","mode":"reflective","indicators":["a1","a2"]},
                {"name":"B","mode":"reflective","indicators":["b1","b2"]}],
                "paths":[{"from":"A","to":"B"}]}"#,
        )
        .unwrap();
        let d = data(&["a1", "a2", "b1", "b2"], 80, |_, r| {
            let f: f64 = StandardNormal.sample(r);
            let g: f64 = StandardNormal.sample(r);
            let n: Vec<f64> = (0..4).map(|_| StandardNormal.sample(r)).collect();
            vec![f + n[0], f + 0.5 * n[1], 0.3 * f + g + n[2], g + n[3]]
        });
        let err = estimate_with(&m, &d, &PlsSettings { max_iterations: 1, tolerance: 1e-15 }).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 1, .. }));
        let ok = estimate(&m, &d).unwrap();
        assert!(ok.iterations <= 300);
    }

    #[test]
    fn interaction_paths_follow_main_effects() {
        let m = parse_spec(
            r#"{"constructs":[{"name":"A","mode":"reflective","indicators":["a"]},
                {"name":"M","mode":"reflective","indicators":["m"]},
                {"name":"Y","mode":"reflective","indicators":["y"]}],
                "paths":[{"from":"A","to":"Y"},{"from":"M","to":"Y"}],
                "interactions":[{"moderator":"M","focal":"A","target":"Y"}]}"#,
        )
        .unwrap();
        let d = data(&["a", "m", "y"], 400, |_, r| {
            let a: f64 = StandardNormal.sample(r);
            let b: f64 = StandardNormal.sample(r);
            let e: f64 = StandardNormal.sample(r);
            vec![a, b, 0.5 * a + 0.5 * b + 0.4 * a * b + 0.6 * e]
        });
        let e = fit(&m, &d).unwrap();
        assert_eq!(e.constructs.last().unwrap(), "M*A");
        let roles: Vec<PathRole> = e.paths.iter().map(|p| p.role).collect();
        assert_eq!(roles, vec![PathRole::Structural, PathRole::Structural, PathRole::Interaction]);
        assert!(e.path("M*A", "Y").unwrap() > 0.2);
        let prod = e.score("M*A").unwrap();
        assert!(stats::mean(prod).abs() < 1e-12);
        assert!((stats::sample_sd(prod) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_product_is_rejected() {
        let m = parse_spec(
            r#"{"constructs":[{"name":"A","mode":"reflective","indicators":["a"]},
                {"name":"M","mode":"reflective","indicators":["m"]},
                {"name":"Y","mode":"reflective","indicators":["y"]}],
                "paths":[{"from":"A","to":"Y"}],
                "interactions":[{"moderator":"M","focal":"A","target":"Y"}]}"#,
        )
        .unwrap();
        // a = m = ±1 so that a*m is constant
        let d = data(&["a", "m", "y"], 10, |i, r| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            vec![s, 1.0 / s, StandardNormal.sample(r)]
        });
        let err = fit(&m, &d).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(ref n) if n == "M*A"), "{err:?}");
    }
}
