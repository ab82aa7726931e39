//! Measurement-model checks: internal-consistency reliability, convergent
//! validity, cross-loading discriminant validity, and full-collinearity VIF.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dataset::StandardizedDataset;
use crate::error::{Error, Result};
use crate::model_spec::Mode;
use crate::pls::PlsEstimate;
use crate::stats::{self, ols_centered, solve_spd, COLLINEARITY_TOL};

const LOADING_SLACK: f64 = 1e-10;

/// Standardized (correlation-based) Cronbach's alpha.
pub fn cronbach_alpha(items: &[&[f64]]) -> Result<f64> {
    let k = items.len();
    if k < 2 {
        return Err(Error::InvalidParameter("Cronbach's alpha needs at least 2 items".into()));
    }
    for (i, it) in items.iter().enumerate() {
        if !(stats::sample_sd(it) > 0.0) {
            return Err(Error::ZeroVariance(format!("item {}", i + 1)));
        }
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..k {
        for j in (i + 1)..k {
            sum += stats::correlation(items[i], items[j]);
            pairs += 1;
        }
    }
    let rbar = sum / pairs as f64;
    let kf = k as f64;
    Ok(kf * rbar / (1.0 + (kf - 1.0) * rbar))
}

fn checked_loadings(loadings: &[f64]) -> Result<Vec<f64>> {
    if loadings.is_empty() {
        return Err(Error::InvalidParameter("empty loading vector".into()));
    }
    loadings
        .iter()
        .map(|&l| {
            if !l.is_finite() || l.abs() > 1.0 + LOADING_SLACK {
                Err(Error::InvalidParameter(format!("loading {l} outside [-1, 1]")))
            } else {
                Ok(l.clamp(-1.0, 1.0))
            }
        })
        .collect()
}

/// (Σλ)² / ((Σλ)² + Σ(1 − λ²))
pub fn composite_reliability(loadings: &[f64]) -> Result<f64> {
    let l = checked_loadings(loadings)?;
    let s: f64 = l.iter().sum();
    let err: f64 = l.iter().map(|v| 1.0 - v * v).sum();
    let num = s * s;
    if num + err == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (num + err))
}

/// Mean squared loading.
pub fn average_variance_extracted(loadings: &[f64]) -> Result<f64> {
    let l = checked_loadings(loadings)?;
    Ok(l.iter().map(|v| v * v).sum::<f64>() / l.len() as f64)
}

/// Correlation of every indicator with every construct score.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLoadings {
    pub indicators: Vec<String>,
    pub constructs: Vec<String>,
    /// indicators × constructs
    pub values: DMatrix<f64>,
    /// First-order construct each indicator measures.
    pub own: Vec<String>,
    /// Own loading strictly above every loading on a construct that does
    /// not contain the indicator.
    pub dominant: Vec<bool>,
}

impl CrossLoadings {
    pub fn own_loading(&self, row: usize) -> f64 {
        let c = self.constructs.iter().position(|c| *c == self.own[row]).unwrap();
        self.values[(row, c)]
    }
}

pub fn cross_loadings(e: &PlsEstimate, d: &StandardizedDataset) -> Result<CrossLoadings> {
    let constructs: Vec<String> = e.blocks.iter().map(|b| b.construct.clone()).collect();
    // indicators in block order; repeated indicators belong to their first-order block
    let mut indicators: Vec<String> = Vec::new();
    let mut own: Vec<String> = Vec::new();
    for pass_higher in [false, true] {
        for b in e.blocks.iter().filter(|b| b.higher_order == pass_higher) {
            for ind in &b.indicators {
                if !indicators.contains(ind) {
                    indicators.push(ind.clone());
                    own.push(b.construct.clone());
                }
            }
        }
    }

    let mut values = DMatrix::zeros(indicators.len(), constructs.len());
    let mut dominant = Vec::with_capacity(indicators.len());
    for (i, ind) in indicators.iter().enumerate() {
        let col = d
            .column_index(ind)
            .ok_or_else(|| Error::Spec(format!("indicator `{ind}` is not a dataset column")))?;
        let x = d.column(col);
        for (j, c) in constructs.iter().enumerate() {
            let score = e.score(c).expect("score for every block");
            values[(i, j)] = stats::correlation(x, score);
        }
        let own_j = constructs.iter().position(|c| *c == own[i]).unwrap();
        let own_val = values[(i, own_j)];
        let dom = e.blocks.iter().enumerate().all(|(j, b)| {
            b.indicators.contains(ind) || own_val > values[(i, j)]
        });
        dominant.push(dom);
    }
    Ok(CrossLoadings {
        indicators,
        constructs,
        values,
        own,
        dominant,
    })
}

/// VIF of each score column regressed on all the others, or the reason it
/// is undefined.
pub fn vif_each(scores: &DMatrix<f64>, names: &[String]) -> Vec<Result<f64>> {
    vif_each_excluding(scores, names, |_, _| false)
}

/// As [`vif_each`], leaving out of construct `j`'s regression every `c`
/// with `skip(j, c)`.
pub fn vif_each_excluding(
    scores: &DMatrix<f64>,
    names: &[String],
    skip: impl Fn(usize, usize) -> bool,
) -> Vec<Result<f64>> {
    let k = scores.ncols();
    (0..k)
        .map(|j| {
            let others: Vec<usize> = (0..k).filter(|&c| c != j && !skip(j, c)).collect();
            if others.is_empty() {
                return Ok(1.0);
            }
            let x = scores.select_columns(&others);
            let y = scores.column(j).clone_owned();
            let fit = ols_centered(&x, y.as_slice(), &names[j])
                .map_err(|_| Error::Singular(names[j].clone()))?;
            let unexplained = 1.0 - fit.r_squared;
            if unexplained < COLLINEARITY_TOL {
                return Err(Error::Singular(names[j].clone()));
            }
            Ok(1.0 / unexplained)
        })
        .collect()
}

/// Full-collinearity VIF over construct scores.
pub fn full_collinearity_vif(scores: &DMatrix<f64>, names: &[String]) -> Result<Vec<f64>> {
    if scores.ncols() < 2 {
        return Err(Error::InvalidParameter("full-collinearity VIF needs at least 2 constructs".into()));
    }
    assert_eq!(scores.ncols(), names.len());
    // name the first construct that is a combination of earlier ones
    let mut centered = scores.clone();
    for mut c in centered.column_iter_mut() {
        let m = c.mean();
        c.add_scalar_mut(-m);
    }
    let k = scores.ncols();
    for j in 1..=k {
        let sub = centered.columns(0, j);
        let g = sub.tr_mul(&sub);
        if let Err(Error::Singular(_)) = solve_spd(g, DVector::zeros(j), &names[j - 1]) {
            return Err(Error::Singular(names[j - 1].clone()));
        }
    }
    vif_each(scores, names).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub alpha: f64,
    pub composite_reliability: f64,
    pub ave: f64,
    /// VIF must be strictly below this.
    pub vif: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            composite_reliability: 0.7,
            ave: 0.5,
            vif: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructReliability {
    pub construct: String,
    pub mode: Mode,
    pub n_indicators: usize,
    pub alpha: Option<f64>,
    pub composite_reliability: Option<f64>,
    pub ave: Option<f64>,
    /// `None` when the score is perfectly collinear with the others.
    pub vif: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementReport {
    pub constructs: Vec<ConstructReliability>,
    pub cross: CrossLoadings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub construct: String,
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Reliability and validity verdict for one construct. Reliability rules
/// apply to reflective constructs only; VIF and cross-loading dominance
/// apply to all.
pub fn construct_verdict(c: &ConstructReliability, non_dominant: &[String], t: &Thresholds) -> Verdict {
    let mut reasons = Vec::new();
    if c.mode == Mode::Reflective {
        if let Some(a) = c.alpha {
            if !(a >= t.alpha) {
                reasons.push(format!("alpha < {}", t.alpha));
            }
        }
        if let Some(cr) = c.composite_reliability {
            if !(cr >= t.composite_reliability) {
                reasons.push(format!("CR < {}", t.composite_reliability));
            }
        }
        if let Some(ave) = c.ave {
            if !(ave >= t.ave) {
                reasons.push(format!("AVE < {}", t.ave));
            }
        }
    }
    match c.vif {
        Some(v) if v < t.vif => {}
        Some(_) => reasons.push(format!("VIF >= {}", t.vif)),
        None => reasons.push("VIF undefined (perfect collinearity)".into()),
    }
    for ind in non_dominant {
        reasons.push(format!("cross-loading dominance fails for {ind}"));
    }
    Verdict {
        construct: c.construct.clone(),
        pass: reasons.is_empty(),
        reasons,
    }
}

pub fn threshold_report(r: &MeasurementReport, t: &Thresholds) -> Vec<Verdict> {
    r.constructs
        .iter()
        .map(|c| {
            let failing: Vec<String> = r
                .cross
                .indicators
                .iter()
                .zip(&r.cross.own)
                .zip(&r.cross.dominant)
                .filter(|((_, own), dom)| **own == c.construct && !**dom)
                .map(|((ind, _), _)| ind.clone())
                .collect();
            construct_verdict(c, &failing, t)
        })
        .collect()
}

/// All measurement diagnostics for a converged estimate.
pub fn measurement_report(e: &PlsEstimate, d: &StandardizedDataset) -> Result<MeasurementReport> {
    let names: Vec<String> = e.blocks.iter().map(|b| b.construct.clone()).collect();
    let cols: Vec<usize> = names.iter().map(|n| e.score_index(n).unwrap()).collect();
    let scores = e.scores.select_columns(&cols);
    // a second-order composite and its components are one hierarchy, not
    // competing constructs
    let related = |a: &str, b: &str| {
        e.block(a).is_some_and(|blk| blk.components.iter().any(|c| c == b))
            || e.block(b).is_some_and(|blk| blk.components.iter().any(|c| c == a))
    };
    let vifs: Vec<Option<f64>> = if names.len() >= 2 {
        vif_each_excluding(&scores, &names, |j, c| related(&names[j], &names[c]))
            .into_iter()
            .map(|r| r.ok())
            .collect()
    } else {
        vec![None; names.len()]
    };

    let mut constructs = Vec::with_capacity(names.len());
    for (b, vif) in e.blocks.iter().zip(vifs) {
        let alpha = if b.indicators.len() >= 2 {
            let cols: Vec<&[f64]> = b
                .indicators
                .iter()
                .map(|i| d.column(d.column_index(i).expect("indicator column")))
                .collect();
            Some(cronbach_alpha(&cols)?)
        } else {
            None
        };
        constructs.push(ConstructReliability {
            construct: b.construct.clone(),
            mode: b.mode,
            n_indicators: b.indicators.len(),
            alpha,
            composite_reliability: Some(composite_reliability(&b.loadings)?),
            ave: Some(average_variance_extracted(&b.loadings)?),
            vif,
        });
    }
    Ok(MeasurementReport {
        constructs,
        cross: cross_loadings(e, d)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(alpha: f64, cr: f64, ave: f64, vif: f64) -> ConstructReliability {
        ConstructReliability {
            construct: "AE".into(),
            mode: Mode::Reflective,
            n_indicators: 2,
            alpha: Some(alpha),
            composite_reliability: Some(cr),
            ave: Some(ave),
            vif: Some(vif),
        }
    }

    #[test]
    fn alpha_examples() {
        let a = [1.0, 2.0, 3.0, 5.0];
        assert!((cronbach_alpha(&[&a, &a]).unwrap() - 1.0).abs() < 1e-12);
        let x = [1.0, -1.0, 1.0, -1.0];
        let y = [1.0, 1.0, -1.0, -1.0];
        assert!(cronbach_alpha(&[&x, &y]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn alpha_errors() {
        let a = [1.0, 2.0, 3.0];
        assert!(cronbach_alpha(&[&a]).is_err());
        let c = [2.0, 2.0, 2.0];
        assert!(matches!(cronbach_alpha(&[&a, &c]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn reliability_examples() {
        assert!((composite_reliability(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((composite_reliability(&[0.9, 0.9]).unwrap() - 3.24 / 3.62).abs() < 1e-12);
        assert!((composite_reliability(&[0.8]).unwrap() - 0.64).abs() < 1e-12);
        assert!((average_variance_extracted(&[0.9, 0.9]).unwrap() - 0.81).abs() < 1e-12);
        assert!((average_variance_extracted(&[0.6, 0.8]).unwrap() - 0.5).abs() < 1e-12);
        assert!((average_variance_extracted(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(composite_reliability(&[]).is_err());
        assert!(composite_reliability(&[1.2]).is_err());
        assert!(average_variance_extracted(&[]).is_err());
    }

    #[test]
    fn vif_closed_forms() {
        let names = vec!["A".to_string(), "B".to_string()];
        // orthogonal, mean-zero columns
        let s = DMatrix::from_column_slice(4, 2, &[1., -1., 1., -1., 1., 1., -1., -1.]);
        for v in full_collinearity_vif(&s, &names).unwrap() {
            assert!((v - 1.0).abs() < 1e-10);
        }
        // correlation 0.8: b = 0.8 a + 0.6 c with a ⟂ c, equal norms
        let a = [1., -1., 1., -1.];
        let c = [1., 1., -1., -1.];
        let b: Vec<f64> = a.iter().zip(&c).map(|(x, z)| 0.8 * x + 0.6 * z).collect();
        let s = DMatrix::from_fn(4, 2, |i, j| if j == 0 { a[i] } else { b[i] });
        for v in full_collinearity_vif(&s, &names).unwrap() {
            assert!((v - 1.0 / 0.36).abs() < 1e-10);
        }
    }

    #[test]
    fn vif_perfect_collinearity_names_construct() {
        let names: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
        let s = DMatrix::from_fn(6, 3, |i, j| {
            let a = [1., 2., 0., 3., 5., 1.][i];
            let b = [2., 1., 1., 0., 1., 4.][i];
            [a, b, 2.0 * a - b][j]
        });
        match full_collinearity_vif(&s, &names).unwrap_err() {
            Error::Singular(c) => assert_eq!(c, "C"),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn verdicts() {
        let t = Thresholds::default();
        assert!(construct_verdict(&rel(0.827, 0.920, 0.852, 2.0), &[], &t).pass);
        let v = construct_verdict(&rel(0.8, 0.8, 0.49, 2.0), &[], &t);
        assert!(!v.pass);
        assert_eq!(v.reasons, vec!["AVE < 0.5".to_string()]);
        let v = construct_verdict(&rel(0.8, 0.8, 0.6, 5.0), &[], &t);
        assert_eq!(v.reasons, vec!["VIF >= 5".to_string()]);
        let v = construct_verdict(&rel(0.8, 0.8, 0.6, 1.0), &["X1".into()], &t);
        assert!(!v.pass);
    }

    #[test]
    fn formative_constructs_skip_reliability_rules() {
        let mut c = rel(0.1, 0.1, 0.1, 1.5);
        c.mode = Mode::Formative;
        assert!(construct_verdict(&c, &[], &Thresholds::default()).pass);
    }
}
