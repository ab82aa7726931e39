//! Population generator for simulation studies: latent variables linked by
//! linear paths and product terms, measured by reflective or formative
//! indicators. The parameter document is the ground truth that recovery
//! tests compare estimates against.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model_spec::Mode;

/// How reflective indicator errors are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measurement {
    /// Independent errors: x = λη + sqrt(1 − λ²)·e.
    #[default]
    Factor,
    /// Errors orthogonal to the loading vector, so a correlation-weighted
    /// composite of the block reproduces η exactly and its loadings are λ.
    Composite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenIndicator {
    pub name: String,
    /// Reflective loading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loading: Option<f64>,
    /// Formative weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    /// Overrides the measurement error sd (factor measurement only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenComponent {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenConstruct {
    pub name: String,
    #[serde(default = "reflective")]
    pub mode: Mode,
    #[serde(default)]
    pub indicators: Vec<GenIndicator>,
    /// Second-order composition from other constructs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<GenComponent>,
    /// Structural disturbance sd; by default chosen for unit latent variance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
}

fn reflective() -> Mode {
    Mode::Reflective
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenPath {
    pub from: String,
    pub to: String,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenInteraction {
    pub moderator: String,
    pub focal: String,
    pub target: String,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub n: usize,
    #[serde(default)]
    pub measurement: Measurement,
    pub constructs: Vec<GenConstruct>,
    #[serde(default)]
    pub paths: Vec<GenPath>,
    #[serde(default)]
    pub interactions: Vec<GenInteraction>,
}

pub fn parse_params(text: &str) -> Result<GeneratorParams> {
    serde_json::from_str(text).map_err(|e| Error::SpecSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub columns: Vec<String>,
    /// n × columns
    pub values: DMatrix<f64>,
    pub latent_names: Vec<String>,
    /// n × constructs, in declaration order
    pub latents: DMatrix<f64>,
}

impl SyntheticData {
    pub fn to_dataset(&self) -> Result<Dataset> {
        let rows = self.values.row_iter().map(|r| r.iter().copied().collect()).collect();
        Dataset::from_rows(self.columns.clone(), rows)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.values.column(j).iter().copied().collect())
    }

    pub fn latent(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.latent_names.iter().position(|c| c == name)?;
        Some(self.latents.column(j).iter().copied().collect())
    }

    /// Comma-separated text with a header row; values use the shortest
    /// representation that reads back exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        let mut line = String::new();
        for row in self.values.row_iter() {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

fn check_sd(what: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{what}: noise sd {v} must be finite and >= 0")));
    }
    Ok(())
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("n must be at least 2".into()));
        }
        let mut names = HashMap::new();
        for (i, c) in self.constructs.iter().enumerate() {
            if names.insert(c.name.as_str(), i).is_some() {
                return Err(Error::InvalidParameter(format!("construct `{}` declared twice", c.name)));
            }
        }
        let mut columns = std::collections::HashSet::new();
        for c in &self.constructs {
            if let Some(sd) = c.noise_sd {
                check_sd(&c.name, sd)?;
            }
            for comp in &c.components {
                if !names.contains_key(comp.name.as_str()) || comp.name == c.name {
                    return Err(Error::InvalidParameter(format!(
                        "`{}` lists unknown component `{}`",
                        c.name, comp.name
                    )));
                }
            }
            if !c.components.is_empty() && c.mode == Mode::Formative && !c.indicators.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "`{}`: a composite of components cannot also have formative indicators",
                    c.name
                )));
            }
            for ind in &c.indicators {
                if !columns.insert(ind.name.as_str()) {
                    return Err(Error::InvalidParameter(format!("indicator `{}` listed twice", ind.name)));
                }
                if let Some(sd) = ind.noise_sd {
                    check_sd(&ind.name, sd)?;
                }
                match c.mode {
                    Mode::Reflective => {
                        let l = ind.loading.ok_or_else(|| {
                            Error::InvalidParameter(format!("reflective indicator `{}` needs a loading", ind.name))
                        })?;
                        if !(l.abs() <= 1.0) {
                            return Err(Error::InvalidParameter(format!(
                                "loading {l} of `{}` outside [-1, 1]",
                                ind.name
                            )));
                        }
                    }
                    Mode::Formative => {
                        if !ind.weight.is_some_and(f64::is_finite) {
                            return Err(Error::InvalidParameter(format!(
                                "formative indicator `{}` needs a finite weight",
                                ind.name
                            )));
                        }
                    }
                }
            }
        }
        for p in &self.paths {
            for end in [&p.from, &p.to] {
                if !names.contains_key(end.as_str()) {
                    return Err(Error::InvalidParameter(format!("path endpoint `{end}` unknown")));
                }
            }
        }
        for ix in &self.interactions {
            for end in [&ix.moderator, &ix.focal, &ix.target] {
                if !names.contains_key(end.as_str()) {
                    return Err(Error::InvalidParameter(format!("interaction construct `{end}` unknown")));
                }
            }
        }
        for c in &self.constructs {
            let driven = self.paths.iter().any(|p| p.to == c.name) || self.interactions.iter().any(|i| i.target == c.name);
            if driven && (c.mode == Mode::Formative || !c.components.is_empty()) {
                return Err(Error::InvalidParameter(format!(
                    "`{}` is formed by its indicators or components and cannot be a path target",
                    c.name
                )));
            }
        }
        self.order().map(|_| ())
    }

    /// Constructs in dependency order (Kahn's algorithm, ties by declaration).
    fn order(&self) -> Result<Vec<usize>> {
        let k = self.constructs.len();
        let idx: HashMap<&str, usize> =
            self.constructs.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
        let mut deps: Vec<Vec<usize>> = vec![Vec::new(); k];
        for p in &self.paths {
            deps[idx[p.to.as_str()]].push(idx[p.from.as_str()]);
        }
        for ix in &self.interactions {
            let t = idx[ix.target.as_str()];
            deps[t].push(idx[ix.moderator.as_str()]);
            deps[t].push(idx[ix.focal.as_str()]);
        }
        for (i, c) in self.constructs.iter().enumerate() {
            for comp in &c.components {
                deps[i].push(idx[comp.name.as_str()]);
            }
        }
        let mut done = vec![false; k];
        let mut order = Vec::with_capacity(k);
        while order.len() < k {
            let next = (0..k).find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]));
            match next {
                Some(i) => {
                    done[i] = true;
                    order.push(i);
                }
                None => {
                    let stuck: Vec<&str> = (0..k)
                        .filter(|&i| !done[i])
                        .map(|i| self.constructs[i].name.as_str())
                        .collect();
                    return Err(Error::Cycle(stuck.join(", ")));
                }
            }
        }
        Ok(order)
    }
}

/// Diagonal error variances d with diag(P diag(d) P) = 1 − λ², where P
/// projects onto the complement of λ.
fn composite_error_variances(loadings: &[f64]) -> Result<DMatrix<f64>> {
    let k = loadings.len();
    let l = DVector::from_column_slice(loadings);
    let ll = l.dot(&l);
    let p = DMatrix::<f64>::identity(k, k) - &l * l.transpose() / ll;
    let a = p.map(|v| v * v);
    let rhs = DVector::from_iterator(k, loadings.iter().map(|v| 1.0 - v * v));
    let d = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter(format!("loadings {loadings:?} admit no composite population")))?;
    if d.iter().any(|v| *v < -1e-12) {
        return Err(Error::InvalidParameter(format!(
            "loadings {loadings:?} admit no composite population (negative error variance)"
        )));
    }
    // E = P D^{1/2} z
    Ok(p * DMatrix::from_diagonal(&d.map(|v| v.max(0.0).sqrt())))
}

/// Draws a dataset from `params`. Every random draw comes from one ChaCha
/// stream seeded by `seed`, in a fixed order.
pub fn generate(params: &GeneratorParams, seed: u64) -> Result<SyntheticData> {
    params.validate()?;
    let order = params.order()?;
    let n = params.n;
    let k = params.constructs.len();
    let idx: HashMap<&str, usize> =
        params.constructs.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };

    // population covariance of the latents, filled in dependency order
    let mut cov = DMatrix::<f64>::zeros(k, k);
    let mut latents = DMatrix::<f64>::zeros(n, k);
    let mut indicator_values: HashMap<usize, Vec<Vec<f64>>> = HashMap::new();

    for &i in &order {
        let c = &params.constructs[i];
        let incoming: Vec<(usize, f64)> = params
            .paths
            .iter()
            .filter(|p| p.to == c.name)
            .map(|p| (idx[p.from.as_str()], p.coef))
            .collect();
        let products: Vec<(usize, usize, f64)> = params
            .interactions
            .iter()
            .filter(|x| x.target == c.name)
            .map(|x| (idx[x.moderator.as_str()], idx[x.focal.as_str()], x.coef))
            .collect();

        let mut eta = vec![0.0; n];
        if !c.components.is_empty() {
            let w: Vec<(usize, f64)> = c.components.iter().map(|x| (idx[x.name.as_str()], x.weight)).collect();
            let var: f64 = w.iter().flat_map(|&(a, wa)| w.iter().map(move |&(b, wb)| (a, wa, b, wb))).map(|(a, wa, b, wb)| wa * wb * cov[(a, b)]).sum();
            if !(var > 0.0) {
                return Err(Error::InvalidParameter(format!("`{}`: components have zero variance", c.name)));
            }
            let s = var.sqrt();
            for (r, e) in eta.iter_mut().enumerate() {
                *e = w.iter().map(|&(a, wa)| wa * latents[(r, a)]).sum::<f64>() / s;
            }
            for j in 0..k {
                cov[(i, j)] = w.iter().map(|&(a, wa)| wa * cov[(a, j)]).sum::<f64>() / s;
                cov[(j, i)] = cov[(i, j)];
            }
            cov[(i, i)] = 1.0;
        } else if c.mode == Mode::Formative {
            let weights: Vec<f64> = c.indicators.iter().map(|x| x.weight.unwrap_or(0.0)).collect();
            let s = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
            if !(s > 0.0) {
                return Err(Error::InvalidParameter(format!("`{}`: all formative weights are zero", c.name)));
            }
            let cols: Vec<Vec<f64>> = weights.iter().map(|_| normal(n)).collect();
            for (r, e) in eta.iter_mut().enumerate() {
                *e = weights.iter().zip(&cols).map(|(w, col)| w * col[r]).sum::<f64>() / s;
            }
            indicator_values.insert(i, cols);
            cov[(i, i)] = 1.0;
        } else if incoming.is_empty() && products.is_empty() {
            eta = normal(n);
            let sd = c.noise_sd.unwrap_or(1.0);
            eta.iter_mut().for_each(|v| *v *= sd);
            cov[(i, i)] = sd * sd;
        } else {
            // systematic part: linear terms plus Gaussian product moments
            let mut var_sys = 0.0;
            for &(a, ba) in &incoming {
                for &(b, bb) in &incoming {
                    var_sys += ba * bb * cov[(a, b)];
                }
            }
            for &(m1, f1, g1) in &products {
                for &(m2, f2, g2) in &products {
                    var_sys += g1 * g2 * (cov[(m1, m2)] * cov[(f1, f2)] + cov[(m1, f2)] * cov[(f1, m2)]);
                }
            }
            let sd = match c.noise_sd {
                Some(sd) => sd,
                None if var_sys < 1.0 => (1.0 - var_sys).sqrt(),
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "`{}`: explained variance {var_sys:.4} leaves no room for a disturbance; give noise_sd",
                        c.name
                    )))
                }
            };
            let zeta = normal(n);
            for r in 0..n {
                let mut v = sd * zeta[r];
                for &(a, b) in &incoming {
                    v += b * latents[(r, a)];
                }
                for &(m, f, g) in &products {
                    v += g * latents[(r, m)] * latents[(r, f)];
                }
                eta[r] = v;
            }
            for j in 0..k {
                if j != i {
                    cov[(i, j)] = incoming.iter().map(|&(a, b)| b * cov[(a, j)]).sum();
                    cov[(j, i)] = cov[(i, j)];
                }
            }
            cov[(i, i)] = var_sys + sd * sd;
        }
        latents.set_column(i, &DVector::from_vec(eta));

        if c.mode == Mode::Reflective && !c.indicators.is_empty() {
            let eta = latents.column(i);
            let loadings: Vec<f64> = c.indicators.iter().map(|x| x.loading.unwrap_or(0.0)).collect();
            let composite = params.measurement == Measurement::Composite
                && loadings.len() >= 2
                && c.indicators.iter().all(|x| x.noise_sd.is_none());
            let cols: Vec<Vec<f64>> = if composite {
                let mix = composite_error_variances(&loadings)?;
                let z: Vec<Vec<f64>> = loadings.iter().map(|_| normal(n)).collect();
                (0..loadings.len())
                    .map(|a| {
                        (0..n)
                            .map(|r| loadings[a] * eta[r] + (0..loadings.len()).map(|b| mix[(a, b)] * z[b][r]).sum::<f64>())
                            .collect()
                    })
                    .collect()
            } else {
                c.indicators
                    .iter()
                    .zip(&loadings)
                    .map(|(ind, &l)| {
                        let s = ind.noise_sd.unwrap_or_else(|| (1.0 - l * l).max(0.0).sqrt());
                        let e = normal(n);
                        (0..n).map(|r| l * eta[r] + s * e[r]).collect()
                    })
                    .collect()
            };
            indicator_values.insert(i, cols);
        }
    }

    let mut columns = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    for (i, c) in params.constructs.iter().enumerate() {
        if let Some(cols) = indicator_values.remove(&i) {
            for (ind, col) in c.indicators.iter().zip(cols) {
                columns.push(ind.name.clone());
                data.push(col);
            }
        }
    }
    if columns.is_empty() {
        return Err(Error::InvalidParameter("no indicators to write".into()));
    }
    let values = DMatrix::from_fn(n, columns.len(), |r, j| data[j][r]);
    Ok(SyntheticData {
        columns,
        values,
        latent_names: params.constructs.iter().map(|c| c.name.clone()).collect(),
        latents,
    })
}
