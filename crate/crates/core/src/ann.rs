//! Second stage: a single-hidden-layer sigmoid perceptron fitted to the
//! latent scores of the significant PLS predictors, evaluated by k-fold
//! cross-validation and ranked by sensitivity analysis.

use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bootstrap::BootstrapResult;
use crate::error::{Error, Result};
use crate::model_spec::{ImportanceMethod, ModelSpec, PathRole};
use crate::pls::PlsEstimate;

/// Logistic activation, evaluated without overflow for any finite input.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hidden nodes used when none are configured: ceil((inputs + outputs) / 2).
pub fn default_hidden(inputs: usize) -> usize {
    (inputs + 1).div_ceil(2)
}

/// Number of trainable weights and biases.
pub fn parameter_count(inputs: usize, hidden: usize) -> usize {
    hidden * (inputs + 1) + hidden + 1
}

/// Per-dimension min-max map onto [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn fit(values: impl Iterator<Item = f64>) -> Self {
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            min = min.min(v);
            max = max.max(v);
        }
        Self { min, max }
    }

    fn degenerate(&self) -> bool {
        !(self.max > self.min)
    }

    /// A constant dimension maps to the midpoint.
    pub fn scale(&self, v: f64) -> f64 {
        if self.degenerate() {
            return 0.5;
        }
        ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    pub fn unscale(&self, s: f64) -> f64 {
        if self.degenerate() {
            return self.min;
        }
        self.min + s * (self.max - self.min)
    }
}

/// Weights of the network in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    /// hidden × input
    pub w_hidden: DMatrix<f64>,
    pub b_hidden: DVector<f64>,
    pub w_out: DVector<f64>,
    pub b_out: f64,
}

impl Network {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            w_hidden: DMatrix::zeros(hidden, inputs),
            b_hidden: DVector::zeros(hidden),
            w_out: DVector::zeros(hidden),
            b_out: 0.0,
        }
    }

    /// Uniform(-0.5, 0.5) initial weights.
    pub fn random(inputs: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut u = || rng.random_range(-0.5..0.5);
        Self {
            w_hidden: DMatrix::from_fn(hidden, inputs, |_, _| u()),
            b_hidden: DVector::from_fn(hidden, |_, _| u()),
            w_out: DVector::from_fn(hidden, |_, _| u()),
            b_out: u(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w_hidden.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_hidden.nrows()
    }

    /// Flattened parameters: hidden weights (column-major), hidden biases,
    /// output weights, output bias.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(parameter_count(self.inputs(), self.hidden()));
        v.extend_from_slice(self.w_hidden.as_slice());
        v.extend_from_slice(self.b_hidden.as_slice());
        v.extend_from_slice(self.w_out.as_slice());
        v.push(self.b_out);
        v
    }

    pub fn from_vec(inputs: usize, hidden: usize, v: &[f64]) -> Self {
        assert_eq!(v.len(), parameter_count(inputs, hidden));
        let (w, rest) = v.split_at(hidden * inputs);
        let (bh, rest) = rest.split_at(hidden);
        let (wo, rest) = rest.split_at(hidden);
        Self {
            w_hidden: DMatrix::from_column_slice(hidden, inputs, w),
            b_hidden: DVector::from_column_slice(bh),
            w_out: DVector::from_column_slice(wo),
            b_out: rest[0],
        }
    }

    fn hidden_activations(&self, x: &[f64]) -> DVector<f64> {
        let mut a = self.b_hidden.clone();
        for (j, xj) in x.iter().enumerate() {
            a.axpy(*xj, &self.w_hidden.column(j), 1.0);
        }
        a.map(sigmoid)
    }

    /// Forward pass on scaled inputs.
    pub fn forward(&self, x: &[f64]) -> f64 {
        let h = self.hidden_activations(x);
        sigmoid(self.w_out.dot(&h) + self.b_out)
    }

    /// ∂output/∂x for scaled inputs.
    pub fn input_gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = self.hidden_activations(x);
        let o = sigmoid(self.w_out.dot(&h) + self.b_out);
        let do_ = o * (1.0 - o);
        let dh = DVector::from_fn(h.len(), |k, _| do_ * self.w_out[k] * h[k] * (1.0 - h[k]));
        (0..self.inputs())
            .map(|j| self.w_hidden.column(j).dot(&dh))
            .collect()
    }

    /// Half the sum of squared errors over the rows of `x` (scaled units)
    /// and its gradient with respect to [`Network::to_vec`].
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let (hn, inn) = (self.hidden(), self.inputs());
        let mut gw = DMatrix::<f64>::zeros(hn, inn);
        let mut gbh = DVector::<f64>::zeros(hn);
        let mut gwo = DVector::<f64>::zeros(hn);
        let mut gbo = 0.0;
        let mut loss = 0.0;
        let mut row = vec![0.0; inn];
        for i in 0..x.nrows() {
            for j in 0..inn {
                row[j] = x[(i, j)];
            }
            let h = self.hidden_activations(&row);
            let o = sigmoid(self.w_out.dot(&h) + self.b_out);
            let err = o - y[i];
            loss += 0.5 * err * err;
            let delta_o = err * o * (1.0 - o);
            gbo += delta_o;
            gwo.axpy(delta_o, &h, 1.0);
            for k in 0..hn {
                let dk = delta_o * self.w_out[k] * h[k] * (1.0 - h[k]);
                gbh[k] += dk;
                for j in 0..inn {
                    gw[(k, j)] += dk * row[j];
                }
            }
        }
        let grad = Network {
            w_hidden: gw,
            b_hidden: gbh,
            w_out: gwo,
            b_out: gbo,
        }
        .to_vec();
        (loss, grad)
    }
}

/// A trained network together with the scaling learned from its training data.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub net: Network,
    pub input_scaling: Vec<MinMax>,
    pub output_scaling: MinMax,
    /// Training loss (half SSE, scaled units) before and after training.
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_rate: f64,
}

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.net.inputs()
    }

    pub fn hidden_dim(&self) -> usize {
        self.net.hidden()
    }

    pub fn scale_inputs(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.input_scaling).map(|(v, s)| s.scale(*v)).collect()
    }

    /// Prediction in the target's original units.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::InvalidParameter(format!(
                "input has {} values, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(self.output_scaling.unscale(self.net.forward(&self.scale_inputs(x))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

fn rows(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), x.ncols(), |i, j| x[(idx[i], j)])
}

/// Learning-rate multiplier after an accepted step.
pub const RATE_GROWTH: f64 = 1.02;

/// Heavy-ball momentum on the weight updates.
pub const MOMENTUM: f64 = 0.99;

/// Fits `net` by full-batch gradient descent. A step that raises the loss is
/// discarded and the learning rate halved, so the loss never increases;
/// accepted steps let the rate grow back slowly.
pub fn train_from(
    net: Network,
    x: &DMatrix<f64>,
    y: &[f64],
    epochs: usize,
    learning_rate: f64,
) -> Result<MlpModel> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::InvalidParameter("inputs and target differ in length".into()));
    }
    if n < net.hidden() + 2 {
        return Err(Error::InvalidParameter(format!(
            "{n} cases are too few for {} hidden nodes",
            net.hidden()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite training data".into()));
    }
    let input_scaling: Vec<MinMax> = x.column_iter().map(|c| MinMax::fit(c.iter().copied())).collect();
    let output_scaling = MinMax::fit(y.iter().copied());
    let xs = DMatrix::from_fn(n, x.ncols(), |i, j| input_scaling[j].scale(x[(i, j)]));
    let ys: Vec<f64> = y.iter().map(|v| output_scaling.scale(*v)).collect();

    let (inn, hn) = (net.inputs(), net.hidden());
    let mut params = net.to_vec();
    let (mut loss, mut grad) = net.loss_and_gradient(&xs, &ys);
    let initial_loss = loss;
    let mut rate = learning_rate;
    let mut velocity = vec![0.0; params.len()];
    for epoch in 0..epochs {
        let step: Vec<f64> = velocity.iter().zip(&grad).map(|(v, g)| MOMENTUM * v - rate * g).collect();
        let cand: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
        let (cl, cg) = Network::from_vec(inn, hn, &cand).loss_and_gradient(&xs, &ys);
        if !cl.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        if cl <= loss {
            params = cand;
            loss = cl;
            grad = cg;
            velocity = step;
            rate *= RATE_GROWTH;
        } else {
            rate *= 0.5;
            velocity.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(MlpModel {
        net: Network::from_vec(inn, hn, &params),
        input_scaling,
        output_scaling,
        initial_loss,
        final_loss: loss,
        final_rate: rate,
    })
}

/// Random initialization from `seed`, then [`train_from`].
pub fn train_mlp(x: &DMatrix<f64>, y: &[f64], settings: &TrainSettings, seed: u64) -> Result<MlpModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::random(x.ncols(), settings.hidden, &mut rng);
    train_from(net, x, y, settings.epochs, settings.learning_rate)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub sse_train: f64,
    pub rmse_train: f64,
    pub sse_test: f64,
    pub rmse_test: f64,
    /// Wall-clock seconds; varies between runs.
    pub training_time: f64,
}

#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub folds: Vec<FoldResult>,
    pub models: Vec<MlpModel>,
    /// Fold index of each case.
    pub assignment: Vec<usize>,
    /// Out-of-fold prediction of each case.
    pub predictions: Vec<f64>,
}

impl CvOutcome {
    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }
}

/// Seeded shuffle into `k` near-equal folds; returns the fold of each case.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (base, extra) = (n / k, n % k);
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &case in &order[pos..pos + size] {
            assignment[case] = f;
        }
        pos += size;
    }
    assignment
}

fn sse(model: &MlpModel, x: &DMatrix<f64>, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut s = 0.0;
    let mut preds = Vec::with_capacity(y.len());
    let mut row = vec![0.0; x.ncols()];
    for (i, yi) in y.iter().enumerate() {
        for j in 0..x.ncols() {
            row[j] = x[(i, j)];
        }
        let p = model.predict(&row)?;
        s += (p - yi) * (p - yi);
        preds.push(p);
    }
    Ok((s, preds))
}

/// k-fold cross-validation. Fold `f` trains from its own RNG stream, so
/// folds may run in parallel without changing results.
pub fn kfold_cv(x: &DMatrix<f64>, y: &[f64], k: usize, settings: &TrainSettings, seed: u64) -> Result<CvOutcome> {
    let n = x.nrows();
    if k < 2 {
        return Err(Error::InvalidParameter("cross-validation needs k >= 2".into()));
    }
    if n < 2 * k {
        return Err(Error::InvalidParameter(format!(
            "{n} cases cannot form {k} folds of at least 2 cases"
        )));
    }
    let assignment = fold_assignment(n, k, seed);

    let fitted: Vec<Result<(FoldResult, MlpModel, Vec<(usize, f64)>)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| assignment[i] == f).collect();
            let (xtr, xte) = (rows(x, &train), rows(x, &test));
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();

            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(f as u64 + 1);
            let net = Network::random(x.ncols(), settings.hidden, &mut rng);
            let start = Instant::now();
            let model = train_from(net, &xtr, &ytr, settings.epochs, settings.learning_rate)?;
            let training_time = start.elapsed().as_secs_f64();

            let (sse_train, _) = sse(&model, &xtr, &ytr)?;
            let (sse_test, preds) = sse(&model, &xte, &yte)?;
            let result = FoldResult {
                fold: f + 1,
                n_train: train.len(),
                n_test: test.len(),
                sse_train,
                rmse_train: (sse_train / train.len() as f64).sqrt(),
                sse_test,
                rmse_test: (sse_test / test.len() as f64).sqrt(),
                training_time,
            };
            Ok((result, model, test.into_iter().zip(preds).collect()))
        })
        .collect();

    let mut folds = Vec::with_capacity(k);
    let mut models = Vec::with_capacity(k);
    let mut predictions = vec![f64::NAN; n];
    for r in fitted {
        let (fr, model, preds) = r?;
        folds.push(fr);
        models.push(model);
        for (i, p) in preds {
            predictions[i] = p;
        }
    }
    Ok(CvOutcome {
        folds,
        models,
        assignment,
        predictions,
    })
}

/// Percentage of target variance reproduced by the predictions:
/// 100 · (1 − SSE / SST).
pub fn variance_explained(predictions: &[f64], y: &[f64]) -> Result<f64> {
    let m = crate::stats::mean(y);
    let sst: f64 = y.iter().map(|v| (v - m) * (v - m)).sum();
    if !(sst > 0.0) {
        return Err(Error::ZeroVariance("ANN target".into()));
    }
    let sse: f64 = predictions.iter().zip(y).map(|(p, v)| (p - v) * (p - v)).sum();
    Ok(100.0 * (1.0 - sse / sst))
}

/// Mean absolute derivative of the output with respect to each scaled input
/// over `x`, normalized to sum to one.
pub fn derivative_importance(model: &MlpModel, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d = model.input_dim();
    let mut acc = vec![0.0; d];
    let mut row = vec![0.0; d];
    for i in 0..x.nrows() {
        for j in 0..d {
            row[j] = x[(i, j)];
        }
        let g = model.net.input_gradient(&model.scale_inputs(&row));
        for j in 0..d {
            acc[j] += g[j].abs();
        }
    }
    normalize_importance(acc)
}

/// Garson's partition of absolute connection weights.
pub fn garson_importance(model: &MlpModel) -> Result<Vec<f64>> {
    let net = &model.net;
    let mut acc = vec![0.0; net.inputs()];
    for k in 0..net.hidden() {
        let row = net.w_hidden.row(k);
        let total: f64 = row.iter().map(|w| w.abs()).sum();
        if total == 0.0 {
            continue;
        }
        for j in 0..net.inputs() {
            acc[j] += row[j].abs() / total * net.w_out[k].abs();
        }
    }
    normalize_importance(acc)
}

fn normalize_importance(acc: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = acc.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numerical("network output does not depend on any input".into()));
    }
    Ok(acc.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub inputs: Vec<String>,
    /// One importance vector per model, each summing to one.
    pub per_model: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    /// mean / max(mean) · 100
    pub normalized: Vec<f64>,
}

/// Importance per input for each fold model (over that fold's training
/// cases), averaged across folds and rescaled so the top input is 100 %.
pub fn sensitivity(
    cv: &CvOutcome,
    x: &DMatrix<f64>,
    inputs: &[String],
    method: ImportanceMethod,
) -> Result<SensitivityReport> {
    if cv.models.is_empty() {
        return Err(Error::InvalidParameter("no trained models".into()));
    }
    let per_model = cv
        .models
        .iter()
        .enumerate()
        .map(|(f, m)| match method {
            ImportanceMethod::Derivative => derivative_importance(m, &rows(x, &cv.train_rows(f))),
            ImportanceMethod::Garson => garson_importance(m),
        })
        .collect::<Result<Vec<_>>>()?;
    sensitivity_from(inputs.to_vec(), per_model)
}

/// Aggregates per-model importance vectors.
pub fn sensitivity_from(inputs: Vec<String>, per_model: Vec<Vec<f64>>) -> Result<SensitivityReport> {
    let d = inputs.len();
    let k = per_model.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| per_model.iter().map(|v| v[j]).sum::<f64>() / k).collect();
    let top = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Err(Error::Numerical("all importances are zero".into()));
    }
    let normalized = mean.iter().map(|v| v / top * 100.0).collect();
    Ok(SensitivityReport {
        inputs,
        per_model,
        mean,
        normalized,
    })
}

/// Network inputs: constructs linked to the outcome by significant
/// structural paths (directly or through significant chains) or by a
/// significant interaction term, in construct declaration order. Control
/// paths never contribute. Without a bootstrap every such path counts.
pub fn select_inputs(
    m: &ModelSpec,
    e: &PlsEstimate,
    b: Option<&BootstrapResult>,
    alpha: f64,
) -> Result<(Vec<String>, String)> {
    let outcome = m.outcome()?;
    if let Some(inputs) = &m.ann.inputs {
        return Ok((inputs.clone(), outcome));
    }
    let significant = |source: &str, target: &str| -> bool {
        if alpha >= 1.0 {
            return true;
        }
        match b {
            None => true,
            Some(b) => b
                .path(source, target)
                .map(|ps| ps.test.t.is_some() && ps.test.p < alpha)
                .unwrap_or(false),
        }
    };

    let mut included: BTreeSet<String> = BTreeSet::new();
    let mut queue = vec![outcome.clone()];
    while let Some(t) = queue.pop() {
        for p in m.paths.iter().filter(|p| p.target == t && p.role == PathRole::Structural) {
            if e.path(&p.source, &t).is_some() && significant(&p.source, &t) && included.insert(p.source.clone()) {
                queue.push(p.source.clone());
            }
        }
        for ix in m.interactions_on(&t) {
            if significant(&ix.name(), &t) {
                for c in [&ix.moderator, &ix.focal] {
                    if included.insert(c.clone()) {
                        queue.push(c.clone());
                    }
                }
            }
        }
    }
    included.remove(&outcome);
    let ordered: Vec<String> = m
        .constructs
        .iter()
        .map(|c| c.name.clone())
        .filter(|n| included.contains(n))
        .collect();
    if ordered.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no significant predictors of `{outcome}` at alpha {alpha}; list inputs explicitly under ann.inputs"
        )));
    }
    Ok((ordered, outcome))
}
