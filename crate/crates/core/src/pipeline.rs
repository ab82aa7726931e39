//! End-to-end orchestration: load, screen, estimate, diagnose, bootstrap,
//! mediation and moderation, network stage, and the report directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ann::{self, CvOutcome, FoldResult, SensitivityReport, TrainSettings};
use crate::bootstrap::{self, BootstrapResult, ParamKey};
use crate::dataset::{load_dataset, screen_cases, standardize, Dataset, ScreenSummary};
use crate::diagnostics::{self, MeasurementReport, Thresholds, Verdict};
use crate::effects::{self, IndirectEffect, ModerationVerdict};
use crate::error::{Error, Result};
use crate::model_spec::{parse_spec, Mode, ModelSpec, PathRole};
use crate::pls::{self, PlsEstimate};
use crate::report::{stars, Cell, Format, Table};

/// Offset between the bootstrap seed and the network-stage seed, so the two
/// stages never share a random stream.
const ANN_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

pub const TABLE_FILES: [&str; 7] = [
    "table1_reliability",
    "table2_cross_loadings",
    "table3_outer_weights",
    "table4_structural",
    "table5_indirect",
    "table6_ann_folds",
    "table7_sensitivity",
];
pub const META_FILE: &str = "meta.json";
pub const SCORES_FILE: &str = "scores.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Both stages.
    Run,
    /// PLS only.
    Pls,
    /// Network stage on a table of scores.
    Ann,
}

/// Command-line overrides of the spec's settings.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub alpha: Option<f64>,
    pub folds: Option<usize>,
    pub hidden: Option<usize>,
    pub epochs: Option<usize>,
    pub rate: Option<f64>,
    pub skip_bootstrap: bool,
    /// Write measured training and wall times; otherwise they are `NA` so
    /// repeated runs are byte-identical.
    pub record_timing: bool,
    pub threads: Option<usize>,
    pub format: Format,
    pub delimiter: Option<u8>,
}

impl Options {
    /// Applies the overrides to a copy of `m` and re-validates it.
    pub fn apply(&self, m: &ModelSpec) -> Result<ModelSpec> {
        let mut m = m.clone();
        if let Some(v) = self.seed {
            m.bootstrap.seed = v;
        }
        if let Some(v) = self.reps {
            m.bootstrap.reps = v;
        }
        if let Some(v) = self.alpha {
            m.bootstrap.alpha = v;
        }
        if let Some(v) = self.folds {
            m.ann.folds = v;
        }
        if let Some(v) = self.hidden {
            m.ann.hidden = Some(v);
        }
        if let Some(v) = self.epochs {
            m.ann.epochs = v;
        }
        if let Some(v) = self.rate {
            m.ann.learning_rate = v;
        }
        m.validated()
    }
}

#[derive(Debug, Clone)]
pub struct PlsStage {
    pub estimate: PlsEstimate,
    pub measurement: MeasurementReport,
    pub verdicts: Vec<Verdict>,
    pub bootstrap: Option<BootstrapResult>,
    pub indirect: Vec<IndirectEffect>,
    pub chains: Vec<Vec<String>>,
    pub moderation: Vec<ModerationVerdict>,
}

#[derive(Debug, Clone)]
pub struct AnnStage {
    pub outcome: String,
    pub inputs: Vec<String>,
    pub settings: TrainSettings,
    pub folds: usize,
    pub cv: CvOutcome,
    pub variance_explained: f64,
    pub sensitivity: SensitivityReport,
}

impl AnnStage {
    pub fn fold_results(&self) -> &[FoldResult] {
        &self.cv.folds
    }
}

#[derive(Debug, Clone)]
pub struct FrpsaReport {
    pub stage: Stage,
    pub spec: ModelSpec,
    pub screening: ScreenSummary,
    pub pls: Option<PlsStage>,
    pub ann: Option<AnnStage>,
    pub warnings: Vec<String>,
    pub record_timing: bool,
    pub wall_time: f64,
}

/// Stage one on an already screened dataset.
pub fn run_pls_stage(m: &ModelSpec, data: &Dataset, skip_bootstrap: bool, warnings: &mut Vec<String>) -> Result<PlsStage> {
    m.check_columns(data.columns()).map_err(|e| e.at("spec"))?;
    let d = standardize(data).map_err(|e| e.at("standardize"))?;
    let estimate = pls::fit(m, &d).map_err(|e| e.at("estimate"))?;
    let measurement = diagnostics::measurement_report(&estimate, &d).map_err(|e| e.at("diagnostics"))?;
    let verdicts = diagnostics::threshold_report(&measurement, &Thresholds::default());
    for v in verdicts.iter().filter(|v| !v.pass) {
        warnings.push(format!("measurement criteria not met for {}: {}", v.construct, v.reasons.join("; ")));
    }
    let chains = effects::enumerate_indirect(m);
    let alpha = m.bootstrap.alpha;
    let bootstrap = if skip_bootstrap {
        None
    } else {
        let b = bootstrap::run_bootstrap_from(m, &d, &estimate, m.bootstrap.reps, m.bootstrap.seed, m.bootstrap.level)
            .map_err(|e| e.at("bootstrap"))?;
        if b.failed_reps > 0 {
            warnings.push(format!("{} of {} bootstrap replications failed and were dropped", b.failed_reps, b.reps));
        }
        Some(b)
    };
    let indirect = match &bootstrap {
        Some(b) => chains
            .iter()
            .map(|c| effects::indirect_effect(c, &estimate, b, alpha))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at("effects"))?,
        None => Vec::new(),
    };
    let moderation =
        effects::moderation_report(m, &estimate, bootstrap.as_ref(), alpha).map_err(|e| e.at("effects"))?;
    Ok(PlsStage {
        estimate,
        measurement,
        verdicts,
        bootstrap,
        indirect,
        chains,
        moderation,
    })
}

/// Stage two: `x` holds one column per input, `y` the outcome.
pub fn run_ann_stage(
    m: &ModelSpec,
    outcome: String,
    inputs: Vec<String>,
    x: &DMatrix<f64>,
    y: &[f64],
    warnings: &mut Vec<String>,
) -> Result<AnnStage> {
    let settings = TrainSettings {
        hidden: m.ann.hidden.unwrap_or_else(|| ann::default_hidden(inputs.len())),
        epochs: m.ann.epochs,
        learning_rate: m.ann.learning_rate,
    };
    let params = ann::parameter_count(inputs.len(), settings.hidden);
    if x.nrows() < 50 * params {
        warnings.push(format!(
            "{} cases is below 50 times the {params} adjustable network parameters",
            x.nrows()
        ));
    }
    let seed = m.bootstrap.seed.wrapping_add(ANN_SEED_OFFSET);
    let cv = ann::kfold_cv(x, y, m.ann.folds, &settings, seed).map_err(|e| e.at("cross-validation"))?;
    let variance_explained = ann::variance_explained(&cv.predictions, y).map_err(|e| e.at("cross-validation"))?;
    let sensitivity = ann::sensitivity(&cv, x, &inputs, m.ann.importance).map_err(|e| e.at("sensitivity"))?;
    Ok(AnnStage {
        outcome,
        inputs,
        settings,
        folds: m.ann.folds,
        cv,
        variance_explained,
        sensitivity,
    })
}

fn score_matrix(e: &PlsEstimate, names: &[String]) -> Result<DMatrix<f64>> {
    let cols = names
        .iter()
        .map(|n| e.score_index(n).ok_or_else(|| Error::Spec(format!("no scores for `{n}`"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(e.scores.select_columns(&cols))
}

/// In-memory analysis of a raw dataset. `stage` selects which parts run;
/// for [`Stage::Ann`] the dataset holds construct scores rather than
/// indicators.
pub fn analyze(stage: Stage, m: &ModelSpec, raw: &Dataset, opts: &Options) -> Result<FrpsaReport> {
    let start = Instant::now();
    let m = opts.apply(m).map_err(|e| e.at("spec"))?;
    let (data, screening) = screen_cases(raw).map_err(|e| e.at("screen"))?;
    let mut warnings = Vec::new();
    let mut pls_stage = None;
    let mut ann_stage = None;

    match stage {
        Stage::Run | Stage::Pls => {
            let p = run_pls_stage(&m, &data, opts.skip_bootstrap, &mut warnings)?;
            if stage == Stage::Run {
                let (inputs, outcome) =
                    ann::select_inputs(&m, &p.estimate, p.bootstrap.as_ref(), m.bootstrap.alpha)
                        .map_err(|e| e.at("select inputs"))?;
                let x = score_matrix(&p.estimate, &inputs).map_err(|e| e.at("select inputs"))?;
                let y = p.estimate.score(&outcome).expect("outcome scored").to_vec();
                ann_stage = Some(run_ann_stage(&m, outcome, inputs, &x, &y, &mut warnings)?);
            }
            pls_stage = Some(p);
        }
        Stage::Ann => {
            let outcome = m.outcome().map_err(|e| e.at("spec"))?;
            let inputs: Vec<String> = match &m.ann.inputs {
                Some(v) => v.clone(),
                None => data.columns().iter().filter(|c| **c != outcome).cloned().collect(),
            };
            let col = |name: &String| {
                data.column_index(name)
                    .map(|j| data.column(j))
                    .ok_or_else(|| Error::BadHeader {
                        column: 0,
                        message: format!("score column `{name}` not found"),
                    })
                    .map_err(|e| e.at("spec"))
            };
            let y = col(&outcome)?;
            let xs = inputs.iter().map(col).collect::<Result<Vec<_>>>()?;
            if xs.is_empty() {
                return Err(Error::Spec("no input columns".into()).at("spec"));
            }
            let x = DMatrix::from_fn(y.len(), xs.len(), |i, j| xs[j][i]);
            ann_stage = Some(run_ann_stage(&m, outcome, inputs, &x, &y, &mut warnings)?);
        }
    }

    Ok(FrpsaReport {
        stage,
        spec: m,
        screening,
        pls: pls_stage,
        ann: ann_stage,
        warnings,
        record_timing: opts.record_timing,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::InvalidParameter("--threads must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(f),
    }
}

/// Loads the inputs, runs `stage`, and publishes the report directory.
pub fn run_frpsa(stage: Stage, spec_path: &Path, data_path: &Path, out_dir: &Path, opts: &Options) -> Result<FrpsaReport> {
    with_threads(opts.threads, || {
        let text = std::fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e).at("load spec"))?;
        let m = parse_spec(&text).map_err(|e| e.at("load spec"))?;
        let delimiter = opts.delimiter.unwrap_or(b',');
        let raw = load_dataset(data_path, delimiter).map_err(|e| e.at("load data"))?;
        check_out_dir(out_dir)?;
        let report = analyze(stage, &m, &raw, opts)?;
        publish(out_dir, |dir| emit_report(&report, opts.format, dir).map(|_| ()))?;
        Ok(report)
    })
}

fn check_out_dir(out_dir: &Path) -> Result<()> {
    if out_dir.exists() {
        let mut entries = std::fs::read_dir(out_dir).map_err(|e| Error::io(out_dir, e).at("publish"))?;
        if entries.next().is_some() {
            return Err(Error::InvalidParameter(format!(
                "output directory {} is not empty",
                out_dir.display()
            ))
            .at("publish"));
        }
    }
    Ok(())
}

/// Writes into a sibling temporary directory and renames it onto `out_dir`
/// (which must be absent or empty) only if `write` succeeds.
pub fn publish(out_dir: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    check_out_dir(out_dir)?;
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e).at("publish"))?;
    let stem = out_dir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let tmp = parent.join(format!(".{stem}.partial-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e).at("publish"))?;
    }
    std::fs::create_dir(&tmp).map_err(|e| Error::io(&tmp, e).at("publish"))?;
    let result = write(&tmp).and_then(|_| {
        if out_dir.exists() {
            std::fs::remove_dir(out_dir).map_err(|e| Error::io(out_dir, e))?;
        }
        std::fs::rename(&tmp, out_dir).map_err(|e| Error::io(out_dir, e))
    });
    if result.is_err() {
        let _ = std::fs::remove_dir_all(&tmp);
    }
    result.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => other.at("publish"),
    })
}

/// Tables produced for the report, in file order.
pub fn tables(r: &FrpsaReport) -> Vec<Table> {
    let mut out = Vec::new();
    if let Some(p) = &r.pls {
        out.push(reliability_table(p));
        out.push(cross_loading_table(p));
        out.push(outer_weight_table(p));
        out.push(structural_table(p));
        out.push(indirect_table(p));
    }
    if let Some(a) = &r.ann {
        out.push(fold_table(a, r.record_timing));
        out.push(sensitivity_table(a));
    }
    out
}

/// Writes the tables and `meta.json` (and, for [`Stage::Pls`], the latent
/// scores) into `dir`.
pub fn emit_report(r: &FrpsaReport, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for t in tables(r) {
        files.push(t.write(dir, format)?);
    }
    if r.stage == Stage::Pls {
        if let Some(p) = &r.pls {
            files.push(write_scores(&p.estimate, r, &dir.join(SCORES_FILE))?);
        }
    }
    let meta = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(&metadata(r, format)).expect("metadata serializes") + "\n";
    std::fs::write(&meta, text).map_err(|e| Error::io(&meta, e))?;
    files.push(meta);
    Ok(files)
}

fn write_scores(e: &PlsEstimate, r: &FrpsaReport, path: &Path) -> Result<PathBuf> {
    let names: Vec<&String> = r.spec.constructs.iter().map(|c| &c.name).collect();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(names.iter().map(|s| s.as_str())).expect("in-memory write");
    for i in 0..e.n_cases() {
        w.write_record(names.iter().map(|n| e.score(n).expect("scored")[i].to_string()))
            .expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn reliability_table(p: &PlsStage) -> Table {
    let mut t = Table::new(
        "table1_reliability",
        vec!["construct", "mode", "indicators", "cronbach_alpha", "composite_reliability", "ave", "vif", "verdict", "notes"],
    );
    for (c, v) in p.measurement.constructs.iter().zip(&p.verdicts) {
        t.push(vec![
            Cell::text(&c.construct),
            Cell::text(mode_name(c.mode)),
            Cell::Int(c.n_indicators),
            Cell::opt(c.alpha),
            Cell::opt(c.composite_reliability),
            Cell::opt(c.ave),
            Cell::opt(c.vif),
            Cell::text(if v.pass { "pass" } else { "fail" }),
            Cell::text(v.reasons.join("; ")),
        ]);
    }
    t
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Reflective => "reflective",
        Mode::Formative => "formative",
    }
}

fn cross_loading_table(p: &PlsStage) -> Table {
    let cl = &p.measurement.cross;
    let mut header: Vec<String> = vec!["indicator".into(), "construct".into()];
    header.extend(cl.constructs.iter().cloned());
    header.push("dominant".into());
    let mut t = Table::new("table2_cross_loadings", header);
    for (i, ind) in cl.indicators.iter().enumerate() {
        let mut row = vec![Cell::text(ind), Cell::text(&cl.own[i])];
        row.extend((0..cl.constructs.len()).map(|j| Cell::Num(cl.values[(i, j)])));
        row.push(Cell::text(if cl.dominant[i] { "yes" } else { "no" }));
        t.push(row);
    }
    t
}

fn interval_cells(iv: Option<(f64, f64)>) -> [Cell; 2] {
    match iv {
        Some((lo, hi)) => [Cell::Num(lo), Cell::Num(hi)],
        None => [Cell::Blank, Cell::Blank],
    }
}

fn outer_weight_table(p: &PlsStage) -> Table {
    let mut t = Table::new(
        "table3_outer_weights",
        vec!["relationship", "original", "mean", "bias", "std_error", "t", "p", "ci_lower", "ci_upper"],
    );
    for b in p.estimate.blocks.iter().filter(|b| b.mode == Mode::Formative) {
        for (ind, w) in b.indicators.iter().zip(&b.weights) {
            let key = ParamKey::Weight {
                construct: b.construct.clone(),
                indicator: ind.clone(),
            };
            let mut row = vec![Cell::text(format!("{ind} <- {}", b.construct)), Cell::Num(*w)];
            match p.bootstrap.as_ref().and_then(|bs| bs.get(&key)) {
                Some(s) => {
                    row.extend([Cell::Num(s.mean), Cell::Num(s.bias()), Cell::Num(s.test.std_error)]);
                    row.push(Cell::opt(s.test.t));
                    row.push(Cell::Num(s.test.p));
                    row.extend(interval_cells(s.interval));
                }
                None => row.extend(std::iter::repeat_n(Cell::Blank, 7)),
            }
            t.push(row);
        }
    }
    t
}

fn structural_table(p: &PlsStage) -> Table {
    let mut t = Table::new(
        "table4_structural",
        vec!["section", "source", "target", "beta", "std_error", "t", "p", "stars"],
    );
    let sections = [
        (PathRole::Control, "control"),
        (PathRole::Structural, "structural"),
        (PathRole::Interaction, "interaction"),
    ];
    for (role, label) in sections {
        for e in p.estimate.paths.iter().filter(|e| e.role == role) {
            let mut row = vec![
                Cell::text(label),
                Cell::text(&e.source),
                Cell::text(&e.target),
                Cell::Num(e.coefficient),
            ];
            match p.bootstrap.as_ref().and_then(|b| b.path(&e.source, &e.target)) {
                Some(s) => {
                    row.push(Cell::Num(s.test.std_error));
                    row.push(Cell::opt(s.test.t));
                    row.push(Cell::Num(s.test.p));
                    row.push(Cell::text(if s.test.t.is_some() { stars(s.test.p) } else { "" }));
                }
                None => row.extend(std::iter::repeat_n(Cell::Blank, 4)),
            }
            t.push(row);
        }
    }
    for (target, r2) in &p.estimate.r_squared {
        t.push(vec![
            Cell::text("r_squared"),
            Cell::Blank,
            Cell::text(target),
            Cell::Num(*r2),
            Cell::Blank,
            Cell::Blank,
            Cell::Blank,
            Cell::Blank,
        ]);
    }
    t
}

fn indirect_table(p: &PlsStage) -> Table {
    let mut t = Table::new(
        "table5_indirect",
        vec!["relationship", "estimate", "std_error", "t", "p", "ci_lower", "ci_upper", "supported"],
    );
    if p.bootstrap.is_some() {
        for ie in &p.indirect {
            let mut row = vec![
                Cell::text(ie.label()),
                Cell::Num(ie.estimate),
                Cell::Num(ie.test.std_error),
                Cell::opt(ie.test.t),
                Cell::Num(ie.test.p),
            ];
            row.extend(interval_cells(ie.interval));
            row.push(Cell::text(if ie.supported { "YES" } else { "NO" }));
            t.push(row);
        }
    } else {
        for c in &p.chains {
            let est = c.windows(2).map(|w| p.estimate.path(&w[0], &w[1]).unwrap_or(f64::NAN)).product();
            let mut row = vec![Cell::text(c.join(" -> ")), Cell::Num(est)];
            row.extend(std::iter::repeat_n(Cell::Blank, 6));
            t.push(row);
        }
    }
    t
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    (crate::stats::mean(v), crate::stats::sample_sd(v))
}

fn fold_table(a: &AnnStage, record_timing: bool) -> Table {
    let mut t = Table::new(
        "table6_ann_folds",
        vec!["fold", "n_train", "sse_train", "rmse_train", "n_test", "sse_test", "rmse_test", "training_time_s"],
    );
    let time = |v: f64| if record_timing { Cell::Num(v) } else { Cell::Na };
    for f in &a.cv.folds {
        t.push(vec![
            Cell::text(format!("NO.{}", f.fold)),
            Cell::Int(f.n_train),
            Cell::Num(f.sse_train),
            Cell::Num(f.rmse_train),
            Cell::Int(f.n_test),
            Cell::Num(f.sse_test),
            Cell::Num(f.rmse_test),
            time(f.training_time),
        ]);
    }
    let col = |g: fn(&FoldResult) -> f64| -> Vec<f64> { a.cv.folds.iter().map(g).collect() };
    let stats = [
        mean_sd(&col(|f| f.n_train as f64)),
        mean_sd(&col(|f| f.sse_train)),
        mean_sd(&col(|f| f.rmse_train)),
        mean_sd(&col(|f| f.n_test as f64)),
        mean_sd(&col(|f| f.sse_test)),
        mean_sd(&col(|f| f.rmse_test)),
        mean_sd(&col(|f| f.training_time)),
    ];
    for (label, pick) in [("Average", 0usize), ("St. dev.", 1)] {
        let mut row = vec![Cell::text(label)];
        for (j, s) in stats.iter().enumerate() {
            let v = if pick == 0 { s.0 } else { s.1 };
            row.push(if j == 6 { time(v) } else { Cell::Num(v) });
        }
        t.push(row);
    }
    t
}

fn sensitivity_table(a: &AnnStage) -> Table {
    let mut header: Vec<String> = vec!["network".into()];
    header.extend(a.sensitivity.inputs.iter().cloned());
    let mut t = Table::new("table7_sensitivity", header);
    for (f, v) in a.sensitivity.per_model.iter().enumerate() {
        let mut row = vec![Cell::text(format!("NO.{}", f + 1))];
        row.extend(v.iter().map(|x| Cell::Num(*x)));
        t.push(row);
    }
    let mut avg = vec![Cell::text("Average importance")];
    avg.extend(a.sensitivity.mean.iter().map(|x| Cell::Num(*x)));
    t.push(avg);
    let mut ni = vec![Cell::text("Normalized importance")];
    ni.extend(a.sensitivity.normalized.iter().map(|x| Cell::Num(*x)));
    t.push(ni);
    t
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    tool: &'static str,
    version: &'static str,
    stage: Stage,
    format: Format,
    files: Vec<String>,
    seed: u64,
    screening: &'a ScreenSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pls: Option<PlsMeta<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ann: Option<AnnMeta<'a>>,
    warnings: &'a [String],
    wall_time_s: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PlsMeta<'a> {
    iterations: usize,
    bootstrap_reps: Option<usize>,
    failed_reps: Option<usize>,
    alpha: f64,
    interval_level: f64,
    verdicts: &'a [Verdict],
    moderation: &'a [ModerationVerdict],
}

#[derive(Debug, Serialize)]
struct AnnMeta<'a> {
    outcome: &'a str,
    inputs: &'a [String],
    hidden: usize,
    epochs: usize,
    learning_rate: f64,
    folds: usize,
    importance: crate::model_spec::ImportanceMethod,
    variance_explained_pct: f64,
}

fn metadata(r: &FrpsaReport, format: Format) -> Meta<'_> {
    let mut files: Vec<String> = tables(r).iter().map(|t| t.file_name(format)).collect();
    if r.stage == Stage::Pls {
        files.push(SCORES_FILE.into());
    }
    files.push(META_FILE.into());
    Meta {
        tool: "frpsa",
        version: env!("CARGO_PKG_VERSION"),
        stage: r.stage,
        format,
        files,
        seed: r.spec.bootstrap.seed,
        screening: &r.screening,
        pls: r.pls.as_ref().map(|p| PlsMeta {
            iterations: p.estimate.iterations,
            bootstrap_reps: p.bootstrap.as_ref().map(|b| b.reps),
            failed_reps: p.bootstrap.as_ref().map(|b| b.failed_reps),
            alpha: r.spec.bootstrap.alpha,
            interval_level: r.spec.bootstrap.level,
            verdicts: &p.verdicts,
            moderation: &p.moderation,
        }),
        ann: r.ann.as_ref().map(|a| AnnMeta {
            outcome: &a.outcome,
            inputs: &a.inputs,
            hidden: a.settings.hidden,
            epochs: a.settings.epochs,
            learning_rate: a.settings.learning_rate,
            folds: a.folds,
            importance: r.spec.ann.importance,
            variance_explained_pct: a.variance_explained,
        }),
        warnings: &r.warnings,
        wall_time_s: r.record_timing.then_some(r.wall_time),
    }
}
