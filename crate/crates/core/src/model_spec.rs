//! Declarative model description: constructs and their measurement mode,
//! second-order composition, structural and control paths, interaction
//! terms, and estimation settings. Read from JSON; unknown keys are rejected.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Mode A: correlation weights.
    Reflective,
    /// Mode B: regression weights.
    Formative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructDef {
    pub name: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub indicators: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<String>,
    /// Components whose indicators were reattached by [`expand_higher_order`].
    #[serde(skip)]
    pub expanded_from: Vec<String>,
}

impl ConstructDef {
    pub fn is_higher_order(&self) -> bool {
        !self.components.is_empty() || !self.expanded_from.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PathRole {
    #[default]
    Structural,
    Control,
    Interaction,
}

impl PathRole {
    pub fn as_str(self) -> &'static str {
        match self {
            PathRole::Structural => "structural",
            PathRole::Control => "control",
            PathRole::Interaction => "interaction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDef {
    #[serde(rename = "from")]
    pub source: String,
    #[serde(rename = "to")]
    pub target: String,
    #[serde(default)]
    pub role: PathRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionDef {
    pub moderator: String,
    pub focal: String,
    pub target: String,
}

impl InteractionDef {
    /// Name of the product construct, e.g. `EC*UE`.
    pub fn name(&self) -> String {
        format!("{}*{}", self.moderator, self.focal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapSettings {
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub level: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            reps: 5000,
            seed: 1,
            alpha: 0.05,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ImportanceMethod {
    /// Mean absolute input derivative of the network output.
    #[default]
    Derivative,
    /// Garson's connection-weight partitioning.
    Garson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnSettings {
    /// Hidden nodes; `None` means ceil((inputs + 1) / 2).
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub folds: usize,
    /// Output construct; `None` selects the unique terminal construct.
    pub outcome: Option<String>,
    /// Explicit input constructs, bypassing significance-based selection.
    pub inputs: Option<Vec<String>>,
    pub importance: ImportanceMethod,
}

impl Default for AnnSettings {
    fn default() -> Self {
        Self {
            hidden: None,
            epochs: 2000,
            learning_rate: 0.1,
            folds: 10,
            outcome: None,
            inputs: None,
            importance: ImportanceMethod::Derivative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub constructs: Vec<ConstructDef>,
    #[serde(default)]
    pub paths: Vec<PathDef>,
    #[serde(default)]
    pub interactions: Vec<InteractionDef>,
    #[serde(default)]
    pub bootstrap: BootstrapSettings,
    #[serde(default)]
    pub ann: AnnSettings,
}

/// Parses and validates a JSON model document, filling defaults.
pub fn parse_spec(text: &str) -> Result<ModelSpec> {
    let spec: ModelSpec = serde_json::from_str(text).map_err(|e| Error::SpecSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.validated()
}

pub fn serialize_spec(spec: &ModelSpec) -> String {
    serde_json::to_string_pretty(spec).expect("model spec serializes")
}

impl ModelSpec {
    /// Checks internal consistency and adds the implied component -> composite
    /// paths of every higher-order construct.
    pub fn validated(mut self) -> Result<Self> {
        let mut names = HashSet::new();
        for c in &self.constructs {
            if c.name.trim().is_empty() {
                return Err(Error::Spec("construct with empty name".into()));
            }
            if c.name.contains('*') {
                return Err(Error::Spec(format!(
                    "construct name `{}` may not contain `*` (reserved for interaction terms)",
                    c.name
                )));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Spec(format!("construct `{}` declared twice", c.name)));
            }
            if c.expanded_from.is_empty() && c.indicators.is_empty() == c.components.is_empty() {
                return Err(Error::Spec(format!(
                    "construct `{}` needs exactly one of `indicators` or `components`",
                    c.name
                )));
            }
        }

        let by_name: HashMap<&str, &ConstructDef> =
            self.constructs.iter().map(|c| (c.name.as_str(), c)).collect();

        let mut owner: HashMap<&str, &str> = HashMap::new();
        for c in self.constructs.iter().filter(|c| !c.is_higher_order()) {
            for ind in &c.indicators {
                if let Some(prev) = owner.insert(ind, &c.name) {
                    return Err(Error::Spec(format!(
                        "indicator `{ind}` claimed by both `{prev}` and `{}`",
                        c.name
                    )));
                }
            }
        }
        for c in &self.constructs {
            for comp in &c.components {
                match by_name.get(comp.as_str()) {
                    None => {
                        return Err(Error::Spec(format!(
                            "`{}` lists unknown component `{comp}`",
                            c.name
                        )))
                    }
                    Some(d) if d.is_higher_order() => {
                        return Err(Error::Spec(format!(
                            "component `{comp}` of `{}` must be a first-order construct",
                            c.name
                        )))
                    }
                    Some(d) if d.name == c.name => {
                        return Err(Error::Spec(format!("`{}` lists itself as a component", c.name)))
                    }
                    _ => {}
                }
            }
        }

        let mut seen_paths = HashSet::new();
        for p in &self.paths {
            for end in [&p.source, &p.target] {
                if !by_name.contains_key(end.as_str()) {
                    return Err(Error::Spec(format!(
                        "path {} -> {} references unknown construct `{end}`",
                        p.source, p.target
                    )));
                }
            }
            if p.source == p.target {
                return Err(Error::Spec(format!("self-loop on `{}`", p.source)));
            }
            if p.role == PathRole::Interaction {
                return Err(Error::Spec(format!(
                    "path {} -> {}: declare interaction terms under `interactions`",
                    p.source, p.target
                )));
            }
            if !seen_paths.insert((p.source.as_str(), p.target.as_str())) {
                return Err(Error::Spec(format!("duplicate path {} -> {}", p.source, p.target)));
            }
        }

        let mut seen_ix = HashSet::new();
        for ix in &self.interactions {
            for end in [&ix.moderator, &ix.focal, &ix.target] {
                if !by_name.contains_key(end.as_str()) {
                    return Err(Error::Spec(format!(
                        "interaction {} references unknown construct `{end}`",
                        ix.name()
                    )));
                }
            }
            if ix.moderator == ix.focal {
                return Err(Error::Spec(format!(
                    "interaction on `{}`: moderator and focal construct must differ",
                    ix.moderator
                )));
            }
            if ix.target == ix.moderator || ix.target == ix.focal {
                return Err(Error::Spec(format!(
                    "interaction {} cannot target one of its own terms",
                    ix.name()
                )));
            }
            if !seen_ix.insert((ix.name(), ix.target.clone())) {
                return Err(Error::Spec(format!("duplicate interaction {} -> {}", ix.name(), ix.target)));
            }
        }

        // implied composition paths, in declaration order
        let mut implied = Vec::new();
        for c in &self.constructs {
            for comp in &c.components {
                let exists = self.paths.iter().any(|p| &p.source == comp && p.target == c.name);
                if !exists {
                    implied.push(PathDef {
                        source: comp.clone(),
                        target: c.name.clone(),
                        role: PathRole::Structural,
                    });
                }
            }
        }
        drop(by_name);
        self.paths.extend(implied);

        if let Some(cycle) = self.find_cycle() {
            return Err(Error::Cycle(cycle.join(" -> ")));
        }

        let b = &self.bootstrap;
        if b.reps < 2 {
            return Err(Error::Spec("bootstrap.reps must be at least 2".into()));
        }
        if !(b.alpha > 0.0 && b.alpha <= 1.0) {
            return Err(Error::Spec("bootstrap.alpha must lie in (0, 1]".into()));
        }
        if !(b.level > 0.0 && b.level < 1.0) {
            return Err(Error::Spec("bootstrap.level must lie in (0, 1)".into()));
        }
        let a = &self.ann;
        if a.folds < 2 {
            return Err(Error::Spec("ann.folds must be at least 2".into()));
        }
        if a.epochs == 0 {
            return Err(Error::Spec("ann.epochs must be positive".into()));
        }
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::Spec("ann.learning_rate must be positive".into()));
        }
        if a.hidden == Some(0) {
            return Err(Error::Spec("ann.hidden must be positive".into()));
        }
        if let Some(o) = &a.outcome {
            if self.construct(o).is_none() {
                return Err(Error::Spec(format!("ann.outcome `{o}` is not a declared construct")));
            }
        }
        if let Some(inputs) = &a.inputs {
            if inputs.is_empty() {
                return Err(Error::Spec("ann.inputs, when given, must be non-empty".into()));
            }
            let known: HashSet<String> = self
                .constructs
                .iter()
                .map(|c| c.name.clone())
                .chain(self.interactions.iter().map(|i| i.name()))
                .collect();
            for i in inputs {
                if !known.contains(i) {
                    return Err(Error::Spec(format!("ann.inputs entry `{i}` is not a construct")));
                }
            }
        }
        Ok(self)
    }

    /// Checks that every indicator exists among the dataset columns.
    pub fn check_columns(&self, columns: &[String]) -> Result<()> {
        let cols: HashSet<&str> = columns.iter().map(|s| s.as_str()).collect();
        for c in &self.constructs {
            for ind in &c.indicators {
                if !cols.contains(ind.as_str()) {
                    return Err(Error::Spec(format!(
                        "indicator `{ind}` of construct `{}` is not a dataset column",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn construct(&self, name: &str) -> Option<&ConstructDef> {
        self.constructs.iter().find(|c| c.name == name)
    }

    pub fn construct_index(&self, name: &str) -> Option<usize> {
        self.constructs.iter().position(|c| c.name == name)
    }

    /// Sources of all paths into `target`, in path declaration order.
    pub fn predecessors(&self, target: &str) -> Vec<&str> {
        self.paths
            .iter()
            .filter(|p| p.target == target)
            .map(|p| p.source.as_str())
            .collect()
    }

    pub fn successors(&self, source: &str) -> Vec<&str> {
        self.paths
            .iter()
            .filter(|p| p.source == source)
            .map(|p| p.target.as_str())
            .collect()
    }

    pub fn interactions_on(&self, target: &str) -> impl Iterator<Item = &InteractionDef> + '_ {
        let target = target.to_string();
        self.interactions.iter().filter(move |i| i.target == target)
    }

    /// Constructs with incoming paths or interaction terms, in declaration order.
    pub fn endogenous(&self) -> Vec<&str> {
        self.constructs
            .iter()
            .map(|c| c.name.as_str())
            .filter(|n| {
                self.paths.iter().any(|p| p.target == *n)
                    || self.interactions.iter().any(|i| i.target == *n)
            })
            .collect()
    }

    /// Endogenous constructs with no outgoing path.
    pub fn sinks(&self) -> Vec<&str> {
        self.endogenous()
            .into_iter()
            .filter(|n| !self.paths.iter().any(|p| p.source == *n))
            .collect()
    }

    /// The ANN target: the configured outcome or the single terminal construct.
    pub fn outcome(&self) -> Result<String> {
        if let Some(o) = &self.ann.outcome {
            return Ok(o.clone());
        }
        match self.sinks().as_slice() {
            [one] => Ok(one.to_string()),
            [] => Err(Error::Spec("model has no terminal construct to predict".into())),
            many => Err(Error::Spec(format!(
                "several terminal constructs ({}); set ann.outcome",
                many.join(", ")
            ))),
        }
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for c in &self.constructs {
            adj.entry(&c.name).or_default();
        }
        for p in &self.paths {
            adj.entry(&p.source).or_default().push(&p.target);
        }
        for ix in &self.interactions {
            adj.entry(&ix.moderator).or_default().push(&ix.target);
            adj.entry(&ix.focal).or_default().push(&ix.target);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: HashMap<&str, u8> = HashMap::new();
        let mut stack: Vec<&str> = Vec::new();

        fn visit<'a>(
            n: &'a str,
            adj: &BTreeMap<&'a str, Vec<&'a str>>,
            state: &mut HashMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            state.insert(n, 1);
            stack.push(n);
            for &m in &adj[n] {
                match state.get(m).copied().unwrap_or(0) {
                    1 => {
                        let start = stack.iter().position(|s| *s == m).unwrap();
                        let mut cyc: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                        cyc.push(m.to_string());
                        return Some(cyc);
                    }
                    0 => {
                        if let Some(c) = visit(m, adj, state, stack) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
            stack.pop();
            state.insert(n, 2);
            None
        }

        for c in &self.constructs {
            if state.get(c.name.as_str()).copied().unwrap_or(0) == 0 {
                if let Some(cyc) = visit(&c.name, &adj, &mut state, &mut stack) {
                    return Some(cyc);
                }
            }
        }
        None
    }
}

/// Repeated-indicators construction: every higher-order construct becomes a
/// formative first-order construct over its components' indicators, in
/// component declaration order. Components keep their own measurement.
pub fn expand_higher_order(m: &ModelSpec) -> Result<ModelSpec> {
    let mut out = m.clone();
    for c in out.constructs.iter_mut() {
        if c.components.is_empty() {
            continue;
        }
        let mut indicators = Vec::new();
        for comp in &c.components {
            let def = m
                .construct(comp)
                .ok_or_else(|| Error::Spec(format!("unknown component `{comp}`")))?;
            if def.indicators.is_empty() {
                return Err(Error::Spec(format!(
                    "component `{comp}` of `{}` has no indicators",
                    c.name
                )));
            }
            indicators.extend(def.indicators.iter().cloned());
        }
        c.mode = Mode::Formative;
        c.indicators = indicators;
        c.expanded_from = std::mem::take(&mut c.components);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REPLICA: &str = include_str!("../../../data/replica_spec.json");

    #[test]
    fn replica_parses_with_defaults() {
        let m = parse_spec(REPLICA).unwrap();
        assert_eq!(m.constructs.len(), 15);
        assert_eq!(m.constructs.iter().filter(|c| !m.paths.iter().any(|p| p.source == c.name && p.role == PathRole::Control)).count(), 10);
        assert_eq!(m.interactions.len(), 2);
        assert_eq!(m.outcome().unwrap(), "ITI");
        // six composition paths into UE
        assert_eq!(m.predecessors("UE").len(), 6);
    }

    #[test]
    fn omitted_bootstrap_reps_defaults_to_5000() {
        let m = parse_spec(r#"{"constructs":[{"name":"A","mode":"reflective","indicators":["a"]}]}"#)
            .unwrap();
        assert_eq!(m.bootstrap.reps, 5000);
        assert_eq!(m.ann.folds, 10);
        assert_eq!(m.bootstrap.alpha, 0.05);
    }

    #[test]
    fn cycle_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(REPLICA).unwrap();
        v["paths"]
            .as_array_mut()
            .unwrap()
            .push(serde_json::json!({"from": "ITI", "to": "UE"}));
        let err = parse_spec(&v.to_string()).unwrap_err();
        match err {
            Error::Cycle(c) => {
                assert!(c.contains("ITI") && c.contains("UE"), "{c}");
                let parts: Vec<&str> = c.split(" -> ").collect();
                assert_eq!(parts.first(), parts.last());
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let err = parse_spec("{\n \"constructs\": [],\n \"bogus\": 1\n}").unwrap_err();
        match err {
            Error::SpecSyntax { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn indicator_claimed_twice() {
        let err = parse_spec(
            r#"{"constructs":[
                {"name":"A","mode":"reflective","indicators":["x","y"]},
                {"name":"B","mode":"reflective","indicators":["y"]}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("`y`"), "{err}");
    }

    #[test]
    fn unknown_path_endpoint() {
        let err = parse_spec(
            r#"{"constructs":[{"name":"A","mode":"reflective","indicators":["x"]}],
                "paths":[{"from":"A","to":"Q"}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("`Q`"), "{err}");
    }

    #[test]
    fn higher_order_component_must_be_first_order() {
        let err = parse_spec(
            r#"{"constructs":[
                {"name":"A","mode":"reflective","indicators":["x"]},
                {"name":"H","mode":"formative","components":["A"]},
                {"name":"G","mode":"formative","components":["H"]}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("first-order"), "{err}");
    }

    #[test]
    fn indicators_and_components_are_exclusive() {
        let err = parse_spec(
            r#"{"constructs":[{"name":"A","mode":"reflective","indicators":["x"],"components":["A"]}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("exactly one"), "{err}");
    }

    #[test]
    fn moderator_must_differ_from_focal() {
        let err = parse_spec(
            r#"{"constructs":[
                {"name":"A","mode":"reflective","indicators":["x"]},
                {"name":"B","mode":"reflective","indicators":["y"]}],
                "interactions":[{"moderator":"A","focal":"A","target":"B"}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("must differ"), "{err}");
    }

    #[test]
    fn expansion_of_replica() {
        let m = parse_spec(REPLICA).unwrap();
        let e = expand_higher_order(&m).unwrap();
        let ue = e.construct("UE").unwrap();
        assert_eq!(ue.mode, Mode::Formative);
        assert_eq!(ue.indicators.len(), 12);
        assert_eq!(&ue.indicators[..2], &["FA1".to_string(), "FA2".to_string()]);
        assert!(ue.components.is_empty());
        assert_eq!(ue.expanded_from.len(), 6);
        assert_eq!(e.paths, m.paths);
        assert_eq!(expand_higher_order(&e).unwrap(), e);
    }

    #[test]
    fn expansion_without_higher_order_is_identity() {
        let m = parse_spec(
            r#"{"constructs":[{"name":"A","mode":"reflective","indicators":["x"]},
                {"name":"B","mode":"reflective","indicators":["y"]}],
                "paths":[{"from":"A","to":"B"}]}"#,
        )
        .unwrap();
        assert_eq!(expand_higher_order(&m).unwrap(), m);
    }

    #[test]
    fn serialization_round_trips() {
        let m = parse_spec(REPLICA).unwrap();
        let again = parse_spec(&serialize_spec(&m)).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn missing_dataset_column_detected() {
        let m = parse_spec(REPLICA).unwrap();
        let err = m.check_columns(&["FA1".to_string()]).unwrap_err();
        assert!(err.to_string().contains("not a dataset column"));
    }
}
