//! Initialization complexity and cyclomatic complexity.
//!
//! Initialization complexity is a weighted sum of four min-max normalized
//! counts taken from an invocation context (an exemplar or a test prefix):
//! local variable declarations (V), object creations (O), method calls
//! preceding the focal call (M), and the focal method's arity (P). The
//! score is scaled to `[0, 10]` and binned into ten right-open bins.
//!
//! Cyclomatic complexity follows Lizard's Java counting: one plus each
//! `if`, loop, `case` label, `catch`, ternary, `&&` and `||`. Methods of
//! anonymous and local classes are separate functions and do not count
//! toward the enclosing method.

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::code_model::MethodInfo;
use crate::java::{self, Fragment};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ComplexityError {
    #[error("context never invokes `{0}` with {1} argument(s)")]
    NoFocalCall(String, usize),
    #[error("cannot fit normalization over an empty corpus")]
    EmptyCorpus,
    #[error("invalid weights {0:?}: must be nonnegative and sum to 1")]
    InvalidWeights([f64; 4]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct InitFeatures {
    #[serde(rename = "V")]
    pub variables: u32,
    #[serde(rename = "O")]
    pub objects: u32,
    #[serde(rename = "M")]
    pub calls: u32,
    #[serde(rename = "P")]
    pub params: u32,
}

impl InitFeatures {
    pub fn new(variables: u32, objects: u32, calls: u32, params: u32) -> Self {
        Self { variables, objects, calls, params }
    }

    fn as_array(self) -> [u32; 4] {
        [self.variables, self.objects, self.calls, self.params]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ComplexityWeights([f64; 4]);

pub const DEFAULT_WEIGHTS: [f64; 4] = [0.1, 0.1, 0.4, 0.4];

impl ComplexityWeights {
    pub fn new(w: [f64; 4]) -> Result<Self, ComplexityError> {
        let sum: f64 = w.iter().sum();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(ComplexityError::InvalidWeights(w));
        }
        Ok(Self(w))
    }

    pub fn values(&self) -> [f64; 4] {
        self.0
    }
}

impl Default for ComplexityWeights {
    fn default() -> Self {
        Self(DEFAULT_WEIGHTS)
    }
}

impl TryFrom<[f64; 4]> for ComplexityWeights {
    type Error = ComplexityError;
    fn try_from(w: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(w)
    }
}

impl From<ComplexityWeights> for [f64; 4] {
    fn from(w: ComplexityWeights) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: u32,
    pub max: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationStats {
    #[serde(rename = "V")]
    pub variables: FeatureRange,
    #[serde(rename = "O")]
    pub objects: FeatureRange,
    #[serde(rename = "M")]
    pub calls: FeatureRange,
    #[serde(rename = "P")]
    pub params: FeatureRange,
}

impl NormalizationStats {
    fn ranges(&self) -> [FeatureRange; 4] {
        [self.variables, self.objects, self.calls, self.params]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityScore {
    pub raw: f64,
    pub scaled: f64,
    pub bin: u8,
}

impl ComplexityScore {
    /// Clamps `raw` into `[0, 1]`, so the all-max case lands on exactly 10.
    pub fn from_raw(raw: f64) -> Self {
        let raw = raw.clamp(0.0, 1.0);
        let scaled = 10.0 * raw;
        Self { raw, scaled, bin: bin_of(scaled) }
    }
}

/// Right-open unit bins over `[0, 10]`, with 10 itself in bin 9.
pub fn bin_of(scaled: f64) -> u8 {
    (scaled.floor().clamp(0.0, 9.0)) as u8
}

/// Cyclomatic complexity number, always at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CcnValue(u32);

impl CcnValue {
    pub fn value(self) -> u32 {
        self.0
    }
}

/// Counts V, O and M over the context up to the end of the line holding the
/// first call that matches `focal` by name and arity.
pub fn count_init_features(context: &str, focal: &MethodInfo) -> Result<InitFeatures, ComplexityError> {
    let frag = Fragment::best_effort(context);
    let nodes = java::descendants(frag.root());
    let arity = focal.params.len();
    let is_focal_call = |n: &Node<'_>| {
        n.kind() == "method_invocation"
            && n.child_by_field_name("name").is_some_and(|name| frag.text(name) == focal.name)
            && n.child_by_field_name("arguments").is_some_and(|a| java::arg_count(a) == arity)
    };
    let focal_call = nodes
        .iter()
        .find(|n| is_focal_call(n))
        .ok_or_else(|| ComplexityError::NoFocalCall(focal.name.clone(), arity))?;
    let span_end =
        frag.source[focal_call.end_byte()..].find('\n').map(|i| focal_call.end_byte() + i).unwrap_or(frag.source.len());

    let in_span = |n: &&Node<'_>| n.start_byte() < span_end;
    let count =
        |kinds: &[&str]| -> u32 { nodes.iter().filter(in_span).filter(|n| kinds.contains(&n.kind())).count() as u32 };
    let calls =
        nodes.iter().filter(in_span).filter(|n| n.kind() == "method_invocation" && n.id() != focal_call.id()).count()
            as u32;
    Ok(InitFeatures {
        variables: count(&["local_variable_declaration"]),
        objects: count(&["object_creation_expression", "array_creation_expression"]),
        calls,
        params: arity as u32,
    })
}

/// `(x - min) / (max - min)` clamped to `[0, 1]`; 0 for a constant feature.
pub fn minmax_normalize(x: u32, range: FeatureRange) -> f64 {
    if range.max <= range.min {
        return 0.0;
    }
    let x = x.clamp(range.min, range.max);
    f64::from(x - range.min) / f64::from(range.max - range.min)
}

pub fn fit_normalization(features: &[InitFeatures]) -> Result<NormalizationStats, ComplexityError> {
    let first = features.first().ok_or(ComplexityError::EmptyCorpus)?.as_array();
    let mut lo = first;
    let mut hi = first;
    for f in &features[1..] {
        for (i, x) in f.as_array().into_iter().enumerate() {
            lo[i] = lo[i].min(x);
            hi[i] = hi[i].max(x);
        }
    }
    let r = |i: usize| FeatureRange { min: lo[i], max: hi[i] };
    Ok(NormalizationStats { variables: r(0), objects: r(1), calls: r(2), params: r(3) })
}

pub fn init_complexity(
    features: InitFeatures,
    stats: &NormalizationStats,
    weights: &ComplexityWeights,
) -> ComplexityScore {
    let raw = features
        .as_array()
        .into_iter()
        .zip(stats.ranges())
        .zip(weights.values())
        .map(|((x, range), w)| w * minmax_normalize(x, range))
        .sum();
    ComplexityScore::from_raw(raw)
}

pub fn cyclomatic_complexity(m: &MethodInfo) -> CcnValue {
    let frag = Fragment::member(&m.content, (0, 0));
    if frag.has_error() {
        log::warn!("cyclomatic complexity of `{}` computed over a partial parse", m.name);
    }
    let decisions = frag
        .content_nodes()
        .into_iter()
        .map(|decl| {
            java::descendants_pruned(decl, java::is_nested_type_scope)
                .into_iter()
                .filter(|n| !java::is_nested_type_scope(*n))
                .filter(|n| is_decision_point(*n, &frag.source))
                .count()
        })
        .sum::<usize>();
    CcnValue(1 + decisions as u32)
}

fn is_decision_point(node: Node<'_>, src: &str) -> bool {
    match node.kind() {
        "if_statement"
        | "for_statement"
        | "enhanced_for_statement"
        | "while_statement"
        | "do_statement"
        | "catch_clause"
        | "ternary_expression" => true,
        "binary_expression" => {
            node.child_by_field_name("operator").is_some_and(|op| matches!(java::text(op, src), "&&" | "||"))
        }
        "switch_label" => java::children(node).first().is_some_and(|first| java::text(*first, src) == "case"),
        _ => false,
    }
}

/// One focal method as fed to [`ComplexityReport::build`].
#[derive(Debug, Clone)]
pub struct MethodEntry {
    pub signature: String,
    pub arity: u32,
    pub ccn: CcnValue,
    /// Invocation contexts as `(label, features)`, in mining order.
    pub contexts: Vec<(String, InitFeatures)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    PerFocalMethod,
    PerContext,
}

impl Grouping {
    pub fn as_str(self) -> &'static str {
        match self {
            Grouping::PerFocalMethod => "per_focal_method",
            Grouping::PerContext => "per_context",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub grouping: Grouping,
    pub signature: String,
    /// Context label, or `None` when the method had no context and zero
    /// features (apart from arity) were used.
    pub context: Option<String>,
    pub features: InitFeatures,
    pub score: ComplexityScore,
    pub ccn: CcnValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub weights: ComplexityWeights,
    pub stats: Option<NormalizationStats>,
    pub per_focal_method: Vec<ComplexityRow>,
    pub per_context: Vec<ComplexityRow>,
}

impl ComplexityReport {
    /// Fits normalization over every feature vector in the run (each context
    /// plus each method's representative vector) and scores both groupings.
    pub fn build(entries: &[MethodEntry], weights: ComplexityWeights) -> Self {
        let representative = |e: &MethodEntry| match e.contexts.first() {
            Some((label, f)) => (Some(label.clone()), *f),
            None => (None, InitFeatures::new(0, 0, 0, e.arity)),
        };
        let all: Vec<InitFeatures> =
            entries.iter().flat_map(|e| e.contexts.iter().map(|(_, f)| *f).chain([representative(e).1])).collect();
        let Ok(stats) = fit_normalization(&all) else {
            return Self { weights, stats: None, per_focal_method: vec![], per_context: vec![] };
        };
        let row = |grouping, e: &MethodEntry, context, features| ComplexityRow {
            grouping,
            signature: e.signature.clone(),
            context,
            features,
            score: init_complexity(features, &stats, &weights),
            ccn: e.ccn,
        };
        let per_focal_method = entries
            .iter()
            .map(|e| {
                let (label, f) = representative(e);
                row(Grouping::PerFocalMethod, e, label, f)
            })
            .collect();
        let per_context = entries
            .iter()
            .flat_map(|e| {
                e.contexts.iter().map(move |(label, f)| row(Grouping::PerContext, e, Some(label.clone()), *f))
            })
            .collect();
        Self { weights, stats: Some(stats), per_focal_method, per_context }
    }

    pub fn rows(&self) -> impl Iterator<Item = &ComplexityRow> {
        self.per_focal_method.iter().chain(&self.per_context)
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["grouping", "signature", "context", "V", "O", "M", "P", "raw", "scaled", "bin", "ccn"])?;
        for r in self.rows() {
            let f = r.features;
            w.write_record([
                r.grouping.as_str().to_string(),
                r.signature.clone(),
                r.context.clone().unwrap_or_default(),
                f.variables.to_string(),
                f.objects.to_string(),
                f.calls.to_string(),
                f.params.to_string(),
                format!("{:.6}", r.score.raw),
                format!("{:.6}", r.score.scaled),
                r.score.bin.to_string(),
                r.ccn.value().to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv writer only emits the UTF-8 it was given"))
    }
}
