//! Domain types shared across the pipeline and the on-disk formats for
//! criteria sets and fitted weight models.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::PartitionConfig;
use crate::scorer::quant::ScalingStats;

/// Format tag written into every weight-model file.
pub const MODEL_FORMAT_VERSION: &str = "uniscore-model/1";

/// Output instruction appended to every judge prompt unless overridden.
pub const DEFAULT_OUTPUT_SPEC: &str =
    "Respond with JSON only, exactly of the form {\"score\": N}, where N is an integer from 1 to 5. \
     Do not add any other text.";

const WEIGHT_SUM_TOL: f64 = 1e-9;
const RECIPROCITY_TOL: f64 = 1e-9;

/// Whether a dataset's signal is a binary label or a real value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Discrete,
    Continuous,
}

/// Observed partitioning signal of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum SignalValue {
    Discrete(u8),
    Continuous(f64),
}

impl SignalValue {
    pub fn discrete(label: i64) -> Result<Self> {
        match label {
            0 | 1 => Ok(SignalValue::Discrete(label as u8)),
            other => Err(Error::InvalidInput(format!("label {other} outside {{0,1}}"))),
        }
    }

    pub fn continuous(value: f64) -> Result<Self> {
        if value.is_finite() {
            Ok(SignalValue::Continuous(value))
        } else {
            Err(Error::InvalidInput(format!("signal {value} is not finite")))
        }
    }

    pub fn kind(&self) -> SignalKind {
        match self {
            SignalValue::Discrete(_) => SignalKind::Discrete,
            SignalValue::Continuous(_) => SignalKind::Continuous,
        }
    }

    /// Numeric view of the signal (labels map to 0.0 / 1.0).
    pub fn as_f64(&self) -> f64 {
        match *self {
            SignalValue::Discrete(l) => f64::from(l),
            SignalValue::Continuous(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextSample {
    pub id: String,
    pub text: String,
    pub signal: SignalValue,
}

impl TextSample {
    pub fn new(id: impl Into<String>, text: impl Into<String>, signal: SignalValue) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::InvalidInput("text is empty".into()));
        }
        Ok(TextSample {
            id: id.into(),
            text,
            signal,
        })
    }
}

/// The four mandatory elements of a judge prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub definition: String,
    pub guidelines: String,
    pub scale_description: String,
    #[serde(default = "default_output_spec")]
    pub output_spec: String,
}

fn default_output_spec() -> String {
    DEFAULT_OUTPUT_SPEC.to_string()
}

impl PromptSpec {
    pub fn new(
        definition: impl Into<String>,
        guidelines: impl Into<String>,
        scale_description: impl Into<String>,
    ) -> Result<Self> {
        let spec = PromptSpec {
            definition: definition.into(),
            guidelines: guidelines.into(),
            scale_description: scale_description.into(),
            output_spec: default_output_spec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("definition", &self.definition),
            ("guidelines", &self.guidelines),
            ("scale_description", &self.scale_description),
            ("output_spec", &self.output_spec),
        ] {
            if value.trim().is_empty() {
                return Err(Error::Schema(format!("prompt field {field} is empty")));
            }
        }
        Ok(())
    }
}

/// Deterministic raw measurement applied to a text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum Measure {
    WordCount,
    /// A measurer registered by name in a [`crate::scorer::quant::Measurers`] registry.
    Custom(String),
}

impl From<String> for Measure {
    fn from(s: String) -> Self {
        if s == "word_count" {
            Measure::WordCount
        } else {
            Measure::Custom(s)
        }
    }
}

impl From<Measure> for String {
    fn from(m: Measure) -> Self {
        m.name().to_string()
    }
}

impl Measure {
    pub fn name(&self) -> &str {
        match self {
            Measure::WordCount => "word_count",
            Measure::Custom(name) => name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Scaling {
    ZScore { sigma_scale: f64 },
    MinMax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub measure_name: Measure,
    pub scaling: Scaling,
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        if let Scaling::ZScore { sigma_scale } = self.scaling {
            if !(sigma_scale > 0.0 && sigma_scale.is_finite()) {
                return Err(Error::Schema(format!("sigma_scale must be > 0, got {sigma_scale}")));
            }
        }
        if self.measure_name.name().is_empty() {
            return Err(Error::Schema("measure_name is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionKind {
    LlmJudged { prompt: PromptSpec },
    Quantitative { measure: MeasureSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: CriterionKind,
}

impl CriterionSpec {
    pub fn judged(name: impl Into<String>, prompt: PromptSpec) -> Self {
        CriterionSpec {
            name: name.into(),
            kind: CriterionKind::LlmJudged { prompt },
        }
    }

    pub fn quantitative(name: impl Into<String>, measure: MeasureSpec) -> Self {
        CriterionSpec {
            name: name.into(),
            kind: CriterionKind::Quantitative { measure },
        }
    }

    pub fn is_likert(&self) -> bool {
        matches!(self.kind, CriterionKind::LlmJudged { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Schema("criterion name is empty".into()));
        }
        match &self.kind {
            CriterionKind::LlmJudged { prompt } => prompt.validate(),
            CriterionKind::Quantitative { measure } => measure.validate(),
        }
        .map_err(|e| Error::Schema(format!("criterion {:?}: {e}", self.name)))
    }
}

/// Checks every criterion and name uniqueness.
pub fn validate_criteria(criteria: &[CriterionSpec]) -> Result<()> {
    let mut seen = HashSet::new();
    for c in criteria {
        c.validate()?;
        if !seen.insert(c.name.as_str()) {
            return Err(Error::Schema(format!("duplicate criterion name {:?}", c.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Deserialize, Serialize)]
struct CriteriaFile {
    criteria: Vec<CriterionSpec>,
}

/// Reads a criteria-spec JSON file: `{"criteria": [ ... ]}`.
pub fn load_criteria(path: impl AsRef<Path>) -> Result<Vec<CriterionSpec>> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CriteriaFile =
        serde_json::from_str(&raw).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    validate_criteria(&file.criteria)?;
    Ok(file.criteria)
}

pub fn save_criteria(criteria: &[CriterionSpec], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = CriteriaFile {
        criteria: criteria.to_vec(),
    };
    let json = serde_json::to_string_pretty(&file).expect("criteria serialize");
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Per-sample, per-criterion scores on the 1..=5 scale. Row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScoreMatrixRepr", into = "ScoreMatrixRepr")]
pub struct ScoreMatrix {
    sample_ids: Vec<String>,
    criteria: Vec<String>,
    values: Vec<f64>,
    is_likert: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct ScoreMatrixRepr {
    sample_ids: Vec<String>,
    criteria: Vec<String>,
    is_likert: Vec<bool>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<ScoreMatrixRepr> for ScoreMatrix {
    type Error = Error;

    fn try_from(r: ScoreMatrixRepr) -> Result<Self> {
        let cols = r.criteria.len();
        if let Some((i, row)) = r.values.iter().enumerate().find(|(_, row)| row.len() != cols) {
            return Err(Error::Invariant(format!(
                "row {i} has {} values, expected {cols}",
                row.len()
            )));
        }
        let values = r.values.into_iter().flatten().collect();
        ScoreMatrix::new(r.sample_ids, r.criteria, values, r.is_likert)
    }
}

impl From<ScoreMatrix> for ScoreMatrixRepr {
    fn from(m: ScoreMatrix) -> Self {
        let cols = m.criteria.len().max(1);
        ScoreMatrixRepr {
            values: m.values.chunks(cols).map(<[f64]>::to_vec).collect(),
            sample_ids: m.sample_ids,
            criteria: m.criteria,
            is_likert: m.is_likert,
        }
    }
}

impl ScoreMatrix {
    pub fn new(sample_ids: Vec<String>, criteria: Vec<String>, values: Vec<f64>, is_likert: Vec<bool>) -> Result<Self> {
        if is_likert.len() != criteria.len() {
            return Err(Error::Invariant(format!(
                "{} likert flags for {} criteria",
                is_likert.len(),
                criteria.len()
            )));
        }
        if values.len() != sample_ids.len() * criteria.len() {
            return Err(Error::Invariant(format!(
                "{} values for a {}x{} matrix",
                values.len(),
                sample_ids.len(),
                criteria.len()
            )));
        }
        let cols = criteria.len();
        for (idx, &v) in values.iter().enumerate() {
            if !(1.0..=5.0).contains(&v) {
                return Err(Error::Invariant(format!("score {v} outside [1, 5]")));
            }
            if is_likert[idx % cols] && v.fract() != 0.0 {
                return Err(Error::Invariant(format!(
                    "non-integer score {v} in Likert column {:?}",
                    criteria[idx % cols]
                )));
            }
        }
        Ok(ScoreMatrix {
            sample_ids,
            criteria,
            values,
            is_likert,
        })
    }

    pub fn rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.criteria.len()
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn criteria(&self) -> &[String] {
        &self.criteria
    }

    pub fn is_likert(&self, col: usize) -> bool {
        self.is_likert[col]
    }

    pub fn likert_flags(&self) -> &[bool] {
        &self.is_likert
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.values[row * c..(row + 1) * c]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows()).map(|r| self.get(r, col)).collect()
    }
}

/// Provenance of a fit: everything needed to rerun or audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub partition: PartitionConfig,
    pub thresholds: Option<(f64, f64)>,
    /// (|G_low|, |G_high|)
    pub group_sizes: (usize, usize),
    pub epsilon: f64,
    pub timestamp: String,
    pub seed: u64,
    /// Fit-time scaling statistics of quantitative criteria, keyed by criterion name.
    #[serde(default)]
    pub scaling: BTreeMap<String, ScalingStats>,
    /// F1-maximizing cut on the training groups (discrete signals only).
    #[serde(default)]
    pub decision_threshold: Option<f64>,
}

/// Fitted signed linear weights plus the AHP evidence behind them.
///
/// Fields are private: a model is only obtainable through [`WeightModel::new`]
/// or deserialization, both of which check normalization, sign agreement,
/// reciprocity and Saaty-range invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightModelParts", into = "WeightModelParts")]
pub struct WeightModel {
    parts: WeightModelParts,
}

/// Unvalidated field bag for [`WeightModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightModelParts {
    #[serde(default = "format_version")]
    pub format_version: String,
    pub criteria: Vec<String>,
    pub jsd_distances: Vec<f64>,
    pub signs: Vec<i8>,
    pub unsigned_weights: Vec<f64>,
    pub signed_weights: Vec<f64>,
    pub comparison_matrix: Vec<Vec<f64>>,
    pub lambda_max: f64,
    pub consistency_ratio: f64,
    pub fit_metadata: FitMetadata,
}

fn format_version() -> String {
    MODEL_FORMAT_VERSION.to_string()
}

impl TryFrom<WeightModelParts> for WeightModel {
    type Error = Error;

    fn try_from(parts: WeightModelParts) -> Result<Self> {
        WeightModel::new(parts)
    }
}

impl From<WeightModel> for WeightModelParts {
    fn from(m: WeightModel) -> Self {
        m.parts
    }
}

impl WeightModel {
    pub fn new(parts: WeightModelParts) -> Result<Self> {
        if parts.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Version {
                found: parts.format_version,
                expected: MODEL_FORMAT_VERSION.into(),
            });
        }
        let m = parts.criteria.len();
        if m < 2 {
            return Err(Error::Invariant(format!("model needs at least 2 criteria, got {m}")));
        }
        let inv = |msg: String| Err(Error::Invariant(msg));
        for (name, len) in [
            ("jsd_distances", parts.jsd_distances.len()),
            ("signs", parts.signs.len()),
            ("unsigned_weights", parts.unsigned_weights.len()),
            ("signed_weights", parts.signed_weights.len()),
            ("comparison_matrix", parts.comparison_matrix.len()),
        ] {
            if len != m {
                return inv(format!("{name} has length {len}, expected {m}"));
            }
        }
        if let Some(d) = parts.jsd_distances.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return inv(format!("distance {d} outside [0, 1]"));
        }
        if let Some(s) = parts.signs.iter().find(|s| !(-1..=1).contains(*s)) {
            return inv(format!("sign {s} outside {{-1, 0, 1}}"));
        }
        if let Some(w) = parts.unsigned_weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return inv(format!("unsigned weight {w} is not positive"));
        }
        let total: f64 = parts.unsigned_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return inv(format!("unsigned weights sum to {total}, expected 1"));
        }
        for k in 0..m {
            let expected = f64::from(parts.signs[k]) * parts.unsigned_weights[k];
            if parts.signed_weights[k] != expected {
                return inv(format!(
                    "signed weight {} of {:?} != sign x weight ({expected})",
                    parts.signed_weights[k], parts.criteria[k]
                ));
            }
        }
        let a = &parts.comparison_matrix;
        for (i, row) in a.iter().enumerate() {
            if row.len() != m {
                return inv(format!("comparison matrix row {i} has length {}", row.len()));
            }
            if row[i] != 1.0 {
                return inv(format!("comparison matrix diagonal a[{i}][{i}] = {}", row[i]));
            }
            for (j, &aij) in row.iter().enumerate() {
                if !(1.0 / 9.0 - 1e-12..=9.0 + 1e-12).contains(&aij) {
                    return inv(format!("a[{i}][{j}] = {aij} outside [1/9, 9]"));
                }
                if (aij * a[j][i] - 1.0).abs() > RECIPROCITY_TOL {
                    return inv(format!("a[{i}][{j}] * a[{j}][{i}] != 1"));
                }
            }
        }
        if !parts.lambda_max.is_finite() || !parts.consistency_ratio.is_finite() {
            return inv("lambda_max and consistency_ratio must be finite".into());
        }
        if parts.fit_metadata.epsilon <= 0.0 {
            return inv(format!("epsilon {} must be > 0", parts.fit_metadata.epsilon));
        }
        Ok(WeightModel { parts })
    }

    pub fn criteria(&self) -> &[String] {
        &self.parts.criteria
    }

    pub fn len(&self) -> usize {
        self.parts.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.criteria.is_empty()
    }

    pub fn jsd_distances(&self) -> &[f64] {
        &self.parts.jsd_distances
    }

    pub fn signs(&self) -> &[i8] {
        &self.parts.signs
    }

    pub fn unsigned_weights(&self) -> &[f64] {
        &self.parts.unsigned_weights
    }

    pub fn signed_weights(&self) -> &[f64] {
        &self.parts.signed_weights
    }

    pub fn comparison_matrix(&self) -> &[Vec<f64>] {
        &self.parts.comparison_matrix
    }

    pub fn lambda_max(&self) -> f64 {
        self.parts.lambda_max
    }

    pub fn consistency_ratio(&self) -> f64 {
        self.parts.consistency_ratio
    }

    pub fn fit_metadata(&self) -> &FitMetadata {
        &self.parts.fit_metadata
    }

    pub fn parts(&self) -> &WeightModelParts {
        &self.parts
    }

    pub fn into_parts(self) -> WeightModelParts {
        self.parts
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialize")
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(raw).map_err(|e| Error::Schema(e.to_string()))?;
        match value.get("format_version") {
            Some(serde_json::Value::String(v)) if v == MODEL_FORMAT_VERSION => {}
            Some(other) => {
                return Err(Error::Version {
                    found: other.as_str().map_or_else(|| other.to_string(), str::to_string),
                    expected: MODEL_FORMAT_VERSION.into(),
                })
            }
            None => return Err(Error::Schema("missing field `format_version`".into())),
        }
        let parts: WeightModelParts = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        WeightModel::new(parts)
    }
}

pub fn save_model(model: &WeightModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_json() + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<WeightModel> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WeightModel::from_json(&raw)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::partition::PartitionConfig;

    pub(crate) fn sample_parts() -> WeightModelParts {
        WeightModelParts {
            format_version: MODEL_FORMAT_VERSION.into(),
            criteria: vec!["a".into(), "b".into()],
            jsd_distances: vec![0.75, 0.25],
            signs: vec![1, -1],
            unsigned_weights: vec![0.75, 0.25],
            signed_weights: vec![0.75, -0.25],
            comparison_matrix: vec![vec![1.0, 3.0], vec![1.0 / 3.0, 1.0]],
            lambda_max: 2.0,
            consistency_ratio: 0.0,
            fit_metadata: FitMetadata {
                partition: PartitionConfig {
                    mode: SignalKind::Continuous,
                    percentile_p: Some(0.05),
                    target_size: None,
                    seed: 42,
                },
                thresholds: Some((1.0, 9.0)),
                group_sizes: (5, 5),
                epsilon: 1e-6,
                timestamp: "2026-01-01T00:00:00Z".into(),
                seed: 42,
                scaling: BTreeMap::new(),
                decision_threshold: None,
            },
        }
    }

    #[test]
    fn save_load_round_trip() {
        let model = WeightModel::new(sample_parts()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.unsigned_weights(), &[0.75, 0.25]);
    }

    #[test]
    fn weights_not_summing_to_one_rejected() {
        let mut parts = sample_parts();
        parts.unsigned_weights = vec![0.65, 0.25];
        parts.signed_weights = vec![0.65, -0.25];
        let json = serde_json::to_string(&parts).unwrap();
        assert!(matches!(WeightModel::from_json(&json), Err(Error::Invariant(_))));
    }

    #[test]
    fn missing_consistency_ratio_is_schema_error() {
        let mut value = serde_json::to_value(sample_parts()).unwrap();
        value.as_object_mut().unwrap().remove("consistency_ratio");
        let err = WeightModel::from_json(&value.to_string()).unwrap_err();
        assert!(
            matches!(err, Error::Schema(ref m) if m.contains("consistency_ratio")),
            "{err}"
        );
    }

    #[test]
    fn version_mismatch_rejected() {
        let mut parts = sample_parts();
        parts.format_version = "uniscore-model/0".into();
        let json = serde_json::to_string(&parts).unwrap();
        assert!(matches!(WeightModel::from_json(&json), Err(Error::Version { .. })));
    }

    #[test]
    fn sign_mismatch_and_reciprocity_rejected() {
        let mut parts = sample_parts();
        parts.signed_weights = vec![0.75, 0.25];
        assert!(WeightModel::new(parts).is_err());

        let mut parts = sample_parts();
        parts.comparison_matrix[1][0] = 0.3;
        assert!(WeightModel::new(parts).is_err());

        let mut parts = sample_parts();
        parts.comparison_matrix = vec![vec![1.0, 10.0], vec![0.1, 1.0]];
        assert!(WeightModel::new(parts).is_err());
    }

    #[test]
    fn label_outside_binary_rejected() {
        let err = SignalValue::discrete(2).unwrap_err();
        assert!(err.to_string().contains("label 2 outside {0,1}"));
        assert!(SignalValue::continuous(f64::NAN).is_err());
    }

    #[test]
    fn blank_text_rejected() {
        assert!(TextSample::new("x", "  \n", SignalValue::Discrete(0)).is_err());
    }

    #[test]
    fn criteria_validation() {
        assert!(PromptSpec::new("def", "", "1..5").is_err());
        let p = PromptSpec::new("def", "guide", "1..5").unwrap();
        let dup = vec![CriterionSpec::judged("x", p.clone()), CriterionSpec::judged("x", p)];
        assert!(validate_criteria(&dup).is_err());
        let bad = MeasureSpec {
            measure_name: Measure::WordCount,
            scaling: Scaling::ZScore { sigma_scale: 0.0 },
        };
        assert!(CriterionSpec::quantitative("len", bad).validate().is_err());
    }

    #[test]
    fn criteria_file_format() {
        let raw = r#"{"criteria": [
            {"name": "expertise", "kind": "llm_judged",
             "prompt": {"definition": "d", "guidelines": "g", "scale_description": "s"}},
            {"name": "length", "kind": "quantitative",
             "measure": {"measure_name": "word_count", "scaling": {"method": "z_score", "sigma_scale": 2.0}}}
        ]}"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, raw).unwrap();
        let c = load_criteria(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c[0].is_likert());
        match &c[1].kind {
            CriterionKind::Quantitative { measure } => {
                assert_eq!(measure.measure_name, Measure::WordCount);
                assert_eq!(measure.scaling, Scaling::ZScore { sigma_scale: 2.0 });
            }
            _ => panic!("expected quantitative"),
        }
        match &c[0].kind {
            CriterionKind::LlmJudged { prompt } => assert_eq!(prompt.output_spec, DEFAULT_OUTPUT_SPEC),
            _ => panic!("expected judged"),
        }
    }

    #[test]
    fn score_matrix_invariants() {
        let ids = vec!["a".to_string()];
        let cols = vec!["x".to_string(), "y".to_string()];
        assert!(ScoreMatrix::new(ids.clone(), cols.clone(), vec![3.0, 2.5], vec![true, false]).is_ok());
        assert!(ScoreMatrix::new(ids.clone(), cols.clone(), vec![2.5, 2.5], vec![true, false]).is_err());
        assert!(ScoreMatrix::new(ids.clone(), cols.clone(), vec![3.0, 5.5], vec![true, false]).is_err());
        assert!(ScoreMatrix::new(ids, cols, vec![3.0], vec![true, false]).is_err());
    }
}
