//! Scoring, outlier filtering and instruction analysis.
//!
//! Every run produces one [`EvaluationRecord`]. ADE is computed per record,
//! i.e. per instruction rather than per scene; scene-level views are built
//! afterwards with [`aggregate_scene`] and [`percentile_filter`].

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Bounds;
use crate::kinematics::Point2;
use crate::parser::{ClampCounts, ParseTier, SpeedCurvatureSequence};
use crate::prompting::{ConditionKind, Stage};

/// Default slack around the data bounding box before a waypoint counts as
/// having left the scene.
pub const DEFAULT_OOB_MARGIN: f64 = 30.0;
/// Quantile used for outlier trimming.
pub const DEFAULT_FILTER_QUANTILE: f64 = 0.975;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("trajectory lengths differ: predicted {predicted}, ground truth {ground_truth}")]
    LengthMismatch { predicted: usize, ground_truth: usize },
    #[error("cannot score an empty trajectory")]
    Empty,
    #[error("quantile must lie strictly between 0 and 1, got {0}")]
    InvalidQuantile(f64),
    #[error("no scene has a finite score")]
    NoFiniteScores,
}

/// Average displacement error: mean Euclidean distance over all steps.
pub fn ade(pred: &[Point2], gt: &[Point2]) -> Result<f64, MetricsError> {
    if pred.len() != gt.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: pred.len(),
            ground_truth: gt.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total: f64 = pred.iter().zip(gt).map(|(p, g)| p.distance(g)).sum();
    Ok(total / pred.len() as f64)
}

/// True when any waypoint leaves `bounds` grown by `margin`. Points on the
/// grown edge are inside.
pub fn out_of_bounds(pred: &[Point2], bounds: &Bounds, margin: f64) -> bool {
    let grown = bounds.expanded(margin);
    pred.iter().any(|p| !grown.contains(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Referentiality {
    /// Refers to neither static nor dynamic scene elements.
    #[serde(rename = "none")]
    NonReferential,
    StaticOnly,
    DynamicOnly,
    StaticDynamic,
}

impl Referentiality {
    pub const ALL: [Referentiality; 4] = [
        Referentiality::NonReferential,
        Referentiality::StaticOnly,
        Referentiality::DynamicOnly,
        Referentiality::StaticDynamic,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Referentiality::NonReferential => "None (Non-ref)",
            Referentiality::StaticOnly => "Static Only",
            Referentiality::DynamicOnly => "Dynamic Only",
            Referentiality::StaticDynamic => "Static + Dynamic",
        }
    }
}

pub fn referentiality_category(refs_static: bool, refs_dynamic: bool) -> Referentiality {
    match (refs_static, refs_dynamic) {
        (false, false) => Referentiality::NonReferential,
        (true, false) => Referentiality::StaticOnly,
        (false, true) => Referentiality::DynamicOnly,
        (true, true) => Referentiality::StaticDynamic,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthBucket {
    UltraShort,
    Short,
    Typical,
    Descriptive,
    Long,
}

impl LengthBucket {
    pub const ALL: [LengthBucket; 5] = [
        LengthBucket::UltraShort,
        LengthBucket::Short,
        LengthBucket::Typical,
        LengthBucket::Descriptive,
        LengthBucket::Long,
    ];

    pub fn from_word_count(words: usize) -> Self {
        match words {
            0..=4 => LengthBucket::UltraShort,
            5..=8 => LengthBucket::Short,
            9..=12 => LengthBucket::Typical,
            13..=18 => LengthBucket::Descriptive,
            _ => LengthBucket::Long,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LengthBucket::UltraShort => "Ultra-Short",
            LengthBucket::Short => "Short",
            LengthBucket::Typical => "Typical",
            LengthBucket::Descriptive => "Descriptive",
            LengthBucket::Long => "Long",
        }
    }

    pub fn word_range(self) -> &'static str {
        match self {
            LengthBucket::UltraShort => "0-4",
            LengthBucket::Short => "5-8",
            LengthBucket::Typical => "9-12",
            LengthBucket::Descriptive => "13-18",
            LengthBucket::Long => "19+",
        }
    }
}

impl fmt::Display for LengthBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Number of maximal whitespace-separated tokens; punctuation stays attached.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn length_bucket(text: &str) -> LengthBucket {
    LengthBucket::from_word_count(word_count(text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The model backend could not be reached or refused the request.
    Transport,
    /// No usable trajectory after every re-prompt.
    Parse,
    /// The scene or instruction could not be turned into prompts.
    Input,
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureKind::Transport => "transport",
            FailureKind::Parse => "parse",
            FailureKind::Input => "input",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageText {
    pub stage: Stage,
    pub response: String,
}

/// Wall-clock facts about a run. Excluded when comparing logs across runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_at: String,
    pub finished_at: String,
    pub latency_seconds: f64,
}

/// One (scene, condition, instruction) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub scene_id: String,
    pub condition: ConditionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_text: Option<String>,
    /// Meters; absent when the run failed.
    pub ade: Option<f64>,
    pub out_of_bounds: bool,
    pub parse_tier: Option<ParseTier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub referentiality: Option<Referentiality>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SpeedCurvatureSequence>,
    /// Predicted waypoints in the global frame.
    #[serde(default)]
    pub predicted: Vec<Point2>,
    #[serde(default)]
    pub clamps: ClampCounts,
    /// Trajectory requests sent, re-prompts included.
    #[serde(default)]
    pub attempts: u32,
    #[serde(default)]
    pub stage_texts: Vec<StageText>,
    pub backend_id: String,
    pub seed: Option<u64>,
    #[serde(default)]
    pub metadata: RunMetadata,
}

/// Identity of a run inside a results log.
pub type RecordKey = (String, ConditionKind, Option<String>);

impl EvaluationRecord {
    pub fn key(&self) -> RecordKey {
        (
            self.scene_id.clone(),
            self.condition,
            self.annotation_id.clone(),
        )
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none() && self.ade.is_some()
    }

    /// ADE when present and finite.
    pub fn finite_ade(&self) -> Option<f64> {
        self.ade.filter(|v| v.is_finite())
    }

    pub fn length_bucket(&self) -> Option<LengthBucket> {
        self.word_count.map(LengthBucket::from_word_count)
    }

    /// A record with only the identifying fields set; the runner fills in the rest.
    pub fn skeleton(scene_id: &str, condition: ConditionKind, backend_id: &str, seed: Option<u64>) -> Self {
        EvaluationRecord {
            scene_id: scene_id.to_owned(),
            condition,
            annotation_id: None,
            instruction_text: None,
            ade: None,
            out_of_bounds: false,
            parse_tier: None,
            failure: None,
            word_count: None,
            referentiality: None,
            sequence: None,
            predicted: Vec::new(),
            clamps: ClampCounts::default(),
            attempts: 0,
            stage_texts: Vec::new(),
            backend_id: backend_id.to_owned(),
            seed,
            metadata: RunMetadata::default(),
        }
    }
}

/// Scene-level summary over that scene's instructed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAggregate {
    pub scene_id: String,
    pub baseline_ade: Option<f64>,
    pub best_ade: Option<f64>,
    pub avg_ade: Option<f64>,
    pub worst_ade: Option<f64>,
}

/// Min, mean and max of the finite instructed ADEs of one scene. The
/// baseline value is the mean of its finite baseline ADEs (normally one).
pub fn aggregate_scene<'a>(
    scene_id: &str,
    records: impl IntoIterator<Item = &'a EvaluationRecord>,
) -> SceneAggregate {
    let mut baseline = Vec::new();
    let mut instructed = Vec::new();
    for r in records {
        if let Some(v) = r.finite_ade() {
            match r.condition {
                ConditionKind::Baseline => baseline.push(v),
                ConditionKind::Instructed => instructed.push(v),
            }
        }
    }
    let (best, avg, worst) = if instructed.is_empty() {
        (None, None, None)
    } else {
        let best = instructed.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = instructed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // clamp guards the ordering against rounding in the mean
        let avg = mean(&instructed).map(|m| m.clamp(best, worst));
        (Some(best), avg, Some(worst))
    };
    SceneAggregate {
        scene_id: scene_id.to_owned(),
        baseline_ade: mean(&baseline),
        best_ade: best,
        avg_ade: avg,
        worst_ade: worst,
    }
}

/// Records grouped by scene, ordered by scene id.
pub fn group_by_scene(records: &[EvaluationRecord]) -> BTreeMap<&str, Vec<&EvaluationRecord>> {
    let mut groups: BTreeMap<&str, Vec<&EvaluationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.scene_id.as_str()).or_default().push(r);
    }
    groups
}

pub fn aggregate_scenes(records: &[EvaluationRecord]) -> Vec<SceneAggregate> {
    group_by_scene(records)
        .into_iter()
        .map(|(id, rs)| aggregate_scene(id, rs))
        .collect()
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Which runs define a scene's outlier score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    /// Max finite ADE over both conditions.
    #[default]
    PooledMax,
    BaselineOnly,
    InstructedOnly,
}

/// Outlier score per scene. Scenes without a finite ADE in the chosen
/// condition(s) are left out.
pub fn scene_scores(records: &[EvaluationRecord], source: ScoreSource) -> BTreeMap<String, f64> {
    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for r in records {
        let counted = match source {
            ScoreSource::PooledMax => true,
            ScoreSource::BaselineOnly => r.condition == ConditionKind::Baseline,
            ScoreSource::InstructedOnly => r.condition == ConditionKind::Instructed,
        };
        if !counted {
            continue;
        }
        if let Some(v) = r.finite_ade() {
            scores
                .entry(r.scene_id.clone())
                .and_modify(|s| *s = s.max(v))
                .or_insert(v);
        }
    }
    scores
}

/// Empirical quantile with linear interpolation between order statistics
/// (rank `q * (n - 1)`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let rank = q * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
    pub threshold: f64,
}

impl FilterOutcome {
    pub fn keeps(&self, scene_id: &str) -> bool {
        self.kept.binary_search_by(|k| k.as_str().cmp(scene_id)).is_ok()
    }
}

/// Drops scenes whose score exceeds the `q`-quantile of all scene scores.
pub fn percentile_filter(scores: &BTreeMap<String, f64>, q: f64) -> Result<FilterOutcome, MetricsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(MetricsError::InvalidQuantile(q));
    }
    let mut values: Vec<f64> = scores.values().copied().filter(|v| v.is_finite()).collect();
    if values.is_empty() {
        return Err(MetricsError::NoFiniteScores);
    }
    values.sort_by(f64::total_cmp);
    let threshold = quantile(&values, q);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (id, &score) in scores {
        if score > threshold {
            dropped.push(id.clone());
        } else {
            kept.push(id.clone());
        }
    }
    Ok(FilterOutcome {
        kept,
        dropped,
        threshold,
    })
}
