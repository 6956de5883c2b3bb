//! Aggregate tables, failure counts and overlay documents from a results log.
//!
//! All three tables share one kept-scene set: a scene is dropped when its
//! outlier score (see [`ScoreSource`]) exceeds the `q`-quantile of all
//! scene scores. Numbers render to three decimals with round-half-even on
//! the shortest decimal representation, so a stored `2.8795` becomes
//! `2.880` and `2.8785` becomes `2.878`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::dataset::{Bounds, Manifest, SceneRecord};
use crate::kinematics::Point2;
use crate::metrics::{
    self, EvaluationRecord, FailureKind, FilterOutcome, LengthBucket, MetricsError, Referentiality,
    ScoreSource,
};
use crate::parser::ParseTier;
use crate::prompting::ConditionKind;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no records to report on")]
    Empty,
    #[error("no successful {0} runs to aggregate")]
    MissingCondition(ConditionKind),
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// The kept-scene set shared by every table.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneFilter {
    pub q: f64,
    pub source: ScoreSource,
    pub outcome: FilterOutcome,
}

impl SceneFilter {
    pub fn compute(records: &[EvaluationRecord], q: f64, source: ScoreSource) -> Result<Self, ReportError> {
        if records.is_empty() {
            return Err(ReportError::Empty);
        }
        let scores = metrics::scene_scores(records, source);
        let outcome = metrics::percentile_filter(&scores, q)?;
        Ok(SceneFilter { q, source, outcome })
    }

    /// Scenes without a score are never dropped.
    pub fn keeps(&self, scene_id: &str) -> bool {
        self.outcome
            .dropped
            .binary_search_by(|d| d.as_str().cmp(scene_id))
            .is_err()
    }

    /// Row label such as `Mean (Q97.5)`.
    pub fn label(&self) -> String {
        format!("Mean (Q{})", percent_label(self.q))
    }
}

fn percent_label(q: f64) -> String {
    let p = (q * 100.0 * 1e6).round() / 1e6;
    format!("{p}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionRow {
    pub label: String,
    pub scenes: usize,
    pub baseline_avg: f64,
    pub best: f64,
    pub avg: f64,
    pub worst: f64,
}

/// Baseline versus instructed comparison: one row over every scene and one
/// over the kept scenes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionTable {
    pub all: ConditionRow,
    pub filtered: ConditionRow,
}

pub fn table_condition_comparison(records: &[EvaluationRecord], q: f64) -> Result<ConditionTable, ReportError> {
    let filter = SceneFilter::compute(records, q, ScoreSource::default())?;
    condition_table(records, &filter)
}

pub fn condition_table(records: &[EvaluationRecord], filter: &SceneFilter) -> Result<ConditionTable, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let aggregates = metrics::aggregate_scenes(records);
    let all = condition_row("Mean (All)".to_owned(), aggregates.iter())?;
    let filtered = condition_row(
        filter.label(),
        aggregates.iter().filter(|a| filter.keeps(&a.scene_id)),
    )?;
    Ok(ConditionTable { all, filtered })
}

fn condition_row<'a>(
    label: String,
    aggregates: impl Iterator<Item = &'a metrics::SceneAggregate>,
) -> Result<ConditionRow, ReportError> {
    let (mut base, mut best, mut avg, mut worst) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut scenes = BTreeSet::new();
    for a in aggregates {
        if let Some(v) = a.baseline_ade {
            base.push(v);
            scenes.insert(&a.scene_id);
        }
        if let (Some(b), Some(m), Some(w)) = (a.best_ade, a.avg_ade, a.worst_ade) {
            best.push(b);
            avg.push(m);
            worst.push(w);
            scenes.insert(&a.scene_id);
        }
    }
    let baseline_avg = metrics::mean(&base).ok_or(ReportError::MissingCondition(ConditionKind::Baseline))?;
    let missing = || ReportError::MissingCondition(ConditionKind::Instructed);
    Ok(ConditionRow {
        label,
        scenes: scenes.len(),
        baseline_avg,
        best: metrics::mean(&best).ok_or_else(missing)?,
        avg: metrics::mean(&avg).ok_or_else(missing)?,
        worst: metrics::mean(&worst).ok_or_else(missing)?,
    })
}

/// `100 * (baseline - treated) / baseline`.
pub fn improvement_percent(baseline: f64, treated: f64) -> Result<f64, ReportError> {
    if !(baseline.is_finite() && baseline > 0.0) {
        return Err(ReportError::NonPositiveBaseline(baseline));
    }
    Ok(100.0 * (baseline - treated) / baseline)
}

/// One row of a grouped table. The baseline mean covers only the kept
/// scenes that have at least one instructed run in the group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow<G> {
    pub group: G,
    pub scenes: usize,
    pub runs: usize,
    pub baseline: Option<f64>,
    pub instructed: f64,
    pub highlighted: bool,
}

pub fn table_length_buckets(records: &[EvaluationRecord], q: f64) -> Result<Vec<GroupRow<LengthBucket>>, ReportError> {
    let filter = SceneFilter::compute(records, q, ScoreSource::default())?;
    Ok(length_bucket_table(records, &filter))
}

pub fn length_bucket_table(records: &[EvaluationRecord], filter: &SceneFilter) -> Vec<GroupRow<LengthBucket>> {
    grouped(records, filter, &LengthBucket::ALL, EvaluationRecord::length_bucket)
}

pub fn table_referentiality(
    records: &[EvaluationRecord],
    q: f64,
) -> Result<Vec<GroupRow<Referentiality>>, ReportError> {
    let filter = SceneFilter::compute(records, q, ScoreSource::default())?;
    Ok(referentiality_table(records, &filter))
}

/// Like the length table; the row with the lowest instructed mean is
/// highlighted.
pub fn referentiality_table(records: &[EvaluationRecord], filter: &SceneFilter) -> Vec<GroupRow<Referentiality>> {
    let mut rows = grouped(records, filter, &Referentiality::ALL, |r| r.referentiality);
    let lowest = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.instructed.total_cmp(&b.1.instructed))
        .map(|(i, _)| i);
    if let Some(i) = lowest {
        rows[i].highlighted = true;
    }
    rows
}

fn grouped<G: Copy + PartialEq>(
    records: &[EvaluationRecord],
    filter: &SceneFilter,
    order: &[G],
    group_of: impl Fn(&EvaluationRecord) -> Option<G>,
) -> Vec<GroupRow<G>> {
    let mut baseline_by_scene: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        if r.condition == ConditionKind::Baseline && filter.keeps(&r.scene_id) {
            if let Some(v) = r.finite_ade() {
                baseline_by_scene.entry(&r.scene_id).or_default().push(v);
            }
        }
    }
    let mut rows = Vec::new();
    for &group in order {
        let mut values = Vec::new();
        let mut scenes = BTreeSet::new();
        for r in records {
            if r.condition != ConditionKind::Instructed || !filter.keeps(&r.scene_id) {
                continue;
            }
            if group_of(r) != Some(group) {
                continue;
            }
            if let Some(v) = r.finite_ade() {
                values.push(v);
                scenes.insert(r.scene_id.as_str());
            }
        }
        let Some(instructed) = metrics::mean(&values) else {
            continue;
        };
        let base: Vec<f64> = scenes
            .iter()
            .filter_map(|s| baseline_by_scene.get(s))
            .flatten()
            .copied()
            .collect();
        rows.push(GroupRow {
            group,
            scenes: scenes.len(),
            runs: values.len(),
            baseline: metrics::mean(&base),
            instructed,
            highlighted: false,
        });
    }
    rows
}

/// Per-condition failure and parse statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRow {
    pub condition: ConditionKind,
    pub records: usize,
    pub failed: usize,
    pub by_kind: BTreeMap<FailureKind, usize>,
    pub tiers: BTreeMap<ParseTier, usize>,
    pub out_of_bounds: usize,
    pub clamped_values: usize,
}

impl FailureRow {
    pub fn failure_rate(&self) -> f64 {
        if self.records == 0 {
            0.0
        } else {
            100.0 * self.failed as f64 / self.records as f64
        }
    }
}

pub fn failure_table(records: &[EvaluationRecord]) -> Vec<FailureRow> {
    [ConditionKind::Baseline, ConditionKind::Instructed]
        .into_iter()
        .map(|condition| {
            let mut row = FailureRow {
                condition,
                records: 0,
                failed: 0,
                by_kind: BTreeMap::new(),
                tiers: BTreeMap::new(),
                out_of_bounds: 0,
                clamped_values: 0,
            };
            for r in records.iter().filter(|r| r.condition == condition) {
                row.records += 1;
                if let Some(f) = &r.failure {
                    row.failed += 1;
                    *row.by_kind.entry(f.kind).or_default() += 1;
                }
                if let Some(t) = r.parse_tier {
                    *row.tiers.entry(t).or_default() += 1;
                }
                row.out_of_bounds += usize::from(r.out_of_bounds);
                row.clamped_values += r.clamps.total();
            }
            row
        })
        .collect()
}

/// Rounds the shortest decimal form of `value` to `decimals` places, ties
/// to even.
pub fn round_half_even(value: f64, decimals: usize) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let repr = format!("{}", value.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let int_len = digits.len();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    digits.extend((0..decimals).map(|i| frac.get(i).copied().unwrap_or(0)));

    let rest = frac.get(decimals..).unwrap_or(&[]);
    let round_up = match rest.split_first() {
        None => false,
        Some((&first, tail)) => {
            first > 5
                || (first == 5 && tail.iter().any(|&d| d != 0))
                || (first == 5 && digits.last().is_some_and(|d| d % 2 == 1))
        }
    };
    let mut int_len = int_len;
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                int_len += 1;
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let mut out = String::new();
    if value.is_sign_negative() && digits.iter().any(|&d| d != 0) {
        out.push('-');
    }
    for (i, d) in digits.iter().enumerate() {
        if i == int_len {
            out.push('.');
        }
        out.push(char::from(b'0' + d));
    }
    out
}

/// Three-decimal table number.
pub fn fmt_ade(value: f64) -> String {
    round_half_even(value, 3)
}

/// One-decimal percentage such as `98.7%`.
pub fn fmt_percent(value: f64) -> String {
    format!("{}%", round_half_even(value, 1))
}

/// A rendered table: header plus string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl TextTable {
    fn new(header: &[&str]) -> Self {
        TextTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Aligned plain text: first column left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let cols = self.header.len();
        let mut widths = vec![0; cols];
        for row in std::iter::once(&self.header).chain(&self.rows) {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let mut line = |row: &[String]| {
            let mut s = String::new();
            for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
                if i == 0 {
                    let _ = write!(s, "{cell:<w$}");
                } else {
                    let _ = write!(s, "  {cell:>w$}");
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&self.header);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&rule);
        for row in &self.rows {
            line(row);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of utf-8 cells")
    }
}

pub fn render_condition_table(table: &ConditionTable) -> TextTable {
    let mut t = TextTable::new(&["", "Baseline Avg ADE", "Instructed Best ADE", "Instructed Avg ADE", "Instructed Worst ADE"]);
    for row in [&table.all, &table.filtered] {
        t.rows.push(vec![
            row.label.clone(),
            fmt_ade(row.baseline_avg),
            fmt_ade(row.best),
            fmt_ade(row.avg),
            fmt_ade(row.worst),
        ]);
    }
    t
}

fn opt_ade(v: Option<f64>) -> String {
    v.map(fmt_ade).unwrap_or_else(|| "-".to_owned())
}

pub fn render_length_table(rows: &[GroupRow<LengthBucket>], q: f64) -> TextTable {
    let label = percent_label(q);
    let base = format!("ADE (Baseline Q{label})");
    let instr = format!("ADE (Instructed Q{label})");
    let mut t = TextTable::new(&["Bucket", "Word Range", &base, &instr]);
    for r in rows {
        t.rows.push(vec![
            r.group.label().to_owned(),
            r.group.word_range().to_owned(),
            opt_ade(r.baseline),
            fmt_ade(r.instructed),
        ]);
    }
    t
}

pub fn render_referentiality_table(rows: &[GroupRow<Referentiality>], q: f64) -> TextTable {
    let label = percent_label(q);
    let base = format!("ADE (Baseline Q{label})");
    let instr = format!("ADE (Instructed Q{label})");
    let mut t = TextTable::new(&["Referentiality", &base, &instr]);
    for r in rows {
        let mut instructed = fmt_ade(r.instructed);
        if r.highlighted {
            instructed.push('*');
        }
        t.rows.push(vec![r.group.label().to_owned(), opt_ade(r.baseline), instructed]);
    }
    t
}

pub fn render_failure_table(rows: &[FailureRow]) -> TextTable {
    let mut t = TextTable::new(&[
        "Condition",
        "Records",
        "Failed",
        "Failure Rate",
        "Transport",
        "Parse",
        "Input",
        "Tier 1",
        "Tier 2",
        "Tier 3",
        "Out of Bounds",
        "Clamped Values",
    ]);
    for r in rows {
        let kind = |k| r.by_kind.get(&k).copied().unwrap_or(0).to_string();
        let tier = |k| r.tiers.get(&k).copied().unwrap_or(0).to_string();
        t.rows.push(vec![
            r.condition.to_string(),
            r.records.to_string(),
            r.failed.to_string(),
            fmt_percent(r.failure_rate()),
            kind(FailureKind::Transport),
            kind(FailureKind::Parse),
            kind(FailureKind::Input),
            tier(ParseTier::Strict),
            tier(ParseTier::Lenient),
            tier(ParseTier::Fallback),
            r.out_of_bounds.to_string(),
            r.clamped_values.to_string(),
        ]);
    }
    t
}

/// One predicted polyline in an overlay document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlayTrack {
    pub condition: ConditionKind,
    pub annotation_id: Option<String>,
    pub instruction: Option<String>,
    pub ade: Option<f64>,
    pub out_of_bounds: bool,
    /// Absent when the run failed.
    pub points: Option<Vec<Point2>>,
    pub failure: Option<String>,
}

/// Plot-ready data for one scene.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlayDocument {
    pub scene_id: String,
    pub ground_truth: Option<Vec<Point2>>,
    pub bounds: Option<Bounds>,
    pub tracks: Vec<OverlayTrack>,
}

impl OverlayDocument {
    /// Ground truth plus every drawable prediction.
    pub fn polyline_count(&self) -> usize {
        usize::from(self.ground_truth.is_some()) + self.tracks.iter().filter(|t| t.points.is_some()).count()
    }
}

/// Overlay for `scene_id`. Without the scene record (no manifest given),
/// ground truth and bounds are left out.
pub fn overlay_data<'a>(
    scene_id: &str,
    scene: Option<&SceneRecord>,
    records: impl IntoIterator<Item = &'a EvaluationRecord>,
) -> OverlayDocument {
    let tracks = records
        .into_iter()
        .map(|r| OverlayTrack {
            condition: r.condition,
            annotation_id: r.annotation_id.clone(),
            instruction: r.instruction_text.clone(),
            ade: r.ade,
            out_of_bounds: r.out_of_bounds,
            points: (r.failure.is_none() && !r.predicted.is_empty()).then(|| r.predicted.clone()),
            failure: r.failure.as_ref().map(|f| format!("{}: {}", f.kind, f.message)),
        })
        .collect();
    OverlayDocument {
        scene_id: scene_id.to_owned(),
        ground_truth: scene.map(|s| s.ground_truth.clone()),
        bounds: scene.map(|s| s.bounds),
        tracks,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub q: f64,
    pub score_source: ScoreSource,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            q: metrics::DEFAULT_FILTER_QUANTILE,
            score_source: ScoreSource::default(),
        }
    }
}

/// What [`write_report`] produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
    pub kept_scenes: usize,
    pub dropped_scenes: Vec<String>,
    pub threshold: f64,
    pub improvement_all: Option<f64>,
    pub improvement_filtered: Option<f64>,
}

fn overlay_file_name(scene_id: &str) -> String {
    let safe: String = scene_id
        .chars()
        .map(|c| if c == '/' || c == '\\' || c == ':' { '_' } else { c })
        .collect();
    format!("{safe}.json")
}

/// Writes every table (text and CSV), the failure table and one overlay
/// per scene into `out_dir`.
pub fn write_report(
    records: &[EvaluationRecord],
    options: &ReportOptions,
    manifest: Option<&Manifest>,
    out_dir: &Path,
) -> Result<ReportSummary, ReportError> {
    let filter = SceneFilter::compute(records, options.q, options.score_source)?;
    let table1 = condition_table(records, &filter)?;
    let table2 = length_bucket_table(records, &filter);
    let table3 = referentiality_table(records, &filter);
    let failures = failure_table(records);

    let mut files = Vec::new();
    let mut write = |name: &str, contents: String| -> Result<(), ReportError> {
        let path = out_dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| ReportError::Io {
                path: parent.to_owned(),
                source,
            })?;
        }
        fs::write(&path, contents).map_err(|source| ReportError::Io {
            path: path.clone(),
            source,
        })?;
        files.push(path);
        Ok(())
    };

    let tables = [
        ("table1", render_condition_table(&table1)),
        ("table2", render_length_table(&table2, options.q)),
        ("table3", render_referentiality_table(&table3, options.q)),
        ("failures", render_failure_table(&failures)),
    ];
    for (name, table) in &tables {
        write(&format!("{name}.txt"), table.to_text())?;
        write(&format!("{name}.csv"), table.to_csv())?;
    }
    for (scene_id, scene_records) in metrics::group_by_scene(records) {
        let scene = manifest.and_then(|m| m.scene(scene_id));
        let doc = overlay_data(scene_id, scene, scene_records);
        let mut json = serde_json::to_string_pretty(&doc).expect("overlay serializes");
        json.push('\n');
        write(&format!("overlays/{}", overlay_file_name(scene_id)), json)?;
    }

    Ok(ReportSummary {
        files,
        kept_scenes: table1.filtered.scenes,
        dropped_scenes: filter.outcome.dropped.clone(),
        threshold: filter.outcome.threshold,
        improvement_all: improvement_percent(table1.all.baseline_avg, table1.all.avg).ok(),
        improvement_filtered: improvement_percent(table1.filtered.baseline_avg, table1.filtered.avg).ok(),
    })
}
