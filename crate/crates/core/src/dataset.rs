//! Scene manifests and instruction annotations.
//!
//! A scene manifest is a single JSON document describing short driving clips:
//! the camera frames available for each clip, the ego-vehicle history over the
//! observation window, and the logged ground-truth future positions sampled at
//! a fixed step. Annotations are passenger-style directives attached to scenes
//! by `scene_id`, stored either as CSV or as a JSON array.
//!
//! Everything loaded here is validated once and immutable afterwards.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::kinematics::{normalize_angle, Point2};
use crate::metrics::Referentiality;

/// Manifest format version understood by this crate.
pub const MANIFEST_VERSION: u32 = 1;
/// Sampling step of the ground truth when the header omits it (2 Hz keyframes).
pub const DEFAULT_DT_SECONDS: f64 = 0.5;
/// Number of future positions per scene when the header omits it.
pub const DEFAULT_HORIZON: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} is not a valid manifest: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid manifest header: {0}")]
    Header(String),
    #[error("scene `{scene_id}`: invalid `{field}`: {message}")]
    Schema {
        scene_id: String,
        field: String,
        message: String,
    },
    #[error("scene `{scene_id}`: `{field}` timestamps must be strictly increasing (index {index})")]
    NonMonotone {
        scene_id: String,
        field: &'static str,
        index: usize,
    },
    #[error("scene `{scene_id}`: ground_truth has {found} points, expected horizon {expected}")]
    Horizon {
        scene_id: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate scene_id `{0}`")]
    DuplicateScene(String),
    #[error("annotation row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("duplicate annotation_id `{0}`")]
    DuplicateAnnotation(String),
}

/// Axis-aligned rectangle in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    /// Smallest rectangle containing every point, or `None` for an empty set.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point2>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut b = Bounds {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        for p in iter {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    /// Grows the rectangle by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Self {
        Bounds {
            min_x: self.min_x - margin,
            min_y: self.min_y - margin,
            max_x: self.max_x + margin,
            max_y: self.max_y + margin,
        }
    }

    /// Closed-region containment: points on the edge are inside.
    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    fn is_well_formed(&self) -> bool {
        [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite())
            && self.min_x <= self.max_x
            && self.min_y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    /// Image file, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
    /// Capture time in seconds.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    #[serde(rename = "t")]
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    /// Radians, normalized to (-pi, pi] on load.
    pub heading: f64,
    /// Meters per second, never negative.
    pub speed: f64,
}

impl EgoState {
    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub frames: Vec<FrameRef>,
    pub ego_history: Vec<EgoState>,
    pub ground_truth: Vec<Point2>,
    pub bounds: Bounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub version: u32,
    #[serde(default = "default_dt")]
    pub dt_seconds: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
}

impl Default for ManifestHeader {
    fn default() -> Self {
        ManifestHeader {
            version: MANIFEST_VERSION,
            dt_seconds: DEFAULT_DT_SECONDS,
            horizon: DEFAULT_HORIZON,
        }
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT_SECONDS
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

/// A validated scene manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub scenes: Vec<SceneRecord>,
    /// Directory that relative frame paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn dt_seconds(&self) -> f64 {
        self.header.dt_seconds
    }

    pub fn horizon(&self) -> usize {
        self.header.horizon
    }

    pub fn scene(&self, scene_id: &str) -> Option<&SceneRecord> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }

    pub fn resolve_frame(&self, frame: &FrameRef) -> PathBuf {
        if frame.path.is_absolute() {
            frame.path.clone()
        } else {
            self.base_dir.join(&frame.path)
        }
    }

    /// Writes the manifest back out in the on-disk format, bounds included.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let json = serde_json::to_string_pretty(self).map_err(|source| DatasetError::Json {
            path: path.to_owned(),
            source,
        })?;
        fs::write(path, json).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    header: ManifestHeader,
    #[serde(default)]
    scenes: Vec<RawScene>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    scene_id: String,
    #[serde(default)]
    frames: Vec<FrameRef>,
    ego_history: Vec<EgoState>,
    ground_truth: Vec<Point2>,
    #[serde(default)]
    bounds: Option<Bounds>,
}

/// Loads and validates a scene manifest from disk.
pub fn load_scenes(manifest_path: &Path) -> Result<Manifest, DatasetError> {
    let text = fs::read_to_string(manifest_path).map_err(|source| DatasetError::Io {
        path: manifest_path.to_owned(),
        source,
    })?;
    let base_dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    parse_manifest(&text, base_dir).map_err(|e| match e {
        ManifestParseError::Json(source) => DatasetError::Json {
            path: manifest_path.to_owned(),
            source,
        },
        ManifestParseError::Invalid(e) => e,
    })
}

enum ManifestParseError {
    Json(serde_json::Error),
    Invalid(DatasetError),
}

impl From<DatasetError> for ManifestParseError {
    fn from(e: DatasetError) -> Self {
        ManifestParseError::Invalid(e)
    }
}

/// Parses manifest JSON already in memory. Relative frame paths resolve
/// against `base_dir`.
pub fn manifest_from_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Manifest, DatasetError> {
    parse_manifest(text, base_dir.into()).map_err(|e| match e {
        ManifestParseError::Json(source) => DatasetError::Json {
            path: PathBuf::from("<memory>"),
            source,
        },
        ManifestParseError::Invalid(e) => e,
    })
}

fn parse_manifest(text: &str, base_dir: PathBuf) -> Result<Manifest, ManifestParseError> {
    let raw: RawManifest = serde_json::from_str(text).map_err(ManifestParseError::Json)?;
    let header = raw.header;
    if header.version != MANIFEST_VERSION {
        return Err(DatasetError::Header(format!(
            "unsupported version {} (expected {MANIFEST_VERSION})",
            header.version
        ))
        .into());
    }
    if !(header.dt_seconds.is_finite() && header.dt_seconds > 0.0) {
        return Err(DatasetError::Header(format!(
            "dt_seconds must be positive, got {}",
            header.dt_seconds
        ))
        .into());
    }
    if header.horizon == 0 {
        return Err(DatasetError::Header("horizon must be at least 1".into()).into());
    }

    let mut seen = HashSet::new();
    let mut scenes = Vec::with_capacity(raw.scenes.len());
    for raw_scene in raw.scenes {
        if !seen.insert(raw_scene.scene_id.clone()) {
            return Err(DatasetError::DuplicateScene(raw_scene.scene_id).into());
        }
        scenes.push(validate_scene(raw_scene, header.horizon)?);
    }
    Ok(Manifest {
        header,
        scenes,
        base_dir,
    })
}

fn validate_scene(raw: RawScene, horizon: usize) -> Result<SceneRecord, DatasetError> {
    let id = raw.scene_id;
    let schema = |field: &str, message: String| DatasetError::Schema {
        scene_id: id.clone(),
        field: field.to_owned(),
        message,
    };

    if id.trim().is_empty() {
        return Err(schema("scene_id", "must be non-empty".into()));
    }
    if raw.ground_truth.len() != horizon {
        return Err(DatasetError::Horizon {
            scene_id: id,
            expected: horizon,
            found: raw.ground_truth.len(),
        });
    }
    if raw.ego_history.is_empty() {
        return Err(schema("ego_history", "must contain at least one state".into()));
    }

    for (i, f) in raw.frames.iter().enumerate() {
        if !f.t.is_finite() {
            return Err(schema("frames", format!("non-finite timestamp at index {i}")));
        }
    }
    if let Some(index) = first_non_increasing(raw.frames.iter().map(|f| f.t)) {
        return Err(DatasetError::NonMonotone {
            scene_id: id,
            field: "frames",
            index,
        });
    }

    let mut ego_history = raw.ego_history;
    for (i, s) in ego_history.iter_mut().enumerate() {
        let finite = [s.timestamp, s.x, s.y, s.heading, s.speed]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(schema("ego_history", format!("non-finite value at index {i}")));
        }
        if s.speed < 0.0 {
            return Err(schema(
                "ego_history",
                format!("negative speed {} at index {i}", s.speed),
            ));
        }
        s.heading = normalize_angle(s.heading);
    }
    if let Some(index) = first_non_increasing(ego_history.iter().map(|s| s.timestamp)) {
        return Err(DatasetError::NonMonotone {
            scene_id: id,
            field: "ego_history",
            index,
        });
    }

    if let Some(i) = raw.ground_truth.iter().position(|p| !p.is_finite()) {
        return Err(schema("ground_truth", format!("non-finite point at index {i}")));
    }

    let positions: Vec<Point2> = ego_history
        .iter()
        .map(EgoState::position)
        .chain(raw.ground_truth.iter().copied())
        .collect();
    let bounds = match raw.bounds {
        Some(b) => {
            if !b.is_well_formed() {
                return Err(schema("bounds", "min must not exceed max".into()));
            }
            if let Some(p) = positions.iter().find(|p| !b.contains(p)) {
                return Err(schema(
                    "bounds",
                    format!("position ({}, {}) lies outside the given bounds", p.x, p.y),
                ));
            }
            b
        }
        None => Bounds::enclosing(&positions).expect("ground truth is non-empty"),
    };

    Ok(SceneRecord {
        scene_id: id,
        frames: raw.frames,
        ego_history,
        ground_truth: raw.ground_truth,
        bounds,
    })
}

fn first_non_increasing(ts: impl Iterator<Item = f64>) -> Option<usize> {
    let mut prev = None;
    for (i, t) in ts.enumerate() {
        if let Some(p) = prev {
            if t <= p {
                return Some(i);
            }
        }
        prev = Some(t);
    }
    None
}

/// One passenger-style directive attached to a scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionAnnotation {
    pub scene_id: String,
    pub annotation_id: String,
    pub annotator_id: String,
    pub text: String,
    pub refs_static: bool,
    pub refs_dynamic: bool,
    pub actionable: bool,
}

impl InstructionAnnotation {
    pub fn referentiality(&self) -> Referentiality {
        crate::metrics::referentiality_category(self.refs_static, self.refs_dynamic)
    }
}

#[derive(Debug, Deserialize)]
struct RawAnnotation {
    scene_id: String,
    annotation_id: String,
    #[serde(default)]
    annotator_id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    refs_static: Option<FlexBool>,
    #[serde(default)]
    refs_dynamic: Option<FlexBool>,
    #[serde(default)]
    actionable: Option<FlexBool>,
}

/// Boolean column that tolerates the spellings annotation exports use.
#[derive(Debug, Clone, Copy)]
struct FlexBool(Option<bool>);

impl<'de> Deserialize<'de> for FlexBool {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bool(bool),
            Int(i64),
            Str(String),
        }
        let v = match Repr::deserialize(d)? {
            Repr::Bool(b) => Some(b),
            Repr::Int(0) => Some(false),
            Repr::Int(1) => Some(true),
            Repr::Int(n) => {
                return Err(serde::de::Error::custom(format!("invalid boolean {n}")));
            }
            Repr::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
                "" => None,
                "true" | "t" | "yes" | "y" | "1" => Some(true),
                "false" | "f" | "no" | "n" | "0" => Some(false),
                other => {
                    return Err(serde::de::Error::custom(format!("invalid boolean `{other}`")));
                }
            },
        };
        Ok(FlexBool(v))
    }
}

fn flag(v: Option<FlexBool>) -> Option<bool> {
    v.and_then(|f| f.0)
}

impl RawAnnotation {
    fn finish(self, row: usize) -> Result<InstructionAnnotation, DatasetError> {
        let malformed = |message: String| DatasetError::MalformedRow { row, message };
        if self.scene_id.trim().is_empty() {
            return Err(malformed("scene_id is empty".into()));
        }
        if self.annotation_id.trim().is_empty() {
            return Err(malformed("annotation_id is empty".into()));
        }
        let has_text = !self.text.trim().is_empty();
        let actionable = flag(self.actionable).unwrap_or(has_text);
        if actionable && !has_text {
            return Err(malformed("actionable annotation has empty text".into()));
        }
        Ok(InstructionAnnotation {
            scene_id: self.scene_id,
            annotation_id: self.annotation_id,
            annotator_id: self.annotator_id,
            text: self.text,
            refs_static: flag(self.refs_static).unwrap_or(false),
            refs_dynamic: flag(self.refs_dynamic).unwrap_or(false),
            actionable,
        })
    }
}

/// Loads annotations from CSV, or from a JSON array when the file is `.json`
/// or its first non-blank character is `[`.
pub fn load_annotations(path: &Path) -> Result<Vec<InstructionAnnotation>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with('[');
    if is_json {
        annotations_from_json(&text)
    } else {
        annotations_from_csv(&text)
    }
}

pub fn annotations_from_csv(text: &str) -> Result<Vec<InstructionAnnotation>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, result) in reader.deserialize::<RawAnnotation>().enumerate() {
        // data rows are numbered from 1; the header is row 0
        let row = i + 1;
        let raw = result.map_err(|e| DatasetError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        out.push(raw.finish(row)?);
    }
    check_unique(&out)?;
    Ok(out)
}

pub fn annotations_from_json(text: &str) -> Result<Vec<InstructionAnnotation>, DatasetError> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| DatasetError::MalformedRow {
            row: 0,
            message: e.to_string(),
        })?;
    let mut out = Vec::with_capacity(values.len());
    for (i, value) in values.into_iter().enumerate() {
        let row = i + 1;
        let raw: RawAnnotation =
            serde_json::from_value(value).map_err(|e| DatasetError::MalformedRow {
                row,
                message: e.to_string(),
            })?;
        out.push(raw.finish(row)?);
    }
    check_unique(&out)?;
    Ok(out)
}

fn check_unique(annotations: &[InstructionAnnotation]) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for a in annotations {
        if !seen.insert(a.annotation_id.as_str()) {
            return Err(DatasetError::DuplicateAnnotation(a.annotation_id.clone()));
        }
    }
    Ok(())
}

/// Keeps only actionable annotations, preserving order.
pub fn filter_actionable(annotations: &[InstructionAnnotation]) -> Vec<InstructionAnnotation> {
    annotations.iter().filter(|a| a.actionable).cloned().collect()
}

/// Scenes paired with their annotations, plus annotations whose scene is unknown.
#[derive(Debug, Clone)]
pub struct JoinedScenes<'a> {
    pub pairs: Vec<(&'a SceneRecord, Vec<&'a InstructionAnnotation>)>,
    pub rejects: Vec<&'a InstructionAnnotation>,
}

/// Pairs every scene with its annotations, in manifest order.
pub fn join_scene_annotations<'a>(
    scenes: &'a [SceneRecord],
    annotations: &'a [InstructionAnnotation],
) -> JoinedScenes<'a> {
    let mut by_scene: BTreeMap<&str, Vec<&InstructionAnnotation>> = scenes
        .iter()
        .map(|s| (s.scene_id.as_str(), Vec::new()))
        .collect();
    let mut rejects = Vec::new();
    for a in annotations {
        match by_scene.get_mut(a.scene_id.as_str()) {
            Some(list) => list.push(a),
            None => rejects.push(a),
        }
    }
    let pairs = scenes
        .iter()
        .map(|s| {
            let list = by_scene.remove(s.scene_id.as_str()).unwrap_or_default();
            (s, list)
        })
        .collect();
    JoinedScenes { pairs, rejects }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene_json(id: &str, gt_len: usize) -> String {
        let gt: Vec<String> = (0..gt_len).map(|i| format!("[{}, 0.0]", i + 1)).collect();
        format!(
            r#"{{"scene_id": "{id}",
                "frames": [{{"path": "f0.png", "t": 0.0}}, {{"path": "f1.png", "t": 0.5}}],
                "ego_history": [{{"t": 0.0, "x": -1.0, "y": 0.0, "heading": 0.0, "speed": 2.0}},
                                {{"t": 0.5, "x": 0.0, "y": 0.0, "heading": 0.0, "speed": 2.0}}],
                "ground_truth": [{}]}}"#,
            gt.join(",")
        )
    }

    fn manifest(scenes: &[String]) -> String {
        format!(
            r#"{{"header": {{"version": 1, "dt_seconds": 0.5, "horizon": 10}}, "scenes": [{}]}}"#,
            scenes.join(",")
        )
    }

    #[test]
    fn loads_three_scenes_with_computed_bounds() {
        let text = manifest(&[scene_json("a", 10), scene_json("b", 10), scene_json("c", 10)]);
        let m = manifest_from_str(&text, ".").unwrap();
        assert_eq!(m.scenes.len(), 3);
        let b = m.scenes[0].bounds;
        assert_eq!(
            b,
            Bounds {
                min_x: -1.0,
                min_y: 0.0,
                max_x: 10.0,
                max_y: 0.0
            }
        );
    }

    #[test]
    fn short_ground_truth_names_scene_and_length() {
        let text = manifest(&[scene_json("short-one", 9)]);
        let err = manifest_from_str(&text, ".").unwrap_err();
        match &err {
            DatasetError::Horizon {
                scene_id,
                expected,
                found,
            } => {
                assert_eq!(scene_id, "short-one");
                assert_eq!((*expected, *found), (10, 9));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("expected horizon 10"));
    }

    #[test]
    fn unordered_frames_rejected() {
        let s = scene_json("x", 10).replace(r#""t": 0.5}"#, r#""t": -0.5}"#);
        let err = manifest_from_str(&manifest(&[s]), ".").unwrap_err();
        assert!(matches!(
            err,
            DatasetError::NonMonotone {
                field: "frames",
                index: 1,
                ..
            }
        ));
    }

    #[test]
    fn supplied_bounds_must_contain_positions() {
        let s = scene_json("x", 10).replacen(
            r#""ground_truth""#,
            r#""bounds": {"min_x": 0, "min_y": -1, "max_x": 5, "max_y": 1}, "ground_truth""#,
            1,
        );
        let err = manifest_from_str(&manifest(&[s]), ".").unwrap_err();
        assert!(matches!(err, DatasetError::Schema { ref field, .. } if field == "bounds"));
    }

    #[test]
    fn heading_is_normalized_and_negative_speed_rejected() {
        let s = scene_json("x", 10).replacen(r#""heading": 0.0"#, r#""heading": 7.0"#, 1);
        let m = manifest_from_str(&manifest(&[s]), ".").unwrap();
        let h = m.scenes[0].ego_history[0].heading;
        assert!((h - (7.0 - std::f64::consts::TAU)).abs() < 1e-12);

        let s = scene_json("x", 10).replacen(r#""speed": 2.0"#, r#""speed": -2.0"#, 1);
        assert!(manifest_from_str(&manifest(&[s]), ".").is_err());
    }

    #[test]
    fn annotations_defaults_and_categories() {
        let csv = "scene_id,annotation_id,annotator_id,text,refs_static,refs_dynamic\n\
                   s1,a1,ann1,Follow the yellow car,false,true\n\
                   s1,a2,ann2,,,\n";
        let anns = annotations_from_csv(csv).unwrap();
        assert_eq!(anns.len(), 2);
        assert!(anns[0].actionable);
        assert_eq!(anns[0].referentiality(), Referentiality::DynamicOnly);
        assert!(!anns[1].actionable);
        assert!(!anns[1].refs_static && !anns[1].refs_dynamic);
        assert_eq!(filter_actionable(&anns).len(), 1);
    }

    #[test]
    fn explicit_actionable_column_overrides_default() {
        let csv = "scene_id,annotation_id,annotator_id,text,actionable\n\
                   s1,a1,x,Keep going,no\n";
        let anns = annotations_from_csv(csv).unwrap();
        assert!(!anns[0].actionable);
    }

    #[test]
    fn duplicate_annotation_id_rejected() {
        let csv = "scene_id,annotation_id,annotator_id,text\ns1,a1,x,Go\ns2,a1,y,Stop\n";
        assert!(matches!(
            annotations_from_csv(csv),
            Err(DatasetError::DuplicateAnnotation(id)) if id == "a1"
        ));
    }

    #[test]
    fn malformed_row_reports_row_number() {
        let csv = "scene_id,annotation_id,annotator_id,text,refs_static\n\
                   s1,a1,x,Go,true\n\
                   s1,a2,x,Stop,maybe\n";
        match annotations_from_csv(csv) {
            Err(DatasetError::MalformedRow { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn json_annotations_accepted() {
        let json = r#"[{"scene_id": "s1", "annotation_id": "a1", "annotator_id": "x",
                        "text": "Turn left", "refs_static": true}]"#;
        let anns = annotations_from_json(json).unwrap();
        assert_eq!(anns[0].referentiality(), Referentiality::StaticOnly);
        assert!(anns[0].actionable);
    }

    #[test]
    fn join_pairs_and_rejects() {
        let m = manifest_from_str(&manifest(&[scene_json("A", 10), scene_json("B", 10)]), ".")
            .unwrap();
        let csv = "scene_id,annotation_id,annotator_id,text\n\
                   A,1,x,Go\nA,2,x,Stop\nA,3,x,Turn left\nZ,4,x,Nowhere\n";
        let anns = annotations_from_csv(csv).unwrap();
        let joined = join_scene_annotations(&m.scenes, &anns);
        assert_eq!(joined.pairs.len(), 2);
        assert_eq!(joined.pairs[0].1.len(), 3);
        assert_eq!(joined.pairs[1].1.len(), 0);
        assert_eq!(joined.rejects.len(), 1);
        assert_eq!(joined.rejects[0].annotation_id, "4");
    }
}
