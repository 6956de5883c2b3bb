//! Paired baseline/instructed runs and the resumable results log.
//!
//! [`run_pipeline`] drives one scene through the four prompt stages, parses
//! the plan, integrates it and scores it. [`run_batch`] does that for every
//! scene: one baseline run plus one instructed run per actionable
//! annotation, at most `max_in_flight` at a time, appending each record to a
//! JSONL log as soon as it (and every item before it) is done. Items whose
//! `(scene_id, condition, annotation_id)` key is already in the log are
//! skipped, so an interrupted batch resumes where it stopped.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{self, DatasetError, InstructionAnnotation, Manifest, SceneRecord};
use crate::kinematics::{self, Trajectory};
use crate::metrics::{self, EvaluationRecord, Failure, FailureKind, RecordKey, StageText};
use crate::parser::{self, ParseError, ParseTier, ParsedTrajectory};
use crate::prompting::{self, Condition, ConditionKind, InjectionScope, PromptBuilder, PromptStage, Stage};
use crate::vlm_client::{self, BackendConfig, ChatBackend, ClientError, ImagePayload, ModelRequest};

pub const RESULTS_FORMAT: &str = "instructplan-results";
pub const RESULTS_VERSION: u32 = 1;

/// Knobs shared by batch runs and the interactive service.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub horizon: usize,
    pub dt: f64,
    pub frames_per_call: usize,
    pub reprompt_limit: u32,
    pub seed: Option<u64>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub injection: InjectionScope,
    pub oob_margin: f64,
    pub max_curvature: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            horizon: dataset::DEFAULT_HORIZON,
            dt: dataset::DEFAULT_DT_SECONDS,
            frames_per_call: 6,
            reprompt_limit: 2,
            seed: None,
            temperature: vlm_client::DEFAULT_TEMPERATURE,
            max_tokens: vlm_client::DEFAULT_MAX_TOKENS,
            injection: InjectionScope::AllStages,
            oob_margin: metrics::DEFAULT_OOB_MARGIN,
            max_curvature: parser::DEFAULT_MAX_CURVATURE,
        }
    }
}

impl PipelineSettings {
    /// Settings with the manifest's horizon and step.
    pub fn for_manifest(manifest: &Manifest) -> Self {
        PipelineSettings {
            horizon: manifest.horizon(),
            dt: manifest.dt_seconds(),
            ..Default::default()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Input(String),
    #[error("model call failed during {stage}: {source}")]
    Transport {
        stage: Stage,
        #[source]
        source: ClientError,
    },
    #[error("{stage} answer unusable after {attempts} attempt(s): {source}")]
    Parse {
        stage: Stage,
        attempts: u32,
        #[source]
        source: ParseError,
    },
}

impl PipelineError {
    pub fn failure_kind(&self) -> FailureKind {
        match self {
            PipelineError::Input(_) => FailureKind::Input,
            PipelineError::Transport { .. } => FailureKind::Transport,
            PipelineError::Parse { .. } => FailureKind::Parse,
        }
    }
}

/// A successfully scored plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub parsed: ParsedTrajectory,
    pub ego: Trajectory,
    pub global: Trajectory,
    pub ade: f64,
    pub out_of_bounds: bool,
}

/// Everything one pipeline execution produced, including the exact prompt
/// bytes sent, whether or not it succeeded.
#[derive(Debug)]
pub struct PipelineRun {
    pub prompts: Vec<PromptStage>,
    pub stage_texts: Vec<StageText>,
    pub trajectory_attempts: u32,
    pub backend_id: String,
    pub latency_seconds: f64,
    pub outcome: Result<PlanResult, PipelineError>,
}

/// Loads the most recent `count` frames of a scene as inline images.
pub fn load_frames(manifest: &Manifest, scene: &SceneRecord, count: usize) -> Result<Vec<ImagePayload>, String> {
    let start = scene.frames.len().saturating_sub(count);
    scene.frames[start..]
        .iter()
        .map(|f| {
            let path = manifest.resolve_frame(f);
            fs::read(&path)
                .map(|data| ImagePayload::from_file_bytes(&path, data))
                .map_err(|e| format!("cannot read frame {}: {e}", path.display()))
        })
        .collect()
}

struct Session<'a> {
    backend: &'a dyn ChatBackend,
    settings: &'a PipelineSettings,
    images: Vec<ImagePayload>,
    prompts: Vec<PromptStage>,
    stage_texts: Vec<StageText>,
    backend_id: String,
}

impl Session<'_> {
    fn ask(&mut self, prompt: PromptStage) -> Result<String, PipelineError> {
        let images = if prompt.stage.requires_images() {
            self.images[..prompt.image_count.min(self.images.len())].to_vec()
        } else {
            Vec::new()
        };
        let mut request = ModelRequest::new(prompt.text.clone())
            .with_images(images)
            .with_seed(self.settings.seed);
        request.temperature = self.settings.temperature;
        request.max_tokens = self.settings.max_tokens;
        let stage = prompt.stage;
        self.prompts.push(prompt);
        let response = self
            .backend
            .complete(&request)
            .map_err(|source| PipelineError::Transport { stage, source })?;
        self.backend_id = response.backend_id;
        self.stage_texts.push(StageText {
            stage,
            response: response.text.clone(),
        });
        Ok(response.text)
    }

    fn reasoning(&mut self, prompt: PromptStage) -> Result<String, PipelineError> {
        let stage = prompt.stage;
        let text = self.ask(prompt)?;
        parser::parse_intent_text(&text).map_err(|source| PipelineError::Parse {
            stage,
            attempts: 1,
            source,
        })
    }
}

/// Runs the four stages for one scene and scores the resulting plan.
pub fn run_pipeline(
    manifest: &Manifest,
    scene: &SceneRecord,
    condition: &Condition,
    backend: &dyn ChatBackend,
    settings: &PipelineSettings,
) -> PipelineRun {
    let started = Instant::now();
    let mut session = Session {
        backend,
        settings,
        images: Vec::new(),
        prompts: Vec::new(),
        stage_texts: Vec::new(),
        backend_id: backend.backend_id().to_owned(),
    };
    let mut attempts = 0;
    let outcome = execute(manifest, scene, condition, &mut session, &mut attempts);
    PipelineRun {
        prompts: session.prompts,
        stage_texts: session.stage_texts,
        trajectory_attempts: attempts,
        backend_id: session.backend_id,
        latency_seconds: started.elapsed().as_secs_f64(),
        outcome,
    }
}

fn execute(
    manifest: &Manifest,
    scene: &SceneRecord,
    condition: &Condition,
    session: &mut Session<'_>,
    attempts: &mut u32,
) -> Result<PlanResult, PipelineError> {
    let settings = session.settings;
    if settings.horizon != scene.ground_truth.len() {
        return Err(PipelineError::Input(format!(
            "horizon {} does not match the {} ground-truth points of scene {}",
            settings.horizon,
            scene.ground_truth.len(),
            scene.scene_id
        )));
    }
    if settings.frames_per_call == 0 {
        return Err(PipelineError::Input("frames per call must be at least 1".into()));
    }
    session.images =
        load_frames(manifest, scene, settings.frames_per_call).map_err(PipelineError::Input)?;
    if session.images.is_empty() {
        return Err(PipelineError::Input(format!(
            "scene {} has no camera frames",
            scene.scene_id
        )));
    }
    let start_pose = kinematics::initial_pose_from_history(&scene.ego_history)
        .map_err(|e| PipelineError::Input(e.to_string()))?;

    let builder = PromptBuilder::new(settings.injection, session.images.len());
    let input = |e: prompting::PromptError| PipelineError::Input(e.to_string());

    let description = session.reasoning(builder.scene_description(condition).map_err(input)?)?;
    let objects = session.reasoning(builder.object_identification(condition).map_err(input)?)?;
    let intent = session.reasoning(builder.intent(condition, None).map_err(input)?)?;

    let ego_summary = prompting::summarize_ego(&scene.ego_history);
    let trajectory_prompt = builder
        .trajectory(
            condition,
            [&description, &objects, &intent],
            &ego_summary,
            settings.horizon,
            settings.dt,
        )
        .map_err(input)?;

    let max_attempts = settings.reprompt_limit + 1;
    let mut prompt = trajectory_prompt.clone();
    let parsed = loop {
        *attempts += 1;
        let text = session.ask(prompt)?;
        match parser::parse_trajectory_text_with(&text, settings.horizon, settings.max_curvature) {
            Ok(parsed) => break parsed,
            Err(source) if *attempts >= max_attempts => {
                return Err(PipelineError::Parse {
                    stage: Stage::TrajectoryRequest,
                    attempts: *attempts,
                    source,
                });
            }
            Err(e) => {
                tracing::info!(scene = %scene.scene_id, attempt = *attempts, error = %e, "re-prompting");
                let mut next = trajectory_prompt.clone();
                next.text.push_str("\n\n");
                next.text
                    .push_str(&prompting::reprompt_suffix(&e.to_string(), settings.horizon));
                prompt = next;
            }
        }
    };

    let ego = kinematics::integrate(&parsed.sequence, settings.dt)
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    let global = kinematics::to_global(&ego, &start_pose);
    let ade = metrics::ade(&global.points, &scene.ground_truth)
        .map_err(|e| PipelineError::Input(e.to_string()))?;
    let out_of_bounds = metrics::out_of_bounds(&global.points, &scene.bounds, settings.oob_margin);
    Ok(PlanResult {
        parsed,
        ego,
        global,
        ade,
        out_of_bounds,
    })
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs one (scene, condition) pair and packs the outcome into a record.
/// Failures become failed records; they never abort the caller.
pub fn run_scene(
    manifest: &Manifest,
    scene: &SceneRecord,
    condition: &Condition,
    annotation: Option<&InstructionAnnotation>,
    backend: &dyn ChatBackend,
    settings: &PipelineSettings,
) -> EvaluationRecord {
    let started_at = now_rfc3339();
    let run = run_pipeline(manifest, scene, condition, backend, settings);
    let mut record =
        EvaluationRecord::skeleton(&scene.scene_id, condition.kind(), &run.backend_id, settings.seed);
    if let Condition::Instructed(text) = condition {
        record.instruction_text = Some(text.clone());
        record.word_count = Some(metrics::word_count(text));
        record.annotation_id = annotation.map(|a| a.annotation_id.clone());
        record.referentiality = annotation.map(InstructionAnnotation::referentiality);
    }
    record.attempts = run.trajectory_attempts;
    record.stage_texts = run.stage_texts;
    match run.outcome {
        Ok(plan) => {
            record.ade = Some(plan.ade);
            record.out_of_bounds = plan.out_of_bounds;
            record.parse_tier = Some(plan.parsed.tier);
            record.clamps = plan.parsed.clamps;
            record.sequence = Some(plan.parsed.sequence);
            record.predicted = plan.global.points;
        }
        Err(e) => {
            tracing::warn!(scene = %scene.scene_id, error = %e, "run failed");
            record.failure = Some(Failure {
                kind: e.failure_kind(),
                message: e.to_string(),
            });
        }
    }
    record.metadata = metrics::RunMetadata {
        started_at,
        finished_at: now_rfc3339(),
        latency_seconds: run.latency_seconds,
    };
    record
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionSet {
    #[default]
    Both,
    Baseline,
    Instructed,
}

impl ConditionSet {
    fn includes(self, kind: ConditionKind) -> bool {
        match self {
            ConditionSet::Both => true,
            ConditionSet::Baseline => kind == ConditionKind::Baseline,
            ConditionSet::Instructed => kind == ConditionKind::Instructed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub annotations: PathBuf,
    pub backend: BackendConfig,
    pub conditions: ConditionSet,
    /// Must match the manifest when given.
    pub horizon: Option<usize>,
    /// Overrides the manifest's step when given.
    pub dt: Option<f64>,
    pub frames_per_call: usize,
    pub max_in_flight: usize,
    pub reprompt_limit: u32,
    pub seed: Option<u64>,
    pub output: PathBuf,
    pub temperature: f64,
    pub max_tokens: u32,
    pub injection: InjectionScope,
    pub oob_margin: f64,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, annotations: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        let defaults = PipelineSettings::default();
        RunConfig {
            manifest: manifest.into(),
            annotations: annotations.into(),
            backend: BackendConfig::Mock {
                script: None,
                delay: std::time::Duration::ZERO,
            },
            conditions: ConditionSet::Both,
            horizon: None,
            dt: None,
            frames_per_call: defaults.frames_per_call,
            max_in_flight: 1,
            reprompt_limit: defaults.reprompt_limit,
            seed: None,
            output: output.into(),
            temperature: defaults.temperature,
            max_tokens: defaults.max_tokens,
            injection: defaults.injection,
            oob_margin: defaults.oob_margin,
        }
    }

    fn validate(&self) -> Result<(), RunError> {
        if self.horizon == Some(0) {
            return Err(RunError::Config("horizon must be at least 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(RunError::Config("max in-flight requests must be at least 1".into()));
        }
        if self.frames_per_call == 0 {
            return Err(RunError::Config("frames per call must be at least 1".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(RunError::Config(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    fn settings(&self, manifest: &Manifest) -> Result<PipelineSettings, RunError> {
        if let Some(h) = self.horizon {
            if h != manifest.horizon() {
                return Err(RunError::Config(format!(
                    "horizon {h} does not match the manifest horizon {}",
                    manifest.horizon()
                )));
            }
        }
        Ok(PipelineSettings {
            horizon: manifest.horizon(),
            dt: self.dt.unwrap_or(manifest.dt_seconds()),
            frames_per_call: self.frames_per_call,
            reprompt_limit: self.reprompt_limit,
            seed: self.seed,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            injection: self.injection,
            oob_margin: self.oob_margin,
            max_curvature: parser::DEFAULT_MAX_CURVATURE,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] ClientError),
    #[error("results log {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("results log {path}, line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Work items implied by the dataset.
    pub total: usize,
    /// Items already present in the log.
    pub skipped: usize,
    pub executed: usize,
    pub failed: usize,
    pub failures_by_kind: BTreeMap<FailureKind, usize>,
    pub clamped_values: usize,
    pub parse_tiers: BTreeMap<ParseTier, usize>,
    /// Annotations naming scenes the manifest does not have.
    pub rejected_annotations: usize,
}

impl RunSummary {
    fn absorb(&mut self, record: &EvaluationRecord) {
        self.executed += 1;
        if let Some(f) = &record.failure {
            self.failed += 1;
            *self.failures_by_kind.entry(f.kind).or_default() += 1;
        }
        if let Some(t) = record.parse_tier {
            *self.parse_tiers.entry(t).or_default() += 1;
        }
        self.clamped_values += record.clamps.total();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultsHeader {
    pub format: String,
    pub version: u32,
}

impl Default for ResultsHeader {
    fn default() -> Self {
        ResultsHeader {
            format: RESULTS_FORMAT.to_owned(),
            version: RESULTS_VERSION,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: ResultsHeader,
}

/// Contents of a results log.
#[derive(Debug, Clone, Default)]
pub struct ResultsLog {
    pub header: Option<ResultsHeader>,
    pub records: Vec<EvaluationRecord>,
    /// Byte length of the complete lines; anything after is a torn write.
    pub valid_len: u64,
}

/// Reads a JSONL results log. A final line without a newline that does not
/// parse is treated as an interrupted write and ignored.
pub fn read_results(path: &Path) -> Result<ResultsLog, RunError> {
    let text = fs::read_to_string(path).map_err(|source| RunError::Output {
        path: path.to_owned(),
        source,
    })?;
    parse_results(&text, path)
}

fn parse_results(text: &str, path: &Path) -> Result<ResultsLog, RunError> {
    let mut log = ResultsLog::default();
    let mut offset = 0usize;
    for (i, chunk) in text.split_inclusive('\n').enumerate() {
        let terminated = chunk.ends_with('\n');
        let line = chunk.trim_end_matches(['\n', '\r']);
        let line_no = i + 1;
        if line.trim().is_empty() {
            offset += chunk.len();
            continue;
        }
        if i == 0 {
            if let Ok(h) = serde_json::from_str::<HeaderLine>(line) {
                if h.header.format != RESULTS_FORMAT {
                    return Err(RunError::CorruptLog {
                        path: path.to_owned(),
                        line: 1,
                        message: format!("unknown format `{}`", h.header.format),
                    });
                }
                log.header = Some(h.header);
                offset += chunk.len();
                continue;
            }
        }
        match serde_json::from_str::<EvaluationRecord>(line) {
            Ok(r) if terminated => {
                log.records.push(r);
                offset += chunk.len();
            }
            // a complete record without its newline is still a torn write
            Ok(_) => break,
            Err(_) if !terminated => break,
            Err(e) => {
                return Err(RunError::CorruptLog {
                    path: path.to_owned(),
                    line: line_no,
                    message: e.to_string(),
                });
            }
        }
    }
    log.valid_len = offset as u64;
    Ok(log)
}

/// Single writer for the results log.
struct LogWriter {
    out: BufWriter<File>,
    path: PathBuf,
}

impl LogWriter {
    /// Opens `path` for appending. Returns the keys already logged.
    fn open(path: &Path) -> Result<(Self, HashSet<RecordKey>), RunError> {
        let io = |source| RunError::Output {
            path: path.to_owned(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut done = HashSet::new();
        let existing = if path.exists() {
            let log = read_results(path)?;
            done.extend(log.records.iter().map(EvaluationRecord::key));
            Some(log)
        } else {
            None
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        let mut writer = LogWriter {
            out: BufWriter::new(file),
            path: path.to_owned(),
        };
        match existing {
            Some(log) => {
                let len = writer.out.get_ref().metadata().map_err(io)?.len();
                if len != log.valid_len {
                    writer.out.get_ref().set_len(log.valid_len).map_err(io)?;
                }
                if log.header.is_none() && log.records.is_empty() {
                    writer.write_header()?;
                }
            }
            None => writer.write_header()?,
        }
        Ok((writer, done))
    }

    fn write_header(&mut self) -> Result<(), RunError> {
        let line = serde_json::to_string(&HeaderLine {
            header: ResultsHeader::default(),
        })
        .expect("header serializes");
        self.write_line(&line)
    }

    fn write_line(&mut self, line: &str) -> Result<(), RunError> {
        let io = |source| RunError::Output {
            path: self.path.clone(),
            source,
        };
        self.out.write_all(line.as_bytes()).map_err(io)?;
        self.out.write_all(b"\n").map_err(io)?;
        self.out.flush().map_err(io)
    }

    fn append(&mut self, record: &EvaluationRecord) -> Result<(), RunError> {
        let line = serde_json::to_string(record).expect("records serialize");
        self.write_line(&line)
    }
}

struct WorkItem<'a> {
    scene: &'a SceneRecord,
    condition: Condition,
    annotation: Option<&'a InstructionAnnotation>,
}

/// Runs the whole batch described by `config` with its configured backend.
pub fn run_batch(config: &RunConfig) -> Result<RunSummary, RunError> {
    let backend = vlm_client::connect(&config.backend)?;
    run_batch_with(config, backend.as_ref())
}

/// Like [`run_batch`] with a caller-supplied backend.
pub fn run_batch_with(config: &RunConfig, backend: &dyn ChatBackend) -> Result<RunSummary, RunError> {
    config.validate()?;
    let manifest = dataset::load_scenes(&config.manifest)?;
    let annotations = dataset::load_annotations(&config.annotations)?;
    let actionable = dataset::filter_actionable(&annotations);
    let joined = dataset::join_scene_annotations(&manifest.scenes, &actionable);
    for reject in &joined.rejects {
        tracing::warn!(annotation = %reject.annotation_id, scene = %reject.scene_id, "annotation references unknown scene");
    }
    let settings = config.settings(&manifest)?;

    let mut items = Vec::new();
    for (scene, anns) in &joined.pairs {
        if config.conditions.includes(ConditionKind::Baseline) {
            items.push(WorkItem {
                scene,
                condition: Condition::Baseline,
                annotation: None,
            });
        }
        if config.conditions.includes(ConditionKind::Instructed) {
            for a in anns {
                items.push(WorkItem {
                    scene,
                    condition: Condition::Instructed(a.text.clone()),
                    annotation: Some(a),
                });
            }
        }
    }

    let (mut writer, done) = LogWriter::open(&config.output)?;
    let mut summary = RunSummary {
        total: items.len(),
        rejected_annotations: joined.rejects.len(),
        ..Default::default()
    };
    let pending: Vec<WorkItem<'_>> = items
        .into_iter()
        .filter(|item| {
            let key = (
                item.scene.scene_id.clone(),
                item.condition.kind(),
                item.annotation.map(|a| a.annotation_id.clone()),
            );
            !done.contains(&key)
        })
        .collect();
    summary.skipped = summary.total - pending.len();
    tracing::info!(total = summary.total, skipped = summary.skipped, "starting batch");

    let next = AtomicUsize::new(0);
    let workers = config.max_in_flight.min(pending.len()).max(1);
    std::thread::scope(|scope| -> Result<(), RunError> {
        let (tx, rx) = mpsc::channel::<(usize, EvaluationRecord)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, manifest, settings) = (&pending, &next, &manifest, &settings);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = pending.get(i) else { break };
                let record = run_scene(
                    manifest,
                    item.scene,
                    &item.condition,
                    item.annotation,
                    backend,
                    settings,
                );
                if tx.send((i, record)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Records are written in work order regardless of completion order.
        let mut buffered = BTreeMap::new();
        let mut cursor = 0;
        for (i, record) in rx {
            buffered.insert(i, record);
            while let Some(record) = buffered.remove(&cursor) {
                if let Err(e) = writer.append(&record) {
                    // stop handing out work; workers exit after their current item
                    next.store(usize::MAX / 2, Ordering::SeqCst);
                    return Err(e);
                }
                summary.absorb(&record);
                cursor += 1;
            }
        }
        Ok(())
    })?;

    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torn_last_line_is_ignored() {
        let mut r = EvaluationRecord::skeleton("s", ConditionKind::Baseline, "mock", Some(1));
        r.ade = Some(1.0);
        let line = serde_json::to_string(&r).unwrap();
        let header = serde_json::to_string(&HeaderLine {
            header: ResultsHeader::default(),
        })
        .unwrap();
        let full = format!("{header}\n{line}\n");
        let torn = format!("{full}{}", &line[..line.len() / 2]);
        let log = parse_results(&torn, Path::new("x")).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.valid_len as usize, full.len());
        assert!(log.header.is_some());
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let text = "{\"header\":{\"format\":\"instructplan-results\",\"version\":1}}\nnot json\n";
        assert!(matches!(
            parse_results(text, Path::new("x")),
            Err(RunError::CorruptLog { line: 2, .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig::new("m", "a", "o");
        c.max_in_flight = 0;
        assert!(matches!(c.validate(), Err(RunError::Config(_))));
        let mut c = RunConfig::new("m", "a", "o");
        c.horizon = Some(0);
        assert!(c.validate().is_err());
    }
}
