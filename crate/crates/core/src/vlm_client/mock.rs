use std::path::Path;
use std::sync::LazyLock;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{secs, ChatBackend, ClientError, ModelRequest, ModelResponse};
use crate::prompting::{injected_instruction, Stage};

pub const MOCK_BACKEND_ID: &str = "mock";

/// Bounds of unscripted trajectory answers.
const MAX_MOCK_SPEED: f64 = 15.0;
const MAX_MOCK_CURVATURE: f64 = 0.2;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockMatch {
    #[serde(default, skip_serializing_if = "Option::is_none", with = "stage_name")]
    pub stage: Option<Stage>,
    /// Case-sensitive substring of the injected passenger instruction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_contains: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(rename = "match", default)]
    pub matcher: MockMatch,
    pub response_text: String,
}

/// Ordered rules; the first matching rule answers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
}

mod stage_name {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::prompting::Stage;

    pub fn serialize<S: Serializer>(stage: &Option<Stage>, s: S) -> Result<S::Ok, S::Error> {
        match stage {
            Some(st) => s.serialize_str(st.as_str()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Stage>, D::Error> {
        let Some(name) = Option::<String>::deserialize(d)? else {
            return Ok(None);
        };
        let stage = match name.as_str() {
            "scene_description" | "scene" => Stage::SceneDescription,
            "object_identification" | "objects" => Stage::ObjectIdentification,
            "intent_estimation" | "intent" => Stage::IntentEstimation,
            "trajectory_request" | "trajectory" => Stage::TrajectoryRequest,
            other => {
                return Err(serde::de::Error::custom(format!("unknown stage `{other}`")));
            }
        };
        Ok(Some(stage))
    }
}

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, ClientError> {
        serde_json::from_str(text).map_err(|e| ClientError::Script(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClientError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn find(&self, request: &ModelRequest) -> Option<&MockRule> {
        let stage = Stage::detect(&request.user_text);
        let instruction = injected_instruction(&request.user_text);
        self.rules.iter().find(|rule| {
            let m = &rule.matcher;
            let stage_ok = m.stage.is_none_or(|s| Some(s) == stage);
            let instr_ok = match &m.instruction_contains {
                None => true,
                Some(needle) => instruction.is_some_and(|i| i.contains(needle.as_str())),
            };
            stage_ok && instr_ok
        })
    }
}

/// Hash of everything that identifies a request, seed included.
fn request_digest(request: &ModelRequest) -> [u8; 32] {
    let mut h = Sha256::new();
    let mut field = |bytes: &[u8]| {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    };
    field(request.system_text.as_deref().unwrap_or("").as_bytes());
    field(request.user_text.as_bytes());
    for img in &request.images {
        field(img.media_type.as_bytes());
        field(&img.data);
    }
    field(&request.seed.unwrap_or(0).to_le_bytes());
    field(&[request.seed.is_some() as u8]);
    h.finalize().into()
}

static HORIZON_HINT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Speeds: \[s1, s2, \.\.\., s(\d+)\]").unwrap());

const SCENES: [&str; 4] = [
    "A multi-lane urban road in daylight. The traffic light ahead is green, a few vehicles travel in the same direction and the lane markings are clearly visible.",
    "An intersection with a red traffic light. Pedestrians are waiting at the crosswalk and a vehicle is stopped in the adjacent lane; lane markings are worn but visible.",
    "A narrow street with parked cars on both sides. No traffic lights are visible, a cyclist rides ahead and the center line is dashed.",
    "A wide arterial road at dusk. Traffic lights are far ahead, vehicles in the oncoming lanes have their headlights on and the lane markings are solid white.",
];
const OBJECTS: [&str; 4] = [
    "1. A white sedan directly ahead in the ego lane, about 15 m away; it sets our following distance. 2. A pedestrian near the right curb; they may step into the road.",
    "1. A bus stopped on the right about 20 m ahead; it may pull out. 2. An oncoming truck in the left lane; it limits lateral room. 3. A cyclist ahead on the right; we must keep a safe gap.",
    "1. A car waiting at the intersection on the left; it could turn across our path. 2. Pedestrians on the crosswalk ahead; we must yield to them.",
    "1. A motorcycle in the adjacent left lane slightly behind us; it may overtake. 2. A van parked on the right shoulder; its door could open.",
];
const INTENTS: [&str; 4] = [
    "Go straight and keep a steady speed of about 8 m/s.",
    "Slow down and prepare to stop at about 2 m/s.",
    "Turn left at a low speed of about 4 m/s.",
    "Turn right gently at about 5 m/s.",
];

/// Answers `request` from `script`, or from a deterministic default.
pub fn mock_complete(request: &ModelRequest, script: &MockScript) -> ModelResponse {
    let started = Instant::now();
    let text = match script.find(request) {
        Some(rule) => rule.response_text.clone(),
        None => default_answer(request),
    };
    ModelResponse {
        text,
        latency: secs(started.elapsed()),
        backend_id: MOCK_BACKEND_ID.to_owned(),
    }
}

fn default_answer(request: &ModelRequest) -> String {
    let mut rng = ChaCha8Rng::from_seed(request_digest(request));
    let pick = |rng: &mut ChaCha8Rng, options: &[&str]| options[rng.random_range(0..options.len())].to_owned();
    match Stage::detect(&request.user_text) {
        Some(Stage::SceneDescription) => pick(&mut rng, &SCENES),
        Some(Stage::ObjectIdentification) => pick(&mut rng, &OBJECTS),
        Some(Stage::IntentEstimation) => pick(&mut rng, &INTENTS),
        Some(Stage::TrajectoryRequest) => {
            let horizon = HORIZON_HINT
                .captures(&request.user_text)
                .and_then(|c| c[1].parse::<usize>().ok())
                .filter(|&h| h > 0)
                .unwrap_or(crate::dataset::DEFAULT_HORIZON);
            default_trajectory(&mut rng, horizon)
        }
        None => "I could not identify the requested task.".to_owned(),
    }
}

fn default_trajectory(rng: &mut ChaCha8Rng, horizon: usize) -> String {
    let mut speed = rng.random_range(0.0..=MAX_MOCK_SPEED);
    let mut curvature = rng.random_range(-MAX_MOCK_CURVATURE..=MAX_MOCK_CURVATURE);
    let mut speeds = Vec::with_capacity(horizon);
    let mut curvatures = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        speeds.push(format!("{speed:.2}"));
        curvatures.push(format!("{curvature:.3}"));
        speed = (speed + rng.random_range(-0.5..=0.5)).clamp(0.0, MAX_MOCK_SPEED);
        curvature = (curvature + rng.random_range(-0.02..=0.02)).clamp(-MAX_MOCK_CURVATURE, MAX_MOCK_CURVATURE);
    }
    format!(
        "Speeds: [{}]\nCurvatures: [{}]",
        speeds.join(", "),
        curvatures.join(", ")
    )
}

/// In-process backend driven by a [`MockScript`].
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    script: MockScript,
    delay: Duration,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            delay: Duration::ZERO,
        }
    }

    /// Sleeps this long on every call, standing in for inference time.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, ClientError> {
        request.validate()?;
        let started = Instant::now();
        if !self.delay.is_zero() {
            thread::sleep(self.delay);
        }
        let mut resp = mock_complete(request, &self.script);
        resp.latency = secs(started.elapsed());
        Ok(resp)
    }

    fn backend_id(&self) -> &str {
        MOCK_BACKEND_ID
    }
}
