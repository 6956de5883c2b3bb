//! Prompt assembly for the four planner stages.
//!
//! The reasoning chain runs scene description, object identification and
//! intent estimation, then asks for a speed-curvature plan. A passenger
//! instruction is the only thing that differs between a baseline and an
//! instructed run: it is appended to a stage prompt as one injection block,
//! separated by a blank line, so the instructed prompt minus that block is
//! byte-identical to the baseline prompt.
//!
//! Template text lives in `templates/v1/` and is compiled into the binary.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::EgoState;

/// Version tag of the bundled template set.
pub const TEMPLATE_VERSION: &str = "v1";

const SCENE_DESCRIPTION: &str = include_str!("../templates/v1/scene_description.txt");
const OBJECT_IDENTIFICATION: &str = include_str!("../templates/v1/object_identification.txt");
const INTENT: &str = include_str!("../templates/v1/intent.txt");
const INTENT_UPDATE: &str = include_str!("../templates/v1/intent_update.txt");
const TRAJECTORY: &str = include_str!("../templates/v1/trajectory.txt");
const REPROMPT: &str = include_str!("../templates/v1/reprompt.txt");
const INJECTION: &str = include_str!("../templates/v1/injection.txt");

/// Placed between a stage prompt and its injection block.
pub const INJECTION_SEPARATOR: &str = "\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SceneDescription,
    ObjectIdentification,
    IntentEstimation,
    TrajectoryRequest,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::SceneDescription,
        Stage::ObjectIdentification,
        Stage::IntentEstimation,
        Stage::TrajectoryRequest,
    ];

    /// First line of every prompt of this stage. Mock scripts key on it.
    pub fn marker(self) -> &'static str {
        match self {
            Stage::SceneDescription => "Task: scene description.",
            Stage::ObjectIdentification => "Task: object identification.",
            Stage::IntentEstimation => "Task: intent estimation.",
            Stage::TrajectoryRequest => "Task: trajectory prediction.",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::SceneDescription => "scene_description",
            Stage::ObjectIdentification => "object_identification",
            Stage::IntentEstimation => "intent_estimation",
            Stage::TrajectoryRequest => "trajectory_request",
        }
    }

    /// Whether prompts of this stage must carry camera frames.
    pub fn requires_images(self) -> bool {
        !matches!(self, Stage::TrajectoryRequest)
    }

    /// Identifies the stage of a prompt from its leading marker.
    pub fn detect(prompt: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| prompt.starts_with(s.marker()))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Baseline runs see no instruction; instructed runs carry exactly one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "instruction", rename_all = "snake_case")]
pub enum Condition {
    Baseline,
    Instructed(String),
}

impl Condition {
    pub fn instructed(text: impl Into<String>) -> Self {
        Condition::Instructed(text.into())
    }

    pub fn kind(&self) -> ConditionKind {
        match self {
            Condition::Baseline => ConditionKind::Baseline,
            Condition::Instructed(_) => ConditionKind::Instructed,
        }
    }

    pub fn instruction(&self) -> Option<&str> {
        match self {
            Condition::Baseline => None,
            Condition::Instructed(text) => Some(text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Baseline,
    Instructed,
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionKind::Baseline => "baseline",
            ConditionKind::Instructed => "instructed",
        })
    }
}

/// Which stage prompts receive the injection block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionScope {
    #[default]
    AllStages,
    SceneDescriptionOnly,
}

impl InjectionScope {
    fn applies_to(self, stage: Stage) -> bool {
        match self {
            InjectionScope::AllStages => true,
            InjectionScope::SceneDescriptionOnly => stage == Stage::SceneDescription,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStage {
    pub stage: Stage,
    pub text: String,
    pub image_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("instructed condition needs a non-empty instruction")]
    EmptyInstruction,
    #[error("stage output `{0}` is empty")]
    MissingStageOutput(&'static str),
    #[error("{stage} prompt needs at least one image")]
    MissingImages { stage: Stage },
}

/// The block appended for an instructed run.
pub fn injection_block(instruction: &str) -> String {
    render(INJECTION, &[("instruction", instruction)])
}

/// Single-pass `{name}` substitution. Unknown names are left untouched.
fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let vars: HashMap<&str, &str> = vars.iter().copied().collect();
    let template = template.trim_end();
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if vars.contains_key(&after[..close]) => {
                out.push_str(vars[&after[..close]]);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Builds stage prompts for a fixed injection scope and frame budget.
#[derive(Debug, Clone)]
pub struct PromptBuilder {
    pub scope: InjectionScope,
    /// Frames attached to each image-bearing stage.
    pub frames_per_call: usize,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        PromptBuilder {
            scope: InjectionScope::AllStages,
            frames_per_call: 6,
        }
    }
}

impl PromptBuilder {
    pub fn new(scope: InjectionScope, frames_per_call: usize) -> Self {
        PromptBuilder {
            scope,
            frames_per_call,
        }
    }

    fn finish(&self, stage: Stage, base: String, condition: &Condition) -> Result<PromptStage, PromptError> {
        let text = match condition {
            Condition::Baseline => base,
            Condition::Instructed(raw) => {
                let instruction = raw.trim();
                if instruction.is_empty() {
                    return Err(PromptError::EmptyInstruction);
                }
                if self.scope.applies_to(stage) {
                    let mut text = base;
                    text.push_str(INJECTION_SEPARATOR);
                    text.push_str(&injection_block(instruction));
                    text
                } else {
                    base
                }
            }
        };
        let image_count = if stage.requires_images() {
            self.frames_per_call
        } else {
            0
        };
        Ok(PromptStage {
            stage,
            text,
            image_count,
        })
    }

    pub fn scene_description(&self, condition: &Condition) -> Result<PromptStage, PromptError> {
        self.finish(Stage::SceneDescription, render(SCENE_DESCRIPTION, &[]), condition)
    }

    pub fn object_identification(&self, condition: &Condition) -> Result<PromptStage, PromptError> {
        self.finish(
            Stage::ObjectIdentification,
            render(OBJECT_IDENTIFICATION, &[]),
            condition,
        )
    }

    /// Without a prior intent asks for a fresh one; with one, asks whether it
    /// still holds.
    pub fn intent(&self, condition: &Condition, prior_intent: Option<&str>) -> Result<PromptStage, PromptError> {
        let base = match prior_intent.map(str::trim).filter(|p| !p.is_empty()) {
            Some(prior) => render(INTENT_UPDATE, &[("prior_intent", prior)]),
            None => render(INTENT, &[]),
        };
        self.finish(Stage::IntentEstimation, base, condition)
    }

    /// The final request embedding the three reasoning answers and the ego
    /// state, demanding `Speeds: [...]` / `Curvatures: [...]` lines.
    pub fn trajectory(
        &self,
        condition: &Condition,
        stage_outputs: [&str; 3],
        ego_summary: &str,
        horizon: usize,
        dt: f64,
    ) -> Result<PromptStage, PromptError> {
        let names = ["scene_description", "objects", "intent"];
        for (name, out) in names.iter().zip(stage_outputs) {
            if out.trim().is_empty() {
                return Err(PromptError::MissingStageOutput(name));
            }
        }
        let horizon = horizon.to_string();
        let dt = dt.to_string();
        let base = render(
            TRAJECTORY,
            &[
                ("horizon", &horizon),
                ("dt", &dt),
                ("scene_description", stage_outputs[0]),
                ("objects", stage_outputs[1]),
                ("intent", stage_outputs[2]),
                ("ego_summary", ego_summary),
            ],
        );
        self.finish(Stage::TrajectoryRequest, base, condition)
    }
}

/// Follow-up sent after an unparseable trajectory answer.
pub fn reprompt_suffix(reason: &str, horizon: usize) -> String {
    render(REPROMPT, &[("reason", reason), ("horizon", &horizon.to_string())])
}

/// Human-readable ego state for the trajectory prompt: current speed and
/// heading, the recent headings and the distance covered over the window.
pub fn summarize_ego(history: &[EgoState]) -> String {
    let Some(last) = history.last() else {
        return "No ego history available.".to_owned();
    };
    let recent: Vec<String> = history
        .iter()
        .rev()
        .take(5)
        .rev()
        .map(|s| format!("{:.3}", s.heading))
        .collect();
    let first = &history[0];
    let displacement = first.position().distance(&last.position());
    let window = last.timestamp - first.timestamp;
    format!(
        "Current speed: {:.2} m/s. Current heading: {:.3} rad.\n\
         Recent headings (rad, oldest first): [{}].\n\
         Displacement over the last {} s: {:.2} m.",
        last.speed,
        last.heading,
        recent.join(", "),
        window,
        displacement
    )
}

/// Extracts the instruction from a prompt carrying an injection block.
pub fn injected_instruction(prompt: &str) -> Option<&str> {
    let (prefix, suffix) = INJECTION.trim_end().split_once("{instruction}")?;
    let start = prompt.rfind(prefix)? + prefix.len();
    let tail = &prompt[start..];
    let end = tail.rfind(suffix)?;
    Some(&tail[..end])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builder() -> PromptBuilder {
        PromptBuilder::default()
    }

    #[test]
    fn baseline_scene_prompt_has_focus_and_no_passenger() {
        let p = builder().scene_description(&Condition::Baseline).unwrap();
        assert!(p.text.contains("traffic lights"));
        assert!(p.text.contains("lane markings"));
        assert!(!p.text.to_lowercase().contains("passenger"));
        assert!(p.image_count >= 1);
    }

    #[test]
    fn instructed_scene_prompt_ends_with_block() {
        let b = builder();
        let p = b.scene_description(&Condition::instructed("Turn left")).unwrap();
        assert!(p.text.contains("The passenger says: \"Turn left\"."));
        let base = b.scene_description(&Condition::Baseline).unwrap().text;
        assert_eq!(
            p.text,
            format!("{base}\n\nThe passenger says: \"Turn left\". Always prioritize the passenger\u{2019}s instruction unless it is unsafe; if complying is unsafe, briefly explain and choose the safest alternative.")
        );
    }

    #[test]
    fn empty_or_blank_instruction_rejected() {
        let b = builder();
        assert_eq!(
            b.scene_description(&Condition::instructed("")),
            Err(PromptError::EmptyInstruction)
        );
        assert_eq!(
            b.object_identification(&Condition::instructed(" \t\n")),
            Err(PromptError::EmptyInstruction)
        );
    }

    #[test]
    fn object_prompt_asks_for_two_or_three() {
        let b = builder();
        let p = b.object_identification(&Condition::Baseline).unwrap();
        assert!(p.text.contains("two or three"));
        let i = b
            .object_identification(&Condition::instructed("Follow the yellow car"))
            .unwrap();
        assert!(i.text.starts_with(&p.text));
        assert!(i.text.contains("\"Follow the yellow car\""));
    }

    #[test]
    fn intent_prompt_variants() {
        let b = builder();
        let fresh = b.intent(&Condition::Baseline, None).unwrap();
        assert!(fresh.text.contains("turn left, turn right, or go straight"));
        let chained = b
            .intent(&Condition::Baseline, Some("continue straight at 8 m/s"))
            .unwrap();
        assert!(chained.text.contains("continue straight at 8 m/s"));
        assert!(chained.text.contains("remains valid"));
        let instructed = b
            .intent(
                &Condition::instructed("Go straight when the stoplight turns green"),
                None,
            )
            .unwrap();
        assert!(instructed.text.starts_with(&fresh.text));
        assert_eq!(
            injected_instruction(&instructed.text),
            Some("Go straight when the stoplight turns green")
        );
    }

    #[test]
    fn trajectory_prompt_mandates_format() {
        let b = builder();
        let outs = ["clear road", "a cyclist on the right", "go straight at 5 m/s"];
        let p = b
            .trajectory(&Condition::Baseline, outs, "Current speed: 5.00 m/s.", 10, 0.5)
            .unwrap();
        assert!(p.text.contains("Speeds: [s1, s2, ..., s10]"));
        assert!(p.text.contains("Curvatures: [c1, c2, ..., c10]"));
        assert!(!p.text.contains('{'));
        assert_eq!(p.image_count, 0);
        let i = b
            .trajectory(&Condition::instructed("Stop"), outs, "x", 10, 0.5)
            .unwrap();
        assert!(i.text.contains("Speeds:") && i.text.contains("The passenger says"));
        assert_eq!(
            b.trajectory(&Condition::Baseline, ["a", "", "c"], "x", 10, 0.5),
            Err(PromptError::MissingStageOutput("objects"))
        );
    }

    #[test]
    fn substituted_text_is_not_re_expanded() {
        let b = builder();
        let p = b
            .trajectory(&Condition::Baseline, ["{intent}", "b", "c"], "{horizon}", 10, 0.5)
            .unwrap();
        assert!(p.text.contains("Scene description:\n{intent}\n"));
        assert!(p.text.contains("Ego vehicle state:\n{horizon}\n"));
    }

    #[test]
    fn scene_only_scope_leaves_later_stages_plain() {
        let b = PromptBuilder::new(InjectionScope::SceneDescriptionOnly, 6);
        let c = Condition::instructed("Turn right");
        assert!(b.scene_description(&c).unwrap().text.contains("passenger"));
        let base = b.intent(&Condition::Baseline, None).unwrap();
        assert_eq!(b.intent(&c, None).unwrap(), base);
    }

    #[test]
    fn stage_detection_from_marker() {
        let b = builder();
        let c = Condition::Baseline;
        assert_eq!(
            Stage::detect(&b.scene_description(&c).unwrap().text),
            Some(Stage::SceneDescription)
        );
        assert_eq!(
            Stage::detect(&b.intent(&c, Some("x")).unwrap().text),
            Some(Stage::IntentEstimation)
        );
        assert_eq!(Stage::detect("hello"), None);
    }

    #[test]
    fn ego_summary_mentions_speed_and_headings() {
        let h = [
            EgoState {
                timestamp: 0.0,
                x: 0.0,
                y: 0.0,
                heading: 0.0,
                speed: 4.0,
            },
            EgoState {
                timestamp: 0.5,
                x: 3.0,
                y: 4.0,
                heading: 0.05,
                speed: 4.2,
            },
        ];
        let s = summarize_ego(&h);
        assert!(s.contains("Current speed: 4.20 m/s"));
        assert!(s.contains("[0.000, 0.050]"));
        assert!(s.contains("5.00 m"));
    }
}
