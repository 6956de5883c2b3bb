//! Evaluation harness for instruction-conditioned VLM driving planners.
//!
//! A scene goes through a staged prompt pipeline (scene description, object
//! identification, intent, trajectory) once without and once with a
//! passenger instruction appended to every prompt. The model answers with
//! speeds and curvatures, which are integrated into waypoints and scored
//! against ground truth with ADE. Batches are logged to resumable JSONL and
//! summarized into comparison tables.
//!
//! ```
//! use instructplan::kinematics::integrate;
//! use instructplan::parser::parse_trajectory_text;
//!
//! let text = "Speeds: [2, 2, 2]\nCurvatures: [0, 0, 0]";
//! let parsed = parse_trajectory_text(text, 3).unwrap();
//! let path = integrate(&parsed.sequence, 0.5).unwrap();
//! assert_eq!(path.points.last().unwrap().x, 3.0);
//! ```

pub mod dataset;
pub mod kinematics;
pub mod metrics;
pub mod parser;
pub mod prompting;
pub mod report;
pub mod runner;
pub mod vlm_client;

pub use dataset::{InstructionAnnotation, Manifest, SceneRecord};
pub use kinematics::{Point2, Trajectory};
pub use metrics::EvaluationRecord;
pub use parser::SpeedCurvatureSequence;
pub use prompting::{Condition, ConditionKind};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/dataset.md")]
    pub struct Dataset;
    #[doc = include_str!("../../../book/src/prompting.md")]
    pub struct Prompting;
    #[doc = include_str!("../../../book/src/parsing.md")]
    pub struct Parsing;
    #[doc = include_str!("../../../book/src/kinematics.md")]
    pub struct Kinematics;
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;
    #[doc = include_str!("../../../book/src/runs.md")]
    pub struct Runs;
    #[doc = include_str!("../../../book/src/reports.md")]
    pub struct Reports;
    #[doc = include_str!("../../../book/src/backends.md")]
    pub struct Backends;
    #[doc = include_str!("../../../book/src/service.md")]
    pub struct Service;
}
