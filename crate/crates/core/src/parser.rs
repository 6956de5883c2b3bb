//! Extraction of structured answers from free-form model text.
//!
//! Trajectory answers are parsed in three tiers of decreasing strictness:
//!
//! 1. labeled lists, `Speeds: [..]` and `Curvatures: [..]`;
//! 2. the first two bracketed numeric lists of the expected length, read as
//!    speeds then curvatures;
//! 3. bare numbers following the words "speed" and "curvature".
//!
//! The tier that succeeded is reported alongside the values so that format
//! drift can be told apart from genuinely unusable output. Parsed values are
//! clamped into the physically meaningful range and the clamps are counted.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Default bound on |curvature| in 1/m.
pub const DEFAULT_MAX_CURVATURE: f64 = 1.0;
/// Intent summaries are cut to this many characters before re-embedding.
pub const INTENT_MAX_CHARS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedCurvatureSequence {
    /// m/s per step.
    pub speeds: Vec<f64>,
    /// 1/m per step, positive turns left.
    pub curvatures: Vec<f64>,
}

impl SpeedCurvatureSequence {
    pub fn len(&self) -> usize {
        self.speeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.speeds.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ParseTier {
    Strict = 1,
    Lenient = 2,
    Fallback = 3,
}

impl From<ParseTier> for u8 {
    fn from(t: ParseTier) -> u8 {
        t as u8
    }
}

impl TryFrom<u8> for ParseTier {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(ParseTier::Strict),
            2 => Ok(ParseTier::Lenient),
            3 => Ok(ParseTier::Fallback),
            other => Err(format!("unknown parse tier {other}")),
        }
    }
}

impl fmt::Display for ParseTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ParseTier::Strict => "strict",
            ParseTier::Lenient => "lenient",
            ParseTier::Fallback => "fallback",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampCounts {
    pub speed: usize,
    pub curvature: usize,
}

impl ClampCounts {
    pub fn total(&self) -> usize {
        self.speed + self.curvature
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrajectory {
    pub sequence: SpeedCurvatureSequence,
    pub tier: ParseTier,
    pub clamps: ClampCounts,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no speed/curvature trajectory found in model output")]
    NoTrajectoryFound,
    #[error("expected {expected} values per list, found {found}")]
    WrongArity { expected: usize, found: usize },
    #[error("non-finite value `{0}` in trajectory")]
    NonFinite(String),
    #[error("model returned an empty response")]
    EmptyResponse,
}

impl ParseError {
    /// Short stable identifier, used in logs and result records.
    pub fn kind(&self) -> &'static str {
        match self {
            ParseError::NoTrajectoryFound => "no_trajectory_found",
            ParseError::WrongArity { .. } => "wrong_arity",
            ParseError::NonFinite(_) => "non_finite",
            ParseError::EmptyResponse => "empty_response",
        }
    }
}

static LABELED_SPEEDS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\bspeeds?\s*(?:\([^)\n]*\))?\s*[:=]\s*\[([^\[\]]*)\]").unwrap());
static LABELED_CURVATURES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bcurvatures?\s*(?:\([^)\n]*\))?\s*[:=]\s*\[([^\[\]]*)\]").unwrap()
});
static BRACKETED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[([^\[\]]*)\]").unwrap());
static SPEED_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)speed").unwrap());
static CURVATURE_WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)curvature").unwrap());
static LEADING_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?").unwrap());
static UNIT_SUFFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*(?:[A-Za-z]+(?:\s*(?:/|\^)\s*-?[A-Za-z0-9]+)*|1/[A-Za-z]+)?\s*$").unwrap());
static NON_FINITE_WORD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^[+-]?(?:nan|inf|infinity)$").unwrap());
static PROSE_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:e[+-]?\d+)?|[+-]?\b(?:nan|infinity|inf)\b").unwrap()
});

/// A single element of a numeric list: a finite value or a non-finite token.
#[derive(Debug, Clone, PartialEq)]
enum Num {
    Finite(f64),
    NonFinite(String),
}

/// Parses the inside of `[...]` as a numeric list. Returns `None` when any
/// element is not a number (with an optional unit).
fn numeric_list(body: &str) -> Option<Vec<Num>> {
    let body = body.trim();
    if body.is_empty() {
        return None;
    }
    body.split(',').map(list_element).collect()
}

fn list_element(raw: &str) -> Option<Num> {
    let s = raw.trim();
    if NON_FINITE_WORD.is_match(s) {
        return Some(Num::NonFinite(s.to_owned()));
    }
    let m = LEADING_NUMBER.find(s)?;
    if !UNIT_SUFFIX.is_match(&s[m.end()..]) {
        return None;
    }
    let token = m.as_str();
    let v: f64 = token.parse().ok()?;
    Some(if v.is_finite() {
        Num::Finite(v)
    } else {
        Num::NonFinite(token.to_owned())
    })
}

fn finite_values(list: &[Num]) -> Result<Vec<f64>, ParseError> {
    list.iter()
        .map(|n| match n {
            Num::Finite(v) => Ok(*v),
            Num::NonFinite(t) => Err(ParseError::NonFinite(t.clone())),
        })
        .collect()
}

/// Parses a trajectory answer with the default curvature bound.
pub fn parse_trajectory_text(text: &str, horizon: usize) -> Result<ParsedTrajectory, ParseError> {
    parse_trajectory_text_with(text, horizon, DEFAULT_MAX_CURVATURE)
}

pub fn parse_trajectory_text_with(
    text: &str,
    horizon: usize,
    max_curvature: f64,
) -> Result<ParsedTrajectory, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    // Remembers the first wrong-length list seen, so a total miss can still
    // be reported as an arity problem.
    let mut wrong_arity: Option<usize> = None;
    let mut note_arity = |len: usize| {
        if len != horizon && wrong_arity.is_none() {
            wrong_arity = Some(len);
        }
    };

    // Tier 1: labeled lists.
    let speeds = LABELED_SPEEDS
        .captures(text)
        .and_then(|c| numeric_list(&c[1]));
    let curvatures = LABELED_CURVATURES
        .captures(text)
        .and_then(|c| numeric_list(&c[1]));
    if let Some(s) = &speeds {
        note_arity(s.len());
    }
    if let Some(c) = &curvatures {
        note_arity(c.len());
    }
    if let (Some(s), Some(c)) = (&speeds, &curvatures) {
        if s.len() != horizon || c.len() != horizon {
            let found = if s.len() != horizon { s.len() } else { c.len() };
            return Err(ParseError::WrongArity {
                expected: horizon,
                found,
            });
        }
        return finish(finite_values(s)?, finite_values(c)?, ParseTier::Strict, max_curvature);
    }

    // Tier 2: first two bracketed numeric lists of the right length.
    let mut candidates = Vec::new();
    for cap in BRACKETED.captures_iter(text) {
        if let Some(list) = numeric_list(&cap[1]) {
            note_arity(list.len());
            if list.len() == horizon {
                candidates.push(list);
                if candidates.len() == 2 {
                    break;
                }
            }
        }
    }
    if candidates.len() == 2 {
        return finish(
            finite_values(&candidates[0])?,
            finite_values(&candidates[1])?,
            ParseTier::Lenient,
            max_curvature,
        );
    }

    // Tier 3: numbers following the keywords.
    if let Some((s, c)) = keyword_numbers(text, horizon)? {
        return finish(s, c, ParseTier::Fallback, max_curvature);
    }

    match wrong_arity {
        Some(found) => Err(ParseError::WrongArity {
            expected: horizon,
            found,
        }),
        None => Err(ParseError::NoTrajectoryFound),
    }
}

/// Numbers after the first "speed" up to the next "curvature" (and vice
/// versa). Tokens glued to letters (`s1`), used as unit denominators (`1/m`)
/// or as exponents (`m^-1`) are not values.
/// Speeds, then curvatures.
type Lists = (Vec<f64>, Vec<f64>);

fn keyword_numbers(text: &str, horizon: usize) -> Result<Option<Lists>, ParseError> {
    let (Some(sw), Some(cw)) = (SPEED_WORD.find(text), CURVATURE_WORD.find(text)) else {
        return Ok(None);
    };
    let segment = |start: usize, stop_re: &Regex| -> &str {
        let end = stop_re
            .find_at(text, start)
            .map(|m| m.start())
            .unwrap_or(text.len());
        &text[start..end]
    };
    let speed_seg = segment(sw.end(), &CURVATURE_WORD);
    let curv_seg = segment(cw.end(), &SPEED_WORD);
    let speeds = prose_numbers(speed_seg, horizon);
    let curvatures = prose_numbers(curv_seg, horizon);
    if speeds.len() < horizon || curvatures.len() < horizon {
        return Ok(None);
    }
    Ok(Some((finite_values(&speeds)?, finite_values(&curvatures)?)))
}

fn prose_numbers(segment: &str, limit: usize) -> Vec<Num> {
    let mut out = Vec::new();
    for m in PROSE_TOKEN.find_iter(segment) {
        let before = segment[..m.start()].chars().next_back();
        let rest = &segment[m.end()..];
        if before.is_some_and(|c| c.is_alphanumeric() || matches!(c, '_' | '^' | '.')) {
            continue;
        }
        if rest.starts_with(['/', '^']) || is_ordinal_suffix(rest) {
            continue;
        }
        let token = m.as_str();
        let num = if NON_FINITE_WORD.is_match(token) {
            Num::NonFinite(token.to_owned())
        } else {
            match token.parse::<f64>() {
                Ok(v) if v.is_finite() => Num::Finite(v),
                Ok(_) => Num::NonFinite(token.to_owned()),
                Err(_) => continue,
            }
        };
        out.push(num);
        if out.len() == limit {
            break;
        }
    }
    out
}

/// `2nd`, `3rd`, `10th` are ordinals, not values.
fn is_ordinal_suffix(rest: &str) -> bool {
    let word: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    matches!(word.to_ascii_lowercase().as_str(), "st" | "nd" | "rd" | "th")
}

fn finish(
    speeds: Vec<f64>,
    curvatures: Vec<f64>,
    tier: ParseTier,
    max_curvature: f64,
) -> Result<ParsedTrajectory, ParseError> {
    let (sequence, clamps) = clamp(
        SpeedCurvatureSequence { speeds, curvatures },
        max_curvature,
    );
    tracing::debug!(%tier, clamps = clamps.total(), "parsed trajectory");
    Ok(ParsedTrajectory {
        sequence,
        tier,
        clamps,
    })
}

/// Negative speeds become 0 and curvatures are limited to ±`max_curvature`.
pub fn clamp(mut seq: SpeedCurvatureSequence, max_curvature: f64) -> (SpeedCurvatureSequence, ClampCounts) {
    let mut counts = ClampCounts::default();
    for v in &mut seq.speeds {
        if *v < 0.0 {
            *v = 0.0;
            counts.speed += 1;
        }
    }
    for k in &mut seq.curvatures {
        if k.abs() > max_curvature {
            *k = max_curvature.copysign(*k);
            counts.curvature += 1;
        }
    }
    (seq, counts)
}

fn format_list(values: &[f64]) -> String {
    let items: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", items.join(", "))
}

/// Renders a sequence in the labeled format the trajectory prompt asks for.
/// Values use the shortest representation that parses back exactly.
pub fn format_sequence(seq: &SpeedCurvatureSequence) -> String {
    format!(
        "Speeds: {}\nCurvatures: {}",
        format_list(&seq.speeds),
        format_list(&seq.curvatures)
    )
}

/// Normalizes a reasoning-stage answer for re-embedding in later prompts.
pub fn parse_intent_text(text: &str) -> Result<String, ParseError> {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if collapsed.is_empty() {
        return Err(ParseError::EmptyResponse);
    }
    Ok(match collapsed.char_indices().nth(INTENT_MAX_CHARS) {
        Some((cut, _)) => collapsed[..cut].trim_end().to_owned(),
        None => collapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_format() {
        let text = "Speeds: [2,2,2,2,2,2,2,2,2,2]\nCurvatures: [0,0,0,0,0,0,0,0,0,0]";
        let p = parse_trajectory_text(text, 10).unwrap();
        assert_eq!(p.tier, ParseTier::Strict);
        assert_eq!(p.sequence.speeds, vec![2.0; 10]);
        assert_eq!(p.sequence.curvatures, vec![0.0; 10]);
        assert_eq!(p.clamps.total(), 0);
    }

    #[test]
    fn short_labeled_list_is_wrong_arity() {
        assert_eq!(
            parse_trajectory_text("Speeds: [1,2,3]", 10),
            Err(ParseError::WrongArity {
                expected: 10,
                found: 3
            })
        );
    }

    #[test]
    fn lenient_bare_lists_after_prose() {
        let text = "The road ahead is clear so I will keep a steady pace.\n\
                    [5, 5, 5, 5, 5, 5, 5, 5, 5, 5]\n\
                    [0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01]";
        let p = parse_trajectory_text(text, 10).unwrap();
        assert_eq!(p.tier, ParseTier::Lenient);
        assert_eq!(p.sequence.speeds, vec![5.0; 10]);
        assert_eq!(p.sequence.curvatures, vec![0.01; 10]);
    }

    #[test]
    fn fallback_keywords() {
        let text = "For speed I pick 1 2 3 4 5 6 7 8 9 10 m/s and for curvature \
                    0 0 0 0 0 0 0 0 0 0.05 1/m.";
        let p = parse_trajectory_text(text, 10).unwrap();
        assert_eq!(p.tier, ParseTier::Fallback);
        assert_eq!(p.sequence.speeds, (1..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(p.sequence.curvatures[9], 0.05);
    }

    #[test]
    fn non_finite_rejected() {
        let text = "Speeds: [1,1,1,1,NaN,1,1,1,1,1]\nCurvatures: [0,0,0,0,0,0,0,0,0,0]";
        assert!(matches!(
            parse_trajectory_text(text, 10),
            Err(ParseError::NonFinite(_))
        ));
        let text = "Speeds: [1,1,1,1,1e999,1,1,1,1,1]\nCurvatures: [0,0,0,0,0,0,0,0,0,0]";
        assert!(matches!(
            parse_trajectory_text(text, 10),
            Err(ParseError::NonFinite(_))
        ));
    }

    #[test]
    fn clamps_are_counted_and_idempotent() {
        let text = "Speeds: [-1,2,2,2,2,2,2,2,2,-3]\nCurvatures: [0,5,-5,0,0,0,0,0,0,0]";
        let p = parse_trajectory_text(text, 10).unwrap();
        assert_eq!(p.clamps, ClampCounts { speed: 2, curvature: 2 });
        assert_eq!(p.sequence.speeds[0], 0.0);
        assert_eq!(p.sequence.curvatures[1], 1.0);
        assert_eq!(p.sequence.curvatures[2], -1.0);
        let (again, counts) = clamp(p.sequence.clone(), DEFAULT_MAX_CURVATURE);
        assert_eq!(again, p.sequence);
        assert_eq!(counts.total(), 0);
    }

    #[test]
    fn nothing_to_parse() {
        assert_eq!(
            parse_trajectory_text("I cannot help with that.", 10),
            Err(ParseError::NoTrajectoryFound)
        );
        assert_eq!(parse_trajectory_text("  ", 10), Err(ParseError::EmptyResponse));
    }

    #[test]
    fn intent_trims_and_collapses() {
        assert_eq!(
            parse_intent_text("  The car should continue straight.  ").unwrap(),
            "The car should continue straight."
        );
        assert_eq!(parse_intent_text("a \n\t b").unwrap(), "a b");
        assert_eq!(parse_intent_text(""), Err(ParseError::EmptyResponse));
    }

    #[test]
    fn intent_truncates_on_char_boundary() {
        let ramble = "é".repeat(10_000);
        let out = parse_intent_text(&ramble).unwrap();
        assert_eq!(out.chars().count(), INTENT_MAX_CHARS);
        let ascii = "word ".repeat(2_000);
        assert!(parse_intent_text(&ascii).unwrap().chars().count() <= INTENT_MAX_CHARS);
    }

    #[test]
    fn format_round_trips() {
        let seq = SpeedCurvatureSequence {
            speeds: vec![0.1, 2.0, 1e-7, 13.333333333333334],
            curvatures: vec![-0.2, 0.0, 1.0, -1e-12],
        };
        let p = parse_trajectory_text(&format_sequence(&seq), 4).unwrap();
        assert_eq!(p.sequence, seq);
        assert_eq!(p.tier, ParseTier::Strict);
    }
}
