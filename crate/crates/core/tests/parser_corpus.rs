use instructplan::parser::{
    format_sequence, parse_trajectory_text, ParseError, ParseTier, SpeedCurvatureSequence,
};
use proptest::prelude::*;

mod common;
use common::{corpus, tier_name, Expect};

#[test]
fn corpus_matches_labels() {
    let samples = corpus();
    assert!(samples.len() >= 20);
    let mut tiers = std::collections::BTreeSet::new();
    for s in &samples {
        let got = parse_trajectory_text(&s.text, s.horizon);
        match (&s.expect, got) {
            (
                Expect::Parsed {
                    tier,
                    speeds,
                    curvatures,
                    clamped_speeds,
                    clamped_curvatures,
                },
                Ok(p),
            ) => {
                assert_eq!(tier_name(p.tier), tier, "{}", s.name);
                assert_eq!(&p.sequence.speeds, speeds, "{}", s.name);
                assert_eq!(&p.sequence.curvatures, curvatures, "{}", s.name);
                assert_eq!(p.clamps.speed, *clamped_speeds, "{}", s.name);
                assert_eq!(p.clamps.curvature, *clamped_curvatures, "{}", s.name);
                tiers.insert(tier.clone());
            }
            (Expect::Failed { error }, Err(e)) => {
                assert_eq!(e.kind(), error, "{}: {e}", s.name);
                tiers.insert("malformed".to_owned());
            }
            (_, got) => panic!("{}: unexpected {got:?}", s.name),
        }
    }
    assert_eq!(tiers.len(), 4, "corpus must cover every tier and malformed output");
}

#[test]
fn malformed_subset_reports_arity_and_non_finite() {
    let samples = corpus();
    let errors: Vec<ParseError> = samples
        .iter()
        .filter(|s| s.name.starts_with("malformed"))
        .filter_map(|s| parse_trajectory_text(&s.text, s.horizon).err())
        .collect();
    assert!(errors.iter().any(|e| matches!(e, ParseError::WrongArity { expected: 5, .. })));
    assert!(errors.iter().any(|e| matches!(e, ParseError::NonFinite(_))));
}

fn clamped_sequence() -> impl Strategy<Value = SpeedCurvatureSequence> {
    (1usize..=20).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..40.0, n),
            prop::collection::vec(-1.0f64..=1.0, n),
        )
            .prop_map(|(speeds, curvatures)| SpeedCurvatureSequence { speeds, curvatures })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn format_then_parse_is_identity(seq in clamped_sequence()) {
        let text = format_sequence(&seq);
        let parsed = parse_trajectory_text(&text, seq.len()).unwrap();
        prop_assert_eq!(parsed.tier, ParseTier::Strict);
        prop_assert_eq!(parsed.clamps.total(), 0);
        prop_assert_eq!(parsed.sequence, seq);
    }

    #[test]
    fn any_text_parses_or_errors(text in "\\PC{0,200}", horizon in 1usize..12) {
        if let Ok(p) = parse_trajectory_text(&text, horizon) {
            prop_assert_eq!(p.sequence.speeds.len(), horizon);
            prop_assert_eq!(p.sequence.curvatures.len(), horizon);
            prop_assert!(p.sequence.speeds.iter().all(|v| v.is_finite() && *v >= 0.0));
            prop_assert!(p.sequence.curvatures.iter().all(|k| k.abs() <= 1.0));
        }
    }
}
