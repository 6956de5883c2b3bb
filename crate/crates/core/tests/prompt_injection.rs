use instructplan::prompting::{Condition, InjectionScope, PromptBuilder, PromptStage, Stage};
use proptest::prelude::*;

const EXPECTED_PREFIX: &str = "The passenger says: \"";
const EXPECTED_SUFFIX: &str = "\". Always prioritize the passenger\u{2019}s instruction unless it is unsafe; if complying is unsafe, briefly explain and choose the safest alternative.";

fn stages(builder: &PromptBuilder, c: &Condition) -> Vec<PromptStage> {
    vec![
        builder.scene_description(c).unwrap(),
        builder.object_identification(c).unwrap(),
        builder.intent(c, None).unwrap(),
        builder.intent(c, Some("Go straight at 5 m/s.")).unwrap(),
        builder
            .trajectory(c, ["A road.", "1. A car.", "Go straight."], "Current speed: 3.00 m/s.", 10, 0.5)
            .unwrap(),
    ]
}

#[test]
fn turn_left_block() {
    let b = PromptBuilder::default();
    let p = b.scene_description(&Condition::instructed("Turn left")).unwrap();
    assert!(p.text.ends_with(
        "The passenger says: \"Turn left\". Always prioritize the passenger\u{2019}s instruction unless it is unsafe; if complying is unsafe, briefly explain and choose the safest alternative."
    ));
}

#[test]
fn scene_description_only_scope() {
    let b = PromptBuilder::new(InjectionScope::SceneDescriptionOnly, 6);
    let base = stages(&b, &Condition::Baseline);
    let instr = stages(&b, &Condition::instructed("Stop here"));
    assert_ne!(base[0].text, instr[0].text);
    for (x, y) in base.iter().zip(&instr).skip(1) {
        assert_eq!(x, y);
    }
}

#[test]
fn empty_instruction_rejected() {
    let b = PromptBuilder::default();
    assert!(b.scene_description(&Condition::instructed("  \t")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn instructed_is_baseline_plus_one_block(raw in "[ ]{0,2}[A-Za-z0-9,.'!?{}\u{2019}-][A-Za-z0-9 ,.'!?{}\u{2019}-]{0,80}") {
        let b = PromptBuilder::default();
        let instruction = raw.trim();
        let base = stages(&b, &Condition::Baseline);
        let instr = stages(&b, &Condition::instructed(raw.clone()));
        for (x, y) in base.iter().zip(&instr) {
            let expected = format!("{}\n\n{EXPECTED_PREFIX}{instruction}{EXPECTED_SUFFIX}", x.text);
            prop_assert_eq!(&y.text, &expected);
            prop_assert_eq!(x.text.matches(EXPECTED_PREFIX).count(), 0);
            prop_assert_eq!(y.text.matches(EXPECTED_PREFIX).count(), 1);
            prop_assert_eq!(x.stage, y.stage);
            prop_assert_eq!(x.image_count, y.image_count);
            prop_assert_eq!(Stage::detect(&y.text), Some(y.stage));
        }
    }
}
