use std::path::PathBuf;

use vessel_aug::{default_plan, AugmentationPlan};

fn plan_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../plans/default.toml")
}

#[test]
fn shipped_default_plan_matches_code() {
    let shipped = AugmentationPlan::load(plan_path()).unwrap();
    assert_eq!(shipped, default_plan());
    assert_eq!(shipped.hash(), default_plan().hash());
}

#[test]
fn toml_rendering_round_trips() {
    let text = default_plan().to_toml_string().unwrap();
    let back = AugmentationPlan::from_toml_str(&text).unwrap();
    assert_eq!(back, default_plan());
}

#[test]
fn minimal_plan_uses_defaults() {
    let p = AugmentationPlan::from_toml_str("[[entry]]\ntransform = \"elastic\"\n").unwrap();
    assert_eq!(p.master_seed, 42);
    assert!(p.include_originals);
    assert_eq!(p.outputs_per_source(), 2);
    p.validate().unwrap();
}
