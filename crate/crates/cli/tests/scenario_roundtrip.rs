//! Bundled scenarios parse, convert, and round-trip value-identically.

use msb_cli::scenario::{bundled, ScenarioFile};

#[test]
fn bundled_scenarios_round_trip() {
    for (name, text) in bundled() {
        let parsed = ScenarioFile::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let reparsed = ScenarioFile::parse(&parsed.to_json()).unwrap();
        assert_eq!(parsed, reparsed, "{name} round trip changed the value");

        // Value-level identity against the raw file.
        let raw: serde_json::Value = serde_json::from_str(text).unwrap();
        let emitted: serde_json::Value = serde_json::from_str(&parsed.to_json()).unwrap();
        assert_eq!(raw, emitted, "{name} serialization drops or adds keys");
    }
}

#[test]
fn bundled_scenarios_convert_and_prepare() {
    for (name, text) in bundled() {
        let parsed = ScenarioFile::parse(text).unwrap();
        let scenario = parsed
            .to_sim_scenario(None)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        msb_core::sim::prepare(scenario).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = msb_cli::scenario::EXAMPLE1_JSON.replace("\"policy\"", "\"extra\": 1, \"policy\"");
    assert!(ScenarioFile::parse(&text).is_err());
}

#[test]
fn seed_override_applies() {
    let parsed = ScenarioFile::parse(msb_cli::scenario::EXAMPLE1_JSON).unwrap();
    assert_eq!(parsed.to_sim_scenario(None).unwrap().master_seed, 611953);
    assert_eq!(parsed.to_sim_scenario(Some(7)).unwrap().master_seed, 7);
}

#[test]
fn defaults_fill_missing_sim_fields() {
    let mut parsed = ScenarioFile::parse(msb_cli::scenario::ROTATION_GENERAL_JSON).unwrap();
    parsed.sim.horizon = None;
    parsed.sim.trajectories = None;
    parsed.sim.record = None;
    let scenario = parsed.to_sim_scenario(None).unwrap();
    // kappa = 2 for the quarter-turn plant with a rank-one input map.
    assert_eq!(scenario.horizon, 4000);
    assert_eq!(scenario.trajectories, 2000);
    assert_eq!(scenario.record, msb_core::sim::RecordMode::Thinned);
}
