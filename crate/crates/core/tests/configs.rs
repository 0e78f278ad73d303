use std::path::Path;

use dnlkg::experiments::RunConfig;

#[test]
fn shipped_configs_load_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") && !path.to_string_lossy().ends_with(".schema.json") {
            RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 6);
}

#[test]
fn schema_lists_every_config_key() {
    use dnlkg::experiments::Scenario;
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("run_config.schema.json")).unwrap()).unwrap();
    let documented: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
    let cfg = RunConfig::new(Scenario::Vanishing, dnlkg::ModelParams::new(1.0, 3.0).unwrap(), 1.0);
    let value = serde_json::to_value(&cfg).unwrap();
    let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
    assert_eq!(documented.len(), keys.len());
    for k in keys {
        assert!(documented.contains(&k), "{k} undocumented");
    }
    for nested in ["thresholds", "shooting", "grid"] {
        let want: Vec<&String> = value[nested].as_object().unwrap().keys().collect();
        let have: Vec<&String> = schema["properties"][nested]["properties"].as_object().unwrap().keys().collect();
        assert_eq!(want.len(), have.len(), "{nested}");
        assert!(want.iter().all(|k| have.contains(k)), "{nested}");
    }
}
