use std::collections::BTreeSet;

use serde_json::Value;

use pnr_dao::simulator::{load_scenario, Action};

fn schema() -> Value {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/schema/scenario.schema.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().map(|o| o.keys().cloned().collect()).unwrap_or_default()
}

fn strings(v: &Value) -> BTreeSet<String> {
    v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
}

#[test]
fn action_variants_match_code() {
    let s = schema();
    let names: BTreeSet<String> = s["properties"]["script"]["items"]["oneOf"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["properties"]["action"]["const"].as_str().unwrap().to_string())
        .collect();
    let code: BTreeSet<String> = Action::NAMES.iter().map(|s| s.to_string()).collect();
    assert_eq!(names, code);
}

/// Every shipped scenario uses only fields the schema declares, supplies
/// every required one, and loads.
#[test]
fn shipped_scenarios_conform() {
    let s = schema();
    let actions = s["properties"]["script"]["items"]["oneOf"].as_array().unwrap().clone();
    let agent = &s["properties"]["agents"]["items"];
    let dir = std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios")).unwrap();
    let mut checked = 0;
    for entry in dir {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        load_scenario(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let doc: Value = serde_json::to_value(text.parse::<toml::Table>().unwrap()).unwrap();
        assert!(keys(&doc).is_subset(&keys(&s["properties"])), "{}", path.display());
        if let Some(cfg) = doc.get("config") {
            assert!(keys(cfg).is_subset(&keys(&s["properties"]["config"]["properties"])));
        }
        for a in doc.get("agents").and_then(Value::as_array).into_iter().flatten() {
            assert!(keys(a).is_subset(&keys(&agent["properties"])));
            assert!(strings(&agent["required"]).is_subset(&keys(a)));
        }
        for step in doc.get("script").and_then(Value::as_array).into_iter().flatten() {
            let name = step["action"].as_str().unwrap();
            let spec = actions.iter().find(|a| a["properties"]["action"]["const"] == name).unwrap();
            assert!(keys(step).is_subset(&keys(&spec["properties"])), "{}: {step}", path.display());
            assert!(strings(&spec["required"]).is_subset(&keys(step)), "{}: {step}", path.display());
        }
        checked += 1;
    }
    assert!(checked >= 4);
}
