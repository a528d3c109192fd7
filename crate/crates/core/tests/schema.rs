//! `docs/action.schema.json` and the action parser describe the same messages.

use proptest::prelude::*;
use serde_json::{json, Map, Value};

use roomescape::protocol::{parse_action, ParseError};

fn schema() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/action.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn bounds(prop: &Value) -> (f64, f64) {
    (prop["minimum"].as_f64().unwrap(), prop["maximum"].as_f64().unwrap())
}

#[test]
fn schema_fields_match_the_parser() {
    let s = schema();
    assert_eq!(s["additionalProperties"], false);
    let props = s["properties"].as_object().unwrap();
    let names: Vec<&str> = props.keys().map(String::as_str).collect();
    for name in &names {
        let msg = json!({ *name: null }).to_string();
        assert!(parse_action(&msg).is_ok(), "{name} rejected");
    }
    assert!(matches!(parse_action(r#"{"walk": 1}"#), Err(ParseError::UnknownField(_))));
    for field in ["move_forward", "rotate_right", "rotate_down"] {
        let (lo, hi) = bounds(&props[field]);
        for ok in [lo, hi, (lo + hi) / 2.0] {
            assert!(parse_action(&json!({ field: ok }).to_string()).is_ok(), "{field} {ok}");
        }
        for bad in [lo - 0.001, hi + 0.001] {
            assert!(
                matches!(parse_action(&json!({ field: bad }).to_string()), Err(ParseError::OutOfRange { .. })),
                "{field} {bad}"
            );
        }
    }
    let look = &props["look_at"];
    assert_eq!((look["minItems"].as_u64(), look["maxItems"].as_u64()), (Some(2), Some(2)));
    assert!(parse_action(r#"{"look_at": [0.5]}"#).is_err());
    assert!(parse_action(r#"{"look_at": [1.01, 0.5]}"#).is_err());
    let inner: Vec<&String> = props["interactions"]["properties"].as_object().unwrap().keys().collect();
    assert_eq!(inner, ["input", "use_item_id"]);
    assert!(parse_action(r#"{"interactions": {"key": "x"}}"#).is_err());
}

/// A control-panel style form: each field either left blank or filled with
/// a value the schema allows.
fn form_state() -> impl Strategy<Value = Map<String, Value>> {
    let s = schema();
    let props = s["properties"].clone();
    let ranged = |name: &str| {
        let (lo, hi) = bounds(&props[name]);
        prop::option::of(lo..=hi).prop_map(|v| v.map(Value::from))
    };
    let text = || prop::option::of("[ -~]{0,24}").prop_map(|v| v.map(Value::from));
    let flag = || prop::option::of(any::<bool>()).prop_map(|v| v.map(Value::from));
    let look = prop::option::of((0.0f64..=1.0, 0.0f64..=1.0)).prop_map(|v| v.map(|(x, y)| json!([x, y])));
    let interactions = prop::option::of((text(), text())).prop_map(|v| {
        v.map(|(item, input)| {
            let mut m = Map::new();
            if let Some(i) = item {
                m.insert("use_item_id".into(), i);
            }
            if let Some(i) = input {
                m.insert("input".into(), i);
            }
            Value::Object(m)
        })
    });
    (
        ranged("move_forward"),
        ranged("rotate_right"),
        ranged("rotate_down"),
        flag(),
        look,
        flag(),
        interactions,
        text(),
        text(),
    )
        .prop_map(|(mf, rr, rd, jump, look, grab, inter, read, rationale)| {
            let fields = [
                ("move_forward", mf),
                ("rotate_right", rr),
                ("rotate_down", rd),
                ("jump", jump),
                ("look_at", look),
                ("grab", grab),
                ("interactions", inter),
                ("read", read),
                ("rationale", rationale),
            ];
            fields
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
                .collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schema_valid_forms_parse(form in form_state()) {
        let raw = Value::Object(form.clone()).to_string();
        let action = parse_action(&raw).map_err(|e| TestCaseError::fail(format!("{raw}: {e}")))?;
        prop_assert_eq!(action.move_forward, form.get("move_forward").and_then(Value::as_f64));
        prop_assert_eq!(action.grab, form.get("grab").and_then(Value::as_bool));
        prop_assert_eq!(parse_action(&action.to_json()).unwrap(), action);
    }
}
