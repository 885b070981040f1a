//! Plain-text trace rendering.

use serde_json::Value;

use inherit_core::TraceEvent;

fn flat(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        Value::Array(items) => format!("[{}]", items.iter().map(flat).collect::<Vec<_>>().join(",")),
        Value::Object(map) if map.len() == 1 && map.contains_key("commitment") => {
            flat(&map["commitment"])
        }
        Value::Object(map) => format!(
            "{{{}}}",
            map.iter()
                .map(|(k, v)| format!("{k}={}", flat(v)))
                .collect::<Vec<_>>()
                .join(" ")
        ),
        other => other.to_string(),
    }
}

/// One line per event: block, sequence number, kind, then `key=value` pairs.
pub fn trace_text(trace: &[TraceEvent]) -> Vec<String> {
    trace
        .iter()
        .map(|e| {
            let v = serde_json::to_value(&e.event).expect("events serialize");
            let fields = match &v["payload"] {
                Value::Object(map) => map
                    .iter()
                    .map(|(k, v)| format!("{k}={}", flat(v)))
                    .collect::<Vec<_>>()
                    .join(" "),
                other => flat(other),
            };
            format!("{:>6} {:>4}  {:<18} {fields}", e.block, e.seq, e.event.kind())
        })
        .collect()
}
