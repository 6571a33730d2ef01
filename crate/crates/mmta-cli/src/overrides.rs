//! `--set key=value` edits applied to the scenario document before it is
//! parsed.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

/// One parsed `key=value` edit. The key is a dotted path into the document;
/// numeric segments index arrays. The value is read as JSON when it parses
/// and as a plain string otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: Value,
    pub text: String,
}

pub fn parse_override(text: &str) -> Result<Override> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{text}` is not of the form key=value"))?;
    let path: Vec<String> = key.split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        bail!("override key `{key}` has an empty segment");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(Override {
        path,
        value,
        text: text.to_string(),
    })
}

/// Sets the value at `o.path`, creating intermediate objects as needed.
pub fn apply(doc: &mut Value, o: &Override) -> Result<()> {
    let mut cur = doc;
    for (depth, seg) in o.path.iter().enumerate() {
        let last = depth + 1 == o.path.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(seg.clone(), o.value.clone());
                    return Ok(());
                }
                map.entry(seg.clone()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .with_context(|| format!("override `{}`: `{seg}` is not an array index", o.text))?;
                let len = items.len();
                let slot = items
                    .get_mut(i)
                    .ok_or_else(|| anyhow!("override `{}`: index {i} out of range (length {len})", o.text))?;
                if last {
                    *slot = o.value.clone();
                    return Ok(());
                }
                slot
            }
            _ => bail!("override `{}`: `{seg}` does not name a field of an object or array", o.text),
        };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_keys_and_indices() {
        let mut doc = json!({"params": {"TF": {"bus": 0.3}}, "pt_lines": [{"frequency": 3}]});
        apply(&mut doc, &parse_override("params.TF.RS=0.9").unwrap()).unwrap();
        apply(&mut doc, &parse_override("pt_lines.0.frequency=2").unwrap()).unwrap();
        apply(&mut doc, &parse_override("toggles.modes=[\"car\",\"bus\"]").unwrap()).unwrap();
        apply(&mut doc, &parse_override("name=demo").unwrap()).unwrap();
        assert_eq!(doc["params"]["TF"]["RS"], json!(0.9));
        assert_eq!(doc["pt_lines"][0]["frequency"], json!(2));
        assert_eq!(doc["toggles"]["modes"], json!(["car", "bus"]));
        assert_eq!(doc["name"], json!("demo"));
    }

    #[test]
    fn malformed_overrides() {
        assert!(parse_override("params").is_err());
        assert!(parse_override("a..b=1").is_err());
        let mut doc = json!({"pt_lines": []});
        assert!(apply(&mut doc, &parse_override("pt_lines.3.frequency=1").unwrap()).is_err());
        assert!(apply(&mut doc, &parse_override("pt_lines.x=1").unwrap()).is_err());
    }
}
