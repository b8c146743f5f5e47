use serde_json::Value;

use super::document::{Leaf, Locator};

/// A parsed JSON response. Leaves are addressed with `$`-rooted paths.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonDocument {
    pub value: Value,
}

impl JsonDocument {
    pub fn parse(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes).map(|value| JsonDocument { value })
    }

    /// String and number leaves with their paths, in document order.
    pub fn leaf_texts(&self) -> Vec<Leaf> {
        let mut out = Vec::new();
        flatten(&self.value, "$".to_string(), &mut out);
        out
    }
}

fn is_plain_key(key: &str) -> bool {
    let mut chars = key.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn flatten(value: &Value, path: String, out: &mut Vec<Leaf>) {
    match value {
        Value::String(s) => out.push(Leaf {
            locator: Locator::Json(path),
            text: s.clone(),
        }),
        Value::Number(n) => out.push(Leaf {
            locator: Locator::Json(path),
            text: n.to_string(),
        }),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(item, format!("{path}[{i}]"), out);
            }
        }
        Value::Object(map) => {
            for (k, v) in map {
                let child = if is_plain_key(k) {
                    format!("{path}.{k}")
                } else {
                    format!("{path}[{}]", Value::String(k.clone()))
                };
                flatten(v, child, out);
            }
        }
        Value::Bool(_) | Value::Null => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(json: &str) -> Vec<(String, String)> {
        JsonDocument::parse(json.as_bytes())
            .unwrap()
            .leaf_texts()
            .into_iter()
            .map(|l| (l.locator.to_string(), l.text))
            .collect()
    }

    #[test]
    fn flattens_strings_and_numbers() {
        assert_eq!(
            pairs(r#"{"msg":"completed","n":5}"#),
            vec![("$.msg".into(), "completed".into()), ("$.n".into(), "5".into())]
        );
    }

    #[test]
    fn success_flag_is_a_leaf() {
        assert_eq!(pairs(r#"{"success":1}"#), vec![("$.success".into(), "1".into())]);
    }

    #[test]
    fn nested_paths_and_odd_keys() {
        assert_eq!(
            pairs(r#"{"a":[{"b":"x"}, 2.5], "odd key": "y", "t": true, "z": null}"#),
            vec![
                ("$.a[0].b".into(), "x".into()),
                ("$.a[1]".into(), "2.5".into()),
                ("$[\"odd key\"]".into(), "y".into()),
            ]
        );
    }

    #[test]
    fn invalid_json_is_an_error() {
        assert!(JsonDocument::parse(b"{nope").is_err());
    }
}
