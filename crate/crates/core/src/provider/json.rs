use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::{Payload, ProviderError};

/// A numeric field requested from the model, rendered into prompts as
/// `name in [lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

const FIELDS_PREFIX: &str = "Respond with a JSON object containing these numeric fields:";

impl FieldSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
        }
    }

    /// The instruction line listing `fields`.
    pub fn render(fields: &[FieldSpec]) -> String {
        let list: Vec<String> = fields
            .iter()
            .map(|f| format!("{} in [{}, {}]", f.name, f.lo, f.hi))
            .collect();
        format!("{FIELDS_PREFIX} {}.", list.join(", "))
    }

    /// Recover the field list from a prompt produced with [`FieldSpec::render`].
    pub fn parse_all(prompt: &str) -> Vec<FieldSpec> {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| {
            Regex::new(r"([a-z][a-z0-9_]*) in \[(-?\d+(?:\.\d+)?), (-?\d+(?:\.\d+)?)\]")
                .expect("static regex")
        });
        prompt
            .lines()
            .filter(|l| l.starts_with(FIELDS_PREFIX))
            .flat_map(|l| re.captures_iter(l).collect::<Vec<_>>())
            .filter_map(|c| {
                Some(FieldSpec::new(&c[1], c[2].parse().ok()?, c[3].parse().ok()?))
            })
            .collect()
    }
}

fn numeric_fields(object: &serde_json::Map<String, Value>, out: &mut Payload, nested: bool) {
    for (k, v) in object {
        match v {
            Value::Number(n) => {
                if let Some(x) = n.as_f64() {
                    if nested {
                        out.entry(k.clone()).or_insert(x);
                    } else {
                        out.insert(k.clone(), x);
                    }
                }
            }
            Value::Object(inner) => numeric_fields(inner, out, true),
            _ => {}
        }
    }
}

fn flatten(object: &serde_json::Map<String, Value>) -> Payload {
    let mut out = Payload::new();
    // top-level numbers win over nested ones with the same key
    numeric_fields(object, &mut out, false);
    out
}

fn strip_fence(text: &str) -> &str {
    let t = text.trim();
    if let Some(rest) = t.strip_prefix("```") {
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        rest.strip_suffix("```").unwrap_or(rest).trim()
    } else {
        t
    }
}

/// Extract numeric fields from a model completion.
///
/// Lenient mode takes the first parseable JSON object anywhere in the text
/// (fenced or bare). Strict mode requires the whole completion, minus an
/// optional code fence, to be a single object.
pub fn extract_payload(text: &str, strict: bool) -> Result<Payload, ProviderError> {
    let parse_err = |message: &str| ProviderError::Parse {
        message: message.to_string(),
        raw: text.to_string(),
    };
    if strict {
        return match serde_json::from_str::<Value>(strip_fence(text)) {
            Ok(Value::Object(map)) => Ok(flatten(&map)),
            Ok(_) => Err(parse_err("completion is not a JSON object")),
            Err(e) => Err(parse_err(&e.to_string())),
        };
    }
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Ok(flatten(&map));
        }
    }
    Err(parse_err("no JSON object found"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_inside_prose() {
        let p = extract_payload(r#"Sure! Here it is: {"valence": -0.48} hope that helps"#, false)
            .unwrap();
        assert_eq!(p.get("valence"), Some(&-0.48));
    }

    #[test]
    fn fenced_block_and_nested_fields() {
        let text = "```json\n{\"a\": 1, \"ctx\": {\"a\": 5, \"b\": 2}, \"s\": \"x\"}\n```";
        let p = extract_payload(text, true).unwrap();
        assert_eq!(p.get("a"), Some(&1.0));
        assert_eq!(p.get("b"), Some(&2.0));
        assert!(!p.contains_key("s"));
    }

    #[test]
    fn strict_rejects_prose() {
        assert!(extract_payload(r#"ok {"a": 1}"#, true).is_err());
        assert!(matches!(
            extract_payload("nothing here", false),
            Err(ProviderError::Parse { .. })
        ));
    }

    #[test]
    fn skips_unparseable_braces() {
        let p = extract_payload(r#"{oops} then {"k": 0.5}"#, false).unwrap();
        assert_eq!(p.get("k"), Some(&0.5));
    }

    #[test]
    fn field_specs_round_trip_through_prompt() {
        let fields = vec![FieldSpec::new("valence", -1.0, 1.0), FieldSpec::new("rating_fun", 1.0, 10.0)];
        let prompt = format!("header\n{}\nfooter", FieldSpec::render(&fields));
        assert_eq!(FieldSpec::parse_all(&prompt), fields);
    }
}
