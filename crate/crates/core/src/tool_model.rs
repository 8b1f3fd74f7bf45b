//! Tool documents, their canonical text form and content digests.
//!
//! A [`ToolDocument`] is the unit of indexing. Its [`ToolHash`] is computed
//! over the name, description and parameter schema only, so synthetic
//! questions and the origin server never change a tool's identity.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("tool_id must not be empty")]
    EmptyToolId,
    #[error("tool `{0}` has an empty name")]
    EmptyName(String),
    #[error("tool `{0}` has an empty synthetic question")]
    EmptyQuestion(String),
    #[error("tool `{tool}` declares parameter `{param}` more than once")]
    DuplicateParameter { tool: String, param: String },
    #[error("enum parameter `{param}` of tool `{tool}` has no allowed values")]
    EnumWithoutValues { tool: String, param: String },
    #[error("invalid digest: {0}")]
    InvalidDigest(String),
    #[error("unsupported input schema for tool `{tool}`: {reason}")]
    UnsupportedSchema { tool: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    String,
    Integer,
    Enum,
    OptionalInteger,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::String => "string",
            ParamKind::Integer => "integer",
            ParamKind::Enum => "enum",
            ParamKind::OptionalInteger => "optional-integer",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed_values: Option<Vec<String>>,
    #[serde(default)]
    pub description: String,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind, description: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            allowed_values: None,
            description: description.into(),
        }
    }

    pub fn enumeration<I, S>(name: impl Into<String>, values: I, description: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: name.into(),
            kind: ParamKind::Enum,
            allowed_values: Some(values.into_iter().map(Into::into).collect()),
            description: description.into(),
        }
    }

    pub fn is_required(&self) -> bool {
        !matches!(self.kind, ParamKind::OptionalInteger)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolDocument {
    pub tool_id: String,
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub parameters: Vec<ParameterSpec>,
    #[serde(default)]
    pub synthetic_questions: Vec<String>,
    #[serde(default)]
    pub origin_server: String,
}

impl ToolDocument {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.tool_id.is_empty() {
            return Err(ModelError::EmptyToolId);
        }
        if self.name.is_empty() {
            return Err(ModelError::EmptyName(self.tool_id.clone()));
        }
        if self.synthetic_questions.iter().any(|q| q.is_empty()) {
            return Err(ModelError::EmptyQuestion(self.tool_id.clone()));
        }
        let mut seen = HashSet::new();
        for p in &self.parameters {
            if !seen.insert(p.name.as_str()) {
                return Err(ModelError::DuplicateParameter {
                    tool: self.tool_id.clone(),
                    param: p.name.clone(),
                });
            }
            if p.kind == ParamKind::Enum && p.allowed_values.as_ref().is_none_or(|v| v.is_empty()) {
                return Err(ModelError::EnumWithoutValues {
                    tool: self.tool_id.clone(),
                    param: p.name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Parameter schema as an object keyed by parameter name.
    pub fn parameters_value(&self) -> Value {
        let mut map = Map::new();
        for p in &self.parameters {
            let mut spec = Map::new();
            spec.insert("description".into(), Value::String(p.description.clone()));
            spec.insert("kind".into(), Value::String(p.kind.as_str().into()));
            if let Some(values) = &p.allowed_values {
                spec.insert("allowed_values".into(), json!(values));
            }
            map.insert(p.name.clone(), Value::Object(spec));
        }
        Value::Object(map)
    }

    pub fn canonical_parameters(&self) -> String {
        canonical_json(&self.parameters_value())
    }

    /// JSON-Schema rendering used on the MCP wire (`inputSchema`).
    pub fn input_schema(&self) -> Value {
        let mut properties = Map::new();
        let mut required = Vec::new();
        for p in &self.parameters {
            let mut prop = Map::new();
            let ty = match p.kind {
                ParamKind::String | ParamKind::Enum => "string",
                ParamKind::Integer | ParamKind::OptionalInteger => "integer",
            };
            prop.insert("type".into(), json!(ty));
            if let Some(values) = &p.allowed_values {
                prop.insert("enum".into(), json!(values));
            }
            if !p.description.is_empty() {
                prop.insert("description".into(), json!(p.description));
            }
            properties.insert(p.name.clone(), Value::Object(prop));
            if p.is_required() {
                required.push(json!(p.name));
            }
        }
        json!({ "type": "object", "properties": properties, "required": required })
    }

    /// Inverse of [`ToolDocument::input_schema`]. Property types outside the
    /// supported shapes map to `string`.
    pub fn parameters_from_schema(tool: &str, schema: &Value) -> Result<Vec<ParameterSpec>, ModelError> {
        let unsupported = |reason: &str| ModelError::UnsupportedSchema {
            tool: tool.to_owned(),
            reason: reason.to_owned(),
        };
        let Some(obj) = schema.as_object() else {
            if schema.is_null() {
                return Ok(Vec::new());
            }
            return Err(unsupported("inputSchema is not an object"));
        };
        let required: HashSet<&str> = obj
            .get("required")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();
        let Some(props) = obj.get("properties") else {
            return Ok(Vec::new());
        };
        let props = props.as_object().ok_or_else(|| unsupported("properties is not an object"))?;
        let mut params = Vec::with_capacity(props.len());
        for (name, prop) in props {
            let description = prop
                .get("description")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_owned();
            let ty = prop.get("type").and_then(Value::as_str).unwrap_or("string");
            let allowed = prop.get("enum").and_then(Value::as_array).map(|vals| {
                vals.iter()
                    .map(|v| v.as_str().map(str::to_owned).unwrap_or_else(|| v.to_string()))
                    .collect::<Vec<_>>()
            });
            let spec = match (allowed, ty) {
                (Some(values), _) => ParameterSpec::enumeration(name.clone(), values, description),
                (None, "integer") if required.contains(name.as_str()) => {
                    ParameterSpec::new(name.clone(), ParamKind::Integer, description)
                }
                (None, "integer") => ParameterSpec::new(name.clone(), ParamKind::OptionalInteger, description),
                (None, _) => ParameterSpec::new(name.clone(), ParamKind::String, description),
            };
            params.push(spec);
        }
        Ok(params)
    }
}

/// Minified JSON with object keys sorted at every nesting level.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// `name`, `description` and the canonical parameter object joined by `\n`.
pub fn canonical_text(doc: &ToolDocument) -> String {
    format!("{}\n{}\n{}", doc.name, doc.description, doc.canonical_parameters())
}

pub fn hash_tool(doc: &ToolDocument) -> ToolHash {
    ToolHash::of_text(&canonical_text(doc))
}

/// SHA-256 digest rendered as 64 lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ToolHash([u8; 32]);

impl ToolHash {
    pub fn of_text(text: &str) -> Self {
        Self(Sha256::digest(text.as_bytes()).into())
    }

    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Display for ToolHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for ToolHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ToolHash({})", &self.to_hex()[..12])
    }
}

impl FromStr for ToolHash {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 64 || s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(ModelError::InvalidDigest(s.to_owned()));
        }
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes).map_err(|_| ModelError::InvalidDigest(s.to_owned()))?;
        Ok(Self(bytes))
    }
}

impl Serialize for ToolHash {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for ToolHash {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(name: &str, description: &str, parameters: Vec<ParameterSpec>) -> ToolDocument {
        ToolDocument {
            tool_id: name.into(),
            name: name.into(),
            description: description.into(),
            parameters,
            synthetic_questions: vec![],
            origin_server: "srv".into(),
        }
    }

    fn acme_revenue() -> ToolDocument {
        doc(
            "get_acme_revenue",
            "Get Acme's total revenue by year. If no year is provided, returns all available revenue data.",
            vec![ParameterSpec::new("year", ParamKind::OptionalInteger, "Fiscal year")],
        )
    }

    #[test]
    fn empty_parameters_base_case() {
        assert_eq!(canonical_text(&doc("t", "d", vec![])), "t\nd\n{}");
    }

    #[test]
    fn canonical_text_matches_reference_serializer() {
        // produced by json.dumps(sort_keys=True, separators=(',', ':'))
        assert_eq!(
            canonical_text(&acme_revenue()),
            "get_acme_revenue\nGet Acme's total revenue by year. If no year is provided, returns all available revenue data.\n{\"year\":{\"description\":\"Fiscal year\",\"kind\":\"optional-integer\"}}"
        );
        assert_eq!(
            hash_tool(&acme_revenue()).to_hex(),
            "4eae03a2e48813f9b52986e0bebc596b65424b79826a94b01cf106ea0474dd66"
        );
    }

    #[test]
    fn sha256_of_minimal_text() {
        // sha256sum of the bytes "t\nd\n{}"
        assert_eq!(
            hash_tool(&doc("t", "d", vec![])).to_hex(),
            "5089b866cdb106e3ef33ede0d3512a791522c259e24763d75932ca8508ed3c26"
        );
    }

    #[test]
    fn questions_and_origin_do_not_affect_identity() {
        let a = acme_revenue();
        let mut b = a.clone();
        b.synthetic_questions = vec!["What is Acme's revenue?".into()];
        b.origin_server = "elsewhere".into();
        assert_eq!(canonical_text(&a), canonical_text(&b));
        assert_eq!(hash_tool(&a), hash_tool(&b));
    }

    #[test]
    fn one_character_changes_digest() {
        let a = acme_revenue();
        let mut b = a.clone();
        b.description.push('!');
        assert_ne!(hash_tool(&a), hash_tool(&b));
    }

    #[test]
    fn delimiter_prevents_boundary_collisions() {
        assert_ne!(hash_tool(&doc("ab", "c", vec![])), hash_tool(&doc("a", "bc", vec![])));
    }

    #[test]
    fn validation_errors() {
        let mut d = acme_revenue();
        d.tool_id.clear();
        assert_eq!(d.validate(), Err(ModelError::EmptyToolId));

        let mut d = acme_revenue();
        d.synthetic_questions.push(String::new());
        assert!(matches!(d.validate(), Err(ModelError::EmptyQuestion(_))));

        let mut d = acme_revenue();
        d.parameters.push(ParameterSpec::new("year", ParamKind::Integer, ""));
        assert!(matches!(d.validate(), Err(ModelError::DuplicateParameter { .. })));

        let mut d = acme_revenue();
        d.parameters = vec![ParameterSpec::enumeration("timeline", Vec::<String>::new(), "")];
        assert!(matches!(d.validate(), Err(ModelError::EnumWithoutValues { .. })));
    }

    #[test]
    fn json_field_names() {
        let v = serde_json::to_value(acme_revenue()).unwrap();
        for key in ["tool_id", "name", "description", "parameters", "synthetic_questions", "origin_server"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["parameters"][0]["kind"], "optional-integer");
    }

    #[test]
    fn input_schema_round_trip() {
        let d = doc(
            "get_acme_stock_price_history",
            "history",
            vec![ParameterSpec::enumeration("timeline", ["d", "w", "m"], "resolution")],
        );
        let schema = d.input_schema();
        assert_eq!(schema["required"], json!(["timeline"]));
        let back = ToolDocument::parameters_from_schema(&d.name, &schema).unwrap();
        assert_eq!(back, d.parameters);

        let r = acme_revenue();
        let back = ToolDocument::parameters_from_schema(&r.name, &r.input_schema()).unwrap();
        assert_eq!(back, r.parameters);
    }

    #[test]
    fn digest_hex_parsing() {
        let h = hash_tool(&acme_revenue());
        assert_eq!(h.to_hex().parse::<ToolHash>().unwrap(), h);
        assert!("abc".parse::<ToolHash>().is_err());
        assert!(h.to_hex().to_uppercase().parse::<ToolHash>().is_err());
    }

    fn arb_param() -> impl Strategy<Value = ParameterSpec> {
        ("[a-z]{1,6}", prop_oneof![Just(ParamKind::String), Just(ParamKind::Integer), Just(ParamKind::OptionalInteger)], "[ -~]{0,12}")
            .prop_map(|(n, k, d)| ParameterSpec::new(n, k, d))
    }

    proptest! {
        #[test]
        fn parameter_order_never_affects_canonical_text(
            params in proptest::collection::vec(arb_param(), 0..6),
            seed in any::<u64>(),
        ) {
            let mut uniq = Vec::new();
            let mut seen = HashSet::new();
            for p in params {
                if seen.insert(p.name.clone()) {
                    uniq.push(p);
                }
            }
            let a = doc("n", "d", uniq.clone());
            let mut shuffled = uniq;
            let len = shuffled.len();
            if len > 1 {
                shuffled.rotate_left((seed as usize) % len);
                shuffled.swap(0, len - 1);
            }
            let b = doc("n", "d", shuffled);
            prop_assert_eq!(canonical_text(&a), canonical_text(&b));
            prop_assert_eq!(hash_tool(&a), hash_tool(&b));
        }
    }
}
