//! Guillemet-delimited structured output: `«name»value«/name»`.

use std::collections::BTreeMap;

/// Returns the trimmed contents of the first `«name»…«/name»` span.
pub fn extract_field(raw: &str, name: &str) -> Option<String> {
    let open = format!("«{name}»");
    let close = format!("«/{name}»");
    let start = raw.find(&open)? + open.len();
    let end = raw[start..].find(&close)? + start;
    Some(raw[start..end].trim().to_string())
}

/// Extracts every field in `schema`; order in `raw` does not matter.
pub fn parse_fields(raw: &str, schema: &[&str]) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for name in schema {
        match extract_field(raw, name) {
            Some(value) => {
                out.insert(name.to_string(), value);
            }
            None => return Err(format!("missing field «{name}»")),
        }
    }
    Ok(out)
}

/// Field contents when present, otherwise the whole reply trimmed.
pub fn field_or_raw(raw: &str, name: &str) -> String {
    extract_field(raw, name).unwrap_or_else(|| raw.trim().to_string())
}

pub fn render_field(name: &str, value: &str) -> String {
    format!("«{name}»{value}«/{name}»")
}
