//! Pulling structured answers out of free-form completions.

use serde_json::Value;

/// First fenced block (```json or bare ```) that parses as JSON; falls back
/// to the outermost `{...}` span of the text.
pub fn extract_json_block(text: &str) -> Option<Value> {
    let mut rest = text;
    while let Some(start) = rest.find("```") {
        let after = &rest[start + 3..];
        let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
        let Some(end) = after[body_start..].find("```") else { break };
        let body = &after[body_start..body_start + end];
        if let Ok(v) = serde_json::from_str(body.trim()) {
            return Some(v);
        }
        rest = &after[body_start + end + 3..];
    }
    let (s, e) = (text.find('{')?, text.rfind('}')?);
    if s < e {
        serde_json::from_str(&text[s..=e]).ok()
    } else {
        None
    }
}

fn split_number(text: &str) -> Option<(f64, &str)> {
    let text = text.trim();
    let b = text.as_bytes();
    let digit = |i: usize| i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.');
    let mut end = 0;
    if end < b.len() && (b[end] == b'+' || b[end] == b'-') {
        end += 1;
    }
    while digit(end) {
        end += 1;
    }
    if end < b.len() && (b[end] == b'e' || b[end] == b'E') {
        let mut j = end + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            end = j;
            while end < b.len() && b[end].is_ascii_digit() {
                end += 1;
            }
        }
    }
    let v: f64 = text[..end].parse().ok()?;
    Some((v, text[end..].trim()))
}

fn numeric(value: &Value, unit_scale: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::Array(a) if a.len() == 2 => Some(0.5 * (numeric(&a[0], unit_scale)? + numeric(&a[1], unit_scale)?)),
        Value::Object(o) => {
            let v = o.get("value")?;
            match o.get("unit").and_then(Value::as_str) {
                Some(u) => Some(numeric(v, unit_scale)? * unit_scale(u)?),
                None => numeric(v, unit_scale),
            }
        }
        Value::String(s) => {
            let s = s.replace(['\u{2013}', '\u{2014}'], "-").replace(',', "");
            // A range such as "1000-1200 kg/m3" or "1 to 5 MPa" takes its midpoint.
            for sep in [" to ", "~"] {
                if let Some((a, b)) = s.split_once(sep) {
                    let (hi, unit) = split_number(b)?;
                    let (lo, _) = split_number(a)?;
                    return Some(0.5 * (lo + hi) * unit_scale(unit)?);
                }
            }
            let (v, unit) = split_number(&s)?;
            if let Some(tail) = unit.strip_prefix('-') {
                let (hi, unit) = split_number(tail)?;
                return Some(0.5 * (v + hi) * unit_scale(unit)?);
            }
            Some(v * unit_scale(unit)?)
        }
        _ => None,
    }
}

fn modulus_unit(unit: &str) -> Option<f64> {
    Some(match unit.trim().to_lowercase().as_str() {
        "" | "pa" => 1.0,
        "kpa" => 1e3,
        "mpa" => 1e6,
        "gpa" => 1e9,
        _ => return None,
    })
}

fn density_unit(unit: &str) -> Option<f64> {
    let u: String = unit.trim().to_lowercase().chars().filter(|c| !c.is_whitespace()).collect();
    Some(match u.as_str() {
        "" | "kg/m3" | "kg/m^3" | "kg/m³" | "kgm-3" => 1.0,
        "g/cm3" | "g/cm^3" | "g/cm³" | "g/cc" | "g/ml" => 1e3,
        _ => return None,
    })
}

/// Density in kg/m³. Bare numbers are taken as SI.
pub fn parse_density(value: &Value) -> Option<f64> {
    numeric(value, &density_unit)
}

/// Young's modulus in Pa. Bare numbers are taken as SI.
pub fn parse_modulus(value: &Value) -> Option<f64> {
    numeric(value, &modulus_unit)
}

pub fn parse_poisson(value: &Value) -> Option<f64> {
    numeric(value, &|u| u.trim().is_empty().then_some(1.0))
}
