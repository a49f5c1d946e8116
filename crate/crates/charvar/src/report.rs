//! Canonical JSON output.
//!
//! Reports must be byte-identical across runs and platforms for a fixed
//! seed, so serialization cannot depend on shortest-float heuristics or hash
//! ordering: keys are emitted sorted and every float is printed in the C
//! `%.12e` form (12 fractional digits, explicit exponent sign, at least two
//! exponent digits).

use serde_json::Value;

/// One named pass/fail verdict inside a report.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: String) -> Check {
        Check { name: name.to_string(), pass, detail }
    }

    pub fn to_value(&self) -> Value {
        serde_json::json!({ "name": self.name, "pass": self.pass, "detail": self.detail })
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

/// `%.12e` rendering of a finite float; `-0.0` is normalized to `0.0`.
pub fn format_float(x: f64) -> String {
    assert!(x.is_finite(), "reports must not contain non-finite values, got {x}");
    let x = if x == 0.0 { 0.0 } else { x };
    let s = format!("{x:.12e}");
    let (mantissa, exponent) = s.split_once('e').expect("{:e} always yields an exponent");
    let e: i32 = exponent.parse().expect("exponent is an integer");
    let sign = if e < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", e.abs())
}

/// Compact JSON with sorted object keys and canonical floats.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&format_float(n.as_f64().expect("number is i64, u64 or f64")));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
        }
        Value::Array(items) => {
            out.push('[');
            for (idx, item) in items.iter().enumerate() {
                if idx > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            // serde_json's default map is a BTreeMap, so iteration is already
            // sorted by key.
            out.push('{');
            for (idx, (key, item)) in map.iter().enumerate() {
                if idx > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("strings always serialize"));
                out.push(':');
                write_value(item, out);
            }
            out.push('}');
        }
    }
}

/// A float wrapped for canonical embedding in a `Value` tree.
pub fn float_value(x: f64) -> Value {
    assert!(x.is_finite(), "reports must not contain non-finite values, got {x}");
    Value::from(x)
}
