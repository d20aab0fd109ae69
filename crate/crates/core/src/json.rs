//! Helpers for stable JSON output: floats rounded to six decimals and
//! non-finite values written as `null`.

use serde_json::Value;

use crate::camera::Point3;
use crate::mask::Point2;

pub fn num(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    let r = (v * 1e6).round() / 1e6;
    // Avoid emitting `-0.0`.
    let r = if r == 0.0 { 0.0 } else { r };
    serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
}

pub fn point2(p: Point2) -> Value {
    Value::Array(vec![num(p.x), num(p.y)])
}

pub fn point3(p: Option<Point3>) -> Value {
    p.map_or(Value::Null, |p| Value::Array(vec![num(p.x), num(p.y), num(p.z)]))
}

/// Pretty-printed text with a trailing newline.
pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values built from json! are serializable");
    s.push('\n');
    s
}
