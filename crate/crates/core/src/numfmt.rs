//! Fixed-precision float text used by every written artifact.

/// Rounds `x` to 9 significant decimal digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.8e}", x).parse().unwrap_or(x)
}

/// Formats `x` with 9 significant digits, using the shortest text that
/// reproduces the rounded value.
pub fn fmt_sig9(x: f64) -> String {
    let r = round_sig9(x);
    if r == 0.0 {
        // normalise -0
        return "0".to_string();
    }
    if (1e-5..1e15).contains(&r.abs()) {
        format!("{}", r)
    } else {
        format!("{:e}", r)
    }
}

/// Recursively rounds every float in a JSON value to 9 significant digits.
pub fn round_json(v: &mut serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(m) = serde_json::Number::from_f64(round_sig9(f)) {
                        *n = m;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}
