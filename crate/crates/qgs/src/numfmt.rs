//! 12-significant-digit numeric formatting shared by all text outputs.

/// Render with 12 significant digits, compact form, no trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{x:.11e}");
    if let Some((mant, exp)) = s.split_once('e') {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        let e: i32 = exp.parse().unwrap_or(0);
        if (-4..=11).contains(&e) {
            let digits = (11 - e).max(0);
            let plain = format!("{x:.*}", digits as usize);
            let plain = plain.trim_end_matches('0').trim_end_matches('.');
            return plain.to_string();
        }
        return format!("{mant}e{e}");
    }
    s
}

/// Round to 12 significant digits (for JSON payloads).
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let d = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - d);
    (x * scale).round() / scale
}

/// JSON number rounded to 12 significant digits; non-finite values map to
/// null so the document stays standard JSON.
pub fn json_num(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(round_sig(x))
    } else {
        serde_json::Value::Null
    }
}
