//! Human-readable rendering of JSON reports, numbers at 9 significant digits.

use serde_json::Value;

/// `x` with 9 significant digits, in the style of C's `%.9g`.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{x:.8e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mant))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(x) if n.is_f64() => sig9(x),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

/// Scalar fields as `key: value` lines; arrays of flat objects as tables.
/// Matrices and nested reports are left to the JSON.
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    let Value::Object(map) = v else {
        return scalar(v).unwrap_or_default() + "\n";
    };
    for (k, x) in map {
        if let Some(s) = scalar(x) {
            out += &format!("{k}: {s}\n");
        } else if let Value::Array(rows) = x {
            if let Some(Value::Object(first)) = rows.first() {
                let cols: Vec<&String> = first.keys().collect();
                if rows.iter().all(|r| r.as_object().is_some_and(|o| o.values().all(|c| scalar(c).is_some()))) {
                    let cells: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| cols.iter().map(|c| scalar(&r[c.as_str()]).unwrap_or_default()).collect())
                        .collect();
                    let widths: Vec<usize> = cols
                        .iter()
                        .enumerate()
                        .map(|(j, c)| cells.iter().map(|r| r[j].chars().count()).fold(c.chars().count(), usize::max))
                        .collect();
                    let line = |items: Vec<&str>| -> String {
                        items.iter().zip(&widths).map(|(x, w)| format!("  {x:>w$}")).collect::<String>() + "\n"
                    };
                    out += &format!("{k}:\n");
                    out += &line(cols.iter().map(|c| c.as_str()).collect());
                    for r in &cells {
                        out += &line(r.iter().map(String::as_str).collect());
                    }
                }
            } else if rows.iter().all(|r| matches!(r, Value::String(_))) && !rows.is_empty() {
                for r in rows {
                    out += &format!("{k}: {}\n", r.as_str().unwrap_or_default());
                }
            }
        }
    }
    out
}
