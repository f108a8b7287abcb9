//! Output formatting: every real is written with 17 significant digits.

use serde::Serialize;
use serde_json::{Number, Value};

/// `%.17g`-style rendering that always reads back as a float
/// (`1` is written `1.0`). Non-finite values have no JSON form and are
/// rendered as `null`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0" } else { "0.0" }.to_string();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };
    if (-5..17).contains(&exp) {
        let body = if exp >= 0 {
            let (int, frac) = digits.split_at(exp as usize + 1);
            format!("{int}.{frac}")
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        let trimmed = body.trim_end_matches('0');
        let trimmed = if trimmed.ends_with('.') {
            format!("{trimmed}0")
        } else {
            trimmed.to_string()
        };
        format!("{sign}{trimmed}")
    } else {
        let (lead, rest) = digits.split_at(1);
        let rest = rest.trim_end_matches('0');
        let rest = if rest.is_empty() { "0" } else { rest };
        format!("{sign}{lead}.{rest}e{exp}")
    }
}

fn rewrite(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("float");
            *v = if x.is_finite() {
                Value::Number(format_g17(x).parse::<Number>().expect("valid number"))
            } else {
                Value::Null
            };
        }
        Value::Array(items) => items.iter_mut().for_each(rewrite),
        Value::Object(map) => map.values_mut().for_each(rewrite),
        _ => {}
    }
}

/// Serializes `value` to a JSON value with every float at 17 digits.
pub fn to_value<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("serializable report");
    rewrite(&mut v);
    v
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(value)).expect("serializable value");
    s.push('\n');
    s
}
