//! Number formatting for human-readable output.

/// Six significant digits, trailing zeros trimmed but always with a fractional part (`1.0`, `0.25`, `1.5e-7`).
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

fn trim(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
    }
    if s.ends_with('.') {
        s.push('0');
    } else if !s.contains('.') {
        s.push_str(".0");
    }
    s
}

pub fn number(x: f64, full: bool) -> String {
    if full {
        format!("{x:?}")
    } else {
        sig6(x)
    }
}

pub fn row<'a>(values: impl IntoIterator<Item = &'a f64>, full: bool) -> String {
    values.into_iter().map(|&v| number(v, full)).collect::<Vec<_>>().join(" ")
}
