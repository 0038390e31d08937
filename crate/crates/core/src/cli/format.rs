/// Formats `v` with 12 significant digits, fixed-point for moderate
/// magnitudes and scientific otherwise, trailing zeros removed.
///
/// ```
/// use ddgauss::cli::format::fmt_num;
/// assert_eq!(fmt_num(0.1 + 0.2), "0.3");
/// assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
/// assert_eq!(fmt_num(1.3837441891115612e-12), "1.38374418911e-12");
/// assert_eq!(fmt_num(-2.0), "-2");
/// ```
pub fn fmt_num(v: f64) -> String {
    fmt_sig(v, 12)
}

pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa))
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}
