//! `%g`-style formatting with a fixed number of significant digits.

/// Formats `x` with `digits` significant digits, like C's `%.{digits}g`.
///
/// Non-finite values print as `inf`, `-inf` and `nan`.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    // Scientific rendering fixes the decimal exponent after rounding.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_sig;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (std::f64::consts::PI, "3.14159265"),
            (0.018171157, "0.018171157"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (1e-7, "1e-07"),
            (0.0001, "0.0001"),
            (9.9999999996, "10"),
            (f64::INFINITY, "inf"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_sig(x, 9), want, "{x}");
        }
    }

    #[test]
    fn round_trips_within_precision() {
        for &x in &[1.0 / 3.0, 2.0f64.sqrt() * 1e5, -7.123456789e-3] {
            let y: f64 = fmt_sig(x, 9).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-8);
        }
    }
}
