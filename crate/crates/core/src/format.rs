//! Locale-independent number formatting for CSV and JSON output.

use std::io;

/// Formats `x` with `digits` significant digits, `%g` style: positional for moderate
/// exponents, scientific otherwise, trailing zeros trimmed.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -5 || exp >= digits as i32 {
        return format!("{}e{}", trim(mantissa), exp);
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim(&format!("{:.*}", decimals, x)).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV cell: 10 significant digits.
pub fn csv(x: f64) -> String {
    sig(x, 10)
}

/// serde_json formatter writing floats with 17 significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Json17;

impl serde_json::ser::Formatter for Json17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        let s = sig(value, 17);
        // keep a float-looking token so integral values read back as numbers with a fraction
        if s.contains(['.', 'e']) {
            writer.write_all(s.as_bytes())
        } else {
            write!(writer, "{s}.0")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` as a single JSON line using [`Json17`].
pub fn to_json_line<S: serde::Serialize>(value: &S) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Json17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.0, 10), "0");
        assert_eq!(sig(1.0, 10), "1");
        assert_eq!(sig(-0.5, 10), "-0.5");
        assert_eq!(sig(1.0 / 3.0, 10), "0.3333333333");
        assert_eq!(sig(123456.789, 4), "1.235e5");
        assert_eq!(sig(1.5e-7, 10), "1.5e-7");
        assert_eq!(sig(std::f64::consts::PI, 17), "3.1415926535897931");
    }

    #[test]
    fn json_round_trip_is_exact() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.024719496567438] {
            let line = to_json_line(&vec![x]).unwrap();
            let back: Vec<f64> = serde_json::from_str(&line).unwrap();
            assert_eq!(back[0], x, "{line}");
        }
        assert_eq!(to_json_line(&2.0f64).unwrap(), "2.0");
    }
}
