//! Small numerical helpers shared across modules.

use crate::error::{Error, Result};

/// Default number of Simpson nodes on `[0, 1]`.
pub const DEFAULT_QUAD_POINTS: usize = 2001;

/// Composite Simpson rule for `f` on `[0, 1]` with `points` equispaced nodes.
pub fn simpson(points: usize, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
    if points < 3 || points.is_multiple_of(2) {
        return Err(Error::InvalidConfig(format!(
            "Simpson rule needs an odd number of points >= 3, got {points}"
        )));
    }
    let last = points - 1;
    let h = 1.0 / last as f64;
    let mut acc = f(0.0) + f(1.0);
    for j in 1..last {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(j as f64 / last as f64);
    }
    Ok(acc * h / 3.0)
}

/// Mean and sample standard deviation (`n - 1` denominator, zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Formats `x` in positional notation with 17 significant digits, enough to
/// round-trip any `f64`.
pub fn format_sig17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let out = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else if (exp as usize) + 1 >= digits.len() {
        format!("{}{}", digits, "0".repeat(exp as usize + 1 - digits.len()))
    } else {
        let (int, frac) = digits.split_at(exp as usize + 1);
        format!("{int}.{frac}")
    };
    format!("{sign}{out}")
}
