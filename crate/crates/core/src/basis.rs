//! Dyadic half-sine basis on `[0, 1]`.
//!
//! `e_{s,l}(x) = sin(pi/2 * (2^{s+1} x - l))` on the support
//! `[l / 2^{s+1}, (l + 2) / 2^{s+1}]` and zero elsewhere, for scales `s >= 0`
//! and locations `0 <= l <= 2(2^s - 1)`. Every such function vanishes at both
//! ends of the unit interval, so any finite expansion does too.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::error::{Error, Result};

/// Default truncation scale; gives 57 basis functions.
pub const DEFAULT_SMAX: u32 = 4;

/// Largest scale accepted; keeps `2^{s+1}` exact and the basis a sane size.
pub const MAX_SCALE: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    s: u32,
    l: u32,
}

impl BasisIndex {
    pub fn new(s: u32, l: u32) -> Result<Self> {
        if s > MAX_SCALE || u64::from(l) > 2 * ((1u64 << s) - 1) {
            return Err(Error::InvalidIndex { s, l });
        }
        Ok(BasisIndex { s, l })
    }

    pub fn scale(&self) -> u32 {
        self.s
    }

    pub fn location(&self) -> u32 {
        self.l
    }

    fn dilation(&self) -> f64 {
        (1u64 << (self.s + 1)) as f64
    }

    /// Closed support interval of the function.
    pub fn support(&self) -> (f64, f64) {
        let d = self.dilation();
        (f64::from(self.l) / d, f64::from(self.l + 2) / d)
    }

    /// Value at `x`, which must already be known to lie in `[0, 1]`.
    #[inline]
    pub(crate) fn value(&self, x: f64) -> f64 {
        let t = self.dilation() * x - f64::from(self.l);
        // Support endpoints are returned as exact zeros so that expansions
        // vanish exactly at 0 and 1.
        if t <= 0.0 || t >= 2.0 {
            0.0
        } else {
            (FRAC_PI_2 * t).sin()
        }
    }

    /// Derivative at `x`. At the support endpoints this is the one-sided
    /// derivative from inside the support.
    #[inline]
    pub(crate) fn slope(&self, x: f64) -> f64 {
        let t = self.dilation() * x - f64::from(self.l);
        if !(0.0..=2.0).contains(&t) {
            0.0
        } else {
            (1u64 << self.s) as f64 * PI * (FRAC_PI_2 * t).cos()
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.value(x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.slope(x))
    }

    /// `int_0^1 e_{s,l}(x) dx = 2^{1-s} / pi`, independent of the location.
    pub fn integral(&self) -> f64 {
        2.0 / ((1u64 << self.s) as f64 * PI)
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.s, self.l)
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain("x", x, "[0, 1]"))
    }
}

/// All basis functions with scale up to `s_max`, ordered by `(s, l)`.
///
/// The ordering fixes the column order of the fit matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSet {
    s_max: u32,
    indices: Vec<BasisIndex>,
}

impl BasisSet {
    pub fn new(s_max: u32) -> Result<Self> {
        if s_max > MAX_SCALE {
            return Err(Error::InvalidConfig(format!(
                "s_max={s_max} exceeds {MAX_SCALE}"
            )));
        }
        let indices = (0..=s_max)
            .flat_map(|s| (0..=2 * ((1u32 << s) - 1)).map(move |l| BasisIndex { s, l }))
            .collect();
        Ok(BasisSet { s_max, indices })
    }

    /// Number of functions with scale `<= s_max`: `sum_s (2^{s+1} - 1)`.
    pub fn expected_len(s_max: u32) -> usize {
        (1usize << (s_max + 2)) - 2 - (s_max as usize + 1)
    }

    pub fn s_max(&self) -> u32 {
        self.s_max
    }

    pub fn indices(&self) -> &[BasisIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Column of `idx` in this set, if present.
    pub fn position(&self, idx: BasisIndex) -> Option<usize> {
        if idx.s > self.s_max {
            return None;
        }
        let offset = (1usize << (idx.s + 1)) - 2 - idx.s as usize;
        Some(offset + idx.l as usize)
    }

    /// `sum_k a_k e_k(x)`, with `x` assumed in `[0, 1]`.
    pub(crate) fn expand(&self, coeffs: &[f64], x: f64) -> f64 {
        self.indices
            .iter()
            .zip(coeffs)
            .filter(|(_, a)| **a != 0.0)
            .map(|(idx, a)| a * idx.value(x))
            .sum()
    }

    pub(crate) fn expand_slope(&self, coeffs: &[f64], x: f64) -> f64 {
        self.indices
            .iter()
            .zip(coeffs)
            .filter(|(_, a)| **a != 0.0)
            .map(|(idx, a)| a * idx.slope(x))
            .sum()
    }

    /// `sum_k a_k int e_k`.
    pub fn integrate(&self, coeffs: &[f64]) -> Result<f64> {
        if coeffs.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        Ok(self
            .indices
            .iter()
            .zip(coeffs)
            .map(|(idx, a)| a * idx.integral())
            .sum())
    }
}
