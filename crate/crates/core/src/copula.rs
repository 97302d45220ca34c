//! The copula family `C(u, v) = uv + psi(u) psi(v)`.
//!
//! A generating function `psi` yields a copula iff `psi(0) = psi(1) = 0` and
//! `psi` is 1-Lipschitz. Only the positively quadrant dependent case is
//! modelled, which additionally requires `psi >= 0`.

use crate::basis::BasisSet;
use crate::error::{Error, Result};

/// A generating function.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// `psi_k(x) = 1 - (x^k + (1-x)^k)^{1/k}` for `k >= 1`. `k = +inf` is the
    /// limit `min(x, 1 - x)`.
    Analytic { k: f64 },
    /// Farlie-Gumbel-Morgenstern: `sqrt(theta) x (1 - x)`.
    Fgm { theta: f64 },
    /// Symmetric cubic sections: `sqrt(theta) x (1 - x)(1 - 2x)`.
    Cubic { theta: f64 },
    /// Finite expansion over the dyadic sine basis.
    Fitted(FittedGenerator),
}

/// `psi(x) = sum_k a_k e_k(x)`, coefficients aligned with `basis.indices()`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedGenerator {
    basis: BasisSet,
    coeffs: Vec<f64>,
}

impl FittedGenerator {
    pub fn new(basis: BasisSet, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::Dimension {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        if let Some(bad) = coeffs.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidGenerator(format!(
                "non-finite coefficient {bad}"
            )));
        }
        Ok(FittedGenerator { basis, coeffs })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `int_0^1 psi`, from the closed-form basis integrals.
    pub fn integral(&self) -> f64 {
        self.basis
            .integrate(&self.coeffs)
            .expect("lengths checked at construction")
    }
}

impl Generator {
    pub fn analytic(k: f64) -> Result<Self> {
        if k.is_nan() || k < 1.0 || k == f64::NEG_INFINITY {
            return Err(Error::InvalidGenerator(format!(
                "k must be >= 1 or infinite, got {k}"
            )));
        }
        Ok(Generator::Analytic { k })
    }

    pub fn fgm(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Generator::Fgm { theta })
    }

    pub fn cubic(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Generator::Cubic { theta })
    }

    pub fn fitted(basis: BasisSet, coeffs: Vec<f64>) -> Result<Self> {
        Ok(Generator::Fitted(FittedGenerator::new(basis, coeffs)?))
    }

    /// The independence copula, `psi = 0`.
    pub fn independence() -> Self {
        Generator::Analytic { k: 1.0 }
    }

    pub fn is_fitted(&self) -> bool {
        matches!(self, Generator::Fitted(_))
    }

    pub fn psi(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain("x", x, "[0, 1]"));
        }
        Ok(self.psi_at(x))
    }

    /// `psi(x)` for `x` already known to lie in `[0, 1]`.
    pub(crate) fn psi_at(&self, x: f64) -> f64 {
        match self {
            Generator::Analytic { k } => analytic_psi(*k, x),
            Generator::Fgm { theta } => theta.sqrt() * x * (1.0 - x),
            Generator::Cubic { theta } => theta.sqrt() * x * (1.0 - x) * (1.0 - 2.0 * x),
            Generator::Fitted(f) => f.basis.expand(&f.coeffs, x),
        }
    }

    /// `psi'(x)` on the open interval. Fitted expansions use one-sided basis
    /// derivatives at knots.
    pub fn psi_deriv(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::domain("x", x, "(0, 1)"));
        }
        match self {
            Generator::Analytic { k } if k.is_infinite() => Err(Error::NonDifferentiable(
                "psi_inf = min(x, 1-x) has a kink at 1/2".into(),
            )),
            Generator::Analytic { k } => Ok(analytic_psi_deriv(*k, x)),
            Generator::Fgm { theta } => Ok(theta.sqrt() * (1.0 - 2.0 * x)),
            Generator::Cubic { theta } => Ok(theta.sqrt() * (1.0 - 6.0 * x + 6.0 * x * x)),
            Generator::Fitted(f) => Ok(f.basis.expand_slope(&f.coeffs, x)),
        }
    }

    /// `C(u, v) = uv + psi(u) psi(v)`.
    pub fn cdf(&self, u: f64, v: f64) -> Result<f64> {
        Ok(u * v + self.psi(u)? * self.psi(v)?)
    }

    /// `dC/du (u, v) = v + psi'(u) psi(v)`, the conditional distribution of
    /// `V` given `U = u`.
    pub fn conditional_cdf_given_u(&self, u: f64, v: f64) -> Result<f64> {
        let slope = self.psi_deriv(u)?;
        Ok(v + slope * self.psi(v)?)
    }

    /// Grid-based check of the copula conditions. Never fails; violations are
    /// collected in the report.
    pub fn validate(&self, cfg: &CopulaEvalConfig) -> Result<ValidityReport> {
        cfg.check()?;
        Ok(validate_on_grid(self, cfg))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidGenerator(format!(
            "theta must lie in (0, 1], got {theta}"
        )))
    }
}

fn analytic_psi(k: f64, x: f64) -> f64 {
    if k == 1.0 {
        return 0.0;
    }
    let y = 1.0 - x;
    if k.is_infinite() {
        return x.min(y);
    }
    let hi = x.max(y);
    if hi == 0.0 {
        return 0.0;
    }
    // (x^k + y^k)^{1/k} = hi (1 + r^k)^{1/k}, stable for large k
    let r = x.min(y) / hi;
    1.0 - hi * (r.powf(k).ln_1p() / k).exp()
}

fn analytic_psi_deriv(k: f64, x: f64) -> f64 {
    if k == 1.0 {
        return 0.0;
    }
    let y = 1.0 - x;
    let hi = x.max(y);
    let r = x.min(y) / hi;
    let norm = hi * (r.powf(k).ln_1p() / k).exp();
    -((x / norm).powf(k - 1.0) - (y / norm).powf(k - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaEvalConfig {
    pub grid_n: usize,
    pub tol_lip: f64,
    pub tol_neg: f64,
}

impl Default for CopulaEvalConfig {
    fn default() -> Self {
        CopulaEvalConfig {
            grid_n: 201,
            tol_lip: 1e-9,
            tol_neg: 1e-9,
        }
    }
}

impl CopulaEvalConfig {
    /// Defaults with the looser Lipschitz tolerance used for fitted expansions.
    pub fn for_generator(g: &Generator) -> Self {
        let mut cfg = CopulaEvalConfig::default();
        if g.is_fitted() {
            cfg.tol_lip = 1e-6;
        }
        cfg
    }

    fn check(&self) -> Result<()> {
        if self.grid_n < 3 {
            return Err(Error::InvalidConfig(format!(
                "grid_n must be >= 3, got {}",
                self.grid_n
            )));
        }
        if !(self.tol_lip > 0.0 && self.tol_neg > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Condition {
    BoundaryZero,
    Lipschitz,
    Nonnegative,
    RectanglePositive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Point(f64),
    Interval(f64, f64),
    Rectangle { u: (f64, f64), v: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    /// Amount by which the condition is exceeded at the worst point.
    pub excess: f64,
    pub location: Location,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation(&self, condition: Condition) -> Option<&Violation> {
        self.violations.iter().find(|v| v.condition == condition)
    }

    /// Valid as a copula generator, ignoring the sign condition.
    pub fn is_copula(&self) -> bool {
        self.violations
            .iter()
            .all(|v| v.condition == Condition::Nonnegative)
    }
}

fn validate_on_grid(g: &Generator, cfg: &CopulaEvalConfig) -> ValidityReport {
    let n = cfg.grid_n;
    let xs: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| g.psi_at(x)).collect();
    let mut report = ValidityReport::default();

    let ends = [(0.0, ys[0]), (1.0, ys[n - 1])];
    if let Some(&(x, y)) = ends
        .iter()
        .filter(|(_, y)| y.abs() > cfg.tol_neg)
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    {
        report.violations.push(Violation {
            condition: Condition::BoundaryZero,
            excess: y.abs(),
            location: Location::Point(x),
        });
    }

    let worst_lip = (0..n - 1)
        .map(|j| {
            let excess = (ys[j + 1] - ys[j]).abs() - (xs[j + 1] - xs[j]);
            (excess, j)
        })
        .max_by(|a, b| a.0.total_cmp(&b.0));
    if let Some((excess, j)) = worst_lip.filter(|(e, _)| *e > cfg.tol_lip) {
        report.violations.push(Violation {
            condition: Condition::Lipschitz,
            excess,
            location: Location::Interval(xs[j], xs[j + 1]),
        });
    }

    let worst_neg = (0..n).min_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    if let Some(j) = worst_neg.filter(|&j| ys[j] < -cfg.tol_neg) {
        report.violations.push(Violation {
            condition: Condition::Nonnegative,
            excess: -ys[j],
            location: Location::Point(xs[j]),
        });
    }

    if let Some((delta, u, v)) = min_rectangle_mass(&xs, &ys) {
        if delta < -cfg.tol_lip {
            report.violations.push(Violation {
                condition: Condition::RectanglePositive,
                excess: -delta,
                location: Location::Rectangle { u, v },
            });
        }
    }
    report
}

/// Grid interval `(lo, hi)`.
type Interval = (f64, f64);

/// Minimum over all grid rectangles `[x_a, x_b] x [x_c, x_d]` of the mass
/// `(x_b - x_a)(x_d - x_c) + (psi_b - psi_a)(psi_d - psi_c)`.
///
/// The mass is the inner product of `(dx, dpsi)` of the u-interval with that
/// of the v-interval, so for each u-interval the minimum over v-intervals is
/// attained at a vertex of the convex hull of all `(dx, dpsi)` pairs.
fn min_rectangle_mass(xs: &[f64], ys: &[f64]) -> Option<(f64, Interval, Interval)> {
    let n = xs.len();
    let mut pts = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            pts.push(HullPoint {
                dx: xs[b] - xs[a],
                dy: ys[b] - ys[a],
                a,
                b,
            });
        }
    }
    let hull = convex_hull(pts.clone());
    let mut best: Option<(f64, usize, usize)> = None;
    for (qi, q) in pts.iter().enumerate() {
        for (hi, h) in hull.iter().enumerate() {
            let mass = q.dx * h.dx + q.dy * h.dy;
            if best.is_none_or(|(m, _, _)| mass < m) {
                best = Some((mass, qi, hi));
            }
        }
    }
    best.map(|(mass, qi, hi)| {
        let (q, h) = (&pts[qi], &hull[hi]);
        (mass, (xs[q.a], xs[q.b]), (xs[h.a], xs[h.b]))
    })
}

#[derive(Debug, Clone, Copy)]
struct HullPoint {
    dx: f64,
    dy: f64,
    a: usize,
    b: usize,
}

fn cross(o: &HullPoint, p: &HullPoint, q: &HullPoint) -> f64 {
    (p.dx - o.dx) * (q.dy - o.dy) - (p.dy - o.dy) * (q.dx - o.dx)
}

// Andrew's monotone chain.
fn convex_hull(mut pts: Vec<HullPoint>) -> Vec<HullPoint> {
    pts.sort_by(|p, q| p.dx.total_cmp(&q.dx).then(p.dy.total_cmp(&q.dy)));
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<HullPoint> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<HullPoint> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}
