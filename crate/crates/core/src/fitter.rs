//! Estimation of the generating function from a bivariate sample.
//!
//! The maxima `w_i = max(u_i, v_i)` of the pseudo-observations have CDF
//! `w^2 + psi(w)^2`, so at the order statistics `psi(w_(i))^2` is close to
//! `i/(n+1) - w_(i)^2`. The coefficients of `psi = sum_k a_k e_k` are the
//! least-squares fit of those square roots, subject to `psi(w_(i)) >= 0` and
//! `|psi'(w_(i))| <= 1` at every order statistic.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::basis::{BasisIndex, BasisSet};
use crate::copula::{FittedGenerator, Generator};
use crate::error::{Error, Result};
use crate::numeric::format_sig17;
use crate::qp::{Qp, QpOptions};

/// Feasibility tolerance on the `3n` fit constraints.
pub const TOL_FEAS: f64 = 1e-8;

/// Coefficients below this magnitude do not count as selected.
pub const NNZ_THRESHOLD: f64 = 1e-10;

/// Rank-transformed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    u: Vec<f64>,
    v: Vec<f64>,
    w_sorted: Vec<f64>,
}

impl PseudoSample {
    /// Wraps observations that already live on the unit square.
    pub fn from_uniforms(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Dimension {
                expected: u.len(),
                got: v.len(),
            });
        }
        if let Some(bad) = u.iter().chain(&v).find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::domain("pseudo-observation", *bad, "[0, 1]"));
        }
        let mut order: Vec<usize> = (0..u.len()).collect();
        let w: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a.max(*b)).collect();
        // stable sort: ties keep their original order
        order.sort_by(|&i, &j| w[i].total_cmp(&w[j]));
        let w_sorted = order.iter().map(|&i| w[i]).collect();
        Ok(PseudoSample { u, v, w_sorted })
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Ascending `max(u_i, v_i)`.
    pub fn w_sorted(&self) -> &[f64] {
        &self.w_sorted
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// 1-based ranks with ties sharing their average rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// `u_i = Rank(x_i)/n`, `v_i = Rank(y_i)/n` with midranks for ties.
pub fn rank_transform(x: &[f64], y: &[f64]) -> Result<PseudoSample> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    if let Some(bad) = x.iter().chain(y).find(|t| !t.is_finite()) {
        return Err(Error::domain("observation", *bad, "finite reals"));
    }
    let n = x.len() as f64;
    let u = midranks(x).into_iter().map(|r| r / n).collect();
    let v = midranks(y).into_iter().map(|r| r / n).collect();
    PseudoSample::from_uniforms(u, v)
}

/// Design matrices of the constrained least-squares problem.
#[derive(Debug, Clone)]
pub struct FitProblem {
    /// `M[i, k] = e_k(w_(i))`.
    pub m: DMatrix<f64>,
    /// `M'[i, k] = e'_k(w_(i))`.
    pub mp: DMatrix<f64>,
    /// `b_i = sqrt(max(0, i/(n+1) - w_(i)^2))`, `i` 1-based.
    pub b: DVector<f64>,
    /// The order statistics the rows are built from.
    pub w: Vec<f64>,
    pub basis: BasisSet,
}

/// Rows are built from the order statistics rescaled to `Rank/(n+1)`, the
/// scale of the `i/(n+1)` plotting positions in `b`. On the `Rank/n` scale the
/// largest order statistic is always 1 and every `b_i` is biased downwards.
impl FitProblem {
    /// Zeroes the columns of basis functions that are nonzero at fewer than
    /// `min` rows. The data cannot identify those coefficients, and the solver
    /// pins all-zero columns to zero.
    pub fn drop_thin_columns(&mut self, min: usize) {
        for k in 0..self.m.ncols() {
            let support = self.m.column(k).iter().filter(|v| **v != 0.0).count();
            if support < min {
                self.m.column_mut(k).fill(0.0);
                self.mp.column_mut(k).fill(0.0);
            }
        }
    }
}

pub fn build_problem(ps: &PseudoSample, basis: &BasisSet) -> Result<FitProblem> {
    let n = ps.len() as f64;
    let w: Vec<f64> = ps.w_sorted().iter().map(|w| w * n / (n + 1.0)).collect();
    build_problem_from_order_statistics(&w, basis)
}

/// Builds the problem directly from ascending order statistics in `[0, 1]`.
pub fn build_problem_from_order_statistics(w: &[f64], basis: &BasisSet) -> Result<FitProblem> {
    if basis.is_empty() {
        return Err(Error::InvalidConfig("empty basis".into()));
    }
    if let Some(bad) = w.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::domain("w", *bad, "[0, 1]"));
    }
    if w.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidConfig(
            "order statistics must be ascending".into(),
        ));
    }
    let n = w.len();
    let cols = basis.indices();
    let m = DMatrix::from_fn(n, cols.len(), |i, k| cols[k].value(w[i]));
    let mp = DMatrix::from_fn(n, cols.len(), |i, k| cols[k].slope(w[i]));
    let b = DVector::from_fn(n, |i, _| {
        let radicand = (i + 1) as f64 / (n + 1) as f64 - w[i] * w[i];
        radicand.max(0.0).sqrt()
    });
    Ok(FitProblem {
        m,
        mp,
        b,
        w: w.to_vec(),
        basis: basis.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub kkt_tol: f64,
    /// Tikhonov weight added to the objective; handles rank-deficient `M`.
    pub ridge: f64,
    pub max_iter: usize,
    /// The end-to-end fit pins to zero every basis function that is nonzero
    /// at fewer order statistics than this; `solve_qp` ignores it.
    pub min_support: usize,
}

pub const DEFAULT_RIDGE: f64 = 1e-10;
pub const DEFAULT_MIN_SUPPORT: usize = 3;

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            kkt_tol: 1e-8,
            ridge: DEFAULT_RIDGE,
            max_iter: 10_000,
            min_support: DEFAULT_MIN_SUPPORT,
        }
    }
}

/// Binding constraints at the solution, as 0-based order-statistic rows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveConstraints {
    /// `(M a)_i = 0`
    pub nonnegative: Vec<usize>,
    /// `(M' a)_i = 1`
    pub slope_upper: Vec<usize>,
    /// `(M' a)_i = -1`
    pub slope_lower: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Coefficients aligned with the basis ordering.
    pub a: Vec<f64>,
    pub active_constraints: ActiveConstraints,
    pub kkt_residual: f64,
    /// `|M a - b|^2 + ridge |a|^2`.
    pub objective: f64,
    pub nnz: usize,
    pub iterations: usize,
}

impl FitResult {
    /// Largest violation of `M a >= 0` and `-1 <= M' a <= 1`.
    pub fn max_violation(&self, prob: &FitProblem) -> f64 {
        let a = DVector::from_column_slice(&self.a);
        let ma = &prob.m * &a;
        let mpa = &prob.mp * &a;
        let nonneg = ma.iter().map(|v| -v).fold(0.0, f64::max);
        let slope = mpa.iter().map(|v| v.abs() - 1.0).fold(0.0, f64::max);
        nonneg.max(slope)
    }

    pub fn is_feasible(&self, prob: &FitProblem) -> bool {
        self.max_violation(prob) <= TOL_FEAS
    }
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Nonnegative,
    SlopeUpper,
    SlopeLower,
}

/// Solves `min |Ma - b|^2 + ridge |a|^2` subject to `0 <= (Ma)_i` and
/// `-1 <= (M'a)_i <= 1`.
pub fn solve_qp(prob: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    let (n, m) = prob.m.shape();
    if prob.mp.shape() != (n, m) || prob.b.len() != n || prob.w.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: prob.b.len(),
        });
    }
    if prob
        .m
        .iter()
        .chain(prob.mp.iter())
        .chain(prob.b.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidConfig(
            "non-finite entries in the fit problem".into(),
        ));
    }
    if opts.ridge.is_nan() || opts.ridge < 0.0 {
        return Err(Error::InvalidConfig("ridge must be nonnegative".into()));
    }

    // Columns that vanish on every row are pinned to zero.
    let live: Vec<usize> = (0..m)
        .filter(|&k| {
            prob.m.column(k).iter().any(|v| *v != 0.0)
                || prob.mp.column(k).iter().any(|v| *v != 0.0)
        })
        .collect();

    // Constraints depend on w only, so tied order statistics share rows.
    let mut rows: Vec<(RowKind, usize)> = Vec::new();
    for i in 0..n {
        if i > 0 && prob.w[i] == prob.w[i - 1] {
            continue;
        }
        let nonzero = |mat: &DMatrix<f64>| live.iter().any(|&k| mat[(i, k)] != 0.0);
        if nonzero(&prob.m) {
            rows.push((RowKind::Nonnegative, i));
        }
        if nonzero(&prob.mp) {
            rows.push((RowKind::SlopeUpper, i));
            rows.push((RowKind::SlopeLower, i));
        }
    }

    let ml = prob.m.select_columns(&live);
    let mpl = prob.mp.select_columns(&live);
    let dim = live.len();
    let mut e = DMatrix::zeros(n + dim, dim);
    e.view_mut((0, 0), (n, dim)).copy_from(&ml);
    e.view_mut((n, 0), (dim, dim))
        .fill_diagonal(opts.ridge.sqrt());
    let mut f = DVector::zeros(n + dim);
    f.rows_mut(0, n).copy_from(&prob.b);
    let mut g = DMatrix::zeros(rows.len(), dim);
    let mut bound = DVector::zeros(rows.len());
    for (r, &(kind, i)) in rows.iter().enumerate() {
        let (src, sign, rhs) = match kind {
            RowKind::Nonnegative => (&ml, -1.0, 0.0),
            RowKind::SlopeUpper => (&mpl, 1.0, 1.0),
            RowKind::SlopeLower => (&mpl, -1.0, 1.0),
        };
        for col in 0..dim {
            g[(r, col)] = sign * src[(i, col)];
        }
        bound[r] = rhs;
    }

    let qp = Qp {
        e: &e,
        f: &f,
        g: &g,
        bound: &bound,
    };
    let qp_opts = QpOptions {
        max_iter: opts.max_iter,
        dual_tol: opts.kkt_tol * 0.1,
    };
    let sol = qp.solve(DVector::zeros(dim), &qp_opts)?;

    let mut a = vec![0.0; m];
    for (slot, &k) in live.iter().enumerate() {
        a[k] = sol.x[slot];
    }
    let mut active = ActiveConstraints::default();
    for &r in &sol.working_set {
        let (kind, i) = rows[r];
        match kind {
            RowKind::Nonnegative => active.nonnegative.push(i),
            RowKind::SlopeUpper => active.slope_upper.push(i),
            RowKind::SlopeLower => active.slope_lower.push(i),
        }
    }
    active.nonnegative.sort_unstable();
    active.slope_upper.sort_unstable();
    active.slope_lower.sort_unstable();

    let av = DVector::from_column_slice(&a);
    let objective = (&prob.m * &av - &prob.b).norm_squared() + opts.ridge * av.norm_squared();
    let result = FitResult {
        nnz: a.iter().filter(|x| x.abs() > NNZ_THRESHOLD).count(),
        a,
        active_constraints: active,
        kkt_residual: sol.kkt_residual,
        objective,
        iterations: sol.iterations,
    };
    if !sol.converged || sol.kkt_residual > opts.kkt_tol {
        return Err(Error::NonConvergence {
            iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// Output of the end-to-end estimation.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub sample: PseudoSample,
    pub generator: Generator,
    pub result: FitResult,
}

/// Rank transform, build the problem and solve it. The data are assumed to be
/// positively quadrant dependent; this is not checked.
pub fn fit_generator(
    x: &[f64],
    y: &[f64],
    basis: &BasisSet,
    opts: &FitOptions,
) -> Result<FittedModel> {
    let sample = rank_transform(x, y)?;
    fit_pseudo_sample(sample, basis, opts)
}

pub fn fit_pseudo_sample(
    sample: PseudoSample,
    basis: &BasisSet,
    opts: &FitOptions,
) -> Result<FittedModel> {
    let mut prob = build_problem(&sample, basis)?;
    prob.drop_thin_columns(opts.min_support);
    let result = solve_qp(&prob, opts)?;
    let generator = Generator::fitted(basis.clone(), result.a.clone())?;
    Ok(FittedModel {
        sample,
        generator,
        result,
    })
}

/// Text serialization of a fitted expansion.
///
/// ```text
/// # smax=4 n=100
/// 0<TAB>0<TAB>0.28471294383527451
/// 1<TAB>2<TAB>-0.0032110345829916331
/// ```
///
/// One tab-separated `s l a` line per nonzero coefficient, in basis order,
/// with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFile {
    pub s_max: u32,
    pub n: usize,
    pub coeffs: Vec<(BasisIndex, f64)>,
}

impl CoefficientFile {
    pub fn from_fit(basis: &BasisSet, n: usize, a: &[f64]) -> Result<Self> {
        if a.len() != basis.len() {
            return Err(Error::Dimension {
                expected: basis.len(),
                got: a.len(),
            });
        }
        let coeffs = basis
            .indices()
            .iter()
            .zip(a)
            .filter(|(_, a)| **a != 0.0)
            .map(|(i, a)| (*i, *a))
            .collect();
        Ok(CoefficientFile {
            s_max: basis.s_max(),
            n,
            coeffs,
        })
    }

    pub fn to_generator(&self) -> Result<Generator> {
        Ok(Generator::Fitted(self.to_fitted()?))
    }

    pub fn to_fitted(&self) -> Result<FittedGenerator> {
        let basis = BasisSet::new(self.s_max)?;
        let mut a = vec![0.0; basis.len()];
        for (idx, value) in &self.coeffs {
            let k = basis.position(*idx).ok_or(Error::InvalidIndex {
                s: idx.scale(),
                l: idx.location(),
            })?;
            a[k] = *value;
        }
        FittedGenerator::new(basis, a)
    }

    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# smax={} n={}", self.s_max, self.n)?;
        for (idx, a) in &self.coeffs {
            writeln!(
                out,
                "{}\t{}\t{}",
                idx.scale(),
                idx.location(),
                format_sig17(*a)
            )?;
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (s_max, n) = match lines.next() {
            Some((_, line)) => parse_header(&line?)?,
            None => return Err(parse_err(1, 1, "empty coefficient file")),
        };
        let mut coeffs = Vec::new();
        for (lineno, line) in lines {
            let line = line?;
            let row = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(row, 1, "expected `s<TAB>l<TAB>a`"));
            }
            let s: u32 = fields[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(row, 1, "scale is not an integer"))?;
            let l: u32 = fields[1]
                .trim()
                .parse()
                .map_err(|_| parse_err(row, 2, "location is not an integer"))?;
            let a: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| parse_err(row, 3, "coefficient is not a number"))?;
            let idx = BasisIndex::new(s, l)?;
            if s > s_max {
                return Err(parse_err(row, 1, "scale exceeds the header's smax"));
            }
            coeffs.push((idx, a));
        }
        Ok(CoefficientFile { s_max, n, coeffs })
    }
}

fn parse_err(row: usize, column: usize, message: &str) -> Error {
    Error::Parse {
        row,
        column,
        message: message.to_string(),
    }
}

fn parse_header(line: &str) -> Result<(u32, usize)> {
    let rest = line
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, 1, "missing `# smax=<int> n=<int>` header"))?;
    let (mut s_max, mut n) = (None, None);
    for field in rest.split_whitespace() {
        match field.split_once('=') {
            Some(("smax", v)) => s_max = v.parse().ok(),
            Some(("n", v)) => n = v.parse().ok(),
            _ => {}
        }
    }
    match (s_max, n) {
        (Some(s), Some(n)) => Ok((s, n)),
        _ => Err(parse_err(1, 1, "malformed `# smax=<int> n=<int>` header")),
    }
}

impl FittedGenerator {
    pub fn to_coefficient_file(&self, n: usize) -> CoefficientFile {
        CoefficientFile::from_fit(self.basis(), n, self.coeffs()).expect("aligned by construction")
    }
}
