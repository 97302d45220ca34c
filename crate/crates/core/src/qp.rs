//! Primal active-set solver for small dense least-squares problems with
//! linear inequality constraints:
//!
//! ```text
//! minimize   1/2 |E x - f|^2
//! subject to G x <= h
//! ```
//!
//! The iteration starts from a feasible point supplied by the caller, moves
//! as far as feasibility allows towards the unconstrained minimizer, and then
//! runs the textbook working-set method. Steps are computed in the null space
//! of the working rows by QR of `E Z`, so the conditioning of `E` is never
//! squared.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub max_iter: usize,
    /// Multipliers above `-dual_tol` are accepted as nonnegative.
    pub dual_tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            max_iter: 10_000,
            dual_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per row of `G`; zero off the working set, and no lower
    /// than `-dual_tol` on it.
    pub multipliers: DVector<f64>,
    /// Rows of `G` in the final working set.
    pub working_set: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

pub struct Qp<'a> {
    pub e: &'a DMatrix<f64>,
    pub f: &'a DVector<f64>,
    pub g: &'a DMatrix<f64>,
    pub bound: &'a DVector<f64>,
}

/// Orthogonal factorization of the working rows: the first `w` columns of
/// `q` span them, the rest span their null space.
struct Factor {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    w: usize,
}

impl Factor {
    fn null_space(&self) -> DMatrix<f64> {
        self.q.columns(self.w, self.q.ncols() - self.w).into_owned()
    }
}

impl Qp<'_> {
    fn dim(&self) -> usize {
        self.e.ncols()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (self.e * x - self.f).norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.e.transpose() * (self.e * x - self.f)
    }

    /// Largest violation of `G x <= h`.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let gx = self.g * x;
        gx.iter()
            .zip(self.bound.iter())
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max)
    }

    /// Max-norm of the KKT conditions: stationarity, primal feasibility,
    /// dual feasibility and complementary slackness.
    pub fn kkt_residual(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        let grad = self.gradient(x) + self.g.transpose() * lambda;
        let stationarity = grad.amax();
        let slack = self.bound - self.g * x;
        let complementarity = lambda
            .iter()
            .zip(slack.iter())
            .map(|(l, s)| (l * s).abs())
            .fold(0.0, f64::max);
        let dual = lambda.iter().map(|l| -l).fold(0.0, f64::max);
        stationarity
            .max(self.max_violation(x))
            .max(dual)
            .max(complementarity)
    }

    fn factor(&self, working: &[usize]) -> Factor {
        let n = self.dim();
        let w = working.len();
        let mut a = DMatrix::<f64>::zeros(n, w + n);
        for (col, &j) in working.iter().enumerate() {
            a.column_mut(col).copy_from(&self.g.row(j).transpose());
        }
        a.view_mut((0, w), (n, n)).fill_with_identity();
        let qr = a.qr();
        Factor {
            q: qr.q(),
            r: qr.r().view((0, 0), (w, w)).into_owned(),
            w,
        }
    }

    /// Minimizer of the objective over `x + span(z)`, returned as a step.
    fn subspace_step(&self, x: &DVector<f64>, z: &DMatrix<f64>) -> Result<DVector<f64>> {
        if z.ncols() == 0 {
            return Ok(DVector::zeros(self.dim()));
        }
        let ez = self.e * z;
        let residual = self.f - self.e * x;
        let qr = ez.qr();
        let y = qr
            .r()
            .solve_upper_triangular(&(qr.q().transpose() * residual))
            .ok_or(Error::SingularKkt)?;
        Ok(z * y)
    }

    /// Least-squares multipliers of the working rows at `x`.
    fn working_multipliers(&self, fac: &Factor, x: &DVector<f64>) -> Result<DVector<f64>> {
        if fac.w == 0 {
            return Ok(DVector::zeros(0));
        }
        let rhs = -(fac.q.columns(0, fac.w).transpose() * self.gradient(x));
        fac.r.solve_upper_triangular(&rhs).ok_or(Error::SingularKkt)
    }

    /// Longest step `alpha <= 1` along `dir` keeping rows outside `working`
    /// feasible, and the row that blocks it. Rows lying in the span of the
    /// working rows cannot block and are skipped.
    fn ratio_test(
        &self,
        x: &DVector<f64>,
        dir: &DVector<f64>,
        working: &[usize],
        null_space: &DMatrix<f64>,
    ) -> (f64, Option<usize>) {
        let gx = self.g * x;
        let gd = self.g * dir;
        let dir_norm = dir.norm();
        let mut alpha = 1.0;
        let mut blocking = None;
        for j in 0..self.g.nrows() {
            if working.contains(&j) {
                continue;
            }
            let row = self.g.row(j);
            let row_norm = row.norm();
            if gd[j] <= 1e-12 * row_norm * dir_norm {
                continue;
            }
            let slack = (self.bound[j] - gx[j]).max(0.0);
            let a = slack / gd[j];
            if a < alpha {
                if (row * null_space).norm() <= 1e-10 * row_norm {
                    continue;
                }
                alpha = a;
                blocking = Some(j);
            }
        }
        (alpha, blocking)
    }

    /// Solves the problem from the feasible point `start`.
    pub fn solve(&self, start: DVector<f64>, opts: &QpOptions) -> Result<QpSolution> {
        let n = self.dim();
        if self.e.nrows() != self.f.len()
            || self.g.ncols() != n
            || self.g.nrows() != self.bound.len()
            || start.len() != n
        {
            return Err(Error::Dimension {
                expected: n,
                got: self.g.ncols(),
            });
        }
        let mut x = start;
        let mut working: Vec<usize> = Vec::new();

        // Warm start towards the unconstrained minimizer.
        let identity = DMatrix::identity(n, n);
        let dir = self.subspace_step(&x, &identity)?;
        let (alpha, blocking) = self.ratio_test(&x, &dir, &working, &identity);
        x += alpha * dir;
        let mut at_minimum = match blocking {
            Some(j) => {
                working.push(j);
                false
            }
            None => true,
        };

        let mut lambda_w = DVector::<f64>::zeros(0);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;
            let fac = self.factor(&working);
            if !at_minimum {
                let z = fac.null_space();
                let step = self.subspace_step(&x, &z)?;
                if step.amax() > 1e-14 * (1.0 + x.amax()) {
                    let (alpha, blocking) = self.ratio_test(&x, &step, &working, &z);
                    x += alpha * &step;
                    match blocking {
                        Some(j) => working.push(j),
                        None => at_minimum = true,
                    }
                    continue;
                }
            }
            let lambda = self.working_multipliers(&fac, &x)?;
            let most_negative = lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| **l < -opts.dual_tol)
                .min_by(|a, b| a.1.total_cmp(b.1).then(working[a.0].cmp(&working[b.0])));
            match most_negative {
                None => {
                    lambda_w = lambda;
                    converged = true;
                    break;
                }
                Some((r, _)) => {
                    working.remove(r);
                    at_minimum = false;
                }
            }
        }

        let mut multipliers = DVector::<f64>::zeros(self.g.nrows());
        if converged {
            for (r, &j) in working.iter().enumerate() {
                multipliers[j] = lambda_w[r];
            }
        }
        let kkt_residual = if converged {
            self.kkt_residual(&x, &multipliers)
        } else {
            f64::INFINITY
        };
        Ok(QpSolution {
            x,
            multipliers,
            working_set: working,
            iterations,
            converged,
            kkt_residual,
        })
    }
}
