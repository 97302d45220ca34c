//! Monte-Carlo study of the estimators on the `psi_k` family.
//!
//! Repetition `r` of every `k` simulates with seed `seed + r`, so the report
//! does not depend on whether repetitions run serially or on a thread pool.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::association::{rho_np, rho_sp, rho_true};
use crate::basis::{BasisSet, DEFAULT_SMAX};
use crate::copula::Generator;
use crate::error::{Error, Result};
use crate::fitter::{fit_generator, FitOptions};
use crate::numeric::{mean_std, simpson, DEFAULT_QUAD_POINTS};
use crate::sampler::{sample_pairs, SampleConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub ks: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub s_max: u32,
    pub quad_points: usize,
    pub fit: FitOptions,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            ks: vec![1.0, 2.0, 4.0, 6.0, 8.0],
            n: 100,
            reps: 100,
            seed: 1,
            s_max: DEFAULT_SMAX,
            quad_points: DEFAULT_QUAD_POINTS,
            fit: FitOptions::default(),
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Summary { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Repetition {
    pub rho_sp: f64,
    pub rho_np: f64,
    pub epsilon: f64,
    pub nnz: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub k: f64,
    pub rho_true: f64,
    pub rho_sp: Summary,
    pub rho_np: Summary,
    pub epsilon: Summary,
    pub nnz: Summary,
    pub repetitions: Vec<Repetition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub rows: Vec<ExperimentRow>,
}

/// `(int_0^1 (a - b)^2)^{1/2}` by Simpson's rule.
pub fn l2_distance(a: &Generator, b: &Generator, quad_points: usize) -> Result<f64> {
    let sq = simpson(quad_points, |x| {
        let d = a.psi_at(x) - b.psi_at(x);
        d * d
    })?;
    Ok(sq.max(0.0).sqrt())
}

/// Simulate, fit and score one sample.
pub fn run_repetition(
    truth: &Generator,
    basis: &BasisSet,
    n: usize,
    seed: u64,
    quad_points: usize,
    fit: &FitOptions,
) -> Result<Repetition> {
    let pairs = sample_pairs(truth, &SampleConfig::new(n, seed))?;
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let model = fit_generator(&x, &y, basis, fit)?;
    Ok(Repetition {
        rho_sp: rho_sp(&model.result, basis)?,
        rho_np: rho_np(&model.sample)?,
        epsilon: l2_distance(truth, &model.generator, quad_points)?,
        nnz: model.result.nnz,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    if cfg.n < 2 {
        return Err(Error::InvalidConfig("n must be >= 2".into()));
    }
    let basis = BasisSet::new(cfg.s_max)?;
    let mut rows = Vec::with_capacity(cfg.ks.len());
    for &k in &cfg.ks {
        if !k.is_finite() {
            return Err(Error::NonDifferentiable(format!(
                "k={k} cannot be simulated"
            )));
        }
        let truth = Generator::analytic(k)?;
        let one = |r: usize| {
            run_repetition(
                &truth,
                &basis,
                cfg.n,
                cfg.seed.wrapping_add(r as u64),
                cfg.quad_points,
                &cfg.fit,
            )
        };
        let repetitions: Vec<Repetition> = if cfg.parallel {
            (0..cfg.reps)
                .into_par_iter()
                .map(one)
                .collect::<Result<_>>()?
        } else {
            (0..cfg.reps).map(one).collect::<Result<_>>()?
        };
        let pick = |f: fn(&Repetition) -> f64| -> Vec<f64> { repetitions.iter().map(f).collect() };
        rows.push(ExperimentRow {
            k,
            rho_true: rho_true(&truth, cfg.quad_points)?,
            rho_sp: Summary::of(&pick(|r| r.rho_sp)),
            rho_np: Summary::of(&pick(|r| r.rho_np)),
            epsilon: Summary::of(&pick(|r| r.epsilon)),
            nnz: Summary::of(&pick(|r| r.nnz as f64)),
            repetitions,
        });
    }
    Ok(ExperimentReport {
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        rows,
    })
}

impl ExperimentReport {
    /// Aligned table in units of `1e-2`, standard deviations in parentheses.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "n={} reps={} seed={} (values x 1e-2)",
            self.n, self.reps, self.seed
        )
        .unwrap();
        writeln!(
            out,
            "{:>4} {:>8} {:>18} {:>18} {:>18} {:>6}",
            "k", "rho_k", "rho_sp", "rho_np", "eps", "nnz"
        )
        .unwrap();
        let cell = |s: &Summary| format!("{:.2} ({:.2})", 100.0 * s.mean, 100.0 * s.std);
        for r in &self.rows {
            writeln!(
                out,
                "{:>4} {:>8.2} {:>18} {:>18} {:>18} {:>6.1}",
                r.k,
                100.0 * r.rho_true,
                cell(&r.rho_sp),
                cell(&r.rho_np),
                cell(&r.epsilon),
                r.nnz.mean
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,n,reps,seed,rho_true,rho_sp_mean,rho_sp_std,rho_np_mean,rho_np_std,eps_mean,eps_std,nnz_mean\n",
        );
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.k,
                self.n,
                self.reps,
                self.seed,
                r.rho_true,
                r.rho_sp.mean,
                r.rho_sp.std,
                r.rho_np.mean,
                r.rho_np.std,
                r.epsilon.mean,
                r.epsilon.std,
                r.nnz.mean
            )
            .unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(parallel: bool) -> ExperimentConfig {
        ExperimentConfig {
            ks: vec![1.0, 3.0],
            n: 40,
            reps: 4,
            seed: 11,
            parallel,
            ..Default::default()
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let a = run_experiment(&small(true)).unwrap();
        let b = run_experiment(&small(false)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn single_repetition_has_zero_spread() {
        let cfg = ExperimentConfig {
            reps: 1,
            ..small(false)
        };
        let report = run_experiment(&cfg).unwrap();
        for row in &report.rows {
            assert_eq!(row.rho_sp.std, 0.0);
            assert_eq!(row.rho_np.std, 0.0);
            assert_eq!(row.epsilon.std, 0.0);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(run_experiment(&ExperimentConfig {
            reps: 0,
            ..small(false)
        })
        .is_err());
        assert!(run_experiment(&ExperimentConfig {
            ks: vec![f64::INFINITY],
            ..small(false)
        })
        .is_err());
    }

    #[test]
    fn l2_distance_to_itself_is_zero() {
        let g = Generator::analytic(2.0).unwrap();
        assert_eq!(l2_distance(&g, &g, 2001).unwrap(), 0.0);
        // psi_1 = 0, so the distance is the L2 norm of the tent
        let tent = Generator::analytic(f64::INFINITY).unwrap();
        let d = l2_distance(&Generator::independence(), &tent, 2001).unwrap();
        assert!((d - (1.0f64 / 12.0).sqrt()).abs() < 1e-9);
    }
}
