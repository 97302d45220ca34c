//! Estimation of bivariate copulas of the form `C(u, v) = uv + psi(u) psi(v)`.
//!
//! The generating function `psi` is fitted nonparametrically on a dyadic sine
//! basis by constrained least squares. From the fit the crate derives
//! Spearman's rho and Kendall's tau, and minimum-area high-probability regions
//! on a grid. It can also simulate from the family.
//!
//! ```
//! use psicopula::{BasisSet, FitOptions, Generator, SampleConfig};
//!
//! let truth = Generator::analytic(4.0)?;
//! let pairs = psicopula::sample_pairs(&truth, &SampleConfig::new(200, 7))?;
//! let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
//! let basis = BasisSet::new(4)?;
//! let model = psicopula::fit_generator(&x, &y, &basis, &FitOptions::default())?;
//! let rho = psicopula::rho_sp(&model.result, &basis)?;
//! assert!(rho > 0.3 && rho < 0.9);
//! # Ok::<(), psicopula::Error>(())
//! ```

pub mod association;
pub mod basis;
pub mod cli;
pub mod copula;
pub mod error;
pub mod experiment;
pub mod fitter;
pub mod io;
pub mod numeric;
pub mod qp;
pub mod regions;
pub mod sampler;

pub use association::{
    association_report, rho_np, rho_sp, rho_true, tau_from_rho, AssociationReport,
};
pub use basis::{BasisIndex, BasisSet};
pub use copula::{CopulaEvalConfig, FittedGenerator, Generator, ValidityReport};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport};
pub use fitter::{
    build_problem, fit_generator, rank_transform, solve_qp, CoefficientFile, FitOptions,
    FitProblem, FitResult, FittedModel, PseudoSample,
};
pub use regions::{
    cell_probs_np, cell_probs_sp, cell_probs_true, greedy_region, CellProbabilities, RegionMask,
};
pub use sampler::{invert_conditional, sample_pairs, SampleConfig};
