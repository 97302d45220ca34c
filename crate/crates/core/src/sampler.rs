//! Simulation by conditional inversion.
//!
//! Draw `u` and `t` independently uniform, then solve
//! `t = dC/du (u, v)` for `v` by bisection.
//!
//! Randomness: pair `i` of a sample draws its two uniforms from a
//! `ChaCha8` stream keyed by the seed (expanded with `SeedableRng::seed_from_u64`)
//! on stream number `i`. Each pair is therefore independent of how the work is
//! partitioned, and samples are reproducible across platforms.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::copula::Generator;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub n: usize,
    pub seed: u64,
    pub bisect_tol: f64,
    pub max_iter: usize,
}

impl SampleConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SampleConfig {
            n,
            seed,
            bisect_tol: 1e-10,
            max_iter: 200,
        }
    }

    fn check(&self) -> Result<()> {
        if self.bisect_tol.is_nan() || self.bisect_tol <= 0.0 {
            return Err(Error::InvalidConfig("bisect_tol must be positive".into()));
        }
        let needed = (1.0 / self.bisect_tol).log2().ceil().max(0.0) as usize;
        if self.max_iter < needed {
            return Err(Error::InvalidConfig(format!(
                "max_iter={} is below the {needed} halvings needed for tol {}",
                self.max_iter, self.bisect_tol
            )));
        }
        Ok(())
    }
}

/// Uniform on the open interval `(0, 1)` from the top 53 bits.
fn open01(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// The two uniforms `(u, t)` for pair `index` of a sample seeded with `seed`.
pub fn pair_uniforms(seed: u64, index: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let u = open01(&mut rng);
    let t = open01(&mut rng);
    (u, t)
}

/// Solves `dC/du (u, v) = t` for `v` by bisection on `[0, 1]`.
pub fn invert_conditional(g: &Generator, u: f64, t: f64, cfg: &SampleConfig) -> Result<f64> {
    cfg.check()?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("t", t, "[0, 1]"));
    }
    let slope = g.psi_deriv(u)?;
    let cond = |v: f64| v + slope * g.psi_at(v);

    let (mut lo, mut hi) = (0.0, 1.0);
    let (f_lo, f_hi) = (cond(lo), cond(hi));
    if (f_lo - t).abs() <= cfg.bisect_tol {
        return Ok(lo);
    }
    if (f_hi - t).abs() <= cfg.bisect_tol {
        return Ok(hi);
    }
    if !(f_lo <= t && t <= f_hi) {
        return Err(Error::NotBracketed { u, t });
    }
    for _ in 0..cfg.max_iter {
        let mid = 0.5 * (lo + hi);
        let f = cond(mid);
        if (f - t).abs() <= cfg.bisect_tol {
            return Ok(mid);
        }
        if f < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionLimit(cfg.max_iter))
}

/// Draws `cfg.n` pairs from the copula generated by `g`.
pub fn sample_pairs(g: &Generator, cfg: &SampleConfig) -> Result<Vec<(f64, f64)>> {
    cfg.check()?;
    if cfg.n == 0 {
        return Err(Error::InvalidConfig("n must be positive".into()));
    }
    if let Generator::Analytic { k } = g {
        if k.is_infinite() {
            return Err(Error::NonDifferentiable(
                "cannot sample psi_inf by conditional inversion".into(),
            ));
        }
    }
    (0..cfg.n as u64)
        .into_par_iter()
        .map(|i| {
            let (u, t) = pair_uniforms(cfg.seed, i);
            Ok((u, invert_conditional(g, u, t, cfg)?))
        })
        .collect()
}
