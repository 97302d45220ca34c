//! Spearman's rho and Kendall's tau.
//!
//! Within the family `rho = 12 (int psi)^2` and `2 rho = 3 tau`, so both tau
//! values are derived from the rho estimates.

use crate::basis::BasisSet;
use crate::copula::Generator;
use crate::error::{Error, Result};
use crate::fitter::{FitResult, PseudoSample};
use crate::numeric::simpson;

/// `12 (int_0^1 psi)^2`, integrated with Simpson's rule on `quad_points` nodes.
pub fn rho_true(g: &Generator, quad_points: usize) -> Result<f64> {
    let integral = simpson(quad_points, |x| g.psi_at(x))?;
    Ok(12.0 * integral * integral)
}

/// Semiparametric estimate `12 (sum_k a_k beta_k)^2` with the closed-form
/// basis integrals `beta_{s,l} = 2^{1-s} / pi`.
pub fn rho_sp(fit: &FitResult, basis: &BasisSet) -> Result<f64> {
    let integral = basis.integrate(&fit.a)?;
    Ok(12.0 * integral * integral)
}

/// Number of ordered pairs `(i, j)` with `u_j < u_i` and `v_j < v_i`, in
/// `O(n log n)`.
pub fn concordant_pairs(u: &[f64], v: &[f64]) -> u64 {
    let n = u.len();
    // dense ranks of v for the Fenwick tree
    let mut vs: Vec<f64> = v.to_vec();
    vs.sort_by(f64::total_cmp);
    vs.dedup();
    let v_rank: Vec<usize> = v
        .iter()
        .map(|x| vs.partition_point(|y| y.total_cmp(x).is_lt()) + 1)
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| u[i].total_cmp(&u[j]));
    let mut tree = vec![0u64; vs.len() + 1];
    let mut count = 0u64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && u[order[end]] == u[order[start]] {
            end += 1;
        }
        // a u-tie group only sees points with strictly smaller u
        for &i in &order[start..end] {
            let mut k = v_rank[i] - 1;
            while k > 0 {
                count += tree[k];
                k &= k - 1;
            }
        }
        for &i in &order[start..end] {
            let mut k = v_rank[i];
            while k < tree.len() {
                tree[k] += 1;
                k += k & k.wrapping_neg();
            }
        }
        start = end;
    }
    count
}

/// Nonparametric estimate
/// `6 / (n(n-1)) * #{(i, j): u_j < u_i, v_j < v_i} - 3/2`.
pub fn rho_np(ps: &PseudoSample) -> Result<f64> {
    let n = ps.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "rho_np needs at least 2 observations, got {n}"
        )));
    }
    let count = concordant_pairs(ps.u(), ps.v());
    Ok(6.0 * count as f64 / (n as f64 * (n - 1) as f64) - 1.5)
}

/// Kendall's tau implied by Spearman's rho within the family.
pub fn tau_from_rho(rho: f64) -> f64 {
    2.0 * rho / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociationReport {
    pub rho_sp: f64,
    pub rho_np: f64,
    pub tau_sp: f64,
    pub tau_np: f64,
    /// `|rho_np - rho_sp|`; large values suggest the family does not fit.
    pub gof_diff: f64,
}

pub fn association_report(
    ps: &PseudoSample,
    fit: &FitResult,
    basis: &BasisSet,
) -> Result<AssociationReport> {
    let rho_sp = rho_sp(fit, basis)?;
    let rho_np = rho_np(ps)?;
    Ok(AssociationReport {
        rho_sp,
        rho_np,
        tau_sp: tau_from_rho(rho_sp),
        tau_np: tau_from_rho(rho_np),
        gof_diff: (rho_np - rho_sp).abs(),
    })
}
