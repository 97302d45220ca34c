//! High-probability regions on an `N x N` grid.
//!
//! The unit square is split into cells `K_{k,l} = ((k-1)/N, k/N] x ((l-1)/N, l/N]`.
//! A region of level `alpha` is the smallest set of cells whose estimated mass
//! reaches `alpha`. Cells all have the same area, so taking the most probable
//! cells first is optimal.
//!
//! Cell `(k, l)` is stored at 0-based position `(k - 1, l - 1)`; `k` indexes
//! the first coordinate.

use std::fmt::Write as _;

use crate::copula::Generator;
use crate::error::{Error, Result};
use crate::fitter::PseudoSample;

/// Slack allowed when comparing accumulated mass against `alpha`.
pub const MASS_TOL: f64 = 1e-12;

pub const DEFAULT_GRID_SEMIPARAMETRIC: usize = 30;
pub const DEFAULT_GRID_NONPARAMETRIC: usize = 8;
pub const DEFAULT_ALPHAS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbabilitySource {
    /// Rectangle masses of a fitted generator.
    Semiparametric,
    /// Empirical cell frequencies.
    Nonparametric,
    /// Rectangle masses of a known generator.
    True,
}

impl ProbabilitySource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProbabilitySource::Semiparametric => "sp",
            ProbabilitySource::Nonparametric => "np",
            ProbabilitySource::True => "true",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellProbabilities {
    n_grid: usize,
    p: Vec<f64>,
    source: ProbabilitySource,
}

impl CellProbabilities {
    /// Wraps an arbitrary row-major `n_grid x n_grid` array.
    pub fn from_raw(n_grid: usize, p: Vec<f64>, source: ProbabilitySource) -> Result<Self> {
        check_grid(n_grid)?;
        if p.len() != n_grid * n_grid {
            return Err(Error::Dimension {
                expected: n_grid * n_grid,
                got: p.len(),
            });
        }
        Ok(CellProbabilities { n_grid, p, source })
    }

    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    pub fn source(&self) -> ProbabilitySource {
        self.source
    }

    /// Mass of cell `(k+1, l+1)`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.p[k * self.n_grid + l]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    /// `sum |p - q| / 2`.
    pub fn total_variation(&self, other: &CellProbabilities) -> Result<f64> {
        if self.n_grid != other.n_grid {
            return Err(Error::Dimension {
                expected: self.n_grid,
                got: other.n_grid,
            });
        }
        Ok(0.5
            * self
                .p
                .iter()
                .zip(&other.p)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

fn check_grid(n_grid: usize) -> Result<()> {
    if n_grid == 0 {
        Err(Error::InvalidConfig("grid size must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Exact cell masses `C(k/N, l/N) - C((k-1)/N, l/N) - C(k/N, (l-1)/N) + C((k-1)/N, (l-1)/N)`.
pub fn cell_probs_true(g: &Generator, n_grid: usize) -> Result<CellProbabilities> {
    check_grid(n_grid)?;
    let nf = n_grid as f64;
    let mut p = Vec::with_capacity(n_grid * n_grid);
    for k in 1..=n_grid {
        let (u0, u1) = ((k - 1) as f64 / nf, k as f64 / nf);
        for l in 1..=n_grid {
            let (v0, v1) = ((l - 1) as f64 / nf, l as f64 / nf);
            p.push(g.cdf(u1, v1)? - g.cdf(u0, v1)? - g.cdf(u1, v0)? + g.cdf(u0, v0)?);
        }
    }
    Ok(CellProbabilities {
        n_grid,
        p,
        source: ProbabilitySource::True,
    })
}

/// `1/N^2 + (psi(k/N) - psi((k-1)/N)) (psi(l/N) - psi((l-1)/N))`.
///
/// A fitted `psi` is only constrained at the sample points, so a cell can come
/// out slightly negative; such cells are clamped to zero and the array is
/// renormalized.
pub fn cell_probs_sp(g: &Generator, n_grid: usize) -> Result<CellProbabilities> {
    check_grid(n_grid)?;
    let nf = n_grid as f64;
    let steps: Vec<f64> = (1..=n_grid)
        .map(|k| g.psi_at(k as f64 / nf) - g.psi_at((k - 1) as f64 / nf))
        .collect();
    let base = 1.0 / (nf * nf);
    let mut p: Vec<f64> = steps
        .iter()
        .flat_map(|dk| steps.iter().map(move |dl| (base + dk * dl).max(0.0)))
        .collect();
    let total: f64 = p.iter().sum();
    if total > 0.0 {
        p.iter_mut().for_each(|x| *x /= total);
    }
    Ok(CellProbabilities {
        n_grid,
        p,
        source: ProbabilitySource::Semiparametric,
    })
}

/// 0-based cell of a coordinate under the left-open, right-closed convention,
/// with 0 absorbed into the first cell.
fn cell_of(x: f64, n_grid: usize) -> usize {
    let c = (x * n_grid as f64).ceil() as usize;
    c.clamp(1, n_grid) - 1
}

/// Empirical frequencies `(1/n) #{i: (u_i, v_i) in K_{k,l}}`.
pub fn cell_probs_np(ps: &PseudoSample, n_grid: usize) -> Result<CellProbabilities> {
    check_grid(n_grid)?;
    if ps.is_empty() {
        return Err(Error::InvalidConfig("empty sample".into()));
    }
    let mut counts = vec![0usize; n_grid * n_grid];
    for (u, v) in ps.u().iter().zip(ps.v()) {
        counts[cell_of(*u, n_grid) * n_grid + cell_of(*v, n_grid)] += 1;
    }
    let n = ps.len() as f64;
    Ok(CellProbabilities {
        n_grid,
        p: counts.into_iter().map(|c| c as f64 / n).collect(),
        source: ProbabilitySource::Nonparametric,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    n_grid: usize,
    delta: Vec<bool>,
    /// Selected cells in selection order.
    order: Vec<usize>,
    pub achieved_mass: f64,
    pub area: f64,
    pub alpha: f64,
}

impl RegionMask {
    pub fn n_grid(&self) -> usize {
        self.n_grid
    }

    /// Whether cell `(k+1, l+1)` is selected.
    pub fn contains(&self, k: usize, l: usize) -> bool {
        self.delta[k * self.n_grid + l]
    }

    pub fn selected(&self) -> usize {
        self.order.len()
    }

    /// Flat indices `k * N + l` in the order they were selected.
    pub fn selection_order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_subset_of(&self, other: &RegionMask) -> bool {
        self.n_grid == other.n_grid && self.delta.iter().zip(&other.delta).all(|(a, b)| !a || *b)
    }

    /// Fraction of selected cells lying on the main diagonal `k = l`.
    pub fn diagonal_fraction(&self) -> f64 {
        if self.order.is_empty() {
            return 0.0;
        }
        let on = self
            .order
            .iter()
            .filter(|&&c| c / self.n_grid == c % self.n_grid)
            .count();
        on as f64 / self.order.len() as f64
    }

    /// 0/1 matrix, first row `l = N`, columns `k = 1..N`.
    pub fn to_csv(&self) -> String {
        let n = self.n_grid;
        let mut out = String::new();
        for l in (0..n).rev() {
            let row: Vec<&str> = (0..n)
                .map(|k| if self.contains(k, l) { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Selects the most probable cells until their mass reaches `alpha`. Ties are
/// taken in ascending `(k, l)` order.
pub fn greedy_region(cp: &CellProbabilities, alpha: f64) -> Result<RegionMask> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain("alpha", alpha, "(0, 1]"));
    }
    let mut ranked: Vec<usize> = (0..cp.p.len()).collect();
    ranked.sort_by(|&a, &b| cp.p[b].total_cmp(&cp.p[a]).then(a.cmp(&b)));

    let mut mass = 0.0;
    let mut taken = 0;
    for &cell in &ranked {
        if mass + MASS_TOL >= alpha {
            break;
        }
        mass += cp.p[cell];
        taken += 1;
    }
    if mass + MASS_TOL < alpha {
        return Err(Error::InsufficientMass { total: mass, alpha });
    }
    let order = ranked[..taken].to_vec();
    let mut delta = vec![false; cp.p.len()];
    for &c in &order {
        delta[c] = true;
    }
    let n2 = (cp.n_grid * cp.n_grid) as f64;
    Ok(RegionMask {
        n_grid: cp.n_grid,
        delta,
        achieved_mass: mass,
        area: taken as f64 / n2,
        alpha,
        order,
    })
}

/// ASCII PGM (`P2`) with one pixel per cell, same orientation as
/// [`RegionMask::to_csv`]. With masks sorted by increasing `alpha`, a cell
/// gets the grey level of the smallest mask containing it: for three masks the
/// levels are 0, 85 and 170, and 255 outside all of them.
pub fn masks_to_pgm(masks: &[RegionMask]) -> Result<String> {
    let n = match masks.first() {
        Some(m) => m.n_grid,
        None => return Err(Error::InvalidConfig("no masks to render".into())),
    };
    if let Some(m) = masks.iter().find(|m| m.n_grid != n) {
        return Err(Error::Dimension {
            expected: n,
            got: m.n_grid,
        });
    }
    let mut sorted: Vec<&RegionMask> = masks.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let levels = sorted.len();
    let mut out = String::new();
    writeln!(out, "P2\n{n} {n}\n255").unwrap();
    for l in (0..n).rev() {
        let row: Vec<String> = (0..n)
            .map(|k| {
                let rank = sorted
                    .iter()
                    .position(|m| m.contains(k, l))
                    .unwrap_or(levels);
                (255 * rank / levels).to_string()
            })
            .collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn k(k: f64) -> Generator {
        Generator::analytic(k).unwrap()
    }

    #[test]
    fn true_cells_examples() {
        let cp = cell_probs_true(&k(1.0), 4).unwrap();
        assert!(cp.values().iter().all(|p| (p - 1.0 / 16.0).abs() < 1e-15));

        let cp = cell_probs_true(&k(f64::INFINITY), 2).unwrap();
        assert_abs_diff_eq!(cp.get(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cp.get(1, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cp.get(0, 1), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cp.get(1, 0), 0.0, epsilon = 1e-15);

        let cp = cell_probs_true(&k(2.0), 2).unwrap();
        let psi_half = 1.0 - 0.5f64.sqrt();
        assert_abs_diff_eq!(cp.get(0, 0), 0.25 + psi_half * psi_half, epsilon = 1e-15);
        assert_abs_diff_eq!(cp.get(0, 0), 0.33579, epsilon = 1e-5);
        assert!(cell_probs_true(&k(2.0), 0).is_err());
    }

    #[test]
    fn true_cells_sum_to_one() {
        for kk in [1.0, 2.0, 4.0, 8.0, f64::INFINITY] {
            for n in [1, 3, 8, 30] {
                let cp = cell_probs_true(&k(kk), n).unwrap();
                assert_abs_diff_eq!(cp.total(), 1.0, epsilon = 1e-9);
                assert!(cp.values().iter().all(|p| *p >= -1e-15));
            }
        }
    }

    #[test]
    fn sp_cells_match_true_for_the_same_generator() {
        let sp = cell_probs_sp(&Generator::independence(), 8).unwrap();
        assert!(sp.values().iter().all(|p| (p - 1.0 / 64.0).abs() < 1e-15));
        let g = k(2.0);
        let sp = cell_probs_sp(&g, 30).unwrap();
        let tr = cell_probs_true(&g, 30).unwrap();
        for (a, b) in sp.values().iter().zip(tr.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(sp.source(), ProbabilitySource::Semiparametric);
    }

    #[test]
    fn sp_cells_are_clamped_and_renormalized() {
        let basis = crate::basis::BasisSet::new(0).unwrap();
        let steep = Generator::fitted(basis, vec![2.0]).unwrap();
        let cp = cell_probs_sp(&steep, 10).unwrap();
        assert!(cp.values().iter().all(|p| *p >= 0.0));
        assert_abs_diff_eq!(cp.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn np_cells_examples() {
        let ps = PseudoSample::from_uniforms(vec![0.1], vec![0.9]).unwrap();
        let cp = cell_probs_np(&ps, 2).unwrap();
        assert_eq!(cp.get(0, 1), 1.0);
        assert_eq!(cp.total(), 1.0);

        let ps =
            PseudoSample::from_uniforms(vec![0.25, 0.25, 0.75, 0.75], vec![0.25, 0.75, 0.25, 0.75])
                .unwrap();
        let cp = cell_probs_np(&ps, 2).unwrap();
        assert!(cp.values().iter().all(|p| *p == 0.25));
    }

    #[test]
    fn np_boundary_convention() {
        let ps = PseudoSample::from_uniforms(vec![0.0, 0.5, 1.0], vec![0.5, 0.5, 0.0]).unwrap();
        let cp = cell_probs_np(&ps, 2).unwrap();
        // 0 joins the first cell, 0.5 is the right end of the first cell
        assert_abs_diff_eq!(cp.get(0, 0), 2.0 / 3.0);
        assert_abs_diff_eq!(cp.get(1, 0), 1.0 / 3.0);
    }

    #[test]
    fn greedy_examples() {
        let uniform = cell_probs_true(&k(1.0), 4).unwrap();
        let m = greedy_region(&uniform, 0.25).unwrap();
        assert_eq!(m.selected(), 4);
        assert_eq!(m.area, 0.25);
        // ties resolved in (k, l) order
        assert_eq!(m.selection_order(), &[0, 1, 2, 3]);

        let tent = cell_probs_true(&k(f64::INFINITY), 2).unwrap();
        let m = greedy_region(&tent, 0.75).unwrap();
        assert_eq!(m.selected(), 2);
        assert!(m.contains(0, 0) && m.contains(1, 1));
        assert_abs_diff_eq!(m.achieved_mass, 1.0, epsilon = 1e-15);
        assert_eq!(m.area, 0.5);

        let m = greedy_region(&tent, 0.5).unwrap();
        assert_eq!(m.selected(), 1);
        assert_eq!(m.area, 0.25);
        assert!(m.contains(0, 0));
    }

    #[test]
    fn greedy_errors() {
        let cp = cell_probs_true(&k(1.0), 2).unwrap();
        assert!(greedy_region(&cp, 0.0).is_err());
        assert!(greedy_region(&cp, 1.2).is_err());
        let short = CellProbabilities::from_raw(
            2,
            vec![0.1, 0.1, 0.1, 0.1],
            ProbabilitySource::Nonparametric,
        )
        .unwrap();
        assert!(matches!(
            greedy_region(&short, 0.5),
            Err(Error::InsufficientMass { .. })
        ));
    }

    #[test]
    fn uniform_area_is_ceiling() {
        for n in [2, 3, 7, 10, 30] {
            let cp = cell_probs_true(&k(1.0), n).unwrap();
            for j in 1..=20 {
                let alpha = j as f64 / 20.0;
                let m = greedy_region(&cp, alpha).unwrap();
                let n2 = (n * n) as f64;
                // alpha * n^2 evaluated with the same tolerance the selection uses
                let expected = ((alpha - MASS_TOL) * n2).ceil() / n2;
                assert_eq!(m.area, expected, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn csv_and_pgm_orientation() {
        let tent = cell_probs_true(&k(f64::INFINITY), 2).unwrap();
        let m = greedy_region(&tent, 0.5).unwrap();
        // only the lower-left cell (k=1, l=1): bottom row, first column
        assert_eq!(m.to_csv(), "0,0\n1,0\n");
        let m2 = greedy_region(&tent, 0.75).unwrap();
        let pgm = masks_to_pgm(&[m2, m]).unwrap();
        assert_eq!(pgm, "P2\n2 2\n255\n255 127\n0 255\n");
    }

    #[test]
    fn pgm_uses_four_grey_levels_for_three_masks() {
        let cp = cell_probs_true(&k(4.0), 30).unwrap();
        let masks: Vec<RegionMask> = DEFAULT_ALPHAS
            .iter()
            .map(|a| greedy_region(&cp, *a).unwrap())
            .collect();
        let pgm = masks_to_pgm(&masks).unwrap();
        let mut levels: Vec<u32> = pgm
            .lines()
            .skip(3)
            .flat_map(|l| {
                l.split(' ')
                    .map(|t| t.parse::<u32>().unwrap())
                    .collect::<Vec<_>>()
            })
            .collect();
        levels.sort();
        levels.dedup();
        assert_eq!(levels, vec![0, 85, 170, 255]);
        assert!(masks_to_pgm(&[]).is_err());
    }

    #[test]
    fn diagonal_concentration_grows_with_k() {
        let fr: Vec<f64> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&kk| {
                let cp = cell_probs_true(&k(kk), 30).unwrap();
                greedy_region(&cp, 0.5).unwrap().diagonal_fraction()
            })
            .collect();
        assert!(fr.windows(2).all(|w| w[0] <= w[1]), "{fr:?}");
    }

    proptest! {
        #[test]
        fn regions_are_nested(
            raw in proptest::collection::vec(0.0f64..1.0, 16),
            a1 in 0.01f64..1.0,
            a2 in 0.01f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let p = raw.iter().map(|x| x / total).collect();
            let cp = CellProbabilities::from_raw(4, p, ProbabilitySource::Nonparametric).unwrap();
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let m1 = greedy_region(&cp, lo).unwrap();
            let m2 = greedy_region(&cp, hi).unwrap();
            prop_assert!(m1.is_subset_of(&m2));
            prop_assert!(m1.achieved_mass + MASS_TOL >= lo);
            // dropping the last cell falls short
            let last = *m1.selection_order().last().unwrap();
            prop_assert!(m1.achieved_mass - cp.values()[last] + MASS_TOL < lo);
        }
    }
}
