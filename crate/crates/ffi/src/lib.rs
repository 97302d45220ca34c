//! C ABI over `psicopula`.
//!
//! Generators and fitted models are opaque heap handles released with their
//! `*_free` function. Every call returns a [`PsicStatus`]; on failure
//! [`psic_last_error_message`] describes the error on the calling thread.
//! Outputs are written through caller-provided pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use psicopula::{
    association_report, cell_probs_np, cell_probs_sp, cell_probs_true, fit_generator,
    greedy_region, rho_true, sample_pairs, BasisSet, Error, FitOptions, FittedModel, Generator,
    SampleConfig,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsicStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NonDifferentiable = 3,
    NonConvergence = 4,
    Io = 5,
    Panic = 6,
}

/// Cell probabilities used by [`psic_generator_region`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsicSource {
    /// Exact rectangle masses of the generator.
    True = 0,
    /// Rectangle masses clamped at zero and renormalized.
    Semiparametric = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsicAssociation {
    pub rho_sp: f64,
    pub rho_np: f64,
    pub tau_sp: f64,
    pub tau_np: f64,
    pub gof_diff: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PsicRegion {
    pub cells: usize,
    pub area: f64,
    pub achieved_mass: f64,
}

/// Opaque generating function.
pub struct PsicGenerator {
    inner: Generator,
}

/// Opaque fitted model: pseudo-observations, coefficients and diagnostics.
pub struct PsicModel {
    basis: BasisSet,
    inner: FittedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> PsicStatus {
    match err {
        Error::NonDifferentiable(_) => PsicStatus::NonDifferentiable,
        Error::NonConvergence { .. } | Error::SingularKkt => PsicStatus::NonConvergence,
        Error::Io(_) => PsicStatus::Io,
        _ => PsicStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PsicStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsicStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_last_error(format!("null pointer passed as `{name}`"));
            PsicStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("panic inside psicopula".into());
            PsicStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn write_out<T>(p: *mut T, name: &'static str, value: T) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    p.write(value);
    Ok(())
}

fn boxed_generator(g: Generator) -> *mut PsicGenerator {
    Box::into_raw(Box::new(PsicGenerator { inner: g }))
}

/// Message for the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psic_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// `psi_k(x) = 1 - (x^k + (1-x)^k)^{1/k}`; pass `INFINITY` for `min(x, 1-x)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn psic_generator_analytic(
    k: f64,
    out: *mut *mut PsicGenerator,
) -> PsicStatus {
    guard(|| {
        let g = Generator::analytic(k)?;
        write_out(out, "out", boxed_generator(g))
    })
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn psic_generator_fgm(
    theta: f64,
    out: *mut *mut PsicGenerator,
) -> PsicStatus {
    guard(|| {
        let g = Generator::fgm(theta)?;
        write_out(out, "out", boxed_generator(g))
    })
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn psic_generator_cubic(
    theta: f64,
    out: *mut *mut PsicGenerator,
) -> PsicStatus {
    guard(|| {
        let g = Generator::cubic(theta)?;
        write_out(out, "out", boxed_generator(g))
    })
}

/// # Safety
/// `g` must be NULL or a handle obtained from this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn psic_generator_free(g: *mut PsicGenerator) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live generator handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_generator_psi(
    g: *const PsicGenerator,
    x: f64,
    out: *mut f64,
) -> PsicStatus {
    guard(|| {
        let g = deref(g, "g")?;
        write_out(out, "out", g.inner.psi(x)?)
    })
}

/// # Safety
/// `g` must be a live generator handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_generator_psi_deriv(
    g: *const PsicGenerator,
    x: f64,
    out: *mut f64,
) -> PsicStatus {
    guard(|| {
        let g = deref(g, "g")?;
        write_out(out, "out", g.inner.psi_deriv(x)?)
    })
}

/// `C(u, v) = uv + psi(u) psi(v)`.
///
/// # Safety
/// `g` must be a live generator handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_copula_cdf(
    g: *const PsicGenerator,
    u: f64,
    v: f64,
    out: *mut f64,
) -> PsicStatus {
    guard(|| {
        let g = deref(g, "g")?;
        write_out(out, "out", g.inner.cdf(u, v)?)
    })
}

/// `dC/du (u, v)`.
///
/// # Safety
/// `g` must be a live generator handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_conditional_cdf(
    g: *const PsicGenerator,
    u: f64,
    v: f64,
    out: *mut f64,
) -> PsicStatus {
    guard(|| {
        let g = deref(g, "g")?;
        write_out(out, "out", g.inner.conditional_cdf_given_u(u, v)?)
    })
}

/// Spearman's rho of the generator by Simpson's rule on `quad_points` nodes.
///
/// # Safety
/// `g` must be a live generator handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_rho_true(
    g: *const PsicGenerator,
    quad_points: usize,
    out: *mut f64,
) -> PsicStatus {
    guard(|| {
        let g = deref(g, "g")?;
        write_out(out, "out", rho_true(&g.inner, quad_points)?)
    })
}

/// Draws `n` pairs into `u_out[0..n]` and `v_out[0..n]`.
///
/// # Safety
/// `g` must be a live generator handle; `u_out` and `v_out` must each point
/// to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn psic_sample(
    g: *const PsicGenerator,
    n: usize,
    seed: u64,
    u_out: *mut f64,
    v_out: *mut f64,
) -> PsicStatus {
    guard(|| {
        let g = deref(g, "g")?;
        if u_out.is_null() {
            return Err(Failure::Null("u_out"));
        }
        if v_out.is_null() {
            return Err(Failure::Null("v_out"));
        }
        let pairs = sample_pairs(&g.inner, &SampleConfig::new(n, seed))?;
        let us = slice::from_raw_parts_mut(u_out, n);
        let vs = slice::from_raw_parts_mut(v_out, n);
        for (i, (u, v)) in pairs.into_iter().enumerate() {
            us[i] = u;
            vs[i] = v;
        }
        Ok(())
    })
}

/// Fits the generating function to `n` observations with basis scales up to
/// `s_max`.
///
/// # Safety
/// `x` and `y` must each point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_fit(
    x: *const f64,
    y: *const f64,
    n: usize,
    s_max: u32,
    out: *mut *mut PsicModel,
) -> PsicStatus {
    guard(|| {
        if x.is_null() {
            return Err(Failure::Null("x"));
        }
        if y.is_null() {
            return Err(Failure::Null("y"));
        }
        let xs = slice::from_raw_parts(x, n);
        let ys = slice::from_raw_parts(y, n);
        let basis = BasisSet::new(s_max)?;
        let inner = fit_generator(xs, ys, &basis, &FitOptions::default())?;
        write_out(
            out,
            "out",
            Box::into_raw(Box::new(PsicModel { basis, inner })),
        )
    })
}

/// # Safety
/// `m` must be NULL or a handle obtained from [`psic_fit`] and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn psic_model_free(m: *mut PsicModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Copies up to `capacity` coefficients (basis order) into `buf` and stores
/// the total count in `len`. `buf` may be NULL when `capacity` is 0.
///
/// # Safety
/// `m` must be a live model handle, `buf` must hold `capacity` doubles and
/// `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_model_coefficients(
    m: *const PsicModel,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> PsicStatus {
    guard(|| {
        let m = deref(m, "m")?;
        let a = &m.inner.result.a;
        if capacity > 0 {
            if buf.is_null() {
                return Err(Failure::Null("buf"));
            }
            let n = capacity.min(a.len());
            slice::from_raw_parts_mut(buf, n).copy_from_slice(&a[..n]);
        }
        write_out(len, "len", a.len())
    })
}

/// Number of coefficients above the selection threshold.
///
/// # Safety
/// `m` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_model_nnz(m: *const PsicModel, out: *mut usize) -> PsicStatus {
    guard(|| {
        let m = deref(m, "m")?;
        write_out(out, "out", m.inner.result.nnz)
    })
}

/// # Safety
/// `m` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_model_association(
    m: *const PsicModel,
    out: *mut PsicAssociation,
) -> PsicStatus {
    guard(|| {
        let m = deref(m, "m")?;
        let r = association_report(&m.inner.sample, &m.inner.result, &m.basis)?;
        write_out(
            out,
            "out",
            PsicAssociation {
                rho_sp: r.rho_sp,
                rho_np: r.rho_np,
                tau_sp: r.tau_sp,
                tau_np: r.tau_np,
                gof_diff: r.gof_diff,
            },
        )
    })
}

/// New generator handle holding the fitted expansion.
///
/// # Safety
/// `m` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn psic_model_generator(
    m: *const PsicModel,
    out: *mut *mut PsicGenerator,
) -> PsicStatus {
    guard(|| {
        let m = deref(m, "m")?;
        write_out(out, "out", boxed_generator(m.inner.generator.clone()))
    })
}

unsafe fn export_region(
    cp: &psicopula::CellProbabilities,
    alpha: f64,
    mask_out: *mut u8,
    out: *mut PsicRegion,
) -> Result<(), Failure> {
    let mask = greedy_region(cp, alpha)?;
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    if !mask_out.is_null() {
        let n = cp.n_grid();
        let cells = slice::from_raw_parts_mut(mask_out, n * n);
        for k in 0..n {
            for l in 0..n {
                cells[k * n + l] = u8::from(mask.contains(k, l));
            }
        }
    }
    write_out(
        out,
        "out",
        PsicRegion {
            cells: mask.selected(),
            area: mask.area,
            achieved_mass: mask.achieved_mass,
        },
    )
}

/// Region of level `alpha` on an `n_grid x n_grid` grid from the generator's
/// cell masses. When `mask_out` is not NULL it receives `n_grid * n_grid`
/// bytes, 1 for selected cells, at index `(k-1) * n_grid + (l-1)`.
///
/// # Safety
/// `g` must be a live generator handle, `mask_out` NULL or valid for
/// `n_grid * n_grid` bytes, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psic_generator_region(
    g: *const PsicGenerator,
    source: PsicSource,
    n_grid: usize,
    alpha: f64,
    mask_out: *mut u8,
    out: *mut PsicRegion,
) -> PsicStatus {
    guard(|| {
        let g = deref(g, "g")?;
        let cp = match source {
            PsicSource::True => cell_probs_true(&g.inner, n_grid)?,
            PsicSource::Semiparametric => cell_probs_sp(&g.inner, n_grid)?,
        };
        export_region(&cp, alpha, mask_out, out)
    })
}

/// Region from the empirical cell frequencies of the model's sample. Same
/// mask layout as [`psic_generator_region`].
///
/// # Safety
/// `m` must be a live model handle, `mask_out` NULL or valid for
/// `n_grid * n_grid` bytes, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psic_model_region_np(
    m: *const PsicModel,
    n_grid: usize,
    alpha: f64,
    mask_out: *mut u8,
    out: *mut PsicRegion,
) -> PsicStatus {
    guard(|| {
        let m = deref(m, "m")?;
        let cp = cell_probs_np(&m.inner.sample, n_grid)?;
        export_region(&cp, alpha, mask_out, out)
    })
}
