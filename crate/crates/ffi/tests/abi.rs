use std::ffi::CStr;
use std::ptr;

use psicopula_ffi::*;

fn last_error() -> String {
    let p = psic_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn analytic(k: f64) -> *mut PsicGenerator {
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { psic_generator_analytic(k, &mut g) },
        PsicStatus::Ok
    );
    assert!(!g.is_null());
    g
}

#[test]
fn generator_evaluation_matches_closed_forms() {
    let g = analytic(2.0);
    let mut out = f64::NAN;
    unsafe {
        let psi = 1.0 - 0.5f64.sqrt();
        assert_eq!(psic_generator_psi(g, 0.5, &mut out), PsicStatus::Ok);
        assert!((out - psi).abs() < 1e-15);
        assert_eq!(psic_copula_cdf(g, 0.5, 0.5, &mut out), PsicStatus::Ok);
        assert!((out - (0.25 + psi * psi)).abs() < 1e-15);
        assert_eq!(psic_conditional_cdf(g, 0.3, 1.0, &mut out), PsicStatus::Ok);
        assert!((out - 1.0).abs() < 1e-12);
        assert_eq!(psic_rho_true(g, 2001, &mut out), PsicStatus::Ok);
        assert!(out > 0.4 && out < 0.45, "{out}");
        psic_generator_free(g);
    }
}

#[test]
fn invalid_arguments_report_a_message() {
    let mut g = ptr::null_mut();
    let status = unsafe { psic_generator_analytic(0.5, &mut g) };
    assert_eq!(status, PsicStatus::InvalidArgument);
    assert!(g.is_null());
    assert!(!last_error().is_empty());

    let status = unsafe { psic_generator_fgm(2.0, &mut g) };
    assert_eq!(status, PsicStatus::InvalidArgument);

    let mut out = 0.0;
    let status = unsafe { psic_generator_psi(ptr::null(), 0.5, &mut out) };
    assert_eq!(status, PsicStatus::NullPointer);
    assert!(last_error().contains("`g`"));
}

#[test]
fn comonotone_limit_is_not_differentiable() {
    let g = analytic(f64::INFINITY);
    let mut out = 0.0;
    unsafe {
        assert_eq!(psic_generator_psi(g, 0.5, &mut out), PsicStatus::Ok);
        assert_eq!(
            psic_generator_psi_deriv(g, 0.5, &mut out),
            PsicStatus::NonDifferentiable
        );
        psic_generator_free(g);
    }
}

#[test]
fn sample_fit_and_regions() {
    let n = 150;
    let g = analytic(4.0);
    let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        assert_eq!(
            psic_sample(g, n, 11, u.as_mut_ptr(), v.as_mut_ptr()),
            PsicStatus::Ok
        );
    }
    assert!(u.iter().chain(&v).all(|x| (0.0..=1.0).contains(x)));

    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(
            psic_fit(u.as_ptr(), v.as_ptr(), n, 4, &mut model),
            PsicStatus::Ok
        );
        let mut len = 0;
        assert_eq!(
            psic_model_coefficients(model, ptr::null_mut(), 0, &mut len),
            PsicStatus::Ok
        );
        assert_eq!(len, 57);
        let mut coeffs = vec![0.0; len];
        assert_eq!(
            psic_model_coefficients(model, coeffs.as_mut_ptr(), len, &mut len),
            PsicStatus::Ok
        );
        let mut nnz = 0;
        assert_eq!(psic_model_nnz(model, &mut nnz), PsicStatus::Ok);
        assert_eq!(nnz, coeffs.iter().filter(|a| a.abs() > 1e-10).count());

        let mut assoc = PsicAssociation::default();
        assert_eq!(psic_model_association(model, &mut assoc), PsicStatus::Ok);
        assert!(assoc.rho_sp > 0.3 && assoc.rho_sp < 0.9, "{assoc:?}");
        assert!((assoc.tau_np - 2.0 * assoc.rho_np / 3.0).abs() < 1e-15);
        assert!((assoc.gof_diff - (assoc.rho_np - assoc.rho_sp).abs()).abs() < 1e-15);

        let mut fitted = ptr::null_mut();
        assert_eq!(psic_model_generator(model, &mut fitted), PsicStatus::Ok);
        let mut psi = f64::NAN;
        assert_eq!(psic_generator_psi(fitted, 0.0, &mut psi), PsicStatus::Ok);
        assert_eq!(psi, 0.0);

        let mut mask = vec![9u8; 30 * 30];
        let mut region = PsicRegion::default();
        assert_eq!(
            psic_generator_region(
                fitted,
                PsicSource::Semiparametric,
                30,
                0.5,
                mask.as_mut_ptr(),
                &mut region
            ),
            PsicStatus::Ok
        );
        assert!(mask.iter().all(|c| *c <= 1));
        assert_eq!(region.cells, mask.iter().filter(|c| **c == 1).count());
        assert!(region.achieved_mass >= 0.5 - 1e-12);
        assert!((region.area - region.cells as f64 / 900.0).abs() < 1e-15);

        let mut np = PsicRegion::default();
        assert_eq!(
            psic_model_region_np(model, 8, 0.5, ptr::null_mut(), &mut np),
            PsicStatus::Ok
        );
        assert!(np.cells > 0 && np.cells <= 64);

        psic_generator_free(fitted);
        psic_model_free(model);
        psic_generator_free(g);
    }
}

#[test]
fn fit_rejects_null_and_short_input() {
    let mut model = ptr::null_mut();
    let x = [0.5];
    unsafe {
        assert_eq!(
            psic_fit(ptr::null(), x.as_ptr(), 1, 4, &mut model),
            PsicStatus::NullPointer
        );
        assert_eq!(
            psic_fit(x.as_ptr(), x.as_ptr(), 1, 4, &mut model),
            PsicStatus::InvalidArgument
        );
    }
    assert!(model.is_null());
}

#[test]
fn free_accepts_null() {
    unsafe {
        psic_generator_free(ptr::null_mut());
        psic_model_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/psicopula.h");
    for name in [
        "psic_generator_analytic",
        "psic_generator_free",
        "psic_sample",
        "psic_fit",
        "psic_model_association",
        "psic_generator_region",
        "psic_model_region_np",
        "psic_last_error_message",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
