use std::ffi::{CStr, CString};
use std::ptr;

use mpe_ffi::*;

const SMALL: &str = "[grid]\nnx = 8\nny = 6\nnp = 4\n[initial]\nkind = warm_bubble\n";

fn new_model(text: &str) -> (MpeStatus, *mut MpeModel) {
    let c = CString::new(text).unwrap();
    let mut h = ptr::null_mut();
    let s = unsafe { mpe_model_new(c.as_ptr(), &mut h) };
    (s, h)
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe {
        mpe_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn create_step_and_read_back() {
    let (s, h) = new_model(SMALL);
    assert_eq!(s, MpeStatus::Ok, "{}", last_error());
    unsafe {
        let (mut nx, mut ny, mut np) = (0, 0, 0);
        assert_eq!(mpe_model_dims(h, &mut nx, &mut ny, &mut np), MpeStatus::Ok);
        assert_eq!((nx, ny, np), (8, 6, 4));
        assert_eq!(mpe_field_len(h, MpeField::T), 8 * 6 * 4);
        assert_eq!(mpe_field_len(h, MpeField::W), 8 * 6 * 5);
        assert_eq!(mpe_field_len(h, MpeField::PhiS), 8 * 6);
        assert_eq!(mpe_model_time(h), 0.0);

        assert_eq!(mpe_model_step(h, 0.0), MpeStatus::Ok);
        assert_eq!(mpe_model_run(h, 3), MpeStatus::Ok);
        let mut d = MpeDiagnostics::default();
        assert_eq!(mpe_model_diagnostics(h, &mut d), MpeStatus::Ok);
        assert_eq!(d.step, 4);
        assert!(d.time > 0.0 && d.time == mpe_model_time(h));
        assert!(d.continuity_residual.is_finite());

        let mut t = vec![0.0; mpe_field_len(h, MpeField::T)];
        assert_eq!(mpe_model_copy_field(h, MpeField::T, t.as_mut_ptr(), t.len()), MpeStatus::Ok);
        let (lo, hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        assert_eq!((lo, hi), (d.t_min, d.t_max));

        let mut w = vec![f64::NAN; mpe_field_len(h, MpeField::W)];
        assert_eq!(mpe_model_copy_field(h, MpeField::W, w.as_mut_ptr(), w.len()), MpeStatus::Ok);
        // w vanishes on both pressure boundaries
        assert!(w[..48].iter().chain(&w[4 * 48..]).all(|&x| x == 0.0));
        mpe_model_free(h);
    }
}

#[test]
fn matches_core_stepping_bit_for_bit() {
    let cfg = mpe_core::Config::parse(SMALL).unwrap();
    let mut m = mpe_core::stepper::Model::new(cfg).unwrap();
    let mut s = m.initial_state().unwrap();
    for _ in 0..3 {
        let dt = m.choose_dt(&s).dt;
        s = m.step(&s, dt).unwrap();
    }
    let want: Vec<f64> = s.qv.interior().collect();

    let (_, h) = new_model(SMALL);
    unsafe {
        assert_eq!(mpe_model_run(h, 3), MpeStatus::Ok);
        let mut got = vec![0.0; want.len()];
        assert_eq!(mpe_model_copy_field(h, MpeField::Qv, got.as_mut_ptr(), got.len()), MpeStatus::Ok);
        assert!(got.iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(mpe_model_time(h), s.time);
        mpe_model_free(h);
    }
}

#[test]
fn explicit_dt_is_used() {
    let (_, h) = new_model(SMALL);
    unsafe {
        assert_eq!(mpe_model_step(h, 1e-4), MpeStatus::Ok);
        assert_eq!(mpe_model_time(h), 1e-4);
        assert_eq!(mpe_model_step(h, f64::NAN), MpeStatus::InvalidArgument);
        assert_eq!(mpe_model_time(h), 1e-4);
        mpe_model_free(h);
    }
}

#[test]
fn config_errors_carry_a_message() {
    let (s, h) = new_model("[grid]\nnx = banana\n");
    assert_eq!(s, MpeStatus::Config);
    assert!(h.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());

    let (s, h) = new_model("[grid]\np0 = 5e4\np1 = 5e4\n");
    assert_ne!(s, MpeStatus::Ok);
    assert!(h.is_null());
    assert!(last_error().contains("p0 < p1"), "{}", last_error());
}

#[test]
fn invalid_utf8_is_rejected() {
    let bytes = CString::new(vec![b'[', 0xff, b']']).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { mpe_model_new(bytes.as_ptr(), &mut h) }, MpeStatus::InvalidUtf8);
    assert!(h.is_null());
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        let mut h = ptr::null_mut();
        assert_eq!(mpe_model_new(ptr::null(), &mut h), MpeStatus::NullPointer);
        assert_eq!(mpe_model_step(ptr::null_mut(), 0.0), MpeStatus::NullPointer);
        assert_eq!(mpe_model_run(ptr::null_mut(), 0), MpeStatus::NullPointer);
        assert!(mpe_model_time(ptr::null()).is_nan());
        assert_eq!(mpe_field_len(ptr::null(), MpeField::T), 0);
        let mut d = MpeDiagnostics::default();
        assert_eq!(mpe_model_diagnostics(ptr::null(), &mut d), MpeStatus::NullPointer);
        mpe_model_free(ptr::null_mut());
    }
    assert_eq!(last_error(), "null pointer argument");
}

#[test]
fn short_buffer_is_refused() {
    let (_, h) = new_model(SMALL);
    unsafe {
        let mut buf = vec![7.0; 10];
        assert_eq!(mpe_model_copy_field(h, MpeField::Qc, buf.as_mut_ptr(), buf.len()), MpeStatus::BufferTooSmall);
        assert!(buf.iter().all(|&x| x == 7.0));
        mpe_model_free(h);
    }
}

#[test]
fn last_error_truncates_and_reports_length() {
    let (s, _) = new_model("[grid]\nnx = 1\n");
    assert_ne!(s, MpeStatus::Ok);
    let full = unsafe { mpe_last_error(ptr::null_mut(), 0) };
    assert!(full > 4);
    let mut buf = [1 as std::ffi::c_char; 5];
    let n = unsafe { mpe_last_error(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, full);
    assert_eq!(buf[4], 0);
    assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_bytes().len(), 4);
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(mpe_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
