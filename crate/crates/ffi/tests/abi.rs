use regensim_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rs_last_error()) }.to_string_lossy().into_owned()
}

fn rrs_draws(seed: u64, n: usize, t: f64) -> (Vec<f64>, u64) {
    let s = rs_stream_new(seed, 0);
    let mut out = vec![0.0; n];
    let mut draws = 0u64;
    let st = unsafe { rs_gamma_exp_rrs(s, 2.0, 1.0, t, n, out.as_mut_ptr(), &mut draws) };
    unsafe { rs_stream_free(s) };
    assert_eq!(st, RsStatus::Ok, "{}", last_error());
    (out, draws)
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let (a, _) = rrs_draws(5, 100, 2.0);
    let (b, _) = rrs_draws(5, 100, 2.0);
    let (c, _) = rrs_draws(6, 100, 2.0);
    assert_eq!(a, b);
    assert_ne!(a, c);
    let s = rs_stream_new(1, 2);
    let mut u = 0.0;
    assert_eq!(unsafe { rs_stream_uniform(s, &mut u) }, RsStatus::Ok);
    assert!(u > 0.0 && u < 1.0);
    unsafe { rs_stream_free(s) };
    unsafe { rs_stream_free(ptr::null_mut()) };
}

#[test]
fn gamma_exp_rrs_matches_its_output_law() {
    let n = 20_000;
    let t = 3.0;
    let (mut xs, draws) = rrs_draws(11, n, t);
    assert!(draws >= n as u64);
    xs.sort_by(f64::total_cmp);
    // KS distance against the closed-form output law
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = rs_gamma_exp_rrs_cdf(t, x);
            (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.63 / (n as f64).sqrt(), "KS {d}");
}

#[test]
fn output_law_endpoints() {
    // Below the threshold the law equals Gamma(2,1): 1 - (1+y)e^{-y}.
    let y: f64 = 0.7;
    assert!((rs_gamma_exp_rrs_cdf(2.0, y) - (1.0 - (1.0 + y) * (-y).exp())).abs() < 1e-14);
    assert!(rs_gamma_exp_rrs_cdf(2.0, 60.0) >= 1.0 - 1e-15);
    assert_eq!(rs_gamma_exp_rrs_cdf(2.0, 0.0), 0.0);
}

#[test]
fn ratio_estimate_by_hand() {
    let v = [1.0, 3.0, 2.0, 6.0];
    let w = [1.0, 2.0, 2.0, 3.0];
    let mut e = RsEstimate::default();
    let st = unsafe { rs_ratio_estimate(v.as_ptr(), w.as_ptr(), 4, 0.0, 0.95, &mut e) };
    assert_eq!(st, RsStatus::Ok);
    let q = 12.0 / 8.0;
    let z: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - q * b).collect();
    let zbar = z.iter().sum::<f64>() / 4.0;
    let s2 = z.iter().map(|x| (x - zbar).powi(2)).sum::<f64>() / 3.0;
    let wbar = 2.0;
    assert!((e.value - q).abs() < 1e-15);
    assert!((e.s2 - s2).abs() < 1e-12);
    assert!((e.eta2 - s2 / (wbar * wbar)).abs() < 1e-12);
    assert!((e.sigma2 - s2 / wbar).abs() < 1e-12);
    let hw = 1.959963984540054 * (e.eta2 / 4.0).sqrt();
    assert!((e.ci_hi - e.ci_lo - 2.0 * hw).abs() < 1e-12);

    let mut et = RsEstimate::default();
    unsafe { rs_ratio_estimate(v.as_ptr(), w.as_ptr(), 4, 8.0, 0.95, &mut et) };
    let hw = 1.959963984540054 * (e.sigma2 / 8.0).sqrt();
    assert!((et.ci_hi - q - hw).abs() < 1e-12);
}

#[test]
fn ratio_estimate_rejects_bad_input() {
    let v = [1.0];
    let mut e = RsEstimate::default();
    let st = unsafe { rs_ratio_estimate(v.as_ptr(), v.as_ptr(), 1, 0.0, 0.95, &mut e) };
    assert_eq!(st, RsStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    let st = unsafe { rs_ratio_estimate(ptr::null(), v.as_ptr(), 1, 0.0, 0.95, &mut e) };
    assert_eq!(st, RsStatus::NullPointer);
    assert!(last_error().contains("null"));
    let two = [1.0, 2.0];
    let st = unsafe { rs_ratio_estimate(two.as_ptr(), two.as_ptr(), 2, 0.0, 1.5, &mut e) };
    assert_eq!(st, RsStatus::InvalidArgument);
    assert_eq!(e, RsEstimate::default());
}

#[test]
fn bias_bound_formula() {
    let mut b = 0.0;
    assert_eq!(unsafe { rs_bias_bound(1.0, 1.0, 2.0, 6.0, 4.0, &mut b) }, RsStatus::Ok);
    let want = ((16.0f64 / 3.0) * 6.0 * 2.0 * (2.0 / 4.0 + 1.0)).sqrt() / 8.0;
    assert!((b - want).abs() < 1e-14);
    assert_eq!(unsafe { rs_bias_bound(1.0, 0.0, 2.0, 6.0, 4.0, &mut b) }, RsStatus::InvalidArgument);
    assert_eq!(
        unsafe { rs_bias_bound(1.0, 1.0, 2.0, 6.0, 4.0, ptr::null_mut()) },
        RsStatus::NullPointer
    );
}

#[test]
fn gamma2_tv_closed_form_and_quadrature() {
    let mut tv = 0.0;
    assert_eq!(unsafe { rs_gamma2_tv(1.0, 2.0, &mut tv) }, RsStatus::Ok);
    assert!((tv - (-5.0f64).exp() / 2.0).abs() < 1e-15);
    // TV is scale-free: rate 2 at time 1 equals rate 1 at time 2.
    let mut tv2 = 0.0;
    assert_eq!(unsafe { rs_gamma2_tv(2.0, 1.0, &mut tv2) }, RsStatus::Ok);
    assert!((tv2 - tv).abs() < 1e-9 * tv);
    assert_eq!(unsafe { rs_gamma2_tv(-1.0, 1.0, &mut tv) }, RsStatus::InvalidArgument);
}

#[test]
fn probit_handle_lifecycle() {
    let mut h: *mut RsProbit = ptr::null_mut();
    assert_eq!(unsafe { rs_probit_lupus_new(0.0, &mut h) }, RsStatus::Ok, "{}", last_error());
    assert!(!h.is_null());
    let k = unsafe { rs_probit_dim(h) };
    assert_eq!(k, 3);
    let mut mode = [0.0; 3];
    assert_eq!(unsafe { rs_probit_mode(h, mode.as_mut_ptr(), 3) }, RsStatus::Ok);
    assert_eq!(unsafe { rs_probit_mode(h, mode.as_mut_ptr(), 2) }, RsStatus::InvalidArgument);

    // The mode beats small perturbations in every direction.
    let lp = |b: &[f64]| {
        let mut o = 0.0;
        assert_eq!(unsafe { rs_probit_log_posterior(h, b.as_ptr(), 3, &mut o) }, RsStatus::Ok);
        o
    };
    let at_mode = lp(&mode);
    for j in 0..3 {
        for s in [-1e-3, 1e-3] {
            let mut b = mode;
            b[j] += s;
            assert!(lp(&b) < at_mode);
        }
    }

    let s = rs_stream_new(3, 0);
    let n = 2000;
    let mut out = vec![0.0; n * 3];
    let mut draws = 0;
    let st = unsafe { rs_probit_sample_rrs(h, s, 2.0, 5.0, 0.78, n, out.as_mut_ptr(), &mut draws) };
    assert_eq!(st, RsStatus::Ok, "{}", last_error());
    assert!(draws > 0);
    assert!(out.iter().all(|x| x.is_finite()));
    let st = unsafe { rs_probit_sample_rrs(h, s, 2.0, -5.0, 0.78, n, out.as_mut_ptr(), &mut draws) };
    assert_eq!(st, RsStatus::InvalidArgument);
    unsafe {
        rs_stream_free(s);
        rs_probit_free(h);
    }
    assert_eq!(unsafe { rs_probit_dim(ptr::null()) }, 0);
}

#[test]
fn success_clears_last_error() {
    let mut b = 0.0;
    unsafe { rs_bias_bound(-1.0, 1.0, 2.0, 6.0, 4.0, &mut b) };
    assert!(!last_error().is_empty());
    unsafe { rs_bias_bound(1.0, 1.0, 2.0, 6.0, 4.0, &mut b) };
    assert!(last_error().is_empty());
}
