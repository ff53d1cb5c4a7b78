//! Normal-distribution special functions and incomplete gamma.
//!
//! `log_ndtr` and `inv_mills` stay accurate deep into the lower tail, where
//! the naive `ln(Φ(u))` underflows near u = -38 and destroys probit gradients.

use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
/// Below this argument the tail is evaluated through the Mills ratio.
const TAIL_SWITCH: f64 = -8.0;

#[inline]
pub fn norm_pdf(u: f64) -> f64 {
    (-0.5 * u * u - LN_SQRT_2PI).exp()
}

#[inline]
pub fn norm_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / SQRT_2)
}

/// Mills ratio Q(x)/φ(x) for x >= 8 by a Lentz continued fraction.
fn mills_ratio(x: f64) -> f64 {
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..200 {
        let a = k as f64;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

/// Φ(u) = e^q · r with `r` a moderate factor and `q ≤ 0` carrying the
/// Gaussian decay, from Cody's rational approximations. Sums of ln Φ can
/// accumulate `q` and multiply the `r` factors, taking a single log at the end.
#[inline]
pub fn ndtr_split(u: f64) -> (f64, f64) {
    match cody(u) {
        Cody::Central(p) => (0.0, p),
        Cody::Tail(q, r) if u < 0.0 => (q, r),
        Cody::Tail(q, r) => {
            let tail = q.exp() * r;
            if tail < 1e-4 {
                (-tail * (1.0 + tail * (0.5 + tail * (1.0 / 3.0 + tail * 0.25))), 1.0)
            } else {
                (0.0, 1.0 - tail)
            }
        }
    }
}

/// ln Φ(u), finite for every finite u.
pub fn log_ndtr(u: f64) -> f64 {
    match cody(u) {
        Cody::Central(p) => p.ln(),
        Cody::Tail(q, r) if u < 0.0 => q + r.ln(),
        Cody::Tail(q, r) => (-q.exp() * r).ln_1p(),
    }
}

enum Cody {
    /// Φ(u) itself, for |u| small.
    Central(f64),
    /// The smaller tail mass min(Φ(u), 1 − Φ(u)) as e^q · r.
    Tail(f64, f64),
}

#[inline]
fn cody(u: f64) -> Cody {
    const A: [f64; 5] = [
        2.235_252_035_460_683_9,
        1.610_282_310_685_558_8e2,
        1.067_689_485_460_370_9e3,
        1.815_498_125_334_356_1e4,
        6.568_233_791_820_745e-2,
    ];
    const B: [f64; 4] = [
        4.720_258_190_468_824e1,
        9.760_985_517_377_767e2,
        1.026_093_220_861_897_8e4,
        4.550_778_933_502_673e4,
    ];
    const C: [f64; 9] = [
        3.989_415_120_881_346_7e-1,
        8.883_149_794_388_376,
        9.350_665_613_217_786e1,
        5.972_702_763_948_003e2,
        2.494_537_585_290_372_7e3,
        6.848_190_450_536_283e3,
        1.160_265_143_764_735e4,
        9.842_714_838_383_978e3,
        1.076_557_677_372_019_2e-8,
    ];
    const D: [f64; 8] = [
        2.226_668_804_432_811_6e1,
        2.353_879_017_826_25e2,
        1.519_377_599_407_554_8e3,
        6.485_558_298_266_761e3,
        1.861_557_164_088_51e4,
        3.490_095_272_114_598e4,
        3.891_200_328_609_327e4,
        1.968_542_967_685_999e4,
    ];
    const P: [f64; 6] = [
        2.158_985_340_579_57e-1,
        1.274_011_611_602_473_6e-1,
        2.223_527_787_064_980_7e-2,
        1.421_619_193_227_893_5e-3,
        2.911_287_495_116_879e-5,
        2.307_344_176_494_017_3e-2,
    ];
    const Q: [f64; 5] = [
        1.284_260_096_144_911_2,
        4.682_382_124_808_651e-1,
        6.598_813_786_892_855e-2,
        3.782_396_332_027_582_4e-3,
        7.297_515_550_839_662e-5,
    ];
    const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    const SQRT_32: f64 = 5.656_854_249_492_381;

    let y = u.abs();
    if y <= 0.674_489_75 {
        let xsq = u * u;
        let mut num = A[4] * xsq;
        let mut den = xsq;
        for i in 0..3 {
            num = (num + A[i]) * xsq;
            den = (den + B[i]) * xsq;
        }
        return Cody::Central(0.5 + u * (num + A[3]) / (den + B[3]));
    }
    let r = if y <= SQRT_32 {
        let mut num = C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + C[i]) * y;
            den = (den + D[i]) * y;
        }
        (num + C[7]) / (den + D[7])
    } else {
        let xsq = 1.0 / (u * u);
        let mut num = P[5] * xsq;
        let mut den = xsq;
        for i in 0..4 {
            num = (num + P[i]) * xsq;
            den = (den + Q[i]) * xsq;
        }
        (FRAC_1_SQRT_2PI - xsq * (num + P[4]) / (den + Q[4])) / y
    };
    // Split y² so the Gaussian factor keeps full relative accuracy.
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    Cody::Tail(-0.5 * ysq * ysq - 0.5 * del, r)
}

/// Inverse Mills ratio φ(u)/Φ(u).
pub fn inv_mills(u: f64) -> f64 {
    if u >= TAIL_SWITCH {
        norm_pdf(u) / norm_cdf(u)
    } else {
        1.0 / mills_ratio(-u)
    }
}

/// Standard normal quantile: Acklam's rational approximation followed by one
/// Halley correction against `erfc`, giving close to full double precision.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut sum = 1.0 / a;
    let mut term = sum;
    let mut ap = a;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    gamma_q(0.5 * dof, 0.5 * stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((norm_cdf(-3.0) - 1.349_898_031_630_094_6e-3).abs() < 1e-17);
    }

    #[test]
    fn log_ndtr_matches_erfc_and_mills_reference() {
        let reference = |u: f64| {
            if u > 0.0 {
                (-0.5 * libm::erfc(u / SQRT_2)).ln_1p()
            } else if u >= TAIL_SWITCH {
                norm_cdf(u).ln()
            } else {
                -0.5 * u * u - LN_SQRT_2PI + mills_ratio(-u).ln()
            }
        };
        for i in 0..=3000 {
            let u = -60.0 + i as f64 * 0.0237;
            let (got, want) = (log_ndtr(u), reference(u));
            assert!((got - want).abs() <= 1e-13 * want.abs().max(1e-300) + 1e-300, "{u}: {got} vs {want}");
        }
    }

    #[test]
    fn log_ndtr_deep_tail_matches_mills_asymptotic() {
        // ln Φ(-40) ≈ -800 - ln(40 √(2π)) + ln(1 - 1/1600 + 3/1600² - 15/1600³)
        let u: f64 = -40.0;
        let series = 1.0 - 1.0 / (u * u) + 3.0 / u.powi(4) - 15.0 / u.powi(6) + 105.0 / u.powi(8);
        let expected = -0.5 * u * u - (-u * (2.0 * PI).sqrt()).ln() + series.ln();
        let got = log_ndtr(u);
        assert!(got.is_finite());
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn split_form_reassembles_log_ndtr() {
        for i in 0..=2000 {
            let u = -50.0 + i as f64 * 0.0311;
            let (q, r) = ndtr_split(u);
            let want = log_ndtr(u);
            assert!((q + r.ln() - want).abs() <= 1e-13 * want.abs() + 3e-16, "{u}");
        }
    }

    #[test]
    fn log_ndtr_upper_tail_is_tiny_negative() {
        let v = log_ndtr(10.0);
        assert!(v < 0.0 && v > -1e-22);
    }

    #[test]
    fn inverse_mills_at_zero_and_tail() {
        assert!((inv_mills(0.0) - (2.0 / PI).sqrt()).abs() < 1e-15);
        // φ/Φ ≈ -u for very negative u
        let u = -30.0;
        assert!((inv_mills(u) / -u - 1.0).abs() < 2e-3);
        assert!(inv_mills(-50.0).is_finite());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.025, 0.3, 0.5, 0.8, 0.975, 0.999_999] {
            let z = norm_quantile(p);
            assert!((norm_cdf(z) - p).abs() < 1e-9 * p.max(1e-3), "p = {p}");
        }
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
    }

    #[test]
    fn ln_gamma_and_incomplete_gamma() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-12);
        // Q(1, x) = e^{-x}; Q(2, x) = e^{-x}(1 + x)
        assert!((gamma_q(1.0, 2.5) - (-2.5f64).exp()).abs() < 1e-14);
        assert!((gamma_q(2.0, 0.7) - (-0.7f64).exp() * 1.7).abs() < 1e-14);
        assert!((gamma_q(2.0, 9.0) - (-9.0f64).exp() * 10.0).abs() < 1e-14);
        // chi-square with 2 dof: sf = e^{-x/2}
        assert!((chi_square_sf(3.0, 2.0) - (-1.5f64).exp()).abs() < 1e-14);
    }
}
