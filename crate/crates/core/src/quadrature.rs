//! Adaptive Gauss–Kronrod quadrature used for deterministic reference values
//! (normalizing constants, oracle means, TV distances).

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_20,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// ∫ₐᵇ f by globally adaptive bisection until the summed error estimate is
/// below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (r, e) = gk15(&f, a, b);
    let mut segs = vec![(a, b, r, e)];
    for _ in 0..5000 {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .unwrap();
        let (lo, hi, _, _) = segs.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (r1, e1) = gk15(&f, lo, mid);
        let (r2, e2) = gk15(&f, mid, hi);
        segs.push((lo, mid, r1, e1));
        segs.push((mid, hi, r2, e2));
    }
    let mut parts: Vec<f64> = segs.iter().map(|s| s.2).collect();
    parts.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    parts.iter().sum()
}

/// ∫ₐ^∞ f via the substitution x = a + s/(1−s).
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    integrate(
        |s| {
            if s >= 1.0 {
                return 0.0;
            }
            let one = 1.0 - s;
            let v = f(a + s / one) / (one * one);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// ∫∫ over a rectangle by nested adaptive quadrature.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    (x0, x1): (f64, f64),
    (y0, y1): (f64, f64),
    rel_tol: f64,
) -> f64 {
    integrate(
        |x| integrate(|y| f(x, y), y0, y1, 1e-14, rel_tol * 0.1),
        x0,
        x1,
        1e-13,
        rel_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14);
        assert!((v - 0.0).abs() < 1e-13);
        let v = integrate(|x| x.powi(6), -1.0, 1.0, 1e-14, 1e-14);
        assert!((v - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_exponential_moments() {
        let m3 = integrate_to_inf(|x| x.powi(3) * (-x).exp(), 0.0, 1e-13, 1e-13);
        assert!((m3 - 6.0).abs() < 1e-10);
        let tail = integrate_to_inf(|x| (-x).exp(), 2.0, 1e-14, 1e-13);
        assert!((tail - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn kink_is_handled_adaptively() {
        let v = integrate(|x: f64| x.abs(), -1.0, 2.0, 1e-12, 1e-12);
        assert!((v - 2.5).abs() < 1e-10);
    }

    #[test]
    fn gaussian_square() {
        let v = integrate_2d(
            |x, y| (-(x * x + y * y) / 2.0).exp(),
            (-10.0, 10.0),
            (-10.0, 10.0),
            1e-11,
        );
        assert!((v - 2.0 * std::f64::consts::PI).abs() < 1e-8);
    }
}
