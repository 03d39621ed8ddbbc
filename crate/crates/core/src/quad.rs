//! Adaptive Gauss-Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One 15-point rule on [a, b]: (Kronrod value, |Kronrod - Gauss|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let s = f(c - h * XGK[j]) + f(c + h * XGK[j]);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Global adaptive bisection until the summed error estimate is below
/// `abs_tol`. Initial breakpoints seed the interval list.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], abs_tol: f64, max_intervals: usize) -> Result<QuadResult> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("quadrature breakpoints must increase".into()));
    }
    let mut parts: Vec<(f64, f64, f64, f64)> = breaks
        .windows(2)
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        let value: f64 = parts.iter().map(|p| p.2).sum();
        if !value.is_finite() {
            return Err(Error::QuadratureFailure("non-finite integrand".into()));
        }
        if err <= abs_tol {
            return Ok(QuadResult { value, error: err, intervals: parts.len() });
        }
        if parts.len() >= max_intervals {
            return Err(Error::QuadratureFailure(format!(
                "error estimate {err:e} above {abs_tol:e} after {} intervals",
                parts.len()
            )));
        }
        let (i, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = parts.swap_remove(i);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        // Kronrod 15 integrates degree 22 exactly.
        for d in 0..=22 {
            let (v, _) = gk15(&|x: f64| x.powi(d), 0.0, 1.0);
            assert!((v - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "degree {d}");
        }
        // Gauss 7 part is exact to degree 13.
        let (_, e) = gk15(&|x: f64| x.powi(13), -0.3, 1.7);
        assert!(e < 1e-12);
    }

    #[test]
    fn adaptive_peaked() {
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), &[-1.0, 1.0], 1e-10, 500).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value - exact).abs() < 1e-9);
    }

    #[test]
    fn bad_breaks() {
        assert!(integrate(|x| x, &[1.0], 1e-8, 10).is_err());
        assert!(integrate(|x| x, &[1.0, 0.0], 1e-8, 10).is_err());
    }

    #[test]
    fn budget_exhausted() {
        let r = integrate(|x: f64| (1.0 / x).sin(), &[1e-9, 1.0], 1e-14, 8);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
