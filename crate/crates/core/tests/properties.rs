use proptest::prelude::*;

use sinhgordon::gff::{covariance_oracle, ou_transition, ou_two_half_steps, CovKind, CircleField};
use sinhgordon::gmc::{circle_potential, gmc_mass, stationary_path, GmcSpec, Region};
use sinhgordon::lz::{lz_one_point, lz_prefactor_base};
use sinhgordon::params::{q_of, validate_params, ModelParams};
use sinhgordon::propagator::{fk_log_weight, free_kernel, mehler_factor};
use sinhgordon::rng::replica_rng;
use sinhgordon::spectral::{lambda0_fit, spectral_gap_fit};
use sinhgordon::stats::EstimatorResult;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.05f64..1.95, 0.01f64..10.0, 0.1f64..10.0).prop_map(|(g, m, r)| validate_params(g, m, r).unwrap())
}

fn field(n: usize) -> impl Strategy<Value = CircleField> {
    (-3.0f64..3.0, prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), n))
        .prop_map(|(zero_mode, modes)| CircleField { zero_mode, modes })
}

fn result(fp: &'static str) -> impl Strategy<Value = EstimatorResult> {
    (-100.0f64..100.0, 0.0f64..10.0, 1u64..10_000).prop_map(move |(mean, se, n)| EstimatorResult {
        mean,
        std_error: se,
        n_samples: n,
        seed: 0,
        fingerprint: fp.into(),
        wall_ms: 0,
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn unit_radius_round_trip(p in params()) {
        let back = ModelParams::from_unit_radius(&p.at_unit_radius(), p.radius).unwrap();
        prop_assert!(close(back.gamma, p.gamma, 1e-12));
        prop_assert!(close(back.mu, p.mu, 1e-12));
        prop_assert!(close(back.radius, p.radius, 1e-12));
        prop_assert!(close(back.mu_scaled, p.mu_scaled, 1e-12));
    }

    #[test]
    fn q_exceeds_two(g in 1e-3f64..(2.0 - 1e-3)) {
        prop_assert!(q_of(g) > 2.0);
    }

    #[test]
    fn ou_half_steps_compose(n in 1usize..256, dt in 1e-4f64..4.0) {
        let (a, v) = ou_transition(n, dt);
        let (a2, v2) = ou_two_half_steps(n, dt);
        prop_assert!((a - a2).abs() < 1e-12);
        prop_assert!((v - v2).abs() < 1e-12);
    }

    #[test]
    fn covariance_is_symmetric(
        kind in prop_oneof![Just(CovKind::Slice), Just(CovKind::DirichletY), Just(CovKind::Harmonic)],
        t in 0.0f64..3.0, th in 0.0f64..6.28, t2 in 0.0f64..3.0, th2 in 0.0f64..6.28,
    ) {
        let a = covariance_oracle(kind, t, th, t2, th2);
        let b = covariance_oracle(kind, t2, th2, t, th);
        match (a, b) {
            (Ok(x), Ok(y)) => prop_assert!(close(x, y, 1e-12), "{x} {y}"),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
        }
    }

    #[test]
    fn mehler_factor_is_symmetric(s in 0.01f64..5.0, x in -4.0f64..4.0, xp in -4.0f64..4.0) {
        prop_assert_eq!(mehler_factor(s, x, xp), mehler_factor(s, xp, x));
    }

    #[test]
    fn free_kernel_is_symmetric(t in 0.2f64..2.0, f1 in field(32), f2 in field(32)) {
        let a = free_kernel(t, &f1, &f2, 32, 1e-3).unwrap();
        let b = free_kernel(t, &f2, &f1, 32, 1e-3).unwrap();
        prop_assert_eq!(a.value, b.value);
        prop_assert!(a.value.is_finite() && a.value >= 0.0);
    }

    #[test]
    fn fk_weight_is_a_contraction(
        mu in 0.01f64..10.0, gamma in 0.05f64..1.95, c in -16.0f64..16.0,
        lp in -50.0f64..20.0, lm in -50.0f64..20.0,
    ) {
        let w = fk_log_weight(mu, gamma, c, lp, lm);
        prop_assert!(w <= 0.0 && !w.is_nan());
    }

    #[test]
    fn circle_potential_sign_symmetry(f in field(16), k in 1usize..16) {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let vm = circle_potential(&f, -1, k, &p, 64).unwrap();
        let vp = circle_potential(&f.negated(), 1, k, &p, 64).unwrap();
        prop_assert!(close(vm, vp, 1e-14), "{vm} {vp}");
    }

    #[test]
    fn merge_is_associative(a in result("x"), b in result("x"), c in result("x")) {
        let left = a.merge(&b).unwrap().merge(&c).unwrap();
        let right = a.merge(&b.merge(&c).unwrap()).unwrap();
        prop_assert_eq!(left.n_samples, right.n_samples);
        prop_assert!(close(left.mean, right.mean, 1e-12));
        prop_assert!(close(left.std_error, right.std_error, 1e-12));
    }

    #[test]
    fn lambda0_fit_ignores_offsets(
        slope in -5.0f64..5.0, shift in -50.0f64..50.0,
        noise in prop::collection::vec(-0.1f64..0.1, 4),
    ) {
        let ts = [1.0, 1.5, 2.0, 3.0];
        let lz: Vec<(f64, f64)> = ts.iter().zip(&noise).map(|(t, e)| (slope * 2.0 * t + e, 0.05)).collect();
        let shifted: Vec<(f64, f64)> = lz.iter().map(|&(v, s)| (v + shift, s)).collect();
        let a = lambda0_fit(&ts, &lz).unwrap();
        let b = lambda0_fit(&ts, &shifted).unwrap();
        prop_assert!((a.lambda0 - b.lambda0).abs() < 1e-9);
        prop_assert!((a.lambda0_se - b.lambda0_se).abs() < 1e-12);
        prop_assert!((a.lambda0 + slope).abs() < 0.2);
    }

    #[test]
    fn gap_fit_ignores_scale(rate in 0.1f64..3.0, scale in 1e-6f64..1e6, sign in prop_oneof![Just(1.0), Just(-1.0)]) {
        let seps = [0.5, 1.0, 1.5, 2.0];
        let cov: Vec<(f64, f64)> = seps.iter().map(|s| ((-rate * s).exp(), 0.01 * (-rate * s).exp())).collect();
        let scaled: Vec<(f64, f64)> = cov.iter().map(|&(c, e)| (sign * scale * c, scale * e)).collect();
        let a = spectral_gap_fit(&seps, &cov).unwrap();
        let b = spectral_gap_fit(&seps, &scaled).unwrap();
        let (ga, gb) = (a.gap.unwrap(), b.gap.unwrap());
        prop_assert!((ga.0 - gb.0).abs() < 1e-9 && (ga.0 - rate).abs() < 1e-9);
        prop_assert!((ga.1 - gb.1).abs() < 1e-9);
    }

    #[test]
    fn lz_prefactor_is_positive(g in 0.01f64..1.99) {
        prop_assert!(lz_prefactor_base(&validate_params(g, 1.0, 1.0).unwrap()) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_sign_symmetry_per_path(seed in any::<u64>(), n in 4usize..24, gamma in 0.2f64..1.8) {
        let p = validate_params(gamma, 1.0, 1.0).unwrap();
        let path = stationary_path(&mut replica_rng(seed, 0), n, 0.125, 1.0).unwrap();
        let region = Region::strip(0.25, 0.75);
        let minus = gmc_mass(&path, &region, &GmcSpec::fourier(-1, n), &p, 32).unwrap();
        let plus = gmc_mass(&path.negated(), &region, &GmcSpec::fourier(1, n), &p, 32).unwrap();
        prop_assert!(close(minus, plus, 1e-12), "{minus} {plus}");
        prop_assert!(minus >= 0.0);
    }

    #[test]
    fn lz_is_even_in_alpha(alpha in 0.0f64..2.4) {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let a = lz_one_point(&p, alpha, 1e-10).unwrap();
        let b = lz_one_point(&p, -alpha, 1e-10).unwrap();
        prop_assert!(close(a.value, b.value, 1e-12));
        prop_assert!(a.value > 0.0 && a.error_bound >= 0.0);
    }
}
