//! pCN chains against independent weighted replicas in a regime where the
//! weights stay benign (small μ, short cylinder).

use sinhgordon::correlations::{two_point_covariance, two_point_covariance_pcn, FiniteCylinder};
use sinhgordon::gmc::{GmcSpec, Regularization};
use sinhgordon::mcmc::PcnSettings;
use sinhgordon::params::validate_params;
use sinhgordon::propagator::{log_z_increment_pcn, partition_curve, CQuadrature};
use sinhgordon::stats::z_diff;

#[test]
fn two_point_matches_independent_replicas() {
    let p = validate_params(1.0, 0.05, 1.0).unwrap();
    let cyl = FiniteCylinder {
        t_half: 1.0,
        quad: CQuadrature::default_for(1.0),
        dt: 1.0 / 32.0,
        theta_cells: 64,
        regularization: Regularization::Fourier(16),
        n_modes: 16,
    };
    let seps = [0.25, 0.5, 1.0];
    let st = PcnSettings { chains: 16, burn_in: 750, steps: 3000, starts: 8, target_accept: 0.3 };
    let a = two_point_covariance_pcn((0.5, 0.0), (0.5, 0.0), -0.5, &seps, &cyl, &p, &st, 5).unwrap();
    let b = two_point_covariance((0.5, 0.0), (0.5, 0.0), -0.5, &seps, &cyl, &p, 20_000, 6).unwrap();
    for ((ca, sa), (cb, sb)) in a.covariance.iter().zip(&b.covariance) {
        assert!(z_diff(*ca, *sa, *cb, *sb) < 3.0, "{ca}±{sa} vs {cb}±{sb}");
    }
    let (oa, ob) = (a.one_point_first, b.one_point_first);
    assert!(z_diff(oa.0, oa.1, ob.0, ob.1) < 3.0, "{oa:?} vs {ob:?}");
    assert_eq!(a.n_samples, 48_000);
    assert!(a.acceptance.unwrap() > 0.0);
}

#[test]
fn log_z_increment_matches_independent_replicas() {
    let p = validate_params(1.0, 0.05, 1.0).unwrap();
    let quad = CQuadrature::default_for(1.0);
    let spec = GmcSpec::fourier(1, 16);
    let (t, d) = (0.5, 0.25);
    let st = PcnSettings { chains: 16, burn_in: 500, steps: 2000, starts: 8, target_accept: 0.3 };
    let inc = log_z_increment_pcn(t, d, &p, &quad, 1.0 / 32.0, &spec, 64, &st, 8).unwrap();
    let curve = partition_curve(&[t, t + d], &p, &quad, 1.0 / 32.0, &spec, 64, 20_000, 9).unwrap();
    let (l1, s1) = curve[0].log_z();
    let (l2, s2) = curve[1].log_z();
    // Prefix coupling correlates the two logs positively, so the
    // quadrature sum overstates the error of the direct difference.
    let direct = l2 - l1;
    let z = z_diff(inc.value, inc.std_error, direct, (s1 * s1 + s2 * s2).sqrt());
    assert!(z < 3.0, "pCN {} ± {} vs direct {direct} ({s1}, {s2})", inc.value, inc.std_error);
    let (lam, lam_se) = inc.lambda0();
    assert!(lam > 0.0 && lam_se > 0.0);
}
