//! λ₀, a ground-state marginal and the spectral gap from estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmc::{stationary_path, Regularization};
use crate::params::ModelParams;
use crate::propagator::{prefix_log_masses, z_integrand, CQuadrature};
use crate::rng::par_replicas;
use crate::stats::{mean_se, weighted_line_fit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub lambda0: f64,
    pub lambda0_se: f64,
    pub gap: Option<(f64, f64)>,
    pub window: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

fn check_window(xs: &[f64]) -> Result<()> {
    if xs.len() < 3 {
        return Err(Error::DegenerateFit(format!("need >= 3 points, got {}", xs.len())));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DegenerateFit("abscissae must increase strictly".into()));
    }
    Ok(())
}

/// Slope of log Z against 2T: λ₀ = -slope.
pub fn lambda0_fit(t_values: &[f64], log_z: &[(f64, f64)]) -> Result<SpectralEstimate> {
    check_window(t_values)?;
    let x: Vec<f64> = t_values.iter().map(|t| 2.0 * t).collect();
    let y: Vec<f64> = log_z.iter().map(|v| v.0).collect();
    let se: Vec<f64> = log_z.iter().map(|v| v.1).collect();
    let f = weighted_line_fit(&x, &y, &se)?;
    Ok(SpectralEstimate {
        lambda0: -f.slope,
        lambda0_se: f.slope_se,
        gap: None,
        window: t_values.to_vec(),
        residuals: f.residuals,
        r_squared: f.r_squared,
    })
}

/// Slope of log|Cov| against separation: gap = -slope.
pub fn spectral_gap_fit(separations: &[f64], covariances: &[(f64, f64)]) -> Result<SpectralEstimate> {
    check_window(separations)?;
    if covariances.len() != separations.len() {
        return Err(Error::DegenerateFit("length mismatch".into()));
    }
    for (s, &(c, e)) in separations.iter().zip(covariances) {
        if !(c.abs() > 3.0 * e) {
            return Err(Error::SignalLost(*s));
        }
    }
    let y: Vec<f64> = covariances.iter().map(|c| c.0.abs().ln()).collect();
    let se: Vec<f64> = covariances.iter().map(|c| c.1 / c.0.abs()).collect();
    let f = weighted_line_fit(separations, &y, &se)?;
    Ok(SpectralEstimate {
        lambda0: f64::NAN,
        lambda0_se: f64::NAN,
        gap: Some((-f.slope, f.slope_se)),
        window: separations.to_vec(),
        residuals: f.residuals,
        r_squared: f.r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingProbe {
    pub slope: f64,
    pub slope_se: f64,
    /// Large-R asymptotics are conjectural; never a pass/fail quantity.
    pub experimental: bool,
}

/// Log-log slope of λ₀(R) against R.
pub fn lambda0_scaling_probe(r_values: &[f64], lambda0: &[(f64, f64)]) -> Result<ScalingProbe> {
    check_window(r_values)?;
    if lambda0.iter().any(|l| !(l.0 > 0.0)) {
        return Err(Error::DegenerateFit("λ₀ must be positive for a log-log fit".into()));
    }
    let x: Vec<f64> = r_values.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = lambda0.iter().map(|l| l.0.ln()).collect();
    let se: Vec<f64> = lambda0.iter().map(|l| l.1 / l.0).collect();
    let f = weighted_line_fit(&x, &y, &se)?;
    Ok(ScalingProbe { slope: f.slope, slope_se: f.slope_se, experimental: true })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateProfile {
    pub t: f64,
    /// Zero-mode bin centres (the quadrature nodes).
    pub c_centers: Vec<f64>,
    /// x₁ bin edges.
    pub x1_edges: Vec<f64>,
    /// `values[i][j]` for c bin i and x₁ bin j; sums to 1.
    pub values: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    /// Bins with no start point falling in them.
    pub empty_bins: usize,
}

impl GroundStateProfile {
    /// Marginal over x₁ bins (sum over j).
    pub fn c_marginal(&self) -> Vec<f64> {
        self.values.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("c,x1_lo,x1_hi,value,std_error\n");
        for (i, c) in self.c_centers.iter().enumerate() {
            for j in 0..self.x1_edges.len() - 1 {
                s.push_str(&format!(
                    "{c},{},{},{},{}\n",
                    self.x1_edges[j],
                    self.x1_edges[j + 1],
                    self.values[i][j],
                    self.std_errors[i][j]
                ));
            }
        }
        s
    }
}

/// Binned proxy for ψ₀ in (c, x₁): the conditional mean of the Feynman-Kac
/// weight of [0, T] given the start (c, x₁), normalised to unit total. The
/// e^{λ₀T} factor cancels in the normalisation.
#[allow(clippy::too_many_arguments)]
pub fn ground_state_profile(
    t: f64,
    params: &ModelParams,
    quad: &CQuadrature,
    n_modes: usize,
    dt: f64,
    theta_cells: usize,
    x1_edges: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<GroundStateProfile> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if x1_edges.len() < 2 || x1_edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("x1 edges must increase".into()));
    }
    let unit = params.at_unit_radius();
    let t1 = t / params.radius;
    let nb = x1_edges.len() - 1;
    let rows = par_replicas(n_samples, seed, |rng, _| -> Result<(Option<usize>, Vec<f64>)> {
        let path = stationary_path(rng, n_modes, dt, t1)?;
        let x1 = path.initial.modes[0].0;
        let bin = x1_edges.windows(2).position(|w| w[0] <= x1 && x1 < w[1]);
        // [0, t] is the prefix of length 2 · (t/2).
        let lm = prefix_log_masses(&path, unit.gamma, Regularization::Fourier(n_modes), theta_cells, &[t1 / 2.0])?[0];
        Ok((bin, z_integrand(unit.mu, unit.gamma, quad, lm)))
    });
    let rows: Vec<(Option<usize>, Vec<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let nc = quad.n_nodes;
    let mut values = vec![vec![0.0; nb]; nc];
    let mut ses = vec![vec![0.0; nb]; nc];
    let mut empty = 0;
    for j in 0..nb {
        let members: Vec<&Vec<f64>> = rows.iter().filter(|r| r.0 == Some(j)).map(|r| &r.1).collect();
        if members.is_empty() {
            empty += nc;
            continue;
        }
        for i in 0..nc {
            let col: Vec<f64> = members.iter().map(|m| m[i]).collect();
            let (m, s) = mean_se(&col);
            values[i][j] = m;
            ses[i][j] = s;
        }
    }
    let total: f64 = values.iter().flatten().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("profile has zero total weight".into()));
    }
    for (row, srow) in values.iter_mut().zip(ses.iter_mut()) {
        for (v, s) in row.iter_mut().zip(srow.iter_mut()) {
            *v /= total;
            *s /= total;
        }
    }
    Ok(GroundStateProfile {
        t,
        c_centers: quad.nodes(),
        x1_edges: x1_edges.to_vec(),
        values,
        std_errors: ses,
        empty_bins: empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_lambda0() {
        let ts = [1.0, 1.5, 2.0, 3.0];
        let lz: Vec<(f64, f64)> = ts.iter().map(|t| (-2.0 * 0.7 * t + 4.2, 0.0)).collect();
        let e = lambda0_fit(&ts, &lz).unwrap();
        assert!((e.lambda0 - 0.7).abs() < 1e-13);
        assert_eq!(e.lambda0_se, 0.0);
    }

    #[test]
    fn lambda0_shift_invariant() {
        let ts = [1.0, 1.5, 2.0];
        let a = [(-1.0, 0.1), (-1.9, 0.2), (-2.7, 0.15)];
        let b: Vec<(f64, f64)> = a.iter().map(|v| (v.0 + 3.3, v.1)).collect();
        let (ea, eb) = (lambda0_fit(&ts, &a).unwrap(), lambda0_fit(&ts, &b).unwrap());
        assert!((ea.lambda0 - eb.lambda0).abs() < 1e-12);
        assert_eq!(ea.lambda0_se, eb.lambda0_se);
    }

    #[test]
    fn fit_needs_three_increasing() {
        assert!(lambda0_fit(&[1.0, 2.0], &[(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(lambda0_fit(&[1.0, 2.0, 2.0], &[(0.0, 1.0); 3]).is_err());
    }

    #[test]
    fn synthetic_gap() {
        let s: [f64; 5] = [1.0, 1.5, 2.0, 2.5, 3.0];
        let c: Vec<(f64, f64)> = s.iter().map(|t| (0.5 * (-1.3 * t).exp(), 0.0)).collect();
        // zero s.e. counts as signal present
        let c: Vec<(f64, f64)> = c.iter().map(|v| (v.0, v.0 * 1e-3)).collect();
        let g = spectral_gap_fit(&s, &c).unwrap().gap.unwrap();
        assert!((g.0 - 1.3).abs() < 1e-12);
        let scaled: Vec<(f64, f64)> = c.iter().map(|v| (7.0 * v.0, 7.0 * v.1)).collect();
        let g2 = spectral_gap_fit(&s, &scaled).unwrap().gap.unwrap();
        assert!((g.0 - g2.0).abs() < 1e-12 && (g.1 - g2.1).abs() < 1e-15);
    }

    #[test]
    fn gap_signal_lost() {
        let s = [1.0, 2.0, 3.0];
        let c = [(0.1, 0.01), (0.05, 0.01), (0.01, 0.01)];
        assert!(matches!(spectral_gap_fit(&s, &c), Err(Error::SignalLost(_))));
    }

    #[test]
    fn scaling_probe_synthetic() {
        let r = [1.0, 2.0, 4.0];
        let l: Vec<(f64, f64)> = r.iter().map(|r| (3.0 * r * r, 0.1 * r * r)).collect();
        let p = lambda0_scaling_probe(&r, &l).unwrap();
        assert!((p.slope - 2.0).abs() < 1e-12);
        let l2: Vec<(f64, f64)> = l.iter().map(|v| (v.0, 2.0 * v.1)).collect();
        let p2 = lambda0_scaling_probe(&r, &l2).unwrap();
        assert!((p2.slope_se - 2.0 * p.slope_se).abs() < 1e-12);
        assert!(p.experimental);
    }
}
