//! Free propagator kernel and Feynman-Kac estimators for the interacting
//! semigroup and the finite-cylinder partition function.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gff::{evolve_path, path_from_normals, path_normal_count, CircleField, PathSample, TimeGrid};
use crate::gmc::{circle_potential_with, stationary_path, GmcSpec, MassEvaluator, Regularization};
use crate::params::ModelParams;
use crate::rng::par_replicas;
use crate::mcmc::{pcn_chains, PcnSettings};
use crate::stats::{jackknife, mean_se, EstimatorResult};
use crate::synth::SliceEngine;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub t: f64,
    pub n_modes: usize,
    pub tail_tol: f64,
    pub value: f64,
    /// Relative bound on the omitted factor Π_{n > n_modes} (1 - e^{-2tn})^{-1}.
    pub tail_bound: f64,
}

/// Per-coordinate Mehler factor with ρ = e^{-s}:
/// (1 - ρ²)^{-1/2} exp(-q_s(x, x') / (4 sinh s)), the OU transition density
/// relative to the standard Gaussian.
pub fn mehler_factor(s: f64, x: f64, xp: f64) -> f64 {
    let rho = (-s).exp();
    let q = rho * (x * x + xp * xp) - 2.0 * x * xp;
    (-(-2.0 * s).exp_m1()).powf(-0.5) * (-q / (4.0 * s.sinh())).exp()
}

/// Upper bound on the relative size of the product tail beyond `n` modes.
pub fn kernel_tail_bound(t: f64, n: usize) -> f64 {
    let a = (-2.0 * t * (n as f64 + 1.0)).exp();
    let s = a / ((1.0 - a) * -(-2.0 * t).exp_m1());
    s.exp_m1()
}

pub fn free_kernel(t: f64, f1: &CircleField, f2: &CircleField, n_modes: usize, tail_tol: f64) -> Result<KernelEval> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    if f1.n_modes() < n_modes || f2.n_modes() < n_modes {
        return Err(Error::InvalidArgument(format!("fields need {n_modes} modes")));
    }
    let tail_bound = kernel_tail_bound(t, n_modes);
    if tail_bound > tail_tol {
        return Err(Error::TailTolNotMet { bound: tail_bound, tol: tail_tol, n_modes });
    }
    let dc = f1.zero_mode - f2.zero_mode;
    let mut log_v = -0.5 * (2.0 * PI * t).ln() - dc * dc / (2.0 * t);
    for n in 1..=n_modes {
        let s = t * n as f64;
        let (x, y) = f1.modes[n - 1];
        let (xp, yp) = f2.modes[n - 1];
        log_v += mehler_factor(s, x, xp).ln() + mehler_factor(s, y, yp).ln();
    }
    Ok(KernelEval { t, n_modes, tail_tol, value: log_v.exp(), tail_bound })
}

/// Trapezoid rule for the zero-mode integral ∫ dc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CQuadrature {
    pub c_min: f64,
    pub c_max: f64,
    pub n_nodes: usize,
}

impl CQuadrature {
    pub fn new(c_min: f64, c_max: f64, n_nodes: usize) -> Result<Self> {
        if !(c_min < c_max) || n_nodes < 8 {
            return Err(Error::InvalidArgument(format!(
                "c window [{c_min}, {c_max}] with {n_nodes} nodes"
            )));
        }
        Ok(CQuadrature { c_min, c_max, n_nodes })
    }

    /// [-8/γ, 8/γ] with 65 nodes.
    pub fn default_for(gamma: f64) -> Self {
        CQuadrature { c_min: -8.0 / gamma, c_max: 8.0 / gamma, n_nodes: 65 }
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n_nodes).map(|i| self.c_min + i as f64 * h).collect()
    }

    pub fn step(&self) -> f64 {
        (self.c_max - self.c_min) / (self.n_nodes - 1) as f64
    }

    pub fn weights(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.n_nodes)
            .map(|i| if i == 0 || i + 1 == self.n_nodes { 0.5 * h } else { h })
            .collect()
    }
}

/// log of the Feynman-Kac weight exp(-μ(e^{γc} M⁺ + e^{-γc} M⁻)) given log M±.
#[inline]
pub fn fk_log_weight(mu: f64, gamma: f64, c: f64, log_mp: f64, log_mm: f64) -> f64 {
    -mu * ((gamma * c + log_mp).exp() + (-gamma * c + log_mm).exp())
}

/// Observable evaluated on the end slice (zero mode = c + B_t).
pub type SliceObservable<'a> = dyn Fn(&CircleField) -> f64 + Sync + 'a;

fn check_span(grid: &TimeGrid, t: f64) -> Result<usize> {
    grid.node(t).ok_or(Error::GridSpanMismatch { grid_end: grid.t_end(), needed: t })
}

/// (T_t F)(c, φ) by Monte Carlo with 2D-GMC masses. At radius R this is
/// the R = 1 problem with μ_R and time t/R.
#[allow(clippy::too_many_arguments)]
pub fn feynman_kac(
    observable: &SliceObservable<'_>,
    t: f64,
    start: (f64, &CircleField),
    params: &ModelParams,
    grid: TimeGrid,
    spec: &GmcSpec,
    theta_cells: usize,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    let unit = params.at_unit_radius();
    let t1 = t / params.radius;
    let reg = spec.regularization.at_unit_radius(params.radius);
    if !(t1 > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let kt = check_span(&grid, t1)?;
    let (c, field) = start;
    if let Regularization::Circle { .. } = reg {
        return Err(Error::InvalidArgument("Feynman-Kac weights use the Fourier regularisation".into()));
    }
    let vals = par_replicas(n_samples, seed, |rng, _| -> Result<f64> {
        let path = evolve_path(field, c, TimeGrid { n_steps: kt, ..grid }, rng)?;
        let mut ev = MassEvaluator::new(unit.gamma, reg, theta_cells, 0.0, grid.dt, path.n_modes)?;
        let logs = ev.slice_logs(&path, 0, kt, None);
        let lw = fk_log_weight(unit.mu, unit.gamma, c, logs.log_mass(1, 0, kt), logs.log_mass(-1, 0, kt));
        Ok(observable(&path.slice(kt)) * lw.exp())
    });
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    Ok(EstimatorResult::from_samples(&vals, seed, params.fingerprint()))
}

/// Circle potentials of γ ≥ √2 are not defined by the 1D chaos.
pub fn circle_potential_converges(gamma: f64) -> bool {
    gamma < 2f64.sqrt()
}

/// Same semigroup through exp(-μ ∫ [e^{γ(c+B)} V₊(φ_s) + e^{-γ(c+B)} V₋(φ_s)] ds),
/// trapezoid in s.
#[allow(clippy::too_many_arguments)]
pub fn feynman_kac_circle_potential(
    observable: &SliceObservable<'_>,
    t: f64,
    start: (f64, &CircleField),
    params: &ModelParams,
    grid: TimeGrid,
    k_trunc: usize,
    n_theta: usize,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    let unit = params.at_unit_radius();
    let t1 = t / params.radius;
    if !(t1 > 0.0) {
        return Err(Error::NonPositiveTime(t));
    }
    let kt = check_span(&grid, t1)?;
    let (c, field) = start;
    if k_trunc == 0 || k_trunc > field.n_modes() {
        return Err(Error::InvalidArgument(format!("k_trunc {k_trunc}")));
    }
    let g = unit.gamma;
    let vals = par_replicas(n_samples, seed, |rng, _| -> Result<f64> {
        let path = evolve_path(field, c, TimeGrid { n_steps: kt, ..grid }, rng)?;
        let mut e = SliceEngine::new(n_theta, 0.0, k_trunc);
        let mut integral = 0.0;
        for k in 0..=kt {
            let w = if k == 0 || k == kt { 0.5 } else { 1.0 };
            let slice = path.slice(k);
            let vp = circle_potential_with(&mut e, &slice.modes, 1, k_trunc, g);
            let vm = circle_potential_with(&mut e, &slice.modes, -1, k_trunc, g);
            let z = slice.zero_mode;
            integral += w * ((g * z).exp() * vp + (-g * z).exp() * vm);
        }
        Ok(observable(&path.slice(kt)) * (-unit.mu * grid.dt * integral).exp())
    });
    let vals: Vec<f64> = vals.into_iter().collect::<Result<_>>()?;
    Ok(EstimatorResult::from_samples(&vals, seed, params.fingerprint()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionResult {
    pub t_half: f64,
    pub z: EstimatorResult,
    /// (c, mean integrand, s.e.) per quadrature node.
    pub nodes: Vec<(f64, f64, f64)>,
    /// max(integrand at c_min, c_max) / peak integrand.
    pub boundary_ratio: f64,
    pub truncation_warning: bool,
}

impl PartitionResult {
    pub fn log_z(&self) -> (f64, f64) {
        (self.z.mean.ln(), self.z.std_error / self.z.mean)
    }
}

pub const TRUNCATION_LEVEL: f64 = 1e-6;

/// Log masses M±([0, 2T]) of one path for each T in `t_halves`
/// (prefixes of one path, so the values are coupled across T).
pub fn prefix_log_masses(
    path: &PathSample,
    gamma: f64,
    reg: Regularization,
    theta_cells: usize,
    t_halves: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mut ev = MassEvaluator::new(gamma, reg, theta_cells, 0.0, path.grid.dt, path.n_modes)?;
    let ks: Vec<usize> = t_halves
        .iter()
        .map(|&t| check_span(&path.grid, 2.0 * t))
        .collect::<Result<_>>()?;
    let kmax = *ks.iter().max().unwrap_or(&0);
    ev.check_range(path, 0, kmax)?;
    let logs = ev.slice_logs(path, 0, kmax, None);
    Ok(ks.iter().map(|&k| (logs.log_mass(1, 0, k), logs.log_mass(-1, 0, k))).collect())
}

/// Integrand of Z at each quadrature node for given log masses.
pub fn z_integrand(mu: f64, gamma: f64, quad: &CQuadrature, lm: (f64, f64)) -> Vec<f64> {
    quad.nodes().iter().map(|&c| fk_log_weight(mu, gamma, c, lm.0, lm.1).exp()).collect()
}

fn summarize(t_half: f64, quad: &CQuadrature, per_node: &[Vec<f64>], seed: u64, fp: String) -> PartitionResult {
    let w = quad.weights();
    let totals: Vec<f64> = per_node
        .iter()
        .map(|row| row.iter().zip(&w).map(|(v, w)| v * w).sum())
        .collect();
    let cs = quad.nodes();
    let nodes: Vec<(f64, f64, f64)> = (0..quad.n_nodes)
        .map(|i| {
            let col: Vec<f64> = per_node.iter().map(|r| r[i]).collect();
            let (m, s) = mean_se(&col);
            (cs[i], m, s)
        })
        .collect();
    let peak = nodes.iter().map(|n| n.1).fold(0.0, f64::max);
    let edge = nodes[0].1.max(nodes[quad.n_nodes - 1].1);
    let boundary_ratio = if peak > 0.0 { edge / peak } else { f64::NAN };
    PartitionResult {
        t_half,
        z: EstimatorResult::from_samples(&totals, seed, fp),
        nodes,
        boundary_ratio,
        truncation_warning: !(boundary_ratio <= TRUNCATION_LEVEL),
    }
}

/// Z_{C_{1,T}} = ∫ dc E[exp(-μ Σ_σ e^{σγc} M^σ([0, 2T] × T))] with stationary
/// start. Paths are shared across the c nodes.
#[allow(clippy::too_many_arguments)]
pub fn partition_function(
    t_half: f64,
    params: &ModelParams,
    quad: &CQuadrature,
    dt: f64,
    spec: &GmcSpec,
    theta_cells: usize,
    n_samples: usize,
    seed: u64,
) -> Result<PartitionResult> {
    Ok(partition_curve(&[t_half], params, quad, dt, spec, theta_cells, n_samples, seed)?.remove(0))
}

/// Partition functions for several T from the same paths (prefix coupling).
#[allow(clippy::too_many_arguments)]
pub fn partition_curve(
    t_halves: &[f64],
    params: &ModelParams,
    quad: &CQuadrature,
    dt: f64,
    spec: &GmcSpec,
    theta_cells: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<PartitionResult>> {
    let unit = params.at_unit_radius();
    let r = params.radius;
    let reg = spec.regularization.at_unit_radius(r);
    let modes = match reg {
        Regularization::Fourier(n) => n,
        Regularization::Circle { .. } => {
            return Err(Error::InvalidArgument("partition function uses the Fourier regularisation".into()))
        }
    };
    let th1: Vec<f64> = t_halves.iter().map(|t| t / r).collect();
    let t_end = 2.0 * th1.iter().cloned().fold(0.0, f64::max);
    if !(t_end > 0.0) {
        return Err(Error::NonPositiveTime(t_end));
    }
    let rows = par_replicas(n_samples, seed, |rng, _| -> Result<Vec<Vec<f64>>> {
        let path = stationary_path(rng, modes, dt, t_end)?;
        let lms = prefix_log_masses(&path, unit.gamma, reg, theta_cells, &th1)?;
        Ok(lms.into_iter().map(|lm| z_integrand(unit.mu, unit.gamma, quad, lm)).collect())
    });
    let rows: Vec<Vec<Vec<f64>>> = rows.into_iter().collect::<Result<_>>()?;
    Ok(t_halves
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let per: Vec<Vec<f64>> = rows.iter().map(|r| r[i].clone()).collect();
            summarize(t, quad, &per, seed, params.fingerprint())
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogZIncrement {
    pub t_half: f64,
    pub delta: f64,
    /// ln Z(T + δ) - ln Z(T) with jackknife s.e. over chains.
    pub value: f64,
    pub std_error: f64,
    pub acceptance: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl LogZIncrement {
    /// Finite-difference λ₀ = -Δ ln Z / (2δ) with its s.e.
    pub fn lambda0(&self) -> (f64, f64) {
        (-self.value / (2.0 * self.delta), self.std_error / (2.0 * self.delta))
    }
}

fn log_z_of(mu: f64, gamma: f64, quad: &CQuadrature, lm: (f64, f64)) -> f64 {
    let lw: Vec<f64> = quad
        .nodes()
        .iter()
        .zip(quad.weights())
        .map(|(&c, w)| w.ln() + fk_log_weight(mu, gamma, c, lm.0, lm.1))
        .collect();
    let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    top + lw.iter().map(|l| (l - top).exp()).sum::<f64>().ln()
}

/// ln Z(T + δ) - ln Z(T) as ln E_T[Z_{T+δ}(path) / Z_T(path)], the average
/// taken under the finite-T measure sampled by pCN chains on the path
/// normals. The normals of the extension sit in the chain state without
/// entering the target, so they are fresh continuations of the prefix.
/// Half-lengths in radius-R coordinates.
#[allow(clippy::too_many_arguments)]
pub fn log_z_increment_pcn(
    t_half: f64,
    delta: f64,
    params: &ModelParams,
    quad: &CQuadrature,
    dt: f64,
    spec: &GmcSpec,
    theta_cells: usize,
    settings: &PcnSettings,
    seed: u64,
) -> Result<LogZIncrement> {
    if !(t_half > 0.0) || !(delta > 0.0) {
        return Err(Error::NonPositiveTime(t_half.min(delta)));
    }
    let unit = params.at_unit_radius();
    let r = params.radius;
    let reg = spec.regularization.at_unit_radius(r);
    let modes = match reg {
        Regularization::Fourier(n) => n,
        Regularization::Circle { .. } => {
            return Err(Error::InvalidArgument("partition function uses the Fourier regularisation".into()))
        }
    };
    let (th, th2) = (t_half / r, (t_half + delta) / r);
    let grid = TimeGrid::spanning(dt, 2.0 * th2)?;
    check_span(&grid, 2.0 * th)?;
    check_span(&grid, 2.0 * th2)?;
    let chains = pcn_chains(
        path_normal_count(modes, grid.n_steps),
        settings,
        seed,
        |z| -> Result<(f64, f64)> {
            let path = path_from_normals(modes, grid, z)?;
            let lms = prefix_log_masses(&path, unit.gamma, reg, theta_cells, &[th, th2])?;
            let (a, b) = (log_z_of(unit.mu, unit.gamma, quad, lms[0]), log_z_of(unit.mu, unit.gamma, quad, lms[1]));
            Ok((a, b - a))
        },
        |d| vec![d.exp()],
    )?;
    let col: Vec<f64> = chains.iter().map(|c| c.means[0]).collect();
    let (value, std_error) = jackknife(&[&col], |m| m[0].ln());
    Ok(LogZIncrement {
        t_half,
        delta,
        value,
        std_error,
        acceptance: chains.iter().map(|c| c.acceptance).sum::<f64>() / chains.len() as f64,
        n_samples: settings.chains * settings.steps,
        seed,
    })
}
