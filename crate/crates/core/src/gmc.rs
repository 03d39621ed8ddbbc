//! Renormalised multiplicative chaos masses on cylinder strips.
//!
//! Time integrals use the trapezoid rule over grid nodes (the path is only
//! known there); angles use J midpoint cells. Everything is accumulated in
//! log space: a mass is carried as its logarithm until the caller needs it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::correlations::InsertionSet;
use crate::error::{Error, Result};
use crate::gff::{evolve_path, sample_circle_field, CircleField, CircleStencil, FieldInit, PathSample, TimeGrid};
use crate::params::ModelParams;
use crate::rng::{derive_seed, par_replicas, Rng};
use crate::stats::{mean_se, EstimatorResult};
use crate::synth::{log_sum_exp, SliceEngine};

pub const DEFAULT_THETA_CELLS: usize = 128;
pub const DEFAULT_CIRCLE_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularization {
    Fourier(usize),
    Circle { epsilon: f64, points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmcSpec {
    /// +1 or -1.
    pub sigma: i8,
    pub regularization: Regularization,
}

impl GmcSpec {
    pub fn fourier(sigma: i8, n: usize) -> Self {
        GmcSpec { sigma, regularization: Regularization::Fourier(n) }
    }

    pub fn circle(sigma: i8, epsilon: f64) -> Self {
        GmcSpec {
            sigma,
            regularization: Regularization::Circle { epsilon, points: DEFAULT_CIRCLE_POINTS },
        }
    }

    pub fn renorm_constant(&self) -> f64 {
        self.regularization.renorm_constant()
    }

    pub fn negated(&self) -> Self {
        GmcSpec { sigma: -self.sigma, ..*self }
    }
}

impl Regularization {
    /// H_N for Fourier(N), log(1/ε) for the circle average.
    pub fn renorm_constant(&self) -> f64 {
        match *self {
            Regularization::Fourier(n) => renorm_constant(n),
            Regularization::Circle { epsilon, .. } => -epsilon.ln(),
        }
    }

    /// The same regularisation expressed on the R = 1 clock.
    pub fn at_unit_radius(&self, radius: f64) -> Self {
        match *self {
            Regularization::Fourier(n) => Regularization::Fourier(n),
            Regularization::Circle { epsilon, points } => {
                Regularization::Circle { epsilon: epsilon / radius, points }
            }
        }
    }
}

/// Harmonic number H_N, summed from the small end.
pub fn renorm_constant(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub t_min: f64,
    pub t_max: f64,
    /// Arc [θ_a, θ_b); `None` is the full circle.
    pub arc: Option<(f64, f64)>,
}

impl Region {
    pub fn strip(t_min: f64, t_max: f64) -> Self {
        Region { t_min, t_max, arc: None }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Region {
            t_min: self.t_min * factor,
            t_max: self.t_max * factor,
            arc: self.arc.map(|(a, b)| (a * factor, b * factor)),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_min <= self.t_max) || self.t_min < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "bad region times [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if let Some((a, b)) = self.arc {
            if !(0.0 <= a && a < b && b <= 2.0 * PI + 1e-12) {
                return Err(Error::InvalidArgument(format!("bad arc [{a}, {b})")));
            }
        }
        Ok(())
    }

    fn in_arc(&self, theta: f64) -> bool {
        match self.arc {
            None => true,
            Some((a, b)) => {
                let t = theta.rem_euclid(2.0 * PI);
                a <= t && t < b
            }
        }
    }
}

/// Mode count, time step (R = 1 clock) and angular resolution of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSetup {
    pub n_modes: usize,
    pub dt: f64,
    pub theta_cells: usize,
}

impl MassSetup {
    /// Modes needed in the path for a given regularisation.
    pub fn path_modes(&self, reg: &Regularization) -> usize {
        match *reg {
            Regularization::Fourier(n) => n.max(1),
            Regularization::Circle { .. } => self.n_modes,
        }
    }
}

/// Per-slice logarithms of the angular integral of the density, both signs:
/// `plus[i] = log(Δθ Σ_j e^{γ(B + φ) + w} ) - γ²C/2` at node `k_lo + i`.
#[derive(Debug, Clone)]
pub struct SliceLogs {
    pub k_lo: usize,
    pub dt: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl SliceLogs {
    /// Log of the trapezoid mass over nodes `ka..=kb`; -inf for ka == kb.
    pub fn log_mass(&self, sigma: i8, ka: usize, kb: usize) -> f64 {
        if kb <= ka {
            return f64::NEG_INFINITY;
        }
        let v = if sigma > 0 { &self.plus } else { &self.minus };
        let lo = ka - self.k_lo;
        let hi = kb - self.k_lo;
        let half = 0.5f64.ln();
        self.dt.ln()
            + log_sum_exp((lo..=hi).map(|i| if i == lo || i == hi { v[i] + half } else { v[i] }))
    }
}

/// Optional per-cell log weights `u[k][j]`; the density for sign σ is
/// multiplied by e^{σ u}.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub k_lo: usize,
    pub cells: usize,
    pub u: Vec<f64>,
}

pub struct MassEvaluator {
    gamma: f64,
    reg: Regularization,
    stencil: Option<CircleStencil>,
    pub engine: SliceEngine,
    renorm: f64,
    mask: Vec<bool>,
}

impl MassEvaluator {
    pub fn new(gamma: f64, reg: Regularization, theta_cells: usize, theta0: f64, dt: f64, path_modes: usize) -> Result<Self> {
        if theta_cells < 4 {
            return Err(Error::InvalidArgument(format!("theta_cells {theta_cells} < 4")));
        }
        let stencil = match reg {
            Regularization::Fourier(n) => {
                if n == 0 || n > path_modes {
                    return Err(Error::InvalidArgument(format!("Fourier({n}) with {path_modes} path modes")));
                }
                None
            }
            Regularization::Circle { epsilon, points } => {
                Some(CircleStencil::new(epsilon, dt, points, path_modes)?)
            }
        };
        Ok(MassEvaluator {
            gamma,
            reg,
            stencil,
            engine: SliceEngine::new(theta_cells, theta0, path_modes),
            renorm: reg.renorm_constant(),
            mask: vec![true; theta_cells],
        })
    }

    pub fn set_arc(&mut self, region: &Region) {
        let thetas: Vec<f64> = (0..self.engine.cells()).map(|j| self.engine.theta(j)).collect();
        self.mask = thetas.iter().map(|&t| region.in_arc(t)).collect();
    }

    /// Time margin (in steps) the regularisation needs on each side.
    pub fn margin(&self) -> usize {
        self.stencil.as_ref().map_or(0, |s| s.half_width)
    }

    pub fn check_range(&self, path: &PathSample, k_lo: usize, k_hi: usize) -> Result<()> {
        let h = self.margin();
        if k_lo < h || k_hi + h > path.grid.n_steps {
            return Err(Error::RegionOutsideGrid {
                t_min: path.grid.time(k_lo),
                t_max: path.grid.time(k_hi),
                t_end: path.grid.t_end(),
            });
        }
        Ok(())
    }

    /// Regularised fluctuation field on the angle cells at node k.
    pub fn field(&mut self, path: &PathSample, k: usize) -> &[f64] {
        match (self.reg, &self.stencil) {
            (Regularization::Fourier(n), _) => self.engine.fourier(path, k, n),
            (_, Some(st)) => self.engine.circle(path, k, st),
            _ => unreachable!(),
        }
    }

    pub fn slice_logs(&mut self, path: &PathSample, k_lo: usize, k_hi: usize, weights: Option<&WeightTable>) -> SliceLogs {
        let g = self.gamma;
        let ldt = self.engine.d_theta().ln();
        let shift = -0.5 * g * g * self.renorm;
        let mut plus = Vec::with_capacity(k_hi - k_lo + 1);
        let mut minus = Vec::with_capacity(k_hi - k_lo + 1);
        let mask = self.mask.clone();
        for k in k_lo..=k_hi {
            let b = path.brownian[k];
            let w = weights.map(|t| {
                let s = (k - t.k_lo) * t.cells;
                &t.u[s..s + t.cells]
            });
            let phi = self.field(path, k);
            let (mut mp, mut mm) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for (j, &v) in phi.iter().enumerate() {
                if !mask[j] {
                    continue;
                }
                let u = w.map_or(0.0, |w| w[j]);
                mp = mp.max(g * v + u);
                mm = mm.max(-g * v - u);
            }
            let (mut sp, mut sm) = (0.0, 0.0);
            if mp > f64::NEG_INFINITY {
                for (j, &v) in phi.iter().enumerate() {
                    if !mask[j] {
                        continue;
                    }
                    let u = w.map_or(0.0, |w| w[j]);
                    sp += (g * v + u - mp).exp();
                    sm += (-g * v - u - mm).exp();
                }
            }
            plus.push(ldt + mp + sp.ln() + g * b + shift);
            minus.push(ldt + mm + sm.ln() - g * b + shift);
        }
        SliceLogs { k_lo, dt: path.grid.dt, plus, minus }
    }
}

/// Node indices of a region on the R = 1 clock.
pub fn region_nodes(grid: &TimeGrid, region: &Region) -> Result<(usize, usize)> {
    region.validate()?;
    if region.t_max > grid.t_end() * (1.0 + 1e-12) {
        return Err(Error::RegionOutsideGrid { t_min: region.t_min, t_max: region.t_max, t_end: grid.t_end() });
    }
    let ka = grid.node(region.t_min).ok_or(Error::RegionNotAligned(region.t_min))?;
    let kb = grid.node(region.t_max).ok_or(Error::RegionNotAligned(region.t_max))?;
    Ok((ka, kb))
}

/// Log-mass of a region on the R = 1 clock (no radius factor).
pub(crate) fn log_mass_unit(
    path: &PathSample,
    region: &Region,
    sigma: i8,
    gamma: f64,
    reg: Regularization,
    theta_cells: usize,
    weights: Option<&dyn Fn(&MassEvaluator) -> WeightTable>,
) -> Result<f64> {
    let (ka, kb) = region_nodes(&path.grid, region)?;
    let mut ev = MassEvaluator::new(gamma, reg, theta_cells, 0.0, path.grid.dt, path.n_modes)?;
    ev.set_arc(region);
    if ka == kb {
        return Ok(f64::NEG_INFINITY);
    }
    ev.check_range(path, ka, kb)?;
    let table = weights.map(|f| f(&ev));
    let logs = ev.slice_logs(path, ka, kb, table.as_ref());
    Ok(logs.log_mass(sigma, ka, kb))
}

/// Mass M^σ(A) of a region given in radius-R coordinates, computed on the
/// R = 1 clock as R^{γQ} M^σ_1(A/R).
pub fn gmc_mass(path: &PathSample, region: &Region, spec: &GmcSpec, params: &ModelParams, theta_cells: usize) -> Result<f64> {
    let r = params.radius;
    let lm = log_mass_unit(
        path,
        &region.scaled(1.0 / r),
        spec.sigma,
        params.gamma,
        spec.regularization.at_unit_radius(r),
        theta_cells,
        None,
    )?;
    Ok((lm + params.gamma_q() * r.ln()).exp())
}

/// Log-weight kernel for insertion-weighted masses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKernel {
    /// -Σ α_i log|e^{-s+iθ} - e^{-t_i+iθ_i}| (the N → ∞ covariance).
    Limit,
    /// Σ α_i [min(s, t_i) + Σ_{n≤N} e^{-n|s-t_i|} cos(n(θ-θ_i))/n].
    Regularized(usize),
}

/// Log-weight table u[k][j] = γ Σ_i α_i K(s_k, θ_j; t_i, θ_i) on nodes ka..=kb.
/// Insertion times are path times (R = 1 clock).
pub fn insertion_table(
    ins: &InsertionSet,
    gamma: f64,
    kernel: WeightKernel,
    grid: &TimeGrid,
    engine: &SliceEngine,
    ka: usize,
    kb: usize,
) -> WeightTable {
    let cells = engine.cells();
    let thetas: Vec<f64> = (0..cells).map(|j| engine.theta(j)).collect();
    let mut u = vec![0.0; (kb - ka + 1) * cells];
    for k in ka..=kb {
        let s = grid.time(k);
        let row = &mut u[(k - ka) * cells..(k - ka + 1) * cells];
        for p in &ins.items {
            if p.alpha == 0.0 {
                continue;
            }
            for (j, &th) in thetas.iter().enumerate() {
                let kv = match kernel {
                    WeightKernel::Limit => {
                        let dx = (-s).exp() * th.cos() - (-p.t).exp() * p.theta.cos();
                        let dy = (-s).exp() * th.sin() - (-p.t).exp() * p.theta.sin();
                        -0.5 * (dx * dx + dy * dy).ln()
                    }
                    WeightKernel::Regularized(n) => {
                        s.min(p.t) + truncated_log_kernel((s - p.t).abs(), th - p.theta, n)
                    }
                };
                row[j] += gamma * p.alpha * kv;
            }
        }
    }
    WeightTable { k_lo: ka, cells, u }
}

/// Σ_{n=1}^{N} e^{-n τ} cos(nδ)/n.
pub fn truncated_log_kernel(tau: f64, delta: f64, n: usize) -> f64 {
    let q = (-tau).exp();
    let mut acc = 0.0;
    let mut pw = 1.0;
    for m in 1..=n {
        pw *= q;
        acc += pw * (m as f64 * delta).cos() / m as f64;
    }
    acc
}

/// Angle offset that keeps every insertion off the cell midpoints: 0, or
/// half a cell when some insertion sits on a node time and a midpoint.
pub fn jitter_offset(ins: &InsertionSet, grid: &TimeGrid, theta_cells: usize) -> f64 {
    let dth = 2.0 * PI / theta_cells as f64;
    let hit = ins.items.iter().any(|p| {
        let x = p.theta.rem_euclid(2.0 * PI) / dth - 0.5;
        grid.node(p.t).is_some() && (x - x.round()).abs() < 1e-9
    });
    if hit {
        0.5 * dth
    } else {
        0.0
    }
}

/// Riemann sum of the insertion weight times the regularised density.
/// Insertion times are path times on the R = 1 clock.
pub fn gmc_mass_weighted(
    path: &PathSample,
    region: &Region,
    spec: &GmcSpec,
    params: &ModelParams,
    insertions: &InsertionSet,
    theta_cells: usize,
    kernel: WeightKernel,
) -> Result<f64> {
    let r = params.radius;
    let reg1 = spec.regularization.at_unit_radius(r);
    let region1 = region.scaled(1.0 / r);
    let (ka, kb) = region_nodes(&path.grid, &region1)?;
    let off = jitter_offset(insertions, &path.grid, theta_cells);
    let mut ev = MassEvaluator::new(params.gamma, reg1, theta_cells, off, path.grid.dt, path.n_modes)?;
    ev.set_arc(&region1);
    if ka == kb {
        return Ok(0.0);
    }
    ev.check_range(path, ka, kb)?;
    let table = insertion_table(insertions, params.gamma, kernel, &path.grid, &ev.engine, ka, kb);
    let logs = ev.slice_logs(path, ka, kb, Some(&table));
    Ok((logs.log_mass(spec.sigma, ka, kb) + params.gamma_q() * r.ln()).exp())
}

/// V_±^{(k)}(φ) = ∫ e^{±γ φ^{(k)}(θ) - γ² H_k / 2} dθ by the midpoint rule.
pub fn circle_potential(field: &CircleField, sign: i8, k_trunc: usize, params: &ModelParams, theta_cells: usize) -> Result<f64> {
    if k_trunc == 0 || k_trunc > field.n_modes() {
        return Err(Error::InvalidArgument(format!(
            "k_trunc {k_trunc} with {} modes",
            field.n_modes()
        )));
    }
    let mut e = SliceEngine::new(theta_cells, 0.0, k_trunc);
    Ok(circle_potential_with(&mut e, &field.modes, sign, k_trunc, params.gamma))
}

pub(crate) fn circle_potential_with(e: &mut SliceEngine, modes: &[(f64, f64)], sign: i8, k: usize, gamma: f64) -> f64 {
    let dth = e.d_theta();
    let s = sign as f64 * gamma;
    let shift = -0.5 * gamma * gamma * renorm_constant(k);
    let vals = e.fourier_modes(modes, k);
    dth * vals.iter().map(|v| (s * v + shift).exp()).sum::<f64>()
}

/// Stationary-start path on the R = 1 clock covering `t_end`.
pub fn stationary_path(rng: &mut Rng, n_modes: usize, dt: f64, t_end: f64) -> Result<PathSample> {
    let grid = TimeGrid::spanning(dt, t_end)?;
    let f = sample_circle_field(n_modes, FieldInit::Stationary, rng)?;
    evolve_path(&f, 0.0, grid, rng)
}

/// E[M([a, b] × T)] under stationary start: 2π ∫_a^b e^{γ²t/2} dt, times
/// R^{γQ} for a strip given in radius-R coordinates.
pub fn mean_mass_oracle(params: &ModelParams, t_min: f64, t_max: f64) -> f64 {
    let g2 = params.gamma * params.gamma / 2.0;
    let r = params.radius;
    let (a, b) = (t_min / r, t_max / r);
    r.powf(params.gamma_q()) * 2.0 * PI * ((g2 * b).exp() - (g2 * a).exp()) / g2
}

/// Masses of one region for `n` independent stationary paths.
pub fn sample_masses(
    region: &Region,
    spec: &GmcSpec,
    params: &ModelParams,
    setup: &MassSetup,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let reg1 = spec.regularization.at_unit_radius(params.radius);
    let region1 = region.scaled(1.0 / params.radius);
    let modes = setup.path_modes(&reg1);
    let margin = match reg1 {
        Regularization::Circle { epsilon, .. } => epsilon,
        _ => 0.0,
    };
    let t_end = (region1.t_max + margin).max(setup.dt);
    let res = par_replicas(n, seed, |rng, _| -> Result<f64> {
        let path = stationary_path(rng, modes, setup.dt, t_end)?;
        gmc_mass(&path, region, spec, params, setup.theta_cells)
    });
    res.into_iter().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub radius: f64,
    /// M_R(A) over replicas.
    pub lhs: EstimatorResult,
    /// M_1(A / R) over independent replicas.
    pub rhs: EstimatorResult,
    pub ratio: f64,
    pub ratio_se: f64,
    pub target: f64,
    pub z: f64,
    pub pass: bool,
    /// 10/50/90% quantiles of M_R(A) R^{-γQ} and of M_1(A/R).
    pub lhs_quantiles: [f64; 3],
    pub rhs_quantiles: [f64; 3],
}

fn quantiles(xs: &[f64]) -> [f64; 3] {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
    if v.is_empty() {
        return [f64::NAN; 3];
    }
    [q(0.1), q(0.5), q(0.9)]
}

/// Compare E[M_R(A)] with R^{γQ} E[M_1(A/R)].
pub fn scaling_check(
    region: &Region,
    params: &ModelParams,
    spec: &GmcSpec,
    setup: &MassSetup,
    n_samples: usize,
    seed: u64,
) -> Result<ScalingReport> {
    let r = params.radius;
    let unit = crate::params::validate_params(params.gamma, params.mu, 1.0)?;
    let region1 = region.scaled(1.0 / r);
    let grid = TimeGrid::spanning(setup.dt, region1.t_max.max(setup.dt))?;
    for t in [region1.t_min, region1.t_max] {
        if grid.node(t).is_none() {
            return Err(Error::IncompatibleGrids(format!("time {t} is not a node of step {}", setup.dt)));
        }
    }
    let spec1 = GmcSpec { regularization: spec.regularization.at_unit_radius(r), ..*spec };
    let fp = params.fingerprint();
    let lhs_s = sample_masses(region, spec, params, setup, n_samples, seed)?;
    let rhs_s = sample_masses(&region1, &spec1, &unit, setup, n_samples, derive_seed(seed, 1))?;
    let lhs = EstimatorResult::from_samples(&lhs_s, seed, fp.clone());
    let rhs = EstimatorResult::from_samples(&rhs_s, derive_seed(seed, 1), fp);
    let target = r.powf(params.gamma_q());
    let (ratio, ratio_se) = if rhs.mean > 0.0 {
        let q = lhs.mean / rhs.mean;
        let rel = ((lhs.std_error / lhs.mean).powi(2) + (rhs.std_error / rhs.mean).powi(2)).sqrt();
        (q, q * rel)
    } else {
        (f64::NAN, f64::NAN)
    };
    let z = (ratio - target).abs() / ratio_se;
    let scaled: Vec<f64> = lhs_s.iter().map(|m| m / target).collect();
    Ok(ScalingReport {
        radius: r,
        pass: z <= 3.0,
        lhs,
        rhs,
        ratio,
        ratio_se,
        target,
        z,
        lhs_quantiles: quantiles(&scaled),
        rhs_quantiles: quantiles(&rhs_s),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: f64,
    pub result: EstimatorResult,
    /// (prefix size, s.e./mean) for prefixes n/8, n/4, n/2, n.
    pub batches: Vec<(usize, f64)>,
    /// Geometric mean of the s.e./mean ratio between consecutive prefixes;
    /// about 1/√2 when the p-th moment has finite variance.
    pub shrink_factor: f64,
    pub unstable: bool,
}

pub const INSTABILITY_SHRINK: f64 = 0.85;

pub fn moment_estimator(
    region: &Region,
    spec: &GmcSpec,
    params: &ModelParams,
    setup: &MassSetup,
    p: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MomentReport> {
    if region.t_max <= region.t_min {
        return Err(Error::EmptyRegion);
    }
    if p == 0.0 || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("moment order {p}")));
    }
    if n_samples < 16 {
        return Err(Error::InvalidArgument("moment estimator needs >= 16 samples".into()));
    }
    let masses = sample_masses(region, spec, params, setup, n_samples, seed)?;
    let vals: Vec<f64> = masses.iter().map(|m| m.powf(p)).collect();
    let result = EstimatorResult::from_samples(&vals, seed, params.fingerprint());
    let batches: Vec<(usize, f64)> = [8, 4, 2, 1]
        .iter()
        .map(|d| {
            let m = n_samples / d;
            let (mean, se) = mean_se(&vals[..m]);
            (m, se / mean.abs())
        })
        .collect();
    let first = batches[0].1;
    let last = batches[3].1;
    let shrink_factor = (last / first).powf(1.0 / 3.0);
    let unstable = !shrink_factor.is_finite() || shrink_factor > INSTABILITY_SHRINK;
    Ok(MomentReport { p, result, batches, shrink_factor, unstable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::{Insertion, InsertionSet};
    use crate::params::validate_params;
    use crate::rng::replica_rng;

    fn path(seed: u64, modes: usize, t_end: f64) -> PathSample {
        stationary_path(&mut replica_rng(seed, 0), modes, 1.0 / 64.0, t_end).unwrap()
    }

    #[test]
    fn harmonic_numbers() {
        assert_eq!(renorm_constant(1), 1.0);
        assert_eq!(renorm_constant(2), 1.5);
        let n = 1_000_000;
        assert!((renorm_constant(n) - (n as f64).ln() - 0.577_215_664_901_532_9).abs() < 1e-6);
    }

    #[test]
    fn tiny_gamma_gives_area() {
        let p = validate_params(1e-9, 1.0, 1.0).unwrap();
        let m = gmc_mass(&path(1, 8, 1.0), &Region::strip(0.0, 1.0), &GmcSpec::fourier(1, 8), &p, 32).unwrap();
        assert!((m - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn sign_symmetry_per_sample() {
        let p = validate_params(1.2, 1.0, 1.0).unwrap();
        let pa = path(2, 16, 1.0);
        let neg = pa.negated();
        let r = Region::strip(0.25, 0.75);
        for spec in [GmcSpec::fourier(1, 16), GmcSpec::circle(1, 1.0 / 16.0)] {
            let a = gmc_mass(&pa, &r, &spec.negated(), &p, 64).unwrap();
            let b = gmc_mass(&neg, &r, &spec, &p, 64).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn region_checks() {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let pa = path(3, 8, 1.0);
        let spec = GmcSpec::fourier(1, 8);
        assert!(matches!(
            gmc_mass(&pa, &Region::strip(0.0, 2.0), &spec, &p, 16),
            Err(Error::RegionOutsideGrid { .. })
        ));
        assert!(matches!(
            gmc_mass(&pa, &Region::strip(0.0, 0.3), &spec, &p, 16),
            Err(Error::RegionNotAligned(_))
        ));
        assert_eq!(gmc_mass(&pa, &Region::strip(0.5, 0.5), &spec, &p, 16).unwrap(), 0.0);
        // circle average needs room before t = 0
        assert!(gmc_mass(&pa, &Region::strip(0.0, 0.5), &GmcSpec::circle(1, 1.0 / 16.0), &p, 16).is_err());
    }

    #[test]
    fn arcs_add_up() {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let pa = path(4, 16, 1.0);
        let spec = GmcSpec::fourier(-1, 16);
        let full = gmc_mass(&pa, &Region::strip(0.0, 1.0), &spec, &p, 64).unwrap();
        let a = gmc_mass(&pa, &Region { arc: Some((0.0, 2.0)), ..Region::strip(0.0, 1.0) }, &spec, &p, 64).unwrap();
        let b = gmc_mass(&pa, &Region { arc: Some((2.0, 2.0 * PI)), ..Region::strip(0.0, 1.0) }, &spec, &p, 64).unwrap();
        assert!((a + b - full).abs() < 1e-10 * full);
    }

    #[test]
    fn weighted_reduces_to_plain() {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let pa = path(5, 16, 1.0);
        let r = Region::strip(0.0, 1.0);
        let spec = GmcSpec::fourier(1, 16);
        let plain = gmc_mass(&pa, &r, &spec, &p, 64).unwrap();
        let empty = InsertionSet::new(vec![], &p).unwrap();
        let zero = InsertionSet::new(vec![Insertion { alpha: 0.0, t: 0.5, theta: 0.1 }], &p).unwrap();
        for ins in [empty, zero] {
            let w = gmc_mass_weighted(&pa, &r, &spec, &p, &ins, 64, WeightKernel::Limit).unwrap();
            assert!((w - plain).abs() < 1e-12 * plain);
        }
    }

    #[test]
    fn weight_above_one_increases_mass() {
        // |e^{-s+iθ} - e^{-3}| < 1 on s ∈ [1, 2], so every weight exceeds 1
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let pa = path(6, 16, 3.0);
        let r = Region::strip(1.0, 2.0);
        let spec = GmcSpec::fourier(1, 16);
        let ins = InsertionSet::new(vec![Insertion { alpha: 0.5, t: 3.0, theta: 0.0 }], &p).unwrap();
        let plain = gmc_mass(&pa, &r, &spec, &p, 64).unwrap();
        let w = gmc_mass_weighted(&pa, &r, &spec, &p, &ins, 64, WeightKernel::Limit).unwrap();
        assert!(w >= plain);
    }

    #[test]
    fn limit_kernel_matches_long_series() {
        for (s, t, d) in [(0.3, 1.0, 0.4), (2.0, 0.5, 3.0), (1.0, 1.05, 0.7)] {
            let lim = -((-(s as f64)).exp() * num_complex::Complex64::from_polar(1.0, d) - (-(t as f64)).exp()).norm().ln();
            let ser = f64::min(s, t) + truncated_log_kernel((s - t as f64).abs(), d, 4000);
            assert!((lim - ser).abs() < 1e-9, "{lim} {ser}");
        }
    }

    #[test]
    fn jitter_shifts_grid() {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let g = TimeGrid::new(0.25, 8).unwrap();
        let on = InsertionSet::new(vec![Insertion { alpha: 0.5, t: 1.0, theta: PI / 8.0 }], &p).unwrap();
        let off = InsertionSet::new(vec![Insertion { alpha: 0.5, t: 1.0, theta: 0.0 }], &p).unwrap();
        assert!(jitter_offset(&on, &g, 8) > 0.0);
        assert_eq!(jitter_offset(&off, &g, 8), 0.0);
    }

    #[test]
    fn potential_of_zero_field() {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let f = CircleField::zeros(8);
        let v = circle_potential(&f, 1, 8, &p, 64).unwrap();
        assert!((v - 2.0 * PI * (-0.5 * renorm_constant(8)).exp()).abs() < 1e-12);
        let g = sample_circle_field(8, FieldInit::Stationary, &mut replica_rng(1, 2)).unwrap();
        let a = circle_potential(&g, -1, 8, &p, 64).unwrap();
        let b = circle_potential(&g.negated(), 1, 8, &p, 64).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_radius_scaling_is_identity() {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let pa = path(7, 16, 1.0);
        let spec = GmcSpec::fourier(1, 16);
        let r = Region::strip(0.0, 1.0);
        let a = gmc_mass(&pa, &r, &spec, &p, 64).unwrap();
        let b = gmc_mass(&pa, &r.scaled(1.0), &spec, &p, 64).unwrap();
        assert_eq!(a, b);
        let p2 = validate_params(1.0, 1.0, 2.0).unwrap();
        let c = gmc_mass(&pa, &Region::strip(0.0, 2.0), &spec, &p2, 64).unwrap();
        assert!((c / a - 2f64.powf(2.5)).abs() < 1e-12);
    }

    #[test]
    fn empty_region_moment() {
        let p = validate_params(1.0, 1.0, 1.0).unwrap();
        let s = MassSetup { n_modes: 8, dt: 0.125, theta_cells: 16 };
        assert!(matches!(
            moment_estimator(&Region::strip(0.5, 0.5), &GmcSpec::fourier(1, 8), &p, &s, 1.0, 100, 1),
            Err(Error::EmptyRegion)
        ));
    }
}
