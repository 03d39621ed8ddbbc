//! Finite-cylinder expectations and vertex correlations.
//!
//! The cylinder [-T, T] × circle is sampled as the path on [0, 2T] with a
//! stationary start; cylinder time t sits at path time t + T. All
//! estimators are ratios (numerator / Z) over shared paths and shared
//! zero-mode nodes, with jackknife errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gff::{circle_average, covariance_oracle, path_from_normals, path_normal_count, CovKind, PathSample, TimeGrid};
use crate::gmc::{insertion_table, jitter_offset, stationary_path, MassEvaluator, Regularization, WeightKernel};
use crate::params::ModelParams;
use crate::propagator::{fk_log_weight, CQuadrature};
use crate::mcmc::{chain_columns, pcn_chains, PcnSettings};
use crate::rng::par_replicas;
use crate::stats::{jackknife, z_diff, EstimatorResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    pub alpha: f64,
    pub t: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionSet {
    pub items: Vec<Insertion>,
    /// max |α| < Q.
    pub admissible: bool,
}

impl InsertionSet {
    pub fn new(items: Vec<Insertion>, params: &ModelParams) -> Result<Self> {
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                let d = (a.theta - b.theta).rem_euclid(2.0 * std::f64::consts::PI);
                if a.t == b.t && (d == 0.0) {
                    return Err(Error::InvalidArgument("two insertions share a point".into()));
                }
            }
        }
        let admissible = items.iter().all(|p| params.is_admissible(p.alpha));
        Ok(InsertionSet { items, admissible })
    }

    pub fn total_alpha(&self) -> f64 {
        self.items.iter().map(|p| p.alpha).sum()
    }

    pub fn sum_alpha_sq(&self) -> f64 {
        self.items.iter().map(|p| p.alpha * p.alpha).sum()
    }

    pub fn max_abs_alpha(&self) -> f64 {
        self.items.iter().map(|p| p.alpha.abs()).fold(0.0, f64::max)
    }

    pub fn negated(&self) -> Self {
        InsertionSet {
            items: self.items.iter().map(|p| Insertion { alpha: -p.alpha, ..*p }).collect(),
            admissible: self.admissible,
        }
    }

    /// Same insertions with times moved by `dt` and angles scaled.
    fn mapped(&self, t_shift: f64, scale: f64) -> Self {
        InsertionSet {
            items: self
                .items
                .iter()
                .map(|p| Insertion { alpha: p.alpha, t: p.t * scale + t_shift, theta: p.theta * scale })
                .collect(),
            admissible: self.admissible,
        }
    }
}

/// Cameron-Martin shift of the insertions (path times, stationary start).
#[derive(Debug, Clone)]
pub struct ShiftData {
    pub insertions: InsertionSet,
}

impl ShiftData {
    pub fn new(insertions: &InsertionSet) -> Self {
        ShiftData { insertions: insertions.clone() }
    }

    /// Boundary shift h(θ) = Σ α E[φ_0(θ) φ_{t_i}(θ_i)].
    pub fn h(&self, theta: f64) -> f64 {
        self.ph(0.0, theta)
    }

    /// Harmonic extension Ph(t, θ) = Σ α (-log|1 - e^{-(t + t_i)} e^{i(θ - θ_i)}|).
    pub fn ph(&self, t: f64, theta: f64) -> f64 {
        self.insertions
            .items
            .iter()
            .map(|p| p.alpha * covariance_oracle(CovKind::Harmonic, t, theta, p.t, p.theta).unwrap_or(f64::INFINITY))
            .sum()
    }

    /// Brownian drift Σ α min(s, t_i).
    pub fn drift(&self, s: f64) -> f64 {
        self.insertions.items.iter().map(|p| p.alpha * s.min(p.t)).sum()
    }

    /// Σ α c + ½ Σ α² t_i.
    pub fn scalar_exponent(&self, c: f64) -> f64 {
        self.insertions.items.iter().map(|p| p.alpha * c + 0.5 * p.alpha * p.alpha * p.t).sum()
    }
}

/// Numerical settings of a finite-cylinder run (R = 1 clock).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteCylinder {
    pub t_half: f64,
    pub quad: CQuadrature,
    pub dt: f64,
    pub theta_cells: usize,
    pub regularization: Regularization,
    /// Modes carried by the path; at least N for Fourier(N).
    pub n_modes: usize,
}

impl FiniteCylinder {
    fn path_modes(&self) -> usize {
        match self.regularization {
            Regularization::Fourier(n) => n.max(self.n_modes),
            Regularization::Circle { .. } => self.n_modes,
        }
    }

    fn margin_time(&self) -> f64 {
        match self.regularization {
            Regularization::Circle { epsilon, .. } => epsilon,
            _ => 0.0,
        }
    }

    /// The same run at radius R expressed on the R = 1 clock.
    fn at_unit_radius(&self, radius: f64) -> Self {
        FiniteCylinder {
            t_half: self.t_half / radius,
            regularization: self.regularization.at_unit_radius(radius),
            ..*self
        }
    }

    fn check_window(&self, t1: f64, t2: f64) -> Result<()> {
        let m = self.margin_time();
        if !(t1 <= t2) || t1 < -self.t_half + m - 1e-12 || t2 > self.t_half - m + 1e-12 {
            return Err(Error::WindowOutsideCylinder { t1, t2, t_half: self.t_half });
        }
        Ok(())
    }
}

/// Path on [0, 2T] (plus circle margins) and the Z integrand times the
/// quadrature weight at each zero-mode node.
struct Replica {
    path: PathSample,
    z_nodes: Vec<f64>,
}

fn sample_replica(
    rng: &mut crate::rng::Rng,
    unit: &ModelParams,
    cyl: &FiniteCylinder,
    ev: &mut MassEvaluator,
) -> Result<Replica> {
    let m = cyl.margin_time();
    let path = stationary_path(rng, cyl.path_modes(), cyl.dt, 2.0 * (cyl.t_half + m))?;
    let offset_k = path.grid.node(m).ok_or(Error::RegionNotAligned(m))?;
    let k_end = path
        .grid
        .node(2.0 * cyl.t_half + m)
        .ok_or(Error::RegionNotAligned(2.0 * cyl.t_half))?;
    let logs = ev.slice_logs(&path, offset_k, k_end, None);
    let (lp, lm) = (logs.log_mass(1, offset_k, k_end), logs.log_mass(-1, offset_k, k_end));
    let z_nodes = cyl
        .quad
        .nodes()
        .iter()
        .zip(cyl.quad.weights())
        .map(|(&c, w)| w * fk_log_weight(unit.mu, unit.gamma, c, lp, lm).exp())
        .collect();
    Ok(Replica { path, z_nodes })
}

fn replica_grid(cyl: &FiniteCylinder) -> Result<TimeGrid> {
    TimeGrid::spanning(cyl.dt, 2.0 * (cyl.t_half + cyl.margin_time()))
}

/// Replica built from explicit normals, with `z_nodes` rescaled by e^{-log Z}
/// so that they sum to one. Returns log Z alongside.
fn replica_from_normals(
    z: &[f64],
    unit: &ModelParams,
    cyl: &FiniteCylinder,
    grid: TimeGrid,
    ev: &mut MassEvaluator,
) -> Result<(f64, Replica)> {
    let m = cyl.margin_time();
    let path = path_from_normals(cyl.path_modes(), grid, z)?;
    let ka = grid.node(m).ok_or(Error::RegionNotAligned(m))?;
    let kb = grid.node(2.0 * cyl.t_half + m).ok_or(Error::RegionNotAligned(2.0 * cyl.t_half))?;
    let logs = ev.slice_logs(&path, ka, kb, None);
    let (lp, lm) = (logs.log_mass(1, ka, kb), logs.log_mass(-1, ka, kb));
    let lw: Vec<f64> = cyl
        .quad
        .nodes()
        .iter()
        .zip(cyl.quad.weights())
        .map(|(&c, w)| w.ln() + fk_log_weight(unit.mu, unit.gamma, c, lp, lm))
        .collect();
    let top = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z_nodes: Vec<f64> = lw.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = z_nodes.iter().sum();
    z_nodes.iter_mut().for_each(|v| *v /= sum);
    Ok((top + sum.ln(), Replica { path, z_nodes }))
}

fn evaluator(unit: &ModelParams, cyl: &FiniteCylinder, theta0: f64) -> Result<MassEvaluator> {
    MassEvaluator::new(unit.gamma, cyl.regularization, cyl.theta_cells, theta0, cyl.dt, cyl.path_modes())
}

/// log of Π exp(α(B + φ_reg)) times the renormalisation at the insertions
/// (zero mode excluded). Cylinder times.
fn vertex_log_factor(rep: &Replica, cyl: &FiniteCylinder, ins: &InsertionSet) -> Result<f64> {
    let grid = &rep.path.grid;
    let mut acc = 0.0;
    for p in &ins.items {
        if p.alpha == 0.0 {
            continue;
        }
        let tp = p.t + cyl.t_half + cyl.margin_time();
        let k = grid.node(tp).ok_or(Error::RegionNotAligned(p.t))?;
        let (phi, renorm) = match cyl.regularization {
            Regularization::Fourier(n) => (rep.path.fluct(k, p.theta, n), cyl.regularization.renorm_constant()),
            Regularization::Circle { epsilon, points } => {
                (circle_average(&rep.path, epsilon, k, p.theta, points)?, cyl.regularization.renorm_constant())
            }
        };
        acc += p.alpha * (rep.path.brownian[k] + phi) - 0.5 * p.alpha * p.alpha * renorm;
    }
    Ok(acc)
}

/// Σ_c q_c e^{A c} w(c) given the per-node Z weights.
fn tilted_sum(z_nodes: &[f64], quad: &CQuadrature, a: f64) -> f64 {
    if a == 0.0 {
        return z_nodes.iter().sum();
    }
    quad.nodes().iter().zip(z_nodes).map(|(&c, w)| (a * c).exp() * w).sum()
}

fn ratio_result(num: &[f64], den: &[f64], seed: u64, fp: String, scale: f64) -> EstimatorResult {
    let (est, se) = jackknife(&[num, den], |m| m[0] / m[1]);
    EstimatorResult {
        mean: est * scale,
        std_error: se * scale,
        n_samples: num.len() as u64,
        seed,
        fingerprint: fp,
        wall_ms: 0,
    }
}

/// Observable on the window: gets the path, the node range of the window
/// and the zero mode c.
pub type WindowObservable<'a> = dyn Fn(&PathSample, std::ops::RangeInclusive<usize>, f64) -> f64 + Sync + 'a;

/// ⟨F⟩ on the finite cylinder of half-length T for a window functional on
/// [t1, t2] (cylinder times). Radius 1 only: window functionals carry no
/// scaling rule.
pub fn finite_t_expectation(
    observable: &WindowObservable<'_>,
    window: (f64, f64),
    cyl: &FiniteCylinder,
    params: &ModelParams,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    if params.radius != 1.0 {
        return Err(Error::InvalidArgument("window observables are defined at R = 1".into()));
    }
    cyl.check_window(window.0, window.1)?;
    let unit = *params;
    let cs = cyl.quad.nodes();
    let rows = par_replicas(n_samples, seed, |rng, _| -> Result<(f64, f64)> {
        let mut ev = evaluator(&unit, cyl, 0.0)?;
        let rep = sample_replica(rng, &unit, cyl, &mut ev)?;
        let g = &rep.path.grid;
        let off = cyl.t_half + cyl.margin_time();
        let ka = g.node(window.0 + off).ok_or(Error::RegionNotAligned(window.0))?;
        let kb = g.node(window.1 + off).ok_or(Error::RegionNotAligned(window.1))?;
        let num = cs
            .iter()
            .zip(&rep.z_nodes)
            .map(|(&c, w)| if *w == 0.0 { 0.0 } else { w * observable(&rep.path, ka..=kb, c) })
            .sum();
        Ok((num, rep.z_nodes.iter().sum()))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let (num, den): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(ratio_result(&num, &den, seed, params.fingerprint(), 1.0))
}

/// ⟨Π V_{α_i}(t_i, θ_i)⟩ with the insertions' own regularised exponentials.
/// Insertion times are cylinder times in radius-R coordinates.
pub fn vertex_direct(
    insertions: &InsertionSet,
    cyl: &FiniteCylinder,
    params: &ModelParams,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    let r = params.radius;
    let unit = params.at_unit_radius();
    let cyl1 = cyl.at_unit_radius(r);
    let ins1 = insertions.mapped(0.0, 1.0 / r);
    for p in &ins1.items {
        cyl1.check_window(p.t, p.t)?;
    }
    let a = ins1.total_alpha();
    let rows = par_replicas(n_samples, seed, |rng, _| -> Result<(f64, f64)> {
        let mut ev = evaluator(&unit, &cyl1, 0.0)?;
        let rep = sample_replica(rng, &unit, &cyl1, &mut ev)?;
        let v = vertex_log_factor(&rep, &cyl1, &ins1)?;
        let num = v.exp() * tilted_sum(&rep.z_nodes, &cyl1.quad, a);
        Ok((num, rep.z_nodes.iter().sum()))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let (num, den): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    // H_N - log R (or ε^{α²/2}) renormalisation at radius R.
    let scale = r.powf(0.5 * insertions.sum_alpha_sq());
    Ok(ratio_result(&num, &den, seed, params.fingerprint(), scale))
}

/// `vertex_direct` with paths from pCN chains on the finite-T measure;
/// chains are the jackknife replicas.
pub fn vertex_pcn(
    insertions: &InsertionSet,
    cyl: &FiniteCylinder,
    params: &ModelParams,
    settings: &PcnSettings,
    seed: u64,
) -> Result<EstimatorResult> {
    let r = params.radius;
    let unit = params.at_unit_radius();
    let cyl1 = cyl.at_unit_radius(r);
    let ins1 = insertions.mapped(0.0, 1.0 / r);
    for p in &ins1.items {
        cyl1.check_window(p.t, p.t)?;
    }
    let a = ins1.total_alpha();
    let grid = replica_grid(&cyl1)?;
    let chains = pcn_chains(
        path_normal_count(cyl1.path_modes(), grid.n_steps),
        settings,
        seed,
        |z| {
            let mut ev = evaluator(&unit, &cyl1, 0.0)?;
            replica_from_normals(z, &unit, &cyl1, grid, &mut ev)
        },
        |rep| {
            let v = vertex_log_factor(rep, &cyl1, &ins1).expect("window checked");
            vec![v.exp() * tilted_sum(&rep.z_nodes, &cyl1.quad, a)]
        },
    )?;
    let col: Vec<f64> = chains.iter().map(|c| c.means[0]).collect();
    let (m, se) = jackknife(&[&col], |v| v[0]);
    let scale = r.powf(0.5 * insertions.sum_alpha_sq());
    Ok(EstimatorResult {
        mean: m * scale,
        std_error: se * scale,
        n_samples: (settings.chains * settings.steps) as u64,
        seed,
        fingerprint: params.fingerprint(),
        wall_ms: 0,
    })
}

/// Same correlation through the Girsanov shift: the vertex factors become a
/// deterministic scalar and an insertion weight on the chaos masses.
pub fn vertex_girsanov(
    insertions: &InsertionSet,
    cyl: &FiniteCylinder,
    params: &ModelParams,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorResult> {
    if !insertions.admissible {
        return Err(Error::InadmissibleInsertions { max_alpha: insertions.max_abs_alpha(), q: params.q_const });
    }
    let r = params.radius;
    let unit = params.at_unit_radius();
    let cyl1 = cyl.at_unit_radius(r);
    let ins1 = insertions.mapped(0.0, 1.0 / r);
    for p in &ins1.items {
        cyl1.check_window(p.t, p.t)?;
    }
    let m = cyl1.margin_time();
    // Path-time insertions.
    let ins_path = ins1.mapped(cyl1.t_half + m, 1.0);
    let kernel = match cyl1.regularization {
        Regularization::Fourier(n) => WeightKernel::Regularized(n),
        Regularization::Circle { .. } => WeightKernel::Limit,
    };
    let pair_cov = |a: &Insertion, b: &Insertion| match kernel {
        WeightKernel::Regularized(n) => {
            a.t.min(b.t) + crate::gmc::truncated_log_kernel((a.t - b.t).abs(), a.theta - b.theta, n)
        }
        WeightKernel::Limit => {
            let d = num_complex::Complex64::from_polar((-a.t).exp(), a.theta)
                - num_complex::Complex64::from_polar((-b.t).exp(), b.theta);
            -d.norm().ln()
        }
    };
    let mut log_s = 0.0;
    for (i, a) in ins_path.items.iter().enumerate() {
        log_s += 0.5 * a.alpha * a.alpha * a.t;
        for b in &ins_path.items[i + 1..] {
            log_s += a.alpha * b.alpha * pair_cov(a, b);
        }
    }
    let grid = crate::gff::TimeGrid::spanning(cyl1.dt, 2.0 * (cyl1.t_half + m))?;
    let ka = grid.node(m).ok_or(Error::RegionNotAligned(m))?;
    let kb = grid.node(2.0 * cyl1.t_half + m).ok_or(Error::RegionNotAligned(cyl1.t_half))?;
    let off = jitter_offset(&ins_path, &grid, cyl1.theta_cells);
    let table = {
        let ev = evaluator(&unit, &cyl1, off)?;
        insertion_table(&ins_path, unit.gamma, kernel, &grid, &ev.engine, ka, kb)
    };
    let a = ins1.total_alpha();
    let cs = cyl1.quad.nodes();
    let qw = cyl1.quad.weights();
    let rows = par_replicas(n_samples, seed, |rng, _| -> Result<(f64, f64)> {
        let mut ev = evaluator(&unit, &cyl1, off)?;
        let rep = sample_replica(rng, &unit, &cyl1, &mut ev)?;
        let logs = ev.slice_logs(&rep.path, ka, kb, Some(&table));
        let (lp, lm) = (logs.log_mass(1, ka, kb), logs.log_mass(-1, ka, kb));
        let num: f64 = cs
            .iter()
            .zip(&qw)
            .map(|(&c, w)| w * (a * c + log_s + fk_log_weight(unit.mu, unit.gamma, c, lp, lm)).exp())
            .sum();
        Ok((num, rep.z_nodes.iter().sum()))
    });
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let (num, den): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let scale = r.powf(0.5 * insertions.sum_alpha_sq());
    Ok(ratio_result(&num, &den, seed, params.fingerprint(), scale))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoPointCurve {
    pub anchor: f64,
    pub separations: Vec<f64>,
    /// (covariance, jackknife s.e.) per separation.
    pub covariance: Vec<(f64, f64)>,
    pub one_point_first: (f64, f64),
    pub n_samples: usize,
    pub seed: u64,
    /// Mean pCN acceptance; None for independent replicas.
    pub acceptance: Option<f64>,
}

/// ⟨V₁(anchor) V₂(anchor + s)⟩ - ⟨V₁⟩⟨V₂⟩ for each separation s, all from
/// the same replicas. Insertions are (α, θ); times are cylinder times.
#[allow(clippy::too_many_arguments)]
pub fn two_point_covariance(
    ins1: (f64, f64),
    ins2: (f64, f64),
    anchor: f64,
    separations: &[f64],
    cyl: &FiniteCylinder,
    params: &ModelParams,
    n_samples: usize,
    seed: u64,
) -> Result<TwoPointCurve> {
    if params.radius != 1.0 {
        return Err(Error::InvalidArgument("two-point curves are computed at R = 1".into()));
    }
    if separations.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("separations must be positive".into()));
    }
    cyl.check_window(anchor, anchor)?;
    for s in separations {
        cyl.check_window(anchor + s, anchor + s)?;
    }
    let unit = *params;
    let one = |alpha: f64, t: f64, theta: f64| InsertionSet {
        items: vec![Insertion { alpha, t, theta }],
        admissible: true,
    };
    let v1 = one(ins1.0, anchor, ins1.1);
    let v2s: Vec<InsertionSet> = separations.iter().map(|s| one(ins2.0, anchor + s, ins2.1)).collect();
    let ns = separations.len();
    let rows = par_replicas(n_samples, seed, |rng, _| -> Result<Vec<f64>> {
        let mut ev = evaluator(&unit, cyl, 0.0)?;
        let rep = sample_replica(rng, &unit, cyl, &mut ev)?;
        let z: f64 = rep.z_nodes.iter().sum();
        let l1 = vertex_log_factor(&rep, cyl, &v1)?;
        let s1 = tilted_sum(&rep.z_nodes, &cyl.quad, ins1.0);
        let s2 = tilted_sum(&rep.z_nodes, &cyl.quad, ins2.0);
        let s12 = tilted_sum(&rep.z_nodes, &cyl.quad, ins1.0 + ins2.0);
        let mut out = Vec::with_capacity(2 + 2 * ns);
        out.push(z);
        out.push(l1.exp() * s1);
        for v2 in &v2s {
            let l2 = vertex_log_factor(&rep, cyl, v2)?;
            out.push(l2.exp() * s2);
            out.push((l1 + l2).exp() * s12);
        }
        Ok(out)
    });
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let col = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
    let (z, n1) = (col(0), col(1));
    let one_point_first = jackknife(&[&n1, &z], |m| m[0] / m[1]);
    let covariance = (0..ns)
        .map(|i| {
            let (n2, n12) = (col(2 + 2 * i), col(3 + 2 * i));
            jackknife(&[&z, &n1, &n2, &n12], |m| m[3] / m[0] - m[1] * m[2] / (m[0] * m[0]))
        })
        .collect();
    Ok(TwoPointCurve {
        anchor,
        separations: separations.to_vec(),
        covariance,
        one_point_first,
        n_samples,
        seed,
        acceptance: None,
    })
}

/// Same covariance curve with paths drawn from the finite-T measure itself
/// by pCN chains on the path normals (target Z(path)). Needed on long
/// cylinders, where Z varies over tens of e-folds between free paths and
/// independent-replica ratios are carried by one or two replicas. Chains
/// are the jackknife replicas.
#[allow(clippy::too_many_arguments)]
pub fn two_point_covariance_pcn(
    ins1: (f64, f64),
    ins2: (f64, f64),
    anchor: f64,
    separations: &[f64],
    cyl: &FiniteCylinder,
    params: &ModelParams,
    settings: &PcnSettings,
    seed: u64,
) -> Result<TwoPointCurve> {
    if params.radius != 1.0 {
        return Err(Error::InvalidArgument("two-point curves are computed at R = 1".into()));
    }
    if separations.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("separations must be positive".into()));
    }
    cyl.check_window(anchor, anchor)?;
    for s in separations {
        cyl.check_window(anchor + s, anchor + s)?;
    }
    let unit = *params;
    let one = |alpha: f64, t: f64, theta: f64| InsertionSet {
        items: vec![Insertion { alpha, t, theta }],
        admissible: true,
    };
    let v1 = one(ins1.0, anchor, ins1.1);
    let v2s: Vec<InsertionSet> = separations.iter().map(|s| one(ins2.0, anchor + s, ins2.1)).collect();
    let grid = replica_grid(cyl)?;
    let dim = path_normal_count(cyl.path_modes(), grid.n_steps);
    let chains = pcn_chains(
        dim,
        settings,
        seed,
        |z| {
            let mut ev = evaluator(&unit, cyl, 0.0)?;
            replica_from_normals(z, &unit, cyl, grid, &mut ev)
        },
        |rep| {
            // Per-path conditional expectations over the zero mode.
            let l1 = vertex_log_factor(rep, cyl, &v1).expect("window checked");
            let s1 = tilted_sum(&rep.z_nodes, &cyl.quad, ins1.0);
            let s2 = tilted_sum(&rep.z_nodes, &cyl.quad, ins2.0);
            let s12 = tilted_sum(&rep.z_nodes, &cyl.quad, ins1.0 + ins2.0);
            let mut out = Vec::with_capacity(1 + 2 * v2s.len());
            out.push(l1.exp() * s1);
            for v2 in &v2s {
                let l2 = vertex_log_factor(rep, cyl, v2).expect("window checked");
                out.push(l2.exp() * s2);
                out.push((l1 + l2).exp() * s12);
            }
            out
        },
    )?;
    let cols = chain_columns(&chains);
    let one_point_first = jackknife(&[&cols[0]], |m| m[0]);
    let covariance = (0..separations.len())
        .map(|i| jackknife(&[&cols[0], &cols[1 + 2 * i], &cols[2 + 2 * i]], |m| m[2] - m[0] * m[1]))
        .collect();
    let acceptance = chains.iter().map(|c| c.acceptance).sum::<f64>() / chains.len() as f64;
    Ok(TwoPointCurve {
        anchor,
        separations: separations.to_vec(),
        covariance,
        one_point_first,
        n_samples: settings.chains * settings.steps,
        seed,
        acceptance: Some(acceptance),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnePointScaling {
    pub alpha: f64,
    pub radius: f64,
    /// ⟨e^{αφ(0)}⟩ on the radius-R cylinder with μ.
    pub lhs: EstimatorResult,
    /// ⟨e^{αφ(0)}⟩ on the unit cylinder with μ_R.
    pub rhs: EstimatorResult,
    pub ratio: f64,
    pub ratio_se: f64,
    pub target: f64,
    pub z: f64,
    pub pass: bool,
}

/// Compare ⟨V_α(0)⟩_{C_R, μ} with R^{α²/2} ⟨V_α(0)⟩_{C, μ_R}. Both cylinders
/// have half-length `cyl.t_half` in their own coordinates.
pub fn scaling_one_point(
    alpha: f64,
    params: &ModelParams,
    cyl: &FiniteCylinder,
    n_samples: usize,
    seed: u64,
) -> Result<OnePointScaling> {
    if !params.is_admissible(alpha) {
        return Err(Error::InadmissibleAlpha { alpha, q: params.q_const });
    }
    let ins = InsertionSet::new(vec![Insertion { alpha, t: 0.0, theta: 0.0 }], params)?;
    let lhs = vertex_direct(&ins, cyl, params, n_samples, seed)?;
    let unit = params.at_unit_radius();
    let rhs = if params.radius == 1.0 {
        lhs.clone()
    } else {
        vertex_direct(&ins, cyl, &unit, n_samples, crate::rng::derive_seed(seed, 2))?
    };
    let ratio = lhs.mean / rhs.mean;
    let ratio_se = if params.radius == 1.0 {
        0.0
    } else {
        ratio * ((lhs.std_error / lhs.mean).powi(2) + (rhs.std_error / rhs.mean).powi(2)).sqrt()
    };
    let target = params.radius.powf(0.5 * alpha * alpha);
    let z = z_diff(ratio, ratio_se, target, 0.0);
    Ok(OnePointScaling { alpha, radius: params.radius, lhs, rhs, ratio, ratio_se, target, z, pass: z <= 3.0 })
}
