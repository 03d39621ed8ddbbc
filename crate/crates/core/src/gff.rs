//! The cylinder free field as the Markov process c + B_t + φ_t.
//!
//! φ_t(θ) = Σ_n [x_n(t) cos nθ + y_n(t) sin nθ] / √n, each coordinate an
//! Ornstein-Uhlenbeck process with rate n and unit stationary variance; B is
//! a standard Brownian motion started at 0. Everything here runs on the
//! R = 1 clock; other radii go through φ^R(t, θ) = φ^1(t/R, θ/R).

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleField {
    pub zero_mode: f64,
    /// `modes[n - 1] = (x_n, y_n)`.
    pub modes: Vec<(f64, f64)>,
}

pub enum FieldInit<'a> {
    Stationary,
    Fixed(&'a [(f64, f64)]),
}

impl CircleField {
    pub fn zeros(n_modes: usize) -> Self {
        CircleField { zero_mode: 0.0, modes: vec![(0.0, 0.0); n_modes] }
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Fluctuation part at angle θ using the first `n_used` modes.
    pub fn eval(&self, theta: f64, n_used: usize) -> f64 {
        self.modes[..n_used.min(self.modes.len())]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let n = (i + 1) as f64;
                (x * (n * theta).cos() + y * (n * theta).sin()) / n.sqrt()
            })
            .sum()
    }

    pub fn negated(&self) -> Self {
        CircleField {
            zero_mode: -self.zero_mode,
            modes: self.modes.iter().map(|&(x, y)| (-x, -y)).collect(),
        }
    }
}

/// Draw a circle field. The zero mode is left at 0; callers supply c.
pub fn sample_circle_field<R: Rng + ?Sized>(
    n_modes: usize,
    init: FieldInit<'_>,
    rng: &mut R,
) -> Result<CircleField> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be >= 1".into()));
    }
    let modes = match init {
        FieldInit::Stationary => (0..n_modes)
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect(),
        FieldInit::Fixed(v) => {
            if v.len() != n_modes {
                return Err(Error::InvalidArgument(format!(
                    "expected {n_modes} mode pairs, got {}",
                    v.len()
                )));
            }
            v.to_vec()
        }
    };
    Ok(CircleField { zero_mode: 0.0, modes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonPositive { name: "dt", value: dt });
        }
        if n_steps == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(TimeGrid { dt, n_steps })
    }

    /// Grid with step `dt` reaching at least `t_end`.
    pub fn spanning(dt: f64, t_end: f64) -> Result<Self> {
        let k = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
        TimeGrid::new(dt, k)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    /// Index of the node at time `t`, if `t` is a node (relative tol 1e-9).
    pub fn node(&self, t: f64) -> Option<usize> {
        let x = t / self.dt;
        let k = x.round();
        if (x - k).abs() <= 1e-9 * x.abs().max(1.0) && k >= 0.0 && k as usize <= self.n_steps {
            Some(k as usize)
        } else {
            None
        }
    }
}

/// One realisation of (B, φ) on a uniform grid.
///
/// Mode coordinates are stored time-major: `x[k * N + (n - 1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub grid: TimeGrid,
    pub c: f64,
    pub brownian: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n_modes: usize,
    pub initial: CircleField,
}

/// Mean factor and variance of the exact OU transition over `dt` for mode `n`.
pub fn ou_transition(n: usize, dt: f64) -> (f64, f64) {
    let a = (-(n as f64) * dt).exp();
    (a, -(-2.0 * n as f64 * dt).exp_m1())
}

/// Transition law of two consecutive half steps, composed algebraically.
pub fn ou_two_half_steps(n: usize, dt: f64) -> (f64, f64) {
    let (a, v) = ou_transition(n, dt / 2.0);
    (a * a, a * a * v + v)
}

pub fn evolve_path<R: Rng + ?Sized>(
    initial: &CircleField,
    c: f64,
    grid: TimeGrid,
    rng: &mut R,
) -> Result<PathSample> {
    evolve_with(initial, c, grid, || rng.sample(StandardNormal))
}

fn evolve_with(initial: &CircleField, c: f64, grid: TimeGrid, mut normal: impl FnMut() -> f64) -> Result<PathSample> {
    if grid.n_steps == 0 {
        return Err(Error::EmptyGrid);
    }
    let nm = initial.n_modes();
    if nm == 0 {
        return Err(Error::InvalidArgument("initial field has no modes".into()));
    }
    let k_len = grid.n_steps + 1;
    let mut brownian = Vec::with_capacity(k_len);
    let mut x = Vec::with_capacity(k_len * nm);
    let mut y = Vec::with_capacity(k_len * nm);
    let (decay, sd): (Vec<f64>, Vec<f64>) = (1..=nm)
        .map(|n| {
            let (a, v) = ou_transition(n, grid.dt);
            (a, v.sqrt())
        })
        .unzip();
    let sdt = grid.dt.sqrt();
    brownian.push(0.0);
    for &(xi, yi) in &initial.modes {
        x.push(xi);
        y.push(yi);
    }
    let mut b = 0.0;
    for k in 1..k_len {
        b += sdt * normal();
        brownian.push(b);
        let base = (k - 1) * nm;
        for i in 0..nm {
            let zx = normal();
            let zy = normal();
            let nx = x[base + i] * decay[i] + sd[i] * zx;
            let ny = y[base + i] * decay[i] + sd[i] * zy;
            x.push(nx);
            y.push(ny);
        }
    }
    Ok(PathSample { grid, c, brownian, x, y, n_modes: nm, initial: initial.clone() })
}

/// Number of standard normals `stationary_path` consumes for this grid.
pub fn path_normal_count(n_modes: usize, n_steps: usize) -> usize {
    2 * n_modes + n_steps * (1 + 2 * n_modes)
}

/// Stationary-start path built from explicit standard normals, consumed in
/// the same order as the random sampler (initial modes, then per step the
/// Brownian increment followed by the mode innovations).
pub fn path_from_normals(n_modes: usize, grid: TimeGrid, z: &[f64]) -> Result<PathSample> {
    if n_modes == 0 {
        return Err(Error::InvalidArgument("n_modes must be >= 1".into()));
    }
    let need = path_normal_count(n_modes, grid.n_steps);
    if z.len() != need {
        return Err(Error::InvalidArgument(format!("expected {need} normals, got {}", z.len())));
    }
    let initial = CircleField { zero_mode: 0.0, modes: z[..2 * n_modes].chunks(2).map(|p| (p[0], p[1])).collect() };
    let mut it = z[2 * n_modes..].iter().copied();
    evolve_with(&initial, 0.0, grid, || it.next().expect("normal count checked"))
}

impl PathSample {
    #[inline]
    pub fn mode(&self, k: usize, n: usize) -> (f64, f64) {
        let i = k * self.n_modes + n - 1;
        (self.x[i], self.y[i])
    }

    pub fn slice(&self, k: usize) -> CircleField {
        let s = k * self.n_modes;
        CircleField {
            zero_mode: self.c + self.brownian[k],
            modes: (0..self.n_modes).map(|i| (self.x[s + i], self.y[s + i])).collect(),
        }
    }

    /// Field negation: c, B and every mode change sign.
    pub fn negated(&self) -> PathSample {
        PathSample {
            grid: self.grid,
            c: -self.c,
            brownian: self.brownian.iter().map(|b| -b).collect(),
            x: self.x.iter().map(|v| -v).collect(),
            y: self.y.iter().map(|v| -v).collect(),
            n_modes: self.n_modes,
            initial: self.initial.negated(),
        }
    }

    /// Fluctuation field φ_{t_k}(θ) with the first `n_used` modes.
    pub fn fluct(&self, k: usize, theta: f64, n_used: usize) -> f64 {
        let s = k * self.n_modes;
        let mut acc = 0.0;
        for i in 0..n_used {
            let n = (i + 1) as f64;
            let (sn, cn) = (n * theta).sin_cos();
            acc += (self.x[s + i] * cn + self.y[s + i] * sn) / n.sqrt();
        }
        acc
    }
}

pub fn eval_field(path: &PathSample, k: usize, theta: f64, n_modes_used: usize) -> Result<f64> {
    if k > path.grid.n_steps {
        return Err(Error::IndexOutOfRange { index: k, limit: path.grid.n_steps });
    }
    if n_modes_used > path.n_modes {
        return Err(Error::IndexOutOfRange { index: n_modes_used, limit: path.n_modes });
    }
    Ok(path.c + path.brownian[k] + path.fluct(k, theta, n_modes_used))
}

/// Pφ(t, θ) = Σ_n e^{-nt}[x_n cos nθ + y_n sin nθ]/√n.
pub fn harmonic_extension(initial: &CircleField, t: f64, theta: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(initial
        .modes
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let n = (i + 1) as f64;
            (-n * t).exp() * (x * (n * theta).cos() + y * (n * theta).sin()) / n.sqrt()
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CovKind {
    /// Stationary slice field φ: log(max(e^{-t}, e^{-t'}) / |e^{-t'+iθ'} - e^{-t+iθ}|).
    Slice,
    /// Dirichlet part Y_t = φ_t - Pφ(t).
    DirichletY,
    /// Harmonic extension Pφ of a stationary boundary field.
    Harmonic,
}

fn cdist(t: f64, th: f64, t2: f64, th2: f64) -> f64 {
    (Complex64::from_polar((-t).exp(), th) - Complex64::from_polar((-t2).exp(), th2)).norm()
}

/// Closed-form covariances at R = 1.
pub fn covariance_oracle(kind: CovKind, t: f64, theta: f64, t2: f64, theta2: f64) -> Result<f64> {
    if t < 0.0 || t2 < 0.0 {
        return Err(Error::NegativeTime(t.min(t2)));
    }
    let harmonic = || -(Complex64::from_polar((-(t + t2)).exp(), theta - theta2) - 1.0).norm().ln();
    match kind {
        CovKind::Harmonic => {
            if t == 0.0 && t2 == 0.0 && same_angle(theta, theta2) {
                return Err(Error::CoincidentPoints);
            }
            Ok(harmonic())
        }
        CovKind::Slice | CovKind::DirichletY => {
            let d = cdist(t, theta, t2, theta2);
            if d == 0.0 || (t == t2 && same_angle(theta, theta2)) {
                return Err(Error::CoincidentPoints);
            }
            let slice = (-t).exp().max((-t2).exp()).ln() - d.ln();
            Ok(match kind {
                CovKind::Slice => slice,
                _ => slice - harmonic(),
            })
        }
    }
}

fn same_angle(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(2.0 * PI);
    d < 1e-15 || 2.0 * PI - d < 1e-15
}

/// Time offsets (in grid steps) and per-mode phase sums of the discretised
/// circle average: `s[m][n-1] = (1/P) Σ_{v: round(ε cos v / dt) = m} e^{i n ε sin v}`.
#[derive(Debug, Clone)]
pub struct CircleStencil {
    pub epsilon: f64,
    pub half_width: usize,
    pub offsets: Vec<isize>,
    pub weights: Vec<Vec<Complex64>>,
}

impl CircleStencil {
    pub fn new(epsilon: f64, dt: f64, points: usize, n_modes: usize) -> Result<Self> {
        let ratio = epsilon / dt;
        if !(epsilon > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return Err(Error::EpsilonGridMismatch { epsilon, dt });
        }
        if points < 8 {
            return Err(Error::InvalidArgument(format!("quadrature_points {points} < 8")));
        }
        let h = ratio.round() as isize;
        let mut weights = vec![vec![Complex64::new(0.0, 0.0); n_modes]; (2 * h + 1) as usize];
        for v in 0..points {
            let ang = 2.0 * PI * v as f64 / points as f64;
            let m = (epsilon * ang.cos() / dt).round() as isize;
            let row = &mut weights[(m + h) as usize];
            let ds = epsilon * ang.sin();
            for (i, w) in row.iter_mut().enumerate() {
                *w += Complex64::from_polar(1.0 / points as f64, (i + 1) as f64 * ds);
            }
        }
        let mut offsets = Vec::new();
        let mut kept = Vec::new();
        for (idx, row) in weights.into_iter().enumerate() {
            if row.iter().any(|w| w.norm() > 0.0) {
                offsets.push(idx as isize - h);
                kept.push(row);
            }
        }
        Ok(CircleStencil { epsilon, half_width: h as usize, offsets, weights: kept })
    }

    /// Exact variance of the discretised circle average of a stationary
    /// field truncated at `n_modes`.
    pub fn stationary_variance(&self, dt: f64, n_modes: usize) -> f64 {
        let mut var = 0.0;
        for n in 1..=n_modes {
            let mut s = 0.0;
            for (a, wa) in self.offsets.iter().zip(&self.weights) {
                for (b, wb) in self.offsets.iter().zip(&self.weights) {
                    let rho = (-(n as f64) * ((a - b).abs() as f64) * dt).exp();
                    s += rho * (wa[n - 1] * wb[n - 1].conj()).re;
                }
            }
            var += s / n as f64;
        }
        var
    }
}

/// Circle average of the fluctuation field around (t_k, θ); nearest-node
/// time evaluation, B not averaged.
pub fn circle_average(
    path: &PathSample,
    epsilon: f64,
    k: usize,
    theta: f64,
    quadrature_points: usize,
) -> Result<f64> {
    let st = CircleStencil::new(epsilon, path.grid.dt, quadrature_points, path.n_modes)?;
    if k < st.half_width || k + st.half_width > path.grid.n_steps {
        return Err(Error::IndexOutOfRange { index: k, limit: path.grid.n_steps });
    }
    let mut acc = 0.0;
    for (m, row) in st.offsets.iter().zip(&st.weights) {
        let kk = (k as isize + m) as usize;
        for n in 1..=path.n_modes {
            let (x, y) = path.mode(kk, n);
            let b = Complex64::new(x, -y) * row[n - 1] * Complex64::from_polar(1.0, n as f64 * theta);
            acc += b.re / (n as f64).sqrt();
        }
    }
    Ok(acc)
}
