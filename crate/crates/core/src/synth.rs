//! Fast evaluation of a time slice of the field on J equispaced angles.
//!
//! With θ_j = θ₀ + (j + ½)·2π/J and b_n the complex mode coefficient,
//! φ(θ_j) = Re Σ_n b_n e^{inθ_j}; folding n mod J turns this into one
//! length-J inverse FFT per slice.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::gff::{CircleStencil, PathSample};

pub struct SliceEngine {
    j: usize,
    theta0: f64,
    fft: Arc<dyn Fft<f64>>,
    /// e^{i n (θ₀ + π/J)} / √n, index n - 1.
    phase: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
    pub values: Vec<f64>,
}

impl SliceEngine {
    pub fn new(theta_cells: usize, theta0: f64, n_modes: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_inverse(theta_cells);
        let shift = theta0 + PI / theta_cells as f64;
        let phase = (1..=n_modes)
            .map(|n| Complex64::from_polar(1.0 / (n as f64).sqrt(), n as f64 * shift))
            .collect();
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        SliceEngine {
            j: theta_cells,
            theta0,
            fft,
            phase,
            buf: vec![Complex64::new(0.0, 0.0); theta_cells],
            scratch,
            values: vec![0.0; theta_cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.j
    }

    pub fn theta(&self, j: usize) -> f64 {
        self.theta0 + (j as f64 + 0.5) * 2.0 * PI / self.j as f64
    }

    pub fn d_theta(&self) -> f64 {
        2.0 * PI / self.j as f64
    }

    fn finish(&mut self) -> &[f64] {
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (v, b) in self.values.iter_mut().zip(&self.buf) {
            *v = b.re;
        }
        &self.values
    }

    /// Fourier truncation of φ_{t_k} at `n_used` modes.
    pub fn fourier(&mut self, path: &PathSample, k: usize, n_used: usize) -> &[f64] {
        self.buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        let s = k * path.n_modes;
        for i in 0..n_used {
            let b = Complex64::new(path.x[s + i], -path.y[s + i]) * self.phase[i];
            self.buf[(i + 1) % self.j] += b;
        }
        self.finish()
    }

    /// Same for a bare list of mode pairs.
    pub fn fourier_modes(&mut self, modes: &[(f64, f64)], n_used: usize) -> &[f64] {
        self.buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for (i, &(x, y)) in modes[..n_used].iter().enumerate() {
            self.buf[(i + 1) % self.j] += Complex64::new(x, -y) * self.phase[i];
        }
        self.finish()
    }

    /// Discretised circle average around t_k (requires the stencil to fit).
    pub fn circle(&mut self, path: &PathSample, k: usize, st: &CircleStencil) -> &[f64] {
        self.buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        let nm = path.n_modes;
        for (m, row) in st.offsets.iter().zip(&st.weights) {
            let s = (k as isize + m) as usize * nm;
            for i in 0..nm {
                let b = Complex64::new(path.x[s + i], -path.y[s + i]) * row[i] * self.phase[i];
                self.buf[(i + 1) % self.j] += b;
            }
        }
        self.finish()
    }
}

/// log Σ_j exp(a_j), robust to -inf entries.
pub fn log_sum_exp(a: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = a.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + a.map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::{circle_average, evolve_path, sample_circle_field, FieldInit, TimeGrid};
    use crate::rng::replica_rng;

    #[test]
    fn fft_matches_direct_sum() {
        let mut rng = replica_rng(5, 0);
        let f = sample_circle_field(40, FieldInit::Stationary, &mut rng).unwrap();
        let p = evolve_path(&f, 0.0, TimeGrid::new(1.0 / 64.0, 12).unwrap(), &mut rng).unwrap();
        // 16 cells with 40 modes exercises the aliasing fold.
        for (cells, n_used) in [(16, 40), (64, 40), (128, 7)] {
            let mut e = SliceEngine::new(cells, 0.3, 40);
            let v = e.fourier(&p, 3, n_used).to_vec();
            for (j, val) in v.iter().enumerate() {
                let d = p.fluct(3, e.theta(j), n_used);
                assert!((val - d).abs() < 1e-11, "{cells} {j}: {val} vs {d}");
            }
        }
    }

    #[test]
    fn circle_matches_direct() {
        let mut rng = replica_rng(6, 0);
        let f = sample_circle_field(16, FieldInit::Stationary, &mut rng).unwrap();
        let p = evolve_path(&f, 0.0, TimeGrid::new(1.0 / 64.0, 20).unwrap(), &mut rng).unwrap();
        let st = CircleStencil::new(1.0 / 16.0, 1.0 / 64.0, 32, 16).unwrap();
        let mut e = SliceEngine::new(32, 0.0, 16);
        let v = e.circle(&p, 10, &st).to_vec();
        for j in [0, 5, 31] {
            let d = circle_average(&p, 1.0 / 16.0, 10, e.theta(j), 32).unwrap();
            assert!((v[j] - d).abs() < 1e-12);
        }
    }

    #[test]
    fn lse() {
        let v = [f64::NEG_INFINITY, 0.0, 0.0];
        assert!((log_sum_exp(v.iter().copied()) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY].iter().copied()), f64::NEG_INFINITY);
        assert!((log_sum_exp([1000.0, 1000.0].iter().copied()) - 1000.0 - 2f64.ln()).abs() < 1e-12);
    }
}
