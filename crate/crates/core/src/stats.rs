//! Estimator records, streaming merges, jackknife and weighted line fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean with standard error and the provenance needed to merge or rerun it.
///
/// `std_error` is `sqrt(m2) / n` with `m2` the sum of squared deviations, so
/// the pair (mean, std_error, n) determines the merge exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub fingerprint: String,
    pub wall_ms: u64,
}

impl EstimatorResult {
    pub fn from_samples(xs: &[f64], seed: u64, fingerprint: impl Into<String>) -> Self {
        let (mean, se) = mean_se(xs);
        EstimatorResult {
            mean,
            std_error: se,
            n_samples: xs.len() as u64,
            seed,
            fingerprint: fingerprint.into(),
            wall_ms: 0,
        }
    }

    pub fn m2(&self) -> f64 {
        let n = self.n_samples as f64;
        (self.std_error * n).powi(2)
    }

    pub fn with_wall_ms(mut self, ms: u64) -> Self {
        self.wall_ms = ms;
        self
    }

    /// Pairwise (Chan et al.) combination. `self` comes first in the order.
    pub fn merge(&self, other: &EstimatorResult) -> Result<EstimatorResult> {
        if self.fingerprint != other.fingerprint {
            return Err(Error::FingerprintMismatch(
                self.fingerprint.clone(),
                other.fingerprint.clone(),
            ));
        }
        let (na, nb) = (self.n_samples as f64, other.n_samples as f64);
        let n = na + nb;
        if n == 0.0 {
            return Ok(self.clone());
        }
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / n;
        let m2 = self.m2() + other.m2() + delta * delta * na * nb / n;
        Ok(EstimatorResult {
            mean,
            std_error: m2.sqrt() / n,
            n_samples: self.n_samples + other.n_samples,
            seed: self.seed,
            fingerprint: self.fingerprint.clone(),
            wall_ms: self.wall_ms + other.wall_ms,
        })
    }

    /// `|self - other|` in units of the combined standard error.
    pub fn z_score(&self, other: &EstimatorResult) -> f64 {
        z_diff(self.mean, self.std_error, other.mean, other.std_error)
    }
}

/// Left fold of [`EstimatorResult::merge`] in stream order.
pub fn merge_results(streams: &[EstimatorResult]) -> Result<EstimatorResult> {
    let (first, rest) = streams
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("no streams to merge".into()))?;
    rest.iter().try_fold(first.clone(), |acc, r| acc.merge(r))
}

pub fn z_diff(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let s = (se_a * se_a + se_b * se_b).sqrt();
    if s == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b).abs() / s
    }
}

/// Sample mean and `sqrt(m2)/n` standard error, two-pass.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, m2.sqrt() / n)
}

/// Sample covariance of two equally long series (divisor n - 1).
pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

/// Delete-one jackknife for a smooth function of column means.
///
/// `cols[j][i]` is replica `i` of quantity `j`. Returns the full-sample
/// estimate and the jackknife standard error. Leave-one-out means are
/// formed from the column totals, so the cost is O(n * cols).
pub fn jackknife<F>(cols: &[&[f64]], f: F) -> (f64, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let k = cols.len();
    let n = cols.first().map_or(0, |c| c.len());
    assert!(cols.iter().all(|c| c.len() == n), "ragged jackknife columns");
    if n < 2 {
        return (f64::NAN, f64::NAN);
    }
    let totals: Vec<f64> = cols.iter().map(|c| c.iter().sum()).collect();
    let full: Vec<f64> = totals.iter().map(|t| t / n as f64).collect();
    let est = f(&full);
    let mut loo = vec![0.0; k];
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        for j in 0..k {
            loo[j] = (totals[j] - cols[j][i]) / (n as f64 - 1.0);
        }
        vals.push(f(&loo));
    }
    let m = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() * (n as f64 - 1.0) / n as f64;
    (est, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
    pub residuals: Vec<f64>,
}

/// Weighted least squares y = a + b x with weights 1/se².
///
/// The parameter errors are the textbook ones assuming independent
/// Gaussian errors with the given s.e. (no rescaling by chi²). A zero s.e.
/// everywhere falls back to unit weights.
pub fn weighted_line_fit(x: &[f64], y: &[f64], se: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n || se.len() != n {
        return Err(Error::DegenerateFit(format!("need matching inputs with >= 2 points, got {n}")));
    }
    let exact = se.iter().all(|s| *s == 0.0);
    let w: Vec<f64> = se
        .iter()
        .map(|s| if exact { 1.0 } else { 1.0 / (s * s) })
        .collect();
    if w.iter().any(|w| !w.is_finite()) {
        return Err(Error::DegenerateFit("zero s.e. mixed with nonzero s.e.".into()));
    }
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    if !(sxx > 1e-300) {
        return Err(Error::DegenerateFit("x values are collinear".into()));
    }
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
    let ss_res: f64 = (0..n).map(|i| w[i] * residuals[i].powi(2)).sum();
    let ss_tot: f64 = (0..n).map(|i| w[i] * (y[i] - ym).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let (slope_se, intercept_se) = if exact {
        (0.0, 0.0)
    } else {
        ((1.0 / sxx).sqrt(), (1.0 / sw + xm * xm / sxx).sqrt())
    };
    Ok(LineFit { slope, intercept, slope_se, intercept_se, r_squared, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(xs: &[f64], fp: &str) -> EstimatorResult {
        EstimatorResult::from_samples(xs, 1, fp)
    }

    #[test]
    fn self_merge_shrinks_by_sqrt2() {
        let a = rec(&[1.0, 2.0, 4.0, 8.0], "f");
        let m = a.merge(&a).unwrap();
        assert_eq!(m.n_samples, 8);
        assert!((m.std_error * 2f64.sqrt() - a.std_error).abs() < 1e-15);
        assert_eq!(m.mean, a.mean);
    }

    #[test]
    fn merge_matches_pooled_samples() {
        let xs = [0.3, -1.2, 2.2, 5.0, 0.1];
        let ys = [1.0, 1.5, -0.5];
        let pooled: Vec<f64> = xs.iter().chain(&ys).copied().collect();
        let m = rec(&xs, "f").merge(&rec(&ys, "f")).unwrap();
        let p = rec(&pooled, "f");
        assert!((m.mean - p.mean).abs() < 1e-14);
        assert!((m.std_error - p.std_error).abs() < 1e-14);
    }

    #[test]
    fn fingerprint_mismatch() {
        let e = rec(&[1.0], "a").merge(&rec(&[1.0], "b"));
        assert!(matches!(e, Err(Error::FingerprintMismatch(..))));
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let xs = [1.0, 3.0, 2.0, 7.0, 4.0];
        let (m, se) = jackknife(&[&xs], |v| v[0]);
        let (m2, _) = mean_se(&xs);
        let sd = (xs.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / 4.0).sqrt();
        assert!((m - m2).abs() < 1e-14);
        assert!((se - sd / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|x| 2.0 - 1.4 * x).collect();
        let f = weighted_line_fit(&x, &y, &[0.0; 3]).unwrap();
        assert!((f.slope + 1.4).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_is_degenerate() {
        assert!(weighted_line_fit(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_err());
    }
}
