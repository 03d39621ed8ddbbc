//! Preconditioned Crank-Nicolson chains on a standard Gaussian reference.
//!
//! Target density relative to N(0, I): e^{L(ξ)}. The proposal
//! ξ' = ρξ + √(1-ρ²)η leaves the reference invariant, so the acceptance
//! ratio is e^{L(ξ') - L(ξ)} whatever the dimension. Used where importance
//! weights over independent paths collapse (long cylinders).

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::replica_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcnSettings {
    /// Independent chains; they are the replicas of any jackknife.
    pub chains: usize,
    /// Steps discarded per chain; the step size adapts only here.
    pub burn_in: usize,
    /// Recorded steps per chain.
    pub steps: usize,
    /// Prior draws scanned for the best starting point.
    pub starts: usize,
    pub target_accept: f64,
}

impl Default for PcnSettings {
    fn default() -> Self {
        PcnSettings { chains: 16, burn_in: 2000, steps: 8000, starts: 32, target_accept: 0.3 }
    }
}

impl PcnSettings {
    fn validate(&self) -> Result<()> {
        if self.chains < 2 || self.steps == 0 || self.starts == 0 {
            return Err(Error::InvalidArgument(format!(
                "pCN needs >= 2 chains, >= 1 step and >= 1 start, got {self:?}"
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument(format!("target acceptance {}", self.target_accept)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    /// Averages of the observed vector over recorded steps.
    pub means: Vec<f64>,
    pub acceptance: f64,
    /// Frozen step size β = √(1-ρ²).
    pub beta: f64,
}

/// Run `settings.chains` chains in parallel. `log_target` returns L(ξ) and
/// a state from which `observe` extracts the recorded vector. Chain `i`
/// draws from replica stream `i` of `seed`.
pub fn pcn_chains<S, L, O>(dim: usize, settings: &PcnSettings, seed: u64, log_target: L, observe: O) -> Result<Vec<ChainSummary>>
where
    L: Fn(&[f64]) -> Result<(f64, S)> + Sync,
    O: Fn(&S) -> Vec<f64> + Sync,
{
    settings.validate()?;
    if dim == 0 {
        return Err(Error::InvalidArgument("pCN dimension must be positive".into()));
    }
    (0..settings.chains)
        .into_par_iter()
        .map(|i| run_chain(dim, settings, seed, i as u64, &log_target, &observe))
        .collect()
}

fn run_chain<S, L, O>(dim: usize, st: &PcnSettings, seed: u64, index: u64, log_target: &L, observe: &O) -> Result<ChainSummary>
where
    L: Fn(&[f64]) -> Result<(f64, S)>,
    O: Fn(&S) -> Vec<f64>,
{
    let mut rng = replica_rng(seed, index);
    let draw = |rng: &mut crate::rng::Rng| -> Vec<f64> { (0..dim).map(|_| rng.sample(StandardNormal)).collect() };
    let mut xi = draw(&mut rng);
    let (mut lt, mut state) = log_target(&xi)?;
    for _ in 1..st.starts {
        let cand = draw(&mut rng);
        let (l, s) = log_target(&cand)?;
        if l > lt || lt.is_nan() {
            (xi, lt, state) = (cand, l, s);
        }
    }
    let mut beta: f64 = 0.1;
    let mut prop = vec![0.0; dim];
    let mut step = |xi: &mut Vec<f64>, lt: &mut f64, state: &mut S, beta: f64, rng: &mut crate::rng::Rng| -> Result<bool> {
        let rho = (1.0 - beta * beta).sqrt();
        for (p, x) in prop.iter_mut().zip(xi.iter()) {
            *p = rho * x + beta * rng.sample::<f64, _>(StandardNormal);
        }
        let (l, s) = log_target(&prop)?;
        let u: f64 = rng.random();
        // -inf current states accept any finite proposal.
        let accept = l.is_finite() && (!lt.is_finite() || u.ln() < l - *lt);
        if accept {
            xi.copy_from_slice(&prop);
            *lt = l;
            *state = s;
        }
        Ok(accept)
    };
    // Robbins-Monro on log β in blocks of 25 steps.
    let block = 25;
    let mut acc_block = 0;
    for k in 0..st.burn_in {
        acc_block += step(&mut xi, &mut lt, &mut state, beta, &mut rng)? as usize;
        if (k + 1) % block == 0 {
            let rate = acc_block as f64 / block as f64;
            let gain = 1.0 / (1.0 + (k / block) as f64).sqrt();
            beta = (beta.ln() + gain * (rate - st.target_accept)).exp().clamp(1e-4, 1.0);
            acc_block = 0;
        }
    }
    let mut current = observe(&state);
    let mut sums = vec![0.0; current.len()];
    let mut accepted = 0;
    for _ in 0..st.steps {
        if step(&mut xi, &mut lt, &mut state, beta, &mut rng)? {
            accepted += 1;
            current = observe(&state);
        }
        for (s, v) in sums.iter_mut().zip(&current) {
            *s += v;
        }
    }
    let n = st.steps as f64;
    Ok(ChainSummary { means: sums.iter().map(|s| s / n).collect(), acceptance: accepted as f64 / n, beta })
}

/// Reorganise chain means into one column per observed component.
pub fn chain_columns(chains: &[ChainSummary]) -> Vec<Vec<f64>> {
    let k = chains.first().map_or(0, |c| c.means.len());
    (0..k).map(|j| chains.iter().map(|c| c.means[j]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_se;

    fn settings() -> PcnSettings {
        PcnSettings { chains: 8, burn_in: 1000, steps: 4000, starts: 4, target_accept: 0.3 }
    }

    #[test]
    fn flat_target_keeps_the_reference() {
        // L ≡ 0: every proposal is accepted and ξ₀ stays N(0, 1).
        let s = PcnSettings { target_accept: 0.5, ..settings() };
        let out = pcn_chains(3, &s, 1, |x| Ok((0.0, x[0])), |x| vec![*x, x * x]).unwrap();
        assert!(out.iter().all(|c| c.acceptance == 1.0 && c.beta == 1.0));
        let cols = chain_columns(&out);
        let (m, se) = mean_se(&cols[0]);
        assert!(m.abs() < 4.0 * se + 1e-3, "{m} {se}");
        let (v, se) = mean_se(&cols[1]);
        assert!((v - 1.0).abs() < 4.0 * se + 1e-3, "{v} {se}");
    }

    #[test]
    fn tilted_gaussian_moments() {
        // e^{a ξ₀} N(0, 1) is N(a, 1).
        let a = 2.0;
        let out = pcn_chains(5, &settings(), 2, |x| Ok((a * x[0], x[0])), |x| vec![*x, (x - a).powi(2)]).unwrap();
        let cols = chain_columns(&out);
        let (m, se) = mean_se(&cols[0]);
        assert!((m - a).abs() < 4.0 * se, "{m} {se}");
        let (v, se) = mean_se(&cols[1]);
        assert!((v - 1.0).abs() < 4.0 * se, "{v} {se}");
        for c in &out {
            assert!((c.acceptance - 0.3).abs() < 0.15, "{}", c.acceptance);
        }
    }

    #[test]
    fn chains_are_reproducible() {
        let f = |s| pcn_chains(4, &settings(), s, |x| Ok((-x[1].powi(4), x[1])), |x| vec![*x]).unwrap();
        assert_eq!(f(9), f(9));
        assert_ne!(f(9), f(10));
    }

    #[test]
    fn bad_settings() {
        let s = PcnSettings { chains: 1, ..settings() };
        assert!(pcn_chains(2, &s, 0, |_| Ok((0.0, ())), |_| vec![]).is_err());
        assert!(pcn_chains(0, &settings(), 0, |_| Ok((0.0, ())), |_| vec![]).is_err());
    }
}
