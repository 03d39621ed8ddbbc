//! Run configuration: a TOML file with fixed blocks. Unknown keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sinhgordon::correlations::FiniteCylinder;
use sinhgordon::gmc::{GmcSpec, MassSetup, Region, Regularization, DEFAULT_CIRCLE_POINTS, DEFAULT_THETA_CELLS};
use sinhgordon::mcmc::PcnSettings;
use sinhgordon::params::{validate_params, ModelParams};
use sinhgordon::propagator::CQuadrature;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Validate,
    Sample,
    GmcMass,
    Moments,
    ScalingCheck,
    Partition,
    Lambda0,
    GroundState,
    Vertex,
    TwoPoint,
    GapFit,
    Lz,
    McVsLz,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Validate => "validate",
            Experiment::Sample => "sample",
            Experiment::GmcMass => "gmc-mass",
            Experiment::Moments => "moments",
            Experiment::ScalingCheck => "scaling-check",
            Experiment::Partition => "partition",
            Experiment::Lambda0 => "lambda0",
            Experiment::GroundState => "ground-state",
            Experiment::Vertex => "vertex",
            Experiment::TwoPoint => "two-point",
            Experiment::GapFit => "gap-fit",
            Experiment::Lz => "lz",
            Experiment::McVsLz => "mc-vs-lz",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    pub gamma: f64,
    pub mu: f64,
    #[serde(default = "one")]
    pub radius: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Time window [t_min, t_max]: the strip for masses, the window for
    /// sampling.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

fn default_modes() -> usize {
    64
}
fn default_dt() -> f64 {
    1.0 / 64.0
}
fn default_window() -> [f64; 2] {
    [0.0, 1.0]
}

impl Default for SamplerBlock {
    fn default() -> Self {
        Self { n_modes: default_modes(), dt: default_dt(), window: default_window() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegKind {
    Fourier,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmcBlock {
    #[serde(default = "default_reg")]
    pub regularization: RegKind,
    /// Fourier cutoff; defaults to the sampler's n_modes.
    pub cutoff: Option<usize>,
    pub epsilon: Option<f64>,
    #[serde(default = "default_points")]
    pub circle_points: usize,
    #[serde(default = "default_cells")]
    pub theta_cells: usize,
    #[serde(default = "default_sigma")]
    pub sigma: i8,
}

fn default_reg() -> RegKind {
    RegKind::Fourier
}
fn default_points() -> usize {
    DEFAULT_CIRCLE_POINTS
}
fn default_cells() -> usize {
    DEFAULT_THETA_CELLS
}
fn default_sigma() -> i8 {
    1
}

impl Default for GmcBlock {
    fn default() -> Self {
        Self {
            regularization: default_reg(),
            cutoff: None,
            epsilon: None,
            circle_points: default_points(),
            theta_cells: default_cells(),
            sigma: default_sigma(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorBlock {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Zero-mode integration window; defaults to [-8/γ, 8/γ].
    pub c_window: Option<[f64; 2]>,
    #[serde(default = "default_nodes")]
    pub quad_nodes: usize,
}

fn default_samples() -> usize {
    10_000
}
fn default_nodes() -> usize {
    65
}

impl Default for EstimatorBlock {
    fn default() -> Self {
        Self { n_samples: default_samples(), seed: 0, c_window: None, quad_nodes: default_nodes() }
    }
}

/// pCN chains on the finite-T measure. When present, vertex, two-point,
/// gap-fit, mc-vs-lz and lambda0 sample paths with chains instead of
/// weighting independent free paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcnBlock {
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_accept")]
    pub target_accept: f64,
}

fn default_chains() -> usize {
    PcnSettings::default().chains
}
fn default_burn_in() -> usize {
    PcnSettings::default().burn_in
}
fn default_steps() -> usize {
    PcnSettings::default().steps
}
fn default_starts() -> usize {
    PcnSettings::default().starts
}
fn default_accept() -> f64 {
    PcnSettings::default().target_accept
}

impl PcnBlock {
    pub fn settings(&self) -> PcnSettings {
        PcnSettings {
            chains: self.chains,
            burn_in: self.burn_in,
            steps: self.steps,
            starts: self.starts,
            target_accept: self.target_accept,
        }
    }
}

/// Experiment-specific options; each experiment reads the subset it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Vertex weight (vertex, lz, mc-vs-lz, two-point first insertion).
    pub alpha: Option<f64>,
    /// Second two-point insertion weight; defaults to alpha.
    pub alpha2: Option<f64>,
    /// Insertion angles (two-point).
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    /// Insertion time for a one-point vertex.
    pub t: Option<f64>,
    /// Moment order (moments).
    pub p: Option<f64>,
    /// Half-lengths of the finite cylinder (partition, lambda0).
    pub t_halves: Option<Vec<f64>>,
    /// Half-length for vertex and two-point runs.
    pub t_half: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub anchor: Option<f64>,
    pub separations: Option<Vec<f64>>,
    /// Bin edges in the first Fourier coefficient (ground-state).
    pub x1_edges: Option<Vec<f64>>,
    /// Target error of the reference evaluator (lz, mc-vs-lz).
    pub tol: Option<f64>,
    /// Use the Girsanov-shifted estimator for vertex runs.
    pub girsanov: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub params: ParamsBlock,
    #[serde(default)]
    pub sampler: SamplerBlock,
    #[serde(default)]
    pub gmc: GmcBlock,
    #[serde(default)]
    pub estimator: EstimatorBlock,
    #[serde(default)]
    pub options: Options,
    pub pcn: Option<PcnBlock>,
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// CI profile: 16 modes and 10³ replicas.
    pub fn make_fast(&mut self) {
        self.sampler.n_modes = 16;
        self.estimator.n_samples = 1000;
        if self.gmc.cutoff.is_some() {
            self.gmc.cutoff = Some(16);
        }
        if let Some(p) = &mut self.pcn {
            p.chains = p.chains.min(4);
            p.burn_in = p.burn_in.min(200);
            p.steps = p.steps.min(500);
            p.starts = p.starts.min(4);
        }
    }

    pub fn model(&self) -> Result<ModelParams, CliError> {
        validate_params(self.params.gamma, self.params.mu, self.params.radius).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn regularization(&self) -> Result<Regularization, CliError> {
        match self.gmc.regularization {
            RegKind::Fourier => Ok(Regularization::Fourier(self.gmc.cutoff.unwrap_or(self.sampler.n_modes))),
            RegKind::Circle => {
                let epsilon = self.gmc.epsilon.ok_or_else(|| cfg_err("circle regularization needs gmc.epsilon"))?;
                Ok(Regularization::Circle { epsilon, points: self.gmc.circle_points })
            }
        }
    }

    pub fn spec(&self) -> Result<GmcSpec, CliError> {
        Ok(GmcSpec { sigma: self.gmc.sigma, regularization: self.regularization()? })
    }

    pub fn setup(&self) -> MassSetup {
        MassSetup { n_modes: self.sampler.n_modes, dt: self.sampler.dt, theta_cells: self.gmc.theta_cells }
    }

    pub fn region(&self) -> Region {
        Region::strip(self.sampler.window[0], self.sampler.window[1])
    }

    pub fn quadrature(&self) -> Result<CQuadrature, CliError> {
        let [lo, hi] = self.estimator.c_window.unwrap_or([-8.0 / self.params.gamma, 8.0 / self.params.gamma]);
        CQuadrature::new(lo, hi, self.estimator.quad_nodes).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn cylinder(&self, t_half: f64) -> Result<FiniteCylinder, CliError> {
        Ok(FiniteCylinder {
            t_half,
            quad: self.quadrature()?,
            dt: self.sampler.dt,
            theta_cells: self.gmc.theta_cells,
            regularization: self.regularization()?,
            n_modes: self.sampler.n_modes,
        })
    }

    fn require<T: Clone>(&self, v: &Option<T>, key: &str) -> Result<T, CliError> {
        v.clone()
            .ok_or_else(|| cfg_err(format!("experiment {} needs options.{key}", self.experiment.name())))
    }

    pub fn alpha(&self) -> Result<f64, CliError> {
        self.require(&self.options.alpha, "alpha")
    }

    pub fn t_halves(&self) -> Result<Vec<f64>, CliError> {
        self.require(&self.options.t_halves, "t_halves")
    }

    pub fn t_half(&self) -> Result<f64, CliError> {
        self.require(&self.options.t_half, "t_half")
    }

    pub fn radii(&self) -> Result<Vec<f64>, CliError> {
        self.require(&self.options.radii, "radii")
    }

    pub fn separations(&self) -> Result<Vec<f64>, CliError> {
        self.require(&self.options.separations, "separations")
    }

    /// Checks everything an experiment reads, before any sampling.
    pub fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        let s = &self.sampler;
        if s.n_modes == 0 {
            return Err(cfg_err("sampler.n_modes must be positive"));
        }
        if !(s.dt > 0.0) {
            return Err(cfg_err("sampler.dt must be positive"));
        }
        if !(0.0 <= s.window[0] && s.window[0] <= s.window[1]) {
            return Err(cfg_err("sampler.window must satisfy 0 <= t_min <= t_max"));
        }
        if ![1, -1].contains(&self.gmc.sigma) {
            return Err(cfg_err("gmc.sigma must be 1 or -1"));
        }
        if self.gmc.theta_cells < 2 {
            return Err(cfg_err("gmc.theta_cells must be at least 2"));
        }
        if let Regularization::Circle { epsilon, points } = self.regularization()? {
            if !(epsilon > 0.0) || points == 0 {
                return Err(cfg_err("circle regularization needs epsilon > 0 and circle_points > 0"));
            }
        }
        if self.estimator.n_samples < 2 {
            return Err(cfg_err("estimator.n_samples must be at least 2"));
        }
        self.quadrature()?;
        if let Some(p) = &self.pcn {
            if p.chains < 2 || p.steps == 0 || p.starts == 0 {
                return Err(cfg_err("pcn needs chains >= 2, steps >= 1 and starts >= 1"));
            }
            if !(p.target_accept > 0.0 && p.target_accept < 1.0) {
                return Err(cfg_err("pcn.target_accept must lie in (0, 1)"));
            }
        }
        let positive = |v: &[f64], key: &str| {
            if v.is_empty() || v.iter().any(|x| !(*x > 0.0)) {
                Err(cfg_err(format!("options.{key} must be non-empty and positive")))
            } else {
                Ok(())
            }
        };
        let model = self.model()?;
        let admissible = |a: f64| {
            if model.is_admissible(a) {
                Ok(())
            } else {
                Err(cfg_err(format!("alpha {a} is not admissible (Q = {})", model.q_const)))
            }
        };
        use Experiment::*;
        match self.experiment {
            Validate | Sample | GmcMass | ScalingCheck => {}
            Moments => {
                let p = self.require(&self.options.p, "p")?;
                if p == 0.0 || !p.is_finite() {
                    return Err(cfg_err("options.p must be finite and nonzero"));
                }
            }
            Partition => positive(&self.t_halves()?, "t_halves")?,
            Lambda0 => {
                let t = self.t_halves()?;
                positive(&t, "t_halves")?;
                if t.len() < 3 {
                    return Err(cfg_err("lambda0 needs at least three t_halves"));
                }
                if t.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(cfg_err("options.t_halves must increase"));
                }
            }
            GroundState => {
                let t = self.require(&self.options.t, "t")?;
                if !(t > 0.0) {
                    return Err(cfg_err("options.t must be positive"));
                }
                let e = self.require(&self.options.x1_edges, "x1_edges")?;
                if e.len() < 2 || e.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(cfg_err("options.x1_edges must increase"));
                }
            }
            Vertex => {
                self.alpha()?;
                positive(&[self.t_half()?], "t_half")?;
            }
            TwoPoint | GapFit => {
                admissible(self.alpha()?)?;
                positive(&[self.t_half()?], "t_half")?;
                positive(&self.separations()?, "separations")?;
                self.require(&self.options.anchor, "anchor")?;
                if self.experiment == GapFit && self.separations()?.len() < 3 {
                    return Err(cfg_err("gap-fit needs at least three separations"));
                }
            }
            Lz => admissible(self.alpha()?)?,
            McVsLz => {
                admissible(self.alpha()?)?;
                positive(&self.radii()?, "radii")?;
                positive(&[self.t_half()?], "t_half")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "experiment = \"gmc-mass\"\n[params]\ngamma = 1.0\nmu = 1.0\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml(BASE).unwrap();
        assert_eq!(c.sampler.n_modes, 64);
        assert_eq!(c.gmc.theta_cells, 128);
        assert_eq!(c.params.radius, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{BASE}colour = 3\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
        let text = format!("{BASE}[sampler]\nn_mode = 3\n");
        assert!(matches!(RunConfig::from_toml(&text), Err(CliError::Config(_))));
    }

    #[test]
    fn bad_gamma_is_config_error() {
        let text = "experiment = \"lz\"\n[params]\ngamma = 2.5\nmu = 1.0\n[options]\nalpha = 0.1\n";
        assert!(matches!(RunConfig::from_toml(text), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_options_rejected() {
        let text = "experiment = \"lambda0\"\n[params]\ngamma = 1.0\nmu = 1.0\n[options]\nt_halves = [1.0, 2.0]\n";
        assert!(RunConfig::from_toml(text).is_err());
        let text = "experiment = \"lz\"\n[params]\ngamma = 1.0\nmu = 1.0\n";
        assert!(RunConfig::from_toml(text).is_err());
    }

    #[test]
    fn circle_needs_epsilon() {
        let text = format!("{BASE}[gmc]\nregularization = \"circle\"\n");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn pcn_block_defaults_and_checks() {
        let c = RunConfig::from_toml(&format!("{BASE}[pcn]\nsteps = 100\n")).unwrap();
        let p = c.pcn.unwrap().settings();
        assert_eq!((p.chains, p.steps), (16, 100));
        assert!(RunConfig::from_toml(&format!("{BASE}[pcn]\nchains = 1\n")).is_err());
        assert!(RunConfig::from_toml(&format!("{BASE}[pcn]\nstep = 1\n")).is_err());
    }

    #[test]
    fn fast_profile() {
        let mut c = RunConfig::from_toml(BASE).unwrap();
        c.make_fast();
        assert_eq!((c.sampler.n_modes, c.estimator.n_samples), (16, 1000));
    }
}
