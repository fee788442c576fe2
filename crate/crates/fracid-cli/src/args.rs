//! Argument groups shared by several subcommands.

use crate::manifest::{Run, ScenarioRef};
use clap::Args;
use fracid::pipeline::RegressionConfig;
use fracid::quasiopt::QuasiOptConfig;
use fracid::scenario::{builtin, load_scenario, observe, uniform_times, NoiseKind, NoiseSpec, Observation, ProblemKind, Scenario, BUILTIN_NAMES};
use fracid::{Error, Result};
use std::path::PathBuf;

/// Tolerance for `ψ₀` agreement between an observation file and its scenario.
pub const PSI0_TOL: f64 = 1e-12;

pub fn parse_noise(s: &str) -> std::result::Result<NoiseKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Built-in name (fip_ex82, sip_ex83, ex74) or path to a scenario JSON file.
    #[arg(long, default_value = "fip_ex82")]
    pub scenario: String,
    /// Leading order of a built-in scenario.
    #[arg(long, default_value_t = 0.5)]
    pub nu: f64,
    /// Kernel or second-order exponent of a built-in scenario.
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<(Scenario, ScenarioRef)> {
        if BUILTIN_NAMES.contains(&self.scenario.as_str()) {
            let s = builtin(&self.scenario, self.nu, self.gamma)?;
            let r = ScenarioRef { name: s.name.clone(), path: None, nu: Some(self.nu), gamma: self.gamma };
            return Ok((s, r));
        }
        let path = PathBuf::from(&self.scenario);
        if !path.is_file() {
            return Err(Error::UnknownScenario(self.scenario.clone()));
        }
        let s = load_scenario(&std::fs::read_to_string(&path)?)?;
        let r = ScenarioRef { name: s.name.clone(), path: Some(self.scenario.clone()), nu: None, gamma: None };
        Ok((s, r))
    }

    pub fn load_into(&self, run: &mut Run) -> Result<Scenario> {
        let (s, r) = self.load()?;
        run.scenario(r);
        Ok(s)
    }
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    /// Noise level.
    #[arg(long, default_value_t = 0.001)]
    pub delta: f64,
    /// Noise shape: ftn, stn, ttn or none.
    #[arg(long, default_value = "ftn", value_parser = parse_noise)]
    pub noise: NoiseKind,
    /// Number of observation times.
    #[arg(long = "K", default_value_t = 20)]
    pub k: usize,
    /// Observation step; times are k·tau.
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
}

impl SynthArgs {
    pub fn spec(&self) -> NoiseSpec {
        NoiseSpec { kind: self.noise, delta: self.delta }
    }

    pub fn observe(&self, s: &Scenario, run: &mut Run) -> Result<Observation> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain(format!("delta = {} must be nonnegative", self.delta)));
        }
        run.param("noise", self.spec())?;
        run.param("K", self.k)?;
        run.param("tau", self.tau)?;
        observe(s, &uniform_times(self.k, self.tau), self.spec())
    }
}

#[derive(Args, Debug, Clone)]
pub struct ObsArgs {
    /// Observation CSV; synthesized from the scenario when omitted.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    #[command(flatten)]
    pub synth: SynthArgs,
}

impl ObsArgs {
    /// Reads or synthesizes the observation and checks its `ψ₀` against the scenario.
    pub fn resolve(&self, s: &Scenario, run: &mut Run) -> Result<Observation> {
        let Some(path) = &self.obs else { return self.synth.observe(s, run) };
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let obs = Observation::read_csv(std::io::BufReader::new(file))?;
        if (obs.psi0 - s.psi0()).abs() > PSI0_TOL {
            return Err(Error::InputMismatch(format!(
                "observation psi0 = {} but scenario '{}' has psi0 = {}",
                obs.psi0,
                s.name,
                s.psi0()
            )));
        }
        run.param("observation", path.to_string_lossy())?;
        Ok(obs)
    }
}

#[derive(Args, Debug, Clone)]
pub struct RegArgs {
    /// Fractional exponents of the regression basis.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
    pub betas: Vec<f64>,
    /// Largest Jacobi degree.
    #[arg(long, default_value_t = 5)]
    pub jacobi_degree: usize,
    /// Jacobi weight parameter.
    #[arg(long, default_value_t = 0.99)]
    pub weight_a: f64,
}

impl RegArgs {
    pub fn config(&self, run: &mut Run) -> Result<RegressionConfig> {
        let cfg = RegressionConfig { betas: self.betas.clone(), jacobi_max_degree: self.jacobi_degree, weight_a: self.weight_a };
        run.param("regression", &cfg)?;
        Ok(cfg)
    }
}

/// Grid and selection overrides; unset values keep the defaults anchored at `t_K`.
#[derive(Args, Debug, Clone, Default)]
pub struct QuasiArgs {
    #[arg(long)]
    pub sigma1: Option<f64>,
    #[arg(long)]
    pub xi1: Option<f64>,
    #[arg(long = "K1")]
    pub k1: Option<usize>,
    #[arg(long)]
    pub tbar1: Option<f64>,
    #[arg(long)]
    pub xi2: Option<f64>,
    #[arg(long = "K2")]
    pub k2: Option<usize>,
    /// Weight of the first component in the selection norm.
    #[arg(long)]
    pub upsilon: Option<f64>,
    /// Ratio step for FIP scenarios.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ratio step for SIP scenarios.
    #[arg(long)]
    pub mu: Option<f64>,
}

impl QuasiArgs {
    pub fn config(&self, kind: ProblemKind, t_k: f64, run: &mut Run) -> Result<QuasiOptConfig> {
        let mut c = QuasiOptConfig::defaults(kind, t_k);
        c.sigma1 = self.sigma1.unwrap_or(c.sigma1);
        c.xi1 = self.xi1.unwrap_or(c.xi1);
        c.k1 = self.k1.unwrap_or(c.k1);
        c.tbar1 = self.tbar1.unwrap_or(c.tbar1);
        c.xi2 = self.xi2.unwrap_or(c.xi2);
        c.k2 = self.k2.unwrap_or(c.k2);
        c.upsilon = self.upsilon.unwrap_or(c.upsilon);
        let (step, ignored) = match kind {
            ProblemKind::Fip => (self.lambda, self.mu.map(|_| "--mu")),
            ProblemKind::Sip => (self.mu, self.lambda.map(|_| "--lambda")),
        };
        if let Some(flag) = ignored {
            eprintln!("warning: {flag} does not apply to this scenario and is ignored");
        }
        c.ratio_step = step.unwrap_or(c.ratio_step);
        c.validate()?;
        run.param("quasiopt", c)?;
        Ok(c)
    }
}
