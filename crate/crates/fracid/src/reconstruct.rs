//! Parameter estimators: the leading order from the small-time logarithmic
//! slope, and the minor order or kernel exponent from ratios of the
//! auxiliary functions `F_ν` and `F_γ`.

use crate::error::{Error, Result};
use crate::fracseries::{FdoTerm, FracPowerSeries, Placement};
use crate::scenario::{KnownData, ProblemKind, Scenario};
use serde::{Deserialize, Serialize};

/// Known data together with the (fitted or exact) observation `ψ`.
#[derive(Debug, Clone)]
pub struct EstimatorInput {
    pub known: KnownData,
    pub psi: FracPowerSeries,
    pub psi0: f64,
    pub kind: ProblemKind,
    /// One-based index of the unknown minor order (FIP only).
    pub i_star: Option<usize>,
}

impl EstimatorInput {
    pub fn new(known: KnownData, psi: FracPowerSeries, psi0: f64, kind: ProblemKind, i_star: Option<usize>) -> Result<Self> {
        let m = known.fdo.terms().len();
        match (kind, i_star) {
            (ProblemKind::Fip, Some(i)) if (2..=m).contains(&i) => {}
            (ProblemKind::Fip, Some(i)) => return Err(Error::Domain(format!("i_star {i} outside 2..={m}"))),
            (ProblemKind::Fip, None) => return Err(Error::Domain("FIP needs i_star".into())),
            (ProblemKind::Sip, _) => {}
        }
        let mut known = known;
        if kind == ProblemKind::Sip {
            known.kernel.gamma = None;
        }
        Ok(Self { known, psi, psi0, kind, i_star: if kind == ProblemKind::Fip { i_star } else { None } })
    }

    /// Input built from a scenario's known data and a given `ψ`.
    pub fn from_scenario(s: &Scenario, psi: FracPowerSeries, psi0: f64) -> Result<Self> {
        Self::new(s.known_data(), psi, psi0, s.true_params.kind, s.true_params.i_star)
    }

    /// Input carrying the scenario's exact `ψ`.
    pub fn exact(s: &Scenario) -> Result<Self> {
        Self::from_scenario(s, s.psi.series.clone(), s.psi.psi0)
    }

    fn leading(&self) -> &FdoTerm {
        self.known.fdo.leading()
    }

    fn i_star_term(&self) -> Option<&FdoTerm> {
        self.i_star.map(|i| &self.known.fdo.terms()[i - 1])
    }
}

/// Estimated `(ν₁, ν_{i*})` or `(ν₁, γ)`. Values are reported as computed,
/// even when they leave `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPair {
    pub nu1: f64,
    pub second: f64,
    pub kind: ProblemKind,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("time {t} outside (0, 1)")))
    }
}

/// `ln|ψ(t̄) − ψ₀| / ln t̄`, or `ln|ρ₁(t̄)ψ(t̄) − ρ₁(0)ψ₀| / ln t̄` when the
/// leading coefficient sits inside the derivative.
pub fn nu1_estimate(inp: &EstimatorInput, t_bar: f64) -> Result<f64> {
    check_time(t_bar)?;
    let lead = inp.leading();
    let arg = match lead.placement {
        Placement::Outside => inp.psi.eval(t_bar)? - inp.psi0,
        Placement::Inside => lead.coeff.eval(t_bar)? * inp.psi.eval(t_bar)? - lead.coeff.eval(0.0)? * inp.psi0,
    };
    if arg == 0.0 || !arg.is_finite() {
        return Err(Error::LogOfZero(t_bar));
    }
    Ok(arg.abs().ln() / t_bar.ln())
}

/// `F_ν` or `F_γ` with every part that does not depend on the estimated
/// leading order collapsed into one series.
#[derive(Debug, Clone)]
pub struct Assembly {
    kind: ProblemKind,
    base: FracPowerSeries,
    leading: FdoTerm,
    psi: FracPowerSeries,
    normalizer: Option<FracPowerSeries>,
}

impl Assembly {
    pub fn new(inp: &EstimatorInput) -> Result<Self> {
        let terms = inp.known.fdo.terms();
        let (base, normalizer) = match inp.kind {
            ProblemKind::Fip => {
                let i_star = inp.i_star.expect("checked in EstimatorInput::new");
                let mut base = inp.known.c_nu_for(&inp.psi)?;
                for (k, term) in terms.iter().enumerate().skip(1) {
                    if k + 1 != i_star {
                        base = base.sub(&term.apply(&inp.psi)?)?;
                    }
                }
                let star = inp.i_star_term().expect("FIP has i_star");
                let norm = (star.placement == Placement::Outside).then(|| star.coeff.clone());
                (base, norm)
            }
            ProblemKind::Sip => {
                let mut base = inp.known.c3_for(&inp.psi)?;
                for term in terms.iter().skip(1) {
                    base = base.sub(&term.apply(&inp.psi)?)?;
                }
                (base, None)
            }
        };
        Ok(Self { kind: inp.kind, base, leading: inp.leading().clone(), psi: inp.psi.clone(), normalizer })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    /// Bracketed part of `F` as a series, before any division by `ρ_{i*}`.
    pub fn numerator_series(&self, nu1_hat: f64) -> Result<FracPowerSeries> {
        self.base.sub(&self.leading.apply_with_order(&self.psi, nu1_hat)?)
    }

    /// `ρ_{i*}` when the unknown term has its coefficient outside.
    pub fn normalizer(&self) -> Option<&FracPowerSeries> {
        self.normalizer.as_ref()
    }

    /// `F_ν(t)` (FIP) or `F_γ(t)` (SIP) with the leading order `nu1_hat`.
    pub fn eval(&self, nu1_hat: f64, t: f64) -> Result<f64> {
        if !(nu1_hat > 0.0 && nu1_hat <= 1.0) {
            return Err(Error::Domain(format!("leading order estimate {nu1_hat} outside (0, 1]")));
        }
        let lead = self.leading.apply_with_order(&self.psi, nu1_hat)?.eval(t)?;
        let num = self.base.eval(t)? - lead;
        match &self.normalizer {
            Some(rho) => {
                let r = rho.eval(t)?;
                if r == 0.0 {
                    return Err(Error::DivisionByZero(format!("rho_i* vanishes at t = {t}")));
                }
                Ok(num / r)
            }
            None => Ok(num),
        }
    }

    /// `ν̂₁ − log_λ|F(λt̄)/F(t̄)|` (FIP) or `1 − log_μ|F(μt̄)/F(t̄)|` (SIP).
    pub fn second_estimate(&self, nu1_hat: f64, t_bar: f64, ratio_step: f64) -> Result<f64> {
        check_time(t_bar)?;
        if !(ratio_step > 0.0 && ratio_step < 1.0) {
            return Err(Error::Domain(format!("ratio step {ratio_step} outside (0, 1)")));
        }
        let num = self.eval(nu1_hat, ratio_step * t_bar)?;
        let den = self.eval(nu1_hat, t_bar)?;
        let ratio = num / den;
        if num == 0.0 || den == 0.0 || !ratio.is_finite() {
            return Err(Error::RatioDegenerate(t_bar));
        }
        let log = ratio.abs().ln() / ratio_step.ln();
        Ok(match self.kind {
            ProblemKind::Fip => nu1_hat - log,
            ProblemKind::Sip => 1.0 - log,
        })
    }
}

pub fn f_nu(inp: &EstimatorInput, nu1_hat: f64, t: f64) -> Result<f64> {
    if inp.kind != ProblemKind::Fip {
        return Err(Error::WrongBranch("f_nu needs an FIP input".into()));
    }
    Assembly::new(inp)?.eval(nu1_hat, t)
}

pub fn f_gamma(inp: &EstimatorInput, nu1_hat: f64, t: f64) -> Result<f64> {
    if inp.kind != ProblemKind::Sip {
        return Err(Error::WrongBranch("f_gamma needs an SIP input".into()));
    }
    Assembly::new(inp)?.eval(nu1_hat, t)
}

pub fn second_estimate(inp: &EstimatorInput, nu1_hat: f64, t_bar: f64, ratio_step: f64) -> Result<f64> {
    Assembly::new(inp)?.second_estimate(nu1_hat, t_bar, ratio_step)
}

/// `ν_{1,a}` and then `ν_{i*,a}` or `γ_a` from the scenario's exact `ψ`.
pub fn prelimit_exact(s: &Scenario, t_a: f64, ratio_step: f64) -> Result<ParamPair> {
    let inp = EstimatorInput::exact(s)?;
    let nu1 = nu1_estimate(&inp, t_a)?;
    let second = Assembly::new(&inp)?.second_estimate(nu1, t_a, ratio_step)?;
    Ok(ParamPair { nu1, second, kind: inp.kind })
}

/// `𝒰(·, n)`: the leading derivative divided by `n` plus `F_ν` at the
/// exact leading order `nu1`.
#[derive(Debug, Clone)]
pub struct UFunction {
    lead: FracPowerSeries,
    numerator: FracPowerSeries,
    normalizer: Option<FracPowerSeries>,
}

impl UFunction {
    pub fn new(inp: &EstimatorInput, nu1: f64) -> Result<Self> {
        let star = inp.i_star_term().ok_or_else(|| Error::WrongBranch("U needs an FIP input".into()))?;
        let asm = Assembly::new(inp)?;
        let lead = match star.placement {
            Placement::Inside => star.coeff.multiply(&inp.psi)?.caputo(nu1)?,
            Placement::Outside => inp.psi.caputo(nu1)?,
        };
        Ok(Self { lead, numerator: asm.numerator_series(nu1)?, normalizer: asm.normalizer })
    }

    pub fn eval(&self, t: f64, n: u32) -> Result<f64> {
        let mut f = self.numerator.eval(t)?;
        if let Some(rho) = &self.normalizer {
            let r = rho.eval(t)?;
            if r == 0.0 {
                return Err(Error::DivisionByZero(format!("rho_i* vanishes at t = {t}")));
            }
            f /= r;
        }
        Ok(self.lead.eval(t)? / n as f64 + f)
    }

    /// Magnitude used to decide whether `𝒰(0, n)` counts as nonzero.
    pub fn scale_at_zero(&self) -> Result<f64> {
        let mut s = self.lead.eval(0.0)?.abs() + self.numerator.eval(0.0)?.abs();
        if let Some(rho) = &self.normalizer {
            s = self.lead.eval(0.0)?.abs() + self.numerator.eval(0.0)?.abs() / rho.eval(0.0)?.abs();
        }
        Ok(s)
    }
}
