//! Error horizons for the reconstruction formulas and the constants they
//! depend on, plus empirical error curves on exact scenarios.
//!
//! Every horizon is a minimum over branch terms. The report keeps each term
//! and names the one that attains the minimum.

use crate::error::{Error, Result};
use crate::fracseries::{FracPowerSeries, Placement};
use crate::reconstruct::{nu1_estimate, prelimit_exact, EstimatorInput, UFunction};
use crate::scenario::{ProblemKind, Scenario};
use crate::specfun::{gamma, gamma_lower};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Type I: every coefficient sits outside its derivative. Type II: inside.
/// Chosen from the leading term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FdoType {
    I,
    II,
}

impl FdoType {
    pub fn of(s: &Scenario) -> Self {
        match s.fdo.leading().placement {
            Placement::Outside => FdoType::I,
            Placement::Inside => FdoType::II,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub value: f64,
    pub active: String,
    pub terms: Vec<BranchTerm>,
}

impl Horizon {
    fn min_of(terms: Vec<(&str, f64)>) -> Result<Self> {
        let mut best: Option<(usize, f64)> = None;
        for (k, (name, v)) in terms.iter().enumerate() {
            if v.is_nan() || *v < 0.0 {
                return Err(Error::InvariantViolation { what: format!("branch term {name} = {v}"), residual: *v });
            }
            if best.is_none_or(|(_, b)| *v < b) {
                best = Some((k, *v));
            }
        }
        let (k, value) = best.ok_or_else(|| Error::Domain("empty minimum".into()))?;
        Ok(Self {
            value,
            active: terms[k].0.to_string(),
            terms: terms.into_iter().map(|(n, v)| BranchTerm { name: n.into(), value: v }).collect(),
        })
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} outside (0, 1)")))
    }
}

fn check_eps(value: f64, lo: f64, hi: f64) -> Result<()> {
    if value > lo && value < hi {
        Ok(())
    } else {
        Err(Error::EpsilonOutOfRange { value, lo, hi })
    }
}

/// Four-way minimum for the leading-order horizon.
pub fn t_i0(eps_i: f64, fdo: FdoType, rho1_at_0: f64, c_nu_0: f64, t_star: f64) -> Result<Horizon> {
    check_open_unit("eps_I", eps_i)?;
    check_open_unit("t_star", t_star)?;
    if c_nu_0 == 0.0 {
        return Err(Error::Domain("c_nu(0) = 0".into()));
    }
    let g = gamma_lower();
    let c = c_nu_0.abs();
    let e = 2.0 / eps_i;
    let (a, b) = match fdo {
        FdoType::I => {
            let r = rho1_at_0.abs();
            if r == 0.0 {
                return Err(Error::Domain("rho_1(0) = 0".into()));
            }
            ((r / (g * c)).powf(-e), (c / (g * r)).powf(-e))
        }
        FdoType::II => ((g * c).powf(e), (c / g).powf(-e)),
    };
    Horizon::min_of(vec![("t_star", t_star), ("ratio_low", a), ("ratio_high", b), ("eps_power", (1.0 - eps_i).powf(e))])
}

const T_K_GRID: usize = 2048;

/// Largest `T ≤ t*` such that `K0` keeps its sign at zero on `[0, T]`.
pub fn t_k(k0: &FracPowerSeries, t_star: f64) -> Result<f64> {
    let k_at = |t: f64| k0.eval(t);
    let s0 = k_at(0.0)?;
    if s0 == 0.0 {
        return Err(Error::KernelVanishesAtZero);
    }
    let same = |v: f64| v != 0.0 && v.signum() == s0.signum();
    let mut prev = 0.0;
    for k in 1..=T_K_GRID {
        let t = t_star * k as f64 / T_K_GRID as f64;
        if !same(k_at(t)?) {
            let (mut lo, mut hi) = (prev, t);
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if same(k_at(mid)?) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(lo);
        }
        prev = t;
    }
    Ok(t_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Supplied,
    Estimated,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub value: f64,
    pub provenance: Provenance,
}

impl Entry {
    fn pick(supplied: Option<f64>, fallback: f64, fallback_kind: Provenance) -> Self {
        match supplied {
            Some(value) => Entry { value, provenance: Provenance::Supplied },
            None => Entry { value: fallback, provenance: fallback_kind },
        }
    }
}

/// Values the user vouches for. Anything left `None` is estimated from the
/// scenario or falls back to 1.0 with a warning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerInputs {
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c5: Option<f64>,
    /// Hölder exponent of the coefficients.
    pub alpha: Option<f64>,
    /// Upper bound of the kernel exponent search.
    pub gamma0: Option<f64>,
    pub r: Option<f64>,
    pub r1: Option<f64>,
    pub g_norm: Option<f64>,
    pub phi_norm: Option<f64>,
    pub rho_norms: Option<Vec<f64>>,
    pub rho_istar_inv_norm: Option<f64>,
    pub a0_norm: Option<f64>,
    pub b0_norm: Option<f64>,
    pub k0_sup: Option<f64>,
    pub k0_seminorm: Option<f64>,
}

impl LedgerInputs {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Every existential constant supplied, as needed for a certified run.
    pub fn is_complete(&self) -> bool {
        [self.c0, self.c1, self.c2, self.c5, self.alpha, self.r, self.r1, self.g_norm, self.phi_norm]
            .iter()
            .all(Option::is_some)
    }
}

/// Largest value on a uniform grid of `density` intervals over `[0, t_star]`.
pub fn sampled_sup(f: &dyn Fn(f64) -> Result<f64>, t_star: f64, density: usize) -> Result<f64> {
    let mut m: f64 = 0.0;
    for k in 0..=density {
        m = m.max(f(t_star * k as f64 / density as f64)?.abs());
    }
    Ok(m)
}

/// Largest difference quotient `|f(t)−f(s)|/|t−s|^e` over grid pairs.
pub fn sampled_seminorm(f: &dyn Fn(f64) -> Result<f64>, exponent: f64, t_star: f64, density: usize) -> Result<f64> {
    let ts: Vec<f64> = (0..=density).map(|k| t_star * k as f64 / density as f64).collect();
    let vs = ts.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let mut m: f64 = 0.0;
    for i in 0..ts.len() {
        for j in i + 1..ts.len() {
            m = m.max((vs[j] - vs[i]).abs() / (ts[j] - ts[i]).powf(exponent));
        }
    }
    Ok(m)
}

/// Sampled norms. All values are lower bounds of the true norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimates {
    pub density: usize,
    pub rho_sup: Vec<f64>,
    /// Lipschitz seminorms of the coefficients.
    pub rho_seminorm: Vec<f64>,
    pub rho_istar_inv: Option<f64>,
    pub a0: f64,
    pub b0: f64,
    pub k0_sup: f64,
    pub k0_seminorm: f64,
}

impl NormEstimates {
    pub fn rho_norms(&self) -> Vec<f64> {
        self.rho_sup.iter().zip(&self.rho_seminorm).map(|(a, b)| a + b).collect()
    }
}

fn series_norm(s: &FracPowerSeries, exponent: f64, t_star: f64, density: usize) -> Result<f64> {
    let f = |t: f64| s.eval(t);
    Ok(sampled_sup(&f, t_star, density)? + sampled_seminorm(&f, exponent, t_star, density)?)
}

/// Coefficients use exponent 1, `a0`, `b0` use `alpha/2`, `K0` uses `alpha5`.
pub fn estimate_norms(s: &Scenario, t_star: f64, density: usize, alpha: f64, alpha5: f64) -> Result<NormEstimates> {
    if density == 0 {
        return Err(Error::Domain("grid density must be positive".into()));
    }
    let mut rho_sup = Vec::new();
    let mut rho_seminorm = Vec::new();
    for term in s.fdo.terms() {
        let f = |t: f64| term.coeff.eval(t);
        rho_sup.push(sampled_sup(&f, t_star, density)?);
        rho_seminorm.push(sampled_seminorm(&f, 1.0, t_star, density)?);
    }
    let rho_istar_inv = match s.true_params.i_star {
        Some(i) => {
            let rho = &s.fdo.terms()[i - 1].coeff;
            let inv = |t: f64| {
                let r = rho.eval(t)?;
                if r == 0.0 {
                    Err(Error::DivisionByZero(format!("rho_i* vanishes at t = {t}")))
                } else {
                    Ok(1.0 / r)
                }
            };
            Some(sampled_sup(&inv, t_star, density)? + sampled_seminorm(&inv, 1.0, t_star, density)?)
        }
        None => None,
    };
    let k = |t: f64| s.kernel.k0.eval(t);
    Ok(NormEstimates {
        density,
        rho_sup,
        rho_seminorm,
        rho_istar_inv,
        a0: series_norm(&s.a0, alpha / 2.0, t_star, density)?,
        b0: series_norm(&s.b0, alpha / 2.0, t_star, density)?,
        k0_sup: sampled_sup(&k, t_star, density)?,
        k0_seminorm: sampled_seminorm(&k, alpha5, t_star, density)?,
    })
}

/// Every constant entering the horizons, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub c0: Entry,
    pub c1: Entry,
    pub c2: Entry,
    pub c5: Entry,
    pub alpha: Entry,
    pub gamma0: Entry,
    pub r: Entry,
    pub r1: Entry,
    pub g_norm: Entry,
    pub phi_norm: Entry,
    pub rho_at_zero: Vec<f64>,
    pub rho_norms: Vec<Entry>,
    pub rho_istar_inv_norm: Option<Entry>,
    pub a0_norm: Entry,
    pub b0_norm: Entry,
    pub k0_sup: Entry,
    pub k0_seminorm: Entry,
    pub domain_measure: f64,
    pub boundary_measure: f64,
    pub delta_flag: u8,
    pub i_star: Option<usize>,
    pub c3: f64,
    pub c6: f64,
    pub c7: Option<f64>,
    pub c8: Option<f64>,
    pub r2: f64,
    pub r3: f64,
    pub warnings: Vec<String>,
}

const DEFAULT_ALPHA: f64 = 0.5;
const DEFAULT_GAMMA0: f64 = 0.99;

impl ConstantsLedger {
    /// Supplied values first, then sampled norms, then 1.0 with a warning.
    pub fn build(s: &Scenario, inputs: &LedgerInputs, norms: &NormEstimates) -> Result<Self> {
        let mut warnings = Vec::new();
        let mut existential = |name: &str, v: Option<f64>| {
            if v.is_none() {
                warnings.push(format!("{name} not supplied: using default 1.0, horizons are not certified"));
            }
            Entry::pick(v, 1.0, Provenance::Default)
        };
        let c0 = existential("C0", inputs.c0);
        let c1 = existential("C1", inputs.c1);
        let c2 = existential("C2", inputs.c2);
        let c5 = existential("C5", inputs.c5);
        let r = existential("R", inputs.r);
        let r1 = existential("R1", inputs.r1);
        let g_norm = existential("norm of g", inputs.g_norm);
        let phi_norm = existential("norm of phi", inputs.phi_norm);
        if inputs.alpha.is_none() {
            warnings.push(format!("alpha not supplied: using default {DEFAULT_ALPHA}"));
        }
        if inputs.gamma0.is_none() && s.true_params.kind == ProblemKind::Sip {
            warnings.push(format!("gamma0 not supplied: using default {DEFAULT_GAMMA0}"));
        }
        let alpha = Entry::pick(inputs.alpha, DEFAULT_ALPHA, Provenance::Default);
        let gamma0 = Entry::pick(inputs.gamma0, DEFAULT_GAMMA0, Provenance::Default);
        let m = s.fdo.terms().len();
        let rho_norms = match &inputs.rho_norms {
            Some(v) if v.len() != m => {
                return Err(Error::InputMismatch(format!("{} coefficient norms for {m} terms", v.len())));
            }
            Some(v) => v.iter().map(|&x| Entry { value: x, provenance: Provenance::Supplied }).collect(),
            None => norms.rho_norms().into_iter().map(|x| Entry { value: x, provenance: Provenance::Estimated }).collect(),
        };
        let est = |v: Option<f64>, e: f64| Entry::pick(v, e, Provenance::Estimated);
        let rho_istar_inv_norm = match (inputs.rho_istar_inv_norm, norms.rho_istar_inv) {
            (Some(v), _) => Some(Entry { value: v, provenance: Provenance::Supplied }),
            (None, Some(e)) => Some(Entry { value: e, provenance: Provenance::Estimated }),
            (None, None) => None,
        };
        let rho_at_zero = s.fdo.terms().iter().map(|t| t.coeff.eval(0.0)).collect::<Result<Vec<_>>>()?;
        let mut ledger = Self {
            c0,
            c1,
            c2,
            c5,
            alpha,
            gamma0,
            r,
            r1,
            g_norm,
            phi_norm,
            rho_at_zero,
            rho_norms,
            rho_istar_inv_norm,
            a0_norm: est(inputs.a0_norm, norms.a0),
            b0_norm: est(inputs.b0_norm, norms.b0),
            k0_sup: est(inputs.k0_sup, norms.k0_sup),
            k0_seminorm: est(inputs.k0_seminorm, norms.k0_seminorm),
            domain_measure: s.domain_measure,
            boundary_measure: s.boundary_measure,
            delta_flag: s.delta_flag,
            i_star: s.true_params.i_star,
            c3: 0.0,
            c6: 0.0,
            c7: None,
            c8: None,
            r2: 0.0,
            r3: 0.0,
            warnings,
        };
        ledger.derive();
        ledger.check()?;
        Ok(ledger)
    }

    fn derived(&self) -> (f64, f64, Option<f64>, Option<f64>, f64, f64) {
        let om = self.domain_measure;
        let (c0, c2, c5) = (self.c0.value, self.c2.value, self.c5.value);
        let sum: f64 = self.rho_norms.iter().map(|e| e.value).sum();
        let c3 = c0 * om * c2.max(1.0) * sum;
        let c6 = (c0 * om).max(c2 * c0 * om).max(c5);
        let c7 = self.i_star.zip(self.rho_istar_inv_norm).map(|(i, inv)| {
            let others: f64 = self.rho_norms.iter().enumerate().filter(|(k, _)| k + 1 != i).map(|(_, e)| e.value).sum();
            inv.value.max(1.0) * (c0 * om * c2.max(1.0) * others + c3)
        });
        let c8 = c7.map(|c7| c6 + c7);
        let bd = self.boundary_measure.max(2.0);
        let r = self.r.value;
        let r2 = self.delta_flag as f64 * bd * self.phi_norm.value + c0 * om * self.b0_norm.value * r;
        let r3 = om * self.g_norm.value + bd * self.phi_norm.value + c0 * om * self.a0_norm.value * r;
        (c3, c6, c7, c8, r2, r3)
    }

    fn derive(&mut self) {
        (self.c3, self.c6, self.c7, self.c8, self.r2, self.r3) = self.derived();
    }

    /// Positivity of the constants and agreement of the derived ones with
    /// a fresh recomputation.
    pub fn check(&self) -> Result<()> {
        let named = [
            ("C0", self.c0.value),
            ("C1", self.c1.value),
            ("C2", self.c2.value),
            ("C5", self.c5.value),
            ("R", self.r.value),
            ("R1", self.r1.value),
            ("C6", self.c6),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvariantViolation { what: format!("{name} must be positive and finite"), residual: v });
            }
        }
        check_open_unit("alpha", self.alpha.value)?;
        check_open_unit("gamma0", self.gamma0.value)?;
        let norms = self.rho_norms.iter().map(|e| e.value).chain([
            self.g_norm.value,
            self.phi_norm.value,
            self.a0_norm.value,
            self.b0_norm.value,
            self.k0_sup.value,
            self.k0_seminorm.value,
        ]);
        for v in norms {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvariantViolation { what: "norms must be finite and nonnegative".into(), residual: v });
            }
        }
        let (c3, c6, c7, c8, r2, r3) = self.derived();
        let pairs = [
            ("C3", c3, self.c3),
            ("C6", c6, self.c6),
            ("C7", c7.unwrap_or(0.0), self.c7.unwrap_or(0.0)),
            ("C8", c8.unwrap_or(0.0), self.c8.unwrap_or(0.0)),
            ("R2", r2, self.r2),
            ("R3", r3, self.r3),
        ];
        for (name, fresh, stored) in pairs {
            let res = (fresh - stored).abs();
            if res > 1e-12 * fresh.abs().max(1.0) {
                return Err(Error::InvariantViolation { what: format!("{name} disagrees with its parts"), residual: res });
            }
        }
        Ok(())
    }

    pub fn rho_norm_sum(&self) -> f64 {
        self.rho_norms.iter().map(|e| e.value).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Amplification constant of the leading-order horizon.
pub fn c4(ledger: &ConstantsLedger, fdo: FdoType) -> Result<f64> {
    let g = gamma_lower();
    let c0 = ledger.c0.value;
    match fdo {
        FdoType::I => {
            let r1 = ledger.rho_at_zero.first().copied().unwrap_or(0.0).abs();
            if r1 == 0.0 {
                return Err(Error::MissingConstant("rho_1(0)".into()));
            }
            let minor: f64 = ledger.rho_at_zero.iter().skip(1).map(|x| x.abs()).sum();
            Ok(c0 / g * (1.0 + 2.0 * minor / (r1 * g)))
        }
        FdoType::II => {
            let sum = ledger.rho_norm_sum();
            if sum == 0.0 {
                return Err(Error::MissingConstant("coefficient norms all vanish".into()));
            }
            Ok(c0 / g * (ledger.c1.value + ledger.c2.value) * (1.0 + 2.0 / g) * sum)
        }
    }
}

/// `α ν₂ / 2`, or `α ν₃ / 2` when the unknown order is the second one.
pub fn nu0(s: &Scenario, alpha: f64) -> Result<f64> {
    let orders = s.fdo.orders();
    match s.true_params.kind {
        ProblemKind::Fip => {
            if orders.len() < 3 {
                return Err(Error::WrongBranch(format!("FIP with M = {} has only the leading-order horizon", orders.len())));
            }
            let k = if s.true_params.i_star == Some(2) { 2 } else { 1 };
            Ok(alpha * orders[k] / 2.0)
        }
        ProblemKind::Sip => orders
            .get(1)
            .map(|n2| alpha * n2 / 2.0)
            .ok_or_else(|| Error::WrongBranch("SIP with M = 1 has no minor order".into())),
    }
}

fn c_nu_at_zero(s: &Scenario) -> Result<f64> {
    s.c_nu()?.eval(0.0)
}

/// Horizon for the leading order. FIP needs `M ≥ 3`. SIP also takes `T_K`.
pub fn t_i(eps_i: f64, ledger: &ConstantsLedger, s: &Scenario, t_star: f64) -> Result<Horizon> {
    let fdo = FdoType::of(s);
    let rho1 = ledger.rho_at_zero[0];
    let c = c_nu_at_zero(s)?;
    let base = t_i0(eps_i, fdo, rho1, c, t_star)?;
    let alpha = ledger.alpha.value;
    let denom = match fdo {
        FdoType::I => c4(ledger, fdo)? * rho1.abs() * ledger.r.value,
        FdoType::II => c4(ledger, fdo)? * ledger.r.value,
    };
    let ratio = eps_i * c.abs() / denom;
    let mut terms = vec![("t_i0", base.value)];
    match s.true_params.kind {
        ProblemKind::Fip => terms.push(("remainder", ratio.powf(1.0 / nu0(s, alpha)?))),
        ProblemKind::Sip => {
            if let Ok(n0) = nu0(s, alpha) {
                terms.push(("remainder", ratio.powf(1.0 / n0)));
            }
            terms.push(("t_k", t_k(&s.kernel.k0, t_star)?));
        }
    }
    Horizon::min_of(terms)
}

/// User configuration for the lower and upper order bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderBounds {
    pub nu_under: f64,
    pub nu_bar: f64,
}

impl OrderBounds {
    /// `ν_M / 2` and `(1 + ν₁) / 2`.
    pub fn defaults(s: &Scenario) -> Self {
        let orders = s.fdo.orders();
        Self { nu_under: orders[orders.len() - 1] / 2.0, nu_bar: (1.0 + orders[0]) / 2.0 }
    }
}

/// Admissible interval `(0, hi)` for `ε_I` when the minor order is sought.
pub fn eps_i_range(s: &Scenario, b: OrderBounds) -> Result<(f64, f64)> {
    let i = s.true_params.i_star.ok_or_else(|| Error::WrongBranch("needs an FIP scenario".into()))?;
    let orders = s.fdo.orders();
    let next = orders.get(i).copied().unwrap_or(b.nu_under);
    Ok((0.0, next.min(1.0 - b.nu_bar)))
}

/// `ν_{1,a} − ν_{i*+1}`, or `ν_{1,a} − ν̲` when `i* = M`.
pub fn eps_nu(s: &Scenario, nu1_a: f64, b: OrderBounds) -> Result<f64> {
    let i = s.true_params.i_star.ok_or_else(|| Error::WrongBranch("needs an FIP scenario".into()))?;
    Ok(nu1_a - s.fdo.orders().get(i).copied().unwrap_or(b.nu_under))
}

/// Smallest `n ≥ 1` with `|u(n)| > 1e-12·scale`.
pub fn first_nonvanishing(u: impl Fn(u32) -> Result<f64>, scale: f64, max_n: u32) -> Result<u32> {
    for n in 1..=max_n {
        if u(n)?.abs() > 1e-12 * scale {
            return Ok(n);
        }
    }
    Err(Error::NotFound(format!("U(0, n) vanishes for every n <= {max_n}")))
}

pub const N_STAR_MAX: u32 = 1_000_000;

/// `n*` and `𝒰(0, n*)` from the exact data.
pub fn find_n_star(s: &Scenario) -> Result<(u32, f64)> {
    let inp = EstimatorInput::exact(s)?;
    let u = UFunction::new(&inp, s.true_params.nu1)?;
    let n = first_nonvanishing(|n| u.eval(0.0, n), u.scale_at_zero()?, N_STAR_MAX)?;
    Ok((n, u.eval(0.0, n)?))
}

/// Data of the higher-regularity hypothesis: the horizon `t₁*`, the Hölder
/// exponent `α₁`, `𝔠₂(0)`, and the time where `ν_{1,a}` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H7Data {
    pub t1_star: f64,
    pub alpha1: f64,
    pub c2_0: f64,
    pub t_a: f64,
}

impl H7Data {
    fn validate(&self) -> Result<()> {
        check_open_unit("t1_star", self.t1_star)?;
        check_open_unit("alpha1", self.alpha1)?;
        check_open_unit("t_a", self.t_a)?;
        if self.c2_0 == 0.0 {
            return Err(Error::MissingConstant("c2(0) must be nonzero".into()));
        }
        Ok(())
    }
}

/// Full and known-leading-order horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonPair {
    pub full: Option<Horizon>,
    pub known_nu1: Horizon,
    pub absent_reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorOrderRequest {
    pub eps_i: f64,
    pub eps_ii: f64,
    pub eps: f64,
    pub lambda: f64,
    pub t_star: f64,
    pub bounds: OrderBounds,
}

/// `C₉` with `n*` and `𝒰(0, n*)`.
pub fn c9(ledger: &ConstantsLedger, nu0: f64, n_star: u32, u0: f64) -> Result<f64> {
    let c7 = ledger.c7.ok_or_else(|| Error::MissingConstant("C7 needs the unknown-order coefficient".into()))?;
    let inv = ledger.rho_istar_inv_norm.ok_or_else(|| Error::MissingConstant("norm of 1/rho_i*".into()))?.value;
    let g = gamma_lower();
    let om = ledger.domain_measure;
    let (c0, c2) = (ledger.c0.value, ledger.c2.value);
    let bracket = (c7 + c0 * om * (c2 * inv).max(1.0)) * ledger.r.value + n_star as f64 * u0.abs();
    Ok(g * u0.abs() / (3.0 * gamma(nu0)? * bracket))
}

/// Horizon for the unknown minor order.
pub fn t_ii(req: &MinorOrderRequest, ledger: &ConstantsLedger, s: &Scenario, h7: &H7Data) -> Result<HorizonPair> {
    if s.true_params.kind != ProblemKind::Fip {
        return Err(Error::WrongBranch("the minor-order horizon needs an FIP scenario".into()));
    }
    h7.validate()?;
    check_open_unit("lambda", req.lambda)?;
    let (_, hi) = eps_i_range(s, req.bounds)?;
    check_eps(req.eps_i, 0.0, hi)?;
    let nu1_a = nu1_estimate(&EstimatorInput::exact(s)?, h7.t_a)?;
    let e_nu = eps_nu(s, nu1_a, req.bounds)?;
    check_eps(req.eps_ii, e_nu, 1.0)?;
    check_eps(req.eps, 0.0, 1.0 - req.lambda.powf((req.eps_ii - e_nu) / 3.0))?;

    let alpha = ledger.alpha.value;
    let n0 = nu0(s, alpha)?;
    let (n_star, u0) = find_n_star(s)?;
    let c9 = c9(ledger, n0, n_star, u0)?;
    let n = n_star as f64;
    let damp = c9 * req.eps / (1.0 + n * c9 * req.eps);
    let known_nu1 = Horizon::min_of(vec![
        ("t_star", req.t_star),
        ("n_star", (2.0 * n).powf(-1.0 / n0)),
        ("c9", damp.powf(2.0 / (alpha * s.true_params.nu1))),
    ])?;
    let ti = t_i(req.eps_i, ledger, s, req.t_star)?;
    let c8 = ledger.c8.ok_or_else(|| Error::MissingConstant("C8".into()))?;
    let a3 = h7.alpha1.min(n0);
    let full = Horizon::min_of(vec![
        ("t1_star", h7.t1_star),
        ("t_i", ti.value),
        ("n_star", (2.0 * n).powf(-1.0 / n0)),
        ("c9", damp.powf(1.0 / n0)),
        ("c2", (req.eps * h7.c2_0.abs() / (3.0 * c8 * (ledger.r.value + ledger.r1.value))).powf(1.0 / a3)),
    ])?;
    Ok(HorizonPair { full: Some(full), known_nu1, absent_reason: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRequest {
    pub eps_i: f64,
    pub eps_iii: f64,
    pub eps: f64,
    pub mu: f64,
    pub t_star: f64,
    pub gamma_bar: f64,
    pub alpha5: f64,
    pub bounds: OrderBounds,
}

/// Horizon for the kernel exponent.
pub fn t_iii(req: &KernelRequest, ledger: &ConstantsLedger, s: &Scenario, h7: &H7Data) -> Result<HorizonPair> {
    if s.true_params.kind != ProblemKind::Sip {
        return Err(Error::WrongBranch("the kernel horizon needs an SIP scenario".into()));
    }
    h7.validate()?;
    check_open_unit("mu", req.mu)?;
    check_open_unit("alpha5", req.alpha5)?;
    check_open_unit("gamma_bar", req.gamma_bar)?;
    check_eps(req.eps_iii, 1.0 - req.gamma_bar, 1.0)?;
    check_eps(req.eps, 0.0, 1.0 - req.mu.powf((req.eps_iii + req.gamma_bar - 1.0) / 3.0))?;
    check_eps(req.eps_i, 0.0, 1.0 - req.bounds.nu_bar)?;
    if s.true_params.second <= req.gamma_bar {
        return Err(Error::HypothesisViolated(format!(
            "gamma = {} not above gamma_bar = {}",
            s.true_params.second, req.gamma_bar
        )));
    }

    let alpha = ledger.alpha.value;
    let c1_0 = s.c1_for(s.psi_exact())?.eval(0.0)?;
    let k0_0 = s.kernel.k0.eval(0.0)?;
    if k0_0 == 0.0 {
        return Err(Error::KernelVanishesAtZero);
    }
    let g = gamma_lower();
    let kernel_term = |a6: f64| {
        let num = c1_0.abs() * k0_0.abs() * g * req.eps;
        let den = 3.0 * (ledger.k0_seminorm.value.powf(req.alpha5) * c1_0.abs() + ledger.k0_sup.value * ledger.r2);
        (num / den).powf(1.0 / a6)
    };
    let nu1 = s.true_params.nu1;
    let a6_known = req.alpha5.min(alpha / 2.0).min(2.0 * nu1 / (2.0 - alpha));
    let known_nu1 = Horizon::min_of(vec![("t_star", req.t_star), ("kernel", kernel_term(a6_known))])?;

    let orders = s.fdo.orders();
    let Some(&nu2) = orders.get(1) else {
        return Ok(HorizonPair { full: None, known_nu1, absent_reason: Some("M = 1: only the known-order horizon applies".into()) });
    };
    let a6 = req.alpha5.min(alpha / 2.0).min(2.0 * nu2 / (2.0 - alpha));
    let a7 = h7.alpha1.min(alpha * nu2 / 2.0);
    let ti = t_i(req.eps_i, ledger, s, req.t_star)?;
    let tk = t_k(&s.kernel.k0, req.t_star)?;
    let rest = 3.0 * (ledger.c3 * ledger.r.value + ledger.c6 * ledger.r1.value + ledger.r3);
    let full = Horizon::min_of(vec![
        ("t1_star", h7.t1_star),
        ("t_i", ti.value),
        ("t_k", tk),
        ("kernel", kernel_term(a6)),
        ("f_gamma", (req.eps * h7.c2_0.abs() / rest).powf(1.0 / a7)),
    ])?;
    Ok(HorizonPair { full: Some(full), known_nu1, absent_reason: None })
}

/// Inputs of a full report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRequest {
    pub t_star: f64,
    pub eps_i: f64,
    pub eps_ii: Option<f64>,
    pub eps_iii: Option<f64>,
    pub eps: f64,
    pub lambda: f64,
    pub mu: f64,
    pub gamma_bar: Option<f64>,
    pub alpha5: f64,
    pub bounds: Option<OrderBounds>,
    pub h7: Option<H7Data>,
}

impl BoundsRequest {
    pub fn new(t_star: f64, eps_i: f64) -> Self {
        Self {
            t_star,
            eps_i,
            eps_ii: None,
            eps_iii: None,
            eps: 0.01,
            lambda: 0.99,
            mu: 0.01,
            gamma_bar: None,
            alpha5: 0.5,
            bounds: None,
            h7: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub scenario: String,
    pub t_i0: Horizon,
    pub t_k: Option<f64>,
    pub t_i: Option<Horizon>,
    pub t_ii: Option<HorizonPair>,
    pub t_iii: Option<HorizonPair>,
    pub epsilons: (f64, Option<f64>, Option<f64>),
    pub ledger: ConstantsLedger,
    pub warnings: Vec<String>,
}

impl BoundsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Every horizon that applies to the scenario. Branches that do not apply or
/// lack inputs are absent with a warning; precondition failures on requested
/// branches are errors.
pub fn bounds_report(s: &Scenario, ledger: ConstantsLedger, req: &BoundsRequest) -> Result<BoundsReport> {
    let mut warnings = ledger.warnings.clone();
    let rho1 = ledger.rho_at_zero[0];
    let base = t_i0(req.eps_i, FdoType::of(s), rho1, c_nu_at_zero(s)?, req.t_star)?;
    let sip = s.true_params.kind == ProblemKind::Sip;
    let kernel_sign = if sip { Some(t_k(&s.kernel.k0, req.t_star)?) } else { None };
    let leading = match t_i(req.eps_i, &ledger, s, req.t_star) {
        Ok(h) => Some(h),
        Err(Error::WrongBranch(why)) => {
            warnings.push(format!("T_I absent: {why}; T_I is bounded by T_I0 only"));
            None
        }
        Err(e) => return Err(e),
    };
    if let Some(h) = &leading {
        if h.value > base.value {
            return Err(Error::InvariantViolation { what: "T_I exceeds T_I0".into(), residual: h.value - base.value });
        }
    }
    let bounds = req.bounds.unwrap_or_else(|| OrderBounds::defaults(s));
    let mut minor_h = None;
    let mut kernel_h = None;
    match (req.h7, sip) {
        (None, _) => warnings.push("no h7 data: T_II and T_III not computed".into()),
        (Some(h7), false) => match req.eps_ii {
            Some(eps_ii) => {
                let r = MinorOrderRequest { eps_i: req.eps_i, eps_ii, eps: req.eps, lambda: req.lambda, t_star: req.t_star, bounds };
                match t_ii(&r, &ledger, s, &h7) {
                    Ok(p) => minor_h = Some(p),
                    Err(Error::WrongBranch(why)) => warnings.push(format!("T_II absent: {why}")),
                    Err(e) => return Err(e),
                }
            }
            None => warnings.push("eps_II not given: T_II not computed".into()),
        },
        (Some(h7), true) => match req.eps_iii {
            Some(eps_iii) => {
                let gamma_bar = req.gamma_bar.unwrap_or_else(|| {
                    warnings.push("gamma_bar not given: using half the scenario's kernel exponent".into());
                    s.true_params.second / 2.0
                });
                let r = KernelRequest {
                    eps_i: req.eps_i,
                    eps_iii,
                    eps: req.eps,
                    mu: req.mu,
                    t_star: req.t_star,
                    gamma_bar,
                    alpha5: req.alpha5,
                    bounds,
                };
                kernel_h = Some(t_iii(&r, &ledger, s, &h7)?);
            }
            None => warnings.push("eps_III not given: T_III not computed".into()),
        },
    }
    Ok(BoundsReport {
        scenario: s.name.clone(),
        t_i0: base,
        t_k: kernel_sign,
        t_i: leading,
        t_ii: minor_h,
        t_iii: kernel_h,
        epsilons: (req.eps_i, req.eps_ii, req.eps_iii),
        ledger,
        warnings,
    })
}

/// Which error curve to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeltaKind {
    /// `|ν₁ − ν_{1,a}|`
    Leading,
    /// `|ν_{i*} − ν_{i*,a}|`
    MinorOrder,
    /// `|γ − γ_a|`
    KernelExponent,
}

impl DeltaKind {
    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            1 => Ok(DeltaKind::Leading),
            2 => Ok(DeltaKind::MinorOrder),
            3 => Ok(DeltaKind::KernelExponent),
            _ => Err(Error::Domain(format!("error curve index {k} not in 1..=3"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaPoint {
    pub t_a: f64,
    pub delta: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaCurve {
    pub kind: DeltaKind,
    pub points: Vec<DeltaPoint>,
}

impl DeltaCurve {
    /// Largest grid point `t` such that every valid-checked point `≤ t` has
    /// `Δ < eps`.
    pub fn threshold(&self, eps: f64) -> Option<f64> {
        let mut pts: Vec<&DeltaPoint> = self.points.iter().collect();
        pts.sort_by(|a, b| a.t_a.total_cmp(&b.t_a));
        let mut best = None;
        for p in pts {
            if p.valid && p.delta < eps {
                best = Some(p.t_a);
            } else {
                break;
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t_a", "delta", "valid"])?;
        for p in &self.points {
            out.write_record([format!("{:e}", p.t_a), format!("{:e}", p.delta), p.valid.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Error of the prelimit estimators on the exact data, one point per `t_a`.
/// Points where an estimator degenerates are kept and marked invalid.
pub fn empirical_delta(s: &Scenario, kind: DeltaKind, grid: &[f64], ratio_step: f64) -> Result<DeltaCurve> {
    use rayon::prelude::*;
    let sip = s.true_params.kind == ProblemKind::Sip;
    match kind {
        DeltaKind::MinorOrder if sip => return Err(Error::WrongBranch("minor-order error needs an FIP scenario".into())),
        DeltaKind::KernelExponent if !sip => return Err(Error::WrongBranch("kernel-exponent error needs an SIP scenario".into())),
        _ => {}
    }
    let tp = &s.true_params;
    let points = grid
        .par_iter()
        .map(|&t_a| match prelimit_exact(s, t_a, ratio_step) {
            Ok(p) => {
                let delta = match kind {
                    DeltaKind::Leading => (tp.nu1 - p.nu1).abs(),
                    _ => (tp.second - p.second).abs(),
                };
                DeltaPoint { t_a, delta, valid: delta.is_finite() }
            }
            Err(_) => DeltaPoint { t_a, delta: f64::NAN, valid: false },
        })
        .collect();
    Ok(DeltaCurve { kind, points })
}

/// `10^{-1}, …, 10^{-k}`.
pub fn log_grid(decades: u32, per_decade: u32) -> Vec<f64> {
    (0..=decades * per_decade).map(|k| 10f64.powf(-1.0 - k as f64 / per_decade as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn certified() -> LedgerInputs {
        LedgerInputs {
            c0: Some(1.0),
            c1: Some(1.0),
            c2: Some(1.0),
            c5: Some(1.0),
            alpha: Some(0.5),
            gamma0: Some(0.95),
            r: Some(1.0),
            r1: Some(1.0),
            g_norm: Some(1.0),
            phi_norm: Some(0.0),
            ..Default::default()
        }
    }

    fn ledger_for(s: &Scenario) -> ConstantsLedger {
        let norms = estimate_norms(s, 0.2, 128, 0.5, 0.5).unwrap();
        ConstantsLedger::build(s, &certified(), &norms).unwrap()
    }

    #[test]
    fn t_i0_type_one_example() {
        let c = gamma(1.5).unwrap() / 2.0;
        let h = t_i0(0.5, FdoType::I, 0.5, c, 0.2).unwrap();
        assert_relative_eq!(h.value, 0.0625, epsilon = 1e-15);
        assert_eq!(h.active, "eps_power");
        // each branch evaluated independently
        let g = gamma_lower();
        assert_relative_eq!(h.term("ratio_low").unwrap(), (0.5 / (g * c)).powi(-4), max_relative = 1e-14);
        assert_relative_eq!(h.term("ratio_low").unwrap(), 0.379434, epsilon = 1e-6);
        assert_relative_eq!(h.term("ratio_high").unwrap(), 0.99717, epsilon = 5e-5);
    }

    #[test]
    fn t_i0_limits_and_symmetry() {
        let h = t_i0(1.0 - 1e-9, FdoType::I, 0.5, 0.4, 0.2).unwrap();
        assert!(h.value < 1e-12);
        let h = t_i0(0.4, FdoType::II, 0.5, 1.0, 0.9).unwrap();
        let g = gamma_lower();
        assert_relative_eq!(h.term("ratio_low").unwrap(), g.powf(5.0), max_relative = 1e-14);
        assert_relative_eq!(h.term("ratio_high").unwrap(), g.powf(5.0), max_relative = 1e-14);
        assert!(matches!(t_i0(1.0, FdoType::I, 0.5, 0.4, 0.2), Err(Error::Domain(_))));
        assert!(matches!(t_i0(0.0, FdoType::I, 0.5, 0.4, 0.2), Err(Error::Domain(_))));
    }

    #[test]
    fn t_k_examples() {
        let up = FracPowerSeries::new([(1.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(t_k(&up, 0.2).unwrap(), 0.2);
        let down = FracPowerSeries::new([(1.0, 0.0), (-4.0, 1.0)]).unwrap();
        assert!((t_k(&down, 0.5).unwrap() - 0.25).abs() <= 1e-12);
        assert_eq!(t_k(&FracPowerSeries::constant(-1.0), 0.3).unwrap(), 0.3);
        assert!(matches!(t_k(&FracPowerSeries::monomial(1.0, 1.0), 0.3), Err(Error::KernelVanishesAtZero)));
        let neg = FracPowerSeries::new([(-1.0, 0.0), (8.0, 2.0)]).unwrap();
        assert!((t_k(&neg, 0.9).unwrap() - 8f64.sqrt().recip()).abs() <= 1e-12);
    }

    #[test]
    fn c4_examples() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let l = ledger_for(&s);
        let g = gamma_lower();
        let expect = 1.0 / g * (1.0 + 2.0 * (0.25 + 0.25) / (0.5 * g));
        assert_relative_eq!(c4(&l, FdoType::I).unwrap(), expect, max_relative = 1e-14);
        let mut single = l.clone();
        single.rho_at_zero.truncate(1);
        assert_relative_eq!(c4(&single, FdoType::I).unwrap(), 1.0 / g, max_relative = 1e-14);
        let mut zero = l.clone();
        for e in &mut zero.rho_norms {
            e.value = 0.0;
        }
        assert!(matches!(c4(&zero, FdoType::II), Err(Error::MissingConstant(_))));
        let sum = l.rho_norm_sum();
        assert_relative_eq!(c4(&l, FdoType::II).unwrap(), 2.0 / g * (1.0 + 2.0 / g) * sum, max_relative = 1e-14);
    }

    #[test]
    fn ledger_derivations() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let norms = estimate_norms(&s, 0.2, 64, 0.5, 0.5).unwrap();
        let l = ConstantsLedger::build(&s, &LedgerInputs::default(), &norms).unwrap();
        assert!(l.warnings.iter().any(|w| w.starts_with("C0")));
        assert_eq!(l.c0.provenance, Provenance::Default);
        assert_eq!(l.rho_norms[2].provenance, Provenance::Estimated);
        assert_relative_eq!(l.c3, l.rho_norm_sum(), max_relative = 1e-15);
        let mut bad = l.clone();
        bad.c3 *= 1.0 + 1e-9;
        assert!(matches!(bad.check(), Err(Error::InvariantViolation { .. })));
        let c = ConstantsLedger::build(&s, &certified(), &norms).unwrap();
        assert!(c.warnings.is_empty(), "{:?}", c.warnings);
        assert!(certified().is_complete());
        let back: ConstantsLedger = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn ledger_rejects_bad_inputs() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let norms = estimate_norms(&s, 0.2, 16, 0.5, 0.5).unwrap();
        let neg = LedgerInputs { c0: Some(-1.0), ..certified() };
        assert!(ConstantsLedger::build(&s, &neg, &norms).is_err());
        let short = LedgerInputs { rho_norms: Some(vec![1.0]), ..certified() };
        assert!(matches!(ConstantsLedger::build(&s, &short, &norms), Err(Error::InputMismatch(_))));
        assert!(LedgerInputs::from_json(r#"{"c9": 1}"#).is_err());
        assert_eq!(LedgerInputs::from_json(r#"{"c0": 2}"#).unwrap().c0, Some(2.0));
    }

    #[test]
    fn norm_estimates() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let n = estimate_norms(&s, 0.2, 200, 0.5, 0.5).unwrap();
        assert_eq!(n.rho_seminorm[0], 0.0);
        assert_eq!(n.rho_seminorm[1], 0.0);
        assert_relative_eq!(n.rho_seminorm[2], 0.1, epsilon = 1e-3);
        assert!(n.rho_seminorm[2] <= 0.1);
        assert_relative_eq!(n.rho_sup[2], 0.26, epsilon = 1e-15);
        let coarse = estimate_norms(&s, 0.2, 50, 0.5, 0.5).unwrap();
        assert!(coarse.rho_seminorm[2] <= n.rho_seminorm[2]);
        assert!(estimate_norms(&s, 0.2, 0, 0.5, 0.5).is_err());
    }

    #[test]
    fn leading_horizon_branches() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let l = ledger_for(&s);
        let h = t_i(0.3, &l, &s, 0.2).unwrap();
        let base = t_i0(0.3, FdoType::I, 0.5, c_nu_at_zero(&s).unwrap(), 0.2).unwrap();
        assert!(h.value <= base.value);
        // i* = 3, so ν₀ = α ν₂ / 2
        let c = c_nu_at_zero(&s).unwrap().abs();
        let ratio = 0.3 * c / (c4(&l, FdoType::I).unwrap() * 0.5 * 1.0);
        assert_relative_eq!(h.term("remainder").unwrap(), ratio.powf(1.0 / (0.5 * 0.25 / 2.0)), max_relative = 1e-12);

        let e = builtin("ex74", 0.5, None).unwrap();
        assert!(matches!(t_i(0.3, &ledger_for(&e), &e, 0.2), Err(Error::WrongBranch(_))));

        let sip = builtin("sip_ex83", 0.5, None).unwrap();
        let l = ledger_for(&sip);
        let h = t_i(0.3, &l, &sip, 0.2).unwrap();
        let tk = t_k(&sip.kernel.k0, 0.2).unwrap();
        assert!(h.value <= tk && h.term("t_k").is_some());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn remainder_terms_grow_with_eps(a in 0.01f64..0.9, b in 0.01f64..0.9) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let s = builtin("fip_ex82", 0.5, None).unwrap();
            let l = ledger_for(&s);
            let rl = t_i(lo, &l, &s, 0.2).unwrap().term("remainder").unwrap();
            let rh = t_i(hi, &l, &s, 0.2).unwrap().term("remainder").unwrap();
            prop_assert!(rl <= rh);
            prop_assert!(t_i(lo, &l, &s, 0.2).unwrap().value <= t_i0(lo, FdoType::I, 0.5, c_nu_at_zero(&s).unwrap(), 0.2).unwrap().value);
        }
    }

    #[test]
    fn n_star_examples() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let (n, u0) = find_n_star(&s).unwrap();
        assert_eq!(n, 1);
        assert!(u0.abs() > 0.0);
        // A/n + B cancels exactly at n = 2
        let u = |n: u32| Ok(2.0 / n as f64 - 1.0);
        assert_eq!(first_nonvanishing(u, 2.0, 100).unwrap(), 1);
        let u = |n: u32| Ok(if n <= 2 { 0.0 } else { 1.0 / n as f64 });
        assert_eq!(first_nonvanishing(u, 1.0, 100).unwrap(), 3);
        let u = |_: u32| Ok(0.0);
        assert!(matches!(first_nonvanishing(u, 1.0, 50), Err(Error::NotFound(_))));
        assert!(find_n_star(&builtin("sip_ex83", 0.5, None).unwrap()).is_err());
    }

    fn h7() -> H7Data {
        H7Data { t1_star: 0.1, alpha1: 0.5, c2_0: 0.5, t_a: 1e-3 }
    }

    fn minor(eps_i: f64, eps: f64, s: &Scenario) -> MinorOrderRequest {
        MinorOrderRequest { eps_i, eps_ii: 0.9, eps, lambda: 0.99, t_star: 0.2, bounds: OrderBounds::defaults(s) }
    }

    #[test]
    fn minor_order_horizon() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let l = ledger_for(&s);
        let p = t_ii(&minor(0.05, 1e-5, &s), &l, &s, &h7()).unwrap();
        let full = p.full.unwrap();
        let base = t_i0(0.05, FdoType::I, 0.5, c_nu_at_zero(&s).unwrap(), 0.2).unwrap();
        assert!(full.value <= h7().t1_star.min(base.value));
        assert!(p.known_nu1.value <= 0.2);
        let tiny = t_ii(&minor(0.05, 1e-14, &s), &l, &s, &h7()).unwrap();
        assert!(tiny.full.unwrap().value < full.value);
        assert!(tiny.known_nu1.value < 1e-20);

        // ε_I must stay below min{ν̲, 1 − ν̄} = min{1/12, 1/4}
        assert!(matches!(t_ii(&minor(0.09, 1e-5, &s), &l, &s, &h7()), Err(Error::EpsilonOutOfRange { .. })));
        let mut r = minor(0.05, 1e-5, &s);
        r.eps_ii = 0.2;
        assert!(matches!(t_ii(&r, &l, &s, &h7()), Err(Error::EpsilonOutOfRange { .. })));
        assert!(matches!(t_ii(&minor(0.05, 0.5, &s), &l, &s, &h7()), Err(Error::EpsilonOutOfRange { .. })));
    }

    #[test]
    fn minor_order_known_variant_formula() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let l = ledger_for(&s);
        let p = t_ii(&minor(0.05, 1e-4, &s), &l, &s, &h7()).unwrap();
        let n0 = 0.5 * 0.25 / 2.0;
        let (_, u0) = find_n_star(&s).unwrap();
        let c9v = c9(&l, n0, 1, u0).unwrap();
        let d = c9v * 1e-4 / (1.0 + c9v * 1e-4);
        let expect = 0.2f64.min(2f64.powf(-1.0 / n0)).min(d.powf(2.0 / (0.5 * 0.5)));
        assert_relative_eq!(p.known_nu1.value, expect, max_relative = 1e-13);
    }

    fn kernel_req(eps_iii: f64, eps: f64, s: &Scenario) -> KernelRequest {
        KernelRequest {
            eps_i: 0.1,
            eps_iii,
            eps,
            mu: 0.01,
            t_star: 0.2,
            gamma_bar: 0.5,
            alpha5: 0.5,
            bounds: OrderBounds::defaults(s),
        }
    }

    #[test]
    fn kernel_horizon() {
        let s = builtin("sip_ex83", 0.5, None).unwrap();
        let l = ledger_for(&s);
        let p = t_iii(&kernel_req(0.8, 0.1, &s), &l, &s, &h7()).unwrap();
        let full = p.full.unwrap();
        let base = t_i0(0.1, FdoType::I, 0.5, c_nu_at_zero(&s).unwrap(), 0.2).unwrap();
        let tk = t_k(&s.kernel.k0, 0.2).unwrap();
        assert!(full.value <= base.value.min(tk).min(0.1));
        assert!(matches!(t_iii(&kernel_req(0.5, 0.1, &s), &l, &s, &h7()), Err(Error::EpsilonOutOfRange { .. })));
        assert!(matches!(t_iii(&kernel_req(0.8, 0.9, &s), &l, &s, &h7()), Err(Error::EpsilonOutOfRange { .. })));
        let mut high = kernel_req(0.95, 0.1, &s);
        high.gamma_bar = 0.92;
        assert!(matches!(t_iii(&high, &l, &s, &h7()), Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn kernel_known_variant_single_term() {
        let s = builtin("sip_ex83", 0.4, None).unwrap();
        let mut one = s.clone();
        let lead = s.fdo.terms()[0].clone();
        one.fdo = crate::fracseries::FdoSpec::new(vec![lead]).unwrap();
        let l = ledger_for(&s);
        let mut l1 = l.clone();
        l1.rho_at_zero.truncate(1);
        l1.rho_norms.truncate(1);
        l1.derive();
        let p = t_iii(&kernel_req(0.8, 0.1, &one), &l1, &one, &h7()).unwrap();
        assert!(p.full.is_none());
        let a6 = 0.5f64.min(0.25).min(2.0 * 0.4 / 1.5);
        let c1 = -1.0f64;
        let g = gamma_lower();
        let num = c1.abs() * g * 0.1;
        let den = 3.0 * (l1.k0_seminorm.value.powf(0.5) * c1.abs() + l1.k0_sup.value * l1.r2);
        assert_relative_eq!(p.known_nu1.term("kernel").unwrap(), (num / den).powf(1.0 / a6), max_relative = 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn horizons_grow_with_eps(a in 1e-7f64..1e-3, b in 1e-7f64..1e-3) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let s = builtin("fip_ex82", 0.5, None).unwrap();
            let l = ledger_for(&s);
            let p = t_ii(&minor(0.05, lo, &s), &l, &s, &h7()).unwrap();
            let q = t_ii(&minor(0.05, hi, &s), &l, &s, &h7()).unwrap();
            prop_assert!(p.full.unwrap().value <= q.full.unwrap().value);
            prop_assert!(p.known_nu1.value <= q.known_nu1.value);
            let k = builtin("sip_ex83", 0.5, None).unwrap();
            let lk = ledger_for(&k);
            let p = t_iii(&kernel_req(0.8, lo, &k), &lk, &k, &h7()).unwrap();
            let q = t_iii(&kernel_req(0.8, hi, &k), &lk, &k, &h7()).unwrap();
            prop_assert!(p.full.unwrap().value <= q.full.unwrap().value);
            prop_assert!(p.known_nu1.value <= q.known_nu1.value);
        }
    }

    #[test]
    fn report_json_and_absent_branches() {
        let e = builtin("ex74", 0.5, None).unwrap();
        let r = bounds_report(&e, ledger_for(&e), &BoundsRequest::new(0.2, 0.3)).unwrap();
        assert!(r.t_i.is_none() && r.t_k.is_none());
        assert!(r.warnings.iter().any(|w| w.starts_with("T_I absent")));
        let s = builtin("sip_ex83", 0.5, None).unwrap();
        let mut req = BoundsRequest::new(0.2, 0.1);
        req.h7 = Some(h7());
        req.eps_iii = Some(0.8);
        req.eps = 0.1;
        req.gamma_bar = Some(0.5);
        let r = bounds_report(&s, ledger_for(&s), &req).unwrap();
        assert!(r.t_i.as_ref().unwrap().value <= r.t_i0.value);
        let json = r.to_json().unwrap();
        assert!(json.contains("\"active\""));
        let back: BoundsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn leading_delta_snapshot() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let grid: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
        let c = empirical_delta(&s, DeltaKind::Leading, &grid, 0.99).unwrap();
        for p in c.points.iter().filter(|p| p.t_a <= 1e-3) {
            assert!(p.valid && p.delta < 0.05);
        }
        assert_eq!(c.threshold(0.05), Some(0.1));
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_a,delta,valid\n"));
        assert_eq!(text.lines().count(), 9);
    }

    #[test]
    fn delta_curves_shrink() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let grid = log_grid(6, 1);
        let c = empirical_delta(&s, DeltaKind::MinorOrder, &grid, 0.99).unwrap();
        let d: Vec<f64> = c.points.iter().map(|p| p.delta).collect();
        assert!(d.last().unwrap() < d.first().unwrap());
        let k = builtin("sip_ex83", 0.5, None).unwrap();
        let c = empirical_delta(&k, DeltaKind::KernelExponent, &grid, 0.01).unwrap();
        let d: Vec<f64> = c.points.iter().map(|p| p.delta).collect();
        assert!(d.windows(2).all(|w| w[1] <= w[0]), "{d:?}");
        assert!(empirical_delta(&k, DeltaKind::MinorOrder, &grid, 0.01).is_err());
    }

    #[test]
    fn invalid_points_marked() {
        let s = builtin("fip_ex82", 0.5, None).unwrap();
        let c = empirical_delta(&s, DeltaKind::Leading, &[1.5, 0.1], 0.99).unwrap();
        assert!(!c.points[0].valid);
        assert!(c.points[1].valid);
        assert_eq!(c.threshold(0.5), Some(0.1));
        let c = empirical_delta(&s, DeltaKind::Leading, &[0.0, 0.1], 0.99).unwrap();
        assert_eq!(c.threshold(0.5), None);
    }
}
