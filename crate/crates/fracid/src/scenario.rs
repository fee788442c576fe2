//! Manufactured inverse-problem instances, custom scenario loading and
//! synthesis of noisy integral observations.

use crate::error::{Error, Result};
use crate::fracseries::{apply_fdo, convolve_singular, FdoSpec, FdoTerm, FracPowerSeries, Placement};
use crate::oracle::QuadratureRule;
use crate::specfun::gamma;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["fip_ex82", "sip_ex83", "ex74"];

/// Tolerance of the operator identity checked at load.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProblemKind {
    /// Recover `(ν₁, ν_{i*})`.
    Fip,
    /// Recover `(ν₁, γ)`.
    Sip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    pub kind: ProblemKind,
    pub nu1: f64,
    /// `ν_{i*}` for FIP, `γ` for SIP.
    pub second: f64,
    /// One-based index of the unknown minor order (FIP only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_star: Option<usize>,
}

/// Memory kernel `𝒦(t) = t^{-γ} 𝒦₀(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(rename = "K0")]
    pub k0: FracPowerSeries,
}

impl Kernel {
    pub fn none() -> Self {
        Self { gamma: None, k0: FracPowerSeries::zero() }
    }

    /// `𝒦 ∗ s`; zero when the kernel is absent.
    pub fn convolve(&self, s: &FracPowerSeries) -> Result<FracPowerSeries> {
        match self.gamma {
            Some(g) if !self.k0.is_empty() => convolve_singular(g, &self.k0, s),
            _ => Ok(FracPowerSeries::zero()),
        }
    }

    /// Same convolution with the exponent replaced by `gamma`.
    pub fn convolve_with(&self, gamma: f64, s: &FracPowerSeries) -> Result<FracPowerSeries> {
        if self.k0.is_empty() {
            return Ok(FracPowerSeries::zero());
        }
        convolve_singular(gamma, &self.k0, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiData {
    pub series: FracPowerSeries,
    pub psi0: f64,
}

fn default_measure() -> f64 {
    1.0
}

fn default_boundary() -> f64 {
    4.0
}

/// Data available to the estimators. Operator orders that are unknown in
/// the problem at hand are carried along but never read.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownData {
    pub fdo: FdoSpec,
    pub a0: FracPowerSeries,
    pub b0: FracPowerSeries,
    pub kernel: Kernel,
    pub source_integral: FracPowerSeries,
    pub boundary_integral: FracPowerSeries,
    pub delta_flag: u8,
}

impl KnownData {
    /// `𝔠_ν = G + a₀ψ + 𝒦∗(b₀ψ) − ℐ − δ·𝒦∗ℐ` for a given `ψ`.
    pub fn c_nu_for(&self, psi: &FracPowerSeries) -> Result<FracPowerSeries> {
        let mut acc = self.c3_for(psi)?;
        acc = acc.add(&self.kernel.convolve(&self.b0.multiply(psi)?)?)?;
        if self.delta_flag == 1 {
            acc = acc.sub(&self.kernel.convolve(&self.boundary_integral)?)?;
        }
        Ok(acc)
    }

    /// `𝔠₁ = δℐ − b₀ψ`.
    pub fn c1_for(&self, psi: &FracPowerSeries) -> Result<FracPowerSeries> {
        let b = self.b0.multiply(psi)?;
        if self.delta_flag == 1 {
            self.boundary_integral.sub(&b)
        } else {
            Ok(b.scale(-1.0))
        }
    }

    /// `𝔠₃ = G + a₀ψ − ℐ`.
    pub fn c3_for(&self, psi: &FracPowerSeries) -> Result<FracPowerSeries> {
        self.source_integral
            .add(&self.a0.multiply(psi)?)?
            .sub(&self.boundary_integral)
    }
}

/// A complete manufactured instance of the inverse problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub fdo: FdoSpec,
    pub a0: FracPowerSeries,
    pub b0: FracPowerSeries,
    pub kernel: Kernel,
    /// `∫_Ω g dx`.
    #[serde(rename = "G")]
    pub source_integral: FracPowerSeries,
    /// Boundary flux integral.
    #[serde(rename = "I")]
    pub boundary_integral: FracPowerSeries,
    pub delta_flag: u8,
    pub psi: PsiData,
    pub true_params: TrueParams,
    /// `|Ω|`.
    #[serde(default = "default_measure")]
    pub domain_measure: f64,
    /// `|∂Ω|`.
    #[serde(default = "default_boundary")]
    pub boundary_measure: f64,
}

impl Scenario {
    pub fn psi_exact(&self) -> &FracPowerSeries {
        &self.psi.series
    }

    pub fn psi0(&self) -> f64 {
        self.psi.psi0
    }

    /// Everything except `ψ` and the true parameters.
    pub fn known_data(&self) -> KnownData {
        KnownData {
            fdo: self.fdo.clone(),
            a0: self.a0.clone(),
            b0: self.b0.clone(),
            kernel: self.kernel.clone(),
            source_integral: self.source_integral.clone(),
            boundary_integral: self.boundary_integral.clone(),
            delta_flag: self.delta_flag,
        }
    }

    pub fn c_nu_for(&self, psi: &FracPowerSeries) -> Result<FracPowerSeries> {
        self.known_data().c_nu_for(psi)
    }

    pub fn c_nu(&self) -> Result<FracPowerSeries> {
        self.c_nu_for(&self.psi.series)
    }

    pub fn c1_for(&self, psi: &FracPowerSeries) -> Result<FracPowerSeries> {
        self.known_data().c1_for(psi)
    }

    pub fn c3_for(&self, psi: &FracPowerSeries) -> Result<FracPowerSeries> {
        self.known_data().c3_for(psi)
    }

    /// Largest coefficient of `apply_fdo(ψ) − 𝔠_ν`.
    pub fn identity_residual(&self) -> Result<f64> {
        let diff = apply_fdo(&self.fdo, &self.psi.series)?.sub(&self.c_nu()?)?;
        Ok(diff.terms().iter().fold(0.0, |m, x| m.max(x.c.abs())))
    }

    /// Runs every load-time invariant.
    pub fn validate(&self) -> Result<()> {
        let p0 = self.psi.series.eval(0.0)?;
        if (p0 - self.psi.psi0).abs() > 1e-12 * p0.abs().max(1.0) {
            return Err(Error::InvariantViolation {
                what: "psi0 differs from psi(0)".into(),
                residual: (p0 - self.psi.psi0).abs(),
            });
        }
        if self.delta_flag > 1 {
            return Err(Error::Parse(format!("delta_flag must be 0 or 1, got {}", self.delta_flag)));
        }
        if let Some(g) = self.kernel.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::Domain(format!("kernel exponent {g} outside (0, 1)")));
            }
        }
        let m = self.fdo.terms().len();
        let tp = &self.true_params;
        match tp.kind {
            ProblemKind::Fip => {
                let i = tp.i_star.ok_or_else(|| Error::Parse("FIP scenario needs i_star".into()))?;
                if !(2..=m).contains(&i) {
                    return Err(Error::Domain(format!("i_star {i} outside 2..={m}")));
                }
                let order = self.fdo.terms()[i - 1].order;
                if (order - tp.second).abs() > 1e-12 {
                    return Err(Error::InvariantViolation {
                        what: format!("true second parameter differs from order {i}"),
                        residual: (order - tp.second).abs(),
                    });
                }
            }
            ProblemKind::Sip => {
                if self.kernel.gamma.map_or(true, |g| (g - tp.second).abs() > 1e-12) {
                    return Err(Error::InvariantViolation {
                        what: "true gamma differs from the kernel exponent".into(),
                        residual: (self.kernel.gamma.unwrap_or(0.0) - tp.second).abs(),
                    });
                }
            }
        }
        if (self.fdo.leading().order - tp.nu1).abs() > 1e-12 {
            return Err(Error::InvariantViolation {
                what: "true nu1 differs from the leading order".into(),
                residual: (self.fdo.leading().order - tp.nu1).abs(),
            });
        }
        let c0 = self.c_nu()?.eval(0.0)?;
        if c0 == 0.0 || !c0.is_finite() {
            return Err(Error::InvariantViolation { what: "c_nu(0) vanishes".into(), residual: c0 });
        }
        let r = self.identity_residual()?;
        if r > IDENTITY_TOL {
            return Err(Error::InvariantViolation {
                what: "operator applied to psi differs from the data side".into(),
                residual: r,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parses a JSON scenario and runs every invariant.
pub fn load_scenario(config_text: &str) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(config_text)?;
    s.validate()?;
    Ok(s)
}

fn series(pairs: Vec<(f64, f64)>) -> Result<FracPowerSeries> {
    FracPowerSeries::new(pairs)
}

fn term(order: f64, placement: Placement, coeff: FracPowerSeries) -> FdoTerm {
    FdoTerm { order, placement, coeff }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} outside (0, 1)")))
    }
}

/// Built-in scenario. `gamma` overrides the kernel exponent (defaults:
/// 0.5 for `fip_ex82` and `ex74`, 0.9 for `sip_ex83`).
pub fn builtin(name: &str, nu: f64, gamma: Option<f64>) -> Result<Scenario> {
    check_unit("nu", nu)?;
    let s = match name {
        "fip_ex82" => ex82(nu, gamma.unwrap_or(0.5), false)?,
        "sip_ex83" => ex82(nu, gamma.unwrap_or(0.9), true)?,
        "ex74" => ex74(nu, gamma.unwrap_or(0.5))?,
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    s.validate()?;
    validate_source(&s)?;
    Ok(s)
}

fn ex82(nu: f64, gam: f64, sip: bool) -> Result<Scenario> {
    check_unit("gamma", gam)?;
    let quarter_1pt2 = series(vec![(0.25, 0.0), (0.25, 2.0)])?;
    let fdo = FdoSpec::new(vec![
        term(nu, Placement::Outside, FracPowerSeries::constant(0.5)),
        term(nu / 2.0, Placement::Outside, FracPowerSeries::constant(-0.25)),
        term(nu / 3.0, Placement::Inside, quarter_1pt2),
    ])?;
    let psi = series(vec![(1.0 / 15.0, 0.0), (1.0, nu)])?;
    let bracket = ex82_bracket(nu)?;
    // spatial factors integrate to 1/15, 1/15 and 0
    let mut g = bracket.scale(1.0 / 15.0).add(&series(vec![(-2.0 / 15.0, 0.0), (-2.0, nu)])?)?;
    let (b0, second) = if sip {
        g = g.sub(&ex83_extra(nu, gam)?)?;
        (FracPowerSeries::constant(15.0), gam)
    } else {
        (FracPowerSeries::zero(), nu / 3.0)
    };
    Ok(Scenario {
        name: if sip { "sip_ex83" } else { "fip_ex82" }.into(),
        fdo,
        a0: FracPowerSeries::constant(2.0),
        b0,
        kernel: Kernel { gamma: Some(gam), k0: FracPowerSeries::constant(1.0) },
        source_integral: g,
        boundary_integral: FracPowerSeries::zero(),
        delta_flag: 0,
        psi: PsiData { psi0: 1.0 / 15.0, series: psi },
        true_params: TrueParams {
            kind: if sip { ProblemKind::Sip } else { ProblemKind::Fip },
            nu1: nu,
            second,
            i_star: if sip { None } else { Some(3) },
        },
        domain_measure: 1.0,
        boundary_measure: 4.0,
    })
}

// temporal factor of g₁ in the first example
fn ex82_bracket(nu: f64) -> Result<FracPowerSeries> {
    let g1 = gamma(1.0 + nu)?;
    series(vec![
        (7.5 * g1, 0.0),
        (-3.75 * g1 / gamma(1.0 + nu / 2.0)?, nu / 2.0),
        (1.0 / (2.0 * gamma(3.0 - nu / 3.0)?), 2.0 - nu / 3.0),
        (15.0 * g1 / (4.0 * gamma(1.0 + 2.0 * nu / 3.0)?), 2.0 * nu / 3.0),
        (15.0 * gamma(3.0 + nu)? / (4.0 * gamma(3.0 + 2.0 * nu / 3.0)?), 2.0 + 2.0 * nu / 3.0),
    ])
}

// t^{1-γ}/(1-γ) + 15 t^{1-γ+ν} Γ(1-γ)Γ(1+ν)/Γ(2-γ+ν)
fn ex83_extra(nu: f64, gam: f64) -> Result<FracPowerSeries> {
    series(vec![
        (1.0 / (1.0 - gam), 1.0 - gam),
        (15.0 * gamma(1.0 - gam)? * gamma(1.0 + nu)? / gamma(2.0 - gam + nu)?, 1.0 - gam + nu),
    ])
}

fn ex74_g1bar(nu: f64) -> Result<FracPowerSeries> {
    let g1 = gamma(1.0 + nu)?;
    let c = g1 / (4.0 * gamma(1.0 + 0.8 * nu)?);
    series(vec![(g1 / 2.0, 0.0), (-c, 0.8 * nu), (-c, 2.0 + 0.8 * nu)])
}

fn ex74_g3bar(nu: f64, gam: f64) -> Result<FracPowerSeries> {
    let g1 = gamma(1.0 + nu)?;
    series(vec![
        (2.0 / (1.0 - gam), 1.0 - gam),
        (2.0 / (2.0 - gam), 2.0 - gam),
        (gamma(1.0 - gam)? * g1 / gamma(2.0 - gam + nu)?, 1.0 + nu - gam),
        (gamma(2.0 - gam)? * g1 / gamma(3.0 - gam + nu)?, 2.0 - gam + nu),
    ])
}

fn ex74(nu: f64, gam: f64) -> Result<Scenario> {
    check_unit("gamma", gam)?;
    let fdo = FdoSpec::new(vec![
        term(nu, Placement::Outside, FracPowerSeries::constant(0.5)),
        term(nu / 5.0, Placement::Outside, series(vec![(-0.25, 0.0), (-0.25, 2.0)])?),
    ])?;
    let k = 256.0 / 225.0;
    let psi = series(vec![(2.0 * k, 0.0), (k, nu)])?;
    let g = ex74_g1bar(nu)?.scale(k).sub(&ex74_g3bar(nu, gam)?.scale(4.0 * k))?;
    Ok(Scenario {
        name: "ex74".into(),
        fdo,
        a0: FracPowerSeries::zero(),
        b0: FracPowerSeries::constant(4.0),
        kernel: Kernel { gamma: Some(gam), k0: series(vec![(1.0, 0.0), (1.0, 1.0)])? },
        source_integral: g,
        boundary_integral: FracPowerSeries::zero(),
        delta_flag: 0,
        psi: PsiData { psi0: 2.0 * k, series: psi },
        true_params: TrueParams { kind: ProblemKind::Fip, nu1: nu, second: nu / 5.0, i_star: Some(2) },
        domain_measure: 4.0,
        boundary_measure: 8.0,
    })
}

/// The stated source density `g(x, y, t)` of a built-in scenario and the
/// side length of its square domain.
pub fn source_density(s: &Scenario) -> Result<(Box<dyn Fn(f64, f64, f64) -> f64>, f64)> {
    let nu = s.true_params.nu1;
    let gam = s.kernel.gamma.unwrap_or(0.5);
    match s.name.as_str() {
        "fip_ex82" | "sip_ex83" => {
            let bracket = ex82_bracket(nu)?;
            let g3t = series(vec![
                (1.0 / (1.0 - gam), 1.0 - gam),
                (15.0 * gamma(1.0 - gam)? * gamma(1.0 + nu)? / gamma(2.0 + nu - gam)?, 1.0 - gam + nu),
            ])?;
            let extra = if s.name == "sip_ex83" { Some(ex83_extra(nu, gam)?) } else { None };
            let f = move |x: f64, y: f64, t: f64| {
                let xx = x * x * (1.0 - x).powi(2) + y * y * (1.0 - y).powi(2);
                let p = 2.0 - 6.0 * x + 7.0 * x * x - 2.0 * x.powi(3) + x.powi(4) - 6.0 * y + 7.0 * y * y
                    - 2.0 * y.powi(3)
                    + y.powi(4);
                let q = 1.0 - 3.0 * x + 3.0 * x * x - 3.0 * y + 3.0 * y * y;
                let mut v = xx * bracket.eval(t).unwrap_or(f64::NAN) - 2.0 * (1.0 + 15.0 * t.powf(nu)) * p
                    - 4.0 * q * g3t.eval(t).unwrap_or(f64::NAN);
                if let Some(e) = &extra {
                    v -= e.eval(t).unwrap_or(f64::NAN);
                }
                v
            };
            Ok((Box::new(f), 1.0))
        }
        "ex74" => {
            let g1 = ex74_g1bar(nu)?;
            let g3 = ex74_g3bar(nu, gam)?;
            let f = move |x1: f64, x2: f64, t: f64| {
                let a1 = x1 * x1 * (2.0 - x1).powi(2);
                let a2 = x2 * x2 * (2.0 - x2).powi(2);
                let lap = a2 * (2.0 - 6.0 * x1 + 3.0 * x1 * x1) + a1 * (2.0 - 6.0 * x2 + 3.0 * x2 * x2);
                a1 * a2 * g1.eval(t).unwrap_or(f64::NAN) - 4.0 * lap * (2.0 + t.powf(nu))
                    - 4.0 * (lap + a1 * a2) * g3.eval(t).unwrap_or(f64::NAN)
            };
            Ok((Box::new(f), 2.0))
        }
        other => Err(Error::UnknownScenario(other.to_string())),
    }
}

/// Compares the closed-form `G(t)` with a 32×32 Gauss-Legendre quadrature of
/// the stated density; returns the largest discrepancy.
pub fn source_quadrature_residual(s: &Scenario, times: &[f64]) -> Result<f64> {
    let (g, side) = source_density(s)?;
    let rule = QuadratureRule::gauss_legendre(32)?;
    let mut worst: f64 = 0.0;
    for &t in times {
        let mut q = 0.0;
        for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
            for (yj, wj) in rule.nodes.iter().zip(&rule.weights) {
                q += wi * wj * g(side * xi, side * yj, t);
            }
        }
        q *= side * side;
        let exact = s.source_integral.eval(t)?;
        worst = worst.max((q - exact).abs() / exact.abs().max(1.0));
    }
    Ok(worst)
}

fn validate_source(s: &Scenario) -> Result<()> {
    let r = source_quadrature_residual(s, &[0.01, 0.05, 0.1, 0.2, 0.5])?;
    if r > IDENTITY_TOL {
        return Err(Error::InvariantViolation { what: "source integral vs quadrature".into(), residual: r });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Ftn,
    Stn,
    Ttn,
    None,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Ftn => "ftn",
            NoiseKind::Stn => "stn",
            NoiseKind::Ttn => "ttn",
            NoiseKind::None => "none",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ftn" => Ok(NoiseKind::Ftn),
            "stn" => Ok(NoiseKind::Stn),
            "ttn" => Ok(NoiseKind::Ttn),
            "none" => Ok(NoiseKind::None),
            _ => Err(Error::Parse(format!("unknown noise kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub delta: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, delta: 0.0 }
    }
}

/// `δ·𝔊(t)` with `𝔊 = t|ln t|`, `t^{ν₁}` or `t^{ν₁}|ln t|`.
pub fn noise_value(kind: NoiseKind, delta: f64, nu1: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("noise time {t} outside (0, 1)")));
    }
    Ok(match kind {
        NoiseKind::Ftn => delta * t * t.ln().abs(),
        NoiseKind::Stn => delta * t.powf(nu1),
        NoiseKind::Ttn => delta * t.powf(nu1) * t.ln().abs(),
        NoiseKind::None => 0.0,
    })
}

/// Discrete noisy observation `ψ_{δ,k}` at `t₁ < … < t_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub psi0: f64,
    pub noise: NoiseSpec,
}

impl Observation {
    pub fn new(times: Vec<f64>, values: Vec<f64>, psi0: f64, noise: NoiseSpec) -> Result<Self> {
        check_times(&times)?;
        if values.len() != times.len() {
            return Err(Error::InputMismatch(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) || !psi0.is_finite() {
            return Err(Error::Domain("observation values must be finite".into()));
        }
        Ok(Self { times, values, psi0, noise })
    }

    pub fn t_k(&self) -> f64 {
        *self.times.last().expect("observation is never empty")
    }

    /// CSV with a metadata comment line followed by `t,psi_delta` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# psi0={} noise={} delta={}",
            self.psi0,
            self.noise.kind.as_str(),
            self.noise.delta
        )?;
        writeln!(w, "t,psi_delta")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ascii")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut psi0 = None;
        let mut noise = NoiseSpec::none();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            if let Some(meta) = line.trim().strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    let Some((k, v)) = kv.split_once('=') else { continue };
                    match k {
                        "psi0" => psi0 = Some(parse_f64(v)?),
                        "noise" => noise.kind = v.parse()?,
                        "delta" => noise.delta = parse_f64(v)?,
                        _ => {}
                    }
                }
            } else {
                let _ = writeln!(body, "{line}");
            }
        }
        let psi0 = psi0.ok_or_else(|| Error::Parse("missing psi0 metadata".into()))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "t" || &headers[1] != "psi_delta" {
            return Err(Error::Parse("expected header t,psi_delta".into()));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            times.push(parse_f64(&rec[0])?);
            values.push(parse_f64(&rec[1])?);
        }
        Self::new(times, values, psi0, noise)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("'{s}': {e}")))
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Domain("observation grid is empty".into()));
    }
    if times.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::Domain("observation times must lie in (0, 1)".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("observation times must be strictly increasing".into()));
    }
    Ok(())
}

/// `t_k = kτ` for `k = 1..=count`.
pub fn uniform_times(count: usize, tau: f64) -> Vec<f64> {
    (1..=count).map(|k| k as f64 * tau).collect()
}

/// Samples the exact `ψ` and adds deterministic noise; `ψ₀` is copied exactly.
pub fn observe(s: &Scenario, times: &[f64], noise: NoiseSpec) -> Result<Observation> {
    check_times(times)?;
    let nu1 = s.true_params.nu1;
    let values = times
        .iter()
        .map(|&t| Ok(s.psi.series.eval(t)? + noise_value(noise.kind, noise.delta, nu1, t)?))
        .collect::<Result<Vec<_>>>()?;
    Observation::new(times.to_vec(), values, s.psi.psi0, noise)
}
