//! Finite fractional power series `Σ c_k t^{p_k}` and multi-term fractional
//! differential operators acting on them.

use crate::error::{Error, Result};
use crate::specfun::{beta, gamma_ratio};
use serde::{Deserialize, Serialize};

/// Maximum number of terms a series may hold.
pub const MAX_TERMS: usize = 512;

/// Relative tolerance under which two exponents are treated as equal.
pub const EXPONENT_TOL: f64 = 1e-12;

/// A single term `c·t^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub c: f64,
    pub p: f64,
}

/// Finite sum of fractional powers with strictly increasing exponents > −1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Term>", into = "Vec<Term>")]
pub struct FracPowerSeries {
    terms: Vec<Term>,
}

fn same_exponent(p: f64, q: f64) -> bool {
    (p - q).abs() <= EXPONENT_TOL * p.abs().max(1.0)
}

fn pow0(t: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if t == 0.0 {
        0.0
    } else {
        t.powf(p)
    }
}

impl FracPowerSeries {
    /// Builds a series from `(coeff, exponent)` pairs, merging like exponents.
    pub fn new<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self> {
        let mut raw: Vec<Term> = Vec::new();
        for (c, p) in pairs {
            if !c.is_finite() || !p.is_finite() {
                return Err(Error::Domain(format!("non-finite term ({c}, {p})")));
            }
            if p <= -1.0 {
                return Err(Error::Domain(format!("exponent {p} is not > -1")));
            }
            let p = if p.abs() <= EXPONENT_TOL { 0.0 } else { p };
            raw.push(Term { c, p });
        }
        raw.sort_by(|a, b| a.p.total_cmp(&b.p));
        let mut terms: Vec<Term> = Vec::with_capacity(raw.len());
        for t in raw {
            match terms.last_mut() {
                Some(last) if same_exponent(last.p, t.p) => last.c += t.c,
                _ => terms.push(t),
            }
        }
        terms.retain(|t| t.c != 0.0);
        if terms.len() > MAX_TERMS {
            return Err(Error::TooManyTerms(MAX_TERMS));
        }
        Ok(Self { terms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0.0)
    }

    /// `c·t^p`. Panics on an exponent ≤ −1 or non-finite input.
    pub fn monomial(c: f64, p: f64) -> Self {
        Self::new([(c, p)]).expect("invalid monomial")
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of `t^0`.
    pub fn constant_term(&self) -> f64 {
        self.terms.iter().find(|t| t.p == 0.0).map_or(0.0, |t| t.c)
    }

    /// Smallest exponent carrying a nonzero coefficient.
    pub fn min_exponent(&self) -> Option<f64> {
        self.terms.first().map(|t| t.p)
    }

    /// Evaluates the series at `t ≥ 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("cannot evaluate at t = {t}")));
        }
        if t == 0.0 {
            if let Some(bad) = self.terms.iter().find(|x| x.p < 0.0) {
                return Err(Error::SingularAtZero(bad.p));
            }
        }
        Ok(self.terms.iter().map(|x| x.c * pow0(t, x.p)).sum())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::new(self.pairs().chain(other.pairs()))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::new(self.pairs().chain(other.pairs().map(|(c, p)| (-c, p))))
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.pairs().map(|(c, p)| (k * c, p))).expect("scaling keeps a valid series")
    }

    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.len() * other.len() > 4 * MAX_TERMS {
            return Err(Error::TooManyTerms(MAX_TERMS));
        }
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.terms {
            for b in &other.terms {
                out.push((a.c * b.c, a.p + b.p));
            }
        }
        Self::new(out)
    }

    /// Caputo derivative of order `nu ∈ (0, 1]`, term by term.
    pub fn caputo(&self, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::Domain(format!("Caputo order {nu} outside (0, 1]")));
        }
        let mut out = Vec::with_capacity(self.len());
        for t in self.terms.iter().filter(|t| t.p != 0.0) {
            if t.p < 0.0 {
                return Err(Error::Domain(format!(
                    "Caputo derivative of singular term t^{}",
                    t.p
                )));
            }
            if nu == 1.0 {
                out.push((t.c * t.p, t.p - 1.0));
            } else {
                out.push((t.c * gamma_ratio(t.p + 1.0, t.p + 1.0 - nu)?, t.p - nu));
            }
        }
        Self::new(out)
    }

    /// Subtracts the constant term.
    pub fn without_constant(&self) -> Self {
        Self {
            terms: self.terms.iter().copied().filter(|t| t.p != 0.0).collect(),
        }
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.terms.iter().map(|t| (t.c, t.p))
    }
}

impl TryFrom<Vec<Term>> for FracPowerSeries {
    type Error = Error;
    fn try_from(v: Vec<Term>) -> Result<Self> {
        Self::new(v.into_iter().map(|t| (t.c, t.p)))
    }
}

impl From<FracPowerSeries> for Vec<Term> {
    fn from(s: FracPowerSeries) -> Self {
        s.terms
    }
}

/// `(t^{−γ}K0) ∗ s`, evaluated exactly through Beta integrals.
pub fn convolve_singular(
    gamma: f64,
    k0: &FracPowerSeries,
    s: &FracPowerSeries,
) -> Result<FracPowerSeries> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("kernel exponent {gamma} outside (0, 1)")));
    }
    convolve_power_kernel(-gamma, k0, s)
}

// (t^{e}K0) ∗ s for e > −1 with K0 exponents ≥ 0
fn convolve_power_kernel(
    e: f64,
    k0: &FracPowerSeries,
    s: &FracPowerSeries,
) -> Result<FracPowerSeries> {
    let mut out = Vec::with_capacity(k0.len() * s.len());
    for k in k0.terms() {
        if k.p < 0.0 {
            return Err(Error::Domain(format!("kernel factor has exponent {}", k.p)));
        }
        let a = k.p + e + 1.0;
        if a <= 0.0 {
            return Err(Error::Domain(format!("kernel exponent {} not integrable", k.p + e)));
        }
        for x in s.terms() {
            out.push((k.c * x.c * beta(a, x.p + 1.0)?, k.p + e + x.p + 1.0));
        }
    }
    FracPowerSeries::new(out)
}

/// `J_μ(s, t) = ∫₀ᵗ (t−τ)^{μ−1} [D^μ s(τ) − D^μ s(0)] dτ`.
pub fn j_mu(s: &FracPowerSeries, mu: f64, t: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Domain(format!("J_mu order {mu} outside (0, 1)")));
    }
    let d = s.caputo(mu)?;
    if let Some(p) = d.min_exponent().filter(|p| *p < 0.0) {
        return Err(Error::SingularAtZero(p));
    }
    let conv = convolve_power_kernel(mu - 1.0, &FracPowerSeries::constant(1.0), &d.without_constant())?;
    conv.eval(t)
}

/// Where the coefficient of a multi-term operator sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// `D^ν(ρ(t)·u)`
    Inside,
    /// `ρ(t)·D^ν u`
    Outside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdoTerm {
    pub order: f64,
    pub placement: Placement,
    pub coeff: FracPowerSeries,
}

impl FdoTerm {
    pub fn apply(&self, s: &FracPowerSeries) -> Result<FracPowerSeries> {
        self.apply_with_order(s, self.order)
    }

    /// Applies the term with its order replaced by `order`.
    pub fn apply_with_order(&self, s: &FracPowerSeries, order: f64) -> Result<FracPowerSeries> {
        match self.placement {
            Placement::Outside => self.coeff.multiply(&s.caputo(order)?),
            Placement::Inside => self.coeff.multiply(s)?.caputo(order),
        }
    }
}

/// Multi-term fractional differential operator with strictly decreasing orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FdoTerm>", into = "Vec<FdoTerm>")]
pub struct FdoSpec {
    terms: Vec<FdoTerm>,
}

impl FdoSpec {
    pub fn new(terms: Vec<FdoTerm>) -> Result<Self> {
        let Some(lead) = terms.first() else {
            return Err(Error::Domain("operator needs at least one term".into()));
        };
        for t in &terms {
            if !(t.order > 0.0 && t.order <= 1.0) {
                return Err(Error::Domain(format!("order {} outside (0, 1]", t.order)));
            }
            if let Some(p) = t.coeff.min_exponent().filter(|p| *p < 0.0) {
                return Err(Error::Domain(format!("coefficient has exponent {p} < 0")));
            }
        }
        if terms.windows(2).any(|w| w[1].order >= w[0].order) {
            return Err(Error::Domain("orders must be strictly decreasing".into()));
        }
        let r0 = lead.coeff.eval(0.0)?;
        if r0 == 0.0 {
            return Err(Error::InvariantViolation {
                what: "leading coefficient vanishes at t = 0".into(),
                residual: 0.0,
            });
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[FdoTerm] {
        &self.terms
    }

    pub fn leading(&self) -> &FdoTerm {
        &self.terms[0]
    }

    pub fn orders(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.order).collect()
    }
}

impl TryFrom<Vec<FdoTerm>> for FdoSpec {
    type Error = Error;
    fn try_from(v: Vec<FdoTerm>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FdoSpec> for Vec<FdoTerm> {
    fn from(s: FdoSpec) -> Self {
        s.terms
    }
}

/// Applies every term of `op` to `s` and sums.
pub fn apply_fdo(op: &FdoSpec, s: &FracPowerSeries) -> Result<FracPowerSeries> {
    if let Some(p) = s.min_exponent().filter(|p| *p < 0.0) {
        return Err(Error::SingularAtZero(p));
    }
    let mut acc = FracPowerSeries::zero();
    for t in op.terms() {
        acc = acc.add(&t.apply(s)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn s(pairs: &[(f64, f64)]) -> FracPowerSeries {
        FracPowerSeries::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn construction_merges_and_sorts() {
        let a = s(&[(1.0, 2.0), (2.0, 0.5), (3.0, 2.0 + 1e-14), (0.0, 1.0)]);
        assert_eq!(a.len(), 2);
        assert_eq!(a.terms()[0], Term { c: 2.0, p: 0.5 });
        assert_eq!(a.terms()[1].c, 4.0);
        assert!(FracPowerSeries::new([(1.0, -1.0)]).is_err());
        assert!(s(&[(1.0, 1.0), (-1.0, 1.0)]).is_empty());
        let many = (0..600).map(|k| (1.0, k as f64));
        assert_eq!(FracPowerSeries::new(many), Err(Error::TooManyTerms(MAX_TERMS)));
    }

    #[test]
    fn eval_examples() {
        assert_eq!(s(&[(1.0 / 15.0, 0.0), (1.0, 0.5)]).eval(0.0).unwrap(), 1.0 / 15.0);
        assert_relative_eq!(s(&[(1.0, -0.5)]).eval(0.25).unwrap(), 2.0);
        assert_eq!(s(&[(2.0, 0.3), (-1.0, 1.0)]).eval(1.0).unwrap(), 1.0);
        assert_eq!(s(&[(1.0, -0.5)]).eval(0.0), Err(Error::SingularAtZero(-0.5)));
    }

    #[test]
    fn caputo_examples() {
        assert!(s(&[(3.0, 0.0)]).caputo(0.4).unwrap().is_empty());
        let d = s(&[(1.0, 1.0)]).caputo(0.5).unwrap();
        assert_eq!(d.len(), 1);
        assert_relative_eq!(d.terms()[0].c, 1.128_379_2, max_relative = 1e-7);
        assert_relative_eq!(d.terms()[0].p, 0.5);
        for nu in [0.2, 0.5, 0.9] {
            let d = s(&[(1.0, nu)]).caputo(nu).unwrap();
            assert_eq!(d.terms()[0].p, 0.0);
            assert_relative_eq!(d.terms()[0].c, gamma(1.0 + nu).unwrap(), max_relative = 1e-14);
        }
        let d = s(&[(1.0, 0.0), (2.0, 3.0)]).caputo(1.0).unwrap();
        assert_eq!(d, s(&[(6.0, 2.0)]));
        assert!(s(&[(1.0, 1.0)]).caputo(0.0).is_err());
    }

    #[test]
    fn multiply_examples() {
        let nu = 0.37;
        let a = s(&[(1.0, 0.0), (1.0, 2.0)]);
        assert!(a.multiply(&FracPowerSeries::zero()).unwrap().is_empty());
        assert_eq!(a.multiply(&s(&[(1.0, nu)])).unwrap(), s(&[(1.0, nu), (1.0, 2.0 + nu)]));
        let rho3 = s(&[(0.25, 0.0), (0.25, 2.0)]);
        let psi = s(&[(1.0 / 15.0, 0.0), (1.0, nu)]);
        let prod = rho3.multiply(&psi).unwrap();
        assert_eq!(prod.len(), 4);
        for t in [0.01, 0.1, 0.7] {
            let want = (1.0 + t * t) / 4.0 * (1.0 / 15.0 + f64::powf(t, nu));
            assert_relative_eq!(prod.eval(t).unwrap(), want, max_relative = 1e-14);
        }
    }

    #[test]
    fn convolution_examples() {
        let one = FracPowerSeries::constant(1.0);
        assert!(convolve_singular(0.9, &FracPowerSeries::zero(), &one).unwrap().is_empty());
        let c = convolve_singular(0.9, &one, &s(&[(1.0, 0.5)])).unwrap();
        assert_eq!(c.len(), 1);
        assert_relative_eq!(c.terms()[0].p, 0.6, max_relative = 1e-14);
        assert!((c.terms()[0].c - 9.4359).abs() < 1e-4);
        let c = convolve_singular(0.9, &s(&[(1.0, 0.0), (1.0, 1.0)]), &one).unwrap();
        assert_relative_eq!(c.terms()[0].c, 10.0, max_relative = 1e-12);
        assert_relative_eq!(c.terms()[0].p, 0.1, max_relative = 1e-12);
        assert_relative_eq!(c.terms()[1].c, 1.0 / 1.1, max_relative = 1e-12);
        assert_relative_eq!(c.terms()[1].p, 1.1, max_relative = 1e-12);
        assert!(convolve_singular(1.0, &one, &one).is_err());
    }

    #[test]
    fn fdo_examples() {
        let op = FdoSpec::new(vec![FdoTerm {
            order: 0.5,
            placement: Placement::Outside,
            coeff: FracPowerSeries::constant(0.5),
        }])
        .unwrap();
        let psi = s(&[(1.0 / 15.0, 0.0), (1.0, 0.5)]);
        let out = apply_fdo(&op, &psi).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.terms()[0].p, 0.0);
        assert!((out.terms()[0].c - 0.4431).abs() < 1e-4);
        assert!(apply_fdo(&op, &FracPowerSeries::constant(2.0)).unwrap().is_empty());

        let bad_lead = FdoTerm {
            order: 0.5,
            placement: Placement::Inside,
            coeff: s(&[(1.0, 1.0)]),
        };
        assert!(matches!(FdoSpec::new(vec![bad_lead]), Err(Error::InvariantViolation { .. })));
        let t = |order| FdoTerm {
            order,
            placement: Placement::Outside,
            coeff: FracPowerSeries::constant(1.0),
        };
        assert!(FdoSpec::new(vec![t(0.3), t(0.5)]).is_err());
        assert!(FdoSpec::new(vec![t(0.5), t(0.5)]).is_err());
        assert!(FdoSpec::new(vec![t(1.2)]).is_err());
    }

    #[test]
    fn inside_and_outside_differ_for_variable_coefficients() {
        let rho = s(&[(1.0, 0.0), (1.0, 1.0)]);
        let u = s(&[(1.0, 0.5)]);
        let outside = FdoTerm { order: 0.5, placement: Placement::Outside, coeff: rho.clone() };
        let inside = FdoTerm { order: 0.5, placement: Placement::Inside, coeff: rho };
        let a = outside.apply(&u).unwrap().eval(0.3).unwrap();
        let b = inside.apply(&u).unwrap().eval(0.3).unwrap();
        // ρD^{1/2}t^{1/2} = Γ(3/2)(1+t); D^{1/2}(t^{1/2}+t^{3/2}) = Γ(3/2) + Γ(5/2)/Γ(2) t
        let g15 = gamma(1.5).unwrap();
        assert_relative_eq!(a, g15 * 1.3, max_relative = 1e-14);
        assert_relative_eq!(b, g15 + gamma(2.5).unwrap() * 0.3, max_relative = 1e-14);
    }

    #[test]
    fn j_mu_examples() {
        assert_eq!(j_mu(&FracPowerSeries::constant(4.0), 0.3, 0.5).unwrap(), 0.0);
        for mu in [0.2, 0.5, 0.8] {
            let sr = s(&[(1.0, 2.0 * mu)]);
            for t in [0.01f64, 0.3, 0.9] {
                let want = gamma_ratio(1.0 + 2.0 * mu, 1.0 + mu).unwrap()
                    * beta(mu, mu + 1.0).unwrap()
                    * t.powf(2.0 * mu);
                assert_relative_eq!(j_mu(&sr, mu, t).unwrap(), want, max_relative = 1e-13);
            }
            assert!(j_mu(&sr, mu, 1e-30).unwrap().abs() < 1e-6);
        }
        assert!(matches!(j_mu(&s(&[(1.0, 0.1)]), 0.5, 0.2), Err(Error::SingularAtZero(_))));
    }

    #[test]
    fn serde_round_trip() {
        let a = s(&[(1.0 / 15.0, 0.0), (-0.25, 0.5), (2.0, 1.75)]);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.starts_with("[{\"c\":"));
        let b: FracPowerSeries = serde_json::from_str(&json).unwrap();
        assert_eq!(a, b);
        let unsorted: FracPowerSeries = serde_json::from_str(r#"[{"c":1,"p":2},{"c":1,"p":0}]"#).unwrap();
        assert_eq!(unsorted.terms()[0].p, 0.0);
        assert!(serde_json::from_str::<FracPowerSeries>(r#"[{"c":1,"p":-2}]"#).is_err());
    }

    fn series_strategy() -> impl Strategy<Value = FracPowerSeries> {
        prop::collection::vec((-2.0f64..2.0, 0.0f64..3.0), 1..6)
            .prop_map(|v| FracPowerSeries::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn caputo_is_linear(a in series_strategy(), b in series_strategy(),
                            x in -3.0f64..3.0, y in -3.0f64..3.0, nu in 0.05f64..1.0,
                            t in 0.01f64..1.0) {
            let lhs = a.scale(x).add(&b.scale(y)).unwrap().caputo(nu).unwrap();
            let rhs = a.caputo(nu).unwrap().scale(x).add(&b.caputo(nu).unwrap().scale(y)).unwrap();
            let (l, r) = (lhs.eval(t).unwrap(), rhs.eval(t).unwrap());
            let scale: f64 = rhs.terms().iter().map(|z| (z.c * t.powf(z.p)).abs()).sum::<f64>() + 1e-300;
            prop_assert!((l - r).abs() <= 1e-12 * scale);
        }

        #[test]
        fn convolution_semigroup(g1 in 0.5f64..0.95, g2 in 0.5f64..0.95,
                                 c in 0.1f64..3.0, q in 0.0f64..2.5) {
            prop_assume!(g1 + g2 - 1.0 > 0.01);
            let one = FracPowerSeries::constant(1.0);
            let x = FracPowerSeries::monomial(c, q);
            let twice = convolve_singular(g2, &one, &convolve_singular(g1, &one, &x).unwrap()).unwrap();
            let k = FracPowerSeries::constant(beta(1.0 - g1, 1.0 - g2).unwrap());
            let once = convolve_singular(g1 + g2 - 1.0, &k, &x).unwrap();
            prop_assert_eq!(twice.len(), 1);
            prop_assert_eq!(once.len(), 1);
            let (a, b) = (twice.terms()[0], once.terms()[0]);
            prop_assert!(((a.c - b.c) / b.c).abs() <= 1e-12);
            prop_assert!((a.p - b.p).abs() <= 1e-12);
        }

        #[test]
        fn exponents_stay_sorted_and_distinct(a in series_strategy(), b in series_strategy()) {
            let m = a.multiply(&b).unwrap();
            for w in m.terms().windows(2) {
                prop_assert!(w[1].p > w[0].p);
            }
            prop_assert!(m.terms().iter().all(|t| t.c != 0.0 && t.p > -1.0));
        }
    }
}
