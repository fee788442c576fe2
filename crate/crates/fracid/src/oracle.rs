//! Independent numerical verifiers: quadrature Caputo derivatives and
//! convolutions, the averaging operators `𝒢_f` and `G_f`, and checkers for
//! the small-time bound statements on logarithmic ratios.

use crate::error::{Error, Result};
use crate::fracseries::{FracPowerSeries, Placement};
use crate::specfun::{gamma, gamma_lower, MLParams, MlTable};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Default relative tolerance of the doubling loops.
pub const ORACLE_TOL: f64 = 1e-9;

const GRADED_LEVELS: i32 = 44;
const MAX_PANEL_NODES: usize = 128;
const MAX_JACOBI_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    GaussJacobi,
    GaussLegendre,
}

/// Gauss rule on `[0, 1]` for the weight `(1-z)^α` (`α = 0` for Legendre).
#[derive(Debug, Clone, Serialize)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub nodes: Vec<f64>,
    /// `1 - nodes[i]`, computed without cancellation.
    pub complements: Vec<f64>,
    pub weights: Vec<f64>,
    pub singular_exponent: f64,
}

type RuleKey = (RuleKind, usize, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl QuadratureRule {
    pub fn gauss_legendre(n: usize) -> Result<Arc<Self>> {
        Self::cached(RuleKind::GaussLegendre, n, 0.0)
    }

    pub fn gauss_jacobi(n: usize, alpha: f64) -> Result<Arc<Self>> {
        Self::cached(RuleKind::GaussJacobi, n, alpha)
    }

    fn cached(kind: RuleKind, n: usize, alpha: f64) -> Result<Arc<Self>> {
        if n == 0 || n > 2 * MAX_JACOBI_NODES {
            return Err(Error::Domain(format!("rule size {n} outside [1, {}]", 2 * MAX_JACOBI_NODES)));
        }
        if !(alpha > -1.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("weight exponent {alpha} is not > -1")));
        }
        let key = (kind, n, alpha.to_bits());
        if let Some(r) = rule_cache().lock().expect("rule cache poisoned").get(&key) {
            return Ok(Arc::clone(r));
        }
        let rule = Arc::new(golub_welsch(kind, n, alpha));
        rule_cache()
            .lock()
            .expect("rule cache poisoned")
            .insert(key, Arc::clone(&rule));
        Ok(rule)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i h(z_i)`.
    pub fn apply<F: Fn(f64) -> f64>(&self, h: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * h(*z)).sum()
    }
}

// Jacobi matrix of the weight (1-x)^α (1+x)^0 on [-1, 1], mapped to [0, 1]
fn golub_welsch(kind: RuleKind, n: usize, alpha: f64) -> QuadratureRule {
    let (a, b) = (alpha, 0.0);
    let s = a + b;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        m[(k, k)] = if k == 0 {
            (b - a) / (s + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * kf + s) * (2.0 * kf + s + 2.0))
        };
        if k + 1 < n {
            let j = kf + 1.0;
            let num = 4.0 * j * (j + a) * (j + b) * (j + s);
            let den = (2.0 * j + s).powi(2) * (2.0 * j + s + 1.0) * (2.0 * j + s - 1.0);
            let off = (num / den).sqrt();
            m[(k, k + 1)] = off;
            m[(k + 1, k)] = off;
        }
    }
    let eig = m.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut nodes = Vec::with_capacity(n);
    let mut complements = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for &i in &idx {
        let x = eig.eigenvalues[i];
        nodes.push(0.5 * (1.0 + x));
        complements.push(0.5 * (1.0 - x));
        weights.push(eig.eigenvectors[(0, i)].powi(2) / (alpha + 1.0));
    }
    if kind == RuleKind::GaussLegendre {
        // symmetrize so that both ends are equally accurate
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let lo = complements[j];
            nodes[i] = lo;
            complements[i] = nodes[j];
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
    }
    QuadratureRule { kind, nodes, complements, weights, singular_exponent: alpha }
}

fn converged(new: f64, old: f64, scale: f64, tol: f64) -> bool {
    (new - old).abs() <= tol * scale.max(new.abs()).max(f64::MIN_POSITIVE)
}

// One pass of Gauss-Legendre on panels graded geometrically toward both ends
// of [0, 1]; `h` receives (x, 1 - x). Returns (∫h, ∫|h|).
fn graded_pass(h: &dyn Fn(f64, f64) -> f64, m: usize) -> Result<(f64, f64)> {
    let rule = QuadratureRule::gauss_legendre(m)?;
    let mut sum = 0.0;
    let mut abs = 0.0;
    let mut panel = |lo: f64, hi: f64, right: bool| {
        let width = hi - lo;
        for ((z, zc), w) in rule.nodes.iter().zip(&rule.complements).zip(&rule.weights) {
            // on the right half, lo and hi are distances from 1
            let (x, xc) = if right {
                let d = lo + width * zc;
                (1.0 - d, d)
            } else {
                let x = lo + width * z;
                (x, 1.0 - x)
            };
            let v = w * width * h(x, xc);
            sum += v;
            abs += v.abs();
        }
    };
    let tail = 0.5f64.powi(GRADED_LEVELS + 1);
    for right in [false, true] {
        panel(0.0, tail, right);
        for k in (1..=GRADED_LEVELS).rev() {
            panel(0.5f64.powi(k + 1), 0.5f64.powi(k), right);
        }
    }
    Ok((sum, abs))
}

/// `∫₀¹ h(x) dx` for integrands with integrable algebraic endpoint
/// behaviour; `h` receives `(x, 1 - x)`.
pub fn integrate_graded(h: &dyn Fn(f64, f64) -> f64, tol: f64) -> Result<f64> {
    let (mut prev, _) = graded_pass(h, 8)?;
    let mut m = 16;
    while m <= MAX_PANEL_NODES {
        let (cur, abs) = graded_pass(h, m)?;
        if !cur.is_finite() {
            return Err(Error::NoConvergence("non-finite integrand".into()));
        }
        if converged(cur, prev, abs, tol) {
            return Ok(cur);
        }
        prev = cur;
        m *= 2;
    }
    Err(Error::NoConvergence(format!("graded quadrature did not reach {tol:e}")))
}

/// Sixth-order central difference with step `0.01·s`.
fn derivative(f: &dyn Fn(f64) -> f64, s: f64) -> f64 {
    let h = 0.01 * s;
    (-f(s - 3.0 * h) + 9.0 * f(s - 2.0 * h) - 45.0 * f(s - h) + 45.0 * f(s + h) - 9.0 * f(s + 2.0 * h)
        + f(s + 3.0 * h))
        / (60.0 * h)
}

/// Caputo derivative `D^ν f(t)` from `t^{1-ν}/Γ(1-ν) ∫₀¹ (1-z)^{-ν} f'(zt) dz`.
///
/// `f` must be defined on `[0, 1.03 t]`. The upper half of the z-interval uses
/// Gauss-Jacobi nodes for the weight, the lower half geometric panels, and the
/// innermost piece `[0, z₀]` is replaced by `(f(z₀t) - f(0))/t`.
pub fn caputo_quadrature(f: &dyn Fn(f64) -> f64, nu: f64, t: f64, npoints: usize) -> Result<f64> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Domain(format!("order {nu} outside (0, 1]")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time {t} must be positive")));
    }
    if nu == 1.0 {
        return Ok(derivative(f, t));
    }
    let fp = |s: f64| derivative(f, s);
    let z0 = 0.5f64.powi(GRADED_LEVELS + 1);
    let tail = (f(z0 * t) - f(0.0)) / t;
    let pass = |n: usize| -> Result<(f64, f64)> {
        let jac = QuadratureRule::gauss_jacobi(n, -nu)?;
        let scale = 0.5f64.powf(1.0 - nu);
        let mut abs = 0.0;
        let upper: f64 = jac
            .nodes
            .iter()
            .zip(&jac.weights)
            .map(|(w, wt)| {
                let v = scale * wt * fp(t * (0.5 + 0.5 * w));
                abs += v.abs();
                v
            })
            .sum();
        let leg = QuadratureRule::gauss_legendre((n / 2).max(8))?;
        let mut lower = 0.0;
        for k in (1..=GRADED_LEVELS).rev() {
            let (lo, hi) = (0.5f64.powi(k + 1), 0.5f64.powi(k));
            for (z, wt) in leg.nodes.iter().zip(&leg.weights) {
                let x = lo + (hi - lo) * z;
                let v = wt * (hi - lo) * (1.0 - x).powf(-nu) * fp(t * x);
                lower += v;
                abs += v.abs();
            }
        }
        Ok((upper + lower + tail, abs + tail.abs()))
    };
    let mut n = npoints.max(8);
    let (mut prev, _) = pass(n)?;
    n *= 2;
    while n <= MAX_JACOBI_NODES {
        let (cur, abs) = pass(n)?;
        if converged(cur, prev, abs, 1e-8) {
            return Ok(t.powf(1.0 - nu) * cur / gamma(1.0 - nu)?);
        }
        prev = cur;
        n *= 2;
    }
    Err(Error::NoConvergence(format!("Caputo quadrature at t = {t}, nu = {nu}")))
}

// ln w for w in (0, 1] given w and 1 - w
fn ln_from_pair(w: f64, wc: f64) -> f64 {
    if w < 0.5 {
        w.ln()
    } else {
        (-wc).ln_1p()
    }
}

/// `G_f(t) = ∫₀¹ (1-z)^{γ*-1} k(t - zt) f(zt) dz`.
///
/// The substitution `w = (1-z)^{γ*}` removes the weight; the remaining
/// integrand is integrated on doubly graded panels.
pub fn g_general(
    k: &dyn Fn(f64) -> f64,
    f: &dyn Fn(f64) -> f64,
    gamma_star: f64,
    t: f64,
) -> Result<f64> {
    if !(gamma_star > 0.0 && gamma_star < 1.0) {
        return Err(Error::Domain(format!("exponent {gamma_star} outside (0, 1)")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time {t} must be non-negative")));
    }
    if t == 0.0 {
        return Ok(k(0.0) * f(0.0) / gamma_star);
    }
    let kappa = 1.0 / gamma_star;
    let h = |w: f64, wc: f64| {
        if w == 0.0 {
            return k(0.0) * f(t) * kappa;
        }
        let e = kappa * ln_from_pair(w, wc);
        let one_minus_z = e.exp();
        let z = -e.exp_m1();
        kappa * k(t * one_minus_z) * f(t * z)
    };
    integrate_graded(&h, ORACLE_TOL)
}

/// `𝒢_f(t) = ∫₀¹ (1-z)^{γ₃-1} n E_{γ₃,γ₃}(-n t^{γ₃}(1-z)^{γ₃}) f(zt) dz`.
pub fn g_script(f: &dyn Fn(f64) -> f64, gamma3: f64, n: u32, t: f64) -> Result<f64> {
    if !(gamma3 > 0.0 && gamma3 < 1.0) {
        return Err(Error::Domain(format!("exponent {gamma3} outside (0, 1)")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1)")));
    }
    let nf = n as f64;
    if t == 0.0 {
        return Ok(nf * f(0.0) / gamma(1.0 + gamma3)?);
    }
    let c = nf * t.powf(gamma3);
    let ml = MlTable::new(MLParams::new(gamma3, gamma3)?, c)?;
    let kappa = 1.0 / gamma3;
    let h = |w: f64, wc: f64| {
        let z = if w == 0.0 { 1.0 } else { -(kappa * ln_from_pair(w, wc)).exp_m1() };
        let e = ml.eval(-c * w).unwrap_or(f64::NAN);
        kappa * nf * e * f(t * z)
    };
    integrate_graded(&h, ORACLE_TOL)
}

/// `((t^{-γ} K0) ∗ s)(t) = t^{1-γ} ∫₀¹ (1-z)^{-γ} K0(t(1-z)) s(zt) dz`.
pub fn convolution_quadrature(
    gamma_exp: f64,
    k0: &dyn Fn(f64) -> f64,
    s: &dyn Fn(f64) -> f64,
    t: f64,
) -> Result<f64> {
    if !(gamma_exp > 0.0 && gamma_exp < 1.0) {
        return Err(Error::Domain(format!("kernel exponent {gamma_exp} outside (0, 1)")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(t.powf(1.0 - gamma_exp) * g_general(k0, s, 1.0 - gamma_exp, t)?)
}

/// Upper bound for `sup_{[0,T]} |s|`: `Σ |c| T^p`.
pub fn sup_bound(s: &FracPowerSeries, t_max: f64) -> f64 {
    s.terms()
        .iter()
        .map(|x| {
            if x.p < 0.0 {
                f64::INFINITY
            } else if x.p == 0.0 {
                x.c.abs()
            } else {
                x.c.abs() * t_max.powf(x.p)
            }
        })
        .sum()
}

/// Upper bound for the Hölder seminorm of order `alpha` on `[0, T]`,
/// infinite when some exponent lies in `(0, alpha)`.
pub fn holder_seminorm_bound(s: &FracPowerSeries, alpha: f64, t_max: f64) -> f64 {
    s.terms()
        .iter()
        .map(|x| {
            let tol = 1e-12 * alpha.max(1.0);
            if x.p == 0.0 {
                0.0
            } else if x.p < alpha - tol {
                f64::INFINITY
            } else if x.p <= 1.0 {
                x.c.abs() * t_max.powf((x.p - alpha).max(0.0))
            } else {
                x.c.abs() * x.p * t_max.powf(x.p - alpha)
            }
        })
        .sum()
}

/// Sup bound plus seminorm bound.
pub fn holder_norm_bound(s: &FracPowerSeries, alpha: f64, t_max: f64) -> f64 {
    sup_bound(s, t_max) + holder_seminorm_bound(s, alpha, t_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaKind {
    L31,
    L32,
    L33,
    C31,
    C32,
    C33,
}

/// `F` with `F(0) = 0`; `t_ε` is derived from the certified sup bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C31Params {
    pub f: FracPowerSeries,
    pub t_star: f64,
    pub eps: f64,
    pub eps1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C32Params {
    pub f: FracPowerSeries,
    pub t_star: f64,
    pub lambda: f64,
    pub eps: f64,
    pub eps2: f64,
}

/// `w(t) - w(0) = C₁ t^θ/Γ(1+θ) + w₁(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C33Params {
    pub c1: f64,
    pub theta: f64,
    pub w1: FracPowerSeries,
    pub t_star: f64,
    pub eps: f64,
    pub eps3: f64,
}

/// Operator `Σ r_k D^{μ_k}` (outside) or `Σ D^{μ_k}(r_k ·)` (inside) applied to `v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L31Params {
    pub v: FracPowerSeries,
    pub mu: Vec<f64>,
    pub r: Vec<FracPowerSeries>,
    pub placement: Placement,
    pub mu_star: f64,
    pub t_star: f64,
    pub eps: f64,
    pub eps4: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L32Params {
    pub f: FracPowerSeries,
    pub gamma3: f64,
    pub gamma4: f64,
    pub n: u32,
    pub lambda: f64,
    pub eps: f64,
    pub eps5: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct L33Params {
    pub k: FracPowerSeries,
    pub f: FracPowerSeries,
    pub gamma_star: f64,
    pub gamma3: f64,
    pub gamma4: f64,
    pub lambda: f64,
    pub eps: f64,
    pub eps6: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LemmaParams {
    L31(L31Params),
    L32(L32Params),
    L33(L33Params),
    C31(C31Params),
    C32(C32Params),
    C33(C33Params),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub which: LemmaKind,
    pub threshold: f64,
    pub max_lhs: f64,
    pub bound: f64,
    /// Smallest `bound - lhs` over every checked inequality and grid point.
    pub margin: f64,
    pub grid_points: usize,
    pub provenance: String,
}

const LEMMA_GRID: usize = 100;
const PROVENANCE: &str = "certified term-wise series bounds";

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::HypothesisViolated(msg.into()))
    }
}

fn in_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

// log-spaced points from thr·1e-6 up to thr (just below it when strict)
fn lemma_grid(thr: f64, strict: bool) -> Vec<f64> {
    let top = if strict { thr * (1.0 - 1e-9) } else { thr };
    (0..LEMMA_GRID)
        .map(|i| top * 10f64.powf(-6.0 * (1.0 - i as f64 / (LEMMA_GRID - 1) as f64)))
        .collect()
}

// Largest t ≤ t_max with Σ|c| t^p ≤ eps; F must vanish at 0
fn t_eps(f: &FracPowerSeries, eps: f64, t_max: f64) -> Result<f64> {
    require(
        f.terms().iter().all(|x| x.p > 0.0),
        "F must vanish at t = 0 with positive exponents",
    )?;
    if sup_bound(f, t_max) <= eps {
        return Ok(t_max);
    }
    let (mut lo, mut hi) = (t_max * 1e-300f64.max(f64::MIN_POSITIVE), t_max);
    if sup_bound(f, lo) > eps {
        return Err(Error::HypothesisViolated("no positive t_eps exists".into()));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if sup_bound(f, mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok(lo)
}

struct Tally {
    max_lhs: f64,
    margin: f64,
}

impl Tally {
    fn new() -> Self {
        Self { max_lhs: f64::NEG_INFINITY, margin: f64::INFINITY }
    }

    fn main(&mut self, lhs: f64, bound: f64) {
        let lhs = if lhs.is_nan() { f64::INFINITY } else { lhs };
        self.max_lhs = self.max_lhs.max(lhs);
        self.margin = self.margin.min(bound - lhs);
    }

    fn side(&mut self, lhs: f64, bound: f64) {
        let lhs = if lhs.is_nan() { f64::INFINITY } else { lhs };
        self.margin = self.margin.min(bound - lhs);
    }
}

/// Computes the threshold of the chosen statement from its closed form and
/// checks the asserted inequality on a 100-point log grid below it.
pub fn lemma_check(params: &LemmaParams) -> Result<LemmaReport> {
    let (which, thr, bound, tally) = match params {
        LemmaParams::C31(p) => check_c31(p)?,
        LemmaParams::C32(p) => check_c32(p)?,
        LemmaParams::C33(p) => check_c33(p)?,
        LemmaParams::L31(p) => check_l31(p)?,
        LemmaParams::L32(p) => check_l32(p)?,
        LemmaParams::L33(p) => check_l33(p)?,
    };
    Ok(LemmaReport {
        which,
        threshold: thr,
        max_lhs: tally.max_lhs,
        bound,
        margin: tally.margin,
        grid_points: LEMMA_GRID,
        provenance: PROVENANCE.into(),
    })
}

type CheckOut = (LemmaKind, f64, f64, Tally);

fn check_c31(p: &C31Params) -> Result<CheckOut> {
    require(p.t_star > 0.0 && p.t_star <= 1.0, "T* must lie in (0, 1]")?;
    require(in_unit(p.eps) && in_unit(p.eps1), "eps, eps1 must lie in (0, 1)")?;
    let te = t_eps(&p.f, p.eps, p.t_star)?;
    let thr = p.t_star.min(te).min((1.0 - p.eps).powf(1.0 / p.eps1));
    let mut tally = Tally::new();
    let side_bound = (1.0 - p.eps).ln().abs();
    for t in lemma_grid(thr, false) {
        let l = (1.0 + p.f.eval(t)?).abs().ln().abs();
        tally.main(l / t.ln().abs(), p.eps1);
        tally.side(l, side_bound);
    }
    Ok((LemmaKind::C31, thr, p.eps1, tally))
}

fn check_c32(p: &C32Params) -> Result<CheckOut> {
    require(p.t_star > 0.0 && p.t_star <= 1.0, "T* must lie in (0, 1]")?;
    require(in_unit(p.lambda) && in_unit(p.eps2), "lambda, eps2 must lie in (0, 1)")?;
    let hi = 1.0 - p.lambda.powf(p.eps2);
    if !(p.eps > 0.0 && p.eps < hi) {
        return Err(Error::EpsilonOutOfRange { value: p.eps, lo: 0.0, hi });
    }
    let thr = t_eps(&p.f, p.eps, p.t_star)?;
    let mut tally = Tally::new();
    for t in lemma_grid(thr, false) {
        let l = (1.0 + p.f.eval(t)?).abs().ln() / p.lambda.ln();
        tally.main(l.abs(), p.eps2);
    }
    Ok((LemmaKind::C32, thr, p.eps2, tally))
}

fn check_c33(p: &C33Params) -> Result<CheckOut> {
    require(p.t_star > 0.0 && p.t_star <= 1.0, "T* must lie in (0, 1]")?;
    require(in_unit(p.theta), "theta must lie in (0, 1)")?;
    require(p.c1 != 0.0 && p.c1.is_finite(), "C1 must be nonzero")?;
    require(in_unit(p.eps) && in_unit(p.eps3), "eps, eps3 must lie in (0, 1)")?;
    // |t^{-θ} w₁| ≤ C₂ t^{θ*} with θ* the smallest excess exponent
    let theta_star = p.w1.min_exponent().map_or(1.0, |q| q - p.theta);
    require(theta_star > 0.0, "w1 must be o(t^theta)")?;
    let c2: f64 = p
        .w1
        .terms()
        .iter()
        .map(|x| x.c.abs() * p.t_star.powf(x.p - p.theta - theta_star))
        .sum();
    let g = gamma_lower();
    let e = 2.0 / p.eps3;
    let mut thr = p
        .t_star
        .min((p.c1.abs() * g).powf(e))
        .min((g / p.c1.abs()).powf(e))
        .min((1.0 - p.eps).powf(e));
    if c2 > 0.0 {
        thr = thr.min((p.c1.abs() * p.eps / c2).powf(1.0 / theta_star));
    }
    let gt = gamma(1.0 + p.theta)?;
    let mut tally = Tally::new();
    for t in lemma_grid(thr, true) {
        let w1 = p.w1.eval(t)?;
        let tt = t.powf(p.theta);
        let diff = p.c1 * tt / gt + w1;
        tally.main((p.theta - diff.abs().ln() / t.ln()).abs(), p.eps3);
        tally.side((gt * w1 / (tt * p.c1)).abs(), p.eps);
    }
    Ok((LemmaKind::C33, thr, p.eps3, tally))
}

fn is_c1(s: &FracPowerSeries) -> bool {
    s.terms().iter().all(|x| x.p == 0.0 || x.p >= 1.0)
}

fn check_l31(p: &L31Params) -> Result<CheckOut> {
    let kk = p.mu.len();
    require(kk >= 1 && p.r.len() == kk, "need matching orders and coefficients")?;
    require(p.t_star > 0.0 && p.t_star < 1.0, "T* must lie in (0, 1)")?;
    let mu0 = p.mu[0];
    require(in_unit(mu0), "mu0 must lie in (0, 1)")?;
    for (i, m) in p.mu.iter().enumerate().skip(1) {
        require(*m > 0.0 && *m < mu0, "minor orders must lie in (0, mu0)")?;
        require(p.mu[1..i].iter().all(|o| o != m), "orders must be distinct")?;
    }
    require(p.mu_star > 0.0 && p.mu_star <= mu0, "mu* must lie in (0, mu0]")?;
    require(p.r.iter().all(is_c1), "coefficients must be C^1")?;
    let r0 = &p.r[0];
    let r00 = r0.eval(0.0)?;
    let r0_var = sup_bound(&r0.without_constant(), p.t_star);
    require(r00 - r0_var > 0.0, "r0 must be positive on [0, T*]")?;
    let rk0: Vec<f64> = p.r.iter().map(|r| r.eval(0.0)).collect::<Result<_>>()?;
    let g = gamma_lower();
    let t = p.t_star;
    let ms = p.mu_star;
    let (d0, c3, scale) = match p.placement {
        Placement::Outside => {
            let derivs: Vec<FracPowerSeries> =
                p.mu.iter().map(|m| p.v.caputo(*m)).collect::<Result<_>>()?;
            for d in &derivs {
                require(holder_norm_bound(d, ms, t).is_finite(), "D^mu v must be mu*-Hoelder")?;
            }
            let d0: f64 = derivs
                .iter()
                .zip(&rk0)
                .map(|(d, r)| d.eval(0.0).map(|x| r * x))
                .sum::<Result<f64>>()?;
            let ratio: f64 = rk0[1..].iter().map(|r| r.abs() / (r00 * g)).sum();
            let mut c3 = holder_norm_bound(&derivs[0], ms, t) / g * (1.0 + ratio);
            for k in 1..kk {
                c3 += rk0[k].abs() * holder_seminorm_bound(&derivs[k], ms, t) / (r00 * g * g);
            }
            (d0, c3, r00)
        }
        Placement::Inside => {
            let prods: Vec<FracPowerSeries> =
                p.r.iter().map(|r| r.multiply(&p.v)).collect::<Result<_>>()?;
            let mut d0 = 0.0;
            let mut c3 = 0.0;
            for k in 0..kk {
                let dk = prods[k].caputo(p.mu[k])?;
                let semi = holder_seminorm_bound(&dk, ms, t);
                require(semi.is_finite(), "D^mu(r v) must be mu*-Hoelder")?;
                d0 += dk.eval(0.0)?;
                if k == 0 {
                    c3 += semi / g;
                } else {
                    let top = prods[k].caputo(mu0)?;
                    c3 += sup_bound(&top, t) / (g * g) + semi / (g * g);
                }
            }
            (d0, c3, 1.0)
        }
    };
    require(d0 != 0.0, "the operator must not vanish at t = 0")?;
    let nu_star = p.mu[1..].iter().fold(ms, |a, m| a.min(mu0 - m));
    let e = 2.0 / p.eps4;
    let mut thr = t
        .min((g * d0.abs() / scale).powf(e))
        .min((g * scale / d0.abs()).powf(e))
        .min((1.0 - p.eps).powf(e));
    if c3 > 0.0 {
        thr = thr.min((p.eps * d0.abs() / (scale * c3)).powf(1.0 / nu_star));
    }
    let inc = match p.placement {
        Placement::Outside => p.v.without_constant(),
        Placement::Inside => r0.multiply(&p.v)?.without_constant(),
    };
    let mut tally = Tally::new();
    for s in lemma_grid(thr, true) {
        let l = (mu0 - inc.eval(s)?.abs().ln() / s.ln()).abs();
        tally.main(l, p.eps4);
    }
    Ok((LemmaKind::L31, thr, p.eps4, tally))
}

fn check_l32(p: &L32Params) -> Result<CheckOut> {
    require(p.t_star > 0.0 && p.t_star < 1.0, "T* must lie in (0, 1)")?;
    require(in_unit(p.gamma3), "gamma3 must lie in (0, 1)")?;
    require(p.gamma4 > 0.0 && p.gamma4 < p.gamma3, "gamma4 must lie in (0, gamma3)")?;
    require(p.n >= 1, "n must be positive")?;
    require(in_unit(p.lambda) && in_unit(p.eps5), "lambda, eps5 must lie in (0, 1)")?;
    let hi = 1.0 - p.lambda.powf(p.eps5);
    if !(p.eps > 0.0 && p.eps < hi) {
        return Err(Error::EpsilonOutOfRange { value: p.eps, lo: 0.0, hi });
    }
    let f0 = p.f.eval(0.0)?;
    require(f0 != 0.0, "f(0) must be nonzero")?;
    let semi = holder_seminorm_bound(&p.f, p.gamma4, p.t_star);
    require(semi.is_finite(), "f must be gamma4-Hoelder")?;
    let nf = p.n as f64;
    let c6 = gamma_lower() * f0.abs() * p.eps / (3.0 * gamma(p.gamma4)? * (semi + nf * f0.abs()));
    let thr = p
        .t_star
        .min((2.0 * nf).powf(-1.0 / p.gamma3))
        .min((c6 / (1.0 + nf * c6)).powf(1.0 / p.gamma4));
    let f = |s: f64| p.f.eval(s).unwrap_or(f64::NAN);
    let mut tally = Tally::new();
    for t in lemma_grid(thr, false) {
        let a = g_script(&f, p.gamma3, p.n, p.lambda * t)?;
        let b = g_script(&f, p.gamma3, p.n, t)?;
        tally.main(((a / b).abs().ln() / p.lambda.ln()).abs(), p.eps5);
    }
    Ok((LemmaKind::L32, thr, p.eps5, tally))
}

fn check_l33(p: &L33Params) -> Result<CheckOut> {
    require(p.t_star > 0.0 && p.t_star < 1.0, "T* must lie in (0, 1)")?;
    require(in_unit(p.gamma_star), "gamma* must lie in (0, 1)")?;
    require(in_unit(p.gamma3) && in_unit(p.gamma4), "gamma3, gamma4 must lie in (0, 1)")?;
    require(in_unit(p.lambda) && in_unit(p.eps6), "lambda, eps6 must lie in (0, 1)")?;
    let hi = 1.0 - p.lambda.powf(p.eps6);
    if !(p.eps > 0.0 && p.eps < hi) {
        return Err(Error::EpsilonOutOfRange { value: p.eps, lo: 0.0, hi });
    }
    let (k0, f0) = (p.k.eval(0.0)?, p.f.eval(0.0)?);
    require(k0 != 0.0 && f0 != 0.0, "k(0) and f(0) must be nonzero")?;
    let sk = holder_seminorm_bound(&p.k, p.gamma3, p.t_star);
    let sf = holder_seminorm_bound(&p.f, p.gamma4, p.t_star);
    require(sk.is_finite() && sf.is_finite(), "k and f must be Hoelder")?;
    let denom = 3.0 * (f0.abs() * sk + sf * sup_bound(&p.k, p.t_star));
    let gbar = p.gamma3.min(p.gamma4);
    let thr = if denom > 0.0 {
        let c7 = p.eps * f0.abs() * k0.abs() * gamma_lower() / denom;
        p.t_star.min(c7.powf(1.0 / gbar))
    } else {
        p.t_star
    };
    let k = |s: f64| p.k.eval(s).unwrap_or(f64::NAN);
    let f = |s: f64| p.f.eval(s).unwrap_or(f64::NAN);
    let mut tally = Tally::new();
    for t in lemma_grid(thr, false) {
        let a = g_general(&k, &f, p.gamma_star, p.lambda * t)?;
        let b = g_general(&k, &f, p.gamma_star, t)?;
        tally.main(((a / b).abs().ln() / p.lambda.ln()).abs(), p.eps6);
    }
    Ok((LemmaKind::L33, thr, p.eps6, tally))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracseries::convolve_singular;
    use crate::specfun::{beta, mittag_leffler};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rule_moments() {
        for n in [1, 5, 32, 128] {
            let leg = QuadratureRule::gauss_legendre(n).unwrap();
            assert_relative_eq!(leg.weights.iter().sum::<f64>(), 1.0, max_relative = 1e-12);
            for alpha in [-0.9, -0.5, 0.0, 0.3, 2.5] {
                let jac = QuadratureRule::gauss_jacobi(n, alpha).unwrap();
                let m: f64 = jac.weights.iter().sum();
                assert_relative_eq!(m, 1.0 / (alpha + 1.0), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_rule_is_exact_on_polynomials() {
        // ∫₀¹ (1-z)^α z^j dz = B(j+1, α+1)
        let alpha = -0.37;
        let jac = QuadratureRule::gauss_jacobi(12, alpha).unwrap();
        for j in 0..23 {
            let q = jac.apply(|z| z.powi(j));
            assert_relative_eq!(q, beta(j as f64 + 1.0, alpha + 1.0).unwrap(), max_relative = 1e-12);
        }
        let leg = QuadratureRule::gauss_legendre(8).unwrap();
        for i in 0..8 {
            assert_relative_eq!(leg.nodes[i] + leg.complements[i], 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn graded_handles_endpoint_singularities() {
        let h = |x: f64, xc: f64| x.powf(-0.3) + xc.powf(-0.2) + (3.0 * x).cos();
        let v = integrate_graded(&h, 1e-11).unwrap();
        assert_relative_eq!(v, 1.0 / 0.7 + 1.0 / 0.8 + 3f64.sin() / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn caputo_examples() {
        let c = caputo_quadrature(&|_| 3.0, 0.5, 0.7, 32).unwrap();
        assert!(c.abs() < 1e-12);
        let lin = caputo_quadrature(&|s| s, 0.5, 1.0, 32).unwrap();
        assert_relative_eq!(lin, 1.128_379_167_095_512_6, max_relative = 1e-8);
        let sq = caputo_quadrature(&|s: f64| s.sqrt(), 0.5, 0.3, 32).unwrap();
        assert_relative_eq!(sq, 0.886_226_925_452_758, max_relative = 1e-7);
        let d1 = caputo_quadrature(&|s: f64| s * s, 1.0, 0.4, 32).unwrap();
        assert_relative_eq!(d1, 0.8, max_relative = 1e-10);
    }

    #[test]
    fn convolution_matches_beta_closed_form() {
        let k0 = FracPowerSeries::new([(1.0, 0.0), (0.5, 0.3)]).unwrap();
        let s = FracPowerSeries::new([(1.0, 0.5), (-2.0, 1.7)]).unwrap();
        for gam in [0.1, 0.5, 0.9, 0.99] {
            let exact = convolve_singular(gam, &k0, &s).unwrap().eval(0.3).unwrap();
            let q = convolution_quadrature(
                gam,
                &|x| k0.eval(x).unwrap(),
                &|x| s.eval(x).unwrap(),
                0.3,
            )
            .unwrap();
            assert_relative_eq!(q, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn g_general_values() {
        let one = |_: f64| 1.0;
        assert_relative_eq!(g_general(&one, &one, 0.3, 0.5).unwrap(), 1.0 / 0.3, max_relative = 1e-10);
        let k = |s: f64| 1.0 + s;
        let f = |s: f64| 2.0 - s * s;
        assert_relative_eq!(g_general(&k, &f, 0.4, 0.0).unwrap(), 2.0 / 0.4, max_relative = 1e-15);
        // continuity at 0
        let near = g_general(&k, &f, 0.4, 1e-12).unwrap();
        assert_relative_eq!(near, 5.0, max_relative = 1e-9);
    }

    #[test]
    fn g_script_values() {
        let zero = |_: f64| 0.0;
        assert_eq!(g_script(&zero, 0.5, 3, 0.2).unwrap(), 0.0);
        let f = |s: f64| 1.0 + s;
        let at0 = g_script(&f, 0.4, 2, 0.0).unwrap();
        assert_relative_eq!(at0, 2.0 / gamma(1.4).unwrap(), max_relative = 1e-15);
        assert_relative_eq!(g_script(&f, 0.4, 2, 1e-40).unwrap(), at0, max_relative = 1e-6);
        // f ≡ 1: ∫ (1-z)^{γ-1} n E_{γ,γ}(-c(1-z)^γ) dz = n E_{γ,γ+1}(-c)
        let one = |_: f64| 1.0;
        let (g3, n, t) = (0.5, 1u32, 0.25f64);
        let c = n as f64 * t.powf(g3);
        let want = n as f64 * mittag_leffler(MLParams::new(g3, g3 + 1.0).unwrap(), -c).unwrap();
        assert_relative_eq!(g_script(&one, g3, n, t).unwrap(), want, max_relative = 1e-10);
    }

    fn random_series(rng: &mut ChaCha8Rng) -> FracPowerSeries {
        let n = rng.random_range(1..=4);
        FracPowerSeries::new((0..n).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.0..3.0)))).unwrap()
    }

    fn abs_scale(s: &FracPowerSeries, t: f64) -> f64 {
        s.terms().iter().map(|x| (x.c * t.powf(x.p)).abs()).sum()
    }

    #[test]
    fn analytic_caputo_and_convolution_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let s = random_series(&mut rng);
            let nu = rng.random_range(0.02..0.98);
            let t = rng.random_range(0.01..1.0);
            let exact = s.caputo(nu).unwrap();
            let q = caputo_quadrature(&|x| s.eval(x).unwrap(), nu, t, 32).unwrap();
            let e = (q - exact.eval(t).unwrap()).abs() / abs_scale(&exact, t);
            worst = worst.max(e);

            let k0 = random_series(&mut rng);
            let gam = rng.random_range(0.02..0.98);
            let exact = convolve_singular(gam, &k0, &s).unwrap();
            let q = convolution_quadrature(gam, &|x| k0.eval(x).unwrap(), &|x| s.eval(x).unwrap(), t)
                .unwrap();
            let e = (q - exact.eval(t).unwrap()).abs() / abs_scale(&exact, t);
            worst = worst.max(e);
        }
        assert!(worst <= 1e-6, "worst relative error {worst:e}");
    }

    #[test]
    fn seminorm_bounds() {
        let c = FracPowerSeries::constant(2.0);
        assert_eq!(holder_seminorm_bound(&c, 0.5, 0.2), 0.0);
        let s = FracPowerSeries::new([(1.0, 0.2)]).unwrap();
        assert!(holder_seminorm_bound(&s, 0.5, 0.2).is_infinite());
        let r = FracPowerSeries::new([(0.25, 0.0), (0.25, 2.0)]).unwrap();
        assert_relative_eq!(holder_seminorm_bound(&r, 1.0, 0.2), 0.1, max_relative = 1e-15);
        assert_relative_eq!(sup_bound(&r, 0.2), 0.26, max_relative = 1e-15);
    }

    #[test]
    fn l32_constant_f() {
        let p = L32Params {
            f: FracPowerSeries::constant(0.7),
            gamma3: 0.6,
            gamma4: 0.3,
            n: 2,
            lambda: 0.5,
            eps: 0.1,
            eps5: 0.4,
            t_star: 0.9,
        };
        let rep = lemma_check(&LemmaParams::L32(p)).unwrap();
        let c6 = gamma_lower() * 0.1 / (3.0 * gamma(0.3).unwrap() * 2.0);
        let want = 0.9f64.min(4f64.powf(-1.0 / 0.6)).min((c6 / (1.0 + 2.0 * c6)).powf(1.0 / 0.3));
        assert_relative_eq!(rep.threshold, want, max_relative = 1e-14);
        assert!(rep.margin >= 0.0, "{rep:?}");
    }

    #[test]
    fn l33_constant_inputs() {
        let one = FracPowerSeries::constant(1.0);
        let p = L33Params {
            k: one.clone(),
            f: one,
            gamma_star: 0.5,
            gamma3: 0.5,
            gamma4: 0.5,
            lambda: 0.5,
            eps: 0.1,
            eps6: 0.3,
            t_star: 0.5,
        };
        let rep = lemma_check(&LemmaParams::L33(p)).unwrap();
        assert_eq!(rep.threshold, 0.5);
        assert!(rep.max_lhs < 1e-9);
        assert!(rep.margin > 0.0);
    }

    #[test]
    fn c33_pure_power() {
        let p = C33Params {
            c1: 0.8,
            theta: 0.4,
            w1: FracPowerSeries::zero(),
            t_star: 0.5,
            eps: 0.2,
            eps3: 0.3,
        };
        let rep = lemma_check(&LemmaParams::C33(p)).unwrap();
        assert!(rep.margin > 0.0, "{rep:?}");
        let g = gamma_lower();
        let e = 2.0 / 0.3;
        let want = 0.5f64.min((0.8 * g).powf(e)).min((g / 0.8).powf(e)).min(0.8f64.powf(e));
        assert_relative_eq!(rep.threshold, want, max_relative = 1e-14);
    }

    #[test]
    fn hypothesis_violations() {
        let p = L32Params {
            f: FracPowerSeries::monomial(1.0, 0.5),
            gamma3: 0.6,
            gamma4: 0.3,
            n: 1,
            lambda: 0.5,
            eps: 0.1,
            eps5: 0.4,
            t_star: 0.9,
        };
        assert!(matches!(lemma_check(&LemmaParams::L32(p)), Err(Error::HypothesisViolated(_))));
        let p = C32Params {
            f: FracPowerSeries::monomial(1.0, 0.5),
            t_star: 0.5,
            lambda: 0.5,
            eps: 0.9,
            eps2: 0.2,
        };
        assert!(matches!(lemma_check(&LemmaParams::C32(p)), Err(Error::EpsilonOutOfRange { .. })));
    }
}
