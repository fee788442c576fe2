//! Verification suites shared by the command line and the acceptance run:
//! algebraic identities, analytic-versus-quadrature agreement, lemma
//! margins on random inputs and empirical error curves.

use crate::bounds::{
    empirical_delta, estimate_norms, log_grid, t_i0, ConstantsLedger, DeltaCurve, DeltaKind, FdoType, LedgerInputs,
};
use crate::error::Result;
use crate::fracseries::{convolve_singular, FracPowerSeries, Placement};
use crate::oracle::{
    caputo_quadrature, convolution_quadrature, g_general, g_script, lemma_check, C33Params, L31Params, L32Params,
    L33Params, LemmaKind, LemmaParams,
};
use crate::reconstruct::{Assembly, EstimatorInput, UFunction};
use crate::scenario::{builtin, ProblemKind, IDENTITY_TOL, BUILTIN_NAMES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl CheckRecord {
    /// Passes when `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance, detail: detail.into() }
    }

    pub fn failed(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self { name: name.into(), value: f64::NAN, tolerance: f64::NAN, pass: false, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<CheckRecord>) -> Self {
        Self { suite: suite.into(), passed: checks.iter().all(|c| c.pass), checks }
    }
}

fn record(name: String, r: Result<CheckRecord>) -> CheckRecord {
    r.unwrap_or_else(|e| CheckRecord::failed(name, e.to_string()))
}

/// Ten sample times in `(0, 0.2]`.
pub fn identity_times() -> Vec<f64> {
    (1..=10).map(|k| 0.02 * k as f64).collect()
}

const IDENTITY_NUS: [f64; 3] = [0.3, 0.5, 0.8];
const REL_TOL: f64 = 1e-6;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn fnu_identity(name: &str, nu: f64) -> Result<CheckRecord> {
    let s = builtin(name, nu, None)?;
    let inp = EstimatorInput::exact(&s)?;
    let u = UFunction::new(&inp, nu)?;
    let asm = Assembly::new(&inp)?;
    let g3 = nu - s.true_params.second;
    let f = |x: f64| u.eval(x, 1).unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    for t in identity_times() {
        let rhs = t.powf(g3) * g_script(&f, g3, 1, t)?;
        worst = worst.max(rel(asm.eval(nu, t)?, rhs));
    }
    Ok(CheckRecord::at_most(format!("f_nu/{name}/nu={nu}"), worst, REL_TOL, "max relative error over 10 times"))
}

fn fgamma_identity(name: &str, nu: f64) -> Result<CheckRecord> {
    let s = builtin(name, nu, None)?;
    let gam = s.true_params.second;
    let inp = EstimatorInput::exact(&s)?;
    let asm = Assembly::new(&inp)?;
    let c1 = s.c1_for(s.psi_exact())?;
    let k = |x: f64| s.kernel.k0.eval(x).unwrap_or(f64::NAN);
    let f = |x: f64| c1.eval(x).unwrap_or(f64::NAN);
    let mut worst: f64 = 0.0;
    for t in identity_times() {
        let rhs = t.powf(1.0 - gam) * g_general(&k, &f, 1.0 - gam, t)?;
        worst = worst.max(rel(asm.eval(nu, t)?, rhs));
    }
    Ok(CheckRecord::at_most(format!("f_gamma/{name}/nu={nu}"), worst, REL_TOL, "max relative error over 10 times"))
}

/// Operator identity on every built-in plus the two convolution identities.
pub fn identity_suite() -> SuiteReport {
    let mut checks = Vec::new();
    for name in BUILTIN_NAMES {
        for nu in IDENTITY_NUS {
            let id = format!("operator/{name}/nu={nu}");
            checks.push(record(
                id.clone(),
                builtin(name, nu, None)
                    .and_then(|s| s.identity_residual())
                    .map(|r| CheckRecord::at_most(id, r, IDENTITY_TOL, "sup residual of the operator identity")),
            ));
            let id = format!("aux/{name}/nu={nu}");
            let kind = builtin(name, nu, None).map(|s| s.true_params.kind);
            checks.push(match kind {
                Ok(ProblemKind::Fip) => record(id, fnu_identity(name, nu)),
                Ok(ProblemKind::Sip) => record(id, fgamma_identity(name, nu)),
                Err(e) => CheckRecord::failed(id, e.to_string()),
            });
        }
    }
    SuiteReport::new("identities", checks)
}

fn random_series(rng: &mut ChaCha8Rng) -> Result<FracPowerSeries> {
    let n = rng.random_range(1..=4);
    FracPowerSeries::new((0..n).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.0..3.0))).collect::<Vec<_>>())
}

// Σ |c t^p| of the exact value, the scale against which quadrature error is measured
fn abs_scale(s: &FracPowerSeries, t: f64) -> f64 {
    s.terms().iter().map(|x| (x.c * t.powf(x.p)).abs()).sum()
}

// absolute error when the exact value is identically zero
fn rel_to_scale(q: f64, exact: &FracPowerSeries, t: f64) -> Result<f64> {
    let err = (q - exact.eval(t)?).abs();
    let scale = abs_scale(exact, t);
    Ok(if scale > 0.0 { err / scale } else { err })
}

/// Analytic Caputo derivative and singular convolution against quadrature on
/// `cases` random series. Errors are relative to the absolute term sum.
pub fn oracle_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for case in 0..cases {
        let s = random_series(&mut rng);
        let k0 = random_series(&mut rng);
        let nu = rng.random_range(0.02..0.98);
        let gam = rng.random_range(0.02..0.98);
        let t = rng.random_range(0.01..1.0);
        let name = format!("case {case}");
        let run = || -> Result<CheckRecord> {
            let (s, k0) = (s?, k0?);
            let exact = s.caputo(nu)?;
            let q = caputo_quadrature(&|x| s.eval(x).unwrap_or(f64::NAN), nu, t, 32)?;
            let e1 = rel_to_scale(q, &exact, t)?;
            let exact = convolve_singular(gam, &k0, &s)?;
            let q = convolution_quadrature(
                gam,
                &|x| k0.eval(x).unwrap_or(f64::NAN),
                &|x| s.eval(x).unwrap_or(f64::NAN),
                t,
            )?;
            let e2 = rel_to_scale(q, &exact, t)?;
            Ok(CheckRecord::at_most(
                name.clone(),
                e1.max(e2),
                REL_TOL,
                format!("nu={nu:.4} gamma={gam:.4} t={t:.4}"),
            ))
        };
        checks.push(record(name.clone(), run()));
    }
    SuiteReport::new("oracle", checks)
}

fn tail_series(rng: &mut ChaCha8Rng, c0: f64, min_p: f64) -> Result<FracPowerSeries> {
    let n = rng.random_range(0..=2);
    let mut pairs = vec![(c0, 0.0)];
    for _ in 0..n {
        pairs.push((rng.random_range(-1.0..1.0), min_p + rng.random_range(0.0..1.5)));
    }
    FracPowerSeries::new(pairs)
}

fn nonzero(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let x = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        x
    } else {
        -x
    }
}

/// Random inputs that satisfy the hypotheses of the chosen statement.
pub fn random_lemma_case(kind: LemmaKind, rng: &mut ChaCha8Rng) -> Result<LemmaParams> {
    let lambda = rng.random_range(0.1..0.99);
    Ok(match kind {
        LemmaKind::L31 => {
            let mu0: f64 = rng.random_range(0.2..0.95);
            let k = rng.random_range(1..=3);
            let mut mu = vec![mu0];
            while mu.len() < k {
                let m: f64 = rng.random_range(0.05..mu0);
                if mu.iter().all(|o| (o - m).abs() > 1e-3) {
                    mu.push(m);
                }
            }
            let gap = mu[1..].iter().fold(mu0, |a, m| a.min(mu0 - m));
            let mu_star = gap * rng.random_range(0.5..1.0);
            let c1 = nonzero(rng, 0.2, 2.0);
            let v = FracPowerSeries::new([
                (rng.random_range(-1.0..1.0), 0.0),
                (c1, mu0),
                (rng.random_range(-1.0..1.0), mu0 + 1.0 + rng.random_range(0.0..1.0)),
            ])?;
            let placement = if rng.random_bool(0.5) { Placement::Outside } else { Placement::Inside };
            let r00 = rng.random_range(0.3..2.0);
            let mut r = vec![FracPowerSeries::new([(r00, 0.0), (r00 * rng.random_range(-0.5..0.5), 2.0)])?];
            for _ in 1..k {
                r.push(FracPowerSeries::new([(rng.random_range(-1.0..1.0), 0.0), (rng.random_range(-1.0..1.0), 2.0)])?);
            }
            LemmaParams::L31(L31Params {
                v,
                mu,
                r,
                placement,
                mu_star,
                t_star: rng.random_range(0.1..0.9),
                eps: rng.random_range(0.05..0.9),
                eps4: rng.random_range(0.05..0.9),
            })
        }
        LemmaKind::L32 => {
            let gamma3 = rng.random_range(0.1..0.95);
            let gamma4 = rng.random_range(0.05..gamma3);
            let eps5 = rng.random_range(0.05..0.9);
            let f0 = nonzero(rng, 0.2, 2.0);
            LemmaParams::L32(L32Params {
                f: tail_series(rng, f0, gamma4)?,
                gamma3,
                gamma4,
                n: rng.random_range(1..=5),
                lambda,
                eps: rng.random_range(0.05..0.95) * (1.0 - lambda.powf(eps5)),
                eps5,
                t_star: rng.random_range(0.1..0.9),
            })
        }
        LemmaKind::L33 => {
            let gamma3 = rng.random_range(0.05..0.95);
            let gamma4 = rng.random_range(0.05..0.95);
            let eps6 = rng.random_range(0.05..0.9);
            let (k0, f0) = (nonzero(rng, 0.2, 2.0), nonzero(rng, 0.2, 2.0));
            LemmaParams::L33(L33Params {
                k: tail_series(rng, k0, gamma3)?,
                f: tail_series(rng, f0, gamma4)?,
                gamma_star: rng.random_range(0.05..0.95),
                gamma3,
                gamma4,
                lambda,
                eps: rng.random_range(0.05..0.95) * (1.0 - lambda.powf(eps6)),
                eps6,
                t_star: rng.random_range(0.1..0.9),
            })
        }
        LemmaKind::C33 => {
            let theta = rng.random_range(0.05..0.95);
            let n = rng.random_range(0..=2);
            let w1 = FracPowerSeries::new(
                (0..n).map(|_| (rng.random_range(-1.0..1.0), theta + rng.random_range(0.05..1.5))).collect::<Vec<_>>(),
            )?;
            LemmaParams::C33(C33Params {
                c1: nonzero(rng, 0.2, 2.0),
                theta,
                w1,
                t_star: rng.random_range(0.1..1.0),
                eps: rng.random_range(0.05..0.9),
                eps3: rng.random_range(0.05..0.9),
            })
        }
        other => return Err(crate::Error::Domain(format!("no random generator for {other:?}"))),
    })
}

pub const LEMMA_KINDS: [LemmaKind; 4] = [LemmaKind::L31, LemmaKind::L32, LemmaKind::L33, LemmaKind::C33];

/// `per_kind` random cases for each statement; a check passes on a
/// nonnegative margin.
pub fn lemma_suite(seed: u64, per_kind: usize) -> SuiteReport {
    use rayon::prelude::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for kind in LEMMA_KINDS {
        for i in 0..per_kind {
            cases.push((format!("{kind:?}/{i}"), random_lemma_case(kind, &mut rng)));
        }
    }
    let checks = cases
        .into_par_iter()
        .map(|(name, params)| {
            let run = params.and_then(|p| lemma_check(&p)).map(|rep| CheckRecord {
                name: name.clone(),
                value: rep.margin,
                tolerance: 0.0,
                pass: rep.margin >= 0.0,
                detail: format!("threshold {:e}, max lhs {:e}, bound {}", rep.threshold, rep.max_lhs, rep.bound),
            });
            record(name, run)
        })
        .collect();
    SuiteReport::new("lemmas", checks)
}

/// Supplied values for every existential constant of the ledger.
pub fn certified_inputs() -> LedgerInputs {
    LedgerInputs {
        c0: Some(1.0),
        c1: Some(1.0),
        c2: Some(1.0),
        c5: Some(1.0),
        alpha: Some(0.5),
        gamma0: Some(0.99),
        r: Some(1.0),
        r1: Some(1.0),
        g_norm: Some(1.0),
        phi_norm: Some(0.0),
        ..Default::default()
    }
}

pub const DELTA_T_STAR: f64 = 0.2;

/// Empirical `Δ₁ ≤ ε_I` on every grid point below the leading-order horizon.
pub fn leading_soundness(nu: f64, eps_i: f64, grid: &[f64]) -> Result<CheckRecord> {
    let s = builtin("fip_ex82", nu, None)?;
    let norms = estimate_norms(&s, DELTA_T_STAR, 128, 0.5, 0.5)?;
    let ledger = ConstantsLedger::build(&s, &certified_inputs(), &norms)?;
    let h = t_i0(eps_i, FdoType::of(&s), ledger.rho_at_zero[0], s.c_nu()?.eval(0.0)?, DELTA_T_STAR)?;
    let curve = empirical_delta(&s, DeltaKind::Leading, grid, 0.99)?;
    let below: Vec<_> = curve.points.iter().filter(|p| p.t_a <= h.value).collect();
    let worst = below.iter().map(|p| if p.valid { p.delta } else { f64::INFINITY }).fold(0.0, f64::max);
    Ok(CheckRecord::at_most(
        format!("delta1/fip_ex82/nu={nu}/eps_I={eps_i}"),
        worst,
        eps_i,
        format!("{} grid points below T_I0 = {:e}", below.len(), h.value),
    ))
}

/// Index of the first point (in decreasing `t_a`) with `Δ < level`, and
/// whether `Δ` is non-increasing from there on.
pub fn monotone_after_crossing(curve: &DeltaCurve, level: f64) -> (Option<usize>, bool) {
    let mut pts = curve.points.clone();
    pts.sort_by(|a, b| b.t_a.total_cmp(&a.t_a));
    let Some(k) = pts.iter().position(|p| p.valid && p.delta < level) else {
        return (None, false);
    };
    let ok = pts[k..].iter().all(|p| p.valid) && pts[k..].windows(2).all(|w| w[1].delta <= w[0].delta);
    (Some(k), ok)
}

pub const CROSSING_LEVEL: f64 = 0.05;

/// Decay curves span `10^{-1}..10^{-6}`. Further down the minor-order error
/// sits at the rounding floor (about 1e-12) and fluctuates.
pub const DECAY_DECADES: u32 = 5;

fn curve_check(name: &str, kind: DeltaKind, nu: f64, step: f64, grid: &[f64]) -> Result<(CheckRecord, DeltaCurve)> {
    let s = builtin(name, nu, None)?;
    let curve = empirical_delta(&s, kind, grid, step)?;
    let (k, ok) = monotone_after_crossing(&curve, CROSSING_LEVEL);
    let last = curve.points.iter().min_by(|a, b| a.t_a.total_cmp(&b.t_a)).map_or(f64::NAN, |p| p.delta);
    let rec = CheckRecord {
        name: format!("{kind:?}/{name}/nu={nu}"),
        value: last,
        tolerance: CROSSING_LEVEL,
        pass: ok && last < CROSSING_LEVEL,
        detail: match k {
            Some(k) => format!("below {CROSSING_LEVEL} from grid index {k}; non-increasing afterwards: {ok}"),
            None => format!("never below {CROSSING_LEVEL}"),
        },
    };
    Ok((rec, curve))
}

/// Error curves: soundness of the leading-order horizon and decay of the
/// minor-order and kernel-exponent errors.
pub fn delta_suite() -> (SuiteReport, Vec<DeltaCurve>) {
    let mut checks = Vec::new();
    let mut curves = Vec::new();
    for eps_i in [0.1, 0.3] {
        let name = format!("delta1/eps_I={eps_i}");
        checks.push(record(name, leading_soundness(0.5, eps_i, &log_grid(11, 2))));
    }
    let decay = log_grid(DECAY_DECADES, 2);
    for (name, kind, step) in [("fip_ex82", DeltaKind::MinorOrder, 0.99), ("sip_ex83", DeltaKind::KernelExponent, 0.01)] {
        match curve_check(name, kind, 0.5, step, &decay) {
            Ok((rec, curve)) => {
                checks.push(rec);
                curves.push(curve);
            }
            Err(e) => checks.push(CheckRecord::failed(format!("{kind:?}/{name}"), e.to_string())),
        }
    }
    (SuiteReport::new("deltas", checks), curves)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_pass() {
        let r = identity_suite();
        assert!(r.passed, "{:#?}", r.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        assert_eq!(r.checks.len(), 18);
    }

    #[test]
    fn oracle_small_run() {
        let r = oracle_suite(3, 20);
        assert!(r.passed, "{:#?}", r.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    }

    #[test]
    fn generated_cases_meet_hypotheses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in LEMMA_KINDS {
            for _ in 0..5 {
                let p = random_lemma_case(kind, &mut rng).unwrap();
                let rep = lemma_check(&p).unwrap();
                assert!(rep.margin >= 0.0, "{kind:?}: {rep:?}");
            }
        }
        assert!(random_lemma_case(LemmaKind::C31, &mut rng).is_err());
    }

    #[test]
    fn crossing_detection() {
        use crate::bounds::DeltaPoint;
        let pt = |t_a, delta| DeltaPoint { t_a, delta, valid: true };
        let c = DeltaCurve { kind: DeltaKind::Leading, points: vec![pt(1e-3, 0.01), pt(1e-1, 0.2), pt(1e-2, 0.04)] };
        assert_eq!(monotone_after_crossing(&c, 0.05), (Some(1), true));
        let c = DeltaCurve { kind: DeltaKind::Leading, points: vec![pt(1e-1, 0.01), pt(1e-2, 0.03)] };
        assert_eq!(monotone_after_crossing(&c, 0.05), (Some(0), false));
        assert_eq!(monotone_after_crossing(&c, 0.001), (None, false));
    }
}
