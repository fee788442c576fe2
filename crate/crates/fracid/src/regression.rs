//! Tikhonov regression of the observation on fractional powers and shifted
//! Jacobi polynomials.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::fracseries::FracPowerSeries;
use crate::scenario::Observation;
use crate::specfun::binomial;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Highest Jacobi degree accepted by [`build_basis`].
pub const MAX_JACOBI_DEGREE: usize = 12;

/// `P_m^{(0,−a)}(x)` on `[0, 1]` via the factorized monomial form.
pub fn jacobi_shifted(m: usize, a: f64, x: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut xi = 1.0;
    for i in 0..=m {
        let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binomial(m as f64, i as f64)? * binomial(m as f64 - a + i as f64, m as f64)? * xi;
        xi *= x;
    }
    Ok(acc)
}

/// Monomial coefficients of `P_m^{(0,−a)}(x)` in double-double precision.
/// `C(m−a+i, m)` is formed as the product `Π_{k=1..m} (i−a+k)/k`.
fn jacobi_coeffs_dd(m: usize, a: f64) -> Vec<Dd> {
    let mut out = Vec::with_capacity(m + 1);
    let mut cmi = Dd::from(1.0);
    for i in 0..=m {
        if i > 0 {
            cmi = cmi * Dd::from((m + 1 - i) as f64) / Dd::from(i as f64);
        }
        let mut g = Dd::from(1.0);
        for k in 1..=m {
            g = g * (Dd::from((i + k) as f64) - Dd::from(a)) / Dd::from(k as f64);
        }
        let v = cmi * g;
        out.push(if (m - i) % 2 == 0 { v } else { -v });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BasisKind {
    Power(f64),
    Jacobi(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub betas: Vec<f64>,
    pub jacobi_max_degree: usize,
    pub weight_a: f64,
    pub t_k: f64,
    pub kinds: Vec<BasisKind>,
    pub basis: Vec<FracPowerSeries>,
}

impl RegressionModel {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Row of the design matrix at `t`; at `t = 0` only constant parts count.
    pub fn design_row(&self, t: f64) -> Result<Vec<f64>> {
        self.basis
            .iter()
            .map(|b| if t == 0.0 { Ok(b.constant_term()) } else { b.eval(t) })
            .collect()
    }

    /// `Σ q_j e_j` as a single series.
    pub fn combine(&self, q: &[f64]) -> Result<FracPowerSeries> {
        if q.len() != self.basis.len() {
            return Err(Error::InputMismatch(format!("{} coefficients for {} basis functions", q.len(), self.basis.len())));
        }
        let pairs: Vec<(f64, f64)> = self
            .basis
            .iter()
            .zip(q)
            .flat_map(|(b, &qj)| b.terms().iter().map(move |x| (qj * x.c, x.p)))
            .collect();
        FracPowerSeries::new(pairs)
    }
}

/// Powers `t^{β_i}` followed by `P_m^{(0,−a)}(t/t_K)` for `m = 0..=degree`.
pub fn build_basis(betas: &[f64], jacobi_max_degree: usize, a: f64, t_k: f64) -> Result<RegressionModel> {
    if jacobi_max_degree > MAX_JACOBI_DEGREE {
        return Err(Error::DegreeTooHigh(jacobi_max_degree));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("weight exponent {a} outside (0, 1)")));
    }
    if !(t_k > 0.0 && t_k <= 1.0) {
        return Err(Error::Domain(format!("t_K = {t_k} outside (0, 1]")));
    }
    if betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) || betas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("power exponents must be positive and strictly increasing".into()));
    }
    let mut kinds = Vec::new();
    let mut basis = Vec::new();
    for &b in betas {
        kinds.push(BasisKind::Power(b));
        basis.push(FracPowerSeries::monomial(1.0, b));
    }
    for m in 0..=jacobi_max_degree {
        let c = jacobi_coeffs_dd(m, a);
        let pairs = c.iter().enumerate().map(|(i, ci)| (ci.value() / t_k.powi(i as i32), i as f64));
        kinds.push(BasisKind::Jacobi(m));
        basis.push(FracPowerSeries::new(pairs)?);
    }
    Ok(RegressionModel { betas: betas.to_vec(), jacobi_max_degree, weight_a: a, t_k, kinds, basis })
}

// element in the scaled variable x = t/t_K as (coefficient, exponent) pairs
fn scaled_pairs(model: &RegressionModel, k: BasisKind) -> (Vec<(Dd, f64)>, f64) {
    match k {
        BasisKind::Power(b) => (vec![(Dd::from(1.0), b)], model.t_k.powf(b)),
        BasisKind::Jacobi(m) => (
            jacobi_coeffs_dd(m, model.weight_a).into_iter().enumerate().map(|(i, c)| (c, i as f64)).collect(),
            1.0,
        ),
    }
}

/// `H_{lm} = ∫₀^{t_K} t^{−a} e_l e_m dt`, summed exactly term by term.
pub fn gram_matrix(model: &RegressionModel) -> DMatrix<f64> {
    let n = model.len();
    let a = model.weight_a;
    let outer = model.t_k.powf(1.0 - a);
    let parts: Vec<_> = model.kinds.iter().map(|k| scaled_pairs(model, *k)).collect();
    let mut h = DMatrix::zeros(n, n);
    for l in 0..n {
        for m in l..n {
            let mut acc = Dd::from(0.0);
            for (cl, pl) in &parts[l].0 {
                for (cm, pm) in &parts[m].0 {
                    let denom = Dd::from(pl + pm + 1.0) - Dd::from(a);
                    acc = acc + *cl * *cm / denom;
                }
            }
            let v = acc.value() * outer * parts[l].1 * parts[m].1;
            h[(l, m)] = v;
            h[(m, l)] = v;
        }
    }
    h
}

/// Precomputed normal-equation blocks for one model and one observation.
#[derive(Debug, Clone)]
pub struct DesignSystem {
    pub design: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub ete: DMatrix<f64>,
    pub ety: DVector<f64>,
    pub gram: DMatrix<f64>,
}

impl DesignSystem {
    pub fn new(model: &RegressionModel, obs: &Observation) -> Result<Self> {
        let rows = obs.times.len() + 1;
        let mut design = DMatrix::zeros(rows, model.len());
        let mut rhs = DVector::zeros(rows);
        for (r, (t, y)) in std::iter::once((0.0, obs.psi0)).chain(obs.times.iter().copied().zip(obs.values.iter().copied())).enumerate() {
            for (c, v) in model.design_row(t)?.into_iter().enumerate() {
                design[(r, c)] = v;
            }
            rhs[r] = y;
        }
        let ete = design.transpose() * &design;
        let ety = design.transpose() * &rhs;
        Ok(Self { design, rhs, ete, ety, gram: gram_matrix(model) })
    }

    pub fn fit(&self, model: &RegressionModel, sigma: f64) -> Result<TikhonovFit> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
        }
        let a = &self.ete + &self.gram * sigma;
        let chol = a.clone().cholesky().ok_or(Error::IllConditioned(sigma))?;
        let q = chol.solve(&self.ety);
        let eig = a.symmetric_eigenvalues();
        let condition_estimate = eig.max() / eig.min();
        let residual_norm = (&self.design * &q - &self.rhs).norm();
        let q: Vec<f64> = q.iter().copied().collect();
        Ok(TikhonovFit { sigma, psi_fit: model.combine(&q)?, q, residual_norm, condition_estimate })
    }

    /// `‖(EᵀE+σH)q − Eᵀy‖ / ‖Eᵀy‖`.
    pub fn normal_residual(&self, fit: &TikhonovFit) -> f64 {
        let q = DVector::from_column_slice(&fit.q);
        ((&self.ete + &self.gram * fit.sigma) * q - &self.ety).norm() / self.ety.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TikhonovFit {
    pub sigma: f64,
    pub q: Vec<f64>,
    pub residual_norm: f64,
    pub psi_fit: FracPowerSeries,
    pub condition_estimate: f64,
}

impl TikhonovFit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Solves `(EᵀE + σH) q = Eᵀψ̄_δ` with a Cholesky factorization.
pub fn tikhonov_fit(model: &RegressionModel, obs: &Observation, sigma: f64) -> Result<TikhonovFit> {
    DesignSystem::new(model, obs)?.fit(model, sigma)
}
