//! Two-parameter quasi-optimality selection over geometric grids in the
//! regularization parameter `σ` and the evaluation time `t̄`.

use crate::error::{Error, Result};
use crate::reconstruct::{nu1_estimate, Assembly, EstimatorInput, ParamPair};
use crate::regression::{DesignSystem, RegressionModel};
use crate::scenario::{Observation, ProblemKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiOptConfig {
    pub sigma1: f64,
    pub xi1: f64,
    pub k1: usize,
    pub tbar1: f64,
    pub xi2: f64,
    pub k2: usize,
    /// Weight `Υ` of the first component.
    pub upsilon: f64,
    /// `λ` for FIP, `μ` for SIP.
    pub ratio_step: f64,
}

impl QuasiOptConfig {
    /// `σ_i = 2^{1−i}` (50 values), `t̄_j = t_K 2^{1−j}` (20 values), `Υ = 10`,
    /// `λ = 0.99`, `μ = 0.01`.
    pub fn defaults(kind: ProblemKind, t_k: f64) -> Self {
        Self {
            sigma1: 1.0,
            xi1: 0.5,
            k1: 50,
            tbar1: t_k,
            xi2: 0.5,
            k2: 20,
            upsilon: 10.0,
            ratio_step: match kind {
                ProblemKind::Fip => 0.99,
                ProblemKind::Sip => 0.01,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !(self.sigma1 > 0.0 && self.sigma1.is_finite()) {
            return Err(Error::Domain(format!("sigma1 = {} must be positive", self.sigma1)));
        }
        if !unit(self.xi1) || !unit(self.xi2) || !unit(self.tbar1) || !unit(self.ratio_step) {
            return Err(Error::Domain("xi1, xi2, tbar1 and the ratio step must lie in (0, 1)".into()));
        }
        if self.k1 < 2 || self.k2 < 2 {
            return Err(Error::Domain("both grids need at least two points".into()));
        }
        if !(self.upsilon > 0.0) {
            return Err(Error::Domain(format!("weight {} must be positive", self.upsilon)));
        }
        Ok(())
    }

    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.k1).map(|i| self.sigma1 * self.xi1.powi(i as i32)).collect()
    }

    pub fn tbars(&self) -> Vec<f64> {
        (0..self.k2).map(|j| self.tbar1 * self.xi2.powi(j as i32)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Candidate {
    Valid(ParamPair),
    Invalid(String),
}

impl Candidate {
    pub fn pair(&self) -> Option<&ParamPair> {
        match self {
            Candidate::Valid(p) => Some(p),
            Candidate::Invalid(_) => None,
        }
    }
}

/// `K1 × K2` candidates, stored row-major by `σ` index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub sigmas: Vec<f64>,
    pub tbars: Vec<f64>,
    pub entries: Vec<Candidate>,
}

impl CandidateGrid {
    pub fn new(sigmas: Vec<f64>, tbars: Vec<f64>, entries: Vec<Candidate>) -> Result<Self> {
        if entries.len() != sigmas.len() * tbars.len() {
            return Err(Error::InputMismatch("grid is not rectangular".into()));
        }
        Ok(Self { sigmas, tbars, entries })
    }

    pub fn get(&self, i: usize, j: usize) -> &Candidate {
        &self.entries[i * self.tbars.len() + j]
    }

    pub fn invalid_count(&self) -> usize {
        self.entries.iter().filter(|c| c.pair().is_none()).count()
    }

    /// CSV with columns `i,j,sigma,t_bar,nu1,second,valid,reason` (one-based indices).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "sigma", "t_bar", "nu1", "second", "valid", "reason"])?;
        for (i, s) in self.sigmas.iter().enumerate() {
            for (j, t) in self.tbars.iter().enumerate() {
                let (nu1, second, valid, reason) = match self.get(i, j) {
                    Candidate::Valid(p) => (p.nu1.to_string(), p.second.to_string(), "true", String::new()),
                    Candidate::Invalid(r) => (String::new(), String::new(), "false", r.clone()),
                };
                wr.write_record([
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    s.to_string(),
                    t.to_string(),
                    nu1,
                    second,
                    valid.to_string(),
                    reason,
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// `√((Υ d₁)² + d₂²)`.
pub fn weighted_norm(d1: f64, d2: f64, upsilon: f64) -> f64 {
    (upsilon * d1).hypot(d2)
}

fn diff(a: &Candidate, b: &Candidate, upsilon: f64) -> f64 {
    match (a.pair(), b.pair()) {
        (Some(x), Some(y)) => {
            let v = weighted_norm(x.nu1 - y.nu1, x.second - y.second, upsilon);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        }
        _ => f64::INFINITY,
    }
}

// first index of the smallest finite value
fn argmin(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v < b) {
            best = Some((k, v));
        }
    }
    best
}

/// Evaluates every `(σ_i, t̄_j)` candidate; fits run in parallel over `σ`.
pub fn evaluate_grid(
    template: &EstimatorInput,
    model: &RegressionModel,
    obs: &Observation,
    cfg: &QuasiOptConfig,
) -> Result<CandidateGrid> {
    cfg.validate()?;
    let system = DesignSystem::new(model, obs)?;
    let sigmas = cfg.sigmas();
    let tbars = cfg.tbars();
    let rows: Vec<Vec<Candidate>> = sigmas
        .par_iter()
        .map(|&sigma| {
            let fit = match system.fit(model, sigma) {
                Ok(f) => f,
                Err(e) => return vec![Candidate::Invalid(e.to_string()); tbars.len()],
            };
            let mut inp = template.clone();
            inp.psi = fit.psi_fit;
            inp.psi0 = obs.psi0;
            let asm = match Assembly::new(&inp) {
                Ok(a) => a,
                Err(e) => return vec![Candidate::Invalid(e.to_string()); tbars.len()],
            };
            tbars
                .iter()
                .map(|&t| {
                    let r = nu1_estimate(&inp, t).and_then(|nu1| {
                        let second = asm.second_estimate(nu1, t, cfg.ratio_step)?;
                        Ok(ParamPair { nu1, second, kind: inp.kind })
                    });
                    match r {
                        Ok(p) if p.nu1.is_finite() && p.second.is_finite() => Candidate::Valid(p),
                        Ok(_) => Candidate::Invalid("non-finite estimate".into()),
                        Err(e) => Candidate::Invalid(e.to_string()),
                    }
                })
                .collect()
        })
        .collect();
    CandidateGrid::new(sigmas, tbars, rows.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Zero-based `i_j` per column; `None` for excluded columns.
    pub i_per_column: Vec<Option<usize>>,
    /// Zero-based selected column.
    pub j0: usize,
    /// Zero-based selected row, `i_{j₀}`.
    pub i0: usize,
    pub sigma: f64,
    pub t_bar: f64,
    pub pair: ParamPair,
    pub invalid_count: usize,
    pub excluded_columns: usize,
}

/// Stage 1 picks `i_j` minimizing consecutive differences in `σ` within each
/// column; stage 2 picks `j₀` minimizing the cross-column difference between
/// `(i_j, j)` and `(i_{j−1}, j−1)`. Ties go to the smallest index.
pub fn select(grid: &CandidateGrid, cfg: &QuasiOptConfig) -> Result<Selection> {
    let k1 = grid.sigmas.len();
    let k2 = grid.tbars.len();
    let ups = cfg.upsilon;
    let i_per_column: Vec<Option<usize>> = (0..k2)
        .map(|j| argmin((1..k1).map(|i| diff(grid.get(i, j), grid.get(i - 1, j), ups))).map(|(k, _)| k + 1))
        .collect();
    let stage2 = (1..k2).map(|j| match (i_per_column[j], i_per_column[j - 1]) {
        (Some(a), Some(b)) => diff(grid.get(a, j), grid.get(b, j - 1), ups),
        _ => f64::INFINITY,
    });
    let j0 = match argmin(stage2) {
        Some((k, _)) => k + 1,
        None => i_per_column.iter().position(Option::is_some).ok_or(Error::NoValidCandidates)?,
    };
    let i0 = i_per_column[j0].expect("selected column has a stage-1 index");
    let pair = *grid.get(i0, j0).pair().expect("stage-1 index points at a valid entry");
    Ok(Selection {
        excluded_columns: i_per_column.iter().filter(|x| x.is_none()).count(),
        i_per_column,
        j0,
        i0,
        sigma: grid.sigmas[i0],
        t_bar: grid.tbars[j0],
        pair,
        invalid_count: grid.invalid_count(),
    })
}
