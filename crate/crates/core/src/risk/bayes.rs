//! Bayes risks `∫ π(θ) R(θ, q) dθ` under full and truncated Dirichlet weights.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{composition_count, coordinate_risk};
use crate::error::{domain, Error, Result};
use crate::model::{ModelSpec, PriorSpec, SymmetricPrior, TruncatedSimplex};
use crate::montecarlo::{check_std_error, dirichlet_rejection, MonteCarloSettings};
use crate::numeric::{log_factorial, stable_sum, QuadratureSettings};
use crate::simplex::{for_each_composition, log_i_trunc, truncated_dirichlet_expectation};
use crate::Real;

/// The prior the risk is averaged against.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorWeight<T> {
    Full(PriorSpec<T>),
    /// `π̄_α` renormalized to `Δ_ε`.
    Truncated { prior: SymmetricPrior<T>, trunc: TruncatedSimplex<T> },
}

impl<T: Real> PriorWeight<T> {
    fn alphas(&self) -> Vec<T> {
        match self {
            PriorWeight::Full(p) => p.a().to_vec(),
            PriorWeight::Truncated { prior, .. } => vec![prior.alpha; prior.k],
        }
    }

    fn eps(&self) -> T {
        match self {
            PriorWeight::Full(_) => T::zero(),
            PriorWeight::Truncated { trunc, .. } => trunc.eps,
        }
    }

    fn k(&self) -> usize {
        match self {
            PriorWeight::Full(p) => p.k(),
            PriorWeight::Truncated { prior, .. } => prior.k,
        }
    }
}

/// Which predictive density is scored. Both use the weight's own
/// Dirichlet parameters; `Truncated` needs a truncated weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PredictiveKind {
    Full,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BayesMode {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BayesRiskEstimate<T> {
    pub value: T,
    /// Zero for quadrature.
    pub std_error: T,
    pub mode: BayesMode,
}

/// Largest `N` whose truncated-predictive risk is enumerated, by `k`.
fn enumeration_cap_ok(k: usize, n: u64) -> bool {
    match k {
        2 => n <= 64,
        3 => n <= 24,
        _ => composition_count(n + 1, k) <= 2000,
    }
}

/// `L(x, y) = ln I_Δε(x + e_y + α) − ln I_Δε(x + α)` for every composition
/// `x` of `N`, which turns the full predictive into the truncated one:
/// `p̃(y|x) = p(y|x)·exp L(x, y)`.
#[derive(Debug, Clone)]
pub struct TruncatedPredictiveTable<T> {
    alpha: T,
    n: u64,
    k: usize,
    compositions: Vec<Vec<u64>>,
    log_coefficient: Vec<T>,
    log_ratio: Vec<Vec<T>>,
}

impl<T: Real> TruncatedPredictiveTable<T> {
    pub fn new(prior: &SymmetricPrior<T>, trunc: &TruncatedSimplex<T>, model: &ModelSpec, quad: &QuadratureSettings<T>) -> Result<Self> {
        let k = model.k;
        if prior.k != k || trunc.k != k {
            return domain("prior, truncation and model disagree on k");
        }
        if !enumeration_cap_ok(k, model.n) {
            return Err(Error::Size {
                count: composition_count(model.n, k),
                cap: composition_count(if k == 2 { 64 } else { 24 }, k),
                hint: "truncated-predictive risks enumerate x; use N <= 64 for k = 2 or N <= 24 for k = 3".into(),
            });
        }
        let mut compositions = Vec::new();
        for_each_composition(model.n, k, &mut |x| {
            compositions.push(x.to_vec());
            Ok(())
        })?;
        let mut bumped = Vec::new();
        for_each_composition(model.n + 1, k, &mut |x| {
            bumped.push(x.to_vec());
            Ok(())
        })?;
        let shifted = |x: &[u64]| x.iter().map(|&c| T::lit(c as f64) + prior.alpha).collect::<Vec<T>>();
        let log_i = |set: &[Vec<u64>]| -> Result<HashMap<Vec<u64>, T>> {
            let values: Vec<Result<T>> = set.par_iter().map(|x| Ok(log_i_trunc(&shifted(x), trunc.eps, quad)?.0)).collect();
            set.iter().cloned().zip(values).map(|(x, v)| Ok((x, v?))).collect()
        };
        let base = log_i(&compositions)?;
        let up = log_i(&bumped)?;
        let log_n_fact = log_factorial::<T>(model.n);
        let mut log_coefficient = Vec::with_capacity(compositions.len());
        let mut log_ratio = Vec::with_capacity(compositions.len());
        for x in &compositions {
            log_coefficient.push(log_n_fact - x.iter().map(|&c| log_factorial::<T>(c)).fold(T::zero(), |a, b| a + b));
            let here = base[x];
            let row = (0..k)
                .map(|y| {
                    let mut xy = x.clone();
                    xy[y] += 1;
                    up[&xy] - here
                })
                .collect();
            log_ratio.push(row);
        }
        Ok(Self {
            alpha: prior.alpha,
            n: model.n,
            k,
            compositions,
            log_coefficient,
            log_ratio,
        })
    }

    /// `Σ_x p(x|θ) Σ_y θ_y L(x, y)`: how much the truncated predictive lowers the risk at `θ`.
    pub fn log_ratio_expectation(&self, theta: &[T]) -> T {
        let log_theta: Vec<T> = theta.iter().map(|t| t.ln()).collect();
        let terms = self.compositions.iter().enumerate().filter_map(|(idx, x)| {
            let mut log_p = self.log_coefficient[idx];
            for (&c, &lt) in x.iter().zip(&log_theta) {
                if c > 0 {
                    log_p += T::lit(c as f64) * lt;
                }
            }
            let p = log_p.exp();
            if !(p > T::zero()) {
                return None;
            }
            Some(p * stable_sum(theta.iter().zip(&self.log_ratio[idx]).map(|(&t, &l)| t * l)))
        });
        stable_sum(terms)
    }

    /// Risk of the truncated predictive at `θ`.
    pub fn risk(&self, theta: &[T]) -> T {
        full_risk(&vec![self.alpha; self.k], T::count(self.k) * self.alpha, self.n, theta) - self.log_ratio_expectation(theta)
    }
}

fn full_risk<T: Real>(a: &[T], total: T, n: u64, theta: &[T]) -> T {
    stable_sum(a.iter().zip(theta).map(|(&ai, &t)| coordinate_risk(ai, total, n, t)))
}

/// `E_π[f(θ)]` for a (possibly truncated, then renormalized) Dirichlet weight.
pub fn weight_expectation<T, F>(
    weight: &PriorWeight<T>,
    mode: BayesMode,
    quad: &QuadratureSettings<T>,
    mc: &MonteCarloSettings,
    f: F,
) -> Result<BayesRiskEstimate<T>>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let alphas = weight.alphas();
    let eps = weight.eps();
    match mode {
        BayesMode::Quadrature => {
            if alphas.len() > 3 {
                return domain("quadrature-mode Bayes risks support k <= 3; use Monte Carlo mode");
            }
            let raw = truncated_dirichlet_expectation(&alphas, eps, |t| Ok(f(t)), quad)?;
            let log_mass = if eps > T::zero() { log_i_trunc(&alphas, eps, quad)?.0 } else { T::zero() };
            Ok(BayesRiskEstimate {
                value: raw / log_mass.exp(),
                std_error: T::zero(),
                mode,
            })
        }
        BayesMode::MonteCarlo => {
            let est = dirichlet_rejection(&alphas, mc, |t| if t.iter().all(|&v| v >= eps) { Some(f(t)) } else { None })?;
            check_std_error(&est, mc)?;
            Ok(BayesRiskEstimate {
                value: T::lit(est.mean),
                std_error: T::lit(est.std_error),
                mode,
            })
        }
    }
}

/// Bayes risk with an explicit integration mode.
pub fn bayes_risk_with_mode<T: Real>(
    weight: &PriorWeight<T>,
    predictive: PredictiveKind,
    model: &ModelSpec,
    mode: BayesMode,
    quad: &QuadratureSettings<T>,
    mc: &MonteCarloSettings,
) -> Result<BayesRiskEstimate<T>> {
    if weight.k() != model.k {
        return domain("weight and model disagree on k");
    }
    match (predictive, weight) {
        (PredictiveKind::Full, _) => {
            let a = weight.alphas();
            let total = stable_sum(a.iter().copied());
            weight_expectation(weight, mode, quad, mc, |t| full_risk(&a, total, model.n, t))
        }
        (PredictiveKind::Truncated, PriorWeight::Truncated { prior, trunc }) => {
            let table = TruncatedPredictiveTable::new(prior, trunc, model, quad)?;
            weight_expectation(weight, mode, quad, mc, |t| table.risk(t))
        }
        (PredictiveKind::Truncated, PriorWeight::Full(_)) => {
            domain("the truncated predictive is defined only for a truncated weight")
        }
    }
}

/// Bayes risk: quadrature for `k ≤ 3`, seeded Monte Carlo otherwise.
pub fn bayes_risk<T: Real>(
    weight: &PriorWeight<T>,
    predictive: PredictiveKind,
    model: &ModelSpec,
    quad: &QuadratureSettings<T>,
    mc: &MonteCarloSettings,
) -> Result<T> {
    let mode = if model.k <= 3 { BayesMode::Quadrature } else { BayesMode::MonteCarlo };
    Ok(bayes_risk_with_mode(weight, predictive, model, mode, quad, mc)?.value)
}
