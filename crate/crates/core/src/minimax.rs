//! Headline experiments: sup-risk comparison of symmetric priors, the
//! upper/lower bracket on the minimax risk over `Δ_ε`, and a finite-`N` scan
//! for the best symmetric concentration.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{alpha_hat, EpsilonSchedule, ModelSpec, ScheduleMode, SymmetricPrior};
use crate::montecarlo::MonteCarloSettings;
use crate::numeric::QuadratureSettings;
use crate::risk::{bayes_risk, sup_risk_with, PredictiveKind, PriorWeight, SupSearchSettings};

/// A sweep "decreases" when its last value is at most this fraction of its first.
pub const TREND_FACTOR: f64 = 0.6;
/// Allowed numerical slack in `upper ≥ lower`.
pub const BRACKET_TOL: f64 = 1e-12;

/// Numerical settings shared by the experiment drivers.
#[derive(Debug, Clone, Default)]
pub struct AnalysisSettings {
    pub search: SupSearchSettings,
    pub quad: QuadratureSettings<f64>,
    pub mc: MonteCarloSettings,
}

impl AnalysisSettings {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            search: SupSearchSettings { seed, ..SupSearchSettings::default() },
            mc: MonteCarloSettings::with_seed(seed),
            ..Self::default()
        }
    }
}

/// `last ≤ 0.6 · first` over a sweep of at least three points.
pub fn trend_decreasing(values: &[f64]) -> bool {
    values.len() >= 3 && values[values.len() - 1] <= TREND_FACTOR * values[0]
}

/// `"jeffreys"`, `"uniform"`, `"alpha_hat"`, or `"alpha=<value>"`.
pub fn prior_label(alpha: f64) -> String {
    if alpha == 0.5 {
        "jeffreys".into()
    } else if alpha == 1.0 {
        "uniform".into()
    } else if (alpha - alpha_hat::<f64>()).abs() < 1e-12 {
        "alpha_hat".into()
    } else {
        format!("alpha={alpha}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorComparisonRow {
    pub prior_label: String,
    pub alpha: f64,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: u64,
    pub eps: f64,
    pub sup_risk: f64,
    /// `sup_risk − (k−1)/(2N)`.
    pub excess_over_t1: f64,
    /// `N² · excess_over_t1`.
    pub scaled_excess: f64,
}

/// One row per `(prior, N)`, in prior-major declaration order.
pub fn compare_priors(
    k: usize,
    n_list: &[u64],
    schedule: &EpsilonSchedule<f64>,
    priors: &[SymmetricPrior<f64>],
    settings: &AnalysisSettings,
) -> Result<Vec<PriorComparisonRow>> {
    if priors.is_empty() || n_list.is_empty() {
        return domain("need at least one prior and one N");
    }
    if let Some(p) = priors.iter().find(|p| p.k != k) {
        return domain(format!("prior with alpha = {} has k = {}, expected {k}", p.alpha, p.k));
    }
    let jobs: Vec<(SymmetricPrior<f64>, u64)> = priors.iter().flat_map(|&p| n_list.iter().map(move |&n| (p, n))).collect();
    jobs.par_iter()
        .map(|&(prior, n)| {
            let model = ModelSpec::new(k, n)?;
            let trunc = schedule.simplex(n, k)?;
            let sup = sup_risk_with(&prior.to_prior(), &model, &trunc, &settings.search)?.sup_value;
            let excess = sup - (k - 1) as f64 / (2.0 * n as f64);
            Ok(PriorComparisonRow {
                prior_label: prior_label(prior.alpha),
                alpha: prior.alpha,
                k,
                n,
                eps: trunc.eps,
                sup_risk: sup,
                excess_over_t1: excess,
                scaled_excess: (n as f64).powi(2) * excess,
            })
        })
        .collect()
}

/// `−(k−1)/12 · [1 + (7 + 2√6)k]`, the limit of `N² · excess` for `α̂`.
pub fn alpha_hat_second_order(k: usize) -> f64 {
    let kf = k as f64;
    -(kf - 1.0) / 12.0 * (1.0 + (7.0 + 2.0 * 6f64.sqrt()) * kf)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichRow {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: u64,
    pub eps: f64,
    /// `sup_{Δ_ε} R(θ, p_α̂)`.
    pub upper: f64,
    /// Bayes risk of the truncated-prior predictive under the truncated prior.
    pub lower: f64,
    /// `N² · (upper − lower)`.
    pub gap_scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    /// `N² · (R(π̄^(N), p_α̂) − upper)` per row: the Bayes risk of the untruncated
    /// predictive under the truncated prior should approach the sup.
    pub bayes_minus_sup_scaled: Vec<f64>,
    /// [`trend_decreasing`] applied to `gap_scaled`.
    pub gap_trend_decreasing: bool,
}

/// Brackets the minimax risk over `Δ_{ε_N}`:
/// `lower ≤ inf_q sup_θ R(θ, q) ≤ upper`. Only the bracket is reported.
pub fn theorem3_sandwich(k: usize, n_list: &[u64], schedule: &EpsilonSchedule<f64>, settings: &AnalysisSettings) -> Result<SandwichReport> {
    if schedule.mode != ScheduleMode::Theorem3 {
        return domain("the sandwich needs a schedule with 1/alpha_hat < r < 3/4 (mode THEOREM3)");
    }
    if n_list.is_empty() {
        return domain("N list must not be empty");
    }
    let prior = SymmetricPrior::minimax(k)?;
    let results: Vec<(SandwichRow, f64)> = n_list
        .par_iter()
        .map(|&n| {
            let model = ModelSpec::new(k, n)?;
            let trunc = schedule.simplex(n, k)?;
            let upper = sup_risk_with(&prior.to_prior(), &model, &trunc, &settings.search)?.sup_value;
            let weight = PriorWeight::Truncated { prior, trunc };
            let lower = bayes_risk(&weight, PredictiveKind::Truncated, &model, &settings.quad, &settings.mc)?;
            let bayes_full = bayes_risk(&weight, PredictiveKind::Full, &model, &settings.quad, &settings.mc)?;
            if upper < lower - BRACKET_TOL {
                return Err(Error::Check(format!("upper {upper:e} below lower {lower:e} at N = {n}")));
            }
            let n2 = (n as f64).powi(2);
            Ok((
                SandwichRow {
                    k,
                    n,
                    eps: trunc.eps,
                    upper,
                    lower,
                    gap_scaled: n2 * (upper - lower),
                },
                n2 * (bayes_full - upper),
            ))
        })
        .collect::<Result<_>>()?;
    let (rows, bayes_minus_sup_scaled): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap_scaled).collect();
    Ok(SandwichReport {
        gap_trend_decreasing: trend_decreasing(&gaps),
        rows,
        bayes_minus_sup_scaled,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalAlpha {
    pub alpha_star: f64,
    /// `(alpha, sup_risk)` over the grid, in grid order.
    pub curve: Vec<(f64, f64)>,
}

/// Grid minimizer of `sup_{Δ_ε} R` over symmetric Dirichlet priors; ties go to the smaller α.
pub fn optimal_alpha_search(
    k: usize,
    n: u64,
    schedule: &EpsilonSchedule<f64>,
    alpha_grid: &[f64],
    settings: &AnalysisSettings,
) -> Result<OptimalAlpha> {
    let lo = alpha_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = alpha_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo <= 0.5 && hi >= 2.5) {
        return domain(format!("alpha grid must cover [0.5, 2.5], got [{lo}, {hi}]"));
    }
    let model = ModelSpec::new(k, n)?;
    let trunc = schedule.simplex(n, k)?;
    let curve: Vec<(f64, f64)> = alpha_grid
        .par_iter()
        .map(|&alpha| {
            let prior = SymmetricPrior::new(alpha, k)?.to_prior();
            Ok((alpha, sup_risk_with(&prior, &model, &trunc, &settings.search)?.sup_value))
        })
        .collect::<Result<_>>()?;
    let alpha_star = curve
        .iter()
        .copied()
        .reduce(|best, c| if c.1 < best.1 || (c.1 == best.1 && c.0 < best.0) { c } else { best })
        .map(|c| c.0)
        .expect("grid is non-empty");
    Ok(OptimalAlpha { alpha_star, curve })
}

/// `0.5, 0.55, …, 2.5`.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=40).map(|i| 0.5 + 0.05 * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schedule() -> EpsilonSchedule<f64> {
        EpsilonSchedule::theorem3_default()
    }

    #[test]
    fn labels_and_trend_rule() {
        assert_eq!(prior_label(0.5), "jeffreys");
        assert_eq!(prior_label(alpha_hat()), "alpha_hat");
        assert_eq!(prior_label(1.25), "alpha=1.25");
        assert!(trend_decreasing(&[1.0, 0.8, 0.6]));
        assert!(!trend_decreasing(&[1.0, 0.61]));
        assert!(!trend_decreasing(&[1.0, 0.5, 0.61]));
        assert!((alpha_hat_second_order(2) + 2.06649658).abs() < 1e-8);
    }

    #[test]
    fn comparison_rows() {
        let priors = [SymmetricPrior::jeffreys(2).unwrap(), SymmetricPrior::minimax(2).unwrap()];
        let rows = compare_priors(2, &[64, 256], &schedule(), &priors, &AnalysisSettings::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![64, 256, 64, 256]);
        for r in &rows {
            assert_eq!(r.excess_over_t1, r.sup_risk - 1.0 / (2.0 * r.n as f64));
        }
        assert!(rows[0].scaled_excess > 0.0 && rows[1].scaled_excess > rows[0].scaled_excess);
        assert!(rows[3].excess_over_t1 < 0.0);
        assert!(compare_priors(3, &[64], &schedule(), &priors, &AnalysisSettings::default()).is_err());
    }

    #[test]
    fn sandwich_bracket_orders() {
        let r = theorem3_sandwich(2, &[16, 32], &schedule(), &AnalysisSettings::default()).unwrap();
        for row in &r.rows {
            assert!(row.upper >= row.lower);
            // both ends sit near the second-order value
            let target = 1.0 / (2.0 * row.n as f64) + alpha_hat_second_order(2) / (row.n as f64).powi(2);
            assert!((row.upper - target).abs() < 1.0 / (row.n as f64).powi(2));
        }
        let wrong = EpsilonSchedule::new(1.0, 0.5, ScheduleMode::Corollary1).unwrap();
        assert!(theorem3_sandwich(2, &[16], &wrong, &AnalysisSettings::default()).is_err());
    }

    #[test]
    fn optimal_alpha() {
        let grid = default_alpha_grid();
        assert!((grid[40] - 2.5).abs() < 1e-12);
        let best = optimal_alpha_search(2, 2048, &schedule(), &grid, &AnalysisSettings::default()).unwrap();
        assert!(best.curve.iter().all(|c| c.1.is_finite()));
        assert!((best.alpha_star - alpha_hat::<f64>()).abs() <= 0.2, "{}", best.alpha_star);
        // tiny N: recorded, no claim
        let tiny = optimal_alpha_search(2, 4, &schedule(), &grid, &AnalysisSettings::default());
        assert!(tiny.is_ok());
        assert!(optimal_alpha_search(2, 64, &schedule(), &[1.0, 2.0], &AnalysisSettings::default()).is_err());
    }
}
