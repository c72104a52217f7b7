//! Maximization of separable functions `F(θ) = Σ_i h_i(θ_i)` over `Δ_ε`.
//!
//! Three kinds of candidates are scored:
//! 1. "j at the floor, rest equal" points for every pinned set,
//! 2. the two-value family (pinned set at `u`, the rest sharing `1 − j u`),
//!    tabulated on a grid crowded towards `ε` and refined by golden section,
//! 3. pairwise coordinate ascent from seeded random interior starts.
//!
//! The best candidate is reported; near-ties (1e-13) go to the
//! lexicographically smaller point so output is deterministic.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{coordinate_risk, ThetaPoint};
use crate::error::{domain, Result};
use crate::model::{ModelSpec, PriorSpec, TruncatedSimplex};
use crate::montecarlo::{stream_rng, DEFAULT_SEED};
use crate::numeric::stable_sum;
use crate::Real;

const TIE: f64 = 1e-13;
/// Pinned sets are enumerated exhaustively up to this many categories.
const MAX_SUBSET_K: usize = 10;
const MAX_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SupSearchSettings {
    pub grid_size: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SupSearchSettings {
    fn default() -> Self {
        Self {
            grid_size: 257,
            starts: 32,
            seed: DEFAULT_SEED,
        }
    }
}

impl SupSearchSettings {
    pub fn with_grid(grid_size: usize) -> Self {
        Self {
            grid_size,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparableMax<T> {
    pub value: T,
    pub argmax: Vec<T>,
    pub trace: Vec<(String, T)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupRiskReport<T> {
    pub sup_value: T,
    pub argmax_theta: ThetaPoint<T>,
    pub search_trace: Vec<(String, T)>,
}

/// Maximizes `Σ_i h(i, θ_i)` over `{θ_i ≥ eps, Σ θ_i = 1}`.
///
/// `symmetric` declares that all `h(i, ·)` coincide, so only one pinned set per
/// size needs scanning.
pub fn maximize_separable<T, H>(k: usize, eps: T, symmetric: bool, h: &H, settings: &SupSearchSettings) -> Result<SeparableMax<T>>
where
    T: Real,
    H: Fn(usize, T) -> T + Sync,
{
    if k < 2 {
        return domain("need k >= 2");
    }
    if !(eps > T::zero() && eps < T::one() / T::count(k)) {
        return domain(format!("need 0 < eps < 1/k, got {eps}"));
    }
    if settings.grid_size < 16 {
        return domain(format!("grid_size must be at least 16, got {}", settings.grid_size));
    }
    let objective = |theta: &[T]| stable_sum(theta.iter().enumerate().map(|(i, &t)| h(i, t)));
    let mut candidates: Vec<(Vec<T>, T)> = Vec::new();
    let mut trace = Vec::new();

    let pinned_sets = pinned_sets(k, symmetric);
    let family_results: Vec<(Vec<(Vec<T>, T)>, Vec<(String, T)>)> = pinned_sets
        .par_iter()
        .map(|set| {
            let mut cands = Vec::new();
            let mut tr = Vec::new();
            let j = set.len();
            let rest_equal = two_value_point(k, set, eps);
            let v = objective(&rest_equal);
            tr.push((format!("floor{set:?}:rest-equal"), v));
            cands.push((rest_equal, v));
            if j > 0 {
                let (theta, v, grid_best) = scan_family(k, set, eps, settings.grid_size, &objective);
                tr.push((format!("family{set:?}:grid"), grid_best));
                tr.push((format!("family{set:?}:refined"), v));
                cands.push((theta, v));
            }
            (cands, tr)
        })
        .collect();
    for (c, t) in family_results {
        candidates.extend(c);
        trace.extend(t);
    }

    let ascents: Vec<(Vec<T>, T)> = (0..settings.starts)
        .into_par_iter()
        .map(|start| {
            let mut rng = stream_rng(settings.seed, start as u64);
            let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = draws.iter().sum();
            let free = T::one() - T::count(k) * eps;
            let mut theta: Vec<T> = draws.iter().map(|&d| eps + free * T::lit(d / total)).collect();
            renormalize_last(&mut theta);
            coordinate_ascent(&mut theta, eps, h, &objective);
            let v = objective(&theta);
            (theta, v)
        })
        .collect();
    for (start, (theta, v)) in ascents.into_iter().enumerate() {
        trace.push((format!("ascent{start}"), v));
        candidates.push((theta, v));
    }

    let best = candidates.iter().map(|c| c.1).fold(T::neg_infinity(), T::max);
    let (argmax, value) = candidates
        .into_iter()
        .filter(|c| c.1 >= best - T::lit(TIE))
        .min_by(|x, y| lexicographic(&x.0, &y.0))
        .expect("at least one candidate");
    Ok(SeparableMax { value, argmax, trace })
}

fn lexicographic<T: Real>(a: &[T], b: &[T]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

fn pinned_sets(k: usize, symmetric: bool) -> Vec<Vec<usize>> {
    let mut sets = Vec::new();
    if symmetric || k > MAX_SUBSET_K {
        for j in 0..k {
            sets.push((0..j).collect());
        }
    } else {
        for mask in 0u32..(1 << k) - 1 {
            sets.push((0..k).filter(|i| mask & (1 << i) != 0).collect());
        }
        sets.sort_by_key(|s: &Vec<usize>| s.len());
    }
    sets
}

/// Pinned coordinates at `eps`, the rest sharing what remains.
fn two_value_point<T: Real>(k: usize, set: &[usize], eps: T) -> Vec<T> {
    family_point(k, set, eps)
}

fn family_point<T: Real>(k: usize, set: &[usize], u: T) -> Vec<T> {
    let j = set.len();
    let v = (T::one() - T::count(j) * u) / T::count(k - j);
    let mut theta: Vec<T> = (0..k).map(|i| if set.contains(&i) { u } else { v }).collect();
    renormalize_last(&mut theta);
    theta
}

/// Makes the last coordinate absorb rounding so the point sums to one.
fn renormalize_last<T: Real>(theta: &mut [T]) {
    let k = theta.len();
    theta[k - 1] = T::one() - stable_sum(theta[..k - 1].iter().copied());
}

fn scan_family<T, F>(k: usize, set: &[usize], eps: T, grid: usize, objective: &F) -> (Vec<T>, T, T)
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    let j = set.len();
    let upper = (T::one() - T::count(k - j) * eps) / T::count(j);
    // quadratic spacing crowds points towards the floor; grids with
    // grid − 1 doubling are nested
    let at = |m: usize| {
        let t = T::count(m) / T::count(grid - 1);
        eps + (upper - eps) * t * t
    };
    let f = |u: T| objective(&family_point(k, set, u));
    let mut best_m = 0;
    let mut best = T::neg_infinity();
    for m in 0..grid {
        let v = f(at(m));
        if v > best {
            best = v;
            best_m = m;
        }
    }
    let lo = at(best_m.saturating_sub(1));
    let hi = at((best_m + 1).min(grid - 1));
    let (u, v) = golden_max(&f, lo, hi);
    let (u, v) = if v >= best { (u, v) } else { (at(best_m), best) };
    (family_point(k, set, u), v, best)
}

/// Golden-section search for a maximum on `[lo, hi]`, endpoints included.
pub(crate) fn golden_max<T: Real, F: Fn(T) -> T>(f: &F, lo: T, hi: T) -> (T, T) {
    let (mut a, mut b) = (lo, hi);
    let mut best = (lo, f(lo));
    let fh = f(hi);
    if fh > best.1 {
        best = (hi, fh);
    }
    if !(b > a) {
        return best;
    }
    let r = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let tol = T::lit(1e-11) * (hi - lo);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    for (x, fx) in [(c, fc), (d, fd)] {
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Repeatedly moves mass between coordinate pairs to the best split.
fn coordinate_ascent<T, H, F>(theta: &mut [T], eps: T, h: &H, objective: &F)
where
    T: Real,
    H: Fn(usize, T) -> T,
    F: Fn(&[T]) -> T,
{
    let k = theta.len();
    let mut current = objective(theta);
    for _ in 0..MAX_SWEEPS {
        let before = current;
        for i in 0..k {
            for j in i + 1..k {
                let pair = theta[i] + theta[j];
                let g = |ti: T| h(i, ti) + h(j, pair - ti);
                let old = g(theta[i]);
                let (ti, v) = golden_max(&g, eps, pair - eps);
                if v > old {
                    theta[i] = ti;
                    theta[j] = pair - ti;
                }
            }
        }
        renormalize_last(theta);
        current = objective(theta);
        // a single pair is solved exactly in one sweep; otherwise stop once
        // gains are at rounding level
        if k == 2 || !(current > before + T::lit(1e-14) * before.abs()) {
            break;
        }
    }
}

/// `sup_{θ ∈ Δ_ε} R(θ)` with default search settings and the given grid size.
pub fn sup_risk<T: Real>(prior: &PriorSpec<T>, model: &ModelSpec, trunc: &TruncatedSimplex<T>, grid_size: usize) -> Result<SupRiskReport<T>> {
    sup_risk_with(prior, model, trunc, &SupSearchSettings::with_grid(grid_size))
}

pub fn sup_risk_with<T: Real>(
    prior: &PriorSpec<T>,
    model: &ModelSpec,
    trunc: &TruncatedSimplex<T>,
    settings: &SupSearchSettings,
) -> Result<SupRiskReport<T>> {
    prior.check_model(model)?;
    if trunc.k != model.k {
        return domain("truncation and model disagree on k");
    }
    let a = prior.a();
    let total = prior.total();
    let h = |i: usize, t: T| coordinate_risk(a[i], total, model.n, t);
    let found = maximize_separable(model.k, trunc.eps, prior.symmetric_alpha().is_some(), &h, settings)?;
    let argmax_theta = ThetaPoint::new(found.argmax)?;
    let sup_value = super::risk_coordinatewise(prior, model, &argmax_theta)?.exact_risk;
    Ok(SupRiskReport {
        sup_value,
        argmax_theta,
        search_trace: found.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::alpha_hat;
    use crate::risk::risk_coordinatewise;

    fn dense_scan(prior: &PriorSpec<f64>, n: u64, eps: f64, points: usize) -> (f64, f64) {
        let model = ModelSpec::new(2, n).unwrap();
        (0..=points)
            .map(|m| {
                let t = eps + (1.0 - 2.0 * eps) * m as f64 / points as f64;
                let r = risk_coordinatewise(prior, &model, &ThetaPoint::new(vec![t, 1.0 - t]).unwrap()).unwrap();
                (t, r.exact_risk)
            })
            .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
    }

    #[test]
    fn two_categories_match_a_dense_scan() {
        for (alpha, n, eps) in [(1.0, 20u64, 0.01), (0.5, 50, 0.02), (alpha_hat(), 40, 0.05), (3.0, 30, 0.1)] {
            let prior = PriorSpec::symmetric(2, alpha).unwrap();
            let model = ModelSpec::new(2, n).unwrap();
            let trunc = TruncatedSimplex::new(2, eps).unwrap();
            let r = sup_risk(&prior, &model, &trunc, 64).unwrap();
            let (_, scan) = dense_scan(&prior, n, eps, 20_000);
            assert!(r.sup_value >= scan - 1e-12, "alpha={alpha}: {} < {scan}", r.sup_value);
            assert!(trunc.contains(r.argmax_theta.as_slice()));
            let again = risk_coordinatewise(&prior, &model, &r.argmax_theta).unwrap().exact_risk;
            assert!((again - r.sup_value).abs() <= 1e-12);
            // symmetric h: the lexicographically smaller of mirrored points is reported
            let th = r.argmax_theta.as_slice();
            assert!(th[0] <= th[1] + 1e-12);
        }
    }

    #[test]
    fn jeffreys_maximum_sits_on_the_floor() {
        let n = 1024u64;
        let eps = (n as f64).powf(-0.73);
        let prior = PriorSpec::symmetric(2, 0.5).unwrap();
        let model = ModelSpec::new(2, n).unwrap();
        let r = sup_risk(&prior, &model, &TruncatedSimplex::new(2, eps).unwrap(), 64).unwrap();
        assert_eq!(r.argmax_theta.as_slice()[0], eps);
    }

    #[test]
    fn minimax_prior_stays_below_first_order_term() {
        let n = 2048u64;
        let eps = (n as f64).powf(-0.73);
        let prior = PriorSpec::symmetric(2, alpha_hat()).unwrap();
        let model = ModelSpec::new(2, n).unwrap();
        let r = sup_risk(&prior, &model, &TruncatedSimplex::new(2, eps).unwrap(), 64).unwrap();
        assert!(r.sup_value - 0.5 / (n as f64) < 0.0);
    }

    #[test]
    fn nested_grids_never_lose_ground() {
        let prior = PriorSpec::new(vec![0.7, 1.3, 2.0]).unwrap();
        let model = ModelSpec::new(3, 25).unwrap();
        let trunc = TruncatedSimplex::new(3, 0.02).unwrap();
        let mut last = f64::NEG_INFINITY;
        for g in [17, 33, 65, 129] {
            let r = sup_risk(&prior, &model, &trunc, g).unwrap();
            assert!(r.sup_value >= last - TIE, "g={g}");
            last = r.sup_value;
        }
    }

    #[test]
    fn separable_maximum_of_a_known_function() {
        // Σ −(θ_i − c_i)² with c in the interior has its max at c
        let c = [0.2, 0.3, 0.5];
        let h = |i: usize, t: f64| -(t - c[i]) * (t - c[i]);
        let m = maximize_separable(3, 0.01, false, &h, &SupSearchSettings::default()).unwrap();
        for (x, y) in m.argmax.iter().zip(&c) {
            assert!((x - y).abs() < 1e-6);
        }
        assert!(maximize_separable(3, 0.01, false, &h, &SupSearchSettings::with_grid(8)).is_err());
    }

    #[test]
    fn search_is_thread_count_independent() {
        let prior = PriorSpec::symmetric(3, 0.5).unwrap();
        let model = ModelSpec::new(3, 60).unwrap();
        let trunc = TruncatedSimplex::new(3, 0.03).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sup_risk(&prior, &model, &trunc, 33).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
