//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances for adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings<T> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_subdivisions: usize,
}

impl<T: Real> Default for QuadratureSettings<T> {
    fn default() -> Self {
        Self {
            abs_tol: T::lit(1e-12),
            rel_tol: T::lit(1e-10),
            max_subdivisions: 60,
        }
    }
}

impl<T: Real> QuadratureSettings<T> {
    pub fn new(abs_tol: T, rel_tol: T, max_subdivisions: usize) -> Result<Self> {
        let s = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > T::zero()) || !(self.rel_tol > T::zero()) || self.max_subdivisions < 1 {
            return domain("quadrature settings need abs_tol > 0, rel_tol > 0, max_subdivisions >= 1");
        }
        Ok(())
    }

    /// Same settings with tolerances scaled by `factor`.
    pub fn tightened(&self, factor: T) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub subdivisions: usize,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

fn gk15<T: Real, F: FnMut(T) -> Result<T>>(f: &mut F, a: T, b: T) -> Result<Segment<T>> {
    let half = T::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    let mut abs_k = kronrod.abs();
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = half_len * T::lit(XGK[j]);
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += T::lit(WGK[j]) * (f1 + f2);
        abs_k += T::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += T::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = kronrod * half;
    let mut asc = T::lit(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        asc += T::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let hl = half_len.abs();
    let value = kronrod * half_len;
    let resasc = asc * hl;
    let resabs = abs_k * hl;
    let mut error = ((kronrod - gauss) * half_len).abs();
    if resasc != T::zero() && error != T::zero() {
        let scale = (T::lit(200.0) * error / resasc).powf(T::lit(1.5));
        error = resasc * scale.min(T::one());
    }
    let roundoff = T::lit(50.0) * T::epsilon() * resabs;
    if roundoff > error {
        error = roundoff;
    }
    if !value.is_finite() {
        return domain("integrand produced a non-finite value");
    }
    Ok(Segment { a, b, value, error })
}

/// Integrates a fallible integrand over `[a, b]`.
pub fn try_integrate<T, F>(mut f: F, a: T, b: T, settings: &QuadratureSettings<T>) -> Result<QuadResult<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    settings.validate()?;
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error: T::zero(),
            subdivisions: 0,
        });
    }
    let mut segments = vec![gk15(&mut f, a, b)?];
    loop {
        let total: T = super::stable_sum(segments.iter().map(|s| s.value));
        let err: T = segments.iter().map(|s| s.error).sum();
        let target = settings.abs_tol.max(settings.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult {
                value: total,
                error: err,
                subdivisions: segments.len() - 1,
            });
        }
        if segments.len() > settings.max_subdivisions {
            return Err(Error::Integration {
                achieved: err.as_f64(),
                subdivisions: segments.len() - 1,
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, T::neg_infinity()), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let seg = segments.swap_remove(worst);
        let mid = T::lit(0.5) * (seg.a + seg.b);
        if !(mid > seg.a.min(seg.b) && mid < seg.a.max(seg.b)) {
            return Err(Error::Integration {
                achieved: err.as_f64(),
                subdivisions: segments.len(),
            });
        }
        segments.push(gk15(&mut f, seg.a, mid)?);
        segments.push(gk15(&mut f, mid, seg.b)?);
    }
}

/// Integrates an infallible integrand over `[a, b]`.
pub fn integrate<T, F>(mut f: F, a: T, b: T, settings: &QuadratureSettings<T>) -> Result<QuadResult<T>>
where
    T: Real,
    F: FnMut(T) -> T,
{
    try_integrate(|x| Ok(f(x)), a, b, settings)
}

/// `∫_lo^hi g(θ) f(θ) dθ` where `g` is the Beta(a, b) density.
///
/// Endpoint singularities of the density at 0 (a < 1) or 1 (b < 1) are removed
/// by the substitutions θ = v^(1/a) and 1 − θ = v^(1/b).
pub fn try_integrate_beta_weighted<T, F>(
    a: T,
    b: T,
    lo: T,
    hi: T,
    mut f: F,
    settings: &QuadratureSettings<T>,
) -> Result<QuadResult<T>>
where
    T: Real,
    F: FnMut(T) -> Result<T>,
{
    if !(a > T::zero() && b > T::zero()) {
        return domain("beta weight needs positive shape parameters");
    }
    if !(lo >= T::zero() && hi <= T::one() && lo <= hi) {
        return domain("beta weight integration range must lie in [0, 1]");
    }
    if lo == hi {
        return Ok(QuadResult {
            value: T::zero(),
            error: T::zero(),
            subdivisions: 0,
        });
    }
    let ln_b = super::ln_beta(a, b)?;
    let one = T::one();
    let left_singular = lo == T::zero() && a < one;
    let right_singular = hi == one && b < one;
    let mid = if left_singular || right_singular {
        let m = T::lit(0.5);
        if m > lo && m < hi {
            m
        } else {
            T::lit(0.5) * (lo + hi)
        }
    } else {
        hi
    };
    let pieces_settings = settings.tightened(T::lit(0.5));
    let mut total = QuadResult {
        value: T::zero(),
        error: T::zero(),
        subdivisions: 0,
    };
    let mut add = |r: QuadResult<T>| {
        total.value += r.value;
        total.error += r.error;
        total.subdivisions += r.subdivisions;
    };

    // [lo, mid]
    if left_singular {
        let upper = mid.powf(a);
        let r = try_integrate(
            |v: T| {
                if v <= T::zero() {
                    return Ok(T::zero());
                }
                let theta = v.powf(one / a);
                let w = ((b - one) * (-theta).ln_1p() - ln_b).exp() / a;
                Ok(w * f(theta)?)
            },
            T::zero(),
            upper,
            &pieces_settings,
        )?;
        add(r);
    } else {
        let r = try_integrate(
            |t: T| {
                let w = ((a - one) * t.ln() + (b - one) * (-t).ln_1p() - ln_b).exp();
                Ok(w * f(t)?)
            },
            lo,
            mid,
            &pieces_settings,
        )?;
        add(r);
    }

    // [mid, hi]
    if mid < hi {
        if right_singular {
            let upper = (one - mid).powf(b);
            let r = try_integrate(
                |v: T| {
                    if v <= T::zero() {
                        return Ok(T::zero());
                    }
                    let comp = v.powf(one / b);
                    let theta = one - comp;
                    let w = ((a - one) * (-comp).ln_1p() - ln_b).exp() / b;
                    Ok(w * f(theta)?)
                },
                T::zero(),
                upper,
                &pieces_settings,
            )?;
            add(r);
        } else {
            let r = try_integrate(
                |t: T| {
                    let w = ((a - one) * t.ln() + (b - one) * (-t).ln_1p() - ln_b).exp();
                    Ok(w * f(t)?)
                },
                mid,
                hi,
                &pieces_settings,
            )?;
            add(r);
        }
    }
    Ok(total)
}
