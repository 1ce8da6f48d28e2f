//! Scalar special functions.
//!
//! Everything here is a pure function of its arguments. The `*_unchecked`
//! variants skip domain validation and are meant for inner loops where the
//! caller has already established the preconditions.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::Serialize;

use crate::{Error, Result, FOUR_PI};

/// Values `P_0(t), ..., P_l(t)` at a single abscissa.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LegendreRow {
    pub t: f64,
    pub values: Vec<f64>,
}

impl LegendreRow {
    pub fn degree(&self) -> usize {
        self.values.len() - 1
    }
}

fn check_unit_interval(t: f64) -> Result<()> {
    if t.is_nan() || t.abs() > 1.0 {
        return Err(Error::domain(format!("abscissa {t} is outside [-1, 1]")));
    }
    Ok(())
}

/// Legendre polynomial `P_l(t)` by the Bonnet recurrence.
pub fn legendre_eval(l: usize, t: f64) -> Result<f64> {
    check_unit_interval(t)?;
    Ok(legendre_unchecked(l, t))
}

#[inline]
pub fn legendre_unchecked(l: usize, t: f64) -> f64 {
    match l {
        0 => 1.0,
        1 => t,
        _ => {
            let (mut p0, mut p1) = (1.0, t);
            for k in 1..l {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// `P_l(t)` together with its derivative, used by the Gauss–Legendre Newton step.
#[inline]
pub(crate) fn legendre_with_derivative(l: usize, t: f64) -> (f64, f64) {
    if l == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, t);
    for k in 1..l {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let lf = l as f64;
    let dp = lf * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// All degrees `0..=l` in one recurrence pass.
pub fn legendre_row(l: usize, t: f64) -> Result<LegendreRow> {
    check_unit_interval(t)?;
    let mut values = Vec::with_capacity(l + 1);
    legendre_row_into(l, t, &mut values);
    Ok(LegendreRow { t, values })
}

pub(crate) fn legendre_row_into(l: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if l == 0 {
        return;
    }
    out.push(t);
    for k in 1..l {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
}

/// Natural log below which the sectoral seed is rescaled before recurring in `l`.
const LOG_RESCALE: f64 = -600.0;

/// Normalized associated Legendre values `λ_lm(t)` for `m = 0..=m_max`.
///
/// `λ_lm(cos θ) e^{imφ}` is the complex orthonormal harmonic `Y_lm` (Condon–Shortley
/// phase included) on the sphere of total mass `4π`. The real basis used by
/// [`crate::fieldsim`] is `λ_l0`, `√2 λ_lm cos mφ` and `√2 λ_lm sin mφ`.
pub fn sph_basis_row(l: usize, m_max: usize, t: f64) -> Result<Vec<f64>> {
    check_unit_interval(t)?;
    if m_max > l {
        return Err(Error::domain(format!("m_max = {m_max} exceeds l = {l}")));
    }
    Ok((0..=m_max).map(|m| normalized_assoc_legendre(l, m, t)).collect())
}

/// `λ_lm(t)` for a single order, with the recurrence run on normalized values.
pub(crate) fn normalized_assoc_legendre(l: usize, m: usize, t: f64) -> f64 {
    debug_assert!(m <= l);
    let s = (1.0 - t * t).max(0.0).sqrt();

    // Sectoral seed λ_mm = (-1)^m sqrt((2m+1)!! / (4π (2m)!!)) s^m, tracked in logs.
    let mut log_mag = -0.5 * FOUR_PI.ln();
    for k in 1..=m {
        let kf = k as f64;
        log_mag += 0.5 * ((2.0 * kf + 1.0) / (2.0 * kf)).ln();
    }
    if m > 0 {
        if s == 0.0 {
            return 0.0;
        }
        log_mag += m as f64 * s.ln();
    }
    let sign = if m % 2 == 1 { -1.0 } else { 1.0 };
    let rescale = if log_mag < LOG_RESCALE { LOG_RESCALE - log_mag } else { 0.0 };
    let pmm = sign * (log_mag + rescale).exp();
    if l == m {
        return pmm * (-rescale).exp();
    }

    let mf = m as f64;
    let mut prev = pmm;
    let mut cur = t * (2.0 * mf + 3.0).sqrt() * pmm;
    for n in (m + 2)..=l {
        let nf = n as f64;
        let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
        let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
        let next = a * (t * cur - b * prev);
        prev = cur;
        cur = next;
    }
    cur * (-rescale).exp()
}

/// Probabilists' Hermite polynomial `H_q(x)`.
pub fn hermite_prob(q: usize, x: f64) -> f64 {
    match q {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut h0, mut h1) = (1.0, x);
            for k in 1..q {
                let h2 = x * h1 - k as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    }
}

/// `H_0(x), ..., H_{q_max}(x)` written into `out`.
#[inline]
pub fn hermite_row_into(q_max: usize, x: f64, out: &mut [f64]) {
    debug_assert!(out.len() > q_max);
    out[0] = 1.0;
    if q_max == 0 {
        return;
    }
    out[1] = x;
    for k in 1..q_max {
        out[k + 1] = x * out[k] - k as f64 * out[k - 1];
    }
}

/// Bessel function of the first kind of order zero, for `x ≥ 0`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("bessel_j0 needs x >= 0, got {x}")));
    }
    Ok(j0_unchecked(x))
}

const J0_SERIES_MAX: f64 = 8.0;
const J0_ASYMPTOTIC_MIN: f64 = 30.0;

/// Three branches: power series on `[0, 8]`, the periodic trapezoid rule on the
/// Bessel integral for `(8, 30)`, and the Hankel expansion beyond.
pub(crate) fn j0_unchecked(x: f64) -> f64 {
    if x <= J0_SERIES_MAX {
        j0_series(x)
    } else if x < J0_ASYMPTOTIC_MIN {
        j0_trapezoid(x)
    } else {
        j0_hankel(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let y = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= y / (k * k);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) || k > 80.0 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// `J0(x) = (1/2π) ∫_0^{2π} cos(x sin τ) dτ`; the trapezoid error is of the
/// order of `J_{2N}(x)`, negligible once `N > x/2 + 20`.
fn j0_trapezoid(x: f64) -> f64 {
    let n = 2 * (x.ceil() as usize + 24);
    let h = PI / n as f64;
    // integrand is even about τ = π/2 and periodic: sum over [0, π] suffices
    let mut sum = 0.5 * (1.0 + 1.0);
    for k in 1..n {
        sum += (x * (k as f64 * h).sin()).cos();
    }
    sum / n as f64
}

fn j0_hankel(x: f64) -> f64 {
    let inv8x = 1.0 / (8.0 * x);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let kf = k as f64;
        a *= (2.0 * kf - 1.0) * (2.0 * kf - 1.0) * inv8x / kf;
        if a > last && k > 8 {
            break;
        }
        last = a;
        match k % 4 {
            1 => q -= a,
            2 => p -= a,
            3 => q += a,
            _ => p += a,
        }
        if a < 1e-17 && k >= 8 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Hilb's approximation `(θ / sin θ)^{1/2} J0((l + 1/2) θ)` to `P_l(cos θ)`.
pub fn hilb_approx(l: usize, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::domain(format!("hilb_approx needs θ in (0, π/2], got {theta}")));
    }
    let prefactor = (theta / theta.sin()).sqrt();
    Ok(prefactor * j0_unchecked((l as f64 + 0.5) * theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_small_cases() {
        assert_eq!(legendre_eval(7, 1.0).unwrap(), 1.0);
        assert_relative_eq!(legendre_eval(2, 0.5).unwrap(), -0.125, epsilon = 1e-15);
        let p5 = legendre_eval(5, 0.3).unwrap();
        assert_relative_eq!(legendre_eval(5, -0.3).unwrap(), -p5, epsilon = 1e-15);
        assert!(legendre_eval(3, 1.0 + 1e-9).is_err());
    }

    #[test]
    fn legendre_row_matches_explicit_polynomials() {
        let row = legendre_row(3, 0.0).unwrap();
        assert_eq!(row.values, vec![1.0, 0.0, -0.5, 0.0]);
        assert_eq!(legendre_row(0, 0.4).unwrap().values, vec![1.0]);
        assert!(legendre_row(10, 1.0).unwrap().values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn legendre_bounded_and_parity() {
        for l in [0usize, 1, 7, 64, 513, 2048] {
            for i in 0..100 {
                let t = -1.0 + 2.0 * i as f64 / 99.0;
                let p = legendre_unchecked(l, t);
                assert!(p.abs() <= 1.0 + 1e-13, "l={l} t={t} p={p}");
                let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
                assert!((legendre_unchecked(l, -t) - sign * p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sph_basis_constant_mode() {
        let row = sph_basis_row(0, 0, 0.3).unwrap();
        assert_relative_eq!(row[0], 1.0 / FOUR_PI.sqrt(), epsilon = 1e-15);
        assert!(sph_basis_row(2, 3, 0.0).is_err());
    }

    #[test]
    fn sph_basis_sum_rule() {
        // Σ_m |Y_lm|² = (2l+1)/4π at every point
        for l in [1usize, 5, 40, 300] {
            for &t in &[-0.99, -0.2, 0.0, 0.55, 0.999] {
                let row = sph_basis_row(l, l, t).unwrap();
                let s: f64 = row[0] * row[0] + 2.0 * row[1..].iter().map(|v| v * v).sum::<f64>();
                assert_relative_eq!(s, (2 * l + 1) as f64 / FOUR_PI, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn sph_basis_known_values() {
        // λ_11 = -sqrt(3/8π) sinθ, λ_20 = sqrt(5/4π) P_2
        let t: f64 = 0.3;
        let s = (1.0 - t * t).sqrt();
        let row = sph_basis_row(2, 2, t).unwrap();
        assert_relative_eq!(row[0], (5.0 / FOUR_PI).sqrt() * 0.5 * (3.0 * t * t - 1.0), epsilon = 1e-14);
        let r1 = sph_basis_row(1, 1, t).unwrap();
        assert_relative_eq!(r1[1], -(3.0 / (8.0 * PI)).sqrt() * s, epsilon = 1e-14);
        // λ_22 = sqrt(15/32π) sin²θ
        assert_relative_eq!(row[2], (15.0 / (32.0 * PI)).sqrt() * s * s, epsilon = 1e-14);
    }

    #[test]
    fn deep_polar_orders_do_not_overflow() {
        let v = normalized_assoc_legendre(900, 850, 0.9999);
        assert!(v.is_finite());
        let w = normalized_assoc_legendre(900, 3, 0.9999);
        assert!(w.is_finite() && w != 0.0);
    }

    #[test]
    fn hermite_values() {
        assert_eq!(hermite_prob(1, 1.7), 1.7);
        assert_eq!(hermite_prob(4, 2.0), -5.0);
        let mut row = [0.0; 6];
        hermite_row_into(5, 0.7, &mut row);
        for (q, v) in row.iter().enumerate() {
            assert_relative_eq!(*v, hermite_prob(q, 0.7), epsilon = 1e-14);
        }
    }

    #[test]
    fn hermite_appell_property() {
        let h = 1e-6;
        for q in 1..12 {
            for &x in &[-2.1, -0.4, 0.9, 3.3] {
                let fd = (hermite_prob(q, x + h) - hermite_prob(q, x)) / h;
                let exact = q as f64 * hermite_prob(q - 1, x);
                assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "q={q} x={x}");
            }
        }
    }

    #[test]
    fn j0_reference_values() {
        // reference values from a 30-digit evaluation
        let cases = [
            (0.5, 0.938_469_807_240_812_904_2),
            (3.0, -0.260_051_954_901_933_437_6),
            (7.9, 0.194_361_844_841_278_239_7),
            (8.1, 0.147_517_454_044_377_670_3),
            (12.0, 0.047_689_310_796_833_536_6),
            (25.0, 0.096_266_783_275_958_116_2),
            (29.9, -0.097_811_150_066_062_445_5),
            (30.1, -0.074_101_372_324_018_583_4),
            (50.0, 0.055_812_327_669_251_815_0),
            (200.0, -0.015_437_439_930_565_091_6),
            (1234.5, -0.013_550_379_618_035_721_9),
        ];
        for (x, want) in cases {
            let got = bessel_j0(x).unwrap();
            assert!((got - want).abs() < 1e-12, "x={x} got={got} want={want}");
        }
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
        assert!(bessel_j0(-1.0).is_err());
    }

    #[test]
    fn j0_first_zero() {
        let (mut a, mut b) = (2.0, 3.0);
        for _ in 0..80 {
            let mid = 0.5 * (a + b);
            if j0_unchecked(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        assert!((a - 2.404_826).abs() < 1e-5);
    }

    #[test]
    fn j0_large_argument_leading_term() {
        let x = 50.0;
        let lead = (2.0 / (PI * x)).sqrt() * (x - FRAC_PI_4).cos();
        assert!((bessel_j0(x).unwrap() - lead).abs() < 1e-3);
    }

    #[test]
    fn hilb_domain_and_prefactor() {
        assert!(hilb_approx(10, 0.0).is_err());
        assert!(hilb_approx(10, 2.0).is_err());
        let th: f64 = 1e-6;
        assert!(((th / th.sin()).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hilb_error_scales_like_sqrt_theta_over_l_three_halves() {
        // fit C in |P_l(cos θ) - hilb| <= C θ^{1/2} l^{-3/2} on θ in (c/l, π/2]
        let mut fitted = Vec::new();
        for l in [64usize, 256] {
            let lf = l as f64;
            let mut c: f64 = 0.0;
            for i in 1..=400 {
                let th = 2.0 / lf + (std::f64::consts::FRAC_PI_2 - 2.0 / lf) * i as f64 / 400.0;
                let err = (legendre_unchecked(l, th.cos()) - hilb_approx(l, th).unwrap()).abs();
                c = c.max(err / (th.sqrt() * lf.powf(-1.5)));
            }
            fitted.push(c);
        }
        // the same constant works at both degrees
        assert!(fitted.iter().all(|c| c.is_finite() && *c < 1.0), "{fitted:?}");
        assert!(fitted[1] / fitted[0] < 2.0 && fitted[0] / fitted[1] < 2.0, "{fitted:?}");
    }

    #[test]
    fn legendre_decay_envelope() {
        for l in [64usize, 256, 1024] {
            let lf = l as f64;
            let mut c: f64 = 0.0;
            for i in 1..=500 {
                let th = std::f64::consts::FRAC_PI_2 * i as f64 / 500.0;
                c = c.max(legendre_unchecked(l, th.cos()).abs() * (lf * th).sqrt());
            }
            assert!(c < 1.5, "l={l} C'={c}");
        }
    }
}
