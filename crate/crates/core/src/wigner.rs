//! Wigner 3j symbols, Clebsch–Gordan coefficients and Gaunt integrals.
//!
//! All symbols are evaluated in floating point from a shared table of
//! `ln n!`. Selection-rule zeros are returned as exact `0.0` together with
//! the rule that produced them.

use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::FOUR_PI;

static LN_FACTORIALS: RwLock<Option<Arc<Vec<f64>>>> = RwLock::new(None);

/// Shared `ln n!` table covering at least `0..=n_max`.
///
/// The table only grows; callers keep the returned `Arc` for the duration of
/// a batch to avoid repeated locking.
pub fn ln_factorial_table(n_max: usize) -> Arc<Vec<f64>> {
    if let Some(t) = LN_FACTORIALS.read().unwrap().as_ref() {
        if t.len() > n_max {
            return Arc::clone(t);
        }
    }
    let mut guard = LN_FACTORIALS.write().unwrap();
    if let Some(t) = guard.as_ref() {
        if t.len() > n_max {
            return Arc::clone(t);
        }
    }
    let len = (n_max + 1).max(1024).next_power_of_two();
    let mut table = Vec::with_capacity(len);
    table.push(0.0);
    // Kahan-compensated running sum of ln k
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for k in 1..len {
        let y = (k as f64).ln() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        table.push(sum);
    }
    let table = Arc::new(table);
    *guard = Some(Arc::clone(&table));
    table
}

/// Which selection rule forced a symbol to vanish.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Triangle,
    Parity,
    MagneticSum,
    MagneticRange,
}

/// Angular momenta of a 3j symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TripleL {
    pub l1: usize,
    pub l2: usize,
    pub l3: usize,
}

impl TripleL {
    pub fn new(l1: usize, l2: usize, l3: usize) -> Self {
        Self { l1, l2, l3 }
    }

    pub fn triangle(&self) -> bool {
        let (a, b, c) = (self.l1 as i64, self.l2 as i64, self.l3 as i64);
        (a - b).abs() <= c && c <= a + b
    }

    pub fn even_sum(&self) -> bool {
        (self.l1 + self.l2 + self.l3) % 2 == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThreeJSymbol {
    pub triple: TripleL,
    pub m: [i32; 3],
    pub value: f64,
    /// Set when `value` is an exact selection-rule zero.
    pub zero_by: Option<SelectionRule>,
}

/// `(l1 l2 l3; 0 0 0)`.
pub fn threej_zero(l1: usize, l2: usize, l3: usize) -> f64 {
    threej_zero_symbol(l1, l2, l3).value
}

pub fn threej_zero_symbol(l1: usize, l2: usize, l3: usize) -> ThreeJSymbol {
    let triple = TripleL::new(l1, l2, l3);
    let zero = |rule| ThreeJSymbol { triple, m: [0; 3], value: 0.0, zero_by: Some(rule) };
    if !triple.triangle() {
        return zero(SelectionRule::Triangle);
    }
    if !triple.even_sum() {
        return zero(SelectionRule::Parity);
    }
    let j = l1 + l2 + l3;
    let g = j / 2;
    let lf = ln_factorial_table(j + 1);
    let ln_mag = lf[g] - lf[g - l1] - lf[g - l2] - lf[g - l3]
        + 0.5 * (lf[j - 2 * l1] + lf[j - 2 * l2] + lf[j - 2 * l3] - lf[j + 1]);
    let sign = if g % 2 == 0 { 1.0 } else { -1.0 };
    ThreeJSymbol { triple, m: [0; 3], value: sign * ln_mag.exp(), zero_by: None }
}

/// General 3j symbol via the Racah single sum.
///
/// The alternating sum loses roughly one digit per five units of degree, so
/// results are reliable to `1e-10` only for degrees up to about 20. The
/// all-zero-order case is delegated to [`threej_zero`].
pub fn threej(l1: usize, l2: usize, l3: usize, m1: i32, m2: i32, m3: i32) -> f64 {
    threej_symbol(l1, l2, l3, m1, m2, m3).value
}

pub fn threej_symbol(l1: usize, l2: usize, l3: usize, m1: i32, m2: i32, m3: i32) -> ThreeJSymbol {
    let triple = TripleL::new(l1, l2, l3);
    let m = [m1, m2, m3];
    let zero = |rule| ThreeJSymbol { triple, m, value: 0.0, zero_by: Some(rule) };
    if m1 + m2 + m3 != 0 {
        return zero(SelectionRule::MagneticSum);
    }
    if m1.unsigned_abs() as usize > l1 || m2.unsigned_abs() as usize > l2 || m3.unsigned_abs() as usize > l3 {
        return zero(SelectionRule::MagneticRange);
    }
    if !triple.triangle() {
        return zero(SelectionRule::Triangle);
    }
    if m1 == 0 && m2 == 0 {
        return threej_zero_symbol(l1, l2, l3);
    }

    let (j1, j2, j3) = (l1 as i64, l2 as i64, l3 as i64);
    let (m1, m2, m3) = (m1 as i64, m2 as i64, m3 as i64);
    let lf = ln_factorial_table((j1 + j2 + j3 + 1) as usize);
    let f = |n: i64| lf[n as usize];

    let ln_pref = 0.5
        * (f(j1 + j2 - j3) + f(j1 - j2 + j3) + f(-j1 + j2 + j3) - f(j1 + j2 + j3 + 1)
            + f(j1 + m1)
            + f(j1 - m1)
            + f(j2 + m2)
            + f(j2 - m2)
            + f(j3 + m3)
            + f(j3 - m3));

    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    if k_min > k_max {
        return zero(SelectionRule::Triangle);
    }
    let mut terms: Vec<(f64, f64)> = (k_min..=k_max)
        .map(|k| {
            let ln_den = f(k)
                + f(j3 - j2 + k + m1)
                + f(j3 - j1 + k - m2)
                + f(j1 + j2 - j3 - k)
                + f(j1 - k - m1)
                + f(j2 - k + m2);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (sign, ln_pref - ln_den)
        })
        .collect();
    let ln_max = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    // largest magnitudes first, then Neumaier summation of the scaled terms
    terms.sort_by(|a, b| b.1.total_cmp(&a.1));
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for (sign, ln_t) in terms {
        let v = sign * (ln_t - ln_max).exp();
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    let phase = if (j1 - j2 - m3).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let value = phase * (sum + comp) * ln_max.exp();
    ThreeJSymbol { triple, m, value, zero_by: None }
}

/// Clebsch–Gordan coefficient `C^{l3 m3}_{l1 m1 l2 m2}`.
pub fn clebsch_gordan(l1: usize, m1: i32, l2: usize, m2: i32, l3: usize, m3: i32) -> f64 {
    let phase = if (l1 as i64 - l2 as i64 + m3 as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * ((2 * l3 + 1) as f64).sqrt() * threej(l1, l2, l3, m1, m2, -m3)
}

/// `∫ Y_{l m1} Y_{l m2} Y_{l m3} dx` for complex Condon–Shortley harmonics.
pub fn gaunt3(l: usize, m1: i32, m2: i32, m3: i32) -> f64 {
    let two_l1 = (2 * l + 1) as f64;
    (two_l1.powi(3) / FOUR_PI).sqrt() * threej_zero(l, l, l) * threej(l, l, l, m1, m2, m3)
}

/// `∫ Y_{l m1} Y_{l m2} Y_{l m3} Y_{l m4} dx` as a sum over the intermediate degree.
///
/// The product `Y_{l m1} Y_{l m2}` is expanded in harmonics of degree `L`
/// with order `M = m1 + m2`, each projected onto `Y_{l m3} Y_{l m4}`.
pub fn gaunt4_sum(l: usize, m1: i32, m2: i32, m3: i32, m4: i32) -> f64 {
    if m1 + m2 + m3 + m4 != 0 {
        return 0.0;
    }
    let mm = m1 + m2;
    let two_l1 = (2 * l + 1) as f64;
    let phase = if mm.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut sum = 0.0;
    for big_l in (mm.unsigned_abs() as usize..=2 * l).filter(|big_l| big_l % 2 == 0) {
        let z = threej_zero(l, l, big_l);
        if z == 0.0 {
            continue;
        }
        let a = threej(l, l, big_l, m1, m2, -mm);
        let b = threej(big_l, l, l, mm, m3, m4);
        sum += (2 * big_l + 1) as f64 * z * z * a * b;
    }
    phase * two_l1 * two_l1 / FOUR_PI * sum
}

/// `γ_{lL} = (l l L; 0 0 0)² (π/2) L √(2l − L) √(2l + L)`.
pub fn gamma_factor(l: usize, big_l: usize) -> f64 {
    let z = threej_zero(l, l, big_l);
    let (lf, bl) = (l as f64, big_l as f64);
    z * z * 0.5 * PI * bl * (2.0 * lf - bl).sqrt() * (2.0 * lf + bl).sqrt()
}

/// `Σ_{L=0}^{2l} (2L+1) (l l L; 0 0 0)^p`.
pub fn threej_zero_power_sum(l: usize, p: i32) -> f64 {
    (0..=2 * l)
        .step_by(2)
        .map(|big_l| (2 * big_l + 1) as f64 * threej_zero(l, l, big_l).powi(p))
        .sum()
}
