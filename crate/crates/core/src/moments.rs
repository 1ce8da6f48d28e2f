//! Quadrature rules, Legendre moments, exact and asymptotic variances of
//! `h_{l;q}`, the constants `c_q` and the Hermite coefficients of transforms.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::mcstats::TransformSpec;
use crate::specfun::{hermite_prob, j0_unchecked, legendre_unchecked, legendre_with_derivative};
use crate::{Error, Result, FOUR_PI};

/// Double-double helpers for the final node refinement.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn from_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd(s, (a - (s - bb)) + (b - bb))
    }

    fn from_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd(p, a.mul_add(b, -p))
    }

    fn add(self, o: Dd) -> Dd {
        let Dd(s, e) = Dd::from_sum(self.0, o.0);
        let e = e + self.1 + o.1;
        Dd::from_sum(s, e)
    }

    fn mul(self, o: Dd) -> Dd {
        let Dd(p, e) = Dd::from_prod(self.0, o.0);
        let e = e + self.0 * o.1 + self.1 * o.0;
        Dd::from_sum(p, e)
    }

    fn scale(self, c: f64) -> Dd {
        self.mul(Dd(c, 0.0))
    }

    fn div_f64(self, c: f64) -> Dd {
        let q = self.0 / c;
        let r = self.add(Dd::from_prod(q, -c));
        Dd::from_sum(q, (r.0 + r.1) / c)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn value(self) -> f64 {
        self.0 + self.1
    }
}

/// `(P_n(x), (1 - x²) P_n'(x))` in double-double arithmetic at a double `x`.
fn legendre_pair_dd(n: usize, x: f64) -> (Dd, Dd) {
    let xd = Dd(x, 0.0);
    let (mut p0, mut p1) = (Dd(1.0, 0.0), xd);
    for k in 1..n {
        let kf = k as f64;
        let p2 = Dd::from_prod(2.0 * kf + 1.0, x).mul(p1).add(p0.scale(-kf)).div_f64(kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    // (1 - x²) P_n' = n (P_{n-1} - x P_n)
    let d = p0.add(xd.mul(p1).neg()).scale(n as f64);
    (p1, d)
}

/// Weight of the Gauss node nearest `x`, corrected for the sub-ulp offset
/// between `x` and the exact root.
fn refined_weight(n: usize, x: f64) -> f64 {
    let (p, d) = legendre_pair_dd(n, x);
    let one_minus_x2 = Dd(1.0, 0.0).add(Dd::from_prod(x, x).neg()).value();
    let dp = d.value() / one_minus_x2;
    let eta = -p.value() / dp;
    2.0 / (one_minus_x2 * dp * dp) * (1.0 - 2.0 * x * eta / one_minus_x2)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending in the node.
///
/// Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "rule needs at least one node");
    let nf = n as f64;
    let half = n / 2;
    let upper: Vec<(f64, f64)> = (0..half)
        .into_par_iter()
        .map(|i| {
            // Tricomi initial guess for the (i+1)-th largest root
            let k = (i + 1) as f64;
            let mut x = (1.0 - 1.0 / (8.0 * nf * nf) + 1.0 / (8.0 * nf * nf * nf))
                * (PI * (4.0 * k - 1.0) / (4.0 * nf + 2.0)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-15 * x.abs().max(1e-3) {
                    break;
                }
            }
            // last step in double-double so the node is correctly rounded
            let (p, d) = legendre_pair_dd(n, x);
            x -= p.value() * (1.0 - x * x) / d.value();
            (x, refined_weight(n, x))
        })
        .collect();
    let mut rule = Vec::with_capacity(n);
    rule.extend(upper.iter().map(|&(x, w)| (-x, w)));
    if n % 2 == 1 {
        rule.push((0.0, refined_weight(n, 0.0)));
    }
    rule.extend(upper.iter().rev().copied());
    rule
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    gauss_legendre_rule(n).into_iter().map(|(x, w)| (mid + half * x, half * w)).collect()
}

/// Product rule on the sphere: Gauss–Legendre in `t = cos θ` times equispaced
/// longitudes.
#[derive(Clone, Debug, Serialize)]
pub struct SphereQuadrature {
    pub n_theta: usize,
    pub n_phi: usize,
    /// `(t, w)` per latitude ring; the weight of a single node is `w · 2π / n_phi`.
    pub nodes: Vec<(f64, f64)>,
    pub exactness_degree: usize,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        assert!(n_theta >= 1 && n_phi >= 1);
        Self {
            n_theta,
            n_phi,
            nodes: gauss_legendre_rule(n_theta),
            exactness_degree: (2 * n_theta - 1).min(n_phi - 1),
        }
    }

    /// Smallest product rule exact for spherical polynomials of the given degree.
    pub fn exact_for(degree: usize) -> Self {
        Self::new(degree.div_ceil(2) + 1, degree + 1)
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn node_weight(&self, i: usize) -> f64 {
        self.nodes[i].1 * 2.0 * PI / self.n_phi as f64
    }

    pub fn total_weight(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum::<f64>() * 2.0 * PI
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let dphi = 2.0 * PI / self.n_phi as f64;
        self.nodes
            .iter()
            .map(|&(t, w)| w * (0..self.n_phi).map(|j| f(t, self.phi(j))).sum::<f64>())
            .sum::<f64>()
            * dphi
    }
}

fn moment_on(l: usize, q: u32, rule: &[(f64, f64)]) -> f64 {
    let terms: Vec<f64> = rule.par_iter().map(|&(t, w)| w * legendre_unchecked(l, t).powi(q as i32)).collect();
    terms.iter().sum()
}

fn moment_nodes(l: usize, q: u32) -> usize {
    (q as usize * l + 1).div_ceil(2) + 1
}

/// `∫_0^1 P_l(t)^q dt`, exact up to round-off.
pub fn legendre_moment(l: usize, q: u32) -> f64 {
    moment_on(l, q, &gauss_legendre_interval(moment_nodes(l, q), 0.0, 1.0))
}

/// `∫_{-1}^1 P_l(t)^q dt`, exact up to round-off.
pub fn legendre_moment_full(l: usize, q: u32) -> f64 {
    if l % 2 == 1 && q % 2 == 1 {
        return 0.0;
    }
    moment_on(l, q, &gauss_legendre_rule(moment_nodes(l, q)))
}

pub fn factorial(q: u32) -> f64 {
    (1..=q).map(f64::from).product()
}

/// `Var(h_{l;q}) = q! (4π)(2π) ∫_{-1}^1 P_l^q dt`.
pub fn variance_hlq(l: usize, q: u32) -> f64 {
    factorial(q) * FOUR_PI * 2.0 * PI * legendre_moment_full(l, q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CqConstant {
    pub q: u32,
    pub value: f64,
    pub stderr: f64,
    pub psi_max: f64,
    pub panels: usize,
}

pub const DEFAULT_CQ_TOL: f64 = 1e-5;
pub const DEFAULT_PSI_MAX: f64 = 600.0;

/// k-th positive zero of `J0` (k ≥ 1).
pub fn j0_zero(k: usize) -> f64 {
    let beta = (k as f64 - 0.25) * PI;
    let b8 = 8.0 * beta;
    // McMahon expansion as a starting point, then secant refinement
    let mut x0 = beta + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3));
    let mut x1 = x0 + 1e-4;
    let (mut f0, mut f1) = (j0_unchecked(x0), j0_unchecked(x1));
    for _ in 0..50 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = j0_unchecked(x1);
        if (x1 - x0).abs() < 1e-14 * x1 {
            break;
        }
    }
    x1
}

fn panel_integral(q: u32, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter()
        .map(|&(x, w)| {
            let psi = mid + half * x;
            w * psi * j0_unchecked(psi).powi(q as i32)
        })
        .sum::<f64>()
        * half
}

/// Repeated neighbour averaging of the trailing partial sums of an
/// alternating series.
fn averaged_limit(partial: &[f64], depth: usize) -> f64 {
    let mut row: Vec<f64> = partial[partial.len() - depth..].to_vec();
    while row.len() > 1 {
        row = row.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    row[0]
}

/// `c_q = ∫_0^∞ ψ J0(ψ)^q dψ` for `q = 3` or `q ≥ 5`.
///
/// Odd `q` sums the alternating inter-zero panels up to `psi_max` and
/// accelerates the tail by repeated averaging. Even `q` has a positive
/// integrand and adds the mean of the leading large-argument term beyond the
/// last zero.
pub fn cq_constant(q: u32, psi_max: f64, tol: f64) -> Result<CqConstant> {
    if q <= 2 {
        return Err(Error::undefined(format!("c_{q} is not defined; the variance has an exact closed form")));
    }
    if q == 4 {
        return Err(Error::undefined("c_4 diverges logarithmically"));
    }
    if !(psi_max > 10.0) {
        return Err(Error::domain(format!("psi_max must exceed 10, got {psi_max}")));
    }
    let rule = gauss_legendre_rule(16);
    let mut zeros = vec![0.0];
    loop {
        let z = j0_zero(zeros.len());
        if z > psi_max {
            break;
        }
        zeros.push(z);
    }
    let panels = zeros.len() - 1;
    let mut partial = Vec::with_capacity(panels);
    let mut sum = 0.0;
    for w in zeros.windows(2) {
        sum += panel_integral(q, w[0], w[1], &rule);
        partial.push(sum);
    }
    let (value, stderr) = if q % 2 == 1 {
        let depth = 24.min(panels / 2);
        let v = averaged_limit(&partial, depth);
        let v_short = averaged_limit(&partial[..panels - 4], depth);
        let v_shallow = averaged_limit(&partial, depth - 4);
        (v, (v - v_short).abs().max((v - v_shallow).abs()))
    } else {
        // mean of ψ (2/(πψ))^{q/2} cos^q(ψ - π/4) beyond the last zero
        let half_q = q as i32 / 2;
        let psi_end = *zeros.last().unwrap();
        let cos_mean = (1..=half_q).map(|k| (half_q + k) as f64 / (4.0 * k as f64)).product::<f64>();
        let tail = (2.0 / PI).powi(half_q) * cos_mean * psi_end.powi(2 - half_q) / (half_q - 2) as f64;
        (sum + tail, tail / psi_end)
    };
    if stderr > tol {
        log::warn!("c_{q}: truncation estimate {stderr:e} exceeds tolerance {tol:e}; raise psi_max");
    }
    Ok(CqConstant { q, value, stderr, psi_max, panels })
}

/// Leading-order variance of `h_{l;q}` for even `l`.
///
/// `(4π)² q! c_q / l²` for `q = 3` and `q ≥ 5`, `576 log l / l²` for `q = 4`.
pub fn asymptotic_variance(l: usize, q: u32) -> Result<f64> {
    let lf = l as f64;
    match q {
        0..=2 => Err(Error::undefined(format!("no asymptotic form for q = {q}; use the exact variance"))),
        4 => Ok(576.0 * lf.ln() / (lf * lf)),
        _ => {
            let c = cq_constant(q, DEFAULT_PSI_MAX, DEFAULT_CQ_TOL)?;
            Ok(FOUR_PI * FOUR_PI * factorial(q) * c.value / (lf * lf))
        }
    }
}

/// `a_q = (2q)! / (4^q (q!)² (2q+1))`.
pub fn defect_coeff_a(q: u32) -> f64 {
    let central: f64 = (1..=q).map(|k| (2 * k - 1) as f64 / (2 * k) as f64).product();
    central / (2 * q + 1) as f64
}

/// Result of a Hermite-coefficient quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JCoefficient {
    pub q: u32,
    pub value: f64,
    pub converged: bool,
}

/// Gauss–Hermite rule for the standard normal weight: `Σ w g(z) ≈ E[g(Z)]`.
pub fn gauss_hermite_rule(n: usize) -> Vec<(f64, f64)> {
    // physicists' roots, largest first, by Newton on orthonormal Hermite functions
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let half = n.div_ceil(2);
    let mut roots: Vec<f64> = Vec::with_capacity(half);
    let mut weights: Vec<f64> = Vec::with_capacity(half);
    let mut z = 0.0f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        let mut pp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j + 1) as f64).sqrt() * p2 - (j as f64 / (j + 1) as f64).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        roots.push(z);
        weights.push(2.0 / (pp * pp));
    }
    if n % 2 == 1 {
        roots[half - 1] = 0.0;
    }
    let scale = |x: f64, w: f64| (x * std::f64::consts::SQRT_2, w / PI.sqrt());
    let paired = n / 2;
    let mut rule: Vec<(f64, f64)> = (0..paired).map(|i| scale(-roots[i], weights[i])).collect();
    if n % 2 == 1 {
        rule.push(scale(0.0, weights[half - 1]));
    }
    rule.extend((0..paired).rev().map(|i| scale(roots[i], weights[i])));
    rule
}

fn j_on_rule(transform: &TransformSpec, q: u32, n_nodes: usize) -> f64 {
    let breaks = transform.breakpoints();
    if breaks.is_empty() {
        return gauss_hermite_rule(n_nodes)
            .iter()
            .map(|&(z, w)| w * transform.eval(z) * hermite_prob(q as usize, z))
            .sum();
    }
    // piecewise Gauss–Legendre against the normal density, split at the jumps
    const REACH: f64 = 40.0;
    const PER_PANEL: usize = 16;
    let mut cuts = vec![-REACH];
    cuts.extend(breaks.iter().copied().filter(|b| b.abs() < REACH));
    cuts.push(REACH);
    let panels_total = (n_nodes / PER_PANEL).max(cuts.len() - 1);
    let rule = gauss_legendre_rule(PER_PANEL);
    let mut sum = 0.0;
    for seg in cuts.windows(2) {
        let share = ((seg[1] - seg[0]) / (2.0 * REACH) * panels_total as f64).ceil().max(1.0) as usize;
        let h = (seg[1] - seg[0]) / share as f64;
        for p in 0..share {
            let a = seg[0] + p as f64 * h;
            let mid = a + 0.5 * h;
            for &(x, w) in &rule {
                let z = mid + 0.5 * h * x;
                let density = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
                sum += 0.5 * h * w * density * transform.eval(z) * hermite_prob(q as usize, z);
            }
        }
    }
    sum
}

/// `J_q(G) = E[G(Z) H_q(Z)]`.
///
/// Smooth transforms use Gauss–Hermite quadrature; transforms with jumps use
/// panelled Gauss–Legendre split at the jumps. `converged` is false when
/// doubling `n_nodes` moves the value by more than `1e-8` (relative to
/// `max(1, |value|)`).
pub fn hermite_coeff_j(transform: &TransformSpec, q: u32, n_nodes: usize) -> Result<JCoefficient> {
    if q > 64 {
        return Err(Error::domain(format!("Hermite order {q} exceeds 64")));
    }
    let value = j_on_rule(transform, q, n_nodes);
    let refined = j_on_rule(transform, q, 2 * n_nodes);
    let converged = (refined - value).abs() <= 1e-8 * refined.abs().max(1.0);
    Ok(JCoefficient { q, value: refined, converged })
}

/// One row of a moment table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub l: usize,
    pub q: u32,
    /// `∫_0^1 P_l^q dt`.
    pub moment: f64,
    pub variance: f64,
    pub asymptotic: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn moment_row(l: usize, q: u32, c_q: Option<f64>) -> MomentRow {
    let moment = legendre_moment(l, q);
    let variance = variance_hlq(l, q);
    let lf = l as f64;
    let asymptotic = match (q, c_q) {
        _ if l < 2 => None,
        (4, _) => Some(576.0 * lf.ln() / (lf * lf)),
        (_, Some(c)) => Some(FOUR_PI * FOUR_PI * factorial(q) * c / (lf * lf)),
        _ => None,
    };
    let ratio = asymptotic.filter(|a| *a > 0.0).map(|a| variance / a);
    MomentRow { l, q, moment, variance, asymptotic, ratio }
}

/// Rows for every `l` in the grid, filled in parallel, ordered as the grid.
pub fn moment_table(l_grid: &[usize], q: u32) -> Result<Vec<MomentRow>> {
    let c_q = match q {
        3 | 5.. => Some(cq_constant(q, DEFAULT_PSI_MAX, DEFAULT_CQ_TOL)?.value),
        _ => None,
    };
    Ok(l_grid.par_iter().map(|&l| moment_row(l, q, c_q)).collect())
}
