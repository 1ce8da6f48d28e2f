//! Connected diagrams on four rows of `q` vertices, their η-vectors, the
//! cross-moment integrals `M(η)` and the fourth cumulant of `h_{l;q}`.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::fieldsim::open_unit;
use crate::moments::{factorial, gauss_legendre_rule, legendre_moment, variance_hlq};
use crate::specfun::{legendre_row_into, legendre_unchecked};
use crate::wigner::threej_zero_power_sum;
use crate::{Error, Result, FOUR_PI};

/// Edge pairs in the order used by [`EtaVector`].
pub const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Edge multiplicities for `(1,2), (1,3), (1,4), (2,3), (2,4), (3,4)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct EtaVector {
    pub eta: [u32; 6],
}

impl EtaVector {
    /// From `(η_12, η_13, η_14)` with opposite edges mirrored.
    pub fn from_triple(a: u32, b: u32, c: u32) -> Self {
        Self { eta: [a, b, c, c, b, a] }
    }

    pub fn row_sums(&self) -> [u32; 4] {
        let mut s = [0; 4];
        for (k, &(i, j)) in EDGES.iter().enumerate() {
            s[i] += self.eta[k];
            s[j] += self.eta[k];
        }
        s
    }

    pub fn opposite_edges_equal(&self) -> bool {
        let e = &self.eta;
        e[0] == e[5] && e[1] == e[4] && e[2] == e[3]
    }

    pub fn connected(&self) -> bool {
        let mut parent = [0usize, 1, 2, 3];
        fn root(p: &mut [usize; 4], mut i: usize) -> usize {
            while p[i] != i {
                i = p[i];
            }
            i
        }
        for (k, &(i, j)) in EDGES.iter().enumerate() {
            if self.eta[k] > 0 {
                let (ri, rj) = (root(&mut parent, i), root(&mut parent, j));
                parent[ri] = rj;
            }
        }
        let r = root(&mut parent, 0);
        (1..4).all(|i| root(&mut parent, i) == r)
    }

    /// `(q!)⁴ / Π η_ij!`.
    pub fn multiplicity(&self, q: u32) -> f64 {
        factorial(q).powi(4) / self.eta.iter().map(|&e| factorial(e)).product::<f64>()
    }

    /// Cycle weights `(s_12, s_23, s_34, s_41)` when the support is a 4-cycle.
    pub fn cycle_weights(&self) -> Option<[u32; 4]> {
        let [e12, e13, e14, e23, e24, e34] = self.eta;
        match (e12 > 0, e13 > 0, e14 > 0) {
            // 1-2-4-3-1
            (true, true, false) if e23 == 0 => Some([e12, e24, e34, e13]),
            // 1-2-3-4-1
            (true, false, true) if e24 == 0 => Some([e12, e23, e34, e14]),
            // 1-3-2-4-1
            (false, true, true) if e12 == 0 && e34 == 0 => Some([e13, e23, e24, e14]),
            _ => None,
        }
    }

    fn packed(&self) -> u64 {
        self.eta.iter().fold(0u64, |acc, &e| (acc << 5) | e as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagramFamily {
    pub q: u32,
    pub eta: EtaVector,
    pub multiplicity: f64,
    pub connected: bool,
}

/// Every η-vector with all row sums equal to `q`, connected or not.
pub fn enumerate_eta(q: u32) -> Result<Vec<DiagramFamily>> {
    if !(1..=24).contains(&q) {
        return Err(Error::domain(format!("diagram order must lie in 1..=24, got {q}")));
    }
    let mut out = Vec::new();
    for a in 0..=q {
        for b in 0..=q - a {
            let eta = EtaVector::from_triple(a, b, q - a - b);
            out.push(DiagramFamily { q, eta, multiplicity: eta.multiplicity(q), connected: eta.connected() });
        }
    }
    Ok(out)
}

pub fn connected_families(q: u32) -> Result<Vec<DiagramFamily>> {
    Ok(enumerate_eta(q)?.into_iter().filter(|f| f.connected).collect())
}

/// Outcome of the exhaustive opposite-edge check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub q: u32,
    /// Number of objects examined: matchings for `q ≤ 4`, η-vectors above.
    pub examined: u64,
    pub connected: u64,
    pub holds: bool,
}

/// Tally of η-vectors over all perfect matchings of 4 rows of `q` vertices
/// with no edge inside a row.
pub fn matching_eta_counts(q: u32) -> std::collections::HashMap<[u32; 6], u64> {
    let n = 4 * q as usize;
    let mut counts = std::collections::HashMap::new();
    let mut used = vec![false; n];
    let mut eta = [0u32; 6];
    fn edge_index(i: usize, j: usize) -> usize {
        EDGES.iter().position(|&e| e == (i.min(j), i.max(j))).unwrap()
    }
    fn go(
        q: usize,
        used: &mut [bool],
        eta: &mut [u32; 6],
        counts: &mut std::collections::HashMap<[u32; 6], u64>,
    ) {
        let Some(v) = used.iter().position(|u| !u) else {
            *counts.entry(*eta).or_insert(0) += 1;
            return;
        };
        used[v] = true;
        let row_v = v / q;
        for w in v + 1..used.len() {
            if used[w] || w / q == row_v {
                continue;
            }
            used[w] = true;
            let k = edge_index(row_v, w / q);
            eta[k] += 1;
            go(q, used, eta, counts);
            eta[k] -= 1;
            used[w] = false;
        }
        used[v] = false;
    }
    go(q as usize, &mut used, &mut eta, &mut counts);
    counts
}

/// Checks that every connected diagram has equal opposite-edge multiplicities.
///
/// Enumerates all matchings for `q ≤ 4`. For `q ∈ {5, 6}` the matching
/// count is too large, so every 6-tuple in `[0, q]⁶` with row sums `q` is
/// examined instead; each such tuple is the η of at least one matching.
pub fn opposite_edge_lemma_check(q: u32) -> Result<LemmaCheck> {
    if !(1..=6).contains(&q) {
        return Err(Error::domain(format!("exhaustive check supports 1 <= q <= 6, got {q}")));
    }
    let (mut examined, mut connected, mut holds) = (0u64, 0u64, true);
    if q <= 4 {
        for (eta, count) in matching_eta_counts(q) {
            let e = EtaVector { eta };
            examined += count;
            if e.connected() {
                connected += count;
                holds &= e.opposite_edges_equal();
            }
        }
    } else {
        let r = 0..=q;
        for e12 in r.clone() {
            for e13 in r.clone() {
                for e14 in r.clone() {
                    if e12 + e13 + e14 != q {
                        continue;
                    }
                    for e23 in r.clone() {
                        for e24 in r.clone() {
                            if e12 + e23 + e24 != q {
                                continue;
                            }
                            for e34 in r.clone() {
                                let e = EtaVector { eta: [e12, e13, e14, e23, e24, e34] };
                                if e.row_sums() != [q; 4] {
                                    continue;
                                }
                                examined += 1;
                                if e.connected() {
                                    connected += 1;
                                    holds &= e.opposite_edges_equal();
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(LemmaCheck { q, examined, connected, holds })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MEtaEstimate {
    pub eta: EtaVector,
    pub value: f64,
    pub stderr: f64,
    pub method: Method,
}

/// Legendre coefficients `c_n` of `P_l(t)^s = Σ c_n P_n(t)`, `n = 0..=s·l`.
fn legendre_power_coefficients(l: usize, s: u32) -> Vec<f64> {
    let deg = s as usize * l;
    let rule = gauss_legendre_rule(deg + 1);
    let mut coeffs = vec![0.0; deg + 1];
    let mut row = Vec::with_capacity(deg + 1);
    for &(t, w) in &rule {
        let k = w * legendre_unchecked(l, t).powi(s as i32);
        legendre_row_into(deg, t, &mut row);
        for (c, p) in coeffs.iter_mut().zip(&row) {
            *c += k * p;
        }
    }
    for (n, c) in coeffs.iter_mut().enumerate() {
        *c *= (2 * n + 1) as f64 / 2.0;
    }
    coeffs
}

/// `∫ Π_cycle P_l(⟨x_i, x_{i+1}⟩)^{s_i} dx_1…dx_4` for a 4-cycle.
///
/// Each edge kernel is expanded in Legendre polynomials; the addition
/// theorem contracts the cycle to `Σ_n Π_e c_{e,n} (4π)⁴ / (2n+1)³`.
pub fn m_eta_exact_cycle(l: usize, weights: [u32; 4]) -> Result<f64> {
    if weights.contains(&0) {
        return Err(Error::domain("every cycle edge needs weight >= 1"));
    }
    let tables: Vec<Vec<f64>> = weights.iter().map(|&s| legendre_power_coefficients(l, s)).collect();
    let n_max = tables.iter().map(Vec::len).min().unwrap();
    Ok((0..n_max)
        .map(|n| {
            let prod: f64 = tables.iter().map(|t| t[n]).product();
            prod * FOUR_PI.powi(4) / ((2 * n + 1) as f64).powi(3)
        })
        .sum())
}

/// Exact `M(η)` for cycle-supported η.
pub fn m_eta_exact(l: usize, eta: EtaVector) -> Result<f64> {
    let w = eta
        .cycle_weights()
        .ok_or_else(|| Error::domain(format!("η = {:?} is not supported on a 4-cycle", eta.eta)))?;
    m_eta_exact_cycle(l, w)
}

const MC_BLOCK: usize = 4096;

fn uniform_sphere(rng: &mut impl RngCore) -> [f64; 3] {
    let t = 2.0 * open_unit(rng.next_u64()) - 1.0;
    let phi = 2.0 * PI * open_unit(rng.next_u64());
    let s = (1.0 - t * t).max(0.0).sqrt();
    [s * phi.cos(), s * phi.sin(), t]
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0)
}

/// Plain Monte Carlo for `M(η)` with `x_1` fixed at the north pole.
///
/// Samples are drawn in blocks of 4096; block `k` uses the ChaCha8 stream
/// keyed by `(η, k)`, so the result does not depend on thread count.
pub fn m_eta_monte_carlo(l: usize, eta: EtaVector, n_samples: usize, seed: u64) -> Result<MEtaEstimate> {
    if n_samples < 1000 {
        return Err(Error::domain(format!("need at least 1000 samples, got {n_samples}")));
    }
    let blocks = n_samples.div_ceil(MC_BLOCK);
    let sums: Vec<(f64, f64, usize)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((eta.packed() << 32) | b as u64);
            let count = MC_BLOCK.min(n_samples - b * MC_BLOCK);
            let north = [0.0, 0.0, 1.0];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let x = [north, uniform_sphere(&mut rng), uniform_sphere(&mut rng), uniform_sphere(&mut rng)];
                let mut v = 1.0;
                for (k, &(i, j)) in EDGES.iter().enumerate() {
                    if eta.eta[k] > 0 {
                        v *= legendre_unchecked(l, dot(&x[i], &x[j])).powi(eta.eta[k] as i32);
                    }
                }
                s += v;
                s2 += v * v;
            }
            (s, s2, count)
        })
        .collect();
    let (s, s2, n) = sums.iter().fold((0.0, 0.0, 0usize), |acc, b| (acc.0 + b.0, acc.1 + b.1, acc.2 + b.2));
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let scale = FOUR_PI.powi(4);
    Ok(MEtaEstimate { eta, value: scale * mean, stderr: scale * (var / nf).sqrt(), method: Method::MonteCarlo })
}

/// `M(η)` exactly when the support is a cycle, by Monte Carlo otherwise.
pub fn m_eta_estimate(l: usize, eta: EtaVector, n_samples: usize, seed: u64) -> Result<MEtaEstimate> {
    match eta.cycle_weights() {
        Some(w) => Ok(MEtaEstimate { eta, value: m_eta_exact_cycle(l, w)?, stderr: 0.0, method: Method::Exact }),
        None => m_eta_monte_carlo(l, eta, n_samples, seed),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cum4Sum {
    pub value: f64,
    pub stderr: f64,
}

/// `Σ multiplicity · M(η)` over the connected families of order `q`,
/// standard errors combined in quadrature.
pub fn cum4_diagram_sum(q: u32, estimates: &[MEtaEstimate]) -> Result<Cum4Sum> {
    let mut value = 0.0;
    let mut var = 0.0;
    for fam in connected_families(q)? {
        let est = estimates
            .iter()
            .find(|e| e.eta == fam.eta)
            .ok_or_else(|| Error::domain(format!("no estimate for η = {:?}", fam.eta.eta)))?;
        value += fam.multiplicity * est.value;
        var += (fam.multiplicity * est.stderr).powi(2);
    }
    Ok(Cum4Sum { value, stderr: var.sqrt() })
}

/// The two reduced Wigner sums bounding the fourth cumulant of `h_{l;4}`:
/// `A1 = (∫_0^1 P_l⁴)² / (2l+1)` and `A2 = Σ_L (2L+1) (l l L; 0 0 0)⁸`.
pub fn a_sums_q4(l: usize) -> Result<(f64, f64)> {
    if l % 2 == 1 {
        return Err(Error::domain(format!("reduced sums need even l, got {l}")));
    }
    let a1 = legendre_moment(l, 4).powi(2) / (2 * l + 1) as f64;
    Ok((a1, threej_zero_power_sum(l, 8)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NpBound {
    pub value: f64,
    /// Set when a negative fourth-cumulant estimate was clamped to zero.
    pub clamped: bool,
}

/// Fourth-moment total-variation bound `2 √((q-1)/(3q) · cum4 / Var²)`.
pub fn np_bound(variance: f64, cum4: f64, q: u32) -> Result<NpBound> {
    if !(variance > 0.0) {
        return Err(Error::domain(format!("variance must be positive, got {variance}")));
    }
    if q == 0 {
        return Err(Error::domain("order must be positive"));
    }
    let clamped = cum4 < 0.0;
    let qf = q as f64;
    let value = 2.0 * ((qf - 1.0) / (3.0 * qf) * cum4.max(0.0) / (variance * variance)).sqrt();
    Ok(NpBound { value, clamped })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyReport {
    pub eta: EtaVector,
    pub multiplicity: f64,
    pub estimate: MEtaEstimate,
}

/// Per-(l, q) summary of the diagram expansion of the fourth cumulant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagramReport {
    pub l: usize,
    pub q: u32,
    pub n_samples: usize,
    pub seed: u64,
    pub families: Vec<FamilyReport>,
    pub cum4: f64,
    pub cum4_stderr: f64,
    pub variance: f64,
    pub np_bound: f64,
    pub np_bound_clamped: bool,
}

pub fn diagram_report(l: usize, q: u32, n_samples: usize, seed: u64) -> Result<DiagramReport> {
    let families = connected_families(q)?;
    let estimates: Vec<MEtaEstimate> = families
        .iter()
        .map(|f| m_eta_estimate(l, f.eta, n_samples, seed))
        .collect::<Result<_>>()?;
    let sum = cum4_diagram_sum(q, &estimates)?;
    let variance = variance_hlq(l, q);
    let bound = if variance > 0.0 { Some(np_bound(variance, sum.value, q)?) } else { None };
    Ok(DiagramReport {
        l,
        q,
        n_samples,
        seed,
        families: families
            .iter()
            .zip(estimates)
            .map(|(f, e)| FamilyReport { eta: f.eta, multiplicity: f.multiplicity, estimate: e })
            .collect(),
        cum4: sum.value,
        cum4_stderr: sum.stderr,
        variance,
        np_bound: bound.map_or(f64::NAN, |b| b.value),
        np_bound_clamped: bound.is_some_and(|b| b.clamped),
    })
}
