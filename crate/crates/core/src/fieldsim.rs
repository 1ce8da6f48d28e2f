//! Random degree-`l` spherical Gaussian eigenfunctions: seeded coefficient
//! sampling, synthesis on product grids, the functionals `h_{l;q}` and the
//! Defect.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::moments::SphereQuadrature;
use crate::specfun::{hermite_row_into, normalized_assoc_legendre};
use crate::{Error, Result, FOUR_PI};

/// Identifies one realization: the experiment's master seed and the
/// realization index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedTag {
    pub master: u64,
    pub realization: u64,
}

impl SeedTag {
    pub fn new(master: u64, realization: u64) -> Self {
        Self { master, realization }
    }

    /// ChaCha8 keyed by the master seed, stream selected by the realization.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.realization);
        rng
    }
}

/// Uniform on `(0, 1]` from the top 53 bits.
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal pair by Box–Muller.
pub(crate) fn box_muller(rng: &mut impl RngCore) -> (f64, f64) {
    let u1 = open_unit(rng.next_u64());
    let u2 = open_unit(rng.next_u64());
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// Real-basis coefficients of one eigenfunction.
///
/// Layout: `coeffs[0]` multiplies `λ_l0`, `coeffs[2m-1]` and `coeffs[2m]`
/// multiply `√2 λ_lm cos mφ` and `√2 λ_lm sin mφ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarmonicCoefficients {
    pub l: usize,
    pub coeffs: Vec<f64>,
}

impl HarmonicCoefficients {
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }
}

/// Draws `2l+1` independent `N(0, 4π/(2l+1))` coefficients.
///
/// Coefficient `k` is the `k mod 2` member of the Box–Muller pair built from
/// 64-bit words `2⌊k/2⌋` and `2⌊k/2⌋+1` of the realization's stream.
pub fn sample_coefficients(l: usize, tag: SeedTag) -> HarmonicCoefficients {
    let n = 2 * l + 1;
    let sd = (FOUR_PI / n as f64).sqrt();
    let mut rng = tag.rng();
    let mut coeffs = Vec::with_capacity(n + 1);
    while coeffs.len() < n {
        let (z0, z1) = box_muller(&mut rng);
        coeffs.push(sd * z0);
        coeffs.push(sd * z1);
    }
    coeffs.truncate(n);
    HarmonicCoefficients { l, coeffs }
}

/// Precomputed ring tables and FFT for synthesizing degree-`l` fields on one grid.
pub struct SynthesisPlan {
    pub l: usize,
    pub grid: Arc<SphereQuadrature>,
    /// `λ_lm(t_i)` at `[i * (l+1) + m]`.
    lambda: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SynthesisPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SynthesisPlan")
            .field("l", &self.l)
            .field("n_theta", &self.grid.n_theta)
            .field("n_phi", &self.grid.n_phi)
            .finish()
    }
}

impl SynthesisPlan {
    pub fn new(l: usize, grid: SphereQuadrature) -> Self {
        let mut lambda = Vec::with_capacity(grid.n_theta * (l + 1));
        for &(t, _) in &grid.nodes {
            lambda.extend((0..=l).map(|m| normalized_assoc_legendre(l, m, t)));
        }
        let fft = FftPlanner::new().plan_fft_inverse(grid.n_phi);
        Self { l, grid: Arc::new(grid), lambda, fft }
    }

    /// Minimal exact grid for `h_{l;q}` with `q ≤ q_max`.
    pub fn for_functionals(l: usize, q_max: u32) -> Self {
        Self::new(l, SphereQuadrature::exact_for((q_max as usize * l).max(1)))
    }

    /// Grid with `n_theta = resolution·l` rings and twice as many longitudes.
    pub fn for_defect(l: usize, resolution: usize) -> Self {
        if resolution < 4 {
            log::warn!("defect resolution {resolution} is below 4; the sign integrand is not band-limited");
        }
        let n_theta = (resolution * l).max(4);
        Self::new(l, SphereQuadrature::new(n_theta, 2 * n_theta))
    }

    pub fn synthesize(&self, coeffs: &HarmonicCoefficients, seed_tag: Option<SeedTag>) -> FieldRealization {
        assert_eq!(coeffs.l, self.l, "coefficient degree does not match the plan");
        let (l, n_phi) = (self.l, self.grid.n_phi);
        let a = &coeffs.coeffs;
        let mut values = Vec::with_capacity(self.grid.n_theta * n_phi);
        let mut spectrum = vec![Complex64::new(0.0, 0.0); n_phi];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for ring in 0..self.grid.n_theta {
            let lam = &self.lambda[ring * (l + 1)..(ring + 1) * (l + 1)];
            spectrum.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            spectrum[0].re = lam[0] * a[0];
            for m in 1..=l {
                let s = std::f64::consts::SQRT_2 * lam[m];
                // Re[(a_c - i a_s) e^{imφ}] = a_c cos mφ + a_s sin mφ
                spectrum[m % n_phi] += Complex64::new(s * a[2 * m - 1], -s * a[2 * m]);
            }
            self.fft.process_with_scratch(&mut spectrum, &mut scratch);
            values.extend(spectrum.iter().map(|c| c.re));
        }
        let north = a[0] * ((2 * l + 1) as f64 / FOUR_PI).sqrt();
        let south = if l % 2 == 0 { north } else { -north };
        FieldRealization {
            l,
            grid: Arc::clone(&self.grid),
            values,
            poles: (south, north),
            seed_tag,
        }
    }
}

/// Field values on a product grid, row-major by latitude ring.
#[derive(Clone, Debug)]
pub struct FieldRealization {
    pub l: usize,
    pub grid: Arc<SphereQuadrature>,
    pub values: Vec<f64>,
    /// Values at `t = -1` and `t = 1`.
    pub poles: (f64, f64),
    pub seed_tag: Option<SeedTag>,
}

impl FieldRealization {
    pub fn ring(&self, i: usize) -> &[f64] {
        let n = self.grid.n_phi;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = -*v);
        out.poles = (-self.poles.0, -self.poles.1);
        out
    }

    /// Quadrature of `f²` over the sphere.
    pub fn norm_sq(&self) -> f64 {
        self.integrate_each(|v| v * v)
    }

    fn integrate_each(&self, g: impl Fn(f64) -> f64) -> f64 {
        let dphi = 2.0 * PI / self.grid.n_phi as f64;
        self.grid
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &(_, w))| w * self.ring(i).iter().map(|&v| g(v)).sum::<f64>())
            .sum::<f64>()
            * dphi
    }
}

/// `h_{l;q} = ∫ H_q(f_l)` for each requested order, exact on the field's grid.
///
/// Fails with [`Error::Resolution`] when the grid cannot integrate degree
/// `max(q)·l` exactly.
pub fn hlq_evaluate(field: &FieldRealization, q_set: &[u32]) -> Result<Vec<(u32, f64)>> {
    let q_max = q_set.iter().copied().max().unwrap_or(0) as usize;
    let required = q_max * field.l;
    if field.grid.exactness_degree < required {
        return Err(Error::Resolution { required, available: field.grid.exactness_degree });
    }
    let dphi = 2.0 * PI / field.grid.n_phi as f64;
    let mut sums = vec![0.0; q_max + 1];
    let mut ring_sums = vec![0.0; q_max + 1];
    let mut row = vec![0.0; q_max + 1];
    for (i, &(_, w)) in field.grid.nodes.iter().enumerate() {
        ring_sums.iter_mut().for_each(|s| *s = 0.0);
        for &v in field.ring(i) {
            hermite_row_into(q_max, v, &mut row);
            for &q in q_set {
                ring_sums[q as usize] += row[q as usize];
            }
        }
        for &q in q_set {
            sums[q as usize] += w * ring_sums[q as usize];
        }
    }
    Ok(q_set.iter().map(|&q| (q, sums[q as usize] * dphi)).collect())
}

/// Node-sum Defect estimate `Σ w · sign(f(node))`.
pub fn defect_node_sum(field: &FieldRealization) -> f64 {
    field.integrate_each(|v| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    })
}

/// Mean of `sign` over a triangle with linearly interpolated vertex values.
fn triangle_sign_mean(a: f64, b: f64, c: f64) -> f64 {
    let pos = (a > 0.0) as u8 + (b > 0.0) as u8 + (c > 0.0) as u8;
    let neg = (a < 0.0) as u8 + (b < 0.0) as u8 + (c < 0.0) as u8;
    if neg == 0 {
        return if pos > 0 { 1.0 } else { 0.0 };
    }
    if pos == 0 {
        return -1.0;
    }
    // the lone vertex is the only positive one, or else the only negative one
    let lone_is = |v: f64| if pos == 1 { v > 0.0 } else { v < 0.0 };
    let (lone, o1, o2) = if lone_is(a) {
        (a, b, c)
    } else if lone_is(b) {
        (b, a, c)
    } else {
        (c, a, b)
    };
    let corner = (lone / (lone - o1)) * (lone / (lone - o2));
    if lone > 0.0 {
        2.0 * corner - 1.0
    } else {
        1.0 - 2.0 * corner
    }
}

/// Defect `∫ sign(f)` of a field on a fine product grid.
///
/// The field is interpolated linearly on a triangulation of the `(t, φ)`
/// rectangle whose vertices are the grid nodes plus the two poles; the sign
/// integral of each triangle is then exact. Area in `(t, φ)` is area on the
/// sphere.
pub fn defect_evaluate(field: &FieldRealization) -> f64 {
    let grid = &field.grid;
    let n_phi = grid.n_phi;
    let dphi = 2.0 * PI / n_phi as f64;
    let south = vec![field.poles.0; n_phi];
    let north = vec![field.poles.1; n_phi];
    let mut rows: Vec<(f64, &[f64])> = Vec::with_capacity(grid.n_theta + 2);
    rows.push((-1.0, &south));
    rows.extend(grid.nodes.iter().enumerate().map(|(i, &(t, _))| (t, field.ring(i))));
    rows.push((1.0, &north));
    let mut total = 0.0;
    for pair in rows.windows(2) {
        let ((t0, lo), (t1, hi)) = (pair[0], pair[1]);
        let mut band = 0.0;
        for j in 0..n_phi {
            let k = (j + 1) % n_phi;
            band += triangle_sign_mean(lo[j], hi[j], hi[k]) + triangle_sign_mean(lo[j], lo[k], hi[k]);
        }
        total += 0.5 * (t1 - t0) * dphi * band;
    }
    total
}

/// One realization's functionals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionalSample {
    pub l: usize,
    pub seed_tag: SeedTag,
    /// `(q, h_{l;q})` in the requested order.
    pub h: Vec<(u32, f64)>,
    pub defect: Option<f64>,
    pub defect_resolution: Option<usize>,
}

impl FunctionalSample {
    pub fn h_of(&self, q: u32) -> Option<f64> {
        self.h.iter().find(|p| p.0 == q).map(|p| p.1)
    }
}

/// Plans for evaluating a fixed set of functionals at one degree.
#[derive(Debug)]
pub struct FunctionalSampler {
    pub l: usize,
    pub q_set: Vec<u32>,
    h_plan: SynthesisPlan,
    defect: Option<(usize, SynthesisPlan)>,
}

impl FunctionalSampler {
    pub fn new(l: usize, q_set: &[u32], defect_resolution: Option<usize>) -> Self {
        let q_max = q_set.iter().copied().max().unwrap_or(0);
        Self {
            l,
            q_set: q_set.to_vec(),
            h_plan: SynthesisPlan::for_functionals(l, q_max),
            defect: defect_resolution.map(|r| (r, SynthesisPlan::for_defect(l, r))),
        }
    }

    pub fn sample(&self, tag: SeedTag) -> Result<FunctionalSample> {
        let coeffs = sample_coefficients(self.l, tag);
        let field = self.h_plan.synthesize(&coeffs, Some(tag));
        let h = hlq_evaluate(&field, &self.q_set)?;
        let (defect, defect_resolution) = match &self.defect {
            Some((r, plan)) => (Some(defect_evaluate(&plan.synthesize(&coeffs, Some(tag)))), Some(*r)),
            None => (None, None),
        };
        Ok(FunctionalSample { l: self.l, seed_tag: tag, h, defect, defect_resolution })
    }
}

/// Writes `l, n_theta, n_phi, master seed, realization` as little-endian
/// `u64`, then the values row-major as little-endian `f64`.
pub fn write_field_dump(field: &FieldRealization, mut out: impl Write) -> Result<()> {
    let tag = field.seed_tag.unwrap_or(SeedTag::new(0, 0));
    for h in [field.l as u64, field.grid.n_theta as u64, field.grid.n_phi as u64, tag.master, tag.realization] {
        out.write_all(&h.to_le_bytes())?;
    }
    for v in &field.values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Header and values of a field dump.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub l: usize,
    pub n_theta: usize,
    pub n_phi: usize,
    pub seed_tag: SeedTag,
    pub values: Vec<f64>,
}

pub fn read_field_dump(mut input: impl Read) -> Result<FieldDump> {
    let mut word = [0u8; 8];
    let mut header = [0u64; 5];
    for h in header.iter_mut() {
        input.read_exact(&mut word)?;
        *h = u64::from_le_bytes(word);
    }
    let n = (header[1] * header[2]) as usize;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        input.read_exact(&mut word)?;
        values.push(f64::from_le_bytes(word));
    }
    Ok(FieldDump {
        l: header[0] as usize,
        n_theta: header[1] as usize,
        n_phi: header[2] as usize,
        seed_tag: SeedTag::new(header[3], header[4]),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::legendre_unchecked;
    use approx::assert_relative_eq;

    #[test]
    fn sampling_is_deterministic() {
        let t = SeedTag::new(7, 3);
        assert_eq!(sample_coefficients(12, t), sample_coefficients(12, t));
        assert_ne!(sample_coefficients(12, t), sample_coefficients(12, SeedTag::new(7, 4)));
        assert_eq!(sample_coefficients(12, t).coeffs.len(), 25);
    }

    #[test]
    fn constant_field() {
        let plan = SynthesisPlan::new(0, SphereQuadrature::new(3, 4));
        let c = HarmonicCoefficients { l: 0, coeffs: vec![2.0] };
        let f = plan.synthesize(&c, None);
        for v in &f.values {
            assert_relative_eq!(*v, 2.0 / FOUR_PI.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn synthesis_matches_direct_sum() {
        let l = 5;
        let plan = SynthesisPlan::new(l, SphereQuadrature::new(4, 7));
        let c = sample_coefficients(l, SeedTag::new(1, 1));
        let f = plan.synthesize(&c, None);
        for (i, &(t, _)) in plan.grid.nodes.iter().enumerate() {
            for j in 0..plan.grid.n_phi {
                let phi = plan.grid.phi(j);
                let mut v = c.coeffs[0] * normalized_assoc_legendre(l, 0, t);
                for m in 1..=l {
                    let lam = std::f64::consts::SQRT_2 * normalized_assoc_legendre(l, m, t);
                    let mf = m as f64;
                    v += lam * (c.coeffs[2 * m - 1] * (mf * phi).cos() + c.coeffs[2 * m] * (mf * phi).sin());
                }
                assert!((f.ring(i)[j] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_and_low_order_functionals() {
        for l in [1usize, 6, 17] {
            let plan = SynthesisPlan::for_functionals(l, 4);
            let c = sample_coefficients(l, SeedTag::new(11, l as u64));
            let f = plan.synthesize(&c, None);
            assert!((f.norm_sq() - c.norm_sq()).abs() < 1e-8);
            let h = hlq_evaluate(&f, &[0, 1, 2]).unwrap();
            assert_relative_eq!(h[0].1, FOUR_PI, epsilon = 1e-10);
            assert!(h[1].1.abs() < 1e-8);
            assert!((h[2].1 - (c.norm_sq() - FOUR_PI)).abs() < 1e-8);
        }
    }

    #[test]
    fn odd_degree_odd_order_vanishes() {
        let plan = SynthesisPlan::for_functionals(7, 5);
        let f = plan.synthesize(&sample_coefficients(7, SeedTag::new(2, 2)), None);
        for (_, h) in hlq_evaluate(&f, &[3, 5]).unwrap() {
            assert!(h.abs() < 1e-8);
        }
    }

    #[test]
    fn under_resolved_grid_is_rejected() {
        let plan = SynthesisPlan::for_functionals(10, 2);
        let f = plan.synthesize(&sample_coefficients(10, SeedTag::new(0, 0)), None);
        match hlq_evaluate(&f, &[3]) {
            Err(Error::Resolution { required, available }) => {
                assert_eq!(required, 30);
                assert_eq!(available, 20);
            }
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn pole_values_match_synthesis_limit() {
        let l = 9;
        let c = sample_coefficients(l, SeedTag::new(5, 0));
        let plan = SynthesisPlan::new(l, SphereQuadrature::new(2, 3));
        let f = plan.synthesize(&c, None);
        let at = |t: f64| c.coeffs[0] * normalized_assoc_legendre(l, 0, t);
        assert_relative_eq!(f.poles.1, at(1.0), epsilon = 1e-12);
        assert_relative_eq!(f.poles.0, at(-1.0), epsilon = 1e-12);
    }

    #[test]
    fn triangle_sign_cases() {
        assert_eq!(triangle_sign_mean(1.0, 2.0, 3.0), 1.0);
        assert_eq!(triangle_sign_mean(-1.0, -2.0, -3.0), -1.0);
        assert_eq!(triangle_sign_mean(0.0, 0.0, 0.0), 0.0);
        assert_eq!(triangle_sign_mean(1.0, 0.0, 0.0), 1.0);
        // symmetric split: positive corner has area fraction 1/4
        assert_relative_eq!(triangle_sign_mean(1.0, -1.0, -1.0), -0.5);
        assert_relative_eq!(triangle_sign_mean(-1.0, 1.0, -1.0), -0.5);
        assert_relative_eq!(triangle_sign_mean(-1.0, 1.0, 1.0), 0.5);
        assert_relative_eq!(triangle_sign_mean(2.0, 0.0, -2.0), 0.0);
    }

    #[test]
    fn defect_of_positive_field_and_antisymmetry() {
        let plan = SynthesisPlan::for_defect(0, 4);
        let f = plan.synthesize(&HarmonicCoefficients { l: 0, coeffs: vec![1.0] }, None);
        assert_relative_eq!(defect_evaluate(&f), FOUR_PI, epsilon = 1e-12);
        assert_relative_eq!(defect_node_sum(&f), FOUR_PI, epsilon = 1e-12);

        let plan = SynthesisPlan::for_defect(12, 4);
        let f = plan.synthesize(&sample_coefficients(12, SeedTag::new(3, 1)), None);
        assert_relative_eq!(defect_evaluate(&f.negated()), -defect_evaluate(&f), epsilon = 1e-12);
        assert_relative_eq!(defect_node_sum(&f.negated()), -defect_node_sum(&f), epsilon = 1e-12);
    }

    #[test]
    fn defect_of_zonal_degree_one_field() {
        // f = t: the two hemispheres cancel exactly
        let plan = SynthesisPlan::for_defect(1, 4);
        let c = HarmonicCoefficients { l: 1, coeffs: vec![1.0, 0.0, 0.0] };
        assert!(defect_evaluate(&plan.synthesize(&c, None)).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let plan = SynthesisPlan::for_functionals(4, 2);
        let tag = SeedTag::new(9, 8);
        let f = plan.synthesize(&sample_coefficients(4, tag), Some(tag));
        let mut buf = Vec::new();
        write_field_dump(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 40 + 8 * f.values.len());
        let d = read_field_dump(buf.as_slice()).unwrap();
        assert_eq!((d.l, d.n_theta, d.n_phi, d.seed_tag), (4, f.grid.n_theta, f.grid.n_phi, tag));
        assert_eq!(d.values, f.values);
    }

    #[test]
    fn empirical_covariance_is_legendre() {
        let l = 6;
        let plan = SynthesisPlan::new(l, SphereQuadrature::new(3, 5));
        let (i, j, k) = (0usize, 2usize, 1usize);
        let (ti, tk) = (plan.grid.nodes[i].0, plan.grid.nodes[k].0);
        let dphi = plan.grid.phi(j);
        let cos_angle = ti * tk + ((1.0 - ti * ti) * (1.0 - tk * tk)).sqrt() * dphi.cos();
        let n = 10_000;
        let prods: Vec<f64> = (0..n)
            .map(|r| {
                let f = plan.synthesize(&sample_coefficients(l, SeedTag::new(21, r)), None);
                f.ring(i)[0] * f.ring(k)[j]
            })
            .collect();
        let mean = prods.iter().sum::<f64>() / n as f64;
        let sd = (prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let want = legendre_unchecked(l, cos_angle);
        assert!((mean - want).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {want}");
    }
}
