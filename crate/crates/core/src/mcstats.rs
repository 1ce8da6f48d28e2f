//! Seeded Monte Carlo experiments over many field realizations: k-statistics
//! with bootstrap errors, Kolmogorov–Smirnov distances, the polyspectra
//! statistic `Z_l` and Defect experiments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::diagrams::np_bound;
use crate::fieldsim::{FunctionalSample, FunctionalSampler, SeedTag};
use crate::moments::{cq_constant, factorial, hermite_coeff_j, moment_row, variance_hlq, DEFAULT_CQ_TOL, DEFAULT_PSI_MAX};
use crate::output::{csv_string, fmt_f64, fmt_opt};
use crate::{Error, Result};

/// A pointwise transform `G` applied to the field before integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformSpec {
    /// Monomial coefficients `b_0..b_Q` of `Σ b_q x^q`.
    Monomial(Vec<f64>),
    /// Hermite coefficients `β_0..β_Q` of `Σ β_q H_q(x)`.
    Hermite(Vec<f64>),
    /// `sign(x)` with `sign(0) = 0`.
    Sign,
    /// `1{x > threshold}`.
    Indicator { threshold: f64 },
}

impl TransformSpec {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TransformSpec::Monomial(b) => b.iter().rev().fold(0.0, |acc, &c| acc * x + c),
            TransformSpec::Hermite(beta) => {
                let mut row = vec![0.0; beta.len().max(1)];
                crate::specfun::hermite_row_into(beta.len().saturating_sub(1), x, &mut row);
                beta.iter().zip(&row).map(|(b, h)| b * h).sum()
            }
            TransformSpec::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            TransformSpec::Indicator { threshold } => {
                if x > *threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the transform jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TransformSpec::Sign => vec![0.0],
            TransformSpec::Indicator { threshold } => vec![*threshold],
            _ => Vec::new(),
        }
    }

    /// Hermite coefficients `β_0..=β_Q` with `G = Σ β_q H_q`.
    ///
    /// Polynomial transforms are converted exactly; the others are truncated
    /// at `q_max` with `β_q = J_q / q!`.
    pub fn hermite_coefficients(&self, q_max: u32) -> Result<Vec<f64>> {
        match self {
            TransformSpec::Monomial(b) => monomial_to_hermite(b),
            TransformSpec::Hermite(beta) => Ok(beta.clone()),
            _ => (0..=q_max).map(|q| Ok(hermite_coeff_j(self, q, 2048)?.value / factorial(q))).collect(),
        }
    }

    /// `E[G(Z)²]` by the same quadrature used for the coefficients.
    pub fn l2_norm_sq(&self) -> f64 {
        let rule = crate::moments::gauss_hermite_rule(96);
        match self {
            TransformSpec::Sign => 1.0,
            TransformSpec::Indicator { threshold } => 1.0 - Normal::standard().cdf(*threshold),
            _ => rule.iter().map(|&(z, w)| w * self.eval(z).powi(2)).sum(),
        }
    }
}

/// Hermite coefficients of `Σ b_q x^q` via
/// `x^q = Σ_j q! / (j! 2^j (q-2j)!) H_{q-2j}(x)`.
pub fn monomial_to_hermite(b: &[f64]) -> Result<Vec<f64>> {
    if b.len() > 65 {
        return Err(Error::domain(format!("monomial degree {} exceeds 64", b.len() - 1)));
    }
    let mut beta = vec![0.0; b.len()];
    for (q, &bq) in b.iter().enumerate() {
        if bq == 0.0 {
            continue;
        }
        let qu = q as u32;
        for j in 0..=q / 2 {
            let ju = j as u32;
            let c = factorial(qu) / (factorial(ju) * 2f64.powi(j as i32) * factorial(qu - 2 * ju));
            beta[q - 2 * j] += bq * c;
        }
    }
    Ok(beta)
}

/// Sample mean and unbiased k-statistics with bootstrap standard errors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KStatistics {
    pub n: usize,
    pub mean: f64,
    pub mean_stderr: f64,
    pub k2: f64,
    pub k2_stderr: f64,
    pub k3: f64,
    pub k3_stderr: f64,
    pub k4: f64,
    pub k4_stderr: f64,
}

pub const DEFAULT_BOOTSTRAP: usize = 400;

fn kstats_point(x: &[f64]) -> [f64; 4] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let k2 = n / (n - 1.0) * m2;
    let k3 = n * n / ((n - 1.0) * (n - 2.0)) * m3;
    let k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    [mean, k2, k3, k4]
}

/// k-statistics of `samples` with `resamples` seeded bootstrap replicates.
pub fn k_statistics(samples: &[f64], resamples: usize, seed: u64) -> Result<KStatistics> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::domain(format!("k-statistics need at least 8 samples, got {n}")));
    }
    let point = kstats_point(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; n];
    let mut sums = [0.0f64; 4];
    let mut sq = [0.0f64; 4];
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = samples[rng.gen_range(0..n)];
        }
        let k = kstats_point(&buf);
        for i in 0..4 {
            sums[i] += k[i];
            sq[i] += k[i] * k[i];
        }
    }
    let se = |i: usize| {
        if resamples < 2 {
            return f64::NAN;
        }
        let r = resamples as f64;
        let m = sums[i] / r;
        ((sq[i] - r * m * m) / (r - 1.0)).max(0.0).sqrt()
    };
    Ok(KStatistics {
        n,
        mean: point[0],
        mean_stderr: (point[1] / n as f64).sqrt(),
        k2: point[1],
        k2_stderr: se(1),
        k3: point[2],
        k3_stderr: se(2),
        k4: point[3],
        k4_stderr: se(3),
    })
}

/// Kolmogorov–Smirnov distance between the standardized sample and `N(0,1)`.
///
/// Samples are centred by their mean and scaled by their standard deviation;
/// a constant sample maps to the point mass at zero.
pub fn ks_distance(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 50 {
        return Err(Error::domain(format!("KS distance needs at least 50 samples, got {n}")));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let mut z: Vec<f64> = samples.iter().map(|x| if sd > 0.0 { (x - mean) / sd } else { 0.0 }).collect();
    z.sort_by(f64::total_cmp);
    let normal = Normal::standard();
    Ok(z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal.cdf(v);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max))
}

/// Covariance of two series with its plug-in standard error.
pub fn covariance_with_stderr(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prods.iter().sum::<f64>() / (n - 1.0);
    let var = prods.iter().map(|p| (p - cov).powi(2)).sum::<f64>() / (n - 1.0);
    (cov, (var / n).sqrt())
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let (cxy, _) = covariance_with_stderr(x, y);
    let (cxx, _) = covariance_with_stderr(x, x);
    let (cyy, _) = covariance_with_stderr(y, y);
    cxy / (cxx * cyy).sqrt()
}

/// Standardized `Z_l = Σ β_q h_{l;q}` over a set of realizations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyspectraStatistic {
    pub values: Vec<f64>,
    pub variance: f64,
    pub degenerate: bool,
}

pub fn polyspectra_statistic(samples: &[FunctionalSample], beta: &[f64]) -> Result<PolyspectraStatistic> {
    let raw: Vec<f64> = samples
        .iter()
        .map(|s| {
            beta.iter()
                .enumerate()
                .filter(|(_, b)| **b != 0.0)
                .map(|(q, b)| {
                    let h = if q == 0 { Some(crate::FOUR_PI) } else { s.h_of(q as u32) };
                    h.map(|h| b * h)
                        .ok_or_else(|| Error::domain(format!("h_{{l;{q}}} was not evaluated")))
                })
                .sum::<Result<f64>>()
        })
        .collect::<Result<_>>()?;
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let variance = raw.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let degenerate = variance < 1e-12;
    let sd = variance.sqrt();
    let values = raw.iter().map(|z| if degenerate { 0.0 } else { (z - mean) / sd }).collect();
    Ok(PolyspectraStatistic { values, variance, degenerate })
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}

fn default_defect_orders() -> u32 {
    6
}

/// Everything that determines an experiment's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub l_grid: Vec<usize>,
    pub q_set: Vec<u32>,
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Rings per unit degree of the Defect grid; no Defect when absent.
    #[serde(default)]
    pub defect_resolution: Option<usize>,
    /// Number of odd Hermite orders `2q+1, q = 0..=Q` kept in the Defect prediction.
    #[serde(default = "default_defect_orders")]
    pub defect_orders: u32,
    /// Transform whose polyspectra statistic `Z_l` is reported.
    #[serde(default)]
    pub transform: Option<TransformSpec>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap_resamples: usize,
    /// Thread count; does not affect results.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_realizations < 2 {
            return Err(Error::domain("n_realizations must be at least 2"));
        }
        if self.q_set.is_empty() {
            return Err(Error::domain("q_set must not be empty"));
        }
        if self.l_grid.is_empty() {
            return Err(Error::domain("l_grid must not be empty"));
        }
        Ok(())
    }

    fn tag(&self, l: usize, r: usize) -> SeedTag {
        SeedTag::new(self.master_seed, ((l as u64) << 32) | r as u64)
    }

    fn stat_seed(&self, l: usize, q: u32) -> u64 {
        self.master_seed ^ ((l as u64) << 40) ^ ((q as u64) << 24) ^ 0x5bd1_e995
    }
}

/// Per-(l, q) empirical moments against theory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderRow {
    pub l: usize,
    pub q: u32,
    pub stats: KStatistics,
    pub ks: f64,
    pub exact_variance: f64,
    pub asymptotic_variance: Option<f64>,
    pub variance_ratio: f64,
    pub variance_ratio_stderr: f64,
    /// Fourth-moment bound from the exact variance and the k4 estimate.
    pub np_bound: Option<f64>,
    pub np_bound_clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectRow {
    pub l: usize,
    pub resolution: usize,
    pub stats: KStatistics,
    pub ks: f64,
    /// `Σ_{q ≤ Q} (J_{2q+1} / (2q+1)!)² Var(h_{l;2q+1})`.
    pub predicted_variance: f64,
    pub prediction_orders: u32,
    pub variance_ratio: f64,
    /// `(m, corr(D_l, Σ_{q ≤ m} (J_{2q+1}/(2q+1)!) h_{l;2q+1}))` for every `m`
    /// whose orders were all evaluated.
    pub projection_correlations: Vec<(u32, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyspectraRow {
    pub l: usize,
    pub beta: Vec<f64>,
    pub variance: f64,
    pub variance_stderr: f64,
    pub predicted_variance: f64,
    pub ks: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub orders: Vec<OrderRow>,
    pub defect: Vec<DefectRow>,
    pub polyspectra: Vec<PolyspectraRow>,
}

/// `J_{2q+1}(sign) / (2q+1)!` for `q = 0..=orders`.
pub fn defect_projection_coefficients(orders: u32) -> Result<Vec<f64>> {
    (0..=orders)
        .map(|q| Ok(hermite_coeff_j(&TransformSpec::Sign, 2 * q + 1, 2048)?.value / factorial(2 * q + 1)))
        .collect()
}

/// `Σ_{q ≤ orders} (J_{2q+1}/(2q+1)!)² Var(h_{l;2q+1})`.
pub fn defect_variance_prediction(l: usize, orders: u32) -> Result<f64> {
    Ok(defect_projection_coefficients(orders)?
        .iter()
        .enumerate()
        .map(|(q, c)| c * c * variance_hlq(l, 2 * q as u32 + 1))
        .sum())
}

/// Draws all realizations for one degree, in realization order.
pub fn sample_degree(config: &ExperimentConfig, l: usize) -> Result<Vec<FunctionalSample>> {
    let sampler = FunctionalSampler::new(l, &config.q_set, config.defect_resolution);
    (0..config.n_realizations).into_par_iter().map(|r| sampler.sample(config.tag(l, r))).collect()
}

fn order_row(config: &ExperimentConfig, l: usize, q: u32, h: &[f64], c_q: Option<f64>) -> Result<OrderRow> {
    let stats = k_statistics(h, config.bootstrap_resamples, config.stat_seed(l, q))?;
    let ks = if h.len() >= 50 { ks_distance(h)? } else { f64::NAN };
    let theory = moment_row(l, q, c_q);
    let ratio = stats.k2 / theory.variance;
    let bound = if theory.variance > 0.0 && q > 0 { Some(np_bound(theory.variance, stats.k4, q)?) } else { None };
    Ok(OrderRow {
        l,
        q,
        stats,
        ks,
        exact_variance: theory.variance,
        asymptotic_variance: theory.asymptotic,
        variance_ratio: ratio,
        variance_ratio_stderr: stats.k2_stderr / theory.variance,
        np_bound: bound.map(|b| b.value),
        np_bound_clamped: bound.is_some_and(|b| b.clamped),
    })
}

fn defect_row(config: &ExperimentConfig, l: usize, samples: &[FunctionalSample], coeffs: &[f64]) -> Result<DefectRow> {
    let d: Vec<f64> = samples.iter().map(|s| s.defect.unwrap_or(f64::NAN)).collect();
    let stats = k_statistics(&d, config.bootstrap_resamples, config.stat_seed(l, u32::MAX))?;
    let ks = if d.len() >= 50 { ks_distance(&d)? } else { f64::NAN };
    let predicted: f64 =
        coeffs.iter().enumerate().map(|(q, c)| c * c * variance_hlq(l, 2 * q as u32 + 1)).sum();
    let mut projection_correlations = Vec::new();
    let mut proj = vec![0.0; samples.len()];
    for (m, c) in coeffs.iter().enumerate() {
        let order = 2 * m as u32 + 1;
        if !config.q_set.contains(&order) {
            break;
        }
        for (p, s) in proj.iter_mut().zip(samples) {
            *p += c * s.h_of(order).unwrap();
        }
        if m >= 1 {
            projection_correlations.push((m as u32, correlation(&d, &proj)));
        }
    }
    Ok(DefectRow {
        l,
        resolution: config.defect_resolution.unwrap_or(0),
        stats,
        ks,
        predicted_variance: predicted,
        prediction_orders: config.defect_orders,
        variance_ratio: stats.k2 / predicted,
        projection_correlations,
    })
}

fn polyspectra_row(config: &ExperimentConfig, l: usize, samples: &[FunctionalSample], beta: &[f64]) -> Result<PolyspectraRow> {
    let z = polyspectra_statistic(samples, beta)?;
    let raw_sd = z.variance.sqrt();
    let raw: Vec<f64> = z.values.iter().map(|v| v * raw_sd).collect();
    let stats = k_statistics(&raw, config.bootstrap_resamples, config.stat_seed(l, u32::MAX - 1))?;
    let predicted = beta
        .iter()
        .enumerate()
        .skip(1)
        .map(|(q, b)| b * b * variance_hlq(l, q as u32))
        .sum();
    Ok(PolyspectraRow {
        l,
        beta: beta.to_vec(),
        variance: z.variance,
        variance_stderr: stats.k2_stderr,
        predicted_variance: predicted,
        ks: if z.degenerate || raw.len() < 50 { f64::NAN } else { ks_distance(&z.values)? },
        degenerate: z.degenerate,
    })
}

fn run_inner(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let c_q: Vec<(u32, Option<f64>)> = config
        .q_set
        .iter()
        .map(|&q| {
            let c = match q {
                3 | 5.. => Some(cq_constant(q, DEFAULT_PSI_MAX, DEFAULT_CQ_TOL)?.value),
                _ => None,
            };
            Ok((q, c))
        })
        .collect::<Result<_>>()?;
    let defect_coeffs = match config.defect_resolution {
        Some(_) => defect_projection_coefficients(config.defect_orders)?,
        None => Vec::new(),
    };
    let beta = match &config.transform {
        Some(t) => Some(t.hermite_coefficients(config.q_set.iter().copied().max().unwrap_or(0))?),
        None => None,
    };
    let mut report = ExperimentReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        orders: Vec::new(),
        defect: Vec::new(),
        polyspectra: Vec::new(),
    };
    for &l in &config.l_grid {
        let samples = sample_degree(config, l)?;
        for &(q, c) in &c_q {
            let h: Vec<f64> = samples.iter().map(|s| s.h_of(q).unwrap()).collect();
            report.orders.push(order_row(config, l, q, &h, c)?);
        }
        if config.defect_resolution.is_some() {
            report.defect.push(defect_row(config, l, &samples, &defect_coeffs)?);
        }
        if let Some(beta) = &beta {
            report.polyspectra.push(polyspectra_row(config, l, &samples, beta)?);
        }
    }
    Ok(report)
}

/// Runs the experiment on a pool of `config.workers` threads (all available
/// when unset). The report does not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::domain(format!("thread pool: {e}")))?;
            pool.install(|| run_inner(config))
        }
        None => run_inner(config),
    }
}

/// Defect rows only; forces resolution 4 when the config has none.
pub fn defect_experiment(config: &ExperimentConfig) -> Result<Vec<DefectRow>> {
    if let Some(l) = config.l_grid.iter().find(|l| *l % 2 == 1) {
        return Err(Error::domain(format!("Defect experiments need even l, got {l}")));
    }
    let mut cfg = config.clone();
    cfg.defect_resolution.get_or_insert(4);
    cfg.transform = None;
    Ok(run_experiment(&cfg)?.defect)
}

impl ExperimentReport {
    pub fn orders_csv(&self, trailer: Option<&str>) -> Result<String> {
        let header = [
            "l", "q", "n", "mean", "mean_stderr", "k2", "k2_stderr", "k3", "k3_stderr", "k4", "k4_stderr", "ks",
            "exact_variance", "asymptotic_variance", "variance_ratio", "variance_ratio_stderr", "np_bound",
        ];
        let rows: Vec<Vec<String>> = self
            .orders
            .iter()
            .map(|r| {
                let s = &r.stats;
                vec![
                    r.l.to_string(),
                    r.q.to_string(),
                    s.n.to_string(),
                    fmt_f64(s.mean),
                    fmt_f64(s.mean_stderr),
                    fmt_f64(s.k2),
                    fmt_f64(s.k2_stderr),
                    fmt_f64(s.k3),
                    fmt_f64(s.k3_stderr),
                    fmt_f64(s.k4),
                    fmt_f64(s.k4_stderr),
                    fmt_f64(r.ks),
                    fmt_f64(r.exact_variance),
                    fmt_opt(r.asymptotic_variance),
                    fmt_f64(r.variance_ratio),
                    fmt_f64(r.variance_ratio_stderr),
                    fmt_opt(r.np_bound),
                ]
            })
            .collect();
        csv_string(&header, &rows, trailer)
    }

    pub fn defect_csv(&self, trailer: Option<&str>) -> Result<String> {
        let header = [
            "l", "resolution", "n", "mean", "mean_stderr", "variance", "variance_stderr", "ks", "predicted_variance",
            "variance_ratio",
        ];
        let rows: Vec<Vec<String>> = self
            .defect
            .iter()
            .map(|r| {
                vec![
                    r.l.to_string(),
                    r.resolution.to_string(),
                    r.stats.n.to_string(),
                    fmt_f64(r.stats.mean),
                    fmt_f64(r.stats.mean_stderr),
                    fmt_f64(r.stats.k2),
                    fmt_f64(r.stats.k2_stderr),
                    fmt_f64(r.ks),
                    fmt_f64(r.predicted_variance),
                    fmt_f64(r.variance_ratio),
                ]
            })
            .collect();
        csv_string(&header, &rows, trailer)
    }
}
