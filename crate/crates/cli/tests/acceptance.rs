//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Runs without the libtest harness so the lines always reach the terminal.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use sphchaos::diagrams::{a_sums_q4, diagram_report, enumerate_eta};
use sphchaos::mcstats::{run_experiment, ExperimentConfig, ExperimentReport};
use sphchaos::moments::{cq_constant, legendre_moment, variance_hlq, DEFAULT_PSI_MAX};
use sphchaos::wigner::{gamma_factor, threej_zero, threej_zero_power_sum};
use sphchaos::{Error, FOUR_PI};

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(l_grid: Vec<usize>, q_set: Vec<u32>, n: usize) -> ExperimentConfig {
    ExperimentConfig {
        l_grid,
        q_set,
        n_realizations: n,
        master_seed: SEED,
        defect_resolution: None,
        defect_orders: 6,
        transform: None,
        bootstrap_resamples: 400,
        workers: None,
    }
}

fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    run_experiment(cfg).expect("experiment failed")
}

fn exact_identities() -> Outcome {
    const TOL: f64 = 1e-10;
    let mut worst = (0.0f64, 0.0f64);
    for l in (2..=100).step_by(2) {
        let z = threej_zero(l, l, l);
        worst.0 = worst.0.max((legendre_moment(l, 3) - z * z).abs());
        worst.1 = worst.1.max((legendre_moment(l, 4) - threej_zero_power_sum(l, 4)).abs());
    }
    outcome(
        worst.0 < TOL && worst.1 < TOL,
        format!("max |P^3 - 3j^2| = {:.1e}, max |P^4 - sum 3j^4| = {:.1e} (tol {TOL:.0e})", worst.0, worst.1),
    )
}

fn cubic_variance_limit() -> Outcome {
    const TOL: f64 = 0.02;
    let l = 1000usize;
    let scaled = (l * l) as f64 * variance_hlq(l, 3) / (FOUR_PI * FOUR_PI);
    let target = 12.0 / (PI * 3f64.sqrt());
    let rel = (scaled / target - 1.0).abs();
    outcome(rel < TOL, format!("l^2 Var/(4pi)^2 = {scaled:.5} vs {target:.5}, rel {rel:.4} (tol {TOL})"))
}

fn quartic_log_growth() -> Outcome {
    const TOL: f64 = 0.10;
    let pts: Vec<(f64, f64)> = (8..=13)
        .map(|k| {
            let l = 1usize << k;
            ((l as f64).ln(), (l * l) as f64 * legendre_moment(l, 4))
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let alpha = sxy / sxx;
    let target = 3.0 / (2.0 * PI * PI);
    let rel = (alpha / target - 1.0).abs();
    outcome(rel < TOL, format!("slope {alpha:.6} vs {target:.6}, rel {rel:.4} (tol {TOL})"))
}

fn cq_oracle() -> Outcome {
    const TOL: f64 = 5e-4;
    let target = 2.0 / (PI * 3f64.sqrt());
    let c3 = cq_constant(3, DEFAULT_PSI_MAX, 1e-5).map(|c| c.value).unwrap_or(f64::NAN);
    let c4_undefined = matches!(cq_constant(4, DEFAULT_PSI_MAX, 1e-5), Err(Error::Undefined(_)));
    outcome(
        (c3 - target).abs() < TOL && c4_undefined,
        format!("c_3 = {c3:.7} vs {target:.7} (tol {TOL:.0e}); c_4 undefined: {c4_undefined}"),
    )
}

fn chi_square_chain() -> Outcome {
    const TOL: f64 = 1e-10;
    let mut worst = 0.0f64;
    for l in [2usize, 10, 50] {
        let got = diagram_report(l, 2, 1000, SEED).expect("q = 2 report").cum4;
        let want = 48.0 * FOUR_PI.powi(4) / ((2 * l + 1) as f64).powi(3);
        worst = worst.max((got / want - 1.0).abs());
    }
    let fams: Vec<_> = enumerate_eta(2).expect("q = 2 families").into_iter().filter(|f| f.connected).collect();
    let mult: f64 = fams.iter().map(|f| f.multiplicity).sum();
    outcome(
        worst < TOL && fams.len() == 3 && mult == 48.0,
        format!("max rel err {worst:.1e} (tol {TOL:.0e}); {} connected families, multiplicity {mult}", fams.len()),
    )
}

fn variance_concordance() -> Outcome {
    const K: f64 = 3.0;
    let report = run(&config(vec![50], vec![2, 3, 4], 2000));
    let mut pass = true;
    let parts: Vec<String> = report
        .orders
        .iter()
        .map(|r| {
            let z = (r.stats.k2 - r.exact_variance) / r.stats.k2_stderr;
            pass &= z.abs() < K;
            format!("q={} z={z:+.2}", r.q)
        })
        .collect();
    outcome(pass, format!("l=50 N=2000: {} (tol {K} stderr)", parts.join(", ")))
}

fn clt_trend() -> Outcome {
    const KS_MAX: f64 = 0.08;
    let report = run(&config(vec![8, 32, 128], vec![3], 4000));
    let ks: Vec<f64> = report.orders.iter().map(|r| r.ks).collect();
    let monotone = ks.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        monotone && ks[2] < KS_MAX,
        format!("KS at l=8,32,128: {:.4}, {:.4}, {:.4} (monotone {monotone}, last < {KS_MAX})", ks[0], ks[1], ks[2]),
    )
}

fn cumulant_decay() -> Outcome {
    const K: f64 = 3.0;
    let plan = [(8usize, 200_000usize), (16, 60_000), (32, 30_000)];
    let scaled: Vec<(f64, f64)> = plan
        .iter()
        .map(|&(l, n)| {
            let mut cfg = config(vec![l], vec![5], n);
            cfg.bootstrap_resamples = 200;
            let r = &run(&cfg).orders[0];
            let s = (l as f64).powi(4);
            (r.stats.k4.abs() * s, r.stats.k4_stderr * s)
        })
        .collect();
    let decreasing = scaled.windows(2).all(|w| w[1].0 < w[0].0);
    let separated = scaled[0].0 - K * scaled[0].1 > scaled[2].0 + K * scaled[2].1;
    let parts: Vec<String> = scaled.iter().map(|(v, s)| format!("{v:.3e}±{s:.1e}")).collect();
    outcome(
        decreasing && separated,
        format!("|k4| l^4 at l=8,16,32: {} (decreasing {decreasing}, 3-stderr separated {separated})", parts.join(", ")),
    )
}

fn quartic_wigner_sums() -> Outcome {
    const RATIO_MAX: f64 = 10.0;
    let (mut a2_lo, mut a2_hi) = (f64::INFINITY, 0.0f64);
    let (mut a1_lo, mut a1_hi) = (f64::INFINITY, 0.0f64);
    for l in (16..=512).step_by(2) {
        let (a1, a2) = a_sums_q4(l).expect("even l");
        let lf = l as f64;
        let s2 = a2 * lf.powi(4);
        let s1 = a1 * lf.powi(5) / lf.ln().powi(2);
        a2_lo = a2_lo.min(s2);
        a2_hi = a2_hi.max(s2);
        a1_lo = a1_lo.min(s1);
        a1_hi = a1_hi.max(s1);
    }
    let pass = a2_lo >= 0.05 && a2_hi <= 10.0 && a1_hi / a1_lo < RATIO_MAX;
    outcome(
        pass,
        format!(
            "A2 l^4 in [{a2_lo:.4}, {a2_hi:.4}] (need [0.05, 10]); A1 l^5/log^2 l max/min {:.3} (< {RATIO_MAX})",
            a1_hi / a1_lo
        ),
    )
}

fn gamma_bound() -> Outcome {
    let (mut lo, mut hi, mut violations) = (f64::INFINITY, 0.0f64, 0usize);
    for l in (2..=512).step_by(2) {
        for big_l in (2..=2 * l - 2).step_by(2) {
            let g = gamma_factor(l, big_l);
            lo = lo.min(g);
            hi = hi.max(g);
            if !(0.5..=1.6).contains(&g) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("gamma in [{lo:.5}, {hi:.5}], {violations} outside [1/2, 8/5]"))
}

fn defect_consistency() -> Outcome {
    const K: f64 = 3.0;
    const VAR_TOL: f64 = 0.15;
    const KS_MAX: f64 = 0.1;
    let mut cfg = config(vec![64], vec![1], 2000);
    cfg.defect_resolution = Some(4);
    let d = &run(&cfg).defect[0];
    let z = d.stats.mean / d.stats.mean_stderr;
    let rel = (d.variance_ratio - 1.0).abs();
    outcome(
        z.abs() < K && rel < VAR_TOL && d.ks < KS_MAX,
        format!(
            "mean/stderr {z:+.2} (< {K}); Var/V_pred {:.4} (tol {VAR_TOL}); KS {:.4} (< {KS_MAX})",
            d.variance_ratio, d.ks
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let outputs: Vec<Vec<Vec<u8>>> = [1, 4, 16]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("w{w}.json"));
            let status = Command::new(env!("CARGO_BIN_EXE_sphchaos"))
                .args(["mc", "--l-grid", "32", "--q-set", "2,3,4,5", "--n", "500", "--defect-res", "4"])
                .args(["--transform", "hermite:0,0,1,0.5", "--seed", &SEED.to_string()])
                .args(["--workers", &w.to_string(), "--manifest", dir.path().join("m.json").to_str().unwrap()])
                .arg("--out")
                .arg(&out)
                .status()
                .expect("run sphchaos");
            assert!(status.success());
            [".json", ".json.orders.csv", ".json.defect.csv"]
                .iter()
                .map(|suffix| std::fs::read(dir.path().join(format!("w{w}{suffix}"))).expect("read output"))
                .collect()
        })
        .collect();
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let bytes: usize = outputs[0].iter().map(Vec::len).sum();
    outcome(same, format!("workers 1, 4, 16: byte-identical {same} ({bytes} bytes per run)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("exact Legendre/3j identities", exact_identities),
        ("cubic variance limit", cubic_variance_limit),
        ("quartic variance log growth", quartic_log_growth),
        ("c_3 oracle and c_4 divergence", cq_oracle),
        ("chi-square diagram chain", chi_square_chain),
        ("Monte Carlo variance concordance", variance_concordance),
        ("CLT trend for h_l;3", clt_trend),
        ("fourth-cumulant decay for h_l;5", cumulant_decay),
        ("q=4 reduced Wigner sums", quartic_wigner_sums),
        ("gamma bound", gamma_bound),
        ("Defect self-consistency", defect_consistency),
        ("worker-count determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("[{tag}] {:>2} {name}: {} [{:.1} s]", i + 1, o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
