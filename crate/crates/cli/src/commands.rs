//! Subcommand bodies.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use sphchaos::mcstats::{ExperimentConfig, TransformSpec};
use sphchaos::output::{csv_string, fmt_f64, fmt_opt, to_json_string};
use sphchaos::{diagrams, moments, specfun, wigner};

use crate::args::{
    Command, Common, CqArgs, Cum4Args, Format, McArgs, MomentsArgs, SpecFn, SpecfunArgs, WignerArgs,
};
use crate::manifest::{self, OutputDigest, RunManifest};
use crate::CliError;

/// Rendered results: the primary text plus extra files written next to `--out`.
struct Rendered {
    primary: String,
    extra: Vec<(&'static str, String)>,
    seed: Option<u64>,
}

impl Rendered {
    fn single(primary: String) -> Self {
        Self { primary, extra: Vec::new(), seed: None }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    let name = command.name();
    let (rendered, flags, common) = match &command {
        Command::Specfun(a) => (specfun_cmd(a)?, flags_of(a)?, &a.common),
        Command::Wigner(a) => (wigner_cmd(a)?, flags_of(a)?, &a.common),
        Command::Moments(a) => (moments_cmd(a)?, flags_of(a)?, &a.common),
        Command::Cq(a) => (cq_cmd(a)?, flags_of(a)?, &a.common),
        Command::Mc(a) => (mc_cmd(a)?, flags_of(a)?, &a.common),
        Command::Cum4(a) => (cum4_cmd(a)?, flags_of(a)?, &a.common),
    };
    let mut outputs = Vec::new();
    match &common.out {
        Some(out) => {
            write_file(out, &rendered.primary)?;
            outputs.push(OutputDigest::of(&out.display().to_string(), &rendered.primary));
            for (suffix, text) in &rendered.extra {
                let mut p = out.clone().into_os_string();
                p.push(suffix);
                let p = PathBuf::from(p);
                write_file(&p, text)?;
                outputs.push(OutputDigest::of(&p.display().to_string(), text));
            }
        }
        None => {
            std::io::stdout()
                .write_all(rendered.primary.as_bytes())
                .map_err(|e| CliError::io(e, "stdout".as_ref()))?;
            outputs.push(OutputDigest::of("-", &rendered.primary));
        }
    }
    let run = RunManifest {
        subcommand: name.to_string(),
        flags,
        master_seed: rendered.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs,
    };
    let text = to_json_string(&run)?;
    match manifest::manifest_path(common) {
        Some(p) => write_file(&p, &text),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

fn flags_of<T: Serialize>(args: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(args).map_err(|e| CliError::domain(e.to_string()))
}

fn write_file(path: &std::path::Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(e, path))
}

fn trailer(common: &Common) -> Option<String> {
    Some(manifest::reference(common))
}

fn specfun_cmd(a: &SpecfunArgs) -> Result<Rendered, CliError> {
    let header = ["function", "l", "m", "q", "arg", "value"];
    let mut rows = Vec::new();
    let blank = String::new;
    for &t in &a.t {
        match a.function {
            SpecFn::Legendre => {
                let v = specfun::legendre_eval(a.l, t)?;
                rows.push(vec!["legendre".into(), a.l.to_string(), blank(), blank(), fmt_f64(t), fmt_f64(v)]);
            }
            SpecFn::Hermite => {
                let v = specfun::hermite_prob(a.q, t);
                rows.push(vec!["hermite".into(), blank(), blank(), a.q.to_string(), fmt_f64(t), fmt_f64(v)]);
            }
            SpecFn::J0 => {
                let v = specfun::bessel_j0(t)?;
                rows.push(vec!["j0".into(), blank(), blank(), blank(), fmt_f64(t), fmt_f64(v)]);
            }
            SpecFn::Ylm => {
                let (lo, hi) = match a.m {
                    Some(m) if m > a.l => return Err(CliError::domain(format!("m = {m} exceeds l = {}", a.l))),
                    Some(m) => (m, m),
                    None => (0, a.l),
                };
                let row = specfun::sph_basis_row(a.l, hi, t)?;
                for (m, v) in row.iter().enumerate().skip(lo) {
                    rows.push(vec!["ylm".into(), a.l.to_string(), m.to_string(), blank(), fmt_f64(t), fmt_f64(*v)]);
                }
            }
        }
    }
    Ok(Rendered::single(csv_string(&header, &rows, trailer(&a.common).as_deref())?))
}

fn nonneg(name: &str, v: i64) -> Result<usize, CliError> {
    usize::try_from(v).map_err(|_| CliError::domain(format!("{name} must be non-negative, got {v}")))
}

fn small_m(name: &str, v: i64) -> Result<i32, CliError> {
    i32::try_from(v).map_err(|_| CliError::domain(format!("{name} = {v} is out of range")))
}

fn wigner_cmd(a: &WignerArgs) -> Result<Rendered, CliError> {
    if let Some(l) = a.table {
        let l = nonneg("table", l)?;
        let header = ["l", "L", "threej", "weighted_square", "gamma"];
        let rows: Vec<Vec<String>> = (0..=2 * l)
            .map(|big_l| {
                let z = wigner::threej_zero(l, l, big_l);
                let gamma = (big_l % 2 == 0 && big_l >= 2 && big_l + 2 <= 2 * l)
                    .then(|| wigner::gamma_factor(l, big_l));
                vec![
                    l.to_string(),
                    big_l.to_string(),
                    fmt_f64(z),
                    fmt_f64((2 * big_l + 1) as f64 * z * z),
                    fmt_opt(gamma),
                ]
            })
            .collect();
        return Ok(Rendered::single(csv_string(&header, &rows, trailer(&a.common).as_deref())?));
    }
    let (Some(l1), Some(l2), Some(l3)) = (a.l1, a.l2, a.l3) else {
        return Err(CliError::domain("give --l1 --l2 --l3 or --table"));
    };
    let (l1, l2, l3) = (nonneg("l1", l1)?, nonneg("l2", l2)?, nonneg("l3", l3)?);
    let (m1, m2, m3) = (small_m("m1", a.m1)?, small_m("m2", a.m2)?, small_m("m3", a.m3)?);
    let s = wigner::threej_symbol(l1, l2, l3, m1, m2, m3);
    let zero_by = s.zero_by.map(|r| format!("{r:?}").to_lowercase()).unwrap_or_default();
    let header = ["l1", "l2", "l3", "m1", "m2", "m3", "value", "zero_by"];
    let row = vec![
        l1.to_string(),
        l2.to_string(),
        l3.to_string(),
        m1.to_string(),
        m2.to_string(),
        m3.to_string(),
        fmt_f64(s.value),
        zero_by,
    ];
    Ok(Rendered::single(csv_string(&header, &[row], trailer(&a.common).as_deref())?))
}

fn moments_cmd(a: &MomentsArgs) -> Result<Rendered, CliError> {
    let table = moments::moment_table(&a.l_grid, a.q)?;
    let text = match a.format {
        Format::Json => to_json_string(&table)?,
        Format::Csv => {
            let header = ["l", "q", "moment", "variance", "asymptotic", "ratio"];
            let rows: Vec<Vec<String>> = table
                .iter()
                .map(|r| {
                    vec![
                        r.l.to_string(),
                        r.q.to_string(),
                        fmt_f64(r.moment),
                        fmt_f64(r.variance),
                        fmt_opt(r.asymptotic),
                        fmt_opt(r.ratio),
                    ]
                })
                .collect();
            csv_string(&header, &rows, trailer(&a.common).as_deref())?
        }
    };
    Ok(Rendered::single(text))
}

fn cq_cmd(a: &CqArgs) -> Result<Rendered, CliError> {
    Ok(Rendered::single(to_json_string(&moments::cq_constant(a.q, a.psi_max, a.tol)?)?))
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::domain(format!("bad coefficient {v:?}: {e}"))))
        .collect()
}

fn parse_transform(s: &str) -> Result<TransformSpec, CliError> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "sign" => Ok(TransformSpec::Sign),
        "indicator" => {
            let threshold = if rest.is_empty() { 0.0 } else { parse_list(rest)?[0] };
            Ok(TransformSpec::Indicator { threshold })
        }
        "hermite" => Ok(TransformSpec::Hermite(parse_list(rest)?)),
        "monomial" => Ok(TransformSpec::Monomial(parse_list(rest)?)),
        _ => Err(CliError::domain(format!("unknown transform {s:?}"))),
    }
}

fn mc_cmd(a: &McArgs) -> Result<Rendered, CliError> {
    let config = ExperimentConfig {
        l_grid: a.l_grid.clone(),
        q_set: a.q_set.clone(),
        n_realizations: a.n,
        master_seed: a.seed,
        defect_resolution: a.defect_res,
        defect_orders: a.defect_orders,
        transform: a.transform.as_deref().map(parse_transform).transpose()?,
        bootstrap_resamples: a.bootstrap,
        workers: a.workers,
    };
    let report = sphchaos::mcstats::run_experiment(&config)?;
    let t = trailer(&a.common);
    let mut extra = vec![(".orders.csv", report.orders_csv(t.as_deref())?)];
    if !report.defect.is_empty() {
        extra.push((".defect.csv", report.defect_csv(t.as_deref())?));
    }
    Ok(Rendered { primary: to_json_string(&report)?, extra, seed: Some(a.seed) })
}

fn cum4_cmd(a: &Cum4Args) -> Result<Rendered, CliError> {
    let report = diagrams::diagram_report(a.l, a.q, a.samples, a.seed)?;
    Ok(Rendered { primary: to_json_string(&report)?, extra: Vec::new(), seed: Some(a.seed) })
}
