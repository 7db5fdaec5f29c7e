//! CSV output of experiment results.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;

use crate::error::Result;
use crate::harness::{ExperimentReport, Method};

/// Formats like C's `%.6g`.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding can bump the exponent (9.999995 → 10.0000).
    let sci = format!("{x:.5e}");
    let exp = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse::<i32>().ok())
        .unwrap_or(exp);
    if !(-4..6).contains(&exp) {
        let (mant, _) = sci.split_once('e').unwrap_or((&sci, ""));
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `step,method,rmse_pos,rmse_vel`; steps are 1-based.
pub fn rmse_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("step,method,rmse_pos,rmse_vel\n");
    for r in &report.reports {
        let vel = r.rmse_velocity();
        for (k, pos) in r.rmse_position().iter().enumerate() {
            let v = vel.get(k).map_or(String::new(), |v| fmt_g(*v));
            let _ = writeln!(out, "{},{},{},{}", k + 1, r.method, fmt_g(*pos), v);
        }
    }
    out
}

/// `Rb,method,pfa,pm` for the detecting methods.
pub fn errors_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("Rb,method,pfa,pm\n");
    for rep in reports {
        for r in &rep.reports {
            if let (Some(pfa), Some(pm)) = (r.p_fa(), r.p_m()) {
                let _ = writeln!(out, "{},{},{},{}", fmt_g(rep.rb), r.method, fmt_g(pfa), fmt_g(pm));
            }
        }
    }
    out
}

/// `Rb,method,avg_tests,bound`. One-by-one gets a nominal row (`K·N`) and
/// an evaluated row (tests actually run before channels tripped).
pub fn tests_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("Rb,method,avg_tests,bound\n");
    for rep in reports {
        for r in &rep.reports {
            let rb = fmt_g(rep.rb);
            match r.method {
                Method::Proposed => {
                    let _ = writeln!(out, "{rb},proposed,{},{}", fmt_g(r.avg_chi2_tests), fmt_g(r.bound));
                }
                Method::OneByOne => {
                    let _ = writeln!(out, "{rb},one_by_one,{},{}", fmt_g(r.nominal_chi2_tests), fmt_g(r.bound));
                    let _ = writeln!(out, "{rb},one_by_one_evaluated,{},{}", fmt_g(r.avg_chi2_tests), fmt_g(r.bound));
                }
                _ => {}
            }
        }
    }
    out
}

/// Wide sweep table: `_1` columns are the one-by-one baseline (its test count
/// is the nominal `K·N`), `_2` the proposed group-testing method.
pub fn sweep_csv(reports: &[ExperimentReport]) -> String {
    let mut out = String::from("Rb,pfa_1,pfa_2,pm_1,pm_2,tests_1,tests_2,bound\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), fmt_g);
    for rep in reports {
        let a = rep.get(Method::OneByOne);
        let b = rep.get(Method::Proposed);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_g(rep.rb),
            opt(a.and_then(|r| r.p_fa())),
            opt(b.and_then(|r| r.p_fa())),
            opt(a.and_then(|r| r.p_m())),
            opt(b.and_then(|r| r.p_m())),
            opt(a.map(|r| r.nominal_chi2_tests)),
            opt(b.map(|r| r.avg_chi2_tests)),
            opt(b.map(|r| r.bound)),
        );
    }
    out
}

/// `step,x0,x1,...` for a single trajectory; step 0 is the initial state.
pub fn trajectory_csv(states: &[DVector<f64>]) -> String {
    let dim = states.first().map_or(0, |s| s.len());
    let mut out = String::from("step");
    for c in 0..dim {
        let _ = write!(out, ",x{c}");
    }
    out.push('\n');
    for (k, s) in states.iter().enumerate() {
        out.push_str(&k.to_string());
        for v in s.iter() {
            out.push(',');
            out.push_str(&fmt_g(*v));
        }
        out.push('\n');
    }
    out
}

/// `step,sensor,z0,...` with 1-based steps and sensors.
pub fn measurements_csv(meas: &[Vec<DVector<f64>>]) -> String {
    let dim = meas.first().and_then(|m| m.first()).map_or(0, |z| z.len());
    let mut out = String::from("step,sensor");
    for c in 0..dim {
        let _ = write!(out, ",z{c}");
    }
    out.push('\n');
    for (k, zs) in meas.iter().enumerate() {
        for (i, z) in zs.iter().enumerate() {
            let _ = write!(out, "{},{}", k + 1, i + 1);
            for v in z.iter() {
                out.push(',');
                out.push_str(&fmt_g(*v));
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}
