//! CSV, manifest and plot-script writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use netvar_core::variance::{DVerdict, EVerdict};
use netvar_core::{FitResult, FrequencyGrid, ImmersedNetwork, SignalRecord};

use crate::error::{Error, Result};
use crate::experiment::{ResultBundle, SweepPoint};

/// `t,w1..wL,r1..rL`, one row per sample.
pub fn signal_csv(rec: &SignalRecord) -> String {
    let l = rec.w.len();
    let mut s = String::from("t");
    for j in 1..=l {
        let _ = write!(s, ",w{j}");
    }
    for j in 1..=l {
        let _ = write!(s, ",r{j}");
    }
    s.push('\n');
    for t in 0..rec.len() {
        let _ = write!(s, "{}", t as f64 * rec.sample_time);
        for seq in rec.w.iter().chain(&rec.r) {
            let _ = write!(s, ",{}", seq[t]);
        }
        s.push('\n');
    }
    s
}

/// `omega,phi_breve_v,phi_v,abs_G<j><k>...` over the lumped inputs.
pub fn immersion_csv(imm: &ImmersedNetwork) -> String {
    let j = imm.predictor_set.output();
    let mut s = String::from("omega,phi_breve_v,phi_v");
    for k in imm.lumped.keys() {
        let _ = write!(s, ",abs_G{j}{k}");
    }
    s.push('\n');
    for (i, w) in imm.grid.points().iter().enumerate() {
        let _ = write!(s, "{w},{},{}", imm.phi_breve_v[i], imm.phi_v[i]);
        for l in imm.lumped.values() {
            let _ = write!(s, ",{}", l.response[i].norm());
        }
        s.push('\n');
    }
    s
}

/// `omega,re,im,abs,delta_var` for an estimated module.
pub fn response_csv(grid: &FrequencyGrid, response: &[Complex64], delta: &[f64]) -> String {
    let mut s = String::from("omega,re,im,abs,delta_var\n");
    for (i, w) in grid.points().iter().enumerate() {
        let g = response[i];
        let _ = writeln!(s, "{w},{},{},{},{}", g.re, g.im, g.norm(), delta[i]);
    }
    s
}

pub fn fit_report(name: &str, inputs: &[usize], fit: &FitResult) -> String {
    let ids: Vec<String> = inputs.iter().map(|k| format!("w{k}")).collect();
    format!("# setup {name}, inputs {}\n{fit}", ids.join(","))
}

/// Text manifest: hashes, seeds and exclusions as comment lines followed by
/// the canonical config, so a manifest is itself a runnable config.
pub fn manifest_text(b: &ResultBundle) -> String {
    let mut s = String::from("# netvar manifest\n");
    let _ = writeln!(s, "# config_sha256 = {}", b.config_hash);
    let cfg = &b.config;
    if b.fitted {
        let last = cfg.seed.wrapping_add(cfg.runs as u64 - 1);
        let _ = writeln!(s, "# seeds = {}..={} (run i uses seed {} + i)", cfg.seed, last, cfg.seed);
    } else {
        s.push_str("# analytic only, no runs\n");
    }
    for p in &b.points {
        let _ = write!(s, "# point {} included={} excluded={}", p.label(), p.included.len(), p.excluded.len());
        if let Some(a) = &p.aborted {
            let _ = write!(s, " aborted=\"{a}\"");
        }
        s.push('\n');
        for (seed, why) in &p.excluded {
            let _ = writeln!(s, "# excluded {} seed={seed} reason=\"{why}\"", p.label());
        }
        for (seed, h) in &p.record_hashes {
            let _ = writeln!(s, "# record {} seed={seed} sha256={h}", p.label());
        }
    }
    s.push_str(&b.config_text);
    s
}

fn d_name(v: DVerdict) -> &'static str {
    match v {
        DVerdict::ABetter => "first",
        DVerdict::BBetter => "second",
        DVerdict::Equal => "equal",
    }
}

fn e_name(v: EVerdict) -> &'static str {
    match v {
        EVerdict::ADominates => "first",
        EVerdict::BDominates => "second",
        EVerdict::Incomparable => "incomparable",
        EVerdict::Equal => "equal",
    }
}

/// One row per sweep point and setup.
pub fn summary_csv(b: &ResultBundle) -> String {
    let med = b.grid.median_index();
    let mut s = String::from(
        "point,setup,n_params,included,excluded,converged,whiteness_pass,mean_iterations,mean_sigma2,\
         median_omega,sample_cov,asymptotic_cov,delta_cov,d_optimality,e_optimality\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for p in &b.points {
        for su in &p.setups {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                p.label(),
                su.name,
                su.n_params,
                p.included.len(),
                p.excluded.len(),
                su.converged,
                su.whiteness_pass,
                su.mean_iterations,
                su.mean_sigma2,
                b.grid.points()[med],
                opt(su.sample.as_ref().map(|c| c.values[med])),
                su.asymptotic.values[med],
                opt(su.delta.as_ref().map(|c| c.values[med])),
                p.d_optimality.map_or("", |d| d_name(d.verdict)),
                p.e_optimality.map_or("", e_name),
            );
        }
    }
    s
}

/// `omega,cov_<setup>...` from the sample curves of one sweep point.
pub fn sample_comparison_csv(b: &ResultBundle, p: &SweepPoint) -> Result<String> {
    let mut curves = Vec::new();
    for su in &p.setups {
        let c = su
            .sample
            .as_ref()
            .ok_or_else(|| Error::MissingCurve(format!("sample covariance of setup {} at {}", su.name, p.label())))?;
        curves.push(c);
    }
    let mut s = String::from("omega");
    for su in &p.setups {
        let _ = write!(s, ",cov_{}", su.name);
    }
    s.push('\n');
    for (i, w) in b.grid.points().iter().enumerate() {
        let _ = write!(s, "{w}");
        for c in &curves {
            let _ = write!(s, ",{}", c.values[i]);
        }
        s.push('\n');
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotData {
    SampleCovariance,
    Condition,
    Asymptotic,
    DeltaMethod,
    Summary,
    Manifest,
    Script,
    All,
}

fn write(dir: &Path, name: &str, contents: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    out.push(path);
    Ok(())
}

/// Writes the requested files into `dir` and returns their paths.
pub fn export_plotdata(b: &ResultBundle, which: PlotData, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let all = which == PlotData::All;
    let mut out = Vec::new();
    let cfg = &b.config;
    if which == PlotData::SampleCovariance || (all && b.fitted) {
        for p in &b.points {
            let csv = sample_comparison_csv(b, p)?;
            write(dir, &format!("{}_{}.csv", cfg.sample_prefix, p.label()), &csv, &mut out)?;
        }
    }
    if which == PlotData::Condition || all {
        for p in &b.points {
            let c = p
                .condition
                .as_ref()
                .ok_or_else(|| Error::MissingCurve(format!("condition curve at {}", p.label())))?;
            write(dir, &format!("{}_{}.csv", cfg.condition_prefix, p.label()), &c.to_csv(), &mut out)?;
        }
    }
    if which == PlotData::Asymptotic || all {
        for p in &b.points {
            for su in &p.setups {
                write(dir, &format!("asymptotic_{}_{}.csv", p.label(), su.name), &su.asymptotic.to_csv(), &mut out)?;
            }
        }
    }
    if which == PlotData::DeltaMethod || (all && b.fitted) {
        for p in &b.points {
            for su in &p.setups {
                let c = su
                    .delta
                    .as_ref()
                    .ok_or_else(|| Error::MissingCurve(format!("delta-method curve of setup {} at {}", su.name, p.label())))?;
                write(dir, &format!("delta_{}_{}.csv", p.label(), su.name), &c.to_csv(), &mut out)?;
            }
        }
    }
    if which == PlotData::Summary || all {
        write(dir, "summary.csv", &summary_csv(b), &mut out)?;
    }
    if which == PlotData::Manifest || all {
        write(dir, "manifest.txt", &manifest_text(b), &mut out)?;
    }
    if which == PlotData::Script || all {
        write(dir, "plot.gp", &plot_script(b), &mut out)?;
    }
    Ok(out)
}

/// Gnuplot stub with one page per CSV.
pub fn plot_script(b: &ResultBundle) -> String {
    let cfg = &b.config;
    let mut s = String::from(
        "# gnuplot stub; run `gnuplot plot.gp` in this directory.\n\
         # <sample>_<point>.csv:    omega, cov_<setup>... (Monte-Carlo sample covariance of the target module)\n\
         # <condition>_<point>.csv: omega, condition_value, sign (negative: second setup has lower variance)\n\
         # asymptotic_<point>_<setup>.csv: omega, value, label, n_params, N\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set logscale y\n\
         set xlabel 'omega [rad/sample]'\n\
         set terminal pngcairo size 800,500\n",
    );
    for p in &b.points {
        if b.fitted {
            let name = format!("{}_{}", cfg.sample_prefix, p.label());
            let _ = writeln!(s, "set output '{name}.png'");
            let cols: Vec<String> = (0..p.setups.len())
                .map(|i| format!("'{name}.csv' using 1:{} with lines", i + 2))
                .collect();
            let _ = writeln!(s, "plot {}", cols.join(", "));
        }
        let name = format!("{}_{}", cfg.condition_prefix, p.label());
        let _ = writeln!(s, "unset logscale y\nset output '{name}.png'\nplot '{name}.csv' using 1:2 with lines\nset logscale y");
    }
    s
}
