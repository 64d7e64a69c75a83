//! Summary metrics and on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use olla_core::constraints::violation_summary;
use olla_core::metrics::{cpu_per_ess, energy_distance, ess, w2_squared, MIN_ESS_LENGTH};
use serde_json::{json, Map, Value};

use crate::runner::Experiment;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// A retained sample tagged with its chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub chain: usize,
    pub step: usize,
    pub x: Vec<f64>,
}

/// Summary of an experiment; `timing` holds every run-to-run varying field.
pub struct Report {
    pub samples: Vec<SampleRow>,
    /// `(step, mean |h|, mean max g⁺)` averaged over the chains alive at
    /// that step.
    pub violations: Vec<(usize, f64, f64)>,
    pub summary: Value,
    pub all_diverged: bool,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Minimum over coordinates of the ESS summed across chains; chains shorter
/// than the ESS minimum length are skipped.
fn pooled_min_ess(exp: &Experiment) -> Result<Option<f64>> {
    let d = exp.problem.dim;
    let mut per_coord = vec![0.0; d];
    let mut any = false;
    for run in &exp.chains {
        if run.retained.len() < MIN_ESS_LENGTH {
            continue;
        }
        any = true;
        for (j, acc) in per_coord.iter_mut().enumerate() {
            let col: Vec<f64> = run.retained.iter().map(|r| r.x[j]).collect();
            *acc += ess(&col)?;
        }
    }
    Ok(any.then(|| per_coord.iter().copied().fold(f64::INFINITY, f64::min)))
}

/// Reads a `samples.csv` file, returning its points in file order.
pub fn read_samples(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .with_context(|| format!("{} is empty", path.display()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "chain" || cols[1] != "step" {
        bail!("{}: expected header `chain,step,x0,...`", path.display());
    }
    let d = cols.len() - 2;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            bail!(
                "{}:{}: expected {} columns, got {}",
                path.display(),
                i + 2,
                d + 2,
                fields.len()
            );
        }
        let x = fields[2..]
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{}: bad number", path.display(), i + 2))?;
        out.push(x);
    }
    Ok(out)
}

/// W2² and energy distance between two sample sets. W2 needs equal sizes,
/// so the larger set is truncated to its leading rows.
pub fn compare_samples(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Value> {
    if a.is_empty() || b.is_empty() {
        bail!("cannot compare empty sample sets");
    }
    let n = a.len().min(b.len());
    Ok(json!({
        "n_a": a.len(),
        "n_b": b.len(),
        "n_w2": n,
        "w2_squared": w2_squared(&a[..n], &b[..n])?,
        "energy_distance": energy_distance(a, b)?,
    }))
}

/// Computes all summary metrics of an experiment.
pub fn build_report(exp: &Experiment) -> Result<Report> {
    let cfg = &exp.config;
    let samples: Vec<SampleRow> = exp
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, run)| {
            run.retained.iter().map(move |r| SampleRow {
                chain: c,
                step: r.step,
                x: r.x.clone(),
            })
        })
        .collect();
    let points: Vec<Vec<f64>> = samples.iter().map(|s| s.x.clone()).collect();

    let longest = exp
        .chains
        .iter()
        .map(|r| r.violations.len())
        .max()
        .unwrap_or(0);
    let violations = (0..longest)
        .map(|k| {
            let alive = || exp.chains.iter().filter_map(|r| r.violations.get(k));
            (
                k,
                mean(alive().map(|v| v.mean_abs_h)).unwrap_or(f64::NAN),
                mean(alive().map(|v| v.max_g_plus)).unwrap_or(f64::NAN),
            )
        })
        .collect();

    let diverged: Vec<Value> = exp
        .chains
        .iter()
        .enumerate()
        .filter_map(|(c, r)| {
            r.diverged
                .as_ref()
                .map(|d| json!({"chain": c, "step": d.step, "reason": d.reason}))
        })
        .collect();
    let all_diverged = diverged.len() == exp.chains.len();
    let total = |f: fn(&olla_core::sampler::ChainStats) -> usize| {
        exp.chains.iter().map(|r| f(&r.stats)).sum::<usize>()
    };

    let mut metrics = Map::new();
    let (h, g) = if points.is_empty() {
        (None, None)
    } else {
        let v = violation_summary(&exp.problem.constraints, &points)?;
        (Some(v.mean_abs_h), Some(v.max_g_plus))
    };
    metrics.insert("mean_abs_h".into(), json!(h));
    metrics.insert("mean_max_g_plus".into(), json!(g));
    let min_ess = pooled_min_ess(exp)?;
    metrics.insert("min_ess".into(), json!(min_ess));
    let mut observables = Map::new();
    if !points.is_empty() {
        for (name, v) in exp.problem.observe(&points) {
            observables.insert(name, json!(v));
        }
    }
    metrics.insert("observables".into(), Value::Object(observables));
    let (mut w2, mut energy) = (Value::Null, Value::Null);
    if let Some(path) = &cfg.reference {
        let reference = read_samples(path)?;
        if !points.is_empty() {
            let c = compare_samples(&points, &reference)?;
            w2 = c["w2_squared"].clone();
            energy = c["energy_distance"].clone();
        }
    }
    metrics.insert("w2_squared".into(), w2);
    metrics.insert("energy_distance".into(), energy);

    let cpe = min_ess.and_then(|e| cpu_per_ess(exp.cpu_seconds, e).ok());
    let summary = json!({
        "version": VERSION,
        "config": cfg.to_json(),
        "dim": exp.problem.dim,
        "retained_samples": samples.len(),
        "diverged_chains": diverged.len(),
        "all_diverged": all_diverged,
        "divergences": diverged,
        "accepted": total(|s| s.accepted),
        "rejected": total(|s| s.rejected),
        "newton_failures": total(|s| s.failures),
        "metrics": Value::Object(metrics),
        "timing": {
            "cpu_seconds": exp.cpu_seconds,
            "wall_seconds": exp.wall_seconds,
            "cpu_per_ess": cpe,
        },
    });
    Ok(Report {
        samples,
        violations,
        summary,
        all_diverged,
    })
}

fn csv_float(out: &mut String, v: f64) {
    // shortest representation that parses back to the same f64
    write!(out, "{v}").expect("writing to a String cannot fail");
}

pub fn samples_csv(samples: &[SampleRow], dim: usize) -> String {
    let mut s = String::from("chain,step");
    for j in 0..dim {
        write!(s, ",x{j}").unwrap();
    }
    s.push('\n');
    for row in samples {
        write!(s, "{},{}", row.chain, row.step).unwrap();
        for &v in &row.x {
            s.push(',');
            csv_float(&mut s, v);
        }
        s.push('\n');
    }
    s
}

pub fn violations_csv(rows: &[(usize, f64, f64)]) -> String {
    let mut s = String::from("step,mean_abs_h,mean_max_g_plus\n");
    for &(k, h, g) in rows {
        write!(s, "{k},").unwrap();
        csv_float(&mut s, h);
        s.push(',');
        csv_float(&mut s, g);
        s.push('\n');
    }
    s
}

/// Per-chain, per-step violation series.
pub fn decay_csv(exp: &Experiment) -> String {
    let mut s = String::from("chain,step,mean_abs_h,max_g_plus\n");
    for (c, run) in exp.chains.iter().enumerate() {
        for (k, v) in run.violations.iter().enumerate() {
            write!(s, "{c},{k},").unwrap();
            csv_float(&mut s, v.mean_abs_h);
            s.push(',');
            csv_float(&mut s, v.max_g_plus);
            s.push('\n');
        }
    }
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Writes `samples.csv`, `violations.csv` and `summary.json` into `dir`.
pub fn write_report(report: &Report, dim: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let paths = [
        dir.join("samples.csv"),
        dir.join("violations.csv"),
        dir.join("summary.json"),
    ];
    write_file(&paths[0], &samples_csv(&report.samples, dim))?;
    write_file(&paths[1], &violations_csv(&report.violations))?;
    let mut json = serde_json::to_string_pretty(&report.summary)?;
    json.push('\n');
    write_file(&paths[2], &json)?;
    Ok(paths.to_vec())
}
