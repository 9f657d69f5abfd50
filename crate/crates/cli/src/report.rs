//! Plot series and summaries from diagnostics CSVs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use warpflow::diagnostics::{asymptotics_report, AsymptoticsReport};
use warpflow::io::read_csv;
use warpflow::DiagnosticsRecord;

pub fn cmd_report(csvs: &[PathBuf], out: Option<PathBuf>) -> Result<u8> {
    let out = out.unwrap_or_else(|| csvs[0].parent().unwrap_or(Path::new(".")).join("report"));
    let mut runs = Vec::new();
    for (k, path) in csvs.iter().enumerate() {
        let records = read_csv(path)?;
        let summary = asymptotics_report(&records)?;
        let dir = if csvs.len() == 1 { out.clone() } else { out.join(format!("run{}", k + 1)) };
        write_series(&dir, &records)?;
        let text = summary.to_string();
        fs::write(dir.join("summary.txt"), &text).with_context(|| format!("writing summary in {}", dir.display()))?;
        println!("== {} ({} samples) -> {}", path.display(), records.len(), dir.display());
        print!("{text}");
        runs.push((path.clone(), records, summary));
    }
    if let [a, b] = runs.as_slice() {
        let table = comparison(a, b);
        fs::write(out.join("comparison.txt"), &table).context("writing comparison table")?;
        print!("{table}");
    }
    Ok(0)
}

/// One `<field>.dat` file per column, two whitespace-separated columns `t value`.
fn write_series(dir: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for field in DiagnosticsRecord::FIELDS.iter().filter(|f| **f != "t") {
        let mut text = format!("# t {field}\n");
        for r in records {
            let v = r.get(field).unwrap_or(f64::NAN);
            let _ = writeln!(text, "{:.16e} {:.16e}", r.t, v);
        }
        let path = dir.join(format!("{field}.dat"));
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e9 {
        format!("{v}")
    } else {
        format!("{v:.6e}")
    }
}

type Run = (PathBuf, Vec<DiagnosticsRecord>, AsymptoticsReport);
type Column<'a> = (&'a str, Box<dyn Fn(&Run) -> f64>);

fn comparison(a: &Run, b: &Run) -> String {
    let max_of = |r: &[DiagnosticsRecord], f: fn(&DiagnosticsRecord) -> f64| r.iter().map(f).fold(0.0, f64::max);
    let rows: Vec<Column> = vec![
        ("t_final", Box::new(|r: &Run| r.2.t_final)),
        ("samples", Box::new(|r: &Run| r.1.len() as f64)),
        ("max area_growth_error", Box::new(move |r: &Run| max_of(&r.1, |x| x.area_growth_error))),
        ("max rescaled_area_dev", Box::new(move |r: &Run| max_of(&r.1, |x| x.rescaled_area_dev))),
        ("fatal breaches", Box::new(move |r: &Run| r.1.iter().map(|x| x.fatal).sum())),
        ("r_inf_est", Box::new(|r: &Run| r.2.r_inf_est)),
        ("lambda_cert", Box::new(|r: &Run| r.2.lambda_cert)),
        ("final u_gap", Box::new(|r: &Run| r.2.last.u)),
        ("final metric_gap", Box::new(|r: &Run| r.2.last.metric)),
        ("final weingarten_gap", Box::new(|r: &Run| r.2.last.weingarten)),
    ];
    let mut s = String::new();
    let _ = writeln!(s, "{:<28} {:>16} {:>16}", "quantity", "run1", "run2");
    for (name, f) in &rows {
        let _ = writeln!(s, "{name:<28} {:>16} {:>16}", number(f(a)), number(f(b)));
    }
    for (fa, fb) in a.2.fits.iter().zip(&b.2.fits) {
        let show = |f: &Result<_, String>| match f {
            Ok(warpflow::RateFit { rate, .. }) => format!("{rate:.5}"),
            Err(_) => "-".to_string(),
        };
        let name = match (fa, fb) {
            (Ok(x), _) | (_, Ok(x)) => x.name.clone(),
            _ => continue,
        };
        let _ = writeln!(s, "{:<28} {:>16} {:>16}", format!("rate {name}"), show(fa), show(fb));
    }
    let _ = writeln!(s, "run1 = {}\nrun2 = {}", a.0.display(), b.0.display());
    s
}
