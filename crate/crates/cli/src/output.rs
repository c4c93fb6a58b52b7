//! Result files: CSV tables, the gnuplot data file and atomic writes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use prism_core::MetricRecord;

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .with_context(|| format!("{} has no file name", path.display()))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))?;
    Ok(())
}

pub fn results_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from(MetricRecord::CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Reads a results table back. The permutation is not stored and comes back empty.
pub fn parse_results_csv(text: &str) -> Result<Vec<MetricRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == MetricRecord::CSV_HEADER => {}
        Some((_, h)) => bail!("line 1: unexpected header `{h}`"),
        None => bail!("empty results file"),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            bail!("line {}: expected 6 fields, found {}", i + 1, f.len());
        }
        let bad = |what: &str| format!("line {}: bad {what}", i + 1);
        out.push(MetricRecord {
            method: f[0].to_string(),
            seed: f[1].parse().with_context(|| bad("seed"))?,
            snr_db: f[2].parse().with_context(|| bad("snr_db"))?,
            n_samples: f[3].parse().with_context(|| bad("n_samples"))?,
            m_samples: f[4].parse().with_context(|| bad("m_samples"))?,
            mse: f[5].parse().with_context(|| bad("mse"))?,
            permutation: Vec::new(),
        });
    }
    Ok(out)
}

/// A failed sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub method: String,
    pub seed: u64,
    pub snr_db: f64,
    pub n_samples: usize,
    pub m_samples: usize,
    pub error: String,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\n', " ").replace('"', "\"\""))
}

pub fn failures_csv(failures: &[Failure]) -> String {
    let mut out = String::from("method,seed,snr_db,n_samples,m_samples,error\n");
    for f in failures {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            f.method,
            f.seed,
            f.snr_db,
            f.n_samples,
            f.m_samples,
            quote(&f.error)
        )
        .unwrap();
    }
    out
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub snr_db: f64,
    pub n_samples: usize,
    pub m_samples: usize,
    pub cells: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Median and quartiles of the MSE per (method, SNR, N, M), in order of first appearance.
pub fn summarize(records: &[MetricRecord]) -> Vec<SummaryRow> {
    let mut groups: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for r in records {
        let same = |g: &SummaryRow| {
            g.method == r.method
                && g.snr_db.to_bits() == r.snr_db.to_bits()
                && g.n_samples == r.n_samples
                && g.m_samples == r.m_samples
        };
        match groups.iter_mut().find(|(g, _)| same(g)) {
            Some((_, v)) => v.push(r.mse),
            None => groups.push((
                SummaryRow {
                    method: r.method.clone(),
                    snr_db: r.snr_db,
                    n_samples: r.n_samples,
                    m_samples: r.m_samples,
                    cells: 0,
                    median: 0.0,
                    q1: 0.0,
                    q3: 0.0,
                },
                vec![r.mse],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(mut row, mut v)| {
            v.sort_by(f64::total_cmp);
            row.cells = v.len();
            row.median = quantile(&v, 0.5);
            row.q1 = quantile(&v, 0.25);
            row.q3 = quantile(&v, 0.75);
            row
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("method,snr_db,n_samples,m_samples,cells,median_mse,q1_mse,q3_mse\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method, r.snr_db, r.n_samples, r.m_samples, r.cells, r.median, r.q1, r.q3
        )
        .unwrap();
    }
    out
}

/// One gnuplot index block per method: `x median q1 q3`, where `x` is the
/// SNR when the sweep covers several SNRs and `N` otherwise.
pub fn gnuplot_dat(rows: &[SummaryRow], x_is_snr: bool) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let x_name = if x_is_snr { "snr_db" } else { "n_samples" };
    let mut out = String::new();
    for (b, m) in methods.iter().enumerate() {
        if b > 0 {
            out.push_str("\n\n");
        }
        writeln!(out, "# {m}\n# {x_name} median_mse q1_mse q3_mse").unwrap();
        let mut block: Vec<&SummaryRow> = rows.iter().filter(|r| r.method == *m).collect();
        let x = |r: &SummaryRow| if x_is_snr { r.snr_db } else { r.n_samples as f64 };
        block.sort_by(|a, b| x(a).total_cmp(&x(b)));
        for r in block {
            writeln!(out, "{} {} {} {}", x(r), r.median, r.q1, r.q3).unwrap();
        }
    }
    out
}
