use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use forage_core::{Distribution, PolicyKind};

use crate::store::TrialRow;
use crate::HarnessError;

/// Descriptive statistics of one policy in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub trials: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: usize,
    pub max: usize,
    pub llm_calls: usize,
    pub llm_fallbacks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_mean_secs: Option<f64>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[usize], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 + (sorted[hi] as f64 - sorted[lo] as f64) * frac
}

impl CellStats {
    pub fn from_rows(rows: &[&TrialRow]) -> Self {
        let mut d: Vec<usize> = rows.iter().map(|r| r.deposits).collect();
        d.sort_unstable();
        let total: usize = d.iter().sum();
        let lat: Vec<(f64, usize)> = rows
            .iter()
            .filter_map(|r| r.latency_mean_secs.map(|l| (l, r.llm_calls)))
            .collect();
        let lat_calls: usize = lat.iter().map(|(_, c)| c).sum();
        Self {
            trials: d.len(),
            mean: if d.is_empty() { 0.0 } else { total as f64 / d.len() as f64 },
            median: quantile(&d, 0.5),
            q1: quantile(&d, 0.25),
            q3: quantile(&d, 0.75),
            min: d.first().copied().unwrap_or(0),
            max: d.last().copied().unwrap_or(0),
            llm_calls: rows.iter().map(|r| r.llm_calls).sum(),
            llm_fallbacks: rows.iter().map(|r| r.llm_fallbacks).sum(),
            latency_mean_secs: (lat_calls > 0)
                .then(|| lat.iter().map(|(l, c)| l * *c as f64).sum::<f64>() / lat_calls as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: String,
    pub team_size: usize,
    pub arena: u32,
    pub distribution: Distribution,
    pub baseline: CellStats,
    pub candidate: CellStats,
    /// `(mean_c - mean_b) / mean_b`; absent when the baseline mean is 0.
    pub relative_improvement: Option<f64>,
    pub absolute_gain: f64,
    pub win: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub distribution: Distribution,
    pub cells: usize,
    pub wins: usize,
    pub mean_relative_improvement: Option<f64>,
    pub mean_absolute_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub baseline: PolicyKind,
    pub candidate: PolicyKind,
    pub rows: Vec<SummaryRow>,
    pub wins: usize,
    pub mean_relative_improvement: Option<f64>,
    pub mean_absolute_gain: f64,
    pub per_distribution: Vec<DistributionSummary>,
    /// Cells where one of the two policies has no trials.
    pub missing_cells: Vec<String>,
}

fn mean_opt(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn aggregate<'a>(rows: impl Iterator<Item = &'a SummaryRow> + Clone) -> (usize, usize, Option<f64>, f64) {
    let cells = rows.clone().count();
    let wins = rows.clone().filter(|r| r.win).count();
    let rel = mean_opt(rows.clone().filter_map(|r| r.relative_improvement));
    let abs = mean_opt(rows.map(|r| r.absolute_gain)).unwrap_or(0.0);
    (cells, wins, rel, abs)
}

type CellKey = (usize, u32, Distribution);

/// Per-cell comparison of `candidate` against `baseline`.
pub fn summarize(rows: &[TrialRow], baseline: PolicyKind, candidate: PolicyKind) -> Summary {
    let mut by_cell: BTreeMap<CellKey, (String, Vec<&TrialRow>, Vec<&TrialRow>)> = BTreeMap::new();
    for r in rows {
        let entry = by_cell
            .entry((r.team_size, r.arena, r.distribution))
            .or_insert_with(|| (r.cell.clone(), Vec::new(), Vec::new()));
        if r.policy == baseline {
            entry.1.push(r);
        }
        if r.policy == candidate {
            entry.2.push(r);
        }
    }
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for ((team_size, arena, distribution), (cell, b, c)) in by_cell {
        if b.is_empty() || c.is_empty() {
            missing.push(cell);
            continue;
        }
        let baseline = CellStats::from_rows(&b);
        let candidate = CellStats::from_rows(&c);
        let absolute_gain = candidate.mean - baseline.mean;
        out.push(SummaryRow {
            cell,
            team_size,
            arena,
            distribution,
            relative_improvement: (baseline.mean > 0.0).then(|| absolute_gain / baseline.mean),
            absolute_gain,
            win: candidate.mean > baseline.mean,
            baseline,
            candidate,
        });
    }
    let (_, wins, rel, abs) = aggregate(out.iter());
    let per_distribution = Distribution::ALL
        .iter()
        .filter(|d| out.iter().any(|r| r.distribution == **d))
        .map(|&d| {
            let (cells, wins, rel, abs) = aggregate(out.iter().filter(move |r| r.distribution == d));
            DistributionSummary {
                distribution: d,
                cells,
                wins,
                mean_relative_improvement: rel,
                mean_absolute_gain: abs,
            }
        })
        .collect();
    Summary {
        baseline,
        candidate,
        rows: out,
        wins,
        mean_relative_improvement: rel,
        mean_absolute_gain: abs,
        per_distribution,
        missing_cells: missing,
    }
}

/// Recomputes the headline numbers straight from raw rows and compares.
pub fn verify_summary(summary: &Summary, rows: &[TrialRow]) -> Result<(), String> {
    let mut wins = 0;
    let mut rel_sum = 0.0;
    let mut rel_n = 0;
    let mut abs_sum = 0.0;
    for s in &summary.rows {
        let mean_of = |policy: PolicyKind| {
            let mut total = 0usize;
            let mut n = 0usize;
            for r in rows {
                if r.cell == s.cell && r.policy == policy {
                    total += r.deposits;
                    n += 1;
                }
            }
            total as f64 / n as f64
        };
        let mb = mean_of(summary.baseline);
        let mc = mean_of(summary.candidate);
        if mb != s.baseline.mean || mc != s.candidate.mean {
            return Err(format!("cell {}: means differ", s.cell));
        }
        if mc > mb {
            wins += 1;
        }
        if mb > 0.0 {
            rel_sum += (mc - mb) / mb;
            rel_n += 1;
        }
        abs_sum += mc - mb;
    }
    if wins != summary.wins {
        return Err(format!("wins {} != recomputed {wins}", summary.wins));
    }
    let rel = (rel_n > 0).then(|| rel_sum / rel_n as f64);
    if rel != summary.mean_relative_improvement {
        return Err("mean relative improvement differs".into());
    }
    let abs = if summary.rows.is_empty() { 0.0 } else { abs_sum / summary.rows.len() as f64 };
    if abs != summary.mean_absolute_gain {
        return Err("mean absolute gain differs".into());
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from(
        "cell,team_size,arena,distribution,baseline_mean,baseline_median,baseline_q1,baseline_q3,\
candidate_mean,candidate_median,candidate_q1,candidate_q3,relative_improvement,absolute_gain,win,\
candidate_llm_calls,candidate_llm_fallbacks,candidate_latency_mean_secs\n",
    );
    for r in &summary.rows {
        let (b, c) = (&r.baseline, &r.candidate);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.cell,
            r.team_size,
            r.arena,
            r.distribution,
            b.mean,
            b.median,
            b.q1,
            b.q3,
            c.mean,
            c.median,
            c.q1,
            c.q3,
            opt(r.relative_improvement),
            r.absolute_gain,
            r.win,
            c.llm_calls,
            c.llm_fallbacks,
            opt(c.latency_mean_secs)
        );
    }
    out
}

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:+.1}%", 100.0 * x)).unwrap_or_else(|| "n/a".into())
}

pub fn summary_markdown(summary: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {} vs {}\n", summary.candidate, summary.baseline);
    let _ = writeln!(
        out,
        "{} wins in {} cells; mean relative improvement {}; mean absolute gain {:.1}\n",
        summary.wins,
        summary.rows.len(),
        pct(summary.mean_relative_improvement),
        summary.mean_absolute_gain
    );
    let _ = writeln!(out, "| distribution | cells | wins | mean rel. improvement | mean abs. gain |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    for d in &summary.per_distribution {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {:.1} |",
            d.distribution,
            d.cells,
            d.wins,
            pct(d.mean_relative_improvement),
            d.mean_absolute_gain
        );
    }
    let _ = writeln!(out, "\n| cell | {} mean | {} mean | rel. | abs. |", summary.baseline, summary.candidate);
    let _ = writeln!(out, "|---|---|---|---|---|");
    for r in &summary.rows {
        let _ = writeln!(
            out,
            "| {} | {:.1} | {:.1} | {} | {:+.1} |",
            r.cell,
            r.baseline.mean,
            r.candidate.mean,
            pct(r.relative_improvement),
            r.absolute_gain
        );
    }
    if !summary.missing_cells.is_empty() {
        let _ = writeln!(out, "\nWarning: partial summary, missing cells: {}", summary.missing_cells.join(", "));
    }
    out
}

/// One CSV per distribution, grouped by team size, then arena.
pub fn emit_boxplot_data(rows: &[TrialRow]) -> Vec<(Distribution, String)> {
    Distribution::ALL
        .iter()
        .map(|&d| {
            let mut sel: Vec<&TrialRow> = rows.iter().filter(|r| r.distribution == d).collect();
            sel.sort_by_key(|r| (r.team_size, r.arena, r.policy, r.trial));
            let mut csv = String::from("team_size,arena,policy,trial,deposits\n");
            for r in sel {
                let _ = writeln!(csv, "{},{},{},{},{}", r.team_size, r.arena, r.policy, r.trial, r.deposits);
            }
            (d, csv)
        })
        .collect()
}

/// Writes summary.csv, summary.md, summary.json and boxplot_<dist>.csv.
pub fn write_report(dir: &Path, summary: &Summary, rows: &[TrialRow]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.csv"), summary_csv(summary))?;
    std::fs::write(dir.join("summary.md"), summary_markdown(summary))?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    for (d, csv) in emit_boxplot_data(rows) {
        std::fs::write(dir.join(format!("boxplot_{d}.csv")), csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let d = [1, 2, 3, 4];
        assert_eq!(quantile(&d, 0.5), 2.5);
        assert_eq!(quantile(&d, 0.25), 1.75);
        assert_eq!(quantile(&d, 0.75), 3.25);
        assert_eq!(quantile(&[7], 0.25), 7.0);
    }
}
