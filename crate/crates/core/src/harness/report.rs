//! Summary reports over a results table: percent reductions of the proposed
//! method against each baseline, with across-seed confidence intervals, and
//! the nondominated front of the preference sweep.

use serde::Serialize;

use crate::harness::{ResultsTable, METRICS_PER_ROW};

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub sweep_value: f64,
    pub baseline: String,
    /// Percent reduction in emissions per bit of `proposed` vs the baseline.
    pub reduction_pct: f64,
    pub ci_low_pct: f64,
    pub ci_high_pct: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParetoPoint {
    pub sweep_value: f64,
    pub method: String,
    pub emissions_per_bit: f64,
    pub mean_delay: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub comparisons: Vec<Comparison>,
    /// Nondominated (delay, emissions) points, sorted by rising delay.
    pub pareto: Vec<ParetoPoint>,
    /// Methods that could not be compared.
    pub notices: Vec<String>,
}

/// Indices of the nondominated points when minimizing both coordinates.
/// Exact duplicates keep their first occurrence.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut front = Vec::new();
    'outer: for (i, &(di, ei)) in points.iter().enumerate() {
        for (j, &(dj, ej)) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let dominates = dj <= di && ej <= ei && (dj < di || ej < ei);
            if dominates {
                continue 'outer;
            }
            if dj == di && ej == ei && j < i {
                continue 'outer; // duplicate, keep the first
            }
        }
        front.push(i);
    }
    front.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    front
}

/// Build the report from the per-seed rows alone; nothing in it depends on
/// state outside the table.
pub fn summarize(table: &ResultsTable) -> Report {
    let mut report = Report::default();

    let mut sweep_values: Vec<f64> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    for r in &table.rows {
        if !sweep_values.iter().any(|&v| v == r.sweep_value) {
            sweep_values.push(r.sweep_value);
        }
        if !methods.iter().any(|m| *m == r.method) {
            methods.push(r.method.clone());
        }
    }
    sweep_values.sort_by(f64::total_cmp);

    if !methods.iter().any(|m| m == "proposed") {
        report.notices.push("no proposed rows present; comparisons omitted".into());
    } else {
        for &v in &sweep_values {
            for baseline in &methods {
                let pairs: Vec<(f64, f64)> = table
                    .rows
                    .iter()
                    .filter(|r| r.sweep_value == v && r.method == "proposed")
                    .filter_map(|p| {
                        table
                            .rows
                            .iter()
                            .find(|b| {
                                b.sweep_value == v && &b.method == baseline && b.seed == p.seed
                            })
                            .map(|b| (p.metrics[0], b.metrics[0]))
                    })
                    .collect();
                if pairs.is_empty() {
                    report
                        .notices
                        .push(format!("no paired seeds for {baseline} at sweep value {v}"));
                    continue;
                }
                let reductions: Vec<f64> = pairs
                    .iter()
                    .filter(|(_, b)| *b != 0.0)
                    .map(|(p, b)| 100.0 * (1.0 - p / b))
                    .collect();
                if reductions.is_empty() {
                    continue;
                }
                let n = reductions.len() as f64;
                let mean = reductions.iter().sum::<f64>() / n;
                let sd = (reductions.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
                let half = 1.96 * sd / n.sqrt();
                report.comparisons.push(Comparison {
                    sweep_value: v,
                    baseline: baseline.clone(),
                    reduction_pct: mean,
                    ci_low_pct: mean - half,
                    ci_high_pct: mean + half,
                    seeds: reductions.len(),
                });
            }
        }
    }

    // Front over the across-seed means of each sweep point.
    let mut agg_table = table.clone();
    agg_table.aggregate();
    let candidates: Vec<(&crate::harness::AggregateRow, (f64, f64))> = agg_table
        .aggregates
        .iter()
        .map(|a| (a, (a.mean[3], a.mean[0])))
        .collect();
    let points: Vec<(f64, f64)> = candidates.iter().map(|(_, p)| *p).collect();
    for idx in pareto_front(&points) {
        let (a, (delay, emissions)) = &candidates[idx];
        report.pareto.push(ParetoPoint {
            sweep_value: a.sweep_value,
            method: a.method.clone(),
            emissions_per_bit: *emissions,
            mean_delay: *delay,
        });
    }
    report
}

impl Report {
    pub fn text(&self) -> String {
        let mut out = String::new();
        out.push_str("emissions-per-bit reduction of proposed vs baselines\n");
        for c in &self.comparisons {
            out.push_str(&format!(
                "  sweep {:>8.3}  vs {:<10} {:+7.2}%  (95% CI [{:+.2}%, {:+.2}%], {} seeds)\n",
                c.sweep_value, c.baseline, c.reduction_pct, c.ci_low_pct, c.ci_high_pct, c.seeds
            ));
        }
        out.push_str("nondominated front (delay vs emissions per bit)\n");
        for p in &self.pareto {
            out.push_str(&format!(
                "  sweep {:>8.3} [{}]  delay {:.6e} s  emissions {:.6e} kg/bit\n",
                p.sweep_value, p.method, p.mean_delay, p.emissions_per_bit
            ));
        }
        for n in &self.notices {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ResultRow;

    fn row(v: f64, method: &str, seed: u64, emissions: f64, delay: f64) -> ResultRow {
        let mut metrics = [0.0; METRICS_PER_ROW];
        metrics[0] = emissions;
        metrics[3] = delay;
        ResultRow { sweep_value: v, method: method.into(), seed, metrics }
    }

    #[test]
    fn self_comparison_is_zero() {
        let mut table = ResultsTable::default();
        for seed in 0..3 {
            table.rows.push(row(1.0, "proposed", seed, 2.0e-7, 0.1));
        }
        let report = summarize(&table);
        let own = report.comparisons.iter().find(|c| c.baseline == "proposed").unwrap();
        assert_eq!(own.reduction_pct, 0.0);
    }

    #[test]
    fn synthetic_quarter_reduction_reports_26_percent() {
        let mut table = ResultsTable::default();
        for v in [1.0, 2.0] {
            for seed in 0..4 {
                table.rows.push(row(v, "ee_only", seed, 1.0e-6, 0.1));
                table.rows.push(row(v, "proposed", seed, 0.74e-6, 0.1));
            }
        }
        let report = summarize(&table);
        for c in report.comparisons.iter().filter(|c| c.baseline == "ee_only") {
            assert!((c.reduction_pct - 26.0).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_method_noted() {
        let mut table = ResultsTable::default();
        table.rows.push(row(1.0, "ee_only", 0, 1.0, 0.1));
        let report = summarize(&table);
        assert!(report.comparisons.is_empty());
        assert!(!report.notices.is_empty());
    }

    #[test]
    fn dominated_points_drop_from_front() {
        // One point dominates the other two.
        let pts = vec![(1.0, 5.0), (2.0, 6.0), (3.0, 7.0)];
        let front = pareto_front(&pts);
        assert_eq!(front, vec![0]);
    }

    #[test]
    fn front_is_strictly_tradeoff_shaped() {
        let pts = vec![(1.0, 5.0), (2.0, 3.0), (2.5, 3.0), (3.0, 1.0), (0.5, 9.0)];
        let front = pareto_front(&pts);
        for w in front.windows(2) {
            assert!(pts[w[1]].0 > pts[w[0]].0);
            assert!(pts[w[1]].1 < pts[w[0]].1);
        }
    }

    #[test]
    fn duplicates_keep_one_representative() {
        let pts = vec![(1.0, 1.0), (1.0, 1.0)];
        assert_eq!(pareto_front(&pts), vec![0]);
    }
}
