//! Batch runs, per-method aggregates and report files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::pipeline::{run_scene, PipelineParams, SceneRow};
use super::stats::{mean, paired_t_test, std_error, PairedTTest};
use crate::par;

/// Runs `seeds` scenes for every configuration. Rows come back ordered by
/// configuration, then seed, whatever the thread count.
pub fn sweep(configs: &[PipelineParams], first_seed: u64, scenes: usize) -> Vec<SceneRow> {
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..scenes as u64).map(move |s| (c, first_seed + s)))
        .collect();
    par::map(&jobs, |&(c, seed)| run_scene(seed, &configs[c]))
}

/// Method label: planner, push selection and push length.
pub fn method_label(row: &SceneRow) -> String {
    match row.push_selection {
        Some(sel) => format!("{}+push-{}-{:.0}cm", row.planner, sel.label(), row.push_length * 100.0),
        None => row.planner.label().to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub description: String,
    pub scenes: usize,
    pub errors: usize,
    pub vpp_reduction_pct: f64,
    pub vpp_reduction_se: f64,
    pub push_reduction_pct: f64,
    pub push_reduction_se: f64,
    pub iterations: f64,
    pub iterations_se: f64,
    /// Total displacement over total pushes.
    pub displacement_mean_cm: f64,
    /// Scene mean of the net per-object center shift.
    pub displacement_object_cm: f64,
    pub drops: usize,
    pub plan_ms_per_step: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// Compared per-scene column.
    pub metric: String,
    pub test: PairedTTest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<SceneRow>,
    pub aggregates: Vec<Aggregate>,
    pub comparisons: Vec<Comparison>,
}

impl BenchReport {
    /// Aggregates the rows per method (first-appearance order) and runs
    /// paired t-tests for every method pair on the seeds both completed.
    pub fn from_rows(rows: Vec<SceneRow>) -> Self {
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<&SceneRow>> = BTreeMap::new();
        for r in &rows {
            let m = method_label(r);
            if !groups.contains_key(&m) {
                order.push(m.clone());
            }
            groups.entry(m).or_default().push(r);
        }
        let aggregates: Vec<Aggregate> = order.iter().map(|m| aggregate(m, &groups[m])).collect();

        let mut comparisons = Vec::new();
        for i in 0..order.len() {
            for j in i + 1..order.len() {
                let (ga, gb) = (&groups[&order[i]], &groups[&order[j]]);
                let metric = if ga[0].push_selection.is_none() && gb[0].push_selection.is_none() {
                    "vpp_reduction_pct"
                } else {
                    "entropy_final"
                };
                let by_seed: BTreeMap<u64, &SceneRow> = gb.iter().filter(|r| r.is_ok()).map(|r| (r.seed, *r)).collect();
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for r in ga.iter().filter(|r| r.is_ok()) {
                    if let Some(o) = by_seed.get(&r.seed) {
                        a.push(column(r, metric));
                        b.push(column(o, metric));
                    }
                }
                if let Ok(test) = paired_t_test(&a, &b) {
                    comparisons.push(Comparison { a: order[i].clone(), b: order[j].clone(), metric: metric.into(), test });
                }
            }
        }
        Self { rows, aggregates, comparisons }
    }

    pub fn aggregate(&self, method: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    pub fn comparison(&self, a: &str, b: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| (c.a == a && c.b == b) || (c.a == b && c.b == a))
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

fn column(r: &SceneRow, metric: &str) -> f64 {
    match metric {
        "vpp_reduction_pct" => r.vpp_reduction_pct,
        _ => r.entropy_final,
    }
}

fn aggregate(method: &str, rows: &[&SceneRow]) -> Aggregate {
    let ok: Vec<&SceneRow> = rows.iter().copied().filter(|r| r.is_ok()).collect();
    let col = |f: fn(&SceneRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let vpp = col(|r| r.vpp_reduction_pct);
    let push = col(|r| r.push_reduction_pct);
    let it = col(|r| r.iterations as f64);
    let pushes: usize = ok.iter().map(|r| r.iterations).sum();
    let disp: f64 = ok.iter().map(|r| r.displacement_total_cm).sum();
    Aggregate {
        method: method.to_string(),
        description: rows[0].planner.description().to_string(),
        scenes: rows.len(),
        errors: rows.len() - ok.len(),
        vpp_reduction_pct: mean(&vpp),
        vpp_reduction_se: std_error(&vpp),
        push_reduction_pct: mean(&push),
        push_reduction_se: std_error(&push),
        iterations: mean(&it),
        iterations_se: std_error(&it),
        displacement_mean_cm: if pushes > 0 { disp / pushes as f64 } else { 0.0 },
        displacement_object_cm: mean(&col(|r| r.displacement_object_cm)),
        drops: ok.iter().map(|r| r.drops).sum(),
        plan_ms_per_step: mean(&col(|r| r.plan_ms_per_step)),
    }
}

const COLUMNS: &str = "seed,planner,push_selection,push_length,n_objects,vpp_steps,entropy_bootstrap,\
entropy_post_vpp,entropy_final,vpp_reduction_pct,push_reduction_pct,iterations,displacement_total_cm,\
displacement_mean_cm,displacement_object_cm,drops,error";

/// Per-scene CSV. Timing columns come last so they can be dropped.
pub fn rows_csv(rows: &[SceneRow], timing: bool) -> String {
    let mut s = String::from(COLUMNS);
    if timing {
        s.push_str(",plan_ms_per_step,push_ms_per_iteration");
    }
    s.push('\n');
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(['"', ','], ";");
        let _ = write!(
            s,
            "{},{},{},{:.3},{},{},{:.6},{:.6},{:.6},{:.4},{:.4},{},{:.4},{:.4},{:.4},{},{}",
            r.seed,
            r.planner,
            r.push_selection.map_or("none", |p| p.label()),
            r.push_length,
            r.n_objects,
            r.vpp_steps,
            r.entropy_bootstrap,
            r.entropy_post_vpp,
            r.entropy_final,
            r.vpp_reduction_pct,
            r.push_reduction_pct,
            r.iterations,
            r.displacement_total_cm,
            r.displacement_mean_cm,
            r.displacement_object_cm,
            r.drops,
            err
        );
        if timing {
            let _ = write!(s, ",{:.3},{:.3}", r.plan_ms_per_step, r.push_ms_per_iteration);
        }
        s.push('\n');
    }
    s
}

/// Aggregate table: one line per method.
pub fn aggregates_csv(report: &BenchReport) -> String {
    let mut s = String::from(
        "method,scenes,errors,vpp_reduction_pct,vpp_reduction_se,push_reduction_pct,push_reduction_se,\
iterations,iterations_se,displacement_mean_cm,displacement_object_cm,drops,description\n",
    );
    for a in &report.aggregates {
        let _ = writeln!(
            s,
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
            a.method,
            a.scenes,
            a.errors,
            a.vpp_reduction_pct,
            a.vpp_reduction_se,
            a.push_reduction_pct,
            a.push_reduction_se,
            a.iterations,
            a.iterations_se,
            a.displacement_mean_cm,
            a.displacement_object_cm,
            a.drops,
            a.description.replace(',', ";")
        );
    }
    s
}
