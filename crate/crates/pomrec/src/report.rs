//! CSV and JSON renderings of metrics, training logs and ablation tables.
//!
//! Floats are written with Rust's shortest round-trip formatting, so the
//! text reproduces the exact values.

use std::fmt::Write as _;

use anyhow::Result;
use pomrec_core::training::LogRow;
use pomrec_core::{MetricsReport, Variant};
use serde::Serialize;

pub const LOG_HEADER: &str = "epoch,loss,recall5,recall10,recall20,ndcg5,ndcg10,ndcg20,seconds";
pub const METRICS_HEADER: &str = "split,users,seed,checkpoint_id,recall5,recall10,recall20,ndcg5,ndcg10,ndcg20";

pub fn metrics_json(report: &MetricsReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Header plus one row.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let r = &report.recall;
    let n = &report.ndcg;
    format!(
        "{METRICS_HEADER}\n{},{},{},{},{},{},{},{},{},{}\n",
        report.split,
        report.users,
        report.seed,
        report.checkpoint_id.as_deref().unwrap_or(""),
        r[0],
        r[1],
        r[2],
        n[0],
        n[1],
        n[2]
    )
}

/// The training log. Unevaluated epochs leave the metric cells empty.
pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = format!("{LOG_HEADER}\n");
    for row in rows {
        let cells = |v: Option<[f64; 3]>| match v {
            Some(a) => format!("{},{},{}", a[0], a[1], a[2]),
            None => ",,".into(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            row.epoch,
            row.loss,
            cells(row.recall),
            cells(row.ndcg),
            row.seconds
        );
    }
    out
}

/// Test metrics of one trained variant under one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRun {
    pub variant: Variant,
    pub seed: u64,
    pub best_epoch: usize,
    pub report: MetricsReport,
}

/// Mean Recall@{5,10} and NDCG@{5,10} per variant over its seeds, in the
/// order the variants first appear.
pub fn ablation_means(runs: &[AblationRun]) -> Vec<(Variant, [f64; 4])> {
    let mut order: Vec<Variant> = Vec::new();
    for r in runs {
        if !order.contains(&r.variant) {
            order.push(r.variant);
        }
    }
    order
        .into_iter()
        .map(|v| {
            let mine: Vec<&AblationRun> = runs.iter().filter(|r| r.variant == v).collect();
            let n = mine.len() as f64;
            let mean = |f: &dyn Fn(&MetricsReport) -> f64| mine.iter().map(|r| f(&r.report)).sum::<f64>() / n;
            (
                v,
                [
                    mean(&|m| m.recall[0]),
                    mean(&|m| m.recall[1]),
                    mean(&|m| m.ndcg[0]),
                    mean(&|m| m.ndcg[1]),
                ],
            )
        })
        .collect()
}

pub fn ablation_table_csv(runs: &[AblationRun]) -> String {
    let mut out = String::from("variant,recall5,recall10,ndcg5,ndcg10\n");
    for (v, m) in ablation_means(runs) {
        let _ = writeln!(out, "{v},{},{},{},{}", m[0], m[1], m[2], m[3]);
    }
    out
}

pub fn ablation_runs_csv(runs: &[AblationRun]) -> String {
    let mut out = String::from("variant,seed,best_epoch,recall5,recall10,recall20,ndcg5,ndcg10,ndcg20\n");
    for r in runs {
        let (m, n) = (&r.report.recall, &r.report.ndcg);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.variant, r.seed, r.best_epoch, m[0], m[1], m[2], n[0], n[1], n[2]
        );
    }
    out
}
