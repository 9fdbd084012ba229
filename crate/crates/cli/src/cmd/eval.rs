use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::Args;
use treerare::eval::{
    evaluate, load_dataset, render_table, DatasetFormat, DisambigScorer, EvalError, HttpExtractor, MetricsReport,
};
use treerare::pipeline::RunTrace;

use super::read_traces;
use crate::exit::{input_error, Classify, CmdResult, Failure};

#[derive(Args)]
pub struct EvalArgs {
    /// JSONL trace files; traces are grouped by dataset and method.
    #[arg(long, required = true, num_args = 1..)]
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "unified")]
    pub format: DatasetFormat,
    /// Comma-separated subset of cover_em, answer_recall, entity_recall, dis_f1
    /// (or cov-em, ar, er, dis-f1); `all` keeps every applicable metric.
    #[arg(long, default_value = "all")]
    pub metrics: MetricSet,
    /// Answer-extraction service for Dis-F1; containment proxy when omitted.
    #[arg(long)]
    pub extractor: Option<String>,
    /// Sampling seed to record in the report.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metrics report JSON (an array, one report per method).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the rendered table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Args)]
pub struct TableArgs {
    /// Report files written by `eval`.
    #[arg(long, required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricSet {
    cover_em: bool,
    answer_recall: bool,
    entity_recall: bool,
    dis_f1: bool,
}

impl FromStr for MetricSet {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = MetricSet {
            cover_em: false,
            answer_recall: false,
            entity_recall: false,
            dis_f1: false,
        };
        for name in s.split(',').map(|n| n.trim().to_ascii_lowercase()) {
            match name.as_str() {
                "all" => {
                    set = MetricSet {
                        cover_em: true,
                        answer_recall: true,
                        entity_recall: true,
                        dis_f1: true,
                    }
                }
                "cover_em" | "cov-em" | "cover-em" => set.cover_em = true,
                "answer_recall" | "ar" => set.answer_recall = true,
                "entity_recall" | "er" => set.entity_recall = true,
                "dis_f1" | "dis-f1" => set.dis_f1 = true,
                other => bail!("unknown metric {other:?}"),
            }
        }
        Ok(set)
    }
}

impl MetricSet {
    /// Blanks every metric that was not asked for.
    fn restrict(&self, report: &mut MetricsReport) {
        let keep = |on: bool, v: &mut Option<f64>| {
            if !on {
                *v = None;
            }
        };
        keep(self.cover_em, &mut report.aggregates.cover_em);
        keep(self.answer_recall, &mut report.aggregates.answer_recall);
        keep(self.entity_recall, &mut report.aggregates.entity_recall);
        keep(self.dis_f1, &mut report.aggregates.dis_f1);
        for q in &mut report.per_question {
            keep(self.cover_em, &mut q.cover_em);
            keep(self.answer_recall, &mut q.answer_recall);
            keep(self.entity_recall, &mut q.entity_recall);
            keep(self.dis_f1, &mut q.dis_f1);
        }
        if !self.dis_f1 {
            report.dis_f1_scorer = None;
        }
    }
}

pub fn eval(args: &EvalArgs) -> CmdResult {
    let records = load_dataset(&args.dataset, args.format)
        .with_context(|| format!("loading {}", args.dataset.display()))
        .input()?;
    let mut traces = Vec::new();
    for path in &args.traces {
        traces.extend(read_traces(path).input()?);
    }
    if traces.is_empty() {
        return Err(input_error("no traces to evaluate"));
    }
    let groups = group(&traces)?;
    let known: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    if let Some(t) = traces.iter().find(|t| !known.contains(t.question_id.as_str())) {
        return Err(input_error(format!(
            "trace question {:?} is not in {}",
            t.question_id,
            args.dataset.display()
        )));
    }

    let scorer = match &args.extractor {
        Some(url) => DisambigScorer::Extractor(Box::new(HttpExtractor::new(url.clone(), Duration::from_secs(60)))),
        None => DisambigScorer::Containment,
    };
    let mut reports = Vec::new();
    for ((dataset, method), group) in groups {
        let ids: HashSet<&str> = group.iter().map(|t| t.question_id.as_str()).collect();
        let subset: Vec<_> = records.iter().filter(|r| ids.contains(r.id.as_str())).cloned().collect();
        let predictions: HashMap<String, String> = group
            .iter()
            .filter_map(|t| t.final_answer.clone().map(|a| (t.question_id.clone(), a)))
            .collect();
        let mut report = evaluate(dataset, args.format, &method, &subset, &predictions, &scorer, args.seed)
            .map_err(|e| match e {
                EvalError::ScorerUnavailable(_) => Failure::Dependency(e.into()),
                e => Failure::Input(e.into()),
            })?;
        args.metrics.restrict(&mut report);
        reports.push(report);
    }

    let json = serde_json::to_string_pretty(&reports).input()?;
    std::fs::write(&args.out, json + "\n")
        .with_context(|| format!("writing {}", args.out.display()))
        .input()?;
    let table = render_table(&reports);
    if let Some(path) = &args.table {
        std::fs::write(path, &table).input()?;
    }
    print!("{table}");
    Ok(())
}

/// Traces grouped by `(dataset, method)` in first-seen order. A question may
/// appear only once per group.
type Groups<'a> = Vec<((&'a str, String), Vec<&'a RunTrace>)>;

fn group(traces: &[RunTrace]) -> CmdResult<Groups<'_>> {
    let mut groups: Groups = Vec::new();
    let mut seen = HashSet::new();
    for t in traces {
        let key = (t.dataset.as_str(), t.method.to_string());
        if !seen.insert((key.clone(), t.question_id.as_str())) {
            return Err(input_error(format!(
                "question {:?} appears twice for {} on {:?}",
                t.question_id, key.1, key.0
            )));
        }
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(t),
            None => groups.push((key, vec![t])),
        }
    }
    Ok(groups)
}

pub fn table(args: &TableArgs) -> CmdResult {
    let mut reports: Vec<MetricsReport> = Vec::new();
    for path in &args.reports {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .input()?;
        let parsed: Vec<MetricsReport> = serde_json::from_str(&raw)
            .with_context(|| format!("parsing {}", path.display()))
            .input()?;
        reports.extend(parsed);
    }
    let table = render_table(&reports);
    match &args.out {
        Some(path) => std::fs::write(path, &table).input()?,
        None => print!("{table}"),
    }
    Ok(())
}
