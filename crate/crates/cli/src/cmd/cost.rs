use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use treerare::llm::{cost_report, CostItem, PricingTable};

use super::read_traces;
use crate::exit::{Classify, CmdResult};

#[derive(Args)]
pub struct CostArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub traces: Vec<PathBuf>,
    /// JSON or TOML map of model id -> {input_usd_per_1k, output_usd_per_1k}.
    #[arg(long)]
    pub pricing: PathBuf,
    /// CSV with one row per dataset x method x stage x model.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the full report (totals and per-group sums) as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn cost(args: &CostArgs) -> CmdResult {
    let pricing = load_pricing(&args.pricing).input()?;
    let mut traces = Vec::new();
    for path in &args.traces {
        traces.extend(read_traces(path).input()?);
    }
    let methods: Vec<String> = traces.iter().map(|t| t.method.to_string()).collect();
    let items = traces.iter().zip(&methods).flat_map(|(t, m)| {
        t.usage.iter().map(move |e| CostItem {
            dataset: &t.dataset,
            method: m,
            entry: e,
        })
    });
    let report = cost_report(items, &pricing).input()?;
    std::fs::write(&args.out, report.to_csv())
        .with_context(|| format!("writing {}", args.out.display()))
        .input()?;
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&report).input()? + "\n").input()?;
    }
    let t = &report.total;
    println!(
        "{} traces, {} calls, {} prompt + {} completion tokens, ${:.2}",
        traces.len(),
        t.calls,
        t.prompt_tokens,
        t.completion_tokens,
        t.usd
    );
    for (stage, c) in &report.per_stage {
        println!(
            "  {stage:<4} {:>6} calls {:>10} in {:>9} out ${:.2}",
            c.calls, c.prompt_tokens, c.completion_tokens, c.usd
        );
    }
    Ok(())
}

fn load_pricing(path: &std::path::Path) -> anyhow::Result<PricingTable> {
    if path.extension().is_some_and(|e| e == "toml") {
        let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let table: PricingTable = toml::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
        return Ok(PricingTable::new(table.rates)?);
    }
    Ok(PricingTable::load(path)?)
}
