use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::LedgerEntry;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("no price for model {0:?}")]
    UnpricedModel(String),
    #[error("negative rate for model {0:?}")]
    NegativeRate(String),
    #[error("pricing file: {0}")]
    Pricing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub input_usd_per_1k: f64,
    pub output_usd_per_1k: f64,
}

/// USD per 1k tokens, by model id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PricingTable {
    pub rates: BTreeMap<String, Rate>,
}

impl PricingTable {
    pub fn new(rates: impl IntoIterator<Item = (String, Rate)>) -> Result<Self, CostError> {
        let table = PricingTable {
            rates: rates.into_iter().collect(),
        };
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, CostError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CostError::Pricing(format!("{}: {e}", path.display())))?;
        let table: PricingTable = serde_json::from_str(&raw).map_err(|e| CostError::Pricing(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), CostError> {
        for (model, r) in &self.rates {
            if !(r.input_usd_per_1k >= 0.0 && r.output_usd_per_1k >= 0.0) {
                return Err(CostError::NegativeRate(model.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenCost {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub usd: f64,
}

impl TokenCost {
    fn add(&mut self, other: &TokenCost) {
        self.calls += other.calls;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.usd += other.usd;
    }
}

/// A ledger entry together with the run it belongs to.
#[derive(Debug, Clone, Copy)]
pub struct CostItem<'a> {
    pub dataset: &'a str,
    pub method: &'a str,
    pub entry: &'a LedgerEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub dataset: String,
    pub method: String,
    pub stage: String,
    pub model: String,
    #[serde(flatten)]
    pub cost: TokenCost,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: TokenCost,
    pub per_stage: BTreeMap<String, TokenCost>,
    pub per_dataset: BTreeMap<String, TokenCost>,
    pub per_method: BTreeMap<String, TokenCost>,
    /// Finest grouping: dataset x method x stage x model, sorted.
    pub rows: Vec<CostRow>,
}

/// Prices every ledger entry:
/// `prompt_tokens / 1000 * input_rate + completion_tokens / 1000 * output_rate`.
pub fn cost_report<'a, I>(items: I, pricing: &PricingTable) -> Result<CostReport, CostError>
where
    I: IntoIterator<Item = CostItem<'a>>,
{
    let mut report = CostReport::default();
    let mut rows: BTreeMap<(String, String, String, String), TokenCost> = BTreeMap::new();
    for item in items {
        let e = item.entry;
        let rate = pricing
            .rates
            .get(&e.model)
            .ok_or_else(|| CostError::UnpricedModel(e.model.clone()))?;
        let cost = TokenCost {
            calls: 1,
            prompt_tokens: e.usage.prompt_tokens,
            completion_tokens: e.usage.completion_tokens,
            usd: e.usage.prompt_tokens as f64 / 1000.0 * rate.input_usd_per_1k
                + e.usage.completion_tokens as f64 / 1000.0 * rate.output_usd_per_1k,
        };
        report.total.add(&cost);
        report.per_stage.entry(e.stage.as_str().to_string()).or_default().add(&cost);
        report.per_dataset.entry(item.dataset.to_string()).or_default().add(&cost);
        report.per_method.entry(item.method.to_string()).or_default().add(&cost);
        rows.entry((
            item.dataset.to_string(),
            item.method.to_string(),
            e.stage.as_str().to_string(),
            e.model.clone(),
        ))
        .or_default()
        .add(&cost);
    }
    report.rows = rows
        .into_iter()
        .map(|((dataset, method, stage, model), cost)| CostRow {
            dataset,
            method,
            stage,
            model,
            cost,
        })
        .collect();
    Ok(report)
}

impl CostReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,method,stage,model,calls,prompt_tokens,completion_tokens,usd\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.6}\n",
                csv_field(&r.dataset),
                csv_field(&r.method),
                r.stage,
                csv_field(&r.model),
                r.cost.calls,
                r.cost.prompt_tokens,
                r.cost.completion_tokens,
                r.cost.usd
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Stage, TemplateId, Usage};

    fn entry(stage: Stage, model: &str, p: u64, c: u64) -> LedgerEntry {
        LedgerEntry {
            stage,
            node: None,
            template: TemplateId::Sag,
            provider: "mock".into(),
            model: model.into(),
            usage: Usage {
                prompt_tokens: p,
                completion_tokens: c,
                estimated: false,
            },
            latency_ms: 0,
        }
    }

    fn mini() -> PricingTable {
        PricingTable::new([(
            "gpt-4o-mini".to_string(),
            Rate {
                input_usd_per_1k: 0.15,
                output_usd_per_1k: 0.60,
            },
        )])
        .unwrap()
    }

    fn items<'a>(entries: &'a [LedgerEntry]) -> impl Iterator<Item = CostItem<'a>> {
        entries.iter().map(|entry| CostItem {
            dataset: "hotpotqa",
            method: "treerare-dt",
            entry,
        })
    }

    #[test]
    fn empty_ledger_costs_nothing() {
        let r = cost_report(items(&[]), &mini()).unwrap();
        assert_eq!(r.total.usd, 0.0);
        assert!(r.rows.is_empty());
    }

    #[test]
    fn two_thousand_token_entries() {
        let ledger = [
            entry(Stage::Qg, "gpt-4o-mini", 1000, 1000),
            entry(Stage::Fag, "gpt-4o-mini", 1000, 1000),
        ];
        let r = cost_report(items(&ledger), &mini()).unwrap();
        assert!((r.total.usd - 1.50).abs() < 1e-12);
        assert_eq!(r.per_stage["qg"].calls, 1);
        assert!((r.per_stage["fag"].usd - 0.75).abs() < 1e-12);
    }

    #[test]
    fn unknown_model() {
        let ledger = [entry(Stage::Qg, "mystery", 1, 1)];
        assert_eq!(
            cost_report(items(&ledger), &mini()).unwrap_err(),
            CostError::UnpricedModel("mystery".into())
        );
    }

    #[test]
    fn negative_rates_rejected() {
        let err = PricingTable::new([(
            "m".to_string(),
            Rate {
                input_usd_per_1k: -1.0,
                output_usd_per_1k: 0.0,
            },
        )])
        .unwrap_err();
        assert_eq!(err, CostError::NegativeRate("m".into()));
    }

    #[test]
    fn csv_has_one_row_per_group() {
        let ledger = [
            entry(Stage::Qg, "gpt-4o-mini", 10, 1),
            entry(Stage::Qg, "gpt-4o-mini", 10, 1),
            entry(Stage::Sag, "gpt-4o-mini", 10, 1),
        ];
        let csv = cost_report(items(&ledger), &mini()).unwrap().to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.contains("hotpotqa,treerare-dt,qg,gpt-4o-mini,2,20,2,"));
    }
}
