pub mod cost;
pub mod eval;
pub mod index;
pub mod run;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::Context;
use treerare::pipeline::RunTrace;

/// Reads a JSONL trace file. Blank lines are ignored.
pub fn read_traces(path: &Path) -> anyhow::Result<Vec<RunTrace>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace = serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.push(trace);
    }
    Ok(out)
}
