use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Duration;

use anyhow::Context;
use clap::Args;
use treerare::eval::{load_dataset, sample, DatasetFormat, QuestionRecord, DEFAULT_SEED};
use treerare::index::{Index, RelevanceScorer};
use treerare::pipeline::{Method, Pipeline, Question, RunTrace};

use super::read_traces;
use crate::config::{ProviderKind, RunConfig};
use crate::exit::{input_error, Classify, CmdResult, Failure};
use crate::manifest::{self, Checksums, RunManifest};
use crate::parses::{ParseSource, SidecarClient, Unreachable};

#[derive(Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "unified")]
    pub format: DatasetFormat,
    /// Name recorded in traces; defaults to the dataset file stem.
    #[arg(long)]
    pub dataset_id: Option<String>,
    /// e.g. treerare-dt, tree-retrieval-ct, ablation:no-sag
    #[arg(long)]
    pub method: Method,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Directory of `<question_id>.conllu` / `<question_id>.ptb` files.
    #[arg(long, conflicts_with = "sidecar")]
    pub parses: Option<PathBuf>,
    /// Base URL of a parser service.
    #[arg(long)]
    pub sidecar: Option<String>,
    /// JSONL trace file; existing question ids are skipped.
    #[arg(long)]
    pub out: PathBuf,
    /// Questions processed concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for sampling `--limit` questions.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Random sample size; all questions when omitted.
    #[arg(long)]
    pub limit: Option<usize>,
}

/// Why a question produced no trace.
enum Skip {
    Parse(anyhow::Error),
    Pipeline(anyhow::Error),
}

type Outcome = Result<RunTrace, Skip>;

pub fn run(args: &RunArgs) -> CmdResult {
    let cfg = RunConfig::load(&args.config).input()?;
    let records = load_dataset(&args.dataset, args.format)
        .with_context(|| format!("loading {}", args.dataset.display()))
        .input()?;
    let records = match args.limit {
        Some(n) if n < records.len() => sample(&records, n, args.seed).input()?,
        _ => records,
    };
    let dataset_id = args.dataset_id.clone().unwrap_or_else(|| {
        args.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let index = Index::load(&args.index)
        .with_context(|| format!("loading index {}", args.index.display()))
        .input()?;

    let formalism = args.method.formalism().unwrap_or(cfg.pipeline.formalism);
    let parses = parse_source(args)?;
    if args.method.uses_tree() && parses.is_none() {
        return Err(input_error(format!("{} needs --parses or --sidecar", args.method)));
    }

    let done = completed_ids(&args.out).input()?;
    let manifest = RunManifest {
        version: manifest::version(),
        dataset: dataset_id.clone(),
        method: args.method.to_string(),
        seed: args.seed,
        limit: args.limit,
        config: cfg.clone(),
        checksums: checksums(args, &cfg).input()?,
        started_at: vec![manifest::now()],
    };
    write_manifest(&args.out, manifest)?;

    let gateway = cfg.gateway().input()?;
    let pipeline = Pipeline::new(&cfg.pipeline, &index, &gateway).input()?;
    let scorer = cfg.scorer();
    let pending: Vec<&QuestionRecord> = records.iter().filter(|r| !done.contains(&r.id)).collect();
    eprintln!(
        "{}: {} questions, {} already done, {} to run",
        args.method,
        records.len(),
        records.len() - pending.len(),
        pending.len()
    );

    let job = |rec: &&QuestionRecord| -> Outcome {
        let question = Question {
            id: &rec.id,
            text: &rec.question,
        };
        let tree = match (&parses, args.method.uses_tree()) {
            (Some(src), true) => Some(src.tree(&rec.id, &rec.question, formalism).map_err(Skip::Parse)?),
            _ => None,
        };
        let mut trace = pipeline
            .run(args.method, &question, tree.as_ref(), Some(scorer.as_ref() as &dyn RelevanceScorer))
            .map_err(|e| Skip::Pipeline(e.into()))?;
        trace.dataset = dataset_id.clone();
        Ok(trace)
    };

    let mut out = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&args.out)
        .with_context(|| format!("opening {}", args.out.display()))
        .input()?;
    let mut tally = Tally::default();
    let mut sink = |rec: &&QuestionRecord, outcome: Outcome| -> CmdResult {
        match outcome {
            Ok(trace) => {
                let line = serde_json::to_string(&trace).input()?;
                writeln!(out, "{line}").input()?;
                out.flush().input()?;
                match &trace.fatal_error {
                    Some(e) => {
                        tally.fatal += 1;
                        eprintln!("{}: {e}", rec.id);
                    }
                    None => tally.ok += 1,
                }
                tally.calls += trace.llm_calls();
            }
            Err(Skip::Parse(e)) => {
                if e.downcast_ref::<Unreachable>().is_some() {
                    return Err(Failure::Dependency(e));
                }
                tally.skipped += 1;
                eprintln!("{}: no parse: {e:#}", rec.id);
            }
            Err(Skip::Pipeline(e)) => {
                tally.skipped += 1;
                eprintln!("{}: {e:#}", rec.id);
            }
        }
        Ok(())
    };
    for_each_ordered(&pending, args.jobs, job, &mut sink)?;

    eprintln!(
        "wrote {} traces ({} with fatal errors), {} questions skipped, {} model calls",
        tally.ok + tally.fatal,
        tally.fatal,
        tally.skipped,
        tally.calls
    );
    let attempted = pending.len();
    if attempted > 0 && (tally.ok as f64) < cfg.min_success_fraction * attempted as f64 {
        return Err(Failure::Partial(format!(
            "{}/{attempted} questions succeeded, below min_success_fraction {}",
            tally.ok, cfg.min_success_fraction
        )));
    }
    Ok(())
}

#[derive(Default)]
struct Tally {
    ok: usize,
    fatal: usize,
    skipped: usize,
    calls: usize,
}

fn parse_source(args: &RunArgs) -> CmdResult<Option<ParseSource>> {
    if let Some(dir) = &args.parses {
        if !dir.is_dir() {
            return Err(input_error(format!("parse directory {} does not exist", dir.display())));
        }
        return Ok(Some(ParseSource::Dir(dir.clone())));
    }
    match &args.sidecar {
        Some(url) => {
            let client = SidecarClient::new(url, Duration::from_secs(60));
            client.check().dependency()?;
            Ok(Some(ParseSource::Service(client)))
        }
        None => Ok(None),
    }
}

fn completed_ids(out: &Path) -> anyhow::Result<HashSet<String>> {
    if !out.exists() {
        return Ok(HashSet::new());
    }
    Ok(read_traces(out)?.into_iter().map(|t| t.question_id).collect())
}

fn checksums(args: &RunArgs, cfg: &RunConfig) -> anyhow::Result<Checksums> {
    let meta = treerare::index::read_meta(&args.index)?;
    let transcript = match (cfg.llm.provider, &cfg.llm.transcript) {
        (ProviderKind::Mock, Some(p)) => Some(manifest::sha256_file(p)?),
        _ => None,
    };
    Ok(Checksums {
        config_sha256: manifest::sha256_file(&args.config)?,
        dataset_sha256: manifest::sha256_file(&args.dataset)?,
        index_sha256: meta.data_sha256,
        transcript_sha256: transcript,
    })
}

/// Resuming into a trace file produced from different inputs is refused.
fn write_manifest(out: &Path, mut fresh: RunManifest) -> CmdResult {
    let path = manifest::path_for(out);
    if let Some(mut previous) = RunManifest::read(&path).input()? {
        if out.exists() {
            if !previous.same_inputs(&fresh) {
                return Err(input_error(format!(
                    "{} was produced from different inputs (see {}); use a new --out",
                    out.display(),
                    path.display()
                )));
            }
            previous.started_at.extend(fresh.started_at);
            fresh = previous;
        }
    }
    fresh.write(&path).input()
}

/// Runs `job` over `items` on up to `jobs` threads and hands results to
/// `sink` in input order, as soon as each prefix is complete.
fn for_each_ordered<T, R, J, S>(items: &[T], jobs: usize, job: J, sink: &mut S) -> CmdResult
where
    T: Sync,
    R: Send,
    J: Fn(&T) -> R + Sync,
    S: FnMut(&T, R) -> CmdResult,
{
    if jobs <= 1 {
        for item in items {
            sink(item, job(item))?;
        }
        return Ok(());
    }
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..jobs.min(items.len()) {
            let tx = tx.clone();
            let (next, stop, job) = (&next, &stop, &job);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                if tx.send((i, job(item))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut buffered = BTreeMap::new();
        let mut emit = 0;
        for (i, r) in rx {
            buffered.insert(i, r);
            while let Some(r) = buffered.remove(&emit) {
                if let Err(e) = sink(&items[emit], r) {
                    stop.store(true, Ordering::Relaxed);
                    return Err(e);
                }
                emit += 1;
            }
        }
        Ok(())
    })
}
