use anyhow::Context;
use treerare::index::{read_corpus, Bm25Params, Index};

use crate::exit::{Classify, CmdResult};
use crate::IndexBuildArgs;

pub fn build(args: &IndexBuildArgs) -> CmdResult {
    let corpus = read_corpus(&args.corpus)
        .with_context(|| format!("reading corpus {}", args.corpus.display()))
        .input()?;
    let params = Bm25Params { k1: args.k1, b: args.b };
    let index = Index::build(corpus, params).input()?;
    let meta = index
        .save(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))
        .input()?;
    println!(
        "indexed {} paragraphs (avgdl {:.1}, sha256 {}) into {}",
        meta.doc_count,
        meta.avg_doc_length,
        meta.data_sha256,
        args.out.display()
    );
    Ok(())
}
