use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Bm25Params, Index, IndexError, Paragraph, Posting};

pub const TOKENIZER_ID: &str = "lower-alnum-v1";
const FORMAT_VERSION: u32 = 1;
const DATA_FILE: &str = "index.bin";
const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format_version: u32,
    pub doc_count: usize,
    pub avg_doc_length: f64,
    pub k1: f64,
    pub b: f64,
    pub tokenizer: String,
    /// SHA-256 of `index.bin`.
    pub data_sha256: String,
}

#[derive(Serialize, Deserialize)]
struct IndexData {
    format_version: u32,
    params: Bm25Params,
    docs: Vec<Paragraph>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
    postings: BTreeMap<String, Vec<Posting>>,
}

impl Index {
    pub fn meta(&self) -> IndexMeta {
        let (_, sha) = self.encode();
        self.meta_with(sha)
    }

    fn meta_with(&self, data_sha256: String) -> IndexMeta {
        IndexMeta {
            format_version: FORMAT_VERSION,
            doc_count: self.docs.len(),
            avg_doc_length: self.avg_doc_length,
            k1: self.params.k1,
            b: self.params.b,
            tokenizer: TOKENIZER_ID.to_string(),
            data_sha256,
        }
    }

    fn encode(&self) -> (Vec<u8>, String) {
        let data = IndexData {
            format_version: FORMAT_VERSION,
            params: self.params,
            docs: self.docs.clone(),
            doc_lengths: self.doc_lengths.clone(),
            avg_doc_length: self.avg_doc_length,
            postings: self.postings.clone(),
        };
        let bytes = bincode::serialize(&data).expect("index data is always serializable");
        let sha = hex(&Sha256::digest(&bytes));
        (bytes, sha)
    }

    /// Writes `index.bin` and `meta.json` into `dir`, creating it if needed.
    /// Output depends only on the corpus and parameters.
    pub fn save(&self, dir: &Path) -> Result<IndexMeta, IndexError> {
        fs::create_dir_all(dir)?;
        let (bytes, sha) = self.encode();
        fs::write(dir.join(DATA_FILE), &bytes)?;
        let meta = self.meta_with(sha);
        let json = serde_json::to_string_pretty(&meta).map_err(|e| IndexError::Format(e.to_string()))?;
        fs::write(dir.join(META_FILE), json + "\n")?;
        Ok(meta)
    }

    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        let meta = read_meta(dir)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(IndexError::Format(format!(
                "unsupported format version {}",
                meta.format_version
            )));
        }
        if meta.tokenizer != TOKENIZER_ID {
            return Err(IndexError::Format(format!("unknown tokenizer {:?}", meta.tokenizer)));
        }
        let bytes = fs::read(dir.join(DATA_FILE))?;
        if hex(&Sha256::digest(&bytes)) != meta.data_sha256 {
            return Err(IndexError::Format("index.bin checksum does not match meta.json".into()));
        }
        let data: IndexData = bincode::deserialize(&bytes).map_err(|e| IndexError::Format(e.to_string()))?;
        Ok(Index::assemble(
            data.params,
            data.docs,
            data.doc_lengths,
            data.avg_doc_length,
            data.postings,
        ))
    }
}

pub fn read_meta(dir: &Path) -> Result<IndexMeta, IndexError> {
    let raw = fs::read_to_string(dir.join(META_FILE))?;
    serde_json::from_str(&raw).map_err(|e| IndexError::Format(format!("meta.json: {e}")))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
