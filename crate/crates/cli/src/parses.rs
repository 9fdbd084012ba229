//! Where question parses come from: a directory of `<qid>.conllu` /
//! `<qid>.ptb` files, or a parser service speaking
//! `POST /parse {text, formalism}` -> `{format, payload}`.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};
use treerare::syntax::{parse_conllu, parse_ptb, Formalism, SyntaxTree};

pub enum ParseSource {
    Dir(PathBuf),
    Service(SidecarClient),
}

impl ParseSource {
    pub fn tree(&self, qid: &str, text: &str, formalism: Formalism) -> anyhow::Result<SyntaxTree> {
        match self {
            ParseSource::Dir(dir) => {
                let path = dir.join(format!("{qid}.{}", formalism.file_extension()));
                let raw = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                ingest(&raw, formalism).with_context(|| format!("parsing {}", path.display()))
            }
            ParseSource::Service(client) => client.parse(text, formalism),
        }
    }
}

fn ingest(raw: &str, formalism: Formalism) -> anyhow::Result<SyntaxTree> {
    Ok(match formalism {
        Formalism::Dependency => parse_conllu(raw)?,
        Formalism::Constituency => parse_ptb(raw)?,
    })
}

pub struct SidecarClient {
    base: String,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ParseRequest<'a> {
    text: &'a str,
    formalism: Formalism,
}

#[derive(Deserialize)]
struct ParseResponse {
    format: String,
    payload: String,
}

/// Failure to reach the service at all, as opposed to a bad parse.
#[derive(Debug, thiserror::Error)]
#[error("parser service unreachable: {0}")]
pub struct Unreachable(String);

impl SidecarClient {
    pub fn new(base: &str, timeout: Duration) -> Self {
        SidecarClient {
            base: base.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    /// `GET /healthz`.
    pub fn check(&self) -> Result<(), Unreachable> {
        self.agent
            .get(&format!("{}/healthz", self.base))
            .call()
            .map(|_| ())
            .map_err(|e| Unreachable(e.to_string()))
    }

    pub fn parse(&self, text: &str, formalism: Formalism) -> anyhow::Result<SyntaxTree> {
        let resp = match self
            .agent
            .post(&format!("{}/parse", self.base))
            .send_json(ParseRequest { text, formalism })
        {
            Ok(r) => r,
            Err(ureq::Error::Status(code, r)) => {
                bail!("parser service returned {code}: {}", r.into_string().unwrap_or_default())
            }
            Err(e) => return Err(Unreachable(e.to_string()).into()),
        };
        let body: ParseResponse = resp.into_json().context("parser service response")?;
        let expected = formalism.file_extension();
        if body.format != expected {
            return Err(anyhow!("parser service sent {:?}, expected {expected:?}", body.format));
        }
        ingest(&body.payload, formalism)
    }
}
