//! HTTP scoring backend.
//!
//! Talks a small JSON protocol, POST only. The wire carries token ids;
//! surface text crosses it exactly once, in `/v1/tokenize`:
//!
//! | endpoint         | request      | response              |
//! |------------------|--------------|-----------------------|
//! | `/v1/tokenize`   | `{"text"}`   | `{"ids", "surfaces"}` |
//! | `/v1/detokenize` | `{"ids"}`    | `{"text"}`            |
//! | `/v1/logprobs`   | `{"ids"}`    | `{"logprobs"}`        |
//! | `/v1/logits`     | `{"ids"}`    | `{"logits"}`          |
//! | `/v1/embed`      | `{"ids"}`    | `{"vector"}`          |

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ScoringBackend;
use crate::error::{Error, Result};
use crate::types::TokenSeq;

#[derive(Serialize)]
struct TokenizeRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct TokenizeResponse {
    ids: Vec<u32>,
    surfaces: Vec<String>,
}

#[derive(Serialize)]
struct IdsRequest<'a> {
    ids: &'a [u32],
}

#[derive(Deserialize)]
struct DetokenizeResponse {
    text: String,
}

#[derive(Deserialize)]
struct LogprobsResponse {
    logprobs: Vec<f64>,
}

#[derive(Deserialize)]
struct LogitsResponse {
    logits: Vec<f64>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Client for a scoring server speaking the protocol above.
pub struct RemoteBackend {
    base_url: String,
    client: reqwest::blocking::Client,
    retries: u32,
}

impl RemoteBackend {
    /// Connect to `base_url` (e.g. `http://127.0.0.1:8400`) with a 30s
    /// request timeout and 2 retries on transport errors and 5xx responses.
    pub fn new(base_url: impl Into<String>) -> Result<Self> {
        RemoteBackend::with_timeout(base_url, Duration::from_secs(30), 2)
    }

    pub fn with_timeout(
        base_url: impl Into<String>,
        timeout: Duration,
        retries: u32,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::backend("client", e))?;
        let mut base_url = base_url.into();
        while base_url.ends_with('/') {
            base_url.pop();
        }
        Ok(RemoteBackend {
            base_url,
            client,
            retries,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        endpoint: &str,
        body: &Req,
    ) -> Result<Resp> {
        let url = format!("{}{}", self.base_url, endpoint);
        let mut attempt = 0;
        loop {
            let outcome = self.client.post(&url).json(body).send();
            match outcome {
                Ok(response) => {
                    let status = response.status();
                    if status.is_server_error() && attempt < self.retries {
                        attempt += 1;
                        continue;
                    }
                    if !status.is_success() {
                        return Err(Error::backend(endpoint, format!("status {status}")));
                    }
                    return response
                        .json::<Resp>()
                        .map_err(|e| Error::backend(endpoint, format!("bad response: {e}")));
                }
                Err(e) if attempt < self.retries => {
                    let _ = e;
                    attempt += 1;
                }
                Err(e) => return Err(Error::backend(endpoint, e)),
            }
        }
    }
}

impl ScoringBackend for RemoteBackend {
    fn tokenize(&self, text: &str) -> Result<TokenSeq> {
        let resp: TokenizeResponse = self.post("/v1/tokenize", &TokenizeRequest { text })?;
        TokenSeq::new(resp.ids, resp.surfaces)
            .map_err(|e| Error::backend("/v1/tokenize", e))
    }

    fn detokenize(&self, tokens: &TokenSeq) -> Result<String> {
        let resp: DetokenizeResponse =
            self.post("/v1/detokenize", &IdsRequest { ids: tokens.ids() })?;
        Ok(resp.text)
    }

    fn token_logprobs(&self, tokens: &TokenSeq) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let resp: LogprobsResponse =
            self.post("/v1/logprobs", &IdsRequest { ids: tokens.ids() })?;
        if resp.logprobs.len() != tokens.len() {
            return Err(Error::backend(
                "/v1/logprobs",
                format!(
                    "expected {} logprobs, got {}",
                    tokens.len(),
                    resp.logprobs.len()
                ),
            ));
        }
        Ok(resp.logprobs)
    }

    fn next_token_logits(&self, prefix: &TokenSeq) -> Result<Vec<f64>> {
        let resp: LogitsResponse = self.post("/v1/logits", &IdsRequest { ids: prefix.ids() })?;
        if resp.logits.is_empty() {
            return Err(Error::backend("/v1/logits", "empty logits vector"));
        }
        Ok(resp.logits)
    }

    fn doc_embedding(&self, tokens: &TokenSeq) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        let resp: EmbedResponse = self.post("/v1/embed", &IdsRequest { ids: tokens.ids() })?;
        if resp.vector.is_empty() {
            return Err(Error::backend("/v1/embed", "empty embedding"));
        }
        Ok(resp.vector)
    }
}
