use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classifier::remote::{Request, Response, Service, Transport};
use crate::{Error, Result};

/// Texts per translation request.
pub const MAX_BATCH: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePair {
    pub source: String,
    pub pivot: String,
}

impl Default for LanguagePair {
    fn default() -> Self {
        LanguagePair {
            source: "en".into(),
            pivot: "de".into(),
        }
    }
}

/// Translates a batch of texts, returning one translation per input in
/// input order.
pub trait Translator: Send + Sync {
    fn name(&self) -> &str;

    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>>;
}

pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, _source: &str, _target: &str, texts: &[String]) -> Result<Vec<String>> {
        Ok(texts.to_vec())
    }
}

/// Word-by-word lookup per language direction; unknown words pass through.
#[derive(Default)]
pub struct DictionaryTranslator {
    tables: HashMap<(String, String), HashMap<String, String>>,
}

impl DictionaryTranslator {
    pub fn with(mut self, source: &str, target: &str, pairs: &[(&str, &str)]) -> Self {
        let table = self
            .tables
            .entry((source.into(), target.into()))
            .or_default();
        for (a, b) in pairs {
            table.insert(a.to_string(), b.to_string());
        }
        self
    }
}

impl Translator for DictionaryTranslator {
    fn name(&self) -> &str {
        "dictionary"
    }

    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>> {
        let table = self.tables.get(&(source.to_string(), target.to_string()));
        Ok(texts
            .iter()
            .map(|t| {
                t.split_whitespace()
                    .map(|w| table.and_then(|m| m.get(w)).map_or(w, String::as_str))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TranslateRequest {
    pub source_lang: String,
    pub target_lang: String,
    pub texts: Vec<String>,
}

/// Speaks the translation wire protocol: `POST /v1/translate` with
/// `{source_lang, target_lang, texts}` answered by `{translations}`.
pub struct TransportTranslator {
    transport: Arc<dyn Transport>,
}

impl TransportTranslator {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        TransportTranslator { transport }
    }
}

impl Translator for TransportTranslator {
    fn name(&self) -> &str {
        self.transport.endpoint()
    }

    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>> {
        let body = json!(TranslateRequest {
            source_lang: source.into(),
            target_lang: target.into(),
            texts: texts.to_vec(),
        });
        let resp = self.transport.send(&Request::post("/v1/translate", body))?;
        let endpoint = self.transport.endpoint().to_string();
        if resp.status != 200 {
            return Err(Error::BackendStatus {
                endpoint,
                status: resp.status,
                message: resp.body.to_string(),
            });
        }
        resp.body
            .get("translations")
            .and_then(Value::as_array)
            .and_then(|xs| xs.iter().map(|v| v.as_str().map(str::to_string)).collect())
            .ok_or_else(|| Error::Protocol {
                endpoint,
                message: "expected {\"translations\": [string]}".into(),
            })
    }
}

/// Serves the translation protocol in-process on top of any [`Translator`].
pub struct TranslationService<T>(pub T);

impl<T: Translator> Service for TranslationService<T> {
    fn handle(&self, request: &Request) -> Response {
        if request.path != "/v1/translate" {
            return Response::error(404, "no route");
        }
        let req: TranslateRequest = match request.body.clone().map(serde_json::from_value) {
            Some(Ok(r)) => r,
            _ => return Response::error(400, "malformed translate request"),
        };
        match self
            .0
            .translate(&req.source_lang, &req.target_lang, &req.texts)
        {
            Ok(t) => Response::ok(json!({ "translations": t })),
            Err(e) => Response::error(500, e.to_string()),
        }
    }
}

/// Round-trips texts through the pivot language in batches of at most
/// [`MAX_BATCH`]. Empty texts are not sent and come back empty.
pub fn backtranslate(
    texts: &[String],
    client: &dyn Translator,
    pair: &LanguagePair,
) -> Result<Vec<String>> {
    let mut out: Vec<String> = texts.to_vec();
    let live: Vec<usize> = (0..texts.len())
        .filter(|&i| !texts[i].trim().is_empty())
        .collect();
    for chunk in live.chunks(MAX_BATCH) {
        let (start, end) = (chunk[0], chunk[chunk.len() - 1] + 1);
        let batch: Vec<String> = chunk.iter().map(|&i| texts[i].clone()).collect();
        let step = |src: &str, tgt: &str, input: &[String]| -> Result<Vec<String>> {
            let got = client
                .translate(src, tgt, input)
                .map_err(|e| Error::Translation {
                    start,
                    end,
                    message: e.to_string(),
                })?;
            if got.len() != input.len() {
                return Err(Error::Translation {
                    start,
                    end,
                    message: format!(
                        "alignment error: {} translations for {} texts ({src}->{tgt})",
                        got.len(),
                        input.len()
                    ),
                });
            }
            Ok(got)
        };
        let pivot = step(&pair.source, &pair.pivot, &batch)?;
        let back = step(&pair.pivot, &pair.source, &pivot)?;
        for (&i, t) in chunk.iter().zip(back) {
            out[i] = t;
        }
    }
    Ok(out)
}
