//! Candidate generators: offline replay fixtures and an HTTP adapter, plus
//! the review export for rejected candidates.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use argmine_core::augment::{
    AugmentError, GenerationRequest, Generator, GeneratorSpec, ReplayGenerator, SyntheticAdu,
};
use argmine_core::Stance;
use serde::{Deserialize, Serialize};

/// Environment variable holding the bearer token for HTTP generators.
pub const API_KEY_ENV: &str = "ARGMINE_GENERATOR_API_KEY";

#[derive(Debug, Deserialize)]
struct FixtureRecord {
    text: String,
    stance: String,
}

/// Reads a replay fixture: one `{"text": ..., "stance": ...}` object per
/// line. Blank lines are skipped.
pub fn load_replay_fixture(name: &str, path: &Path) -> Result<ReplayGenerator, AugmentError> {
    let unreachable = |reason: String| AugmentError::GeneratorUnreachable {
        name: name.to_string(),
        reason,
    };
    let text =
        fs::read_to_string(path).map_err(|e| unreachable(format!("{}: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: FixtureRecord = serde_json::from_str(line).map_err(|e| {
            AugmentError::Protocol(format!("{} line {}: {e}", path.display(), i + 1))
        })?;
        let stance: Stance = rec.stance.parse().map_err(|_| {
            AugmentError::Protocol(format!("{} line {}: bad stance", path.display(), i + 1))
        })?;
        records.push((rec.text, stance));
    }
    Ok(ReplayGenerator::new(name, records))
}

pub fn write_replay_fixture(path: &Path, records: &[(String, Stance)]) -> std::io::Result<()> {
    let mut out = String::new();
    for (text, stance) in records {
        let line = serde_json::json!({ "stance": stance.as_str(), "text": text });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    fs::write(path, out)
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    prompt: &'a str,
    n: usize,
    decoding: &'a BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct HttpResponse {
    texts: Vec<String>,
}

/// Posts `{prompt, n, decoding}` as JSON and expects `{texts: [...]}` back.
pub struct HttpGenerator {
    name: String,
    endpoint: String,
    decoding: BTreeMap<String, String>,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpGenerator {
    pub fn from_spec(spec: &GeneratorSpec) -> Result<Self, AugmentError> {
        let endpoint = spec
            .endpoint
            .clone()
            .ok_or_else(|| AugmentError::GeneratorUnreachable {
                name: spec.name.clone(),
                reason: "no endpoint configured".into(),
            })?;
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        Ok(HttpGenerator {
            name: spec.name.clone(),
            endpoint,
            decoding: spec.decoding.clone(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            agent: ureq::Agent::new_with_config(config),
        })
    }
}

impl Generator for HttpGenerator {
    fn name(&self) -> &str {
        &self.name
    }

    fn request(&mut self, request: &GenerationRequest) -> Result<Vec<String>, AugmentError> {
        let body = HttpRequest {
            prompt: &request.prompt,
            n: request.n,
            decoding: &self.decoding,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(code) => AugmentError::Protocol(format!("HTTP status {code}")),
            other => AugmentError::GeneratorUnreachable {
                name: self.name.clone(),
                reason: other.to_string(),
            },
        })?;
        let parsed: HttpResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| AugmentError::Protocol(e.to_string()))?;
        Ok(parsed.texts)
    }
}

/// Builds the generator named by the spec. `replay` needs a fixture path.
pub fn generator_from_spec(
    spec: &GeneratorSpec,
    fixture: Option<&Path>,
) -> Result<Box<dyn Generator>, AugmentError> {
    match spec.name.as_str() {
        "replay" => {
            let path = fixture.ok_or_else(|| AugmentError::GeneratorUnreachable {
                name: spec.name.clone(),
                reason: "replay generator needs a fixture file".into(),
            })?;
            Ok(Box::new(load_replay_fixture(&spec.name, path)?))
        }
        _ => Ok(Box::new(HttpGenerator::from_spec(spec)?)),
    }
}

/// Rejected candidates as CSV (`stance,generator,reason,text`) for manual
/// review.
pub fn write_review_csv(path: &Path, rejected: &[SyntheticAdu]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stance", "generator", "reason", "text"])?;
    for r in rejected {
        let reason = r.rejection_reason.map(|x| x.as_str()).unwrap_or("");
        w.write_record([
            r.stance.as_str(),
            r.generator_name.as_str(),
            reason,
            r.text.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Accepted candidates as JSONL.
pub fn write_synthetic_jsonl(path: &Path, accepted: &[SyntheticAdu]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    for a in accepted {
        let v = serde_json::to_value(a).map_err(std::io::Error::other)?;
        writeln!(f, "{v}")?;
    }
    Ok(())
}
