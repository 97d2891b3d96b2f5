use std::time::Duration;

use base64::Engine;
use serde_json::{json, Value};

use super::parse::{extract_json_block, parse_density, parse_modulus, parse_poisson};
use super::{select_by_overlap, MaterialCandidate, Provider, ProviderConfig, Transport};
use crate::error::{Error, Result};
use crate::materials::MaterialProperties;

/// Bumped whenever a prompt template changes; part of the cache fingerprint.
pub const PROMPT_VERSION: &str = "v1";

const DESCRIBE: &str = include_str!("../../prompts/describe.txt");
const PROPOSE: &str = include_str!("../../prompts/propose.txt");
const SELECT: &str = include_str!("../../prompts/select.txt");
const ESTIMATE: &str = include_str!("../../prompts/estimate.txt");
const STRICT: &str = include_str!("../../prompts/strict.txt");

/// Chat-completion client for an OpenAI-compatible multimodal endpoint.
pub struct RemoteProvider {
    config: ProviderConfig,
    api_key: String,
    transport: Box<dyn Transport>,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider").field("config", &self.config).finish_non_exhaustive()
    }
}

fn image_mime(bytes: &[u8]) -> Option<&'static str> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Some("image/png")
    } else if bytes.starts_with(&[0xFF, 0xD8, 0xFF]) {
        Some("image/jpeg")
    } else if bytes.starts_with(b"GIF8") {
        Some("image/gif")
    } else if bytes.len() >= 12 && &bytes[..4] == b"RIFF" && &bytes[8..12] == b"WEBP" {
        Some("image/webp")
    } else {
        None
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

fn reply_text(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    let content = v.get("choices")?.get(0)?.get("message")?.get("content")?;
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect()),
        _ => None,
    }
}

impl RemoteProvider {
    /// Reads the API key from the environment variable named in `config`.
    pub fn new(config: ProviderConfig, transport: Box<dyn Transport>) -> Result<Self> {
        config.validate()?;
        let key = std::env::var(&config.api_key_env).unwrap_or_default();
        if key.trim().is_empty() {
            return Err(Error::perception(
                "configure",
                format!("API key variable `{}` is not set", config.api_key_env),
            ));
        }
        Ok(Self::with_api_key(config, key, transport))
    }

    pub fn with_api_key(config: ProviderConfig, api_key: String, transport: Box<dyn Transport>) -> Self {
        RemoteProvider { config, api_key, transport }
    }

    fn user_message(prompt: &str, image: Option<&[u8]>) -> Value {
        let mut content = vec![json!({"type": "text", "text": prompt})];
        if let Some(bytes) = image {
            let mime = image_mime(bytes).unwrap_or("application/octet-stream");
            let data = base64::engine::general_purpose::STANDARD.encode(bytes);
            content.push(json!({"type": "image_url", "image_url": {"url": format!("data:{mime};base64,{data}")}}));
        }
        json!({"role": "user", "content": content})
    }

    /// One completion, retried with exponential backoff on 429, 5xx,
    /// transport failure and empty content.
    fn chat(&self, stage: &str, messages: &[Value]) -> Result<String> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let body = json!({"model": self.config.model_name, "messages": messages, "temperature": 0}).to_string();
        let headers = vec![("Authorization".to_string(), format!("Bearer {}", self.api_key))];
        let timeout = Duration::from_secs_f64(self.config.timeout_secs);
        let mut problem = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let delay = self.config.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.transport.post_json(&url, &headers, &body, timeout) {
                Err(e) => problem = format!("request failed: {e}"),
                Ok(r) if retryable(r.status) => problem = format!("HTTP {}", r.status),
                Ok(r) if !(200..300).contains(&r.status) => {
                    return Err(Error::perception(stage, format!("HTTP {}: {}", r.status, r.body)));
                }
                Ok(r) => match reply_text(&r.body) {
                    Some(text) if !text.trim().is_empty() => return Ok(text),
                    Some(_) => problem = "empty completion".into(),
                    None => problem = "malformed completion body".into(),
                },
            }
            log::warn!("{stage}: attempt {} failed: {problem}", attempt + 1);
        }
        Err(Error::perception(stage, format!("{problem} after {} attempts", self.config.max_retries + 1)))
    }

    /// Ask for a JSON answer; on a bad reply, reprompt once more strictly.
    fn ask_json<T>(
        &self,
        stage: &str,
        prompt: &str,
        image: Option<&[u8]>,
        accept: impl Fn(&Value) -> std::result::Result<T, String>,
    ) -> Result<T> {
        let mut messages = vec![Self::user_message(prompt, image)];
        let mut problem = String::new();
        for round in 0..2 {
            let reply = self.chat(stage, &messages)?;
            let outcome = match extract_json_block(&reply) {
                Some(v) => accept(&v),
                None => Err("no JSON block found".into()),
            };
            match outcome {
                Ok(t) => return Ok(t),
                Err(p) => problem = p,
            }
            if round == 0 {
                messages.push(json!({"role": "assistant", "content": reply}));
                messages.push(json!({"role": "user", "content": STRICT.replace("{problem}", &problem)}));
            }
        }
        Err(Error::perception(stage, problem))
    }
}

fn parse_candidates(v: &Value, k: usize) -> std::result::Result<Vec<MaterialCandidate>, String> {
    let items = v.get("candidates").unwrap_or(v).as_array().ok_or("expected a `candidates` array")?;
    let mut out: Vec<MaterialCandidate> = items
        .iter()
        .filter_map(|item| {
            let name = item.get("name")?.as_str()?.trim().to_lowercase();
            let rigid = item.get("rigid")?.as_bool()?;
            let confidence = item.get("confidence").and_then(Value::as_f64).unwrap_or(0.0).clamp(0.0, 1.0);
            (!name.is_empty()).then_some(MaterialCandidate { name, rigid, confidence })
        })
        .collect();
    if out.is_empty() {
        return Err("no candidate had both a `name` and a boolean `rigid`".into());
    }
    out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    out.truncate(k);
    Ok(out)
}

fn parse_properties(v: &Value, material: &MaterialCandidate) -> std::result::Result<MaterialProperties, String> {
    let field = |names: &[&str]| names.iter().find_map(|n| v.get(*n));
    let density = field(&["density", "rho"]).ok_or("missing property `density`")?;
    let density = parse_density(density).ok_or(format!("could not read `density` from {density}"))?;
    let modulus = field(&["young_modulus", "youngs_modulus", "E"]).ok_or("missing property `young_modulus`")?;
    let modulus = parse_modulus(modulus).ok_or(format!("could not read `young_modulus` from {modulus}"))?;
    let nu = field(&["poisson_ratio", "nu"]).ok_or("missing property `poisson_ratio`")?;
    let nu = parse_poisson(nu).ok_or(format!("could not read `poisson_ratio` from {nu}"))?;
    let props = MaterialProperties {
        density,
        young_modulus: modulus,
        poisson_ratio: nu,
        rigid: material.rigid,
        material_name: material.name.clone(),
    };
    props.validate().map_err(|e| e.to_string())?;
    Ok(props)
}

impl Provider for RemoteProvider {
    fn describe(&self, image: Option<&[u8]>, tag: &str) -> Result<String> {
        if image.is_some_and(|b| image_mime(b).is_none()) {
            return Err(Error::perception("describe", "image is not PNG, JPEG, GIF or WebP"));
        }
        self.chat("describe", &[Self::user_message(&DESCRIBE.replace("{tag}", tag), image)])
    }

    fn propose_materials(&self, image: Option<&[u8]>, caption: &str, k: usize) -> Result<Vec<MaterialCandidate>> {
        let prompt = PROPOSE.replace("{caption}", caption).replace("{k}", &k.to_string());
        self.ask_json("propose", &prompt, image, |v| parse_candidates(v, k))
    }

    fn select_material(
        &self,
        image: Option<&[u8]>,
        caption: &str,
        candidates: &[MaterialCandidate],
    ) -> Result<MaterialCandidate> {
        if candidates.len() == 1 {
            return Ok(candidates[0].clone());
        }
        let names: Vec<&str> = candidates.iter().map(|c| c.name.as_str()).collect();
        let prompt = SELECT.replace("{caption}", caption).replace("{candidates}", &names.join(", "));
        let chosen = self.ask_json("select", &prompt, image, |v| {
            let name = v.get("name").and_then(Value::as_str).ok_or("missing `name`")?.trim().to_lowercase();
            candidates.iter().find(|c| c.name == name).cloned().ok_or(format!("`{name}` is not one of the candidates"))
        });
        match chosen {
            Ok(c) => Ok(c),
            Err(e) => {
                log::warn!("{e}; falling back to caption overlap");
                select_by_overlap(caption, candidates).ok_or_else(|| Error::perception("select", "no candidates"))
            }
        }
    }

    fn estimate_properties(
        &self,
        image: Option<&[u8]>,
        caption: &str,
        material: &MaterialCandidate,
    ) -> Result<MaterialProperties> {
        let prompt = ESTIMATE.replace("{caption}", caption).replace("{material}", &material.name);
        self.ask_json("estimate", &prompt, image, |v| parse_properties(v, material))
    }

    fn fingerprint(&self) -> String {
        format!(
            "remote:{}:{}:{}:{}",
            self.config.base_url, self.config.model_name, self.config.candidate_count, PROMPT_VERSION
        )
    }

    fn candidate_count(&self) -> usize {
        self.config.candidate_count
    }
}
