//! Multi-stage material-property estimation: describe the object, propose
//! candidate materials, pick one, and estimate its density, Young's modulus
//! and Poisson ratio.
//!
//! Two providers implement the stages: [`OfflineProvider`] answers from a
//! material catalog, [`RemoteProvider`] queries a chat-completion endpoint.

mod cache;
mod catalog;
mod offline;
mod parse;
mod remote;
mod transport;

pub use cache::{cache_key, PropertyCache};
pub use catalog::{CatalogEntry, MaterialCatalog};
pub use offline::{overlap_score, select_by_overlap, OfflineProvider};
pub use parse::{extract_json_block, parse_density, parse_modulus, parse_poisson};
pub use remote::{RemoteProvider, PROMPT_VERSION};
pub use transport::{HttpReply, Transport, UreqTransport};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::materials::MaterialProperties;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialCandidate {
    pub name: String,
    pub rigid: bool,
    pub confidence: f64,
}

impl MaterialCandidate {
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::perception("propose", "candidate with empty name"));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::perception("propose", format!("confidence {} outside [0, 1]", self.confidence)));
        }
        Ok(())
    }
}

/// Remote endpoint settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    /// Base URL of an OpenAI-compatible API; `/chat/completions` is appended.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// Number of candidate materials requested (K).
    pub candidate_count: usize,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o".into(),
            api_key_env: "SPLATSIM_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            candidate_count: 5,
            backoff_ms: 500,
            extra: BTreeMap::new(),
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::validation("perception.timeout_secs", "must be > 0"));
        }
        if self.candidate_count < 1 {
            return Err(Error::validation("perception.candidate_count", "must be >= 1"));
        }
        if self.base_url.trim().is_empty() {
            return Err(Error::validation("perception.base_url", "must be nonempty"));
        }
        Ok(())
    }
}

/// One implementation of the four estimation stages.
pub trait Provider: Send + Sync {
    /// Short caption for the object.
    fn describe(&self, image: Option<&[u8]>, tag: &str) -> Result<String>;
    /// Up to `k` candidates, most confident first.
    fn propose_materials(&self, image: Option<&[u8]>, caption: &str, k: usize) -> Result<Vec<MaterialCandidate>>;
    fn select_material(
        &self,
        image: Option<&[u8]>,
        caption: &str,
        candidates: &[MaterialCandidate],
    ) -> Result<MaterialCandidate>;
    fn estimate_properties(
        &self,
        image: Option<&[u8]>,
        caption: &str,
        material: &MaterialCandidate,
    ) -> Result<MaterialProperties>;
    /// Identifies everything about the provider that can change its answers.
    fn fingerprint(&self) -> String;
    fn candidate_count(&self) -> usize;
}

/// Run describe → propose → select → estimate for one object.
///
/// An override short-circuits everything. With a cache, a hit skips the
/// provider and a miss stores the result.
pub fn perceive_object(
    image: Option<&[u8]>,
    tag: &str,
    property_override: Option<&MaterialProperties>,
    provider: &dyn Provider,
    cache: Option<&PropertyCache>,
) -> Result<MaterialProperties> {
    if let Some(p) = property_override {
        p.validate()?;
        return Ok(p.clone());
    }
    let key = cache_key(image.unwrap_or_default(), tag, &provider.fingerprint());
    if let Some(hit) = cache.and_then(|c| c.get(&key)) {
        return Ok(hit);
    }
    let caption = provider.describe(image, tag)?;
    if caption.trim().is_empty() {
        return Err(Error::perception("describe", "empty caption"));
    }
    let candidates = provider.propose_materials(image, &caption, provider.candidate_count())?;
    if candidates.is_empty() {
        return Err(Error::perception("propose", "no candidate materials"));
    }
    let chosen = provider.select_material(image, &caption, &candidates)?;
    let mut props = provider.estimate_properties(image, &caption, &chosen)?;
    props.rigid = chosen.rigid;
    if props.material_name.is_empty() {
        props.material_name = chosen.name.clone();
    }
    props.validate().map_err(|e| Error::perception("estimate", e.to_string()))?;
    if let Some(c) = cache {
        c.put(&key, &props);
    }
    Ok(props)
}
