use sha2::{Digest, Sha256};

use super::{MaterialCandidate, MaterialCatalog, Provider};
use crate::error::{Error, Result};
use crate::materials::MaterialProperties;

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase()).collect()
}

fn token_matches(word: &str, name: &str) -> bool {
    // Prefix rule catches derived forms: "wooden" → "wood", "metallic" → "metal".
    word == name || (name.len() >= 3 && word.starts_with(name))
}

/// Number of tokens of `name` that match some token of `caption`.
pub fn overlap_score(caption: &str, name: &str) -> usize {
    let words = tokens(caption);
    tokens(name).iter().filter(|n| words.iter().any(|w| token_matches(w, n))).count()
}

/// Highest overlap with the caption; ties go to higher confidence, then the
/// lexicographically first name.
pub fn select_by_overlap(caption: &str, candidates: &[MaterialCandidate]) -> Option<MaterialCandidate> {
    candidates
        .iter()
        .max_by(|a, b| {
            overlap_score(caption, &a.name)
                .cmp(&overlap_score(caption, &b.name))
                .then(a.confidence.total_cmp(&b.confidence))
                .then(b.name.cmp(&a.name))
        })
        .cloned()
}

/// Deterministic catalog-backed provider; never touches the network.
#[derive(Debug, Clone)]
pub struct OfflineProvider {
    catalog: MaterialCatalog,
    candidate_count: usize,
}

impl OfflineProvider {
    pub fn new(catalog: MaterialCatalog) -> Self {
        OfflineProvider { catalog, candidate_count: 1 }
    }

    pub fn catalog(&self) -> &MaterialCatalog {
        &self.catalog
    }
}

impl Default for OfflineProvider {
    fn default() -> Self {
        Self::new(MaterialCatalog::builtin())
    }
}

impl Provider for OfflineProvider {
    fn describe(&self, _image: Option<&[u8]>, tag: &str) -> Result<String> {
        Ok(tag.to_string())
    }

    fn propose_materials(&self, _image: Option<&[u8]>, caption: &str, _k: usize) -> Result<Vec<MaterialCandidate>> {
        let candidates: Vec<MaterialCandidate> = self
            .catalog
            .entries()
            .iter()
            .filter(|e| overlap_score(caption, &e.name) > 0)
            .map(|e| MaterialCandidate { name: e.name.clone(), rigid: e.rigid, confidence: 1.0 })
            .collect();
        match select_by_overlap(caption, &candidates) {
            Some(best) => Ok(vec![best]),
            None => Err(Error::perception("propose", format!("unknown material for tag `{caption}`"))),
        }
    }

    fn select_material(
        &self,
        _image: Option<&[u8]>,
        caption: &str,
        candidates: &[MaterialCandidate],
    ) -> Result<MaterialCandidate> {
        select_by_overlap(caption, candidates).ok_or_else(|| Error::perception("select", "no candidates"))
    }

    fn estimate_properties(
        &self,
        _image: Option<&[u8]>,
        _caption: &str,
        material: &MaterialCandidate,
    ) -> Result<MaterialProperties> {
        self.catalog
            .get(&material.name)
            .map(|e| e.properties())
            .ok_or_else(|| Error::perception("estimate", format!("unknown material `{}`", material.name)))
    }

    fn fingerprint(&self) -> String {
        format!("offline:{}", hex::encode(Sha256::digest(self.catalog.source().as_bytes())))
    }

    fn candidate_count(&self) -> usize {
        self.candidate_count
    }
}
