use std::io::Read;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::materials::MaterialProperties;

const BUILTIN: &str = include_str!("../../data/materials.csv");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub rho_min: f64,
    pub rho_max: f64,
    #[serde(rename = "E_min")]
    pub e_min: f64,
    #[serde(rename = "E_max")]
    pub e_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub rigid: bool,
}

impl CatalogEntry {
    /// Midpoint of every range.
    pub fn properties(&self) -> MaterialProperties {
        MaterialProperties {
            density: 0.5 * (self.rho_min + self.rho_max),
            young_modulus: 0.5 * (self.e_min + self.e_max),
            poisson_ratio: 0.5 * (self.nu_min + self.nu_max),
            rigid: self.rigid,
            material_name: self.name.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ordered = self.rho_min <= self.rho_max && self.e_min <= self.e_max && self.nu_min <= self.nu_max;
        if !ordered {
            return Err(Error::validation("catalog", format!("`{}` has a range with min > max", self.name)));
        }
        for p in [
            MaterialProperties {
                density: self.rho_min,
                young_modulus: self.e_min,
                poisson_ratio: self.nu_min,
                rigid: false,
                material_name: String::new(),
            },
            MaterialProperties {
                density: self.rho_max,
                young_modulus: self.e_max,
                poisson_ratio: self.nu_max,
                rigid: false,
                material_name: String::new(),
            },
        ] {
            p.validate().map_err(|e| Error::validation("catalog", format!("`{}`: {e}", self.name)))?;
        }
        Ok(())
    }
}

/// Material name → property ranges. Names are stored lowercase.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialCatalog {
    entries: Vec<CatalogEntry>,
    source: String,
}

impl MaterialCatalog {
    pub fn builtin() -> Self {
        Self::from_csv(BUILTIN.as_bytes()).expect("bundled catalog is valid")
    }

    pub fn from_csv(mut reader: impl Read) -> Result<Self> {
        let mut source = String::new();
        reader.read_to_string(&mut source).map_err(|e| Error::io("reading material catalog", e))?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source.as_bytes());
        let mut entries: Vec<CatalogEntry> = Vec::new();
        for row in rdr.deserialize::<CatalogEntry>() {
            let mut e = row.map_err(|e| Error::validation("catalog", e.to_string()))?;
            e.name = e.name.to_lowercase();
            e.validate()?;
            if entries.iter().any(|o| o.name == e.name) {
                return Err(Error::validation("catalog", format!("duplicate entry `{}`", e.name)));
            }
            entries.push(e);
        }
        if entries.is_empty() {
            return Err(Error::validation("catalog", "no entries"));
        }
        Ok(MaterialCatalog { entries, source })
    }

    pub fn entries(&self) -> &[CatalogEntry] {
        &self.entries
    }

    /// Case-insensitive exact lookup.
    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        let name = name.trim().to_lowercase();
        self.entries.iter().find(|e| e.name == name)
    }

    /// Raw CSV text, for fingerprinting.
    pub fn source(&self) -> &str {
        &self.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rubber_midpoint() {
        let cat = MaterialCatalog::builtin();
        let rubber = cat.get("Rubber").unwrap();
        assert_eq!((rubber.rho_min, rubber.rho_max), (1000.0, 1200.0));
        assert_eq!(rubber.properties().density, 1100.0);
        assert!(!rubber.rigid);
    }

    #[test]
    fn rejects_out_of_bound_entries() {
        let csv = "name,rho_min,rho_max,E_min,E_max,nu_min,nu_max,rigid\nodd,1,2,1,2,0.4,0.6,false\n";
        assert!(MaterialCatalog::from_csv(csv.as_bytes()).is_err());
    }
}
