//! Recipe configuration files: a JSON document declaring substances by name
//! and recipes referencing them, with optional grid/lamp/noise overrides.
//! Unknown keys are rejected everywhere so typos fail at parse time.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{LampConfig, NoiseConfig};
use crate::spectral::{
    AbsorptionBand, Contaminant, Luminescence, SampleRecipe, SubstanceProfile, WavelengthGrid,
};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SubstanceSpec {
    #[serde(default)]
    pub bands: Vec<AbsorptionBand>,
    #[serde(default)]
    pub scattering: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub luminescence: Option<Luminescence>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ContaminantSpec {
    pub substance: String,
    pub dose: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RecipeSpec {
    pub label: String,
    pub substance: String,
    #[serde(default = "default_api_fraction")]
    pub api_fraction: f64,
    /// Name of the make-weight substance; omitted means fully transparent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filler: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contaminant: Option<ContaminantSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilution_percent: Option<f64>,
}

fn default_api_fraction() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RecipeConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub grid: WavelengthGrid,
    #[serde(default)]
    pub lamp: LampConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
    pub substances: BTreeMap<String, SubstanceSpec>,
    pub recipes: Vec<RecipeSpec>,
}

impl RecipeConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let config: RecipeConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    fn substance(&self, name: &str) -> Result<SubstanceProfile> {
        let spec = self
            .substances
            .get(name)
            .ok_or_else(|| Error::config(format!("recipe references unknown substance {name:?}")))?;
        let profile = SubstanceProfile {
            name: name.to_string(),
            bands: spec.bands.clone(),
            scattering: spec.scattering,
            luminescence: spec.luminescence,
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported config schema version {}",
                self.schema_version
            )));
        }
        self.grid.validate()?;
        self.lamp.validate()?;
        self.noise.validate()?;
        if self.recipes.is_empty() {
            return Err(Error::config("config declares no recipes"));
        }
        self.resolve().map(|_| ())
    }

    /// Resolve substance references into standalone recipes.
    pub fn resolve(&self) -> Result<Vec<SampleRecipe>> {
        let mut out = Vec::with_capacity(self.recipes.len());
        let mut labels = std::collections::BTreeSet::new();
        for spec in &self.recipes {
            if !labels.insert(spec.label.clone()) {
                return Err(Error::config(format!(
                    "duplicate recipe label {:?}",
                    spec.label
                )));
            }
            let filler = match &spec.filler {
                Some(name) => self.substance(name)?,
                None => SubstanceProfile::transparent("transparent"),
            };
            let contaminant = match &spec.contaminant {
                Some(c) => Some(Contaminant {
                    substance: self.substance(&c.substance)?,
                    dose: c.dose,
                }),
                None => None,
            };
            let recipe = SampleRecipe {
                label: spec.label.clone(),
                substance: self.substance(&spec.substance)?,
                api_fraction: spec.api_fraction,
                filler,
                contaminant,
                dilution_percent: spec.dilution_percent,
            };
            recipe.validate()?;
            out.push(recipe);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "substances": {
            "dye": {"bands": [{"center_nm": 520.0, "sigma_nm": 18.0, "strength": 1.0}], "scattering": 0.2}
        },
        "recipes": [
            {"label": "full", "substance": "dye", "api_fraction": 1.0},
            {"label": "blank", "substance": "dye", "api_fraction": 0.0}
        ]
    }"#;

    #[test]
    fn minimal_config_parses_and_resolves() {
        let config = RecipeConfig::from_str(MINIMAL).unwrap();
        let recipes = config.resolve().unwrap();
        assert_eq!(recipes.len(), 2);
        assert_eq!(recipes[0].label, "full");
        assert_eq!(recipes[0].substance.bands.len(), 1);
        assert_eq!(recipes[1].api_fraction, 0.0);
        assert_eq!(config.grid, WavelengthGrid::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replacen("\"schema_version\"", "\"typo_key\": 1, \"schema_version\"", 1);
        assert!(RecipeConfig::from_str(&text).is_err());
    }

    #[test]
    fn unknown_substance_reference_fails() {
        let text = MINIMAL.replace("\"substance\": \"dye\", \"api_fraction\": 1.0", "\"substance\": \"ghost\", \"api_fraction\": 1.0");
        let err = RecipeConfig::from_str(&text).unwrap_err().to_string();
        assert!(err.contains("ghost"), "error should name the substance: {err}");
    }

    #[test]
    fn duplicate_labels_fail() {
        let text = MINIMAL.replace("\"label\": \"blank\"", "\"label\": \"full\"");
        assert!(RecipeConfig::from_str(&text).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let config = RecipeConfig::from_str(MINIMAL).unwrap();
        let text = serde_json::to_string(&config).unwrap();
        let back = RecipeConfig::from_str(&text).unwrap();
        assert_eq!(config, back);
    }
}
