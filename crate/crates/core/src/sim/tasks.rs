//! Built-in benchmark tasks with fixed seeds.
//!
//! These are the default experiments the CLI and the acceptance suite run;
//! the JSON files under `configs/` in the repository are serializations of
//! exactly these values (a test keeps them in sync).

use std::collections::BTreeMap;

use crate::sim::config::{ContaminantSpec, RecipeConfig, RecipeSpec, SubstanceSpec, CONFIG_SCHEMA_VERSION};
use crate::sim::{LampConfig, NoiseConfig};
use crate::spectral::{AbsorptionBand, Luminescence, WavelengthGrid};

fn band(center_nm: f64, sigma_nm: f64, strength: f64) -> AbsorptionBand {
    AbsorptionBand {
        center_nm,
        sigma_nm,
        strength,
    }
}

/// Shared substance library for the built-in tasks.
fn substances() -> BTreeMap<String, SubstanceSpec> {
    let mut map = BTreeMap::new();
    // A paracetamol-style analgesic: a wide moderate absorber (dilution
    // stays near-linear in pixel space) that glows near full concentration
    // (a narrow violet emission line).
    map.insert(
        "analgesic".to_string(),
        SubstanceSpec {
            bands: vec![band(520.0, 60.0, 0.5), band(430.0, 14.0, 0.35)],
            scattering: 0.3,
            luminescence: Some(Luminescence {
                center_nm: 445.0,
                width_nm: 7.0,
                intensity: 0.5,
                threshold: 0.7,
            }),
        },
    );
    // White sugar make-weight: optically blank.
    map.insert(
        "sucrose".to_string(),
        SubstanceSpec {
            bands: vec![],
            scattering: 0.05,
            luminescence: None,
        },
    );
    map.insert(
        "apple_juice".to_string(),
        SubstanceSpec {
            bands: vec![band(430.0, 28.0, 0.22)],
            scattering: 0.12,
            luminescence: None,
        },
    );
    // Cranberry juice absorbs much more of the band and is murkier, which
    // makes its contamination task the noisier one.
    map.insert(
        "cranberry_juice".to_string(),
        SubstanceSpec {
            bands: vec![band(530.0, 40.0, 0.95), band(430.0, 25.0, 0.35)],
            scattering: 0.6,
            luminescence: None,
        },
    );
    map.insert(
        "pesticide".to_string(),
        SubstanceSpec {
            bands: vec![band(610.0, 16.0, 0.85)],
            scattering: 0.15,
            luminescence: Some(Luminescence {
                center_nm: 520.0,
                width_nm: 6.0,
                intensity: 0.45,
                threshold: 0.0,
            }),
        },
    );
    // Wide scatterers and a strong glower, used by the optics contrast tests.
    map.insert(
        "macrolide".to_string(),
        SubstanceSpec {
            bands: vec![band(470.0, 35.0, 0.6), band(560.0, 30.0, 0.5)],
            scattering: 2.2,
            luminescence: None,
        },
    );
    map.insert(
        "cephalosporin".to_string(),
        SubstanceSpec {
            bands: vec![band(550.0, 120.0, 2.4)],
            scattering: 0.1,
            luminescence: Some(Luminescence {
                center_nm: 480.0,
                width_nm: 5.0,
                intensity: 1.2,
                threshold: 0.0,
            }),
        },
    );
    map
}

fn base_config(master_seed: u64, per_class: usize, recipes: Vec<RecipeSpec>) -> RecipeConfig {
    RecipeConfig {
        schema_version: CONFIG_SCHEMA_VERSION,
        grid: WavelengthGrid::default(),
        lamp: LampConfig::default(),
        noise: NoiseConfig::default(),
        master_seed: Some(master_seed),
        per_class: Some(per_class),
        substances: substances(),
        recipes,
    }
}

/// Binary authenticity: genuine tablet vs. a sugar-only placebo.
pub fn placebo_task() -> RecipeConfig {
    base_config(
        101,
        1000,
        vec![
            RecipeSpec {
                label: "authentic".to_string(),
                substance: "analgesic".to_string(),
                api_fraction: 1.0,
                filler: Some("sucrose".to_string()),
                contaminant: None,
                dilution_percent: None,
            },
            RecipeSpec {
                label: "placebo".to_string(),
                substance: "analgesic".to_string(),
                api_fraction: 0.0,
                filler: Some("sucrose".to_string()),
                contaminant: None,
                dilution_percent: None,
            },
        ],
    )
}

fn juice_task(master_seed: u64, juice: &str, dose: f64) -> RecipeConfig {
    base_config(
        master_seed,
        1000,
        vec![
            RecipeSpec {
                label: "clean".to_string(),
                substance: juice.to_string(),
                api_fraction: 1.0,
                filler: None,
                contaminant: None,
                dilution_percent: None,
            },
            RecipeSpec {
                label: "contaminated".to_string(),
                substance: juice.to_string(),
                api_fraction: 1.0,
                filler: None,
                contaminant: Some(ContaminantSpec {
                    substance: "pesticide".to_string(),
                    dose,
                }),
                dilution_percent: None,
            },
        ],
    )
}

/// Pesticide residue in clear apple juice: the easy contamination pair.
pub fn apple_task() -> RecipeConfig {
    juice_task(202, "apple_juice", 0.4)
}

/// Pesticide residue in dark cranberry juice: the hard contamination pair.
pub fn cranberry_task() -> RecipeConfig {
    juice_task(303, "cranberry_juice", 0.3)
}

/// Five-level dilution series of the analgesic; `dilution_percent` is the
/// share of tablet mass replaced by sucrose, so level 25 keeps 75% of the
/// active ingredient.
pub fn dilution_task() -> RecipeConfig {
    let recipes = [0.0, 25.0, 50.0, 75.0, 100.0]
        .iter()
        .map(|&p| RecipeSpec {
            label: format!("dilution_{p:03.0}"),
            substance: "analgesic".to_string(),
            api_fraction: 1.0 - p / 100.0,
            filler: Some("sucrose".to_string()),
            contaminant: None,
            dilution_percent: Some(p),
        })
        .collect();
    base_config(404, 600, recipes)
}

/// All built-in tasks by name.
pub fn builtin(name: &str) -> Option<RecipeConfig> {
    match name {
        "placebo" => Some(placebo_task()),
        "apple" => Some(apple_task()),
        "cranberry" => Some(cranberry_task()),
        "dilution" => Some(dilution_task()),
        _ => None,
    }
}

pub const TASK_NAMES: [&str; 4] = ["placebo", "apple", "cranberry", "dilution"];
