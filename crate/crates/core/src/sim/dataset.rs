//! Seeded dataset generation and the on-disk manifest schema.
//!
//! A dataset directory holds one PPM file per image plus `manifest.json`
//! describing every item. Image `i` of recipe `j` is rendered from
//! `image_seed(master_seed, j, i)`, so the output is a pure function of the
//! configuration — independent of generation order and thread count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ppm;
use crate::rng::image_seed;
use crate::sim::{render_spectrum_image, LampConfig, NoiseConfig};
use crate::spectral::{LabeledDataset, SampleRecipe, WavelengthGrid};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestItem {
    pub file: String,
    pub label: String,
    pub dilution_percent: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub grid: WavelengthGrid,
    pub lamp: LampConfig,
    pub noise: NoiseConfig,
    pub master_seed: u64,
    pub items: Vec<ManifestItem>,
}

impl Manifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::format(format!("cannot read {}: {e}", path.display())))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::format(format!(
                "unsupported manifest schema version {}",
                manifest.schema_version
            )));
        }
        Ok(manifest)
    }

    /// Label set in order of first appearance.
    pub fn label_set(&self) -> Vec<String> {
        let mut set = Vec::new();
        for item in &self.items {
            if !set.contains(&item.label) {
                set.push(item.label.clone());
            }
        }
        set
    }

    /// Load every referenced image into memory.
    pub fn load_images(&self, dir: &Path) -> Result<LabeledDataset> {
        let label_set = self.label_set();
        let mut ds = LabeledDataset {
            label_set: label_set.clone(),
            ..LabeledDataset::default()
        };
        for item in &self.items {
            let img = ppm::read_file(&dir.join(&item.file))?;
            let label = label_set
                .iter()
                .position(|l| l == &item.label)
                .expect("label in set");
            ds.images.push(img);
            ds.labels.push(label);
            ds.dilution_percent.push(item.dilution_percent);
            ds.seeds.push(item.seed);
        }
        ds.validate()?;
        Ok(ds)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenerateOptions {
    pub per_class: usize,
    pub master_seed: u64,
}

fn check_recipes(recipes: &[SampleRecipe], opts: &GenerateOptions) -> Result<()> {
    if recipes.is_empty() {
        return Err(Error::config("no recipes to generate"));
    }
    if opts.per_class == 0 {
        return Err(Error::config("per_class must be >= 1"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for r in recipes {
        r.validate()?;
        if !seen.insert(r.label.clone()) {
            return Err(Error::config(format!("duplicate recipe label {:?}", r.label)));
        }
    }
    Ok(())
}

fn item_plan(recipes: &[SampleRecipe], opts: &GenerateOptions) -> Vec<(usize, usize, ManifestItem)> {
    let mut plan = Vec::with_capacity(recipes.len() * opts.per_class);
    for (j, recipe) in recipes.iter().enumerate() {
        for i in 0..opts.per_class {
            plan.push((
                j,
                i,
                ManifestItem {
                    file: format!("{}-{i:05}.ppm", recipe.label),
                    label: recipe.label.clone(),
                    dilution_percent: recipe.dilution_percent,
                    seed: image_seed(opts.master_seed, j as u64, i as u64),
                },
            ));
        }
    }
    plan
}

/// Render `per_class` images per recipe straight into memory.
pub fn render_dataset(
    recipes: &[SampleRecipe],
    grid: &WavelengthGrid,
    lamp: &LampConfig,
    noise: &NoiseConfig,
    opts: &GenerateOptions,
) -> Result<LabeledDataset> {
    check_recipes(recipes, opts)?;
    let plan = item_plan(recipes, opts);
    let images = plan
        .par_iter()
        .map(|(j, _, item)| render_spectrum_image(&recipes[*j], grid, lamp, noise, item.seed))
        .collect::<Result<Vec<_>>>()?;

    let mut ds = LabeledDataset {
        label_set: recipes.iter().map(|r| r.label.clone()).collect(),
        images,
        ..LabeledDataset::default()
    };
    for (j, _, item) in &plan {
        ds.labels.push(*j);
        ds.dilution_percent.push(item.dilution_percent);
        ds.seeds.push(item.seed);
    }
    ds.validate()?;
    Ok(ds)
}

/// Generate a dataset directory: one PPM per image plus the manifest.
/// Returns the manifest. Rerunning with identical arguments reproduces the
/// directory byte for byte.
pub fn generate_dataset(
    recipes: &[SampleRecipe],
    grid: &WavelengthGrid,
    lamp: &LampConfig,
    noise: &NoiseConfig,
    opts: &GenerateOptions,
    out_dir: &Path,
) -> Result<Manifest> {
    check_recipes(recipes, opts)?;
    grid.validate()?;
    lamp.validate()?;
    noise.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let plan = item_plan(recipes, opts);
    plan.par_iter().try_for_each(|(j, _, item)| -> Result<()> {
        let img = render_spectrum_image(&recipes[*j], grid, lamp, noise, item.seed)?;
        ppm::write_file(&img, &out_dir.join(&item.file))
    })?;

    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        grid: *grid,
        lamp: *lamp,
        noise: *noise,
        master_seed: opts.master_seed,
        items: plan.into_iter().map(|(_, _, item)| item).collect(),
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}
