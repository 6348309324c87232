use crate::catalog::{Catalog, Substrate, GROUPS};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityConfig {
    /// Largest allowed ratio of the maximum to the minimum vertex distance.
    pub max_min_distance_ratio: f64,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            max_min_distance_ratio: 20.0,
            min_angle_deg: 15.0,
            max_angle_deg: 160.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Canvas {
    pub width: f64,
    pub height: f64,
}

impl Default for Canvas {
    fn default() -> Self {
        Self {
            width: 100.0,
            height: 100.0,
        }
    }
}

/// Parameters of figure generation. Every field has a default, so a
/// config file only needs the keys it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Substrate rounds. Values above 1 need the `multi-substrate` feature.
    pub n: usize,
    /// Line rounds; unset means uniform in `1..=3` per figure.
    pub k: Option<usize>,
    /// Upper bound of theorems sampled per category; each figure draws
    /// its count uniformly from `1..=theorems_per_category`.
    pub theorems_per_category: usize,
    /// Weights keyed by substrate group (`quadrilateral`), by kind
    /// (`rhombus`), or by `kind:<kind>` where a kind shares a group name.
    pub substrate_distribution: BTreeMap<String, f64>,
    pub fidelity: FidelityConfig,
    pub seed: u64,
    pub canvas: Canvas,
    /// Attempts per figure before giving up.
    pub retry_budget: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n: 1,
            k: None,
            theorems_per_category: 3,
            substrate_distribution: group_one(),
            fidelity: FidelityConfig::default(),
            seed: 0,
            canvas: Canvas::default(),
            retry_budget: 64,
        }
    }
}

fn mix(w: [f64; 5]) -> BTreeMap<String, f64> {
    GROUPS.iter().zip(w).map(|(k, w)| (k.to_string(), w)).collect()
}

/// The default polygon mix: triangle 29, quadrilateral 46, circle 17,
/// pentagon 5, hexagon 3.
pub fn group_one() -> BTreeMap<String, f64> {
    mix([29.0, 46.0, 17.0, 5.0, 3.0])
}

/// Named polygon mixes: `group1`, `group2`, `group3`.
pub fn distribution_preset(name: &str) -> Option<BTreeMap<String, f64>> {
    match name {
        "group1" => Some(group_one()),
        "group2" => Some(mix([32.0, 40.0, 14.0, 8.0, 6.0])),
        "group3" => Some(mix([25.0, 33.0, 21.0, 12.0, 8.0])),
        _ => None,
    }
}

impl GenerationConfig {
    pub fn validate(&self, catalog: &Catalog) -> Result<(), String> {
        if self.n == 0 {
            return Err("n must be positive".into());
        }
        if self.n > 1 && !cfg!(feature = "multi-substrate") {
            return Err("n > 1 requires the multi-substrate feature".into());
        }
        if self.k == Some(0) {
            return Err("k must be positive".into());
        }
        if !(1..=3).contains(&self.theorems_per_category) {
            return Err(format!(
                "theorems_per_category must be in 1..=3, got {}",
                self.theorems_per_category
            ));
        }
        let f = &self.fidelity;
        if !(f.min_angle_deg < f.max_angle_deg) {
            return Err("fidelity.min_angle_deg must be below max_angle_deg".into());
        }
        if !(f.max_min_distance_ratio > 1.0) {
            return Err("fidelity.max_min_distance_ratio must exceed 1".into());
        }
        if !(self.canvas.width > 0.0 && self.canvas.height > 0.0) {
            return Err("canvas must have positive size".into());
        }
        if self.retry_budget == 0 {
            return Err("retry_budget must be positive".into());
        }
        let mut total = 0.0;
        for (key, w) in &self.substrate_distribution {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(format!("weight for {key:?} must be a non-negative number"));
            }
            if resolve_key(catalog, key).is_empty() {
                return Err(format!("unknown substrate group or kind {key:?}"));
            }
            total += w;
        }
        if total <= 0.0 {
            return Err("substrate_distribution weights are all zero".into());
        }
        Ok(())
    }
}

/// Substrates selected by a distribution key.
pub fn resolve_key<'c>(catalog: &'c Catalog, key: &str) -> Vec<&'c Substrate> {
    if let Some(kind) = key.strip_prefix("kind:") {
        return catalog.substrate_by_kind(kind).into_iter().collect();
    }
    if GROUPS.contains(&key) {
        return catalog.substrates.iter().filter(|s| s.group == key).collect();
    }
    catalog.substrate_by_kind(key).into_iter().collect()
}
