//! Scenario-keyed regression constants.
//!
//! Values are stored as decimal numbers; bit-exact regressions are stored as
//! 16-digit hexadecimal strings of the IEEE-754 representation.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBaseline {
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub bits: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub scenarios: BTreeMap<String, ScenarioBaseline>,
}

pub fn to_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn from_hex(s: &str) -> Option<f64> {
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

impl Baselines {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn value(&self, scenario: &str, key: &str) -> Option<f64> {
        self.scenarios.get(scenario)?.values.get(key).copied()
    }

    pub fn bits(&self, scenario: &str, key: &str) -> Option<f64> {
        from_hex(self.scenarios.get(scenario)?.bits.get(key)?)
    }

    pub fn set_value(&mut self, scenario: &str, key: &str, v: f64) {
        self.scenarios.entry(scenario.into()).or_default().values.insert(key.into(), v);
    }

    pub fn set_bits(&mut self, scenario: &str, key: &str, v: f64) {
        self.scenarios.entry(scenario.into()).or_default().bits.insert(key.into(), to_hex(v));
    }
}
