//! Scenario configuration documents (JSON).
//!
//! A document bundles a scenario description with every simulation knob:
//! step size and duration, communication, vehicle classes, emission
//! coefficients and advisory settings. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emissions::EmissionCoefficients;
use crate::engine::{SimConfig, VehicleClasses};
use crate::error::{Error, Result};
use crate::glosa::AdvisorySettings;
use crate::scenarios::{
    build, CorridorSpec, Density, GridSpec, RingSpec, ScenarioInstance, ScenarioSpec,
};
use crate::signalctl::GeoOrigin;
use crate::v2i::CommConfig;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "ring",
    "ring-traffic",
    "grid",
    "corridor",
    "corridor-low",
    "corridor-medium",
    "corridor-high",
];

/// Radio range used on the ring track: the chord between the two lights is
/// under 1 km, so every vehicle hears the next light from the previous one.
const RING_RANGE_M: f64 = 1000.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "enabled")]
    pub glosa_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depart_speed: Option<f64>,
}

fn enabled() -> bool {
    true
}

impl Default for SimSection {
    fn default() -> Self {
        let c = SimConfig::default();
        SimSection {
            dt: c.dt,
            duration_s: c.duration_s,
            seed: c.seed,
            glosa_enabled: c.glosa_enabled,
            depart_speed: c.depart_speed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfigDocument {
    pub name: String,
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub comm: CommConfig,
    #[serde(default)]
    pub vehicles: VehicleClasses,
    #[serde(default)]
    pub emissions: EmissionCoefficients,
    #[serde(default)]
    pub advisory: AdvisorySettings,
    #[serde(default)]
    pub geo_origin: GeoOrigin,
}

impl ScenarioConfigDocument {
    pub fn new(name: impl Into<String>, scenario: ScenarioSpec) -> Self {
        ScenarioConfigDocument {
            name: name.into(),
            scenario,
            sim: SimSection::default(),
            comm: CommConfig::default(),
            vehicles: VehicleClasses::default(),
            emissions: EmissionCoefficients::default(),
            advisory: AdvisorySettings::default(),
            geo_origin: GeoOrigin::default(),
        }
    }

    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScenarioConfigDocument = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid scenario document: {e}")))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_kind(e))))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    /// Simulation settings with `seed` substituted.
    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.sim.dt,
            duration_s: self.sim.duration_s,
            seed,
            comm: self.comm,
            vehicles: self.vehicles,
            emissions: self.emissions,
            advisory: self.advisory,
            glosa_enabled: self.sim.glosa_enabled,
            geo_origin: self.geo_origin,
            depart_speed: self.sim.depart_speed,
            trace: false,
        }
    }

    pub fn build(&self, seed: u64) -> Result<ScenarioInstance> {
        let mut instance = build(&self.scenario, seed)?;
        instance.name = self.name.clone();
        Ok(instance)
    }

    /// Checks every section, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        self.sim_config(self.sim.seed)
            .validate()
            .map_err(|e| Error::Config(strip_kind(e)))?;
        // Building also validates geometry, programs and demand.
        build(&self.scenario, self.sim.seed).map_err(|e| Error::Config(format!("scenario: {}", strip_kind(e))))?;
        Ok(())
    }
}

fn strip_kind(e: Error) -> String {
    match e {
        Error::Config(m) | Error::Validation(m) | Error::Input(m) | Error::Logic(m) => m,
        other => other.to_string(),
    }
}

/// Default document for a built-in scenario name.
pub fn builtin(name: &str) -> Option<ScenarioConfigDocument> {
    let text = match name {
        "ring" => include_str!("../../../scenarios/ring.json"),
        "ring-traffic" => include_str!("../../../scenarios/ring-traffic.json"),
        "grid" => include_str!("../../../scenarios/grid.json"),
        "corridor" | "corridor-medium" => include_str!("../../../scenarios/corridor-medium.json"),
        "corridor-low" => include_str!("../../../scenarios/corridor-low.json"),
        "corridor-high" => include_str!("../../../scenarios/corridor-high.json"),
        _ => return None,
    };
    Some(ScenarioConfigDocument::from_json(text).expect("shipped scenario documents are valid"))
}

/// The built-in documents as produced from code defaults.
///
/// The files under `scenarios/` are generated from this and checked against it.
pub fn default_document(name: &str) -> Option<ScenarioConfigDocument> {
    let ring_comm = CommConfig {
        range_m: RING_RANGE_M,
        ..CommConfig::default()
    };
    let doc = match name {
        "ring" => {
            let mut d = ScenarioConfigDocument::new("ring", ScenarioSpec::Ring(RingSpec::default()));
            d.sim.duration_s = 600.0;
            d.comm = ring_comm;
            d
        }
        "ring-traffic" => {
            let mut d =
                ScenarioConfigDocument::new("ring-traffic", ScenarioSpec::Ring(RingSpec::with_traffic()));
            d.sim.duration_s = 2400.0;
            d.comm = ring_comm;
            d
        }
        "grid" => ScenarioConfigDocument::new("grid", ScenarioSpec::Grid(GridSpec::default())),
        "corridor" | "corridor-medium" => corridor_document(Density::Medium),
        "corridor-low" => corridor_document(Density::Low),
        "corridor-high" => corridor_document(Density::High),
        _ => return None,
    };
    Some(doc)
}

fn corridor_document(density: Density) -> ScenarioConfigDocument {
    ScenarioConfigDocument::new(
        format!("corridor-{}", density.name()),
        ScenarioSpec::Corridor(CorridorSpec::new(density)),
    )
}

/// Resolves a built-in name or a path to a JSON document.
pub fn load(name_or_path: &str) -> Result<ScenarioConfigDocument> {
    if let Some(doc) = builtin(name_or_path) {
        return Ok(doc);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return ScenarioConfigDocument::from_path(path);
    }
    Err(Error::Config(format!(
        "unknown scenario '{name_or_path}': not a built-in ({}) and no such file",
        BUILTIN_NAMES.join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_files_match_defaults() {
        for name in BUILTIN_NAMES {
            assert_eq!(builtin(name), default_document(name), "{name}");
        }
    }

    #[test]
    fn round_trip() {
        for name in BUILTIN_NAMES {
            let doc = default_document(name).unwrap();
            let back = ScenarioConfigDocument::from_json(&doc.to_json()).unwrap();
            assert_eq!(doc, back);
            let (a, b) = (doc.build(3).unwrap(), back.build(3).unwrap());
            assert_eq!(format!("{a:?}"), format!("{b:?}"));
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let mut v: serde_json::Value = serde_json::from_str(&default_document("ring").unwrap().to_json()).unwrap();
        v["comm"]["rnage_m"] = serde_json::json!(10.0);
        let err = ScenarioConfigDocument::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("rnage_m"), "{err}");

        let mut v: serde_json::Value = serde_json::from_str(&default_document("grid").unwrap().to_json()).unwrap();
        v["scenario"]["lanes"] = serde_json::json!(2);
        let err = ScenarioConfigDocument::from_json(&v.to_string()).unwrap_err().to_string();
        assert!(err.contains("lanes"), "{err}");
    }

    #[test]
    fn invalid_values_are_named() {
        let mut doc = default_document("ring").unwrap();
        doc.comm.vehicle_penetration = 1.5;
        let err = ScenarioConfigDocument::from_json(&doc.to_json()).unwrap_err().to_string();
        assert!(err.contains("vehicle penetration out of range"), "{err}");

        let mut doc = default_document("ring").unwrap();
        doc.sim.dt = 2.0;
        let err = ScenarioConfigDocument::from_json(&doc.to_json()).unwrap_err().to_string();
        assert!(err.contains("sim.dt"), "{err}");
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let doc = ScenarioConfigDocument::from_json(
            r#"{"name": "tiny", "scenario": {"kind": "grid", "n": 3, "link_m": 200, "core": 1,
                "program": {"green_s": 25, "amber_s": 2, "red_s": 30}, "synchronized": true,
                "speed_limit": 13.9, "vehicles": 5, "insertion_window_s": 60}}"#,
        )
        .unwrap();
        assert_eq!(doc.comm, CommConfig::default());
        assert_eq!(doc.build(1).unwrap().trips.len(), 5);
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(load("no-such-scenario").is_err());
    }
}
