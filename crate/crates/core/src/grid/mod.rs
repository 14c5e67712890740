//! Distribution-network case data and its linearization into a parametric LP.
//!
//! A case is a radial feeder: buses, lines (per-unit impedances), dispatchable
//! generators with linear costs, fixed and elastic demands, and renewable units
//! whose real-time deviation from forecast is the uncertain parameter.

mod linearize;
mod plp;

pub use linearize::{assemble, linearize};
pub use plp::{denormalize_theta, normalize_theta, ParametricLp, ThetaBox};

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::path::Path;
use thiserror::Error;

pub const CASE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cannot read case file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("case file does not match the schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported case schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid case: {0}")]
    Invalid(String),
    #[error("{element} refers to unknown bus {bus}")]
    DanglingBus { element: String, bus: u32 },
    #[error("network is not radial: {0}")]
    NonRadial(String),
    #[error("{element}: lower limit {min} exceeds upper limit {max}")]
    InvalidLimits { element: String, min: f64, max: f64 },
    #[error("line {from}-{to} has zero impedance")]
    ZeroImpedance { from: u32, to: u32 },
    #[error("variable {0} has no finite box constraint")]
    UnboundedVariable(String),
    #[error("parameter {index} has a zero-width range; the parameter space would be degenerate")]
    DegenerateTheta { index: usize },
    #[error("parameter {index} = {value} lies outside [{lower}, {upper}]")]
    ThetaOutOfBox {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    pub r_pu: f64,
    pub x_pu: f64,
    /// Thermal limit on |P| in MW. A missing limit is rejected at linearization.
    #[serde(default)]
    pub limit_mw: Option<f64>,
    /// Included in the tracked-variable set for error metrics.
    #[serde(default)]
    pub monitor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: u32,
    /// Linear cost coefficient in $/MWh.
    pub cost: f64,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedDemand {
    pub bus: u32,
    pub p_mw: f64,
    #[serde(default)]
    pub q_mvar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElasticDemand {
    pub bus: u32,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Demands {
    #[serde(default)]
    pub fixed: Vec<FixedDemand>,
    #[serde(default)]
    pub elastic: Vec<ElasticDemand>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Renewable {
    pub bus: u32,
    pub forecast_mw: f64,
    /// Symmetric real-time deviation bound, in kW.
    pub deviation_kw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageLimits {
    pub min_pu: f64,
    pub max_pu: f64,
    /// Voltage magnitude held at the root (substation) bus.
    pub root_pu: f64,
}

impl Default for VoltageLimits {
    fn default() -> Self {
        Self {
            min_pu: 0.90,
            max_pu: 1.05,
            root_pu: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub base_mva: f64,
    /// Bus ids; the first one is the root of the radial tree.
    pub buses: Vec<u32>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub demands: Demands,
    #[serde(default)]
    pub renewables: Vec<Renewable>,
    #[serde(default)]
    pub voltage: VoltageLimits,
}

/// Reads and validates a case file.
pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let case: GridCase = serde_json::from_str(&text)?;
    case.validate()?;
    Ok(case)
}

/// Cases shipped with the library: the reconstructed 69-bus feeder and a
/// two-bus toy with two critical regions.
pub const BUILTIN_CASES: [(&str, &str); 2] = [
    ("case69", include_str!("../../data/case69.json")),
    ("toy2", include_str!("../../data/toy2.json")),
];

/// Parses and validates a shipped case by name.
pub fn builtin_case(name: &str) -> Option<Result<GridCase, GridError>> {
    BUILTIN_CASES.iter().find(|(n, _)| *n == name).map(|(_, text)| {
        let case: GridCase = serde_json::from_str(text)?;
        case.validate()?;
        Ok(case)
    })
}

impl GridCase {
    pub fn root(&self) -> u32 {
        self.buses[0]
    }

    /// Checks every invariant of the case: schema version, bus references,
    /// limit ordering and radiality.
    pub fn validate(&self) -> Result<(), GridError> {
        if self.schema_version != CASE_SCHEMA_VERSION {
            return Err(GridError::SchemaVersion {
                found: self.schema_version,
                expected: CASE_SCHEMA_VERSION,
            });
        }
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            return Err(GridError::Invalid(format!(
                "base_mva must be positive, got {}",
                self.base_mva
            )));
        }
        if self.buses.is_empty() {
            return Err(GridError::Invalid("case has no buses".into()));
        }
        let mut seen = HashSet::new();
        for &b in &self.buses {
            if !seen.insert(b) {
                return Err(GridError::Invalid(format!("duplicate bus id {b}")));
            }
        }
        let check_bus = |element: String, bus: u32| {
            if seen.contains(&bus) {
                Ok(())
            } else {
                Err(GridError::DanglingBus { element, bus })
            }
        };
        for l in &self.lines {
            check_bus(format!("line {}-{}", l.from, l.to), l.from)?;
            check_bus(format!("line {}-{}", l.from, l.to), l.to)?;
            if l.from == l.to {
                return Err(GridError::NonRadial(format!("line {}-{} is a self-loop", l.from, l.to)));
            }
            if let Some(lim) = l.limit_mw {
                if !(lim >= 0.0) {
                    return Err(GridError::InvalidLimits {
                        element: format!("line {}-{}", l.from, l.to),
                        min: -lim,
                        max: lim,
                    });
                }
            }
        }
        for (i, g) in self.generators.iter().enumerate() {
            check_bus(format!("generator {i}"), g.bus)?;
            if !(g.p_min_mw <= g.p_max_mw) {
                return Err(GridError::InvalidLimits {
                    element: format!("generator {i} at bus {}", g.bus),
                    min: g.p_min_mw,
                    max: g.p_max_mw,
                });
            }
        }
        for (i, d) in self.demands.fixed.iter().enumerate() {
            check_bus(format!("fixed demand {i}"), d.bus)?;
        }
        for (i, d) in self.demands.elastic.iter().enumerate() {
            check_bus(format!("elastic demand {i}"), d.bus)?;
            if !(d.p_min_mw <= d.p_max_mw) {
                return Err(GridError::InvalidLimits {
                    element: format!("elastic demand {i} at bus {}", d.bus),
                    min: d.p_min_mw,
                    max: d.p_max_mw,
                });
            }
        }
        for (i, r) in self.renewables.iter().enumerate() {
            check_bus(format!("renewable {i}"), r.bus)?;
            if !(r.deviation_kw >= 0.0) {
                return Err(GridError::InvalidLimits {
                    element: format!("renewable {i} at bus {}", r.bus),
                    min: -r.deviation_kw,
                    max: r.deviation_kw,
                });
            }
        }
        let v = &self.voltage;
        if !(v.min_pu <= v.max_pu) {
            return Err(GridError::InvalidLimits {
                element: "voltage".into(),
                min: v.min_pu,
                max: v.max_pu,
            });
        }
        self.check_radial()
    }

    fn check_radial(&self) -> Result<(), GridError> {
        let index: HashMap<u32, usize> = self.buses.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let mut parent: Vec<usize> = (0..self.buses.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for l in &self.lines {
            let a = find(&mut parent, index[&l.from]);
            let b = find(&mut parent, index[&l.to]);
            if a == b {
                return Err(GridError::NonRadial(format!("line {}-{} closes a cycle", l.from, l.to)));
            }
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        for (i, &bus) in self.buses.iter().enumerate() {
            if find(&mut parent, i) != root {
                return Err(GridError::NonRadial(format!("bus {bus} is not connected to the root")));
            }
        }
        Ok(())
    }
}
