//! Instance and payoff file schemas, and byte-stable JSON output.
//!
//! An instance file wires every component together:
//!
//! ```json
//! {
//!   "space": {"scenarios": [{"id": "up", "z": 1.0}, {"id": "down", "z": 1.0}]},
//!   "N": 2,
//!   "lambda": {"kind": "affine_max", "pieces": [{"a": [1.0, 1.0], "b": 0.0}]},
//!   "gamma_agg": {"kind": "negative_part", "alpha_i": [1.0, 1.0]},
//!   "acceptance": {"kind": "pointwise", "c": 0.0},
//!   "market": {"kind": "basis", "mode": "span", "per_agent": true,
//!              "vectors": [{"agents": 2, "values": [[1.0, -0.5], [0.0, 0.0]]}]}
//! }
//! ```
//!
//! `gamma_agg` is optional and switches the engine to the
//! second-aggregation risk measure. A market may instead be generated
//! from a scenario tree (`"kind": "tree"`) with per-scenario price paths,
//! an explicit filtration (cells of scenario ids per period) and an
//! assignment of risky assets to trading agents.
//!
//! Payoff files hold one profile: `{"agents": N, "values": [[...], ...]}`.
//!
//! [`to_json_17`] renders any serializable report with fixed key order
//! and every float printed with 17 significant digits, so identical
//! inputs produce identical bytes.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::acceptance;
use crate::aggregation;
use crate::market::{build_gain_basis, Filtration, MarketMode, MarketSet, PricePaths};
use crate::model::{PathData, RandomVector, ScenarioSpace, SpaceRef};
use crate::risk::Instance;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> IoError {
    IoError::Invalid(e.to_string())
}

#[derive(Deserialize)]
struct SpaceFile {
    scenarios: Vec<ScenarioEntry>,
}

#[derive(Deserialize)]
struct ScenarioEntry {
    id: String,
    z: f64,
}

#[derive(Deserialize)]
struct VectorFile {
    agents: usize,
    values: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct InstanceFile {
    space: SpaceFile,
    #[serde(rename = "N")]
    n: usize,
    lambda: Value,
    #[serde(default)]
    gamma_agg: Option<Value>,
    acceptance: Value,
    market: MarketFile,
}

#[derive(Deserialize)]
#[serde(tag = "kind")]
enum MarketFile {
    #[serde(rename = "basis")]
    Basis {
        #[serde(default = "default_mode")]
        mode: String,
        #[serde(default)]
        per_agent: bool,
        vectors: Vec<VectorFile>,
    },
    #[serde(rename = "tree")]
    Tree {
        #[serde(rename = "T")]
        periods: usize,
        assets: usize,
        /// Per scenario (in space order): T+1 rows of J+1 prices.
        paths: Vec<Vec<Vec<f64>>>,
        /// Per period t = 0..=T: a partition of scenario ids.
        filtration: Vec<Vec<Vec<String>>>,
        /// Risky asset index (as string, 1-based) to trading agents.
        agent_assignment: BTreeMap<String, Vec<usize>>,
        #[serde(default = "default_mode")]
        mode: String,
    },
}

fn default_mode() -> String {
    "span".into()
}

fn parse_mode(mode: &str) -> Result<MarketMode, IoError> {
    match mode {
        "span" => Ok(MarketMode::Span),
        "cone" => Ok(MarketMode::Cone),
        other => Err(IoError::Invalid(format!("unknown market mode `{other}`"))),
    }
}

fn vector_from_file(space: &SpaceRef, file: VectorFile) -> Result<RandomVector, IoError> {
    if file.values.len() != file.agents {
        return Err(IoError::Invalid(format!(
            "payoff declares {} agents but has {} rows",
            file.agents,
            file.values.len()
        )));
    }
    RandomVector::new(space.clone(), file.values).map_err(invalid)
}

/// Parses an instance from JSON text.
pub fn load_instance(text: &str) -> Result<Instance, IoError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    let ids: Vec<String> = file.space.scenarios.iter().map(|s| s.id.clone()).collect();
    let z: Vec<f64> = file.space.scenarios.iter().map(|s| s.z).collect();

    let space = match &file.market {
        MarketFile::Tree { periods, assets, paths, .. } => ScenarioSpace::with_paths(
            ids,
            z,
            PathData { periods: *periods, risky_assets: *assets, values: paths.clone() },
        )
        .map_err(invalid)?,
        MarketFile::Basis { .. } => ScenarioSpace::new(ids, z).map_err(invalid)?,
    };

    let lambda = aggregation::from_json(&file.lambda).map_err(invalid)?;
    let accept = acceptance::from_json(&file.acceptance, &space).map_err(invalid)?;

    let market = match file.market {
        MarketFile::Basis { mode, per_agent, vectors } => {
            let basis = vectors
                .into_iter()
                .map(|v| vector_from_file(&space, v))
                .collect::<Result<Vec<_>, _>>()?;
            MarketSet::new(space.clone(), file.n, parse_mode(&mode)?, basis, per_agent)
                .map_err(invalid)?
        }
        MarketFile::Tree { filtration, agent_assignment, mode, .. } => {
            let paths = PricePaths::from_space(&space).map_err(invalid)?;
            let cells = filtration
                .iter()
                .map(|partition| {
                    partition
                        .iter()
                        .map(|cell| {
                            cell.iter()
                                .map(|id| {
                                    space.index_of(id).ok_or_else(|| {
                                        IoError::Invalid(format!(
                                            "filtration references unknown scenario `{id}`"
                                        ))
                                    })
                                })
                                .collect::<Result<Vec<_>, _>>()
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<Vec<_>, _>>()?;
            let filtration = Filtration::new(cells, space.len()).map_err(invalid)?;
            let assignment = agent_assignment
                .into_iter()
                .map(|(k, v)| {
                    k.parse::<usize>()
                        .map(|asset| (asset, v))
                        .map_err(|_| IoError::Invalid(format!("bad asset index `{k}`")))
                })
                .collect::<Result<BTreeMap<_, _>, _>>()?;
            let basis =
                build_gain_basis(&paths, &assignment, &filtration, file.n).map_err(invalid)?;
            MarketSet::new(space.clone(), file.n, parse_mode(&mode)?, basis, true)
                .map_err(invalid)?
        }
    };

    let mut inst =
        Instance::new(space, file.n, lambda, accept, market).map_err(invalid)?;
    if let Some(g) = file.gamma_agg {
        let gamma_agg = aggregation::from_json(&g).map_err(invalid)?;
        inst = inst.with_gamma_agg(gamma_agg).map_err(invalid)?;
    }
    Ok(inst)
}

/// Parses a payoff profile against an already-loaded instance.
pub fn load_position(text: &str, inst: &Instance) -> Result<RandomVector, IoError> {
    let file: VectorFile =
        serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    if file.agents != inst.agents() {
        return Err(IoError::Invalid(format!(
            "payoff has {} agents, instance has {}",
            file.agents,
            inst.agents()
        )));
    }
    vector_from_file(inst.space(), file)
}

struct Fmt17;

impl serde_json::ser::Formatter for Fmt17 {
    fn write_f64<W: ?Sized + std::io::Write>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes with fixed key order and floats at 17 significant digits,
/// so identical inputs (and seeds) yield identical bytes.
pub fn to_json_17<T: serde::Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fmt17);
    value.serialize(&mut ser).expect("report serialization cannot fail");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}
