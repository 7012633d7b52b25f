//! JSON model files.
//!
//! A model either lists its operators explicitly:
//!
//! ```json
//! {
//!   "graph": {"vertices": ["a", "b"], "edges": [["a", "b"]]},
//!   "dimension": 2,
//!   "generators": {
//!     "a": {"N": 2, "F": [[1, 1], [1, 1]]},
//!     "b": {"N": 4, "F": [[2, 0], [0, 2]]}
//!   },
//!   "traces": {"half": [0.5, 0.5]}
//! }
//! ```
//!
//! or names a builder, e.g. `{"builder": {"kind": "kgraph", "vertices": 1,
//! "matrices": [[[3]]], "N": [3]}}`. Exactly one of the two forms is allowed.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monoid::{SimpleGraph, WeightError, WeightMap};
use crate::transfer::{
    example_optimal, from_kgraph, from_local_maps, trivial_system, KGraphModel, LocalMapModel, TraceVec, TransferError,
    TransferSystem,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(rename = "N")]
    pub weight: f64,
    #[serde(rename = "F")]
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builder {
    Kgraph {
        vertices: usize,
        matrices: Vec<Vec<Vec<u64>>>,
        #[serde(rename = "N")]
        weights: Vec<f64>,
    },
    LocalMaps {
        states: usize,
        maps: Vec<Vec<usize>>,
        #[serde(rename = "N")]
        weights: Vec<f64>,
    },
    /// Uses the top-level `graph`.
    Trivial {
        #[serde(rename = "N")]
        weights: Vec<f64>,
    },
    /// `I` is 1-based.
    ExampleOptimal {
        n: usize,
        #[serde(rename = "I")]
        subset: Vec<usize>,
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<SimpleGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<BTreeMap<String, GeneratorSpec>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub traces: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builder: Option<Builder>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("line {line}, column {column}: at `{path}`: {message}")]
    Syntax { line: usize, column: usize, path: String, message: String },
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("unknown trace `{name}`; the model defines: {available}")]
    UnknownTrace { name: String, available: String },
}

/// A loaded model: a validated system and its named traces.
#[derive(Debug, Clone)]
pub struct Model {
    pub system: TransferSystem,
    pub traces: BTreeMap<String, TraceVec>,
}

impl Model {
    pub fn trace(&self, name: &str) -> Result<&TraceVec, ModelError> {
        self.traces.get(name).ok_or_else(|| ModelError::UnknownTrace {
            name: name.to_string(),
            available: if self.traces.is_empty() {
                "(none)".to_string()
            } else {
                self.traces.keys().cloned().collect::<Vec<_>>().join(", ")
            },
        })
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: ModelFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            ModelError::Syntax { line: inner.line(), column: inner.column(), path, message: inner.to_string() }
        })?;
        de.end().map_err(|e| ModelError::Syntax {
            line: e.line(),
            column: e.column(),
            path: ".".to_string(),
            message: e.to_string(),
        })?;
        Ok(file)
    }

    pub fn build(&self) -> Result<Model, ModelError> {
        let (system, mut traces) = match (&self.generators, &self.builder) {
            (Some(_), Some(_)) => {
                return Err(ModelError::Schema("give either `generators` or `builder`, not both".into()))
            }
            (None, None) => return Err(ModelError::Schema("one of `generators` or `builder` is required".into())),
            (Some(generators), None) => (self.build_explicit(generators)?, BTreeMap::new()),
            (None, Some(builder)) => self.build_from(builder)?,
        };
        for (name, entries) in &self.traces {
            let trace = TraceVec::new(entries.clone())?;
            system.check_trace(&trace).map_err(|e| ModelError::Schema(format!("trace `{name}`: {e}")))?;
            traces.insert(name.clone(), trace);
        }
        Ok(Model { system, traces })
    }

    fn build_explicit(&self, generators: &BTreeMap<String, GeneratorSpec>) -> Result<TransferSystem, ModelError> {
        let graph = self.graph.clone().ok_or_else(|| ModelError::Schema("explicit models need `graph`".into()))?;
        let d = self.dimension.ok_or_else(|| ModelError::Schema("explicit models need `dimension`".into()))?;
        if let Some(extra) = generators.keys().find(|k| graph.index_of(k).is_err()) {
            return Err(ModelError::Schema(format!("generator `{extra}` is not a graph vertex")));
        }
        let mut operators = Vec::with_capacity(graph.len());
        let mut weights = Vec::with_capacity(graph.len());
        let mut ranks = Vec::with_capacity(graph.len());
        for name in graph.vertices() {
            let spec = generators
                .get(name)
                .ok_or_else(|| ModelError::Schema(format!("missing generator entry for `{name}`")))?;
            if spec.matrix.len() != d || spec.matrix.iter().any(|row| row.len() != d) {
                return Err(ModelError::Schema(format!("generators.{name}.F must be {d}x{d}")));
            }
            operators.push(DMatrix::from_fn(d, d, |r, c| spec.matrix[r][c]));
            weights.push(spec.weight);
            ranks.push(spec.rank);
        }
        let rank_hint = if ranks.iter().all(Option::is_some) {
            Some(ranks.into_iter().flatten().collect())
        } else if ranks.iter().all(Option::is_none) {
            None
        } else {
            return Err(ModelError::Schema("`rank` must be given for all generators or none".into()));
        };
        Ok(TransferSystem::new(graph, d, operators, WeightMap::new(weights)?, rank_hint)?)
    }

    fn build_from(&self, builder: &Builder) -> Result<(TransferSystem, BTreeMap<String, TraceVec>), ModelError> {
        let needs_no_graph = |kind: &str| match self.graph {
            Some(_) => Err(ModelError::Schema(format!("builder `{kind}` defines its own graph; remove `graph`"))),
            None => Ok(()),
        };
        let system = match builder {
            Builder::Kgraph { vertices, matrices, weights } => {
                needs_no_graph("kgraph")?;
                let model = KGraphModel { vertices: *vertices, matrices: matrices.clone() };
                from_kgraph(&model, WeightMap::new(weights.clone())?)?
            }
            Builder::LocalMaps { states, maps, weights } => {
                needs_no_graph("local_maps")?;
                let model = LocalMapModel { states: *states, maps: maps.clone() };
                from_local_maps(&model, WeightMap::new(weights.clone())?)?
            }
            Builder::Trivial { weights } => {
                let graph =
                    self.graph.clone().ok_or_else(|| ModelError::Schema("builder `trivial` needs `graph`".into()))?;
                trivial_system(graph, WeightMap::new(weights.clone())?)?
            }
            Builder::ExampleOptimal { n, subset, alpha } => {
                needs_no_graph("example_optimal")?;
                let set = subset.iter().copied().collect();
                let (system, mu) = example_optimal(*n, &set, *alpha)?;
                return Ok((system, BTreeMap::from([("mu".to_string(), mu)])));
            }
        };
        if let Some(d) = self.dimension {
            if d != system.dim() {
                return Err(ModelError::Schema(format!(
                    "`dimension` is {d} but the builder produces {}",
                    system.dim()
                )));
            }
        }
        Ok((system, BTreeMap::new()))
    }
}

/// Parses and builds in one step.
pub fn load_model(text: &str) -> Result<Model, ModelError> {
    ModelFile::parse(text)?.build()
}
