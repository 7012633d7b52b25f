//! Deterministic report emission.
//!
//! Every float is rounded to 12 significant digits and then written in the
//! shortest decimal form that round-trips, so identical inputs give
//! byte-identical output. Object keys are emitted in sorted order.

use std::collections::BTreeMap;

use artin_kms::{Tolerances, TransferSystem};
use serde::Serialize;
use serde_json::Value;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every number in a JSON tree in place.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r = round_sig(x);
    serde_json::Number::from_f64(r).map(|n| n.to_string()).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemSummary {
    pub generators: Vec<String>,
    pub edges: Vec<[String; 2]>,
    pub dimension: usize,
    pub weights: BTreeMap<String, f64>,
    pub complete_graph: bool,
    pub exact_entries: bool,
    pub rank_hint: Option<BTreeMap<String, u64>>,
    pub max_commutator: f64,
}

impl SystemSummary {
    pub fn of(sys: &TransferSystem) -> Self {
        let graph = sys.graph();
        let names = graph.vertices().to_vec();
        let edges = graph.edges().into_iter().map(|(a, b)| [names[a].clone(), names[b].clone()]).collect();
        let weights = names.iter().cloned().zip(sys.weights().values().iter().copied()).collect();
        let rank_hint = sys.rank_hint().map(|r| names.iter().cloned().zip(r.iter().copied()).collect());
        let max_commutator =
            sys.validate().map(|r| r.edges.iter().map(|e| e.max_entry).fold(0.0, f64::max)).unwrap_or(f64::NAN);
        SystemSummary {
            generators: names,
            edges,
            dimension: sys.dim(),
            weights,
            complete_graph: graph.is_complete(),
            exact_entries: sys.is_exact(),
            rank_hint,
            max_commutator,
        }
    }
}

/// The machine-readable output of one command.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub arguments: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSummary>,
    pub tolerances: Tolerances,
    /// Present for commands with a pass/fail verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    pub result: Value,
}

impl Report {
    pub fn new(command: &str, system: Option<&TransferSystem>, tolerances: &Tolerances) -> Self {
        Report {
            command: command.to_string(),
            arguments: BTreeMap::new(),
            system: system.map(SystemSummary::of),
            tolerances: *tolerances,
            pass: None,
            result: Value::Null,
        }
    }

    pub fn arg(mut self, key: &str, value: impl Serialize) -> Self {
        self.arguments.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn with_result(mut self, result: impl Serialize) -> Self {
        self.result = serde_json::to_value(result).unwrap_or(Value::Null);
        self
    }

    pub fn with_pass(mut self, pass: bool) -> Self {
        self.pass = Some(pass);
        self
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("reports serialize");
        round_value(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("values serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_stable() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(format_float(2.0), "2.0");
        assert_eq!(format_float(f64::NAN), "");
        assert_eq!(round_sig(-0.0), -0.0);
        let mut v = serde_json::json!({"b": [1.0000000000001, 2], "a": {"x": 0.30000000000000004}});
        round_value(&mut v);
        assert_eq!(v.to_string(), r#"{"a":{"x":0.3},"b":[1.0,2]}"#);
    }
}
