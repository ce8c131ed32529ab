//! Run records and their CSV / JSON encodings.
//!
//! CSV columns, in order:
//!
//! | column        | content                                                        |
//! |---------------|----------------------------------------------------------------|
//! | `config_hash` | 16 hex digits identifying the experiment config               |
//! | `method`      | strategy name, e.g. `feddp-kmeans`                             |
//! | `grid_index`  | position of the budget grid point                              |
//! | `seed`        | data and run seed                                              |
//! | `eps_init`    | initialization budget, empty if unused                         |
//! | `rounds`      | FedDP-Lloyds rounds `T`                                        |
//! | `eps_lloyds`  | total Lloyd budget, empty if no rounds ran                     |
//! | `eps_total`   | accountant total; `inf` for non-private runs                   |
//! | `delta`       | accountant delta                                               |
//! | `cost`        | noise-free k-means cost over all client points, divided by `n` |
//! | `rounds_used` | communication rounds counted by the run                        |
//! | `non_private` | `true` when the result is not differentially private           |
//! | `ledger`      | `label:epsilon:delta` entries joined by `;`                    |
//!
//! Floats are written in Rust's shortest round-trip form, so parsing a file
//! gives back the same bits.

use feddp_core::dp::{LedgerEntry, PrivacyParams};
use serde_json::{json, Map, Value};

use crate::config::Method;
use crate::error::{BenchError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub method: Method,
    pub grid_index: usize,
    pub seed: u64,
    pub eps_init: Option<f64>,
    pub rounds: usize,
    pub eps_lloyds: Option<f64>,
    pub eps_total: f64,
    pub delta: f64,
    pub cost: f64,
    pub rounds_used: usize,
    pub non_private: bool,
    pub ledger: Vec<LedgerEntry>,
    /// Kept out of the records file so reruns produce identical bytes.
    pub wall_time_ms: f64,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "config_hash",
    "method",
    "grid_index",
    "seed",
    "eps_init",
    "rounds",
    "eps_lloyds",
    "eps_total",
    "delta",
    "cost",
    "rounds_used",
    "non_private",
    "ledger",
];

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn encode_ledger(entries: &[LedgerEntry]) -> String {
    entries.iter().map(|e| format!("{}:{}:{}", e.label, fmt_f64(e.params.epsilon), fmt_f64(e.params.delta))).collect::<Vec<_>>().join(";")
}

pub fn decode_ledger(s: &str) -> Result<Vec<LedgerEntry>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|item| {
            let mut parts = item.rsplitn(3, ':');
            let (delta, eps, label) = (parts.next(), parts.next(), parts.next());
            match (label, eps, delta) {
                (Some(l), Some(e), Some(d)) => {
                    Ok(LedgerEntry { label: l.to_string(), params: PrivacyParams { epsilon: parse_f64(e, "ledger epsilon")?, delta: parse_f64(d, "ledger delta")? } })
                }
                _ => Err(BenchError::Format(format!("bad ledger entry {item:?}"))),
            }
        })
        .collect()
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| BenchError::Format(format!("{what}: {s:?} is not a number")))
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s, what).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| BenchError::Format(format!("{what}: {s:?} is not an integer")))
}

impl RunRecord {
    pub fn csv_fields(&self) -> [String; 13] {
        [
            self.config_hash.clone(),
            self.method.name().to_string(),
            self.grid_index.to_string(),
            self.seed.to_string(),
            fmt_opt(self.eps_init),
            self.rounds.to_string(),
            fmt_opt(self.eps_lloyds),
            fmt_f64(self.eps_total),
            fmt_f64(self.delta),
            fmt_f64(self.cost),
            self.rounds_used.to_string(),
            self.non_private.to_string(),
            encode_ledger(&self.ledger),
        ]
    }

    /// Parses one CSV row; the wall time is not part of it and comes back as 0.
    pub fn from_csv_fields(f: &csv::StringRecord) -> Result<Self> {
        if f.len() != CSV_COLUMNS.len() {
            return Err(BenchError::Format(format!("expected {} columns, found {}", CSV_COLUMNS.len(), f.len())));
        }
        let method = Method::parse(&f[1]).ok_or_else(|| BenchError::Format(format!("unknown method {:?}", &f[1])))?;
        let non_private = match &f[11] {
            "true" => true,
            "false" => false,
            other => return Err(BenchError::Format(format!("non_private: {other:?}"))),
        };
        Ok(Self {
            config_hash: f[0].to_string(),
            method,
            grid_index: parse_int(&f[2], "grid_index")?,
            seed: parse_int(&f[3], "seed")?,
            eps_init: parse_opt(&f[4], "eps_init")?,
            rounds: parse_int(&f[5], "rounds")?,
            eps_lloyds: parse_opt(&f[6], "eps_lloyds")?,
            eps_total: parse_f64(&f[7], "eps_total")?,
            delta: parse_f64(&f[8], "delta")?,
            cost: parse_f64(&f[9], "cost")?,
            rounds_used: parse_int(&f[10], "rounds_used")?,
            non_private,
            ledger: decode_ledger(&f[12])?,
            wall_time_ms: 0.0,
        })
    }

    pub fn to_json(&self) -> Value {
        let num = |x: f64| if x.is_finite() { json!(x) } else { json!("inf") };
        let opt = |x: Option<f64>| x.map(num).unwrap_or(Value::Null);
        let ledger: Vec<Value> = self.ledger.iter().map(|e| json!({"label": e.label, "epsilon": e.params.epsilon, "delta": e.params.delta})).collect();
        json!({
            "config_hash": self.config_hash,
            "method": self.method.name(),
            "grid_index": self.grid_index,
            "seed": self.seed,
            "eps_init": opt(self.eps_init),
            "rounds": self.rounds,
            "eps_lloyds": opt(self.eps_lloyds),
            "eps_total": num(self.eps_total),
            "delta": self.delta,
            "cost": self.cost,
            "rounds_used": self.rounds_used,
            "non_private": self.non_private,
            "ledger": ledger,
        })
    }
}

/// JSON Schema (draft 2020-12) of the records and front files.
pub const RECORDS_SCHEMA: &str = r#"{
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "feddp-bench run records",
  "type": "array",
  "items": {
    "type": "object",
    "additionalProperties": false,
    "required": ["config_hash", "method", "grid_index", "seed", "eps_init", "rounds", "eps_lloyds",
                 "eps_total", "delta", "cost", "rounds_used", "non_private", "ledger"],
    "properties": {
      "config_hash": {"type": "string"},
      "method": {"enum": ["feddp-kmeans", "server-kmeanspp", "server-lloyds", "sphere-packing", "kfed", "optimal"]},
      "grid_index": {"type": "integer", "minimum": 0},
      "seed": {"type": "integer", "minimum": 0},
      "eps_init": {"type": ["number", "null"]},
      "rounds": {"type": "integer", "minimum": 0},
      "eps_lloyds": {"type": ["number", "null"]},
      "eps_total": {"oneOf": [{"type": "number"}, {"const": "inf"}]},
      "delta": {"type": "number"},
      "cost": {"type": "number"},
      "rounds_used": {"type": "integer", "minimum": 0},
      "non_private": {"type": "boolean"},
      "ledger": {
        "type": "array",
        "items": {
          "type": "object",
          "additionalProperties": false,
          "required": ["label", "epsilon", "delta"],
          "properties": {"label": {"type": "string"}, "epsilon": {"type": "number"}, "delta": {"type": "number"}}
        }
      }
    }
  }
}"#;

#[derive(Clone, Copy)]
enum Kind {
    Str,
    Method,
    UInt,
    NumOrNull,
    NumOrInf,
    Num,
    Bool,
    Ledger,
}

const FIELDS: [(&str, Kind); 13] = [
    ("config_hash", Kind::Str),
    ("method", Kind::Method),
    ("grid_index", Kind::UInt),
    ("seed", Kind::UInt),
    ("eps_init", Kind::NumOrNull),
    ("rounds", Kind::UInt),
    ("eps_lloyds", Kind::NumOrNull),
    ("eps_total", Kind::NumOrInf),
    ("delta", Kind::Num),
    ("cost", Kind::Num),
    ("rounds_used", Kind::UInt),
    ("non_private", Kind::Bool),
    ("ledger", Kind::Ledger),
];

fn check_exact_keys(obj: &Map<String, Value>, keys: &[&str], at: &str) -> Result<()> {
    for k in keys {
        if !obj.contains_key(*k) {
            return Err(BenchError::Format(format!("{at}: missing {k}")));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return Err(BenchError::Format(format!("{at}: unexpected {extra}")));
    }
    Ok(())
}

/// Checks a records or front document against [`RECORDS_SCHEMA`].
pub fn validate_records_json(doc: &Value) -> Result<()> {
    let items = doc.as_array().ok_or_else(|| BenchError::Format("top level must be an array".into()))?;
    let keys: Vec<&str> = FIELDS.iter().map(|(k, _)| *k).collect();
    for (i, item) in items.iter().enumerate() {
        let at = format!("record {i}");
        let obj = item.as_object().ok_or_else(|| BenchError::Format(format!("{at}: not an object")))?;
        check_exact_keys(obj, &keys, &at)?;
        for (key, kind) in FIELDS {
            let v = &obj[key];
            let ok = match kind {
                Kind::Str => v.is_string(),
                Kind::Method => v.as_str().and_then(Method::parse).is_some(),
                Kind::UInt => v.is_u64(),
                Kind::NumOrNull => v.is_number() || v.is_null(),
                Kind::NumOrInf => v.is_number() || v.as_str() == Some("inf"),
                Kind::Num => v.is_number(),
                Kind::Bool => v.is_boolean(),
                Kind::Ledger => v.as_array().is_some_and(|entries| {
                    entries.iter().all(|e| {
                        e.as_object().is_some_and(|o| {
                            check_exact_keys(o, &["label", "epsilon", "delta"], &at).is_ok()
                                && o["label"].is_string()
                                && o["epsilon"].is_number()
                                && o["delta"].is_number()
                        })
                    })
                }),
            };
            if !ok {
                return Err(BenchError::Format(format!("{at}: field {key} has the wrong type")));
            }
        }
    }
    Ok(())
}
