//! JSON model files: exact rationals as `"p/q"` strings, 0-based indices,
//! correlator keys in sorted order.

use std::collections::BTreeMap;

use frobtensor::frobenius::{EulerData, FrobeniusModel};
use frobtensor::scalar::{format_rational, parse_rational, Rational};
use frobtensor::series::{CorrelatorFamily, GradedBasis, Metric};
use frobtensor::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dimension: usize,
    pub parity: Vec<u8>,
    pub labels: Vec<String>,
    pub metric: Vec<Vec<String>>,
    pub truncation: usize,
    pub correlators: BTreeMap<String, Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub euler: Option<EulerFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub index: Vec<usize>,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerFile {
    pub d: Vec<Vec<String>>,
    pub r: Vec<String>,
    #[serde(rename = "D")]
    pub conformal_dim: String,
    pub d0: String,
}

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Parse(m) | Error::Invalid(m) => Error::Invalid(format!("{path}: {m}")),
        other => Error::Invalid(format!("{path}: {other}")),
    }
}

fn matrix(path: &str, rows: &[Vec<String>]) -> Result<Vec<Vec<Rational>>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, s)| parse_rational(s).map_err(|e| at(&format!("{path}[{i}][{j}]"), e)))
                .collect()
        })
        .collect()
}

fn strings(m: &[Vec<Rational>]) -> Vec<Vec<String>> {
    m.iter().map(|r| r.iter().map(format_rational).collect()).collect()
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn to_json(&self) -> String {
        crate::canonical_json(self)
    }

    pub fn to_model(&self) -> Result<FrobeniusModel> {
        let d = self.dimension;
        if self.parity.len() != d {
            return Err(Error::Invalid(format!("parity: expected {d} entries, got {}", self.parity.len())));
        }
        if self.labels.len() != d {
            return Err(Error::Invalid(format!("labels: expected {d} entries, got {}", self.labels.len())));
        }
        let basis = GradedBasis::new(self.parity.clone(), self.labels.clone()).map_err(|e| at("parity", e))?;
        let metric = Metric::new(&basis, matrix("metric", &self.metric)?).map_err(|e| at("metric", e))?;
        let mut family = CorrelatorFamily::new(basis, self.truncation).map_err(|e| at("truncation", e))?;
        for (arity, entries) in &self.correlators {
            let n: usize = arity
                .parse()
                .map_err(|_| Error::Invalid(format!("correlators.{arity}: key is not an arity")))?;
            for (k, entry) in entries.iter().enumerate() {
                let path = format!("correlators.{arity}[{k}]");
                if entry.index.len() != n {
                    return Err(Error::Invalid(format!("{path}: index has length {}, expected {n}", entry.index.len())));
                }
                if entry.index.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::Invalid(format!("{path}: index is not sorted")));
                }
                if entry.index.iter().any(|&a| a >= d) {
                    return Err(Error::Invalid(format!("{path}: index out of range")));
                }
                if family.get(&entry.index).map(|v| !num::Zero::is_zero(&v)).unwrap_or(false) {
                    return Err(Error::Invalid(format!("{path}: duplicate index")));
                }
                let v = parse_rational(&entry.value).map_err(|e| at(&format!("{path}.value"), e))?;
                family.insert(entry.index.clone(), v).map_err(|e| at(&path, e))?;
            }
        }
        let euler = match &self.euler {
            None => None,
            Some(eu) => Some(EulerData {
                d: matrix("euler.d", &eu.d)?,
                r: eu
                    .r
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse_rational(s).map_err(|e| at(&format!("euler.r[{i}]"), e)))
                    .collect::<Result<_>>()?,
                conformal_dim: parse_rational(&eu.conformal_dim).map_err(|e| at("euler.D", e))?,
                d0: parse_rational(&eu.d0).map_err(|e| at("euler.d0", e))?,
            }),
        };
        FrobeniusModel::new(metric, family, euler, self.identity)
    }

    pub fn from_model(model: &FrobeniusModel) -> Self {
        let mut correlators: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        for (key, v) in model.correlators().entries() {
            correlators
                .entry(key.len().to_string())
                .or_default()
                .push(Entry { index: key.clone(), value: format_rational(v) });
        }
        ModelFile {
            dimension: model.dim(),
            parity: model.basis().parities().to_vec(),
            labels: model.basis().labels().to_vec(),
            metric: strings(model.metric().matrix()),
            truncation: model.truncation(),
            correlators,
            euler: model.euler().map(|eu| EulerFile {
                d: strings(&eu.d),
                r: eu.r.iter().map(format_rational).collect(),
                conformal_dim: format_rational(&eu.conformal_dim),
                d0: format_rational(&eu.d0),
            }),
            identity: model.identity(),
        }
    }
}
