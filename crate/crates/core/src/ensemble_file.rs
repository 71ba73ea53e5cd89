//! JSON interchange format for ensembles.
//!
//! ```json
//! {
//!   "kind": "quantum",
//!   "priors": [0.5, 0.5],
//!   "states": [
//!     [[[1, 0], [0, 0]], [[0, 0], [0, 0]]],
//!     [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]
//!   ],
//!   "labels": ["zero", "plus"]
//! }
//! ```
//!
//! Classical files carry `"dists"` (one probability vector per member) instead
//! of `"states"`. Complex entries are `[re, im]` pairs. Every error message
//! starts with the line and column of the offending value.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::classical::{ClassicalEnsemble, Distribution};
use crate::error::{Error, Result};
use crate::hermitian::{DensityMatrix, HermitianMatrix};
use crate::quantum::QuantumEnsemble;
use crate::C64;

/// Tolerance on the sums of priors, distributions and state traces in files.
pub const FILE_NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub enum Ensemble {
    Classical(ClassicalEnsemble),
    Quantum(QuantumEnsemble),
}

#[derive(Debug, Clone)]
pub struct EnsembleFile {
    pub ensemble: Ensemble,
    pub labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile<'a> {
    #[serde(borrow)]
    kind: &'a RawValue,
    #[serde(borrow)]
    priors: &'a RawValue,
    #[serde(borrow, default)]
    dists: Option<Vec<&'a RawValue>>,
    #[serde(borrow, default)]
    states: Option<Vec<&'a RawValue>>,
    #[serde(borrow, default)]
    labels: Option<&'a RawValue>,
}

#[derive(Serialize)]
struct OutFile<'a> {
    kind: &'static str,
    priors: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    dists: Option<Vec<&'a [f64]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    states: Option<Vec<Vec<Vec<[f64; 2]>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<&'a [String]>,
}

/// Maps byte offsets in the source to 1-based line and column.
struct Locator<'a> {
    text: &'a str,
}

impl<'a> Locator<'a> {
    fn position(&self, raw: &RawValue) -> (usize, usize) {
        let offset = raw.get().as_ptr() as usize - self.text.as_ptr() as usize;
        let before = &self.text[..offset];
        let line = before.matches('\n').count() + 1;
        let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        (line, col)
    }

    fn error(&self, raw: &RawValue, msg: impl std::fmt::Display) -> Error {
        let (line, col) = self.position(raw);
        Error::validation(format!("line {line}, column {col}: {msg}"))
    }

    fn parse<T: for<'de> Deserialize<'de>>(&self, raw: &RawValue, what: &str) -> Result<T> {
        serde_json::from_str(raw.get()).map_err(|e| {
            let (line, col) = self.position(raw);
            let (line, col) = if e.line() <= 1 {
                (line, col + e.column().saturating_sub(1))
            } else {
                (line + e.line() - 1, e.column())
            };
            Error::validation(format!("line {line}, column {col}: {what}: {e}"))
        })
    }
}

fn check_sum(sum: f64, what: &str) -> std::result::Result<(), String> {
    if (sum - 1.0).abs() > FILE_NORMALIZATION_TOL {
        return Err(format!("{what} must sum to 1 within {FILE_NORMALIZATION_TOL:e} (sum = {sum:.15})"));
    }
    Ok(())
}

impl EnsembleFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| {
            Error::validation(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let loc = Locator { text };
        let kind: String = loc.parse(raw.kind, "kind")?;

        let priors: Vec<f64> = loc.parse(raw.priors, "priors")?;
        if let Some(p) = priors.iter().find(|p| !(**p > 0.0)) {
            return Err(loc.error(raw.priors, format!("priors must be positive (found {p})")));
        }
        check_sum(priors.iter().sum(), "priors").map_err(|m| loc.error(raw.priors, m))?;
        if priors.len() < 2 {
            return Err(loc.error(raw.priors, "an ensemble needs at least two members"));
        }
        let total: f64 = priors.iter().sum();
        let priors: Vec<f64> = priors.iter().map(|p| p / total).collect();

        let labels: Option<Vec<String>> = match raw.labels {
            Some(l) => {
                let v: Vec<String> = loc.parse(l, "labels")?;
                if v.len() != priors.len() {
                    return Err(loc.error(
                        l,
                        format!("{} labels for {} ensemble members", v.len(), priors.len()),
                    ));
                }
                Some(v)
            }
            None => None,
        };

        let members = |items: &Option<Vec<&RawValue>>, field: &str| -> Result<()> {
            let items = items.as_ref().ok_or_else(|| {
                loc.error(raw.kind, format!("a {kind} file needs a \"{field}\" array"))
            })?;
            if items.len() != priors.len() {
                return Err(loc.error(
                    raw.priors,
                    format!("{} priors but {} entries in \"{field}\"", priors.len(), items.len()),
                ));
            }
            Ok(())
        };

        let ensemble = match kind.as_str() {
            "classical" => {
                if let Some(s) = raw.states.as_ref().and_then(|s| s.first()) {
                    return Err(loc.error(s, "\"states\" is not allowed in a classical file"));
                }
                members(&raw.dists, "dists")?;
                let mut dists = Vec::with_capacity(priors.len());
                let mut size = None;
                for (i, item) in raw.dists.as_ref().unwrap().iter().enumerate() {
                    let what = format!("dists[{i}]");
                    let w: Vec<f64> = loc.parse(item, &what)?;
                    if *size.get_or_insert(w.len()) != w.len() {
                        return Err(loc.error(
                            item,
                            format!("{what} has {} outcomes, expected {}", w.len(), size.unwrap()),
                        ));
                    }
                    if let Some(x) = w.iter().find(|x| !(**x >= 0.0)) {
                        return Err(loc.error(item, format!("{what} has a negative entry ({x})")));
                    }
                    check_sum(w.iter().sum(), &what).map_err(|m| loc.error(item, m))?;
                    dists.push(Distribution::normalized(w).map_err(|e| loc.error(item, e))?);
                }
                Ensemble::Classical(ClassicalEnsemble::new(priors, dists)?)
            }
            "quantum" => {
                if let Some(d) = raw.dists.as_ref().and_then(|d| d.first()) {
                    return Err(loc.error(d, "\"dists\" is not allowed in a quantum file"));
                }
                members(&raw.states, "states")?;
                let mut states = Vec::with_capacity(priors.len());
                let mut dim = None;
                for (i, item) in raw.states.as_ref().unwrap().iter().enumerate() {
                    let what = format!("states[{i}]");
                    let rows: Vec<Vec<[f64; 2]>> = loc.parse(item, &what)?;
                    let d = rows.len();
                    if rows.iter().any(|r| r.len() != d) {
                        return Err(loc.error(item, format!("{what} is not a square matrix")));
                    }
                    if *dim.get_or_insert(d) != d {
                        return Err(loc.error(
                            item,
                            format!("{what} has dimension {d}, expected {}", dim.unwrap()),
                        ));
                    }
                    let m = DMatrix::from_fn(d, d, |j, k| C64::new(rows[j][k][0], rows[j][k][1]));
                    let h = HermitianMatrix::new(m).map_err(|e| loc.error(item, format!("{what}: {e}")))?;
                    check_sum(h.trace(), &format!("{what} trace")).map_err(|m| loc.error(item, m))?;
                    let rho = DensityMatrix::normalized(h).map_err(|e| loc.error(item, format!("{what}: {e}")))?;
                    states.push(rho);
                }
                Ensemble::Quantum(QuantumEnsemble::new(priors, states)?)
            }
            other => {
                return Err(loc.error(
                    raw.kind,
                    format!("unknown kind \"{other}\" (expected \"classical\" or \"quantum\")"),
                ))
            }
        };
        Ok(EnsembleFile { ensemble, labels })
    }

    pub fn to_json(&self) -> String {
        let out = match &self.ensemble {
            Ensemble::Classical(e) => OutFile {
                kind: "classical",
                priors: e.priors(),
                dists: Some(e.dists().iter().map(|d| d.weights()).collect()),
                states: None,
                labels: self.labels.as_deref(),
            },
            Ensemble::Quantum(e) => OutFile {
                kind: "quantum",
                priors: e.priors(),
                dists: None,
                states: Some(
                    e.states()
                        .iter()
                        .map(|s| {
                            let m = s.as_hermitian().matrix();
                            (0..m.nrows())
                                .map(|j| (0..m.ncols()).map(|k| [m[(j, k)].re, m[(j, k)].im]).collect())
                                .collect()
                        })
                        .collect(),
                ),
                labels: self.labels.as_deref(),
            },
        };
        serde_json::to_string_pretty(&out).expect("ensemble serialization cannot fail")
    }
}
