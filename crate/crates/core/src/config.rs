//! Instance configuration files.
//!
//! The format is TOML restricted to integers, strings and integer arrays:
//!
//! ```toml
//! name = "example-1"
//! q = 5
//! K = 3
//! N = 3
//! L = 2
//! mode = "explicit"              # or "biregular-canonical"
//! association = [[1, 2], [2, 3], [1, 3]]   # explicit mode only
//! points = [1, 2, 3]             # optional, default 0..N-1
//! generator_override = [[1, 3, 1]]         # optional, (N-L) x N
//! seed = 7                       # optional
//! messages = [[1, 2], [3, 4], [0, 1]]      # optional, K x L
//! reference_rate = "1/2"         # optional, reported beside the measured rate
//! ```
//!
//! Unknown keys are rejected. Every validation failure names the key.

use serde::{Deserialize, Serialize};

use crate::analysis::parse_ratio;
use crate::code::CodePair;
use crate::error::{Error, Result};
use crate::field::Modulus;
use crate::matrix::FieldMatrix;
use crate::protocol::{AssociationMode, Message, PidConfig, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub q: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub association: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_override: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub messages: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_rate: Option<String>,
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub config: PidConfig,
    pub code: CodePair,
    pub seed: Option<u64>,
    pub messages: Option<Vec<Message>>,
    pub reference_rate: Option<Rational>,
    pub file: InstanceFile,
}

fn field_err(field: &str, e: impl std::fmt::Display) -> Error {
    Error::Config { field: field.to_string(), reason: e.to_string() }
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<InstanceFile> {
        toml::from_str(text).map_err(|e| {
            let reason = e.message().to_string();
            let field = reason
                .split('`')
                .nth(1)
                .filter(|_| reason.contains("field"))
                .unwrap_or("<file>")
                .to_string();
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start].matches('\n').count() + 1;
                    format!(" (line {line})")
                })
                .unwrap_or_default();
            Error::Config { field, reason: format!("{reason}{at}") }
        })
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("instance files always serialize")
    }

    pub fn validate(&self) -> Result<Instance> {
        let modulus = Modulus::new(self.q).map_err(|e| field_err("q", e))?;
        let mode = match self.mode.as_str() {
            "biregular-canonical" => AssociationMode::BiregularCanonical,
            "explicit" => AssociationMode::Explicit,
            other => {
                return Err(field_err(
                    "mode",
                    format!("`{other}` is not one of biregular-canonical, explicit"),
                ))
            }
        };
        let config = match (mode, &self.association) {
            (AssociationMode::BiregularCanonical, None) => {
                PidConfig::canonical(modulus, self.k, self.n, self.l).map_err(|e| field_err("L", e))?
            }
            (AssociationMode::BiregularCanonical, Some(_)) => {
                return Err(field_err("association", "not allowed in biregular-canonical mode"))
            }
            (AssociationMode::Explicit, Some(sets)) => {
                PidConfig::explicit(modulus, self.k, self.n, self.l, sets.clone())
                    .map_err(|e| field_err("association", e))?
            }
            (AssociationMode::Explicit, None) => {
                return Err(field_err("association", "required in explicit mode"))
            }
        };
        let mut code = CodePair::vandermonde(modulus, self.n, self.l, self.points.as_deref())
            .map_err(|e| field_err("points", e))?;
        if let Some(rows) = &self.generator_override {
            let g = if rows.is_empty() {
                FieldMatrix::zeros(modulus, 0, self.n)
            } else {
                FieldMatrix::from_rows(modulus, rows).map_err(|e| field_err("generator_override", e))?
            };
            code = code.with_generator(g).map_err(|e| field_err("generator_override", e))?;
        }
        let messages = match &self.messages {
            None => None,
            Some(rows) => {
                if rows.len() != self.k || rows.iter().any(|r| r.len() != self.l) {
                    return Err(field_err("messages", format!("expected {} rows of {} symbols", self.k, self.l)));
                }
                Some(rows.iter().map(|r| Message::from_values(modulus, r)).collect())
            }
        };
        let reference_rate = self
            .reference_rate
            .as_deref()
            .map(|t| parse_ratio(t).ok_or_else(|| field_err("reference_rate", format!("`{t}` is not p/q"))))
            .transpose()?;
        Ok(Instance {
            name: self.name.clone().unwrap_or_else(|| "instance".to_string()),
            config,
            code,
            seed: self.seed,
            messages,
            reference_rate,
            file: self.clone(),
        })
    }
}

impl Instance {
    pub fn parse(text: &str) -> Result<Instance> {
        InstanceFile::parse(text)?.validate()
    }
}
