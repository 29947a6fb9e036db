//! String-keyed hyperparameter maps.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for ParamValue {
    fn from(x: f64) -> Self {
        ParamValue::Num(x)
    }
}

impl From<&str> for ParamValue {
    fn from(s: &str) -> Self {
        ParamValue::Text(s.to_owned())
    }
}

/// Sorted map, so the canonical string form is stable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperParams(BTreeMap<String, ParamValue>);

impl HyperParams {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.0.insert(key.to_owned(), value.into());
        self
    }

    pub fn insert(&mut self, key: &str, value: impl Into<ParamValue>) {
        self.0.insert(key.to_owned(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ParamValue)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `key=value` pairs joined by commas, keys ascending.
    pub fn canonical(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Rejects any key outside `allowed`.
    pub fn check_keys(&self, algorithm: &str, allowed: &[&str]) -> Result<()> {
        match self.keys().find(|k| !allowed.contains(k)) {
            Some(key) => Err(Error::UnknownHyperparameter {
                algorithm: algorithm.to_owned(),
                key: key.to_owned(),
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn reader<'a>(&'a self, algorithm: &'a str) -> ParamReader<'a> {
        ParamReader {
            params: self,
            algorithm,
        }
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

pub(crate) struct ParamReader<'a> {
    params: &'a HyperParams,
    algorithm: &'a str,
}

impl ParamReader<'_> {
    fn invalid(&self, key: &str, message: impl Into<String>) -> Error {
        Error::InvalidHyperparameter {
            algorithm: self.algorithm.to_owned(),
            key: key.to_owned(),
            message: message.into(),
        }
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Num(x)) if x.is_finite() => Ok(*x),
            Some(v) => Err(self.invalid(key, format!("expected a finite number, got {v}"))),
        }
    }

    pub fn non_negative(&self, key: &str, default: f64) -> Result<f64> {
        let x = self.f64(key, default)?;
        if x < 0.0 {
            return Err(self.invalid(key, format!("must be >= 0, got {x}")));
        }
        Ok(x)
    }

    pub fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let x = self.f64(key, default)?;
        if x <= 0.0 {
            return Err(self.invalid(key, format!("must be > 0, got {x}")));
        }
        Ok(x)
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize> {
        let x = self.f64(key, default as f64)?;
        if x < 0.0 || x.fract() != 0.0 {
            return Err(self.invalid(key, format!("expected a non-negative integer, got {x}")));
        }
        Ok(x as usize)
    }

    pub fn text(&self, key: &str, default: &str, choices: &[&str]) -> Result<String> {
        let value = match self.params.get(key) {
            None => default.to_owned(),
            Some(ParamValue::Text(s)) => s.clone(),
            Some(v) => return Err(self.invalid(key, format!("expected text, got {v}"))),
        };
        if !choices.contains(&value.as_str()) {
            return Err(self.invalid(key, format!("expected one of {choices:?}, got {value:?}")));
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_sorted() {
        let p = HyperParams::new()
            .with("similarity", "pcc")
            .with("neighbors", 50.0)
            .with("shrinkage", 10.0);
        assert_eq!(p.canonical(), "neighbors=50,shrinkage=10,similarity=pcc");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let p = HyperParams::new().with("neighbours", 5.0);
        let err = p.check_keys("UserKNN", &["neighbors"]).unwrap_err();
        assert!(err.to_string().contains("neighbours"));
    }

    #[test]
    fn toml_integers_read_as_numbers() {
        let p: HyperParams = toml::from_str("neighbors = 10\nsimilarity = \"cos\"").unwrap();
        assert_eq!(p.get("neighbors"), Some(&ParamValue::Num(10.0)));
        let r = p.reader("x");
        assert_eq!(r.count("neighbors", 1).unwrap(), 10);
        assert!(r.count("similarity", 1).is_err());
        assert!(r.text("similarity", "pcc", &["pcc"]).is_err());
    }
}
