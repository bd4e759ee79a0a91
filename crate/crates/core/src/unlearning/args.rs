use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `key=value` strategy hyperparameters, kept verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodArgs(BTreeMap<String, String>);

impl MethodArgs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key=value` items; a repeated key keeps the last value.
    pub fn parse<'a>(items: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut out = MethodArgs::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::arg(format!("method argument `{item}` is not key=value")))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::arg(format!(
                    "method argument `{item}` has an empty key"
                )));
            }
            out.0.insert(k.to_string(), v.trim().to_string());
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|k| k.as_str())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|v| v.as_str())
    }

    pub fn as_map(&self) -> &BTreeMap<String, String> {
        &self.0
    }

    /// Typed value of `key`, or `default` when unset.
    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::arg(format!("method argument {key}={v} is not valid"))),
        }
    }
}
