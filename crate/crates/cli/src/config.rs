//! Flat key-value configuration: a TOML file of top-level keys, then
//! `--set key=value` overrides, then dedicated flags. Later sources win.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde_json::Value as Json;
use toml::Value;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

/// Where a key came from, for diagnostics.
#[derive(Debug, Clone)]
enum Origin {
    File { path: String, line: Option<usize> },
    Set,
    Flag,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Origin::File { path, line: Some(l) } => write!(f, "{path}:{l}"),
            Origin::File { path, line: None } => write!(f, "{path}"),
            Origin::Set => f.write_str("--set"),
            Origin::Flag => f.write_str("command-line flag"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, (Value, Origin)>,
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str_named(&text, &path.display().to_string())
    }

    pub fn from_str_named(text: &str, name: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => ConfigError(format!("{name}:{l}: {}", e.message())),
                None => ConfigError(format!("{name}: {}", e.message())),
            }
        })?;
        let mut values = BTreeMap::new();
        for (k, v) in table {
            let origin = Origin::File {
                path: name.to_string(),
                line: line_of(text, &k),
            };
            if v.is_table() {
                return Err(ConfigError(format!("{origin}: `{k}` is a table; only flat keys are accepted")));
            }
            values.insert(k, (v, origin));
        }
        Ok(Config { values })
    }

    /// Applies a `key=value` override; the value is read as a TOML value,
    /// falling back to a plain string.
    pub fn apply_set(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("--set `{spec}`: expected key=value")))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError(format!("--set `{spec}`: empty key")));
        }
        let v = v.trim();
        let value = format!("v = {v}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(v.to_string()));
        self.values.insert(k.to_string(), (value, Origin::Set));
        Ok(())
    }

    pub fn set_flag(&mut self, key: &str, value: Value) {
        self.values.insert(key.to_string(), (value, Origin::Flag));
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        for (k, (_, origin)) in &self.values {
            if !allowed.contains(k.as_str()) {
                let list: Vec<&str> = allowed.iter().copied().collect();
                return Err(ConfigError(format!(
                    "{origin}: unknown key `{k}` (accepted: {})",
                    list.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn err(&self, key: &str, msg: &str) -> ConfigError {
        match self.values.get(key) {
            Some((_, o)) => ConfigError(format!("{o}: field `{key}`: {msg}")),
            None => ConfigError(format!("field `{key}`: {msg}")),
        }
    }

    fn number(&self, key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.err(key, "expected a number")),
        }
    }

    fn integer(&self, key: &str, v: &Value) -> Result<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Ok(*i as u64),
            _ => Err(self.err(key, "expected a non-negative integer")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some((v, _)) => {
                let x = self.number(key, v)?;
                if x.is_finite() {
                    Ok(x)
                } else {
                    Err(self.err(key, "must be finite"))
                }
            }
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.values.get(key) {
            None => Ok(default),
            Some((v, _)) => self.integer(key, v),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64_or(key, default as u64)? as usize)
    }

    pub fn f64_list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some((Value::Array(a), _)) => a.iter().map(|v| self.number(key, v)).collect(),
            Some((v, _)) => Ok(vec![self.number(key, v)?]),
        }
    }

    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some((Value::Array(a), _)) => a.iter().map(|v| Ok(self.integer(key, v)? as usize)).collect(),
            Some((v, _)) => Ok(vec![self.integer(key, v)? as usize]),
        }
    }

    /// Fails with the key's origin unless `ok`.
    pub fn require(&self, ok: bool, key: &str, msg: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.err(key, msg))
        }
    }

    /// Echo of the explicitly supplied keys.
    pub fn echo(&self) -> Json {
        let map: serde_json::Map<String, Json> = self
            .values
            .iter()
            .map(|(k, (v, _))| (k.clone(), toml_to_json(v)))
            .collect();
        Json::Object(map)
    }
}

fn toml_to_json(v: &Value) -> Json {
    match v {
        Value::String(s) => Json::String(s.clone()),
        Value::Integer(i) => Json::from(*i),
        Value::Float(x) => Json::from(*x),
        Value::Boolean(b) => Json::Bool(*b),
        Value::Datetime(d) => Json::String(d.to_string()),
        Value::Array(a) => Json::Array(a.iter().map(toml_to_json).collect()),
        Value::Table(t) => Json::Object(t.iter().map(|(k, v)| (k.clone(), toml_to_json(v))).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_set_overrides() {
        let mut c = Config::from_str_named("theta = 0.5\nn_list = [64, 256]\n", "c.toml").unwrap();
        assert_eq!(c.f64_or("theta", 0.0).unwrap(), 0.5);
        c.apply_set("theta=0.25").unwrap();
        assert_eq!(c.f64_or("theta", 0.0).unwrap(), 0.25);
        assert_eq!(c.usize_list_or("n_list", &[]).unwrap(), vec![64, 256]);
        c.apply_set("n_list=[8]").unwrap();
        assert_eq!(c.usize_list_or("n_list", &[]).unwrap(), vec![8]);
    }

    #[test]
    fn diagnostics_name_the_line() {
        let c = Config::from_str_named("theta = 0.5\ndt = \"fast\"\n", "c.toml").unwrap();
        let e = c.f64_or("dt", 1e-3).unwrap_err();
        assert!(e.0.contains("c.toml:2") && e.0.contains("`dt`"), "{}", e.0);
        let e = c.check_keys(&["theta"]).unwrap_err();
        assert!(e.0.contains("unknown key `dt`"), "{}", e.0);
        let e = Config::from_str_named("theta = \n", "bad.toml").unwrap_err();
        assert!(e.0.starts_with("bad.toml:"), "{}", e.0);
    }

    #[test]
    fn set_requires_key_value() {
        let mut c = Config::default();
        assert!(c.apply_set("theta").is_err());
        c.apply_set("label=hello world").unwrap();
        assert_eq!(c.echo()["label"], "hello world");
    }
}
