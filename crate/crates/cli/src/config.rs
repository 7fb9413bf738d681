//! JSON run configs. A config file supplies any subset of a command's flags
//! (same names, snake_case); flags given on the command line win. Unknown
//! keys are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Environment variable overriding every seed.
pub const SEED_ENV: &str = "DRFD_SEED";

fn given(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => false,
        Value::Array(a) => !a.is_empty(),
        _ => true,
    }
}

/// Overlays the flags that were actually given on top of the config file.
pub fn resolve<T: Serialize + DeserializeOwned>(cli: &T, config: Option<&Path>) -> Result<T, CliError> {
    let mut merged = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display()))),
                Err(e) => return Err(CliError::Usage(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    let flags = serde_json::to_value(cli).map_err(|e| CliError::Invariant(e.to_string()))?;
    if let Value::Object(flags) = flags {
        for (k, v) in flags {
            if given(&v) {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| {
        let origin = config.map_or("flags".to_string(), |p| p.display().to_string());
        CliError::Usage(format!("{origin}: {e}"))
    })
}

/// Seed from `DRFD_SEED` when set.
pub fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Usage(format!("{SEED_ENV}: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, Serialize, Deserialize, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Args {
        epsilon: Option<f64>,
        flag: bool,
        list: Vec<f64>,
        #[serde(skip)]
        config: Option<std::path::PathBuf>,
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), text).unwrap();
        f
    }

    #[test]
    fn flags_override_config() {
        let f = write(r#"{"epsilon": 0.1, "flag": true, "list": [1.0]}"#);
        let cli = Args { epsilon: Some(0.2), flag: false, list: vec![], config: None };
        let r = resolve(&cli, Some(f.path())).unwrap();
        assert_eq!(r.epsilon, Some(0.2));
        assert!(r.flag);
        assert_eq!(r.list, vec![1.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let f = write(r#"{"epsilon": 0.1, "flag": false, "bogus": 1}"#);
        let cli = Args { epsilon: None, flag: false, list: vec![], config: None };
        let err = resolve(&cli, Some(f.path())).unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let f = write(r#"{"config": "x.json"}"#);
        assert!(resolve(&cli, Some(f.path())).is_err());
    }
}
