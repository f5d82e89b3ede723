//! JSON config files with command-line overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use critlab::{Error, Result};

/// Loads `section` (or the whole object when the file has no such key),
/// overlays every flag that was given, and deserializes the result.
///
/// Keys absent from the serialized default are rejected.
pub fn resolve<C, F>(file: Option<&Path>, section: &str, flags: &F) -> Result<C>
where
    C: DeserializeOwned + Serialize + Default,
    F: Serialize,
{
    let mut base = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
            let value: Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidParameter(format!("config {} is not JSON: {e}", path.display())))?;
            match value {
                Value::Object(mut top) => match top.remove(section) {
                    Some(Value::Object(inner)) => inner,
                    Some(_) => return Err(Error::InvalidParameter(format!("config section {section:?} must be an object"))),
                    None => top,
                },
                _ => return Err(Error::InvalidParameter("config must be a JSON object".into())),
            }
        }
        None => Map::new(),
    };
    let overrides = serde_json::to_value(flags).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    if let Value::Object(o) = overrides {
        for (k, v) in o {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    if let Ok(Value::Object(known)) = serde_json::to_value(C::default()) {
        if let Some(k) = base.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::InvalidParameter(format!("config for {section}: unknown field `{k}`")));
        }
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| Error::InvalidParameter(format!("config for {section}: {e}")))
}

/// Prints the effective configuration to stderr.
pub fn announce<C: Serialize>(command: &str, cfg: &C) {
    let text = serde_json::to_string_pretty(cfg).unwrap_or_else(|e| format!("<unserializable: {e}>"));
    eprintln!("{command} effective config:\n{text}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Serialize, Deserialize, PartialEq)]
    #[serde(default)]
    struct Demo {
        n: usize,
        beta: f64,
    }

    impl Default for Demo {
        fn default() -> Self {
            Self { n: 4, beta: 0.5 }
        }
    }

    #[derive(Serialize)]
    struct Flags {
        n: Option<usize>,
    }

    #[test]
    fn flags_override_file_and_unknown_keys_fail() {
        let dir = std::env::temp_dir().join(format!("critlab-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        std::fs::write(&path, r#"{"demo": {"n": 7, "beta": 0.1}}"#).unwrap();
        let c: Demo = resolve(Some(&path), "demo", &Flags { n: Some(9) }).unwrap();
        assert_eq!(c, Demo { n: 9, beta: 0.1 });
        let c: Demo = resolve(Some(&path), "demo", &Flags { n: None }).unwrap();
        assert_eq!(c.n, 7);
        std::fs::write(&path, r#"{"n": 7, "gamma": 1}"#).unwrap();
        assert!(resolve::<Demo, _>(Some(&path), "demo", &Flags { n: None }).is_err());
        let c: Demo = resolve(None, "demo", &Flags { n: None }).unwrap();
        assert_eq!(c, Demo::default());
    }
}
