//! Generates one config per value of a single key. Each generated file is
//! the canonical echo of a validated config, so it runs as written.

use std::path::{Path, PathBuf};

use crate::config::{parse_config, ConfigError, RunConfig};
use crate::error::RunError;

/// Parses a command-line value as a TOML literal, falling back to a plain
/// string (so `80us` and `"80 us"` both work for unit fields).
fn literal(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn set(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| bad_key(key, "empty key"))?;
    let mut cur = table;
    for p in parts {
        cur = cur
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| bad_key(key, &format!("`{p}` is not a section")))?;
    }
    cur.insert(leaf.to_string(), value);
    Ok(())
}

fn bad_key(key: &str, msg: &str) -> ConfigError {
    ConfigError { message: msg.to_string(), key: Some(key.to_string()), line: None, column: None }
}

/// Configs derived from `base` with `key` set to each value in turn; run ids
/// get a `-<k>` suffix.
pub fn sweep_configs(base: &str, key: &str, values: &[String]) -> Result<Vec<RunConfig>, ConfigError> {
    let base_config = parse_config(base)?;
    let table: toml::Table = base.parse().map_err(|e: toml::de::Error| bad_key(key, e.message()))?;
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let mut t = table.clone();
            set(&mut t, key, literal(v))?;
            t.insert("run_id".into(), toml::Value::String(format!("{}-{k}", base_config.run_id)));
            let text = toml::to_string(&t).map_err(|e| bad_key(key, &e.to_string()))?;
            parse_config(&text)
        })
        .collect()
}

pub fn write_sweep(configs: &[RunConfig], dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(RunError::io(dir))?;
    configs
        .iter()
        .map(|c| {
            let path = dir.join(format!("{}.toml", c.run_id));
            std::fs::write(&path, c.to_toml()).map_err(RunError::io(&path))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::HUSIMI_DEFAULT;

    #[test]
    fn numeric_and_unit_values() {
        let vals = ["0.05".to_string(), "0.15".to_string()];
        let cs = sweep_configs(HUSIMI_DEFAULT, "preparation.contamination", &vals).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].preparation.contamination, 0.05);
        assert_eq!(cs[1].run_id, "husimi-coherent-1");
        let cs =
            sweep_configs(HUSIMI_DEFAULT, "preparation.rotation_time", &["10 us".into(), "\"30 us\"".into()]).unwrap();
        assert_eq!(cs[0].preparation.rotation_time, 10.0 * 1e-6);
        assert_eq!(cs[1].preparation.rotation_time, 30.0 * 1e-6);
    }

    #[test]
    fn invalid_values_rejected_with_key() {
        let e = sweep_configs(HUSIMI_DEFAULT, "preparation.hold_time", &["-1 us".into()]).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("preparation.hold_time"));
        assert!(sweep_configs(HUSIMI_DEFAULT, "lattice.colour", &["1".into()]).is_err());
    }

    #[test]
    fn written_configs_parse_back() {
        let cs = sweep_configs("", "lattice.depth", &["20 Er".into(), "30 Er".into()]).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let paths = write_sweep(&cs, tmp.path()).unwrap();
        for (p, c) in paths.iter().zip(&cs) {
            assert_eq!(&parse_config(&std::fs::read_to_string(p).unwrap()).unwrap(), c);
        }
    }
}
