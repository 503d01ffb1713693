//! Flat `key = value` configuration files.

use std::path::Path;

use coopsense::config::PARAMETER_NAMES;
use coopsense::{ConfigError, SystemConfig};
use thiserror::Error;

/// The bundled reference parameter set, base of every preset.
pub const REFERENCE_CONFIG: &str = include_str!("../configs/reference.cfg");

/// Keys that may be left out of a configuration file.
pub const OPTIONAL_KEYS: &[&str] = &["tau1", "beta", "K_s", "tau2_agg", "rho", "eta", "d_e", "delta_x"];

const FLOW_KEYS: &[&str] = &["rho", "eta", "d_e", "delta_x"];

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required parameter `{0}`")]
    Missing(String),
    #[error("flow check needs all of rho, eta, d_e, delta_x; missing `{0}`")]
    PartialFlow(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigFileError> {
    let mut config = SystemConfig::reference_defaults();
    config.flow_check = None;
    let mut seen: Vec<&str> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigFileError::Syntax {
            line,
            reason: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let name = PARAMETER_NAMES
            .iter()
            .copied()
            .find(|&n| n == key)
            .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        if seen.contains(&name) {
            return Err(ConfigFileError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        let number: f64 = value.parse().map_err(|_| ConfigFileError::Syntax {
            line,
            reason: format!("`{value}` is not a number"),
        })?;
        config.set(name, number)?;
        seen.push(name);
    }
    if let Some(missing) = PARAMETER_NAMES
        .iter()
        .find(|n| !OPTIONAL_KEYS.contains(n) && !seen.contains(n))
    {
        return Err(ConfigFileError::Missing(missing.to_string()));
    }
    if FLOW_KEYS.iter().any(|k| seen.contains(k)) {
        if let Some(missing) = FLOW_KEYS.iter().find(|k| !seen.contains(k)) {
            return Err(ConfigFileError::PartialFlow(missing.to_string()));
        }
    }
    config.validate()?;
    Ok(config)
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: &Path) -> Result<SystemConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_is_the_reference_parameter_set() {
        assert_eq!(
            parse_config(REFERENCE_CONFIG).unwrap(),
            SystemConfig::reference_defaults()
        );
    }

    #[test]
    fn missing_key_is_named() {
        let text = REFERENCE_CONFIG.replace("v = 0.02", "");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(&err, ConfigFileError::Missing(k) if k == "v"), "{err}");
    }

    #[test]
    fn typos_are_rejected() {
        let text = format!("{REFERENCE_CONFIG}\nalhpa = 0.3\n");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigFileError::Config(ConfigError::UnknownKey(k))) if k == "alhpa"
        ));
    }

    #[test]
    fn storage_slots_below_k_are_rejected() {
        let err = parse_config(&format!("{REFERENCE_CONFIG}\nK_s = 5\n")).unwrap_err();
        assert!(err.to_string().contains("K_s >= K"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_config("v 0.02\n").unwrap_err();
        assert!(matches!(err, ConfigFileError::Syntax { line: 1, .. }));
        let err = parse_config(&REFERENCE_CONFIG.replace("M = 1e7", "M = lots")).unwrap_err();
        assert!(err.to_string().contains("lots"));
        let err = parse_config(&format!("{REFERENCE_CONFIG}\nM = 1e8\n")).unwrap_err();
        assert!(matches!(err, ConfigFileError::Duplicate { .. }));
    }

    #[test]
    fn flow_keys_come_together() {
        let err = parse_config(&format!("{REFERENCE_CONFIG}\nrho = 1000\n")).unwrap_err();
        assert!(matches!(err, ConfigFileError::PartialFlow(_)));
        let full = format!("{REFERENCE_CONFIG}\nrho = 1000\neta = 1e-3\nd_e = 0.1\ndelta_x = 60\n");
        assert!(parse_config(&full).unwrap().flow_check.is_some());
    }
}
