//! JSON configuration files.
//!
//! Every section and field is optional; missing values take the defaults of
//! [`ScenarioConfig::default`]. Unknown fields are rejected.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Pretty-printed JSON with every field spelled out.
pub fn write_config(cfg: &ScenarioConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("configuration serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(parse_config("{}").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let cfg = parse_config(r#"{"scenario": {"t_p": 34}}"#).unwrap();
        assert_eq!(cfg.scenario.t_p, 34.0);
        assert_eq!(cfg.scenario.v_lead0, 17.0);
        assert_eq!(cfg.weights.mu, 5.0);
    }

    #[test]
    fn syntax_error_reports_line() {
        match parse_config("{\n  \"gains\": {\n    \"kx\": ,\n  }\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn gain_violation_names_field() {
        match parse_config(r#"{"gains": {"kxv": 1.0}}"#) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "gains"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(matches!(
            parse_config(r#"{"scenario": {"tp": 3}}"#),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn round_trip_default() {
        let cfg = ScenarioConfig::default();
        assert_eq!(parse_config(&write_config(&cfg)).unwrap(), cfg);
    }
}
