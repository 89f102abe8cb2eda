//! `rtj.toml` at the project root.
//!
//! ```toml
//! test_markers = ["test", "tokio::test"]
//! assertion_names = ["assert*", "debug_assert*", "check_*"]
//! fail_primitive = "panic!"
//! ```
//!
//! Missing keys keep the built-in defaults.

use std::path::Path;

use rtj_core::pattern::NamePattern;
use rtj_core::rules::RulesError;
use rtj_core::Rules;
use serde::Deserialize;

pub const CONFIG_FILE: &str = "rtj.toml";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Syntax { path: String, source: toml::de::Error },
    #[error("{path}: {source}")]
    Invalid { path: String, source: RulesError },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    test_markers: Option<Vec<String>>,
    assertion_names: Option<Vec<String>>,
    fail_primitive: Option<String>,
}

/// Rules from `rtj.toml` under `root`, or the defaults when absent.
pub fn load_rules(root: &Path) -> Result<Rules, ConfigError> {
    let path = root.join(CONFIG_FILE);
    let shown = path.display().to_string();
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Rules::default()),
        Err(source) => return Err(ConfigError::Io { path: shown, source }),
    };
    parse_rules(&text).map_err(|e| match e {
        ParseError::Syntax(source) => ConfigError::Syntax { path: shown.clone(), source },
        ParseError::Invalid(source) => ConfigError::Invalid { path: shown.clone(), source },
    })
}

enum ParseError {
    Syntax(toml::de::Error),
    Invalid(RulesError),
}

fn parse_rules(text: &str) -> Result<Rules, ParseError> {
    let raw: RawConfig = toml::from_str(text).map_err(ParseError::Syntax)?;
    let defaults = Rules::default();
    let patterns = |v: Option<Vec<String>>, d: &[NamePattern]| match v {
        Some(v) => v.iter().map(NamePattern::new).collect(),
        None => d.to_vec(),
    };
    Rules::new(
        patterns(raw.test_markers, defaults.test_markers()),
        patterns(raw.assertion_names, defaults.assertion_names()),
        raw.fail_primitive.unwrap_or_else(|| defaults.fail_primitive().to_string()),
    )
    .map_err(ParseError::Invalid)
}
