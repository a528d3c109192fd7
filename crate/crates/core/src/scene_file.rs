//! Scene files: one TOML document per game, stamped with `format_version`.

use std::path::Path;

use thiserror::Error;

use crate::scene::{SceneConfig, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum SceneFileError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("missing format_version")]
    MissingVersion,
    #[error("unsupported format_version {found}; this build reads version {FORMAT_VERSION}")]
    Version { found: i64 },
    #[error("invalid prop chain: {0}")]
    Invalid(String),
    #[error("could not serialize scene: {0}")]
    Serialize(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn parse_error(text: &str, e: toml::de::Error) -> SceneFileError {
    let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    SceneFileError::Parse {
        line,
        column,
        message: e.message().trim().to_string(),
    }
}

pub fn to_toml(config: &SceneConfig) -> Result<String, SceneFileError> {
    toml::to_string(config).map_err(|e| SceneFileError::Serialize(e.to_string()))
}

/// Parses a scene file. The version is checked before the schema so that
/// files from newer builds fail with a version error, not a field error.
pub fn from_toml(text: &str) -> Result<SceneConfig, SceneFileError> {
    let raw: toml::Table = text.parse().map_err(|e| parse_error(text, e))?;
    match raw.get("format_version") {
        None => return Err(SceneFileError::MissingVersion),
        Some(toml::Value::Integer(v)) if *v == FORMAT_VERSION as i64 => {}
        Some(toml::Value::Integer(v)) => return Err(SceneFileError::Version { found: *v }),
        Some(_) => {
            return Err(SceneFileError::Parse {
                line: 1,
                column: 1,
                message: "format_version must be an integer".into(),
            })
        }
    }
    let config: SceneConfig = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    let violations: Vec<String> = config
        .rooms
        .iter()
        .flat_map(|r| r.chain.validate().violations)
        .map(|v| v.to_string())
        .collect();
    if !violations.is_empty() {
        return Err(SceneFileError::Invalid(violations.join("; ")));
    }
    Ok(config)
}

pub fn save(path: &Path, config: &SceneConfig) -> Result<(), SceneFileError> {
    let text = to_toml(config)?;
    std::fs::write(path, text).map_err(|source| SceneFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<SceneConfig, SceneFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| SceneFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_toml(&text)
}

/// Save followed by load, in memory.
pub fn roundtrip_config(config: &SceneConfig) -> Result<SceneConfig, SceneFileError> {
    from_toml(&to_toml(config)?)
}
