use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// `git describe` of the source tree this crate was built from, or
/// `"unknown"` outside a checkout.
pub fn build_describe() -> &'static str {
    env!("TAILQ_GIT_DESCRIBE")
}

/// Metadata written next to every CSV report.
#[derive(Clone, Debug, Serialize)]
pub struct ReportMeta<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub build: &'static str,
    pub kind: String,
    pub seed: u64,
    /// Fully resolved configuration, enough to re-run the report.
    pub config: C,
    /// Kind-specific summary values.
    pub summary: serde_json::Value,
}

impl<C: Serialize> ReportMeta<C> {
    pub fn new(kind: impl Into<String>, seed: u64, config: C, summary: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            build: build_describe(),
            kind: kind.into(),
            seed,
            config,
            summary,
        }
    }
}

pub fn write_json_sidecar<C: Serialize>(path: &Path, meta: &ReportMeta<C>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(meta).map_err(std::io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
