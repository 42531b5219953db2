//! The JSON configuration file: the coupling sequence plus optional inputs for
//! the evolution commands.

use std::path::Path;

use jostlab::lattice::{canonicalize, Coupling};
use jostlab::propagator::{InitialProfile, QuadParams};
use jostlab::CouplingSequence;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    alpha: Vec<Coupling>,
    #[serde(default)]
    initial: Option<InitialProfile>,
    #[serde(default)]
    quad: Option<QuadParams>,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub seq: CouplingSequence,
    pub initial: InitialProfile,
    pub quad: QuadParams,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let seq = canonicalize(raw.alpha.iter().map(|c| (c.j, c.value))).map_err(|e| CliError::Config(e.to_string()))?;
        let initial = raw.initial.unwrap_or(InitialProfile::Gaussian { center: 0.0, width: 1.0 });
        initial.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let quad = raw.quad.unwrap_or_default();
        quad.validate(&seq).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { seq, initial, quad })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }
}
