//! Run configuration: key=value files merged with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_ENV: &str = "STABLE_WINDINGS_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for OutFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutFormat::Json),
            "csv" => Ok(OutFormat::Csv),
            _ => Err(Error::config("format", format!("expected csv or json, got `{s}`"))),
        }
    }
}

/// Everything a command may need. Unset fields fall back to per-experiment
/// defaults when the experiment is resolved.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub t_log: Option<f64>,
    /// Points per decade of time; adaptive steppers use `κ = ln 10 / mesh`.
    pub mesh: Option<u32>,
    pub epsilon: Option<f64>,
    pub workers: Option<usize>,
    pub out_format: Option<OutFormat>,
    pub out_path: Option<PathBuf>,
    /// Winding mode, upcrossing regime or reversal statistic.
    pub mode: Option<String>,
    pub start_modulus: Option<f64>,
    pub compare_modulus: Option<f64>,
    pub radius: Option<f64>,
    pub time: Option<f64>,
}

fn parse<T: std::str::FromStr>(field: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(field, format!("cannot parse `{}`", v.trim())))
}

impl RunConfig {
    /// Parse `key = value` lines. `#` starts a comment; keys may use `-` or `_`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), "expected key=value")
            })?;
            c.set(&k.trim().replace('-', "_"), v.trim())?;
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = Some(parse(key, v)?),
            "rho" => self.rho = Some(parse(key, v)?),
            "seed" => self.seed = Some(parse(key, v)?),
            "n_paths" => self.n_paths = Some(parse(key, v)?),
            "t_log" => self.t_log = Some(parse(key, v)?),
            "mesh" => self.mesh = Some(parse(key, v)?),
            "epsilon" => self.epsilon = Some(parse(key, v)?),
            "workers" => self.workers = Some(parse(key, v)?),
            "format" | "out_format" => self.out_format = Some(v.parse()?),
            "out" | "out_path" => self.out_path = Some(PathBuf::from(v)),
            "mode" | "regime" => self.mode = Some(v.to_string()),
            "start_modulus" => self.start_modulus = Some(parse(key, v)?),
            "compare_modulus" => self.compare_modulus = Some(parse(key, v)?),
            "radius" => self.radius = Some(parse(key, v)?),
            "time" => self.time = Some(parse(key, v)?),
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(mut self, over: &RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => {$( if over.$f.is_some() { self.$f = over.$f.clone(); } )*};
        }
        take!(
            alpha,
            rho,
            seed,
            n_paths,
            t_log,
            mesh,
            epsilon,
            workers,
            out_format,
            out_path,
            mode,
            start_modulus,
            compare_modulus,
            radius,
            time
        );
        self
    }

    pub fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    /// The set fields as sorted key/value text, for display.
    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        macro_rules! put {
            ($($f:ident),*) => {$( if let Some(v) = &self.$f { m.insert(stringify!($f), format!("{v:?}")); } )*};
        }
        put!(
            alpha,
            rho,
            seed,
            n_paths,
            t_log,
            mesh,
            epsilon,
            workers,
            out_format,
            out_path,
            mode,
            start_modulus,
            compare_modulus,
            radius,
            time
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_merge() {
        let c = RunConfig::from_text("# defaults\nalpha = 0.5\nn-paths=200 # inline\n\nformat=csv\n")
            .unwrap();
        assert_eq!(c.alpha, Some(0.5));
        assert_eq!(c.n_paths, Some(200));
        assert_eq!(c.out_format, Some(OutFormat::Csv));
        let over = RunConfig {
            alpha: Some(1.0),
            ..Default::default()
        };
        let m = c.merged(&over);
        assert_eq!(m.alpha, Some(1.0));
        assert_eq!(m.n_paths, Some(200));
    }

    #[test]
    fn errors_name_the_field() {
        match RunConfig::from_text("alpha=abc") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "alpha"),
            other => panic!("{other:?}"),
        }
        match RunConfig::from_text("colour=red") {
            Err(Error::Config { field, .. }) => assert_eq!(field, "colour"),
            other => panic!("{other:?}"),
        }
        assert!(RunConfig::from_text("just words").is_err());
    }
}
