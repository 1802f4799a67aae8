use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// A single seed `N` or an inclusive range `a..b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSpec {
    pub first: u64,
    pub last: u64,
}

impl SeedSpec {
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.first..=self.last
    }
}

impl FromStr for SeedSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |v: &str| v.trim().parse::<u64>().map_err(|e| format!("bad seed {v:?}: {e}"));
        match s.split_once("..") {
            Some((a, b)) => {
                let (first, last) = (parse(a)?, parse(b.trim_start_matches('='))?);
                if last < first {
                    return Err(format!("empty seed range {s}"));
                }
                Ok(Self { first, last })
            }
            None => {
                let v = parse(s)?;
                Ok(Self { first: v, last: v })
            }
        }
    }
}

impl fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.first == self.last {
            write!(f, "{}", self.first)
        } else {
            write!(f, "{}..{}", self.first, self.last)
        }
    }
}

impl Serialize for SeedSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SeedSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Self { first: v, last: v }),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Experiment parameters, from flags and an optional TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub d: Option<usize>,
    pub tol: Option<f64>,
    pub t_end: Option<f64>,
    pub seed: Option<SeedSpec>,
    pub trials: Option<usize>,
    pub window: Option<f64>,
    pub resolution: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `self` win over `other`.
    pub fn or(self, other: Self) -> Self {
        Self {
            d: self.d.or(other.d),
            tol: self.tol.or(other.tol),
            t_end: self.t_end.or(other.t_end),
            seed: self.seed.or(other.seed),
            trials: self.trials.or(other.trials),
            window: self.window.or(other.window),
            resolution: self.resolution.or(other.resolution),
            out: self.out.or(other.out),
        }
    }

    pub fn d_or(&self, default: usize) -> Result<usize> {
        let d = self.d.unwrap_or(default);
        if d == 0 {
            bail!("--d must be at least 1");
        }
        Ok(d)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Everything needed to reproduce a run, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub version: String,
    pub parameters: ExperimentConfig,
    pub extra: toml::Table,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.toml");
        std::fs::write(&path, toml::to_string(self)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
