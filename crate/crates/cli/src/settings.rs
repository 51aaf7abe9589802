//! Run settings merged from flags, a config file and defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use queso_core::optimizer::CostKind;
use serde::{Deserialize, Serialize};

/// Every tunable value. Unset fields fall through to the next source.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Built-in gate set name or path to a gate-set JSON file
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gateset: Option<String>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_qubits: Option<usize>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_size: Option<usize>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic_max_qubits: Option<usize>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic_max_size: Option<usize>,

    /// Skip symbolic synthesis
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_symbolic: Option<bool>,

    /// Rule file used by `optimize`
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rules: Option<PathBuf>,

    /// Drop symbolic rules after loading
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_symbolic_rules: Option<bool>,

    /// Keep only size-reducing rules
    #[arg(long, global = true, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reducing_only: Option<bool>,

    /// Keep only rules on at most this many qubits
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule_max_qubits: Option<usize>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queue_size: Option<usize>,

    /// Time limit in seconds
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timeout: Option<f64>,

    /// Cost function: total, 2q or no-rz
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostKind>,

    /// Built-in device name or path to a device JSON file
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,

    /// Worker threads (default: available parallelism)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr, $($f:ident),*) => {
        Settings { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Settings {
    /// Fields of `self`, with gaps filled from `other`.
    pub fn or(self, other: Settings) -> Settings {
        merge_fields!(
            self,
            other,
            gateset,
            max_qubits,
            max_size,
            symbolic_max_qubits,
            symbolic_max_size,
            no_symbolic,
            rules,
            no_symbolic_rules,
            reducing_only,
            rule_max_qubits,
            queue_size,
            timeout,
            cost,
            device,
            seed,
            jobs
        )
    }

    /// Reads a TOML config file, or the settings recorded in a JSON run
    /// manifest.
    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let m: crate::manifest::Manifest = serde_json::from_str(&text)
                .with_context(|| format!("malformed manifest {}", path.display()))?;
            return Ok(m.settings);
        }
        toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))
    }

    pub fn timeout(&self) -> Result<Option<std::time::Duration>> {
        match self.timeout {
            None => Ok(None),
            Some(t) if t.is_finite() && t >= 0.0 => Ok(Some(std::time::Duration::from_secs_f64(t))),
            Some(t) => bail!("timeout must be a non-negative number of seconds, got {t}"),
        }
    }
}

/// Command-line flags override values from `--config`.
pub fn resolve(flags: Settings, config: Option<&Path>) -> Result<Settings> {
    match config {
        Some(p) => Ok(flags.or(Settings::from_file(p)?)),
        None => Ok(flags),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let flags = Settings {
            max_size: Some(3),
            ..Settings::default()
        };
        let config: Settings =
            toml::from_str("max-size = 5\nmax-qubits = 2\ncost = \"2q\"").unwrap();
        let s = flags.or(config);
        assert_eq!(s.max_size, Some(3));
        assert_eq!(s.max_qubits, Some(2));
        assert_eq!(s.cost, Some(CostKind::TwoQubit));
        assert_eq!(s.seed, None);
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(toml::from_str::<Settings>("max_sise = 3").is_err());
    }

    #[test]
    fn negative_timeout_is_rejected() {
        let s = Settings {
            timeout: Some(-1.0),
            ..Settings::default()
        };
        assert!(s.timeout().is_err());
    }
}
