use std::path::{Path, PathBuf};
use std::time::Duration;

use qsched_core::{NoiseConfig, SchedulerConfig};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Everything `serve` needs. Loaded from an optional TOML file, then
/// overridden by `QSCHED_*` environment variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub journal_path: PathBuf,
    pub scheduler: SchedulerConfig,
    /// Completed jobs older than this are dropped. `None` keeps them forever.
    pub result_ttl_secs: Option<u64>,
    /// Wait for each batch to finish before starting the next cycle.
    pub strict_serial: bool,
    /// Base seed for batch executions; random per batch when unset.
    pub seed: Option<u64>,
    pub noise: Option<NoiseConfig>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".to_string(),
            journal_path: PathBuf::from("qsched-journal.jsonl"),
            scheduler: SchedulerConfig::default(),
            result_ttl_secs: None,
            strict_serial: false,
            seed: None,
            noise: None,
        }
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ServiceError> {
    raw.trim()
        .parse()
        .map_err(|_| ServiceError::Config(format!("{key}: cannot parse {raw:?}")))
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies overrides from `vars` (normally `std::env::vars()`).
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ServiceError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (key, value) in vars {
            match key.as_str() {
                "QSCHED_LISTEN" => self.listen = value,
                "QSCHED_JOURNAL" => self.journal_path = PathBuf::from(value),
                "QSCHED_CAPACITY" => self.scheduler.capacity = parse_env(&key, &value)?,
                "QSCHED_CYCLE_MS" => {
                    self.scheduler.cycle_duration = Duration::from_millis(parse_env(&key, &value)?)
                }
                "QSCHED_COMPOSED_SHOTS" => self.scheduler.composed_shots = parse_env(&key, &value)?,
                "QSCHED_BACKEND" => self.scheduler.backend = value,
                "QSCHED_RESULT_TTL_SECS" => self.result_ttl_secs = Some(parse_env(&key, &value)?),
                "QSCHED_STRICT_SERIAL" => self.strict_serial = parse_env(&key, &value)?,
                "QSCHED_SEED" => self.seed = Some(parse_env(&key, &value)?),
                _ => {}
            }
        }
        Ok(())
    }

    /// File (if any) plus process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.scheduler
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        if let Some(n) = &self.noise {
            n.validate().map_err(|e| ServiceError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_scheduler_policy() {
        let c = ServiceConfig::default();
        assert_eq!(c.scheduler.capacity, 127);
        assert_eq!(c.scheduler.composed_shots, 10_000);
        assert_eq!(c.scheduler.cycle_duration, Duration::from_secs(5));
    }

    #[test]
    fn toml_then_env() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.toml");
        std::fs::write(
            &path,
            "listen = \"0.0.0.0:9000\"\nstrict_serial = true\n[scheduler]\ncapacity = 20\ncycle_duration = 250\ncomposed_shots = 500\nbackend = \"statevector\"\n",
        )
        .unwrap();
        let mut c = ServiceConfig::from_file(&path).unwrap();
        assert_eq!(c.scheduler.capacity, 20);
        assert_eq!(c.scheduler.cycle_duration, Duration::from_millis(250));
        assert!(c.strict_serial);
        c.apply_env([
            ("QSCHED_CAPACITY".to_string(), "12".to_string()),
            ("QSCHED_CYCLE_MS".to_string(), "100".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ])
        .unwrap();
        assert_eq!(c.scheduler.capacity, 12);
        assert_eq!(c.scheduler.cycle_duration, Duration::from_millis(100));
        assert_eq!(c.listen, "0.0.0.0:9000");
        assert!(c
            .apply_env([("QSCHED_CAPACITY".to_string(), "lots".to_string())])
            .is_err());
    }
}
