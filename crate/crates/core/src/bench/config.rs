use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fabric::CostModel;
use crate::orchestrator::ClusterConfig;
use crate::platform::{PlatformConfig, Strategy};
use crate::time::{parse_duration, Nanos};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
}

/// Everything a replay needs besides the trace and the registry.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cluster: ClusterConfig,
    pub platform: PlatformConfig,
    /// Memory series resolution.
    pub sample_period: Nanos,
    /// Pool refill and cache eviction cadence.
    pub background_period: Nanos,
    /// Function registry file, relative to the config file.
    pub registry: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cluster: ClusterConfig {
                nodes: 8,
                ..ClusterConfig::default()
            },
            platform: PlatformConfig::default(),
            sample_period: Nanos::from_ms(100),
            background_period: Nanos::from_ms(10),
            registry: None,
        }
    }
}

fn duration(v: &str) -> Result<Nanos, String> {
    parse_duration(v).ok_or_else(|| format!("bad duration {v:?}"))
}

fn int<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("bad integer {v:?}"))
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("bad boolean {v:?}")),
    }
}

impl SimConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let c = &mut self.cluster;
        let p = &mut self.platform;
        match key {
            k if CostModel::is_bandwidth_key(k) => {
                c.fabric.cost.set(k, int(value)?);
            }
            k if c.fabric.cost.entries().iter().any(|(n, _)| *n == k) => {
                c.fabric.cost.set(k, duration(value)?.0);
            }
            "seed" => {
                let s: u64 = int(value)?;
                c.fabric.seed = s;
                p.seed = s;
            }
            "nodes" => c.nodes = int(value)?,
            "handler_count" => c.fabric.handler_count = int(value)?,
            "rpc_timeout" => c.fabric.rpc_timeout = duration(value)?,
            "prefetch" => c.paging.prefetch = int(value)?,
            "strict_revocation" => c.paging.strict_revocation = flag(value)?,
            "pt_cache_ttl" => c.paging.pt_cache_ttl = duration(value)?,
            "target_pool_capacity" => c.pool.capacity = int(value)?,
            "target_pool_watermark" => c.pool.low_watermark = int(value)?,
            "target_pool_refill_period" => c.pool.refill_period = duration(value)?,
            "lean_pool" => c.lean_pool = int(value)?,
            "strategy" => p.strategy = value.parse()?,
            "seed_keepalive" => p.seed_keepalive = duration(value)?,
            "renewal_margin" => p.renewal_margin = duration(value)?,
            "max_function_lifetime" => p.max_function_lifetime = duration(value)?,
            "gc_period" => p.gc_period = duration(value)?,
            "slots_per_node" => p.slots_per_node = int(value)?,
            "caching_max_instances" => {
                p.caching_max_instances = match value {
                    "none" | "unbounded" => None,
                    v => Some(int(v)?),
                }
            }
            "sample_period" => self.sample_period = duration(value)?,
            "background_period" => self.background_period = duration(value)?,
            "registry" => self.registry = Some(PathBuf::from(value)),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses `key=value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = SimConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ConfigError::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            cfg.set(k.trim(), v.trim()).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. A relative `registry` path resolves against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        if let Some(r) = cfg.registry.as_mut().filter(|r| r.is_relative()) {
            if let Some(dir) = path.parent() {
                *r = dir.join(&*r);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        self.cluster
            .fabric
            .cost
            .validate()
            .map_err(ConfigError::Invalid)?;
        if self.cluster.nodes == 0 {
            return bad("nodes must be at least 1");
        }
        if self.cluster.fabric.handler_count == 0 {
            return bad("handler_count must be at least 1");
        }
        let pool = &self.cluster.pool;
        if pool.capacity == 0 || pool.low_watermark > pool.capacity {
            return bad("target pool watermark must be within capacity");
        }
        let p = &self.platform;
        if p.slots_per_node == 0 {
            return bad("slots_per_node must be at least 1");
        }
        if p.renewal_margin >= p.seed_keepalive {
            return bad("renewal_margin must be shorter than seed_keepalive");
        }
        if p.max_function_lifetime < p.seed_keepalive {
            return bad("max_function_lifetime must cover seed_keepalive");
        }
        if p.caching_max_instances == Some(0) {
            return bad("caching_max_instances must be positive");
        }
        for (name, v) in [
            ("gc_period", p.gc_period),
            ("sample_period", self.sample_period),
            ("background_period", self.background_period),
        ] {
            if v == Nanos::ZERO {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn with_strategy(mut self, s: Strategy) -> Self {
        self.platform.strategy = s;
        self
    }
}
