//! Pipeline configuration: TOML file plus per-stage CLI overrides.
//!
//! Every knob has a documented default and unknown keys are rejected.
//! Secrets never appear here — live provider endpoints and keys come from
//! `GEO_PROVIDER_URL`/`GEO_PROVIDER_KEY` and `SCAN_PROVIDER_URL`/
//! `SCAN_PROVIDER_KEY`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use atlas_core::affinity::OverlapMetric;
use atlas_core::extract::ExtractionPolicy;
use atlas_core::geo::GroupKey;
use atlas_core::ipspace::{Prefix, PrefixSet};

use crate::error::StageError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Directory of binary samples (extract stage input).
    pub input_dir: Option<PathBuf>,
    /// Optional role manifest: `sample_id, address_or_prefix, role` lines.
    pub role_manifest: Option<PathBuf>,
    /// Use fixture providers only; live lookups require `offline = false`,
    /// provider env vars, and a build with the `live` feature.
    pub offline: bool,
    /// Also scan raw big-endian 32-bit words (noisy; off by default).
    pub raw32: bool,
    /// Override of the built-in bogon exclusion list.
    pub bogons: Option<Vec<String>>,
    /// CSV geolocation fixture (`address,country,city,asn,lat,lon`).
    pub geo_fixture: Option<PathBuf>,
    /// JSONL scan fixture (`{"address", "ports", "cves", "device_type"}`).
    pub scan_fixture: Option<PathBuf>,
    /// Editable amplification ruleset (`port, protocol, note` lines);
    /// defaults to the built-in UDP reflection table.
    pub amplification_rules: Option<PathBuf>,
    pub overlap_metric: OverlapMetric,
    /// Also write the full per-pair overlap table.
    pub emit_pair_table: bool,
    pub cluster_key: GroupKey,
    /// Flow-map degree threshold: dropzones with strictly more unique
    /// targets than this are drawn.
    pub min_degree: u64,
    /// Port-closure usage threshold (strict less-than).
    pub closure_threshold: f64,
    /// Minimum device-cluster size for closure recommendations.
    pub min_support: u64,
    /// Rows per country table.
    pub top_k: usize,
    /// Budget for metered enrichment providers.
    pub rate_limit_per_sec: f64,
    pub cache_ttl_days: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input_dir: None,
            role_manifest: None,
            offline: true,
            raw32: false,
            bogons: None,
            geo_fixture: None,
            scan_fixture: None,
            amplification_rules: None,
            overlap_metric: OverlapMetric::Jaccard,
            emit_pair_table: false,
            cluster_key: GroupKey::Country,
            min_degree: 500,
            closure_threshold: 0.10,
            min_support: 20,
            top_k: 5,
            rate_limit_per_sec: 1.0,
            cache_ttl_days: 30,
        }
    }
}

impl PipelineConfig {
    /// Loads and validates a config file; relative paths resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, StageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| StageError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| StageError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.input_dir = cfg.input_dir.map(|p| resolve(base, p));
            cfg.role_manifest = cfg.role_manifest.map(|p| resolve(base, p));
            cfg.geo_fixture = cfg.geo_fixture.map(|p| resolve(base, p));
            cfg.scan_fixture = cfg.scan_fixture.map(|p| resolve(base, p));
            cfg.amplification_rules = cfg.amplification_rules.map(|p| resolve(base, p));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), StageError> {
        if !(0.0..=1.0).contains(&self.closure_threshold) {
            return Err(StageError::Config(format!(
                "closure_threshold {} outside [0, 1]",
                self.closure_threshold
            )));
        }
        if !(self.rate_limit_per_sec > 0.0) {
            return Err(StageError::Config(format!(
                "rate_limit_per_sec {} must be positive",
                self.rate_limit_per_sec
            )));
        }
        if self.top_k == 0 {
            return Err(StageError::Config("top_k must be at least 1".to_string()));
        }
        if let Some(bogons) = &self.bogons {
            for b in bogons {
                Prefix::parse(b, true)
                    .map_err(|e| StageError::Config(format!("bogons entry {b:?}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Extraction policy implied by this config.
    pub fn extraction_policy(&self) -> ExtractionPolicy {
        let mut policy = match &self.bogons {
            Some(list) => {
                let prefixes: Vec<Prefix> = list
                    .iter()
                    .map(|b| Prefix::parse(b, true).expect("validated at load").0)
                    .collect();
                ExtractionPolicy::with_bogons(PrefixSet::normalized(prefixes))
            }
            None => ExtractionPolicy::default(),
        };
        policy.raw32 = self.raw32;
        policy
    }

    pub fn cache_ttl_secs(&self) -> u64 {
        self.cache_ttl_days * 24 * 60 * 60
    }

    /// Amplification ruleset: the configured table or the built-in one.
    pub fn load_amplification_rules(
        &self,
    ) -> Result<Vec<atlas_core::exposure::AmplificationRule>, StageError> {
        match &self.amplification_rules {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| StageError::Config(format!("{}: {e}", path.display())))?;
                atlas_core::exposure::parse_amplification_rules(&text)
                    .map_err(|e| StageError::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(atlas_core::exposure::default_amplification_rules()),
        }
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}
