//! Run configuration: JSON files plus command-line overrides, with every
//! default materialized into the output directory so a run can be
//! reproduced byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hfsp_core::baselines::FairConfig;
use hfsp_core::hfsp::HfspConfig;
use hfsp_core::workload::{preset_spec, WorkloadSpec};
use hfsp_core::ClusterConfig;
use serde::{Deserialize, Serialize};

pub const OUTPUT_ROOT_ENV: &str = "HFSP_OUTPUT_ROOT";

/// Where the jobs come from: a trace file or a generator spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobSource {
    TracePath(PathBuf),
    Preset(String),
    Spec(WorkloadSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Exactly one source must be set.
    pub trace: Option<PathBuf>,
    pub preset: Option<String>,
    pub generator: Option<WorkloadSpec>,
    pub cluster: ClusterConfig,
    pub schedulers: Vec<String>,
    pub hfsp: HfspConfig,
    pub fair: FairSettings,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Emit events.ndjson per run.
    pub event_log: bool,
    /// Simulated-seconds cap guarding against livelock.
    pub time_cap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trace: None,
            preset: None,
            generator: None,
            cluster: ClusterConfig {
                num_machines: 20,
                map_slots_per_machine: 4,
                reduce_slots_per_machine: 2,
                replication_factor: 3,
                ..ClusterConfig::default()
            },
            schedulers: vec!["hfsp".to_string()],
            hfsp: HfspConfig::default(),
            fair: FairSettings::default(),
            seeds: vec![1],
            output: PathBuf::from("out"),
            event_log: false,
            time_cap: 1e6,
        }
    }
}

/// Serializable mirror of the FAIR scheduler knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FairSettings {
    pub min_share: u32,
    pub delay_max_skips: u32,
}

impl Default for FairSettings {
    fn default() -> Self {
        let d = FairConfig::default();
        FairSettings {
            min_share: d.min_share,
            delay_max_skips: d.delay_max_skips,
        }
    }
}

impl From<&FairSettings> for FairConfig {
    fn from(s: &FairSettings) -> Self {
        FairConfig {
            min_share: s.min_share,
            delay_max_skips: s.delay_max_skips,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn source(&self) -> anyhow::Result<JobSource> {
        let mut sources = Vec::new();
        if let Some(t) = &self.trace {
            sources.push(JobSource::TracePath(t.clone()));
        }
        if let Some(p) = &self.preset {
            if preset_spec(p).is_none() {
                bail!("unknown preset {p:?} (expected fb2009, fb2009-maponly or fb2010)");
            }
            sources.push(JobSource::Preset(p.clone()));
        }
        if let Some(g) = &self.generator {
            sources.push(JobSource::Spec(g.clone()));
        }
        match sources.len() {
            0 => bail!("no job source: set exactly one of trace, preset or generator"),
            1 => Ok(sources.pop().expect("one source")),
            n => bail!("{n} job sources set; exactly one of trace, preset or generator expected"),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.source()?;
        if self.seeds.is_empty() {
            bail!("seeds must be non-empty");
        }
        if self.schedulers.is_empty() {
            bail!("schedulers must be non-empty");
        }
        for name in &self.schedulers {
            if !matches!(name.as_str(), "fifo" | "fair" | "hfsp") {
                bail!("unknown scheduler {name:?} (expected fifo, fair or hfsp)");
            }
        }
        self.cluster
            .validate()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        self.hfsp
            .estimator
            .validate()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok(())
    }

    /// Resolve the output directory against the environment override.
    pub fn resolved_output(&self) -> PathBuf {
        resolve_output(&self.output)
    }

    /// Persist the fully-resolved configuration beside the results.
    pub fn write_echo(&self, dir: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("config echo");
        crate::report::write_atomic(&dir.join("resolved_config.json"), text.as_bytes())?;
        Ok(())
    }
}

/// Relative output paths land under `HFSP_OUTPUT_ROOT` when it is set.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}

/// Seed lists accept either comma-separated values or an inclusive range
/// `a..b`.
pub fn parse_seeds(text: &str) -> anyhow::Result<Vec<u64>> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().context("range start")?;
        let hi: u64 = hi.trim().parse().context("range end")?;
        if hi < lo {
            bail!("empty seed range {lo}..{hi}");
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(Into::into))
        .collect::<anyhow::Result<Vec<u64>>>()
        .and_then(|v| {
            if v.is_empty() {
                bail!("empty seed list")
            } else {
                Ok(v)
            }
        })
}
