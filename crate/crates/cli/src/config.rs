//! Run configuration.
//!
//! A flat text file of `key = value` lines. `#` starts a comment, blank lines
//! are ignored and unknown keys are rejected. Relative paths resolve against
//! the directory holding the file. See `README.md` for the key list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use sha2::{Digest, Sha256};
use tenure_core::hazard::{Aggregation, DEFAULT_MIN_EXCESS, DEFAULT_WINDOW};
use tenure_core::hazardfit::{Family, DEFAULT_RESTARTS};
use tenure_core::ingest::{GenuineFilterPolicy, Neighborhood, PeriodSegmentation};
use tenure_core::simlab::EntryProcess;
use tenure_core::survey::{MissingPolicy, SplitCorrection, TenureBinOptions, MIN_GROUP_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub struct SimlabConfig {
    pub n_parcels: usize,
    /// `w, k1, lambda1, k2, lambda2` of a two-component Weibull mixture.
    pub mixture: [f64; 5],
    pub entry: EntryProcess,
    pub n_survey: usize,
    pub dip_start: f64,
    pub dip_end: f64,
    pub dip_depth: f64,
}

impl Default for SimlabConfig {
    fn default() -> Self {
        SimlabConfig {
            n_parcels: 10_000,
            mixture: [0.4, 1.2, 4.0, 3.0, 18.0],
            entry: EntryProcess::Uniform,
            n_survey: 2000,
            dip_start: 2.5,
            dip_end: 12.0,
            dip_depth: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub transactions: Option<PathBuf>,
    pub adapter: Option<PathBuf>,
    /// Precomputed spell table; skips transaction parsing.
    pub spells: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    pub codebook: Option<PathBuf>,
    /// Population counts or shares per neighborhood, for weighting.
    pub population: BTreeMap<Neighborhood, f64>,
    pub segmentation: PeriodSegmentation,
    pub policy: GenuineFilterPolicy,
    pub bootstrap_replicates: usize,
    pub seed: Option<u64>,
    pub families: Vec<Family>,
    pub fit_bin_years: f64,
    pub fit_restarts: usize,
    pub hazard_window: usize,
    pub hazard_min_excess: f64,
    pub hazard_aggregation: Aggregation,
    pub missing: MissingPolicy,
    pub survey_tau: f64,
    pub min_group_size: usize,
    pub tenure_bins: TenureBinOptions,
    pub simlab: Option<SimlabConfig>,
    pub out: PathBuf,
    /// Path strings as written, used for the canonical form.
    written_paths: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            transactions: None,
            adapter: None,
            spells: None,
            survey: None,
            codebook: None,
            population: BTreeMap::new(),
            segmentation: PeriodSegmentation::default(),
            policy: GenuineFilterPolicy::default(),
            bootstrap_replicates: 2000,
            seed: None,
            families: Family::ALL.to_vec(),
            fit_bin_years: 1.0,
            fit_restarts: DEFAULT_RESTARTS,
            hazard_window: DEFAULT_WINDOW,
            hazard_min_excess: DEFAULT_MIN_EXCESS,
            hazard_aggregation: Aggregation::Ratio,
            missing: MissingPolicy::Drop,
            survey_tau: 0.0,
            min_group_size: MIN_GROUP_SIZE,
            tenure_bins: TenureBinOptions::default(),
            simlab: None,
            out: PathBuf::from("out"),
            written_paths: BTreeMap::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("{key}: expected true or false, got {value:?}"),
    }
}

fn parse_date(key: &str, value: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(value, "%Y-%m-%d").map_err(|e| anyhow!("{key}: {value:?} is not YYYY-MM-DD: {e}"))
}

fn parse_family(value: &str) -> Result<Family> {
    Family::ALL
        .into_iter()
        .find(|f| f.name() == value.trim().to_ascii_lowercase().replace('-', "_"))
        .ok_or_else(|| anyhow!("unknown family {value:?}"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), i + 1).is_some() {
                bail!("line {}: duplicate key {key}", i + 1);
            }
            cfg.set(key, value, base).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    fn path(&mut self, key: &'static str, value: &str, base: &Path) -> PathBuf {
        self.written_paths.insert(key, value.to_string());
        let p = PathBuf::from(value);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    }

    fn simlab_mut(&mut self) -> &mut SimlabConfig {
        self.simlab.get_or_insert_with(SimlabConfig::default)
    }

    fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        match key {
            "transactions" => self.transactions = Some(self.path("transactions", value, base)),
            "adapter" => self.adapter = Some(self.path("adapter", value, base)),
            "spells" => self.spells = Some(self.path("spells", value, base)),
            "survey" => self.survey = Some(self.path("survey", value, base)),
            "codebook" => self.codebook = Some(self.path("codebook", value, base)),
            "out" => self.out = base.join(value),
            "seed" => self.seed = Some(parse(key, value)?),
            "cutoff_date" => self.segmentation.cutoff_date = parse_date(key, value)?,
            "observation_end" => self.segmentation.observation_end = parse_date(key, value)?,
            "bootstrap_replicates" => self.bootstrap_replicates = parse(key, value)?,
            "genuine.builder_max_days" => self.policy.builder_max_days = parse(key, value)?,
            "genuine.exclude_zero_price" => self.policy.exclude_zero_price = parse_bool(key, value)?,
            "genuine.exclude_quitclaim" => self.policy.exclude_quitclaim = parse_bool(key, value)?,
            "genuine.exclude_trustee" => self.policy.exclude_trustee = parse_bool(key, value)?,
            "fit.families" => {
                self.families = value.split(',').map(parse_family).collect::<Result<_>>()?;
                if self.families.is_empty() {
                    bail!("fit.families is empty");
                }
            }
            "fit.bin_years" => self.fit_bin_years = parse(key, value)?,
            "fit.restarts" => self.fit_restarts = parse(key, value)?,
            "hazard.window" => self.hazard_window = parse(key, value)?,
            "hazard.min_excess" => self.hazard_min_excess = parse(key, value)?,
            "hazard.aggregation" => {
                self.hazard_aggregation = match value {
                    "ratio" => Aggregation::Ratio,
                    "product" => Aggregation::Product,
                    _ => bail!("hazard.aggregation must be ratio or product"),
                }
            }
            "survey.missing" => {
                self.missing = match value {
                    "drop" => MissingPolicy::Drop,
                    "impute" => MissingPolicy::Impute,
                    _ => bail!("survey.missing must be drop or impute"),
                }
            }
            "survey.tau" => self.survey_tau = parse(key, value)?,
            "survey.min_group_size" => self.min_group_size = parse(key, value)?,
            "tenure_bins.min_n" => self.tenure_bins.min_bin_n = parse(key, value)?,
            "tenure_bins.alpha" => self.tenure_bins.alpha = parse(key, value)?,
            "tenure_bins.correction" => {
                self.tenure_bins.correction = match value {
                    "bonferroni" => SplitCorrection::Bonferroni,
                    "none" => SplitCorrection::None,
                    _ => bail!("tenure_bins.correction must be bonferroni or none"),
                }
            }
            "simlab" => {
                if parse_bool(key, value)? {
                    self.simlab_mut();
                } else {
                    self.simlab = None;
                }
            }
            "simlab.n_parcels" => self.simlab_mut().n_parcels = parse(key, value)?,
            "simlab.mixture" => {
                let v: Vec<f64> = value.split(',').map(|x| parse(key, x.trim())).collect::<Result<_>>()?;
                self.simlab_mut().mixture = v
                    .try_into()
                    .map_err(|_| anyhow!("simlab.mixture needs five values: w,k1,lambda1,k2,lambda2"))?;
            }
            "simlab.entry" => {
                self.simlab_mut().entry = match value {
                    "uniform" => EntryProcess::Uniform,
                    "boom_wave" => EntryProcess::boom_wave(),
                    _ => bail!("simlab.entry must be uniform or boom_wave"),
                }
            }
            "simlab.n_survey" => self.simlab_mut().n_survey = parse(key, value)?,
            "simlab.dip_start" => self.simlab_mut().dip_start = parse(key, value)?,
            "simlab.dip_end" => self.simlab_mut().dip_end = parse(key, value)?,
            "simlab.dip_depth" => self.simlab_mut().dip_depth = parse(key, value)?,
            other => {
                if let Some(code) = other.strip_prefix("population.") {
                    let nb: Neighborhood = code.parse().map_err(|e: String| anyhow!(e))?;
                    let v: f64 = parse(key, value)?;
                    if v.is_nan() || v <= 0.0 {
                        bail!("{key} must be positive");
                    }
                    self.population.insert(nb, v);
                } else {
                    bail!("unknown key {other:?}");
                }
            }
        }
        Ok(())
    }

    /// Seed from the config, required.
    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| anyhow!("a seed is required: set `seed` in the config or pass --seed"))
    }

    /// Every referenced input must exist before anything runs.
    pub fn check_inputs(&self) -> Result<()> {
        for (key, path) in self.inputs() {
            if !path.is_file() {
                bail!("{key} input {} does not exist", path.display());
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> Vec<(&'static str, &Path)> {
        [
            ("transactions", &self.transactions),
            ("adapter", &self.adapter),
            ("spells", &self.spells),
            ("survey", &self.survey),
            ("codebook", &self.codebook),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.as_deref().map(|p| (k, p)))
        .collect()
    }

    pub fn set_generated_input(&mut self, key: &'static str, path: PathBuf, label: &str) {
        self.written_paths.insert(key, label.to_string());
        match key {
            "transactions" => self.transactions = Some(path),
            "survey" => self.survey = Some(path),
            "codebook" => self.codebook = Some(path),
            _ => unreachable!("not a generated input: {key}"),
        }
    }

    /// Effective settings as sorted `key = value` pairs. The output directory
    /// and thread count are left out: they never change results.
    pub fn canonical(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        for (k, v) in &self.written_paths {
            put(k, v.clone());
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        put("cutoff_date", self.segmentation.cutoff_date.to_string());
        put("observation_end", self.segmentation.observation_end.to_string());
        put("bootstrap_replicates", self.bootstrap_replicates.to_string());
        put("genuine.builder_max_days", self.policy.builder_max_days.to_string());
        put("genuine.exclude_zero_price", self.policy.exclude_zero_price.to_string());
        put("genuine.exclude_quitclaim", self.policy.exclude_quitclaim.to_string());
        put("genuine.exclude_trustee", self.policy.exclude_trustee.to_string());
        put(
            "fit.families",
            self.families.iter().map(|f| f.name()).collect::<Vec<_>>().join(","),
        );
        put("fit.bin_years", self.fit_bin_years.to_string());
        put("fit.restarts", self.fit_restarts.to_string());
        put("hazard.window", self.hazard_window.to_string());
        put("hazard.min_excess", self.hazard_min_excess.to_string());
        put(
            "hazard.aggregation",
            match self.hazard_aggregation {
                Aggregation::Ratio => "ratio",
                Aggregation::Product => "product",
            }
            .into(),
        );
        put(
            "survey.missing",
            match self.missing {
                MissingPolicy::Drop => "drop",
                MissingPolicy::Impute => "impute",
            }
            .into(),
        );
        put("survey.tau", self.survey_tau.to_string());
        put("survey.min_group_size", self.min_group_size.to_string());
        put("tenure_bins.min_n", self.tenure_bins.min_bin_n.to_string());
        put("tenure_bins.alpha", self.tenure_bins.alpha.to_string());
        put(
            "tenure_bins.correction",
            match self.tenure_bins.correction {
                SplitCorrection::Bonferroni => "bonferroni",
                SplitCorrection::None => "none",
            }
            .into(),
        );
        for (nb, v) in &self.population {
            put(&format!("population.{nb}"), v.to_string());
        }
        if let Some(s) = &self.simlab {
            put("simlab", "true".into());
            put("simlab.n_parcels", s.n_parcels.to_string());
            put(
                "simlab.mixture",
                s.mixture.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
            );
            put(
                "simlab.entry",
                match s.entry {
                    EntryProcess::Uniform => "uniform",
                    EntryProcess::BoomWave { .. } => "boom_wave",
                }
                .into(),
            );
            put("simlab.n_survey", s.n_survey.to_string());
            put("simlab.dip_start", s.dip_start.to_string());
            put("simlab.dip_end", s.dip_end.to_string());
            put("simlab.dip_depth", s.dip_depth.to_string());
        }
        m
    }

    pub fn canonical_text(&self) -> String {
        self.canonical().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical_text().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
