use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use loadcast::engine::{AdaptationThresholds, EngineConfig};
use loadcast::ev::EvStudyConfig;
use loadcast::io::SyntheticBuildingSpec;
use loadcast::sweep::SweepGrid;
use loadcast::Error;
use serde::{Deserialize, Serialize};

/// Everything a command can be configured with; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the seeds of every section when set.
    pub seed: Option<u64>,
    pub data: DataSection,
    pub gen: SyntheticBuildingSpec,
    pub engine: EngineConfig,
    pub sweep: SweepGrid,
    pub ev: EvSection,
    pub adaptation: AdaptationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Without a load file the commands run on data from `[gen]`.
    pub load: Option<PathBuf>,
    pub temperature: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub step_s: i64,
    /// Use German national holidays for generated data.
    pub national_holidays: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            load: None,
            temperature: None,
            holidays: None,
            step_s: 300,
            national_holidays: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct EvSection {
    /// `perfect`, `persistence`, or a forecaster such as `pslp` or `ffnn:4x8`
    /// whose stored day-ahead forecasts drive the controlled strategy.
    pub forecast: String,
    #[serde(flatten)]
    pub study: EvStudyConfig,
}

impl Default for EvSection {
    fn default() -> Self {
        EvSection {
            forecast: "perfect".into(),
            study: EvStudyConfig::default(),
        }
    }
}

/// Takes `forecast` out and hands the remaining keys to the study, which
/// rejects unknown ones.
impl TryFrom<toml::Table> for EvSection {
    type Error = String;

    fn try_from(mut table: toml::Table) -> Result<Self, String> {
        let forecast = match table.remove("forecast") {
            None => EvSection::default().forecast,
            Some(toml::Value::String(s)) => s,
            Some(other) => return Err(format!("ev.forecast must be a string, got {other}")),
        };
        let study = table.try_into().map_err(|e: toml::de::Error| e.message().to_string())?;
        Ok(EvSection { forecast, study })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationSection {
    /// Dates of load changes to report the error trajectory around.
    pub events: Vec<NaiveDate>,
    pub thresholds: AdaptationThresholds,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed.or(self.seed) {
            self.seed = Some(s);
            self.gen.seed = s;
            self.engine.seed = s;
            self.ev.study.seed = s;
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.engine.seed)
    }

    /// Years touched by the generated span.
    pub fn gen_years(&self) -> std::ops::RangeInclusive<i32> {
        let last = self.gen.start + chrono::Duration::days(self.gen.days);
        self.gen.start.year()..=last.year()
    }
}
