//! Run configuration: a TOML file with dotted section keys such as
//! `network.d_net` or `channel.alpha`.
//!
//! Decibel quantities (`radio.snr_db`, `radio.threshold_db`) are converted to
//! linear scale here and nowhere else; `channel.sigma_s_db` stays in dB.

use std::path::{Path, PathBuf};

use mbsfn_core::channel::ChannelParams;
use mbsfn_core::metrics::{Scenario, StationCount, SweepAxis, Threshold};
use mbsfn_core::topology::DEFAULT_D_MAX_KM;
use serde::Deserialize;

use crate::error::CliError;

/// Shadowing decorrelation distance in kilometres.
pub const DEFAULT_D_CORR_KM: f64 = 0.02;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    network: RawNetwork,
    #[serde(default)]
    channel: RawChannel,
    #[serde(default)]
    radio: RawRadio,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    experiment: RawExperiment,
    #[serde(default)]
    series: RawSeries,
    #[serde(default)]
    validation: RawValidation,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    stations: Option<usize>,
    density: Option<f64>,
    d_net: Option<f64>,
    r_bs: Option<f64>,
    d_sfn: Option<f64>,
    d_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    alpha: Option<f64>,
    d0: Option<f64>,
    r_f: Option<LosRadius>,
    sigma_s_db: Option<f64>,
    d_corr: Option<f64>,
    km_per_unit: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadio {
    snr_db: Option<f64>,
    threshold_db: Option<f64>,
    rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    spacing: Option<f64>,
    eval_side: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    realizations: Option<usize>,
    seed: Option<u64>,
    eps_hat: Option<f64>,
    axis: Option<String>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeries {
    stations: Option<Vec<usize>>,
    density: Option<Vec<f64>>,
    sigma_s_db: Option<Vec<f64>>,
    d_sfn: Option<Vec<f64>>,
    r_f: Option<Vec<LosRadius>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidation {
    instances: Option<u64>,
    trials: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
}

/// Line-of-sight radius: a length, or the string `"r_bs"` to follow the
/// exclusion radius.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LosRadius {
    Length(f64),
    Tag(RbsTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum RbsTag {
    #[serde(rename = "r_bs")]
    ExclusionRadius,
}

impl LosRadius {
    fn apply(&self, scenario: &mut Scenario) {
        match *self {
            LosRadius::Length(r) => {
                scenario.channel.r_f = r;
                scenario.los_radius_tracks_exclusion = false;
            }
            LosRadius::Tag(RbsTag::ExclusionRadius) => scenario.los_radius_tracks_exclusion = true,
        }
    }

    fn label(&self) -> String {
        match self {
            LosRadius::Length(r) => format!("{r}"),
            LosRadius::Tag(_) => "r_bs".to_string(),
        }
    }
}

/// One value of a series dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum SeriesValue {
    Stations(usize),
    Density(f64),
    SigmaDb(f64),
    AreaSpacing(f64),
    LosRadius(LosRadius),
}

impl SeriesValue {
    pub fn key(&self) -> &'static str {
        match self {
            SeriesValue::Stations(_) => "stations",
            SeriesValue::Density(_) => "density",
            SeriesValue::SigmaDb(_) => "sigma_s_db",
            SeriesValue::AreaSpacing(_) => "d_sfn",
            SeriesValue::LosRadius(_) => "r_f",
        }
    }

    pub fn value_label(&self) -> String {
        match self {
            SeriesValue::Stations(m) => m.to_string(),
            SeriesValue::Density(v) | SeriesValue::SigmaDb(v) | SeriesValue::AreaSpacing(v) => {
                v.to_string()
            }
            SeriesValue::LosRadius(r) => r.label(),
        }
    }

    fn apply(&self, scenario: &mut Scenario) {
        match self {
            SeriesValue::Stations(m) => scenario.stations = StationCount::Fixed(*m),
            SeriesValue::Density(l) => scenario.stations = StationCount::Density(*l),
            SeriesValue::SigmaDb(s) => scenario.channel.sigma_s_db = *s,
            SeriesValue::AreaSpacing(d) => scenario.d_sfn = *d,
            SeriesValue::LosRadius(r) => r.apply(scenario),
        }
    }
}

/// A named scenario of a multi-series sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub settings: Vec<SeriesValue>,
    pub scenario: Scenario,
}

impl Series {
    /// `key-value` pairs joined by `_`; empty for the single default series.
    pub fn label(&self) -> String {
        self.settings
            .iter()
            .map(|s| format!("{}-{}", s.key(), s.value_label()))
            .collect::<Vec<_>>()
            .join("_")
    }

    pub fn get(&self, key: &str) -> Option<&SeriesValue> {
        self.settings.iter().find(|s| s.key() == key)
    }
}

/// Sweep settings from the `experiment` section.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub realizations: usize,
    pub seed: u64,
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub instances: u64,
    pub trials: u64,
}

/// Fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub km_per_unit: f64,
    pub experiment: Experiment,
    /// Cross product of the `series` lists, in key order stations, density,
    /// sigma_s_db, d_sfn, r_f.
    pub series: Vec<Series>,
    pub validation: Validation,
    pub output_dir: PathBuf,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| config_error(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, CliError> {
        let defaults = Scenario::default();
        let n = &raw.network;
        let stations = match (n.stations, n.density) {
            (Some(m), None) if m > 0 => StationCount::Fixed(m),
            (Some(_), None) => return Err(config_error("network.stations must be at least 1")),
            (None, Some(l)) => StationCount::Density(positive("network.density", l)?),
            (None, None) => defaults.stations,
            (Some(_), Some(_)) => {
                return Err(config_error(
                    "give exactly one of network.stations and network.density",
                ))
            }
        };

        let c = &raw.channel;
        let km_per_unit = positive("channel.km_per_unit", c.km_per_unit.unwrap_or(1.0))?;
        let d_net = positive("network.d_net", n.d_net.unwrap_or(defaults.d_net))?;
        let mut scenario = Scenario {
            stations,
            d_net,
            r_bs: n.r_bs.unwrap_or(defaults.r_bs),
            d_sfn: positive("network.d_sfn", n.d_sfn.unwrap_or(defaults.d_sfn))?,
            d_max: positive(
                "network.d_max",
                n.d_max.unwrap_or(DEFAULT_D_MAX_KM / km_per_unit),
            )?,
            channel: ChannelParams {
                alpha: c.alpha.unwrap_or(defaults.channel.alpha),
                d0: c.d0.unwrap_or(defaults.channel.d0),
                r_f: defaults.channel.r_f,
                sigma_s_db: c.sigma_s_db.unwrap_or(defaults.channel.sigma_s_db),
                d_corr: c.d_corr.unwrap_or(DEFAULT_D_CORR_KM / km_per_unit),
            },
            los_radius_tracks_exclusion: false,
            threshold: defaults.threshold,
            gamma: db_to_linear(raw.radio.snr_db.unwrap_or(10.0)),
            spacing: raw.grid.spacing.unwrap_or(defaults.spacing),
            eval_side: raw.grid.eval_side.unwrap_or(defaults.eval_side),
            eps_hat: raw.experiment.eps_hat.unwrap_or(defaults.eps_hat),
        };
        if let Some(r) = c.r_f {
            r.apply(&mut scenario);
        }
        scenario.threshold = match (raw.radio.threshold_db, raw.radio.rate) {
            (Some(db), None) => Threshold::Beta(db_to_linear(db)),
            (None, Some(r)) => Threshold::Rate(r),
            (None, None) => defaults.threshold,
            (Some(_), Some(_)) => {
                return Err(config_error(
                    "give exactly one of radio.threshold_db and radio.rate",
                ))
            }
        };
        scenario
            .validate()
            .map_err(|e| config_error(e.to_string()))?;

        let e = &raw.experiment;
        let axis = match &e.axis {
            None => None,
            Some(name) => Some(
                SweepAxis::parse(name)
                    .ok_or_else(|| config_error(format!("unknown sweep axis {name:?}")))?,
            ),
        };
        let values = e.values.clone().unwrap_or_default();
        if axis.is_some() && values.is_empty() {
            return Err(config_error(
                "experiment.values must list at least one value",
            ));
        }
        let experiment = Experiment {
            realizations: e.realizations.unwrap_or(50),
            seed: e.seed.unwrap_or(1),
            axis,
            values,
        };
        if experiment.realizations == 0 {
            return Err(config_error("experiment.realizations must be at least 1"));
        }

        let series = expand_series(&raw.series, &scenario)?;
        let validation = Validation {
            instances: raw.validation.instances.unwrap_or(50),
            trials: raw.validation.trials.unwrap_or(100_000),
        };
        if validation.trials == 0 {
            return Err(config_error("validation.trials must be at least 1"));
        }
        Ok(Self {
            scenario,
            km_per_unit,
            experiment,
            series,
            validation,
            output_dir: raw.output.directory.unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

fn expand_series(raw: &RawSeries, base: &Scenario) -> Result<Vec<Series>, CliError> {
    if raw.stations.is_some() && raw.density.is_some() {
        return Err(config_error(
            "give at most one of series.stations and series.density",
        ));
    }
    let dims: Vec<Vec<SeriesValue>> = [
        raw.stations
            .as_ref()
            .map(|v| v.iter().map(|&m| SeriesValue::Stations(m)).collect()),
        raw.density
            .as_ref()
            .map(|v| v.iter().map(|&l| SeriesValue::Density(l)).collect()),
        raw.sigma_s_db
            .as_ref()
            .map(|v| v.iter().map(|&s| SeriesValue::SigmaDb(s)).collect()),
        raw.d_sfn
            .as_ref()
            .map(|v| v.iter().map(|&d| SeriesValue::AreaSpacing(d)).collect()),
        raw.r_f
            .as_ref()
            .map(|v| v.iter().map(|&r| SeriesValue::LosRadius(r)).collect()),
    ]
    .into_iter()
    .flatten()
    .collect();
    if dims.iter().any(Vec::is_empty) {
        return Err(config_error("series lists must not be empty"));
    }
    let mut combos: Vec<Vec<SeriesValue>> = vec![Vec::new()];
    for dim in &dims {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                dim.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v.clone());
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|settings| {
            let mut scenario = base.clone();
            for s in &settings {
                s.apply(&mut scenario);
            }
            scenario
                .validate()
                .map_err(|e| config_error(e.to_string()))?;
            Ok(Series { settings, scenario })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_scenario() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.scenario.stations, StationCount::Fixed(400));
        assert_eq!(cfg.scenario.gamma, 10.0);
        assert_eq!(cfg.scenario.d_max, 5.0);
        assert!((cfg.scenario.channel.d_corr - 0.02).abs() < 1e-15);
        assert_eq!(cfg.series.len(), 1);
        assert_eq!(cfg.series[0].label(), "");
        assert_eq!(cfg.experiment.realizations, 50);
    }

    #[test]
    fn dotted_keys_and_decibels() {
        let cfg = RunConfig::from_toml(
            "network.density = 0.5\nradio.threshold_db = 0.0\nradio.snr_db = 20\nchannel.km_per_unit = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.stations, StationCount::Density(0.5));
        assert_eq!(cfg.scenario.threshold, Threshold::Beta(1.0));
        assert!((cfg.scenario.gamma - 100.0).abs() < 1e-12);
        assert_eq!(cfg.scenario.d_max, 10.0);
        assert!((cfg.scenario.channel.d_corr - 0.04).abs() < 1e-15);
    }

    #[test]
    fn exclusive_choices_are_enforced() {
        assert!(RunConfig::from_toml("network.stations = 10\nnetwork.density = 1.0").is_err());
        assert!(RunConfig::from_toml("radio.rate = 1.0\nradio.threshold_db = 0.0").is_err());
        assert!(RunConfig::from_toml("experiment.realizations = 0").is_err());
        assert!(RunConfig::from_toml("network.d_net = -1").is_err());
        assert!(RunConfig::from_toml("network.bogus = 1").is_err());
        assert!(
            RunConfig::from_toml("experiment.axis = \"rate\"\nexperiment.values = []").is_err()
        );
        assert!(
            RunConfig::from_toml("experiment.axis = \"speed\"\nexperiment.values = [1.0]").is_err()
        );
    }

    #[test]
    fn series_cross_product() {
        let cfg = RunConfig::from_toml(
            "[series]\ndensity = [1.0, 0.1]\nsigma_s_db = [0.0, 8.0]\nr_f = [0.0, \"r_bs\"]\n",
        )
        .unwrap();
        assert_eq!(cfg.series.len(), 8);
        assert_eq!(cfg.series[0].label(), "density-1_sigma_s_db-0_r_f-0");
        assert_eq!(cfg.series[7].label(), "density-0.1_sigma_s_db-8_r_f-r_bs");
        assert!(cfg.series[7].scenario.los_radius_tracks_exclusion);
        assert_eq!(cfg.series[7].scenario.channel.sigma_s_db, 8.0);
        assert!(!cfg.series[0].scenario.los_radius_tracks_exclusion);
        assert_eq!(cfg.series[0].scenario.channel.r_f, 0.0);
        assert!(RunConfig::from_toml("series.r_f = [\"r_f\"]").is_err());
    }
}
