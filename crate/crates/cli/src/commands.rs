//! The subcommands, as library functions returning what they wrote.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use mbsfn_core::channel::{generate_shadowing_on, ChannelProfile, FieldSupport};
use mbsfn_core::mc::{validate_instance, ValidationRecord};
use mbsfn_core::metrics::{
    abot, outage_map as compute_map, sweep, AbotCurve, KernelDiagnostics, SweepConfig,
};
use mbsfn_core::outage::Branch;
use mbsfn_core::rng::{derive_seed, Stream};
use mbsfn_core::topology::{evaluation_grid, place_base_stations, MbsfnPartition, NetworkTopology};
use mbsfn_core::Execution;

use crate::config::{RunConfig, Series};
use crate::error::CliError;

pub const TOPOLOGY_FILE: &str = "topology.txt";
pub const OUTAGE_MAP_FILE: &str = "outage_map.csv";
pub const VALIDATION_FILE: &str = "mc_validation.csv";

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_with<F>(path: &Path, f: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let mut out = create(path)?;
    f(&mut out)
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Topology of realization 0, the one every single-realization command uses.
pub fn first_topology(cfg: &RunConfig) -> Result<NetworkTopology, CliError> {
    let s = &cfg.scenario;
    let m = s.stations.resolve(s.d_net)?;
    let seed = derive_seed(cfg.experiment.seed, Stream::Topology, 0);
    Ok(place_base_stations(m, s.d_net, s.r_bs, seed)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologySummary {
    pub path: PathBuf,
    pub stations: usize,
    pub min_distance: Option<f64>,
    pub areas: usize,
    pub occupied_areas: usize,
}

pub fn generate_topology(cfg: &RunConfig) -> Result<TopologySummary, CliError> {
    let topology = first_topology(cfg)?;
    let partition = MbsfnPartition::build(&topology, cfg.scenario.d_sfn, cfg.scenario.d_max)?;
    let path = cfg.output_dir.join(TOPOLOGY_FILE);
    write_with(&path, |out| out.write_all(topology.to_text().as_bytes()))?;
    Ok(TopologySummary {
        path,
        stations: topology.len(),
        min_distance: topology.min_pairwise_distance(),
        areas: partition.area_count(),
        occupied_areas: partition.occupied_area_count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSummary {
    pub path: PathBuf,
    pub points: usize,
    pub abot: f64,
    pub diagnostics: KernelDiagnostics,
}

/// Outage map of realization 0 over every grid point, optionally on a
/// topology read from file.
pub fn outage_map(
    cfg: &RunConfig,
    topology_file: Option<&Path>,
    exec: Execution,
) -> Result<MapSummary, CliError> {
    let s = &cfg.scenario;
    let topology = match topology_file {
        Some(path) => {
            let t = NetworkTopology::read_from(path)?;
            if (t.d_net - s.d_net).abs() > 1e-12 {
                return Err(CliError::Config(format!(
                    "topology file arena side {} differs from network.d_net {}",
                    t.d_net, s.d_net
                )));
            }
            t
        }
        None => first_topology(cfg)?,
    };
    let partition = MbsfnPartition::build(&topology, s.d_sfn, s.d_max)?;
    let grid = evaluation_grid(s.d_net, s.spacing, s.eval_side)?;
    let params = s.channel_params();
    let shadowing_seed = derive_seed(cfg.experiment.seed, Stream::Shadowing, 0);
    let shadowing = generate_shadowing_on(
        &grid,
        &topology,
        params.sigma_s_db,
        params.d_corr,
        shadowing_seed,
        FieldSupport::Full,
    )?;
    let profile = ChannelProfile {
        topology: &topology,
        partition: &partition,
        grid: &grid,
        shadowing: &shadowing,
        params,
    };
    let mut map = compute_map(&profile, s.threshold.beta()?, s.gamma, exec)?;
    map.shadowing_seed = shadowing_seed;
    let path = cfg.output_dir.join(OUTAGE_MAP_FILE);
    write_with(&path, |out| map.write_csv(&grid, s.eps_hat, out))?;
    Ok(MapSummary {
        path,
        points: map.points.len(),
        abot: abot(&map, s.eps_hat)?,
        diagnostics: map.diagnostics,
    })
}

/// Curves of every configured series, without writing anything.
pub fn run_sweeps(cfg: &RunConfig, exec: Execution) -> Result<Vec<(Series, AbotCurve)>, CliError> {
    let axis = cfg.experiment.axis.ok_or_else(|| {
        CliError::Config("abot-sweep needs experiment.axis and experiment.values".into())
    })?;
    if cfg.experiment.values.is_empty() {
        return Err(CliError::Config(
            "experiment.values must list at least one value".into(),
        ));
    }
    cfg.series
        .iter()
        .map(|series| {
            let config = SweepConfig {
                scenario: series.scenario.clone(),
                axis,
                values: cfg.experiment.values.clone(),
                realizations: cfg.experiment.realizations,
                master_seed: cfg.experiment.seed,
                execution: exec,
            };
            let curve = sweep(&config)?;
            let skipped = curve.skipped();
            if skipped > 0 {
                warn!(
                    "series {:?}: {skipped} realizations skipped",
                    series.label()
                );
            }
            info!("series {:?}: {}", series.label(), curve.diagnostics);
            Ok((series.clone(), curve))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub label: String,
    pub realizations_path: PathBuf,
    pub summary_path: PathBuf,
    pub curve: AbotCurve,
}

/// Runs every series and writes `abot[_label].csv` with per-realization
/// values and `abot[_label]_summary.csv` with the means.
pub fn abot_sweep(cfg: &RunConfig, exec: Execution) -> Result<Vec<SweepOutput>, CliError> {
    let mut outputs = Vec::new();
    for (series, curve) in run_sweeps(cfg, exec)? {
        let label = series.label();
        let stem = if label.is_empty() {
            "abot".to_string()
        } else {
            format!("abot_{label}")
        };
        let realizations_path = cfg.output_dir.join(format!("{stem}.csv"));
        let summary_path = cfg.output_dir.join(format!("{stem}_summary.csv"));
        write_with(&realizations_path, |out| curve.write_realizations_csv(out))?;
        write_with(&summary_path, |out| curve.write_summary_csv(out))?;
        outputs.push(SweepOutput {
            label,
            realizations_path,
            summary_path,
            curve,
        });
    }
    Ok(outputs)
}

fn branches(list: &[Branch]) -> String {
    list.iter()
        .map(|b| format!("{}:{}", b.omega, b.shape))
        .collect::<Vec<_>>()
        .join(";")
}

/// One CSV row describing a validation instance in full.
pub fn validation_row(r: &ValidationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.index,
        branches(&r.problem.combining),
        branches(&r.problem.interfering),
        r.problem.beta,
        r.problem.gamma,
        r.kernel,
        r.mc.estimate,
        r.mc.stderr,
        r.mc.trials,
        r.mc.seed,
        u8::from(r.passed)
    )
}

pub const VALIDATION_HEADER: &str =
    "instance,combining,interfering,beta,gamma,kernel,mc_estimate,stderr,trials,mc_seed,pass";

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub path: PathBuf,
    pub records: Vec<ValidationRecord>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationRecord> {
        self.records.iter().filter(|r| !r.passed)
    }
}

/// Runs the randomized kernel-versus-simulation suite, or only `instance`
/// when given, and writes one row per instance.
pub fn mc_validate(
    cfg: &RunConfig,
    instance: Option<u64>,
    exec: Execution,
) -> Result<ValidationReport, CliError> {
    let v = &cfg.validation;
    if v.trials == 0 {
        return Err(CliError::Config(
            "validation.trials must be at least 1".into(),
        ));
    }
    let indices: Vec<u64> = match instance {
        Some(i) => vec![i],
        None => (0..v.instances).collect(),
    };
    let records = indices
        .into_iter()
        .map(|i| validate_instance(cfg.experiment.seed, i, v.trials, exec))
        .collect::<Result<Vec<_>, _>>()?;
    let path = cfg.output_dir.join(VALIDATION_FILE);
    write_with(&path, |out| {
        writeln!(out, "{VALIDATION_HEADER}")?;
        for r in &records {
            writeln!(out, "{}", validation_row(r))?;
        }
        Ok(())
    })?;
    Ok(ValidationReport { path, records })
}
