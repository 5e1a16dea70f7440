//! Outage maps, the area below an outage threshold (ABOT) and parameter sweeps.

use std::fmt;
use std::io::Write;

use log::warn;

use crate::channel::{
    generate_shadowing_on, ChannelParams, ChannelProfile, FieldSupport, LinkBudget,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mc::mc_outage_with;
use crate::outage::{conditional_outage_with, Branch, KernelOptions, OutageProblem, Precision};
use crate::rng::{derive_seed, Stream};
use crate::topology::{evaluation_grid, place_base_stations, EvaluationGrid, MbsfnPartition};

/// Kernel results with a larger error bound than this are replaced by a
/// Monte Carlo estimate.
pub const ACCEPTABLE_KERNEL_ERROR: f64 = 1e-4;
/// Trials used when a location falls back to Monte Carlo.
pub const FALLBACK_TRIALS: u64 = 100_000;

/// Kernel diagnostics accumulated over a map.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KernelDiagnostics {
    /// Evaluations done in double-double arithmetic.
    pub extended_precision: usize,
    /// Evaluations obtained by characteristic-function inversion.
    pub inversions: usize,
    /// Locations whose raw value was clamped into [0, 1].
    pub clamped: usize,
    /// Evaluations that no deterministic path could resolve and were simulated.
    pub monte_carlo_fallbacks: usize,
    /// Locations without an admissible combining station (ε = 1).
    pub empty_combining_sets: usize,
}

impl KernelDiagnostics {
    fn merge(&mut self, other: &KernelDiagnostics) {
        self.extended_precision += other.extended_precision;
        self.inversions += other.inversions;
        self.clamped += other.clamped;
        self.monte_carlo_fallbacks += other.monte_carlo_fallbacks;
        self.empty_combining_sets += other.empty_combining_sets;
    }
}

impl fmt::Display for KernelDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "extended_precision={} inversions={} clamped={} monte_carlo_fallbacks={} empty_combining_sets={}",
            self.extended_precision,
            self.inversions,
            self.clamped, self.monte_carlo_fallbacks, self.empty_combining_sets
        )
    }
}

/// Per-location outage probabilities for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageMap {
    /// Grid indices of the evaluated locations.
    pub points: Vec<usize>,
    pub epsilon: Vec<f64>,
    /// Serving area, `None` where the location has no stations at all.
    pub area: Vec<usize>,
    /// Combining-set size N_j (0 for empty sets).
    pub combining: Vec<usize>,
    pub in_eval_region: Vec<bool>,
    pub topology_seed: u64,
    pub shadowing_seed: u64,
    pub beta: f64,
    pub gamma: f64,
    pub diagnostics: KernelDiagnostics,
}

struct PointOutcome {
    area: usize,
    combining: usize,
    epsilon: Vec<f64>,
    diagnostics: KernelDiagnostics,
}

fn to_branches(links: &[crate::channel::Link]) -> Vec<Branch> {
    links
        .iter()
        .map(|l| Branch::new(l.omega, l.shape))
        .collect()
}

/// Outage probability at one location for several thresholds.
fn evaluate_point(
    profile: &ChannelProfile<'_>,
    grid_index: usize,
    betas: &[f64],
    gamma: f64,
    options: &KernelOptions,
) -> Result<PointOutcome> {
    let mut diagnostics = KernelDiagnostics::default();
    let budget: LinkBudget = match profile.links(grid_index) {
        Ok(b) => b,
        Err(Error::EmptyCombiningSet { area, .. }) => {
            diagnostics.empty_combining_sets = 1;
            return Ok(PointOutcome {
                area,
                combining: 0,
                epsilon: vec![1.0; betas.len()],
                diagnostics,
            });
        }
        Err(e) => return Err(e),
    };
    let mut problem = OutageProblem {
        combining: to_branches(&budget.combining),
        interfering: to_branches(&budget.interfering),
        beta: 1.0,
        gamma,
    };
    let mut epsilon = Vec::with_capacity(betas.len());
    for (b, &beta) in betas.iter().enumerate() {
        problem.beta = beta;
        let value = match conditional_outage_with(&problem, options) {
            Ok(eval) if eval.error_bound <= ACCEPTABLE_KERNEL_ERROR => {
                match eval.precision {
                    Precision::Double => {}
                    Precision::DoubleDouble => diagnostics.extended_precision += 1,
                    Precision::Inversion => diagnostics.inversions += 1,
                }
                if eval.was_clamped() {
                    diagnostics.clamped += 1;
                }
                eval.probability
            }
            Ok(_) | Err(Error::NumericalInstability { .. }) => {
                diagnostics.monte_carlo_fallbacks += 1;
                let seed = derive_seed(grid_index as u64, Stream::Fading, b as u64);
                mc_outage_with(&problem, FALLBACK_TRIALS, seed, Execution::Sequential)?.estimate
            }
            Err(e) => return Err(e),
        };
        epsilon.push(value);
    }
    Ok(PointOutcome {
        area: budget.area,
        combining: budget.combining.len(),
        epsilon,
        diagnostics,
    })
}

/// Evaluates every location covered by the profile's shadowing field for
/// each threshold in `betas`; returns one map per threshold.
pub fn outage_maps(
    profile: &ChannelProfile<'_>,
    betas: &[f64],
    gamma: f64,
    seeds: (u64, u64),
    exec: Execution,
) -> Result<Vec<OutageMap>> {
    let options = KernelOptions::default();
    let points: Vec<usize> = (0..profile.grid.len())
        .filter(|&g| profile.shadowing.covers(g))
        .collect();
    let outcomes = exec.map_slice(&points, |&g| {
        evaluate_point(profile, g, betas, gamma, &options)
    });
    let outcomes: Vec<PointOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let mut diagnostics = vec![KernelDiagnostics::default(); betas.len()];
    for o in &outcomes {
        // Per-map attribution of the diagnostics is approximate for
        // multi-threshold runs; totals are exact.
        diagnostics[0].merge(&o.diagnostics);
    }
    let in_eval: Vec<bool> = points
        .iter()
        .map(|&g| profile.grid.in_eval_region(g))
        .collect();
    Ok(betas
        .iter()
        .enumerate()
        .map(|(b, &beta)| OutageMap {
            points: points.clone(),
            epsilon: outcomes.iter().map(|o| o.epsilon[b]).collect(),
            area: outcomes.iter().map(|o| o.area).collect(),
            combining: outcomes.iter().map(|o| o.combining).collect(),
            in_eval_region: in_eval.clone(),
            topology_seed: seeds.0,
            shadowing_seed: seeds.1,
            beta,
            gamma,
            diagnostics: diagnostics[b],
        })
        .collect())
}

/// Outage map for a single threshold.
pub fn outage_map(
    profile: &ChannelProfile<'_>,
    beta: f64,
    gamma: f64,
    exec: Execution,
) -> Result<OutageMap> {
    let seeds = (profile.topology.seed, 0);
    Ok(outage_maps(profile, &[beta], gamma, seeds, exec)?.remove(0))
}

impl OutageMap {
    /// Writes `x,y,epsilon,area_index,below_threshold` for every location.
    pub fn write_csv<W: Write>(
        &self,
        grid: &EvaluationGrid,
        eps_hat: f64,
        mut out: W,
    ) -> std::io::Result<()> {
        writeln!(out, "x,y,epsilon,area_index,below_threshold")?;
        for (i, &g) in self.points.iter().enumerate() {
            let p = grid.points[g];
            let below = self.epsilon[i] < eps_hat;
            writeln!(
                out,
                "{},{},{},{},{}",
                p.x,
                p.y,
                self.epsilon[i],
                self.area[i],
                u8::from(below)
            )?;
        }
        Ok(())
    }

    /// Outage probabilities of the evaluation-region locations.
    pub fn eval_epsilons(&self) -> impl Iterator<Item = f64> + '_ {
        self.epsilon
            .iter()
            .zip(&self.in_eval_region)
            .filter(|(_, &e)| e)
            .map(|(&v, _)| v)
    }
}

/// Fraction of evaluation-region locations with `ε < ε̂`.
pub fn abot(map: &OutageMap, eps_hat: f64) -> Result<f64> {
    if !(eps_hat > 0.0 && eps_hat < 1.0) {
        return Err(Error::invalid(format!(
            "outage threshold must lie in (0, 1), got {eps_hat}"
        )));
    }
    let (mut below, mut total) = (0usize, 0usize);
    for e in map.eval_epsilons() {
        total += 1;
        if e < eps_hat {
            below += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid(
            "outage map has no evaluation-region locations",
        ));
    }
    Ok(below as f64 / total as f64)
}

/// Spatial average of per-realization ABOT values.
pub fn mean_abot(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("cannot average an empty set of ABOT values"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// SINR threshold supporting rate `R` bits per channel use: `β = 2^R - 1`.
pub fn rate_to_threshold(rate: f64) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::invalid(format!("rate must be positive, got {rate}")));
    }
    Ok(rate.exp2() - 1.0)
}

/// Rate supported by threshold β: `log2(1 + β)`.
pub fn threshold_to_rate(beta: f64) -> f64 {
    beta.ln_1p() / std::f64::consts::LN_2
}

/// Mean ε near MBSFN area boundaries versus away from them.
///
/// A location is a boundary location when a 4-neighbour has a different
/// serving area; edge locations lie within `band` of a boundary location.
/// Only evaluation-region locations are averaged. Returns
/// `(mean_edge, mean_interior)`.
pub fn area_edge_contrast(map: &OutageMap, grid: &EvaluationGrid, band: f64) -> Result<(f64, f64)> {
    let side = grid.side();
    let mut slot = vec![usize::MAX; grid.len()];
    for (i, &g) in map.points.iter().enumerate() {
        slot[g] = i;
    }
    let area_at = |ix: usize, iy: usize| -> Option<usize> {
        let s = slot[iy * side + ix];
        (s != usize::MAX).then(|| map.area[s])
    };
    let mut boundary = vec![false; grid.len()];
    for &g in &map.points {
        let (ix, iy) = grid.coords(g);
        let here = area_at(ix, iy);
        let neighbours = [
            (ix.wrapping_sub(1), iy),
            (ix + 1, iy),
            (ix, iy.wrapping_sub(1)),
            (ix, iy + 1),
        ];
        boundary[g] = neighbours
            .iter()
            .filter(|&&(x, y)| x < side && y < side)
            .any(|&(x, y)| matches!(area_at(x, y), Some(a) if Some(a) != here));
    }
    let reach = (band / grid.spacing + 1e-9).floor() as isize;
    let band_sq = band * band + 1e-12;
    let (mut edge_sum, mut edge_n, mut int_sum, mut int_n) = (0.0, 0usize, 0.0, 0usize);
    for (i, &g) in map.points.iter().enumerate() {
        if !map.in_eval_region[i] {
            continue;
        }
        let (ix, iy) = grid.coords(g);
        let p = grid.points[g];
        let mut near = false;
        'scan: for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (x, y) = (ix as isize + dx, iy as isize + dy);
                if x < 0 || y < 0 || x >= side as isize || y >= side as isize {
                    continue;
                }
                let h = y as usize * side + x as usize;
                if boundary[h] && grid.points[h].distance_sq(p) <= band_sq {
                    near = true;
                    break 'scan;
                }
            }
        }
        if near {
            edge_sum += map.epsilon[i];
            edge_n += 1;
        } else {
            int_sum += map.epsilon[i];
            int_n += 1;
        }
    }
    if edge_n == 0 || int_n == 0 {
        return Err(Error::invalid(
            "map lacks either edge or interior locations",
        ));
    }
    Ok((edge_sum / edge_n as f64, int_sum / int_n as f64))
}

/// How many stations a realization holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationCount {
    Fixed(usize),
    /// Stations per unit area; M = round(λ·d_net²).
    Density(f64),
}

impl StationCount {
    pub fn resolve(&self, d_net: f64) -> Result<usize> {
        match *self {
            StationCount::Fixed(m) => Ok(m),
            StationCount::Density(l) if l > 0.0 => {
                Ok((l * d_net * d_net).round().max(1.0) as usize)
            }
            StationCount::Density(l) => {
                Err(Error::invalid(format!("density must be positive, got {l}")))
            }
        }
    }
}

/// SINR threshold given directly or through the Shannon rate map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Beta(f64),
    Rate(f64),
}

impl Threshold {
    pub fn beta(&self) -> Result<f64> {
        match *self {
            Threshold::Beta(b) if b > 0.0 => Ok(b),
            Threshold::Beta(b) => Err(Error::invalid(format!("beta must be positive, got {b}"))),
            Threshold::Rate(r) => rate_to_threshold(r),
        }
    }
}

/// Every parameter of one experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub stations: StationCount,
    pub d_net: f64,
    pub r_bs: f64,
    pub d_sfn: f64,
    pub d_max: f64,
    pub channel: ChannelParams,
    /// Use `r_f = r_bs` instead of `channel.r_f`.
    pub los_radius_tracks_exclusion: bool,
    pub threshold: Threshold,
    /// Unit-distance SNR, linear.
    pub gamma: f64,
    pub spacing: f64,
    pub eval_side: f64,
    pub eps_hat: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            stations: StationCount::Fixed(400),
            d_net: 20.0,
            r_bs: 0.5,
            d_sfn: 6.0,
            d_max: 5.0,
            channel: ChannelParams::default(),
            los_radius_tracks_exclusion: false,
            threshold: Threshold::Rate(0.5),
            gamma: 10.0,
            spacing: 0.1,
            eval_side: 10.0,
            eps_hat: 0.1,
        }
    }
}

impl Scenario {
    pub fn channel_params(&self) -> ChannelParams {
        let mut c = self.channel;
        if self.los_radius_tracks_exclusion {
            c.r_f = self.r_bs;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.stations.resolve(self.d_net)?;
        for (name, v) in [
            ("d_net", self.d_net),
            ("d_sfn", self.d_sfn),
            ("d_max", self.d_max),
            ("spacing", self.spacing),
            ("eval_side", self.eval_side),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.r_bs >= 0.0) {
            return Err(Error::invalid(format!(
                "r_bs must be >= 0, got {}",
                self.r_bs
            )));
        }
        if !(self.eps_hat > 0.0 && self.eps_hat < 1.0) {
            return Err(Error::invalid(format!(
                "eps_hat must lie in (0, 1), got {}",
                self.eps_hat
            )));
        }
        self.threshold.beta()?;
        self.channel_params().validate()
    }
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Rate,
    OutageThreshold,
    ExclusionRadius,
    AreaSpacing,
    Density,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Rate => "rate",
            SweepAxis::OutageThreshold => "eps_hat",
            SweepAxis::ExclusionRadius => "r_bs",
            SweepAxis::AreaSpacing => "d_sfn",
            SweepAxis::Density => "lambda",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "rate" | "R" => SweepAxis::Rate,
            "eps_hat" | "outage_threshold" => SweepAxis::OutageThreshold,
            "r_bs" => SweepAxis::ExclusionRadius,
            "d_sfn" => SweepAxis::AreaSpacing,
            "lambda" | "density" => SweepAxis::Density,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scenario: Scenario,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Number of network realizations Υ per axis value.
    pub realizations: usize,
    pub master_seed: u64,
    pub execution: Execution,
}

/// ABOT versus the swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AbotCurve {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// `per_realization[v][t]`; `None` when realization `t` was skipped.
    pub per_realization: Vec<Vec<Option<f64>>>,
    pub means: Vec<f64>,
    pub realizations: usize,
    pub diagnostics: KernelDiagnostics,
}

impl AbotCurve {
    /// `axis_value,realization,abot` rows for completed realizations.
    pub fn write_realizations_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "axis_value,realization,abot")?;
        for (v, row) in self.values.iter().zip(&self.per_realization) {
            for (t, a) in row.iter().enumerate() {
                if let Some(a) = a {
                    writeln!(out, "{v},{t},{a}")?;
                }
            }
        }
        Ok(())
    }

    /// `axis_value,mean_abot` rows.
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "axis_value,mean_abot")?;
        for (v, m) in self.values.iter().zip(&self.means) {
            writeln!(out, "{v},{m}")?;
        }
        Ok(())
    }

    pub fn skipped(&self) -> usize {
        self.per_realization
            .iter()
            .flatten()
            .filter(|a| a.is_none())
            .count()
    }
}

/// ABOT values of one realization for every requested threshold pair.
struct RealizationResult {
    abot: Vec<f64>,
    diagnostics: KernelDiagnostics,
}

/// Draws realization `t` of `scenario` and evaluates ABOT for each
/// `(β, ε̂)` pair. Seeds depend only on `(master_seed, t)`, so every
/// scenario of a sweep sees the same random streams.
fn run_realization(
    scenario: &Scenario,
    grid: &EvaluationGrid,
    pairs: &[(f64, f64)],
    master_seed: u64,
    t: usize,
    exec: Execution,
) -> Result<RealizationResult> {
    let topology_seed = derive_seed(master_seed, Stream::Topology, t as u64);
    let shadowing_seed = derive_seed(master_seed, Stream::Shadowing, t as u64);
    let m = scenario.stations.resolve(scenario.d_net)?;
    let topology = place_base_stations(m, scenario.d_net, scenario.r_bs, topology_seed)?;
    let partition = MbsfnPartition::build(&topology, scenario.d_sfn, scenario.d_max)?;
    let params = scenario.channel_params();
    let shadowing = generate_shadowing_on(
        grid,
        &topology,
        params.sigma_s_db,
        params.d_corr,
        shadowing_seed,
        FieldSupport::EvalRegion,
    )?;
    let profile = ChannelProfile {
        topology: &topology,
        partition: &partition,
        grid,
        shadowing: &shadowing,
        params,
    };

    let mut betas: Vec<f64> = Vec::new();
    for &(b, _) in pairs {
        if !betas.contains(&b) {
            betas.push(b);
        }
    }
    let maps = outage_maps(
        &profile,
        &betas,
        scenario.gamma,
        (topology_seed, shadowing_seed),
        exec,
    )?;
    let mut diagnostics = KernelDiagnostics::default();
    for m in &maps {
        diagnostics.merge(&m.diagnostics);
    }
    let abot = pairs
        .iter()
        .map(|&(b, e)| {
            let idx = betas.iter().position(|&x| x == b).expect("collected above");
            abot(&maps[idx], e)
        })
        .collect::<Result<_>>()?;
    Ok(RealizationResult { abot, diagnostics })
}

/// Runs `config.realizations` realizations per axis value.
///
/// Rate and ε̂ sweeps reuse each realization for every axis value; the other
/// axes redraw it per value with the same seeds. Realizations whose station
/// placement is infeasible are skipped and logged; means cover the completed
/// ones.
pub fn sweep(config: &SweepConfig) -> Result<AbotCurve> {
    if config.values.is_empty() {
        return Err(Error::invalid("sweep needs at least one axis value"));
    }
    if config.realizations == 0 {
        return Err(Error::invalid("sweep needs at least one realization"));
    }
    let base = &config.scenario;
    base.validate()?;
    let grid = evaluation_grid(base.d_net, base.spacing, base.eval_side)?;
    let exec = config.execution;
    let n_values = config.values.len();
    let mut per_realization = vec![vec![None; config.realizations]; n_values];
    let mut diagnostics = KernelDiagnostics::default();

    let record = |res: Result<RealizationResult>,
                  t: usize,
                  label: String|
     -> Result<Option<RealizationResult>> {
        match res {
            Ok(r) => Ok(Some(r)),
            Err(e @ Error::PackingInfeasible { .. }) => {
                warn!("skipping realization {t} ({label}): {e}");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    };

    match config.axis {
        SweepAxis::Rate | SweepAxis::OutageThreshold => {
            let pairs: Vec<(f64, f64)> = config
                .values
                .iter()
                .map(|&v| match config.axis {
                    SweepAxis::Rate => Ok((rate_to_threshold(v)?, base.eps_hat)),
                    _ => {
                        if !(v > 0.0 && v < 1.0) {
                            return Err(Error::invalid(format!(
                                "eps_hat value {v} outside (0, 1)"
                            )));
                        }
                        Ok((base.threshold.beta()?, v))
                    }
                })
                .collect::<Result<_>>()?;
            let results = exec.map_range(config.realizations, |t| {
                run_realization(base, &grid, &pairs, config.master_seed, t, exec)
            });
            for (t, res) in results.into_iter().enumerate() {
                if let Some(r) = record(res, t, base_label(base))? {
                    diagnostics.merge(&r.diagnostics);
                    for (v, a) in r.abot.into_iter().enumerate() {
                        per_realization[v][t] = Some(a);
                    }
                }
            }
        }
        axis => {
            for (v, &value) in config.values.iter().enumerate() {
                let mut scenario = base.clone();
                match axis {
                    SweepAxis::ExclusionRadius => scenario.r_bs = value,
                    SweepAxis::AreaSpacing => scenario.d_sfn = value,
                    SweepAxis::Density => scenario.stations = StationCount::Density(value),
                    _ => unreachable!(),
                }
                scenario.validate()?;
                let pair = [(scenario.threshold.beta()?, scenario.eps_hat)];
                let results = exec.map_range(config.realizations, |t| {
                    run_realization(&scenario, &grid, &pair, config.master_seed, t, exec)
                });
                for (t, res) in results.into_iter().enumerate() {
                    if let Some(r) = record(res, t, format!("{}={value}", axis.name()))? {
                        diagnostics.merge(&r.diagnostics);
                        per_realization[v][t] = Some(r.abot[0]);
                    }
                }
            }
        }
    }

    let means = per_realization
        .iter()
        .map(|row| {
            let done: Vec<f64> = row.iter().flatten().copied().collect();
            if done.is_empty() {
                f64::NAN
            } else {
                mean_abot(&done).expect("nonempty")
            }
        })
        .collect();
    Ok(AbotCurve {
        axis: config.axis,
        values: config.values.clone(),
        per_realization,
        means,
        realizations: config.realizations,
        diagnostics,
    })
}

fn base_label(s: &Scenario) -> String {
    format!("r_bs={} d_sfn={}", s.r_bs, s.d_sfn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ShadowingField;
    use crate::geometry::Point;
    use crate::outage::conditional_outage;
    use crate::topology::NetworkTopology;

    fn map_with(eps: &[f64]) -> OutageMap {
        OutageMap {
            points: (0..eps.len()).collect(),
            epsilon: eps.to_vec(),
            area: vec![0; eps.len()],
            combining: vec![1; eps.len()],
            in_eval_region: vec![true; eps.len()],
            topology_seed: 0,
            shadowing_seed: 0,
            beta: 1.0,
            gamma: 10.0,
            diagnostics: KernelDiagnostics::default(),
        }
    }

    #[test]
    fn abot_examples() {
        assert_eq!(abot(&map_with(&[0.0; 8]), 0.1).unwrap(), 1.0);
        assert_eq!(abot(&map_with(&[1.0; 8]), 0.1).unwrap(), 0.0);
        assert_eq!(abot(&map_with(&[0.05, 0.5, 0.05, 0.5]), 0.1).unwrap(), 0.5);
        assert!(abot(&map_with(&[0.0]), 0.0).is_err());
        assert!(abot(&map_with(&[0.0]), 1.0).is_err());
    }

    #[test]
    fn abot_ignores_points_outside_eval_region() {
        let mut m = map_with(&[0.0, 0.9, 0.9]);
        m.in_eval_region = vec![true, false, false];
        assert_eq!(abot(&m, 0.1).unwrap(), 1.0);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_abot(&[0.3]).unwrap(), 0.3);
        assert_eq!(mean_abot(&[0.0, 1.0]).unwrap(), 0.5);
        assert!(mean_abot(&[]).is_err());
    }

    #[test]
    fn rate_map_examples() {
        assert_eq!(rate_to_threshold(1.0).unwrap(), 1.0);
        assert!((rate_to_threshold(0.5).unwrap() - 0.414_213_562_373_095_1).abs() < 1e-15);
        assert!(rate_to_threshold(1e-12).unwrap() < 1e-11);
        assert!(rate_to_threshold(0.0).is_err());
        assert!((threshold_to_rate(rate_to_threshold(1.7).unwrap()) - 1.7).abs() < 1e-14);
    }

    fn toy() -> (NetworkTopology, MbsfnPartition, EvaluationGrid) {
        let topo = NetworkTopology {
            stations: vec![Point::new(2.0, 2.0), Point::new(3.5, 2.5)],
            d_net: 4.0,
            r_bs: 0.0,
            seed: 0,
        };
        let anchors = vec![Point::new(1.0, 2.0), Point::new(4.0, 2.0)];
        let part = MbsfnPartition::from_anchors(&topo, anchors, 3.0, 5.0).unwrap();
        let grid = evaluation_grid(4.0, 0.5, 4.0).unwrap();
        (topo, part, grid)
    }

    #[test]
    fn two_station_map_matches_hand_built_problems() {
        let (topo, part, grid) = toy();
        assert_eq!(part.area_of_station, vec![0, 1]);
        let params = ChannelParams {
            r_f: 0.8,
            ..ChannelParams::default()
        };
        let field = ShadowingField::zero(&grid, 2);
        let profile = ChannelProfile {
            topology: &topo,
            partition: &part,
            grid: &grid,
            shadowing: &field,
            params,
        };
        let map = outage_map(&profile, 0.7, 10.0, Execution::Sequential).unwrap();
        assert_eq!(map.points.len(), grid.len());
        for (i, &g) in map.points.iter().enumerate() {
            let y = grid.points[g];
            let d: Vec<f64> = topo.stations.iter().map(|s| s.distance(y)).collect();
            let serving = if d[0] <= d[1] { 0 } else { 1 };
            let other = 1 - serving;
            let omega = |dist: f64| dist.max(params.d0).powf(-params.alpha);
            let shape = |dist: f64| crate::channel::nakagami_shape(dist, params.r_f);
            let p = OutageProblem {
                combining: vec![Branch::new(omega(d[serving]), shape(d[serving]))],
                interfering: vec![Branch::new(omega(d[other]), shape(d[other]))],
                beta: 0.7,
                gamma: 10.0,
            };
            let expected = conditional_outage(&p).unwrap();
            assert!((map.epsilon[i] - expected).abs() < 1e-12, "point {g}");
            assert_eq!(map.area[i], serving);
        }
    }

    #[test]
    fn single_station_outage_grows_with_distance() {
        let topo = NetworkTopology {
            stations: vec![Point::new(5.0, 5.0)],
            d_net: 10.0,
            r_bs: 0.0,
            seed: 0,
        };
        let part = MbsfnPartition::build(&topo, 20.0, 50.0).unwrap();
        let grid = evaluation_grid(10.0, 0.5, 10.0).unwrap();
        let field = ShadowingField::zero(&grid, 1);
        let params = ChannelParams::default();
        let profile = ChannelProfile {
            topology: &topo,
            partition: &part,
            grid: &grid,
            shadowing: &field,
            params,
        };
        let map = outage_map(&profile, 1.0, 10.0, Execution::default()).unwrap();
        let mut by_distance: Vec<(f64, f64)> = map
            .points
            .iter()
            .zip(&map.epsilon)
            .map(|(&g, &e)| (grid.points[g].distance(Point::new(5.0, 5.0)), e))
            .collect();
        by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in by_distance.windows(2) {
            if w[1].0 > w[0].0 + 1e-12 && w[0].0 > params.d0 {
                assert!(w[1].1 >= w[0].1, "{w:?}");
            }
        }
    }

    #[test]
    fn empty_combining_set_counts_as_outage() {
        let topo = NetworkTopology {
            stations: vec![Point::new(0.5, 0.5)],
            d_net: 10.0,
            r_bs: 0.0,
            seed: 0,
        };
        let part = MbsfnPartition::build(&topo, 20.0, 2.0).unwrap();
        let grid = evaluation_grid(10.0, 1.0, 10.0).unwrap();
        let field = ShadowingField::zero(&grid, 1);
        let profile = ChannelProfile {
            topology: &topo,
            partition: &part,
            grid: &grid,
            shadowing: &field,
            params: ChannelParams::default(),
        };
        let map = outage_map(&profile, 1.0, 10.0, Execution::Sequential).unwrap();
        let far = map
            .points
            .iter()
            .position(|&g| grid.points[g] == Point::new(9.0, 9.0))
            .unwrap();
        assert_eq!(map.epsilon[far], 1.0);
        assert!(map.diagnostics.empty_combining_sets > 0);
    }

    fn small_scenario() -> Scenario {
        Scenario {
            stations: StationCount::Density(0.5),
            d_net: 8.0,
            spacing: 0.4,
            eval_side: 4.0,
            d_sfn: 4.0,
            ..Scenario::default()
        }
    }

    #[test]
    fn sweep_is_deterministic_and_monotone_in_rate() {
        let config = SweepConfig {
            scenario: small_scenario(),
            axis: SweepAxis::Rate,
            values: vec![0.1, 0.5, 1.0, 2.0],
            realizations: 3,
            master_seed: 21,
            execution: Execution::default(),
        };
        let a = sweep(&config).unwrap();
        let b = sweep(&SweepConfig {
            execution: Execution::Sequential,
            ..config.clone()
        })
        .unwrap();
        assert_eq!(a, b);
        for row in 0..a.realizations {
            for v in 1..a.values.len() {
                assert!(
                    a.per_realization[v][row].unwrap() <= a.per_realization[v - 1][row].unwrap()
                );
            }
        }
        let mut buf = Vec::new();
        a.write_summary_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("axis_value,mean_abot\n0.1,"));
    }

    #[test]
    fn infeasible_realizations_are_skipped() {
        let config = SweepConfig {
            scenario: small_scenario(),
            axis: SweepAxis::ExclusionRadius,
            values: vec![0.0, 3.0],
            realizations: 2,
            master_seed: 1,
            execution: Execution::Sequential,
        };
        let curve = sweep(&config).unwrap();
        assert!(curve.per_realization[0].iter().all(Option::is_some));
        assert!(curve.per_realization[1].iter().all(Option::is_none));
        assert!(curve.means[1].is_nan());
        assert_eq!(curve.skipped(), 2);
    }

    #[test]
    fn sweep_rejects_empty_values() {
        let config = SweepConfig {
            scenario: small_scenario(),
            axis: SweepAxis::Rate,
            values: vec![],
            realizations: 1,
            master_seed: 1,
            execution: Execution::Sequential,
        };
        assert!(sweep(&config).is_err());
    }
}
