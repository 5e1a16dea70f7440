//! Network layout: base-station placement, MBSFN areas and the evaluation grid.
//!
//! Stations follow the uniform-clustering model: each station is dropped
//! uniformly into the part of the square arena that lies outside the
//! exclusion disks of the stations placed before it. MBSFN areas are formed
//! around the points of a hexagonal anchor lattice; a station belongs to the
//! area of its nearest anchor.

use std::fmt::Write as _;
use std::io::BufRead;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{nearest, Point};
use crate::rng::rng_from_seed;

/// Placement attempts allowed per station before giving up.
pub const DEFAULT_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Combining distance limit in kilometres (signals arriving later than the
/// extended cyclic prefix cannot be combined).
pub const DEFAULT_D_MAX_KM: f64 = 5.0;

const FORMAT_TAG: &str = "mbsfn-topology";
const FORMAT_VERSION: &str = "v1";

/// One realization of the base-station layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub stations: Vec<Point>,
    pub d_net: f64,
    pub r_bs: f64,
    pub seed: u64,
}

impl NetworkTopology {
    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Station density M / d_net².
    pub fn density(&self) -> f64 {
        self.stations.len() as f64 / (self.d_net * self.d_net)
    }

    /// Smallest pairwise station distance, or `None` with fewer than two stations.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.stations.iter().enumerate() {
            for b in &self.stations[i + 1..] {
                let d = a.distance(*b);
                best = Some(best.map_or(d, |m: f64| m.min(d)));
            }
        }
        best
    }

    /// Index of the station nearest to `y` (lowest index on ties).
    pub fn nearest_station(&self, y: Point) -> Option<usize> {
        nearest(y, &self.stations)
    }

    /// Serializes to the versioned plain-text format.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(32 * (self.stations.len() + 1));
        let _ = writeln!(
            out,
            "{FORMAT_TAG} {FORMAT_VERSION} M={} d_net={} r_bs={} seed={}",
            self.stations.len(),
            self.d_net,
            self.r_bs,
            self.seed
        );
        for p in &self.stations {
            let _ = writeln!(out, "{} {}", p.x, p.y);
        }
        out
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_from(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse(text.as_bytes())
    }

    fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line?,
            None => return Err(format_err(1, "empty input")),
        };
        let mut fields = header.split_whitespace();
        if fields.next() != Some(FORMAT_TAG) {
            return Err(format_err(1, format!("expected `{FORMAT_TAG}` header")));
        }
        match fields.next() {
            Some(FORMAT_VERSION) => {}
            other => {
                return Err(format_err(1, format!("unsupported version {other:?}")));
            }
        }
        let (mut m, mut d_net, mut r_bs, mut seed) = (None, None, None, None);
        for kv in fields {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| format_err(1, format!("malformed header field `{kv}`")))?;
            let bad = |_| format_err(1, format!("bad value in `{kv}`"));
            match key {
                "M" => m = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "d_net" => d_net = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "r_bs" => r_bs = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(format_err(1, format!("unknown header key `{key}`"))),
            }
        }
        let missing = |k: &str| format_err(1, format!("header lacks `{k}`"));
        let m = m.ok_or_else(|| missing("M"))?;
        let d_net = d_net.ok_or_else(|| missing("d_net"))?;
        let r_bs = r_bs.ok_or_else(|| missing("r_bs"))?;
        let seed = seed.ok_or_else(|| missing("seed"))?;

        let mut stations = Vec::with_capacity(m);
        for (idx, line) in lines {
            let line = line?;
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut coord = || -> Result<f64> {
                parts
                    .next()
                    .ok_or_else(|| format_err(line_no, "expected `x y`"))?
                    .parse::<f64>()
                    .map_err(|e| format_err(line_no, e.to_string()))
            };
            let x = coord()?;
            let y = coord()?;
            if parts.next().is_some() {
                return Err(format_err(line_no, "trailing fields"));
            }
            stations.push(Point::new(x, y));
        }
        if stations.len() != m {
            return Err(format_err(
                1,
                format!(
                    "header declares M={m} but {} stations follow",
                    stations.len()
                ),
            ));
        }
        Ok(Self {
            stations,
            d_net,
            r_bs,
            seed,
        })
    }
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

/// Places `m` stations by sequential rejection sampling.
pub fn place_base_stations(m: usize, d_net: f64, r_bs: f64, seed: u64) -> Result<NetworkTopology> {
    place_base_stations_with_budget(m, d_net, r_bs, seed, DEFAULT_PLACEMENT_ATTEMPTS)
}

pub fn place_base_stations_with_budget(
    m: usize,
    d_net: f64,
    r_bs: f64,
    seed: u64,
    attempts_per_station: usize,
) -> Result<NetworkTopology> {
    if m == 0 {
        return Err(Error::invalid("station count must be at least 1"));
    }
    if !(d_net > 0.0) || !(r_bs >= 0.0) || !d_net.is_finite() || !r_bs.is_finite() {
        return Err(Error::invalid(format!(
            "need d_net > 0 and r_bs >= 0, got {d_net}, {r_bs}"
        )));
    }
    if attempts_per_station == 0 {
        return Err(Error::invalid("attempt budget must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let r2 = r_bs * r_bs;
    let mut stations: Vec<Point> = Vec::with_capacity(m);
    'station: while stations.len() < m {
        for _ in 0..attempts_per_station {
            let p = Point::new(rng.random::<f64>() * d_net, rng.random::<f64>() * d_net);
            if stations.iter().all(|s| s.distance_sq(p) >= r2) {
                stations.push(p);
                continue 'station;
            }
        }
        return Err(Error::PackingInfeasible {
            placed: stations.len(),
            requested: m,
            attempts: attempts_per_station,
            d_net,
            r_bs,
        });
    }
    Ok(NetworkTopology {
        stations,
        d_net,
        r_bs,
        seed,
    })
}

/// Hexagonal anchor lattice with nearest-neighbour spacing `d_sfn`.
///
/// The lattice is centred on the arena centre; rows are `d_sfn·√3/2` apart
/// and odd rows are shifted by `d_sfn/2`. Every lattice point inside the
/// arena grown by `d_sfn/2` on each side is returned, row by row from the
/// bottom.
pub fn hex_grid_centers(d_net: f64, d_sfn: f64) -> Result<Vec<Point>> {
    if !(d_sfn > 0.0) || !(d_net > 0.0) {
        return Err(Error::invalid(format!(
            "need d_sfn > 0 and d_net > 0, got {d_sfn}, {d_net}"
        )));
    }
    let c = d_net / 2.0;
    let row_pitch = d_sfn * 3f64.sqrt() / 2.0;
    let lo = -d_sfn / 2.0;
    let hi = d_net + d_sfn / 2.0;
    let tol = 1e-9 * d_net.max(d_sfn);
    let inside = |v: f64| v >= lo - tol && v <= hi + tol;

    let max_row = ((c - lo) / row_pitch).floor() as i64 + 1;
    let max_col = ((c - lo) / d_sfn).floor() as i64 + 2;
    let mut anchors = Vec::new();
    for row in -max_row..=max_row {
        let y = c + row as f64 * row_pitch;
        if !inside(y) {
            continue;
        }
        let shift = if row.rem_euclid(2) == 1 {
            d_sfn / 2.0
        } else {
            0.0
        };
        for col in -max_col..=max_col {
            let x = c + shift + col as f64 * d_sfn;
            if inside(x) {
                anchors.push(Point::new(x, y));
            }
        }
    }
    Ok(anchors)
}

/// Nearest-anchor assignment; the lowest anchor index wins exact ties.
pub fn assign_mbsfn_areas(topology: &NetworkTopology, anchors: &[Point]) -> Result<Vec<usize>> {
    if anchors.is_empty() {
        return Err(Error::invalid("at least one anchor is required"));
    }
    Ok(topology
        .stations
        .iter()
        .map(|&s| nearest(s, anchors).expect("anchors nonempty"))
        .collect())
}

/// Grouping of stations into MBSFN areas plus the combining distance limit.
#[derive(Debug, Clone, PartialEq)]
pub struct MbsfnPartition {
    pub anchors: Vec<Point>,
    pub d_sfn: f64,
    pub area_of_station: Vec<usize>,
    pub d_max: f64,
}

impl MbsfnPartition {
    /// Builds the hexagonal anchors for `d_sfn` and assigns every station.
    pub fn build(topology: &NetworkTopology, d_sfn: f64, d_max: f64) -> Result<Self> {
        let anchors = hex_grid_centers(topology.d_net, d_sfn)?;
        Self::from_anchors(topology, anchors, d_sfn, d_max)
    }

    pub fn from_anchors(
        topology: &NetworkTopology,
        anchors: Vec<Point>,
        d_sfn: f64,
        d_max: f64,
    ) -> Result<Self> {
        if !(d_max > 0.0) {
            return Err(Error::invalid(format!(
                "d_max must be positive, got {d_max}"
            )));
        }
        let area_of_station = assign_mbsfn_areas(topology, &anchors)?;
        Ok(Self {
            anchors,
            d_sfn,
            area_of_station,
            d_max,
        })
    }

    pub fn area_count(&self) -> usize {
        self.anchors.len()
    }

    /// Number of distinct areas that received at least one station.
    pub fn occupied_area_count(&self) -> usize {
        let mut used = vec![false; self.anchors.len()];
        for &a in &self.area_of_station {
            used[a] = true;
        }
        used.into_iter().filter(|&u| u).count()
    }
}

/// Area serving location `y`: the area of the nearest station.
pub fn serving_area(
    y: Point,
    topology: &NetworkTopology,
    partition: &MbsfnPartition,
) -> Result<usize> {
    let station = topology
        .nearest_station(y)
        .ok_or_else(|| Error::invalid("topology has no stations"))?;
    Ok(partition.area_of_station[station])
}

/// Stations of the serving area whose distance to `y` is below `d_max`.
pub fn combining_set(
    y: Point,
    topology: &NetworkTopology,
    partition: &MbsfnPartition,
) -> Result<Vec<usize>> {
    let area = serving_area(y, topology, partition)?;
    let d_max_sq = partition.d_max * partition.d_max;
    let set: Vec<usize> = topology
        .stations
        .iter()
        .enumerate()
        .filter(|&(i, s)| partition.area_of_station[i] == area && s.distance_sq(y) < d_max_sq)
        .map(|(i, _)| i)
        .collect();
    if set.is_empty() {
        return Err(Error::EmptyCombiningSet { location: y, area });
    }
    Ok(set)
}

/// Square lattice of receiver locations over the arena.
///
/// The lattice is centred on the arena centre with `side` points per axis
/// (`2·⌊d_net/(2·spacing)⌋ + 1`). Points are stored row-major from the
/// bottom-left. Metrics aggregate only over the centred `eval_side` square.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid {
    pub points: Vec<Point>,
    pub spacing: f64,
    pub eval_side: f64,
    pub d_net: f64,
    side: usize,
    eval_lo: usize,
    eval_hi: usize,
}

pub fn evaluation_grid(d_net: f64, spacing: f64, eval_side: f64) -> Result<EvaluationGrid> {
    if !(spacing > 0.0 && spacing <= d_net) {
        return Err(Error::invalid(format!(
            "need 0 < spacing <= d_net, got {spacing}"
        )));
    }
    if !(eval_side > 0.0 && eval_side <= d_net) {
        return Err(Error::invalid(format!(
            "need 0 < eval_side <= d_net, got {eval_side}"
        )));
    }
    let half_steps = (d_net / (2.0 * spacing) + 1e-9).floor() as usize;
    let side = 2 * half_steps + 1;
    let c = d_net / 2.0;
    let coord = |i: usize| c + (i as f64 - half_steps as f64) * spacing;
    let eval_half_steps = (eval_side / (2.0 * spacing) + 1e-9).floor() as usize;
    let eval_lo = half_steps - eval_half_steps.min(half_steps);
    let eval_hi = half_steps + eval_half_steps.min(half_steps);

    let mut points = Vec::with_capacity(side * side);
    for iy in 0..side {
        for ix in 0..side {
            points.push(Point::new(coord(ix), coord(iy)));
        }
    }
    Ok(EvaluationGrid {
        points,
        spacing,
        eval_side,
        d_net,
        side,
        eval_lo,
        eval_hi,
    })
}

impl EvaluationGrid {
    /// Points per axis.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.side + ix
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.side, index / self.side)
    }

    /// Inclusive lattice index range of the evaluation square along one axis.
    pub fn eval_range(&self) -> std::ops::RangeInclusive<usize> {
        self.eval_lo..=self.eval_hi
    }

    /// Points per axis inside the evaluation square.
    pub fn eval_side_points(&self) -> usize {
        self.eval_hi - self.eval_lo + 1
    }

    pub fn in_eval_region(&self, index: usize) -> bool {
        let (ix, iy) = self.coords(index);
        self.eval_range().contains(&ix) && self.eval_range().contains(&iy)
    }

    /// Indices of the evaluation-square points, row-major.
    pub fn eval_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.eval_side_points().pow(2));
        for iy in self.eval_range() {
            for ix in self.eval_range() {
                out.push(self.index(ix, iy));
            }
        }
        out
    }
}
