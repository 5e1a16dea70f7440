//! Per-link propagation: path loss, Nakagami shapes, shadowing and the
//! normalized received powers that feed the outage kernel.

mod shadowing;

pub use shadowing::{generate_shadowing, generate_shadowing_on, FieldSupport, ShadowingField};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::topology::{combining_set, EvaluationGrid, MbsfnPartition, NetworkTopology};

/// Propagation constants shared by every link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Path-loss exponent, at least 2.
    pub alpha: f64,
    /// Reference distance; gains are clamped below it.
    pub d0: f64,
    /// Line-of-sight radius for the distance-dependent shape map.
    pub r_f: f64,
    pub sigma_s_db: f64,
    pub d_corr: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            alpha: 3.5,
            d0: 0.01,
            r_f: 0.5,
            sigma_s_db: 0.0,
            d_corr: 0.02,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 2.0) {
            return Err(Error::invalid(format!(
                "alpha must be >= 2, got {}",
                self.alpha
            )));
        }
        if !(self.d0 > 0.0) {
            return Err(Error::invalid(format!(
                "d0 must be positive, got {}",
                self.d0
            )));
        }
        if !(self.r_f >= 0.0) {
            return Err(Error::invalid(format!(
                "r_f must be >= 0, got {}",
                self.r_f
            )));
        }
        if !(self.sigma_s_db >= 0.0) {
            return Err(Error::invalid(format!(
                "sigma_s must be >= 0, got {}",
                self.sigma_s_db
            )));
        }
        if !(self.d_corr > 0.0) {
            return Err(Error::invalid(format!(
                "d_corr must be positive, got {}",
                self.d_corr
            )));
        }
        Ok(())
    }
}

/// Power-law attenuation `(d/d0)^-α`, clamped to 1 inside the reference distance.
#[inline]
pub fn path_loss(d: f64, d0: f64, alpha: f64) -> f64 {
    if d <= d0 {
        1.0
    } else {
        (d / d0).powf(-alpha)
    }
}

/// Distance-dependent Nakagami shape: 3 within `r_f/2`, 2 within `r_f`, else 1.
#[inline]
pub fn nakagami_shape(d: f64, r_f: f64) -> u32 {
    if d <= r_f / 2.0 {
        3
    } else if d <= r_f {
        2
    } else {
        1
    }
}

/// One station-to-location link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub station: usize,
    pub distance: f64,
    pub shape: u32,
    /// Normalized received power Ω.
    pub omega: f64,
}

/// All links seen by one receiver location, split by role.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub area: usize,
    pub combining: Vec<Link>,
    pub interfering: Vec<Link>,
}

impl LinkBudget {
    /// N_j, the size of the combining set.
    pub fn combining_count(&self) -> usize {
        self.combining.len()
    }
}

/// Normalized powers at location `point_index` of `grid`.
///
/// `Ω = 10^(ξ/10) · max(d, d0)^-α / N_j` for every station. The received
/// power is referenced to unit distance (the SNR Γ is defined there), so `d0`
/// only acts as the near-field clamp.
pub fn normalized_powers(
    point_index: usize,
    grid: &EvaluationGrid,
    topology: &NetworkTopology,
    partition: &MbsfnPartition,
    shadowing: &ShadowingField,
    params: &ChannelParams,
) -> Result<LinkBudget> {
    let y = grid.points[point_index];
    link_budget_at(
        y,
        |station| shadowing.value(station, point_index),
        topology,
        partition,
        params,
    )
}

/// Link budget at an arbitrary location with a caller-supplied shadowing lookup.
pub fn link_budget_at<F>(
    y: Point,
    shadow_db: F,
    topology: &NetworkTopology,
    partition: &MbsfnPartition,
    params: &ChannelParams,
) -> Result<LinkBudget>
where
    F: Fn(usize) -> f64,
{
    let members = combining_set(y, topology, partition)?;
    let area = partition.area_of_station[members[0]];
    let n_j = members.len() as f64;
    let mut combining = Vec::with_capacity(members.len());
    let mut interfering = Vec::with_capacity(topology.len() - members.len());
    let mut next_member = members.iter().peekable();
    for (station, s) in topology.stations.iter().enumerate() {
        let distance = s.distance(y);
        let gain = path_loss(distance, params.d0, params.alpha) * params.d0.powf(-params.alpha);
        let xi = shadow_db(station);
        let shadow = if xi == 0.0 {
            1.0
        } else {
            10f64.powf(xi / 10.0)
        };
        let link = Link {
            station,
            distance,
            shape: nakagami_shape(distance, params.r_f),
            omega: shadow * gain / n_j,
        };
        if next_member.peek() == Some(&&station) {
            next_member.next();
            combining.push(link);
        } else {
            interfering.push(link);
        }
    }
    Ok(LinkBudget {
        area,
        combining,
        interfering,
    })
}

/// Channel state of one realization: layout, areas, grid and shadowing.
#[derive(Debug, Clone, Copy)]
pub struct ChannelProfile<'a> {
    pub topology: &'a NetworkTopology,
    pub partition: &'a MbsfnPartition,
    pub grid: &'a EvaluationGrid,
    pub shadowing: &'a ShadowingField,
    pub params: ChannelParams,
}

impl<'a> ChannelProfile<'a> {
    pub fn links(&self, point_index: usize) -> Result<LinkBudget> {
        normalized_powers(
            point_index,
            self.grid,
            self.topology,
            self.partition,
            self.shadowing,
            &self.params,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::MbsfnPartition;

    #[test]
    fn path_loss_examples() {
        assert_eq!(path_loss(1.0, 1.0, 3.5), 1.0);
        assert!((path_loss(2.0, 1.0, 3.5) - 0.088_388_347_648_318_44).abs() < 1e-15);
        assert_eq!(path_loss(0.5, 1.0, 3.5), 1.0);
    }

    #[test]
    fn shape_map_boundaries_are_inclusive() {
        assert_eq!(nakagami_shape(0.2, 0.5), 3);
        assert_eq!(nakagami_shape(0.25, 0.5), 3);
        assert_eq!(nakagami_shape(0.3, 0.5), 2);
        assert_eq!(nakagami_shape(0.5, 0.5), 2);
        assert_eq!(nakagami_shape(0.50001, 0.5), 1);
        for d in [1e-6, 0.1, 3.0, 100.0] {
            assert_eq!(nakagami_shape(d, 0.0), 1);
        }
    }

    fn line_topology(xs: &[f64]) -> NetworkTopology {
        NetworkTopology {
            stations: xs.iter().map(|&x| Point::new(x, 10.0)).collect(),
            d_net: 20.0,
            r_bs: 0.0,
            seed: 0,
        }
    }

    fn unit_params() -> ChannelParams {
        ChannelParams {
            alpha: 3.5,
            d0: 1.0,
            r_f: 0.5,
            sigma_s_db: 0.0,
            d_corr: 0.02,
        }
    }

    #[test]
    fn omega_examples() {
        let params = unit_params();
        let y = Point::new(10.0, 10.0);

        let single = line_topology(&[11.0]);
        let part = MbsfnPartition::build(&single, 40.0, 5.0).unwrap();
        let b = link_budget_at(y, |_| 0.0, &single, &part, &params).unwrap();
        assert_eq!(b.combining[0].omega, 1.0);
        let b10 = link_budget_at(y, |_| 10.0, &single, &part, &params).unwrap();
        assert!((b10.combining[0].omega - 10.0).abs() < 1e-12);

        let pair = line_topology(&[12.0, 8.0]);
        let part = MbsfnPartition::build(&pair, 40.0, 5.0).unwrap();
        let b = link_budget_at(y, |_| 0.0, &pair, &part, &params).unwrap();
        assert_eq!(b.combining_count(), 2);
        for l in &b.combining {
            assert!((l.omega - 0.044_194_173_824_159_22).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_distance_reference_with_small_d0() {
        // Ω is referenced to unit distance; d0 only clamps the near field.
        let params = ChannelParams {
            d0: 0.01,
            ..unit_params()
        };
        let t = line_topology(&[11.0, 10.005]);
        let part = MbsfnPartition::build(&t, 40.0, 5.0).unwrap();
        let b = link_budget_at(Point::new(10.0, 10.0), |_| 0.0, &t, &part, &params).unwrap();
        assert!((b.combining[0].omega - 0.5).abs() < 1e-12);
        assert!((b.combining[1].omega - 0.01f64.powf(-3.5) / 2.0).abs() < 1e-3);
    }

    #[test]
    fn same_area_station_beyond_d_max_interferes() {
        let params = unit_params();
        let t = line_topology(&[11.0, 16.0]);
        let part = MbsfnPartition::build(&t, 40.0, 5.0).unwrap();
        let b = link_budget_at(Point::new(10.0, 10.0), |_| 0.0, &t, &part, &params).unwrap();
        assert_eq!(b.combining.len(), 1);
        assert_eq!(b.interfering.len(), 1);
        assert_eq!(b.interfering[0].station, 1);
        assert!((b.interfering[0].omega - 6f64.powf(-3.5)).abs() < 1e-15);
    }

    #[test]
    fn omega_decreases_with_distance() {
        let params = unit_params();
        let mut last = f64::INFINITY;
        for k in 1..40 {
            let d = 1.0 + 0.1 * k as f64;
            let t = line_topology(&[10.0 + d]);
            let part = MbsfnPartition::build(&t, 40.0, 50.0).unwrap();
            let o = link_budget_at(Point::new(10.0, 10.0), |_| 3.0, &t, &part, &params)
                .unwrap()
                .combining[0]
                .omega;
            assert!(o < last);
            last = o;
        }
    }
}
