//! Spatially correlated log-normal shadowing.
//!
//! Each station gets an independent zero-mean Gaussian field (in dB) over the
//! receiver lattice with covariance `σ² · exp(-|Δx| · ln2 / d_corr)`, so the
//! correlation halves at one decorrelation length. Small lattices use an
//! exact dense Cholesky factor; larger ones use circulant embedding, which is
//! also exact on a regular lattice whenever the embedded spectrum is
//! non-negative.

use std::f64::consts::LN_2;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, Stream};
use crate::topology::{EvaluationGrid, NetworkTopology};

/// Largest lattice factored densely.
pub const DENSE_POINT_LIMIT: usize = 4_000;

const MAX_EMBEDDING_DOUBLINGS: usize = 3;

/// Which lattice points carry field values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldSupport {
    #[default]
    Full,
    /// Only the central evaluation square.
    EvalRegion,
}

/// Shadowing factors ξ (dB) for every (station, lattice point) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingField {
    pub sigma_db: f64,
    pub d_corr: f64,
    stations: usize,
    grid_side: usize,
    lo: usize,
    side: usize,
    /// Station-major; empty when σ = 0.
    values: Vec<f64>,
}

impl ShadowingField {
    /// The field of an unshadowed channel.
    pub fn zero(grid: &EvaluationGrid, stations: usize) -> Self {
        Self {
            sigma_db: 0.0,
            d_corr: 1.0,
            stations,
            grid_side: grid.side(),
            lo: 0,
            side: grid.side(),
            values: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    pub fn stations(&self) -> usize {
        self.stations
    }

    /// Points per axis of the supporting lattice.
    pub fn support_side(&self) -> usize {
        self.side
    }

    /// Whether grid point `grid_index` carries a value.
    pub fn covers(&self, grid_index: usize) -> bool {
        let (ix, iy) = (grid_index % self.grid_side, grid_index / self.grid_side);
        (self.lo..self.lo + self.side).contains(&ix) && (self.lo..self.lo + self.side).contains(&iy)
    }

    /// ξ in dB for `station` at grid point `grid_index`.
    ///
    /// Panics if the point lies outside the field support.
    #[inline]
    pub fn value(&self, station: usize, grid_index: usize) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let (ix, iy) = (grid_index % self.grid_side, grid_index / self.grid_side);
        assert!(
            self.covers(grid_index),
            "grid point {grid_index} outside shadowing support"
        );
        let local = (iy - self.lo) * self.side + (ix - self.lo);
        self.values[station * self.side * self.side + local]
    }

    /// Field of one station over the support, row-major.
    pub fn station_field(&self, station: usize) -> &[f64] {
        let n = self.side * self.side;
        if self.values.is_empty() {
            &[]
        } else {
            &self.values[station * n..(station + 1) * n]
        }
    }

    /// Writes `station,point,xi_db` rows; `point` is the grid index.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "station,point,xi_db")?;
        for station in 0..self.stations {
            for iy in self.lo..self.lo + self.side {
                for ix in self.lo..self.lo + self.side {
                    let g = iy * self.grid_side + ix;
                    writeln!(out, "{station},{g},{}", self.value(station, g))?;
                }
            }
        }
        Ok(())
    }
}

/// Shadowing over every grid point.
pub fn generate_shadowing(
    grid: &EvaluationGrid,
    topology: &NetworkTopology,
    sigma_db: f64,
    d_corr: f64,
    seed: u64,
) -> Result<ShadowingField> {
    generate_shadowing_on(grid, topology, sigma_db, d_corr, seed, FieldSupport::Full)
}

pub fn generate_shadowing_on(
    grid: &EvaluationGrid,
    topology: &NetworkTopology,
    sigma_db: f64,
    d_corr: f64,
    seed: u64,
    support: FieldSupport,
) -> Result<ShadowingField> {
    if !(sigma_db >= 0.0) || !(d_corr > 0.0) {
        return Err(Error::invalid(format!(
            "need sigma_s >= 0 and d_corr > 0, got {sigma_db}, {d_corr}"
        )));
    }
    let (lo, side) = match support {
        FieldSupport::Full => (0, grid.side()),
        FieldSupport::EvalRegion => (*grid.eval_range().start(), grid.eval_side_points()),
    };
    let mut field = ShadowingField {
        sigma_db,
        d_corr,
        stations: topology.len(),
        grid_side: grid.side(),
        lo,
        side,
        values: Vec::new(),
    };
    if sigma_db == 0.0 {
        return Ok(field);
    }
    let cov = |lag: f64| sigma_db * sigma_db * (-lag * LN_2 / d_corr).exp();
    field.values = if side * side <= DENSE_POINT_LIMIT {
        dense_fields(side, grid.spacing, topology.len(), seed, cov)?
    } else {
        embedded_fields(side, grid.spacing, topology.len(), seed, cov)?
    };
    Ok(field)
}

fn dense_fields(
    side: usize,
    spacing: f64,
    stations: usize,
    seed: u64,
    cov: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let n = side * side;
    let coord = |k: usize| ((k % side) as f64 * spacing, (k / side) as f64 * spacing);
    let mut chol = vec![0.0; n * n];
    for i in 0..n {
        let (xi, yi) = coord(i);
        for j in 0..=i {
            let (xj, yj) = coord(j);
            let mut s = cov((xi - xj).hypot(yi - yj));
            for k in 0..j {
                s -= chol[i * n + k] * chol[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::CovarianceFactorizationFailure { pivot: i });
                }
                chol[i * n + i] = s.sqrt();
            } else {
                chol[i * n + j] = s / chol[j * n + j];
            }
        }
    }
    let mut values = vec![0.0; stations * n];
    let mut z = vec![0.0; n];
    for (station, out) in values.chunks_mut(n).enumerate() {
        let mut rng = derived_rng(seed, Stream::Shadowing, station as u64);
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (i, o) in out.iter_mut().enumerate() {
            let row = &chol[i * n..i * n + i + 1];
            *o = row.iter().zip(&z).map(|(l, z)| l * z).sum();
        }
    }
    Ok(values)
}

struct Fft2 {
    size: usize,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Fft2 {
    fn new(size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(size);
        let scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
        Self { size, fft, scratch }
    }

    fn transpose(&self, data: &mut [Complex<f64>]) {
        let m = self.size;
        for r in 0..m {
            for c in r + 1..m {
                data.swap(r * m + c, c * m + r);
            }
        }
    }

    /// In-place forward 2-D transform of a row-major `size × size` array.
    fn forward(&mut self, data: &mut [Complex<f64>]) {
        self.fft.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
        self.fft.process_with_scratch(data, &mut self.scratch);
        self.transpose(data);
    }
}

/// Circulant-embedding synthesis: one complex transform yields two
/// independent fields (real and imaginary parts).
fn embedded_fields(
    side: usize,
    spacing: f64,
    stations: usize,
    seed: u64,
    cov: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    let mut m = (2 * (side - 1)).max(2);
    let mut doublings = 0;
    let (mut fft2, sqrt_eig) = loop {
        let mut fft2 = Fft2::new(m);
        let mut base = vec![Complex::default(); m * m];
        for a in 0..m {
            let da = a.min(m - a) as f64 * spacing;
            for b in 0..m {
                let db = b.min(m - b) as f64 * spacing;
                base[a * m + b] = Complex::new(cov(da.hypot(db)), 0.0);
            }
        }
        fft2.forward(&mut base);
        let max = base.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min = base.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        if min >= -1e-10 * max {
            let scale = 1.0 / (m * m) as f64;
            let sqrt_eig: Vec<f64> = base
                .iter()
                .map(|c| (c.re.max(0.0) * scale).sqrt())
                .collect();
            break (fft2, sqrt_eig);
        }
        doublings += 1;
        if doublings > MAX_EMBEDDING_DOUBLINGS {
            return Err(Error::CovarianceFactorizationFailure { pivot: m });
        }
        m *= 2;
    };

    let n = side * side;
    let mut values = vec![0.0; stations * n];
    let mut work = vec![Complex::default(); m * m];
    for pair in 0..stations.div_ceil(2) {
        let mut rng = derived_rng(seed, Stream::Shadowing, pair as u64);
        for (w, s) in work.iter_mut().zip(&sqrt_eig) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *w = Complex::new(re * s, im * s);
        }
        fft2.forward(&mut work);
        for part in 0..2 {
            let station = 2 * pair + part;
            if station >= stations {
                break;
            }
            let out = &mut values[station * n..(station + 1) * n];
            for r in 0..side {
                for c in 0..side {
                    let v = work[r * m + c];
                    out[r * side + c] = if part == 0 { v.re } else { v.im };
                }
            }
        }
    }
    Ok(values)
}
