//! Lattice grid, wavefunction container, tight-binding dispersion and
//! basic observables.
//!
//! Units: ħ = m = 1, the hopping J is the unit of energy and frequency, and
//! time is measured in 1/J. Positions are reported either as site indices
//! or as dimensionless coordinates `x = j Δx`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed unit system. Every field is a constant; the struct exists so the
/// values can be echoed into run metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitSystem {
    pub j_value: f64,
    pub hbar: f64,
    pub mass: f64,
    /// Self-acceleration of the continuum Airy solution.
    pub continuum_accel: f64,
}

pub const UNITS: UnitSystem = UnitSystem {
    j_value: 1.0,
    hbar: 1.0,
    mass: 1.0,
    continuum_accel: 0.5,
};

/// Hopping amplitude J.
pub const HOPPING: f64 = UNITS.j_value;

/// Maximum group velocity 2J, in sites per unit time.
pub const V_MAX: f64 = 2.0 * HOPPING;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    delta_x: f64,
    j_min: i64,
    j_max: i64,
}

impl LatticeGrid {
    pub fn new(delta_x: f64, j_min: i64, j_max: i64) -> Result<Self> {
        if !(delta_x.is_finite() && delta_x > 0.0) {
            return Err(Error::Config(format!("lattice spacing must be positive, got {delta_x}")));
        }
        if j_min >= j_max {
            return Err(Error::Config(format!("empty site range {j_min}..={j_max}")));
        }
        Ok(LatticeGrid {
            delta_x,
            j_min,
            j_max,
        })
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    pub fn j_min(&self) -> i64 {
        self.j_min
    }

    pub fn j_max(&self) -> i64 {
        self.j_max
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn position(&self, j: i64) -> f64 {
        j as f64 * self.delta_x
    }

    pub fn site(&self, index: usize) -> i64 {
        self.j_min + index as i64
    }

    /// Array index of site `j`, if it lies on the grid.
    pub fn index_of(&self, j: i64) -> Option<usize> {
        (self.j_min..=self.j_max)
            .contains(&j)
            .then(|| (j - self.j_min) as usize)
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.j_min..=self.j_max
    }
}

/// Complex amplitudes on the sites of a grid at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    grid: LatticeGrid,
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl WaveState {
    pub fn new(grid: LatticeGrid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::Config(format!(
                "{} amplitudes for a grid of {} sites",
                amplitudes.len(),
                grid.len()
            )));
        }
        Ok(WaveState {
            grid,
            amplitudes,
            time,
        })
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(grid: LatticeGrid, amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        let mut state = Self::new(grid, amplitudes, time)?;
        let norm = state.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Config("state has zero or non-finite norm".into()));
        }
        let inv = 1.0 / norm;
        state.amplitudes.iter_mut().for_each(|a| *a *= inv);
        Ok(state)
    }

    pub fn delta(grid: LatticeGrid, j: i64) -> Result<Self> {
        let idx = grid
            .index_of(j)
            .ok_or_else(|| Error::Config(format!("site {j} is off the grid")))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
        amps[idx] = Complex64::new(1.0, 0.0);
        Self::new(grid, amps, 0.0)
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn amplitude(&self, j: i64) -> Option<Complex64> {
        self.grid.index_of(j).map(|i| self.amplitudes[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// ⟨self|other⟩ for states on the same grid.
    pub fn inner(&self, other: &WaveState) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::Config("inner product of states on different grids".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &WaveState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Probability within `width` sites of either end of the grid.
    pub fn boundary_occupation(&self, width: usize) -> f64 {
        let n = self.amplitudes.len();
        let w = width.min(n / 2);
        let left: f64 = self.amplitudes[..w].iter().map(|a| a.norm_sqr()).sum();
        let right: f64 = self.amplitudes[n - w..].iter().map(|a| a.norm_sqr()).sum();
        left + right
    }

    /// Copies the state onto a larger grid with the same spacing; new sites are empty.
    pub fn embed(&self, target: LatticeGrid) -> Result<WaveState> {
        if target.delta_x != self.grid.delta_x
            || target.j_min > self.grid.j_min
            || target.j_max < self.grid.j_max
        {
            return Err(Error::Config("embedding target must contain the source grid".into()));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); target.len()];
        let offset = (self.grid.j_min - target.j_min) as usize;
        amps[offset..offset + self.amplitudes.len()].copy_from_slice(&self.amplitudes);
        WaveState::new(target, amps, self.time)
    }

    /// Writes rows `site_index,position,re,im,density`.
    pub fn write_snapshot<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["site_index", "position", "re", "im", "density"])?;
        for (j, a) in self.grid.sites().zip(&self.amplitudes) {
            w.write_record(&[
                j.to_string(),
                format!("{:.12e}", self.grid.position(j)),
                format!("{:.17e}", a.re),
                format!("{:.17e}", a.im),
                format!("{:.17e}", a.norm_sqr()),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<snapshot>", e))?;
        Ok(())
    }

    /// Reads a snapshot written by [`WaveState::write_snapshot`]. Sites must be
    /// contiguous and ascending; the spacing is recovered from the positions.
    pub fn read_snapshot<R: Read>(reader: R, time: f64) -> Result<WaveState> {
        #[derive(Deserialize)]
        struct Row {
            site_index: i64,
            position: f64,
            re: f64,
            im: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        if rows.len() < 2 {
            return Err(Error::Config("snapshot needs at least two sites".into()));
        }
        for pair in rows.windows(2) {
            if pair[1].site_index != pair[0].site_index + 1 {
                return Err(Error::Config("snapshot sites are not contiguous".into()));
            }
        }
        let first = &rows[0];
        let last = &rows[rows.len() - 1];
        let delta_x = (last.position - first.position) / (last.site_index - first.site_index) as f64;
        let grid = LatticeGrid::new(delta_x, first.site_index, last.site_index)?;
        let amps = rows.iter().map(|r| Complex64::new(r.re, r.im)).collect();
        WaveState::new(grid, amps, time)
    }
}

/// Wraps `k` into [−π, π).
pub fn wrap_momentum(k: f64) -> f64 {
    let w = (k + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Tight-binding band energy E(k) = −2J cos k.
pub fn dispersion(k: f64) -> f64 {
    -2.0 * HOPPING * wrap_momentum(k).cos()
}

/// dE/dk = 2J sin k.
pub fn group_velocity(k: f64) -> f64 {
    2.0 * HOPPING * wrap_momentum(k).sin()
}

/// Momentum grid k_n = −π + 2πn/N, n = 0..N.
pub fn momentum_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| -PI + 2.0 * PI * i as f64 / n as f64).collect()
}

/// Momentum-space probability |ψ̃(k)|² with ψ̃(k) = Σ_j e^{−ikj} ψ_j / √N on
/// the grid of [`momentum_grid`].
pub fn momentum_density(state: &WaveState) -> Vec<(f64, f64)> {
    let grid = state.grid();
    let n = grid.len();
    // e^{−i k_n j} = e^{iπj} e^{−2πi n j/N}: transform (−1)^j ψ_j, then fix the
    // phase from the grid origin, which drops out of the modulus.
    let mut buf: Vec<Complex64> = state
        .amplitudes()
        .iter()
        .zip(grid.sites())
        .map(|(a, j)| if j.rem_euclid(2) == 0 { *a } else { -*a })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    let scale = 1.0 / n as f64;
    momentum_grid(n)
        .into_iter()
        .zip(buf)
        .map(|(k, c)| (k, c.norm_sqr() * scale))
        .collect()
}

/// Kinds of quantity accepted by [`to_physical_units`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantityKind {
    Velocity,
    Acceleration,
    Time,
    Length,
}

/// Converts a quantity in lattice units (sites, 1/J) to SI given the lattice
/// spacing `d` in metres and the hopping frequency J in Hz.
pub fn to_physical_units(
    quantity: f64,
    kind: QuantityKind,
    lattice_spacing: f64,
    j_frequency: f64,
) -> Result<f64> {
    if !(lattice_spacing > 0.0 && j_frequency > 0.0) {
        return Err(Error::Domain(format!(
            "physical constants must be positive (d = {lattice_spacing}, J = {j_frequency})"
        )));
    }
    let d = lattice_spacing;
    let f = j_frequency;
    Ok(match kind {
        QuantityKind::Velocity => quantity * d * f,
        QuantityKind::Acceleration => quantity * d * f * f,
        QuantityKind::Time => quantity / f,
        QuantityKind::Length => quantity * d,
    })
}

/// Cached forward/inverse FFT pair of one length.
#[derive(Clone)]
pub(crate) struct FftPair {
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
    len: usize,
}

impl FftPair {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftPair {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Inverse transform including the 1/N normalisation.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let s = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|c| *c *= s);
    }
}
