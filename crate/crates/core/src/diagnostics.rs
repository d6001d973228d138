//! Observables extracted from snapshot streams: the main density peak with
//! sub-site resolution, its velocity and acceleration, the momentum-peak
//! drift and the center of mass.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{momentum_density, WaveState, V_MAX};

/// Default boxcar length applied to positions before differencing.
pub const SMOOTHING_WINDOW: usize = 5;

/// Below this the three-point parabola is treated as flat.
const FLAT_TRIPLE: f64 = 1e-15;

/// Time series of the main peak, positions in site units.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakTrajectory {
    times: Vec<f64>,
    positions: Vec<f64>,
    velocities: Option<Vec<f64>>,
    accelerations: Option<Vec<f64>>,
    peak_densities: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRow {
    t: f64,
    position: f64,
    velocity: Option<f64>,
    acceleration: Option<f64>,
}

impl PeakTrajectory {
    pub fn new(times: Vec<f64>, positions: Vec<f64>) -> Result<Self> {
        if times.len() != positions.len() {
            return Err(Error::Domain(format!(
                "{} times for {} positions",
                times.len(),
                positions.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("trajectory times must increase strictly".into()));
        }
        Ok(PeakTrajectory {
            times,
            positions,
            velocities: None,
            accelerations: None,
            peak_densities: None,
        })
    }

    pub fn with_peak_densities(mut self, densities: Vec<f64>) -> Result<Self> {
        if densities.len() != self.len() {
            return Err(Error::Domain("peak densities do not match the trajectory".into()));
        }
        self.peak_densities = Some(densities);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn velocities(&self) -> Option<&[f64]> {
        self.velocities.as_deref()
    }

    pub fn accelerations(&self) -> Option<&[f64]> {
        self.accelerations.as_deref()
    }

    pub fn peak_densities(&self) -> Option<&[f64]> {
        self.peak_densities.as_deref()
    }

    /// Rows with `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> PeakTrajectory {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.times[i] >= lo && self.times[i] <= hi)
            .collect();
        let pick = |v: &Vec<f64>| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        PeakTrajectory {
            times: pick(&self.times),
            positions: pick(&self.positions),
            velocities: self.velocities.as_ref().map(pick),
            accelerations: self.accelerations.as_ref().map(pick),
            peak_densities: self.peak_densities.as_ref().map(pick),
        }
    }

    /// Plain-text rows `t,position,velocity,acceleration`; absent derived
    /// columns are left empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for i in 0..self.len() {
            w.serialize(TrajectoryRow {
                t: self.times[i],
                position: self.positions[i],
                velocity: self.velocities.as_ref().map(|v| v[i]),
                acceleration: self.accelerations.as_ref().map(|a| a[i]),
            })?;
        }
        w.flush().map_err(|e| Error::io("trajectory.csv", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: TrajectoryRow = row?;
            rows.push(row);
        }
        let mut traj = PeakTrajectory::new(
            rows.iter().map(|r| r.t).collect(),
            rows.iter().map(|r| r.position).collect(),
        )?;
        if rows.iter().all(|r| r.velocity.is_some()) && !rows.is_empty() {
            traj.velocities = Some(rows.iter().filter_map(|r| r.velocity).collect());
        }
        if rows.iter().all(|r| r.acceleration.is_some()) && !rows.is_empty() {
            traj.accelerations = Some(rows.iter().filter_map(|r| r.acceleration).collect());
        }
        Ok(traj)
    }
}

/// Sub-site offset of a peak from the parabola through three densities.
pub fn refine_peak(d_minus: f64, d_zero: f64, d_plus: f64) -> f64 {
    let denom = d_minus - 2.0 * d_zero + d_plus;
    if denom.abs() < FLAT_TRIPLE {
        return 0.0;
    }
    0.5 * (d_minus - d_plus) / denom
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn refined_at(state: &WaveState, density: &[f64], index: usize) -> Result<f64> {
    let site = state.grid().site(index);
    if index == 0 || index + 1 == density.len() {
        return Err(Error::PeakAtBoundary { site });
    }
    let off = refine_peak(density[index - 1], density[index], density[index + 1]);
    Ok(site as f64 + off)
}

/// Global maximum of |ψ_j|² refined to sub-site resolution.
pub fn find_main_peak(state: &WaveState) -> Result<f64> {
    let density = state.density();
    refined_at(state, &density, argmax(&density))
}

/// Incremental main-peak tracker. The first state uses the global maximum;
/// later ones search ±max(5, 3·v_max·Δt) sites around the linear
/// extrapolation so the tracker cannot jump to a neighbouring lobe as
/// amplitudes redistribute.
#[derive(Debug, Clone, Default)]
pub struct PeakTracker {
    times: Vec<f64>,
    positions: Vec<f64>,
    peaks: Vec<f64>,
}

impl PeakTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Adds a snapshot and returns its refined peak position.
    pub fn push(&mut self, state: &WaveState) -> Result<f64> {
        let n = self.times.len();
        let density = state.density();
        let index = if n == 0 {
            argmax(&density)
        } else {
            self.windowed_peak(state, &density)?
        };
        let x = refined_at(state, &density, index)?;
        self.times.push(state.time());
        self.positions.push(x);
        self.peaks.push(density[index]);
        Ok(x)
    }

    fn windowed_peak(&self, state: &WaveState, density: &[f64]) -> Result<usize> {
        let n = self.times.len();
        let lost = Error::TrackingLost {
            snapshot: n,
            last_good: n - 1,
        };
        let (t_last, x_last) = (self.times[n - 1], self.positions[n - 1]);
        let guess = if n == 1 {
            x_last
        } else {
            let (t1, x1) = (self.times[n - 2], self.positions[n - 2]);
            x_last + (x_last - x1) / (t_last - t1) * (state.time() - t_last)
        };
        let half = (3.0 * V_MAX * (state.time() - t_last).abs()).max(5.0);
        let grid = state.grid();
        let lo = ((guess - half).ceil() as i64).max(grid.j_min());
        let hi = ((guess + half).floor() as i64).min(grid.j_max());
        let (Some(lo_i), Some(hi_i)) = (grid.index_of(lo), grid.index_of(hi)) else {
            return Err(lost);
        };
        if lo_i > hi_i {
            return Err(lost);
        }
        let i = lo_i + argmax(&density[lo_i..=hi_i]);
        // a flat background is not a peak
        let is_local_max = i > 0 && i + 1 < density.len() && {
            let (l, c, r) = (density[i - 1], density[i], density[i + 1]);
            c >= l && c >= r && (c > l || c > r)
        };
        if !is_local_max {
            return Err(lost);
        }
        Ok(i)
    }

    /// The trajectory in increasing time, with the peak densities attached.
    pub fn finish(mut self) -> Result<PeakTrajectory> {
        if self.times.len() > 1 && self.times.windows(2).all(|w| w[1] < w[0]) {
            self.times.reverse();
            self.positions.reverse();
            self.peaks.reverse();
        }
        PeakTrajectory::new(self.times, self.positions)?.with_peak_densities(self.peaks)
    }
}

/// Follows the main peak through a snapshot list (see [`PeakTracker`]).
/// A list in decreasing time is accepted and reported in increasing time.
pub fn track_peak(snapshots: &[WaveState]) -> Result<PeakTrajectory> {
    if snapshots.len() < 2 {
        return Err(Error::Domain(format!(
            "peak tracking needs at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    let mut tracker = PeakTracker::new();
    for s in snapshots {
        tracker.push(s)?;
    }
    tracker.finish()
}

fn boxcar(values: &[f64], window: usize) -> Vec<Option<f64>> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            if i < half || i + half >= values.len() {
                None
            } else {
                Some(values[i - half..=i + half].iter().sum::<f64>() / window as f64)
            }
        })
        .collect()
}

/// Velocity (order 1) or velocity and acceleration (order 2) with the
/// default 5-point boxcar.
pub fn differentiate(series: &PeakTrajectory, order: u8) -> Result<PeakTrajectory> {
    differentiate_with_window(series, order, SMOOTHING_WINDOW)
}

/// Central differences of boxcar-smoothed positions where the full window
/// fits, raw central differences near the ends and second-order one-sided
/// formulas at the endpoints. Every branch is exact for quadratics.
pub fn differentiate_with_window(
    series: &PeakTrajectory,
    order: u8,
    window: usize,
) -> Result<PeakTrajectory> {
    let needed = match order {
        1 => 3,
        2 => 5,
        _ => return Err(Error::Domain(format!("derivative order must be 1 or 2, got {order}"))),
    };
    let n = series.len();
    if n < needed {
        return Err(Error::Domain(format!(
            "order-{order} differentiation needs at least {needed} points, got {n}"
        )));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Domain(format!("smoothing window must be odd, got {window}")));
    }
    let t = &series.times;
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::Domain("differentiation needs uniform time spacing".into()));
    }
    let x = &series.positions;
    let smooth = boxcar(x, window);
    let at = |i: usize| -> (f64, f64, f64) {
        match (i.checked_sub(1).and_then(|j| smooth[j]), smooth[i], smooth.get(i + 1).copied().flatten()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => (x[i - 1], x[i], x[i + 1]),
        }
    };

    let mut v = vec![0.0; n];
    let mut a = vec![0.0; n];
    for i in 1..n - 1 {
        let (xm, x0, xp) = at(i);
        v[i] = (xp - xm) / (2.0 * dt);
        a[i] = (xp - 2.0 * x0 + xm) / (dt * dt);
    }
    v[0] = (-3.0 * x[0] + 4.0 * x[1] - x[2]) / (2.0 * dt);
    v[n - 1] = (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]) / (2.0 * dt);
    if n >= 4 {
        a[0] = (2.0 * x[0] - 5.0 * x[1] + 4.0 * x[2] - x[3]) / (dt * dt);
        a[n - 1] = (2.0 * x[n - 1] - 5.0 * x[n - 2] + 4.0 * x[n - 3] - x[n - 4]) / (dt * dt);
    }

    let mut out = series.clone();
    out.velocities = Some(v);
    if order == 2 {
        out.accelerations = Some(a);
    }
    Ok(out)
}

/// Momentum-peak positions per snapshot, wrapped into [−π, π) and unwrapped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentumDrift {
    pub times: Vec<f64>,
    pub wrapped: Vec<f64>,
    pub unwrapped: Vec<f64>,
}

impl MomentumDrift {
    /// Appends the momentum peak of `state`, unwrapped onto the branch
    /// nearest the previous sample.
    pub fn push(&mut self, state: &WaveState) -> Result<f64> {
        let k = momentum_peak(state)?;
        let u = match self.unwrapped.last() {
            None => k,
            Some(&prev) => k + 2.0 * PI * ((prev - k) / (2.0 * PI)).round(),
        };
        self.times.push(state.time());
        self.wrapped.push(k);
        self.unwrapped.push(u);
        Ok(k)
    }

    /// Least-squares slope of the unwrapped series.
    pub fn slope(&self) -> Result<f64> {
        let n = self.times.len();
        if n < 2 {
            return Err(Error::Domain("slope needs at least two samples".into()));
        }
        let tm = self.times.iter().sum::<f64>() / n as f64;
        let km = self.unwrapped.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (t, k) in self.times.iter().zip(&self.unwrapped) {
            sxy += (t - tm) * (k - km);
            sxx += (t - tm) * (t - tm);
        }
        if sxx == 0.0 {
            return Err(Error::Domain("slope needs distinct times".into()));
        }
        Ok(sxy / sxx)
    }

    /// First time the unwrapped peak crosses a zone boundary (an odd
    /// multiple of π), linearly interpolated.
    pub fn first_wrap_time(&self) -> Option<f64> {
        let zone = |k: f64| ((k + PI) / (2.0 * PI)).floor();
        for i in 1..self.times.len() {
            let (k0, k1) = (self.unwrapped[i - 1], self.unwrapped[i]);
            let (z0, z1) = (zone(k0), zone(k1));
            if z0 != z1 {
                let edge = if z1 > z0 { z1 * 2.0 * PI - PI } else { z0 * 2.0 * PI - PI };
                let f = (edge - k0) / (k1 - k0);
                return Some(self.times[i - 1] + f * (self.times[i] - self.times[i - 1]));
            }
        }
        None
    }
}

fn momentum_peak(state: &WaveState) -> Result<f64> {
    let spectrum = momentum_density(state);
    let n = spectrum.len();
    let d: Vec<f64> = spectrum.iter().map(|p| p.1).collect();
    let i = argmax(&d);
    let max = d[i];
    let mut sorted = d.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[n / 2];
    let candidates: Vec<f64> = (0..n)
        .filter(|&m| {
            let (l, r) = (d[(m + n - 1) % n], d[(m + 1) % n]);
            d[m] >= 0.5 * max && d[m] > l && d[m] >= r
        })
        .map(|m| spectrum[m].0)
        .collect();
    if max < 2.0 * median || candidates.len() > 1 {
        return Err(Error::AmbiguousMomentumPeak { candidates });
    }
    let off = refine_peak(d[(i + n - 1) % n], d[i], d[(i + 1) % n]);
    Ok(crate::lattice::wrap_momentum(spectrum[i].0 + off * 2.0 * PI / n as f64))
}

pub fn momentum_peak_drift(snapshots: &[WaveState]) -> Result<MomentumDrift> {
    let mut drift = MomentumDrift::default();
    for s in snapshots {
        drift.push(s)?;
    }
    Ok(drift)
}

/// Σ_j j |ψ_j|² in site units.
pub fn center_of_mass(state: &WaveState) -> f64 {
    state
        .grid()
        .sites()
        .zip(state.amplitudes())
        .map(|(j, a)| j as f64 * a.norm_sqr())
        .sum()
}
