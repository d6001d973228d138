//! Time evolution on the tight-binding chain.
//!
//! The exact propagators work in momentum space on the periodic closure of
//! the grid. A site-linear potential `F(t) Σ_j j n_j` is removed by the
//! gauge ψ_j = e^{−ijA(t)} φ_j with A(t) = ∫₀ᵗ F, after which the
//! Hamiltonian is diagonal in k at all times with band −2J cos(k − A(t)).
//! The phase accumulated by mode k is therefore
//! 2J [cos k ∫cos A + sin k ∫sin A], so only two scalar integrals are needed
//! regardless of grid size.
//!
//! Crank–Nicolson stepping on the open chain is kept as an independent
//! real-space check of the exact routes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FftPair, WaveState, HOPPING};
use crate::special::bessel_j0;

/// Below this |J0(K0)| the refractive index is treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    pub t_start: f64,
    /// Dimensionless drive amplitude K0 = K/ω.
    pub k0: f64,
}

/// Piecewise-constant sinusoidal drive K(t) cos(ωt) Σ_j j n_j on a single
/// global clock; the drive phase is not reset at segment boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSchedule {
    omega: f64,
    segments: Vec<DriveSegment>,
    #[serde(skip)]
    gauge_at_start: Vec<f64>,
}

impl DriveSchedule {
    pub fn new(omega: f64, segments: Vec<DriveSegment>) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Config(format!("drive frequency must be positive, got {omega}")));
        }
        let first = segments
            .first()
            .ok_or_else(|| Error::Config("drive schedule has no segments".into()))?;
        if first.t_start != 0.0 {
            return Err(Error::Config(format!(
                "first drive segment must start at t = 0, got {}",
                first.t_start
            )));
        }
        for pair in segments.windows(2) {
            if !(pair[1].t_start > pair[0].t_start) {
                return Err(Error::Config(format!(
                    "segment start times must increase strictly ({} then {})",
                    pair[0].t_start, pair[1].t_start
                )));
            }
        }
        if segments.iter().any(|s| !s.k0.is_finite() || !s.t_start.is_finite()) {
            return Err(Error::Config("non-finite drive segment".into()));
        }
        let mut schedule = DriveSchedule {
            omega,
            segments,
            gauge_at_start: Vec::new(),
        };
        schedule.rebuild_gauge();
        Ok(schedule)
    }

    pub fn constant(omega: f64, k0: f64) -> Result<Self> {
        Self::new(omega, vec![DriveSegment { t_start: 0.0, k0 }])
    }

    fn rebuild_gauge(&mut self) {
        let w = self.omega;
        let mut acc = 0.0;
        self.gauge_at_start = Vec::with_capacity(self.segments.len());
        for (i, seg) in self.segments.iter().enumerate() {
            self.gauge_at_start.push(acc);
            if let Some(next) = self.segments.get(i + 1) {
                acc += seg.k0 * ((w * next.t_start).sin() - (w * seg.t_start).sin());
            }
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    fn segment_index(&self, t: f64) -> usize {
        self.segments
            .iter()
            .rposition(|s| s.t_start <= t)
            .unwrap_or(0)
    }

    pub fn k0_at(&self, t: f64) -> f64 {
        self.segments[self.segment_index(t)].k0
    }

    /// Coefficient of Σ_j j n_j at time t: K0(t) ω cos(ωt).
    pub fn field(&self, t: f64) -> f64 {
        self.k0_at(t) * self.omega * (self.omega * t).cos()
    }

    /// A(t) = ∫₀ᵗ K(t′) cos(ωt′) dt′, continuous across segment boundaries.
    pub fn gauge(&self, t: f64) -> f64 {
        if self.gauge_at_start.len() != self.segments.len() {
            // deserialised without the cache
            let mut s = self.clone();
            s.rebuild_gauge();
            return s.gauge(t);
        }
        let i = self.segment_index(t);
        let seg = self.segments[i];
        self.gauge_at_start[i] + seg.k0 * ((self.omega * t).sin() - (self.omega * seg.t_start).sin())
    }

    /// Parses `t0:K0,t1:K1,...`.
    pub fn parse_segments(text: &str) -> Result<Vec<DriveSegment>> {
        text.split(',')
            .map(|item| {
                let (t, k) = item
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("schedule entry '{item}' is not t:K0")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("bad schedule number '{v}': {e}")))
                };
                Ok(DriveSegment {
                    t_start: parse(t)?,
                    k0: parse(k)?,
                })
            })
            .collect()
    }
}

/// Static tilt: neighbouring sites differ in energy by V0. The site potential
/// is −V0·j, so that a packet starting at rest is displaced towards +j and
/// its crystal momentum grows as k(t) = V0 t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltSpec {
    pub v0: f64,
}

impl TiltSpec {
    pub fn new(v0: f64) -> Result<Self> {
        if !v0.is_finite() {
            return Err(Error::Config(format!("tilt must be finite, got {v0}")));
        }
        Ok(TiltSpec { v0 })
    }

    pub fn bloch_period(&self) -> f64 {
        2.0 * PI / self.v0.abs()
    }
}

/// Site-linear forcing F(t) Σ_j j n_j.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Free,
    Tilt(TiltSpec),
    Drive(DriveSchedule),
}

impl From<TiltSpec> for Forcing {
    fn from(t: TiltSpec) -> Self {
        Forcing::Tilt(t)
    }
}

impl From<DriveSchedule> for Forcing {
    fn from(d: DriveSchedule) -> Self {
        Forcing::Drive(d)
    }
}

impl Forcing {
    pub fn field(&self, t: f64) -> f64 {
        match self {
            Forcing::Free => 0.0,
            Forcing::Tilt(tilt) => -tilt.v0,
            Forcing::Drive(d) => d.field(t),
        }
    }

    pub fn gauge(&self, t: f64) -> f64 {
        match self {
            Forcing::Free => 0.0,
            Forcing::Tilt(tilt) => -tilt.v0 * t,
            Forcing::Drive(d) => d.gauge(t),
        }
    }

    /// Times where the field may jump.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Forcing::Drive(d) => d.segments().iter().map(|s| s.t_start).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    pub snapshot_interval: f64,
}

impl StepperConfig {
    pub fn new(dt: f64, snapshot_interval: f64) -> Result<Self> {
        let c = StepperConfig {
            dt,
            snapshot_interval,
        };
        c.validate(&Forcing::Free)?;
        Ok(c)
    }

    pub fn validate(&self, forcing: &Forcing) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval.is_finite()) {
            return Err(Error::Config("snapshot interval must be positive".into()));
        }
        if self.dt > self.snapshot_interval {
            return Err(Error::Config(format!(
                "time step {} exceeds the snapshot interval {}",
                self.dt, self.snapshot_interval
            )));
        }
        if let Forcing::Drive(d) = forcing {
            let limit = d.period() / 128.0;
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "time step {} too coarse for the drive (need ≤ period/128 = {limit})",
                    self.dt
                )));
            }
        }
        Ok(())
    }
}

fn check_forward(state: &WaveState, t_final: f64) -> Result<()> {
    if !t_final.is_finite() || t_final < state.time() {
        return Err(Error::Domain(format!(
            "cannot evolve from t = {} back to t = {t_final}",
            state.time()
        )));
    }
    Ok(())
}

/// Exact evolution under the free lattice Hamiltonian.
pub fn evolve_free_exact(state: &WaveState, t_final: f64) -> Result<WaveState> {
    evolve_free_exact_with_hopping(state, t_final, HOPPING)
}

/// Exact free evolution with band −2·hopping·cos k, e.g. the Floquet
/// effective hopping J·J0(K0).
pub fn evolve_free_exact_with_hopping(
    state: &WaveState,
    t_final: f64,
    hopping: f64,
) -> Result<WaveState> {
    check_forward(state, t_final)?;
    let elapsed = t_final - state.time();
    let mut out = state.clone();
    out.set_time(t_final);
    if elapsed == 0.0 {
        return Ok(out);
    }
    let n = state.grid().len();
    let fft = FftPair::new(n);
    let buf = out.amplitudes_mut();
    fft.forward(buf);
    for (m, c) in buf.iter_mut().enumerate() {
        let k = 2.0 * PI * m as f64 / n as f64;
        *c *= Complex64::from_polar(1.0, 2.0 * hopping * k.cos() * elapsed);
    }
    fft.inverse(buf);
    Ok(out)
}

/// Running ∫cos A and ∫sin A by composite Simpson, split at field breakpoints.
struct GaugeIntegrals<'a> {
    forcing: &'a Forcing,
    breakpoints: Vec<f64>,
    max_step: f64,
    time: f64,
    cos_integral: f64,
    sin_integral: f64,
}

impl<'a> GaugeIntegrals<'a> {
    fn new(forcing: &'a Forcing, t0: f64, max_step: f64) -> Self {
        GaugeIntegrals {
            forcing,
            breakpoints: forcing.breakpoints(),
            max_step,
            time: t0,
            cos_integral: 0.0,
            sin_integral: 0.0,
        }
    }

    fn advance_to(&mut self, t1: f64) {
        let mut a = self.time;
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .copied()
            .filter(|&b| b > a && b < t1)
            .collect();
        cuts.push(t1);
        for b in cuts {
            self.simpson(a, b);
            a = b;
        }
        self.time = t1;
    }

    fn simpson(&mut self, a: f64, b: f64) {
        if b <= a {
            return;
        }
        let mut steps = ((b - a) / self.max_step).ceil() as usize;
        steps += steps % 2;
        let steps = steps.max(2);
        let h = (b - a) / steps as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for i in 0..=steps {
            // sample just inside the interval so a jump at b is not picked up
            let t = if i == steps { b - 1e-13 * h } else { a + i as f64 * h };
            let w = if i == 0 || i == steps {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let (sa, ca) = self.forcing.gauge(t).sin_cos();
            c += w * ca;
            s += w * sa;
        }
        self.cos_integral += c * h / 3.0;
        self.sin_integral += s * h / 3.0;
    }
}

/// Exact evolution under H_latt + F(t) Σ_j j n_j on the periodic closure of
/// the grid. Returns lab-frame snapshots every `snapshot_interval` starting
/// with the input state, always including `t_final`.
pub fn evolve_gauged_exact(
    state: &WaveState,
    forcing: impl Into<Forcing>,
    t_final: f64,
    config: StepperConfig,
) -> Result<Vec<WaveState>> {
    let forcing = forcing.into();
    config.validate(&forcing)?;
    check_forward(state, t_final)?;
    let times = snapshot_times(state.time(), t_final, config.snapshot_interval);
    let mut out = Vec::with_capacity(times.len());
    evolve_gauged_streaming(state, &forcing, &times, config.dt, |s| {
        out.push(s);
        Ok(())
    })?;
    Ok(out)
}

/// Snapshot times t0, t0 + Δ, …, ending exactly at t_final.
pub fn snapshot_times(t0: f64, t_final: f64, interval: f64) -> Vec<f64> {
    let count = ((t_final - t0) / interval + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|i| t0 + i as f64 * interval).collect();
    if t_final - times[times.len() - 1] > 1e-9 * interval {
        times.push(t_final);
    }
    times
}

/// Streams lab-frame states at the given increasing `times` (the first of
/// which must equal the state's time) into `sink`.
pub fn evolve_gauged_streaming<F>(
    state: &WaveState,
    forcing: &Forcing,
    times: &[f64],
    max_step: f64,
    mut sink: F,
) -> Result<()>
where
    F: FnMut(WaveState) -> Result<()>,
{
    let Some(&t0) = times.first() else {
        return Ok(());
    };
    if (t0 - state.time()).abs() > 1e-12 {
        return Err(Error::Domain("first snapshot time must equal the state time".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("snapshot times must be non-decreasing".into()));
    }
    let grid = *state.grid();
    let n = grid.len();
    let fft = FftPair::new(n);
    let sites: Vec<f64> = grid.sites().map(|j| j as f64).collect();

    // gauged amplitudes at t0 in momentum space
    let a0 = forcing.gauge(t0);
    let mut spectrum: Vec<Complex64> = state
        .amplitudes()
        .iter()
        .zip(&sites)
        .map(|(a, j)| a * Complex64::from_polar(1.0, j * a0))
        .collect();
    fft.forward(&mut spectrum);
    let (cos_k, sin_k): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|m| (2.0 * PI * m as f64 / n as f64).sin_cos())
        .map(|(s, c)| (c, s))
        .unzip();

    let mut integrals = GaugeIntegrals::new(forcing, t0, max_step);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for &t in times {
        integrals.advance_to(t);
        let (ci, si) = (integrals.cos_integral, integrals.sin_integral);
        for m in 0..n {
            let phase = 2.0 * HOPPING * (cos_k[m] * ci + sin_k[m] * si);
            buf[m] = spectrum[m] * Complex64::from_polar(1.0, phase);
        }
        fft.inverse(&mut buf);
        let a = forcing.gauge(t);
        let amps = buf
            .iter()
            .zip(&sites)
            .map(|(c, j)| c * Complex64::from_polar(1.0, -j * a))
            .collect();
        sink(WaveState::new(grid, amps, t)?)?;
    }
    Ok(())
}

/// One implicit-midpoint (Cayley) step (1 + i dt H/2) ψ′ = (1 − i dt H/2) ψ
/// on the open chain with hopping −J and the given diagonal potential.
pub fn step_crank_nicolson(state: &WaveState, site_potential: &[f64], dt: f64) -> Result<WaveState> {
    let mut out = state.clone();
    let mut solver = TridiagonalCayley::new(state.grid().len());
    solver.step(out.amplitudes_mut(), site_potential, dt)?;
    out.set_time(state.time() + dt);
    Ok(out)
}

/// Repeated Crank–Nicolson steps under a forcing, with the potential
/// evaluated at each step midpoint. The potential is applied relative to
/// `reference_site` and the resulting uniform phase is restored at the end,
/// which keeps the diagonal small for a packet near the reference.
pub fn evolve_crank_nicolson(
    state: &WaveState,
    forcing: &Forcing,
    t_final: f64,
    dt: f64,
    reference_site: i64,
) -> Result<WaveState> {
    check_forward(state, t_final)?;
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let t0 = state.time();
    let steps = ((t_final - t0) / dt).round().max(1.0) as usize;
    let h = (t_final - t0) / steps as f64;
    let offsets: Vec<f64> = state
        .grid()
        .sites()
        .map(|j| (j - reference_site) as f64)
        .collect();
    let mut out = state.clone();
    let mut solver = TridiagonalCayley::new(offsets.len());
    let mut potential = vec![0.0; offsets.len()];
    for s in 0..steps {
        let tm = t0 + (s as f64 + 0.5) * h;
        let f = forcing.field(tm);
        potential
            .iter_mut()
            .zip(&offsets)
            .for_each(|(v, o)| *v = f * o);
        solver.step(out.amplitudes_mut(), &potential, h)?;
    }
    let shift = -(reference_site as f64) * (forcing.gauge(t_final) - forcing.gauge(t0));
    let rot = Complex64::from_polar(1.0, shift);
    out.amplitudes_mut().iter_mut().for_each(|a| *a *= rot);
    out.set_time(t_final);
    Ok(out)
}

/// Thomas-algorithm workspace for the Cayley step.
struct TridiagonalCayley {
    rhs: Vec<Complex64>,
    c_prime: Vec<Complex64>,
}

impl TridiagonalCayley {
    fn new(n: usize) -> Self {
        TridiagonalCayley {
            rhs: vec![Complex64::new(0.0, 0.0); n],
            c_prime: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    fn step(&mut self, psi: &mut [Complex64], potential: &[f64], dt: f64) -> Result<()> {
        let n = psi.len();
        if potential.len() != n {
            return Err(Error::Config(format!(
                "potential has {} entries for {} sites",
                potential.len(),
                n
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let i_half = Complex64::new(0.0, 0.5 * dt);
        let off = -HOPPING;
        // rhs = (1 − i dt/2 H) ψ
        for j in 0..n {
            let mut h_psi = potential[j] * psi[j];
            if j > 0 {
                h_psi += off * psi[j - 1];
            }
            if j + 1 < n {
                h_psi += off * psi[j + 1];
            }
            self.rhs[j] = psi[j] - i_half * h_psi;
        }
        // (1 + i dt/2 H) ψ′ = rhs
        let sub = i_half * off;
        let sup = sub;
        let mut denom = Complex64::new(1.0, 0.0) + i_half * potential[0];
        for j in 0..n {
            if j > 0 {
                denom = Complex64::new(1.0, 0.0) + i_half * potential[j] - sub * self.c_prime[j - 1];
            }
            if denom.norm() < 1e-300 {
                return Err(Error::Internal(format!("singular Cayley pivot at row {j}")));
            }
            self.c_prime[j] = sup / denom;
            let prev = if j > 0 { self.rhs[j - 1] } else { Complex64::new(0.0, 0.0) };
            self.rhs[j] = (self.rhs[j] - sub * prev) / denom;
        }
        psi[n - 1] = self.rhs[n - 1];
        for j in (0..n - 1).rev() {
            psi[j] = self.rhs[j] - self.c_prime[j] * psi[j + 1];
        }
        Ok(())
    }
}

/// Floquet-renormalised hopping J·J0(K0).
pub fn effective_tunneling(k0: f64) -> Result<f64> {
    Ok(HOPPING * bessel_j0(k0)?)
}

/// Ratio of the undriven to the driven maximum velocity, 1/J0(K0).
pub fn refractive_index(k0: f64) -> Result<f64> {
    let j0 = bessel_j0(k0)?;
    if j0.abs() < DIVERGENCE_THRESHOLD {
        return Err(Error::Divergence { k0, value: j0 });
    }
    Ok(1.0 / j0)
}
