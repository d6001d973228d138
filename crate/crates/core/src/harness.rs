//! Scenario configuration and end-to-end runs: build the initial state, pick
//! the propagator, stream snapshots through the diagnostics and write the
//! run directory.
//!
//! Files per run: `density.csv` (t,site,density), `trajectory.csv`
//! (t,position,velocity,acceleration), `momentum.csv` (t,k,density; bloch
//! only), `fit.txt` (analysis results as TOML) and `meta.txt` (config echo,
//! version and timing as TOML). Map rows below [`MAP_FLOOR`] are omitted.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{center_of_mass, differentiate, MomentumDrift, PeakTracker, PeakTrajectory};
use crate::error::{Error, Result};
use crate::fitting::{bloch_com_reference, fit_hyperbolic, fit_scaling, FitMethod, RelativisticFit, ScalingLaw};
use crate::lattice::{momentum_density, LatticeGrid, WaveState, UNITS, V_MAX};
use crate::propagate::{evolve_gauged_streaming, snapshot_times, DriveSchedule, Forcing, StepperConfig, TiltSpec};
use crate::special::bessel_j0;
use crate::states::{build_airy_state, build_gaussian_state, imprint_phase, ApertureSpec};

/// Sites at each grid end watched for probability leaking to the edge.
pub const BOUNDARY_WIDTH: usize = 10;
pub const BOUNDARY_THRESHOLD: f64 = 1e-8;

/// Density and momentum-map entries below this are not written.
pub const MAP_FLOOR: f64 = 1e-12;

/// Segment velocities skip this long after each drive switch and before the
/// next one.
pub const SEGMENT_MARGIN: f64 = 2.0;

/// Extra empty sites beyond the light cone of the aperture edges.
const PAD_EXTRA: i64 = 100;

/// Continuum time covered by each sweep member; see [`sweep_t_max`].
pub const SWEEP_CONTINUUM_TIME: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    AiryFree,
    AiryFit,
    ScalingSweep,
    Bloch,
    Driven,
    Summary,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::AiryFree => "airy-free",
            Scenario::AiryFit => "airy-fit",
            Scenario::ScalingSweep => "scaling-sweep",
            Scenario::Bloch => "bloch",
            Scenario::Driven => "driven",
            Scenario::Summary => "summary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub dx: f64,
    pub j_min: i64,
    pub j_max: i64,
    pub t_max: f64,
    /// Quadrature step of the phase integrals.
    pub dt: f64,
    /// Spacing of tracked snapshots.
    pub snapshot_interval: f64,
    /// Spacing of density/momentum map rows; `None` disables the maps.
    #[serde(default)]
    pub density_interval: Option<f64>,
    #[serde(default)]
    pub aperture: Option<ApertureSpec>,
    #[serde(default)]
    pub drive: Option<DriveSchedule>,
    #[serde(default)]
    pub tilt: Option<TiltSpec>,
    #[serde(default)]
    pub kick_phi: Option<f64>,
    /// Gaussian width in position units.
    #[serde(default)]
    pub gaussian_width: Option<f64>,
    #[serde(default)]
    pub dx_list: Option<Vec<f64>>,
}

impl ScenarioConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        let base = ScenarioConfig {
            scenario,
            dx: 0.2,
            j_min: -2500,
            j_max: 500,
            t_max: 300.0,
            dt: 0.02,
            snapshot_interval: 0.25,
            density_interval: Some(1.0),
            aperture: None,
            drive: None,
            tilt: None,
            kick_phi: None,
            gaussian_width: None,
            dx_list: None,
        };
        let bloch_tilt = Some(TiltSpec { v0: 2.0 * PI / 1000.0 });
        match scenario {
            Scenario::AiryFree | Scenario::AiryFit => ScenarioConfig {
                aperture: Some(ApertureSpec::hard()),
                ..base
            },
            Scenario::ScalingSweep => ScenarioConfig {
                aperture: Some(ApertureSpec::hard()),
                t_max: 1000.0,
                density_interval: None,
                dx_list: Some(vec![0.2, 0.15, 0.1, 0.05]),
                ..base
            },
            Scenario::Bloch => ScenarioConfig {
                j_min: -400,
                j_max: 1100,
                t_max: 1000.0,
                tilt: bloch_tilt,
                gaussian_width: Some(4.0),
                ..base
            },
            Scenario::Driven => {
                let omega = 2.0 * PI;
                let drive = DriveSchedule::new(
                    omega,
                    DriveSchedule::parse_segments("0:0.5,30:1.691,60:0.5").expect("static schedule"),
                )
                .expect("static schedule");
                ScenarioConfig {
                    t_max: 90.0,
                    dt: (2.0 * PI / omega) / 256.0,
                    aperture: Some(ApertureSpec::hard()),
                    drive: Some(drive),
                    kick_phi: Some(1.45),
                    ..base
                }
            }
            Scenario::Summary => ScenarioConfig {
                aperture: Some(ApertureSpec::hard()),
                tilt: bloch_tilt,
                gaussian_width: Some(4.0),
                ..base
            },
        }
    }

    pub fn grid(&self) -> Result<LatticeGrid> {
        LatticeGrid::new(self.dx, self.j_min, self.j_max)
    }

    fn forcing(&self) -> Forcing {
        match (&self.drive, &self.tilt) {
            (Some(d), _) if self.scenario == Scenario::Driven => Forcing::Drive(d.clone()),
            (_, Some(t)) if self.scenario == Scenario::Bloch => Forcing::Tilt(*t),
            _ => Forcing::Free,
        }
    }

    fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            snapshot_interval: self.snapshot_interval,
        }
    }

    /// Checks values and that exactly the scenario's fields are present.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.grid()?;
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        self.stepper().validate(&self.forcing())?;
        if let Some(di) = self.density_interval {
            let ratio = di / self.snapshot_interval;
            if !(ratio.round() >= 1.0) || (ratio - ratio.round()).abs() > 1e-9 {
                return bad(format!(
                    "density interval {di} must be a positive multiple of the snapshot interval {}",
                    self.snapshot_interval
                ));
            }
        }
        if let Some(a) = &self.aperture {
            a.validate()?;
        }
        if let Some(t) = &self.tilt {
            TiltSpec::new(t.v0)?;
            if t.v0 == 0.0 {
                return bad("tilt must be nonzero".into());
            }
        }
        if let Some(phi) = self.kick_phi {
            if !(phi.abs() <= PI) {
                return bad(format!("kick phase must satisfy |phi| <= pi, got {phi}"));
            }
        }
        if let Some(w) = self.gaussian_width {
            if !(w >= self.dx) {
                return bad(format!("Gaussian width {w} is below the lattice spacing"));
            }
        }
        if let Some(list) = &self.dx_list {
            if list.is_empty() || list.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return bad(format!("dx list must hold positive spacings, got {list:?}"));
            }
        }

        let present = [
            ("aperture", self.aperture.is_some()),
            ("drive", self.drive.is_some()),
            ("tilt", self.tilt.is_some()),
            ("kick_phi", self.kick_phi.is_some()),
            ("gaussian_width", self.gaussian_width.is_some()),
            ("dx_list", self.dx_list.is_some()),
        ];
        let required: &[&str] = match self.scenario {
            Scenario::AiryFree | Scenario::AiryFit => &["aperture"],
            Scenario::ScalingSweep => &["aperture", "dx_list"],
            Scenario::Bloch => &["tilt", "gaussian_width"],
            Scenario::Driven => &["aperture", "drive", "kick_phi"],
            Scenario::Summary => &["aperture", "tilt", "gaussian_width"],
        };
        for (name, is_set) in present {
            let wanted = required.contains(&name);
            if wanted && !is_set {
                return bad(format!("scenario {} needs {name}", self.scenario));
            }
            if !wanted && is_set {
                return bad(format!("scenario {} does not take {name}", self.scenario));
            }
        }
        Ok(())
    }
}

/// Velocity of one drive segment, measured by a straight-line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentVelocity {
    pub t_start: f64,
    pub t_end: f64,
    pub k0: f64,
    pub velocity: f64,
    /// Velocity relative to the first segment.
    pub ratio: f64,
    /// J0(K0) / J0(K0 of the first segment).
    pub predicted_ratio: f64,
    /// Largest excursion of the peak from its position at `t_start`.
    pub max_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochReport {
    pub v0: f64,
    pub amplitude: f64,
    /// max |x_com − reference| / amplitude.
    pub max_com_deviation: f64,
    pub momentum_slope: f64,
    pub wrap_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub dx: f64,
    pub t_max: f64,
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub method: Option<FitMethod>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub scaling: std::result::Result<ScalingLaw, String>,
}

/// In-memory result of a run; the maps live only in the output files.
#[derive(Debug, Clone, Default)]
pub struct RunArtifact {
    pub trajectory: Option<PeakTrajectory>,
    pub fit: Option<RelativisticFit>,
    pub momentum: Option<MomentumDrift>,
    pub segments: Vec<SegmentVelocity>,
    pub bloch: Option<BlochReport>,
    pub sweep: Option<SweepReport>,
    pub max_boundary_occupation: f64,
    /// Largest |velocity| of the tracked quantity.
    pub max_speed: Option<f64>,
    pub files: Vec<PathBuf>,
}

impl RunArtifact {
    /// True when a two-parameter fit was downgraded to the parabola.
    pub fn fit_fell_back(&self) -> bool {
        self.fit.as_ref().is_some_and(|f| f.is_fallback())
    }

    /// True when a sweep member failed and the table is partial.
    pub fn sweep_incomplete(&self) -> bool {
        self.sweep
            .as_ref()
            .is_some_and(|s| s.rows.iter().any(|r| r.error.is_some()))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::Serialize(e.to_string()))
}

#[derive(Serialize)]
struct MapRow {
    t: f64,
    site: i64,
    density: f64,
}

#[derive(Serialize)]
struct MomentumRow {
    t: f64,
    k: f64,
    density: f64,
}

/// Streams the run from `state` up to t_max, checking the grid edges and
/// writing map rows every `density_interval` within `[map_lo, map_hi]`.
struct Stream<'a> {
    config: &'a ScenarioConfig,
    density: Option<csv::Writer<BufWriter<File>>>,
    momentum: Option<csv::Writer<BufWriter<File>>>,
    map_range: (i64, i64),
    max_occupation: f64,
}

impl<'a> Stream<'a> {
    fn new(config: &'a ScenarioConfig, out: &Path, with_momentum: bool) -> Result<Self> {
        let open = |name: &str| -> Result<csv::Writer<BufWriter<File>>> {
            Ok(csv::Writer::from_writer(create(&out.join(name))?))
        };
        let maps = config.density_interval.is_some();
        Ok(Stream {
            config,
            density: if maps { Some(open("density.csv")?) } else { None },
            momentum: if maps && with_momentum { Some(open("momentum.csv")?) } else { None },
            map_range: (config.j_min, config.j_max),
            max_occupation: 0.0,
        })
    }

    fn run<F>(&mut self, state: &WaveState, forcing: &Forcing, mut visit: F) -> Result<()>
    where
        F: FnMut(&WaveState) -> Result<()>,
    {
        let cfg = self.config;
        // uniform grid only: a trailing partial interval would break differencing
        let mut times = snapshot_times(0.0, cfg.t_max, cfg.snapshot_interval);
        if times.len() > 2 {
            let (a, b) = (times[times.len() - 2], times[times.len() - 1]);
            if b - a < cfg.snapshot_interval * (1.0 - 1e-9) {
                times.pop();
            }
        }
        let map_every = cfg
            .density_interval
            .map(|d| (d / cfg.snapshot_interval).round() as usize);
        let mut index = 0usize;
        evolve_gauged_streaming(state, forcing, &times, cfg.dt, |s| {
            let occ = s.boundary_occupation(BOUNDARY_WIDTH);
            self.max_occupation = self.max_occupation.max(occ);
            if occ >= BOUNDARY_THRESHOLD {
                return Err(Error::GridTooSmall {
                    time: s.time(),
                    occupation: occ,
                    threshold: BOUNDARY_THRESHOLD,
                });
            }
            if map_every.is_some_and(|m| index.is_multiple_of(m)) {
                self.write_maps(&s)?;
            }
            index += 1;
            visit(&s)
        })?;
        if let Some(w) = self.density.as_mut() {
            w.flush().map_err(|e| Error::io("density.csv", e))?;
        }
        if let Some(w) = self.momentum.as_mut() {
            w.flush().map_err(|e| Error::io("momentum.csv", e))?;
        }
        Ok(())
    }

    fn write_maps(&mut self, s: &WaveState) -> Result<()> {
        if let Some(w) = self.density.as_mut() {
            let (lo, hi) = self.map_range;
            for (j, a) in s.grid().sites().zip(s.amplitudes()) {
                let d = a.norm_sqr();
                if j >= lo && j <= hi && d >= MAP_FLOOR {
                    w.serialize(MapRow {
                        t: s.time(),
                        site: j,
                        density: d,
                    })?;
                }
            }
        }
        if let Some(w) = self.momentum.as_mut() {
            for (k, d) in momentum_density(s) {
                if d >= MAP_FLOOR {
                    w.serialize(MomentumRow {
                        t: s.time(),
                        k,
                        density: d,
                    })?;
                }
            }
        }
        Ok(())
    }
}

fn prepare_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

/// Grid widened on both sides by the distance v_max·t_max, so that fronts
/// launched from the aperture edges never reach the periodic seam.
fn padded_grid(config: &ScenarioConfig) -> Result<LatticeGrid> {
    let pad = (V_MAX * config.t_max).ceil() as i64 + PAD_EXTRA;
    LatticeGrid::new(config.dx, config.j_min - pad, config.j_max + pad)
}

fn write_trajectory(out: &Path, traj: &PeakTrajectory, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join("trajectory.csv");
    traj.write_csv(create(&path)?)?;
    files.push(path);
    Ok(())
}

#[derive(Serialize)]
struct Meta<'a> {
    program: &'static str,
    version: &'static str,
    wall_time_seconds: f64,
    simulation_j_min: i64,
    simulation_j_max: i64,
    max_boundary_occupation: f64,
    units: crate::lattice::UnitSystem,
    config: &'a ScenarioConfig,
}

fn write_meta(
    out: &Path,
    config: &ScenarioConfig,
    sim: Option<LatticeGrid>,
    art: &mut RunArtifact,
    started: Instant,
) -> Result<()> {
    let (lo, hi) = sim.map_or((config.j_min, config.j_max), |g| (g.j_min(), g.j_max()));
    let meta = Meta {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        simulation_j_min: lo,
        simulation_j_max: hi,
        max_boundary_occupation: art.max_boundary_occupation,
        units: UNITS,
        config,
    };
    let path = out.join("meta.txt");
    write_text(&path, &to_toml(&meta)?)?;
    art.files.push(path);
    Ok(())
}

fn max_abs(values: Option<&[f64]>) -> Option<f64> {
    values.map(|v| v.iter().fold(0.0_f64, |m, x| m.max(x.abs())))
}

/// Runs one scenario and writes its files under `out`.
pub fn run_scenario(config: &ScenarioConfig, out: &Path) -> Result<RunArtifact> {
    config.validate()?;
    prepare_dir(out)?;
    let started = Instant::now();
    log::info!("running {} into {}", config.scenario, out.display());
    match config.scenario {
        Scenario::AiryFree | Scenario::AiryFit | Scenario::Driven => run_airy(config, out, started),
        Scenario::Bloch => run_bloch(config, out, started),
        Scenario::Summary => run_summary(config, out, started),
        Scenario::ScalingSweep => {
            let list = config.dx_list.clone().unwrap_or_default();
            let report = sweep_scaling(&list, config, out)?;
            let mut art = RunArtifact {
                sweep: Some(report),
                files: vec![out.join("sweep.csv"), out.join("scaling.txt")],
                ..Default::default()
            };
            write_meta(out, config, None, &mut art, started)?;
            Ok(art)
        }
    }
}

fn run_airy(config: &ScenarioConfig, out: &Path, started: Instant) -> Result<RunArtifact> {
    let aperture = config
        .aperture
        .ok_or_else(|| Error::Config("Airy scenario needs an aperture".into()))?;
    let mut state = build_airy_state(config.grid()?, aperture)?;
    if let Some(phi) = config.kick_phi {
        state = imprint_phase(&state, phi)?;
    }
    let sim = padded_grid(config)?;
    let state = state.embed(sim)?;
    let forcing = config.forcing();

    let mut tracker = PeakTracker::new();
    let mut stream = Stream::new(config, out, false)?;
    stream.run(&state, &forcing, |s| tracker.push(s).map(|_| ()))?;
    let mut art = RunArtifact {
        max_boundary_occupation: stream.max_occupation,
        ..Default::default()
    };
    drop(stream);
    if config.density_interval.is_some() {
        art.files.push(out.join("density.csv"));
    }

    let raw = tracker.finish()?;
    let traj = differentiate(&raw, 2)?;
    art.max_speed = max_abs(traj.velocities());
    write_trajectory(out, &traj, &mut art.files)?;

    match config.scenario {
        Scenario::AiryFit => {
            let fit = fit_hyperbolic(&raw)?;
            let path = out.join("fit.txt");
            write_text(&path, &fit.to_toml()?)?;
            art.files.push(path);
            art.fit = Some(fit);
        }
        Scenario::Driven => {
            let drive = config.drive.as_ref().expect("validated");
            art.segments = segment_velocities(&raw, drive, config.t_max)?;
            #[derive(Serialize)]
            struct Report<'a> {
                segments: &'a [SegmentVelocity],
            }
            let path = out.join("fit.txt");
            write_text(&path, &to_toml(&Report { segments: &art.segments })?)?;
            art.files.push(path);
        }
        _ => {}
    }
    art.trajectory = Some(traj);
    write_meta(out, config, Some(sim), &mut art, started)?;
    Ok(art)
}

fn line_slope(t: &[f64], x: &[f64]) -> Option<f64> {
    let n = t.len() as f64;
    if t.len() < 3 {
        return None;
    }
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in t.iter().zip(x) {
        sxy += (a - tm) * (b - xm);
        sxx += (a - tm) * (a - tm);
    }
    Some(sxy / sxx)
}

/// Straight-line velocity of each drive segment over
/// [t_start + margin, t_end − margin].
pub fn segment_velocities(
    traj: &PeakTrajectory,
    drive: &DriveSchedule,
    t_max: f64,
) -> Result<Vec<SegmentVelocity>> {
    let segs = drive.segments();
    let (t, x) = (traj.times(), traj.positions());
    let mut out: Vec<SegmentVelocity> = Vec::with_capacity(segs.len());
    for (i, seg) in segs.iter().enumerate() {
        if seg.t_start >= t_max {
            break;
        }
        let t_end = segs.get(i + 1).map_or(t_max, |s| s.t_start).min(t_max);
        let inside: Vec<usize> = (0..t.len())
            .filter(|&n| t[n] >= seg.t_start + SEGMENT_MARGIN && t[n] <= t_end - SEGMENT_MARGIN)
            .collect();
        let ts: Vec<f64> = inside.iter().map(|&n| t[n]).collect();
        let xs: Vec<f64> = inside.iter().map(|&n| x[n]).collect();
        let velocity = line_slope(&ts, &xs).ok_or_else(|| {
            Error::Config(format!(
                "drive segment starting at {} is too short to measure a velocity",
                seg.t_start
            ))
        })?;
        let start = (0..t.len())
            .find(|&n| t[n] >= seg.t_start)
            .map_or(x[0], |n| x[n]);
        let max_drift = (0..t.len())
            .filter(|&n| t[n] >= seg.t_start && t[n] <= t_end)
            .map(|n| (x[n] - start).abs())
            .fold(0.0, f64::max);
        let (v_ref, j_ref) = match out.first() {
            Some(first) => (first.velocity, bessel_j0(first.k0)?),
            None => (velocity, bessel_j0(seg.k0)?),
        };
        out.push(SegmentVelocity {
            t_start: seg.t_start,
            t_end,
            k0: seg.k0,
            velocity,
            ratio: velocity / v_ref,
            predicted_ratio: bessel_j0(seg.k0)? / j_ref,
            max_drift,
        });
    }
    Ok(out)
}

fn run_bloch(config: &ScenarioConfig, out: &Path, started: Instant) -> Result<RunArtifact> {
    let tilt = config.tilt.expect("validated");
    let width = config.gaussian_width.expect("validated");
    let grid = config.grid()?;
    let state = build_gaussian_state(grid, 0.0, width)?;
    let forcing = config.forcing();

    let mut times = Vec::new();
    let mut com = Vec::new();
    let mut drift = MomentumDrift::default();
    let mut stream = Stream::new(config, out, true)?;
    stream.run(&state, &forcing, |s| {
        times.push(s.time());
        com.push(center_of_mass(s));
        drift.push(s).map(|_| ())
    })?;
    let mut art = RunArtifact {
        max_boundary_occupation: stream.max_occupation,
        ..Default::default()
    };
    drop(stream);
    if config.density_interval.is_some() {
        art.files.push(out.join("density.csv"));
        art.files.push(out.join("momentum.csv"));
    }

    let x0 = com[0];
    let amplitude = 4.0 / tilt.v0.abs();
    let mut worst: f64 = 0.0;
    for (t, x) in times.iter().zip(&com) {
        let reference = bloch_com_reference(tilt.v0, *t)?;
        worst = worst.max((x - x0 - reference).abs());
    }
    let report = BlochReport {
        v0: tilt.v0,
        amplitude,
        max_com_deviation: worst / amplitude,
        momentum_slope: drift.slope()?,
        wrap_time: drift.first_wrap_time(),
    };

    let traj = differentiate(&PeakTrajectory::new(times, com)?, 2)?;
    art.max_speed = max_abs(traj.velocities());
    write_trajectory(out, &traj, &mut art.files)?;
    let path = out.join("fit.txt");
    write_text(&path, &to_toml(&report)?)?;
    art.files.push(path);
    art.trajectory = Some(traj);
    art.momentum = Some(drift);
    art.bloch = Some(report);
    write_meta(out, config, None, &mut art, started)?;
    Ok(art)
}

#[derive(Serialize)]
struct SummaryRow {
    t: f64,
    continuum_velocity: f64,
    lattice_velocity: f64,
    bloch_velocity: f64,
}

/// Continuum, lattice and tilted-lattice velocities on one time axis:
/// runs an Airy fit in `airy/` and a Bloch run in `bloch/`.
fn run_summary(config: &ScenarioConfig, out: &Path, started: Instant) -> Result<RunArtifact> {
    let airy_cfg = ScenarioConfig {
        scenario: Scenario::AiryFit,
        tilt: None,
        gaussian_width: None,
        ..config.clone()
    };
    let bloch_defaults = ScenarioConfig::defaults(Scenario::Bloch);
    let bloch_cfg = ScenarioConfig {
        scenario: Scenario::Bloch,
        aperture: None,
        j_min: bloch_defaults.j_min,
        j_max: bloch_defaults.j_max,
        ..config.clone()
    };
    let airy = run_scenario(&airy_cfg, &out.join("airy"))?;
    let bloch = run_scenario(&bloch_cfg, &out.join("bloch"))?;

    let fit = airy.fit.clone().expect("airy-fit always reports a fit");
    let at = airy.trajectory.as_ref().expect("trajectory");
    let bt = bloch.trajectory.as_ref().expect("trajectory");
    let path = out.join("summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let (av, bv) = (at.velocities().unwrap_or(&[]), bt.velocities().unwrap_or(&[]));
    for i in 0..at.len().min(bt.len()) {
        w.serialize(SummaryRow {
            t: at.times()[i],
            continuum_velocity: fit.alpha * at.times()[i],
            lattice_velocity: av[i],
            bloch_velocity: bv[i],
        })?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let mut art = RunArtifact {
        fit: Some(fit),
        bloch: bloch.bloch,
        max_boundary_occupation: airy.max_boundary_occupation.max(bloch.max_boundary_occupation),
        files: vec![path],
        ..Default::default()
    };
    art.files.extend(airy.files);
    art.files.extend(bloch.files);
    write_meta(out, config, None, &mut art, started)?;
    Ok(art)
}

/// Run length used for a sweep member: a fixed continuum time
/// t·Δx² = [`SWEEP_CONTINUUM_TIME`]/2, in whole time units, capped at `t_cap`.
pub fn sweep_t_max(dx: f64, t_cap: f64) -> f64 {
    (SWEEP_CONTINUUM_TIME / (2.0 * dx * dx) + 1e-9).floor().min(t_cap)
}

#[derive(Serialize)]
struct SweepCsvRow {
    dx: f64,
    t_max: f64,
    c: Option<f64>,
    alpha: Option<f64>,
    method: String,
    status: String,
}

#[derive(Serialize)]
struct ScalingText {
    exponent: Option<f64>,
    prefactor: Option<f64>,
    points: usize,
    error: Option<String>,
}

/// Runs an Airy fit per lattice spacing (concurrently, merged in input
/// order), writes `sweep.csv` and the power-law regression `scaling.txt`.
pub fn sweep_scaling(dx_list: &[f64], base: &ScenarioConfig, out: &Path) -> Result<SweepReport> {
    if dx_list.is_empty() || dx_list.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Config(format!("sweep needs positive spacings, got {dx_list:?}")));
    }
    prepare_dir(out)?;
    let rows: Vec<SweepRow> = dx_list
        .par_iter()
        .map(|&dx| {
            let t_max = sweep_t_max(dx, base.t_max);
            let member = ScenarioConfig {
                scenario: Scenario::AiryFit,
                dx,
                t_max,
                density_interval: None,
                dx_list: None,
                ..base.clone()
            };
            let dir = out.join(format!("dx_{dx}"));
            match run_scenario(&member, &dir) {
                Ok(art) => {
                    let fit = art.fit.expect("airy-fit reports a fit");
                    SweepRow {
                        dx,
                        t_max,
                        c: fit.c,
                        alpha: Some(fit.alpha),
                        method: Some(fit.method),
                        error: None,
                    }
                }
                Err(e) => {
                    log::error!("sweep member dx = {dx} failed: {e}");
                    SweepRow {
                        dx,
                        t_max,
                        c: None,
                        alpha: None,
                        method: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.alpha.filter(|a| *a > 0.0).map(|a| (r.dx, a)))
        .collect();
    let scaling = fit_scaling(&points).map_err(|e| e.to_string());

    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    for r in &rows {
        w.serialize(SweepCsvRow {
            dx: r.dx,
            t_max: r.t_max,
            c: r.c,
            alpha: r.alpha,
            method: r.method.map_or(String::new(), |m| m.to_string()),
            status: r.error.clone().map_or("ok".into(), |e| format!("error: {e}")),
        })?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let text = ScalingText {
        exponent: scaling.as_ref().ok().map(|s| s.exponent),
        prefactor: scaling.as_ref().ok().map(|s| s.prefactor),
        points: points.len(),
        error: scaling.as_ref().err().cloned(),
    };
    write_text(&out.join("scaling.txt"), &to_toml(&text)?)?;
    Ok(SweepReport { rows, scaling })
}

/// Process exit status for a finished or failed run.
pub fn exit_code(result: &Result<RunArtifact>) -> i32 {
    match result {
        Ok(art) if art.sweep_incomplete() => 3,
        Ok(art) if art.fit_fell_back() => 4,
        Ok(_) => 0,
        Err(Error::Config(_) | Error::Domain(_)) => 2,
        Err(_) => 3,
    }
}

/// Writes an initial-state density dump `t,site,density` (t = 0).
pub fn write_state_density<W: Write>(state: &WaveState, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (j, a) in state.grid().sites().zip(state.amplitudes()) {
        w.serialize(MapRow {
            t: state.time(),
            site: j,
            density: a.norm_sqr(),
        })?;
    }
    w.flush().map_err(|e| Error::io("density", e))?;
    Ok(())
}
