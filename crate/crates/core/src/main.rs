use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use airy_lattice::harness::{self, RunArtifact, Scenario, ScenarioConfig};
use airy_lattice::propagate::{DriveSchedule, TiltSpec};
use airy_lattice::{Error, Result};

#[derive(Parser)]
#[command(name = "airy-lattice", version, about = "Airy wavepackets on a tight-binding lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free Airy packet: density map and peak trajectory.
    Airy(Common),
    /// Free Airy packet with the relativistic trajectory fit.
    Fit(Common),
    /// Airy fits over several lattice spacings plus the power-law regression.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated lattice spacings.
        #[arg(long, value_delimiter = ',')]
        dx_list: Option<Vec<f64>>,
    },
    /// Gaussian packet in a tilted lattice.
    Bloch {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bloch: BlochArgs,
    },
    /// Kicked Airy packet under a piecewise sinusoidal drive.
    Driven {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        omega: Option<f64>,
        /// Drive segments as t0:K0,t1:K1,...
        #[arg(long, allow_hyphen_values = true)]
        schedule: Option<String>,
        /// Phase imprinted per site before the run.
        #[arg(long, allow_hyphen_values = true)]
        phi: Option<f64>,
    },
    /// Continuum, lattice and tilted-lattice velocities side by side.
    Summary {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bloch: BlochArgs,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Site range as jmin:jmax.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    /// hard or exp:GAMMA
    #[arg(long)]
    aperture: Option<String>,
    /// Output directory (default runs/<scenario>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    snapshot_interval: Option<f64>,
    /// Spacing of density/momentum map rows; 0 disables the maps.
    #[arg(long)]
    density_interval: Option<f64>,
}

#[derive(Args)]
struct BlochArgs {
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    /// Gaussian width in position units.
    #[arg(long)]
    width: Option<f64>,
}

fn parse_grid(text: &str) -> Result<(i64, i64)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::Config(format!("grid must be jmin:jmax, got '{text}'")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<i64>()
            .map_err(|e| Error::Config(format!("bad grid bound '{v}': {e}")))
    };
    Ok((p(a)?, p(b)?))
}

impl Common {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(dx) = self.dx {
            cfg.dx = dx;
        }
        if let Some(t) = self.tmax {
            cfg.t_max = t;
        }
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(g) = &self.grid {
            (cfg.j_min, cfg.j_max) = parse_grid(g)?;
        }
        if let Some(a) = &self.aperture {
            cfg.aperture = Some(a.parse()?);
        }
        if let Some(s) = self.snapshot_interval {
            cfg.snapshot_interval = s;
        }
        if let Some(d) = self.density_interval {
            cfg.density_interval = if d == 0.0 { None } else { Some(d) };
        }
        Ok(())
    }
}

impl BlochArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(v0) = self.v0 {
            cfg.tilt = Some(TiltSpec::new(v0)?);
        }
        if let Some(w) = self.width {
            cfg.gaussian_width = Some(w);
        }
        Ok(())
    }
}

fn build(command: &Command) -> Result<(ScenarioConfig, PathBuf)> {
    let (scenario, common) = match command {
        Command::Airy(c) => (Scenario::AiryFree, c),
        Command::Fit(c) => (Scenario::AiryFit, c),
        Command::Sweep { common, .. } => (Scenario::ScalingSweep, common),
        Command::Bloch { common, .. } => (Scenario::Bloch, common),
        Command::Driven { common, .. } => (Scenario::Driven, common),
        Command::Summary { common, .. } => (Scenario::Summary, common),
    };
    let mut cfg = ScenarioConfig::defaults(scenario);
    common.apply(&mut cfg)?;
    match command {
        Command::Sweep { dx_list: Some(list), .. } => cfg.dx_list = Some(list.clone()),
        Command::Bloch { bloch, .. } | Command::Summary { bloch, .. } => bloch.apply(&mut cfg)?,
        Command::Driven {
            omega,
            schedule,
            phi,
            common,
        } => {
            let current = cfg.drive.clone().expect("driven defaults carry a drive");
            let w = omega.unwrap_or(current.omega());
            let segments = match schedule {
                Some(text) => DriveSchedule::parse_segments(text)?,
                None => current.segments().to_vec(),
            };
            cfg.drive = Some(DriveSchedule::new(w, segments)?);
            if common.dt.is_none() {
                cfg.dt = (2.0 * PI / w) / 256.0;
            }
            if let Some(p) = phi {
                cfg.kick_phi = Some(*p);
            }
        }
        _ => {}
    }
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(scenario.to_string()));
    Ok((cfg, out))
}

fn report(art: &RunArtifact) {
    if let Some(fit) = &art.fit {
        match fit.c {
            Some(c) => println!("fit: alpha = {:.6}, c = {:.4}, method = {}", fit.alpha, c, fit.method),
            None => println!("fit: alpha = {:.6} (parabola fallback)", fit.alpha),
        }
        println!("fit: rms residual = {:.4} sites over t in [{}, {}]", fit.rms_residual, fit.t_range.0, fit.t_range.1);
    }
    for s in &art.segments {
        println!(
            "segment t = [{}, {}], K0 = {}: v = {:.4}, ratio = {:.4} (J0 ratio {:.4}), max drift {:.3}",
            s.t_start, s.t_end, s.k0, s.velocity, s.ratio, s.predicted_ratio, s.max_drift
        );
    }
    if let Some(b) = &art.bloch {
        println!(
            "bloch: max COM deviation = {:.4} of amplitude, momentum slope = {:.6} (V0 = {:.6}), wrap at t = {}",
            b.max_com_deviation,
            b.momentum_slope,
            b.v0,
            b.wrap_time.map_or("none".to_string(), |t| format!("{t:.2}"))
        );
    }
    if let Some(sweep) = &art.sweep {
        for r in &sweep.rows {
            match &r.error {
                Some(e) => println!("dx = {}: error: {e}", r.dx),
                None => println!(
                    "dx = {}: c = {}, alpha = {:.6}",
                    r.dx,
                    r.c.map_or("-".to_string(), |c| format!("{c:.3}")),
                    r.alpha.unwrap_or(f64::NAN)
                ),
            }
        }
        match &sweep.scaling {
            Ok(s) => println!("scaling: exponent = {:.4}, prefactor = {:.4}", s.exponent, s.prefactor),
            Err(e) => println!("scaling: {e}"),
        }
    }
    if let Some(v) = art.max_speed {
        println!("max |velocity| = {v:.4}");
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = build(&cli.command).and_then(|(cfg, out)| harness::run_scenario(&cfg, &out));
    match &result {
        Ok(art) => report(art),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(harness::exit_code(&result) as u8)
}
