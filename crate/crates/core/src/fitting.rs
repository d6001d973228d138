//! Relativistic kinematics: forward predictions on the hyperbolic worldline,
//! two-parameter trajectory fits with a parabolic fallback, the power-law
//! regression of α against Δx and the Bloch center-of-mass reference.

use serde::{Deserialize, Serialize};

use crate::diagnostics::PeakTrajectory;
use crate::error::{Error, Result};
use crate::lattice::HOPPING;

/// Fits with αt_max/c below this are not trusted to separate α from c.
pub const RELATIVISTIC_GATE: f64 = 0.3;

/// The fit window ends once the tracked peak density drops below this
/// fraction of its initial value.
pub const PEAK_DENSITY_CUTOFF: f64 = 0.2;

pub const MIN_FIT_POINTS: usize = 10;

const LM_INITIAL_DAMPING: f64 = 1e-3;
const LM_MAX_ITERATIONS: usize = 100;
const LM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Lab-frame position, velocity and acceleration at time t of a body with
/// proper acceleration α and limiting speed c, starting at rest at x = 0.
pub fn predict_relativistic(alpha: f64, c: f64, t: f64) -> Kinematics {
    let u = alpha * t / c;
    let s = (1.0 + u * u).sqrt();
    Kinematics {
        position: (c * c / alpha) * (u * u / (s + 1.0)),
        velocity: alpha * t / s,
        acceleration: alpha / (s * s * s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    Linearized,
    Refined,
    ParabolaFallback,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FitMethod::Linearized => "linearized",
            FitMethod::Refined => "refined",
            FitMethod::ParabolaFallback => "parabola-fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativisticFit {
    pub alpha: f64,
    /// Absent when the data did not reach the relativistic regime.
    pub c: Option<f64>,
    pub rms_residual: f64,
    pub method: FitMethod,
    pub n_points: usize,
    pub t_range: (f64, f64),
}

impl RelativisticFit {
    pub fn is_fallback(&self) -> bool {
        self.method == FitMethod::ParabolaFallback
    }

    /// Largest deviation of the fitted worldline from the hyperbola
    /// (αx/c² + 1)² − (αt/c)² = 1 over the fit window, expressed in position
    /// units as (c²/α)(√(1 + (αt/c)²) − (αx/c² + 1)).
    pub fn hyperbola_residual(&self, samples: usize) -> Option<f64> {
        let c = self.c?;
        let a = self.alpha;
        let (t0, t1) = self.t_range;
        let n = samples.max(2);
        let worst = (0..n)
            .map(|i| {
                let t = (t1 - t0) * i as f64 / (n - 1) as f64;
                let x = predict_relativistic(a, c, t).position;
                let u = a * t / c;
                (c * c / a) * ((1.0 + u * u).sqrt() - (a * x / (c * c) + 1.0))
            })
            .fold(0.0_f64, |m, r| m.max(r.abs()));
        Some(worst)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Times and positions relative to the first sample, truncated where the
/// peak density falls below [`PEAK_DENSITY_CUTOFF`] of its initial value.
fn prepare(trajectory: &PeakTrajectory) -> Result<(Vec<f64>, Vec<f64>, (f64, f64))> {
    let mut n = trajectory.len();
    if let Some(d) = trajectory.peak_densities() {
        if let Some(cut) = d.iter().position(|&p| p < PEAK_DENSITY_CUTOFF * d[0]) {
            n = cut;
        }
    }
    if n < MIN_FIT_POINTS {
        return Err(Error::Domain(format!(
            "trajectory fit needs at least {MIN_FIT_POINTS} points, got {n}"
        )));
    }
    let (t, x) = (trajectory.times(), trajectory.positions());
    let ts: Vec<f64> = t[..n].iter().map(|v| v - t[0]).collect();
    let xs: Vec<f64> = x[..n].iter().map(|v| v - x[0]).collect();
    Ok((ts, xs, (t[0], t[n - 1])))
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v * v;
        n += 1;
    }
    (s / n.max(1) as f64).sqrt()
}

fn hyperbola_rms(t: &[f64], x: &[f64], alpha: f64, c: f64) -> f64 {
    rms(t
        .iter()
        .zip(x)
        .map(|(&t, &x)| x - predict_relativistic(alpha, c, t).position))
}

/// Solves the 2×2 system [[a, b], [b, d]] p = r.
fn solve2(a: f64, b: f64, d: f64, r0: f64, r1: f64) -> Option<(f64, f64)> {
    let det = a * d - b * b;
    if det.abs() <= f64::EPSILON * (a * d).abs() || det == 0.0 {
        return None;
    }
    Some(((d * r0 - b * r1) / det, (a * r1 - b * r0) / det))
}

/// x = (α/2)t² − (α/(2c²))x² is linear in {t², x²}; ordinary least squares
/// without intercept gives a starting point. None if the curvature term has
/// the wrong sign.
fn linearized_start(t: &[f64], x: &[f64]) -> Option<(f64, f64)> {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &x) in t.iter().zip(x) {
        let (f1, f2) = (t * t, x * x);
        s11 += f1 * f1;
        s12 += f1 * f2;
        s22 += f2 * f2;
        r1 += f1 * x;
        r2 += f2 * x;
    }
    let (b1, b2) = solve2(s11, s12, s22, r1, r2)?;
    if !(b1 > 0.0 && b2 < 0.0) {
        return None;
    }
    Some((2.0 * b1, (b1 / -b2).sqrt()))
}

/// Levenberg–Marquardt on x(t) = (c²/α)(√(1+(αt/c)²) − 1) with Marquardt
/// scaling. Returns the refined parameters and whether any step was taken.
fn refine_hyperbola(t: &[f64], x: &[f64], start: (f64, f64)) -> ((f64, f64), bool) {
    let (mut alpha, mut c) = start;
    let mut cost = hyperbola_rms(t, x, alpha, c);
    let mut lambda = LM_INITIAL_DAMPING;
    let mut moved = false;
    for _ in 0..LM_MAX_ITERATIONS {
        let (mut jaa, mut jac, mut jcc, mut ga, mut gc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&t, &x) in t.iter().zip(x) {
            let u = alpha * t / c;
            let s = (1.0 + u * u).sqrt();
            let s_minus_1 = u * u / (s + 1.0);
            let model = (c * c / alpha) * s_minus_1;
            let da = -(c * c / (alpha * alpha)) * s_minus_1 + t * t / s;
            let dc = (2.0 * c / alpha) * s_minus_1 - alpha * t * t / (c * s);
            let r = x - model;
            jaa += da * da;
            jac += da * dc;
            jcc += dc * dc;
            ga += da * r;
            gc += dc * r;
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let Some((step_a, step_c)) =
                solve2(jaa * (1.0 + lambda), jac, jcc * (1.0 + lambda), ga, gc)
            else {
                lambda *= 10.0;
                continue;
            };
            let (na, nc) = (alpha + step_a, c + step_c);
            if na > 0.0 && nc > 0.0 {
                let new_cost = hyperbola_rms(t, x, na, nc);
                if new_cost <= cost {
                    let rel = (step_a / alpha).abs().max((step_c / c).abs());
                    alpha = na;
                    c = nc;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    moved = true;
                    if rel < LM_TOLERANCE {
                        return ((alpha, c), moved);
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    ((alpha, c), moved)
}

fn parabola_coefficient(t: &[f64], x: &[f64]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &x) in t.iter().zip(x) {
        let t2 = t * t;
        num += x * t2;
        den += t2 * t2;
    }
    if den == 0.0 {
        return Err(Error::Domain("parabola fit needs nonzero times".into()));
    }
    Ok(2.0 * num / den)
}

/// Single-parameter least squares x = ½at² with the origin pinned at the
/// first sample.
pub fn fit_parabola(trajectory: &PeakTrajectory) -> Result<f64> {
    if trajectory.len() < 3 {
        return Err(Error::Domain(format!(
            "parabola fit needs at least 3 points, got {}",
            trajectory.len()
        )));
    }
    let (t, x) = (trajectory.times(), trajectory.positions());
    let ts: Vec<f64> = t.iter().map(|v| v - t[0]).collect();
    let xs: Vec<f64> = x.iter().map(|v| v - x[0]).collect();
    parabola_coefficient(&ts, &xs)
}

/// Two-parameter fit of the hyperbolic worldline. Data that stay in the
/// non-relativistic regime (αt_max/c below [`RELATIVISTIC_GATE`]) fall back
/// to a parabola and report only α.
pub fn fit_hyperbolic(trajectory: &PeakTrajectory) -> Result<RelativisticFit> {
    let (t, x, t_range) = prepare(trajectory)?;
    let n_points = t.len();
    let t_max = t[n_points - 1];
    let fallback = |reason: String| -> Result<RelativisticFit> {
        log::warn!("hyperbolic fit unstable ({reason}); reporting a parabola fit");
        let a = parabola_coefficient(&t, &x)?;
        let rms_residual = rms(t.iter().zip(&x).map(|(&t, &x)| x - 0.5 * a * t * t));
        Ok(RelativisticFit {
            alpha: a,
            c: None,
            rms_residual,
            method: FitMethod::ParabolaFallback,
            n_points,
            t_range,
        })
    };

    let Some(start) = linearized_start(&t, &x) else {
        return fallback("no hyperbolic curvature in the data".into());
    };
    let ((alpha, c), moved) = refine_hyperbola(&t, &x, start);
    let reach = alpha * t_max / c;
    if !(reach >= RELATIVISTIC_GATE) {
        return fallback(format!("alpha*t_max/c = {reach:.3}"));
    }
    Ok(RelativisticFit {
        alpha,
        c: Some(c),
        rms_residual: hyperbola_rms(&t, &x, alpha, c),
        method: if moved { FitMethod::Refined } else { FitMethod::Linearized },
        n_points,
        t_range,
    })
}

/// Linearised-stage parameters and residual, exposed for diagnostics.
pub fn fit_linearized(trajectory: &PeakTrajectory) -> Result<Option<(f64, f64, f64)>> {
    let (t, x, _) = prepare(trajectory)?;
    Ok(linearized_start(&t, &x).map(|(a, c)| (a, c, hyperbola_rms(&t, &x, a, c))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingLaw {
    pub exponent: f64,
    pub prefactor: f64,
}

/// Power law α = A Δx^p from a straight-line fit in log–log space.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<ScalingLaw> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|(dx, a)| !(*dx > 0.0 && *a > 0.0)) {
        return Err(Error::Domain(format!("scaling fit needs positive values, got {p:?}")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 1e-300 {
        return Err(Error::Domain("scaling fit needs distinct lattice spacings".into()));
    }
    let exponent = sxy / sxx;
    Ok(ScalingLaw {
        exponent,
        prefactor: (my - exponent * mx).exp(),
    })
}

/// Bloch-oscillation center of mass 2(J/V0)(1 − cos V0 t), in sites.
pub fn bloch_com_reference(v0: f64, t: f64) -> Result<f64> {
    if v0 == 0.0 || !v0.is_finite() {
        return Err(Error::Domain(format!(
            "Bloch reference needs a finite nonzero tilt, got {v0}"
        )));
    }
    Ok(2.0 * (HOPPING / v0) * (1.0 - (v0 * t).cos()))
}
