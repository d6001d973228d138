//! Initial-state builders: aperture-limited Airy states (sampled directly or
//! synthesised from their Fourier transform), Gaussian packets, and phase
//! imprinting.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{FftPair, LatticeGrid, WaveState};
use crate::special::airy_ai;

/// Position of the global maximum of Ai(x)².
pub const AIRY_MAIN_PEAK_X: f64 = -1.019;

/// Spectrum truncation: the window edge k_max satisfies e^{−γ k_max²} = this.
const SPECTRAL_WINDOW_FLOOR: f64 = 1e-10;
/// Largest tolerated probability lost to clipping in the Fourier synthesis.
const SYNTHESIS_TAIL_MASS: f64 = 1e-6;
/// Size cap for the continuum synthesis grid.
const SYNTHESIS_MAX_POINTS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApertureKind {
    Hard,
    Exponential,
}

/// Truncation that makes the Airy state normalisable: hard truncation at the
/// grid edges, or an exponential factor e^{γx}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureSpec {
    pub kind: ApertureKind,
    pub gamma: f64,
}

impl ApertureSpec {
    pub fn hard() -> Self {
        ApertureSpec {
            kind: ApertureKind::Hard,
            gamma: 0.0,
        }
    }

    pub fn exponential(gamma: f64) -> Result<Self> {
        let spec = ApertureSpec {
            kind: ApertureKind::Exponential,
            gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ApertureKind::Hard => Ok(()),
            ApertureKind::Exponential if self.gamma > 0.0 && self.gamma.is_finite() => Ok(()),
            ApertureKind::Exponential => Err(Error::Config(format!(
                "exponential aperture needs gamma > 0, got {}",
                self.gamma
            ))),
        }
    }

    /// Multiplicative aperture factor at position `x`.
    pub fn factor(&self, x: f64) -> f64 {
        match self.kind {
            ApertureKind::Hard => 1.0,
            ApertureKind::Exponential => (self.gamma * x).exp(),
        }
    }
}

impl std::fmt::Display for ApertureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            ApertureKind::Hard => write!(f, "hard"),
            ApertureKind::Exponential => write!(f, "exp:{}", self.gamma),
        }
    }
}

impl std::str::FromStr for ApertureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "hard" {
            return Ok(ApertureSpec::hard());
        }
        match s.strip_prefix("exp:") {
            Some(g) => {
                let gamma = g
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad aperture gamma '{g}': {e}")))?;
                ApertureSpec::exponential(gamma)
            }
            None => Err(Error::Config(format!(
                "aperture must be 'hard' or 'exp:GAMMA', got '{s}'"
            ))),
        }
    }
}

/// ψ_j ∝ Ai(jΔx) × aperture factor, normalised, at t = 0.
pub fn build_airy_state(grid: LatticeGrid, aperture: ApertureSpec) -> Result<WaveState> {
    aperture.validate()?;
    let dx = grid.delta_x();
    let (x_lo, x_hi) = (grid.position(grid.j_min()), grid.position(grid.j_max()));
    if !(x_lo + dx <= AIRY_MAIN_PEAK_X && AIRY_MAIN_PEAK_X <= x_hi - dx) {
        return Err(Error::Config(format!(
            "grid x ∈ [{x_lo}, {x_hi}] does not contain the main Airy peak at x = {AIRY_MAIN_PEAK_X}"
        )));
    }
    let amps = grid
        .sites()
        .map(|j| {
            let x = grid.position(j);
            airy_ai(x).map(|a| Complex64::new(a * aperture.factor(x), 0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    WaveState::normalized(grid, amps, 0.0)
}

/// Synthesises the exponentially-apertured Airy state from its spectrum
/// ψ̃(k) ∝ e^{−γk²} e^{ik³/3}: the spectrum is inverse-transformed on a fine
/// continuum grid commensurate with the lattice, then sampled at the sites.
pub fn build_airy_state_fourier(grid: LatticeGrid, gamma: f64) -> Result<WaveState> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("Fourier synthesis needs gamma > 0, got {gamma}")));
    }
    let dx = grid.delta_x();
    let k_window = ((1.0 / SPECTRAL_WINDOW_FLOOR).ln() / gamma).sqrt();
    // fine spacing dx/m resolves |k| ≤ k_window without aliasing
    let refine = ((dx * k_window / PI).ceil() as usize).max(1);
    let fine_dx = dx / refine as f64;

    // e^{γx} tail to the left and the super-exponential Ai tail to the right
    // need room so the periodic images of the synthesis do not overlap.
    let left_tail = (1.0 / SYNTHESIS_TAIL_MASS).ln() / (2.0 * gamma);
    let right_tail = 30.0;
    let pad_left = (left_tail / dx).ceil() as usize;
    let pad_right = (right_tail / dx).ceil() as usize;
    let sites = grid.len() + pad_left + pad_right;
    let needed = sites * refine;
    if needed > SYNTHESIS_MAX_POINTS {
        return Err(Error::Config(format!(
            "gamma = {gamma} too small: synthesis needs {needed} points (cap {SYNTHESIS_MAX_POINTS}), \
             so the window would clip more than {SYNTHESIS_TAIL_MASS:e} of the probability"
        )));
    }
    let n = needed.next_power_of_two();
    let length = n as f64 * fine_dx;
    let x0 = (grid.j_min() - pad_left as i64) as f64 * dx;

    // spectral tail mass beyond the achievable window, ∝ erfc(√(2γ) k_max)
    let k_nyquist = PI / fine_dx;
    let k_max = k_window.min(k_nyquist);
    let tail = (-2.0 * gamma * k_max * k_max).exp();
    if tail > SYNTHESIS_TAIL_MASS {
        return Err(Error::Config(format!(
            "synthesis window |k| ≤ {k_max:.3} clips the spectrum (tail {tail:.2e})"
        )));
    }

    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (m, slot) in buf.iter_mut().enumerate() {
        let mi = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        let k = 2.0 * PI * mi / length;
        if k.abs() > k_max {
            continue;
        }
        let phase = k * k * k / 3.0 + k * x0;
        *slot = Complex64::from_polar((-gamma * k * k).exp(), phase);
    }
    let fft = FftPair::new(n);
    fft.inverse(&mut buf);

    let amps = (0..grid.len())
        .map(|i| buf[(i + pad_left) * refine])
        .collect();
    WaveState::normalized(grid, amps, 0.0)
}

/// ψ_j ∝ exp(−(jΔx − center)² / (4 width²)), normalised. `center` and
/// `width` are in position units.
pub fn build_gaussian_state(grid: LatticeGrid, center: f64, width: f64) -> Result<WaveState> {
    let dx = grid.delta_x();
    if !(width >= dx) {
        return Err(Error::Config(format!(
            "Gaussian width {width} is below the lattice spacing {dx}"
        )));
    }
    let (x_lo, x_hi) = (grid.position(grid.j_min()), grid.position(grid.j_max()));
    if !(x_lo..=x_hi).contains(&center) {
        return Err(Error::Config(format!("Gaussian center {center} is off the grid")));
    }
    let amps = grid
        .sites()
        .map(|j| {
            let d = grid.position(j) - center;
            Complex64::new((-d * d / (4.0 * width * width)).exp(), 0.0)
        })
        .collect();
    WaveState::normalized(grid, amps, 0.0)
}

/// ψ_j ← ψ_j e^{iφj}: a momentum kick by φ, giving group velocity 2J sin φ.
pub fn imprint_phase(state: &WaveState, phi: f64) -> Result<WaveState> {
    if !(phi.abs() <= PI) {
        return Err(Error::Domain(format!("phase per site must satisfy |phi| ≤ π, got {phi}")));
    }
    let mut out = state.clone();
    let sites = state.grid().sites();
    for (a, j) in out.amplitudes_mut().iter_mut().zip(sites) {
        *a *= Complex64::from_polar(1.0, phi * j as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::momentum_density;

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc })
            .0
    }

    #[test]
    fn aperture_parsing() {
        assert_eq!("hard".parse::<ApertureSpec>().unwrap(), ApertureSpec::hard());
        let e: ApertureSpec = "exp:0.02".parse().unwrap();
        assert_eq!(e.kind, ApertureKind::Exponential);
        assert_eq!(e.gamma, 0.02);
        assert!("exp:0".parse::<ApertureSpec>().is_err());
        assert!("exp:-1".parse::<ApertureSpec>().is_err());
        assert!("soft".parse::<ApertureSpec>().is_err());
        assert_eq!(e.to_string(), "exp:0.02");
    }

    #[test]
    fn airy_peak_location() {
        let grid = LatticeGrid::new(0.2, -2000, 250).unwrap();
        let s = build_airy_state(grid, ApertureSpec::hard()).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(s.time(), 0.0);
        let d = s.density();
        assert_eq!(grid.site(argmax(&d)), -5);
    }

    #[test]
    fn airy_needs_main_peak_on_grid() {
        let grid = LatticeGrid::new(0.2, 0, 100).unwrap();
        assert!(matches!(
            build_airy_state(grid, ApertureSpec::hard()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn exponential_aperture_small_gamma_limit() {
        let grid = LatticeGrid::new(0.2, -500, 100).unwrap();
        let hard = build_airy_state(grid, ApertureSpec::hard()).unwrap();
        let soft = build_airy_state(grid, ApertureSpec::exponential(1e-12).unwrap()).unwrap();
        for (a, b) in hard.amplitudes().iter().zip(soft.amplitudes()) {
            assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn airy_right_tail_negligible() {
        let grid = LatticeGrid::new(0.2, -2000, 250).unwrap();
        let s = build_airy_state(grid, ApertureSpec::hard()).unwrap();
        let right: f64 = grid
            .sites()
            .zip(s.density())
            .filter(|(j, _)| grid.position(*j) > 5.0)
            .map(|(_, d)| d)
            .sum();
        assert!(right < 1e-6);
    }

    #[test]
    fn fourier_synthesis_matches_direct_build() {
        let grid = LatticeGrid::new(0.2, -2500, 500).unwrap();
        let direct = build_airy_state(grid, ApertureSpec::exponential(0.02).unwrap()).unwrap();
        let synth = build_airy_state_fourier(grid, 0.02).unwrap();
        assert!((synth.norm_sqr() - 1.0).abs() < 1e-12);
        let f = synth.fidelity(&direct).unwrap();
        assert!(f >= 0.99, "overlap {f}");
    }

    #[test]
    fn fourier_synthesis_large_gamma_is_single_lobe() {
        let grid = LatticeGrid::new(0.2, -400, 200).unwrap();
        let s = build_airy_state_fourier(grid, 5.0).unwrap();
        let d = s.density();
        let max = d.iter().cloned().fold(0.0, f64::max);
        // ignore the round-off floor in the far tails
        let support: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 1e-6 * max).collect();
        let (lo, hi) = (support[0].max(1), support[support.len() - 1].min(d.len() - 2));
        let near_zeros = (lo..=hi)
            .filter(|&i| d[i] <= d[i - 1] && d[i] <= d[i + 1] && d[i] < 1e-3 * max)
            .count();
        assert!(near_zeros < 3, "{near_zeros} near-zero minima");
    }

    #[test]
    fn fourier_synthesis_rejects_tiny_gamma() {
        let grid = LatticeGrid::new(0.2, -100, 100).unwrap();
        assert!(matches!(build_airy_state_fourier(grid, 1e-7), Err(Error::Config(_))));
        assert!(build_airy_state_fourier(grid, 0.0).is_err());
    }

    #[test]
    fn gaussian_symmetric_and_normalised() {
        let grid = LatticeGrid::new(0.2, -100, 100).unwrap();
        let s = build_gaussian_state(grid, 0.0, 10.0 * 0.2).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(grid.site(argmax(&s.density())), 0);
        assert!(build_gaussian_state(grid, 0.0, 0.1).is_err());
        assert!(build_gaussian_state(grid, 500.0, 1.0).is_err());
    }

    /// Analytic Fourier pair: a density of std w (sites) has momentum std 1/(2w).
    #[test]
    fn gaussian_momentum_width() {
        let dx = 0.25;
        let grid = LatticeGrid::new(dx, -256, 255).unwrap();
        let width = 8.0 * dx;
        let s = build_gaussian_state(grid, 0.0, width).unwrap();
        let md = momentum_density(&s);
        let mean: f64 = md.iter().map(|(k, d)| k * d).sum();
        let var: f64 = md.iter().map(|(k, d)| (k - mean).powi(2) * d).sum();
        assert!(mean.abs() < 1e-12);
        let expected = dx / (2.0 * width);
        assert!((var.sqrt() / expected - 1.0).abs() < 1e-3, "{} vs {}", var.sqrt(), expected);
    }

    #[test]
    fn imprint_phase_behaviour() {
        let grid = LatticeGrid::new(0.2, -64, 63).unwrap();
        let s = build_gaussian_state(grid, 0.0, 2.0).unwrap();
        assert_eq!(imprint_phase(&s, 0.0).unwrap(), s);
        let kicked = imprint_phase(&s, 0.5).unwrap();
        for (a, b) in s.density().iter().zip(kicked.density()) {
            assert!((a - b).abs() < 1e-15);
        }
        let md = momentum_density(&kicked);
        let (kpk, _) = md.iter().cloned().fold((0.0, f64::MIN), |a, p| if p.1 > a.1 { p } else { a });
        assert!((kpk - 0.5).abs() < 2.0 * PI / 128.0);
        assert!(imprint_phase(&s, 4.0).is_err());
    }
}
