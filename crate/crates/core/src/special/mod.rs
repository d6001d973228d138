//! Airy function Ai and Bessel function J0 for real arguments.
//!
//! Both functions are evaluated from a Maclaurin series near the origin and
//! an asymptotic expansion beyond a fixed switch radius. Only elementary
//! functions (`exp`, `sin`, `cos`, `sqrt`, `powf`) are taken from the
//! platform; series are accumulated in double-double arithmetic so the
//! cancellation at the upper end of the series range costs no accuracy.

mod dd;

use crate::error::{Error, Result};
use dd::Dd;

/// Series below this |x|, asymptotic expansions above.
pub const AIRY_SWITCH_RADIUS: f64 = 8.0;

/// Maclaurin series below this |u|, Hankel expansion above.
pub const J0_SWITCH_RADIUS: f64 = 12.0;

const SERIES_REL_TOL: f64 = 1e-18;
const SERIES_MAX_TERMS: usize = 400;
const ASYMPTOTIC_MAX_TERMS: usize = 60;

// Ai(0) and -Ai'(0) as double-double.
const AI0: Dd = Dd::new(0.3550280538878172, 2.05233632436212e-17);
const NEG_AIP0: Dd = Dd::new(0.2588194037928068, -2.522243111610832e-17);

const FRAC_1_SQRT_PI: f64 = 0.5641895835477563;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    Series,
    AsymptoticPositive,
    AsymptoticNegative,
}

/// Which expansion is used for a given argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRegime {
    pub kind: RegimeKind,
    pub switch_radius: f64,
}

impl EvalRegime {
    fn select(x: f64, switch_radius: f64) -> Self {
        let kind = if x.abs() <= switch_radius {
            RegimeKind::Series
        } else if x > 0.0 {
            RegimeKind::AsymptoticPositive
        } else {
            RegimeKind::AsymptoticNegative
        };
        EvalRegime {
            kind,
            switch_radius,
        }
    }
}

pub fn airy_regime(x: f64) -> EvalRegime {
    EvalRegime::select(x, AIRY_SWITCH_RADIUS)
}

/// J0 is even, so only the series and the positive asymptotic branch occur.
pub fn j0_regime(u: f64) -> EvalRegime {
    EvalRegime::select(u.abs(), J0_SWITCH_RADIUS)
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} requires a finite argument, got {v}")))
    }
}

/// Airy function of the first kind, Ai(x), for real `x`.
pub fn airy_ai(x: f64) -> Result<f64> {
    check_finite("airy_ai", x)?;
    Ok(match airy_regime(x).kind {
        RegimeKind::Series => airy_series(x),
        RegimeKind::AsymptoticPositive => airy_asymptotic_positive(x),
        RegimeKind::AsymptoticNegative => airy_asymptotic_negative(-x),
    })
}

/// Bessel function of the first kind of order zero, J0(u), for real `u`.
pub fn bessel_j0(u: f64) -> Result<f64> {
    check_finite("bessel_j0", u)?;
    let u = u.abs();
    Ok(match j0_regime(u).kind {
        RegimeKind::Series => j0_series(u),
        _ => j0_hankel(u),
    })
}

fn series_converged(term: Dd, sum: Dd) -> bool {
    let t = term.to_f64().abs();
    t == 0.0 || t < SERIES_REL_TOL * sum.to_f64().abs()
}

/// Ai(x) = Ai(0) f(x) + Ai'(0) g(x), with
/// f = Σ x^{3k} Π_{m<k}(3m+1) / (3k)!  and  g = Σ x^{3k+1} Π_{m<k}(3m+2) / (3k+1)!.
/// Consecutive term ratios reduce to x³/((3k)(3k-1)) and x³/((3k+1)(3k)).
pub(crate) fn airy_series(x: f64) -> f64 {
    let xd = Dd::from_f64(x);
    let x3 = xd * xd * xd;

    let mut term = Dd::from_f64(1.0);
    let mut f = term;
    for k in 1..SERIES_MAX_TERMS {
        let k = k as f64;
        term = (term * x3).div_f64((3.0 * k) * (3.0 * k - 1.0));
        f = f + term;
        if series_converged(term, f) {
            break;
        }
    }

    let mut term = xd;
    let mut g = term;
    for k in 1..SERIES_MAX_TERMS {
        if term.hi == 0.0 {
            break;
        }
        let k = k as f64;
        term = (term * x3).div_f64((3.0 * k + 1.0) * (3.0 * k));
        g = g + term;
        if series_converged(term, g) {
            break;
        }
    }

    (AI0 * f - NEG_AIP0 * g).to_f64()
}

/// ζ = (2/3) x^{3/2} for x > 0.
fn airy_zeta(x: f64) -> Dd {
    let x32 = Dd::sqrt_f64(x) * x;
    (x32 * 2.0).div_f64(3.0)
}

/// Coefficients u_k of the Airy asymptotic series, u_0 = 1,
/// u_k = u_{k-1} (6k-5)(6k-3)(6k-1) / ((2k-1) 216 k).
fn airy_u_coefficients() -> impl Iterator<Item = f64> {
    (0..ASYMPTOTIC_MAX_TERMS).scan(1.0_f64, |u, k| {
        if k > 0 {
            let kf = k as f64;
            *u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf);
        }
        Some(*u)
    })
}

/// Terms c_k / z^k of an asymptotic series, truncated at the smallest term.
fn asymptotic_terms(coefficients: impl Iterator<Item = f64>, z: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut zk = 1.0;
    let mut prev = f64::INFINITY;
    for c in coefficients {
        let t = c / zk;
        if t.abs() > prev {
            break;
        }
        out.push(t);
        if t.abs() < 1e-17 {
            break;
        }
        prev = t.abs();
        zk *= z;
    }
    out
}

fn airy_asymptotic_positive(x: f64) -> f64 {
    let zeta = airy_zeta(x).to_f64();
    let terms = asymptotic_terms(airy_u_coefficients(), zeta);
    let sum: f64 = terms
        .iter()
        .enumerate()
        .map(|(k, t)| if k % 2 == 0 { *t } else { -*t })
        .sum();
    (-zeta).exp() * sum * 0.5 * FRAC_1_SQRT_PI / x.powf(0.25)
}

/// Ai(-x) for x > 0:
/// (π^{-1/2} x^{-1/4}) [sin(ζ+π/4) P − cos(ζ+π/4) Q].
fn airy_asymptotic_negative(x: f64) -> f64 {
    let zeta = airy_zeta(x);
    let terms = asymptotic_terms(airy_u_coefficients(), zeta.to_f64());
    let (mut p, mut q) = (0.0, 0.0);
    for (k, t) in terms.iter().enumerate() {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q += sign * t;
        }
    }
    let (s, c) = (zeta + Dd::FRAC_PI_4).sin_cos();
    FRAC_1_SQRT_PI / x.powf(0.25) * (s * p - c * q)
}

/// J0(u) = Σ (-1)^m (u²/4)^m / (m!)².
pub(crate) fn j0_series(u: f64) -> f64 {
    let q = Dd::from_f64(u) * Dd::from_f64(u);
    let q = q.div_f64(4.0);
    let mut term = Dd::from_f64(1.0);
    let mut sum = term;
    for m in 1..SERIES_MAX_TERMS {
        let m = m as f64;
        term = -(term * q).div_f64(m * m);
        sum = sum + term;
        if series_converged(term, sum) {
            break;
        }
    }
    sum.to_f64()
}

/// Hankel expansion J0(u) ≈ sqrt(2/(πu)) (P cos χ − Q sin χ), χ = u − π/4.
fn j0_hankel(u: f64) -> f64 {
    // a_k = (-1)^k Π_{m≤k} (2m-1)² / (k! 8^k); the sign pattern is folded in below.
    let magnitudes = (0..ASYMPTOTIC_MAX_TERMS).scan(1.0_f64, |a, k| {
        if k > 0 {
            let kf = k as f64;
            *a *= (2.0 * kf - 1.0).powi(2) / (8.0 * kf);
        }
        Some(*a)
    });
    let terms = asymptotic_terms(magnitudes, u);
    let (mut p, mut q) = (0.0, 0.0);
    for (k, t) in terms.iter().enumerate() {
        // (-1)^{k/2} from P/Q alternation times (-1)^k from a_k
        let sign_pq = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let sign_a = if k % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign_pq * sign_a * t;
        } else {
            q += sign_pq * sign_a * t;
        }
    }
    let (s, c) = (Dd::from_f64(u) - Dd::FRAC_PI_4).sin_cos();
    (2.0 * FRAC_1_SQRT_PI * FRAC_1_SQRT_PI / u).sqrt() * (p * c - q * s)
}
