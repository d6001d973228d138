use std::f64::consts::PI;

use proptest::prelude::*;

use airy_lattice::diagnostics::{find_main_peak, track_peak};
use airy_lattice::lattice::{momentum_density, LatticeGrid, WaveState, V_MAX};
use airy_lattice::propagate::{
    effective_tunneling, evolve_crank_nicolson, evolve_free_exact, evolve_free_exact_with_hopping,
    evolve_gauged_exact, DriveSchedule, Forcing, StepperConfig, TiltSpec,
};
use airy_lattice::states::{build_airy_state, build_gaussian_state, imprint_phase, ApertureSpec};

mod common;
use common::{bessel_integral, ring_propagator};

#[test]
fn delta_spreading_matches_bessel_and_matrix_exponential() {
    let n = 64;
    let grid = LatticeGrid::new(1.0, -32, 31).unwrap();
    let delta = WaveState::delta(grid, 0).unwrap();
    for t in [1.0, 3.5, 6.0] {
        let exact = evolve_free_exact(&delta, t).unwrap();
        let u = ring_propagator(n, t);
        let col = grid.index_of(0).unwrap();
        for (i, j) in grid.sites().enumerate() {
            let d = exact.amplitudes()[i].norm_sqr();
            let oracle = u[(i, col)].norm_sqr();
            let bessel = bessel_integral(j as i32, 2.0 * t).powi(2);
            assert!((d - oracle).abs() < 1e-8, "t={t} j={j}: {d} vs {oracle}");
            assert!((d - bessel).abs() < 1e-8, "t={t} j={j}: {d} vs {bessel}");
        }
    }
}

#[test]
fn airy_peak_follows_discrete_self_acceleration() {
    let dx = 0.2;
    let grid = LatticeGrid::new(dx, -2500, 500).unwrap();
    let s = build_airy_state(grid, ApertureSpec::hard())
        .unwrap()
        .embed(LatticeGrid::new(dx, -2700, 700).unwrap())
        .unwrap();
    let n0 = find_main_peak(&s).unwrap();
    let snaps: Vec<WaveState> = (0..=80).map(|i| evolve_free_exact(&s, i as f64 * 0.5).unwrap()).collect();
    let traj = track_peak(&snaps).unwrap();
    for (t, n) in traj.times().iter().zip(traj.positions()) {
        let expect = dx.powi(3) * t * t;
        assert!((n - n0 - expect).abs() < 1.0, "t={t}: {} vs {expect}", n - n0);
    }
}

fn gaussian400(phi: f64) -> WaveState {
    let grid = LatticeGrid::new(1.0, -200, 199).unwrap();
    imprint_phase(&build_gaussian_state(grid, -20.0, 6.0).unwrap(), phi).unwrap()
}

fn last(snaps: Vec<WaveState>) -> WaveState {
    snaps.into_iter().last().unwrap()
}

#[test]
fn gauged_exact_agrees_with_crank_nicolson_free() {
    let s = gaussian400(0.6);
    let cfg = StepperConfig::new(0.01, 1.0).unwrap();
    let exact = last(evolve_gauged_exact(&s, Forcing::Free, 20.0, cfg).unwrap());
    let cn = evolve_crank_nicolson(&s, &Forcing::Free, 20.0, 0.005, -20).unwrap();
    assert!(exact.fidelity(&cn).unwrap() >= 1.0 - 1e-5);
}

#[test]
fn gauged_exact_agrees_with_crank_nicolson_tilt() {
    let s = gaussian400(0.0);
    let tilt = TiltSpec::new(0.2).unwrap();
    let cfg = StepperConfig::new(0.01, 1.0).unwrap();
    let exact = last(evolve_gauged_exact(&s, tilt, 20.0, cfg).unwrap());
    let cn = evolve_crank_nicolson(&s, &Forcing::Tilt(tilt), 20.0, 0.005, -20).unwrap();
    let f = exact.fidelity(&cn).unwrap();
    assert!(f >= 1.0 - 1e-5, "fidelity {f}");
}

#[test]
fn gauged_exact_agrees_with_crank_nicolson_driven_piecewise() {
    let s = gaussian400(1.2);
    let drive = DriveSchedule::new(
        2.0 * PI,
        DriveSchedule::parse_segments("0:0.5,3.3:1.691,6.1:3.8").unwrap(),
    )
    .unwrap();
    let cfg = StepperConfig::new(1.0 / 256.0, 0.5).unwrap();
    let exact = last(evolve_gauged_exact(&s, drive.clone(), 9.0, cfg).unwrap());
    // the field jumps at segment boundaries, so CN needs a fine step here
    let cn = evolve_crank_nicolson(&s, &Forcing::Drive(drive), 9.0, 1e-4, -20).unwrap();
    let f = exact.fidelity(&cn).unwrap();
    assert!(f >= 1.0 - 1e-5, "fidelity {f}");
}

#[test]
fn one_drive_period_equals_effective_hopping() {
    let s = gaussian400(0.9);
    for k0 in [0.5, 1.691, 2.4048, 3.8] {
        let drive = DriveSchedule::constant(2.0 * PI, k0).unwrap();
        let cfg = StepperConfig::new(1.0 / 256.0, 1.0).unwrap();
        let driven = last(evolve_gauged_exact(&s, drive, 1.0, cfg).unwrap());
        let eff = evolve_free_exact_with_hopping(&s, 1.0, effective_tunneling(k0).unwrap()).unwrap();
        let f = driven.fidelity(&eff).unwrap();
        assert!(f >= 1.0 - 1e-3, "K0={k0}: fidelity {f}");
    }
}

#[test]
fn norm_is_preserved_over_long_runs() {
    let s = gaussian400(0.3);
    let tilt = TiltSpec::new(2.0 * PI / 100.0).unwrap();
    let cfg = StepperConfig::new(0.02, 5.0).unwrap();
    for snap in evolve_gauged_exact(&s, tilt, 300.0, cfg).unwrap() {
        assert!((snap.norm_sqr() - 1.0).abs() < 1e-10);
    }
    let drive = DriveSchedule::constant(2.0 * PI, 1.0).unwrap();
    let cfg = StepperConfig::new(1.0 / 256.0, 5.0).unwrap();
    for snap in evolve_gauged_exact(&s, drive, 100.0, cfg).unwrap() {
        assert!((snap.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn free_momentum_density_is_invariant() {
    let s = gaussian400(-0.4);
    let k0 = momentum_density(&s);
    let cfg = StepperConfig::new(0.02, 10.0).unwrap();
    for snap in evolve_gauged_exact(&s, Forcing::Free, 50.0, cfg).unwrap() {
        for (a, b) in k0.iter().zip(momentum_density(&snap)) {
            assert!((a.1 - b.1).abs() < 1e-8);
        }
    }
}

#[test]
fn frozen_motion_at_bessel_root() {
    let dx = 0.2;
    let grid = LatticeGrid::new(dx, -2500, 500).unwrap();
    let s = imprint_phase(&build_airy_state(grid, ApertureSpec::hard()).unwrap(), 1.45)
        .unwrap()
        .embed(LatticeGrid::new(dx, -2700, 700).unwrap())
        .unwrap();
    let drive = DriveSchedule::constant(2.0 * PI, 2.4048).unwrap();
    let cfg = StepperConfig::new(1.0 / 256.0, 0.25).unwrap();
    let snaps = evolve_gauged_exact(&s, drive, 30.0, cfg).unwrap();
    let traj = track_peak(&snaps).unwrap();
    let x0 = traj.positions()[0];
    let worst = traj.positions().iter().map(|x| (x - x0).abs()).fold(0.0, f64::max);
    assert!(worst < 1.0, "drift {worst}");
}

#[test]
fn tilt_sign_gives_positive_displacement() {
    let s = gaussian400(0.0);
    let cfg = StepperConfig::new(0.02, 1.0).unwrap();
    let later = last(evolve_gauged_exact(&s, TiltSpec::new(0.1).unwrap(), 10.0, cfg).unwrap());
    let com = |w: &WaveState| -> f64 {
        w.grid().sites().zip(w.amplitudes()).map(|(j, a)| j as f64 * a.norm_sqr()).sum()
    };
    assert!(com(&later) > com(&s));
}

#[test]
fn decreasing_schedule_is_config_error() {
    let segs = DriveSchedule::parse_segments("0:1,5:1,4:1").unwrap();
    assert!(matches!(
        DriveSchedule::new(2.0 * PI, segs),
        Err(airy_lattice::Error::Config(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Without a potential no peak outruns the maximum group velocity.
    #[test]
    fn peak_speed_respects_light_cone(phi in -3.0f64..3.0, width in 2.0f64..12.0, gamma in 0.02f64..0.5) {
        let grid = LatticeGrid::new(1.0, -300, 300).unwrap();
        let g = imprint_phase(&build_gaussian_state(grid, 0.0, width).unwrap(), phi).unwrap();
        let a = build_airy_state(LatticeGrid::new(0.3, -300, 300).unwrap(), ApertureSpec::exponential(gamma).unwrap()).unwrap();
        for s in [g, a] {
            let dt = 0.5;
            let snaps: Vec<WaveState> = (0..=40).map(|i| evolve_free_exact(&s, i as f64 * dt).unwrap()).collect();
            if let Ok(traj) = track_peak(&snaps) {
                for w in traj.positions().windows(2) {
                    prop_assert!((w[1] - w[0]).abs() <= (V_MAX + 0.05) * dt);
                }
            }
        }
    }
}

#[test]
fn cn_respects_amplitude_phase_conventions() {
    // group velocity 2 sin φ = 2 under both propagators
    let s = gaussian400(PI / 2.0);
    let cn = evolve_crank_nicolson(&s, &Forcing::Free, 10.0, 0.01, -20).unwrap();
    let ex = evolve_free_exact(&s, 10.0).unwrap();
    let peak = |w: &WaveState| find_main_peak(w).unwrap();
    assert!((peak(&cn) - peak(&ex)).abs() < 0.05);
    assert!((peak(&ex) - (-20.0 + 20.0)).abs() < 0.5);
}
