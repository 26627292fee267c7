use std::f64::consts::PI;

use roomtune::fdtd::{
    derive_timestep, simulate, Execution, FdtdSolver, Placement, SimConfig, MAX_COURANT,
};
use roomtune::geometry::{box_to_grid, voxelize, BoxRoom, OccupancyGrid, TriangleMesh};
use roomtune::modal::{mode_frequency, ModeIndex};
use roomtune::spectral::{detect_peaks, spectrum, Band};

const C: f64 = 343.0;

fn config(
    grid: &OccupancyGrid,
    duration: f64,
    source: [usize; 3],
    receivers: Vec<[usize; 3]>,
) -> SimConfig {
    SimConfig {
        c: C,
        dx: grid.dx(),
        courant: MAX_COURANT,
        duration,
        source,
        receivers,
        execution: Execution::Serial,
    }
}

fn corners(grid: &OccupancyGrid, duration: f64) -> SimConfig {
    let (s, r) = Placement::default().resolve(grid);
    config(grid, duration, s, r)
}

/// Eigenfrequency of the discrete scheme on a rigid box of `cells`.
fn discrete_mode(cells: [usize; 3], n: [u32; 3], dx: f64) -> f64 {
    let dt = derive_timestep(C, dx, MAX_COURANT).unwrap();
    let s: f64 = (0..3)
        .map(|k| (n[k] as f64 * PI / (2.0 * cells[k] as f64)).sin().powi(2))
        .sum();
    (MAX_COURANT * s.sqrt()).asin() / (PI * dt)
}

fn sphere_grid() -> OccupancyGrid {
    // octahedron subdivided once, projected to a sphere of radius 0.3
    let r = 0.3;
    let v = [
        [r, 0.0, 0.0],
        [-r, 0.0, 0.0],
        [0.0, r, 0.0],
        [0.0, -r, 0.0],
        [0.0, 0.0, r],
        [0.0, 0.0, -r],
    ];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    let mesh = TriangleMesh::new(v.to_vec(), faces).unwrap();
    voxelize(&mesh, 0.05).unwrap()
}

#[test]
fn pressure_sum_is_conserved() {
    for grid in [
        box_to_grid(&BoxRoom::new("b", 0.9, 0.6, 0.5).unwrap(), 0.05).unwrap(),
        sphere_grid(),
    ] {
        let cfg = corners(&grid, 0.05);
        let mut solver = FdtdSolver::new(&grid, &cfg).unwrap();
        assert_eq!(solver.pressure_sum(), 1.0);
        solver.step();
        let after_one = solver.pressure_sum();
        for _ in 0..2000 {
            solver.step();
        }
        assert!((after_one - 1.0).abs() < 1e-12);
        assert!(
            (solver.pressure_sum() - 1.0).abs() < 1e-9,
            "{}",
            solver.pressure_sum()
        );
    }
}

#[test]
fn stays_bounded_at_the_courant_limit() {
    for grid in [
        box_to_grid(&BoxRoom::new("b", 0.9, 0.6, 0.5).unwrap(), 0.05).unwrap(),
        sphere_grid(),
    ] {
        let cfg = corners(&grid, 0.5);
        let mut solver = FdtdSolver::new(&grid, &cfg).unwrap();
        let steps = cfg.steps().unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..steps {
            solver.step();
            worst = worst.max(solver.max_abs());
        }
        assert!(worst <= 1.0 + 1e-12, "max |p| grew to {worst}");
    }
}

#[test]
fn mirror_receivers_match() {
    let room = BoxRoom::new("b", 0.55, 0.45, 0.35).unwrap();
    let grid = box_to_grid(&room, 0.05).unwrap();
    // 11 x 9 x 7 air cells at indices 1..=n
    let center = [6, 5, 4];
    let receivers = vec![[2, 3, 2], [10, 3, 2], [2, 7, 2], [2, 3, 6], [10, 7, 6]];
    let irs = simulate(&grid, &config(&grid, 0.1, center, receivers)).unwrap();
    for other in &irs[1..] {
        for (a, b) in irs[0].samples().iter().zip(other.samples()) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{a} vs {b}");
        }
    }
}

#[test]
fn serial_runs_are_bit_identical() {
    let grid = sphere_grid();
    let cfg = corners(&grid, 0.05);
    assert_eq!(
        simulate(&grid, &cfg).unwrap(),
        simulate(&grid, &cfg).unwrap()
    );
    let parallel = SimConfig {
        execution: Execution::Parallel,
        ..cfg.clone()
    };
    assert_eq!(
        simulate(&grid, &cfg).unwrap(),
        simulate(&grid, &parallel).unwrap()
    );
}

#[test]
fn sample_count_and_rate() {
    let grid = box_to_grid(&BoxRoom::new("b", 0.5, 0.5, 0.5).unwrap(), 0.1).unwrap();
    let cfg = corners(&grid, 0.1);
    let ir = &simulate(&grid, &cfg).unwrap()[0];
    let fs = 1.0 / derive_timestep(C, 0.1, MAX_COURANT).unwrap();
    assert_eq!(ir.sample_rate(), fs);
    assert_eq!(ir.len(), (0.1 * fs).round() as usize);
    assert_eq!(ir.samples()[0], 0.0);
}

fn peak_near(ir: &roomtune::ImpulseResponse, f: f64) -> f64 {
    let band = Band::new(f - 8.0, f + 8.0).unwrap();
    let peaks = detect_peaks(&spectrum(ir, band).unwrap(), 10.0, band);
    peaks
        .iter()
        .min_by(|a, b| (a.frequency - f).abs().total_cmp(&(b.frequency - f).abs()))
        .unwrap_or_else(|| panic!("no peak near {f}"))
        .frequency
}

#[test]
fn peaks_follow_the_discrete_dispersion_relation() {
    let room = BoxRoom::new("b", 2.4, 0.5, 0.4).unwrap();
    let grid = box_to_grid(&room, 0.1).unwrap();
    let ir = &simulate(&grid, &corners(&grid, 20.0)).unwrap()[0];
    let cells = grid.air_box_shape().unwrap();
    for n in [[1, 0, 0], [2, 0, 0], [4, 0, 0], [1, 1, 0]] {
        let want = discrete_mode(cells, n, 0.1);
        let got = peak_near(ir, want);
        assert!((got - want).abs() < 0.01, "{n:?}: {got} vs {want}");
    }
}

#[test]
fn axial_error_shrinks_with_dx() {
    let room = BoxRoom::new("b", 2.4, 0.5, 0.4).unwrap();
    let idx = ModeIndex::new(4, 0, 0).unwrap();
    let exact = mode_frequency(&room, idx, C).unwrap();
    let errors: Vec<f64> = [0.1, 0.05]
        .iter()
        .map(|&dx| {
            let grid = box_to_grid(&room, dx).unwrap();
            let ir = &simulate(&grid, &corners(&grid, 8.0)).unwrap()[0];
            (peak_near(ir, exact) - exact).abs()
        })
        .collect();
    // second-order scheme: halving dx cuts the error about fourfold
    assert!(errors[1] < errors[0] / 3.0, "{errors:?}");
    assert!(errors[0] / exact < 0.01);
}
