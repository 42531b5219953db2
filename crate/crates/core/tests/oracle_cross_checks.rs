//! Jost-side quantities against the finite-difference model.

use jostlab::oracle::{grid_hamiltonian, kernel_column, oracle_evolve, weak_residual, GridProjection, GridSpec};
use jostlab::propagator::{evolve, stone_kernel, EvolutionRequest, InitialProfile, Method, OutputGrid, QuadParams};
use jostlab::quadrature::gauss_legendre;
use jostlab::resolvent::Sign;
use jostlab::spectrum::bound_states;
use jostlab::CouplingSequence;
use num_complex::Complex64;

#[test]
fn bound_states_match_grid_eigenvalues() {
    let cases = [
        vec![(0, -2.0)],
        vec![(0, -2.0), (4, -2.0)],
        vec![(-1, -1.0), (2, -1.5)],
        vec![(-3, -0.8), (0, 1.2), (1, -2.5)],
    ];
    let grid = GridSpec::new(40.0, 1.0 / 128.0).unwrap();
    for pairs in cases {
        let seq = CouplingSequence::new(pairs).unwrap();
        let exact: Vec<f64> = bound_states(&seq).unwrap().iter().map(|s| s.energy).collect();
        let grid_values = grid_hamiltonian(&seq, grid).unwrap().eigenvalues_below(0.0);
        assert_eq!(exact.len(), grid_values.len(), "{seq:?}");
        for (e, g) in exact.iter().zip(&grid_values) {
            assert!((e - g).abs() <= 5e-3, "{seq:?}: {e} vs {g}");
        }
    }
}

#[test]
fn resolvent_column_solves_the_grid_equation_away_from_sites() {
    let seq = CouplingSequence::new([(-1, 0.5), (1, -1.0)]).unwrap();
    let grid = GridSpec::new(12.0, 1.0 / 64.0).unwrap();
    let col = kernel_column(&seq, grid, 1.0, Sign::Plus, 3.0).unwrap();
    let op = grid_hamiltonian(&seq, grid).unwrap();
    let h = grid.step;
    let lhs = op.apply_complex(&col);
    let residual = grid
        .xs()
        .enumerate()
        .filter(|&(_, x)| (x - 3.0).abs() > 2.0 * h && (x.abs() - 1.0).abs() > 2.0 * h && x.abs() < 11.0)
        .map(|(i, _)| (lhs[i] - col[i]).norm())
        .fold(0.0, f64::max);
    assert!(residual <= 10.0 * h * h, "{residual}");
    let weak = weak_residual(&seq, grid, 1.0, 3.0, &col).unwrap();
    assert!(weak <= 10.0 * h * h, "{weak}");
}

/// `∫ K_t(x, y') φ(y') dy'` for a narrow Gaussian `φ` around `y`, compared
/// with the grid evolution of the same `φ`. The raw grid column `e^{itH_h} e_y / h`
/// carries an `O(1)` spurious component near the grid cutoff `π/h`, so
/// the comparison is made on smoothed data.
#[test]
fn stone_kernel_matches_grid_evolution_of_smoothed_delta() {
    let seq = CouplingSequence::single(0, -2.0).unwrap();
    let (t, x, y, width) = (2.0, 1.0, -1.0, 0.5);
    let phi = |s: f64| (-(s - y) * (s - y) / (2.0 * width * width)).exp();

    // the kernel has a kink at the site y' = 0
    let (nodes, weights) = gauss_legendre(24);
    let mut stone = Complex64::new(0.0, 0.0);
    for (a, b) in [(y - 6.0 * width, 0.0), (0.0, y + 6.0 * width)] {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (s, w) in nodes.iter().zip(&weights) {
            let yp = mid + half * s;
            let k = stone_kernel(&seq, t, x, yp, &QuadParams::default()).unwrap();
            stone += half * w * phi(yp) * k.value;
        }
    }

    let grid = GridSpec::new(40.0, 1.0 / 128.0).unwrap();
    let op = grid_hamiltonian(&seq, grid).unwrap();
    let f: Vec<Complex64> = grid.xs().map(|s| Complex64::new(phi(s), 0.0)).collect();
    let u = oracle_evolve(&op, &GridProjection::new(&op).apply(&f), t).unwrap();
    let oracle = u[grid.index_of(x).unwrap()];
    assert!((stone - oracle).norm() <= 2e-3, "{stone} vs {oracle}");
}

#[test]
fn stone_and_oracle_evolutions_agree() {
    let seq = CouplingSequence::single(0, 1.0).unwrap();
    let grid = GridSpec::new(160.0, 1.0 / 64.0).unwrap();
    let profile = InitialProfile::Gaussian { center: 0.0, width: 1.0 };
    let mut req = EvolutionRequest::new(seq, profile, 10.0, Method::Stone, grid);
    req.output = Some(OutputGrid { start: -30.0, step: 0.25, count: 241 });
    let stone = evolve(&req).unwrap();
    req.method = Method::Oracle;
    let oracle = evolve(&req).unwrap();
    assert!(oracle.warnings.is_empty(), "{:?}", oracle.warnings);
    let diff = stone.values.iter().zip(&oracle.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(diff <= 5e-3, "{diff}");
}

#[test]
fn stone_evolution_preserves_the_essential_norm() {
    let seq = CouplingSequence::single(0, -2.0).unwrap();
    let grid = GridSpec::new(40.0, 1.0 / 64.0).unwrap();
    let profile = InitialProfile::Gaussian { center: 1.0, width: 1.0 };
    let mut req = EvolutionRequest::new(seq, profile, 1.0, Method::Stone, grid);
    req.output = Some(OutputGrid { start: -30.0, step: 1.0 / 32.0, count: 1921 });
    let stone = evolve(&req).unwrap();
    let op = grid_hamiltonian(&req.seq, grid).unwrap();
    let f: Vec<Complex64> = grid.xs().map(|s| req.initial.value(s)).collect();
    let pf = GridProjection::new(&op).apply(&f);
    let norm = |v: &[Complex64], h: f64| (h * v.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    let (a, b) = (norm(&stone.values, 1.0 / 32.0), norm(&pf, grid.step));
    assert!((a - b).abs() <= 1e-2 * b, "{a} vs {b}");
}
