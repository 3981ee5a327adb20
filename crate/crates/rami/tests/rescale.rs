//! Normalization identities: closed forms of the rescaling maps and the
//! exactness of the coupled-grid state correspondence.

use rami::harvest::{harvest_value, solve_state, GrowthFunction, HalfSpaceGrid};
use rami::measures::{Atom, DiscreteMeasure};
use rami::optimize::{
    branch_exponent, branch_measure_map, branch_rescale, root_measure_map, root_rescale,
    root_state_value,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn root_rescale_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let d = if rng.random::<bool>() { 2 } else { 3 };
        let alpha = rng.random_range(0.75..1.0);
        let (a, b, sigma, c) = (
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..3.0),
            rng.random_range(0.3..3.0),
        );
        let (lambda, c_tilde, factor) = root_rescale(a, b, sigma, c, alpha, d).unwrap();
        assert!(rel(lambda * lambda, sigma / (a * b)) <= 1e-14);
        assert!(rel(factor, a * lambda.powi(d as i32)) <= 1e-14);
        let energy_side = c * sigma.powf(alpha) * lambda.powf(alpha * (d as f64 - 2.0) + 1.0);
        assert!(rel(c_tilde * factor, energy_side) <= 1e-13);
    }
}

#[test]
fn branch_rescale_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let d = if rng.random::<bool>() { 2 } else { 3 };
        let alpha = rng.random_range(0.6..1.0);
        let b = rng.random_range(0.3..3.0);
        let c = rng.random_range(0.3..3.0);
        let (lambda, factor) = branch_rescale(b, c, alpha, d).unwrap();
        let d1 = branch_exponent(alpha, d).unwrap();
        assert!(rel(lambda.powf(d1), b / c) <= 1e-13);
        assert!(rel(factor, b * lambda.powi(d as i32 - 1)) <= 1e-13);
    }
}

#[test]
fn branch_measure_map_scales_mass_and_support() {
    let mu = DiscreteMeasure::new(
        3,
        vec![
            Atom { position: vec![0.4, -0.3, 0.9], mass: 1.1 },
            Atom { position: vec![-1.2, 0.2, 0.1], mass: 0.4 },
        ],
    )
    .unwrap();
    let lambda = 1.7;
    let mapped = branch_measure_map(&mu, lambda).unwrap();
    assert!(rel(mapped.total_mass(), lambda * lambda * mu.total_mass()) <= 1e-14);
    assert!(rel(mapped.support_radius(), lambda * mu.support_radius()) <= 1e-14);
}

/// With lambda = 2 the physical lattice (spacing 2h) is the image of the
/// normalized one, the Gauss-Seidel sweeps agree node for node, and the
/// harvest identity holds to solver precision rather than O(h).
#[test]
fn coupled_grid_state_map_is_exact() {
    let f = GrowthFunction::logistic(4.0, 1.0).unwrap();
    let nu = DiscreteMeasure::new(
        2,
        vec![
            Atom { position: vec![0.3, -0.35], mass: 0.8 },
            Atom { position: vec![-0.55, -0.2], mass: 0.6 },
            Atom { position: vec![0.1, -0.7], mass: 0.5 },
        ],
    )
    .unwrap();
    let (a, b, sigma) = (1.0, 1.0, 4.0);
    let (lambda, _, factor) = root_rescale(a, b, sigma, 0.3, 1.0, 2).unwrap();
    assert_eq!(lambda, 2.0);
    let h = 0.05;
    let grid_norm = HalfSpaceGrid::new(2, 2.0, h).unwrap();
    let sol_norm = solve_state(&nu, &f, &grid_norm, 1.0, 1.0, 1.0, 1e-10, 100_000).unwrap();
    let mu = root_measure_map(&nu, lambda, sigma).unwrap();
    let grid_phys = HalfSpaceGrid::new(2, 2.0 * lambda, lambda * h).unwrap();
    let sol_phys = solve_state(&mu, &f, &grid_phys, sigma, a, b, 1e-10, 100_000).unwrap();

    let h_norm = harvest_value(&sol_norm.field, &nu).unwrap();
    let h_phys = harvest_value(&sol_phys.field, &mu).unwrap();
    assert!(
        rel(h_phys, factor * h_norm) <= 1e-9,
        "coupled-grid harvest identity off: {h_phys} vs {}",
        factor * h_norm
    );

    for atom in nu.atoms() {
        let x: Vec<f64> = atom.position.iter().map(|v| lambda * v).collect();
        let through_map = root_state_value(&sol_norm.field, &x, lambda, b).unwrap();
        let direct = sol_phys.field.value_at(&x).unwrap();
        assert!(
            rel(direct, through_map) <= 1e-9,
            "state map off at {x:?}: {direct} vs {through_map}"
        );
    }
}
