//! Property tests: serialization round-trips, the split partition, the
//! bracket order, and the exact scaling laws.

use proptest::prelude::*;
use rami::harvest::{
    emit_field_csv, parse_field_csv, solve_state, GrowthFunction, HalfSpaceGrid,
};
use rami::irrigation::{
    emit_tree_csv, gilbert_energy, irrigation_cost, parse_tree_csv, star_plan,
};
use rami::measures::{Atom, DiscreteMeasure, RegionSpec};
use rami::sunlight::{sunlight_total, uniform_quadrature, ProjectionGrid};

fn atom(dim: usize) -> impl Strategy<Value = Atom> {
    (prop::collection::vec(-8.0..8.0f64, dim), 0.05..5.0f64)
        .prop_map(|(position, mass)| Atom { position, mass })
}

fn measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec(atom(dim), 1..=max_atoms)
        .prop_map(move |atoms| DiscreteMeasure::new(dim, atoms).unwrap())
}

fn any_measure(max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    (2usize..=3).prop_flat_map(move |d| measure(d, max_atoms))
}

/// Measure with every atom in the closed upper half-space.
fn upper_measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    measure(dim, max_atoms).prop_map(|mu| {
        let dim = mu.dim();
        let atoms = mu
            .atoms()
            .iter()
            .map(|a| {
                let mut position = a.position.clone();
                position[dim - 1] = position[dim - 1].abs();
                Atom { position, mass: a.mass }
            })
            .collect();
        DiscreteMeasure::new(dim, atoms).unwrap()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #[test]
    fn measure_csv_roundtrip_is_identity(mu in any_measure(8)) {
        let back = DiscreteMeasure::parse_csv(&mu.emit_csv()).unwrap();
        prop_assert_eq!(back.dim(), mu.dim());
        prop_assert_eq!(back.atoms().len(), mu.atoms().len());
        for (a, b) in back.atoms().iter().zip(mu.atoms()) {
            prop_assert_eq!(&a.position, &b.position);
            prop_assert_eq!(a.mass, b.mass);
        }
    }

    #[test]
    fn split_partitions_every_atom(mu in any_measure(8), r in 0.1..9.0f64) {
        let (inside, outside) = mu.split(RegionSpec::Ball(r)).unwrap();
        prop_assert_eq!(inside.atoms().len() + outside.atoms().len(), mu.atoms().len());
        for a in inside.atoms() {
            prop_assert!(a.radius() <= r);
        }
        for a in outside.atoms() {
            prop_assert!(a.radius() > r);
        }
        let (tail, ball) = mu.split(RegionSpec::Tail(r)).unwrap();
        prop_assert_eq!(tail.atoms().len(), outside.atoms().len());
        prop_assert_eq!(ball.atoms().len(), inside.atoms().len());
        let sum = inside.total_mass() + outside.total_mass();
        prop_assert!(rel(sum, mu.total_mass()) <= 1e-12);
    }

    #[test]
    fn bracket_is_ordered(mu in any_measure(5), alpha in 0.35..=1.0f64) {
        let br = irrigation_cost(&mu, alpha, 40, 0).unwrap();
        prop_assert!(br.lower >= 0.0);
        prop_assert!(br.lower <= br.upper * (1.0 + 1e-12));
        prop_assert!(br.upper.is_finite());
    }

    #[test]
    fn star_energy_scaling_laws(
        mu in any_measure(6),
        alpha in 0.1..=1.0f64,
        lambda in 0.25..4.0f64,
    ) {
        let tree = star_plan(&mu);
        let e = gilbert_energy(&tree, alpha).unwrap();
        let e_mass = gilbert_energy(&tree.scale_masses(lambda).unwrap(), alpha).unwrap();
        let e_dil = gilbert_energy(&tree.dilate(lambda).unwrap(), alpha).unwrap();
        prop_assert!(rel(e_mass, lambda.powf(alpha) * e) <= 1e-12);
        prop_assert!(rel(e_dil, lambda * e) <= 1e-12);
    }

    #[test]
    fn tree_csv_roundtrip_preserves_structure_and_energy(mu in any_measure(7)) {
        let tree = star_plan(&mu);
        let back = parse_tree_csv(&emit_tree_csv(&tree)).unwrap();
        prop_assert_eq!(back.node_count(), tree.node_count());
        back.check_irrigates(&mu).unwrap();
        for alpha in [0.6, 1.0] {
            let original = gilbert_energy(&tree, alpha).unwrap();
            let reparsed = gilbert_energy(&back, alpha).unwrap();
            prop_assert!(rel(reparsed, original) <= 1e-15);
        }
    }

    #[test]
    fn sunlight_monotone_under_adding_an_atom(
        mu in upper_measure(2, 5),
        extra in atom(2),
    ) {
        let mut position = extra.position.clone();
        position[1] = position[1].abs();
        let addition = DiscreteMeasure::new(2, vec![Atom { position, mass: extra.mass }]).unwrap();
        let bigger = mu.add(&addition).unwrap();
        let quad = uniform_quadrature(2, 12, |_| 1.0).unwrap();
        let grid = ProjectionGrid::for_measure(&bigger, 0.25).unwrap();
        let s1 = sunlight_total(&mu, &quad, &grid).unwrap();
        let s2 = sunlight_total(&bigger, &quad, &grid).unwrap();
        prop_assert!(s2 >= s1 * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn field_csv_roundtrip_preserves_values(
        x in -0.7..0.7f64,
        depth in -0.8..-0.2f64,
        mass in 0.3..2.0f64,
        kappa in 1.0..6.0f64,
    ) {
        let f = GrowthFunction::logistic(kappa, 1.0).unwrap();
        let grid = HalfSpaceGrid::new(2, 1.0, 0.25).unwrap();
        let mu = DiscreteMeasure::new(2, vec![Atom { position: vec![x, depth], mass }]).unwrap();
        let sol = solve_state(&mu, &f, &grid, 1.0, 1.0, 1.0, 1e-8, 20_000).unwrap();
        let back = parse_field_csv(&emit_field_csv(&sol.field)).unwrap();
        prop_assert_eq!(back.values(), sol.field.values());
        prop_assert_eq!(back.grid().dim(), 2);
        prop_assert!((back.grid().spacing() - 0.25).abs() <= 1e-9 * 0.25);
        prop_assert!((back.grid().half_width() - 1.0).abs() <= 1e-9);
    }
}
