//! Independent oracle for small irrigation instances: enumerate every
//! rooted topology over the terminals plus up to three movable junction
//! nodes, relocate the junctions to a first-order stationary point, and
//! take the cheapest candidate. The search result must agree with that
//! exhaustive minimum to 2 percent.

use rami::irrigation::irrigation_cost;
use rami::measures::{Atom, DiscreteMeasure};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

struct Topology {
    /// parent[i] for node i in 1..node_count; node 0 is the root.
    parent: Vec<usize>,
    n_terminals: usize,
}

impl Topology {
    fn node_count(&self) -> usize {
        self.parent.len() + 1
    }

    /// Subtree mass below each node; junctions carry no mass of their own.
    fn fluxes(&self, masses: &[f64]) -> Vec<f64> {
        let total = self.node_count();
        let mut flux = vec![0.0; total];
        for (i, f) in flux.iter_mut().enumerate().take(self.n_terminals + 1).skip(1) {
            *f = masses[i - 1];
        }
        // Push each node's mass up the parent chain.
        let mut acc = vec![0.0; total];
        for i in 1..total {
            let mut j = i;
            while j != 0 {
                acc[j] += flux[i];
                j = self.parent[j - 1];
            }
        }
        acc
    }

    fn energy(&self, pos: &[Vec<f64>], flux: &[f64], alpha: f64) -> f64 {
        (1..self.node_count())
            .map(|i| {
                let p = self.parent[i - 1];
                let len = dist(&pos[i], &pos[p]);
                flux[i].powf(alpha) * len
            })
            .sum()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// One weighted-median sweep for every junction node: the standard
/// fixed-point step for sum_k w_k |x - y_k| with the incident edge
/// weights, skipped when the junction sits on an anchor.
fn relocate_junctions(topo: &Topology, pos: &mut [Vec<f64>], flux: &[f64], alpha: f64) {
    let total = topo.node_count();
    let dim = pos[0].len();
    for j in topo.n_terminals + 1..total {
        let mut anchors: Vec<(f64, usize)> = vec![(flux[j].powf(alpha), topo.parent[j - 1])];
        for i in 1..total {
            if topo.parent[i - 1] == j {
                anchors.push((flux[i].powf(alpha), i));
            }
        }
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        let mut pinned = false;
        for &(w, k) in &anchors {
            let d = dist(&pos[j], &pos[k]);
            if d < 1e-12 {
                pinned = true;
                break;
            }
            for (t, nt) in num.iter_mut().enumerate() {
                *nt += w * pos[k][t] / d;
            }
            den += w / d;
        }
        if !pinned && den > 0.0 {
            for (t, nt) in num.iter().enumerate() {
                pos[j][t] = nt / den;
            }
        }
    }
}

/// True when every node reaches the root and every junction branches.
fn valid_topology(topo: &Topology) -> bool {
    let total = topo.node_count();
    for start in 1..total {
        let mut j = start;
        let mut hops = 0;
        while j != 0 {
            j = topo.parent[j - 1];
            hops += 1;
            if hops > total {
                return false;
            }
        }
    }
    let mut children = vec![0usize; total];
    for i in 1..total {
        children[topo.parent[i - 1]] += 1;
    }
    (topo.n_terminals + 1..total).all(|j| children[j] >= 2)
}

/// Exhaustive minimum over all topologies with up to `max_junctions`
/// movable junction nodes.
fn oracle_energy(mu: &DiscreteMeasure, alpha: f64, max_junctions: usize) -> f64 {
    let n = mu.atoms().len();
    let dim = mu.dim();
    let masses: Vec<f64> = mu.atoms().iter().map(|a| a.mass).collect();
    let centroid: Vec<f64> = (0..dim)
        .map(|t| mu.atoms().iter().map(|a| a.position[t]).sum::<f64>() / n as f64)
        .collect();
    let mut best = f64::INFINITY;
    for s in 0..=max_junctions {
        let total = 1 + n + s;
        let slots = n + s;
        let mut parent = vec![0usize; slots];
        loop {
            let topo = Topology { parent: parent.clone(), n_terminals: n };
            let self_loop = (1..total).any(|i| topo.parent[i - 1] == i);
            if !self_loop && valid_topology(&topo) {
                let mut pos: Vec<Vec<f64>> = Vec::with_capacity(total);
                pos.push(vec![0.0; dim]);
                for a in mu.atoms() {
                    pos.push(a.position.clone());
                }
                for j in 0..s {
                    // Distinct starts so coincident junctions separate.
                    let mut p = centroid.clone();
                    p[0] += 0.05 * (j as f64 + 1.0);
                    pos.push(p);
                }
                let flux = topo.fluxes(&masses);
                for _ in 0..60 {
                    relocate_junctions(&topo, &mut pos, &flux, alpha);
                }
                best = best.min(topo.energy(&pos, &flux, alpha));
            }
            // Advance the parent vector as a base-`total` counter.
            let mut k = 0;
            loop {
                if k == slots {
                    break;
                }
                parent[k] += 1;
                if parent[k] < total {
                    break;
                }
                parent[k] = 0;
                k += 1;
            }
            if k == slots {
                break;
            }
        }
    }
    best
}

fn random_instance(seed: u64, n: usize) -> DiscreteMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms = (0..n)
        .map(|_| Atom {
            position: vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            mass: rng.random_range(0.3..2.0),
        })
        .collect();
    DiscreteMeasure::new(2, atoms).unwrap()
}

fn best_search_energy(mu: &DiscreteMeasure, alpha: f64) -> f64 {
    // Budget 1200 gives the topology perturbations room to escape the
    // first local optimum on four-atom instances.
    (0..3)
        .map(|seed| irrigation_cost(mu, alpha, 1200, seed).unwrap().upper)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn search_matches_exhaustive_topology_minimum_on_three_atoms() {
    let mu = random_instance(31, 3);
    for alpha in [0.5, 0.8] {
        let oracle = oracle_energy(&mu, alpha, 2);
        let search = best_search_energy(&mu, alpha);
        let spread = (search - oracle).abs() / oracle;
        assert!(
            spread <= 0.02,
            "alpha {alpha}: search {search} vs exhaustive {oracle} differ by {spread:.4}"
        );
        let lower = irrigation_cost(&mu, alpha, 400, 0).unwrap().lower;
        assert!(oracle >= lower * (1.0 - 1e-9), "exhaustive {oracle} beats lower bound {lower}");
    }
}

#[test]
fn search_matches_exhaustive_topology_minimum_on_four_atoms() {
    for (seed, alpha) in [(41u64, 0.5f64), (42, 0.85)] {
        let mu = random_instance(seed, 4);
        let oracle = oracle_energy(&mu, alpha, 3);
        let search = best_search_energy(&mu, alpha);
        let spread = (search - oracle).abs() / oracle;
        assert!(
            spread <= 0.02,
            "seed {seed} alpha {alpha}: search {search} vs exhaustive {oracle} differ by {spread:.4}"
        );
    }
}

#[test]
fn exhaustive_minimum_confirms_star_on_separated_atoms() {
    // Two atoms pulled far apart at alpha = 1: no junction helps, the
    // exhaustive minimum must coincide with the mass-weighted distances.
    let mu = DiscreteMeasure::new(
        2,
        vec![
            Atom { position: vec![-3.0, 0.5], mass: 1.2 },
            Atom { position: vec![3.0, 0.4], mass: 0.7 },
        ],
    )
    .unwrap();
    let oracle = oracle_energy(&mu, 1.0, 2);
    let exact: f64 = mu.atoms().iter().map(|a| a.mass * a.radius()).sum();
    assert!((oracle - exact).abs() <= 1e-9 * exact);
}
