//! Branch-point relocation: each junction node is pulled toward the
//! weighted Fermat point of its tree neighbors, weights being edge fluxes
//! raised to alpha. Junction positions are free; nodes carrying terminal
//! mass stay pinned to their atom.

use super::{check_alpha, distance, FlowTree};
use crate::error::Result;

/// Distance floor in Weiszfeld updates; keeps the iteration defined when a
/// junction lands on a neighbor.
const DIST_FLOOR: f64 = 1e-12;

/// Outcome of a relocation pass.
#[derive(Debug, Clone)]
pub struct Relocation {
    pub tree: FlowTree,
    /// False when max_iter sweeps ran without the displacement dropping
    /// below tolerance; the tree is still the best iterate seen.
    pub converged: bool,
    pub sweeps: usize,
}

/// Sweeps over movable junctions until the largest single-sweep
/// displacement falls below `tol` or `max_iter` sweeps elapse. The local
/// edge cost around a junction never increases: an update that would
/// (through the damping guard) is halved toward the current position and
/// dropped if still worse.
pub fn relocate_branch_points(
    tree: &FlowTree,
    alpha: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Relocation> {
    check_alpha(alpha)?;
    tree.validate()?;
    let mut tree = tree.clone();
    let children = tree.children();
    let flux = tree.fluxes();
    let movable: Vec<usize> = (1..tree.node_count())
        .filter(|&i| tree.node_mass(i) == 0.0 && !children[i].is_empty())
        .collect();
    if movable.is_empty() {
        return Ok(Relocation { tree, converged: true, sweeps: 0 });
    }
    let weight = |f: f64| if alpha == 1.0 { f } else { f.powf(alpha) };

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_move = 0.0_f64;
        for &v in &movable {
            let p = tree.parent(v).unwrap();
            // Anchors: parent through the edge flux of v, children through
            // their own edge fluxes.
            let mut anchors: Vec<(usize, f64)> = vec![(p, weight(flux[v]))];
            anchors.extend(children[v].iter().map(|&c| (c, weight(flux[c]))));

            let local = |x: &[f64]| -> f64 {
                anchors.iter().map(|&(a, w)| w * distance(x, tree.position(a))).sum()
            };
            let current = tree.position(v).to_vec();
            let cost_now = local(&current);

            // Weiszfeld step with a distance floor.
            let mut num = vec![0.0; tree.dim()];
            let mut den = 0.0;
            for &(a, w) in &anchors {
                let d = distance(&current, tree.position(a)).max(DIST_FLOOR);
                let inv = w / d;
                for (k, nk) in num.iter_mut().enumerate() {
                    *nk += inv * tree.position(a)[k];
                }
                den += inv;
            }
            if den == 0.0 {
                continue;
            }
            let mut candidate: Vec<f64> = num.iter().map(|n| n / den).collect();

            // Damping guard: halve toward the current point while the step
            // raises the local cost.
            let mut tries = 0;
            while local(&candidate) > cost_now && tries < 30 {
                for (c, cur) in candidate.iter_mut().zip(&current) {
                    *c = 0.5 * (*c + cur);
                }
                tries += 1;
            }
            if local(&candidate) > cost_now {
                continue;
            }
            let moved = distance(&candidate, &current);
            if moved > max_move {
                max_move = moved;
            }
            tree.positions[v] = candidate;
        }
        if max_move < tol {
            converged = true;
            break;
        }
    }
    Ok(Relocation { tree, converged, sweeps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irrigation::gilbert_energy;

    /// Symmetric pair at (+-1, 1), unit masses, branch point on the axis.
    fn y_tree(y0: f64) -> FlowTree {
        FlowTree::new(
            2,
            vec![vec![0.0, 0.0], vec![0.0, y0], vec![1.0, 1.0], vec![-1.0, 1.0]],
            vec![None, Some(0), Some(1), Some(1)],
            vec![0.0, 0.0, 1.0, 1.0],
        )
        .unwrap()
    }

    /// Energy of the symmetric Y as a function of the junction height.
    fn y_energy(alpha: f64, y: f64) -> f64 {
        2.0_f64.powf(alpha) * y + 2.0 * (1.0 + (1.0 - y) * (1.0 - y)).sqrt()
    }

    fn grid_minimum(alpha: f64) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        let mut y = 0.0;
        while y <= 1.0 {
            let e = y_energy(alpha, y);
            if e < best.1 {
                best = (y, e);
            }
            y += 1e-4;
        }
        best
    }

    #[test]
    fn symmetric_junction_converges_to_grid_search_optimum() {
        // alpha = 0.5 at opening half-angle 45 degrees is the marginal
        // branching geometry: the optimum collapses onto the origin.
        let alpha = 0.5;
        let (y_star, e_star) = grid_minimum(alpha);
        let out = relocate_branch_points(&y_tree(0.8), alpha, 1e-7, 20_000).unwrap();
        assert!(out.converged, "no convergence in {} sweeps", out.sweeps);
        let junction = out.tree.position(1);
        assert!(junction[0].abs() < 1e-6);
        assert!((junction[1] - y_star).abs() < 1e-3, "junction y {} vs oracle {y_star}", junction[1]);
        let e = gilbert_energy(&out.tree, alpha).unwrap();
        assert!((e - e_star).abs() < 1e-3, "energy {e} vs oracle {e_star}");
    }

    #[test]
    fn interior_optimum_found_when_branching_pays() {
        // alpha = 0.9 narrows the trunk penalty: 2^0.9 < 2 cos(45deg) fails,
        // so pick a narrower pair where branching strictly helps.
        let alpha = 0.9;
        let tree = FlowTree::new(
            2,
            vec![vec![0.0, 0.0], vec![0.0, 0.5], vec![0.3, 2.0], vec![-0.3, 2.0]],
            vec![None, Some(0), Some(1), Some(1)],
            vec![0.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        let out = relocate_branch_points(&tree, alpha, 1e-9, 20_000).unwrap();
        assert!(out.converged);
        let y = out.tree.position(1)[1];
        assert!(y > 0.1 && y < 2.0, "junction height {y}");
        // Matches a fine 1-d scan of the symmetric energy.
        let scan = |y: f64| {
            2.0_f64.powf(alpha) * y + 2.0 * (0.09 + (2.0 - y) * (2.0 - y)).sqrt()
        };
        let mut best = f64::INFINITY;
        let mut yy = 0.0;
        while yy <= 2.0 {
            best = best.min(scan(yy));
            yy += 1e-4;
        }
        let e = gilbert_energy(&out.tree, alpha).unwrap();
        assert!((e - best).abs() < 1e-3, "energy {e} vs scan {best}");
    }

    #[test]
    fn energy_never_increases_across_sweeps() {
        let alpha = 0.6;
        let mut tree = y_tree(0.9);
        let mut prev = gilbert_energy(&tree, alpha).unwrap();
        for _ in 0..50 {
            let out = relocate_branch_points(&tree, alpha, 0.0, 1).unwrap();
            tree = out.tree;
            let e = gilbert_energy(&tree, alpha).unwrap();
            assert!(e <= prev + 1e-12, "sweep raised energy: {e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn trees_without_junctions_are_returned_unchanged() {
        let tree = FlowTree::new(
            2,
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![None, Some(0)],
            vec![0.0, 1.0],
        )
        .unwrap();
        let out = relocate_branch_points(&tree, 0.5, 1e-9, 10).unwrap();
        assert!(out.converged);
        assert_eq!(out.sweeps, 0);
        assert_eq!(out.tree, tree);
    }
}
