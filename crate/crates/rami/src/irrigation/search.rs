//! Greedy topology search over transport trees. Moves are junction
//! insertion (merging two sibling edges) and subtree reattachment; every
//! accepted move strictly lowers the energy, so traces are monotone and
//! alpha = 1 always keeps the straight star plan.

use super::weiszfeld::relocate_branch_points;
use super::{check_alpha, distance, gilbert_energy, radial_lower_bound, star_plan, CostBracket, FlowTree};
use crate::error::Result;
use crate::measures::DiscreteMeasure;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relocation sweeps spent polishing one candidate move.
const CANDIDATE_SWEEPS: usize = 12;
/// Relocation sweeps spent after accepting a move.
const ACCEPT_SWEEPS: usize = 60;
const RELOCATE_TOL: f64 = 1e-9;
/// Relative slack below which a move does not count as an improvement.
const IMPROVE_EPS: f64 = 1e-12;

struct Budget {
    left: usize,
}

impl Budget {
    fn take(&mut self, want: usize) -> usize {
        let got = want.min(self.left);
        self.left -= got;
        got
    }
    fn empty(&self) -> bool {
        self.left == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    /// Insert a junction above sibling children (u, v) of their parent.
    Merge(usize, usize),
    /// Reparent subtree u under node w.
    Reattach(usize, usize),
    /// Reparent subtree u under a new junction splitting the parent edge of q.
    ReattachEdge(usize, usize),
}

/// Improves the transport tree for mu by greedy best-improvement moves with
/// seeded random restarts. `budget` counts relocation sweeps across the
/// whole run; the result is deterministic for a fixed (mu, alpha, budget,
/// seed). Returns the best tree found together with its relocation
/// convergence flag.
pub fn optimize_tree(
    mu: &DiscreteMeasure,
    alpha: f64,
    budget: usize,
    seed: u64,
) -> Result<(FlowTree, bool)> {
    check_alpha(alpha)?;
    if mu.is_empty() {
        return Ok((FlowTree::root_only(mu.dim()), true));
    }
    if alpha == 1.0 {
        // Energy = sum of mass * distance is minimized by straight edges,
        // so the star is exact and no search is needed.
        return Ok((star_plan(mu), true));
    }
    let mut budget = Budget { left: budget };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (mut best, mut best_energy, mut best_conv) =
        greedy_descent(mu, alpha, &mut budget, None)?;

    // Restarts explore different local optima by accepting the first
    // improving move in a shuffled candidate order.
    let mut restart = 0;
    while !budget.empty() && restart < 2 {
        restart += 1;
        let shuffle_seed = rng.random::<u64>();
        let (tree, energy, conv) = greedy_descent(mu, alpha, &mut budget, Some(shuffle_seed))?;
        if energy < best_energy - IMPROVE_EPS * best_energy.max(1.0) {
            best = tree;
            best_energy = energy;
            best_conv = conv;
        }
    }
    let _ = best_energy;
    Ok((best, best_conv))
}

/// Cost bracket around the irrigation cost of mu: radial tail integral
/// below, best found tree energy above.
pub fn irrigation_cost(
    mu: &DiscreteMeasure,
    alpha: f64,
    budget: usize,
    seed: u64,
) -> Result<CostBracket> {
    let (tree, _) = optimize_tree(mu, alpha, budget, seed)?;
    let upper = gilbert_energy(&tree, alpha)?;
    let lower = radial_lower_bound(mu, alpha)?;
    Ok(CostBracket { lower, upper, tree })
}

fn greedy_descent(
    mu: &DiscreteMeasure,
    alpha: f64,
    budget: &mut Budget,
    shuffle_seed: Option<u64>,
) -> Result<(FlowTree, f64, bool)> {
    let mut tree = star_plan(mu);
    let mut energy = gilbert_energy(&tree, alpha)?;
    let mut converged = true;
    loop {
        if budget.empty() {
            break;
        }
        let mut candidates = enumerate_moves(&tree);
        if let Some(s) = shuffle_seed {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            candidates.shuffle(&mut rng);
        }
        let mut accepted: Option<(FlowTree, f64, bool)> = None;
        for mv in candidates {
            if budget.empty() {
                break;
            }
            let candidate = match apply_move(&tree, mv) {
                Some(t) => t,
                None => continue,
            };
            let sweeps = budget.take(CANDIDATE_SWEEPS);
            let out = relocate_branch_points(&candidate, alpha, RELOCATE_TOL, sweeps)?;
            let e = gilbert_energy(&out.tree, alpha)?;
            if e < energy - IMPROVE_EPS * energy.max(1.0) {
                let better = match &accepted {
                    Some((_, e_acc, _)) => e < *e_acc,
                    None => true,
                };
                if better {
                    accepted = Some((out.tree, e, out.converged));
                    // First improvement suffices on shuffled restarts.
                    if shuffle_seed.is_some() {
                        break;
                    }
                }
            }
        }
        match accepted {
            Some((t, _, _)) => {
                let polished = cleanup(&t);
                let sweeps = budget.take(ACCEPT_SWEEPS);
                let out = relocate_branch_points(&polished, alpha, RELOCATE_TOL, sweeps)?;
                let e = gilbert_energy(&out.tree, alpha)?;
                // Accepted moves must keep the trace monotone.
                assert!(
                    e <= energy + IMPROVE_EPS * energy.max(1.0),
                    "accepted move raised energy from {energy} to {e}"
                );
                tree = cleanup(&out.tree);
                energy = e;
                converged = out.converged;
            }
            None => break,
        }
    }
    Ok((tree, energy, converged))
}

fn enumerate_moves(tree: &FlowTree) -> Vec<Move> {
    let children = tree.children();
    let n = tree.node_count();
    let mut moves = Vec::new();
    for p in 0..n {
        let ch = &children[p];
        for i in 0..ch.len() {
            for j in (i + 1)..ch.len() {
                moves.push(Move::Merge(ch[i], ch[j]));
            }
        }
    }
    for u in 1..n {
        let sub = subtree_of(tree, u);
        for w in 0..n {
            if sub[w] || Some(w) == tree.parent(u) {
                continue;
            }
            moves.push(Move::Reattach(u, w));
            if w != 0 && !sub[tree.parent(w).unwrap()] {
                moves.push(Move::ReattachEdge(u, w));
            }
        }
    }
    moves
}

fn subtree_of(tree: &FlowTree, u: usize) -> Vec<bool> {
    let n = tree.node_count();
    let mut inside = vec![false; n];
    inside[u] = true;
    // Parents precede children in no particular order here, so fixpoint.
    let mut changed = true;
    while changed {
        changed = false;
        for i in 1..n {
            if !inside[i] && inside[tree.parent(i).unwrap()] {
                inside[i] = true;
                changed = true;
            }
        }
    }
    inside
}

fn apply_move(tree: &FlowTree, mv: Move) -> Option<FlowTree> {
    let mut t = tree.clone();
    match mv {
        Move::Merge(u, v) => {
            let p = t.parent[u]?;
            if t.parent[v] != Some(p) {
                return None;
            }
            let dim = t.dim();
            let mut pos = vec![0.0; dim];
            for k in 0..dim {
                pos[k] = (t.positions[p][k] + t.positions[u][k] + t.positions[v][k]) / 3.0;
            }
            t.positions.push(pos);
            t.parent.push(Some(p));
            t.node_mass.push(0.0);
            let s = t.positions.len() - 1;
            t.parent[u] = Some(s);
            t.parent[v] = Some(s);
        }
        Move::Reattach(u, w) => {
            t.parent[u] = Some(w);
        }
        Move::ReattachEdge(u, q) => {
            let p = t.parent[q]?;
            // Junction at the point of the edge (p, q) nearest to u.
            let a = &t.positions[p];
            let b = &t.positions[q];
            let x = &t.positions[u];
            let mut ab2 = 0.0;
            let mut ax_ab = 0.0;
            for k in 0..t.dim() {
                let d = b[k] - a[k];
                ab2 += d * d;
                ax_ab += (x[k] - a[k]) * d;
            }
            let s_frac = if ab2 > 0.0 { (ax_ab / ab2).clamp(0.0, 1.0) } else { 0.5 };
            let pos: Vec<f64> = (0..t.dim()).map(|k| a[k] + s_frac * (b[k] - a[k])).collect();
            t.positions.push(pos);
            t.parent.push(Some(p));
            t.node_mass.push(0.0);
            let s = t.positions.len() - 1;
            t.parent[q] = Some(s);
            t.parent[u] = Some(s);
        }
    }
    (t.validate().is_ok()).then_some(t)
}

/// Removes junctions that no longer shape the tree: childless ones vanish,
/// single-child ones are spliced out. Node order among survivors is kept.
fn cleanup(tree: &FlowTree) -> FlowTree {
    let mut t = tree.clone();
    loop {
        let children = t.children();
        let n = t.node_count();
        let mut drop: Option<usize> = None;
        for i in 1..n {
            if t.node_mass[i] > 0.0 {
                continue;
            }
            if children[i].is_empty() {
                drop = Some(i);
                break;
            }
            if children[i].len() == 1 {
                // Splice: the lone child inherits the grandparent.
                let c = children[i][0];
                t.parent[c] = t.parent[i];
                drop = Some(i);
                break;
            }
        }
        let Some(gone) = drop else { break };
        let mut positions = Vec::with_capacity(n - 1);
        let mut parent = Vec::with_capacity(n - 1);
        let mut node_mass = Vec::with_capacity(n - 1);
        let mut remap = vec![usize::MAX; n];
        for i in 0..n {
            if i == gone {
                continue;
            }
            remap[i] = positions.len();
            positions.push(t.positions[i].clone());
            parent.push(t.parent[i]);
            node_mass.push(t.node_mass[i]);
        }
        for p in parent.iter_mut() {
            if let Some(old) = *p {
                *p = Some(remap[old]);
            }
        }
        t = FlowTree { dim: t.dim, positions, parent, node_mass };
    }
    t
}

#[allow(dead_code)]
fn debug_edge_lengths(tree: &FlowTree) -> Vec<f64> {
    (1..tree.node_count())
        .map(|i| distance(tree.position(i), tree.position(tree.parent(i).unwrap())))
        .collect()
}
