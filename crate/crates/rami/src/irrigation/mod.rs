//! Branched transport of an atomic measure from the origin.
//!
//! A transport plan is a rooted tree whose edges carry flux equal to the
//! terminal mass in the subtree below them; an edge of length L carrying
//! flux F costs F^alpha * L. Exact costs are bracketed between a radial
//! tail-integral lower bound and the energy of the best tree found.

mod search;
mod weiszfeld;

pub use search::{irrigation_cost, optimize_tree};
pub use weiszfeld::{relocate_branch_points, Relocation};

use crate::error::{Error, Result};
use crate::measures::{Atom, DiscreteMeasure};

/// Rooted transport tree. Node 0 is the source at the origin; each other
/// node has one parent edge. `node_mass[i]` is the terminal mass deposited
/// at node i (zero for branch/junction nodes); edge fluxes are derived as
/// subtree mass sums, so Kirchhoff balance holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTree {
    dim: usize,
    positions: Vec<Vec<f64>>,
    parent: Vec<Option<usize>>,
    node_mass: Vec<f64>,
}

/// Two-sided estimate of the irrigation cost together with the witness
/// tree for the upper bound.
#[derive(Debug, Clone)]
pub struct CostBracket {
    pub lower: f64,
    pub upper: f64,
    pub tree: FlowTree,
}

impl CostBracket {
    /// Relative bracket width; zero for the empty plan.
    pub fn gap(&self) -> f64 {
        if self.upper == 0.0 {
            0.0
        } else {
            (self.upper - self.lower) / self.upper
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("cost exponent alpha {alpha} must lie in (0, 1]")));
    }
    Ok(())
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl FlowTree {
    /// Builds a tree from parallel arrays and validates the structure.
    pub fn new(
        dim: usize,
        positions: Vec<Vec<f64>>,
        parent: Vec<Option<usize>>,
        node_mass: Vec<f64>,
    ) -> Result<Self> {
        let tree = FlowTree { dim, positions, parent, node_mass };
        tree.validate()?;
        Ok(tree)
    }

    /// Root-only tree (irrigates the zero measure).
    pub fn root_only(dim: usize) -> Self {
        FlowTree {
            dim,
            positions: vec![vec![0.0; dim]],
            parent: vec![None],
            node_mass: vec![0.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i]
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn node_mass(&self, i: usize) -> f64 {
        self.node_mass[i]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.positions.len();
        if n == 0 || self.parent.len() != n || self.node_mass.len() != n {
            return Err(Error::Structure("node arrays have mismatched lengths".into()));
        }
        if self.parent[0].is_some() {
            return Err(Error::Structure("node 0 must be the root".into()));
        }
        if self.positions[0].iter().any(|&x| x != 0.0) {
            return Err(Error::Structure("root must sit at the origin".into()));
        }
        for (i, p) in self.positions.iter().enumerate() {
            if p.len() != self.dim {
                return Err(Error::Dimension { expected: self.dim, got: p.len() });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Structure(format!("node {i} has a non-finite coordinate")));
            }
            if !(self.node_mass[i] >= 0.0 && self.node_mass[i].is_finite()) {
                return Err(Error::Structure(format!("node {i} has invalid mass {}", self.node_mass[i])));
            }
        }
        // Every node must reach the root without cycles.
        for start in 1..n {
            let mut hops = 0;
            let mut at = start;
            loop {
                match self.parent[at] {
                    None => break,
                    Some(p) => {
                        if p >= n {
                            return Err(Error::Structure(format!("node {at} has out-of-range parent {p}")));
                        }
                        at = p;
                        hops += 1;
                        if hops > n {
                            return Err(Error::Structure(format!("cycle reaches node {start}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.positions.len()];
        for (i, p) in self.parent.iter().enumerate() {
            if let Some(p) = p {
                ch[*p].push(i);
            }
        }
        ch
    }

    /// Flux through the parent edge of each node (subtree terminal mass).
    /// Entry 0 is the total irrigated mass.
    pub fn fluxes(&self) -> Vec<f64> {
        let n = self.positions.len();
        let mut flux = self.node_mass.clone();
        // Children have larger depth; accumulate bottom-up by depth order.
        let mut order: Vec<usize> = (0..n).collect();
        let depth = self.depths();
        order.sort_by_key(|&i| std::cmp::Reverse(depth[i]));
        for i in order {
            if let Some(p) = self.parent[i] {
                flux[p] += flux[i];
            }
        }
        flux
    }

    fn depths(&self) -> Vec<usize> {
        let n = self.positions.len();
        let mut depth = vec![0usize; n];
        for i in 1..n {
            let mut d = 0;
            let mut at = i;
            while let Some(p) = self.parent[at] {
                at = p;
                d += 1;
            }
            depth[i] = d;
        }
        depth
    }

    /// Edge length from node i to its parent (0 for the root).
    pub fn edge_length(&self, i: usize) -> f64 {
        match self.parent[i] {
            Some(p) => distance(&self.positions[i], &self.positions[p]),
            None => 0.0,
        }
    }

    /// Multiplies all terminal masses by t > 0 (same topology and geometry).
    pub fn scale_masses(&self, t: f64) -> Result<FlowTree> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Parameter(format!("mass factor {t} must be finite and positive")));
        }
        let mut out = self.clone();
        for m in &mut out.node_mass {
            *m *= t;
        }
        Ok(out)
    }

    /// Scales all node positions by lambda > 0 (same topology and masses).
    pub fn dilate(&self, lambda: f64) -> Result<FlowTree> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Parameter(format!("dilation factor {lambda} must be finite and positive")));
        }
        let mut out = self.clone();
        for p in &mut out.positions {
            for x in p.iter_mut() {
                *x *= lambda;
            }
        }
        Ok(out)
    }

    /// The measure deposited at the tree's terminal nodes.
    pub fn terminal_measure(&self) -> Result<DiscreteMeasure> {
        let atoms: Vec<Atom> = (0..self.node_count())
            .filter(|&i| self.node_mass[i] > 0.0)
            .map(|i| Atom { position: self.positions[i].clone(), mass: self.node_mass[i] })
            .collect();
        if atoms.is_empty() {
            return Ok(DiscreteMeasure::empty(self.dim));
        }
        DiscreteMeasure::new(self.dim, atoms)
    }

    /// Checks that the terminal masses reproduce mu atom-for-atom, with
    /// each atom carried by exactly one node at the atom's position.
    pub fn check_irrigates(&self, mu: &DiscreteMeasure) -> Result<()> {
        let deposited = self.terminal_measure()?;
        if deposited != *mu {
            return Err(Error::Structure(
                "terminal masses do not reproduce the irrigated measure".into(),
            ));
        }
        // Distinct nodes may not share a position and both carry mass;
        // terminal_measure would have merged them, so recount.
        let carriers = (0..self.node_count()).filter(|&i| self.node_mass[i] > 0.0).count();
        if carriers != mu.atoms().len() {
            return Err(Error::Structure("an atom is split across multiple nodes".into()));
        }
        Ok(())
    }
}

/// Transport energy of the tree: sum over edges of flux^alpha * length.
pub fn gilbert_energy(tree: &FlowTree, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    tree.validate()?;
    let flux = tree.fluxes();
    let mut energy = 0.0;
    for i in 1..tree.node_count() {
        let f = flux[i];
        if f == 0.0 {
            continue;
        }
        let weight = if alpha == 1.0 { f } else { f.powf(alpha) };
        energy += weight * tree.edge_length(i);
    }
    Ok(energy)
}

/// Direct plan: one straight edge from the origin to every atom.
pub fn star_plan(mu: &DiscreteMeasure) -> FlowTree {
    let dim = mu.dim();
    let mut positions = vec![vec![0.0; dim]];
    let mut parent = vec![None];
    let mut node_mass = vec![0.0];
    for a in mu.atoms() {
        positions.push(a.position.clone());
        parent.push(Some(0));
        node_mass.push(a.mass);
    }
    FlowTree { dim, positions, parent, node_mass }
}

/// Lower bound on the irrigation cost: the exact integral over r of
/// tail_mass(r)^alpha, a finite step-function sum over sorted atom radii.
pub fn radial_lower_bound(mu: &DiscreteMeasure, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut radii: Vec<(f64, f64)> = mu.atoms().iter().map(|a| (a.radius(), a.mass)).collect();
    radii.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // Collapse equal radii.
    let mut groups: Vec<(f64, f64)> = Vec::with_capacity(radii.len());
    for (r, m) in radii {
        match groups.last_mut() {
            Some(last) if last.0 == r => last.1 += m,
            _ => groups.push((r, m)),
        }
    }
    // Suffix mass at or beyond each distinct radius.
    let mut suffix = vec![0.0; groups.len() + 1];
    for i in (0..groups.len()).rev() {
        suffix[i] = suffix[i + 1] + groups[i].1;
    }
    let mut bound = 0.0;
    let mut prev_r = 0.0;
    for (i, &(r, _)) in groups.iter().enumerate() {
        let width = r - prev_r;
        if width > 0.0 {
            let tail = suffix[i];
            let weight = if alpha == 1.0 { tail } else { tail.powf(alpha) };
            bound += width * weight;
        }
        prev_r = r;
    }
    Ok(bound)
}

/// Single-radius lower bound r * tail_mass(r)^alpha.
pub fn lower_bound_at(mu: &DiscreteMeasure, alpha: f64, r: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("radius {r} must be finite and nonnegative")));
    }
    let tail = mu.tail_mass(r);
    if tail == 0.0 {
        return Ok(0.0);
    }
    let weight = if alpha == 1.0 { tail } else { tail.powf(alpha) };
    Ok(r * weight)
}

/// Uniform mass pi * r^beta on the open upper half-circle of radius r,
/// discretized into n_arcs equal arcs with the arc mass at each midpoint.
/// The plan routes everything to (-r, 0) and then along consecutive chords,
/// shedding one arc mass per stop.
pub fn halfcircle_plan(r: f64, beta: f64, n_arcs: usize) -> Result<(FlowTree, DiscreteMeasure)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Parameter(format!("radius {r} must be finite and positive")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Parameter(format!("mass exponent beta {beta} must lie in (0, 1)")));
    }
    if n_arcs == 0 {
        return Err(Error::Parameter("n_arcs must be positive".into()));
    }
    let total = std::f64::consts::PI * r.powf(beta);
    let arc_mass = total / n_arcs as f64;

    let mut positions = vec![vec![0.0, 0.0], vec![-r, 0.0]];
    let mut parent: Vec<Option<usize>> = vec![None, Some(0)];
    let mut node_mass = vec![0.0, 0.0];
    // Walk from the entry point at angle pi down to angle 0; midpoint of
    // arc k sits at angle (k + 1/2) * pi / n, visited in decreasing k.
    for (step, k) in (0..n_arcs).rev().enumerate() {
        let theta = (k as f64 + 0.5) * std::f64::consts::PI / n_arcs as f64;
        positions.push(vec![r * theta.cos(), r * theta.sin()]);
        parent.push(Some(step + 1));
        node_mass.push(arc_mass);
    }
    let tree = FlowTree { dim: 2, positions: positions.clone(), parent, node_mass };
    let atoms = positions[2..]
        .iter()
        .map(|p| Atom { position: p.clone(), mass: arc_mass })
        .collect();
    let mu = DiscreteMeasure::new(2, atoms)?;
    Ok((tree, mu))
}

/// Tree emission: one edge per row in breadth-first order, parent position
/// first, then child position, then the edge flux.
pub fn emit_tree_csv(tree: &FlowTree) -> String {
    let d = tree.dim();
    let mut out = String::new();
    for k in 0..d {
        out.push_str(&format!("xp{},", k + 1));
    }
    for k in 0..d {
        out.push_str(&format!("xc{},", k + 1));
    }
    out.push_str("flux\n");
    let flux = tree.fluxes();
    let children = tree.children();
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        for &child in &children[node] {
            if flux[child] == 0.0 {
                // A fluxless subtree carries no terminal mass; dropping it
                // keeps every emitted file parseable.
                continue;
            }
            for x in tree.position(node) {
                out.push_str(&format!("{x},"));
            }
            for x in tree.position(child) {
                out.push_str(&format!("{x},"));
            }
            out.push_str(&format!("{}\n", flux[child]));
            queue.push_back(child);
        }
    }
    out
}

/// Rebuilds a tree from its CSV emission. Terminal masses are recovered as
/// each edge's flux minus the fluxes of its child edges. Parent positions
/// resolve against nodes already read, earliest match first: the format
/// cannot distinguish coincident nodes, and the emitter writes parents
/// before children, so the earliest node is the one a well-formed file
/// means. A zero-length edge (a terminal sitting on its parent) is the
/// only way our emitters produce coincident nodes.
pub fn parse_tree_csv(text: &str) -> Result<FlowTree> {
    let mut dim: Option<usize> = None;
    let mut positions: Vec<Vec<f64>> = Vec::new();
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut flux: Vec<f64> = vec![0.0];

    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 || fields.len() % 2 == 0 {
            return Err(Error::Parse {
                row,
                msg: format!("expected 2*dim+1 fields with dim >= 2, got {}", fields.len()),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|s| s.trim().parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if dim.is_none() && positions.is_empty() => continue, // header
            Err(e) => return Err(Error::Parse { row, msg: format!("bad number: {e}") }),
        };
        let d = (values.len() - 1) / 2;
        match dim {
            None => {
                dim = Some(d);
                positions.push(vec![0.0; d]);
            }
            Some(existing) if existing != d => {
                return Err(Error::Parse { row, msg: format!("expected dimension {existing}, got {d}") })
            }
            _ => {}
        }
        let parent_pos = &values[..d];
        let child_pos = values[d..2 * d].to_vec();
        let edge_flux = values[2 * d];
        if !(edge_flux > 0.0 && edge_flux.is_finite()) {
            return Err(Error::Parse { row, msg: format!("edge flux {edge_flux} must be positive") });
        }
        let parent_id = match (0..positions.len()).find(|&i| positions[i].as_slice() == parent_pos) {
            Some(i) => i,
            None => {
                return Err(Error::Parse {
                    row,
                    msg: format!("edge references unknown parent at {parent_pos:?}"),
                })
            }
        };
        positions.push(child_pos);
        parent.push(Some(parent_id));
        flux.push(edge_flux);
    }
    let d = dim.ok_or(Error::Parse { row: 0, msg: "no edges in tree file".into() })?;

    // Terminal mass = flux in minus flux out.
    let mut node_mass = flux.clone();
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            node_mass[*p] -= flux[i];
        }
    }
    node_mass[0] = 0.0;
    let scale = flux.iter().cloned().fold(1.0, f64::max);
    for (i, m) in node_mass.iter_mut().enumerate() {
        if *m < -1e-9 * scale {
            return Err(Error::Parse {
                row: 0,
                msg: format!("node {i} sheds more flux than it receives ({m})"),
            });
        }
        if *m < 0.0 {
            *m = 0.0;
        }
    }
    FlowTree::new(d, positions, parent, node_mass)
}
