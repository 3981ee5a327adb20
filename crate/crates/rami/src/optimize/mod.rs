//! Payoff maximization over discrete measures for both problems: sunlight
//! minus transport cost on the upper half-space, harvest minus transport
//! cost on the lower one. The optimizer is a strict-ascent local search
//! over lattice moves, with the structural pruning moves (far truncation,
//! shell removal, half-circle swap, low-state pruning) run as proposals
//! that are accepted only after payoff re-evaluation.

pub mod rescale;

pub use rescale::{
    branch_exponent, branch_measure_map, branch_rescale, harvest_apriori_constant, omega_max,
    radius_bound_branches, radius_bound_roots, radius_bound_roots_with_sigma, root_exponent,
    root_measure_map, root_rescale, root_state_value,
};

use crate::error::{Error, Result};
use crate::harvest::{
    ball_harvest_bound, harvest_value, solve_state, GrowthFunction, HalfSpaceGrid, ScalarField,
    StateSolution,
};
use crate::irrigation::{halfcircle_plan, irrigation_cost};
use crate::measures::{shell_radius, Atom, DiscreteMeasure, RegionSpec};
use crate::sunlight::{ball_volume, sphere_area, sunlight_total, DirectionQuadrature, ProjectionGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Candidate atom sites: lattice of the given spacing inside the ball of
/// the given radius, restricted to a half-space by the problem.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LatticeSpec {
    pub spacing: f64,
    pub radius: f64,
}

impl LatticeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite() && self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Parameter(format!(
                "lattice needs positive spacing and radius, got {} and {}",
                self.spacing, self.radius
            )));
        }
        Ok(())
    }

    fn points(&self, dim: usize, admissible: &dyn Fn(&[f64]) -> bool) -> Vec<Vec<f64>> {
        let n = (self.radius / self.spacing + 1e-9).floor() as i64;
        let mut out = Vec::new();
        let mut idx = vec![-n; dim];
        loop {
            let x: Vec<f64> = idx.iter().map(|&i| clean_zero(i as f64 * self.spacing)).collect();
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= self.radius + 1e-9 && admissible(&x) {
                out.push(x);
            }
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] <= n {
                    break;
                }
                idx[axis] = -n;
            }
        }
    }
}

fn clean_zero(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v
    }
}

/// Optional Metropolis mode; the default engine is strict ascent.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub cooling: f64,
}

/// One certificate check: a measured value against its analytic bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub value: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl Certificate {
    fn upper(value: f64, bound: f64) -> Self {
        Certificate { value, bound, satisfied: value <= bound * (1.0 + 1e-9) + 1e-12 }
    }
}

/// Evaluation of one measure: payoff pieces, the irrigation bracket, and
/// the certificate checks. Payoff uses the irrigation upper bound, so the
/// reported payoff is a conservative lower estimate of the true one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffReport {
    pub payoff: f64,
    pub functional: f64,
    pub transport_cost: f64,
    pub irrigation_upper: f64,
    pub irrigation_lower: f64,
    pub total_mass: f64,
    pub support_radius: f64,
    pub omega_ball: f64,
    pub omega_sphere: f64,
    pub functional_bound: Certificate,
    pub cost_threshold: Certificate,
    pub support: Certificate,
}

/// Sunlight-payoff instance: maximize binned exposure minus c times the
/// irrigation cost over measures in the closed upper half-space.
#[derive(Debug, Clone)]
pub struct BranchProblem {
    pub alpha: f64,
    pub c: f64,
    pub quadrature: DirectionQuadrature,
    pub grid: ProjectionGrid,
    pub lattice: LatticeSpec,
    pub mass_quantum: f64,
    pub budget: usize,
    pub tree_budget: usize,
    pub seed: u64,
    pub anneal: Option<AnnealSchedule>,
}

impl BranchProblem {
    /// Defaults: mass quantum 0.05 (unit reference mass), budget 200 moves,
    /// 200 relocation sweeps per irrigation evaluation, seed 0, strict ascent.
    pub fn new(
        alpha: f64,
        c: f64,
        quadrature: DirectionQuadrature,
        grid: ProjectionGrid,
        lattice: LatticeSpec,
    ) -> Result<Self> {
        let prob = BranchProblem {
            alpha,
            c,
            quadrature,
            grid,
            lattice,
            mass_quantum: 0.05,
            budget: 200,
            tree_budget: 200,
            seed: 0,
            anneal: None,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn dim(&self) -> usize {
        self.quadrature.dim
    }

    pub fn validate(&self) -> Result<()> {
        branch_exponent(self.alpha, self.dim())?;
        self.quadrature.validate()?;
        self.lattice.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Parameter(format!("cost coefficient c = {} must be positive", self.c)));
        }
        if !(self.mass_quantum > 0.0 && self.mass_quantum.is_finite()) {
            return Err(Error::Parameter(format!("mass quantum {} must be positive", self.mass_quantum)));
        }
        if self.quadrature.quadrature_norm() <= 0.0 {
            return Err(Error::Parameter("quadrature norm must be positive".into()));
        }
        if self.grid.transverse_dim != self.dim() - 1 {
            return Err(Error::Dimension { expected: self.dim() - 1, got: self.grid.transverse_dim });
        }
        if self.grid.extent < self.lattice.radius + self.grid.h {
            return Err(Error::Extent {
                what: "projection grid".into(),
                detail: format!(
                    "extent {} cannot hold lattice radius {} plus one cell",
                    self.grid.extent, self.lattice.radius
                ),
            });
        }
        Ok(())
    }
}

/// Harvest-payoff instance on the lower half-space; the origin cell is
/// excluded from the candidate lattice.
#[derive(Debug, Clone)]
pub struct RootProblem {
    pub alpha: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub growth: GrowthFunction,
    pub grid: HalfSpaceGrid,
    pub lattice: LatticeSpec,
    pub mass_quantum: f64,
    pub budget: usize,
    pub tree_budget: usize,
    pub seed: u64,
    pub solve_tol: f64,
    pub solve_max_iter: usize,
    pub anneal: Option<AnnealSchedule>,
}

impl RootProblem {
    /// Defaults: mass quantum 0.05 M/b, budget 200, 200 relocation sweeps
    /// per irrigation evaluation, solver tolerance 1e-8 within 50000 sweeps.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: f64,
        c: f64,
        a: f64,
        b: f64,
        sigma: f64,
        growth: GrowthFunction,
        grid: HalfSpaceGrid,
        lattice: LatticeSpec,
    ) -> Result<Self> {
        let quantum = 0.05 * growth.carrying_value() / b;
        let prob = RootProblem {
            alpha,
            c,
            a,
            b,
            sigma,
            growth,
            grid,
            lattice,
            mass_quantum: quantum,
            budget: 200,
            tree_budget: 200,
            seed: 0,
            solve_tol: 1e-8,
            solve_max_iter: 50_000,
            anneal: None,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn validate(&self) -> Result<()> {
        root_exponent(self.alpha, self.dim())?;
        self.lattice.validate()?;
        for (name, v) in [("c", self.c), ("a", self.a), ("b", self.b), ("sigma", self.sigma), ("mass_quantum", self.mass_quantum), ("solve_tol", self.solve_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        if self.solve_max_iter == 0 {
            return Err(Error::Parameter("solver needs at least one sweep".into()));
        }
        Ok(())
    }
}

struct BranchConsts {
    d: usize,
    exponent: f64,
    c0: f64,
    kappa1: f64,
    radius_bound: f64,
}

fn branch_consts(prob: &BranchProblem) -> Result<BranchConsts> {
    let d = prob.dim();
    let d1 = branch_exponent(prob.alpha, d)?;
    let p = 1.0 + prob.alpha * (d as f64 - 1.0);
    let norm = prob.quadrature.quadrature_norm();
    let c0 = 2.0 * norm * omega_max(d).powf(1.0 / p);
    Ok(BranchConsts {
        d,
        exponent: (d as f64 - 1.0) / p,
        c0,
        kappa1: (c0 / prob.c).powf(p / d1),
        radius_bound: radius_bound_branches(prob.alpha, d, norm, prob.c)?,
    })
}

struct RootConsts {
    d: usize,
    lambda: f64,
    c_tilde: f64,
    factor: f64,
    c_f: f64,
    kappa1: f64,
    prune_c0: f64,
    radius_bound: f64,
    m: f64,
}

fn root_consts(prob: &RootProblem) -> Result<RootConsts> {
    let d = prob.dim();
    let dd = root_exponent(prob.alpha, d)?;
    let (lambda, c_tilde, factor) = root_rescale(prob.a, prob.b, prob.sigma, prob.c, prob.alpha, d)?;
    let c_f = ball_harvest_bound(1.0, &prob.growth, d)?;
    let p = 1.0 + prob.alpha * d as f64;
    let c0h = harvest_apriori_constant(prob.alpha, d, &prob.growth)?;
    let kappa1 = (c0h / c_tilde).powf(p / dd);
    let prune_c0 = c_tilde * 2.0_f64.powf(-1.0 / prob.alpha) * kappa1.powf(1.0 - 1.0 / prob.alpha);
    Ok(RootConsts {
        d,
        lambda,
        c_tilde,
        factor,
        c_f,
        kappa1,
        prune_c0,
        radius_bound: radius_bound_roots_with_sigma(prob.alpha, d, &prob.growth, prob.a, prob.b, prob.sigma, prob.c)?,
        m: prob.growth.carrying_value(),
    })
}

/// Radius beyond which the low-state pruning rule deletes everything:
/// the solution of `C0 r^{1/alpha} = M` mapped back to physical scale.
pub fn root_prune_radius(prob: &RootProblem) -> Result<f64> {
    let consts = root_consts(prob)?;
    Ok(consts.lambda * (consts.m / consts.prune_c0).powf(prob.alpha))
}

/// Sunlight payoff of one measure with bracket and certificates.
pub fn payoff_branches(mu: &DiscreteMeasure, prob: &BranchProblem) -> Result<PayoffReport> {
    prob.validate()?;
    let oracle = BranchOracle { prob, consts: branch_consts(prob)? };
    oracle.report(mu)
}

/// Harvest payoff of one measure with bracket and certificates.
pub fn payoff_roots(mu: &DiscreteMeasure, prob: &RootProblem) -> Result<PayoffReport> {
    payoff_roots_with_state(mu, prob).map(|(report, _)| report)
}

/// Same as [`payoff_roots`] but also returns the solved state.
pub fn payoff_roots_with_state(mu: &DiscreteMeasure, prob: &RootProblem) -> Result<(PayoffReport, StateSolution)> {
    prob.validate()?;
    let oracle = RootOracle { prob, consts: root_consts(prob)? };
    oracle.report_with_state(mu)
}

trait Oracle: Sync {
    fn payoff(&self, mu: &DiscreteMeasure) -> Result<f64>;
    /// Structural pruning candidates, each tagged with whether acceptance
    /// requires a strict payoff increase or merely no decrease.
    fn proposals(&self, mu: &DiscreteMeasure) -> Result<Vec<(bool, DiscreteMeasure)>>;
}

struct BranchOracle<'a> {
    prob: &'a BranchProblem,
    consts: BranchConsts,
}

impl BranchOracle<'_> {
    fn report(&self, mu: &DiscreteMeasure) -> Result<PayoffReport> {
        let d = self.consts.d;
        if mu.dim() != d {
            return Err(Error::Dimension { expected: d, got: mu.dim() });
        }
        for atom in mu.atoms() {
            if atom.position[d - 1] < 0.0 {
                return Err(Error::Extent {
                    what: "branch measure".into(),
                    detail: format!("atom at {:?} lies below the surface", atom.position),
                });
            }
        }
        let functional = sunlight_total(mu, &self.prob.quadrature, &self.prob.grid)?;
        let bracket = irrigation_cost(mu, self.prob.alpha, self.prob.tree_budget, self.prob.seed)?;
        let payoff = functional - self.prob.c * bracket.upper;
        let apriori = self.consts.c0 * bracket.upper.powf(self.consts.exponent);
        let cost_threshold = Certificate {
            value: bracket.upper,
            bound: self.consts.kappa1,
            satisfied: payoff <= 0.0 || bracket.upper <= self.consts.kappa1 * (1.0 + 1e-9),
        };
        Ok(PayoffReport {
            payoff,
            functional,
            transport_cost: self.prob.c * bracket.upper,
            irrigation_upper: bracket.upper,
            irrigation_lower: bracket.lower,
            total_mass: mu.total_mass(),
            support_radius: mu.support_radius(),
            omega_ball: ball_volume(d - 1),
            omega_sphere: sphere_area(d),
            functional_bound: Certificate::upper(functional, apriori),
            cost_threshold,
            support: Certificate::upper(mu.support_radius(), self.consts.radius_bound + self.prob.lattice.spacing),
        })
    }
}

impl Oracle for BranchOracle<'_> {
    fn payoff(&self, mu: &DiscreteMeasure) -> Result<f64> {
        self.report(mu).map(|r| r.payoff)
    }

    fn proposals(&self, mu: &DiscreteMeasure) -> Result<Vec<(bool, DiscreteMeasure)>> {
        let mut props = Vec::new();
        if mu.is_empty() {
            return Ok(props);
        }
        let (inside, outside) = mu.split(RegionSpec::Ball(self.consts.radius_bound))?;
        if !outside.is_empty() {
            props.push((false, inside));
        }
        let shells = occupied_shells(mu);
        for &j in &shells {
            let (in_shell, rest) = mu.split(RegionSpec::Shell(j))?;
            if !in_shell.is_empty() {
                props.push((true, rest));
            }
        }
        let alpha = self.prob.alpha;
        let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
        if self.consts.d == 2 && alpha > golden && alpha < 1.0 {
            if let Some(&j) = shells.first() {
                let r = shell_radius(j);
                let beta = ((1.0 - alpha) / (alpha * alpha) + 1.0) / 2.0;
                let (_, rest) = mu.split(RegionSpec::Shell(j))?;
                let (_, arc) = halfcircle_plan(r, beta, 48)?;
                props.push((true, rest.add(&arc)?));
            }
        }
        Ok(props)
    }
}

struct RootOracle<'a> {
    prob: &'a RootProblem,
    consts: RootConsts,
}

impl RootOracle<'_> {
    fn report_with_state(&self, mu: &DiscreteMeasure) -> Result<(PayoffReport, StateSolution)> {
        let p = self.prob;
        let d = self.consts.d;
        if mu.dim() != d {
            return Err(Error::Dimension { expected: d, got: mu.dim() });
        }
        let sol = solve_state(mu, &p.growth, &p.grid, p.sigma, p.a, p.b, p.solve_tol, p.solve_max_iter)?;
        let functional = harvest_value(&sol.field, mu)?;
        let bracket = irrigation_cost(mu, p.alpha, p.tree_budget, p.seed)?;
        let payoff = functional - p.c * bracket.upper;

        // Certificates live on the normalized problem (diffusion and growth
        // coefficients 1): h_tilde and i_tilde are the normalized functional
        // and irrigation values.
        let k = &self.consts;
        let h_tilde = functional / k.factor;
        let i_tilde = p.c * bracket.upper / (k.factor * k.c_tilde);
        let r_balance = (k.m * i_tilde.powf(1.0 / p.alpha) / k.c_f)
            .powf(p.alpha / (p.alpha * d as f64 + 1.0));
        let r_eff = r_balance.max(1.0);
        let apriori = k.c_f * r_eff.powi(d as i32)
            + if i_tilde > 0.0 { k.m * (i_tilde / r_eff).powf(1.0 / p.alpha) } else { 0.0 };
        let cost_threshold = Certificate {
            value: i_tilde,
            bound: k.kappa1,
            satisfied: payoff <= 0.0 || i_tilde <= k.kappa1 * (1.0 + 1e-9),
        };
        let report = PayoffReport {
            payoff,
            functional,
            transport_cost: p.c * bracket.upper,
            irrigation_upper: bracket.upper,
            irrigation_lower: bracket.lower,
            total_mass: mu.total_mass(),
            support_radius: mu.support_radius(),
            omega_ball: ball_volume(d - 1),
            omega_sphere: sphere_area(d),
            functional_bound: Certificate::upper(h_tilde, apriori),
            cost_threshold,
            support: Certificate::upper(mu.support_radius(), k.radius_bound + p.lattice.spacing),
        };
        Ok((report, sol))
    }
}

impl Oracle for RootOracle<'_> {
    fn payoff(&self, mu: &DiscreteMeasure) -> Result<f64> {
        self.report_with_state(mu).map(|(r, _)| r.payoff)
    }

    fn proposals(&self, mu: &DiscreteMeasure) -> Result<Vec<(bool, DiscreteMeasure)>> {
        let mut props = Vec::new();
        if mu.is_empty() {
            return Ok(props);
        }
        let (inside, outside) = mu.split(RegionSpec::Ball(self.consts.radius_bound))?;
        if !outside.is_empty() {
            props.push((false, inside));
        }
        // Low-state pruning needs the current state.
        let (_, sol) = self.report_with_state(mu)?;
        let k = &self.consts;
        let mut keep = Vec::new();
        for atom in mu.atoms() {
            let u = sol.field.value_at(&atom.position)?;
            let threshold = k.prune_c0 * (atom.radius() / k.lambda).powf(1.0 / self.prob.alpha);
            if self.prob.b * u >= threshold {
                keep.push(atom.clone());
            }
        }
        if keep.len() < mu.atoms().len() {
            props.push((false, DiscreteMeasure::new(mu.dim(), keep)?));
        }
        Ok(props)
    }
}

/// Dyadic shell indices occupied by atoms, outermost (largest radius)
/// first.
fn occupied_shells(mu: &DiscreteMeasure) -> Vec<i32> {
    let mut shells: Vec<i32> = mu
        .atoms()
        .iter()
        .filter(|a| a.radius() > 0.0)
        .map(|a| (-a.radius().log2()).floor().clamp(-60.0, 60.0) as i32)
        .collect();
    shells.sort_unstable();
    shells.dedup();
    shells
}

fn improvement_eps(payoff: f64) -> f64 {
    1e-12 * payoff.abs().max(1.0)
}

fn with_atoms(dim: usize, atoms: Vec<Atom>) -> Result<DiscreteMeasure> {
    DiscreteMeasure::new(dim, atoms)
}

/// All single-step lattice moves from the current measure: add a quantum at
/// a lattice point, drop an atom, shift a quantum to a neighboring site,
/// relocate a whole atom to a neighboring site.
fn enumerate_moves(
    cur: &DiscreteMeasure,
    lattice: &[Vec<f64>],
    spacing: f64,
    quantum: f64,
    admissible: &dyn Fn(&[f64]) -> bool,
) -> Result<Vec<DiscreteMeasure>> {
    let dim = cur.dim();
    let mut out = Vec::new();
    for point in lattice {
        let mut atoms = cur.atoms().to_vec();
        atoms.push(Atom { position: point.clone(), mass: quantum });
        out.push(with_atoms(dim, atoms)?);
    }
    for i in 0..cur.atoms().len() {
        let mut atoms = cur.atoms().to_vec();
        atoms.remove(i);
        out.push(with_atoms(dim, atoms)?);
    }
    for i in 0..cur.atoms().len() {
        let source = cur.atoms()[i].clone();
        for axis in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut target = source.position.clone();
                target[axis] = clean_zero(target[axis] + sign * spacing);
                if !admissible(&target) {
                    continue;
                }
                let moved = quantum.min(source.mass);
                let mut atoms = cur.atoms().to_vec();
                if source.mass - moved > 0.0 {
                    atoms[i].mass -= moved;
                    atoms.push(Atom { position: target.clone(), mass: moved });
                } else {
                    atoms[i] = Atom { position: target.clone(), mass: moved };
                }
                out.push(with_atoms(dim, atoms)?);
                if source.mass > moved {
                    // Whole-atom relocation differs from the quantum shift.
                    let mut atoms = cur.atoms().to_vec();
                    atoms[i] = Atom { position: target.clone(), mass: source.mass };
                    out.push(with_atoms(dim, atoms)?);
                }
            }
        }
    }
    Ok(out)
}

fn run_engine<O: Oracle>(
    oracle: &O,
    dim: usize,
    lattice: &[Vec<f64>],
    spacing: f64,
    quantum: f64,
    admissible: &(dyn Fn(&[f64]) -> bool + Sync),
    budget: usize,
    seed: u64,
    anneal: Option<AnnealSchedule>,
) -> Result<(DiscreteMeasure, Vec<f64>)> {
    let mut cur = DiscreteMeasure::empty(dim);
    let mut cur_pay = oracle.payoff(&cur)?;
    let mut best = cur.clone();
    let mut best_pay = cur_pay;
    let mut trace = Vec::new();
    let mut accepted = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut temperature = anneal.map(|s| s.t0).unwrap_or(0.0);
    let mut stalled_metropolis = 0usize;

    while accepted < budget {
        // Structural proposals first, re-derived from the incumbent after
        // every acceptance.
        let mut proposal_accepted = false;
        loop {
            if accepted >= budget {
                break;
            }
            let mut applied = false;
            for (strict, cand) in oracle.proposals(&cur)? {
                if accepted >= budget {
                    break;
                }
                if cand == cur {
                    continue;
                }
                let pay = oracle.payoff(&cand)?;
                let ok = if strict { pay > cur_pay + improvement_eps(cur_pay) } else { pay >= cur_pay - 1e-12 };
                if ok {
                    cur = cand;
                    cur_pay = pay;
                    accepted += 1;
                    if cur_pay >= best_pay {
                        best = cur.clone();
                        best_pay = cur_pay;
                    }
                    trace.push(if anneal.is_some() { best_pay } else { cur_pay });
                    applied = true;
                    proposal_accepted = true;
                    break;
                }
            }
            if !applied {
                break;
            }
        }
        if accepted >= budget {
            break;
        }

        let candidates = enumerate_moves(&cur, lattice, spacing, quantum, admissible)?;
        if candidates.is_empty() {
            break;
        }
        match anneal {
            None => {
                let payoffs = candidates
                    .par_iter()
                    .map(|cand| oracle.payoff(cand))
                    .collect::<Result<Vec<f64>>>()?;
                let mut pick = None;
                let mut pick_pay = cur_pay + improvement_eps(cur_pay);
                for (i, &p) in payoffs.iter().enumerate() {
                    if p > pick_pay {
                        pick = Some(i);
                        pick_pay = p;
                    }
                }
                match pick {
                    Some(i) => {
                        cur = candidates[i].clone();
                        cur_pay = pick_pay;
                        best = cur.clone();
                        best_pay = cur_pay;
                        accepted += 1;
                        trace.push(cur_pay);
                    }
                    None if proposal_accepted => continue,
                    None => break,
                }
            }
            Some(schedule) => {
                let i = rng.random_range(0..candidates.len());
                let pay = oracle.payoff(&candidates[i])?;
                let accept = pay >= cur_pay
                    || rng.random::<f64>() < ((pay - cur_pay) / temperature.max(1e-300)).exp();
                temperature *= schedule.cooling;
                if accept {
                    cur = candidates[i].clone();
                    cur_pay = pay;
                    if cur_pay > best_pay {
                        best = cur.clone();
                        best_pay = cur_pay;
                    }
                    accepted += 1;
                    trace.push(best_pay);
                    stalled_metropolis = 0;
                } else {
                    stalled_metropolis += 1;
                    if stalled_metropolis > 50 * budget + 1000 {
                        break;
                    }
                }
            }
        }
    }

    if anneal.is_some() {
        Ok((best, trace))
    } else {
        Ok((cur, trace))
    }
}

/// Maximizes the sunlight payoff. Returns the final measure, its report,
/// and the payoff trace (one entry per accepted move, nondecreasing).
pub fn optimize_branches(prob: &BranchProblem) -> Result<(DiscreteMeasure, PayoffReport, Vec<f64>)> {
    prob.validate()?;
    let d = prob.dim();
    let oracle = BranchOracle { prob, consts: branch_consts(prob)? };
    let margin = prob.grid.extent - prob.grid.h;
    let admissible = move |x: &[f64]| {
        x[d - 1] >= 0.0 && x.iter().map(|v| v * v).sum::<f64>().sqrt() <= margin
    };
    let lattice = prob.lattice.points(d, &admissible);
    let (mu, trace) = run_engine(
        &oracle,
        d,
        &lattice,
        prob.lattice.spacing,
        prob.mass_quantum,
        &admissible,
        prob.budget,
        prob.seed,
        prob.anneal,
    )?;
    let report = oracle.report(&mu)?;
    Ok((mu, report, trace))
}

/// Maximizes the harvest payoff. Returns the final measure, its state
/// field, the report, and the payoff trace.
pub fn optimize_roots(prob: &RootProblem) -> Result<(DiscreteMeasure, ScalarField, PayoffReport, Vec<f64>)> {
    prob.validate()?;
    let d = prob.dim();
    let oracle = RootOracle { prob, consts: root_consts(prob)? };
    let grid = prob.grid.clone();
    let half_spacing = 0.5 * prob.lattice.spacing;
    let admissible = move |x: &[f64]| {
        x[d - 1] <= 0.0
            && x.iter().map(|v| v * v).sum::<f64>().sqrt() > half_spacing
            && grid.nearest_node(x).is_ok()
    };
    let lattice = prob.lattice.points(d, &admissible);
    let (mu, trace) = run_engine(
        &oracle,
        d,
        &lattice,
        prob.lattice.spacing,
        prob.mass_quantum,
        &admissible,
        prob.budget,
        prob.seed,
        prob.anneal,
    )?;
    let (report, sol) = oracle.report_with_state(&mu)?;
    Ok((mu, sol.field, report, trace))
}
