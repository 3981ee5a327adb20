//! Named invariant checks grouped into suites, one per module plus a
//! cross-cutting scaling suite. Checks never panic; each returns a pass
//! flag with a short numeric detail for the CLI table.

use crate::error::{Error, Result};
use crate::harvest::{
    ball_harvest_bound, default_match_grid, emit_field_csv, growth_integral, harvest_value,
    parse_field_csv, psi_profile, small_ball_bound, solve_state, GrowthFunction, HalfSpaceGrid,
};
use crate::irrigation::{
    emit_tree_csv, gilbert_energy, halfcircle_plan, irrigation_cost, optimize_tree,
    parse_tree_csv, star_plan,
};
use crate::measures::{Atom, DiscreteMeasure, RegionSpec};
use crate::optimize::{
    branch_measure_map, branch_rescale, optimize_branches, optimize_roots, payoff_branches,
    radius_bound_roots_with_sigma, root_rescale, BranchProblem, LatticeSpec, RootProblem,
};
use crate::sunlight::{sunlight_total, uniform_quadrature, ProjectionGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const SUITES: &[&str] = &["measures", "irrigation", "sunlight", "harvest", "optimize", "scaling"];

/// Runs one suite by name.
pub fn run_suite(suite: &str) -> Result<Vec<CheckResult>> {
    match suite {
        "measures" => Ok(measures_suite()),
        "irrigation" => Ok(irrigation_suite()),
        "sunlight" => Ok(sunlight_suite()),
        "harvest" => Ok(harvest_suite()),
        "optimize" => Ok(optimize_suite()),
        "scaling" => Ok(scaling_suite()),
        other => Err(Error::Parameter(format!(
            "unknown suite '{other}'; available: {}",
            SUITES.join(", ")
        ))),
    }
}

/// Runs every suite in order.
pub fn run_all() -> Vec<CheckResult> {
    SUITES.iter().flat_map(|s| run_suite(s).expect("built-in suite")).collect()
}

fn check(suite: &'static str, name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { suite, name, passed, detail }
}

fn random_measure(rng: &mut ChaCha8Rng, dim: usize, n: usize, upper_half: bool) -> DiscreteMeasure {
    let atoms = (0..n)
        .map(|_| {
            let mut position: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            if upper_half {
                position[dim - 1] = position[dim - 1].abs();
            }
            Atom { position, mass: rng.random_range(0.1..2.0) }
        })
        .collect();
    DiscreteMeasure::new(dim, atoms).expect("random atoms are valid")
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-30)
}

fn measures_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mu = random_measure(&mut rng, 3, 9, false);

    let (inside, outside) = mu.split(RegionSpec::Ball(1.0)).expect("split");
    let (tail_in, tail_out) = mu.split(RegionSpec::Tail(1.0)).expect("split");
    let partition_ok = (inside.total_mass() + outside.total_mass() - mu.total_mass()).abs() < 1e-12
        && inside == tail_out
        && outside == tail_in;
    out.push(check(
        "measures",
        "split_partitions_and_tail_complements_ball",
        partition_ok,
        format!("inside {} + outside {} = total {}", inside.total_mass(), outside.total_mass(), mu.total_mass()),
    ));

    let text = mu.emit_csv();
    let back = DiscreteMeasure::parse_csv(&text);
    let roundtrip_ok = back.as_ref().map(|b| *b == mu).unwrap_or(false);
    out.push(check("measures", "csv_roundtrip_identity", roundtrip_ok, format!("{} atoms", mu.atoms().len())));

    let scaled = mu.scale_mass(2.5).and_then(|m| m.dilate(0.5));
    let law_ok = scaled
        .map(|s| {
            (s.total_mass() - 2.5 * mu.total_mass()).abs() < 1e-12
                && (s.support_radius() - 0.5 * mu.support_radius()).abs() < 1e-12
        })
        .unwrap_or(false);
    out.push(check("measures", "mass_and_dilation_maps_compose", law_ok, "scale 2.5, dilate 0.5".into()));
    out
}

fn irrigation_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(202);

    let mut bracket_ok = true;
    let mut worst = 0.0f64;
    for (dim, alpha) in [(2, 0.6), (2, 1.0), (3, 0.85)] {
        for _ in 0..6 {
            let n = 1 + rng.random_range(0..7);
            let mu = random_measure(&mut rng, dim, n, false);
            match irrigation_cost(&mu, alpha, 300, 7) {
                Ok(b) => {
                    if b.lower > b.upper + 1e-12 * b.upper.max(1.0) {
                        bracket_ok = false;
                    }
                    if mu.atoms().len() == 1 {
                        worst = worst.max(rel_err(b.lower, b.upper));
                    }
                }
                Err(_) => bracket_ok = false,
            }
        }
    }
    out.push(check(
        "irrigation",
        "lower_bound_below_tree_energy",
        bracket_ok && worst <= 1e-12,
        format!("single-atom gap {worst:.2e}"),
    ));

    let mu = random_measure(&mut rng, 2, 6, false);
    let exact: f64 = mu.atoms().iter().map(|a| a.mass * a.radius()).sum();
    let alpha_one = irrigation_cost(&mu, 1.0, 300, 7)
        .map(|b| (b.upper - exact).abs() <= 1e-9 * exact.max(1.0))
        .unwrap_or(false);
    out.push(check("irrigation", "alpha_one_cost_is_mass_weighted_distance", alpha_one, format!("target {exact:.6}")));

    let (alpha, beta, r) = (0.7, 0.8, 0.5);
    let hc = halfcircle_plan(r, beta, 64)
        .and_then(|(tree, _)| gilbert_energy(&tree, alpha))
        .unwrap_or(f64::INFINITY);
    let route = 2.0 * std::f64::consts::PI.powf(alpha + 1.0) * r.powf(alpha * beta + 1.0);
    out.push(check("irrigation", "halfcircle_energy_within_route_bound", hc <= route, format!("{hc:.6} <= {route:.6}")));

    let tree_ok = optimize_tree(&mu, 0.7, 300, 5)
        .map(|(tree, _)| {
            let text = emit_tree_csv(&tree);
            parse_tree_csv(&text)
                .and_then(|back| {
                    Ok((gilbert_energy(&back, 0.7)? - gilbert_energy(&tree, 0.7)?).abs() < 1e-12)
                })
                .unwrap_or(false)
        })
        .unwrap_or(false);
    out.push(check("irrigation", "tree_csv_roundtrip_preserves_energy", tree_ok, "6-atom searched tree".into()));
    out
}

fn sunlight_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    let mut bounds_ok = true;
    let mut monotone_ok = true;
    let mut concave_ok = true;
    for dim in [2usize, 3] {
        let k = if dim == 2 { 16 } else { 64 };
        let quad = uniform_quadrature(dim, k, |_| 1.0).expect("quadrature");
        for _ in 0..5 {
            let mu = random_measure(&mut rng, dim, 5, false);
            let grid = ProjectionGrid::for_measure(&mu, 0.25).expect("grid");
            let s = sunlight_total(&mu, &quad, &grid).expect("sunlight");
            let mass_bound = quad.quadrature_norm() * mu.total_mass();
            let side = 2.0 * (mu.support_radius() + grid.h);
            let area_bound = quad.quadrature_norm() * side.powi(dim as i32 - 1);
            if s > mass_bound + 1e-12 || s > area_bound + 1e-12 {
                bounds_ok = false;
            }
            let s2 = sunlight_total(&mu.scale_mass(2.0).expect("scale"), &quad, &grid).expect("sunlight");
            if s2 < s {
                monotone_ok = false;
            }
            if s2 > 2.0 * s {
                concave_ok = false;
            }
        }
    }
    out.push(check("sunlight", "exposure_below_mass_and_shadow_area", bounds_ok, "norm*mass and norm*(2R+2h)^{d-1}".into()));
    out.push(check("sunlight", "exposure_monotone_in_mass", monotone_ok, "mass doubling".into()));
    out.push(check("sunlight", "exposure_subadditive_in_mass", concave_ok, "S(2mu) <= 2 S(mu)".into()));
    out
}

fn harvest_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let f = GrowthFunction::logistic(1.0, 1.0).expect("logistic");

    let grid = HalfSpaceGrid::new(2, 1.0, 0.25).expect("grid");
    let eq = solve_state(&DiscreteMeasure::empty(2), &f, &grid, 1.0, 1.0, 2.0, 1e-12, 50).ok();
    let eq_ok = eq.as_ref().map(|s| s.field.values().iter().all(|&u| u == 0.5)).unwrap_or(false);
    out.push(check("harvest", "zero_measure_keeps_equilibrium", eq_ok, "u = M/b everywhere".into()));

    let grid = HalfSpaceGrid::new(2, 2.0, 0.1).expect("grid");
    let small = DiscreteMeasure::new(2, vec![Atom { position: vec![0.3, -0.5], mass: 1.0 }]).expect("m");
    let big = small
        .add(&DiscreteMeasure::new(2, vec![Atom { position: vec![-0.4, -0.9], mass: 1.5 }]).expect("m"))
        .expect("add");
    let s1 = solve_state(&small, &f, &grid, 1.0, 1.0, 1.0, 1e-9, 40_000).ok();
    let s2 = solve_state(&big, &f, &grid, 1.0, 1.0, 1.0, 1e-9, 40_000).ok();
    let cmp_ok = match (&s1, &s2) {
        (Some(a), Some(b)) => {
            a.field.values().iter().all(|&u| (0.0..=1.0 + 1e-12).contains(&u))
                && a.field.values().iter().zip(b.field.values()).all(|(x, y)| *y <= x + 1e-8)
        }
        _ => false,
    };
    out.push(check("harvest", "state_in_range_and_comparison_holds", cmp_ok, "two nested measures".into()));

    let f9 = GrowthFunction::logistic(9.0, 1.0).expect("logistic");
    let mu = DiscreteMeasure::new(
        2,
        vec![
            Atom { position: vec![0.0, -0.2], mass: 1.5 },
            Atom { position: vec![-0.8, -0.2], mass: 1.0 },
            Atom { position: vec![0.6, -0.4], mass: 1.2 },
        ],
    )
    .expect("m");
    let mut residuals = Vec::new();
    for h in [0.2, 0.1] {
        let g = HalfSpaceGrid::new(2, 4.0, h).expect("grid");
        match solve_state(&mu, &f9, &g, 1.0, 1.0, 1.0, 1e-10, 60_000) {
            Ok(sol) => {
                let lhs = harvest_value(&sol.field, &mu).unwrap_or(f64::NAN);
                let rhs = growth_integral(&sol.field, &f9, 1.0, 1.0);
                residuals.push((lhs - rhs).abs());
            }
            Err(_) => residuals.push(f64::NAN),
        }
    }
    let ratio = residuals[0] / residuals[1];
    out.push(check(
        "harvest",
        "flux_identity_residual_first_order_in_h",
        (1.4..=2.6).contains(&ratio),
        format!("residuals {residuals:?}, ratio {ratio:.3}"),
    ));

    let (psi_ok, psi_detail) = match psi_profile(&f, 40.0, 1e-4) {
        Ok(p) => {
            let gamma_err = (p.gamma() - 1.0 / 6.0).abs();
            let lam = (2.0 * p.gamma()).sqrt();
            let mut worst = f64::NEG_INFINITY;
            for (i, &v) in p.values().iter().enumerate() {
                let r = i as f64 * p.step();
                worst = worst.max(1.0 - (-lam * r).exp() - v);
            }
            (
                gamma_err <= 1e-6 && worst <= 0.0,
                format!("gamma error {gamma_err:.2e}, worst floor gap {worst:.2e}"),
            )
        }
        Err(e) => (false, format!("profile failed: {e}")),
    };
    out.push(check("harvest", "profile_energy_and_exponential_floor", psi_ok, psi_detail));

    let b1 = ball_harvest_bound(1.0, &f, 3).unwrap_or(f64::NAN);
    let b2 = ball_harvest_bound(2.0, &f, 3).unwrap_or(f64::NAN);
    let small_seq: Vec<f64> = [1e-1, 1e-2]
        .iter()
        .map(|&rho| {
            small_ball_bound(rho, &f, 3, &default_match_grid(rho))
                .map(|s| s.value)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let balls_ok = b1 < b2 && small_seq[1] < small_seq[0] && small_seq[0] <= b1 + 1e-9;
    out.push(check(
        "harvest",
        "ball_bounds_monotone_and_small_ball_decreasing",
        balls_ok,
        format!("ball {b1:.4}->{b2:.4}, small {small_seq:?}"),
    ));

    let field_ok = s1
        .map(|sol| {
            let text = emit_field_csv(&sol.field);
            parse_field_csv(&text).map(|b| b.values() == sol.field.values()).unwrap_or(false)
        })
        .unwrap_or(false);
    out.push(check("harvest", "field_csv_roundtrip_identity", field_ok, "solved field".into()));
    out
}

fn optimize_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();

    let quad = uniform_quadrature(2, 16, |_| 1.0).expect("quadrature");
    let grid = ProjectionGrid::new(0.25, 3.0, 1).expect("grid");
    let lattice = LatticeSpec { spacing: 0.5, radius: 1.5 };
    let branch = BranchProblem::new(1.0, 4.0, quad, grid, lattice)
        .map(|mut p| {
            p.budget = 6;
            p
        })
        .expect("problem");
    let run = optimize_branches(&branch).ok();
    let branch_ok = run
        .as_ref()
        .map(|(_, report, trace)| {
            trace.windows(2).all(|w| w[1] >= w[0] - 1e-12) && report.support.satisfied
        })
        .unwrap_or(false);
    out.push(check(
        "optimize",
        "branch_trace_monotone_and_radius_certified",
        branch_ok,
        run.map(|(_, r, t)| format!("payoff {:.4} after {} moves", r.payoff, t.len())).unwrap_or_else(|| "run failed".into()),
    ));

    let growth = GrowthFunction::logistic(4.0, 1.0).expect("logistic");
    let hgrid = HalfSpaceGrid::new(2, 1.5, 0.25).expect("grid");
    let root = RootProblem::new(1.0, 0.5, 1.0, 1.0, 1.0, growth, hgrid, LatticeSpec { spacing: 0.25, radius: 1.0 })
        .map(|mut p| {
            p.budget = 5;
            p.solve_tol = 1e-7;
            p
        })
        .expect("problem");
    let run = optimize_roots(&root).ok();
    let root_ok = run
        .as_ref()
        .map(|(_, _, report, trace)| {
            trace.windows(2).all(|w| w[1] >= w[0] - 1e-12) && report.support.satisfied
        })
        .unwrap_or(false);
    out.push(check(
        "optimize",
        "root_trace_monotone_and_radius_certified",
        root_ok,
        run.map(|(_, _, r, t)| format!("payoff {:.4} after {} moves", r.payoff, t.len())).unwrap_or_else(|| "run failed".into()),
    ));

    let mut sigma_ok = true;
    let mut worst = 0.0f64;
    let reference = radius_bound_roots_with_sigma(0.8, 2, &growth, 0.7, 1.3, 1.0, 0.9).unwrap_or(f64::NAN);
    for sigma in [0.5, 2.0] {
        match radius_bound_roots_with_sigma(0.8, 2, &growth, 0.7, 1.3, sigma, 0.9) {
            Ok(r) => worst = worst.max(rel_err(r, reference)),
            Err(_) => sigma_ok = false,
        }
    }
    out.push(check(
        "optimize",
        "root_radius_bound_sigma_independent",
        sigma_ok && worst <= 1e-12,
        format!("max relative spread {worst:.2e}"),
    ));
    out
}

fn scaling_suite() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(404);

    // Transport energy laws on a searched tree.
    let mu = random_measure(&mut rng, 2, 6, false);
    let alpha = 0.75;
    let tree = optimize_tree(&mu, alpha, 300, 9).map(|(t, _)| t).unwrap_or_else(|_| star_plan(&mu));
    let e = gilbert_energy(&tree, alpha).unwrap_or(f64::NAN);
    let mut worst = 0.0f64;
    for lam in [0.5, 2.0] {
        let em = tree.scale_masses(lam).and_then(|t| gilbert_energy(&t, alpha)).unwrap_or(f64::NAN);
        let ed = tree.dilate(lam).and_then(|t| gilbert_energy(&t, alpha)).unwrap_or(f64::NAN);
        worst = worst.max(rel_err(em, lam.powf(alpha) * e)).max(rel_err(ed, lam * e));
    }
    out.push(check("scaling", "transport_energy_mass_and_dilation_laws", worst <= 1e-12, format!("max error {worst:.2e}")));

    // Binned exposure under the coupled grid rescale.
    let mu = random_measure(&mut rng, 3, 5, false);
    let quad = uniform_quadrature(3, 48, |_| 1.0).expect("quadrature");
    let grid = ProjectionGrid::for_measure(&mu, 0.25).expect("grid");
    let s = sunlight_total(&mu, &quad, &grid).unwrap_or(f64::NAN);
    let mut worst = 0.0f64;
    for lam in [0.5, 2.0] {
        let mapped = branch_measure_map(&mu, lam).expect("map");
        let lgrid = ProjectionGrid::new(lam * grid.h, lam * grid.extent, 2).expect("grid");
        let sl = sunlight_total(&mapped, &quad, &lgrid).unwrap_or(f64::NAN);
        worst = worst.max(rel_err(sl, lam.powi(2) * s));
    }
    out.push(check("scaling", "exposure_coupled_rescale_exact", worst <= 1e-12, format!("max error {worst:.2e}")));

    // Full branch payoff identity.
    let (b_int, c, alpha, d) = (1.6, 0.9, 0.8, 2usize);
    let (lam, factor) = branch_rescale(b_int, c, alpha, d).expect("rescale");
    let mu = random_measure(&mut rng, 2, 5, true);
    let quad_ref = uniform_quadrature(2, 16, |_| 1.0).expect("quadrature");
    let mut quad_scaled = quad_ref.clone();
    for e in &mut quad_scaled.intensity {
        *e *= b_int;
    }
    let extent = mu.support_radius() + 1.0;
    let h = 0.2;
    let prob_ref = BranchProblem::new(
        alpha,
        1.0,
        quad_ref,
        ProjectionGrid::new(h, extent, 1).expect("grid"),
        LatticeSpec { spacing: h, radius: extent - 2.0 * h },
    );
    let prob_scaled = BranchProblem::new(
        alpha,
        c,
        quad_scaled,
        ProjectionGrid::new(lam * h, lam * extent, 1).expect("grid"),
        LatticeSpec { spacing: lam * h, radius: lam * (extent - 2.0 * h) },
    );
    let identity = match (prob_ref, prob_scaled) {
        (Ok(pr), Ok(ps)) => {
            let lhs = branch_measure_map(&mu, lam).ok().and_then(|m| payoff_branches(&m, &ps).ok());
            let rhs = payoff_branches(&mu, &pr).ok();
            match (lhs, rhs) {
                (Some(l), Some(r)) => {
                    let err = rel_err(l.payoff, factor * r.payoff);
                    (err <= 1e-6, format!("relative error {err:.2e}"))
                }
                _ => (false, "payoff evaluation failed".into()),
            }
        }
        _ => (false, "problem construction failed".into()),
    };
    out.push(check("scaling", "branch_payoff_rescale_identity", identity.0, identity.1));

    // Root-side irrigation map is exact on trees.
    let (a, b, sigma, c, alpha, d) = (0.7, 1.1, 1.8, 0.6, 0.8, 3usize);
    let (lam, c_tilde, factor) = root_rescale(a, b, sigma, c, alpha, d).expect("rescale");
    let nu = random_measure(&mut rng, 3, 5, false);
    let tree = star_plan(&nu);
    let e = gilbert_energy(&tree, alpha).unwrap_or(f64::NAN);
    let mapped = tree
        .dilate(lam)
        .and_then(|t| t.scale_masses(sigma * lam.powi(d as i32 - 2)))
        .and_then(|t| gilbert_energy(&t, alpha))
        .unwrap_or(f64::NAN);
    let predicted = c * sigma.powf(alpha) * lam.powf(alpha * (d as f64 - 2.0) + 1.0) * e;
    let err = rel_err(c * mapped, predicted);
    let consistent = rel_err(c * mapped, factor * c_tilde * e) <= 1e-12;
    out.push(check(
        "scaling",
        "root_irrigation_map_exact_on_trees",
        err <= 1e-12 && consistent,
        format!("relative error {err:.2e}"),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass() {
        let results = run_all();
        let failures: Vec<&CheckResult> = results.iter().filter(|r| !r.passed).collect();
        assert!(failures.is_empty(), "failing checks: {failures:#?}");
    }

    #[test]
    fn unknown_suite_is_rejected() {
        assert!(run_suite("no-such-suite").is_err());
    }
}
