//! Parameter-reduction maps for both payoff problems and the closed-form
//! support-radius bounds they yield.
//!
//! Branching side: dilating space by `lambda = (b/c)^{1/D1}` with
//! `D1 = 1 + (alpha-1)(d-1)` and scaling masses by `lambda^{d-1}` turns the
//! problem with intensity scale `b` and cost `c` into the reference problem
//! with cost 1, multiplying every payoff by a constant factor.
//!
//! Root side: `lambda = sqrt(sigma/(a b))` normalizes diffusion and growth
//! to 1, leaving a single effective cost coefficient `c_tilde`.

use crate::error::{Error, Result};
use crate::harvest::{ball_harvest_bound, GrowthFunction, ScalarField};
use crate::measures::DiscreteMeasure;
use crate::sunlight::{ball_volume, sphere_area};

fn require_positive(pairs: &[(&str, f64)]) -> Result<()> {
    for (name, v) in pairs {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::Parameter(format!("{name} = {v} must be positive and finite")));
        }
    }
    Ok(())
}

/// `D1 = 1 + (alpha-1)(d-1)`, positive exactly when alpha is above the
/// critical exponent 1 - 1/(d-1).
pub fn branch_exponent(alpha: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Dimension { expected: 2, got: d });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let d1 = 1.0 + (alpha - 1.0) * (d as f64 - 1.0);
    if d1 <= 0.0 {
        return Err(Error::Parameter(format!(
            "alpha = {alpha} is at or below the critical exponent {} in dimension {d}",
            1.0 - 1.0 / (d as f64 - 1.0)
        )));
    }
    Ok(d1)
}

/// `Dd = 1 + (alpha-1)d`, positive exactly when alpha > 1 - 1/d.
pub fn root_exponent(alpha: f64, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Dimension { expected: 2, got: d });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let dd = 1.0 + (alpha - 1.0) * d as f64;
    if dd <= 0.0 {
        return Err(Error::Parameter(format!(
            "alpha = {alpha} is at or below 1 - 1/d = {} in dimension {d}",
            1.0 - 1.0 / d as f64
        )));
    }
    Ok(dd)
}

/// Dilation factor and payoff factor reducing the branching problem with
/// intensity scale `b_intensity` and transport cost `c` to unit cost.
pub fn branch_rescale(b_intensity: f64, c: f64, alpha: f64, d: usize) -> Result<(f64, f64)> {
    require_positive(&[("b_intensity", b_intensity), ("c", c)])?;
    let d1 = branch_exponent(alpha, d)?;
    let lambda = (b_intensity / c).powf(1.0 / d1);
    let factor = b_intensity.powf((1.0 + alpha * (d as f64 - 1.0)) / d1)
        * c.powf((1.0 - d as f64) / d1);
    Ok((lambda, factor))
}

/// Measure map matching [`branch_rescale`]: positions stretched by lambda,
/// masses by lambda^{d-1}.
pub fn branch_measure_map(mu: &DiscreteMeasure, lambda: f64) -> Result<DiscreteMeasure> {
    let d = mu.dim();
    mu.dilate(lambda)?.scale_mass(lambda.powi(d as i32 - 1))
}

/// Root-problem normalization: returns `(lambda, c_tilde, payoff_factor)`
/// with `lambda = sqrt(sigma/(ab))` and payoff factor `a lambda^d`.
pub fn root_rescale(a: f64, b: f64, sigma: f64, c: f64, alpha: f64, d: usize) -> Result<(f64, f64, f64)> {
    require_positive(&[("a", a), ("b", b), ("sigma", sigma), ("c", c)])?;
    if d < 2 {
        return Err(Error::Dimension { expected: 2, got: d });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let lambda = (sigma / (a * b)).sqrt();
    let c_tilde = (c * sigma.powf(alpha) / a)
        * lambda.powf(1.0 - (1.0 - alpha) * d as f64 - 2.0 * alpha);
    let factor = a * lambda.powi(d as i32);
    Ok((lambda, c_tilde, factor))
}

/// Measure map matching [`root_rescale`]: the physical absorption measure
/// for a normalized one, `nu = sigma lambda^{d-2} nu_tilde(. / lambda)`.
pub fn root_measure_map(nu_tilde: &DiscreteMeasure, lambda: f64, sigma: f64) -> Result<DiscreteMeasure> {
    let d = nu_tilde.dim();
    nu_tilde.dilate(lambda)?.scale_mass(sigma * lambda.powi(d as i32 - 2))
}

/// State map matching [`root_rescale`]: the physical state at `x` read off
/// a normalized field, `u(x) = (1/b) u_tilde(x / lambda)`.
pub fn root_state_value(field_tilde: &ScalarField, x: &[f64], lambda: f64, b: f64) -> Result<f64> {
    let scaled: Vec<f64> = x.iter().map(|v| v / lambda).collect();
    Ok(field_tilde.value_at(&scaled)? / b)
}

/// Larger of the two (d-1)-volume normalizations entering the sunlight
/// a-priori bound; using the max keeps every derived constant conservative.
pub fn omega_max(d: usize) -> f64 {
    ball_volume(d - 1).max(sphere_area(d))
}

/// A-priori support radius for branching optimizers,
/// `C_{d,alpha} (norm/c)^{1/D1}`, exact `norm/c` at alpha = 1.
pub fn radius_bound_branches(alpha: f64, d: usize, quadrature_norm: f64, c: f64) -> Result<f64> {
    require_positive(&[("quadrature_norm", quadrature_norm), ("c", c)])?;
    let d1 = branch_exponent(alpha, d)?;
    if alpha == 1.0 {
        return Ok(quadrature_norm / c);
    }
    let p = 1.0 + alpha * (d as f64 - 1.0);
    let c_da = 2.0 * omega_max(d).powf(1.0 / p);
    let kappa1 = c_da.powf(p / d1);
    let r1 = alpha.powf(alpha / (alpha - 1.0)) * kappa1;
    Ok((r1 + 1.0) * (quadrature_norm / c).powf(1.0 / d1))
}

/// Constant of the harvest a-priori bound `H <= C0H I^{d/(1+alpha d)}` for
/// the normalized problem: `2 C_f^{1/(1+alpha d)} M^{alpha d/(1+alpha d)}`.
pub fn harvest_apriori_constant(alpha: f64, d: usize, f: &GrowthFunction) -> Result<f64> {
    let c_f = ball_harvest_bound(1.0, f, d)?;
    let m = f.carrying_value();
    let p = 1.0 + alpha * d as f64;
    Ok(2.0 * c_f.powf(1.0 / p) * m.powf(alpha * d as f64 / p))
}

/// A-priori support radius for root optimizers. sigma-independent; the
/// explicit-sigma variant exists so that independence can be checked.
pub fn radius_bound_roots(alpha: f64, d: usize, f: &GrowthFunction, a: f64, b: f64, c: f64) -> Result<f64> {
    radius_bound_roots_with_sigma(alpha, d, f, a, b, 1.0, c)
}

pub fn radius_bound_roots_with_sigma(
    alpha: f64,
    d: usize,
    f: &GrowthFunction,
    a: f64,
    b: f64,
    sigma: f64,
    c: f64,
) -> Result<f64> {
    let dd = root_exponent(alpha, d)?;
    let m = f.carrying_value();
    if alpha == 1.0 {
        return Ok(m / (b * c));
    }
    let (lambda, c_tilde, _) = root_rescale(a, b, sigma, c, alpha, d)?;
    let c0h = harvest_apriori_constant(alpha, d, f)?;
    let c1 = c0h.powf((1.0 + alpha * d as f64) / dd);
    let c2 = alpha.powf(alpha / (alpha - 1.0)) * c1;
    let cr = 2.0 * m.powf(alpha) * c2.powf(1.0 - alpha);
    Ok(lambda * cr * c_tilde.powf(-1.0 / dd))
}
