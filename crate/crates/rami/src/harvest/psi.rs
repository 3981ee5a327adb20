//! Radial comparison profile and the analytic harvest bounds built on it.

use crate::error::{Error, Result};
use crate::sunlight::sphere_area;

/// Logistic growth law `f(u) = kappa * u * (M - u)` together with the
/// derived quantities the bounds need. Concave on `[0, M]` with
/// `f(0) = f(M) = 0`, so the standing assumptions hold by construction.
#[derive(Debug, Clone, Copy)]
pub struct GrowthFunction {
    kappa: f64,
    m: f64,
}

impl GrowthFunction {
    pub fn logistic(kappa: f64, m: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Parameter(format!("growth rate kappa {kappa} must be positive")));
        }
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Parameter(format!("carrying value M {m} must be positive")));
        }
        Ok(GrowthFunction { kappa, m })
    }

    pub fn carrying_value(&self) -> f64 {
        self.m
    }

    pub fn rate(&self) -> f64 {
        self.kappa
    }

    pub fn value(&self, u: f64) -> f64 {
        self.kappa * u * (self.m - u)
    }

    /// Antiderivative `F(s) = kappa (M s^2/2 - s^3/3)` with `F(0) = 0`.
    pub fn primitive(&self, s: f64) -> f64 {
        self.kappa * (self.m * s * s / 2.0 - s * s * s / 3.0)
    }

    /// `F(M) - F(s)` in the factored form `kappa (M-s)^2 (M+2s) / 6`, which
    /// stays accurate near `s = M` where the direct difference cancels.
    pub fn deficit(&self, s: f64) -> f64 {
        let gap = self.m - s;
        self.kappa * gap * gap * (self.m + 2.0 * s) / 6.0
    }

    /// Peak growth rate `K = kappa M^2 / 4`.
    pub fn max_rate(&self) -> f64 {
        self.kappa * self.m * self.m / 4.0
    }

    /// Argmax of `f`, the midpoint `M/2` for the logistic law.
    pub fn u_peak(&self) -> f64 {
        self.m / 2.0
    }

    /// Lipschitz constant of `f` on `[0, M]`: `sup |f'| = kappa M`.
    pub fn lipschitz(&self) -> f64 {
        self.kappa * self.m
    }

    /// Nonincreasing envelope `max { f(t) : t in [s, M] }`.
    pub fn envelope(&self, s: f64) -> f64 {
        if s <= self.u_peak() {
            self.max_rate()
        } else {
            self.value(s)
        }
    }

    /// Largest `gamma` with `F(M) - F(psi) >= gamma (M - psi)^2` on `[0, M)`,
    /// found by a grid scan. For the logistic law the ratio is increasing in
    /// `psi`, so the scan returns the exact value `kappa M / 6`.
    pub fn decay_gamma(&self) -> f64 {
        let n = 4096;
        let mut gamma = f64::INFINITY;
        for j in 0..n {
            let psi = self.m * (j as f64) / (n as f64);
            let gap = self.m - psi;
            let ratio = self.deficit(psi) / (gap * gap);
            if ratio < gamma {
                gamma = ratio;
            }
        }
        gamma
    }
}

/// Tabulated solution of `psi'' + f(psi) = 0`, `psi(0) = 0`, `psi(inf) = M`,
/// integrated in the first-order form `psi' = sqrt(2 F(M) - 2 F(psi))`.
#[derive(Debug, Clone)]
pub struct PsiProfile {
    dr: f64,
    values: Vec<f64>,
    m: f64,
    gamma: f64,
    f_m: f64,
}

/// Relative drift allowed for the conserved energy `psi'^2/2 + F(psi)`.
const ENERGY_TOL: f64 = 1e-8;

pub fn psi_profile(f: &GrowthFunction, r_max: f64, dr: f64) -> Result<PsiProfile> {
    if !(r_max > 0.0 && dr > 0.0 && dr < r_max) {
        return Err(Error::Parameter(format!(
            "profile range r_max {r_max} and step {dr} must satisfy 0 < dr < r_max"
        )));
    }
    let m = f.carrying_value();
    let f_m = f.primitive(m);
    let slope = |psi: f64| (2.0 * f.deficit(psi).max(0.0)).sqrt();
    let steps = (r_max / dr).ceil() as usize;
    let mut values = Vec::with_capacity(steps + 1);
    let mut psi = 0.0f64;
    values.push(psi);
    for _ in 0..steps {
        let k1 = slope(psi);
        let k2 = slope((psi + 0.5 * dr * k1).min(m));
        let k3 = slope((psi + 0.5 * dr * k2).min(m));
        let k4 = slope((psi + dr * k3).min(m));
        psi = (psi + dr / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).min(m);
        values.push(psi);
    }

    let profile = PsiProfile { dr, values, m, gamma: f.decay_gamma(), f_m };
    profile.check_energy(f)?;
    Ok(profile)
}

impl PsiProfile {
    pub fn step(&self) -> f64 {
        self.dr
    }

    pub fn r_max(&self) -> f64 {
        self.dr * (self.values.len() - 1) as f64
    }

    pub fn carrying_value(&self) -> f64 {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn energy_level(&self) -> f64 {
        self.f_m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation in the table; clamps to `psi(r_max)` beyond the
    /// tabulated range and to 0 for negative arguments.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let t = r / self.dr;
        let i = t.floor() as usize;
        if i + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Slope recovered from the conserved energy, not from the table.
    pub fn slope_at(&self, f: &GrowthFunction, r: f64) -> f64 {
        let psi = self.eval(r);
        (2.0 * f.deficit(psi).max(0.0)).sqrt()
    }

    /// Validates energy conservation with a fourth-order central difference
    /// for `psi'`, so the check does not reuse the integrated slope.
    fn check_energy(&self, f: &GrowthFunction) -> Result<()> {
        let n = self.values.len();
        if n < 5 {
            return Err(Error::Parameter("profile table too short for validation".into()));
        }
        let allowed = ENERGY_TOL * self.f_m;
        let mut drift = 0.0f64;
        for i in 2..n - 2 {
            let d = (self.values[i - 2] - 8.0 * self.values[i - 1] + 8.0 * self.values[i + 1]
                - self.values[i + 2])
                / (12.0 * self.dr);
            let e = d * d / 2.0 + f.primitive(self.values[i]);
            drift = drift.max((e - self.f_m).abs());
        }
        if drift > allowed {
            return Err(Error::ProfileStep { dr: self.dr, drift, allowed });
        }
        Ok(())
    }
}

/// `e^{lam shift} int_X^inf r^k e^{-lam r} dr` in closed form, with the
/// exponentials combined so large radii cannot overflow.
fn exp_moment_tail(k: usize, x: f64, lam: f64, shift: f64) -> f64 {
    let scale = (lam * (shift - x)).exp();
    let mut factorial_ratio = 1.0; // k!/j! for j = k down to 0
    let mut sum = 0.0;
    for j in (0..=k).rev() {
        sum += factorial_ratio * x.powi(j as i32) / lam.powi((k - j + 1) as i32);
        factorial_ratio *= j as f64;
    }
    scale * sum
}

/// Simpson quadrature of `g` on `[a, b]` with `2n` panels.
fn simpson(a: f64, b: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let steps = 2 * n.max(1);
    let h = (b - a) / steps as f64;
    let mut acc = g(a) + g(b);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * g(a + h * i as f64);
    }
    acc * h / 3.0
}

fn default_profile(f: &GrowthFunction) -> Result<PsiProfile> {
    // Far enough out that the exponential tail below r_max is negligible
    // against the quadrature terms.
    let lam = (2.0 * f.decay_gamma()).sqrt();
    let r_max = (50.0 / lam).max(50.0);
    psi_profile(f, r_max, 1e-3)
}

/// Radius beyond which the profile is past the peak of `f`, so the
/// envelope coincides with `f` itself.
fn switch_radius(f: &GrowthFunction, gamma: f64) -> f64 {
    let m = f.carrying_value();
    -(1.0 - f.u_peak() / m).ln() / (2.0 * gamma).sqrt()
}

/// Upper bound on the harvest of any measure supported in the closed ball
/// of radius `rho`, for the half-space problem with `sigma = a = b = 1`:
/// `(omega/2) * int_0^inf r^{d-1} fhat(psi(r - rho)) dr`.
///
/// Stated for `rho >= 1`; smaller radii fall back to the `rho = 1` value,
/// which only weakens the bound.
pub fn ball_harvest_bound(rho: f64, f: &GrowthFunction, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Dimension { expected: 2, got: d });
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Parameter(format!("ball radius {rho} must be positive")));
    }
    let profile = default_profile(f)?;
    Ok(ball_bound_with_profile(rho.max(1.0), f, d, &profile))
}

fn ball_bound_with_profile(rho: f64, f: &GrowthFunction, d: usize, profile: &PsiProfile) -> f64 {
    let gamma = profile.gamma();
    let lam = (2.0 * gamma).sqrt();
    let r_star = switch_radius(f, gamma);
    let k = f.max_rate();
    let m = f.carrying_value();

    // Inside the ball the profile argument is nonpositive and fhat = K.
    let core = k * rho.powi(d as i32) / (d as f64);
    // Numeric piece over one switch radius past the ball boundary.
    let mid = simpson(0.0, r_star, 2048, |s| {
        (rho + s).powf((d - 1) as f64) * f.envelope(profile.eval(s))
    });
    // Past r_star: f(psi(s)) <= kappa M^2 e^{-lam s}, integrated exactly.
    let tail = f.rate() * m * m * exp_moment_tail(d - 1, rho + r_star, lam, rho);

    sphere_area(d) / 2.0 * (core + mid + tail)
}

/// Small-ball harvest bound together with a flag marking whether the
/// patched construction failed and the ball bound was returned instead.
#[derive(Debug, Clone, Copy)]
pub struct SmallBallBound {
    pub value: f64,
    pub fallback: bool,
}

/// Harvest bound for measures in a small ball, via the subsolution that
/// vanishes on `B_rho`, follows the capacity-type profile out to a matching
/// radius `R`, and follows `psi` beyond. Candidate radii are taken from
/// `r_grid`; a candidate is admissible when the patched slopes satisfy
/// `U'(R) <= psi'(R)`. The result never exceeds the plain ball bound.
pub fn small_ball_bound(
    rho: f64,
    f: &GrowthFunction,
    d: usize,
    r_grid: &[f64],
) -> Result<SmallBallBound> {
    if d < 2 {
        return Err(Error::Dimension { expected: 2, got: d });
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Parameter(format!("ball radius {rho} must be positive")));
    }
    let profile = default_profile(f)?;
    let cap = ball_bound_with_profile(rho.max(1.0), f, d, &profile);

    let gamma = profile.gamma();
    let lam = (2.0 * gamma).sqrt();
    let r_star = switch_radius(f, gamma);
    let k = f.max_rate();
    let m = f.carrying_value();
    let omega_half = sphere_area(d) / 2.0;

    let mut best: Option<f64> = None;
    for &r_match in r_grid {
        if !(r_match > rho) || r_match > profile.r_max() {
            continue;
        }
        let psi_r = profile.eval(r_match);
        // Capacity-type radial piece matched to psi at r_match.
        let (u_of, u_slope_at_match) = if d == 2 {
            let a = psi_r / (r_match / rho).ln();
            (
                Box::new(move |r: f64| a * (r / rho).ln()) as Box<dyn Fn(f64) -> f64>,
                a / r_match,
            )
        } else {
            let p = 2.0 - d as f64;
            let a = psi_r / (rho.powf(p) - r_match.powf(p));
            (
                Box::new(move |r: f64| a * (rho.powf(p) - r.powf(p))) as Box<dyn Fn(f64) -> f64>,
                a * (d as f64 - 2.0) * r_match.powf(1.0 - d as f64),
            )
        };
        // Subsolution needs an upward kink at the matching sphere.
        if u_slope_at_match > profile.slope_at(f, r_match) {
            continue;
        }

        let core = k * rho.powi(d as i32) / (d as f64);
        let shell = simpson(rho, r_match, 4096, |r| {
            r.powf((d - 1) as f64) * f.envelope(u_of(r).clamp(0.0, m))
        });
        let outer_numeric_end = r_match.max(r_star);
        let outer = simpson(r_match, outer_numeric_end, 512, |r| {
            r.powf((d - 1) as f64) * f.envelope(profile.eval(r))
        });
        let tail = f.rate() * m * m * exp_moment_tail(d - 1, outer_numeric_end, lam, 0.0);

        let value = omega_half * (core + shell + outer + tail);
        if best.map_or(true, |b| value < b) {
            best = Some(value);
        }
    }

    match best {
        Some(v) if v < cap => Ok(SmallBallBound { value: v, fallback: false }),
        _ => Ok(SmallBallBound { value: cap, fallback: best.is_none() }),
    }
}

/// Geometric grid of matching radii covering both moderate and far scales.
pub fn default_match_grid(rho: f64) -> Vec<f64> {
    let lo = (rho * 1.5).max(0.05);
    let hi = 45.0;
    let n = 72;
    (0..=n)
        .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_logistic() -> GrowthFunction {
        GrowthFunction::logistic(1.0, 1.0).unwrap()
    }

    #[test]
    fn logistic_derived_quantities() {
        let f = GrowthFunction::logistic(2.0, 3.0).unwrap();
        assert_eq!(f.max_rate(), 2.0 * 9.0 / 4.0);
        assert_eq!(f.u_peak(), 1.5);
        assert_eq!(f.lipschitz(), 6.0);
        assert!((f.primitive(3.0) - 2.0 * 27.0 / 6.0).abs() < 1e-12);
        // Envelope: flat at K left of the peak, follows f to the right.
        assert_eq!(f.envelope(0.2), f.max_rate());
        assert_eq!(f.envelope(2.0), f.value(2.0));
    }

    #[test]
    fn gamma_matches_polynomial_identity() {
        // For kappa = M = 1 the ratio is psi/3 + 1/6, minimized at psi = 0.
        let f = unit_logistic();
        assert!((f.decay_gamma() - 1.0 / 6.0).abs() < 1e-12, "gamma = {}", f.decay_gamma());
        let f2 = GrowthFunction::logistic(2.0, 3.0).unwrap();
        assert!((f2.decay_gamma() - 2.0 * 3.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn profile_initial_slope_and_energy() {
        let f = unit_logistic();
        let p = psi_profile(&f, 20.0, 1e-3).unwrap();
        // psi'(0) = sqrt(2 F(1)) = sqrt(1/3).
        let fd = (p.values()[1] - p.values()[0]) / p.step();
        assert!((fd - (1.0f64 / 3.0).sqrt()).abs() < 1e-4, "psi'(0) ~ {fd}");
        assert!((p.energy_level() - 1.0 / 6.0).abs() < 1e-15);
        // Strictly increasing and below M.
        for w in p.values().windows(2).take(5000) {
            assert!(w[1] > w[0] && w[1] < 1.0);
        }
    }

    #[test]
    fn profile_exponential_lower_bound() {
        let f = unit_logistic();
        let p = psi_profile(&f, 30.0, 1e-3).unwrap();
        let lam = (2.0 * p.gamma()).sqrt();
        for (i, &v) in p.values().iter().enumerate() {
            let r = i as f64 * p.step();
            assert!(
                v >= 1.0 - (-lam * r).exp() - 1e-12,
                "expc bound fails at r = {r}: {v}"
            );
        }
    }

    #[test]
    fn coarse_step_rejected() {
        let f = unit_logistic();
        // A very coarse step cannot hold the energy to 1e-8 relative.
        match psi_profile(&f, 10.0, 0.5) {
            Err(Error::ProfileStep { .. }) => {}
            other => panic!("expected ProfileStep error, got {other:?}"),
        }
    }

    #[test]
    fn ball_bound_monotone_and_rho_one_floor() {
        let f = unit_logistic();
        let b1 = ball_harvest_bound(1.0, &f, 2).unwrap();
        let b2 = ball_harvest_bound(2.0, &f, 2).unwrap();
        let b_half = ball_harvest_bound(0.5, &f, 2).unwrap();
        assert!(b2 > b1, "bound must grow with rho");
        assert_eq!(b_half, b1, "sub-unit radii clamp to the rho = 1 value");
    }

    #[test]
    fn ball_bound_growth_approaches_two_pow_d() {
        let f = unit_logistic();
        let d = 2;
        let vals: Vec<f64> = [64.0, 128.0, 256.0, 512.0]
            .iter()
            .map(|&r| ball_harvest_bound(r, &f, d).unwrap())
            .collect();
        let ratios: Vec<f64> = vals.windows(2).map(|w| w[1] / w[0]).collect();
        let target = (2.0f64).powi(d as i32);
        for w in ratios.windows(2) {
            assert!(
                (w[1] - target).abs() < (w[0] - target).abs(),
                "ratios should approach {target}: {ratios:?}"
            );
        }
        assert!((ratios[2] - target).abs() / target < 0.10, "last ratio {}", ratios[2]);
    }

    #[test]
    fn small_ball_decreases_and_stays_below_ball_bound() {
        let f = unit_logistic();
        let d = 3;
        let mut prev = f64::INFINITY;
        for &rho in &[1e-1, 1e-2, 1e-3] {
            let sb = small_ball_bound(rho, &f, d, &default_match_grid(rho)).unwrap();
            assert!(!sb.fallback, "patched construction should be admissible at rho = {rho}");
            assert!(sb.value < prev, "bound must shrink with rho: {} !< {prev}", sb.value);
            let cap = ball_harvest_bound(rho.max(1.0), &f, d).unwrap();
            assert!(sb.value <= cap);
            prev = sb.value;
        }
    }

    #[test]
    fn small_ball_empty_grid_falls_back() {
        let f = unit_logistic();
        let sb = small_ball_bound(0.1, &f, 3, &[]).unwrap();
        assert!(sb.fallback);
        assert_eq!(sb.value, ball_harvest_bound(1.0, &f, 3).unwrap());
    }
}
