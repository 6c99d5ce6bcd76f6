//! Fixed points of the flux-coupled map and their linear stability.
//!
//! Eliminating `y` and `phi` from the fixed-point conditions leaves one
//! transcendental equation in `x`:
//!
//! ```text
//! x^2 exp(((b - a + 1) x - c) / (a - 1)) + k0 + (3 k beta k1^2 / D) x^3 + k alpha x = x
//! ```
//!
//! With `phi = k1 x / (1 + k2)` the exact denominator is `D = (1 + k2)^2`.
//! The often-quoted form uses `D = 1 + k2^2`; its roots are not fixed points
//! of the map once `k != 0`, but it is kept as [`ResidualForm::Printed`] so
//! published tables that were computed with it can be reproduced.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::map::{jacobian3, MapParams, State};

/// Which denominator the eliminated cubic flux term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualForm {
    /// `(1 + k2)^2`: roots are true fixed points of the map.
    #[default]
    Consistent,
    /// `1 + k2^2`: the printed variant.
    Printed,
}

impl ResidualForm {
    fn denominator(self, k2: f64) -> f64 {
        match self {
            ResidualForm::Consistent => (1.0 + k2) * (1.0 + k2),
            ResidualForm::Printed => 1.0 + k2 * k2,
        }
    }
}

/// A solved equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    /// Residual of the scalar equation at `x`.
    pub residual: f64,
}

impl FixedPoint {
    pub fn state(&self) -> State {
        State::new(self.x, self.y, self.phi)
    }

    /// Lift a root `x` to the full state.
    pub fn lift(p: &MapParams, x: f64, residual: f64) -> Self {
        FixedPoint {
            x,
            y: (p.b * x - p.c) / (p.a - 1.0),
            phi: p.k1 * x / (1.0 + p.k2),
            residual,
        }
    }
}

/// Fixed-point search settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub x_min: f64,
    pub x_max: f64,
    pub grid_n: usize,
    pub tol: f64,
    pub form: ResidualForm,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { x_min: -5.0, x_max: 15.0, grid_n: 20001, tol: 1e-10, form: ResidualForm::Consistent }
    }
}

/// Outcome of [`find_fixed_points`]: bracketed roots plus near-misses where
/// the residual touches zero without changing sign.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FixedPointSet {
    pub roots: Vec<FixedPoint>,
    /// Possible tangencies (double roots): `|residual| < sqrt(tol)` at a
    /// local extremum with no sign change. `residual` holds the extremum.
    pub tangencies: Vec<FixedPoint>,
}

impl FixedPointSet {
    /// Roots and tangencies together, sorted by `x`.
    pub fn all_candidates(&self) -> Vec<FixedPoint> {
        let mut v: Vec<_> = self.roots.iter().chain(&self.tangencies).copied().collect();
        v.sort_by(|a, b| a.x.total_cmp(&b.x));
        v
    }
}

/// `f(x) - x` for the eliminated fixed-point equation.
pub fn fp_residual(p: &MapParams, x: f64, form: ResidualForm) -> Result<f64> {
    if p.a == 1.0 {
        return Err(Error::UnitRecoveryRate);
    }
    Ok(residual_unchecked(p, x, form))
}

#[inline]
fn residual_unchecked(p: &MapParams, x: f64, form: ResidualForm) -> f64 {
    let expo = ((p.b - p.a + 1.0) * x - p.c) / (p.a - 1.0);
    let cubic = 3.0 * p.k * p.beta * p.k1 * p.k1 / form.denominator(p.k2);
    x * x * expo.exp() + p.k0 + cubic * x * x * x + x * p.k * p.alpha - x
}

fn residual_slope(p: &MapParams, x: f64, form: ResidualForm) -> f64 {
    let g = (p.b - p.a + 1.0) / (p.a - 1.0);
    let e = ((p.b - p.a + 1.0) * x - p.c) / (p.a - 1.0);
    let cubic = 3.0 * p.k * p.beta * p.k1 * p.k1 / form.denominator(p.k2);
    e.exp() * (2.0 * x + g * x * x) + 3.0 * cubic * x * x + p.k * p.alpha - 1.0
}

/// Bracket every sign change of the residual on a uniform grid, refine by
/// bisection and polish with Newton.
pub fn find_fixed_points(p: &MapParams, opts: &SearchOptions) -> Result<FixedPointSet> {
    if p.a == 1.0 {
        return Err(Error::UnitRecoveryRate);
    }
    if !(opts.x_min < opts.x_max) || opts.grid_n < 2 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need x_min < x_max, grid_n >= 2, tol > 0 (got {}, {}, {}, {})",
            opts.x_min, opts.x_max, opts.grid_n, opts.tol
        )));
    }
    let form = opts.form;
    let f = |x: f64| residual_unchecked(p, x, form);
    let n = opts.grid_n;
    let h = (opts.x_max - opts.x_min) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| opts.x_min + i as f64 * h).collect();
    let rs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();

    let mut roots = Vec::new();
    let mut bracketed = vec![false; n];
    for i in 0..n {
        if rs[i] == 0.0 {
            roots.push(xs[i]);
            bracketed[i] = true;
        } else if i + 1 < n && rs[i].is_finite() && rs[i + 1].is_finite() && rs[i] * rs[i + 1] < 0.0 {
            roots.push(refine_root(&f, p, form, xs[i], xs[i + 1], rs[i], opts.tol));
            bracketed[i] = true;
            bracketed[i + 1] = true;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|b, a| (*b - *a).abs() <= 10.0 * opts.tol);

    let sqrt_tol = opts.tol.sqrt();
    let mut tangencies = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let (l, m, r) = (rs[i - 1].abs(), rs[i].abs(), rs[i + 1].abs());
        if !(m <= l && m < r) || bracketed[i - 1] || bracketed[i] || bracketed[i + 1] {
            continue;
        }
        let (xm, rm) = minimize_abs(&f, xs[i - 1], xs[i + 1]);
        if rm.abs() < sqrt_tol && !roots.iter().any(|&x0| (x0 - xm).abs() <= 10.0 * h) {
            tangencies.push(FixedPoint::lift(p, xm, rm));
        }
    }

    Ok(FixedPointSet {
        roots: roots.into_iter().map(|x| FixedPoint::lift(p, x, f(x))).collect(),
        tangencies,
    })
}

fn refine_root<F: Fn(f64) -> f64>(
    f: &F,
    p: &MapParams,
    form: ResidualForm,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    tol: f64,
) -> f64 {
    let (lo0, hi0) = (lo, hi);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (fm.abs() <= tol && hi - lo <= tol) {
            break;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    // Newton polish, kept inside the original bracket.
    let mut x = mid;
    let mut fx = f(x);
    for _ in 0..4 {
        let d = residual_slope(p, x, form);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let xn = x - fx / d;
        if !(lo0..=hi0).contains(&xn) {
            break;
        }
        let fn_ = f(xn);
        if fn_.abs() >= fx.abs() {
            break;
        }
        x = xn;
        fx = fn_;
    }
    x
}

/// Golden-section search for the minimum of `|f|` on `[a, b]`.
fn minimize_abs<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..100 {
        if f(c).abs() < f(d).abs() {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Stability type by eigenvalue moduli.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Saddle,
    Repelling,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Saddle => "saddle",
            Stability::Repelling => "repelling",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Sorted by decreasing modulus; complex pairs are adjacent.
    pub eigenvalues: [Complex64; 3],
    pub classification: Stability,
    pub has_complex_pair: bool,
}

/// Eigenvalues of a real 3x3 matrix, sorted by decreasing modulus.
pub fn eigenvalues3(m: &Matrix3<f64>) -> [Complex64; 3] {
    let ev = m.complex_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2]];
    out.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.im.total_cmp(&a.im)));
    out
}

/// Classify any 3x3 linearisation.
pub fn classify_matrix(m: &Matrix3<f64>) -> StabilityReport {
    let eigenvalues = eigenvalues3(m);
    let outside = eigenvalues.iter().filter(|l| l.norm() > 1.0).count();
    let inside = eigenvalues.iter().filter(|l| l.norm() < 1.0).count();
    let classification = if inside == 3 {
        Stability::Stable
    } else if outside == 3 {
        Stability::Repelling
    } else {
        Stability::Saddle
    };
    let has_complex_pair = eigenvalues.iter().any(|l| l.im != 0.0);
    StabilityReport { eigenvalues, classification, has_complex_pair }
}

/// Eigenvalues of the Jacobian at `fp` and the resulting type.
pub fn classify(p: &MapParams, fp: &FixedPoint) -> StabilityReport {
    classify_matrix(&jacobian3(p, fp.state()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{presets::fixed_point_family, step3};

    #[test]
    fn residual_cases() {
        let p = fixed_point_family(0.0);
        for form in [ResidualForm::Consistent, ResidualForm::Printed] {
            assert!(fp_residual(&p, -0.178714, form).unwrap().abs() < 1e-4);
        }
        let p0 = MapParams { k0: 0.0, ..p };
        assert_eq!(fp_residual(&p0, 0.0, ResidualForm::Consistent).unwrap(), 0.0);
        let p76 = fixed_point_family(7.6);
        assert!(fp_residual(&p76, 1.81526, ResidualForm::Printed).unwrap().abs() < 1e-4);
        let bad = MapParams { a: 1.0, ..p };
        assert_eq!(fp_residual(&bad, 0.3, ResidualForm::Consistent), Err(Error::UnitRecoveryRate));
    }

    #[test]
    fn single_root_at_zero_flux() {
        let set = find_fixed_points(&fixed_point_family(0.0), &SearchOptions::default()).unwrap();
        assert_eq!(set.roots.len(), 1);
        assert!((set.roots[0].x + 0.178714).abs() < 1e-3);
        assert!(set.tangencies.is_empty());
    }

    #[test]
    fn zero_flux_third_eigenvalue_is_minus_k2() {
        let p = fixed_point_family(0.0);
        let fp = find_fixed_points(&p, &SearchOptions::default()).unwrap().roots[0];
        let rep = classify(&p, &fp);
        assert!(rep.eigenvalues.iter().any(|l| (l.re + p.k2).abs() < 1e-12 && l.im == 0.0));
    }

    #[test]
    fn consistent_roots_resubstitute() {
        for k in [0.0, 2.3, 4.17026, 7.6, -3.0] {
            let p = fixed_point_family(k);
            let set = find_fixed_points(&p, &SearchOptions::default()).unwrap();
            for fp in &set.roots {
                assert!(fp.residual.abs() <= 1e-10);
                assert!(step3(&p, fp.state()).dist_inf(&fp.state()) <= 1e-6, "k={k} {fp:?}");
            }
        }
    }

    #[test]
    fn printed_form_counts() {
        let opts = SearchOptions { form: ResidualForm::Printed, ..Default::default() };
        let set = find_fixed_points(&fixed_point_family(7.6), &opts).unwrap();
        let xs: Vec<f64> = set.roots.iter().map(|r| r.x).collect();
        assert_eq!(xs.len(), 4);
        for (x, want) in xs.iter().zip([-0.211586, 0.46005, 1.81526, 3.89223]) {
            assert!((x - want).abs() < 1e-3, "{x} vs {want}");
        }
        let set = find_fixed_points(&fixed_point_family(4.17026), &opts).unwrap();
        assert_eq!(set.roots.len(), 2);
        assert_eq!(set.tangencies.len(), 1);
        assert_eq!(set.all_candidates().len(), 3);
    }

    #[test]
    fn rejects_bad_search() {
        let p = fixed_point_family(0.0);
        let opts = SearchOptions { x_min: 1.0, x_max: 0.0, ..Default::default() };
        assert!(find_fixed_points(&p, &opts).is_err());
    }

    #[test]
    fn synthetic_half_identity_is_stable() {
        let rep = classify_matrix(&(Matrix3::identity() * 0.5));
        assert_eq!(rep.classification, Stability::Stable);
        assert!(rep.eigenvalues.iter().all(|l| (l.re - 0.5).abs() < 1e-15 && l.im == 0.0));
        assert!(!rep.has_complex_pair);
    }

    #[test]
    fn stable_focus_at_strong_flux() {
        let p = fixed_point_family(7.6);
        let opts = SearchOptions { form: ResidualForm::Printed, ..Default::default() };
        let fp = find_fixed_points(&p, &opts).unwrap().roots[2];
        let rep = classify(&p, &fp);
        assert_eq!(rep.classification, Stability::Stable);
        assert!(rep.has_complex_pair);
        let pair = rep.eigenvalues[0];
        assert!((pair.re - 0.7344).abs() < 2e-3 && (pair.im.abs() - 0.4605).abs() < 2e-3);
        assert_eq!(rep.eigenvalues[1], pair.conj());
    }
}
