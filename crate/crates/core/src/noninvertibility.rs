//! Critical sets and preimage counts.
//!
//! The critical set `LC_-1` is where the Jacobian determinant vanishes; its
//! image `LC` separates regions of the plane (or space) with different
//! numbers of preimages. Preimages are found by eliminating the linear
//! components of the map, which leaves one scalar equation in `x`.

use crate::error::{Error, Result};
use crate::map::{memductance, step2, step3, MapParams, PlanarParams, State, State2};

/// `e^(y - x) (2 a x - a x^2 + b x^2)`, the determinant of the planar Jacobian.
pub fn lc_residual2(a: f64, b: f64, s: State2) -> f64 {
    let x = s.x;
    (s.y - s.x).exp() * (2.0 * a * x - a * x * x + b * x * x)
}

/// Critical-surface residual of the flux-coupled map. It is identical to
/// `det(jacobian3)`, sign included.
pub fn lc_residual3(p: &MapParams, s: State) -> f64 {
    let State { x, y, phi } = s;
    let e = (y - x).exp();
    -e * (2.0 * x - x * x) * p.k2 * p.a
        - p.k2 * p.a * p.k * memductance(p.alpha, p.beta, phi)
        - p.b * p.k2 * x * x * e
        - 6.0 * p.k * x * p.beta * phi * p.a * p.k1
}

/// Rectangular region of the `(x, y)` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Window {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Window { x, y }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x.0, self.x.1, self.y.0, self.y.1].iter().all(|v| v.is_finite()) && self.x.0 < self.x.1 && self.y.0 < self.y.1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("window bounds must be finite and increasing".into()))
        }
    }
}

/// Samples of a critical curve of the planar map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CriticalCurve {
    pub points: Vec<State2>,
    pub residuals: Vec<f64>,
}

/// Scattered samples of a critical surface of the flux-coupled map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CriticalSurface {
    pub points: Vec<State>,
    pub residuals: Vec<f64>,
}

/// Zero of `f` on `[lo, hi]` given a sign change, bisected to the last bit.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
}

/// Zero contour of [`lc_residual2`] on a `grid_n x grid_n` lattice: every
/// grid node that is an exact zero and every lattice edge with a sign change,
/// refined by bisection along the edge.
pub fn extract_lc2(a: f64, b: f64, window: Window, grid_n: usize) -> Result<CriticalCurve> {
    window.validate()?;
    if grid_n < 2 {
        return Err(Error::InvalidArgument("grid_n must be at least 2".into()));
    }
    let xs: Vec<f64> = linspace(window.x.0, window.x.1, grid_n).collect();
    let ys: Vec<f64> = linspace(window.y.0, window.y.1, grid_n).collect();
    let r = |x: f64, y: f64| lc_residual2(a, b, State2::new(x, y));
    let mut out = CriticalCurve::default();
    let mut push = |x: f64, y: f64| {
        out.points.push(State2::new(x, y));
        out.residuals.push(r(x, y));
    };
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let here = r(x, y);
            if here == 0.0 {
                push(x, y);
                continue;
            }
            if let Some(&xn) = xs.get(i + 1) {
                let there = r(xn, y);
                if there != 0.0 && (here < 0.0) != (there < 0.0) {
                    push(bisect(|t| r(t, y), x, xn), y);
                }
            }
            if let Some(&yn) = ys.get(j + 1) {
                let there = r(x, yn);
                if there != 0.0 && (here < 0.0) != (there < 0.0) {
                    push(x, bisect(|t| r(x, t), y, yn));
                }
            }
        }
    }
    Ok(out)
}

/// Image of a critical curve under the planar map.
pub fn lc_image2(p: &PlanarParams, set: &CriticalCurve) -> Vec<State2> {
    set.points.iter().map(|&s| step2(p, s)).collect()
}

/// Scattered samples of the critical surface: sign changes of
/// [`lc_residual3`] along `x` lines of a `grid_n^3` lattice over the window
/// and the flux interval `phi`.
pub fn extract_lc3(p: &MapParams, window: Window, phi: (f64, f64), grid_n: usize) -> Result<CriticalSurface> {
    window.validate()?;
    if grid_n < 2 || !(phi.0 < phi.1) {
        return Err(Error::InvalidArgument("need grid_n >= 2 and an increasing phi interval".into()));
    }
    let xs: Vec<f64> = linspace(window.x.0, window.x.1, grid_n).collect();
    let mut out = CriticalSurface::default();
    for f in linspace(phi.0, phi.1, grid_n) {
        for y in linspace(window.y.0, window.y.1, grid_n) {
            let r = |x: f64| lc_residual3(p, State::new(x, y, f));
            for w in xs.windows(2) {
                let (ra, rb) = (r(w[0]), r(w[1]));
                let x = if ra == 0.0 {
                    w[0]
                } else if rb != 0.0 && (ra < 0.0) != (rb < 0.0) {
                    bisect(r, w[0], w[1])
                } else {
                    continue;
                };
                out.points.push(State::new(x, y, f));
                out.residuals.push(r(x));
            }
        }
    }
    Ok(out)
}

/// Image of a critical surface under the flux-coupled map.
pub fn lc_image3(p: &MapParams, set: &CriticalSurface) -> Vec<State> {
    set.points.iter().map(|&s| step3(p, s)).collect()
}

/// Root search settings for preimage counting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreimageOptions {
    pub x_range: (f64, f64),
    pub grid_n: usize,
}

impl Default for PreimageOptions {
    fn default() -> Self {
        PreimageOptions { x_range: (-10.0, 20.0), grid_n: 40001 }
    }
}

fn scalar_roots(h: impl Fn(f64) -> f64, opts: &PreimageOptions) -> Result<Vec<f64>> {
    let (lo, hi) = opts.x_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) || opts.grid_n < 2 {
        return Err(Error::InvalidArgument("preimage search needs a finite increasing range and grid_n >= 2".into()));
    }
    let xs: Vec<f64> = linspace(lo, hi, opts.grid_n).collect();
    let mut roots = Vec::new();
    let mut prev = h(xs[0]);
    if prev == 0.0 {
        roots.push(xs[0]);
    }
    for w in xs.windows(2) {
        let next = h(w[1]);
        if next == 0.0 {
            roots.push(w[1]);
        } else if prev != 0.0 && prev.is_finite() && next.is_finite() && (prev < 0.0) != (next < 0.0) {
            roots.push(bisect(&h, w[0], w[1]));
        }
        prev = next;
    }
    Ok(roots)
}

/// Preimages of `target` under the planar map, in increasing `x`.
pub fn preimages2(p: &PlanarParams, target: State2, opts: &PreimageOptions) -> Result<Vec<State2>> {
    if p.a == 0.0 {
        return Err(Error::InvalidArgument("a = 0 makes y unrecoverable".into()));
    }
    if !(target.x.is_finite() && target.y.is_finite()) {
        return Err(Error::InvalidArgument("target must be finite".into()));
    }
    let y_of = |x: f64| (target.y - p.c + p.b * x) / p.a;
    let h = |x: f64| x * x * (y_of(x) - x).exp() + p.k0 - target.x;
    Ok(scalar_roots(h, opts)?.into_iter().map(|x| State2::new(x, y_of(x))).collect())
}

pub fn count_preimages2(p: &PlanarParams, target: State2, opts: &PreimageOptions) -> Result<usize> {
    preimages2(p, target, opts).map(|v| v.len())
}

/// Preimages of `target` under the flux-coupled map, in increasing `x`.
pub fn preimages3(p: &MapParams, target: State, opts: &PreimageOptions) -> Result<Vec<State>> {
    if p.a == 0.0 {
        return Err(Error::InvalidArgument("a = 0 makes y unrecoverable".into()));
    }
    if p.k2 == 0.0 {
        return Err(Error::InvalidArgument("k2 = 0 makes phi unrecoverable".into()));
    }
    if !target.is_finite() {
        return Err(Error::InvalidArgument("target must be finite".into()));
    }
    let y_of = |x: f64| (target.y - p.c + p.b * x) / p.a;
    let phi_of = |x: f64| (p.k1 * x - target.phi) / p.k2;
    let h = |x: f64| x * x * (y_of(x) - x).exp() + p.k0 + p.k * x * memductance(p.alpha, p.beta, phi_of(x)) - target.x;
    Ok(scalar_roots(h, opts)?.into_iter().map(|x| State::new(x, y_of(x), phi_of(x))).collect())
}

pub fn count_preimages3(p: &MapParams, target: State, opts: &PreimageOptions) -> Result<usize> {
    preimages3(p, target, opts).map(|v| v.len())
}
