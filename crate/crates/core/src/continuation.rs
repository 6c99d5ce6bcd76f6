//! Pseudo-arclength continuation of fixed-point branches in one parameter,
//! with fold (LP), flip (PD) and Neimark-Sacker (NS) detection.
//!
//! The unknown is `u = (x, y, phi, p)` and the branch is the zero set of
//! `G(u) = step3(s; p) - s`. The tangent is the null vector of
//! `[J - I | dG/dp]`, so folds in `p` are passed without special handling.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fixed_points::eigenvalues3;
use crate::map::{jacobian3, step3, MapParams, Param, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    /// Corrector tolerance on `|G|_inf`.
    pub tol: f64,
    pub max_newton: usize,
    pub step0: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Number of points to return, the corrected start included.
    pub n_max: usize,
    /// Initial direction of travel in the free parameter: +1 or -1.
    pub direction: f64,
    /// Stop after the first point outside this parameter interval.
    pub param_range: Option<(f64, f64)>,
    /// Stop once `|x|` exceeds this bound.
    pub state_bound: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            tol: 1e-10,
            max_newton: 25,
            step0: 1e-3,
            step_min: 1e-8,
            step_max: 0.1,
            n_max: 2000,
            direction: 1.0,
            param_range: None,
            state_bound: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub param: f64,
    pub state: State,
    /// Sorted by decreasing modulus.
    pub eigenvalues: [Complex64; 3],
    /// `det(J - I)`.
    pub test_lp: f64,
    /// `det(J + I)`.
    pub test_pd: f64,
    /// `prod_{i<j} (l_i l_j - 1)`.
    pub test_ns: f64,
    pub stable: bool,
}

impl BranchPoint {
    fn to_vec(&self) -> Vector4<f64> {
        Vector4::new(self.state.x, self.state.y, self.state.phi, self.param)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    MaxPoints,
    LeftRange,
    LeftBounds,
    /// Corrector failed down to the minimal step.
    StepTooSmall(String),
    /// The extended Jacobian lost rank.
    Singular(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub free: Param,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

struct System<'a> {
    base: &'a MapParams,
    free: Param,
}

impl System<'_> {
    fn params(&self, p: f64) -> Result<MapParams> {
        self.base.with(self.free, p)
    }

    fn residual(&self, u: &Vector4<f64>) -> Result<Vector3<f64>> {
        let s = State::new(u[0], u[1], u[2]);
        let img = step3(&self.params(u[3])?, s);
        Ok(Vector3::new(img.x - s.x, img.y - s.y, img.phi - s.phi))
    }

    /// `[J - I | dG/dp]` at `u`.
    fn jacobian(&self, u: &Vector4<f64>) -> Result<(Matrix3<f64>, Vector3<f64>)> {
        let s = State::new(u[0], u[1], u[2]);
        let p = self.params(u[3])?;
        let j = jacobian3(&p, s) - Matrix3::identity();
        let gp = p.param_derivative(self.free, s)?;
        Ok((j, Vector3::from(gp)))
    }

    /// Unit null vector of the 3x4 extended Jacobian via signed minors.
    fn tangent(&self, u: &Vector4<f64>) -> Result<Vector4<f64>> {
        let (j, gp) = self.jacobian(u)?;
        let cols = [j.column(0).into_owned(), j.column(1).into_owned(), j.column(2).into_owned(), gp];
        let minor = |skip: usize| {
            let keep: Vec<Vector3<f64>> = (0..4).filter(|&c| c != skip).map(|c| cols[c]).collect();
            Matrix3::from_columns(&keep).determinant()
        };
        let t = Vector4::new(minor(0), -minor(1), minor(2), -minor(3));
        let n = t.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Continuation("extended Jacobian is rank deficient".into()));
        }
        Ok(t / n)
    }

    /// Newton on `G = 0` plus `d . (u - anchor) = 0`.
    fn correct(&self, guess: Vector4<f64>, d: &Vector4<f64>, anchor: &Vector4<f64>, tol: f64, max_newton: usize) -> Result<Option<Vector4<f64>>> {
        let mut u = guess;
        for _ in 0..=max_newton {
            let g = self.residual(&u)?;
            let h = d.dot(&(u - anchor));
            if !g.iter().all(|v| v.is_finite()) {
                return Ok(None);
            }
            if g.amax() <= tol && h.abs() <= tol {
                return Ok(Some(u));
            }
            let (j, gp) = self.jacobian(&u)?;
            let m = Matrix4::new(
                j[(0, 0)], j[(0, 1)], j[(0, 2)], gp[0],
                j[(1, 0)], j[(1, 1)], j[(1, 2)], gp[1],
                j[(2, 0)], j[(2, 1)], j[(2, 2)], gp[2],
                d[0], d[1], d[2], d[3],
            );
            let rhs = -Vector4::new(g[0], g[1], g[2], h);
            match m.lu().solve(&rhs) {
                Some(delta) if delta.iter().all(|v| v.is_finite()) => u += delta,
                _ => return Ok(None),
            }
        }
        Ok(None)
    }

    fn point(&self, u: &Vector4<f64>) -> Result<BranchPoint> {
        let s = State::new(u[0], u[1], u[2]);
        let j = jacobian3(&self.params(u[3])?, s);
        let eigenvalues = eigenvalues3(&j);
        let id = Matrix3::identity();
        let mut ns = Complex64::new(1.0, 0.0);
        for i in 0..3 {
            for k in i + 1..3 {
                ns *= eigenvalues[i] * eigenvalues[k] - 1.0;
            }
        }
        Ok(BranchPoint {
            param: u[3],
            state: s,
            eigenvalues,
            test_lp: (j - id).determinant(),
            test_pd: (j + id).determinant(),
            test_ns: ns.re,
            stable: eigenvalues.iter().all(|l| l.norm() < 1.0),
        })
    }
}

/// Follow the fixed-point branch through `start` as `free` varies. The
/// value of `free` in `base` is the starting parameter.
pub fn continue_branch(base: &MapParams, free: Param, start: State, opts: &ContinuationOptions) -> Result<Branch> {
    if opts.n_max == 0 || !(opts.step_min > 0.0 && opts.step_min <= opts.step0 && opts.step0 <= opts.step_max) {
        return Err(Error::InvalidArgument("need n_max >= 1 and 0 < step_min <= step0 <= step_max".into()));
    }
    let sys = System { base, free };
    let p0 = base.get(free)?;
    let u0 = Vector4::new(start.x, start.y, start.phi, p0);
    let fix_p = Vector4::new(0.0, 0.0, 0.0, 1.0);
    let mut u = sys
        .correct(u0, &fix_p, &u0, opts.tol, opts.max_newton)?
        .ok_or_else(|| Error::Continuation("start does not converge to a fixed point".into()))?;
    let mut points = vec![sys.point(&u)?];
    let mut t = sys.tangent(&u)?;
    if t[3] * opts.direction < 0.0 {
        t = -t;
    }
    let mut h = opts.step0;
    let in_range = |p: f64| opts.param_range.is_none_or(|(lo, hi)| (lo..=hi).contains(&p));
    while points.len() < opts.n_max {
        let predicted = u + t * h;
        match sys.correct(predicted, &t, &predicted, opts.tol, opts.max_newton)? {
            Some(un) => {
                let tn = match sys.tangent(&un) {
                    Ok(tn) => tn,
                    Err(e) => return Ok(Branch { free, points, termination: Termination::Singular(e.to_string()) }),
                };
                t = if tn.dot(&t) < 0.0 { -tn } else { tn };
                u = un;
                points.push(sys.point(&u)?);
                if !in_range(u[3]) {
                    return Ok(Branch { free, points, termination: Termination::LeftRange });
                }
                if u[0].abs() > opts.state_bound {
                    return Ok(Branch { free, points, termination: Termination::LeftBounds });
                }
                h = (h * 1.5).min(opts.step_max);
            }
            None => {
                h *= 0.5;
                if h < opts.step_min {
                    let msg = format!("corrector failed below step_min near {} = {}", free, u[3]);
                    return Ok(Branch { free, points, termination: Termination::StepTooSmall(msg) });
                }
            }
        }
    }
    Ok(Branch { free, points, termination: Termination::MaxPoints })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    LP,
    PD,
    NS,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::LP => "LP",
            EventKind::PD => "PD",
            EventKind::NS => "NS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationEvent {
    pub kind: EventKind,
    pub param: f64,
    pub state: State,
    /// The refined point.
    pub point: BranchPoint,
    /// Branch points on either side.
    pub bracket: (BranchPoint, BranchPoint),
    /// Set when another event lies within the parameter accuracy.
    pub near_other_event: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    /// Modulus band around 1 a complex pair must sit in for an NS candidate.
    pub ns_band: f64,
    pub param_tol: f64,
    pub tol: f64,
    pub max_newton: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions { ns_band: 0.05, param_tol: 1e-8, tol: 1e-10, max_newton: 25 }
    }
}

fn test_value(kind: EventKind, p: &BranchPoint) -> f64 {
    match kind {
        EventKind::LP => p.test_lp,
        EventKind::PD => p.test_pd,
        EventKind::NS => p.test_ns,
    }
}

/// Whether the point carries a conjugate pair with modulus within `band` of 1.
fn has_pair_near_circle(p: &BranchPoint, band: f64) -> bool {
    p.eigenvalues.iter().any(|l| l.im.abs() > 1e-12 && (l.norm() - 1.0).abs() <= band)
}

/// Locate every sign change of the three test functions along `branch` and
/// refine it by bisection along the secant between the bracketing points.
pub fn detect_codim1(base: &MapParams, branch: &Branch, opts: &DetectOptions) -> Result<Vec<BifurcationEvent>> {
    if branch.points.len() < 2 {
        return Err(Error::InvalidArgument("need a branch with at least 2 points".into()));
    }
    let sys = System { base, free: branch.free };
    let mut events = Vec::new();
    for w in branch.points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for kind in [EventKind::LP, EventKind::PD, EventKind::NS] {
            let (ta, tb) = (test_value(kind, a), test_value(kind, b));
            if (ta < 0.0) == (tb < 0.0) {
                continue;
            }
            if kind == EventKind::NS && !(has_pair_near_circle(a, opts.ns_band) || has_pair_near_circle(b, opts.ns_band)) {
                continue;
            }
            let point = refine(&sys, kind, a, b, opts)?;
            if kind == EventKind::NS && !has_pair_near_circle(&point, opts.ns_band) {
                continue;
            }
            events.push(BifurcationEvent {
                kind,
                param: point.param,
                state: point.state,
                point,
                bracket: (a.clone(), b.clone()),
                near_other_event: false,
            });
        }
    }
    for i in 0..events.len() {
        for j in 0..events.len() {
            if i != j && (events[i].param - events[j].param).abs() <= opts.param_tol {
                events[i].near_other_event = true;
            }
        }
    }
    Ok(events)
}

fn refine(sys: &System, kind: EventKind, a: &BranchPoint, b: &BranchPoint, opts: &DetectOptions) -> Result<BranchPoint> {
    let (ua, ub) = (a.to_vec(), b.to_vec());
    let chord = ub - ua;
    let d = chord / chord.norm();
    let at = |theta: f64| -> Result<Option<BranchPoint>> {
        let anchor = ua + chord * theta;
        match sys.correct(anchor, &d, &anchor, opts.tol, opts.max_newton)? {
            Some(u) => sys.point(&u).map(Some),
            None => Ok(None),
        }
    };
    let (mut lo, mut hi) = ((0.0, a.clone()), (1.0, b.clone()));
    let sign_lo = test_value(kind, a) < 0.0;
    for _ in 0..200 {
        let close_p = (hi.1.param - lo.1.param).abs() <= opts.param_tol;
        let close_u = (hi.0 - lo.0) * chord.norm() <= opts.param_tol;
        if close_p && close_u {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let Some(pm) = at(mid)? else { break };
        if (test_value(kind, &pm) < 0.0) == sign_lo {
            lo = (mid, pm);
        } else {
            hi = (mid, pm);
        }
    }
    Ok(if test_value(kind, &lo.1).abs() <= test_value(kind, &hi.1).abs() { lo.1 } else { hi.1 })
}

/// Number of eigenvalues strictly outside the unit circle.
pub fn unstable_count(p: &BranchPoint) -> usize {
    p.eigenvalues.iter().filter(|l| l.norm() > 1.0).count()
}
