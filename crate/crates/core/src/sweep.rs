//! One- and two-parameter brute-force scans.

use crate::error::{Error, Result};
use crate::lyapunov::lyapunov_spectrum;
use crate::map::{MapParams, Param, State};
use crate::orbit::{iterate_with_threshold, period_of_tail, DEFAULT_DIVERGENCE_THRESHOLD};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcPolicy {
    /// Every parameter value starts from the sweep's fixed initial condition.
    FixedIc,
    /// The final state at one value seeds the next.
    InheritFinal,
}

/// Default single-linkage tolerance in `x` for branch counting.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub param: Param,
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
    pub direction: Direction,
    pub n_transient: usize,
    pub n_keep: usize,
    pub ic_policy: IcPolicy,
    pub ic: State,
    pub cluster_tol: f64,
    pub divergence_threshold: f64,
}

impl SweepSpec {
    /// 1D defaults: 1000 transient steps, 100 kept, inherited initial conditions.
    pub fn new(param: Param, start: f64, stop: f64, n_points: usize) -> Self {
        SweepSpec {
            param,
            start,
            stop,
            n_points,
            direction: Direction::Forward,
            n_transient: 1000,
            n_keep: 100,
            ic_policy: IcPolicy::InheritFinal,
            ic: State::new(0.1, 0.1, 0.0),
            cluster_tol: DEFAULT_CLUSTER_TOL,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.param.is_network() {
            return Err(Error::NotAMapParameter(self.param.name()));
        }
        if self.n_points < 2 {
            return Err(Error::InvalidArgument("a sweep needs at least 2 points".into()));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) || self.start == self.stop {
            return Err(Error::InvalidArgument("sweep start and stop must be finite and distinct".into()));
        }
        if self.n_keep == 0 {
            return Err(Error::InvalidArgument("n_keep must be positive".into()));
        }
        if !self.ic.is_finite() {
            return Err(Error::InvalidArgument("initial condition must be finite".into()));
        }
        Ok(())
    }

    /// Grid value `i` counted from `start`.
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            return self.stop;
        }
        self.start + (self.stop - self.start) * i as f64 / (self.n_points - 1) as f64
    }

    /// Grid values in scan order.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.n_points).map(|i| self.value(i)).collect();
        if self.direction == Direction::Backward {
            v.reverse();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    /// Exactly `n_keep` values; NaN-padded past a divergence.
    pub xs: Vec<f64>,
    pub diverged: bool,
    pub max_lyapunov: Option<f64>,
    /// Distinct `x` clusters among the kept values; 0 for diverged rows.
    pub branch_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BifurcationData {
    /// In scan order.
    pub rows: Vec<SweepRow>,
}

impl BifurcationData {
    /// Rows sorted by increasing parameter value.
    pub fn sorted(&self) -> Vec<&SweepRow> {
        let mut v: Vec<&SweepRow> = self.rows.iter().collect();
        v.sort_by(|a, b| a.param.total_cmp(&b.param));
        v
    }
}

/// Number of 1D clusters under single linkage at `tol`. Non-finite values
/// are ignored.
pub fn count_branches(xs: &[f64], tol: f64) -> usize {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0;
    }
    v.sort_by(f64::total_cmp);
    1 + v.windows(2).filter(|w| w[1] - w[0] > tol).count()
}

fn sweep_cell(p: &MapParams, spec: &SweepSpec, ic: State) -> (SweepRow, Option<State>) {
    let traj = iterate_with_threshold(p, ic, spec.n_transient, spec.n_keep, spec.divergence_threshold);
    let mut xs: Vec<f64> = traj.states.iter().map(|s| s.x).collect();
    let last = traj.states.last().copied();
    let branch_count = if traj.diverged { 0 } else { count_branches(&xs, spec.cluster_tol) };
    xs.resize(spec.n_keep, f64::NAN);
    let row = SweepRow { param: 0.0, xs, diverged: traj.diverged, max_lyapunov: None, branch_count };
    (row, if traj.diverged { None } else { last })
}

/// Bifurcation diagram data over `spec`. When `lyapunov_iters > 0` each
/// bounded row also carries the maximal exponent started at its last state.
pub fn bifurcation_sweep(base: &MapParams, spec: &SweepSpec, lyapunov_iters: usize, exec: Exec) -> Result<BifurcationData> {
    spec.validate()?;
    let values = spec.values();
    let run = |value: f64, ic: State| -> Result<(SweepRow, Option<State>)> {
        let p = base.with(spec.param, value)?;
        let (mut row, last) = sweep_cell(&p, spec, ic);
        row.param = value;
        if let (Some(s), true) = (last, lyapunov_iters > 0) {
            row.max_lyapunov = lyapunov_spectrum(&p, s, 0, lyapunov_iters).ok().map(|sp| sp.max());
        }
        Ok((row, last))
    };
    let rows = match spec.ic_policy {
        IcPolicy::FixedIc => exec
            .map_slice(&values, |&v| run(v, spec.ic).map(|(row, _)| row))
            .into_iter()
            .collect::<Result<Vec<_>>>()?,
        IcPolicy::InheritFinal => {
            let mut ic = spec.ic;
            let mut rows = Vec::with_capacity(values.len());
            for &v in &values {
                let (row, last) = run(v, ic)?;
                ic = last.unwrap_or(spec.ic);
                rows.push(row);
            }
            rows
        }
    };
    Ok(BifurcationData { rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovRow {
    pub param: f64,
    /// `None` when the orbit diverged.
    pub exponents: Option<[f64; 3]>,
}

impl LyapunovRow {
    pub fn max(&self) -> Option<f64> {
        self.exponents.map(|e| e[0])
    }
}

/// One spectrum per parameter value: `spec.n_transient` settling steps then
/// `n_iter` averaged steps.
pub fn lyapunov_sweep(base: &MapParams, spec: &SweepSpec, n_iter: usize, exec: Exec) -> Result<Vec<LyapunovRow>> {
    spec.validate()?;
    let values = spec.values();
    let run = |value: f64, ic: State| -> Result<(LyapunovRow, Option<State>)> {
        let p = base.with(spec.param, value)?;
        match lyapunov_spectrum(&p, ic, spec.n_transient, n_iter) {
            Ok(sp) => Ok((LyapunovRow { param: value, exponents: Some(sp.exponents) }, Some(sp.final_state))),
            Err(Error::Diverged { .. }) | Err(Error::DegenerateFrame { .. }) => Ok((LyapunovRow { param: value, exponents: None }, None)),
            Err(e) => Err(e),
        }
    };
    match spec.ic_policy {
        IcPolicy::FixedIc => exec.map_slice(&values, |&v| run(v, spec.ic).map(|(r, _)| r)).into_iter().collect(),
        IcPolicy::InheritFinal => {
            let mut ic = spec.ic;
            let mut rows = Vec::with_capacity(values.len());
            for &v in &values {
                let (row, last) = run(v, ic)?;
                ic = last.unwrap_or(spec.ic);
                rows.push(row);
            }
            Ok(rows)
        }
    }
}

/// `p >= 1` periodic with period `p`, 0 aperiodic, -1 diverged.
pub type PeriodClass = i32;
pub const CLASS_APERIODIC: PeriodClass = 0;
pub const CLASS_DIVERGED: PeriodClass = -1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub u: f64,
    pub v: f64,
    /// NaN on diverged cells.
    pub lmax: f64,
    pub period_class: PeriodClass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep2dOptions {
    pub tol: f64,
    pub max_period: usize,
    pub lyapunov_iters: usize,
}

impl Default for Sweep2dOptions {
    fn default() -> Self {
        Sweep2dOptions { tol: 1e-6, max_period: 64, lyapunov_iters: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2d {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Row-major: `cells[j * u.len() + i]` is `(u[i], v[j])`.
    pub cells: Vec<Cell>,
}

impl Grid2d {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[j * self.u.len() + i]
    }
}

/// Classify one parameter set from `ic`: settle for `n_transient` steps,
/// estimate the exponent over `lyapunov_iters` steps, then test the next
/// `n_keep` states for periodicity.
pub fn classify_cell(p: &MapParams, ic: State, n_transient: usize, n_keep: usize, opts: &Sweep2dOptions) -> Result<(f64, PeriodClass)> {
    let sp = match lyapunov_spectrum(p, ic, n_transient, opts.lyapunov_iters.max(1)) {
        Ok(sp) => sp,
        Err(Error::Diverged { .. }) | Err(Error::DegenerateFrame { .. }) => return Ok((f64::NAN, CLASS_DIVERGED)),
        Err(e) => return Err(e),
    };
    let traj = iterate_with_threshold(p, sp.final_state, 0, n_keep.max(3 * opts.max_period), DEFAULT_DIVERGENCE_THRESHOLD);
    if traj.diverged {
        return Ok((f64::NAN, CLASS_DIVERGED));
    }
    let class = match period_of_tail(&traj.states, opts.tol, opts.max_period)? {
        Some(p) => p as PeriodClass,
        None => CLASS_APERIODIC,
    };
    Ok((sp.max(), class))
}

/// Two-parameter classification map. Cells are independent and always start
/// from `spec_u.ic`; transient and tail lengths come from `spec_u`.
pub fn sweep2d(base: &MapParams, spec_u: &SweepSpec, spec_v: &SweepSpec, opts: &Sweep2dOptions, exec: Exec) -> Result<Grid2d> {
    spec_u.validate()?;
    spec_v.validate()?;
    if spec_u.n_points > 2000 || spec_v.n_points > 2000 {
        return Err(Error::InvalidArgument("2D grids are limited to 2000 x 2000".into()));
    }
    let u = spec_u.values();
    let v = spec_v.values();
    let nu = u.len();
    let cells = exec
        .map_indexed(nu * v.len(), |idx| {
            let (uu, vv) = (u[idx % nu], v[idx / nu]);
            let p = base.with(spec_u.param, uu)?.with(spec_v.param, vv)?;
            let (lmax, period_class) = classify_cell(&p, spec_u.ic, spec_u.n_transient, spec_u.n_keep, opts)?;
            Ok(Cell { u: uu, v: vv, lmax, period_class })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Grid2d { u, v, cells })
}
