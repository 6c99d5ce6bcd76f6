//! Orbits, divergence and period detection, and attractor fingerprints.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lyapunov::lyapunov_spectrum;
use crate::map::{step3, MapParams, State};

/// `|x|` beyond which an orbit counts as escaped to infinity.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Kept tail. On divergence, only the finite states recorded before it.
    pub states: Vec<State>,
    pub diverged: bool,
    /// Number of map applications after which the state escaped.
    pub divergence_step: Option<usize>,
}

#[inline]
fn escaped(s: &State, threshold: f64) -> bool {
    !s.is_finite() || s.x.abs() > threshold
}

/// Iterate `n_transient + n_keep` times and keep the last `n_keep` states.
pub fn iterate(p: &MapParams, ic: State, n_transient: usize, n_keep: usize) -> Trajectory {
    iterate_with_threshold(p, ic, n_transient, n_keep, DEFAULT_DIVERGENCE_THRESHOLD)
}

pub fn iterate_with_threshold(p: &MapParams, ic: State, n_transient: usize, n_keep: usize, threshold: f64) -> Trajectory {
    let mut states = Vec::with_capacity(n_keep);
    let mut s = ic;
    for step in 1..=n_transient + n_keep {
        s = step3(p, s);
        if escaped(&s, threshold) {
            return Trajectory { states, diverged: true, divergence_step: Some(step) };
        }
        if step > n_transient {
            states.push(s);
        }
    }
    Trajectory { states, diverged: false, divergence_step: None }
}

/// Smallest `p <= max_period` with `|s[n + p] - s[n]|_inf < tol` along the
/// whole tail, or `None` if the tail is aperiodic at this tolerance.
pub fn detect_period(traj: &Trajectory, tol: f64, max_period: usize) -> Result<Option<usize>> {
    if traj.diverged {
        return Err(Error::Diverged { step: traj.divergence_step.unwrap_or(0) });
    }
    period_of_tail(&traj.states, tol, max_period)
}

/// Period test on a bare tail; see [`detect_period`].
pub fn period_of_tail(tail: &[State], tol: f64, max_period: usize) -> Result<Option<usize>> {
    if max_period == 0 {
        return Err(Error::InvalidArgument("max_period must be positive".into()));
    }
    let needed = 3 * max_period;
    if tail.len() < needed {
        return Err(Error::TailTooShort { len: tail.len(), needed });
    }
    Ok((1..=max_period).find(|&p| tail.iter().zip(&tail[p..]).all(|(a, b)| a.dist_inf(b) < tol)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttractorKind {
    FixedPoint,
    Periodic,
    Chaotic,
    /// Bounded and aperiodic at the tolerance, but without a positive
    /// exponent (slow transients, invariant curves).
    Unresolved,
    Diverged,
}

impl AttractorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttractorKind::FixedPoint => "fixed-point",
            AttractorKind::Periodic => "periodic",
            AttractorKind::Chaotic => "chaotic",
            AttractorKind::Unresolved => "unresolved",
            AttractorKind::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: State,
    pub max: State,
}

impl BoundingBox {
    pub fn of(states: &[State]) -> Option<Self> {
        let first = *states.first()?;
        let (mut min, mut max) = (first, first);
        for s in states {
            min = State::new(min.x.min(s.x), min.y.min(s.y), min.phi.min(s.phi));
            max = State::new(max.x.max(s.x), max.y.max(s.y), max.phi.max(s.phi));
        }
        Some(BoundingBox { min, max })
    }

    /// Per-coordinate overlap: intersection length over union length.
    /// Two degenerate intervals at the same point overlap fully.
    pub fn overlap(&self, other: &BoundingBox) -> [f64; 3] {
        let (a0, a1, b0, b1) = (self.min.to_array(), self.max.to_array(), other.min.to_array(), other.max.to_array());
        std::array::from_fn(|i| {
            let inter = (a1[i].min(b1[i]) - a0[i].max(b0[i])).max(0.0);
            let union = a1[i].max(b1[i]) - a0[i].min(b0[i]);
            if union <= 0.0 {
                1.0
            } else {
                inter / union
            }
        })
    }

    pub fn contains(&self, s: &State) -> bool {
        (self.min.x..=self.max.x).contains(&s.x)
            && (self.min.y..=self.max.y).contains(&s.y)
            && (self.min.phi..=self.max.phi).contains(&s.phi)
    }
}

/// Fingerprint of a long-run attractor.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorRecord {
    pub kind: AttractorKind,
    /// Period for fixed-point and periodic kinds, 0 otherwise.
    pub period: usize,
    /// One cycle in phase order, rotated to start at the lexicographically
    /// smallest point. Empty for non-periodic kinds.
    pub points: Vec<State>,
    pub max_lyapunov: Option<f64>,
    pub bounding_box: Option<BoundingBox>,
}

impl AttractorRecord {
    pub fn diverged() -> Self {
        AttractorRecord { kind: AttractorKind::Diverged, period: 0, points: Vec::new(), max_lyapunov: None, bounding_box: None }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, AttractorKind::FixedPoint | AttractorKind::Periodic)
    }

    /// Point set sorted lexicographically.
    pub fn sorted_points(&self) -> Vec<State> {
        let mut v = self.points.clone();
        v.sort_by(State::lex_cmp);
        v
    }
}

/// Settings shared by fingerprinting, sweeps and basins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitOptions {
    pub n_transient: usize,
    pub n_keep: usize,
    pub tol: f64,
    pub max_period: usize,
    pub divergence_threshold: f64,
    /// Iterations of the exponent estimate for aperiodic tails.
    pub lyapunov_iters: usize,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            n_transient: 10_000,
            n_keep: 1000,
            tol: 1e-6,
            max_period: 64,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            lyapunov_iters: 100_000,
        }
    }
}

fn canonical_cycle(cycle: &[State]) -> Vec<State> {
    let start = (0..cycle.len()).min_by(|&i, &j| cycle[i].lex_cmp(&cycle[j])).unwrap_or(0);
    cycle[start..].iter().chain(&cycle[..start]).copied().collect()
}

fn record_from_tail(p: &MapParams, tail: &[State], opts: &OrbitOptions) -> Result<AttractorRecord> {
    let bounding_box = BoundingBox::of(tail);
    match period_of_tail(tail, opts.tol, opts.max_period)? {
        Some(period) => {
            let points = canonical_cycle(&tail[tail.len() - period..]);
            let kind = if period == 1 { AttractorKind::FixedPoint } else { AttractorKind::Periodic };
            Ok(AttractorRecord { kind, period, points, max_lyapunov: None, bounding_box })
        }
        None => {
            let last = *tail.last().expect("tail checked non-empty");
            let (kind, max_lyapunov) = match lyapunov_spectrum(p, last, 0, opts.lyapunov_iters.max(1)) {
                Ok(sp) if sp.max() > 0.0 => (AttractorKind::Chaotic, Some(sp.max())),
                Ok(sp) => (AttractorKind::Unresolved, Some(sp.max())),
                Err(Error::Diverged { .. }) => return Ok(AttractorRecord::diverged()),
                Err(e) => return Err(e),
            };
            Ok(AttractorRecord { kind, period: 0, points: Vec::new(), max_lyapunov, bounding_box })
        }
    }
}

/// Transient, tail, period test; aperiodic tails get a Lyapunov estimate.
pub fn fingerprint(p: &MapParams, ic: State, opts: &OrbitOptions) -> Result<AttractorRecord> {
    let traj = iterate_with_threshold(p, ic, opts.n_transient, opts.n_keep, opts.divergence_threshold);
    if traj.diverged {
        return Ok(AttractorRecord::diverged());
    }
    record_from_tail(p, &traj.states, opts)
}

/// Budgeted variant for grid work: iterate at most `max_iter` steps, testing
/// the recent window for periodicity every `check_every` steps and stopping
/// as soon as it closes. Orbits that never close are classified from the
/// last `n_keep` states, like [`fingerprint`].
pub fn fingerprint_budget(p: &MapParams, ic: State, opts: &OrbitOptions, max_iter: usize, check_every: usize) -> Result<AttractorRecord> {
    let window = (3 * opts.max_period).max(opts.n_keep);
    let probe = 3 * opts.max_period;
    let check_every = check_every.max(1);
    let mut buf: VecDeque<State> = VecDeque::with_capacity(window + 1);
    let mut s = ic;
    for step in 1..=max_iter {
        s = step3(p, s);
        if escaped(&s, opts.divergence_threshold) {
            return Ok(AttractorRecord::diverged());
        }
        if buf.len() == window {
            buf.pop_front();
        }
        buf.push_back(s);
        if step % check_every == 0 && buf.len() >= probe {
            let recent: Vec<State> = buf.iter().skip(buf.len() - probe).copied().collect();
            if let Some(period) = period_of_tail(&recent, opts.tol, opts.max_period)? {
                let points = canonical_cycle(&recent[recent.len() - period..]);
                let kind = if period == 1 { AttractorKind::FixedPoint } else { AttractorKind::Periodic };
                return Ok(AttractorRecord { kind, period, points, max_lyapunov: None, bounding_box: BoundingBox::of(&recent) });
            }
        }
    }
    let tail: Vec<State> = buf.into_iter().collect();
    if tail.len() < probe {
        return Err(Error::TailTooShort { len: tail.len(), needed: probe });
    }
    record_from_tail(p, &tail, opts)
}

/// Fraction of per-coordinate bounding-box overlap required to identify two
/// aperiodic records.
pub const BOX_MATCH_FRACTION: f64 = 0.8;

/// Index of the catalog entry that `record` belongs to.
pub fn match_attractor(record: &AttractorRecord, catalog: &[AttractorRecord], match_tol: f64) -> Option<usize> {
    match record.kind {
        AttractorKind::Diverged => None,
        AttractorKind::FixedPoint | AttractorKind::Periodic => catalog.iter().position(|entry| {
            entry.kind == record.kind && entry.period == record.period && cycles_align(&record.points, &entry.points, match_tol)
        }),
        AttractorKind::Chaotic | AttractorKind::Unresolved => {
            let bb = record.bounding_box?;
            catalog.iter().position(|entry| {
                entry.kind == record.kind
                    && entry
                        .bounding_box
                        .is_some_and(|eb| bb.overlap(&eb).iter().all(|&f| f >= BOX_MATCH_FRACTION))
            })
        }
    }
}

fn cycles_align(a: &[State], b: &[State], tol: f64) -> bool {
    if a.len() != b.len() || a.is_empty() {
        return false;
    }
    let n = a.len();
    (0..n).any(|r| (0..n).all(|i| a[i].dist_inf(&b[(i + r) % n]) < tol))
}
