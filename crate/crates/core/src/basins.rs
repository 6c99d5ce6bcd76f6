//! Basins of attraction on a grid of initial conditions, and a parameter
//! scan for multistable regimes.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::map::{step3, MapParams, Param, State};
use crate::noninvertibility::Window;
use crate::orbit::{fingerprint, fingerprint_budget, match_attractor, AttractorKind, AttractorRecord, OrbitOptions};
use crate::par::Exec;

pub const LABEL_DIVERGED: i32 = -1;
pub const LABEL_UNRESOLVED: i32 = -2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinConfig {
    pub max_iter: usize,
    /// Interval between periodicity checks of the running orbit.
    pub check_every: usize,
    pub orbit: OrbitOptions,
    /// Cyclic alignment tolerance when matching periodic records.
    pub match_tol: f64,
    /// Rows fingerprinted per parallel batch before the arbiter commits them.
    pub rows_per_batch: usize,
}

impl Default for BasinConfig {
    fn default() -> Self {
        BasinConfig {
            max_iter: 50_000,
            check_every: 500,
            orbit: OrbitOptions { lyapunov_iters: 2000, ..OrbitOptions::default() },
            match_tol: 1e-4,
            rows_per_batch: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinGrid {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub phi0: f64,
    /// Row-major: `labels[iy * nx + ix]`.
    pub labels: Vec<i32>,
    pub catalog: Vec<AttractorRecord>,
}

impl BasinGrid {
    /// Initial condition at the center of cell `(ix, iy)`.
    pub fn cell_center(&self, ix: usize, iy: usize) -> State {
        cell_center(&self.window, self.nx, self.ny, self.phi0, ix, iy)
    }

    pub fn label(&self, ix: usize, iy: usize) -> i32 {
        self.labels[iy * self.nx + ix]
    }

    /// Whether any 4-neighbour carries a different label.
    pub fn is_boundary(&self, ix: usize, iy: usize) -> bool {
        let l = self.label(ix, iy);
        let mut diff = false;
        if ix > 0 {
            diff |= self.label(ix - 1, iy) != l;
        }
        if ix + 1 < self.nx {
            diff |= self.label(ix + 1, iy) != l;
        }
        if iy > 0 {
            diff |= self.label(ix, iy - 1) != l;
        }
        if iy + 1 < self.ny {
            diff |= self.label(ix, iy + 1) != l;
        }
        diff
    }

    /// Cell whose square contains `(x, y)`, if inside the window.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.window.x.0) / (self.window.x.1 - self.window.x.0);
        let fy = (y - self.window.y.0) / (self.window.y.1 - self.window.y.0);
        if !(0.0..1.0).contains(&fx) || !(0.0..1.0).contains(&fy) {
            return None;
        }
        Some(((fx * self.nx as f64) as usize, (fy * self.ny as f64) as usize))
    }
}

fn cell_center(w: &Window, nx: usize, ny: usize, phi0: f64, ix: usize, iy: usize) -> State {
    let dx = (w.x.1 - w.x.0) / nx as f64;
    let dy = (w.y.1 - w.y.0) / ny as f64;
    State::new(w.x.0 + (ix as f64 + 0.5) * dx, w.y.0 + (iy as f64 + 0.5) * dy, phi0)
}

/// Fingerprint one initial condition under the basin budget.
pub fn cell_record(p: &MapParams, ic: State, cfg: &BasinConfig) -> Result<AttractorRecord> {
    fingerprint_budget(p, ic, &cfg.orbit, cfg.max_iter, cfg.check_every)
}

/// Label of `record` against `catalog`, registering it when new. Diverged and
/// unresolved records never enter the catalog.
pub fn assign_label(record: AttractorRecord, catalog: &mut Vec<AttractorRecord>, match_tol: f64) -> i32 {
    match record.kind {
        AttractorKind::Diverged => LABEL_DIVERGED,
        AttractorKind::Unresolved => LABEL_UNRESOLVED,
        _ => match match_attractor(&record, catalog, match_tol) {
            Some(i) => i as i32,
            None => {
                catalog.push(record);
                (catalog.len() - 1) as i32
            }
        },
    }
}

/// Label without registering: records absent from `catalog` give `None`.
pub fn lookup_label(record: &AttractorRecord, catalog: &[AttractorRecord], match_tol: f64) -> Option<i32> {
    match record.kind {
        AttractorKind::Diverged => Some(LABEL_DIVERGED),
        AttractorKind::Unresolved => Some(LABEL_UNRESOLVED),
        _ => match_attractor(record, catalog, match_tol).map(|i| i as i32),
    }
}

fn kind_rank(k: AttractorKind) -> u8 {
    match k {
        AttractorKind::FixedPoint => 0,
        AttractorKind::Periodic => 1,
        AttractorKind::Chaotic => 2,
        AttractorKind::Unresolved => 3,
        AttractorKind::Diverged => 4,
    }
}

fn anchor(r: &AttractorRecord) -> State {
    r.points.first().copied().or_else(|| r.bounding_box.map(|b| b.min)).unwrap_or_default()
}

/// Sort the catalog by (kind, period, first point) and remap labels.
fn canonicalize(labels: &mut [i32], catalog: &mut Vec<AttractorRecord>) {
    let mut order: Vec<usize> = (0..catalog.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&catalog[i], &catalog[j]);
        kind_rank(a.kind)
            .cmp(&kind_rank(b.kind))
            .then(a.period.cmp(&b.period))
            .then(anchor(a).lex_cmp(&anchor(b)))
    });
    let mut new_of = vec![0i32; catalog.len()];
    for (new, &old) in order.iter().enumerate() {
        new_of[old] = new as i32;
    }
    for l in labels.iter_mut().filter(|l| **l >= 0) {
        *l = new_of[*l as usize];
    }
    let old = std::mem::take(catalog);
    let mut slots: Vec<Option<AttractorRecord>> = old.into_iter().map(Some).collect();
    *catalog = order.iter().map(|&i| slots[i].take().expect("each index once")).collect();
}

/// Classify the cell centers of an `nx x ny` grid over `window` at flux
/// `phi0`. Workers fingerprint batches of rows; a sequential pass then
/// matches records in row-major order, so catalog discovery order and labels
/// do not depend on the worker count.
pub fn compute_basin(p: &MapParams, window: Window, nx: usize, ny: usize, phi0: f64, cfg: &BasinConfig, exec: Exec) -> Result<BasinGrid> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument("basin grids need nx, ny >= 2".into()));
    }
    if !(window.x.0 < window.x.1 && window.y.0 < window.y.1) || !phi0.is_finite() {
        return Err(Error::InvalidArgument("window bounds must be increasing and phi0 finite".into()));
    }
    let mut labels = Vec::with_capacity(nx * ny);
    let mut catalog = Vec::new();
    let batch = cfg.rows_per_batch.max(1);
    for row0 in (0..ny).step_by(batch) {
        let rows = batch.min(ny - row0);
        let records = exec.map_indexed(rows * nx, |i| cell_record(p, cell_center(&window, nx, ny, phi0, i % nx, row0 + i / nx), cfg));
        for r in records {
            labels.push(assign_label(r?, &mut catalog, cfg.match_tol));
        }
    }
    canonicalize(&mut labels, &mut catalog);
    Ok(BasinGrid { window, nx, ny, phi0, labels, catalog })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelStat {
    pub label: i32,
    pub count: usize,
    pub fraction: f64,
}

/// Cell count and fraction per label, by increasing label.
pub fn basin_statistics(grid: &BasinGrid) -> Vec<LabelStat> {
    let mut counts = std::collections::BTreeMap::new();
    for &l in &grid.labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    let n = grid.labels.len() as f64;
    counts.into_iter().map(|(label, count)| LabelStat { label, count, fraction: count as f64 / n }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCheck {
    pub checked: usize,
    pub unchanged: usize,
}

impl StabilityCheck {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.unchanged as f64 / self.checked as f64
        }
    }
}

/// Re-fingerprint non-boundary cells under `cfg` (typically a larger
/// budget) and count how many keep their label. With `sample = Some(n)`, n
/// cells are drawn uniformly with the given seed; otherwise all are checked.
pub fn label_stability(p: &MapParams, grid: &BasinGrid, cfg: &BasinConfig, sample: Option<usize>, seed: u64, exec: Exec) -> Result<StabilityCheck> {
    let interior: Vec<(usize, usize)> = (0..grid.ny)
        .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
        .filter(|&(ix, iy)| !grid.is_boundary(ix, iy))
        .collect();
    let cells = match sample {
        Some(n) if n < interior.len() => {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            rand::seq::index::sample(&mut rng, interior.len(), n).into_iter().map(|i| interior[i]).collect()
        }
        _ => interior,
    };
    let same = exec.map_slice(&cells, |&(ix, iy)| -> Result<bool> {
        let r = cell_record(p, grid.cell_center(ix, iy), cfg)?;
        Ok(lookup_label(&r, &grid.catalog, cfg.match_tol) == Some(grid.label(ix, iy)))
    });
    let mut unchanged = 0;
    for s in same {
        unchanged += s? as usize;
    }
    Ok(StabilityCheck { checked: cells.len(), unchanged })
}

/// Re-label non-boundary cells after advancing their centers `q` steps.
pub fn forward_invariance(p: &MapParams, grid: &BasinGrid, cfg: &BasinConfig, q: usize, exec: Exec) -> Result<StabilityCheck> {
    let cells: Vec<(usize, usize)> = (0..grid.ny)
        .flat_map(|iy| (0..grid.nx).map(move |ix| (ix, iy)))
        .filter(|&(ix, iy)| !grid.is_boundary(ix, iy) && grid.label(ix, iy) != LABEL_DIVERGED)
        .collect();
    let same = exec.map_slice(&cells, |&(ix, iy)| -> Result<bool> {
        let mut s = grid.cell_center(ix, iy);
        for _ in 0..q {
            s = step3(p, s);
        }
        let r = cell_record(p, s, cfg)?;
        Ok(lookup_label(&r, &grid.catalog, cfg.match_tol) == Some(grid.label(ix, iy)))
    });
    let mut unchanged = 0;
    for s in same {
        unchanged += s? as usize;
    }
    Ok(StabilityCheck { checked: cells.len(), unchanged })
}

/// Distinct bounded attractors found at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub value: f64,
    pub attractors: Vec<AttractorRecord>,
    pub diverged_restarts: usize,
}

impl ScanPoint {
    pub fn has_period(&self, p: usize) -> bool {
        self.attractors.iter().any(|a| a.is_periodic() && a.period == p)
    }

    pub fn has_chaos(&self) -> bool {
        self.attractors.iter().any(|a| a.kind == AttractorKind::Chaotic)
    }

    /// Short summary such as `6+9+C`.
    pub fn signature(&self) -> String {
        let mut parts: Vec<String> = self
            .attractors
            .iter()
            .map(|a| match a.kind {
                AttractorKind::Chaotic => "C".to_string(),
                AttractorKind::Unresolved => "U".to_string(),
                _ => a.period.to_string(),
            })
            .collect();
        parts.sort();
        parts.join("+")
    }
}

/// Random-restart region for the multistability scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartBox {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub phi: (f64, f64),
}

impl Default for RestartBox {
    fn default() -> Self {
        RestartBox { x: (-3.0, 5.0), y: (-10.0, 25.0), phi: (0.0, 0.0) }
    }
}

/// Fingerprint `restarts` random initial conditions at each value of `param`
/// and collect the distinct bounded attractors. Value `i` draws from its own
/// stream seeded by `(seed, i)`, so results do not depend on scheduling.
pub fn scan_multistability(
    base: &MapParams,
    param: Param,
    values: &[f64],
    restarts: usize,
    region: RestartBox,
    opts: &OrbitOptions,
    match_tol: f64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<ScanPoint>> {
    if param.is_network() {
        return Err(Error::NotAMapParameter(param.name()));
    }
    let draw = |rng: &mut Xoshiro256PlusPlus, r: (f64, f64)| if r.0 < r.1 { rng.gen_range(r.0..r.1) } else { r.0 };
    exec.map_indexed(values.len(), |i| {
        let p = base.with(param, values[i])?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut attractors = Vec::new();
        let mut diverged_restarts = 0;
        for _ in 0..restarts {
            let ic = State::new(draw(&mut rng, region.x), draw(&mut rng, region.y), draw(&mut rng, region.phi));
            let r = fingerprint(&p, ic, opts)?;
            match r.kind {
                AttractorKind::Diverged => diverged_restarts += 1,
                _ => {
                    if match_attractor(&r, &attractors, match_tol).is_none() {
                        attractors.push(r);
                    }
                }
            }
        }
        Ok(ScanPoint { value: values[i], attractors, diverged_restarts })
    })
    .into_iter()
    .collect()
}
