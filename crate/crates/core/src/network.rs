//! Ring-star networks of flux-coupled neurons and their spatiotemporal
//! diagnostics.
//!
//! Node 0 is the hub. Every other node couples to the hub with strength `mu`
//! and to its `R` ring neighbours on each side with strength `sigma / 2R`.
//! The hub couples to all nodes with strength `mu` and carries no ring term.
//! By default the ring wraps over all `N` indices, hub included; with
//! `hub_in_ring = false` it wraps over nodes `1..N` only.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::map::{memductance, MapParams, State};
use crate::orbit::DEFAULT_DIVERGENCE_THRESHOLD;
use crate::par::Exec;

/// Settling steps before recording.
pub const DEFAULT_TRANSIENT: usize = 20_000;
/// Recorded steps per run.
pub const DEFAULT_RECORDS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    pub map: MapParams,
    pub n: usize,
    pub r: usize,
    pub sigma: f64,
    pub mu: f64,
    pub hub_in_ring: bool,
}

impl NetworkParams {
    pub fn new(map: MapParams, n: usize, r: usize, sigma: f64, mu: f64) -> Self {
        NetworkParams { map, n, r, sigma, mu, hub_in_ring: true }
    }

    fn ring_len(&self) -> usize {
        if self.hub_in_ring {
            self.n
        } else {
            self.n - 1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidArgument("a network needs at least 3 nodes".into()));
        }
        let ring = self.ring_len();
        if self.r < 1 || 2 * self.r > ring - 1 {
            return Err(Error::InvalidArgument(format!("coupling range must satisfy 1 <= R <= {}", (ring - 1) / 2)));
        }
        if !(self.sigma.is_finite() && self.mu.is_finite() && self.map.is_finite()) {
            return Err(Error::InvalidArgument("network parameters must be finite".into()));
        }
        Ok(())
    }
}

/// One synchronous update of every node from the snapshot `cur` into `next`.
pub fn network_step_into(np: &NetworkParams, cur: &[State], next: &mut [State]) {
    let p = &np.map;
    let n = cur.len();
    let x0 = cur[0].x;
    let ring_scale = np.sigma / (2 * np.r) as f64;
    let (offset, ring) = if np.hub_in_ring { (0, n) } else { (1, n - 1) };
    for (m, (s, out)) in cur.iter().zip(next.iter_mut()).enumerate() {
        let local = s.x * s.x * (s.y - s.x).exp() + p.k0 + p.k * s.x * memductance(p.alpha, p.beta, s.phi);
        let coupling = if m == 0 {
            np.mu * cur.iter().map(|o| o.x - x0).sum::<f64>()
        } else {
            let pos = m - offset;
            let mut ring_sum = 0.0;
            for d in 0..=2 * np.r {
                let i = (pos + ring + d - np.r) % ring + offset;
                ring_sum += cur[i].x - s.x;
            }
            np.mu * (x0 - s.x) + ring_scale * ring_sum
        };
        *out = State {
            x: local + coupling,
            y: p.a * s.y - p.b * s.x + p.c,
            phi: p.k1 * s.x - p.k2 * s.phi,
        };
    }
}

pub fn network_step(np: &NetworkParams, states: &[State]) -> Vec<State> {
    let mut next = vec![State::default(); states.len()];
    network_step_into(np, states, &mut next);
    next
}

/// Uniform initial conditions, `x, y` in `[0, 1]` and `phi` in `[-0.1, 0.1]`,
/// drawn node by node from Xoshiro256++ seeded with `seed`.
pub fn random_states(n: usize, seed: u64) -> Vec<State> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = rng.gen_range(0.0..=1.0);
            let y = rng.gen_range(0.0..=1.0);
            let phi = rng.gen_range(-0.1..=0.1);
            State::new(x, y, phi)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatiotemporalField {
    pub n: usize,
    /// Recorded `x` values, `x[t * n + node]` for record `t`.
    pub x: Vec<f64>,
    /// Simulation step of each record.
    pub steps: Vec<usize>,
    pub final_states: Vec<State>,
    pub seed: u64,
    pub stride: usize,
    /// First step at which some node escaped, if any.
    pub diverged_at: Option<usize>,
}

impl SpatiotemporalField {
    pub fn n_records(&self) -> usize {
        self.steps.len()
    }

    pub fn record(&self, t: usize) -> &[f64] {
        &self.x[t * self.n..(t + 1) * self.n]
    }

    pub fn final_x(&self) -> Vec<f64> {
        self.final_states.iter().map(|s| s.x).collect()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Run from `initial` for `n_transient` steps, then record every `stride`-th
/// state until `n_record` records are taken.
pub fn simulate_from(np: &NetworkParams, initial: Vec<State>, seed: u64, n_transient: usize, n_record: usize, stride: usize) -> Result<SpatiotemporalField> {
    np.validate()?;
    if n_record == 0 || stride == 0 {
        return Err(Error::InvalidArgument("n_record and stride must be positive".into()));
    }
    if initial.len() != np.n {
        return Err(Error::InvalidArgument(format!("expected {} initial states, got {}", np.n, initial.len())));
    }
    let mut cur = initial;
    let mut next = vec![State::default(); np.n];
    let mut x = Vec::with_capacity(n_record * np.n);
    let mut steps = Vec::with_capacity(n_record);
    let total = n_transient + (n_record - 1) * stride;
    let mut diverged_at = None;
    for step in 0..=total {
        if step > 0 {
            network_step_into(np, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
            if cur.iter().any(|s| !s.is_finite() || s.x.abs() > DEFAULT_DIVERGENCE_THRESHOLD) {
                diverged_at = Some(step);
                break;
            }
        }
        if step >= n_transient && (step - n_transient).is_multiple_of(stride) {
            x.extend(cur.iter().map(|s| s.x));
            steps.push(step);
        }
    }
    Ok(SpatiotemporalField { n: np.n, x, steps, final_states: cur, seed, stride, diverged_at })
}

/// [`simulate_from`] with [`random_states`] drawn from `seed`.
pub fn simulate_network(np: &NetworkParams, seed: u64, n_transient: usize, n_record: usize, stride: usize) -> Result<SpatiotemporalField> {
    simulate_from(np, random_states(np.n, seed), seed, n_transient, n_record, stride)
}

/// Two-pass standard deviation, shifted by the first value so that equal
/// inputs give exactly zero.
fn population_std(v: &[f64]) -> f64 {
    let Some(&shift) = v.first() else { return f64::NAN };
    let n = v.len() as f64;
    let mean = v.iter().map(|x| x - shift).sum::<f64>() / n;
    (v.iter().map(|x| (x - shift - mean) * (x - shift - mean)).sum::<f64>() / n).sqrt()
}

/// Time average over the records of the population standard deviation of `x`.
pub fn sync_error(field: &SpatiotemporalField) -> f64 {
    let t = field.n_records();
    if t == 0 {
        return f64::NAN;
    }
    (0..t).map(|i| population_std(field.record(i))).sum::<f64>() / t as f64
}

/// `|x_i - x_j| <= eps`, row-major `N x N`.
pub fn recurrence_matrix(xs: &[f64], eps: f64) -> Vec<bool> {
    let n = xs.len();
    let mut m = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = (xs[i] - xs[j]).abs() <= eps;
        }
    }
    m
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components of the recurrence graph, each sorted, ordered by
/// smallest member.
pub fn clusters(xs: &[f64], eps: f64) -> Vec<Vec<usize>> {
    let n = xs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    for w in order.windows(2) {
        if (xs[w[1]] - xs[w[0]]).abs() <= eps {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Number of connected components of the recurrence graph.
pub fn cluster_count(xs: &[f64], eps: f64) -> usize {
    clusters(xs, eps).len()
}

/// Per-node standard deviation of `x` over the `w` ring neighbours centred
/// on it (wrapping).
pub fn coherence_profile(xs: &[f64], w: usize) -> Vec<f64> {
    let n = xs.len();
    let h = w / 2;
    (0..n)
        .map(|m| {
            let win: Vec<f64> = (0..w).map(|d| xs[(m + n + d - h % n) % n]).collect();
            population_std(&win)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateClass {
    Sync,
    Async,
    Chimera,
    Clustered,
}

impl StateClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StateClass::Sync => "SYNC",
            StateClass::Async => "ASYNC",
            StateClass::Chimera => "CHIMERA",
            StateClass::Clustered => "CLUSTERED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// SYNC when the sync error is below this. The default comes from
    /// [`calibrate_sync_threshold`] on the `sigma = 0.005` ring with seeds
    /// `0..10`, [`DEFAULT_TRANSIENT`] and [`DEFAULT_RECORDS`].
    pub sync: f64,
    /// Local standard deviation separating coherent from incoherent nodes.
    pub coherence: f64,
    /// Recurrence and cluster distance in `x`.
    pub eps: f64,
    /// Shortest run of coherent or incoherent nodes that counts.
    pub min_run: usize,
    /// Largest cluster count still called CLUSTERED.
    pub max_clusters: usize,
    pub window: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { sync: 0.164, coherence: 0.05, eps: 0.01, min_run: 5, max_clusters: 10, window: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDiagnostics {
    pub sync_error: f64,
    pub cluster_count: usize,
    pub coherence_profile: Vec<f64>,
    pub state_class: StateClass,
    pub recurrence: Vec<bool>,
}

/// Lengths of maximal circular runs of equal flags, as `(flag, length)`.
fn circular_runs(flags: &[bool]) -> Vec<(bool, usize)> {
    let n = flags.len();
    let Some(start) = (0..n).find(|&i| flags[i] != flags[(i + n - 1) % n]) else {
        return vec![(flags[0], n)];
    };
    let mut runs = Vec::new();
    let mut len = 0;
    for d in 0..n {
        let i = (start + d) % n;
        if d > 0 && flags[i] != flags[(i + n - 1) % n] {
            runs.push((flags[(i + n - 1) % n], len));
            len = 0;
        }
        len += 1;
    }
    runs.push((flags[(start + n - 1) % n], len));
    runs
}

/// Diagnostics of a run: SYNC by global sync error, CLUSTERED when the end
/// state splits into a few tight clusters, CHIMERA when coherent and
/// incoherent runs of at least `min_run` nodes coexist, ASYNC otherwise.
pub fn coherence_profile_and_classify(field: &SpatiotemporalField, th: &Thresholds) -> Result<NetworkDiagnostics> {
    if th.window < 3 || th.window.is_multiple_of(2) {
        return Err(Error::InvalidArgument("coherence window must be odd and at least 3".into()));
    }
    if field.diverged() {
        return Err(Error::Diverged { step: field.diverged_at.unwrap_or(0) });
    }
    let xs = field.final_x();
    let err = sync_error(field);
    let groups = clusters(&xs, th.eps);
    let profile = coherence_profile(&xs, th.window);
    let class = if err < th.sync {
        StateClass::Sync
    } else if groups.len() <= th.max_clusters && groups.iter().all(|g| tight_over_time(field, g, th.eps)) {
        StateClass::Clustered
    } else {
        let flags: Vec<bool> = profile.iter().map(|&s| s < th.coherence).collect();
        let runs = circular_runs(&flags);
        let coherent = runs.iter().any(|&(f, l)| f && l >= th.min_run);
        let incoherent = runs.iter().any(|&(f, l)| !f && l >= th.min_run);
        if coherent && incoherent {
            StateClass::Chimera
        } else {
            StateClass::Async
        }
    };
    Ok(NetworkDiagnostics {
        sync_error: err,
        cluster_count: groups.len(),
        coherence_profile: profile,
        state_class: class,
        recurrence: recurrence_matrix(&xs, th.eps),
    })
}

/// Every member within `eps` of the cluster mean in every record.
fn tight_over_time(field: &SpatiotemporalField, group: &[usize], eps: f64) -> bool {
    (0..field.n_records()).all(|t| {
        let xs = field.record(t);
        let mean = group.iter().map(|&i| xs[i]).sum::<f64>() / group.len() as f64;
        group.iter().all(|&i| (xs[i] - mean).abs() <= eps)
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sync threshold as the geometric mean of the median sync errors of a
/// synchronizing reference run and of the decoupled network (`sigma = mu = 0`)
/// over the same seeds.
pub fn calibrate_sync_threshold(reference: &NetworkParams, seeds: &[u64], n_transient: usize, n_record: usize, exec: Exec) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("calibration needs at least one seed".into()));
    }
    let decoupled = NetworkParams { sigma: 0.0, mu: 0.0, ..*reference };
    let errors = |np: &NetworkParams| -> Result<Vec<f64>> {
        exec.map_slice(seeds, |&s| simulate_network(np, s, n_transient, n_record, 1).map(|f| sync_error(&f)))
            .into_iter()
            .collect()
    };
    let sync = median(errors(reference)?);
    let free = median(errors(&decoupled)?);
    Ok((sync * free).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct XkRow {
    pub k: f64,
    /// End-state `x` of every node; empty when the run diverged.
    pub x_end: Vec<f64>,
    pub diverged: bool,
}

/// One run per `k` on an even grid over `k_range`, all from the same seed.
pub fn xk_scan(np: &NetworkParams, k_range: (f64, f64), n_k: usize, seed: u64, n_transient: usize, exec: Exec) -> Result<Vec<XkRow>> {
    np.validate()?;
    if n_k < 2 {
        return Err(Error::InvalidArgument("n_k must be at least 2".into()));
    }
    exec.map_indexed(n_k, |i| {
        let k = if i + 1 == n_k { k_range.1 } else { k_range.0 + (k_range.1 - k_range.0) * i as f64 / (n_k - 1) as f64 };
        let mut p = *np;
        p.map.k = k;
        let f = simulate_network(&p, seed, n_transient, 1, 1)?;
        Ok(XkRow { k, diverged: f.diverged(), x_end: if f.diverged() { Vec::new() } else { f.final_x() } })
    })
    .into_iter()
    .collect()
}

/// Simulate and classify one network per seed.
pub fn classify_seeds(np: &NetworkParams, seeds: &[u64], n_transient: usize, n_record: usize, th: &Thresholds, exec: Exec) -> Result<Vec<NetworkDiagnostics>> {
    exec.map_slice(seeds, |&s| {
        let f = simulate_network(np, s, n_transient, n_record, 1)?;
        coherence_profile_and_classify(&f, th)
    })
    .into_iter()
    .collect()
}
