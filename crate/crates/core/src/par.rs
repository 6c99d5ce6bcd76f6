//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel entry point in the crate goes through [`Exec`]. Results
//! are always assembled in index order, so the worker count changes wall
//! time and nothing else. Without the `parallel` feature every mode runs on
//! the calling thread.

/// How independent tasks are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Run on the calling thread.
    Sequential,
    /// Use the ambient rayon pool.
    #[default]
    Parallel,
    /// Use a dedicated pool with this many workers.
    Workers(usize),
}

impl Exec {
    /// Worker count from `CHIALVO_WORKERS`, falling back to the ambient pool.
    pub fn from_env() -> Self {
        match std::env::var("CHIALVO_WORKERS").ok().and_then(|v| v.trim().parse().ok()) {
            Some(1) => Exec::Sequential,
            Some(n) if n > 1 => Exec::Workers(n),
            _ => Exec::Parallel,
        }
    }

    pub fn from_workers(n: usize) -> Self {
        match n {
            0 => Exec::Parallel,
            1 => Exec::Sequential,
            n => Exec::Workers(n),
        }
    }

    /// `f(0), f(1), ..., f(n - 1)` in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        imp::map_indexed(self, n, f)
    }

    /// Map over a slice, preserving order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        self.map_indexed(items.len(), |i| f(&items[i]))
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self != Exec::Sequential
    }
}

#[cfg(feature = "parallel")]
mod imp {
    use super::Exec;
    use rayon::prelude::*;

    pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match exec {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
            Exec::Workers(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(_) => (0..n).into_par_iter().map(f).collect(),
            },
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    use super::Exec;

    pub fn map_indexed<T, F>(_exec: Exec, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
