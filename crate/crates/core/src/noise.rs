//! Time grids, two-sided noise and the discrete information structure.
//!
//! A [`NoiseBundle`] holds the forward increments `dW` and the backward
//! increments `dB` of every path on a uniform grid. Storage is time-major:
//! all paths of step `i` are contiguous, which is the access pattern of the
//! backward induction.
//!
//! At grid index `i` the known increments are `dW_j` for `j < i` and `dB_j`
//! for `j >= i` (see [`FiltrationIndex`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest `N` accepted by [`enumerate_tree`]; the bundle holds `4^N` paths.
pub const TREE_MAX_STEPS: usize = 12;

/// 32-bit words reserved per Gaussian draw in the counter stream.
const WORDS_PER_DRAW: u128 = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `t_i = i * dt`, with the last node pinned to the horizon.
    pub fn node(&self, i: usize) -> f64 {
        assert!(i <= self.steps, "grid index {i} out of range");
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }
}

/// Uniform grid on `[0, horizon]` with `steps` intervals.
pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    Ok(TimeGrid { horizon, steps, dt: horizon / steps as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Gaussian,
    RademacherTree,
}

/// Information available at grid index `i`: `dW_j` for `j < i` and `dB_j` for
/// `j >= i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FiltrationIndex(pub usize);

impl FiltrationIndex {
    pub fn knows_dw(&self, j: usize) -> bool {
        j < self.0
    }

    pub fn knows_db(&self, j: usize) -> bool {
        j >= self.0
    }

    /// Bit mask over the tree path index: bit `j` is the sign of `dW_j`, bit
    /// `steps + j` the sign of `dB_j`. Set bits are the known increments.
    pub fn tree_mask(&self, steps: usize) -> usize {
        let w_known = (1usize << self.0) - 1;
        let b_all = ((1usize << steps) - 1) << steps;
        let b_unknown = ((1usize << self.0) - 1) << steps;
        w_known | (b_all & !b_unknown)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    grid: TimeGrid,
    paths: usize,
    dim_w: usize,
    dim_b: usize,
    mode: NoiseMode,
    seed: u64,
    // [(i * paths + p) * dim + k], i < steps
    dw: Vec<f64>,
    db: Vec<f64>,
    // [(i * paths + p) * dim + k], i <= steps
    w: Vec<f64>,
    b_tail: Vec<f64>,
}

impl NoiseBundle {
    #[allow(clippy::too_many_arguments)]
    fn from_increments(
        grid: TimeGrid,
        paths: usize,
        dim_w: usize,
        dim_b: usize,
        mode: NoiseMode,
        seed: u64,
        dw: Vec<f64>,
        db: Vec<f64>,
    ) -> Self {
        let n = grid.steps();
        let mut w = vec![0.0; (n + 1) * paths * dim_w];
        for i in 0..n {
            let (head, tail) = w.split_at_mut((i + 1) * paths * dim_w);
            let prev = &head[i * paths * dim_w..];
            let inc = &dw[i * paths * dim_w..(i + 1) * paths * dim_w];
            for (k, out) in tail[..paths * dim_w].iter_mut().enumerate() {
                *out = prev[k] + inc[k];
            }
        }
        let mut b_tail = vec![0.0; (n + 1) * paths * dim_b];
        for i in (0..n).rev() {
            let (head, tail) = b_tail.split_at_mut((i + 1) * paths * dim_b);
            let next = &tail[..paths * dim_b];
            let inc = &db[i * paths * dim_b..(i + 1) * paths * dim_b];
            for (k, out) in head[i * paths * dim_b..].iter_mut().enumerate() {
                *out = next[k] + inc[k];
            }
        }
        NoiseBundle { grid, paths, dim_w, dim_b, mode, seed, dw, db, w, b_tail }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_tree(&self) -> bool {
        self.mode == NoiseMode::RademacherTree
    }

    /// `W_{t_{i+1}} - W_{t_i}` on path `p`.
    pub fn dw(&self, i: usize, p: usize) -> &[f64] {
        let at = (i * self.paths + p) * self.dim_w;
        &self.dw[at..at + self.dim_w]
    }

    /// `B_{t_{i+1}} - B_{t_i}` on path `p`.
    pub fn db(&self, i: usize, p: usize) -> &[f64] {
        let at = (i * self.paths + p) * self.dim_b;
        &self.db[at..at + self.dim_b]
    }

    /// `W_{t_i}` on path `p`, `i` in `0..=N`.
    pub fn w(&self, i: usize, p: usize) -> &[f64] {
        let at = (i * self.paths + p) * self.dim_w;
        &self.w[at..at + self.dim_w]
    }

    /// `B_T - B_{t_i}` on path `p`, `i` in `0..=N`.
    pub fn b_tail(&self, i: usize, p: usize) -> &[f64] {
        let at = (i * self.paths + p) * self.dim_b;
        &self.b_tail[at..at + self.dim_b]
    }

    /// Raw increment buffers, time-major.
    pub fn increments(&self) -> (&[f64], &[f64]) {
        (&self.dw, &self.db)
    }
}

/// Gaussian two-sided noise. Every coordinate is drawn from a ChaCha8 stream
/// keyed by `(seed, path)` at a word offset fixed by `(step, axis)`, so the
/// bundle does not depend on how paths are split across threads.
pub fn sample_noise(
    grid: &TimeGrid,
    paths: usize,
    dim_w: usize,
    dim_b: usize,
    seed: u64,
) -> Result<NoiseBundle> {
    if paths == 0 || dim_w == 0 || dim_b == 0 {
        return Err(Error::InvalidParameter(format!(
            "paths, dim_w and dim_b must be >= 1 (got {paths}, {dim_w}, {dim_b})"
        )));
    }
    let n = grid.steps();
    let axes = dim_w + dim_b;
    let scale = grid.dt().sqrt();

    let per_path: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut out = Vec::with_capacity(n * axes);
            for i in 0..n {
                for axis in 0..axes {
                    let slot = (i * axes + axis) as u128;
                    rng.set_word_pos(slot * WORDS_PER_DRAW);
                    let x: f64 = rng.sample(StandardNormal);
                    out.push(x * scale);
                }
            }
            out
        })
        .collect();

    let mut dw = vec![0.0; n * paths * dim_w];
    let mut db = vec![0.0; n * paths * dim_b];
    for (p, draws) in per_path.iter().enumerate() {
        for i in 0..n {
            let row = &draws[i * axes..(i + 1) * axes];
            let wat = (i * paths + p) * dim_w;
            dw[wat..wat + dim_w].copy_from_slice(&row[..dim_w]);
            let bat = (i * paths + p) * dim_b;
            db[bat..bat + dim_b].copy_from_slice(&row[dim_w..]);
        }
    }
    Ok(NoiseBundle::from_increments(
        *grid,
        paths,
        dim_w,
        dim_b,
        NoiseMode::Gaussian,
        seed,
        dw,
        db,
    ))
}

/// The full Rademacher sample space for `d = l = 1`: path `p` has
/// `dW_j = +sqrt(dt)` iff bit `j` of `p` is set and `dB_j = +sqrt(dt)` iff bit
/// `N + j` is set. All `4^N` patterns appear exactly once.
pub fn enumerate_tree(grid: &TimeGrid) -> Result<NoiseBundle> {
    let n = grid.steps();
    if n > TREE_MAX_STEPS {
        return Err(Error::Capacity { steps: n, limit: TREE_MAX_STEPS });
    }
    let paths = 1usize << (2 * n);
    let h = grid.dt().sqrt();
    let mut dw = vec![0.0; n * paths];
    let mut db = vec![0.0; n * paths];
    for i in 0..n {
        for p in 0..paths {
            dw[i * paths + p] = if p >> i & 1 == 1 { h } else { -h };
            db[i * paths + p] = if p >> (n + i) & 1 == 1 { h } else { -h };
        }
    }
    Ok(NoiseBundle::from_increments(
        *grid,
        paths,
        1,
        1,
        NoiseMode::RademacherTree,
        0,
        dw,
        db,
    ))
}
