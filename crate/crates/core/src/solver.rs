//! Backward induction for one reflected equation with a Lipschitz generator.
//!
//! For `i = N-1, ..., 0`, with `G_{i+1} = g(t_{i+1}, Y_{i+1}, Z_{i+1})`:
//!
//! ```text
//! Z_i  = E_i[(Y_{i+1} + G_{i+1} dB_i) dW_i] / dt
//! Yb_i = E_i[Y_{i+1} + G_{i+1} dB_i]
//! Y~_i = Yb_i + dt f(t_i, Y~_i, Z_i)                      (implicit)
//! Y~_i = E_i[Y_{i+1} + G_{i+1} dB_i + dt f(t_i, Y_{i+1}, Z_i)]   (explicit)
//! ```
//!
//! followed by reflection on the obstacle. In implicit mode a reflected node
//! sets `Y_i = S_i` and `dK_i = S_i - Yb_i - dt f(t_i, S_i, Z_i)`, so the
//! discrete equation `Y_i = Yb_i + dt f(t_i, Y_i, Z_i) + dK_i` holds at every
//! node and `dK_i (Y_i - S_i) = 0` exactly.

use rayon::prelude::*;

use crate::condexp::CondExpEngine;
use crate::error::{Error, Result};
use crate::model::{GeneratorSpec, ProblemSpec};
use crate::noise::NoiseBundle;

/// Where a generator is evaluated: path, grid index, time and `W_{t_i}`.
#[derive(Debug, Clone, Copy)]
pub struct Node<'a> {
    pub path: usize,
    pub step: usize,
    pub t: f64,
    pub w: &'a [f64],
}

/// A generator that may depend on the path and grid index, as the frozen
/// coefficients of the monotone scheme do.
pub trait Driver: Sync {
    fn eval(&self, node: &Node<'_>, y: f64, z: &[f64]) -> f64;

    /// Lipschitz constant in `y`, when known.
    fn lipschitz_y(&self) -> Option<f64>;
}

impl Driver for GeneratorSpec {
    fn eval(&self, node: &Node<'_>, y: f64, z: &[f64]) -> f64 {
        (self.f)(node.t, y, z)
    }

    fn lipschitz_y(&self) -> Option<f64> {
        self.lipschitz_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YUpdate {
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub y_update: YUpdate,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub engine: CondExpEngine,
    /// Reflect on the obstacle when the problem has one.
    pub reflect: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            y_update: YUpdate::Implicit,
            picard_tol: 1e-12,
            picard_max: 50,
            engine: CondExpEngine::Tree,
            reflect: true,
        }
    }
}

impl SolverConfig {
    pub fn tree() -> Self {
        SolverConfig::default()
    }

    pub fn with_engine(mut self, engine: CondExpEngine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_update(mut self, y_update: YUpdate) -> Self {
        self.y_update = y_update;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("picard_tol must be > 0, got {}", self.picard_tol)));
        }
        if self.picard_max == 0 {
            return Err(Error::InvalidParameter("picard_max must be >= 1".into()));
        }
        Ok(())
    }
}

/// Discrete triple `(Y, Z, dK)` on the grid, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    steps: usize,
    paths: usize,
    dim_w: usize,
    dt: f64,
    y: Vec<f64>,
    z: Vec<f64>,
    dk: Vec<f64>,
    obstacle: Option<Vec<f64>>,
    engine: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefinitionReport {
    /// `min (Y - S)`; `None` without obstacle.
    pub min_obstacle_gap: Option<f64>,
    pub min_dk: f64,
    /// `max_p |sum_i dK_i (Y_i - S_i)|`.
    pub max_skorokhod: f64,
    /// Total push on a problem without obstacle.
    pub unreflected_push: f64,
}

impl DefinitionReport {
    /// `Y >= S`, `dK >= 0`, `K_0 = 0` and the Skorokhod sum, all exact.
    pub fn holds(&self) -> bool {
        self.min_obstacle_gap.is_none_or(|g| g >= 0.0)
            && self.min_dk >= 0.0
            && self.max_skorokhod == 0.0
            && self.unreflected_push == 0.0
    }
}

impl SolutionField {
    /// Assemble a field from time-major buffers of lengths `(N+1) P`,
    /// `(N+1) P d` and `(N+1) P`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        steps: usize,
        paths: usize,
        dim_w: usize,
        dt: f64,
        y: Vec<f64>,
        z: Vec<f64>,
        dk: Vec<f64>,
        obstacle: Option<Vec<f64>>,
        engine: &'static str,
    ) -> Result<Self> {
        let nodes = (steps + 1) * paths;
        if y.len() != nodes || dk.len() != nodes || z.len() != nodes * dim_w {
            return Err(Error::Shape(format!(
                "field buffers ({}, {}, {}) do not match N = {steps}, P = {paths}, d = {dim_w}",
                y.len(),
                z.len(),
                dk.len()
            )));
        }
        if let Some(s) = &obstacle {
            if s.len() != nodes {
                return Err(Error::Shape("obstacle buffer length".into()));
            }
        }
        Ok(SolutionField { steps, paths, dim_w, dt, y, z, dk, obstacle, engine })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn engine(&self) -> &'static str {
        self.engine
    }

    pub fn reflected(&self) -> bool {
        self.obstacle.is_some()
    }

    pub fn y(&self, i: usize, p: usize) -> f64 {
        self.y[i * self.paths + p]
    }

    pub fn z(&self, i: usize, p: usize) -> &[f64] {
        let at = (i * self.paths + p) * self.dim_w;
        &self.z[at..at + self.dim_w]
    }

    pub fn dk(&self, i: usize, p: usize) -> f64 {
        self.dk[i * self.paths + p]
    }

    pub fn obstacle(&self, i: usize, p: usize) -> Option<f64> {
        self.obstacle.as_ref().map(|s| s[i * self.paths + p])
    }

    /// `K_{t_i} = sum_{j < i} dK_j`.
    pub fn k(&self, i: usize, p: usize) -> f64 {
        (0..i).fold(0.0, |acc, j| acc + self.dk(j, p))
    }

    pub fn y_at(&self, i: usize) -> &[f64] {
        &self.y[i * self.paths..(i + 1) * self.paths]
    }

    pub fn z_at(&self, i: usize) -> &[f64] {
        &self.z[i * self.paths * self.dim_w..(i + 1) * self.paths * self.dim_w]
    }

    pub fn dk_at(&self, i: usize) -> &[f64] {
        &self.dk[i * self.paths..(i + 1) * self.paths]
    }

    pub fn mean_y(&self, i: usize) -> f64 {
        mean(self.y_at(i))
    }

    /// Monte Carlo standard error of `mean_y(i)`.
    pub fn stderr_y(&self, i: usize) -> f64 {
        stderr(self.y_at(i))
    }

    pub fn mean_k(&self, i: usize) -> f64 {
        (0..self.paths).map(|p| self.k(i, p)).sum::<f64>() / self.paths as f64
    }

    pub fn mean_z_norm(&self, i: usize) -> f64 {
        (0..self.paths).map(|p| crate::model::norm(self.z(i, p))).sum::<f64>() / self.paths as f64
    }

    /// `dt * sum_i mean_p |Z_i|^2`.
    pub fn z_energy(&self) -> f64 {
        let per_step: f64 = (0..self.steps)
            .map(|i| self.z_at(i).iter().map(|v| v * v).sum::<f64>() / self.paths as f64)
            .sum();
        self.dt * per_step
    }

    /// `(-Y, -Z, dK)`; only meaningful without obstacle. Uses `0 - v` so
    /// zeros stay positive.
    pub fn negated(&self) -> SolutionField {
        let neg = |v: &Vec<f64>| v.iter().map(|x| 0.0 - x).collect();
        SolutionField {
            y: neg(&self.y),
            z: neg(&self.z),
            obstacle: self.obstacle.as_ref().map(neg),
            ..self.clone()
        }
    }

    pub fn definition_report(&self) -> DefinitionReport {
        let min_dk = self.dk.iter().copied().fold(f64::INFINITY, f64::min);
        match &self.obstacle {
            Some(s) => {
                let min_gap = self.y.iter().zip(s).map(|(y, s)| y - s).fold(f64::INFINITY, f64::min);
                let max_sk = (0..self.paths)
                    .map(|p| {
                        (0..=self.steps)
                            .map(|i| {
                                let at = i * self.paths + p;
                                self.dk[at] * (self.y[at] - s[at])
                            })
                            .sum::<f64>()
                            .abs()
                    })
                    .fold(0.0, f64::max);
                DefinitionReport {
                    min_obstacle_gap: Some(min_gap),
                    min_dk,
                    max_skorokhod: max_sk,
                    unreflected_push: 0.0,
                }
            }
            None => DefinitionReport {
                min_obstacle_gap: None,
                min_dk,
                max_skorokhod: 0.0,
                unreflected_push: self.dk.iter().map(|v| v.abs()).sum(),
            },
        }
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn stderr(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn check_shapes(spec: &ProblemSpec, noise: &NoiseBundle) -> Result<()> {
    if spec.dim_w != noise.dim_w() || spec.dim_b() != noise.dim_b() {
        return Err(Error::Shape(format!(
            "problem dims (d = {}, l = {}) differ from noise dims (d = {}, l = {})",
            spec.dim_w,
            spec.dim_b(),
            noise.dim_w(),
            noise.dim_b()
        )));
    }
    Ok(())
}

/// Solve with the problem's own generator, which must be declared Lipschitz.
pub fn solve_lipschitz(spec: &ProblemSpec, noise: &NoiseBundle, cfg: &SolverConfig) -> Result<SolutionField> {
    if spec.generator.lipschitz_c.is_none() {
        return Err(Error::NotLipschitz);
    }
    solve_with_driver(spec, &spec.generator, noise, cfg)
}

/// Solve with an arbitrary Lipschitz driver in place of `spec.generator`;
/// `g`, `xi` and `S` come from `spec`.
pub fn solve_with_driver(
    spec: &ProblemSpec,
    driver: &dyn Driver,
    noise: &NoiseBundle,
    cfg: &SolverConfig,
) -> Result<SolutionField> {
    cfg.validate()?;
    check_shapes(spec, noise)?;
    let grid = noise.grid();
    let n = grid.steps();
    let paths = noise.paths();
    let d = noise.dim_w();
    let l = noise.dim_b();
    let dt = grid.dt();

    let c = driver.lipschitz_y().ok_or(Error::NotLipschitz)?;
    if cfg.y_update == YUpdate::Implicit && dt * c >= 1.0 {
        return Err(Error::Contraction { factor: dt * c });
    }

    let nodes = (n + 1) * paths;
    let mut y = vec![0.0; nodes];
    let mut z = vec![0.0; nodes * d];
    let mut dk = vec![0.0; nodes];
    let reflect = cfg.reflect && spec.obstacle.is_some();
    let obstacle: Option<Vec<f64>> = if reflect {
        let mut s = vec![0.0; nodes];
        for i in 0..=n {
            let t = grid.node(i);
            s[i * paths..(i + 1) * paths]
                .par_iter_mut()
                .enumerate()
                .for_each(|(p, out)| *out = spec.obstacle_value(t, noise.w(i, p)).expect("obstacle present"));
        }
        Some(s)
    } else {
        None
    };

    // terminal
    for p in 0..paths {
        let xi = spec.terminal_value(noise.w(n, p));
        if let Some(s) = &obstacle {
            let s_t = s[n * paths + p];
            if !(s_t <= xi) {
                return Err(Error::Precondition(format!(
                    "terminal value {xi} below obstacle {s_t} on path {p}"
                )));
            }
        }
        y[n * paths + p] = xi;
    }

    let with_noise = !spec.diffusion.vanishes;
    for i in (0..n).rev() {
        let t = grid.node(i);
        let t_next = grid.node(i + 1);
        let (now, next) = y.split_at_mut((i + 1) * paths);
        let y_next = &next[..paths];
        let z_next = &z[(i + 1) * paths * d..(i + 2) * paths * d];

        let base: Vec<f64> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let mut v = y_next[p];
                if with_noise {
                    let mut g = vec![0.0; l];
                    spec.diffusion.eval(t_next, y_next[p], &z_next[p * d..(p + 1) * d], &mut g);
                    v += g.iter().zip(noise.db(i, p)).map(|(a, b)| a * b).sum::<f64>();
                }
                v
            })
            .collect();

        let mut targets: Vec<Vec<f64>> = Vec::with_capacity(1 + d);
        for k in 0..d {
            targets.push((0..paths).map(|p| base[p] * noise.dw(i, p)[k]).collect());
        }
        let mut refs: Vec<&[f64]> = vec![&base];
        refs.extend(targets.iter().map(|v| v.as_slice()));
        let proj = cfg.engine.project(noise, i, &refs)?;

        let z_now = &mut z[i * paths * d..(i + 1) * paths * d];
        for p in 0..paths {
            for k in 0..d {
                z_now[p * d + k] = proj[1 + k][p] / dt;
            }
        }
        let z_now = &z[i * paths * d..(i + 1) * paths * d];

        let ybar: Vec<f64> = match cfg.y_update {
            YUpdate::Implicit => proj[0].clone(),
            YUpdate::Explicit => {
                let drift: Vec<f64> = (0..paths)
                    .into_par_iter()
                    .map(|p| {
                        let node = Node { path: p, step: i, t, w: noise.w(i, p) };
                        base[p] + dt * driver.eval(&node, y_next[p], &z_now[p * d..(p + 1) * d])
                    })
                    .collect();
                cfg.engine.project(noise, i, &[&drift])?.pop().expect("one target")
            }
        };

        let s_now = obstacle.as_ref().map(|s| &s[i * paths..(i + 1) * paths]);
        let step: Vec<Result<(f64, f64)>> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let node = Node { path: p, step: i, t, w: noise.w(i, p) };
                let zp = &z_now[p * d..(p + 1) * d];
                let free = match cfg.y_update {
                    YUpdate::Explicit => ybar[p],
                    YUpdate::Implicit => picard(driver, &node, ybar[p], zp, dt, cfg)?,
                };
                let Some(s) = s_now.map(|s| s[p]) else {
                    return Ok((free, 0.0));
                };
                if free >= s {
                    return Ok((free, 0.0));
                }
                let push = match cfg.y_update {
                    YUpdate::Explicit => s - free,
                    YUpdate::Implicit => s - ybar[p] - dt * driver.eval(&node, s, zp),
                };
                Ok((s, push.max(0.0)))
            })
            .collect();

        let y_now = &mut now[i * paths..];
        for (p, r) in step.into_iter().enumerate() {
            let (yv, kv) = r?;
            y_now[p] = yv;
            dk[i * paths + p] = kv;
        }
    }

    SolutionField::from_parts(n, paths, d, dt, y, z, dk, obstacle, cfg.engine.name())
}

/// Once the step falls below `picard_tol` the iteration keeps going while the
/// step still shrinks, so the returned root is accurate to rounding.
fn picard(driver: &dyn Driver, node: &Node<'_>, ybar: f64, z: &[f64], dt: f64, cfg: &SolverConfig) -> Result<f64> {
    let mut y = ybar;
    let mut last = f64::INFINITY;
    let mut met = false;
    for _ in 0..cfg.picard_max {
        let next = ybar + dt * driver.eval(node, y, z);
        let step = (next - y).abs();
        if met && (step == 0.0 || step >= last) {
            return Ok(next);
        }
        met = met || step <= cfg.picard_tol * y.abs().max(1.0);
        last = step;
        y = next;
    }
    if met {
        Ok(y)
    } else {
        Err(Error::Picard { path: node.path, step: node.step, iterations: cfg.picard_max })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    /// `max |E_i[r_i]|` over all nodes `i < N`.
    pub max_projected: f64,
    /// `max |r_i|` before projection (contains the martingale noise).
    pub max_raw: f64,
    pub definition: DefinitionReport,
}

/// Plug a field into the discrete equation with the problem's generator.
pub fn residual_check(
    spec: &ProblemSpec,
    noise: &NoiseBundle,
    field: &SolutionField,
    cfg: &SolverConfig,
) -> Result<ResidualReport> {
    residual_check_with(spec, &spec.generator, noise, field, cfg)
}

/// `r_i = Y_i - (Y_{i+1} + dt f(t_i, y_f, Z_i) + G_{i+1} dB_i + dK_i - Z_i dW_i)`
/// with `y_f = Y_i` (implicit) or `Y_{i+1}` (explicit), projected by the
/// configured engine.
pub fn residual_check_with(
    spec: &ProblemSpec,
    driver: &dyn Driver,
    noise: &NoiseBundle,
    field: &SolutionField,
    cfg: &SolverConfig,
) -> Result<ResidualReport> {
    check_shapes(spec, noise)?;
    let n = noise.steps();
    let paths = noise.paths();
    if field.steps() != n || field.paths() != paths || field.dim_w() != noise.dim_w() {
        return Err(Error::Shape("field does not match the noise bundle".into()));
    }
    let grid = noise.grid();
    let dt = grid.dt();
    let l = noise.dim_b();
    let mut max_projected = 0.0f64;
    let mut max_raw = 0.0f64;
    for i in 0..n {
        let t = grid.node(i);
        let t_next = grid.node(i + 1);
        let r: Vec<f64> = (0..paths)
            .into_par_iter()
            .map(|p| {
                let node = Node { path: p, step: i, t, w: noise.w(i, p) };
                let y_next = field.y(i + 1, p);
                let y_f = match cfg.y_update {
                    YUpdate::Implicit => field.y(i, p),
                    YUpdate::Explicit => y_next,
                };
                let zi = field.z(i, p);
                let mut g = vec![0.0; l];
                spec.diffusion.eval(t_next, y_next, field.z(i + 1, p), &mut g);
                let back: f64 = g.iter().zip(noise.db(i, p)).map(|(a, b)| a * b).sum();
                let fwd: f64 = zi.iter().zip(noise.dw(i, p)).map(|(a, b)| a * b).sum();
                field.y(i, p) - (y_next + dt * driver.eval(&node, y_f, zi) + back + field.dk(i, p) - fwd)
            })
            .collect();
        max_raw = r.iter().fold(max_raw, |a, v| a.max(v.abs()));
        let proj = cfg.engine.project(noise, i, &[&r])?;
        max_projected = proj[0].iter().fold(max_projected, |a, v| a.max(v.abs()));
    }
    Ok(ResidualReport { max_projected, max_raw, definition: field.definition_report() })
}
