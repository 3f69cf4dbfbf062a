//! Floor/ceiling brackets and the h-shifted monotone iteration that selects
//! the minimal solution of a reflected equation with a discontinuous
//! generator.
//!
//! Step `n` solves the reflected equation whose generator is
//!
//! ```text
//! F_n(t, y, z) = f(t, y^{n-1}_t, z^{n-1}_t) + h(y - y^{n-1}_t, z - z^{n-1}_t)
//! ```
//!
//! with the previous iterate frozen pathwise, starting from the floor.

use crate::condexp::CondExpEngine;
use crate::error::{Error, Result};
use crate::model::{norm, GeneratorSpec, MinorantSpec, ProblemSpec, Regularity};
use crate::noise::NoiseBundle;
use crate::solver::{solve_with_driver, Driver, Node, SolutionField, SolverConfig};

/// `-k|y| - k|z| - phi_t` (floor) or `k|y| + k|z| + phi_t` (ceiling).
struct BoundDriver<'a> {
    generator: &'a GeneratorSpec,
    sign: f64,
}

impl Driver for BoundDriver<'_> {
    fn eval(&self, node: &Node<'_>, y: f64, z: &[f64]) -> f64 {
        let g = self.generator;
        self.sign * (g.kappa * y.abs() + g.kappa * norm(z) + (g.phi)(node.t))
    }

    fn lipschitz_y(&self) -> Option<f64> {
        Some(self.generator.kappa)
    }
}

/// Generator of one iteration step, frozen on the previous iterate.
struct FrozenDriver<'a> {
    generator: &'a GeneratorSpec,
    minorant: &'a MinorantSpec,
    prev: &'a SolutionField,
}

impl Driver for FrozenDriver<'_> {
    fn eval(&self, node: &Node<'_>, y: f64, z: &[f64]) -> f64 {
        let y0 = self.prev.y(node.step, node.path);
        let z0 = self.prev.z(node.step, node.path);
        let base = self.generator.eval(node.t, y0, z0);
        let mut buf = [0.0; 8];
        let mut heap;
        let dz: &mut [f64] = if z.len() <= buf.len() {
            &mut buf[..z.len()]
        } else {
            heap = vec![0.0; z.len()];
            &mut heap
        };
        for ((d, a), b) in dz.iter_mut().zip(z).zip(z0) {
            *d = a - b;
        }
        base + self.minorant.eval(y - y0, dz)
    }

    fn lipschitz_y(&self) -> Option<f64> {
        Some(self.minorant.lipschitz)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketPair {
    pub floor: SolutionField,
    pub ceiling: SolutionField,
}

impl BracketPair {
    /// `min (ceiling.Y - floor.Y)`.
    pub fn min_gap(&self) -> f64 {
        min_diff(&self.ceiling, &self.floor).0
    }
}

/// Solve the floor and ceiling equations built from `kappa` and `phi`.
pub fn solve_brackets(spec: &ProblemSpec, noise: &NoiseBundle, cfg: &SolverConfig) -> Result<BracketPair> {
    let floor = solve_with_driver(spec, &BoundDriver { generator: &spec.generator, sign: -1.0 }, noise, cfg)?;
    let ceiling = solve_with_driver(spec, &BoundDriver { generator: &spec.generator, sign: 1.0 }, noise, cfg)?;
    Ok(BracketPair { floor, ceiling })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub solver: SolverConfig,
    /// Stop once `delta < tol`.
    pub tol: f64,
    pub max_n: usize,
    /// Fail with [`Error::NonMonotone`] when an iterate drops below its
    /// predecessor by more than this; `None` only records the margin.
    pub monotone_tol: Option<f64>,
}

impl SchemeConfig {
    /// Defaults for an engine: tight tolerance and enforced monotonicity on
    /// the tree, loose tolerance and recorded-only margins for regression.
    pub fn for_engine(engine: CondExpEngine) -> Self {
        let solver = SolverConfig::default().with_engine(engine);
        match engine {
            CondExpEngine::Tree => SchemeConfig { solver, tol: 1e-10, max_n: 50, monotone_tol: Some(1e-12) },
            CondExpEngine::Regression(_) => SchemeConfig { solver, tol: 1e-4, max_n: 50, monotone_tol: None },
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_n(mut self, max_n: usize) -> Self {
        self.max_n = max_n;
        self
    }
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig::for_engine(CondExpEngine::Tree)
    }
}

/// Scalar summary of iterate `n >= 1`; the fields themselves are not kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub n: usize,
    /// `sqrt(dt sum_i mean_p theta_i^2)`.
    pub theta_norm: f64,
    /// `sup_i mean_p |y^n_i - y^{n-1}_i|^2`.
    pub delta: f64,
    /// `dt sum_i mean_p |z^n_i|^2`.
    pub z_energy: f64,
    /// `min (y^n - y^{n-1})`, against the floor for `n = 1`.
    pub monotone_margin: f64,
    /// Where the monotone margin is attained: `(path, step)`.
    pub monotone_witness: (usize, usize),
    /// `min (y^n - floor.Y)`.
    pub floor_margin: f64,
    /// `min (ceiling.Y - y^n)`.
    pub ceiling_margin: f64,
    pub y0_mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeOutcome {
    pub field: SolutionField,
    pub brackets: BracketPair,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
}

/// `(min_{i,p} (a - b), (p, i))`.
fn min_diff(a: &SolutionField, b: &SolutionField) -> (f64, (usize, usize)) {
    let mut best = (f64::INFINITY, (0, 0));
    for i in 0..=a.steps() {
        for p in 0..a.paths() {
            let v = a.y(i, p) - b.y(i, p);
            if v < best.0 {
                best = (v, (p, i));
            }
        }
    }
    best
}

fn sup_mean_sq(a: &SolutionField, b: &SolutionField) -> f64 {
    (0..=a.steps())
        .map(|i| {
            a.y_at(i).iter().zip(b.y_at(i)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.paths() as f64
        })
        .fold(0.0, f64::max)
}

fn theta_norm(spec: &ProblemSpec, h: &MinorantSpec, noise: &NoiseBundle, cur: &SolutionField, prev: &SolutionField) -> f64 {
    let grid = noise.grid();
    let driver = FrozenDriver { generator: &spec.generator, minorant: h, prev };
    let mut total = 0.0;
    for i in 0..grid.steps() {
        let t = grid.node(i);
        let s: f64 = (0..cur.paths())
            .map(|p| {
                let node = Node { path: p, step: i, t, w: noise.w(i, p) };
                let v = driver.eval(&node, cur.y(i, p), cur.z(i, p));
                v * v
            })
            .sum();
        total += s / cur.paths() as f64;
    }
    (grid.dt() * total).sqrt()
}

/// Monotone iteration from the floor towards the minimal solution.
///
/// Reaching `max_n` without `delta < tol` is not an error; the outcome
/// reports `converged = false`.
pub fn iterate_minimal(spec: &ProblemSpec, noise: &NoiseBundle, cfg: &SchemeConfig) -> Result<SchemeOutcome> {
    if spec.generator.regularity == Regularity::RightContinuous {
        return Err(Error::Unsupported(
            "right-continuous generators are iterated through iterate_maximal".into(),
        ));
    }
    let h = spec
        .minorant
        .as_ref()
        .ok_or_else(|| Error::Precondition("the monotone scheme needs a minorant h".into()))?;
    if !(cfg.tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be >= 0, got {}", cfg.tol)));
    }

    let brackets = solve_brackets(spec, noise, &cfg.solver)?;
    let mut prev = brackets.floor.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    for n in 1..=cfg.max_n {
        let driver = FrozenDriver { generator: &spec.generator, minorant: h, prev: &prev };
        let cur = solve_with_driver(spec, &driver, noise, &cfg.solver)?;
        let (monotone_margin, witness) = min_diff(&cur, &prev);
        if let Some(slack) = cfg.monotone_tol {
            if monotone_margin < -slack {
                return Err(Error::NonMonotone { n, path: witness.0, step: witness.1, margin: monotone_margin });
            }
        }
        let delta = sup_mean_sq(&cur, &prev);
        trace.push(IterationRecord {
            n,
            theta_norm: theta_norm(spec, h, noise, &cur, &prev),
            delta,
            z_energy: cur.z_energy(),
            monotone_margin,
            monotone_witness: witness,
            floor_margin: min_diff(&cur, &brackets.floor).0,
            ceiling_margin: min_diff(&brackets.ceiling, &cur).0,
            y0_mean: cur.mean_y(0),
        });
        prev = cur;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(SchemeOutcome { field: prev, brackets, trace, converged })
}

/// Maximal solution through the mirror `Y -> -Y, Z -> -Z`: the minimal
/// solution of the mirrored problem, mapped back.
///
/// Brackets come back in the original orientation. Trace margins refer to
/// the mirrored (increasing) iteration; `y0_mean` is mapped back.
pub fn iterate_maximal(spec: &ProblemSpec, noise: &NoiseBundle, cfg: &SchemeConfig) -> Result<SchemeOutcome> {
    let mirror = spec.mirrored()?;
    let out = iterate_minimal(&mirror, noise, cfg)?;
    let trace = out
        .trace
        .into_iter()
        .map(|r| IterationRecord {
            y0_mean: 0.0 - r.y0_mean,
            floor_margin: r.ceiling_margin,
            ceiling_margin: r.floor_margin,
            ..r
        })
        .collect();
    Ok(SchemeOutcome {
        field: out.field.negated(),
        brackets: BracketPair { floor: out.brackets.ceiling.negated(), ceiling: out.brackets.floor.negated() },
        trace,
        converged: out.converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeDiagnostics {
    /// `min (y^{n+1} - y^n)` for consecutive trace entries.
    pub monotone_margins: Vec<f64>,
    pub floor_margins: Vec<f64>,
    pub ceiling_margins: Vec<f64>,
    pub z_energy: Vec<f64>,
    pub theta_norm: Vec<f64>,
    pub delta: Vec<f64>,
    /// `max_{n >= 2} (delta_n / delta_1)^{1/(n-1)}`; `None` with fewer than
    /// two entries or `delta_1 = 0`.
    pub rho: Option<f64>,
    /// No `z_energy` term exceeds ten times the median.
    pub energy_bounded: bool,
}

pub fn diagnostics(trace: &[IterationRecord]) -> SchemeDiagnostics {
    let col = |f: fn(&IterationRecord) -> f64| trace.iter().map(f).collect::<Vec<_>>();
    let delta = col(|r| r.delta);
    let z_energy = col(|r| r.z_energy);
    let rho = match delta.first() {
        Some(&d1) if d1 > 0.0 && delta.len() >= 2 => Some(
            delta
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &d)| (d / d1).powf(1.0 / k as f64))
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    let energy_bounded = if z_energy.is_empty() {
        true
    } else {
        let mut sorted = z_energy.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        z_energy.iter().all(|e| e.is_finite() && *e <= 10.0 * median.max(f64::MIN_POSITIVE))
            || z_energy.iter().all(|e| *e == 0.0)
    };
    SchemeDiagnostics {
        monotone_margins: trace.iter().skip(1).map(|r| r.monotone_margin).collect(),
        floor_margins: col(|r| r.floor_margin),
        ceiling_margins: col(|r| r.ceiling_margin),
        z_energy,
        theta_norm: col(|r| r.theta_norm),
        delta,
        rho,
        energy_bounded,
    }
}
