//! Comparison harness, positivity check and independent tree oracles.
//!
//! The oracles here group tree paths by their known sign pattern and solve
//! the scalar root by bisection. They share no code with `condexp` or the
//! Picard loop in `solver`, so agreement between the two is a real check.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::envelope::{envelope_generator_with, Direction, EnvelopeGrid, EnvelopeParams};
use crate::error::{Error, Result, Witness};
use crate::model::{
    builtin_problem, builtin_problem_with, BankParams, DiffusionSpec, GeneratorSpec, MinorantSpec,
    ObstacleFn, ProblemSpec, Regularity, TerminalFn,
};
use crate::noise::{NoiseBundle, NoiseMode};
use crate::scheme::{iterate_minimal, SchemeConfig};
use crate::solver::{self, solve_lipschitz, SolutionField, SolverConfig, YUpdate};

/// How one side of a comparison is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Direct solve; switches to the explicit update when `dt C >= 1`.
    Lipschitz,
    /// Minimal solution by the monotone scheme.
    Minimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HypothesisTags {
    pub terminal: bool,
    pub obstacle: bool,
    pub generator: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonCase {
    pub id: String,
    pub spec1: ProblemSpec,
    pub method1: SolveMethod,
    pub spec2: ProblemSpec,
    pub method2: SolveMethod,
    /// Seed of the shared Gaussian noise.
    pub seed: u64,
}

impl ComparisonCase {
    pub fn new(
        id: impl Into<String>,
        spec1: ProblemSpec,
        method1: SolveMethod,
        spec2: ProblemSpec,
        method2: SolveMethod,
    ) -> Self {
        ComparisonCase { id: id.into(), spec1, method1, spec2, method2, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub case_id: String,
    /// `max_{p,i} (Y1 - Y2)^+`.
    pub max_violation: f64,
    /// Tree: grid points with `Y1 - Y2 > tol`. Gaussian: time indices whose
    /// mean difference exceeds `tol` plus 3 standard errors.
    pub count: usize,
    /// `(path, step)` of the largest pathwise violation.
    pub witness: Option<(usize, usize)>,
    /// `mean Y2_0 - mean Y1_0`.
    pub y0_gap: f64,
    pub tags: HypothesisTags,
}

fn ordering_samples(dim_w: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut ys: Vec<f64> = (0..=64).map(|k| -4.0 + k as f64 / 8.0).collect();
    ys.extend([-1e-9, 1e-9, 0.3, -0.7, 1.0 / 3.0, 2.5e-3]);
    let mut zs = vec![vec![0.0; dim_w]];
    for k in 0..dim_w {
        for c in [-1.0, -0.25, 0.25, 1.0] {
            let mut z = vec![0.0; dim_w];
            z[k] = c;
            zs.push(z);
        }
    }
    (ys, zs)
}

/// Check `xi1 <= xi2`, `S1 <= S2` on the sampled paths and `f1 <= f2` on a
/// deterministic box; refuse on the first counterexample. `g` must agree on
/// the same box.
pub fn audit_case(case: &ComparisonCase, noise: &NoiseBundle) -> Result<HypothesisTags> {
    let (s1, s2) = (&case.spec1, &case.spec2);
    if s1.dim_w != s2.dim_w || s1.dim_b() != s2.dim_b() {
        return Err(Error::Shape("compared problems must share dimensions".into()));
    }
    let refuse = |h: &str, witness: Witness| Err(Error::HypothesisRefused { hypothesis: h.into(), witness });
    let grid = noise.grid();
    let n = grid.steps();

    for p in 0..noise.paths() {
        let w = noise.w(n, p);
        if !(s1.terminal_value(w) <= s2.terminal_value(w)) {
            return refuse("terminal ordering xi1 <= xi2", Witness::Path { path: p });
        }
    }
    for i in 0..=n {
        let t = grid.node(i);
        for p in 0..noise.paths() {
            let w = noise.w(i, p);
            let ordered = match (s1.obstacle_value(t, w), s2.obstacle_value(t, w)) {
                (Some(a), Some(b)) => a <= b,
                (Some(_), None) => false,
                (None, _) => true,
            };
            if !ordered {
                return refuse("obstacle ordering S1 <= S2", Witness::PathStep { path: p, step: i });
            }
        }
    }
    let (ys, zs) = ordering_samples(s1.dim_w);
    let l = s1.dim_b();
    let (mut g1, mut g2) = (vec![0.0; l], vec![0.0; l]);
    for i in 0..=n {
        let t = grid.node(i);
        for &y in &ys {
            for z in &zs {
                if !(s1.generator.eval(t, y, z) <= s2.generator.eval(t, y, z)) {
                    return refuse("generator ordering f1 <= f2", Witness::Point { t, y, z: z.clone() });
                }
                s1.diffusion.eval(t, y, z, &mut g1);
                s2.diffusion.eval(t, y, z, &mut g2);
                if g1 != g2 {
                    return refuse("shared g", Witness::Point { t, y, z: z.clone() });
                }
            }
        }
    }
    Ok(HypothesisTags { terminal: true, obstacle: true, generator: true })
}

fn solve_side(spec: &ProblemSpec, method: SolveMethod, noise: &NoiseBundle, cfg: &SchemeConfig) -> Result<SolutionField> {
    match method {
        SolveMethod::Lipschitz => {
            let c = spec.generator.lipschitz_c.ok_or(Error::NotLipschitz)?;
            let mut solver_cfg = cfg.solver;
            if noise.grid().dt() * c >= 1.0 {
                solver_cfg.y_update = YUpdate::Explicit;
            }
            solve_lipschitz(spec, noise, &solver_cfg)
        }
        SolveMethod::Minimal => Ok(iterate_minimal(spec, noise, cfg)?.field),
    }
}

/// Solve both sides on the same noise and measure `Y1 <= Y2 + tol`.
pub fn compare(case: &ComparisonCase, noise: &NoiseBundle, cfg: &SchemeConfig, tol: f64) -> Result<ViolationReport> {
    let tags = audit_case(case, noise)?;
    let y1 = solve_side(&case.spec1, case.method1, noise, cfg)?;
    let y2 = solve_side(&case.spec2, case.method2, noise, cfg)?;
    let n = noise.steps();
    let paths = noise.paths();

    let mut max_violation = 0.0f64;
    let mut witness = None;
    let mut tree_count = 0;
    for i in 0..=n {
        for p in 0..paths {
            let d = y1.y(i, p) - y2.y(i, p);
            if d > max_violation {
                max_violation = d;
                witness = Some((p, i));
            }
            if d > tol {
                tree_count += 1;
            }
        }
    }
    let count = match noise.mode() {
        NoiseMode::RademacherTree => tree_count,
        NoiseMode::Gaussian => (0..=n)
            .filter(|&i| {
                let diff: Vec<f64> = y1.y_at(i).iter().zip(y2.y_at(i)).map(|(a, b)| a - b).collect();
                solver::mean(&diff) > tol + 3.0 * solver::stderr(&diff)
            })
            .count(),
    };
    Ok(ViolationReport {
        case_id: case.id.clone(),
        max_violation,
        count,
        witness,
        y0_gap: y2.mean_y(0) - y1.mean_y(0),
        tags,
    })
}

fn with_constant_generator(spec: ProblemSpec, c: f64) -> ProblemSpec {
    let kappa = spec.generator.kappa;
    spec.with_generator(GeneratorSpec::constant(c, kappa))
}

/// `y -> clamp(1 + n y, 0, 1)`: the exact sup-envelope of the step
/// `1_{y > 0}`, a Lipschitz majorant.
fn step_sup_envelope(n: f64) -> GeneratorSpec {
    GeneratorSpec::new(move |_, y, _| (1.0 + n * y).clamp(0.0, 1.0), 0.1, |_| 1.0, Regularity::Lipschitz)
        .with_lipschitz(n)
        .z_free()
}

/// The shipped comparison cases. All satisfy their hypotheses.
pub fn comparison_bank() -> Result<Vec<ComparisonCase>> {
    use SolveMethod::{Lipschitz, Minimal};
    let step = builtin_problem("step-generator")?;
    let mut bank = vec![
        ComparisonCase::new(
            "constant-drift",
            with_constant_generator(step.clone(), 0.0).renamed("drift-0"),
            Lipschitz,
            with_constant_generator(step.clone(), 1.0).renamed("drift-1"),
            Lipschitz,
        ),
        ComparisonCase::new(
            "terminal-shift",
            builtin_problem("lipschitz-markov")?.with_terminal(|w| w[0].cos() - 0.5),
            Lipschitz,
            builtin_problem("lipschitz-markov")?,
            Lipschitz,
        ),
        ComparisonCase::new(
            "obstacle-shift",
            builtin_problem_with("snell-only", &BankParams { obstacle_shift: Some(-0.1), ..Default::default() })?,
            Lipschitz,
            builtin_problem("snell-only")?,
            Lipschitz,
        ),
        ComparisonCase::new(
            "step-minimal-vs-drift",
            step.clone(),
            Minimal,
            with_constant_generator(step.clone(), 1.0),
            Lipschitz,
        ),
        ComparisonCase::new(
            "sqrt-minimal-vs-step-minimal",
            builtin_problem("sqrt-generator")?,
            Minimal,
            builtin_problem_with("step-generator", &BankParams { terminal: Some(0.25), ..Default::default() })?,
            Minimal,
        ),
    ];
    for n in [2.0, 8.0, 32.0] {
        let inf = envelope_generator_with(
            &step.generator,
            EnvelopeParams { n, direction: Direction::Inf },
            EnvelopeGrid::default(),
        )?;
        bank.push(ComparisonCase::new(
            format!("envelope-{n}"),
            step.clone().with_generator(inf).renamed(format!("step-inf-{n}")),
            Lipschitz,
            step.clone().with_generator(step_sup_envelope(n)).renamed(format!("step-sup-{n}")),
            Lipschitz,
        ));
    }
    Ok(bank)
}

/// A case with the generator ordering reversed; [`compare`] must refuse it.
pub fn violated_case() -> Result<ComparisonCase> {
    let step = builtin_problem("step-generator")?;
    Ok(ComparisonCase::new(
        "reversed-drift",
        with_constant_generator(step.clone(), 1.0),
        SolveMethod::Lipschitz,
        with_constant_generator(step, 0.0),
        SolveMethod::Lipschitz,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    /// `min Y` without reflection (`A = 0`).
    pub min_free: f64,
    /// `min Y` with reflection at zero (`A = K`).
    pub min_reflected: f64,
}

/// Solve with generator `h(y, z) + phi_t` and terminal `xi`, once without
/// reflection and once reflected at zero, and report the smallest `Y`.
pub fn lemma_positivity(
    phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    xi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    h: MinorantSpec,
    noise: &NoiseBundle,
    cfg: &SolverConfig,
) -> Result<PositivityReport> {
    let grid = noise.grid();
    for t in grid.nodes() {
        if !(phi(t) >= 0.0) {
            return Err(Error::Precondition(format!("phi({t}) = {} is negative", phi(t))));
        }
    }
    for p in 0..noise.paths() {
        let v = xi(noise.w(grid.steps(), p));
        if !(v >= 0.0) {
            return Err(Error::Precondition(format!("xi = {v} is negative on path {p}")));
        }
    }
    let phi: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(phi);
    let lip = h.lipschitz;
    let (hf, pf) = (h.h.clone(), phi.clone());
    let generator = GeneratorSpec::new(move |t, y, z| hf(y, z) + pf(t), lip, move |t| phi(t), Regularity::Lipschitz)
        .with_lipschitz(lip);
    let spec = ProblemSpec::new("positivity", generator, DiffusionSpec::zero(noise.dim_b()), xi, noise.dim_w())
        .with_minorant(h);
    let free = solve_lipschitz(&spec, noise, cfg)?;
    let reflected = solve_lipschitz(&spec.clone().with_obstacle(|_, _| 0.0), noise, cfg)?;
    let min_of = |f: &SolutionField| (0..=f.steps()).flat_map(|i| f.y_at(i).to_vec()).fold(f64::INFINITY, f64::min);
    Ok(PositivityReport { min_free: min_of(&free), min_reflected: min_of(&reflected) })
}

/// One named positivity scenario.
pub struct LemmaScenario {
    pub id: &'static str,
    pub phi: f64,
    pub xi: TerminalFn,
    pub h: MinorantSpec,
}

pub fn lemma_scenarios() -> Vec<LemmaScenario> {
    vec![
        LemmaScenario { id: "drift-only", phi: 1.0, xi: Arc::new(|_| 0.0), h: MinorantSpec::zero() },
        LemmaScenario {
            id: "damped-y",
            phi: 0.5,
            xi: Arc::new(|_| 0.0),
            h: MinorantSpec::new(|y, _| -0.1 * y.abs(), 0.1),
        },
        LemmaScenario {
            id: "damped-z",
            phi: 0.0,
            xi: Arc::new(|w: &[f64]| w[0].cos().abs()),
            h: MinorantSpec::new(|_, z| -0.2 * crate::model::norm(z), 0.2),
        },
    ]
}

pub fn run_lemma_scenario(s: &LemmaScenario, noise: &NoiseBundle, cfg: &SolverConfig) -> Result<PositivityReport> {
    let phi = s.phi;
    let xi = s.xi.clone();
    lemma_positivity(move |_| phi, move |w| xi(w), s.h.clone(), noise, cfg)
}

/// Paths of a tree bundle grouped by the increments known at index `i`:
/// the signs of `dW_j` for `j < i` and of `dB_j` for `j >= i`.
fn tree_groups(noise: &NoiseBundle, i: usize) -> BTreeMap<Vec<bool>, Vec<usize>> {
    let n = noise.steps();
    let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
    for p in 0..noise.paths() {
        let mut key = Vec::with_capacity(n);
        key.extend((0..i).map(|j| noise.dw(j, p)[0] > 0.0));
        key.extend((i..n).map(|j| noise.db(j, p)[0] > 0.0));
        groups.entry(key).or_default().push(p);
    }
    groups
}

fn require_tree(noise: &NoiseBundle) -> Result<()> {
    if !noise.is_tree() {
        return Err(Error::NotTree);
    }
    if noise.dim_w() != 1 || noise.dim_b() != 1 {
        return Err(Error::Shape("tree oracles need d = l = 1".into()));
    }
    Ok(())
}

/// Dynamic programming `Y_i = max(S_i, E_i[Y_{i+1}])` for `f = 0, g = 0`.
/// `obstacle = None` gives the martingale `E_i[xi]`.
pub fn snell_oracle(obstacle: Option<ObstacleFn>, xi: TerminalFn, noise: &NoiseBundle) -> Result<SolutionField> {
    require_tree(noise)?;
    let grid = noise.grid();
    let n = grid.steps();
    let paths = noise.paths();
    let dt = grid.dt();
    let mut y = vec![0.0; (n + 1) * paths];
    let mut z = vec![0.0; (n + 1) * paths];
    let mut dk = vec![0.0; (n + 1) * paths];
    let s: Option<Vec<f64>> = obstacle.map(|s| {
        (0..=n).flat_map(|i| (0..paths).map(move |p| (i, p))).map(|(i, p)| s(grid.node(i), noise.w(i, p))).collect()
    });
    for p in 0..paths {
        y[n * paths + p] = xi(noise.w(n, p));
    }
    for i in (0..n).rev() {
        for members in tree_groups(noise, i).values() {
            let m = members.len() as f64;
            let ey: f64 = members.iter().map(|&p| y[(i + 1) * paths + p]).sum::<f64>() / m;
            let ez: f64 = members.iter().map(|&p| y[(i + 1) * paths + p] * noise.dw(i, p)[0]).sum::<f64>() / m;
            for &p in members {
                let at = i * paths + p;
                z[at] = ez / dt;
                match &s {
                    Some(s) if s[at] > ey => {
                        y[at] = s[at];
                        dk[at] = s[at] - ey;
                    }
                    _ => y[at] = ey,
                }
            }
        }
    }
    SolutionField::from_parts(n, paths, 1, dt, y, z, dk, s, "snell-oracle")
}

/// Root of `y - ybar - dt f(y) = 0` by bisection, assuming `dt C < 1`.
fn bisect(mut phi: impl FnMut(f64) -> f64, centre: f64, radius: f64) -> f64 {
    let (mut lo, mut hi) = (centre - radius, centre + radius);
    for _ in 0..400 {
        if hi - lo <= 1e-14 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact discrete solution by exhaustive enumeration of the tree.
///
/// Same recursion as the solver, with conditional expectations taken over
/// sign-pattern groups and the implicit root found by bisection to `1e-14`.
pub fn tree_bruteforce(spec: &ProblemSpec, noise: &NoiseBundle, cfg: &SolverConfig) -> Result<SolutionField> {
    require_tree(noise)?;
    let grid = noise.grid();
    let n = grid.steps();
    if n > 6 {
        return Err(Error::Capacity { steps: n, limit: 6 });
    }
    let c = spec.generator.lipschitz_c.ok_or(Error::NotLipschitz)?;
    let dt = grid.dt();
    if cfg.y_update == YUpdate::Implicit && dt * c >= 1.0 {
        return Err(Error::Contraction { factor: dt * c });
    }
    let paths = noise.paths();
    let f = |t: f64, y: f64, z: f64| spec.generator.eval(t, y, &[z]);
    let g = |t: f64, y: f64, z: f64| {
        let mut out = [0.0];
        spec.diffusion.eval(t, y, &[z], &mut out);
        out[0]
    };
    let mut y = vec![0.0; (n + 1) * paths];
    let mut z = vec![0.0; (n + 1) * paths];
    let mut dk = vec![0.0; (n + 1) * paths];
    let reflect = cfg.reflect && spec.obstacle.is_some();
    let s: Option<Vec<f64>> = reflect.then(|| {
        (0..=n)
            .flat_map(|i| (0..paths).map(move |p| (i, p)))
            .map(|(i, p)| spec.obstacle_value(grid.node(i), noise.w(i, p)).unwrap_or(f64::NEG_INFINITY))
            .collect()
    });
    for p in 0..paths {
        y[n * paths + p] = spec.terminal_value(noise.w(n, p));
    }
    for i in (0..n).rev() {
        let (t, tn) = (grid.node(i), grid.node(i + 1));
        let tgt: Vec<f64> = (0..paths)
            .map(|p| {
                let a = (i + 1) * paths + p;
                y[a] + g(tn, y[a], z[a]) * noise.db(i, p)[0]
            })
            .collect();
        for members in tree_groups(noise, i).values() {
            let m = members.len() as f64;
            let ybar: f64 = members.iter().map(|&p| tgt[p]).sum::<f64>() / m;
            let zi: f64 = members.iter().map(|&p| tgt[p] * noise.dw(i, p)[0]).sum::<f64>() / m / dt;
            let free = match cfg.y_update {
                YUpdate::Implicit => {
                    let r = dt * f(t, ybar, zi).abs() / (1.0 - dt * c) + 1.0;
                    bisect(|v| v - ybar - dt * f(t, v, zi), ybar, r)
                }
                YUpdate::Explicit => {
                    members.iter().map(|&p| tgt[p] + dt * f(t, y[(i + 1) * paths + p], zi)).sum::<f64>() / m
                }
            };
            let mut out = Vec::with_capacity(members.len());
            for &p in members {
                let at = i * paths + p;
                let (yv, kv) = match &s {
                    Some(s) if free < s[at] => {
                        let push = match cfg.y_update {
                            YUpdate::Implicit => s[at] - ybar - dt * f(t, s[at], zi),
                            YUpdate::Explicit => s[at] - free,
                        };
                        (s[at], push.max(0.0))
                    }
                    _ => (free, 0.0),
                };
                out.push((at, yv, kv));
            }
            for (at, yv, kv) in out {
                y[at] = yv;
                z[at] = zi;
                dk[at] = kv;
            }
        }
    }
    SolutionField::from_parts(n, paths, 1, dt, y, z, dk, s, "tree-bruteforce")
}

/// Largest absolute differences in `(Y, Z, dK)` between two fields.
pub fn max_discrepancy(a: &SolutionField, b: &SolutionField) -> (f64, f64, f64) {
    let mut out = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..=a.steps() {
        for p in 0..a.paths() {
            out.0 = out.0.max((a.y(i, p) - b.y(i, p)).abs());
            out.1 = a.z(i, p).iter().zip(b.z(i, p)).fold(out.1, |m, (u, v)| m.max((u - v).abs()));
            out.2 = out.2.max((a.dk(i, p) - b.dk(i, p)).abs());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{enumerate_tree, make_grid};

    fn tree(n: usize) -> NoiseBundle {
        enumerate_tree(&make_grid(1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn snell_hand_values() {
        let spec = builtin_problem("snell-only").unwrap();
        let f = snell_oracle(spec.obstacle.clone(), spec.terminal.clone(), &tree(2)).unwrap();
        for p in 0..f.paths() {
            assert_eq!(f.y(0, p), 1.0);
            assert_eq!(f.k(2, p), 1.0);
        }
    }

    #[test]
    fn snell_without_obstacle_is_martingale() {
        let noise = tree(3);
        let f = snell_oracle(None, Arc::new(|w: &[f64]| w[0]), &noise).unwrap();
        for p in 0..noise.paths() {
            for i in 0..=3 {
                assert!((f.y(i, p) - noise.w(i, p)[0]).abs() < 1e-15);
                assert_eq!(f.dk(i, p), 0.0);
            }
            assert!((f.z(0, p)[0] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn snell_touching() {
        let f = snell_oracle(Some(Arc::new(|_, _| 0.0)), Arc::new(|_| 0.0), &tree(2)).unwrap();
        assert!(f.y_at(0).iter().all(|v| *v == 0.0));
        assert_eq!(f.mean_k(2), 0.0);
    }

    #[test]
    fn bruteforce_trivial_cases() {
        let cfg = SolverConfig::tree();
        let f = tree_bruteforce(&builtin_problem("linear-drift").unwrap(), &tree(3), &cfg).unwrap();
        assert!((f.mean_y(0) - 3.0).abs() < 1e-13);
        let noise = tree(3);
        let f = tree_bruteforce(&builtin_problem("additive-backward").unwrap(), &noise, &cfg).unwrap();
        for p in 0..noise.paths() {
            for i in 0..=3 {
                assert!((f.y(i, p) - noise.b_tail(i, p)[0]).abs() < 1e-13);
            }
        }
        assert!(matches!(
            tree_bruteforce(&builtin_problem("linear-drift").unwrap(), &tree(7), &cfg),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn reversed_drift_refused() {
        let case = violated_case().unwrap();
        let err = compare(&case, &tree(2), &SchemeConfig::default(), 1e-10).unwrap_err();
        assert!(matches!(err, Error::HypothesisRefused { .. }), "{err}");
    }

    #[test]
    fn constant_drift_gap() {
        let bank = comparison_bank().unwrap();
        let r = compare(&bank[0], &tree(4), &SchemeConfig::default(), 1e-10).unwrap();
        assert_eq!(r.count, 0);
        assert!((r.y0_gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positivity_rejects_negative_inputs() {
        let cfg = SolverConfig::tree();
        assert!(matches!(
            lemma_positivity(|_| -1.0, |_| 0.0, MinorantSpec::zero(), &tree(2), &cfg),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            lemma_positivity(|_| 1.0, |w| w[0], MinorantSpec::zero(), &tree(2), &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn drift_only_positivity_is_exact() {
        let noise = tree(4);
        let s = &lemma_scenarios()[0];
        let r = run_lemma_scenario(s, &noise, &SolverConfig::tree()).unwrap();
        assert_eq!(r.min_free, 0.0);
        assert_eq!(r.min_reflected, 0.0);
    }
}
