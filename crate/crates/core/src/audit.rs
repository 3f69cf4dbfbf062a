//! Falsification-only checks of the standing hypotheses on sampled points.
//!
//! A `Pass` verdict means no counterexample was found within the sample
//! budget. Continuity checks evaluate `f` at nested dyadic offsets
//! `2^-k * max(1, |y|)` and flag a jump when the finest offset still moves
//! the value by more than `jump_tol * (1 + |f|)`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, Witness};
use crate::model::{norm, ProblemSpec};
use crate::noise::{make_grid, sample_noise};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hypothesis {
    /// Lipschitz in `(y, z)` with the declared constant.
    H0,
    /// Continuous in `(y, z)`.
    H1,
    /// Linear growth `|f| <= phi_t + kappa (|y| + |z|)`.
    H2,
    /// Left-continuous nondecreasing in `y`, continuous in `z`.
    H3,
    /// Minorant growth and `f(y1,z1) - f(y2,z2) >= h(y1-y2, z1-z2)` for `y1 >= y2`.
    H4,
    /// Terminal value finite on audited paths.
    H5,
    /// Obstacle finite and `S_T <= xi` on audited paths.
    H6,
    /// `|g1 - g2|^2 <= C |dy|^2 + alpha |dz|^2`.
    H7,
    /// `g(t, 0, 0) == 0`.
    H7Origin,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 9] = [
        Hypothesis::H0,
        Hypothesis::H1,
        Hypothesis::H2,
        Hypothesis::H3,
        Hypothesis::H4,
        Hypothesis::H5,
        Hypothesis::H6,
        Hypothesis::H7,
        Hypothesis::H7Origin,
    ];
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H5 => "H5",
            Hypothesis::H6 => "H6",
            Hypothesis::H7 => "H7",
            Hypothesis::H7Origin => "H7-origin",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Violated(Witness),
    NotCheckable(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Violated(_) => "violated",
            Verdict::NotCheckable(_) => "not-checkable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub horizon: f64,
    pub y_box: (f64, f64),
    pub z_box: (f64, f64),
    /// Paths sampled for the `xi` / `S` checks.
    pub paths: usize,
    /// Steps of the grid those paths live on.
    pub steps: usize,
    pub jump_tol: f64,
    /// Finest dyadic exponent for continuity probes.
    pub finest_offset: i32,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            horizon: 1.0,
            y_box: (-5.0, 5.0),
            z_box: (-5.0, 5.0),
            paths: 256,
            steps: 8,
            jump_tol: 1e-5,
            finest_offset: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub verdicts: Vec<(Hypothesis, Verdict)>,
    /// Number of `(t, y, z)` points drawn.
    pub samples: usize,
}

impl AssumptionReport {
    pub fn verdict(&self, h: Hypothesis) -> &Verdict {
        &self.verdicts.iter().find(|(k, _)| *k == h).expect("every hypothesis is audited").1
    }

    /// First violated hypothesis among `required`.
    pub fn first_violation(&self, required: &[Hypothesis]) -> Option<(Hypothesis, &Witness)> {
        required.iter().find_map(|h| match self.verdict(*h) {
            Verdict::Violated(w) => Some((*h, w)),
            _ => None,
        })
    }

    /// `Err(HypothesisRefused)` unless every hypothesis in `required` passes.
    /// A not-checkable verdict on a required hypothesis also refuses.
    pub fn require(&self, required: &[Hypothesis]) -> Result<()> {
        for h in required {
            match self.verdict(*h) {
                Verdict::Pass => {}
                Verdict::Violated(w) => {
                    return Err(Error::HypothesisRefused { hypothesis: h.to_string(), witness: w.clone() })
                }
                Verdict::NotCheckable(why) => {
                    return Err(Error::Precondition(format!("{h} is not checkable: {why}")))
                }
            }
        }
        Ok(())
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    cfg: AuditConfig,
    dim: usize,
}

impl Sampler {
    fn t(&mut self) -> f64 {
        self.rng.random_range(0.0..=self.cfg.horizon)
    }

    fn y(&mut self) -> f64 {
        let (a, b) = self.cfg.y_box;
        self.rng.random_range(a..=b)
    }

    fn z(&mut self) -> Vec<f64> {
        let (a, b) = self.cfg.z_box;
        (0..self.dim).map(|_| self.rng.random_range(a..=b)).collect()
    }

    /// Points with `y` forced onto 0 and a few dyadics every few draws, where
    /// jumps of the bank's step generators sit.
    fn point(&mut self, k: usize) -> (f64, f64, Vec<f64>) {
        let t = self.t();
        let y = match k % 8 {
            0 => 0.0,
            4 => [0.5, -0.5, 1.0, -1.0][(k / 8) % 4],
            _ => self.y(),
        };
        let z = if k.is_multiple_of(16) { vec![0.0; self.dim] } else { self.z() };
        (t, y, z)
    }
}

const ROUNDING: f64 = 1e-12;

fn offsets(finest: i32, y: f64) -> impl Iterator<Item = f64> {
    let scale = y.abs().max(1.0);
    (10..=finest).step_by(10).map(move |k| scale * 2f64.powi(-k))
}

fn jumps(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() > tol * (1.0 + a.abs().max(b.abs()))
}

pub fn audit_assumptions(spec: &ProblemSpec, budget: usize, seed: u64) -> Result<AssumptionReport> {
    audit_with(spec, budget, seed, &AuditConfig::default())
}

pub fn audit_with(
    spec: &ProblemSpec,
    budget: usize,
    seed: u64,
    cfg: &AuditConfig,
) -> Result<AssumptionReport> {
    if budget == 0 {
        return Err(Error::InvalidParameter("audit budget must be >= 1".into()));
    }
    let mut s = Sampler { rng: ChaCha8Rng::seed_from_u64(seed), cfg: cfg.clone(), dim: spec.dim_w };
    let gen = &spec.generator;
    let f = |t: f64, y: f64, z: &[f64]| gen.eval(t, y, z);

    let mut h0 = match gen.lipschitz_c {
        Some(_) => Verdict::Pass,
        None => Verdict::NotCheckable("no Lipschitz constant declared".into()),
    };
    let mut h1 = Verdict::Pass;
    let mut h2 = Verdict::Pass;
    let mut h3 = Verdict::Pass;
    let mut h4 = match spec.minorant {
        Some(_) => Verdict::Pass,
        None => Verdict::NotCheckable("no minorant h supplied".into()),
    };
    let mut h7 = Verdict::Pass;
    let mut h7_origin = Verdict::Pass;
    let set = |v: &mut Verdict, w: Witness| {
        if v.is_pass() {
            *v = Verdict::Violated(w);
        }
    };

    let l = spec.dim_b();
    let mut g1 = vec![0.0; l];
    let mut g2 = vec![0.0; l];

    for k in 0..budget {
        let (t, y, z) = s.point(k);
        let fy = f(t, y, &z);
        let point = || Witness::Point { t, y, z: z.clone() };

        if !fy.is_finite() {
            set(&mut h2, point());
            continue;
        }

        // H2
        let bound = (gen.phi)(t) + gen.kappa * (y.abs() + norm(&z));
        if fy.abs() > bound * (1.0 + ROUNDING) + ROUNDING {
            set(&mut h2, point());
        }

        // H1 / H3 continuity probes
        let mut right_jump = false;
        let mut left_jump = false;
        let mut z_jump = false;
        if let Some(d) = offsets(cfg.finest_offset, y).last() {
            left_jump = jumps(f(t, y - d, &z), fy, cfg.jump_tol);
            right_jump = jumps(f(t, y + d, &z), fy, cfg.jump_tol);
            let zp: Vec<f64> = z.iter().map(|v| v + d).collect();
            let zm: Vec<f64> = z.iter().map(|v| v - d).collect();
            z_jump = jumps(f(t, y, &zp), fy, cfg.jump_tol) || jumps(f(t, y, &zm), fy, cfg.jump_tol);
        }
        if left_jump || right_jump || z_jump {
            set(&mut h1, point());
        }
        if left_jump || z_jump {
            set(&mut h3, point());
        }

        // Pair checks at the same t.
        let (mut y2, z2) = (s.y(), s.z());
        if k % 4 == 2 {
            // straddle the current point closely
            y2 = y - 2f64.powi(-(k as i32 % 30) - 1);
        }
        let same_z = k % 2 == 0;
        let z2 = if same_z { z.clone() } else { z2 };
        let (hi_y, hi_z, lo_y, lo_z) =
            if y >= y2 { (y, z.clone(), y2, z2.clone()) } else { (y2, z2.clone(), y, z.clone()) };
        let f_hi = f(t, hi_y, &hi_z);
        let f_lo = f(t, lo_y, &lo_z);
        let pair = || Witness::Pair { t, y1: hi_y, z1: hi_z.clone(), y2: lo_y, z2: lo_z.clone() };
        let dz: Vec<f64> = hi_z.iter().zip(&lo_z).map(|(a, b)| a - b).collect();
        let scale = 1.0 + f_hi.abs().max(f_lo.abs());

        if let Some(c) = gen.lipschitz_c {
            if (f_hi - f_lo).abs() > c * ((hi_y - lo_y) + norm(&dz)) * (1.0 + ROUNDING) + ROUNDING * scale {
                set(&mut h0, pair());
            }
        }
        if same_z && f_hi < f_lo - ROUNDING * scale {
            set(&mut h3, pair());
        }
        if let Some(h) = &spec.minorant {
            let hv = h.eval(hi_y - lo_y, &dz);
            if f_hi - f_lo < hv - ROUNDING * scale {
                set(&mut h4, pair());
            }
            let hz = h.eval(y, &z);
            if hz.abs() > gen.kappa * (y.abs() + norm(&z)) * (1.0 + ROUNDING) + ROUNDING {
                set(&mut h4, point());
            }
        }

        // H7 on the same pair.
        spec.diffusion.eval(t, hi_y, &hi_z, &mut g1);
        spec.diffusion.eval(t, lo_y, &lo_z, &mut g2);
        let lhs: f64 = g1.iter().zip(&g2).map(|(a, b)| (a - b) * (a - b)).sum();
        let dz2: f64 = dz.iter().map(|v| v * v).sum();
        let rhs = spec.diffusion.g_c * (hi_y - lo_y).powi(2) + spec.diffusion.alpha * dz2;
        if lhs > rhs * (1.0 + ROUNDING) + ROUNDING * (1.0 + lhs) {
            set(&mut h7, pair());
        }
        let zeros = vec![0.0; spec.dim_w];
        spec.diffusion.eval(t, 0.0, &zeros, &mut g1);
        if g1.iter().any(|v| *v != 0.0) {
            set(&mut h7_origin, Witness::Point { t, y: 0.0, z: zeros });
        }
    }

    // H5 / H6 on sampled Brownian paths.
    let grid = make_grid(cfg.horizon, cfg.steps.max(1))?;
    let noise = sample_noise(&grid, cfg.paths.max(1), spec.dim_w, spec.dim_b(), seed ^ 0x5eed)?;
    let n = grid.steps();
    let mut h5 = Verdict::Pass;
    let mut h6 = Verdict::Pass;
    for p in 0..noise.paths() {
        let xi = spec.terminal_value(noise.w(n, p));
        if !xi.is_finite() {
            set(&mut h5, Witness::Path { path: p });
            continue;
        }
        if spec.obstacle.is_some() {
            let s_t = spec.obstacle_value(grid.node(n), noise.w(n, p)).unwrap();
            if !(s_t <= xi) {
                set(&mut h6, Witness::Path { path: p });
            }
            for i in 0..n {
                if !spec.obstacle_value(grid.node(i), noise.w(i, p)).unwrap().is_finite() {
                    set(&mut h6, Witness::PathStep { path: p, step: i });
                }
            }
        }
    }

    Ok(AssumptionReport {
        verdicts: vec![
            (Hypothesis::H0, h0),
            (Hypothesis::H1, h1),
            (Hypothesis::H2, h2),
            (Hypothesis::H3, h3),
            (Hypothesis::H4, h4),
            (Hypothesis::H5, h5),
            (Hypothesis::H6, h6),
            (Hypothesis::H7, h7),
            (Hypothesis::H7Origin, h7_origin),
        ],
        samples: budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_problem, DiffusionSpec, GeneratorSpec, MinorantSpec, Regularity};

    fn scalar(f: impl Fn(f64) -> f64 + Send + Sync + 'static, kappa: f64) -> ProblemSpec {
        let g = GeneratorSpec::new(move |_, y, _| f(y), kappa, |_| 1.0, Regularity::LeftContinuousNondecreasing);
        ProblemSpec::new("t", g, DiffusionSpec::zero(1), |_| 0.0, 1)
    }

    #[test]
    fn strict_step_is_left_continuous() {
        let r = audit_assumptions(&scalar(|y| if y > 0.0 { 1.0 } else { 0.0 }, 0.1), 400, 1).unwrap();
        assert!(r.verdict(Hypothesis::H2).is_pass());
        assert!(r.verdict(Hypothesis::H3).is_pass());
        match r.verdict(Hypothesis::H1) {
            Verdict::Violated(Witness::Point { y, .. }) => assert_eq!(*y, 0.0),
            v => panic!("expected H1 violation, got {v:?}"),
        }
    }

    #[test]
    fn closed_step_breaks_left_continuity() {
        let r = audit_assumptions(&scalar(|y| if y >= 0.0 { 1.0 } else { 0.0 }, 0.1), 400, 1).unwrap();
        match r.verdict(Hypothesis::H3) {
            Verdict::Violated(Witness::Point { y, .. }) => assert!(y.abs() < 1e-6),
            v => panic!("expected H3 violation, got {v:?}"),
        }
    }

    #[test]
    fn zero_generator_passes_everything() {
        let g = GeneratorSpec::new(|_, _, _| 0.0, 0.3, |_| 0.0, Regularity::Lipschitz).with_lipschitz(0.3);
        let spec = ProblemSpec::new("zero", g, DiffusionSpec::zero(1), |_| 0.0, 1)
            .with_minorant(MinorantSpec::zero());
        let r = audit_assumptions(&spec, 300, 3).unwrap();
        for h in Hypothesis::ALL {
            assert!(r.verdict(h).is_pass(), "{h}: {:?}", r.verdict(h));
        }
    }

    #[test]
    fn decreasing_function_fails_monotonicity() {
        let r = audit_assumptions(&scalar(|y| -y.clamp(-1.0, 1.0), 1.0), 200, 5).unwrap();
        assert!(matches!(r.verdict(Hypothesis::H3), Verdict::Violated(Witness::Pair { .. })));
    }

    #[test]
    fn growth_violation_found() {
        let r = audit_assumptions(&scalar(|y| y * y, 0.5), 200, 5).unwrap();
        assert!(matches!(r.verdict(Hypothesis::H2), Verdict::Violated(_)));
    }

    #[test]
    fn bank_examples() {
        let step = builtin_problem("step-generator").unwrap();
        let r = audit_assumptions(&step, 500, 11).unwrap();
        for h in [Hypothesis::H2, Hypothesis::H3, Hypothesis::H4, Hypothesis::H5, Hypothesis::H6, Hypothesis::H7] {
            assert!(r.verdict(h).is_pass(), "{h}: {:?}", r.verdict(h));
        }
        assert!(matches!(r.verdict(Hypothesis::H0), Verdict::NotCheckable(_)));

        let snell = builtin_problem("snell-only").unwrap();
        assert!(audit_assumptions(&snell, 100, 1).unwrap().verdict(Hypothesis::H6).is_pass());

        let add = builtin_problem("additive-backward").unwrap();
        let r = audit_assumptions(&add, 200, 1).unwrap();
        assert!(r.verdict(Hypothesis::H7).is_pass());
        assert!(matches!(r.verdict(Hypothesis::H7Origin), Verdict::Violated(_)));

        let lm = builtin_problem("lipschitz-markov").unwrap();
        let r = audit_assumptions(&lm, 500, 2).unwrap();
        assert!(matches!(r.verdict(Hypothesis::H3), Verdict::Violated(_)));
        for h in Hypothesis::ALL.into_iter().filter(|h| *h != Hypothesis::H3) {
            assert!(r.verdict(h).is_pass(), "{h}: {:?}", r.verdict(h));
        }
    }

    #[test]
    fn obstacle_above_terminal_is_caught() {
        let spec = builtin_problem("snell-only").unwrap().with_obstacle(|t, _| 1.0 - t + 0.5);
        let r = audit_assumptions(&spec, 10, 1).unwrap();
        assert!(matches!(r.verdict(Hypothesis::H6), Verdict::Violated(Witness::Path { .. })));
    }

    #[test]
    fn minorant_violation_found() {
        // f = -y is decreasing, so h = 0 is not a minorant.
        let g = GeneratorSpec::new(|_, y, _| -y, 1.0, |_| 0.0, Regularity::Lipschitz).with_lipschitz(1.0);
        let spec = ProblemSpec::new("dec", g, DiffusionSpec::zero(1), |_| 0.0, 1)
            .with_minorant(MinorantSpec::zero());
        let r = audit_assumptions(&spec, 100, 1).unwrap();
        assert!(matches!(r.verdict(Hypothesis::H4), Verdict::Violated(Witness::Pair { .. })));
        let ok = spec.with_minorant(MinorantSpec::negative_abs(1.0));
        assert!(audit_assumptions(&ok, 300, 1).unwrap().verdict(Hypothesis::H4).is_pass());
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(audit_assumptions(&builtin_problem("snell-only").unwrap(), 0, 1).is_err());
    }
}
