//! Problem data `(f, g, xi, S)`, the minorant `h`, and the bank of worked
//! examples.
//!
//! Every coefficient is a pure closure behind an `Arc`, so a spec can be
//! cloned cheaply and evaluated concurrently from path-parallel loops.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `f(t, y, z)`.
pub type ScalarFn = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;
/// `g(t, y, z)` written into an output slice of length `l`.
pub type VectorFn = Arc<dyn Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `h(y, z)`.
pub type MinorantFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
/// `xi` as a function of `W_T`.
pub type TerminalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `S_t` as a function of `(t, W_t)`.
pub type ObstacleFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

pub(crate) fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Declared regularity of `f` in `y`; selects how the generator is solved and
/// which envelope direction regularizes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    /// Globally Lipschitz in `(y, z)`.
    Lipschitz,
    /// Continuous in `(y, z)`.
    Continuous,
    /// Left-continuous and nondecreasing in `y`, continuous in `z`.
    LeftContinuousNondecreasing,
    /// Right-continuous in `y`; the maximal solution is reached through the
    /// mirror `y -> -y`, whose generator must be left-continuous nondecreasing.
    RightContinuous,
}

#[derive(Clone)]
pub struct GeneratorSpec {
    pub f: ScalarFn,
    /// Deterministic growth bound `phi_t`.
    pub phi: TimeFn,
    pub kappa: f64,
    pub lipschitz_c: Option<f64>,
    pub regularity: Regularity,
    /// `false` when `f` ignores `z`; lets envelope caches key on `t` alone.
    pub depends_on_z: bool,
}

impl GeneratorSpec {
    pub fn new(
        f: impl Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static,
        kappa: f64,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        regularity: Regularity,
    ) -> Self {
        GeneratorSpec {
            f: Arc::new(f),
            phi: Arc::new(phi),
            kappa,
            lipschitz_c: None,
            regularity,
            depends_on_z: true,
        }
    }

    pub fn with_lipschitz(mut self, c: f64) -> Self {
        self.lipschitz_c = Some(c);
        self
    }

    pub fn z_free(mut self) -> Self {
        self.depends_on_z = false;
        self
    }

    /// `f == c` with growth `phi == |c|`.
    pub fn constant(c: f64, kappa: f64) -> Self {
        GeneratorSpec::new(move |_, _, _| c, kappa, move |_| c.abs(), Regularity::Lipschitz)
            .with_lipschitz(kappa)
            .z_free()
    }

    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        (self.f)(t, y, z)
    }
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("kappa", &self.kappa)
            .field("lipschitz_c", &self.lipschitz_c)
            .field("regularity", &self.regularity)
            .field("depends_on_z", &self.depends_on_z)
            .finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct DiffusionSpec {
    pub g: VectorFn,
    /// Output dimension `l`.
    pub dim: usize,
    pub g_c: f64,
    pub alpha: f64,
    /// `true` when `g` is identically zero; the solver skips the backward
    /// integral entirely.
    pub vanishes: bool,
}

impl DiffusionSpec {
    pub fn new(
        g: impl Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        dim: usize,
        g_c: f64,
        alpha: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("diffusion dimension must be >= 1".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(g_c >= 0.0) {
            return Err(Error::InvalidParameter(format!("g_c must be >= 0, got {g_c}")));
        }
        Ok(DiffusionSpec { g: Arc::new(g), dim, g_c, alpha, vanishes: false })
    }

    pub fn zero(dim: usize) -> Self {
        DiffusionSpec {
            g: Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0)),
            dim,
            g_c: 0.0,
            alpha: 0.5,
            vanishes: true,
        }
    }

    /// `g == value` in every coordinate.
    pub fn constant(value: f64, dim: usize) -> Self {
        DiffusionSpec {
            g: Arc::new(move |_, _, _, out: &mut [f64]| out.fill(value)),
            dim,
            g_c: 0.0,
            alpha: 0.5,
            vanishes: value == 0.0,
        }
    }

    /// `g = coef * y` in every coordinate.
    pub fn linear_in_y(coef: f64, dim: usize) -> Self {
        DiffusionSpec {
            g: Arc::new(move |_, y, _, out: &mut [f64]| out.fill(coef * y)),
            dim,
            g_c: coef * coef * dim as f64,
            alpha: 0.5,
            vanishes: coef == 0.0,
        }
    }

    pub fn eval(&self, t: f64, y: f64, z: &[f64], out: &mut [f64]) {
        (self.g)(t, y, z, out)
    }
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("dim", &self.dim)
            .field("g_c", &self.g_c)
            .field("alpha", &self.alpha)
            .finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct MinorantSpec {
    pub h: MinorantFn,
    /// Lipschitz constant of `h`; bounds the contraction factor of every
    /// iteration step.
    pub lipschitz: f64,
}

impl MinorantSpec {
    pub fn new(h: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static, lipschitz: f64) -> Self {
        MinorantSpec { h: Arc::new(h), lipschitz }
    }

    pub fn zero() -> Self {
        MinorantSpec::new(|_, _| 0.0, 0.0)
    }

    /// `h(y, z) = -c (|y| + |z|)`.
    pub fn negative_abs(c: f64) -> Self {
        MinorantSpec::new(move |y, z| -c * (y.abs() + norm(z)), c)
    }

    pub fn eval(&self, y: f64, z: &[f64]) -> f64 {
        (self.h)(y, z)
    }
}

impl fmt::Debug for MinorantSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MinorantSpec").field("lipschitz", &self.lipschitz).finish_non_exhaustive()
    }
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub generator: GeneratorSpec,
    pub diffusion: DiffusionSpec,
    pub minorant: Option<MinorantSpec>,
    pub terminal: TerminalFn,
    pub obstacle: Option<ObstacleFn>,
    pub dim_w: usize,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("generator", &self.generator)
            .field("diffusion", &self.diffusion)
            .field("minorant", &self.minorant)
            .field("obstacle", &self.obstacle.is_some())
            .field("dim_w", &self.dim_w)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        generator: GeneratorSpec,
        diffusion: DiffusionSpec,
        terminal: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        dim_w: usize,
    ) -> Self {
        ProblemSpec {
            name: name.into(),
            generator,
            diffusion,
            minorant: None,
            terminal: Arc::new(terminal),
            obstacle: None,
            dim_w,
        }
    }

    pub fn with_minorant(mut self, h: MinorantSpec) -> Self {
        self.minorant = Some(h);
        self
    }

    pub fn with_obstacle(mut self, s: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.obstacle = Some(Arc::new(s));
        self
    }

    pub fn without_obstacle(mut self) -> Self {
        self.obstacle = None;
        self
    }

    pub fn with_terminal(mut self, xi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.terminal = Arc::new(xi);
        self
    }

    pub fn with_generator(mut self, generator: GeneratorSpec) -> Self {
        self.generator = generator;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim_b(&self) -> usize {
        self.diffusion.dim
    }

    pub fn terminal_value(&self, w_t: &[f64]) -> f64 {
        (self.terminal)(w_t)
    }

    pub fn obstacle_value(&self, t: f64, w: &[f64]) -> Option<f64> {
        self.obstacle.as_ref().map(|s| s(t, w))
    }

    /// The problem seen through `Y -> -Y`, `Z -> -Z`:
    /// `f~(t,y,z) = -f(t,-y,-z)`, `g~(t,y,z) = -g(t,-y,-z)`, `xi~ = -xi`.
    ///
    /// The minorant carries over unchanged. A lower obstacle would turn into
    /// an upper barrier, so obstacles are rejected.
    pub fn mirrored(&self) -> Result<ProblemSpec> {
        if self.obstacle.is_some() {
            return Err(Error::Unsupported(
                "the mirror transform turns a lower obstacle into an upper barrier".into(),
            ));
        }
        let f = self.generator.f.clone();
        let mirror_f = move |t: f64, y: f64, z: &[f64]| {
            let nz: Vec<f64> = z.iter().map(|v| -v).collect();
            -f(t, -y, &nz)
        };
        let regularity = match self.generator.regularity {
            Regularity::RightContinuous => Regularity::LeftContinuousNondecreasing,
            Regularity::LeftContinuousNondecreasing => Regularity::RightContinuous,
            other => other,
        };
        let generator = GeneratorSpec {
            f: Arc::new(mirror_f),
            phi: self.generator.phi.clone(),
            kappa: self.generator.kappa,
            lipschitz_c: self.generator.lipschitz_c,
            regularity,
            depends_on_z: self.generator.depends_on_z,
        };
        let g = self.diffusion.g.clone();
        let diffusion = DiffusionSpec {
            g: Arc::new(move |t, y, z: &[f64], out: &mut [f64]| {
                let nz: Vec<f64> = z.iter().map(|v| -v).collect();
                g(t, -y, &nz, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }),
            ..self.diffusion.clone()
        };
        let xi = self.terminal.clone();
        Ok(ProblemSpec {
            name: format!("mirror({})", self.name),
            generator,
            diffusion,
            minorant: self.minorant.clone(),
            terminal: Arc::new(move |w| -xi(w)),
            obstacle: None,
            dim_w: self.dim_w,
        })
    }
}

/// Names accepted by [`builtin_problem`].
pub const BANK: &[&str] = &[
    "step-generator",
    "snell-only",
    "additive-backward",
    "linear-drift",
    "lipschitz-markov",
    "sqrt-generator",
    "reverse-step",
];

/// Overrides applied on top of a bank problem's defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BankParams {
    pub kappa: Option<f64>,
    pub phi: Option<f64>,
    /// Constant drift `c` of `linear-drift`.
    pub drift: Option<f64>,
    /// Constant terminal value, for problems whose terminal is a constant.
    pub terminal: Option<f64>,
    /// Added to the obstacle when one is present.
    pub obstacle_shift: Option<f64>,
}

pub fn builtin_problem(name: &str) -> Result<ProblemSpec> {
    builtin_problem_with(name, &BankParams::default())
}

pub fn builtin_problem_with(name: &str, params: &BankParams) -> Result<ProblemSpec> {
    let kappa = |default: f64| params.kappa.unwrap_or(default);
    let phi = |default: f64| params.phi.unwrap_or(default);
    let xi0 = |default: f64| params.terminal.unwrap_or(default);
    let shift = params.obstacle_shift.unwrap_or(0.0);

    let spec = match name {
        "step-generator" => {
            let phi = phi(1.0);
            let g = GeneratorSpec::new(
                |_, y, _| if y > 0.0 { 1.0 } else { 0.0 },
                kappa(0.1),
                move |_| phi,
                Regularity::LeftContinuousNondecreasing,
            )
            .z_free();
            let xi = xi0(0.0);
            ProblemSpec::new(name, g, DiffusionSpec::zero(1), move |_| xi, 1)
                .with_minorant(MinorantSpec::zero())
                .with_obstacle(move |_, _| -5.0 + shift)
        }
        "snell-only" => {
            let k = kappa(0.1);
            let phi = phi(0.0);
            let g = GeneratorSpec::new(|_, _, _| 0.0, k, move |_| phi, Regularity::Lipschitz)
                .with_lipschitz(k)
                .z_free();
            let xi = xi0(0.0);
            ProblemSpec::new(name, g, DiffusionSpec::zero(1), move |_| xi, 1)
                .with_minorant(MinorantSpec::zero())
                .with_obstacle(move |t, _| 1.0 - t + shift)
        }
        "additive-backward" => {
            let k = kappa(0.1);
            let phi = phi(0.0);
            let g = GeneratorSpec::new(|_, _, _| 0.0, k, move |_| phi, Regularity::Lipschitz)
                .with_lipschitz(k)
                .z_free();
            let xi = xi0(0.0);
            ProblemSpec::new(name, g, DiffusionSpec::constant(1.0, 1), move |_| xi, 1)
                .with_minorant(MinorantSpec::zero())
        }
        "linear-drift" => {
            let c = params.drift.unwrap_or(1.0);
            let k = kappa(0.1);
            let phi = phi(c.abs());
            let g = GeneratorSpec::new(move |_, _, _| c, k, move |_| phi, Regularity::Lipschitz)
                .with_lipschitz(k)
                .z_free();
            let xi = xi0(2.0);
            ProblemSpec::new(name, g, DiffusionSpec::zero(1), move |_| xi, 1)
                .with_minorant(MinorantSpec::zero())
        }
        "lipschitz-markov" => {
            let phi = phi(0.0);
            let g = GeneratorSpec::new(
                |_, y, z| -y + z[0],
                kappa(1.0),
                move |_| phi,
                Regularity::Lipschitz,
            )
            .with_lipschitz(1.0);
            let terminal: TerminalFn = match params.terminal {
                Some(v) => Arc::new(move |_| v),
                None => Arc::new(|w: &[f64]| w[0].cos()),
            };
            let mut spec = ProblemSpec::new(
                name,
                g,
                DiffusionSpec::linear_in_y(0.3, 1),
                |_| 0.0,
                1,
            )
            .with_minorant(MinorantSpec::negative_abs(1.0))
            .with_obstacle(move |_, _| -2.0 + shift);
            spec.terminal = terminal;
            spec
        }
        "sqrt-generator" => {
            let phi = phi(1.0);
            let g = GeneratorSpec::new(
                |_, y, _| y.max(0.0).sqrt().min(1.0),
                kappa(0.1),
                move |_| phi,
                Regularity::LeftContinuousNondecreasing,
            )
            .z_free();
            let xi = xi0(0.0);
            ProblemSpec::new(name, g, DiffusionSpec::zero(1), move |_| xi, 1)
                .with_minorant(MinorantSpec::zero())
                .with_obstacle(move |_, _| -5.0 + shift)
        }
        "reverse-step" => {
            let phi = phi(1.0);
            let g = GeneratorSpec::new(
                |_, y, _| if y < 0.0 { -1.0 } else { 0.0 },
                kappa(0.1),
                move |_| phi,
                Regularity::RightContinuous,
            )
            .z_free();
            let xi = xi0(0.0);
            ProblemSpec::new(name, g, DiffusionSpec::zero(1), move |_| xi, 1)
                .with_minorant(MinorantSpec::zero())
        }
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_names_resolve() {
        for name in BANK {
            let spec = builtin_problem(name).unwrap();
            assert_eq!(spec.name, *name);
        }
        assert!(matches!(builtin_problem("nope"), Err(Error::UnknownProblem(_))));
    }

    #[test]
    fn mirror_is_an_involution_on_values() {
        let spec = builtin_problem("lipschitz-markov").unwrap().without_obstacle();
        let twice = spec.mirrored().unwrap().mirrored().unwrap();
        for &(t, y, z) in &[(0.1, 0.3, -0.2), (0.7, -1.5, 2.0)] {
            assert_eq!(spec.generator.eval(t, y, &[z]), twice.generator.eval(t, y, &[z]));
            let (mut a, mut b) = ([0.0], [0.0]);
            spec.diffusion.eval(t, y, &[z], &mut a);
            twice.diffusion.eval(t, y, &[z], &mut b);
            assert_eq!(a, b);
        }
        assert_eq!(spec.terminal_value(&[0.4]), twice.terminal_value(&[0.4]));
    }

    #[test]
    fn mirror_rejects_obstacle() {
        let spec = builtin_problem("step-generator").unwrap();
        assert!(matches!(spec.mirrored(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn reverse_step_mirrors_to_step() {
        let m = builtin_problem("reverse-step").unwrap().mirrored().unwrap();
        let step = builtin_problem("step-generator").unwrap();
        for y in [-1.0, -1e-9, 0.0, 1e-9, 2.0] {
            assert_eq!(m.generator.eval(0.0, y, &[0.0]), step.generator.eval(0.0, y, &[0.0]));
        }
        assert_eq!(m.generator.regularity, Regularity::LeftContinuousNondecreasing);
    }

    #[test]
    fn diffusion_rejects_bad_alpha() {
        assert!(DiffusionSpec::new(|_, _, _, o: &mut [f64]| o.fill(0.0), 1, 1.0, 1.0).is_err());
        assert!(DiffusionSpec::new(|_, _, _, o: &mut [f64]| o.fill(0.0), 1, 1.0, 0.0).is_err());
        assert!(DiffusionSpec::new(|_, _, _, o: &mut [f64]| o.fill(0.0), 0, 1.0, 0.5).is_err());
    }

    #[test]
    fn params_override_defaults() {
        let p = BankParams { drift: Some(3.0), terminal: Some(-1.0), ..Default::default() };
        let spec = builtin_problem_with("linear-drift", &p).unwrap();
        assert_eq!(spec.generator.eval(0.0, 5.0, &[0.0]), 3.0);
        assert_eq!(spec.terminal_value(&[0.0]), -1.0);
    }
}
