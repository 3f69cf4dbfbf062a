//! Config-driven command runner behind the `rbdsde` binary.
//!
//! Each command writes CSV outputs into the output directory and then a
//! `manifest.json` listing them with their SHA-256 digests. A config that
//! fails to parse or validate writes nothing.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::audit::{audit_with, AuditConfig, Hypothesis};
use crate::condexp::{CondExpEngine, RegressionBasis};
use crate::dump::write_field;
use crate::envelope::{envelope, envelope_generator, Direction, EnvelopeGrid, EnvelopeParams, GridFunction1D};
use crate::error::{Error, Result};
use crate::model::{builtin_problem, builtin_problem_with, BankParams, ProblemSpec, Regularity, BANK};
use crate::noise::{enumerate_tree, make_grid, sample_noise, NoiseBundle, TREE_MAX_STEPS};
use crate::scheme::{diagnostics, iterate_maximal, iterate_minimal, SchemeConfig};
use crate::solver::{residual_check, solve_lipschitz, SolutionField, SolverConfig, YUpdate};
use crate::verify::{
    compare, comparison_bank, lemma_scenarios, max_discrepancy, run_lemma_scenario, snell_oracle, tree_bruteforce,
    violated_case,
};

/// Default output directory when neither `--out` nor this variable is set.
pub const OUT_DIR_ENV: &str = "RBDSDE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "rbdsde-out";
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Audit the problem's hypotheses on sampled points.
    CheckAssumptions,
    /// Tabulate Lipschitz envelopes of the generator at t = 0, z = 0.
    Envelope,
    /// Solve a Lipschitz (or envelope-regularized) problem.
    Solve,
    /// Run the monotone scheme towards the minimal (or maximal) solution.
    Iterate,
    /// Run the comparison case bank.
    Compare,
    /// Run the positivity scenarios.
    Lemma,
    /// Check the solver against the tree oracles.
    Oracle,
}

#[derive(Debug, Parser)]
#[command(name = "rbdsde", version, about = "Numerical lab for reflected BDSDEs with discontinuous generators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `noise.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory (default: $RBDSDE_OUT_DIR, then ./rbdsde-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Tree,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    Tree,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisName {
    Monomial,
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateName {
    Implicit,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub name: String,
    pub kappa: Option<f64>,
    pub phi: Option<f64>,
    pub drift: Option<f64>,
    pub terminal: Option<f64>,
    pub obstacle_shift: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            name: "step-generator".into(),
            kappa: None,
            phi: None,
            drift: None,
            terminal: None,
            obstacle_shift: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub horizon: f64,
    pub steps: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { horizon: 1.0, steps: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub mode: NoiseKind,
    pub paths: usize,
    pub seed: u64,
    pub dim_w: usize,
    pub dim_b: usize,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { mode: NoiseKind::Tree, paths: 10_000, seed: 0, dim_w: 1, dim_b: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// Defaults to `tree` on tree noise and `regression` otherwise.
    pub engine: Option<EngineKind>,
    pub y_update: UpdateName,
    pub basis: BasisName,
    pub degree: usize,
    pub ridge: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            engine: None,
            y_update: UpdateName::Implicit,
            basis: BasisName::Monomial,
            degree: 2,
            ridge: crate::condexp::DEFAULT_RIDGE,
            picard_tol: 1e-12,
            picard_max: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchemeSection {
    /// Defaults to 1e-10 (tree engine) or 1e-4 (regression).
    pub tol: Option<f64>,
    pub max_n: usize,
    /// Defaults to enforced 1e-12 (tree engine) or record-only (regression).
    pub monotone_tol: Option<f64>,
    pub envelope_n: Vec<f64>,
    pub y_min: f64,
    pub y_max: f64,
    pub points: usize,
}

impl Default for SchemeSection {
    fn default() -> Self {
        let g = EnvelopeGrid::default();
        SchemeSection {
            tol: None,
            max_n: 50,
            monotone_tol: None,
            envelope_n: vec![2.0, 8.0, 32.0],
            y_min: g.y_min,
            y_max: g.y_max,
            points: g.points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSection {
    pub budget: usize,
    pub y_box: [f64; 2],
    pub z_box: [f64; 2],
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection { budget: 256, y_box: [-5.0, 5.0], z_box: [-5.0, 5.0] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    /// Also write the full field as `field.bin`.
    pub dump: bool,
    /// Regularize a non-Lipschitz generator at this envelope level first.
    pub envelope_n: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Case ids from the bank, `all`, or `reversed-drift` (always refused).
    pub cases: Vec<String>,
    /// Defaults to 1e-10.
    pub tol: Option<f64>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection { cases: vec!["all".into()], tol: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub solver: SolverSection,
    pub scheme: SchemeSection,
    pub audit: AuditSection,
    pub solve: SolveSection,
    pub compare: CompareSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !BANK.contains(&self.problem.name.as_str()) {
            return bad(format!("unknown problem `{}`; expected one of {BANK:?}", self.problem.name));
        }
        if !(self.grid.horizon > 0.0 && self.grid.horizon.is_finite()) {
            return bad(format!("grid.horizon must be positive, got {}", self.grid.horizon));
        }
        if self.grid.steps == 0 {
            return bad("grid.steps must be >= 1".into());
        }
        if self.noise.dim_w != 1 || self.noise.dim_b != 1 {
            return bad("bank problems have d = l = 1; set noise.dim_w = noise.dim_b = 1".into());
        }
        match self.noise.mode {
            NoiseKind::Tree if self.grid.steps > TREE_MAX_STEPS => {
                return bad(format!("tree noise supports grid.steps <= {TREE_MAX_STEPS}"))
            }
            NoiseKind::Gaussian if self.noise.paths == 0 => return bad("noise.paths must be >= 1".into()),
            _ => {}
        }
        if !(self.solver.picard_tol > 0.0) || self.solver.picard_max == 0 {
            return bad("solver.picard_tol must be > 0 and solver.picard_max >= 1".into());
        }
        if !(self.solver.ridge >= 0.0) {
            return bad("solver.ridge must be >= 0".into());
        }
        if self.scheme.points < 2 || !(self.scheme.y_max > self.scheme.y_min) {
            return bad("scheme.points must be >= 2 on a proper [y_min, y_max]".into());
        }
        if self.scheme.envelope_n.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
            return bad("scheme.envelope_n entries must be positive".into());
        }
        if self.scheme.tol.is_some_and(|t| !(t >= 0.0)) {
            return bad("scheme.tol must be >= 0".into());
        }
        if self.audit.budget == 0 || !(self.audit.y_box[0] < self.audit.y_box[1]) || !(self.audit.z_box[0] < self.audit.z_box[1]) {
            return bad("audit.budget must be >= 1 and boxes proper intervals".into());
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        builtin_problem_with(
            &p.name,
            &BankParams {
                kappa: p.kappa,
                phi: p.phi,
                drift: p.drift,
                terminal: p.terminal,
                obstacle_shift: p.obstacle_shift,
            },
        )
    }

    pub fn noise(&self) -> Result<NoiseBundle> {
        let grid = make_grid(self.grid.horizon, self.grid.steps)?;
        match self.noise.mode {
            NoiseKind::Tree => enumerate_tree(&grid),
            NoiseKind::Gaussian => {
                sample_noise(&grid, self.noise.paths, self.noise.dim_w, self.noise.dim_b, self.noise.seed)
            }
        }
    }

    pub fn engine(&self) -> CondExpEngine {
        let kind = self.solver.engine.unwrap_or(match self.noise.mode {
            NoiseKind::Tree => EngineKind::Tree,
            NoiseKind::Gaussian => EngineKind::Regression,
        });
        match kind {
            EngineKind::Tree => CondExpEngine::Tree,
            EngineKind::Regression => {
                let basis = match self.solver.basis {
                    BasisName::Monomial => RegressionBasis::monomial(self.solver.degree),
                    BasisName::Indicator => RegressionBasis::indicator(),
                };
                CondExpEngine::Regression(basis.with_ridge(self.solver.ridge))
            }
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            y_update: match self.solver.y_update {
                UpdateName::Implicit => YUpdate::Implicit,
                UpdateName::Explicit => YUpdate::Explicit,
            },
            picard_tol: self.solver.picard_tol,
            picard_max: self.solver.picard_max,
            engine: self.engine(),
            reflect: true,
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let base = SchemeConfig::for_engine(self.engine());
        SchemeConfig {
            solver: self.solver_config(),
            tol: self.scheme.tol.unwrap_or(base.tol),
            max_n: self.scheme.max_n,
            monotone_tol: self.scheme.monotone_tol.or(base.monotone_tol),
        }
    }

    fn envelope_grid(&self) -> EnvelopeGrid {
        EnvelopeGrid { y_min: self.scheme.y_min, y_max: self.scheme.y_max, points: self.scheme.points }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// `None` when nothing was written.
    pub manifest: Option<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub error: Option<String>,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Default)]
struct Table {
    name: &'static str,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        Table { name, header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Default)]
struct CommandResult {
    files: Vec<(String, Vec<u8>)>,
    metrics: BTreeMap<String, Value>,
    /// Hypothesis refusals met while still producing output.
    refusal: Option<String>,
}

impl CommandResult {
    fn table(&mut self, t: &Table) -> Result<()> {
        self.files.push((format!("{}.csv", t.name), t.bytes()?));
        Ok(())
    }

    fn metric(&mut self, k: &str, v: impl Into<Value>) {
        self.metrics.insert(k.to_string(), v.into());
    }
}

fn summary_table(name: &'static str, field: &SolutionField, noise: &NoiseBundle) -> Table {
    let mut t = Table::new(name, &["t", "mean_y", "stderr_y", "mean_k", "mean_z_norm"]);
    for i in 0..=field.steps() {
        t.rows.push(vec![
            num(noise.grid().node(i)),
            num(field.mean_y(i)),
            num(field.stderr_y(i)),
            num(field.mean_k(i)),
            num(field.mean_z_norm(i)),
        ]);
    }
    t
}

fn cmd_check(cfg: &RunConfig, seed: u64) -> Result<CommandResult> {
    let spec = cfg.problem()?;
    let audit_cfg = AuditConfig {
        horizon: cfg.grid.horizon,
        y_box: (cfg.audit.y_box[0], cfg.audit.y_box[1]),
        z_box: (cfg.audit.z_box[0], cfg.audit.z_box[1]),
        ..AuditConfig::default()
    };
    let report = audit_with(&spec, cfg.audit.budget, seed, &audit_cfg)?;
    let mut t = Table::new("assumptions", &["hypothesis", "verdict", "detail"]);
    let mut violated = 0;
    for (h, v) in &report.verdicts {
        let detail = match v {
            crate::audit::Verdict::Pass => String::new(),
            crate::audit::Verdict::Violated(w) => {
                violated += 1;
                w.to_string()
            }
            crate::audit::Verdict::NotCheckable(why) => why.clone(),
        };
        t.rows.push(vec![h.to_string(), v.label().to_string(), detail]);
    }
    let mut out = CommandResult::default();
    out.table(&t)?;
    out.metric("samples", report.samples);
    out.metric("violated", violated);
    Ok(out)
}

fn cmd_envelope(cfg: &RunConfig) -> Result<CommandResult> {
    let spec = cfg.problem()?;
    let g = cfg.envelope_grid();
    let raw = GridFunction1D::tabulate(g.y_min, g.y_max, g.points, |y| spec.generator.eval(0.0, y, &[0.0]))?;
    let direction = Direction::for_regularity(spec.generator.regularity);
    let envs = cfg
        .scheme
        .envelope_n
        .iter()
        .map(|&n| envelope(&raw, EnvelopeParams { n, direction }))
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["y".to_string(), "f".to_string()];
    header.extend(cfg.scheme.envelope_n.iter().map(|n| format!("f_{n}")));
    let mut t = Table { name: "envelope", header, rows: Vec::new() };
    for k in 0..raw.len() {
        let mut row = vec![num(raw.node(k)), num(raw.values()[k])];
        row.extend(envs.iter().map(|e| num(e.values()[k])));
        t.rows.push(row);
    }
    let mut out = CommandResult::default();
    out.table(&t)?;
    out.metric("direction", format!("{direction:?}").to_lowercase());
    Ok(out)
}

fn cmd_solve(cfg: &RunConfig) -> Result<CommandResult> {
    let mut spec = cfg.problem()?;
    if let Some(n) = cfg.solve.envelope_n {
        let g = envelope_generator(&spec.generator, n, cfg.envelope_grid())?;
        spec = spec.with_generator(g);
    }
    let noise = cfg.noise()?;
    let solver = cfg.solver_config();
    let field = solve_lipschitz(&spec, &noise, &solver)?;
    let residual = residual_check(&spec, &noise, &field, &solver)?;
    let mut out = CommandResult::default();
    out.table(&summary_table("solve", &field, &noise))?;
    if cfg.solve.dump {
        let mut bytes = Vec::new();
        write_field(&mut bytes, &field, noise.dim_b())?;
        out.files.push(("field.bin".into(), bytes));
    }
    out.metric("y0_mean", field.mean_y(0));
    out.metric("y0_stderr", field.stderr_y(0));
    out.metric("residual_max_projected", residual.max_projected);
    out.metric("definition_holds", residual.definition.holds());
    out.metric("engine", field.engine());
    Ok(out)
}

fn cmd_iterate(cfg: &RunConfig, seed: u64) -> Result<CommandResult> {
    let spec = cfg.problem()?;
    let maximal = spec.generator.regularity == Regularity::RightContinuous;
    let audited = if maximal { spec.mirrored()? } else { spec.clone() };
    let order = if audited.generator.lipschitz_c.is_some() { Hypothesis::H0 } else { Hypothesis::H3 };
    let audit_cfg = AuditConfig { horizon: cfg.grid.horizon, ..AuditConfig::default() };
    audit_with(&audited, cfg.audit.budget, seed, &audit_cfg)?.require(&[
        order,
        Hypothesis::H2,
        Hypothesis::H4,
        Hypothesis::H5,
        Hypothesis::H6,
        Hypothesis::H7,
    ])?;
    let noise = cfg.noise()?;
    let scheme = cfg.scheme_config();
    let outcome = if maximal {
        iterate_maximal(&spec, &noise, &scheme)?
    } else {
        iterate_minimal(&spec, &noise, &scheme)?
    };
    let mut t = Table::new(
        "trace",
        &[
            "n",
            "delta",
            "z_energy",
            "monotone_margin",
            "y0_mean",
            "theta_norm",
            "floor_margin",
            "ceiling_margin",
        ],
    );
    for r in &outcome.trace {
        t.rows.push(vec![
            r.n.to_string(),
            num(r.delta),
            num(r.z_energy),
            num(r.monotone_margin),
            num(r.y0_mean),
            num(r.theta_norm),
            num(r.floor_margin),
            num(r.ceiling_margin),
        ]);
    }
    let d = diagnostics(&outcome.trace);
    let mut out = CommandResult::default();
    out.table(&t)?;
    out.table(&summary_table("iterate_solution", &outcome.field, &noise))?;
    out.metric("selection", if maximal { "maximal" } else { "minimal" });
    out.metric("converged", outcome.converged);
    out.metric("iterations", outcome.trace.len());
    out.metric("y0_mean", outcome.field.mean_y(0));
    out.metric("rho", d.rho.map_or(Value::Null, Value::from));
    out.metric("energy_bounded", d.energy_bounded);
    Ok(out)
}

fn cmd_compare(cfg: &RunConfig) -> Result<CommandResult> {
    let noise = cfg.noise()?;
    let scheme = cfg.scheme_config();
    let tol = cfg.compare.tol.unwrap_or(1e-10);
    let bank = comparison_bank()?;
    let mut cases = Vec::new();
    for id in &cfg.compare.cases {
        match id.as_str() {
            "all" => cases.extend(bank.iter().cloned()),
            "reversed-drift" => cases.push(violated_case()?),
            other => match bank.iter().find(|c| c.id == other) {
                Some(c) => cases.push(c.clone()),
                None => return Err(Error::Config(format!("unknown comparison case `{other}`"))),
            },
        }
    }
    let mut t = Table::new(
        "compare",
        &["case_id", "status", "max_violation", "count", "witness_path", "witness_step", "y0_gap"],
    );
    let mut out = CommandResult::default();
    let mut total = 0usize;
    for case in &cases {
        match compare(case, &noise, &scheme, tol) {
            Ok(r) => {
                total += r.count;
                let (wp, ws) = r.witness.map_or((String::new(), String::new()), |(p, i)| (p.to_string(), i.to_string()));
                t.rows.push(vec![
                    r.case_id,
                    "ok".into(),
                    num(r.max_violation),
                    r.count.to_string(),
                    wp,
                    ws,
                    num(r.y0_gap),
                ]);
            }
            Err(e @ Error::HypothesisRefused { .. }) => {
                let msg = format!("{}: {e}", case.id);
                t.rows.push(vec![case.id.clone(), "refused".into(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                out.refusal.get_or_insert(msg);
            }
            Err(e) => return Err(e),
        }
    }
    out.table(&t)?;
    out.metric("cases", cases.len());
    out.metric("violations", total);
    Ok(out)
}

fn cmd_lemma(cfg: &RunConfig) -> Result<CommandResult> {
    let noise = cfg.noise()?;
    let solver = cfg.solver_config();
    let mut t = Table::new("lemma", &["scenario", "min_free", "min_reflected"]);
    let mut worst = f64::INFINITY;
    for s in lemma_scenarios() {
        let r = run_lemma_scenario(&s, &noise, &solver)?;
        worst = worst.min(r.min_free).min(r.min_reflected);
        t.rows.push(vec![s.id.to_string(), num(r.min_free), num(r.min_reflected)]);
    }
    let mut out = CommandResult::default();
    out.table(&t)?;
    out.metric("min_y", worst);
    Ok(out)
}

fn cmd_oracle(cfg: &RunConfig) -> Result<CommandResult> {
    let noise = cfg.noise()?;
    let solver = cfg.solver_config();
    let mut t = Table::new("oracle", &["problem", "oracle", "max_dy", "max_dz", "max_dk"]);
    let mut worst = 0.0f64;
    for name in BANK {
        let spec = builtin_problem(name)?;
        if spec.generator.lipschitz_c.is_none() {
            continue;
        }
        let ours = solve_lipschitz(&spec, &noise, &solver)?;
        let brute = tree_bruteforce(&spec, &noise, &solver)?;
        let (dy, dz, dk) = max_discrepancy(&ours, &brute);
        worst = worst.max(dy).max(dz).max(dk);
        t.rows.push(vec![name.to_string(), "bruteforce".into(), num(dy), num(dz), num(dk)]);
        if *name == "snell-only" {
            let snell = snell_oracle(spec.obstacle.clone(), spec.terminal.clone(), &noise)?;
            let (dy, dz, dk) = max_discrepancy(&ours, &snell);
            worst = worst.max(dy).max(dz).max(dk);
            t.rows.push(vec![name.to_string(), "snell".into(), num(dy), num(dz), num(dk)]);
        }
    }
    let mut out = CommandResult::default();
    out.table(&t)?;
    out.metric("max_discrepancy", worst);
    Ok(out)
}

fn dispatch(command: Command, cfg: &RunConfig) -> Result<CommandResult> {
    let seed = cfg.noise.seed;
    match command {
        Command::CheckAssumptions => cmd_check(cfg, seed),
        Command::Envelope => cmd_envelope(cfg),
        Command::Solve => cmd_solve(cfg),
        Command::Iterate => cmd_iterate(cfg, seed),
        Command::Compare => cmd_compare(cfg),
        Command::Lemma => cmd_lemma(cfg),
        Command::Oracle => cmd_oracle(cfg),
    }
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::HypothesisRefused { .. } => 2,
        _ => 1,
    }
}

/// Resolve `--out`, then `$RBDSDE_OUT_DIR`, then `./rbdsde-out`.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Run one command with overrides applied; never panics on bad input.
pub fn run(command: Command, mut cfg: RunConfig, opts: &RunOptions) -> RunOutcome {
    if let Some(seed) = opts.seed {
        cfg.noise.seed = seed;
    }
    let fail = |e: Error| RunOutcome { exit_code: 1, manifest: None, outputs: Vec::new(), error: Some(e.to_string()) };
    if let Err(e) = cfg.validate() {
        return fail(e);
    }
    if opts.threads == Some(0) {
        return fail(Error::Config("--threads must be >= 1".into()));
    }
    let out_dir = resolve_out_dir(opts.out_dir.clone());

    let started = now();
    let result = match opts.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(command, &cfg)),
            Err(e) => Err(Error::Config(format!("cannot build thread pool: {e}"))),
        },
        None => dispatch(command, &cfg),
    };
    let finished = now();

    let (files, metrics, exit_code, error) = match result {
        Ok(r) => {
            let code = if r.refusal.is_some() { 2 } else { 0 };
            (r.files, r.metrics, code, r.refusal)
        }
        Err(e) => (Vec::new(), BTreeMap::new(), exit_code_for(&e), Some(e.to_string())),
    };

    let write = || -> Result<(PathBuf, Vec<PathBuf>)> {
        fs::create_dir_all(&out_dir)?;
        let mut listed = Vec::new();
        let mut paths = Vec::new();
        for (name, bytes) in &files {
            let path = out_dir.join(name);
            fs::write(&path, bytes)?;
            listed.push(json!({
                "file": name,
                "bytes": bytes.len(),
                "sha256": hex(&Sha256::digest(bytes)),
            }));
            paths.push(path);
        }
        let manifest = json!({
            "artifact": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": cfg.noise.seed,
            "threads": opts.threads,
            "started": started,
            "finished": finished,
            "exit_code": exit_code,
            "error": error,
            "metrics": metrics,
            "outputs": listed,
            "config": cfg,
        });
        let path = out_dir.join(MANIFEST);
        let text = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        write_atomic(&path, &text)?;
        Ok((path, paths))
    };
    match write() {
        Ok((manifest, outputs)) => RunOutcome { exit_code, manifest: Some(manifest), outputs, error },
        Err(e) => fail(e),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match &cli.config {
        Some(path) => match RunConfig::from_path(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        },
        None => RunConfig::default(),
    };
    let opts = RunOptions { out_dir: cli.out, seed: cli.seed, threads: cli.threads };
    let outcome = run(cli.command, cfg, &opts);
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    if let Some(m) = &outcome.manifest {
        println!("{}", m.display());
    }
    outcome.exit_code
}
