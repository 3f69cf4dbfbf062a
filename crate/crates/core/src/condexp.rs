//! Conditional expectations `E_i[.]` given the two-sided information at grid
//! index `i`.
//!
//! Two engines share one interface:
//! * `Tree`: exact averaging over the Rademacher sample space. Paths that agree
//!   on every known-at-`i` increment form one atom of the conditioning
//!   sigma-field, and the output is the atom mean.
//! * `Regression`: ridge least squares on a basis of known-at-`i` features.
//!   Gram matrices are accumulated over fixed blocks of paths and reduced in
//!   block order, so results do not depend on the thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::{FiltrationIndex, NoiseBundle};

/// Paths per partial Gram sum.
pub const REDUCTION_BLOCK: usize = 1024;

/// Default relative ridge: `ridge * trace(G) / k` is added to the diagonal of
/// the normalized Gram matrix `G`.
pub const DEFAULT_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Monomials of total degree `<= degree` in the standardized state
    /// `(W_{t_i}, B_T - B_{t_i})`. `W_{t_0} = 0` is dropped at `i = 0`.
    Monomial { degree: usize },
    /// One indicator per atom of the tree sigma-field (saturated basis).
    /// Tree bundles only.
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionBasis {
    pub kind: BasisKind,
    pub ridge: f64,
}

impl Default for RegressionBasis {
    fn default() -> Self {
        RegressionBasis { kind: BasisKind::Monomial { degree: 2 }, ridge: DEFAULT_RIDGE }
    }
}

impl RegressionBasis {
    pub fn monomial(degree: usize) -> Self {
        RegressionBasis { kind: BasisKind::Monomial { degree }, ridge: DEFAULT_RIDGE }
    }

    pub fn indicator() -> Self {
        RegressionBasis { kind: BasisKind::Indicator, ridge: 0.0 }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CondExpEngine {
    Tree,
    Regression(RegressionBasis),
}

impl CondExpEngine {
    pub fn name(&self) -> &'static str {
        match self {
            CondExpEngine::Tree => "tree",
            CondExpEngine::Regression(_) => "regression",
        }
    }

    /// `E_i` of every target, in the order given.
    pub fn project(&self, bundle: &NoiseBundle, i: usize, targets: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        for t in targets {
            if t.len() != bundle.paths() {
                return Err(Error::Shape(format!(
                    "target has {} entries for {} paths",
                    t.len(),
                    bundle.paths()
                )));
            }
        }
        match self {
            CondExpEngine::Tree => targets.iter().map(|v| exact_condexp(bundle, i, v)).collect(),
            CondExpEngine::Regression(basis) => regress_many(bundle, i, targets, basis),
        }
    }
}

fn check_index(bundle: &NoiseBundle, i: usize) -> Result<()> {
    if i > bundle.steps() {
        return Err(Error::InvalidParameter(format!(
            "conditioning index {i} beyond N = {}",
            bundle.steps()
        )));
    }
    Ok(())
}

/// Exact `E_i[values]` on the full Rademacher tree.
pub fn exact_condexp(bundle: &NoiseBundle, i: usize, values: &[f64]) -> Result<Vec<f64>> {
    if !bundle.is_tree() {
        return Err(Error::NotTree);
    }
    check_index(bundle, i)?;
    if values.len() != bundle.paths() {
        return Err(Error::Shape(format!("{} values for {} paths", values.len(), bundle.paths())));
    }
    let mask = FiltrationIndex(i).tree_mask(bundle.steps());
    let mut sums = vec![0.0; bundle.paths()];
    let mut counts = vec![0u32; bundle.paths()];
    for (p, v) in values.iter().enumerate() {
        sums[p & mask] += v;
        counts[p & mask] += 1;
    }
    Ok((0..values.len()).map(|p| sums[p & mask] / counts[p & mask] as f64).collect())
}

/// Ridge least-squares `E_i[values]`.
pub fn regress_condexp(
    bundle: &NoiseBundle,
    i: usize,
    values: &[f64],
    basis: &RegressionBasis,
) -> Result<Vec<f64>> {
    Ok(regress_many(bundle, i, &[values], basis)?.pop().expect("one target in, one out"))
}

/// Exponent vectors of all monomials of total degree `<= degree` in `vars`
/// variables, constant first.
fn monomials(vars: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; vars]];
    for d in 1..=degree {
        let mut level = Vec::new();
        let mut e = vec![0usize; vars];
        fill(&mut level, &mut e, 0, d);
        out.extend(level);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, e: &mut Vec<usize>, at: usize, left: usize) {
    if at + 1 == e.len() {
        e[at] = left;
        out.push(e.clone());
        e[at] = 0;
        return;
    }
    if e.is_empty() {
        return;
    }
    for k in (0..=left).rev() {
        e[at] = k;
        fill(out, e, at + 1, left - k);
    }
    e[at] = 0;
}

/// Feature rows for every path at step `i`, row-major `paths x k`.
fn design(bundle: &NoiseBundle, i: usize, basis: &RegressionBasis) -> Result<(Vec<f64>, usize)> {
    let paths = bundle.paths();
    match basis.kind {
        BasisKind::Monomial { degree } => {
            let n = bundle.steps();
            let t = bundle.grid().node(i);
            let horizon = bundle.grid().horizon();
            let use_w = i > 0;
            let use_b = i < n;
            let w_scale = if use_w { 1.0 / t.sqrt() } else { 0.0 };
            let b_scale = if use_b { 1.0 / (horizon - t).sqrt() } else { 0.0 };
            let vars = (if use_w { bundle.dim_w() } else { 0 }) + (if use_b { bundle.dim_b() } else { 0 });
            let exps = monomials(vars, degree);
            let k = exps.len();
            let mut x = vec![0.0; paths * k];
            x.par_chunks_mut(k).enumerate().for_each(|(p, row)| {
                let mut state = Vec::with_capacity(vars);
                if use_w {
                    state.extend(bundle.w(i, p).iter().map(|v| v * w_scale));
                }
                if use_b {
                    state.extend(bundle.b_tail(i, p).iter().map(|v| v * b_scale));
                }
                for (slot, e) in row.iter_mut().zip(&exps) {
                    *slot = state.iter().zip(e).map(|(s, &pw)| s.powi(pw as i32)).product();
                }
            });
            Ok((x, k))
        }
        BasisKind::Indicator => {
            if !bundle.is_tree() {
                return Err(Error::NotTree);
            }
            let mask = FiltrationIndex(i).tree_mask(bundle.steps());
            let mut ids = std::collections::HashMap::new();
            let atom: Vec<usize> = (0..paths)
                .map(|p| {
                    let next = ids.len();
                    *ids.entry(p & mask).or_insert(next)
                })
                .collect();
            let k = ids.len();
            let mut x = vec![0.0; paths * k];
            for (p, a) in atom.iter().enumerate() {
                x[p * k + a] = 1.0;
            }
            Ok((x, k))
        }
    }
}

fn regress_many(
    bundle: &NoiseBundle,
    i: usize,
    targets: &[&[f64]],
    basis: &RegressionBasis,
) -> Result<Vec<Vec<f64>>> {
    check_index(bundle, i)?;
    if !(basis.ridge >= 0.0) {
        return Err(Error::InvalidParameter(format!("ridge must be >= 0, got {}", basis.ridge)));
    }
    let paths = bundle.paths();
    let (x, k) = design(bundle, i, basis)?;
    // indicator cells are exact on the tree, every cell is populated
    let needed = match basis.kind {
        BasisKind::Indicator => k,
        _ => 10 * k,
    };
    if paths < needed {
        return Err(Error::TooFewPaths { step: i, needed, paths });
    }
    let m = targets.len();

    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..paths)
        .collect::<Vec<_>>()
        .par_chunks(REDUCTION_BLOCK)
        .map(|block| {
            let mut g = vec![0.0; k * k];
            let mut r = vec![0.0; k * m];
            for &p in block {
                let row = &x[p * k..(p + 1) * k];
                for a in 0..k {
                    if row[a] == 0.0 {
                        continue;
                    }
                    for b in a..k {
                        g[a * k + b] += row[a] * row[b];
                    }
                    for (c, t) in targets.iter().enumerate() {
                        r[a * m + c] += row[a] * t[p];
                    }
                }
            }
            (g, r)
        })
        .collect();

    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DMatrix::<f64>::zeros(k, m);
    for (g, r) in &partials {
        for a in 0..k {
            for b in a..k {
                gram[(a, b)] += g[a * k + b];
            }
            for c in 0..m {
                rhs[(a, c)] += r[a * m + c];
            }
        }
    }
    let inv_p = 1.0 / paths as f64;
    for a in 0..k {
        for b in a..k {
            let v = gram[(a, b)] * inv_p;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    rhs *= inv_p;

    let diag: Vec<f64> = (0..k).map(|a| gram[(a, a)]).collect();
    let lambda = basis.ridge * diag.iter().sum::<f64>() / k as f64;
    for a in 0..k {
        gram[(a, a)] += lambda;
    }
    let chol = gram.clone().cholesky().ok_or(Error::RankDeficient { step: i })?;
    if basis.ridge == 0.0 {
        let l = chol.l_dirty();
        for a in 0..k {
            if !(l[(a, a)] * l[(a, a)] > 1e-12 * diag[a].max(f64::MIN_POSITIVE)) {
                return Err(Error::RankDeficient { step: i });
            }
        }
    }
    let beta = chol.solve(&rhs);

    let mut out = vec![vec![0.0; paths]; m];
    for (c, col) in out.iter_mut().enumerate() {
        let b: DVector<f64> = beta.column(c).into_owned();
        col.par_iter_mut().enumerate().for_each(|(p, slot)| {
            let row = &x[p * k..(p + 1) * k];
            *slot = row.iter().zip(b.iter()).map(|(u, v)| u * v).sum();
        });
    }
    Ok(out)
}
