//! Lipschitz envelopes by inf- and sup-convolution on a uniform `y` grid.
//!
//! The inf-envelope `e(y_k) = min_j f(y_j) + n |y_k - y_j|` is the largest
//! `n`-Lipschitz function below the tabulated `f`; it is computed exactly by
//! one forward and one backward sweep. The sup-envelope is its mirror.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::model::{GeneratorSpec, Regularity};

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction1D {
    y_min: f64,
    y_max: f64,
    values: Vec<f64>,
}

impl GridFunction1D {
    pub fn new(y_min: f64, y_max: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("grid function needs at least one node".into()));
        }
        if !(y_min.is_finite() && y_max.is_finite()) || (values.len() > 1 && y_max <= y_min) {
            return Err(Error::InvalidParameter(format!("bad y range [{y_min}, {y_max}]")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {k}")));
        }
        Ok(GridFunction1D { y_min, y_max, values })
    }

    /// Tabulate `f` at `points` equispaced nodes of `[y_min, y_max]`.
    pub fn tabulate(y_min: f64, y_max: f64, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidParameter("grid function needs at least one node".into()));
        }
        let dy = if points > 1 { (y_max - y_min) / (points - 1) as f64 } else { 0.0 };
        let values = (0..points).map(|k| f(y_min + k as f64 * dy)).collect();
        GridFunction1D::new(y_min, y_max, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn dy(&self) -> f64 {
        if self.values.len() > 1 {
            (self.y_max - self.y_min) / (self.values.len() - 1) as f64
        } else {
            0.0
        }
    }

    pub fn node(&self, k: usize) -> f64 {
        self.y_min + k as f64 * self.dy()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Piecewise-linear interpolation, clamped to the end values outside the range.
    pub fn interpolate(&self, y: f64) -> f64 {
        let g = self.values.len();
        if g == 1 || y <= self.y_min {
            return self.values[0];
        }
        if y >= self.y_max {
            return self.values[g - 1];
        }
        let s = (y - self.y_min) / self.dy();
        let k = (s.floor() as usize).min(g - 2);
        let w = s - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        GridFunction1D { y_min: self.y_min, y_max: self.y_max, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Inf,
    Sup,
}

impl Direction {
    /// Inf-envelopes approach a left-continuous nondecreasing `f` from below;
    /// right-continuous generators are approached from above.
    pub fn for_regularity(r: Regularity) -> Direction {
        match r {
            Regularity::RightContinuous => Direction::Sup,
            _ => Direction::Inf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    pub n: f64,
    pub direction: Direction,
}

fn check_level(n: f64) -> Result<()> {
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidParameter(format!("envelope level must be positive, got {n}")));
    }
    Ok(())
}

pub fn inf_envelope(f: &GridFunction1D, n: f64) -> Result<GridFunction1D> {
    check_level(n)?;
    let slack = n * f.dy();
    let mut e = f.values.clone();
    for k in 1..e.len() {
        e[k] = e[k].min(e[k - 1] + slack);
    }
    for k in (0..e.len().saturating_sub(1)).rev() {
        e[k] = e[k].min(e[k + 1] + slack);
    }
    Ok(f.with_values(e))
}

pub fn sup_envelope(f: &GridFunction1D, n: f64) -> Result<GridFunction1D> {
    check_level(n)?;
    let slack = n * f.dy();
    let mut e = f.values.clone();
    for k in 1..e.len() {
        e[k] = e[k].max(e[k - 1] - slack);
    }
    for k in (0..e.len().saturating_sub(1)).rev() {
        e[k] = e[k].max(e[k + 1] - slack);
    }
    Ok(f.with_values(e))
}

pub fn envelope(f: &GridFunction1D, params: EnvelopeParams) -> Result<GridFunction1D> {
    match params.direction {
        Direction::Inf => inf_envelope(f, params.n),
        Direction::Sup => sup_envelope(f, params.n),
    }
}

/// The `y` grid an envelope generator tabulates on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeGrid {
    pub y_min: f64,
    pub y_max: f64,
    pub points: usize,
}

impl Default for EnvelopeGrid {
    fn default() -> Self {
        EnvelopeGrid { y_min: -8.0, y_max: 8.0, points: 2049 }
    }
}

type CacheKey = (u64, Vec<u64>);

const CACHE_LIMIT: usize = 1 << 14;

/// Tabulated envelope of a generator, memoized per `(t, z)`.
pub struct EnvelopeTable {
    source: GeneratorSpec,
    params: EnvelopeParams,
    grid: EnvelopeGrid,
    cache: Mutex<HashMap<CacheKey, Arc<GridFunction1D>>>,
}

impl EnvelopeTable {
    pub fn new(source: GeneratorSpec, params: EnvelopeParams, grid: EnvelopeGrid) -> Result<Self> {
        check_level(params.n)?;
        if grid.points < 2 || !(grid.y_max > grid.y_min) {
            return Err(Error::InvalidParameter("envelope grid needs >= 2 points on a proper range".into()));
        }
        Ok(EnvelopeTable { source, params, grid, cache: Mutex::new(HashMap::new()) })
    }

    /// The envelope of `y -> f(t, y, z)` on the grid.
    pub fn slice(&self, t: f64, z: &[f64]) -> Arc<GridFunction1D> {
        let key = if self.source.depends_on_z {
            (t.to_bits(), z.iter().map(|v| v.to_bits()).collect())
        } else {
            (t.to_bits(), Vec::new())
        };
        if let Some(hit) = self.cache.lock().expect("envelope cache poisoned").get(&key) {
            return hit.clone();
        }
        let g = &self.grid;
        let raw = GridFunction1D::tabulate(g.y_min, g.y_max, g.points, |y| self.source.eval(t, y, z))
            .expect("generator must be finite on the envelope grid");
        let env = Arc::new(envelope(&raw, self.params).expect("level checked at construction"));
        let mut cache = self.cache.lock().expect("envelope cache poisoned");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.entry(key).or_insert(env).clone()
    }

    /// Envelope value at `(t, y, z)`. Inside the grid this interpolates
    /// linearly. Outside, the convolution runs over the grid nodes plus the
    /// point `y` itself.
    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        if y >= self.grid.y_min && y <= self.grid.y_max {
            return self.slice(t, z).interpolate(y);
        }
        let e = self.slice(t, z);
        let n = self.params.n;
        let (edge, dist) = if y < e.y_min() {
            (e.values()[0], e.y_min() - y)
        } else {
            (e.values()[e.len() - 1], y - e.y_max())
        };
        let here = self.source.eval(t, y, z);
        match self.params.direction {
            Direction::Inf => here.min(edge + n * dist),
            Direction::Sup => here.max(edge - n * dist),
        }
    }
}

/// Lipschitz regularization of a generator at level `n >= kappa`, with the
/// envelope direction chosen from its declared regularity.
pub fn envelope_generator(spec: &GeneratorSpec, n: f64, grid: EnvelopeGrid) -> Result<GeneratorSpec> {
    let params = EnvelopeParams { n, direction: Direction::for_regularity(spec.regularity) };
    envelope_generator_with(spec, params, grid)
}

pub fn envelope_generator_with(
    spec: &GeneratorSpec,
    params: EnvelopeParams,
    grid: EnvelopeGrid,
) -> Result<GeneratorSpec> {
    if !(params.n >= spec.kappa) {
        return Err(Error::InvalidParameter(format!(
            "envelope level n = {} is below kappa = {}",
            params.n, spec.kappa
        )));
    }
    let table = Arc::new(EnvelopeTable::new(spec.clone(), params, grid)?);
    Ok(GeneratorSpec {
        f: Arc::new(move |t, y, z| table.eval(t, y, z)),
        phi: spec.phi.clone(),
        kappa: spec.kappa,
        lipschitz_c: Some(params.n),
        regularity: Regularity::Lipschitz,
        depends_on_z: spec.depends_on_z,
    })
}
