//! Quasi-integration by level-set sweep.
//!
//! On a grid μ({f > t}) is a step function of t that only changes at the
//! distinct cell values, so the integral is a finite sum.

use crate::error::{Error, Result};
use crate::grid::{CellSet, GridSpace, Mode, Region, Role};
use crate::qmeasures::{Kind, TopoMeasure};
use crate::rng;
use rand::Rng as _;
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    /// One value per cell of the underlying rectangle; excluded cells are ignored.
    pub fn new(space: &GridSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                space.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value {v}")));
        }
        Ok(GridFunction { values })
    }

    pub fn from_fn(space: &GridSpace, f: impl Fn(usize) -> f64) -> Self {
        GridFunction {
            values: (0..space.len())
                .map(|i| if space.is_admissible(i) { f(i) } else { 0.0 })
                .collect(),
        }
    }

    pub fn constant(space: &GridSpace, c: f64) -> Self {
        Self::from_fn(space, |_| c)
    }

    /// Cone `max(0, height - d(c, centre))`: 1-Lipschitz, supported in a disk.
    pub fn cone(space: &GridSpace, centre: [f64; 2], height: f64) -> Self {
        Self::from_fn(space, |i| {
            let p = space.center(i);
            (height - ((p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2)).sqrt()).max(0.0)
        })
    }

    /// Radial bump `height·max(0, 1 - d/radius)`.
    pub fn radial(space: &GridSpace, centre: [f64; 2], radius: f64, height: f64) -> Self {
        Self::from_fn(space, |i| {
            let p = space.center(i);
            let d = ((p[0] - centre[0]).powi(2) + (p[1] - centre[1]).powi(2)).sqrt();
            height * (1.0 - d / radius).max(0.0)
        })
    }

    pub fn coordinate_x(space: &GridSpace) -> Self {
        Self::from_fn(space, |i| space.center(i)[0])
    }

    pub fn indicator(space: &GridSpace, r: &Region, value: f64) -> Self {
        Self::from_fn(space, |i| if r.contains(i) { value } else { 0.0 })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, cell: usize) -> f64 {
        self.values[cell]
    }

    pub fn sup_norm(&self, space: &GridSpace) -> f64 {
        space.admissible().iter().map(|i| self.values[i].abs()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Self {
        GridFunction {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// Cells where the function is nonzero.
    pub fn support(&self, space: &GridSpace) -> Region {
        let cells = CellSet::from_indices(space.len(), space.admissible().iter().filter(|&i| self.values[i] != 0.0));
        space.region_from_set(cells, Role::Compact).expect("admissible support")
    }
}

/// `{f > t}` as an open-role region, or `{f ≥ t}` as a compact-role region.
pub fn superlevel(space: &GridSpace, f: &GridFunction, t: f64, strict: bool) -> Region {
    let cells = space
        .admissible()
        .iter()
        .filter(|&i| if strict { f.values[i] > t } else { f.values[i] >= t });
    let role = if strict { Role::Open } else { Role::Compact };
    space
        .region_from_set(CellSet::from_indices(space.len(), cells), role)
        .expect("admissible cells")
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelProfile {
    /// Sorted distinct sweep points, starting at the base level.
    pub thresholds: Vec<f64>,
    /// μ({f > thresholds[j]}) for every threshold but the last.
    pub r1: Vec<f64>,
    /// μ(X).
    pub total: f64,
}

impl LevelProfile {
    pub fn integral(&self) -> f64 {
        let mut s = self.thresholds[0] * self.total;
        for j in 0..self.r1.len() {
            s += (self.thresholds[j + 1] - self.thresholds[j]) * self.r1[j];
        }
        s
    }
}

fn sweep_points(space: &GridSpace, f: &GridFunction) -> Vec<f64> {
    let mut v: Vec<f64> = space.admissible().iter().map(|i| f.values[i]).collect();
    if space.mode() == Mode::MarkedInfinity {
        v.push(0.0);
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    v.dedup();
    v
}

pub fn level_profile(mu: &TopoMeasure, f: &GridFunction) -> Result<LevelProfile> {
    let space = mu.space();
    if f.values.len() != space.len() {
        return Err(Error::SpaceMismatch("function and measure live on different grids".into()));
    }
    if mu.kind() == Kind::Deficient {
        if let Some(c) = space.admissible().iter().find(|&i| f.values[i] < 0.0) {
            return Err(Error::ConicDomain(format!("f({c}) = {} < 0", f.values[c])));
        }
    }
    if space.mode() == Mode::MarkedInfinity {
        if let Some(c) = space.frame().iter().find(|&i| f.values[i] != 0.0) {
            return Err(Error::NotVanishing(format!("f({c}) = {}", f.values[c])));
        }
    }
    let thresholds = sweep_points(space, f);
    let r1: Result<Vec<f64>> = thresholds[..thresholds.len() - 1]
        .par_iter()
        .map(|&t| mu.eval(&superlevel(space, f, t, true)))
        .collect();
    Ok(LevelProfile {
        thresholds,
        r1: r1?,
        total: mu.total_mass()?,
    })
}

/// ∫ f dμ by the level-set sweep.
pub fn quasi_integral(mu: &TopoMeasure, f: &GridFunction) -> Result<f64> {
    Ok(level_profile(mu, f)?.integral())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearityWitness {
    pub f: GridFunction,
    pub g: GridFunction,
    /// ρ(f), ρ(g), ρ(f+g)
    pub values: [f64; 3],
}

/// Random search over pairs of radial bumps for ρ(f+g) ≠ ρ(f) + ρ(g).
pub fn find_nonlinearity_witness(mu: &TopoMeasure, trials: usize, seed: u64) -> Result<Option<NonlinearityWitness>> {
    let space = mu.space();
    let mut r = rng::stream(seed, "nonlinearity");
    let span = (space.width().max(space.height()) as f64) * space.cell_size();
    let bump = |r: &mut rng::Rng| {
        let c = space.center(crate::sampling::random_cell(space, r));
        let radius = r.gen_range(0.5..=1.0) * span;
        let height = r.gen_range(1..=4) as f64;
        let f = GridFunction::radial(space, c, radius, height);
        if space.mode() == Mode::MarkedInfinity {
            let frame = space.frame().clone();
            GridFunction::from_fn(space, |i| if frame.contains(i) { 0.0 } else { f.values[i] })
        } else {
            f
        }
    };
    for _ in 0..trials {
        let f = bump(&mut r);
        let g = bump(&mut r);
        let (a, b, c) = (quasi_integral(mu, &f)?, quasi_integral(mu, &g)?, quasi_integral(mu, &f.add(&g))?);
        if (c - a - b).abs() > 1e-9 * (a.abs() + b.abs()).max(1.0) {
            return Ok(Some(NonlinearityWitness { f, g, values: [a, b, c] }));
        }
    }
    Ok(None)
}
