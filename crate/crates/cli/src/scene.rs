//! JSON scene documents and the objects they name.

use crate::error::CliError;
use serde::Deserialize;
use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use topomeasure::image_transforms::{
    self, clamp_map, compose, constant_from_simple, fold_map, from_proper_map, minus_cell, square_isometry, ImageTransform,
};
use topomeasure::kr::DiscreteMeasure;
use topomeasure::markov::{AffineMap, TransformSystem};
use topomeasure::median::VariableFamily;
use topomeasure::qmeasures::{self, SolidSetFunction};
use topomeasure::quasi_integral::GridFunction;
use topomeasure::{extend, GridSpace, Mode, Region, Role, TopoMeasure};

#[derive(Deserialize, Clone, Copy, Default, Debug, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    #[default]
    Compact,
    MarkedInfinity,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Mode {
        match m {
            ModeSpec::Compact => Mode::Compact,
            ModeSpec::MarkedInfinity => Mode::MarkedInfinity,
        }
    }
}

#[derive(Deserialize, Clone, Copy, Debug, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum RoleSpec {
    Compact,
    Open,
}

impl From<RoleSpec> for Role {
    fn from(r: RoleSpec) -> Role {
        match r {
            RoleSpec::Compact => Role::Compact,
            RoleSpec::Open => Role::Open,
        }
    }
}

#[derive(Deserialize, Debug)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Rect {
        width: usize,
        height: usize,
        #[serde(default)]
        mode: ModeSpec,
        cell_size: Option<f64>,
    },
    OverRect {
        x: [f64; 2],
        y: [f64; 2],
        width: usize,
        height: usize,
        #[serde(default)]
        mode: ModeSpec,
    },
    Disk {
        radius: f64,
    },
    Line {
        cells: usize,
        #[serde(default)]
        mode: ModeSpec,
    },
}

/// A cell as a row-major index or as `[x, y]`.
#[derive(Deserialize, Clone, Copy, Debug)]
#[serde(untagged)]
pub enum CellRef {
    Index(usize),
    Coords([usize; 2]),
}

#[derive(Deserialize, Debug)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    AarnesCircle { point: CellRef },
    PointMass { cell: CellRef },
    PointConfig { points: Vec<CellRef> },
    WeightedTwoPoint { p1: CellRef, p2: CellRef, cell_area: Option<f64> },
    DiffuseDtm { region: String },
    Dirac { cell: CellRef },
    CellCount,
    CellWeights { weights: Vec<f64> },
    Combination { terms: Vec<(f64, String)> },
    Adjoint { transform: String, measure: String },
}

#[derive(Deserialize, Debug)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Values { values: Vec<f64> },
    Constant { value: f64 },
    Cone { centre: [f64; 2], height: f64 },
    Radial { centre: [f64; 2], radius: f64, height: f64 },
    CoordinateX,
    Indicator { region: String, value: f64 },
}

#[derive(Deserialize, Debug)]
#[serde(untagged)]
pub enum RegionSpec {
    Literal(String),
    Cells { cells: Vec<CellRef>, role: RoleSpec },
}

#[derive(Deserialize, Debug)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    /// Preimage map of a cell map given per cell of the space.
    InverseMap { map: Vec<usize> },
    Isometry { k: usize },
    Clamp { axis: usize, lo: usize, hi: usize },
    Fold { axis: usize, c: usize },
    ConstantSimple { measure: String },
    TwoPointHull { x: CellRef, z: CellRef },
    Compose { outer: String, inner: String },
    MinusCell { cell: CellRef },
}

#[derive(Deserialize, Debug)]
pub struct AffineEntry {
    #[serde(flatten)]
    pub map: AffineMap,
    pub alpha: f64,
}

#[derive(Deserialize, Debug)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Sierpinski,
    Affine { maps: Vec<AffineEntry> },
    Grid { transforms: Vec<String>, alphas: Vec<f64> },
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    /// Cells of a compact interval grid the maps land in; the scene space otherwise.
    pub line: Option<usize>,
    #[serde(default)]
    pub weights: Vec<f64>,
    /// `maps[i][y]`
    #[serde(default)]
    pub maps: Vec<Vec<CellRef>>,
    /// CSV file with rows `y_weight, T1, T2, ...` (relative to the scene file).
    pub csv: Option<PathBuf>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct CloudSpec {
    pub points: Vec<[f64; 2]>,
    pub weights: Option<Vec<f64>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_budget() -> usize {
    500
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol: default_tol(),
            budget: default_budget(),
        }
    }
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub seed: Option<u64>,
    pub space: SpaceSpec,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    pub regions: BTreeMap<String, RegionSpec>,
    #[serde(default)]
    pub transforms: BTreeMap<String, TransformSpec>,
    #[serde(default)]
    pub systems: BTreeMap<String, SystemSpec>,
    #[serde(default)]
    pub families: BTreeMap<String, FamilySpec>,
    #[serde(default)]
    pub clouds: BTreeMap<String, CloudSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

pub struct Scene {
    pub file: SceneFile,
    pub space: Arc<GridSpace>,
    dir: PathBuf,
    measures: RefCell<HashMap<String, TopoMeasure>>,
    transforms: RefCell<HashMap<String, ImageTransform>>,
    depth: RefCell<usize>,
}

const MAX_DEPTH: usize = 64;

fn unknown(kind: &str, name: &str) -> CliError {
    CliError::Reference(format!("unknown {kind} {name:?}"))
}

impl Scene {
    pub fn load(path: &Path) -> Result<Scene, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file: SceneFile =
            serde_json::from_str(&text).map_err(|e| CliError::Reference(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Scene::from_file(file, dir)
    }

    pub fn from_file(file: SceneFile, dir: PathBuf) -> Result<Scene, CliError> {
        let space = match &file.space {
            SpaceSpec::Rect {
                width,
                height,
                mode,
                cell_size,
            } => {
                let s = GridSpace::new(*width, *height, (*mode).into())?;
                match cell_size {
                    Some(c) if *c > 0.0 => s.with_cell_size(*c),
                    Some(_) => return Err(CliError::Reference("cell_size must be positive".into())),
                    None => s,
                }
            }
            SpaceSpec::OverRect {
                x,
                y,
                width,
                height,
                mode,
            } => GridSpace::over_rect(*x, *y, *width, *height, (*mode).into())?,
            SpaceSpec::Disk { radius } => GridSpace::digital_disk(*radius)?,
            SpaceSpec::Line { cells, mode } => GridSpace::line(*cells, (*mode).into())?,
        };
        Ok(Scene {
            file,
            space: Arc::new(space),
            dir,
            measures: RefCell::new(HashMap::new()),
            transforms: RefCell::new(HashMap::new()),
            depth: RefCell::new(0),
        })
    }

    pub fn tol(&self) -> f64 {
        self.file.tolerances.tol
    }

    pub fn budget(&self) -> usize {
        self.file.tolerances.budget
    }

    fn enter(&self) -> Result<(), CliError> {
        let mut d = self.depth.borrow_mut();
        *d += 1;
        if *d > MAX_DEPTH {
            return Err(CliError::Reference("scene references form a cycle".into()));
        }
        Ok(())
    }

    fn leave(&self) {
        *self.depth.borrow_mut() -= 1;
    }

    pub fn cell_in(space: &GridSpace, c: CellRef) -> Result<usize, CliError> {
        let i = match c {
            CellRef::Index(i) => i,
            CellRef::Coords([x, y]) => {
                if x >= space.width() || y >= space.height() {
                    return Err(CliError::Reference(format!("cell [{x}, {y}] lies outside the grid")));
                }
                space.index(x, y)
            }
        };
        if i >= space.len() || !space.is_admissible(i) {
            return Err(CliError::Reference(format!("cell {i} is not part of the space")));
        }
        Ok(i)
    }

    pub fn cell(&self, c: CellRef) -> Result<usize, CliError> {
        Scene::cell_in(&self.space, c)
    }

    /// A named region, or a literal `K:…` / `O:…` run-length string.
    pub fn region(&self, name: &str) -> Result<Region, CliError> {
        match self.file.regions.get(name) {
            Some(RegionSpec::Literal(s)) => Ok(self.space.parse_region(s)?),
            Some(RegionSpec::Cells { cells, role }) => {
                let cells = cells.iter().map(|&c| self.cell(c)).collect::<Result<Vec<_>, _>>()?;
                Ok(self.space.region(cells, (*role).into())?)
            }
            None if name.contains(':') => Ok(self.space.parse_region(name)?),
            None => Err(unknown("region", name)),
        }
    }

    pub fn region_names(&self) -> Vec<String> {
        self.file.regions.keys().cloned().collect()
    }

    pub fn is_measure(&self, name: &str) -> bool {
        self.file.measures.contains_key(name)
    }

    pub fn is_transform(&self, name: &str) -> bool {
        self.file.transforms.contains_key(name)
    }

    pub fn is_cloud(&self, name: &str) -> bool {
        self.file.clouds.contains_key(name)
    }

    /// The solid-set function behind a measure, when it is defined by one.
    pub fn solid_set_function(&self, name: &str) -> Result<Option<SolidSetFunction>, CliError> {
        let spec = self.file.measures.get(name).ok_or_else(|| unknown("measure", name))?;
        let s = self.space.clone();
        Ok(Some(match spec {
            MeasureSpec::AarnesCircle { point } => qmeasures::make_aarnes_circle(s, self.cell(*point)?)?,
            MeasureSpec::PointMass { cell } => qmeasures::point_mass(s, self.cell(*cell)?)?,
            MeasureSpec::PointConfig { points } => {
                let pts = points.iter().map(|&c| self.cell(c)).collect::<Result<Vec<_>, _>>()?;
                qmeasures::make_point_config(s, &pts)?
            }
            MeasureSpec::WeightedTwoPoint { p1, p2, cell_area } => {
                let area = cell_area.unwrap_or(self.space.cell_size() * self.space.cell_size());
                qmeasures::make_weighted_two_point(s, self.cell(*p1)?, self.cell(*p2)?, area)?
            }
            _ => return Ok(None),
        }))
    }

    pub fn measure(&self, name: &str) -> Result<TopoMeasure, CliError> {
        if let Some(m) = self.measures.borrow().get(name) {
            return Ok(m.clone());
        }
        self.enter()?;
        let built = self.build_measure(name);
        self.leave();
        let m = built?;
        self.measures.borrow_mut().insert(name.to_string(), m.clone());
        Ok(m)
    }

    fn build_measure(&self, name: &str) -> Result<TopoMeasure, CliError> {
        if let Some(lambda) = self.solid_set_function(name)? {
            return Ok(extend(&lambda));
        }
        let s = self.space.clone();
        Ok(match &self.file.measures[name] {
            MeasureSpec::DiffuseDtm { region } => qmeasures::make_diffuse_dtm(s, &self.region(region)?)?,
            MeasureSpec::Dirac { cell } => TopoMeasure::dirac(s, self.cell(*cell)?)?,
            MeasureSpec::CellCount => TopoMeasure::cell_count(s),
            MeasureSpec::CellWeights { weights } => TopoMeasure::cell_weights(s, weights.clone())?,
            MeasureSpec::Combination { terms } => {
                let terms = terms
                    .iter()
                    .map(|(c, n)| Ok((*c, self.measure(n)?)))
                    .collect::<Result<Vec<_>, CliError>>()?;
                TopoMeasure::combination(terms)?
            }
            MeasureSpec::Adjoint { transform, measure } => {
                image_transforms::adjoint(&self.transform(transform)?, &self.measure(measure)?)?
            }
            _ => unreachable!("solid-set functions handled above"),
        })
    }

    pub fn function(&self, name: &str) -> Result<GridFunction, CliError> {
        let spec = self.file.functions.get(name).ok_or_else(|| unknown("function", name))?;
        let s = &self.space;
        Ok(match spec {
            FunctionSpec::Values { values } => GridFunction::new(s, values.clone())?,
            FunctionSpec::Constant { value } => GridFunction::constant(s, *value),
            FunctionSpec::Cone { centre, height } => GridFunction::cone(s, *centre, *height),
            FunctionSpec::Radial { centre, radius, height } => GridFunction::radial(s, *centre, *radius, *height),
            FunctionSpec::CoordinateX => GridFunction::coordinate_x(s),
            FunctionSpec::Indicator { region, value } => GridFunction::indicator(s, &self.region(region)?, *value),
        })
    }

    pub fn transform(&self, name: &str) -> Result<ImageTransform, CliError> {
        if let Some(t) = self.transforms.borrow().get(name) {
            return Ok(t.clone());
        }
        self.enter()?;
        let built = self.build_transform(name);
        self.leave();
        let t = built?;
        self.transforms.borrow_mut().insert(name.to_string(), t.clone());
        Ok(t)
    }

    fn build_transform(&self, name: &str) -> Result<ImageTransform, CliError> {
        let spec = self.file.transforms.get(name).ok_or_else(|| unknown("transform", name))?;
        let s = self.space.clone();
        let cell_map = |u: Vec<usize>| from_proper_map(s.clone(), s.clone(), u);
        Ok(match spec {
            TransformSpec::InverseMap { map } => cell_map(map.clone())?,
            TransformSpec::Isometry { k } => cell_map(square_isometry(&s, *k)?)?,
            TransformSpec::Clamp { axis, lo, hi } => cell_map(clamp_map(&s, *axis, *lo, *hi)?)?,
            TransformSpec::Fold { axis, c } => cell_map(fold_map(&s, *axis, *c)?)?,
            TransformSpec::ConstantSimple { measure } => constant_from_simple(&self.measure(measure)?, s.clone())?,
            TransformSpec::TwoPointHull { x, z } => image_transforms::two_point_hull(s.clone(), self.cell(*x)?, self.cell(*z)?)?,
            TransformSpec::Compose { outer, inner } => compose(&self.transform(outer)?, &self.transform(inner)?)?,
            TransformSpec::MinusCell { cell } => minus_cell(s.clone(), self.cell(*cell)?),
        })
    }

    pub fn system(&self, name: &str) -> Result<TransformSystem, CliError> {
        let spec = self.file.systems.get(name).ok_or_else(|| unknown("system", name))?;
        Ok(match spec {
            SystemSpec::Sierpinski => TransformSystem::sierpinski(),
            SystemSpec::Affine { maps } => TransformSystem::affine(
                maps.iter().map(|e| e.map).collect(),
                maps.iter().map(|e| e.alpha).collect(),
            )?,
            SystemSpec::Grid { transforms, alphas } => {
                let ts = transforms.iter().map(|t| self.transform(t)).collect::<Result<Vec<_>, _>>()?;
                TransformSystem::grid(ts, alphas.clone())?
            }
        })
    }

    pub fn cloud(&self, name: &str) -> Result<DiscreteMeasure, CliError> {
        let spec = self.file.clouds.get(name).ok_or_else(|| unknown("point cloud", name))?;
        Ok(match &spec.weights {
            Some(w) => DiscreteMeasure::new(spec.points.clone(), w.clone())?,
            None if spec.points.is_empty() => return Err(CliError::Reference(format!("point cloud {name:?} is empty"))),
            None => DiscreteMeasure::uniform(spec.points.clone()),
        })
    }

    pub fn family(&self, name: &str) -> Result<VariableFamily, CliError> {
        let spec = self.file.families.get(name).ok_or_else(|| unknown("family", name))?;
        let target = match spec.line {
            Some(n) => Arc::new(GridSpace::line(n, Mode::Compact)?),
            None => self.space.clone(),
        };
        let (weights, maps) = match &spec.csv {
            Some(path) => read_family_csv(&self.dir.join(path))?,
            None => {
                let maps = spec
                    .maps
                    .iter()
                    .map(|m| m.iter().map(|&c| Scene::cell_in(&target, c)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                (spec.weights.clone(), maps)
            }
        };
        Ok(VariableFamily::weighted(weights, target, maps)?)
    }
}

/// Rows `y_weight, T1, T2, ...` with map values given as cell indices.
fn read_family_csv(path: &Path) -> Result<(Vec<f64>, Vec<Vec<usize>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut weights = Vec::new();
    let mut maps: Vec<Vec<usize>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Reference(format!("{}: {e}", path.display())))?;
        let bad = |what: &str| CliError::Reference(format!("{} row {}: bad {what}", path.display(), line + 1));
        let mut fields = rec.iter();
        weights.push(fields.next().ok_or_else(|| bad("weight"))?.parse::<f64>().map_err(|_| bad("weight"))?);
        let values = fields.map(|v| v.parse::<usize>().map_err(|_| bad("cell"))).collect::<Result<Vec<_>, _>>()?;
        if maps.is_empty() {
            maps = vec![Vec::new(); values.len()];
        }
        if values.len() != maps.len() {
            return Err(bad("column count"));
        }
        for (m, v) in maps.iter_mut().zip(values) {
            m.push(v);
        }
    }
    Ok((weights, maps))
}
