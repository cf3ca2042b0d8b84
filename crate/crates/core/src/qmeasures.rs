//! Solid-set functions, their extension to topological measures, the axiom
//! checkers, and the gallery of standard examples.

use crate::error::{Error, Result};
use crate::grid::{Adjacency, CellSet, Connectivity, GridSpace, Mode, Region, Role};
use crate::rng;
use crate::sampling;
use rand::Rng as _;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

const EPS: f64 = 1e-9;

/// A valuation on solid regions.
pub trait SolidValuation: Send + Sync {
    fn value(&self, space: &GridSpace, r: &Region) -> Result<f64>;
    fn name(&self) -> String;
}

#[derive(Clone)]
pub struct SolidSetFunction {
    space: Arc<GridSpace>,
    valuation: Arc<dyn SolidValuation>,
}

impl fmt::Debug for SolidSetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SolidSetFunction({})", self.valuation.name())
    }
}

impl SolidSetFunction {
    pub fn new(space: Arc<GridSpace>, valuation: Arc<dyn SolidValuation>) -> Self {
        SolidSetFunction { space, valuation }
    }

    pub fn space(&self) -> &Arc<GridSpace> {
        &self.space
    }

    pub fn name(&self) -> String {
        self.valuation.name()
    }

    /// λ(r) for a solid region; errors on non-solid input.
    pub fn valuate(&self, r: &Region) -> Result<f64> {
        self.space.check_evaluable(r)?;
        if !self.space.is_solid(r)? {
            return Err(Error::InvalidArgument(format!("region {} is not solid", r.to_rle())));
        }
        self.value_unchecked(r)
    }

    pub(crate) fn value_unchecked(&self, r: &Region) -> Result<f64> {
        let v = self
            .valuation
            .value(&self.space, r)
            .map_err(|e| Error::ValuationGap(format!("{} at {}: {e}", self.name(), r.to_rle())))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::ValuationGap(format!("{} returned {v} at {}", self.name(), r.to_rle())));
        }
        Ok(v)
    }

    /// Value on the whole space.
    pub fn total(&self) -> Result<f64> {
        self.value_unchecked(&self.space.full(Role::Open))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Topological,
    Deficient,
    Measure,
}

impl Kind {
    pub fn combine(self, other: Kind) -> Kind {
        match (self, other) {
            (Kind::Deficient, _) | (_, Kind::Deficient) => Kind::Deficient,
            (Kind::Measure, Kind::Measure) => Kind::Measure,
            _ => Kind::Topological,
        }
    }
}

/// Raw region evaluator behind a [`TopoMeasure`].
pub trait Evaluator: Send + Sync {
    fn eval(&self, r: &Region) -> Result<f64>;
    fn describe(&self) -> String;
}

type Memo = RwLock<HashMap<Region, f64>>;

#[derive(Clone)]
pub struct TopoMeasure {
    space: Arc<GridSpace>,
    kind: Kind,
    evaluator: Arc<dyn Evaluator>,
    memo: Option<Arc<Memo>>,
}

impl fmt::Debug for TopoMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TopoMeasure({:?}, {})", self.kind, self.evaluator.describe())
    }
}

impl TopoMeasure {
    pub fn new(space: Arc<GridSpace>, kind: Kind, evaluator: Arc<dyn Evaluator>) -> Self {
        TopoMeasure {
            space,
            kind,
            evaluator,
            memo: Some(Arc::new(RwLock::new(HashMap::new()))),
        }
    }

    /// Same measure without a memo table (for one-off evaluations on big grids).
    pub fn unmemoized(mut self) -> Self {
        self.memo = None;
        self
    }

    pub fn space(&self) -> &Arc<GridSpace> {
        &self.space
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn describe(&self) -> String {
        self.evaluator.describe()
    }

    pub fn eval(&self, r: &Region) -> Result<f64> {
        self.space.check_evaluable(r)?;
        if r.is_empty() {
            return Ok(0.0);
        }
        if let Some(memo) = &self.memo {
            if let Some(v) = memo.read().expect("memo lock").get(r) {
                return Ok(*v);
            }
        }
        let v = self.evaluator.eval(r)?;
        if let Some(memo) = &self.memo {
            // any racing writer computes the same value
            memo.write().expect("memo lock").insert(r.clone(), v);
        }
        Ok(v)
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.eval(&self.space.full(Role::Open))
    }

    /// Point mass δ_x as a direct evaluator.
    pub fn dirac(space: Arc<GridSpace>, cell: usize) -> Result<Self> {
        if !space.is_admissible(cell) {
            return Err(Error::NotAdmissible(format!("cell {cell}")));
        }
        Ok(Self::new(space, Kind::Measure, Arc::new(Dirac { cell })))
    }

    /// Measure with the given nonnegative weight on each cell.
    pub fn cell_weights(space: Arc<GridSpace>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("one finite nonnegative weight per cell required".into()));
        }
        if space.admissible().iter().count() != space.len()
            && (0..space.len()).any(|i| !space.is_admissible(i) && weights[i] != 0.0)
        {
            return Err(Error::InvalidArgument("weight on an excluded cell".into()));
        }
        Ok(Self::new(space, Kind::Measure, Arc::new(CellWeights { weights })))
    }

    /// Normalized cell-count measure (uniform probability over admissible cells).
    pub fn cell_count(space: Arc<GridSpace>) -> Self {
        let n = space.admissible().count() as f64;
        let weights = (0..space.len())
            .map(|i| if space.is_admissible(i) { 1.0 / n } else { 0.0 })
            .collect();
        Self::cell_weights(space, weights).expect("uniform weights are valid")
    }

    /// Σ cᵢ μᵢ with nonnegative coefficients.
    pub fn combination(terms: Vec<(f64, TopoMeasure)>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty combination".into()))?;
        let space = first.1.space.clone();
        let mut kind = Kind::Measure;
        for (c, m) in &terms {
            if *m.space != *space {
                return Err(Error::SpaceMismatch("combination over different spaces".into()));
            }
            if !(*c >= 0.0) {
                return Err(Error::InvalidArgument("negative coefficient".into()));
            }
            kind = kind.combine(m.kind);
        }
        Ok(Self::new(space, kind, Arc::new(Combination { terms })))
    }
}

struct Dirac {
    cell: usize,
}

impl Evaluator for Dirac {
    fn eval(&self, r: &Region) -> Result<f64> {
        Ok(if r.contains(self.cell) { 1.0 } else { 0.0 })
    }
    fn describe(&self) -> String {
        format!("dirac({})", self.cell)
    }
}

struct CellWeights {
    weights: Vec<f64>,
}

impl Evaluator for CellWeights {
    fn eval(&self, r: &Region) -> Result<f64> {
        Ok(r.cells().iter().map(|c| self.weights[c]).sum())
    }
    fn describe(&self) -> String {
        "cell_weights".into()
    }
}

struct Combination {
    terms: Vec<(f64, TopoMeasure)>,
}

impl Evaluator for Combination {
    fn eval(&self, r: &Region) -> Result<f64> {
        let mut s = 0.0;
        for (c, m) in &self.terms {
            s += c * m.eval(r)?;
        }
        Ok(s)
    }
    fn describe(&self) -> String {
        let parts: Vec<String> = self.terms.iter().map(|(c, m)| format!("{c}*{}", m.describe())).collect();
        parts.join("+")
    }
}

/// Evaluator produced by [`extend`].
struct Extension {
    lambda: SolidSetFunction,
}

impl Extension {
    fn connected(&self, c: &Region) -> Result<f64> {
        let space = self.lambda.space();
        let holes = space.complement_components(c);
        let bounded: Vec<Region> = match space.mode() {
            Mode::Compact => {
                if holes.len() <= 1 {
                    return self.lambda.value_unchecked(c);
                }
                holes
            }
            _ => {
                let b: Vec<Region> = holes
                    .into_iter()
                    .filter(|h| h.cells().is_disjoint(space.frame()))
                    .collect();
                if b.is_empty() {
                    return self.lambda.value_unchecked(c);
                }
                b
            }
        };
        let mut hull = c.cells().clone();
        for b in &bounded {
            hull.union_with(b.cells());
        }
        let hull = space.region_from_set(hull, c.role())?;
        let inconsistent = |what: &str, r: &Region| {
            Error::ExtensionInconsistency(format!("{what} {} of {} is not solid", r.to_rle(), c.to_rle()))
        };
        if !space.is_solid(&hull)? {
            return Err(inconsistent("hull", &hull));
        }
        let mut v = self.lambda.value_unchecked(&hull)?;
        for b in &bounded {
            if !space.is_solid(b)? {
                return Err(inconsistent("hole", b));
            }
            v -= self.lambda.value_unchecked(b)?;
        }
        let scale = self.lambda.value_unchecked(&hull)?.max(1.0);
        if v < -EPS * scale {
            return Err(Error::ExtensionInconsistency(format!(
                "negative value {v} on {}",
                c.to_rle()
            )));
        }
        Ok(v.max(0.0))
    }
}

impl Evaluator for Extension {
    fn eval(&self, r: &Region) -> Result<f64> {
        let space = self.lambda.space();
        let mut total = 0.0;
        for c in space.components(r, Adjacency::Region) {
            total += self.connected(&c)?;
        }
        Ok(total)
    }
    fn describe(&self) -> String {
        format!("extension({})", self.lambda.name())
    }
}

/// The topological measure determined by a solid-set function. Solid regions
/// get λ directly; a connected region with holes gets λ of its solid hull
/// minus λ of the holes; a region is the sum over its components. The axioms
/// are the caller's responsibility (see [`check_ssf_axioms`]); violations that
/// surface during evaluation raise [`Error::ExtensionInconsistency`].
pub fn extend(lambda: &SolidSetFunction) -> TopoMeasure {
    if lambda.space().mode() == Mode::Discrete {
        panic!("solid-set functions need a topological grid");
    }
    TopoMeasure::new(
        lambda.space().clone(),
        Kind::Topological,
        Arc::new(Extension { lambda: lambda.clone() }),
    )
}

/// [`extend`] after a passing axiom check.
pub fn extend_checked(lambda: &SolidSetFunction, budget: usize, seed: u64) -> Result<TopoMeasure> {
    let report = check_ssf_axioms(lambda, budget, seed)?;
    if let Some(w) = report.witnesses.first() {
        return Err(Error::InvalidArgument(format!("axiom {} fails: {}", w.axiom, w.detail)));
    }
    Ok(extend(lambda))
}

// ---------------------------------------------------------------- gallery

struct PointMass {
    cell: usize,
}

impl SolidValuation for PointMass {
    fn value(&self, _: &GridSpace, r: &Region) -> Result<f64> {
        Ok(if r.contains(self.cell) { 1.0 } else { 0.0 })
    }
    fn name(&self) -> String {
        format!("point_mass({})", self.cell)
    }
}

pub fn point_mass(space: Arc<GridSpace>, cell: usize) -> Result<SolidSetFunction> {
    if !space.is_admissible(cell) {
        return Err(Error::NotAdmissible(format!("cell {cell}")));
    }
    Ok(SolidSetFunction::new(space, Arc::new(PointMass { cell })))
}

struct PointConfig {
    points: Vec<usize>,
    n: usize,
}

impl SolidValuation for PointConfig {
    fn value(&self, _: &GridSpace, r: &Region) -> Result<f64> {
        let inside = self.points.iter().filter(|&&p| r.contains(p)).count();
        Ok((inside / 2) as f64 / self.n as f64)
    }
    fn name(&self) -> String {
        format!("points_2n1({:?})", self.points)
    }
}

/// λ(A) = ⌊|A ∩ P| / 2⌋ / n for a set P of 2n+1 distinct cells.
pub fn make_point_config(space: Arc<GridSpace>, points: &[usize]) -> Result<SolidSetFunction> {
    if points.len() < 3 || points.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "need an odd number (>= 3) of points, got {}",
            points.len()
        )));
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != points.len() {
        return Err(Error::InvalidArgument("points must be distinct".into()));
    }
    if let Some(p) = points.iter().find(|&&p| !space.is_admissible(p)) {
        return Err(Error::NotAdmissible(format!("point cell {p}")));
    }
    let n = (points.len() - 1) / 2;
    Ok(SolidSetFunction::new(space, Arc::new(PointConfig { points: points.to_vec(), n })))
}

struct WeightedTwoPoint {
    p1: usize,
    p2: usize,
    cell_area: f64,
}

impl SolidValuation for WeightedTwoPoint {
    fn value(&self, _: &GridSpace, r: &Region) -> Result<f64> {
        let hits = r.contains(self.p1) as usize + r.contains(self.p2) as usize;
        Ok(hits as f64 * r.len() as f64 * self.cell_area)
    }
    fn name(&self) -> String {
        format!("two_point_weighted({}, {})", self.p1, self.p2)
    }
}

/// 0, area(A) or 2·area(A) according to how many of the two points A holds.
pub fn make_weighted_two_point(space: Arc<GridSpace>, p1: usize, p2: usize, cell_area: f64) -> Result<SolidSetFunction> {
    if space.mode() != Mode::MarkedInfinity {
        return Err(Error::InvalidArgument("two_point_weighted needs a marked-infinity space".into()));
    }
    if p1 == p2 || !space.is_admissible(p1) || !space.is_admissible(p2) {
        return Err(Error::InvalidArgument("need two distinct interior cells".into()));
    }
    if !(cell_area > 0.0) {
        return Err(Error::InvalidArgument("cell area must be positive".into()));
    }
    Ok(SolidSetFunction::new(space, Arc::new(WeightedTwoPoint { p1, p2, cell_area })))
}

struct AarnesCircle {
    p: usize,
    /// cells with a 4-neighbour outside X
    rim4: CellSet,
    /// cells with an 8-neighbour outside X
    rim8: CellSet,
}

impl SolidValuation for AarnesCircle {
    fn value(&self, _: &GridSpace, r: &Region) -> Result<f64> {
        // The closed boundary circle is met by a closed set through the wide
        // rim and contained through the narrow one; an open set is the reverse.
        let (contain, meet) = match r.role() {
            Role::Compact => (&self.rim4, &self.rim8),
            Role::Open => (&self.rim8, &self.rim4),
        };
        let v = contain.is_subset(r.cells()) || (r.contains(self.p) && r.cells().intersects(meet));
        Ok(if v { 1.0 } else { 0.0 })
    }
    fn name(&self) -> String {
        format!("aarnes_circle({})", self.p)
    }
}

/// Cells of `space` with a neighbour (in `conn`) outside the space.
pub fn rim(space: &GridSpace, conn: Connectivity) -> CellSet {
    let full = space.full(Role::Compact);
    let inner = erode_relative(space, &full, conn);
    space.admissible().difference(inner.cells())
}

fn erode_relative(space: &GridSpace, r: &Region, conn: Connectivity) -> Region {
    let offsets: &[(isize, isize)] = match conn {
        Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
        Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    };
    let mut keep = CellSet::new(space.len());
    for c in r.cells().iter() {
        let (x, y) = space.coords(c);
        let inside = offsets.iter().all(|&(dx, dy)| {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            nx >= 0
                && ny >= 0
                && (nx as usize) < space.width()
                && (ny as usize) < space.height()
                && r.contains(space.index(nx as usize, ny as usize))
        });
        if inside {
            keep.insert(c);
        }
    }
    space.region_from_set(keep, r.role()).expect("subset of an admissible region")
}

/// λ(A) = 1 iff A holds the boundary circle, or holds p and meets the circle.
pub fn make_aarnes_circle(space: Arc<GridSpace>, p: usize) -> Result<SolidSetFunction> {
    if space.mode() != Mode::Compact {
        return Err(Error::InvalidArgument("aarnes_circle needs a compact space".into()));
    }
    let rim4 = rim(&space, Connectivity::Four);
    let rim8 = rim(&space, Connectivity::Eight);
    if !space.is_admissible(p) || rim8.contains(p) {
        return Err(Error::InvalidArgument(format!("cell {p} is not strictly interior")));
    }
    Ok(SolidSetFunction::new(space, Arc::new(AarnesCircle { p, rim4, rim8 })))
}

struct DiffuseDtm {
    d: CellSet,
}

impl Evaluator for DiffuseDtm {
    fn eval(&self, r: &Region) -> Result<f64> {
        Ok(if self.d.is_subset(r.cells()) { 1.0 } else { 0.0 })
    }
    fn describe(&self) -> String {
        format!("diffuse_dtm({} cells)", self.d.count())
    }
}

/// Deficient topological measure: 1 on regions containing the connected set D.
pub fn make_diffuse_dtm(space: Arc<GridSpace>, d: &Region) -> Result<TopoMeasure> {
    space.check(d)?;
    if d.len() < 2 {
        return Err(Error::InvalidArgument("D needs at least two cells".into()));
    }
    if space.components(&d.with_role(Role::Compact), Adjacency::Region).len() != 1 {
        return Err(Error::InvalidArgument("D must be connected".into()));
    }
    Ok(TopoMeasure::new(space, Kind::Deficient, Arc::new(DiffuseDtm { d: d.cells().clone() })))
}

// ---------------------------------------------------------------- checkers

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub axiom: String,
    pub regions: Vec<(String, String)>,
    pub values: Vec<f64>,
    pub detail: String,
}

impl Witness {
    fn new(axiom: &str, regions: &[(&str, &Region)], values: Vec<f64>, detail: String) -> Self {
        Witness {
            axiom: axiom.to_string(),
            regions: regions.iter().map(|(n, r)| (n.to_string(), r.to_rle())).collect(),
            values,
            detail,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckTally {
    pub name: String,
    pub samples: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    pub pass: bool,
    pub checks: Vec<CheckTally>,
    pub witnesses: Vec<Witness>,
}

impl AxiomReport {
    fn from_parts(checks: Vec<CheckTally>, witnesses: Vec<Witness>) -> Self {
        AxiomReport {
            pass: witnesses.is_empty(),
            checks,
            witnesses,
        }
    }

    pub fn first_violation(&self) -> Option<&str> {
        self.witnesses.first().map(|w| w.axiom.as_str())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS * a.abs().max(b.abs()).max(1.0)
}

fn tally(name: &str) -> CheckTally {
    CheckTally {
        name: name.into(),
        samples: 0,
        violations: 0,
    }
}

fn random_size(space: &GridSpace, r: &mut rng::Rng) -> usize {
    let n = space.admissible().count();
    r.gen_range(1..=n.max(1))
}

/// Sampled check of the solid-set function axioms. (s1) superadditivity over
/// disjoint solid compacts inside a solid compact; (s2)/(s3) monotonicity
/// between a solid set and its one-cell dilations/erosions under topological
/// inclusion; (s4) λ(X) = λ(A) + λ(X∖A) for solid A (compact mode). Witnesses
/// are listed in axiom order.
pub fn check_ssf_axioms(lambda: &SolidSetFunction, budget: usize, seed: u64) -> Result<AxiomReport> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let space = lambda.space().clone();
    let mut tallies = Vec::new();
    let mut found: Vec<Witness> = Vec::new();

    // (s1)
    let mut t = tally("s1");
    let mut r = rng::stream(seed, "ssf/s1");
    for _ in 0..budget {
        let size = random_size(&space, &mut r);
        let c = sampling::solid(&space, &mut r, size, Role::Compact);
        let count = r.gen_range(1..=4);
        let pieces = sampling::disjoint_solids_within(&space, &mut r, &c, count, (c.len() / 2).max(1));
        if pieces.is_empty() {
            continue;
        }
        t.samples += 1;
        let whole = lambda.value_unchecked(&c)?;
        let mut parts = Vec::new();
        for p in &pieces {
            parts.push(lambda.value_unchecked(p)?);
        }
        let sum: f64 = parts.iter().sum();
        if sum > whole + EPS * whole.max(1.0) {
            t.violations += 1;
            if found.iter().all(|w| w.axiom != "s1") {
                let mut regions: Vec<(&str, &Region)> = vec![("C", &c)];
                regions.extend(pieces.iter().map(|p| ("C_i", p)));
                let mut values = vec![whole];
                values.extend(parts);
                found.push(Witness::new("s1", &regions, values, format!("sum {sum} exceeds {whole}")));
            }
        }
    }
    tallies.push(t);

    // (s2): a solid compact K and the solid hull of its one-cell open dilation
    let mut t = tally("s2");
    let mut r = rng::stream(seed, "ssf/s2");
    for _ in 0..budget {
        let size = random_size(&space, &mut r);
        let k = sampling::solid(&space, &mut r, size, Role::Compact);
        let grown = space.dilate(&k, Connectivity::Eight).with_role(Role::Open);
        let u = sampling::fill_holes(&space, &grown, None);
        if !space.is_solid(&u)? || !space.is_inside(&k, &u) {
            continue;
        }
        t.samples += 1;
        let (vk, vu) = (lambda.value_unchecked(&k)?, lambda.value_unchecked(&u)?);
        if vk > vu + EPS * vu.max(1.0) {
            t.violations += 1;
            if found.iter().all(|w| w.axiom != "s2") {
                found.push(Witness::new(
                    "s2",
                    &[("K", &k), ("U", &u)],
                    vec![vk, vu],
                    "compact set inside an open set has the larger value".into(),
                ));
            }
        }
    }
    tallies.push(t);

    // (s3): a solid open U against its closure and a one-cell compact dilation
    let mut t = tally("s3");
    let mut r = rng::stream(seed, "ssf/s3");
    for _ in 0..budget {
        let size = random_size(&space, &mut r);
        let u = sampling::solid(&space, &mut r, size, Role::Open);
        let closure = u.with_role(Role::Compact);
        let grown = sampling::fill_holes(&space, &space.dilate(&closure, Connectivity::Four), None);
        let vu = lambda.value_unchecked(&u)?;
        for k in [closure, grown] {
            if !space.is_solid(&k)? || !space.is_inside(&u, &k) {
                continue;
            }
            t.samples += 1;
            let vk = lambda.value_unchecked(&k)?;
            if vu > vk + EPS * vk.max(1.0) {
                t.violations += 1;
                if found.iter().all(|w| w.axiom != "s3") {
                    found.push(Witness::new(
                        "s3",
                        &[("U", &u), ("K", &k)],
                        vec![vu, vk],
                        "open set inside a compact set has the larger value".into(),
                    ));
                }
            }
        }
    }
    tallies.push(t);

    // (s4)
    let mut t = tally("s4");
    if space.mode() == Mode::Compact {
        let mut r = rng::stream(seed, "ssf/s4");
        let vx = lambda.total()?;
        for _ in 0..budget {
            let role = if r.gen_bool(0.5) { Role::Compact } else { Role::Open };
            let size = random_size(&space, &mut r);
            let a = sampling::solid(&space, &mut r, size, role);
            let b = space.complement(&a);
            if b.is_empty() {
                continue;
            }
            t.samples += 1;
            let (va, vb) = (lambda.value_unchecked(&a)?, lambda.value_unchecked(&b)?);
            if !close(vx, va + vb) {
                t.violations += 1;
                if found.iter().all(|w| w.axiom != "s4") {
                    let full = space.full(Role::Compact);
                    found.push(Witness::new(
                        "s4",
                        &[("X", &full), ("A", &a), ("X\\A", &b)],
                        vec![vx, va, vb],
                        format!("partition sums to {} instead of {vx}", va + vb),
                    ));
                }
            }
        }
    }
    tallies.push(t);

    found.sort_by(|a, b| a.axiom.cmp(&b.axiom));
    Ok(AxiomReport::from_parts(tallies, found))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureCriteriaReport {
    pub is_subadditive_on_samples: bool,
    pub samples: usize,
    pub witnesses: Vec<Witness>,
}

fn covered_union(space: &GridSpace, pieces: &[Region]) -> Option<Region> {
    let mut cells = space.empty(Role::Compact).cells().clone();
    let mut faces = CellSet::new(space.face_len());
    for p in pieces {
        cells.union_with(p.cells());
        faces.union_with(&space.faces(p));
    }
    for role in [Role::Compact, Role::Open] {
        let u = space.region_from_set(cells.clone(), role).ok()?;
        if space.faces(&u) == faces {
            return Some(u);
        }
    }
    None
}

/// Subadditivity probe: μ(∪ pieces) ≤ Σ μ(piece) whenever the pieces cover a
/// region exactly. Returns a witness on violation.
pub fn check_cover(mu: &TopoMeasure, pieces: &[Region]) -> Result<Option<Witness>> {
    let space = mu.space();
    let Some(u) = covered_union(space, pieces) else {
        return Ok(None);
    };
    let whole = mu.eval(&u)?;
    let mut values = vec![whole];
    for p in pieces {
        values.push(mu.eval(p)?);
    }
    let sum: f64 = values[1..].iter().sum();
    if whole > sum + EPS * whole.max(1.0) {
        let mut regions: Vec<(&str, &Region)> = vec![("union", &u)];
        regions.extend(pieces.iter().map(|p| ("piece", p)));
        return Ok(Some(Witness::new(
            "subadditivity",
            &regions,
            values,
            format!("union has {whole}, pieces sum to {sum}"),
        )));
    }
    Ok(None)
}

/// Sampled subadditivity on compact-role and open-role pairs, plus every pair
/// of the given probe regions and the probe family as a whole.
pub fn check_measure_criteria(mu: &TopoMeasure, budget: usize, seed: u64, probes: &[Region]) -> Result<MeasureCriteriaReport> {
    let space = mu.space().clone();
    let mut witnesses = Vec::new();
    let mut samples = 0;
    let mut r = rng::stream(seed, "measure-criteria");
    for i in 0..budget {
        let role = if i % 2 == 0 { Role::Compact } else { Role::Open };
        let size = random_size(&space, &mut r).min(space.admissible().count() / 2 + 1);
        let a = sampling::blob(&space, &mut r, size, role);
        let b = sampling::blob(&space, &mut r, size, role);
        samples += 1;
        if let Some(w) = check_cover(mu, &[a, b])? {
            witnesses.push(w);
        }
    }
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            samples += 1;
            if let Some(w) = check_cover(mu, &[probes[i].clone(), probes[j].clone()])? {
                witnesses.push(w);
            }
        }
    }
    if probes.len() > 2 {
        samples += 1;
        if let Some(w) = check_cover(mu, probes)? {
            witnesses.push(w);
        }
    }
    Ok(MeasureCriteriaReport {
        is_subadditive_on_samples: witnesses.is_empty(),
        samples,
        witnesses,
    })
}

/// Random admissible disjoint pair (A, B) with the region their union denotes.
pub fn random_disjoint_pair(space: &GridSpace, r: &mut rng::Rng, compact_only: bool) -> Option<(Region, Region, Region)> {
    let n = space.admissible().count();
    let kind = if compact_only { 0 } else { r.gen_range(0..3) };
    let size = r.gen_range(1..=n.max(1));
    match kind {
        0 | 1 => {
            let role = if kind == 0 { Role::Compact } else { Role::Open };
            let k = r.gen_range(1..=3);
            let a = sampling::scatter(space, r, k, size / 2 + 1, role);
            let free = space.admissible().difference(space.dilate(&a.with_role(Role::Compact), Connectivity::Eight).cells());
            let s = r.gen_range(1..=size / 2 + 1);
            let b = sampling::blob_within(space, r, &free, s, role)?;
            let u = a.union(&b);
            space.is_disjoint_union(&a, &b, &u).then_some((a, b, u))
        }
        _ => {
            let role = if r.gen_bool(0.5) { Role::Compact } else { Role::Open };
            let k = r.gen_range(1..=2);
            let w = sampling::scatter(space, r, k, size, role);
            let core = space.erode(&w, Connectivity::Eight);
            let s = r.gen_range(1..=core.len().max(1));
            let p = sampling::blob_within(space, r, core.cells(), s, role.flip())?;
            let rest = w.difference(&p);
            let (a, b) = match role {
                Role::Compact => (rest.with_role(Role::Compact), p.with_role(Role::Open)),
                Role::Open => (p.with_role(Role::Compact), rest.with_role(Role::Open)),
            };
            space.is_disjoint_union(&a, &b, &w).then_some((a, b, w))
        }
    }
}

/// Sampled TM1: μ(A ⊔ B) = μ(A) + μ(B) on admissible disjoint pairs (compact
/// pairs only for deficient measures).
pub fn check_tm1(mu: &TopoMeasure, budget: usize, seed: u64) -> Result<AxiomReport> {
    let space = mu.space().clone();
    let mut t = tally("tm1");
    let mut witnesses = Vec::new();
    let mut r = rng::stream(seed, "tm1");
    let compact_only = mu.kind() == Kind::Deficient;
    let mut attempts = 0;
    while t.samples < budget && attempts < budget * 20 {
        attempts += 1;
        let Some((a, b, u)) = random_disjoint_pair(&space, &mut r, compact_only) else {
            continue;
        };
        if a.is_empty() || b.is_empty() {
            continue;
        }
        t.samples += 1;
        let (va, vb, vu) = (mu.eval(&a)?, mu.eval(&b)?, mu.eval(&u)?);
        if !close(vu, va + vb) {
            t.violations += 1;
            if witnesses.is_empty() {
                witnesses.push(Witness::new(
                    "tm1",
                    &[("A", &a), ("B", &b), ("A+B", &u)],
                    vec![va, vb, vu],
                    format!("{vu} != {va} + {vb}"),
                ));
            }
        }
    }
    Ok(AxiomReport::from_parts(vec![t], witnesses))
}

/// Sampled superadditivity: μ(A) ≥ Σ μ(A_t) for disjoint solid compacts inside A.
pub fn check_superadditivity(mu: &TopoMeasure, budget: usize, seed: u64) -> Result<AxiomReport> {
    let space = mu.space().clone();
    let mut t = tally("superadditivity");
    let mut witnesses = Vec::new();
    let mut r = rng::stream(seed, "superadditivity");
    for _ in 0..budget {
        let role = if r.gen_bool(0.5) { Role::Compact } else { Role::Open };
        let size = random_size(&space, &mut r);
        let k = r.gen_range(1..=3);
        let a = sampling::scatter(&space, &mut r, k, size, role);
        let inner = match role {
            Role::Compact => a.clone(),
            Role::Open => space.erode(&a, Connectivity::Eight),
        };
        if inner.is_empty() {
            continue;
        }
        let count = r.gen_range(1..=4);
        let pieces = sampling::disjoint_solids_within(&space, &mut r, &inner, count, (inner.len() / 2).max(1));
        if pieces.is_empty() {
            continue;
        }
        t.samples += 1;
        let whole = mu.eval(&a)?;
        let mut sum = 0.0;
        for p in &pieces {
            sum += mu.eval(p)?;
        }
        if sum > whole + EPS * whole.max(1.0) {
            t.violations += 1;
            if witnesses.is_empty() {
                let mut regions: Vec<(&str, &Region)> = vec![("A", &a)];
                regions.extend(pieces.iter().map(|p| ("A_t", p)));
                witnesses.push(Witness::new("superadditivity", &regions, vec![whole, sum], String::new()));
            }
        }
    }
    Ok(AxiomReport::from_parts(vec![t], witnesses))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustiveReport {
    pub pairs_checked: u64,
    pub violations: u64,
    pub witness: Option<Witness>,
}

/// TM1 on every admissible disjoint pair of a small grid (at most 20
/// admissible cells and 128 faces). Deficient measures are checked on compact
/// pairs only.
pub fn check_tm1_exhaustive(mu: &TopoMeasure) -> Result<ExhaustiveReport> {
    use rayon::prelude::*;
    let space = mu.space().clone();
    let cells: Vec<usize> = space.admissible().iter().collect();
    let n = cells.len();
    if n > 20 {
        return Err(Error::InvalidArgument(format!("{n} cells is too many for exhaustive enumeration")));
    }
    let face_index: Vec<usize> = space.faces(&space.full(Role::Compact)).iter().collect();
    if face_index.len() > 128 {
        return Err(Error::InvalidArgument("too many faces for exhaustive enumeration".into()));
    }
    let mut lookup = vec![usize::MAX; space.face_len()];
    for (k, &f) in face_index.iter().enumerate() {
        lookup[f] = k;
    }
    let region = |mask: u32, role: Role| {
        let set = CellSet::from_indices(space.len(), (0..n).filter(|b| mask >> b & 1 == 1).map(|b| cells[b]));
        space.region_from_set(set, role).expect("admissible cells")
    };
    let size = 1usize << n;
    // regions outside the measure's domain get NaN and are skipped
    let table: Vec<Result<[(u128, f64); 2]>> = (0..size)
        .into_par_iter()
        .map(|mask| {
            let mut out = [(0u128, f64::NAN); 2];
            for (k, role) in [Role::Compact, Role::Open].into_iter().enumerate() {
                let r = region(mask as u32, role);
                if space.check_evaluable(&r).is_err() {
                    continue;
                }
                let mut bits = 0u128;
                for f in space.faces(&r).iter() {
                    bits |= 1u128 << lookup[f];
                }
                out[k] = (bits, mu.eval(&r)?);
            }
            Ok(out)
        })
        .collect();
    let table: Vec<[(u128, f64); 2]> = table.into_iter().collect::<Result<_>>()?;
    let deficient = mu.kind() == Kind::Deficient;
    let full = (size - 1) as u32;
    let per_a: Vec<(u64, u64, Option<(u32, usize, u32, usize, usize)>)> = (1..size as u32)
        .into_par_iter()
        .map(|a| {
            let mut checked = 0u64;
            let mut bad = 0u64;
            let mut first = None;
            let rest = full & !a;
            let mut b = rest;
            while b != 0 {
                let u = (a | b) as usize;
                for ra in 0..2 {
                    for rb in 0..2 {
                        if deficient && (ra == 1 || rb == 1) {
                            continue;
                        }
                        let (fa, va) = table[a as usize][ra];
                        let (fb, vb) = table[b as usize][rb];
                        if fa & fb != 0 || va.is_nan() || vb.is_nan() {
                            continue;
                        }
                        for ru in 0..2 {
                            if deficient && ru == 1 {
                                continue;
                            }
                            let (fu, vu) = table[u][ru];
                            if fu != fa | fb || vu.is_nan() {
                                continue;
                            }
                            checked += 1;
                            if (vu - va - vb).abs() > 1e-12 * vu.abs().max(1.0) {
                                bad += 1;
                                first.get_or_insert((a, ra, b, rb, ru));
                            }
                            break;
                        }
                    }
                }
                b = (b - 1) & rest;
            }
            (checked, bad, first)
        })
        .collect();
    let mut report = ExhaustiveReport {
        pairs_checked: 0,
        violations: 0,
        witness: None,
    };
    let roles = [Role::Compact, Role::Open];
    for (c, v, w) in per_a {
        report.pairs_checked += c;
        report.violations += v;
        if report.witness.is_none() {
            if let Some((a, ra, b, rb, ru)) = w {
                let (ra_, rb_, ru_) = (region(a, roles[ra]), region(b, roles[rb]), region(a | b, roles[ru]));
                let values = vec![mu.eval(&ra_)?, mu.eval(&rb_)?, mu.eval(&ru_)?];
                report.witness = Some(Witness::new("tm1", &[("A", &ra_), ("B", &rb_), ("A+B", &ru_)], values, String::new()));
            }
        }
    }
    Ok(report)
}
