//! Image transformations: role-preserving, disjointly additive region maps
//! between grid spaces, with their adjoints on measures and the induced maps
//! θ on functions.

use crate::error::{Error, Result};
use crate::grid::{CellSet, Connectivity, GridSpace, Mode, Region, Role};
use crate::qmeasures::{self, AxiomReport, CheckTally, Evaluator, Kind, TopoMeasure, Witness};
use crate::quasi_integral::{quasi_integral, GridFunction};
use crate::rng;
use crate::sampling;
use rand::Rng as _;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

pub trait RegionMap: Send + Sync {
    fn apply(&self, r: &Region) -> Result<Region>;
    fn describe(&self) -> String;
    /// True when the map is the preimage map of a cell map (adjoints of
    /// measures are then measures).
    fn is_inverse_map(&self) -> bool {
        false
    }
}

#[derive(Clone)]
pub struct ImageTransform {
    source: Arc<GridSpace>,
    target: Arc<GridSpace>,
    map: Arc<dyn RegionMap>,
    memo: Option<Arc<RwLock<HashMap<Region, Region>>>>,
}

impl fmt::Debug for ImageTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ImageTransform({})", self.map.describe())
    }
}

impl ImageTransform {
    pub fn new(source: Arc<GridSpace>, target: Arc<GridSpace>, map: Arc<dyn RegionMap>) -> Self {
        ImageTransform {
            source,
            target,
            map,
            memo: Some(Arc::new(RwLock::new(HashMap::new()))),
        }
    }

    pub fn unmemoized(mut self) -> Self {
        self.memo = None;
        self
    }

    pub fn source(&self) -> &Arc<GridSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<GridSpace> {
        &self.target
    }

    pub fn describe(&self) -> String {
        self.map.describe()
    }

    pub fn is_inverse_map(&self) -> bool {
        self.map.is_inverse_map()
    }

    /// q(A), a region of the target space.
    pub fn apply(&self, r: &Region) -> Result<Region> {
        self.source.check(r)?;
        if let Some(memo) = &self.memo {
            if let Some(v) = memo.read().expect("memo lock").get(r) {
                return Ok(v.clone());
            }
        }
        let out = self.map.apply(r)?;
        self.target.check(&out)?;
        if let Some(memo) = &self.memo {
            memo.write().expect("memo lock").insert(r.clone(), out.clone());
        }
        Ok(out)
    }

    pub fn identity(space: Arc<GridSpace>) -> Self {
        let u: Vec<usize> = (0..space.len()).collect();
        from_proper_map(space.clone(), space, u).expect("identity is proper")
    }
}

struct InverseMap {
    /// source cell for every target cell
    u: Vec<usize>,
    target: Arc<GridSpace>,
}

impl RegionMap for InverseMap {
    fn apply(&self, r: &Region) -> Result<Region> {
        let cells = self.target.admissible().iter().filter(|&y| r.contains(self.u[y]));
        self.target.region_from_set(CellSet::from_indices(self.target.len(), cells), r.role())
    }
    fn describe(&self) -> String {
        "inverse_map".into()
    }
    fn is_inverse_map(&self) -> bool {
        true
    }
}

/// q(A) = u⁻¹(A) for a cell map `u` from the target grid to the source grid
/// (indexed by target cell). Additivity needs `u` to be continuous on the
/// closed cells (isometries, clamps, folds and their composites); preimages
/// under an arbitrary scramble of cells are not checked here.
pub fn from_proper_map(source: Arc<GridSpace>, target: Arc<GridSpace>, u: Vec<usize>) -> Result<ImageTransform> {
    if u.len() != target.len() {
        return Err(Error::InvalidArgument(format!(
            "map needs {} entries, got {}",
            target.len(),
            u.len()
        )));
    }
    for y in target.admissible().iter() {
        if u[y] >= source.len() || !source.is_admissible(u[y]) {
            return Err(Error::InvalidArgument(format!("cell {y} maps outside the source ({})", u[y])));
        }
    }
    if target.mode() == Mode::MarkedInfinity {
        // a precompact source cell must not pull back onto the target frame
        if let Some(y) = target.frame().iter().find(|&y| !source.frame().contains(u[y])) {
            return Err(Error::ImproperMap(format!(
                "frame cell {y} maps to cell {} away from the source frame",
                u[y]
            )));
        }
    }
    let map = InverseMap { u, target: target.clone() };
    Ok(ImageTransform::new(source, target, Arc::new(map)))
}

/// One of the 8 symmetries of a square grid as a cell map: `k % 4` quarter
/// turns, then a mirror when `k >= 4`.
pub fn square_isometry(space: &GridSpace, k: usize) -> Result<Vec<usize>> {
    let n = space.width();
    if space.height() != n || k >= 8 {
        return Err(Error::InvalidArgument("isometries need a square grid and k < 8".into()));
    }
    Ok((0..space.len())
        .map(|i| {
            let (mut x, mut y) = space.coords(i);
            for _ in 0..k % 4 {
                (x, y) = (n - 1 - y, x);
            }
            if k >= 4 {
                x = n - 1 - x;
            }
            space.index(x, y)
        })
        .collect())
}

/// Clamp one coordinate (0 = x, 1 = y) into `lo..=hi`.
pub fn clamp_map(space: &GridSpace, axis: usize, lo: usize, hi: usize) -> Result<Vec<usize>> {
    let extent = if axis == 0 { space.width() } else { space.height() };
    if axis > 1 || lo > hi || hi >= extent || space.mode() == Mode::Discrete {
        return Err(Error::InvalidArgument(format!("bad clamp {axis} {lo}..={hi}")));
    }
    Ok((0..space.len())
        .map(|i| {
            let (mut x, mut y) = space.coords(i);
            let c = if axis == 0 { &mut x } else { &mut y };
            *c = (*c).clamp(lo, hi);
            space.index(x, y)
        })
        .collect())
}

/// Fold one coordinate across the grid line in front of column (or row) `c`:
/// positions below `c` are mirrored onto `c..2c`.
pub fn fold_map(space: &GridSpace, axis: usize, c: usize) -> Result<Vec<usize>> {
    let extent = if axis == 0 { space.width() } else { space.height() };
    if axis > 1 || c == 0 || 2 * c > extent || space.mode() == Mode::Discrete {
        return Err(Error::InvalidArgument(format!("bad fold {axis} at {c}")));
    }
    Ok((0..space.len())
        .map(|i| {
            let (mut x, mut y) = space.coords(i);
            let v = if axis == 0 { &mut x } else { &mut y };
            if *v < c {
                *v = 2 * c - 1 - *v;
            }
            space.index(x, y)
        })
        .collect())
}

/// A random composite of clamps, folds and (on square grids) isometries of a
/// compact grid, as a cell map.
pub fn random_continuous_map(space: &GridSpace, r: &mut rng::Rng, steps: usize) -> Result<Vec<usize>> {
    if space.mode() != Mode::Compact || space.admissible().count() != space.len() {
        return Err(Error::InvalidArgument("needs a full compact grid".into()));
    }
    let mut u: Vec<usize> = (0..space.len()).collect();
    for _ in 0..steps {
        let axis = r.gen_range(0..2);
        let extent = if axis == 0 { space.width() } else { space.height() };
        let step = match r.gen_range(0..3) {
            0 if space.width() == space.height() => square_isometry(space, r.gen_range(0..8))?,
            1 => {
                let lo = r.gen_range(0..extent);
                clamp_map(space, axis, lo, r.gen_range(lo..extent))?
            }
            _ => fold_map(space, axis, r.gen_range(1..=extent / 2))?,
        };
        u = u.iter().map(|&v| step[v]).collect();
    }
    Ok(u)
}

struct ConstantMap {
    measure: TopoMeasure,
    target: Arc<GridSpace>,
}

impl RegionMap for ConstantMap {
    fn apply(&self, r: &Region) -> Result<Region> {
        let v = self.measure.eval(r)?;
        if v == 1.0 {
            Ok(self.target.full(r.role()))
        } else if v == 0.0 {
            Ok(self.target.empty(r.role()))
        } else {
            Err(Error::NotSimple(format!("value {v} on {}", r.to_rle())))
        }
    }
    fn describe(&self) -> String {
        format!("constant_simple({})", self.measure.describe())
    }
}

/// The transformation whose adjoint sends every normalized measure to `mu_s`:
/// q(A) is the whole target when μs(A) = 1 and empty otherwise.
pub fn constant_from_simple(mu_s: &TopoMeasure, target: Arc<GridSpace>) -> Result<ImageTransform> {
    if target.mode() != Mode::Compact {
        return Err(Error::InvalidArgument("constant_simple needs a compact target".into()));
    }
    let source = mu_s.space().clone();
    let total = mu_s.total_mass()?;
    if total != 1.0 {
        return Err(Error::NotSimple(format!("total mass {total}")));
    }
    let mut r = rng::stream(0, "constant-simple/probe");
    for i in 0..256 {
        let role = if i % 2 == 0 { Role::Compact } else { Role::Open };
        let size = r.gen_range(1..=source.admissible().count());
        let a = sampling::scatter(&source, &mut r, 2, size, role);
        let v = mu_s.eval(&a)?;
        if v != 0.0 && v != 1.0 {
            return Err(Error::NotSimple(format!("value {v} on {}", a.to_rle())));
        }
    }
    let map = ConstantMap {
        measure: mu_s.clone(),
        target: target.clone(),
    };
    Ok(ImageTransform::new(source, target, Arc::new(map)))
}

pub type SolidMap = Arc<dyn Fn(&Region) -> Result<Region> + Send + Sync>;

struct SolidExtension {
    source: Arc<GridSpace>,
    target: Arc<GridSpace>,
    q0: SolidMap,
    name: String,
}

impl SolidExtension {
    fn solid(&self, r: &Region) -> Result<Region> {
        let out = (self.q0)(r)?;
        self.target.region_from_set(out.cells().clone(), r.role())
    }

    fn connected(&self, c: &Region) -> Result<Region> {
        let space = &self.source;
        let holes = space.complement_components(c);
        let bounded: Vec<Region> = match space.mode() {
            Mode::Compact if holes.len() <= 1 => return self.solid(c),
            Mode::Compact => holes,
            _ => {
                let b: Vec<Region> = holes
                    .into_iter()
                    .filter(|h| h.cells().is_disjoint(space.frame()))
                    .collect();
                if b.is_empty() {
                    return self.solid(c);
                }
                b
            }
        };
        let mut hull = c.cells().clone();
        for b in &bounded {
            hull.union_with(b.cells());
        }
        let hull = space.region_from_set(hull, c.role())?;
        let fail = |msg: String| Error::ExtensionInconsistency(format!("{msg} (region {})", c.to_rle()));
        if !space.is_solid(&hull)? {
            return Err(fail(format!("hull {} is not solid", hull.to_rle())));
        }
        let image = self.solid(&hull)?;
        let mut removed = CellSet::new(self.target.len());
        for b in &bounded {
            if !space.is_solid(b)? {
                return Err(fail(format!("hole {} is not solid", b.to_rle())));
            }
            let qb = self.solid(b)?;
            if !qb.cells().is_subset(image.cells()) {
                return Err(fail(format!("image of hole {} leaves the image of the hull", b.to_rle())));
            }
            if qb.cells().intersects(&removed) {
                return Err(fail(format!("images of holes overlap at {}", b.to_rle())));
            }
            removed.union_with(qb.cells());
        }
        self.target.region_from_set(image.cells().difference(&removed), c.role())
    }
}

impl RegionMap for SolidExtension {
    fn apply(&self, r: &Region) -> Result<Region> {
        let mut out = CellSet::new(self.target.len());
        for c in self.source.components(r, crate::grid::Adjacency::Region) {
            let img = self.connected(&c)?;
            if img.cells().intersects(&out) {
                return Err(Error::ExtensionInconsistency(format!(
                    "images of two components of {} overlap",
                    r.to_rle()
                )));
            }
            out.union_with(img.cells());
        }
        self.target.region_from_set(out, r.role())
    }
    fn describe(&self) -> String {
        format!("solid_extension({})", self.name)
    }
}

/// Extend a map given on solid regions to all regions: a connected region
/// with holes maps to q₀(hull) minus the images of the holes, and a region
/// maps to the union over its components. The output role always follows
/// the input role.
pub fn extend_solid_q(source: Arc<GridSpace>, target: Arc<GridSpace>, q0: SolidMap, name: &str) -> Result<ImageTransform> {
    if source.mode() == Mode::Discrete {
        return Err(Error::DiscreteSolidness);
    }
    let map = SolidExtension {
        source: source.clone(),
        target: target.clone(),
        q0,
        name: name.to_string(),
    };
    Ok(ImageTransform::new(source, target, Arc::new(map)))
}

/// On solid A: ∅, A or X according to whether A holds 0, 1 or 2 of {x, z};
/// extended to all regions.
pub fn two_point_hull(space: Arc<GridSpace>, x: usize, z: usize) -> Result<ImageTransform> {
    if space.mode() != Mode::Compact {
        return Err(Error::InvalidArgument("two_point_hull needs a compact space".into()));
    }
    if x == z || !space.is_admissible(x) || !space.is_admissible(z) {
        return Err(Error::InvalidArgument("need two distinct cells".into()));
    }
    let s = space.clone();
    let q0: SolidMap = Arc::new(move |a: &Region| {
        Ok(match a.contains(x) as u8 + a.contains(z) as u8 {
            0 => s.empty(a.role()),
            1 => a.clone(),
            _ => s.full(a.role()),
        })
    });
    extend_solid_q(space.clone(), space, q0, &format!("two_point_hull({x}, {z})"))
}

struct Composition {
    outer: ImageTransform,
    inner: ImageTransform,
}

impl RegionMap for Composition {
    fn apply(&self, r: &Region) -> Result<Region> {
        self.outer.apply(&self.inner.apply(r)?)
    }
    fn describe(&self) -> String {
        format!("{} . {}", self.outer.describe(), self.inner.describe())
    }
    fn is_inverse_map(&self) -> bool {
        self.outer.is_inverse_map() && self.inner.is_inverse_map()
    }
}

/// (p ∘ q)(A) = p(q(A)).
pub fn compose(p: &ImageTransform, q: &ImageTransform) -> Result<ImageTransform> {
    if **q.target() != **p.source() {
        return Err(Error::SpaceMismatch("target of q differs from source of p".into()));
    }
    let map = Composition {
        outer: p.clone(),
        inner: q.clone(),
    };
    Ok(ImageTransform::new(q.source().clone(), p.target().clone(), Arc::new(map)))
}

struct MinusCell {
    space: Arc<GridSpace>,
    cell: usize,
}

impl RegionMap for MinusCell {
    fn apply(&self, r: &Region) -> Result<Region> {
        let mut cells = r.cells().clone();
        cells.remove(self.cell);
        self.space.region_from_set(cells, r.role())
    }
    fn describe(&self) -> String {
        format!("minus_cell({})", self.cell)
    }
}

/// A deliberately broken map, q(A) = A ∖ {cell}, for exercising the checker.
pub fn minus_cell(space: Arc<GridSpace>, cell: usize) -> ImageTransform {
    ImageTransform::new(space.clone(), space.clone(), Arc::new(MinusCell { space, cell }))
}

struct Adjoint {
    q: ImageTransform,
    nu: TopoMeasure,
}

impl Evaluator for Adjoint {
    fn eval(&self, r: &Region) -> Result<f64> {
        self.nu.eval(&self.q.apply(r)?)
    }
    fn describe(&self) -> String {
        format!("adjoint({}, {})", self.q.describe(), self.nu.describe())
    }
}

/// ν(q(A)).
pub fn adjoint_eval(q: &ImageTransform, nu: &TopoMeasure, a: &Region) -> Result<f64> {
    nu.eval(&q.apply(a)?)
}

/// q*ν as a measure on the source space.
pub fn adjoint(q: &ImageTransform, nu: &TopoMeasure) -> Result<TopoMeasure> {
    if **nu.space() != **q.target() {
        return Err(Error::SpaceMismatch("measure does not live on the target of q".into()));
    }
    let kind = match nu.kind() {
        Kind::Deficient => Kind::Deficient,
        Kind::Measure if q.is_inverse_map() => Kind::Measure,
        _ => Kind::Topological,
    };
    let ev = Adjoint {
        q: q.clone(),
        nu: nu.clone(),
    };
    Ok(TopoMeasure::new(q.source().clone(), kind, Arc::new(ev)))
}

/// θ(f)(y) as the quasi-integral of f against q*δ_y.
pub fn theta_eval(q: &ImageTransform, f: &GridFunction, y: usize) -> Result<f64> {
    let delta = TopoMeasure::dirac(q.target().clone(), y)?;
    quasi_integral(&adjoint(q, &delta)?, f)
}

/// θ(f) on every target cell at once: with sweep points t₀ < t₁ < … of f,
/// θ(f)(y) = t₀·[y ∈ q(X)] + Σ (t_{j+1} − t_j)·[y ∈ q({f > t_j})].
pub fn theta(q: &ImageTransform, f: &GridFunction) -> Result<GridFunction> {
    let source = q.source();
    let target = q.target();
    let mut pts: Vec<f64> = source.admissible().iter().map(|i| f.value(i)).collect();
    if source.mode() == Mode::MarkedInfinity {
        pts.push(0.0);
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    pts.dedup();
    let mut out = vec![0.0; target.len()];
    let whole = q.apply(&source.full(Role::Open))?;
    for y in whole.cells().iter() {
        out[y] = pts[0];
    }
    for j in 0..pts.len() - 1 {
        let level = crate::quasi_integral::superlevel(source, f, pts[j], true);
        let img = q.apply(&level)?;
        let step = pts[j + 1] - pts[j];
        for y in img.cells().iter() {
            out[y] += step;
        }
    }
    GridFunction::new(target, out)
}

fn record(found: &mut Vec<Witness>, w: Witness) {
    if found.iter().all(|x| x.axiom != w.axiom) {
        found.push(w);
    }
}

fn witness(axiom: &str, regions: &[(&str, &Region)], detail: String) -> Witness {
    Witness {
        axiom: axiom.into(),
        regions: regions.iter().map(|(n, r)| (n.to_string(), r.to_rle())).collect(),
        values: Vec::new(),
        detail,
    }
}

/// Sampled image-transformation axioms, reported in this order: "it1" (roles
/// kept, empty to empty, compact images stay evaluable), "it2" (disjoint
/// additivity checked on the denoted point sets), "monotone" (nested pairs),
/// "chain" (maximal one-cell compact chains inside an open set, and open
/// dilations shrinking to a compact set, map into nested images), "h5"
/// (q(X) = Y).
pub fn check_it_axioms(q: &ImageTransform, budget: usize, seed: u64) -> Result<AxiomReport> {
    let (src, tgt) = (q.source().clone(), q.target().clone());
    let mut found = Vec::new();
    let mut tallies = Vec::new();
    let mut tally = |name: &str, samples: usize, violations: usize| {
        tallies.push(CheckTally {
            name: name.into(),
            samples,
            violations,
        })
    };
    let n = src.admissible().count();

    // it1
    let (mut s, mut v) = (0, 0);
    for role in [Role::Compact, Role::Open] {
        let e = q.apply(&src.empty(role))?;
        s += 1;
        if !e.is_empty() || e.role() != role {
            v += 1;
            record(&mut found, witness("it1", &[("empty", &src.empty(role))], "empty set maps to a nonempty set".into()));
        }
    }
    let mut r = rng::stream(seed, "it/roles");
    for i in 0..budget {
        let role = if i % 2 == 0 { Role::Compact } else { Role::Open };
        let size = r.gen_range(1..=n);
        let a = sampling::scatter(&src, &mut r, 2, size, role);
        let img = q.apply(&a)?;
        s += 1;
        if img.role() != role || tgt.check_evaluable(&img).is_err() {
            v += 1;
            record(&mut found, witness("it1", &[("A", &a), ("q(A)", &img)], "role or domain not preserved".into()));
        }
    }
    tally("it1", s, v);

    // it2
    let (mut s, mut v) = (0, 0);
    let mut r = rng::stream(seed, "it/additivity");
    let mut attempts = 0;
    while s < budget && attempts < budget * 20 {
        attempts += 1;
        let pair = if attempts % 3 == 0 {
            let size = r.gen_range(1..=n);
            let k = sampling::blob(&src, &mut r, size, Role::Compact);
            let rest = src.complement(&k);
            Some((k, rest, src.full(Role::Compact)))
        } else {
            qmeasures::random_disjoint_pair(&src, &mut r, false)
        };
        let Some((a, b, u)) = pair else { continue };
        s += 1;
        let (qa, qb, qu) = (q.apply(&a)?, q.apply(&b)?, q.apply(&u)?);
        if !tgt.is_disjoint_union(&qa, &qb, &qu) {
            v += 1;
            record(
                &mut found,
                witness(
                    "it2",
                    &[("A", &a), ("B", &b), ("A+B", &u), ("q(A)", &qa), ("q(B)", &qb), ("q(A+B)", &qu)],
                    "images are not a disjoint decomposition of the image of the union".into(),
                ),
            );
        }
    }
    tally("it2", s, v);

    // monotone
    let (mut s, mut v) = (0, 0);
    let mut r = rng::stream(seed, "it/monotone");
    for i in 0..budget {
        let role = if i % 2 == 0 { Role::Compact } else { Role::Open };
        let size = r.gen_range(1..=n);
        let b = sampling::scatter(&src, &mut r, 2, size, role);
        let sub = r.gen_range(1..=b.len().max(1));
        let Some(a) = sampling::blob_within(&src, &mut r, b.cells(), sub, role) else { continue };
        s += 1;
        let (qa, qb) = (q.apply(&a)?, q.apply(&b)?);
        if !qa.is_subset(&qb) {
            v += 1;
            record(&mut found, witness("monotone", &[("A", &a), ("B", &b)], "q(A) not inside q(B)".into()));
        }
    }
    tally("monotone", s, v);

    // chain
    let (mut s, mut v) = (0, 0);
    let mut r = rng::stream(seed, "it/chain");
    for _ in 0..budget.div_ceil(4) {
        let size = r.gen_range(1..=n);
        let u = sampling::scatter(&src, &mut r, 2, size, Role::Open);
        let inner = src.erode(&u, Connectivity::Eight).with_role(Role::Compact);
        let inner = inner.intersection(&src.region_from_set(src.usable(Role::Compact), Role::Compact)?);
        let qu = q.apply(&u)?;
        if let Some(start) = inner.cells().iter().nth(r.gen_range(0..inner.len().max(1))) {
            // grow one cell at a time through the whole of `inner`
            let mut k = src.region([start], Role::Compact)?;
            let mut prev = q.apply(&k)?;
            loop {
                s += 1;
                if !prev.is_subset(&qu) {
                    v += 1;
                    record(&mut found, witness("chain", &[("K", &k), ("U", &u)], "q(K) not inside q(U)".into()));
                    break;
                }
                let next = inner.cells().difference(k.cells()).iter().find(|&c| {
                    src.neighbours(c, Connectivity::Eight).any(|m| k.contains(m))
                });
                let Some(c) = next.or_else(|| inner.cells().difference(k.cells()).first()) else { break };
                let mut cells = k.cells().clone();
                cells.insert(c);
                k = src.region_from_set(cells, Role::Compact)?;
                let img = q.apply(&k)?;
                if !prev.is_subset(&img) {
                    v += 1;
                    record(&mut found, witness("chain", &[("K", &k)], "chain images not nested".into()));
                    break;
                }
                prev = img;
            }
        }
        // shrinking open neighbourhoods of a compact set
        let kcells = src.usable(Role::Compact);
        let ksize = r.gen_range(1..=n);
        let Some(k) = sampling::blob_within(&src, &mut r, &kcells, ksize, Role::Compact) else { continue };
        let qk = q.apply(&k)?;
        let mut nbhd = src.dilate(&k, Connectivity::Eight).with_role(Role::Open);
        let mut smaller: Option<Region> = None;
        for _ in 0..3 {
            let qn = q.apply(&nbhd)?;
            s += 1;
            let nested = smaller.as_ref().is_none_or(|o| o.is_subset(&qn));
            if !qk.is_subset(&qn) || !nested {
                v += 1;
                record(&mut found, witness("chain", &[("K", &k), ("U", &nbhd)], "open neighbourhood images not nested".into()));
                break;
            }
            smaller = Some(qn);
            nbhd = src.dilate(&nbhd, Connectivity::Eight);
        }
    }
    tally("chain", s, v);

    // h5
    let mut v = 0;
    for role in [Role::Compact, Role::Open] {
        let img = q.apply(&src.full(role))?;
        if img.cells() != tgt.admissible() {
            v += 1;
            record(&mut found, witness("h5", &[("X", &src.full(role)), ("q(X)", &img)], "q(X) is not Y".into()));
        }
    }
    tally("h5", 2, v);

    let order = ["it1", "it2", "monotone", "chain", "h5"];
    found.sort_by_key(|w| order.iter().position(|o| *o == w.axiom));
    Ok(AxiomReport {
        pass: found.is_empty(),
        checks: tallies,
        witnesses: found,
    })
}

/// Disjoint additivity of q on every admissible disjoint pair of a small
/// source grid, compared on the target's point sets. Returns the number of
/// pairs checked and the violations.
pub fn check_it2_exhaustive(q: &ImageTransform) -> Result<(u64, u64)> {
    use rayon::prelude::*;
    let (src, tgt) = (q.source().clone(), q.target().clone());
    let cells: Vec<usize> = src.admissible().iter().collect();
    let n = cells.len();
    if n > 20 {
        return Err(Error::InvalidArgument("too many cells for exhaustive enumeration".into()));
    }
    let index = |space: &GridSpace| {
        let faces: Vec<usize> = space.faces(&space.full(Role::Compact)).iter().collect();
        let mut lookup = vec![usize::MAX; space.face_len()];
        for (k, &f) in faces.iter().enumerate() {
            lookup[f] = k;
        }
        (faces.len(), lookup)
    };
    let (ns, src_lookup) = index(&src);
    let (nt, tgt_lookup) = index(&tgt);
    if ns > 128 || nt > 128 {
        return Err(Error::InvalidArgument("too many faces for exhaustive enumeration".into()));
    }
    let pack = |faces: CellSet, lookup: &[usize]| faces.iter().fold(0u128, |acc, f| acc | 1u128 << lookup[f]);
    let size = 1usize << n;
    let table: Vec<Result<[(u128, u128); 2]>> = (0..size)
        .into_par_iter()
        .map(|mask| {
            let mut out = [(0, 0); 2];
            for (k, role) in [Role::Compact, Role::Open].into_iter().enumerate() {
                let set = CellSet::from_indices(src.len(), (0..n).filter(|b| mask >> b & 1 == 1).map(|b| cells[b]));
                let r = src.region_from_set(set, role)?;
                let img = q.apply(&r)?;
                out[k] = (pack(src.faces(&r), &src_lookup), pack(tgt.faces(&img), &tgt_lookup));
            }
            Ok(out)
        })
        .collect();
    let table: Vec<[(u128, u128); 2]> = table.into_iter().collect::<Result<_>>()?;
    let full = (size - 1) as u32;
    let counts: Vec<(u64, u64)> = (1..size as u32)
        .into_par_iter()
        .map(|a| {
            let (mut checked, mut bad) = (0u64, 0u64);
            let rest = full & !a;
            let mut b = rest;
            while b != 0 {
                let u = (a | b) as usize;
                for ra in 0..2 {
                    for rb in 0..2 {
                        let (fa, ia) = table[a as usize][ra];
                        let (fb, ib) = table[b as usize][rb];
                        if fa & fb != 0 {
                            continue;
                        }
                        for ru in 0..2 {
                            let (fu, iu) = table[u][ru];
                            if fu != fa | fb {
                                continue;
                            }
                            checked += 1;
                            if ia & ib != 0 || ia | ib != iu {
                                bad += 1;
                            }
                            break;
                        }
                    }
                }
                b = (b - 1) & rest;
            }
            (checked, bad)
        })
        .collect();
    Ok(counts.into_iter().fold((0, 0), |(c, b), (x, y)| (c + x, b + y)))
}
