//! Markov operators S(μ) = Σ αᵢ qᵢ*(μ) on grid measures, their discrete
//! counterpart (pushforward mixtures under affine contractions), fixed-point
//! iteration, the chaos game and density rasters.

use crate::error::{Error, Result};
use crate::grid::{Region, Role};
use crate::image_transforms::ImageTransform;
use crate::kr::{d_kr_topo_lower, euclid, w1_discrete, DiscreteMeasure};
use crate::qmeasures::{Evaluator, Kind, TopoMeasure};
use crate::rng;
use crate::sampling;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

/// (x, y) ↦ (a·x + b·y + e, c·x + d·y + f).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct AffineMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl AffineMap {
    pub fn scaling(s: f64, shift: [f64; 2]) -> Self {
        AffineMap {
            a: s,
            b: 0.0,
            c: 0.0,
            d: s,
            e: shift[0],
            f: shift[1],
        }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [self.a * p[0] + self.b * p[1] + self.e, self.c * p[0] + self.d * p[1] + self.f]
    }

    /// Largest singular value of the linear part.
    pub fn lipschitz(&self) -> f64 {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let t = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        ((t + (t * t - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
    }

    /// The fixed point, when the map is a contraction.
    pub fn fixed_point(&self) -> Option<[f64; 2]> {
        let (a, b, c, d) = (self.a - 1.0, self.b, self.c, self.d - 1.0);
        let det = a * d - b * c;
        if det.abs() < 1e-300 {
            return None;
        }
        Some([(-self.e * d + b * self.f) / det, (-a * self.f + c * self.e) / det])
    }
}

#[derive(Clone, Debug)]
pub enum Backend {
    Grid(Vec<ImageTransform>),
    Affine(Vec<AffineMap>),
}

#[derive(Clone, Debug)]
pub struct TransformSystem {
    backend: Backend,
    alphas: Vec<f64>,
    tail_bound: f64,
}

fn check_alphas(alphas: &[f64], count: usize) -> Result<()> {
    if alphas.len() != count || count == 0 {
        return Err(Error::InvalidArgument("one weight per map required".into()));
    }
    if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    let total: f64 = alphas.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!("weights sum to {total} > 1")));
    }
    Ok(())
}

/// Keep the first n terms of a generator, with n the least index whose tail
/// certificate is at most `eps`.
fn truncate<T>(mut generator: impl FnMut(usize) -> (T, f64), tail: impl Fn(usize) -> f64, eps: f64, max_terms: usize) -> Result<(Vec<T>, Vec<f64>, f64)> {
    let mut items = Vec::new();
    let mut alphas = Vec::new();
    for n in 1..=max_terms {
        let (item, alpha) = generator(n);
        items.push(item);
        alphas.push(alpha);
        let t = tail(n);
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("tail certificate {t} at {n}")));
        }
        if t <= eps {
            return Ok((items, alphas, t));
        }
    }
    Err(Error::InvalidArgument(format!("tail above {eps} after {max_terms} terms")))
}

impl TransformSystem {
    pub fn grid(transforms: Vec<ImageTransform>, alphas: Vec<f64>) -> Result<Self> {
        check_alphas(&alphas, transforms.len())?;
        let first = &transforms[0];
        if transforms
            .iter()
            .any(|q| **q.source() != **first.source() || **q.target() != **first.target())
        {
            return Err(Error::SpaceMismatch("transforms of a system must share spaces".into()));
        }
        Ok(TransformSystem {
            backend: Backend::Grid(transforms),
            alphas,
            tail_bound: 0.0,
        })
    }

    pub fn affine(maps: Vec<AffineMap>, alphas: Vec<f64>) -> Result<Self> {
        check_alphas(&alphas, maps.len())?;
        Ok(TransformSystem {
            backend: Backend::Affine(maps),
            alphas,
            tail_bound: 0.0,
        })
    }

    /// Truncation of an infinite grid system: `generator(i)` yields the i-th
    /// transform and weight (i ≥ 1), `tail(n)` bounds Σ_{i>n} αᵢ.
    pub fn grid_from_generator(
        generator: impl FnMut(usize) -> (ImageTransform, f64),
        tail: impl Fn(usize) -> f64,
        eps: f64,
    ) -> Result<Self> {
        let (ts, alphas, t) = truncate(generator, tail, eps, 10_000)?;
        let mut s = Self::grid(ts, alphas)?;
        s.tail_bound = t;
        Ok(s)
    }

    pub fn affine_from_generator(generator: impl FnMut(usize) -> (AffineMap, f64), tail: impl Fn(usize) -> f64, eps: f64) -> Result<Self> {
        let (maps, alphas, t) = truncate(generator, tail, eps, 10_000)?;
        let mut s = Self::affine(maps, alphas)?;
        s.tail_bound = t;
        Ok(s)
    }

    /// The three half-scale maps of the Sierpinski gasket with vertices
    /// (0, 0), (1, 0), (1/2, √3/2), equally weighted.
    pub fn sierpinski() -> Self {
        let h = 3f64.sqrt() / 4.0;
        let maps = [[0.0, 0.0], [0.5, 0.0], [0.25, h]]
            .into_iter()
            .map(|b| AffineMap::scaling(0.5, b))
            .collect();
        Self::affine(maps, vec![1.0 / 3.0; 3]).expect("valid weights")
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// max sᵢ over the affine maps; None for the grid backend.
    pub fn contraction_factor(&self) -> Option<f64> {
        match &self.backend {
            Backend::Affine(maps) => Some(maps.iter().map(AffineMap::lipschitz).fold(0.0, f64::max)),
            Backend::Grid(_) => None,
        }
    }

    /// Σ αᵢ sᵢ, which bounds W₁(Mμ, Mν) / W₁(μ, ν).
    pub fn averaged_factor(&self) -> Option<f64> {
        match &self.backend {
            Backend::Affine(maps) => Some(maps.iter().zip(&self.alphas).map(|(m, a)| a * m.lipschitz()).sum()),
            Backend::Grid(_) => None,
        }
    }

    fn transforms(&self) -> Result<&[ImageTransform]> {
        match &self.backend {
            Backend::Grid(t) => Ok(t),
            Backend::Affine(_) => Err(Error::InvalidArgument("needs the grid backend".into())),
        }
    }

    fn maps(&self) -> Result<&[AffineMap]> {
        match &self.backend {
            Backend::Affine(m) => Ok(m),
            Backend::Grid(_) => Err(Error::InvalidArgument("needs the affine backend".into())),
        }
    }
}

type Memo = Arc<RwLock<HashMap<(usize, Region), f64>>>;

/// S^k(μ) evaluated lazily by expanding one level at a time, memoized on
/// (level, region).
struct Iterate {
    transforms: Vec<ImageTransform>,
    alphas: Vec<f64>,
    root: TopoMeasure,
    k: usize,
    memo: Memo,
}

impl Iterate {
    fn level(&self, k: usize, r: &Region) -> Result<f64> {
        if k == 0 {
            return self.root.eval(r);
        }
        if let Some(v) = self.memo.read().expect("memo lock").get(&(k, r.clone())) {
            return Ok(*v);
        }
        let mut v = 0.0;
        for (q, a) in self.transforms.iter().zip(&self.alphas) {
            v += a * self.level(k - 1, &q.apply(r)?)?;
        }
        self.memo.write().expect("memo lock").insert((k, r.clone()), v);
        Ok(v)
    }
}

impl Evaluator for Iterate {
    fn eval(&self, r: &Region) -> Result<f64> {
        self.level(self.k, r)
    }
    fn describe(&self) -> String {
        format!("markov^{}({})", self.k, self.root.describe())
    }
}

/// S^k(μ) as a lazily evaluated measure on the sources of the transforms.
pub fn iterate(system: &TransformSystem, mu: &TopoMeasure, k: usize) -> Result<TopoMeasure> {
    let ts = system.transforms()?;
    if **mu.space() != **ts[0].target() {
        return Err(Error::SpaceMismatch("measure does not live on the targets of the system".into()));
    }
    if k > 1 && **ts[0].source() != **ts[0].target() {
        return Err(Error::SpaceMismatch("iteration needs transforms from a space to itself".into()));
    }
    if k == 0 {
        return Ok(mu.clone());
    }
    let kind = match mu.kind() {
        Kind::Deficient => Kind::Deficient,
        Kind::Measure if ts.iter().all(ImageTransform::is_inverse_map) => Kind::Measure,
        _ => Kind::Topological,
    };
    let ev = Iterate {
        transforms: ts.to_vec(),
        alphas: system.alphas.clone(),
        root: mu.clone(),
        k,
        memo: Arc::new(RwLock::new(HashMap::new())),
    };
    Ok(TopoMeasure::new(ts[0].source().clone(), kind, Arc::new(ev)).unmemoized())
}

/// S(μ)(A) = Σ αᵢ μ(qᵢ(A)).
pub fn apply(system: &TransformSystem, mu: &TopoMeasure) -> Result<TopoMeasure> {
    iterate(system, mu, 1)
}

pub const DEFAULT_SUPPORT_CAP: usize = 1 << 20;

/// Σ αᵢ ν∘uᵢ⁻¹, with coordinates merged at 1e-12.
pub fn apply_discrete(system: &TransformSystem, nu: &DiscreteMeasure, cap: usize) -> Result<DiscreteMeasure> {
    let maps = system.maps()?;
    let size = nu.len() * maps.len();
    if size > cap {
        return Err(Error::SupportCap(size, cap));
    }
    let mut points = Vec::with_capacity(size);
    let mut weights = Vec::with_capacity(size);
    for (m, a) in maps.iter().zip(&system.alphas) {
        for (p, w) in nu.points().iter().zip(nu.weights()) {
            points.push(m.apply(*p));
            weights.push(a * w);
        }
    }
    Ok(DiscreteMeasure::new(points, weights)?.merged(1e-12))
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceStep {
    pub k: usize,
    /// exact distance when `exact`, otherwise a certified upper bound
    pub upper: f64,
    pub lower: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscreteFixedPoint {
    pub measure: DiscreteMeasure,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
}

/// Largest |∫f dν − ∫f dM(ν)| over linear functions in 16 directions and
/// the distances to a few anchor points: a lower bound on W₁(ν, M(ν)). The
/// second integral is Σ αᵢ ∫ f∘uᵢ dν, so M(ν) is never built.
fn test_function_bound(system: &TransformSystem, maps: &[AffineMap], nu: &DiscreteMeasure, anchors: &[[f64; 2]]) -> f64 {
    let gap = |f: &(dyn Fn([f64; 2]) -> f64 + Sync)| -> f64 {
        let (here, there) = nu
            .points()
            .par_iter()
            .zip(nu.weights())
            .map(|(p, w)| {
                let pushed: f64 = maps.iter().zip(&system.alphas).map(|(m, a)| a * f(m.apply(*p))).sum();
                (w * f(*p), w * pushed)
            })
            .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1));
        (here - there).abs()
    };
    let mut best: f64 = 0.0;
    for k in 0..16 {
        let t = k as f64 * std::f64::consts::PI / 8.0;
        best = best.max(gap(&|p: [f64; 2]| p[0] * t.cos() + p[1] * t.sin()));
    }
    for &a in anchors {
        best = best.max(gap(&|p: [f64; 2]| euclid(p, a)));
    }
    best
}

fn record_step(trace: &[TraceStep], step: &TraceStep) -> Result<()> {
    let n = trace.len();
    if n >= 5 {
        let run = &trace[n - 5..];
        let rising = run.windows(2).all(|w| w[1].upper >= w[0].upper) && step.upper >= run[4].upper;
        if rising && step.upper > 0.0 {
            return Err(Error::ContractionViolated(format!(
                "distance did not decrease over 5 steps ending at k = {}",
                step.k
            )));
        }
    }
    Ok(())
}

/// Iterate ν ↦ M(ν), recording dₖ = W₁(νₖ, νₖ₊₁), until dₖ ≤ tol; returns
/// that νₖ. Distances are exact while |supp νₖ|·|supp νₖ₊₁| stays within
/// `exact_cap`; afterwards each step reports a bracket whose upper end is
/// (Σ αᵢ sᵢ) times the previous upper end and whose lower end comes from
/// test functions.
pub fn fixed_point_discrete(system: &TransformSystem, mu0: &DiscreteMeasure, tol: f64, max_iter: usize, exact_cap: usize) -> Result<DiscreteFixedPoint> {
    let factor = system.averaged_factor().ok_or_else(|| Error::InvalidArgument("needs the affine backend".into()))?;
    let maps = system.maps()?;
    let anchors: Vec<[f64; 2]> = maps.iter().filter_map(AffineMap::fixed_point).collect();
    let mut current = mu0.clone();
    let mut trace: Vec<TraceStep> = Vec::new();
    for k in 0..max_iter {
        let mut next = None;
        let step = if current.len() * current.len() * maps.len() <= exact_cap {
            let n = apply_discrete(system, &current, DEFAULT_SUPPORT_CAP)?;
            let d = w1_discrete(&current, &n)?.value;
            next = Some(n);
            TraceStep {
                k,
                upper: d,
                lower: d,
                exact: true,
            }
        } else {
            let prev = trace.last().map_or(f64::INFINITY, |s| s.upper);
            TraceStep {
                k,
                upper: factor * prev,
                lower: test_function_bound(system, maps, &current, &anchors),
                exact: false,
            }
        };
        record_step(&trace, &step)?;
        let done = step.upper <= tol;
        trace.push(step);
        if done || k + 1 == max_iter {
            return Ok(DiscreteFixedPoint {
                measure: current,
                iterations: k,
                trace,
            });
        }
        current = match next {
            Some(n) => n,
            None => apply_discrete(system, &current, DEFAULT_SUPPORT_CAP)?,
        };
    }
    Ok(DiscreteFixedPoint {
        measure: current,
        iterations: 0,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct GridFixedPoint {
    pub measure: TopoMeasure,
    pub iterations: usize,
    /// max of the KR lower bound and the probe-family sup, per step
    pub trace: Vec<f64>,
}

/// 64 probe regions: blocks, disks and random blobs in both roles.
pub fn probe_family(space: &crate::grid::GridSpace, seed: u64) -> Vec<Region> {
    let mut r = rng::stream(seed, "markov/probes");
    let n = space.admissible().count();
    (0..64)
        .map(|i| {
            let role = if i % 2 == 0 { Role::Compact } else { Role::Open };
            let size = r.gen_range(1..=n.max(1));
            sampling::scatter(space, &mut r, 1 + i % 3, size, role)
        })
        .collect()
}

/// Grid-backend iteration; each step compares Sᵏμ with Sᵏ⁺¹μ on the probe
/// family and with the KR lower-bound search, and returns the first Sᵏμ for
/// which both are within `tol`.
pub fn fixed_point_grid(system: &TransformSystem, mu0: &TopoMeasure, tol: f64, max_iter: usize, seed: u64) -> Result<GridFixedPoint> {
    let ts = system.transforms()?;
    if ts.len() > 3 || max_iter > 10 {
        return Err(Error::InvalidArgument(
            "grid iteration is capped at 10 steps of at most 3 transforms; use the affine backend".into(),
        ));
    }
    let probes = probe_family(mu0.space(), seed);
    let mut trace: Vec<f64> = Vec::new();
    let mut current = mu0.clone();
    for k in 0..max_iter {
        let next = iterate(system, mu0, k + 1)?;
        let sup = probes
            .par_iter()
            .map(|a| Ok((current.eval(a)? - next.eval(a)?).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let kr = d_kr_topo_lower(&current, &next, 4, 8, seed ^ k as u64)?.value;
        let d = sup.max(kr);
        let n = trace.len();
        if n >= 5 && trace[n - 5..].windows(2).all(|w| w[1] >= w[0]) && d >= trace[n - 1] && d > 0.0 {
            return Err(Error::ContractionViolated(format!("probe distance stalled at k = {k}")));
        }
        trace.push(d);
        if d <= tol || k + 1 == max_iter {
            return Ok(GridFixedPoint {
                measure: current,
                iterations: k,
                trace,
            });
        }
        current = next;
    }
    Ok(GridFixedPoint {
        measure: current,
        iterations: 0,
        trace,
    })
}

/// Empirical measure of xₖ₊₁ = u_{Iₖ}(xₖ) with Iₖ drawn by the weights,
/// started at the fixed point of the first map (or the origin).
pub fn chaos_game(system: &TransformSystem, n: usize, burn_in: usize, seed: u64) -> Result<DiscreteMeasure> {
    let maps = system.maps()?;
    let total: f64 = system.alphas.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("chaos game needs weights summing to 1".into()));
    }
    let mut cumulative = Vec::with_capacity(maps.len());
    let mut acc = 0.0;
    for a in &system.alphas {
        acc += a / total;
        cumulative.push(acc);
    }
    let mut r = rng::stream(seed, "chaos-game");
    let mut x = [0.0, 0.0];
    let mut points = Vec::with_capacity(n);
    for step in 0..burn_in + n {
        let u: f64 = r.gen();
        let i = cumulative.iter().position(|&c| u < c).unwrap_or(maps.len() - 1);
        x = maps[i].apply(x);
        if step >= burn_in {
            points.push(x);
        }
    }
    Ok(DiscreteMeasure::uniform(points))
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// claimed factor (max sᵢ) for the affine backend
    pub factor: Option<f64>,
    /// every sampled ratio below 1 and, when a factor is claimed, within it
    pub contraction: bool,
}

fn hausdorff(space: &crate::grid::GridSpace, a: &Region, b: &Region) -> f64 {
    let one_sided = |x: &Region, y: &Region| {
        x.cells()
            .iter()
            .map(|i| y.cells().iter().map(|j| space.distance(i, j)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Affine backend: W₁(Mμ, Mν) / W₁(μ, ν) over random discrete pairs. Grid
/// backend: δ(qᵢ(K), qᵢ(G)) / δ(K, G) with δ the Hausdorff distance between
/// cell centres, over random compact pairs with nonempty images.
pub fn contraction_check(system: &TransformSystem, trials: usize, seed: u64) -> Result<ContractionReport> {
    let mut ratios = Vec::new();
    match &system.backend {
        Backend::Affine(_) => {
            ratios = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let mut r = rng::substream(seed, "contraction", t as u64);
                    let cloud = |r: &mut rng::Rng| {
                        let k = r.gen_range(1..=8);
                        DiscreteMeasure::uniform((0..k).map(|_| [r.gen_range(-1.0..2.0), r.gen_range(-1.0..2.0)]).collect())
                    };
                    let (a, b) = (cloud(&mut r), cloud(&mut r));
                    let before = w1_discrete(&a, &b)?.value;
                    let after = w1_discrete(&apply_discrete(system, &a, DEFAULT_SUPPORT_CAP)?, &apply_discrete(system, &b, DEFAULT_SUPPORT_CAP)?)?.value;
                    Ok(if before > 0.0 { after / before } else { 0.0 })
                })
                .collect::<Result<Vec<f64>>>()?;
        }
        Backend::Grid(ts) => {
            let space = ts[0].source().clone();
            let mut r = rng::stream(seed, "contraction/grid");
            let n = space.admissible().count();
            let mut attempts = 0;
            while ratios.len() < trials && attempts < trials * 20 {
                attempts += 1;
                let i = r.gen_range(0..ts.len());
                let size = r.gen_range(1..=n.div_ceil(4));
                let k = sampling::blob(&space, &mut r, size, Role::Compact);
                let g = sampling::blob(&space, &mut r, size, Role::Compact);
                let (qk, qg) = (ts[i].apply(&k)?, ts[i].apply(&g)?);
                let before = hausdorff(&space, &k, &g);
                if qk.is_empty() || qg.is_empty() || before == 0.0 {
                    continue;
                }
                ratios.push(hausdorff(ts[i].target(), &qk, &qg) / before);
            }
        }
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let factor = system.contraction_factor();
    let contraction = max_ratio < 1.0 && factor.is_none_or(|s| max_ratio <= s + 1e-9);
    Ok(ContractionReport {
        ratios,
        max_ratio,
        factor,
        contraction,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// grayscale, row 0 at the top
    pub pixels: Vec<u8>,
    /// number of points per pixel
    pub hits: Vec<u64>,
    /// weight per pixel
    pub mass: Vec<f64>,
}

/// Weight-binned, log-scaled grayscale raster over [x0, x1] × [y0, y1].
pub fn render_density(nu: &DiscreteMeasure, resolution: usize, bounds: [f64; 4]) -> Result<Raster> {
    if resolution < 16 {
        return Err(Error::InvalidArgument("resolution must be at least 16".into()));
    }
    let [x0, x1, y0, y1] = bounds;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::InvalidArgument("empty render bounds".into()));
    }
    let n = resolution;
    let mut hits = vec![0u64; n * n];
    let mut mass = vec![0.0; n * n];
    for (p, w) in nu.points().iter().zip(nu.weights()) {
        if p[0] < x0 || p[0] > x1 || p[1] < y0 || p[1] > y1 {
            continue;
        }
        let col = (((p[0] - x0) / (x1 - x0) * n as f64) as usize).min(n - 1);
        let row = (((y1 - p[1]) / (y1 - y0) * n as f64) as usize).min(n - 1);
        hits[row * n + col] += 1;
        mass[row * n + col] += w;
    }
    let lo = mass.iter().copied().filter(|m| *m > 0.0).fold(f64::INFINITY, f64::min);
    if !lo.is_finite() {
        return Err(Error::EmptyRaster);
    }
    let hi = mass.iter().copied().fold(0.0, f64::max);
    let denom = (1.0 + hi / lo).ln();
    let pixels = mass
        .iter()
        .map(|&m| if m > 0.0 { (255.0 * (1.0 + m / lo).ln() / denom).round().clamp(1.0, 255.0) as u8 } else { 0 })
        .collect();
    Ok(Raster {
        width: n,
        height: n,
        pixels,
        hits,
        mass,
    })
}

/// Binary PPM (P6, maxval 255), gray replicated over the three channels.
pub fn write_ppm(raster: &Raster, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", raster.width, raster.height)?;
    let rgb: Vec<u8> = raster.pixels.iter().flat_map(|&g| [g, g, g]).collect();
    out.write_all(&rgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_map() {
        let s = TransformSystem::affine(vec![AffineMap::scaling(0.5, [0.0, 0.0])], vec![1.0]).unwrap();
        let out = apply_discrete(&s, &DiscreteMeasure::dirac([1.0, 0.0]), 16).unwrap();
        assert_eq!(out, DiscreteMeasure::dirac([0.5, 0.0]));
        let fp = fixed_point_discrete(&s, &DiscreteMeasure::dirac([1.0, 0.0]), 1e-9, 60, 1 << 16).unwrap();
        // dₖ ≤ tol puts νₖ within tol / (1 − s) of the fixed point
        assert!(fp.measure.points()[0][0] <= 1e-9 / 0.5);
    }

    #[test]
    fn sierpinski_one_step() {
        let s = TransformSystem::sierpinski();
        let out = apply_discrete(&s, &DiscreteMeasure::dirac([0.0, 0.0]), 16).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.weights().iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));
        assert!((s.contraction_factor().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn weights_over_one_rejected() {
        let m = AffineMap::scaling(0.5, [0.0, 0.0]);
        assert!(TransformSystem::affine(vec![m, m], vec![0.6, 0.5]).is_err());
    }

    #[test]
    fn geometric_generator_keeps_twenty_terms() {
        let s = TransformSystem::affine_from_generator(
            |i| (AffineMap::scaling(0.5, [i as f64, 0.0]), 0.5f64.powi(i as i32)),
            |n| 0.5f64.powi(n as i32),
            1e-6,
        )
        .unwrap();
        assert_eq!(s.len(), 20);
        assert!(s.tail_bound() <= 1e-6);
    }

    #[test]
    fn support_cap() {
        let s = TransformSystem::sierpinski();
        let nu = DiscreteMeasure::uniform(vec![[0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(apply_discrete(&s, &nu, 5), Err(Error::SupportCap(6, 5))));
    }

    #[test]
    fn expansion_detected() {
        let s = TransformSystem::affine(vec![AffineMap::scaling(2.0, [0.0, 0.0])], vec![1.0]).unwrap();
        let report = contraction_check(&s, 10, 1).unwrap();
        assert!(!report.contraction);
        assert!(report.ratios.iter().all(|r| (r - 2.0).abs() < 1e-9));
    }

    #[test]
    fn raster_of_point_and_corners() {
        let r = render_density(&DiscreteMeasure::dirac([0.5, 0.5]), 16, [0.0, 1.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.pixels.iter().filter(|&&p| p > 0).count(), 1);
        assert_eq!(r.pixels.iter().copied().max(), Some(255));
        let corners = DiscreteMeasure::uniform(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let r = render_density(&corners, 16, [0.0, 1.0, 0.0, 1.0]).unwrap();
        let lit: Vec<u8> = r.pixels.iter().copied().filter(|&p| p > 0).collect();
        assert_eq!(lit, vec![255; 4]);
        assert_eq!(render_density(&corners, 16, [5.0, 6.0, 5.0, 6.0]), Err(Error::EmptyRaster));
    }

    #[test]
    fn affine_fixed_point() {
        let m = AffineMap::scaling(0.5, [0.25, 0.5]);
        let p = m.fixed_point().unwrap();
        assert!(euclid(m.apply(p), p) < 1e-15);
        let rot = AffineMap {
            a: 0.0,
            b: -0.5,
            c: 0.5,
            d: 0.0,
            e: 0.0,
            f: 0.0,
        };
        assert!((rot.lipschitz() - 0.5).abs() < 1e-15);
    }
}
