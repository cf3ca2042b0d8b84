//! Kantorovich-Rubinstein distances: exact optimal transport between finitely
//! supported planar measures, and a lower-bound search over Lipschitz test
//! functions for grid topological measures.

use crate::error::{Error, Result};
use crate::grid::{CellSet, Connectivity, GridSpace, Mode};
use crate::qmeasures::{Kind, TopoMeasure};
use crate::quasi_integral::{quasi_integral, GridFunction};
use crate::rng;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

pub fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Zero weights are dropped; negative or non-finite input is rejected.
    pub fn new(points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidArgument("one weight per point".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
        }
        let (points, weights) = points.into_iter().zip(weights).filter(|(_, w)| *w > 0.0).unzip();
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn dirac(p: [f64; 2]) -> Self {
        DiscreteMeasure {
            points: vec![p],
            weights: vec![1.0],
        }
    }

    pub fn uniform(points: Vec<[f64; 2]>) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        DiscreteMeasure { points, weights }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= 1e-12
    }

    pub fn mean(&self) -> [f64; 2] {
        let t = self.total();
        let mut m = [0.0; 2];
        for (p, w) in self.points.iter().zip(&self.weights) {
            m[0] += p[0] * w;
            m[1] += p[1] * w;
        }
        [m[0] / t, m[1] / t]
    }

    /// Merge points whose coordinates agree within `tol` (lexicographic
    /// sweep), summing their weights. Output is sorted by coordinates.
    pub fn merged(&self, tol: f64) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.points[a].partial_cmp(&self.points[b]).expect("finite"));
        let mut points: Vec<[f64; 2]> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for i in order {
            let p = self.points[i];
            match points.last() {
                Some(q) if (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol => {
                    *weights.last_mut().expect("nonempty") += self.weights[i];
                }
                _ => {
                    points.push(p);
                    weights.push(self.weights[i]);
                }
            }
        }
        DiscreteMeasure { points, weights }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Transport {
    pub value: f64,
    pub dual_value: f64,
    /// (source index, target index, mass)
    pub plan: Vec<(usize, usize, f64)>,
    /// φ on the first measure's points and ψ on the second's, with
    /// φ(x) + ψ(y) ≤ d(x, y) on every pair.
    pub potentials: (Vec<f64>, Vec<f64>),
}

/// Exact W₁ between two balanced measures with Euclidean ground cost.
pub fn w1_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Transport> {
    let (ta, tb) = (mu.total(), nu.total());
    if (ta - tb).abs() > 1e-12 * ta.max(tb).max(1.0) {
        return Err(Error::Unbalanced(ta, tb));
    }
    let cost: Vec<Vec<f64>> = mu
        .points
        .iter()
        .map(|&p| nu.points.iter().map(|&q| euclid(p, q)).collect())
        .collect();
    let scale = if tb > 0.0 { ta / tb } else { 1.0 };
    let demand: Vec<f64> = nu.weights.iter().map(|w| w * scale).collect();
    Ok(transport(&cost, &mu.weights, &demand))
}

/// Successive shortest paths on the bipartite residual graph, with Dijkstra
/// over reduced costs. Rows are supplies, columns demands.
pub fn transport(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Transport {
    let (n, m) = (supply.len(), demand.len());
    let total: f64 = supply.iter().sum();
    let eps = 1e-15 * total.max(1e-300);
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut flow = vec![vec![0.0f64; m]; n];
    let mut pi_r = vec![0.0f64; n];
    let mut pi_c = vec![0.0f64; m];
    loop {
        let remaining: f64 = a.iter().filter(|&&x| x > eps).sum();
        if remaining <= eps || !b.iter().any(|&x| x > eps) {
            break;
        }
        // dense Dijkstra from every row with supply left
        let mut dr = vec![f64::INFINITY; n];
        let mut dc = vec![f64::INFINITY; m];
        let mut prev_c = vec![usize::MAX; m]; // row feeding each column
        let mut prev_r = vec![usize::MAX; n]; // column feeding each row
        let mut done_r = vec![false; n];
        let mut done_c = vec![false; m];
        for i in 0..n {
            if a[i] > eps {
                dr[i] = 0.0;
            }
        }
        let target;
        loop {
            let mut best = f64::INFINITY;
            let mut pick = None;
            for i in 0..n {
                if !done_r[i] && dr[i] < best {
                    best = dr[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_c[j] && dc[j] < best {
                    best = dc[j];
                    pick = Some((false, j));
                }
            }
            let Some((is_row, k)) = pick else {
                unreachable!("balanced problem always has an augmenting path")
            };
            if is_row {
                done_r[k] = true;
                for j in 0..m {
                    if done_c[j] {
                        continue;
                    }
                    let d = best + (cost[k][j] + pi_r[k] - pi_c[j]).max(0.0);
                    if d < dc[j] {
                        dc[j] = d;
                        prev_c[j] = k;
                    }
                }
            } else {
                done_c[k] = true;
                if b[k] > eps {
                    target = k;
                    break;
                }
                for i in 0..n {
                    if done_r[i] || flow[i][k] <= 0.0 {
                        continue;
                    }
                    let d = best + (-cost[i][k] + pi_c[k] - pi_r[i]).max(0.0);
                    if d < dr[i] {
                        dr[i] = d;
                        prev_r[i] = k;
                    }
                }
            }
        }
        let reach = dc[target];
        for i in 0..n {
            pi_r[i] += if done_r[i] { dr[i] } else { reach };
        }
        for j in 0..m {
            pi_c[j] += if done_c[j] { dc[j] } else { reach };
        }
        // bottleneck along the path, walking back from the target column
        let mut push = b[target];
        let mut j = target;
        loop {
            let i = prev_c[j];
            if prev_r[i] == usize::MAX {
                push = push.min(a[i]);
                break;
            }
            let jb = prev_r[i];
            push = push.min(flow[i][jb]);
            j = jb;
        }
        let mut j = target;
        loop {
            let i = prev_c[j];
            flow[i][j] += push;
            if prev_r[i] == usize::MAX {
                a[i] -= push;
                break;
            }
            let jb = prev_r[i];
            flow[i][jb] -= push;
            if flow[i][jb] < eps {
                flow[i][jb] = 0.0;
            }
            j = jb;
        }
        b[target] -= push;
    }
    let mut plan = Vec::new();
    let mut value = 0.0;
    for i in 0..n {
        for j in 0..m {
            if flow[i][j] > 0.0 {
                plan.push((i, j, flow[i][j]));
                value += flow[i][j] * cost[i][j];
            }
        }
    }
    let phi: Vec<f64> = pi_r.iter().map(|p| -p).collect();
    let psi = pi_c;
    let dual_value = supply.iter().zip(&phi).map(|(w, p)| w * p).sum::<f64>()
        + demand.iter().zip(&psi).map(|(w, p)| w * p).sum::<f64>();
    Transport {
        value,
        dual_value,
        plan,
        potentials: (phi, psi),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuantizedW1 {
    /// exact W₁ between the binned measures
    pub binned: f64,
    /// transport cost of moving each measure onto its bin representatives
    pub displacement: (f64, f64),
    pub lower: f64,
    pub upper: f64,
    pub bins: usize,
}

/// W₁ bracket for large empirical measures: both are binned on a square
/// lattice of side `h`, each bin represented by the centroid of the joint
/// mass inside it; common mass per bin is cancelled before exact transport.
/// The bracket follows from the triangle inequality.
pub fn w1_quantized(mu: &DiscreteMeasure, nu: &DiscreteMeasure, h: f64) -> Result<QuantizedW1> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("bin side must be positive".into()));
    }
    let key = |p: [f64; 2]| ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64);
    let mut bins: HashMap<(i64, i64), usize> = HashMap::new();
    let mut sums: Vec<[f64; 3]> = Vec::new();
    for m in [mu, nu] {
        for (p, w) in m.points.iter().zip(&m.weights) {
            let k = *bins.entry(key(*p)).or_insert_with(|| {
                sums.push([0.0; 3]);
                sums.len() - 1
            });
            sums[k][0] += p[0] * w;
            sums[k][1] += p[1] * w;
            sums[k][2] += w;
        }
    }
    let centres: Vec<[f64; 2]> = sums.iter().map(|s| [s[0] / s[2], s[1] / s[2]]).collect();
    let mut mass = [vec![0.0; centres.len()], vec![0.0; centres.len()]];
    let mut displacement = [0.0; 2];
    for (side, m) in [mu, nu].into_iter().enumerate() {
        for (p, w) in m.points.iter().zip(&m.weights) {
            let k = bins[&key(*p)];
            mass[side][k] += w;
            displacement[side] += w * euclid(*p, centres[k]);
        }
    }
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    for k in 0..centres.len() {
        let d = mass[0][k] - mass[1][k];
        if d > 0.0 {
            rows.push((k, d));
        } else if d < 0.0 {
            cols.push((k, -d));
        }
    }
    let supply: f64 = rows.iter().map(|r| r.1).sum();
    let excess: f64 = cols.iter().map(|c| c.1).sum();
    if (supply - excess).abs() > 1e-9 * mu.total().max(1.0) {
        return Err(Error::Unbalanced(mu.total(), nu.total()));
    }
    let binned = if rows.is_empty() || cols.is_empty() {
        0.0
    } else {
        let cost: Vec<Vec<f64>> = rows
            .iter()
            .map(|&(i, _)| cols.iter().map(|&(j, _)| euclid(centres[i], centres[j])).collect())
            .collect();
        let scale = supply / excess;
        let demand: Vec<f64> = cols.iter().map(|c| c.1 * scale).collect();
        let supplies: Vec<f64> = rows.iter().map(|r| r.1).collect();
        transport(&cost, &supplies, &demand).value
    };
    let slack = displacement[0] + displacement[1];
    Ok(QuantizedW1 {
        binned,
        displacement: (displacement[0], displacement[1]),
        lower: (binned - slack).max(0.0),
        upper: binned + slack,
        bins: centres.len(),
    })
}

/// A grid function that is 1-Lipschitz along the grid's neighbour edges.
#[derive(Clone, Debug, PartialEq)]
pub struct LipFunction(GridFunction);

impl LipFunction {
    pub fn function(&self) -> &GridFunction {
        &self.0
    }

    pub fn into_function(self) -> GridFunction {
        self.0
    }
}

/// Neighbour edges of admissible cells: 4-neighbours at one cell size and
/// diagonals at √2 cell sizes.
pub fn lip_edges(space: &GridSpace) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for i in space.admissible().iter() {
        for j in space.neighbours(i, Connectivity::Eight) {
            if j > i && space.is_admissible(j) {
                edges.push((i, j, space.distance(i, j)));
            }
        }
    }
    edges
}

/// Clip every edge whose difference exceeds its length, moving both ends
/// toward each other by half the excess (all of it onto the free end when
/// one end is pinned), until no edge is violated by 1e-10 or more.
pub fn lip_project_graph(values: &[f64], edges: &[(usize, usize, f64)], pinned: Option<&CellSet>) -> Result<Vec<f64>> {
    const SWEEPS: usize = 100_000;
    const TOL: f64 = 1e-10;
    let mut v = values.to_vec();
    let fixed = |i: usize| pinned.is_some_and(|p| p.contains(i));
    for _ in 0..SWEEPS {
        let mut clipped = false;
        for &(i, j, d) in edges {
            let diff = v[i] - v[j];
            let excess = diff.abs() - d;
            if excess < TOL {
                continue;
            }
            clipped = true;
            let s = diff.signum();
            match (fixed(i), fixed(j)) {
                (true, true) => {}
                (true, false) => v[j] += s * excess,
                (false, true) => v[i] -= s * excess,
                (false, false) => {
                    v[i] -= s * excess / 2.0;
                    v[j] += s * excess / 2.0;
                }
            }
        }
        if !clipped {
            return Ok(v);
        }
    }
    Err(Error::NoConvergence(SWEEPS))
}

/// Projection onto the grid Lipschitz constraints. In marked-infinity mode
/// the frame is held at zero so the result stays compactly supported.
pub fn lip_project(space: &GridSpace, f: &GridFunction) -> Result<LipFunction> {
    let mut values = f.values().to_vec();
    let pinned = (space.mode() == Mode::MarkedInfinity).then(|| {
        for i in space.frame().iter() {
            values[i] = 0.0;
        }
        space.frame().clone()
    });
    let v = lip_project_graph(&values, &lip_edges(space), pinned.as_ref())?;
    Ok(LipFunction(GridFunction::new(space, v)?))
}

/// Largest |f(a) − f(b)| / d(a, b) over all pairs of admissible cells.
pub fn lipschitz_constant(space: &GridSpace, f: &GridFunction) -> f64 {
    let cells: Vec<usize> = space.admissible().iter().collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(k, &a)| {
            cells[k + 1..]
                .iter()
                .map(|&b| (f.value(a) - f.value(b)).abs() / space.distance(a, b))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct KrLowerBound {
    pub value: f64,
    /// the 1-Lipschitz test function attaining `value`
    pub witness: GridFunction,
}

fn objective(mu: &TopoMeasure, nu: &TopoMeasure, f: &GridFunction) -> Result<f64> {
    Ok((quasi_integral(mu, f)? - quasi_integral(nu, f)?).abs())
}

/// Normalized objective: scaled by the exact global Lipschitz constant so the
/// value is certified against Euclidean 1-Lipschitz functions.
fn certified(space: &GridSpace, mu: &TopoMeasure, nu: &TopoMeasure, f: &GridFunction) -> Result<(f64, GridFunction)> {
    let l = lipschitz_constant(space, f);
    if l == 0.0 {
        return Ok((0.0, f.clone()));
    }
    let g = f.scale(1.0 / l);
    Ok((objective(mu, nu, &g)?, g))
}

fn cone(space: &GridSpace, centre: usize, radius: f64) -> GridFunction {
    GridFunction::from_fn(space, |i| (radius - space.distance(i, centre)).max(0.0))
}

/// Lower bound on sup |∫f dμ − ∫f dν| over 1-Lipschitz f (f ≥ 0 when either
/// measure is deficient; f vanishing on the frame in marked-infinity mode).
/// Starts from cones at the cells where single-cell masses differ most and
/// at random cells, then improves each start by bump moves kept feasible by
/// projection. Restarts run in parallel.
pub fn d_kr_topo_lower(mu: &TopoMeasure, nu: &TopoMeasure, restarts: usize, iters: usize, seed: u64) -> Result<KrLowerBound> {
    let space = mu.space().clone();
    if **nu.space() != *space {
        return Err(Error::SpaceMismatch("measures live on different spaces".into()));
    }
    let nonneg = mu.kind() == Kind::Deficient || nu.kind() == Kind::Deficient;
    let cells: Vec<usize> = space.usable(crate::grid::Role::Compact).iter().collect();
    if cells.is_empty() {
        return Ok(KrLowerBound {
            value: 0.0,
            witness: GridFunction::constant(&space, 0.0),
        });
    }
    let diameter = cells
        .iter()
        .flat_map(|&a| cells.iter().map(move |&b| (a, b)))
        .map(|(a, b)| space.distance(a, b))
        .fold(0.0, f64::max)
        .max(space.cell_size());
    // single-cell mass differences pick the first two cone centres
    let mut scores = Vec::with_capacity(cells.len());
    for &c in &cells {
        let k = space.region([c], crate::grid::Role::Compact)?;
        scores.push((mu.eval(&k)? - nu.eval(&k)?, c));
    }
    scores.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let hot = [scores[scores.len() - 1].1, scores[0].1];
    let shape = |f: GridFunction| -> Result<GridFunction> {
        let f = if nonneg { f.map(|v| v.max(0.0)) } else { f };
        Ok(lip_project(&space, &f)?.into_function())
    };
    let results: Vec<Result<(f64, GridFunction)>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut r = rng::substream(seed, "kr/restart", k as u64);
            let start = match k {
                0 | 1 => cone(&space, hot[k], diameter),
                _ if k % 2 == 0 => cone(&space, cells[r.gen_range(0..cells.len())], r.gen_range(0.2..=1.0) * diameter),
                _ => cone(&space, cells[r.gen_range(0..cells.len())], diameter).map(|c| c - diameter / 2.0),
            };
            let mut f = shape(start)?;
            let mut best = certified(&space, mu, nu, &f)?;
            for _ in 0..iters {
                let c = cells[r.gen_range(0..cells.len())];
                let h = space.cell_size();
                let radius = r.gen_range(h..=(diameter / 2.0).max(h));
                let step = r.gen_range(-1.0..=1.0) * radius;
                let bump = GridFunction::from_fn(&space, |i| (1.0 - space.distance(i, c) / radius).max(0.0) * step);
                let candidate = shape(f.add(&bump))?;
                let scored = certified(&space, mu, nu, &candidate)?;
                if scored.0 > best.0 {
                    best = scored;
                    f = candidate;
                }
            }
            Ok(best)
        })
        .collect();
    let mut best = (0.0, GridFunction::constant(&space, 0.0));
    for r in results {
        let r = r?;
        if r.0 > best.0 {
            best = r;
        }
    }
    Ok(KrLowerBound {
        value: best.0,
        witness: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Mode;
    use std::sync::Arc;

    #[test]
    fn point_masses() {
        let t = w1_discrete(&DiscreteMeasure::dirac([0.0, 0.0]), &DiscreteMeasure::dirac([3.0, 4.0])).unwrap();
        assert_eq!(t.value, 5.0);
        assert!((t.dual_value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn two_matchings_of_cost_one() {
        let a = DiscreteMeasure::uniform(vec![[0.0, 0.0], [1.0, 0.0]]);
        let b = DiscreteMeasure::uniform(vec![[0.0, 1.0], [1.0, 1.0]]);
        let t = w1_discrete(&a, &b).unwrap();
        assert!((t.value - 1.0).abs() < 1e-15);
        assert_eq!(w1_discrete(&a, &a).unwrap().value, 0.0);
    }

    #[test]
    fn unbalanced_rejected() {
        let a = DiscreteMeasure::new(vec![[0.0, 0.0]], vec![2.0]).unwrap();
        let err = w1_discrete(&a, &DiscreteMeasure::dirac([1.0, 1.0])).unwrap_err();
        assert!(err.to_string().contains("unbalanced; normalize first"));
    }

    #[test]
    fn needs_rerouting() {
        // the greedy first match has to be undone through a backward edge
        let a = DiscreteMeasure::uniform(vec![[0.0, 0.0], [2.0, 0.0]]);
        let b = DiscreteMeasure::uniform(vec![[1.0, 0.0], [3.0, 0.0]]);
        let t = w1_discrete(&a, &b).unwrap();
        assert!((t.value - 1.0).abs() < 1e-15);
        assert!((t.dual_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_projection() {
        let v = lip_project_graph(&[0.0, 10.0], &[(0, 1, 1.0)], None).unwrap();
        assert_eq!(v, vec![4.5, 5.5]);
        let pinned = CellSet::from_indices(2, [0]);
        assert_eq!(lip_project_graph(&[0.0, 10.0], &[(0, 1, 1.0)], Some(&pinned)).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn projection_is_idempotent() {
        let s = GridSpace::new(6, 6, Mode::Compact).unwrap();
        let f = GridFunction::from_fn(&s, |i| ((i * 37) % 11) as f64);
        let once = lip_project(&s, &f).unwrap();
        assert_eq!(lip_project(&s, once.function()).unwrap(), once);
        let c = GridFunction::constant(&s, 2.5);
        assert_eq!(lip_project(&s, &c).unwrap().into_function(), c);
    }

    #[test]
    fn dirac_lower_bound() {
        let s = Arc::new(GridSpace::new(9, 9, Mode::Compact).unwrap());
        let (x, y) = (s.index(1, 2), s.index(7, 5));
        let dx = TopoMeasure::dirac(s.clone(), x).unwrap();
        let dy = TopoMeasure::dirac(s.clone(), y).unwrap();
        let b = d_kr_topo_lower(&dx, &dy, 20, 10, 1).unwrap();
        assert!(b.value >= 0.95 * s.distance(x, y));
        assert!(b.value <= s.distance(x, y) + 1e-12);
        assert_eq!(d_kr_topo_lower(&dx, &dx, 4, 10, 1).unwrap().value, 0.0);
    }

    #[test]
    fn quantized_bracket_contains_exact() {
        let mut r = rng::stream(1, "quantized");
        let pts = |r: &mut rng::Rng| (0..60).map(|_| [r.gen::<f64>(), r.gen::<f64>()]).collect::<Vec<_>>();
        let a = DiscreteMeasure::uniform(pts(&mut r));
        let b = DiscreteMeasure::uniform(pts(&mut r));
        let exact = w1_discrete(&a, &b).unwrap().value;
        for h in [0.05, 0.2, 0.5] {
            let q = w1_quantized(&a, &b, h).unwrap();
            assert!(q.lower <= exact + 1e-12 && exact <= q.upper + 1e-12, "{h}: {q:?} {exact}");
        }
    }
}
