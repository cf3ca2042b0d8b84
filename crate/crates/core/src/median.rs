//! Generalized distribution of the sample median (g.d.s.m.) for finite
//! families of maps into a grid, order statistics on interval grids, and
//! equivariance under solid variables.

use crate::error::{Error, Result};
use crate::grid::{CellSet, GridSpace, Mode, Region, Role};
use crate::image_transforms::{adjoint, extend_solid_q, from_proper_map, square_isometry, ImageTransform, SolidMap};
use crate::qmeasures::{Evaluator, Kind, TopoMeasure};
use crate::rng;
use crate::sampling;
use rand::Rng as _;
use rayon::prelude::*;
use std::sync::Arc;

/// Maps T₁ … T_m from a sample space Y with probability P into a grid X.
/// `maps[i][y]` is the cell of X hit by Tᵢ at the sample point (cell) y.
#[derive(Clone, Debug)]
pub struct VariableFamily {
    base: Arc<GridSpace>,
    probability: TopoMeasure,
    point_masses: Option<Vec<f64>>,
    target: Arc<GridSpace>,
    maps: Vec<Vec<usize>>,
}

impl VariableFamily {
    /// Finite sample space with the given point weights.
    pub fn weighted(weights: Vec<f64>, target: Arc<GridSpace>, maps: Vec<Vec<usize>>) -> Result<Self> {
        let base = Arc::new(GridSpace::discrete(weights.len())?);
        let probability = TopoMeasure::cell_weights(base.clone(), weights.clone())?;
        Self::build(base, probability, Some(weights), target, maps)
    }

    /// Sample space given by a grid and a (deficient) topological measure on it.
    pub fn on_grid(probability: TopoMeasure, target: Arc<GridSpace>, maps: Vec<Vec<usize>>) -> Result<Self> {
        let base = probability.space().clone();
        Self::build(base, probability, None, target, maps)
    }

    /// Constant maps Tᵢ ≡ xᵢ on a one-point sample space of mass 1.
    pub fn constants(target: Arc<GridSpace>, values: &[usize]) -> Result<Self> {
        Self::weighted(vec![1.0], target, values.iter().map(|&v| vec![v]).collect())
    }

    fn build(
        base: Arc<GridSpace>,
        probability: TopoMeasure,
        point_masses: Option<Vec<f64>>,
        target: Arc<GridSpace>,
        maps: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if maps.len() < 3 {
            return Err(Error::FamilyParity(format!("need at least 3 maps, got {}", maps.len())));
        }
        if target.mode() == Mode::Discrete {
            return Err(Error::InvalidArgument("maps must land in a topological grid".into()));
        }
        for (i, m) in maps.iter().enumerate() {
            if m.len() != base.len() {
                return Err(Error::InvalidArgument(format!("map {i} has {} values for {} sample points", m.len(), base.len())));
            }
            if let Some(y) = base.admissible().iter().find(|&y| m[y] >= target.len() || !target.is_admissible(m[y])) {
                return Err(Error::InvalidArgument(format!("map {i} sends sample point {y} outside the target")));
            }
        }
        Ok(VariableFamily {
            base,
            probability,
            point_masses,
            target,
            maps,
        })
    }

    pub fn base(&self) -> &Arc<GridSpace> {
        &self.base
    }

    pub fn probability(&self) -> &TopoMeasure {
        &self.probability
    }

    pub fn target(&self) -> &Arc<GridSpace> {
        &self.target
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn is_odd(&self) -> bool {
        self.maps.len() % 2 == 1
    }

    fn with_maps(&self, maps: Vec<Vec<usize>>) -> VariableFamily {
        VariableFamily { maps, ..self.clone() }
    }

    /// T₁ … T_m followed by a second copy of T_j.
    pub fn augmented(&self, j: usize) -> VariableFamily {
        let mut maps = self.maps.clone();
        maps.push(self.maps[j].clone());
        self.with_maps(maps)
    }

    /// The family without T_j.
    pub fn leave_out(&self, j: usize) -> Result<VariableFamily> {
        let mut maps = self.maps.clone();
        maps.remove(j);
        Self::build(self.base.clone(), self.probability.clone(), self.point_masses.clone(), self.target.clone(), maps)
    }

    /// The family f ∘ Tᵢ.
    pub fn compose_with(&self, f: &SolidVariable) -> Result<VariableFamily> {
        if *f.source != *self.target {
            return Err(Error::SpaceMismatch("solid variable does not start where the maps land".into()));
        }
        let maps = self.maps.iter().map(|m| m.iter().map(|&x| f.map[x]).collect()).collect();
        Ok(VariableFamily {
            target: f.target.clone(),
            maps,
            ..self.clone()
        })
    }

    /// Sample points y where at least `threshold` of the Tᵢ(y) lie in `a`.
    fn majority(&self, a: &Region, threshold: usize) -> Result<Region> {
        let cells = self
            .base
            .admissible()
            .iter()
            .filter(|&y| self.maps.iter().filter(|m| a.contains(m[y])).count() >= threshold);
        self.base.region_from_set(CellSet::from_indices(self.base.len(), cells), a.role())
    }

    fn require_odd(&self) -> Result<usize> {
        if !self.is_odd() {
            return Err(Error::FamilyParity(format!("{} maps; use gdsm_even", self.len())));
        }
        Ok(self.len().div_ceil(2))
    }
}

/// P({y : |{i : Tᵢ(y) ∈ A}| ≥ n}) for 2n−1 maps. Solid A is counted
/// directly; other regions go through the solid extension.
pub fn gdsm_region(fam: &VariableFamily, a: &Region) -> Result<f64> {
    let n = fam.require_odd()?;
    fam.target.check_evaluable(a)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    if fam.target.is_solid(a)? {
        fam.probability.eval(&fam.majority(a, n)?)
    } else {
        fam.probability.eval(&sample_median_q(fam)?.apply(a)?)
    }
}

/// The majority map A ↦ {y : at least n of the Tᵢ(y) in A} on solid regions,
/// extended to an image transformation from X to Y.
pub fn sample_median_q(fam: &VariableFamily) -> Result<ImageTransform> {
    let n = fam.require_odd()?;
    let f = fam.clone();
    let q0: SolidMap = Arc::new(move |a: &Region| f.majority(a, n));
    extend_solid_q(fam.target.clone(), fam.base.clone(), q0, &format!("sample_median({} maps)", fam.len()))
}

struct EvenMedian {
    augmented: Vec<TopoMeasure>,
    leave_one_out: Vec<TopoMeasure>,
}

impl Evaluator for EvenMedian {
    fn eval(&self, r: &Region) -> Result<f64> {
        let m = self.augmented.len() as f64;
        let mut up = 0.0;
        for mu in &self.augmented {
            up += mu.eval(r)?;
        }
        let mut down = 0.0;
        for mu in &self.leave_one_out {
            down += mu.eval(r)?;
        }
        let (up, down) = (up / m, down / m);
        if (up - down).abs() > 1e-12 {
            return Err(Error::MedianDisagreement(format!(
                "augmented {up} vs leave-one-out {down} on {}",
                r.to_rle()
            )));
        }
        Ok(up)
    }
    fn describe(&self) -> String {
        format!("gdsm_even({} maps)", self.augmented.len())
    }
}

fn kind_of(fam: &VariableFamily) -> Kind {
    match fam.probability.kind() {
        Kind::Deficient => Kind::Deficient,
        _ => Kind::Topological,
    }
}

/// For 2n maps: the average of the g.d.s.m. over the 2n families augmented by
/// one repeated map. Every evaluation also computes the leave-one-out average
/// and fails with `MedianDisagreement` when the two differ.
pub fn gdsm_even(fam: &VariableFamily) -> Result<TopoMeasure> {
    if fam.is_odd() {
        return Err(Error::FamilyParity(format!("{} maps; use gdsm_region", fam.len())));
    }
    let mut augmented = Vec::with_capacity(fam.len());
    let mut leave_one_out = Vec::with_capacity(fam.len());
    for j in 0..fam.len() {
        augmented.push(adjoint(&sample_median_q(&fam.augmented(j))?, &fam.probability)?);
        leave_one_out.push(adjoint(&sample_median_q(&fam.leave_out(j)?)?, &fam.probability)?);
    }
    let ev = EvenMedian {
        augmented,
        leave_one_out,
    };
    Ok(TopoMeasure::new(fam.target.clone(), kind_of(fam), Arc::new(ev)))
}

/// The g.d.s.m. as a set function on X, for either parity.
pub fn gdsm(fam: &VariableFamily) -> Result<TopoMeasure> {
    if fam.is_odd() {
        adjoint(&sample_median_q(fam)?, &fam.probability)
    } else {
        gdsm_even(fam)
    }
}

fn require_line(space: &GridSpace) -> Result<()> {
    if !space.is_line() {
        return Err(Error::InvalidArgument("order statistics need an interval grid".into()));
    }
    Ok(())
}

fn order_statistic_cell(fam: &VariableFamily, k: usize, y: usize) -> usize {
    let mut v: Vec<usize> = fam.maps.iter().map(|m| m[y]).collect();
    v.sort_unstable();
    v[k - 1]
}

/// The k-th smallest of T₁(y) … T_m(y) (cell centre coordinate), duplicates kept.
pub fn order_statistic(fam: &VariableFamily, k: usize, y: usize) -> Result<f64> {
    require_line(&fam.target)?;
    if k == 0 || k > fam.len() || !fam.base.is_admissible(y) {
        return Err(Error::InvalidArgument(format!("order statistic {k} at point {y}")));
    }
    Ok(fam.target.center(order_statistic_cell(fam, k, y))[0])
}

/// P ∘ T_(k)⁻¹ as a mass per target cell.
pub fn order_statistic_pushforward(fam: &VariableFamily, k: usize) -> Result<Vec<f64>> {
    require_line(&fam.target)?;
    let masses = fam
        .point_masses
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("pushforwards need a weighted sample space".into()))?;
    if k == 0 || k > fam.len() {
        return Err(Error::InvalidArgument(format!("order statistic {k} of {}", fam.len())));
    }
    let mut out = vec![0.0; fam.target.len()];
    for y in fam.base.admissible().iter() {
        out[order_statistic_cell(fam, k, y)] += masses[y];
    }
    Ok(out)
}

/// Distribution of the sample median on an interval grid, one mass per cell:
/// P ∘ T_(n)⁻¹ for 2n−1 maps, ½ P ∘ T_(n)⁻¹ + ½ P ∘ T_(n+1)⁻¹ for 2n maps.
/// Each cell mass is compared with the set-function value on that cell.
pub fn gdsm_measure_1d(fam: &VariableFamily) -> Result<Vec<f64>> {
    let m = fam.len();
    let masses = if fam.is_odd() {
        order_statistic_pushforward(fam, m.div_ceil(2))?
    } else {
        let lo = order_statistic_pushforward(fam, m / 2)?;
        let hi = order_statistic_pushforward(fam, m / 2 + 1)?;
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * a + 0.5 * b).collect()
    };
    let mu = gdsm(fam)?;
    let cells: Vec<usize> = fam.target.admissible().iter().collect();
    cells.par_iter().try_for_each(|&c| {
        let v = mu.eval(&fam.target.region([c], Role::Compact)?)?;
        if (v - masses[c]).abs() > 1e-12 {
            return Err(Error::MedianDisagreement(format!(
                "cell {c}: order statistics give {}, the set function {v}",
                masses[c]
            )));
        }
        Ok(())
    })?;
    Ok(masses)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certificate {
    Monotone1d,
    GridIsometry,
    Checked,
    Composite,
}

/// A cell map f: X₁ → X₂ whose preimages of solid regions are solid.
/// `map[x]` is the image of the cell x of X₁.
#[derive(Clone, Debug)]
pub struct SolidVariable {
    source: Arc<GridSpace>,
    target: Arc<GridSpace>,
    map: Vec<usize>,
    certificate: Certificate,
}

impl SolidVariable {
    fn build(source: Arc<GridSpace>, target: Arc<GridSpace>, map: Vec<usize>, certificate: Certificate) -> Result<Self> {
        // validates shape, admissibility and properness
        from_proper_map(target.clone(), source.clone(), map.clone())?;
        Ok(SolidVariable {
            source,
            target,
            map,
            certificate,
        })
    }

    /// A monotone (non-decreasing or non-increasing) map between interval grids.
    pub fn monotone_1d(source: Arc<GridSpace>, target: Arc<GridSpace>, map: Vec<usize>) -> Result<Self> {
        require_line(&source)?;
        require_line(&target)?;
        let cells: Vec<usize> = source.admissible().iter().collect();
        let vals: Vec<usize> = cells.iter().map(|&c| map.get(c).copied().unwrap_or(usize::MAX)).collect();
        let up = vals.windows(2).all(|w| w[0] <= w[1]);
        let down = vals.windows(2).all(|w| w[0] >= w[1]);
        if !up && !down {
            return Err(Error::NotSolidVariable("map is not monotone".into()));
        }
        Self::build(source, target, map, Certificate::Monotone1d)
    }

    /// One of the 8 symmetries of a square grid.
    pub fn grid_isometry(space: Arc<GridSpace>, k: usize) -> Result<Self> {
        let map = square_isometry(&space, k)?;
        Self::build(space.clone(), space, map, Certificate::GridIsometry)
    }

    /// Any cell map, accepted after a brute-force solidness check: every
    /// interval on a line target, `budget` random solids of each role otherwise.
    pub fn checked(source: Arc<GridSpace>, target: Arc<GridSpace>, map: Vec<usize>, budget: usize, seed: u64) -> Result<Self> {
        let f = Self::build(source, target, map, Certificate::Checked)?;
        let mut r = rng::stream(seed, "solid-variable");
        let n = f.target.admissible().count();
        let probes: Vec<Region> = (0..budget)
            .flat_map(|_| {
                let size = r.gen_range(1..=n);
                let k = sampling::solid(&f.target, &mut r, size, Role::Compact);
                let u = sampling::solid(&f.target, &mut r, size, Role::Open);
                [k, u]
            })
            .collect();
        f.spot_check(&probes)?;
        Ok(f)
    }

    pub fn source(&self) -> &Arc<GridSpace> {
        &self.source
    }

    pub fn target(&self) -> &Arc<GridSpace> {
        &self.target
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    /// f⁻¹(A), keeping the role of A.
    pub fn preimage(&self, a: &Region) -> Result<Region> {
        self.target.check(a)?;
        let cells = self.source.admissible().iter().filter(|&x| a.contains(self.map[x]));
        self.source.region_from_set(CellSet::from_indices(self.source.len(), cells), a.role())
    }

    /// f⁻¹ as an image transformation from X₂ to X₁.
    pub fn inverse_transform(&self) -> ImageTransform {
        from_proper_map(self.target.clone(), self.source.clone(), self.map.clone()).expect("validated at construction")
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &SolidVariable) -> Result<SolidVariable> {
        if *self.target != *next.source {
            return Err(Error::SpaceMismatch("solid variables do not compose".into()));
        }
        let map = self.map.iter().map(|&x| next.map[x]).collect();
        Self::build(self.source.clone(), next.target.clone(), map, Certificate::Composite)
    }

    /// Preimages of the solid probes (and of every interval when X₂ is a
    /// line) must be solid or empty.
    pub fn spot_check(&self, probes: &[Region]) -> Result<()> {
        let mut all: Vec<Region> = probes.to_vec();
        if self.target.is_line() {
            all.extend(line_intervals(&self.target));
        }
        all.par_iter().try_for_each(|a| {
            if a.is_empty() || !self.target.is_solid(a)? {
                return Ok(());
            }
            let pre = self.preimage(a)?;
            if !pre.is_empty() && !self.source.is_solid(&pre)? {
                return Err(Error::NotSolidVariable(format!(
                    "preimage {} of the solid {} is not solid",
                    pre.to_rle(),
                    a.to_rle()
                )));
            }
            Ok(())
        })
    }
}

/// Every run of consecutive admissible cells of a line, in both roles.
fn line_intervals(space: &GridSpace) -> Vec<Region> {
    let cells: Vec<usize> = space.admissible().iter().collect();
    let mut out = Vec::new();
    for i in 0..cells.len() {
        for j in i..cells.len() {
            for role in [Role::Compact, Role::Open] {
                let r = space.region(cells[i]..=cells[j], role).expect("admissible cells");
                if space.check_evaluable(&r).is_ok() {
                    out.push(r);
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivarianceReport {
    pub pass: bool,
    pub probes: usize,
    /// (probe, μ_{f∘T}(A), μ_T(f⁻¹(A)))
    pub measure_mismatches: Vec<(String, f64, f64)>,
    pub region_mismatches: Vec<String>,
}

/// μ_{f∘T}(A) = μ_T(f⁻¹(A)) on every probe, compared exactly, and for odd
/// families q_{f∘T}(A) = q_T(f⁻¹(A)) as regions. The solidness of f is
/// spot-checked on the probes first.
pub fn equivariance_check(f: &SolidVariable, fam: &VariableFamily, probes: &[Region]) -> Result<EquivarianceReport> {
    let moved = fam.compose_with(f)?;
    f.spot_check(probes)?;
    let (mu_t, mu_ft) = (gdsm(fam)?, gdsm(&moved)?);
    let qs = if fam.is_odd() {
        Some((sample_median_q(fam)?, sample_median_q(&moved)?))
    } else {
        None
    };
    let rows: Vec<(Option<(String, f64, f64)>, Option<String>)> = probes
        .par_iter()
        .map(|a| {
            let pre = f.preimage(a)?;
            let (lhs, rhs) = (mu_ft.eval(a)?, mu_t.eval(&pre)?);
            let m = (lhs != rhs).then(|| (a.to_rle(), lhs, rhs));
            let r = match &qs {
                Some((qt, qft)) if qft.apply(a)?.cells() != qt.apply(&pre)?.cells() => Some(a.to_rle()),
                _ => None,
            };
            Ok((m, r))
        })
        .collect::<Result<_>>()?;
    let measure_mismatches: Vec<_> = rows.iter().filter_map(|r| r.0.clone()).collect();
    let region_mismatches: Vec<_> = rows.iter().filter_map(|r| r.1.clone()).collect();
    Ok(EquivarianceReport {
        pass: measure_mismatches.is_empty() && region_mismatches.is_empty(),
        probes: probes.len(),
        measure_mismatches,
        region_mismatches,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MedianWitness {
    /// the three constant values
    pub values: Vec<usize>,
    pub a: Region,
    pub b: Region,
    /// μ(A), μ(B), μ(A ∪ B)
    pub masses: [f64; 3],
}

/// Random search for three constant maps into a planar grid and compact
/// solids A, B with μ(A ∪ B) > μ(A) + μ(B).
pub fn find_nonadditivity_witness(target: Arc<GridSpace>, trials: usize, seed: u64) -> Result<Option<MedianWitness>> {
    if target.is_line() {
        return Err(Error::InvalidArgument("the g.d.s.m. on an interval is a measure".into()));
    }
    let mut r = rng::stream(seed, "median/witness");
    let usable: Vec<usize> = target.usable(Role::Compact).iter().collect();
    if usable.len() < 3 {
        return Err(Error::InvalidArgument("need three usable cells".into()));
    }
    let n = usable.len();
    for _ in 0..trials {
        let mut values = Vec::new();
        while values.len() < 3 {
            let c = usable[r.gen_range(0..n)];
            if !values.contains(&c) {
                values.push(c);
            }
        }
        let mu = gdsm(&VariableFamily::constants(target.clone(), &values)?)?;
        let (sa, sb) = (r.gen_range(1..=n / 2 + 1), r.gen_range(1..=n / 2 + 1));
        let a = sampling::solid(&target, &mut r, sa, Role::Compact);
        let b = sampling::solid(&target, &mut r, sb, Role::Compact);
        let u = a.union(&b);
        let masses = [mu.eval(&a)?, mu.eval(&b)?, mu.eval(&u)?];
        if masses[2] > masses[0] + masses[1] + 1e-12 {
            return Ok(Some(MedianWitness { values, a, b, masses }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Arc<GridSpace> {
        Arc::new(GridSpace::line(n, Mode::Compact).unwrap())
    }

    #[test]
    fn constants_give_the_middle_value() {
        let x = line(10);
        let fam = VariableFamily::constants(x.clone(), &[7, 2, 4]).unwrap();
        let m = gdsm_measure_1d(&fam).unwrap();
        assert_eq!(m[4], 1.0);
        assert_eq!(m.iter().sum::<f64>(), 1.0);
        assert_eq!(gdsm_region(&fam, &x.region([4], Role::Compact).unwrap()).unwrap(), 1.0);
        assert_eq!(gdsm_region(&fam, &x.region([9], Role::Compact).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn even_constants_split_the_mass() {
        let x = line(10);
        let fam = VariableFamily::constants(x.clone(), &[1, 2, 3, 4]).unwrap();
        let m = gdsm_measure_1d(&fam).unwrap();
        assert_eq!((m[2], m[3]), (0.5, 0.5));
        let mu = gdsm_even(&fam).unwrap();
        assert_eq!(mu.eval(&x.region([2], Role::Compact).unwrap()).unwrap(), 0.5);
        assert!(matches!(gdsm_region(&fam, &x.full(Role::Open)), Err(Error::FamilyParity(_))));
    }

    #[test]
    fn order_statistics_sort_values() {
        let x = line(10);
        let fam = VariableFamily::constants(x, &[3, 1, 2]).unwrap();
        assert_eq!(order_statistic(&fam, 1, 0).unwrap(), 1.0);
        assert_eq!(order_statistic(&fam, 2, 0).unwrap(), 2.0);
        assert!(order_statistic(&fam, 4, 0).is_err());
    }

    #[test]
    fn hand_enumerated_family() {
        // Y = {y0, y1} with masses 1/4, 3/4; values per point
        let x = line(6);
        let fam = VariableFamily::weighted(vec![0.25, 0.75], x.clone(), vec![vec![0, 5], vec![1, 4], vec![5, 0]]).unwrap();
        let left = x.region([0, 1, 2], Role::Compact).unwrap();
        // y0: 0,1 in, 5 out → majority; y1: 5,4 out, 0 in → none
        assert_eq!(gdsm_region(&fam, &left).unwrap(), 0.25);
        assert_eq!(gdsm_region(&fam, &x.full(Role::Compact)).unwrap(), 1.0);
    }

    #[test]
    fn identity_family_is_identity() {
        let x = Arc::new(GridSpace::new(4, 4, Mode::Compact).unwrap());
        let p = TopoMeasure::cell_count(x.clone());
        let id: Vec<usize> = (0..16).collect();
        let fam = VariableFamily::on_grid(p, x.clone(), vec![id.clone(), id.clone(), id]).unwrap();
        let q = sample_median_q(&fam).unwrap();
        let a = x.region([0, 1, 5, 10, 15], Role::Compact).unwrap();
        assert_eq!(q.apply(&a).unwrap(), a);
    }

    #[test]
    fn fold_is_not_a_solid_variable() {
        let x = line(9);
        let fold: Vec<usize> = (0..9).map(|i| if i < 4 { 8 - i } else { i }).collect();
        let err = SolidVariable::checked(x.clone(), x.clone(), fold.clone(), 4, 1).unwrap_err();
        assert!(matches!(err, Error::NotSolidVariable(_)));
        assert!(SolidVariable::monotone_1d(x.clone(), x, fold).is_err());
    }

    #[test]
    fn witness_on_square() {
        let x = Arc::new(GridSpace::new(5, 5, Mode::Compact).unwrap());
        let w = find_nonadditivity_witness(x, 2000, 3).unwrap().expect("witness");
        assert!(w.masses[2] > w.masses[0] + w.masses[1]);
    }
}
