use proptest::prelude::*;
use std::sync::Arc;
use topomeasure::image_transforms::{adjoint, check_it_axioms, random_continuous_map};
use topomeasure::median::{
    equivariance_check, gdsm, gdsm_even, gdsm_measure_1d, gdsm_region, sample_median_q, SolidVariable, VariableFamily,
};
use topomeasure::qmeasures::check_tm1;
use topomeasure::{rng, sampling, GridSpace, Mode, Region, Role, TopoMeasure};

const CELLS: usize = 12;

fn line() -> Arc<GridSpace> {
    Arc::new(GridSpace::line(CELLS, Mode::Compact).unwrap())
}

/// Dyadic weights (multiples of 1/1024) summing to 1, so every partial sum is exact.
fn dyadic_weights(raw: &[u32]) -> Vec<f64> {
    let total: u32 = raw.iter().sum();
    let mut units: Vec<u32> = raw.iter().map(|r| r * 1024 / total).collect();
    let short = 1024 - units.iter().sum::<u32>();
    units[0] += short;
    units.iter().map(|&u| u as f64 / 1024.0).collect()
}

fn family_1d(sizes: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = VariableFamily> {
    (1usize..=20, sizes).prop_flat_map(|(points, maps)| {
        (
            prop::collection::vec(1u32..50, points),
            prop::collection::vec(prop::collection::vec(0..CELLS, points), maps),
        )
            .prop_map(|(raw, maps)| VariableFamily::weighted(dyadic_weights(&raw), line(), maps).unwrap())
    })
}

/// Mass per cell of the k-th smallest value, by sorting at every sample point.
fn sorted_pushforward(weights: &[f64], maps: &[Vec<usize>], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; CELLS];
    for (y, w) in weights.iter().enumerate() {
        let mut v: Vec<usize> = maps.iter().map(|m| m[y]).collect();
        v.sort();
        out[v[k - 1]] += w;
    }
    out
}

fn weights_of(fam: &VariableFamily) -> Vec<f64> {
    let p = fam.probability();
    (0..fam.base().len())
        .map(|y| p.eval(&fam.base().region([y], Role::Compact).unwrap()).unwrap())
        .collect()
}

fn interval(s: &GridSpace, a: usize, b: usize, role: Role) -> Region {
    s.region(a..=b, role).unwrap()
}

fn odd_sizes() -> impl Strategy<Value = usize> {
    prop_oneof![Just(3usize), Just(5), Just(7)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn odd_family_is_distribution_of_median(fam in odd_sizes().prop_flat_map(|m| family_1d(m..=m))) {
        let s = fam.target().clone();
        let w = weights_of(&fam);
        let oracle = sorted_pushforward(&w, fam.maps(), fam.len().div_ceil(2));
        let mu = gdsm(&fam).unwrap();
        for c in 0..CELLS {
            prop_assert_eq!(mu.eval(&s.region([c], Role::Compact).unwrap()).unwrap(), oracle[c]);
        }
        prop_assert_eq!(gdsm_measure_1d(&fam).unwrap(), oracle.clone());
        for a in 0..CELLS {
            for b in a..CELLS {
                let expected: f64 = oracle[a..=b].iter().sum();
                prop_assert_eq!(gdsm_region(&fam, &interval(&s, a, b, Role::Compact)).unwrap(), expected);
            }
        }
    }

    #[test]
    fn even_family_formulas_agree(fam in prop_oneof![Just(4usize), Just(6)].prop_flat_map(|m| family_1d(m..=m))) {
        let s = fam.target().clone();
        let w = weights_of(&fam);
        let n = fam.len() / 2;
        let (lo, hi) = (sorted_pushforward(&w, fam.maps(), n), sorted_pushforward(&w, fam.maps(), n + 1));
        // gdsm_even fails on any disagreement between the augmented and leave-one-out averages
        let mu = gdsm_even(&fam).unwrap();
        for c in 0..CELLS {
            prop_assert_eq!(mu.eval(&s.region([c], Role::Compact).unwrap()).unwrap(), 0.5 * lo[c] + 0.5 * hi[c]);
        }
        let mut leave_one_out = [0.0; CELLS];
        for j in 0..fam.len() {
            let rest = fam.leave_out(j).unwrap();
            let m = sorted_pushforward(&w, rest.maps(), n);
            for c in 0..CELLS {
                leave_one_out[c] += m[c];
            }
        }
        for c in 0..CELLS {
            prop_assert_eq!(leave_one_out[c] / fam.len() as f64, 0.5 * lo[c] + 0.5 * hi[c]);
        }
    }

    #[test]
    fn interval_additivity(fam in family_1d(3..=7), a in 0..CELLS, b in 0..CELLS, c in 0..CELLS, d in 0..CELLS) {
        let s = fam.target().clone();
        let mu = gdsm(&fam).unwrap();
        let (a, b) = (a.min(b), a.max(b));
        let (c, d) = (c.min(d), c.max(d));
        let (ia, ib) = (interval(&s, a, b, Role::Compact), interval(&s, c, d, Role::Compact));
        let u = ia.union(&ib);
        let (va, vb, vu) = (mu.eval(&ia).unwrap(), mu.eval(&ib).unwrap(), mu.eval(&u).unwrap());
        if b < c || d < a {
            prop_assert_eq!(vu, va + vb);
        } else {
            prop_assert!(vu <= va + vb);
        }
    }

    #[test]
    fn monotone_maps_are_equivariant(fam in family_1d(3..=6), mut f in prop::collection::vec(0..CELLS, CELLS), down in any::<bool>()) {
        let s = fam.target().clone();
        f.sort();
        if down {
            f.reverse();
        }
        let f = SolidVariable::monotone_1d(s.clone(), s.clone(), f).unwrap();
        let mut probes = Vec::new();
        for a in 0..CELLS {
            for b in a..CELLS {
                probes.push(interval(&s, a, b, Role::Compact));
                probes.push(interval(&s, a, b, Role::Open));
            }
        }
        let report = equivariance_check(&f, &fam, &probes).unwrap();
        prop_assert!(report.pass, "{:?}", report);
    }
}

#[test]
fn three_maps_on_two_points_by_enumeration() {
    let s = line();
    let maps = vec![vec![0, 9], vec![4, 5], vec![11, 6]];
    let w = [0.375, 0.625];
    let fam = VariableFamily::weighted(w.to_vec(), s.clone(), maps.clone()).unwrap();
    // end-anchored intervals are the solid ones on a compact line
    for b in 0..CELLS {
        for (lo, hi) in [(0, b), (b, CELLS - 1)] {
            let a = interval(&s, lo, hi, Role::Compact);
            let mut expected = 0.0;
            for y in 0..2 {
                if maps.iter().filter(|m| (lo..=hi).contains(&m[y])).count() >= 2 {
                    expected += w[y];
                }
            }
            assert_eq!(gdsm_region(&fam, &a).unwrap(), expected, "[{lo}, {hi}]");
        }
    }
}

#[test]
fn constants_on_the_square() {
    let s = Arc::new(GridSpace::new(5, 5, Mode::Compact).unwrap());
    let pts = [s.index(0, 0), s.index(2, 2), s.index(4, 1)];
    let fam = VariableFamily::constants(s.clone(), &pts).unwrap();
    let q = sample_median_q(&fam).unwrap();
    let mut r = rng::stream(5, "constants");
    for _ in 0..200 {
        let role = if rand::Rng::gen_bool(&mut r, 0.5) { Role::Compact } else { Role::Open };
        let size = rand::Rng::gen_range(&mut r, 1..20);
        let a = sampling::solid(&s, &mut r, size, role);
        let inside = pts.iter().filter(|&&p| a.contains(p)).count();
        assert_eq!(q.apply(&a).unwrap().len(), (inside >= 2) as usize);
    }
    let mu = gdsm(&fam).unwrap();
    assert_eq!(mu.total_mass().unwrap(), 1.0);
}

/// Continuous maps of the square into itself, sample space the square with random dyadic weights.
fn grid_family(s: &Arc<GridSpace>, maps: usize, seed: u64) -> VariableFamily {
    let mut r = rng::stream(seed, "grid-family");
    let weights: Vec<f64> = (0..s.len()).map(|_| rand::Rng::gen_range(&mut r, 0..4) as f64 / 64.0).collect();
    let p = TopoMeasure::cell_weights(s.clone(), weights).unwrap();
    let maps = (0..maps).map(|_| random_continuous_map(s, &mut r, 3).unwrap()).collect();
    VariableFamily::on_grid(p, s.clone(), maps).unwrap()
}

#[test]
fn majority_map_is_an_image_transformation() {
    let line = line();
    let fam = VariableFamily::weighted(vec![0.5, 0.25, 0.25], line, vec![vec![1, 5, 9], vec![3, 3, 0], vec![10, 2, 6]]).unwrap();
    let report = check_it_axioms(&sample_median_q(&fam).unwrap(), 300, 1).unwrap();
    assert!(report.pass, "{:?}", report.witnesses);
    let s = Arc::new(GridSpace::new(5, 5, Mode::Compact).unwrap());
    for seed in 0..3 {
        let fam = grid_family(&s, 3, seed);
        let q = sample_median_q(&fam).unwrap();
        let report = check_it_axioms(&q, 300, seed).unwrap();
        assert!(report.pass, "{:?}", report.witnesses);
        let mu = adjoint(&q, fam.probability()).unwrap();
        assert!(check_tm1(&mu, 2000, seed).unwrap().pass);
    }
}

#[test]
fn even_formulas_agree_on_the_square() {
    let s = Arc::new(GridSpace::new(5, 5, Mode::Compact).unwrap());
    for seed in 0..3 {
        let mu = gdsm_even(&grid_family(&s, 4, seed)).unwrap();
        let mut r = rng::stream(seed, "even-probes");
        for i in 0..200 {
            let role = if i % 2 == 0 { Role::Compact } else { Role::Open };
            let size = rand::Rng::gen_range(&mut r, 1..25);
            mu.eval(&sampling::scatter(&s, &mut r, 3, size, role)).unwrap();
        }
    }
}

fn square_probes(s: &GridSpace, seed: u64) -> Vec<Region> {
    let mut r = rng::stream(seed, "probes");
    (0..64)
        .map(|i| {
            let role = if i % 2 == 0 { Role::Compact } else { Role::Open };
            let size = rand::Rng::gen_range(&mut r, 1..20);
            if i % 4 < 2 {
                sampling::solid(s, &mut r, size, role)
            } else {
                sampling::scatter(s, &mut r, 3, size, role)
            }
        })
        .collect()
}

#[test]
fn isometries_are_equivariant_and_compose() {
    let s = Arc::new(GridSpace::new(5, 5, Mode::Compact).unwrap());
    let probes = square_probes(&s, 7);
    let fam = grid_family(&s, 3, 11);
    let isos: Vec<SolidVariable> = (0..8).map(|k| SolidVariable::grid_isometry(s.clone(), k).unwrap()).collect();
    for f in &isos {
        let report = equivariance_check(f, &fam, &probes).unwrap();
        assert!(report.pass, "{:?}", report);
        assert!(equivariance_check(f, &grid_family(&s, 4, 12), &probes).unwrap().pass);
    }
    for (a, b) in [(1, 4), (3, 6), (5, 7)] {
        let f = isos[a].then(&isos[b]).unwrap();
        assert!(equivariance_check(&f, &fam, &probes).unwrap().pass);
    }
}

#[test]
fn folds_are_rejected_before_testing() {
    let s = line();
    let fold: Vec<usize> = (0..CELLS).map(|i| if i < 6 { 11 - i } else { i }).collect();
    let f = SolidVariable::checked(s.clone(), s.clone(), fold, 4, 1);
    assert!(f.is_err());
}

#[test]
fn odd_queries_reject_even_families() {
    let fam = VariableFamily::constants(line(), &[1, 2, 3, 4]).unwrap();
    assert!(sample_median_q(&fam).is_err());
    assert!(gdsm_region(&fam, &line().full(Role::Compact)).is_err());
    let fam = VariableFamily::constants(line(), &[1, 2, 3]).unwrap();
    assert!(gdsm_even(&fam).is_err());
}
