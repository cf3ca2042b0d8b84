use proptest::prelude::*;
use std::sync::Arc;
use topomeasure::qmeasures;
use topomeasure::quasi_integral::{quasi_integral, GridFunction};
use topomeasure::{extend, rng, sampling, CellSet, Connectivity, GridSpace, Kind, Mode, Region, Role, TopoMeasure};

fn square(n: usize) -> Arc<GridSpace> {
    Arc::new(GridSpace::new(n, n, Mode::Compact).unwrap())
}

/// Gallery measures on an n×n square (n ≥ 4). All but the last take dyadic values.
fn gallery(n: usize) -> Vec<TopoMeasure> {
    let s = square(n);
    let d = s.block(1, 1, 2, 1, Role::Compact).unwrap();
    vec![
        TopoMeasure::dirac(s.clone(), s.index(1, 2)).unwrap(),
        extend(&qmeasures::make_point_config(s.clone(), &[0, s.index(3, 1), s.index(1, 3)]).unwrap()),
        extend(&qmeasures::make_aarnes_circle(s.clone(), s.index(1, 1)).unwrap()),
        qmeasures::make_diffuse_dtm(s.clone(), &d).unwrap(),
        TopoMeasure::cell_count(s),
    ]
}

const GALLERY: usize = 5;

fn close(a: f64, b: f64, exact: bool) -> bool {
    if exact {
        a == b
    } else {
        (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
    }
}

/// Quarter-integer values in [lo, 2] on a 5×5 square.
fn values(lo: i32) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((lo..=8).prop_map(|k| k as f64 / 4.0), 25)
}

fn setup(k: usize, v: Vec<f64>) -> (TopoMeasure, GridFunction) {
    let mu = gallery(5).swap_remove(k);
    let v = if mu.kind() == Kind::Deficient { v.into_iter().map(f64::abs).collect() } else { v };
    let f = GridFunction::new(mu.space(), v).unwrap();
    (mu, f)
}

/// Σ aᵢ (max(t − bᵢ, 0) − max(−bᵢ, 0)) with aᵢ ≥ 0: nondecreasing, zero at zero.
fn ramp_sum(terms: &[(f64, f64)]) -> impl Fn(f64) -> f64 + '_ {
    move |t| terms.iter().map(|&(a, b)| a * ((t - b).max(0.0) - (-b).max(0.0))).sum()
}

fn ramps() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec(((0..=4).prop_map(|a| a as f64 / 2.0), (-8i32..=8).prop_map(|b| b as f64 / 4.0)), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn positive_homogeneity(k in 0..GALLERY, v in values(-8), c in 0i32..=16) {
        let (mu, f) = setup(k, v);
        let c = c as f64 / 4.0;
        let lhs = quasi_integral(&mu, &f.scale(c)).unwrap();
        let rhs = c * quasi_integral(&mu, &f).unwrap();
        prop_assert!(close(lhs, rhs, k + 1 < GALLERY), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn monotone(k in 0..GALLERY, v in values(-8), bump in prop::collection::vec(0i32..=4, 25)) {
        let (mu, f) = setup(k, v);
        let g = GridFunction::from_fn(mu.space(), |i| f.value(i) + bump[i] as f64 / 4.0);
        prop_assert!(quasi_integral(&mu, &f).unwrap() <= quasi_integral(&mu, &g).unwrap() + 1e-12);
    }

    #[test]
    fn bounded_by_sup_norm(k in 0..GALLERY, v in values(-8)) {
        let (mu, f) = setup(k, v);
        let bound = f.sup_norm(mu.space()) * mu.total_mass().unwrap();
        prop_assert!(quasi_integral(&mu, &f).unwrap().abs() <= bound + 1e-12);
    }

    #[test]
    fn orthogonal_additivity(k in 0..GALLERY, v in values(0), split in prop::collection::vec(any::<bool>(), 25)) {
        let (mu, f) = setup(k, v);
        let left = GridFunction::from_fn(mu.space(), |i| if split[i] { f.value(i) } else { 0.0 });
        // supports may touch at corners but not along an edge, which the open
        // superlevel sets of the sum would contain
        let space = mu.space();
        let near_left = |i: usize| split[i] || space.neighbours(i, Connectivity::Four).any(|n| split[n] && f.value(n) > 0.0);
        let right = GridFunction::from_fn(space, |i| if near_left(i) { 0.0 } else { f.value(i) });
        let f = left.add(&right);
        let whole = quasi_integral(&mu, &f).unwrap();
        let parts = quasi_integral(&mu, &left).unwrap() + quasi_integral(&mu, &right).unwrap();
        prop_assert!(close(whole, parts, k + 1 < GALLERY), "{} vs {}", whole, parts);
    }

    #[test]
    fn lipschitz_on_shared_support(k in 0..GALLERY, v in values(0), w in values(0), keep in prop::collection::vec(any::<bool>(), 25)) {
        let (mu, f) = setup(k, v);
        let f = GridFunction::from_fn(mu.space(), |i| if keep[i] { f.value(i) } else { 0.0 });
        let g = GridFunction::from_fn(mu.space(), |i| if keep[i] { w[i] } else { 0.0 });
        let support = f.support(mu.space()).union(&g.support(mu.space()));
        let bound = f.sub(&g).sup_norm(mu.space()) * mu.eval(&support).unwrap();
        let gap = (quasi_integral(&mu, &f).unwrap() - quasi_integral(&mu, &g).unwrap()).abs();
        prop_assert!(gap <= bound + 1e-12, "{} > {}", gap, bound);
    }

    #[test]
    fn linear_on_functions_of_one_function(k in 0..GALLERY, v in values(-8), phi in ramps(), psi in ramps()) {
        let (mu, f) = setup(k, v);
        let (p, q) = (ramp_sum(&phi), ramp_sum(&psi));
        if mu.kind() == Kind::Deficient {
            prop_assume!(f.values().iter().all(|&t| p(t) >= 0.0 && q(t) >= 0.0));
        }
        let (pf, qf) = (f.map(&p), f.map(&q));
        let joint = quasi_integral(&mu, &pf.add(&qf)).unwrap();
        let sum = quasi_integral(&mu, &pf).unwrap() + quasi_integral(&mu, &qf).unwrap();
        prop_assert!((joint - sum).abs() <= 1e-12 * joint.abs().max(1.0), "{} vs {}", joint, sum);
    }
}

/// μ on a region, recovered from quasi-integrals of indicator functions only:
/// open regions directly, compact ones through their open complements.
fn recovered(mu: &TopoMeasure, r: &Region) -> f64 {
    let space = mu.space();
    let rho = |cells: &CellSet| {
        let region = space.region_from_set(cells.clone(), Role::Open).unwrap();
        quasi_integral(mu, &GridFunction::indicator(space, &region, 1.0)).unwrap()
    };
    match r.role() {
        Role::Open => rho(r.cells()),
        Role::Compact => rho(space.admissible()) - rho(space.complement(r).cells()),
    }
}

#[test]
fn integrals_determine_the_measure_on_a_small_square() {
    for mu in gallery(4) {
        let space = mu.space().clone();
        for mask in 0u32..1 << 16 {
            let cells = CellSet::from_indices(16, (0..16).filter(|b| mask >> b & 1 == 1));
            for role in [Role::Open, Role::Compact] {
                if role == Role::Compact && mu.kind() == Kind::Deficient {
                    continue;
                }
                let r = space.region_from_set(cells.clone(), role).unwrap();
                let (direct, via) = (mu.eval(&r).unwrap(), recovered(&mu, &r));
                assert!(close(direct, via, mu.kind() != Kind::Measure), "{mu:?} {}: {direct} vs {via}", r.to_rle());
            }
        }
    }
}

#[test]
fn integrals_separate_gallery_measures() {
    let g = gallery(5);
    let space = g[0].space().clone();
    let mut r = rng::stream(5, "determination");
    let probes: Vec<Region> = (0..2000)
        .map(|i| {
            let size = 1 + i % 20;
            let role = if i % 2 == 0 { Role::Open } else { Role::Compact };
            sampling::scatter(&space, &mut r, 1 + i % 3, size, role)
        })
        .collect();
    for mu in g.iter().filter(|m| m.kind() != Kind::Deficient) {
        for p in &probes {
            assert!(close(mu.eval(p).unwrap(), recovered(mu, p), mu.kind() != Kind::Measure), "{mu:?} {}", p.to_rle());
        }
    }
    // distinct gallery measures already differ on some open indicator
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            let separated = probes.iter().filter(|p| p.role() == Role::Open).any(|p| {
                let f = GridFunction::indicator(&space, p, 1.0);
                quasi_integral(&g[i], &f).unwrap() != quasi_integral(&g[j], &f).unwrap()
            });
            assert!(separated, "{:?} and {:?}", g[i], g[j]);
        }
    }
    let a = extend(&qmeasures::point_mass(space.clone(), space.index(1, 2)).unwrap());
    for p in &probes {
        let f = GridFunction::indicator(&space, p, 1.0);
        assert_eq!(quasi_integral(&a, &f).unwrap(), quasi_integral(&g[0], &f).unwrap());
    }
}
