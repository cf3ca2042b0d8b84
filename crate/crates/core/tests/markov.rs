use proptest::prelude::*;
use rand::Rng as _;
use std::sync::Arc;
use topomeasure::image_transforms::{constant_from_simple, from_proper_map, random_continuous_map, square_isometry, theta, ImageTransform};
use topomeasure::kr::{euclid, w1_discrete, DiscreteMeasure};
use topomeasure::markov::{
    apply, apply_discrete, chaos_game, contraction_check, fixed_point_discrete, fixed_point_grid, iterate,
    render_density, AffineMap, TransformSystem,
};
use topomeasure::qmeasures;
use topomeasure::quasi_integral::{quasi_integral, GridFunction};
use topomeasure::{extend, rng, sampling, GridSpace, Mode, Region, Role, TopoMeasure};

fn square() -> Arc<GridSpace> {
    Arc::new(GridSpace::new(5, 5, Mode::Compact).unwrap())
}

fn grid_system(seed: u64) -> TransformSystem {
    let s = square();
    let mut r = rng::stream(seed, "system");
    let ts: Vec<ImageTransform> = (0..3)
        .map(|_| from_proper_map(s.clone(), s.clone(), random_continuous_map(&s, &mut r, 2).unwrap()).unwrap())
        .collect();
    TransformSystem::grid(ts, vec![0.25, 0.25, 0.5]).unwrap()
}

fn random_region(s: &GridSpace, r: &mut rng::Rng) -> Region {
    let role = if r.gen_bool(0.5) { Role::Compact } else { Role::Open };
    let size = r.gen_range(1..12);
    sampling::scatter(s, r, 2, size, role)
}

#[test]
fn identity_system_is_identity() {
    let s = square();
    let id = TransformSystem::grid(vec![ImageTransform::identity(s.clone())], vec![1.0]).unwrap();
    let mu = extend(&qmeasures::make_aarnes_circle(s.clone(), s.index(2, 2)).unwrap());
    let out = apply(&id, &mu).unwrap();
    let mut r = rng::stream(1, "identity");
    for _ in 0..50 {
        let a = random_region(&s, &mut r);
        assert_eq!(out.eval(&a).unwrap(), mu.eval(&a).unwrap());
    }
}

#[test]
fn constant_adjoint_system_fixes_in_one_step() {
    let s = square();
    let simple = extend(&qmeasures::make_aarnes_circle(s.clone(), s.index(2, 2)).unwrap());
    let q = constant_from_simple(&simple, s.clone()).unwrap();
    let system = TransformSystem::grid(vec![q], vec![1.0]).unwrap();
    let mu0 = TopoMeasure::dirac(s.clone(), 3).unwrap();
    let once = apply(&system, &mu0).unwrap();
    let mut r = rng::stream(2, "constant");
    for _ in 0..50 {
        let a = random_region(&s, &mut r);
        assert_eq!(once.eval(&a).unwrap(), simple.eval(&a).unwrap());
    }
    let fp = fixed_point_grid(&system, &mu0, 1e-12, 5, 2).unwrap();
    assert_eq!(fp.iterations, 1);
    assert!(fp.trace[0] > 0.0 && fp.trace[1] == 0.0);
}

#[test]
fn iterates_match_word_expansion() {
    let system = grid_system(3);
    let s = square();
    let mu = extend(&qmeasures::make_point_config(s.clone(), &[2, 11, 23]).unwrap());
    let topomeasure::markov::Backend::Grid(ts) = system.backend() else { unreachable!() };
    let mut r = rng::stream(3, "words");
    for k in 0..=3usize {
        let lazy = iterate(&system, &mu, k).unwrap();
        for _ in 0..20 {
            let a = random_region(&s, &mut r);
            let mut expected = 0.0;
            for word in 0..3usize.pow(k as u32) {
                let (mut w, mut weight, mut region) = (word, 1.0, a.clone());
                for _ in 0..k {
                    let i = w % 3;
                    w /= 3;
                    weight *= system.alphas()[i];
                    region = ts[i].apply(&region).unwrap();
                }
                expected += weight * mu.eval(&region).unwrap();
            }
            assert!((lazy.eval(&a).unwrap() - expected).abs() <= 1e-12);
        }
    }
}

#[test]
fn truncated_generator_within_tail_bound() {
    let s = square();
    let rot = |i: usize| from_proper_map(s.clone(), s.clone(), square_isometry(&s, i % 8).unwrap()).unwrap();
    let make = |eps: f64| {
        TransformSystem::grid_from_generator(|i| (rot(i), 0.5f64.powi(i as i32)), |n| 0.5f64.powi(n as i32), eps).unwrap()
    };
    let (short, long) = (make(1e-3), make(1e-9));
    assert!(short.len() < long.len());
    let mu = TopoMeasure::cell_count(s.clone());
    let f = GridFunction::from_fn(&s, |i| (i % 7) as f64 - 3.0);
    let gap = (quasi_integral(&apply(&short, &mu).unwrap(), &f).unwrap() - quasi_integral(&apply(&long, &mu).unwrap(), &f).unwrap()).abs();
    assert!(gap <= f.sup_norm(&s) * mu.total_mass().unwrap() * short.tail_bound() + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn preserves_combinations(seed in any::<u64>(), a in 0u32..=8) {
        let s = square();
        let system = grid_system(seed);
        let mu = extend(&qmeasures::make_aarnes_circle(s.clone(), s.index(2, 2)).unwrap());
        let nu = TopoMeasure::dirac(s.clone(), (seed % 25) as usize).unwrap();
        let (a, b) = (a as f64 / 8.0, 1.0 - a as f64 / 8.0);
        let mix = apply(&system, &TopoMeasure::combination(vec![(a, mu.clone()), (b, nu.clone())]).unwrap()).unwrap();
        let (smu, snu) = (apply(&system, &mu).unwrap(), apply(&system, &nu).unwrap());
        let mut r = rng::stream(seed, "linear");
        for _ in 0..20 {
            let set = random_region(&s, &mut r);
            prop_assert_eq!(mix.eval(&set).unwrap(), a * smu.eval(&set).unwrap() + b * snu.eval(&set).unwrap());
        }
    }

    #[test]
    fn feller_duality(seed in any::<u64>()) {
        let s = square();
        let system = grid_system(seed);
        let topomeasure::markov::Backend::Grid(ts) = system.backend() else { unreachable!() };
        let mut r = rng::stream(seed, "feller");
        let weights: Vec<f64> = (0..25).map(|_| r.gen_range(0..4) as f64 / 64.0).collect();
        let mu = TopoMeasure::cell_weights(s.clone(), weights).unwrap();
        let f = GridFunction::new(&s, (0..25).map(|_| r.gen_range(-6..=6) as f64 / 2.0).collect()).unwrap();
        let lhs = quasi_integral(&apply(&system, &mu).unwrap(), &f).unwrap();
        let mut tf = GridFunction::constant(&s, 0.0);
        for (q, a) in ts.iter().zip(system.alphas()) {
            tf = tf.add(&theta(q, &f).unwrap().scale(*a));
        }
        let rhs = quasi_integral(&mu, &tf).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn pushforward_mean(x in -3.0..3.0f64, y in -3.0..3.0f64) {
        let s = TransformSystem::sierpinski();
        let out = apply_discrete(&s, &DiscreteMeasure::dirac([x, y]), 16).unwrap();
        let topomeasure::markov::Backend::Affine(maps) = s.backend() else { unreachable!() };
        let mut expected = [0.0; 2];
        for (m, a) in maps.iter().zip(s.alphas()) {
            let p = m.apply([x, y]);
            expected[0] += a * p[0];
            expected[1] += a * p[1];
        }
        let mean = out.mean();
        prop_assert!((mean[0] - expected[0]).abs() <= 1e-15 && (mean[1] - expected[1]).abs() <= 1e-15);
    }

    #[test]
    fn iterates_forget_the_start(seed in any::<u64>()) {
        let system = TransformSystem::sierpinski();
        let mut r = rng::stream(seed, "uniqueness");
        let mut cloud = |n: usize| DiscreteMeasure::uniform((0..n).map(|_| [r.gen_range(-1.0..2.0), r.gen_range(-1.0..2.0)]).collect());
        let (mut a, mut b) = (cloud(3), cloud(4));
        let start = w1_discrete(&a, &b).unwrap().value;
        for k in 1..=3 {
            a = apply_discrete(&system, &a, 1 << 12).unwrap();
            b = apply_discrete(&system, &b, 1 << 12).unwrap();
            let gap = w1_discrete(&a, &b).unwrap().value;
            prop_assert!(gap <= 0.5f64.powi(k) * start + 1e-9);
        }
    }
}

#[test]
fn sierpinski_contracts() {
    let report = contraction_check(&TransformSystem::sierpinski(), 50, 4).unwrap();
    assert!(report.max_ratio <= 0.5 + 1e-9);
    assert!(report.contraction);
    let id = TransformSystem::affine(vec![AffineMap::scaling(1.0, [0.0, 0.0])], vec![1.0]).unwrap();
    let report = contraction_check(&id, 10, 4).unwrap();
    assert!(report.ratios.iter().all(|r| *r <= 1.0 + 1e-9));
}

#[test]
fn grid_contraction_report() {
    let s = square();
    let rot = from_proper_map(s.clone(), s.clone(), square_isometry(&s, 1).unwrap()).unwrap();
    let system = TransformSystem::grid(vec![rot], vec![1.0]).unwrap();
    let report = contraction_check(&system, 30, 5).unwrap();
    assert!(report.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));
    assert!(!report.contraction);
}

#[test]
fn sierpinski_trace_halves() {
    let fp = fixed_point_discrete(&TransformSystem::sierpinski(), &DiscreteMeasure::dirac([0.0, 0.0]), 0.0, 8, 50_000).unwrap();
    let d0 = fp.trace[0].upper;
    for step in &fp.trace {
        assert!(step.upper <= 0.5f64.powi(step.k as i32) * d0 * 1.05);
        assert!(step.lower <= step.upper + 1e-12);
    }
    assert!(fp.trace.iter().any(|s| s.exact) && fp.trace.iter().any(|s| !s.exact));
}

#[test]
fn expansion_is_reported() {
    let system = TransformSystem::affine(vec![AffineMap::scaling(2.0, [0.0, 0.0])], vec![1.0]).unwrap();
    let err = fixed_point_discrete(&system, &DiscreteMeasure::uniform(vec![[1.0, 0.0], [0.0, 1.0]]), 1e-9, 20, 1 << 16);
    assert!(matches!(err, Err(topomeasure::Error::ContractionViolated(_))));
}

#[test]
fn chaos_game_single_map_and_triangle() {
    let m = AffineMap::scaling(0.5, [0.3, 0.2]);
    let single = TransformSystem::affine(vec![m], vec![1.0]).unwrap();
    let fixed = m.fixed_point().unwrap();
    let burn = 30;
    let pts = chaos_game(&single, 100, burn, 1).unwrap();
    assert!(pts.points().iter().all(|p| euclid(*p, fixed) <= 0.5f64.powi(burn as i32)));
    let gasket = chaos_game(&TransformSystem::sierpinski(), 100_000, 20, 2).unwrap();
    let h = 3f64.sqrt() / 2.0;
    for p in gasket.points() {
        assert!(p[1] >= -1e-12 && p[1] <= h * (1.0 - (2.0 * p[0] - 1.0).abs()) + 1e-12);
    }
    assert_eq!(chaos_game(&TransformSystem::sierpinski(), 50, 5, 9).unwrap(), chaos_game(&TransformSystem::sierpinski(), 50, 5, 9).unwrap());
}

#[test]
fn rendered_gasket_has_nested_voids() {
    let gasket = chaos_game(&TransformSystem::sierpinski(), 100_000, 20, 3).unwrap();
    let raster = render_density(&gasket, 512, [0.0, 1.0, 0.0, 1.0]).unwrap();
    assert_eq!(raster.hits.iter().sum::<u64>(), 100_000);
    let pixel = |x: f64, y: f64| {
        let col = (x * 512.0) as usize;
        let row = ((1.0 - y) * 512.0) as usize;
        raster.pixels[row * 512 + col]
    };
    // centroids of the removed triangles at the first three levels
    let h = 3f64.sqrt() / 2.0;
    let mut voids = vec![([0.0, 0.0], 1.0)];
    for _level in 0..3 {
        let mut next = Vec::new();
        for (corner, side) in &voids {
            let [x, y]: [f64; 2] = *corner;
            let side: f64 = *side;
            assert_eq!(pixel(x + side / 2.0, y + side * h / 3.0), 0, "void at scale {side}");
            let half = side / 2.0;
            next.extend([([x, y], half), ([x + half, y], half), ([x + half / 2.0, y + half * h], half)]);
        }
        voids = next;
    }
}
