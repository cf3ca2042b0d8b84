use crate::error::CliError;
use crate::scene::Scene;
use std::io::{BufWriter, Write};
use std::path::Path;
use topomeasure::image_transforms::check_it_axioms;
use topomeasure::kr::{d_kr_topo_lower, w1_discrete, DiscreteMeasure};
use topomeasure::markov::{chaos_game, fixed_point_discrete, fixed_point_grid, render_density, write_ppm, Backend};
use topomeasure::median::{gdsm, gdsm_measure_1d};
use topomeasure::qmeasures::{check_ssf_axioms, check_tm1, AxiomReport};
use topomeasure::quasi_integral::quasi_integral;

/// Rows of a CSV report and whether every checked property held.
pub struct Outcome {
    pub rows: Vec<Vec<String>>,
    pub pass: bool,
}

impl Outcome {
    fn new(header: &[&str]) -> Self {
        Outcome {
            rows: vec![header.iter().map(|s| s.to_string()).collect()],
            pass: true,
        }
    }

    fn row(&mut self, fields: Vec<String>) {
        self.rows.push(fields);
    }
}

/// 12 significant digits, printed in shortest form.
pub fn num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::Reference("this command is stochastic: pass --seed or set seed in the scene".into()))
}

fn report_rows(out: &mut Outcome, target: &str, report: &AxiomReport) {
    for c in &report.checks {
        out.row(vec![target.into(), c.name.clone(), c.samples.to_string(), c.violations.to_string()]);
    }
    for w in &report.witnesses {
        let regions: Vec<String> = w.regions.iter().map(|(n, r)| format!("{n}={r}")).collect();
        let values: Vec<String> = w.values.iter().map(|v| num(*v)).collect();
        out.row(vec!["witness".into(), w.axiom.clone(), regions.join(";"), values.join(";"), w.detail.clone()]);
    }
    out.pass = report.pass;
}

pub fn axioms(scene: &Scene, name: &str, budget: usize, seed: Option<u64>) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["target", "check", "samples", "violations"]);
    let report = if scene.is_measure(name) {
        let seed = require_seed(seed)?;
        match scene.solid_set_function(name)? {
            Some(lambda) => check_ssf_axioms(&lambda, budget, seed)?,
            None => check_tm1(&scene.measure(name)?, budget, seed)?,
        }
    } else if scene.is_transform(name) {
        check_it_axioms(&scene.transform(name)?, budget, require_seed(seed)?)?
    } else {
        return Err(CliError::Reference(format!("no measure or transform named {name:?}")));
    };
    report_rows(&mut out, name, &report);
    out.row(vec!["result".into(), if out.pass { "pass" } else { "fail" }.into()]);
    Ok(out)
}

pub fn eval(scene: &Scene, measure: &str, regions: &[String]) -> Result<Outcome, CliError> {
    let mu = scene.measure(measure)?;
    let names = if regions.is_empty() { scene.region_names() } else { regions.to_vec() };
    let mut out = Outcome::new(&["measure", "region", "value"]);
    for r in &names {
        let v = mu.eval(&scene.region(r)?)?;
        out.row(vec![measure.into(), r.clone(), num(v)]);
    }
    Ok(out)
}

pub fn integrate(scene: &Scene, measure: &str, function: &str) -> Result<Outcome, CliError> {
    let v = quasi_integral(&scene.measure(measure)?, &scene.function(function)?)?;
    let mut out = Outcome::new(&["measure", "function", "value"]);
    out.row(vec![measure.into(), function.into(), num(v)]);
    Ok(out)
}

pub fn kr(scene: &Scene, a: &str, b: &str, budget: usize, seed: Option<u64>) -> Result<Outcome, CliError> {
    let mut out = Outcome::new(&["method", "value"]);
    if scene.is_cloud(a) && scene.is_cloud(b) {
        let t = w1_discrete(&scene.cloud(a)?, &scene.cloud(b)?)?;
        out.row(vec!["w1".into(), num(t.value)]);
        out.row(vec!["dual".into(), num(t.dual_value)]);
    } else {
        let (mu, nu) = (scene.measure(a)?, scene.measure(b)?);
        let iters = (budget / 25).clamp(5, 40);
        let bound = d_kr_topo_lower(&mu, &nu, 8, iters, require_seed(seed)?)?;
        out.row(vec!["kr_lower".into(), num(bound.value)]);
    }
    Ok(out)
}

pub fn markov(scene: &Scene, system: &str, steps: usize, start: Option<&str>, tol: f64, seed: Option<u64>) -> Result<Outcome, CliError> {
    let sys = scene.system(system)?;
    let mut out = Outcome::new(&["k", "d_k", "lower", "exact"]);
    match sys.backend() {
        Backend::Affine(_) => {
            let mu0 = match start {
                Some(c) => scene.cloud(c)?,
                None => DiscreteMeasure::dirac([0.0, 0.0]),
            };
            let s = sys.contraction_factor().expect("affine systems have a factor");
            let fp = fixed_point_discrete(&sys, &mu0, tol, steps, 200_000)?;
            for step in &fp.trace {
                out.row(vec![step.k.to_string(), num(step.upper), num(step.lower), step.exact.to_string()]);
            }
            for w in fp.trace.windows(2) {
                if w[0].upper > 0.0 && w[1].upper / w[0].upper > s + 1e-9 {
                    out.row(vec!["violation".into(), w[1].k.to_string(), num(w[1].upper / w[0].upper), num(s)]);
                    out.pass = false;
                }
            }
        }
        Backend::Grid(_) => {
            let start = start.ok_or_else(|| CliError::Reference("grid systems need --start <measure>".into()))?;
            let fp = fixed_point_grid(&sys, &scene.measure(start)?, tol, steps, require_seed(seed)?)?;
            for (k, d) in fp.trace.iter().enumerate() {
                out.row(vec![k.to_string(), num(*d), num(*d), "false".into()]);
            }
        }
    }
    Ok(out)
}

pub struct RenderArgs<'a> {
    pub points: usize,
    pub resolution: usize,
    pub burn_in: usize,
    pub bounds: Option<[f64; 4]>,
    pub out: Option<&'a Path>,
}

fn bounding_box(nu: &DiscreteMeasure) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in nu.points() {
        b = [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])];
    }
    let side = (b[1] - b[0]).max(b[3] - b[2]).max(1e-6) * 1.02;
    let (cx, cy) = ((b[0] + b[1]) / 2.0, (b[2] + b[3]) / 2.0);
    [cx - side / 2.0, cx + side / 2.0, cy - side / 2.0, cy + side / 2.0]
}

pub fn render(scene: &Scene, system: &str, args: RenderArgs, seed: Option<u64>) -> Result<Outcome, CliError> {
    let path = args.out.ok_or_else(|| CliError::Reference("render needs --out <file.ppm>".into()))?;
    let sys = scene.system(system)?;
    let cloud = chaos_game(&sys, args.points, args.burn_in, require_seed(seed)?)?;
    let bounds = args.bounds.unwrap_or_else(|| bounding_box(&cloud));
    let raster = render_density(&cloud, args.resolution, bounds)?;
    let file = std::fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write_ppm(&raster, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Outcome::new(&["width", "height", "points", "hits", "nonempty_pixels"]);
    out.row(vec![
        raster.width.to_string(),
        raster.height.to_string(),
        args.points.to_string(),
        raster.hits.iter().sum::<u64>().to_string(),
        raster.hits.iter().filter(|&&h| h > 0).count().to_string(),
    ]);
    Ok(out)
}

pub fn median(scene: &Scene, family: &str) -> Result<Outcome, CliError> {
    let fam = scene.family(family)?;
    if fam.target().is_line() {
        let mut out = Outcome::new(&["cell", "mass"]);
        for (c, m) in gdsm_measure_1d(&fam)?.iter().enumerate() {
            if *m != 0.0 {
                out.row(vec![c.to_string(), num(*m)]);
            }
        }
        Ok(out)
    } else {
        let mu = gdsm(&fam)?;
        let mut out = Outcome::new(&["region", "mass"]);
        for r in scene.region_names() {
            out.row(vec![r.clone(), num(mu.eval(&scene.region(&r)?)?)]);
        }
        Ok(out)
    }
}
