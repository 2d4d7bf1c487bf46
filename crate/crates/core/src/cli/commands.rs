//! Implementations of the subcommands.

use super::dataset::{DatasetFormat, ShapeDataset};
use super::output::{matrix_rows, points, points_of, trajectory_json, write_document, RunManifest};
use super::*;
use crate::connection::{christoffel, transport_along_geodesic};
use crate::error::{GeoError, Result};
use crate::framebundle::{brownian_coords, stochastic_development, FramePoint};
use crate::geodesic::{exp, hamiltonian_series, log, tangent_norm, LogOptions};
use crate::integrate::{sample_wiener, SolverConfig};
use crate::kernel::{KernelConfig, Point2};
use crate::manifold::{LandmarkManifold, LandmarkPoint};
use crate::optim::MinimizeOptions;
use crate::stats::{
    euclidean_mean, fm_objective_terms, frechet_mean, frechet_mean_fm, FrechetFmOptions, FrechetOptions,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use std::path::Path;

pub fn run(cmd: &Command) -> Result<Status> {
    match cmd {
        Command::Geodesic(a) => geodesic(a),
        Command::Match(a) => matching(a),
        Command::Transport(a) => transport(a),
        Command::Christoffel(a) => christoffel_cmd(a),
        Command::FrechetMean(a) => frechet(a),
        Command::Brownian(a) => brownian(a),
        Command::Develop(a) => develop(a),
        Command::FrechetFm(a) => frechet_fm(a),
        Command::Synth(a) => synth(a),
    }
}

/// Dataset, manifold and solver resolved from the common options.
struct Setup {
    data: ShapeDataset,
    manifold: LandmarkManifold,
    solver: SolverConfig,
    manifest: RunManifest,
}

fn load(path: &Path, common: &CommonArgs) -> Result<ShapeDataset> {
    let format = match common.format {
        Some(FormatArg::Json) => DatasetFormat::Json,
        Some(FormatArg::Csv) => DatasetFormat::Csv,
        None => DatasetFormat::from_path(path),
    };
    ShapeDataset::load(path, format, common.header)
}

/// Default kernel width: mean consecutive landmark distance of the mean
/// shape, or 1 for single-landmark data.
pub fn default_sigma(data: &ShapeDataset) -> Result<f64> {
    let mean = euclidean_mean(&data.shapes)?;
    Ok(match mean.mean_consecutive_distance() {
        Some(s) if s > 0.0 && s.is_finite() => s,
        _ => 1.0,
    })
}

fn setup<C: Serialize>(cmd: &Command, args: &C, common: &CommonArgs) -> Result<Setup> {
    let data = load(&common.input, common)?;
    let mut manifest = RunManifest::new(cmd.name(), args);
    manifest.add_input("input", &common.input)?;
    let sigma = match common.sigma {
        Some(s) => s,
        None => default_sigma(&data)?,
    };
    let kernel = KernelConfig::new(sigma)?;
    let solver = SolverConfig::new(common.steps, common.horizon, common.scheme.into())?;
    manifest.resolve("sigma", sigma);
    Ok(Setup { data, manifold: LandmarkManifold::new(kernel), solver, manifest })
}

fn pick(data: &ShapeDataset, index: usize, what: &str) -> Result<LandmarkPoint> {
    data.shapes.get(index).cloned().ok_or_else(|| {
        GeoError::InvalidConfig(format!("{what} index {index} out of range for {} shapes", data.len()))
    })
}

fn flatten(points: &[Point2], d: usize, what: &str) -> Result<DVector<f64>> {
    if points.len() * 2 != d {
        return Err(GeoError::DimensionMismatch(format!(
            "{what} has {} landmarks, shapes have {}",
            points.len(),
            d / 2
        )));
    }
    let v = DVector::from_iterator(d, points.iter().flat_map(|p| p.iter().copied()));
    if v.iter().any(|x| !x.is_finite()) {
        return Err(GeoError::Parse(format!("{what} has non-finite entries")));
    }
    Ok(v)
}

#[derive(Deserialize)]
struct TangentFile {
    tangent: Vec<Point2>,
}

#[derive(Deserialize)]
struct VectorsFile {
    vectors: Vec<Vec<Point2>>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| GeoError::Parse(format!("{}: {e}", path.display())))
}

fn status(converged: bool) -> Status {
    if converged {
        Status::Ok
    } else {
        Status::NoConvergence
    }
}

fn geodesic(a: &GeodesicArgs) -> Result<Status> {
    let cmd = Command::Geodesic(a.clone());
    let mut s = setup(&cmd, a, &a.common)?;
    let q = pick(&s.data, a.index, "shape")?;
    let v = match &a.tangent {
        Some(path) => {
            s.manifest.add_input("tangent", path)?;
            let t: TangentFile = read_json(path)?;
            flatten(&t.tangent, q.dim(), "tangent")?
        }
        None => DVector::zeros(q.dim()),
    };
    let (end, traj) = exp(&s.manifold, &q, &v, &s.solver)?;
    let mut out = Map::new();
    out.insert("trajectory".into(), trajectory_json(&traj, q.dim()));
    out.insert("hamiltonian".into(), json!(hamiltonian_series(&s.manifold, &traj)));
    out.insert("tangent".into(), json!(points_of(&v)));
    out.insert("shapes".into(), json!([end.landmarks()]));
    write_document(a.common.out.as_deref(), &s.manifest, Status::Ok, out)?;
    Ok(Status::Ok)
}

fn matching(a: &MatchArgs) -> Result<Status> {
    let cmd = Command::Match(a.clone());
    let mut s = setup(&cmd, a, &a.common)?;
    let target_data = load(&a.input2, &a.common)?;
    s.manifest.add_input("input2", &a.input2)?;
    let q1 = pick(&s.data, a.index, "shape")?;
    let q2 = pick(&target_data, a.index2, "target")?;
    let opt = LogOptions { max_iterations: a.max_iterations, rel_tol: a.tol };
    let r = log(&s.manifold, &q1, &q2, None, &s.solver, &opt)?;
    let (end, traj) = exp(&s.manifold, &q1, &r.v, &s.solver)?;
    let mut out = Map::new();
    out.insert("tangent".into(), json!(points_of(&r.v)));
    out.insert("tangent_norm".into(), json!(tangent_norm(&s.manifold, q1.coords(), &r.v)?));
    out.insert("loss".into(), json!(r.final_loss));
    out.insert("loss_history".into(), json!(r.loss_history));
    out.insert("iterations".into(), json!(r.iterations));
    out.insert("converged".into(), json!(r.converged));
    out.insert("trajectory".into(), trajectory_json(&traj, q1.dim()));
    out.insert("hamiltonian".into(), json!(hamiltonian_series(&s.manifold, &traj)));
    out.insert("shapes".into(), json!([end.landmarks()]));
    let st = status(r.converged);
    write_document(a.common.out.as_deref(), &s.manifest, st, out)?;
    Ok(st)
}

/// Unit translations of every landmark along x and along y.
pub fn translation_vectors(d: usize) -> Vec<DVector<f64>> {
    (0..2).map(|c| DVector::from_fn(d, |i, _| if i % 2 == c { 1.0 } else { 0.0 })).collect()
}

fn transport(a: &TransportArgs) -> Result<Status> {
    let cmd = Command::Transport(a.clone());
    let mut s = setup(&cmd, a, &a.common)?;
    let q = pick(&s.data, a.index, "shape")?;
    let d = q.dim();
    let mut st = Status::Ok;
    let mut out = Map::new();
    let v = match (&a.tangent, &a.input2) {
        (Some(path), _) => {
            s.manifest.add_input("tangent", path)?;
            let t: TangentFile = read_json(path)?;
            flatten(&t.tangent, d, "tangent")?
        }
        (None, Some(path)) => {
            let target_data = load(path, &a.common)?;
            s.manifest.add_input("input2", path)?;
            let q2 = pick(&target_data, a.index2, "target")?;
            let opt = LogOptions { rel_tol: a.tol, ..Default::default() };
            let r = log(&s.manifold, &q, &q2, None, &s.solver, &opt)?;
            out.insert("match_loss".into(), json!(r.final_loss));
            out.insert("match_converged".into(), json!(r.converged));
            st = status(r.converged);
            r.v
        }
        (None, None) => return Err(GeoError::InvalidConfig("transport needs --tangent or --input2".into())),
    };
    let vectors = match &a.vectors {
        Some(path) => {
            s.manifest.add_input("vectors", path)?;
            let f: VectorsFile = read_json(path)?;
            f.vectors.iter().map(|w| flatten(w, d, "transported vector")).collect::<Result<Vec<_>>>()?
        }
        None => translation_vectors(d),
    };
    let (traj, transported) = transport_along_geodesic(&s.manifold, q.coords(), &v, &vectors, &s.solver)?;
    let mut norms = Vec::new();
    for w_path in &transported {
        let mut row = Vec::new();
        for (w, x) in w_path.iter().zip(&traj.states) {
            row.push(tangent_norm(&s.manifold, &x.as_slice()[..d], w)?);
        }
        norms.push(row);
    }
    out.insert("tangent".into(), json!(points_of(&v)));
    out.insert("geodesic".into(), trajectory_json(&traj, d));
    out.insert(
        "transported".into(),
        json!(transported.iter().map(|p| p.iter().map(points_of).collect::<Vec<_>>()).collect::<Vec<_>>()),
    );
    out.insert("norms".into(), json!(norms));
    write_document(a.common.out.as_deref(), &s.manifest, st, out)?;
    Ok(st)
}

fn christoffel_cmd(a: &ChristoffelArgs) -> Result<Status> {
    let cmd = Command::Christoffel(a.clone());
    let s = setup(&cmd, a, &a.common)?;
    let q = pick(&s.data, a.index, "shape")?;
    let gamma = christoffel(&s.manifold, q.coords())?;
    let mut out = Map::new();
    out.insert("shape".into(), json!(q.landmarks()));
    out.insert("dim".into(), json!(q.dim()));
    out.insert("christoffel".into(), json!(gamma.0.to_nested()));
    write_document(a.common.out.as_deref(), &s.manifest, Status::Ok, out)?;
    Ok(Status::Ok)
}

fn frechet(a: &FrechetMeanArgs) -> Result<Status> {
    let cmd = Command::FrechetMean(a.clone());
    let s = setup(&cmd, a, &a.common)?;
    let init = match a.init_index {
        Some(i) => pick(&s.data, i, "initial sample")?,
        None => euclidean_mean(&s.data.shapes)?,
    };
    let opt = FrechetOptions { max_iterations: a.max_iterations, rel_grad_tol: a.tol, ..Default::default() };
    let r = frechet_mean(&s.manifold, &s.data.shapes, &init, &s.solver, &opt)?;
    let mut out = Map::new();
    out.insert("init".into(), json!(init.landmarks()));
    out.insert("mean".into(), json!(r.mean.landmarks()));
    out.insert("objective".into(), json!(r.objective));
    out.insert("objective_history".into(), json!(r.objective_history));
    out.insert("grad_norm_history".into(), json!(r.grad_norm_history));
    out.insert("iterations".into(), json!(r.iterations));
    out.insert("converged".into(), json!(r.converged));
    out.insert("tangents".into(), json!(r.tangents.iter().map(points_of).collect::<Vec<_>>()));
    out.insert("shapes".into(), json!([r.mean.landmarks()]));
    let st = status(r.converged);
    write_document(a.common.out.as_deref(), &s.manifest, st, out)?;
    Ok(st)
}

fn brownian(a: &BrownianArgs) -> Result<Status> {
    let cmd = Command::Brownian(a.clone());
    let s = setup(&cmd, a, &a.common)?;
    let q = pick(&s.data, a.index, "shape")?;
    let d = q.dim();
    let mut paths = Vec::new();
    let mut ends = Vec::new();
    for i in 0..a.samples {
        let w = sample_wiener(d, &s.solver, a.seed.wrapping_add(i as u64))?;
        let traj = brownian_coords(&s.manifold, &q, &w)?;
        ends.push(points(traj.last().as_slice()));
        if !a.endpoints_only {
            paths.push(trajectory_json(&traj, d));
        }
    }
    let mut out = Map::new();
    if !a.endpoints_only {
        out.insert("paths".into(), Value::Array(paths));
    }
    out.insert("shapes".into(), json!(ends));
    write_document(a.common.out.as_deref(), &s.manifest, Status::Ok, out)?;
    Ok(Status::Ok)
}

fn develop(a: &DevelopArgs) -> Result<Status> {
    let cmd = Command::Develop(a.clone());
    let mut s = setup(&cmd, a, &a.common)?;
    let q = pick(&s.data, a.index, "shape")?;
    let d = q.dim();
    let k = a.rank.unwrap_or(d);
    s.manifest.resolve("rank", k);
    let u0 = FramePoint::cholesky_frame(&s.manifold, q, k)?;
    let mut paths = Vec::new();
    let mut ends = Vec::new();
    let mut frames = Vec::new();
    for i in 0..a.samples {
        let w = sample_wiener(k, &s.solver, a.seed.wrapping_add(i as u64))?;
        let (fm, base) = stochastic_development(&s.manifold, &u0, &w)?;
        let end = FramePoint::from_state(fm.last().as_slice(), d)?;
        ends.push(end.q.landmarks());
        frames.push(matrix_rows(&end.nu));
        if !a.endpoints_only {
            paths.push(trajectory_json(&base, d));
        }
    }
    let mut out = Map::new();
    out.insert("frame".into(), json!(matrix_rows(&u0.nu)));
    if !a.endpoints_only {
        out.insert("paths".into(), Value::Array(paths));
    }
    out.insert("end_frames".into(), json!(frames));
    out.insert("shapes".into(), json!(ends));
    write_document(a.common.out.as_deref(), &s.manifest, Status::Ok, out)?;
    Ok(Status::Ok)
}

fn frechet_fm(a: &FrechetFmArgs) -> Result<Status> {
    let cmd = Command::FrechetFm(a.clone());
    let mut s = setup(&cmd, a, &a.common)?;
    let mean = euclidean_mean(&s.data.shapes)?;
    let k = a.rank.unwrap_or(mean.dim());
    s.manifest.resolve("rank", k);
    let u0 = FramePoint::cholesky_frame(&s.manifold, mean, k)?;
    let opt = FrechetFmOptions {
        minimize: MinimizeOptions { max_iterations: a.max_iterations, rel_grad_tol: a.tol, ..Default::default() },
        ..Default::default()
    };
    let r = frechet_mean_fm(&s.manifold, &s.data.shapes, &u0, a.lambda, &s.solver, &opt)?;
    let terms = fm_objective_terms(&s.manifold, &s.data.shapes, &r.u, &r.momenta, a.lambda, &s.solver)?;
    let cov = &r.u.nu * r.u.nu.transpose();
    let mut out = Map::new();
    out.insert("mean".into(), json!(r.u.q.landmarks()));
    out.insert("frame".into(), json!(matrix_rows(&r.u.nu)));
    out.insert("covariance".into(), json!(matrix_rows(&cov)));
    out.insert("momenta".into(), json!(r.momenta.iter().map(|p| p.as_slice().to_vec()).collect::<Vec<_>>()));
    out.insert("objective".into(), json!(r.objective));
    out.insert(
        "terms".into(),
        json!({ "norm": terms.norm, "data": terms.data, "log_det": terms.log_det }),
    );
    out.insert("objective_history".into(), json!(r.objective_history));
    out.insert("iterations".into(), json!(r.iterations));
    out.insert("converged".into(), json!(r.converged));
    out.insert("lambda".into(), json!(r.lambda));
    out.insert("shapes".into(), json!([r.u.q.landmarks()]));
    let st = status(r.converged);
    write_document(a.common.out.as_deref(), &s.manifest, st, out)?;
    Ok(st)
}

/// `n` landmarks evenly spaced in angle on an axis-aligned ellipse.
pub fn ellipse(n: usize, a: f64, b: f64) -> Result<LandmarkPoint> {
    if n == 0 {
        return Err(GeoError::InvalidConfig("ellipse needs at least one landmark".into()));
    }
    let coords = (0..n)
        .flat_map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            [a * t.cos(), b * t.sin()]
        })
        .collect();
    LandmarkPoint::new(coords)
}

/// Samples `exp(center, v)` with `v` uniformly distributed in direction
/// (Gaussian coordinates) and metric norm uniform in `[0, radius]`.
pub fn geodesic_samples(
    m: &LandmarkManifold,
    center: &LandmarkPoint,
    count: usize,
    radius: f64,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<Vec<LandmarkPoint>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let d = center.dim();
    (0..count)
        .map(|_| {
            let v = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let r: f64 = rand::Rng::random_range(&mut rng, 0.0..=radius);
            let norm = tangent_norm(m, center.coords(), &v)?;
            Ok(exp(m, center, &(v * (r / norm)), cfg)?.0)
        })
        .collect()
}

fn synth(a: &SynthArgs) -> Result<Status> {
    let cmd = Command::Synth(a.clone());
    let mut manifest = RunManifest::new(cmd.name(), a);
    let base = ellipse(a.landmarks, a.a, a.b)?;
    let mut extra = Map::new();
    let shapes = match a.kind {
        SynthKind::Ellipses => vec![base, ellipse(a.landmarks, a.a2, a.b2)?],
        SynthKind::Geodesic => {
            let sigma = match a.sigma {
                Some(s) => s,
                None => base.mean_consecutive_distance().unwrap_or(1.0),
            };
            manifest.resolve("sigma", sigma);
            let m = LandmarkManifold::new(KernelConfig::new(sigma)?);
            let cfg = SolverConfig::default().with_steps(a.steps);
            cfg.validate()?;
            extra.insert("center".into(), json!(base.landmarks()));
            geodesic_samples(&m, &base, a.samples, a.radius, a.seed, &cfg)?
        }
        SynthKind::Gaussian => {
            if !(a.noise >= 0.0 && a.noise.is_finite()) {
                return Err(GeoError::InvalidConfig(format!("noise must be non-negative, got {}", a.noise)));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
            extra.insert("center".into(), json!(base.landmarks()));
            (0..a.samples)
                .map(|_| {
                    let z = DVector::from_fn(base.dim(), |_, _| StandardNormal.sample(&mut rng));
                    LandmarkPoint::from_vector(base.vector() + z * a.noise)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    let data = ShapeDataset::new(shapes, Some(format!("synth-{}", serde_json::to_value(a.kind).unwrap().as_str().unwrap())))?;
    match a.format {
        FormatArg::Csv => {
            let text = data.to_csv_string();
            match &a.out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        FormatArg::Json => {
            let mut out = match data.to_json_value() {
                Value::Object(o) => o,
                _ => unreachable!("dataset serializes to an object"),
            };
            out.extend(extra);
            write_document(a.out.as_deref(), &manifest, Status::Ok, out)?;
        }
    }
    Ok(Status::Ok)
}
