use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use koopman_boxqp::boxqp::{
    solve_with, Backend, BoxQpProblem, HessianForm, KoopmanHessian, SolveReport, SolverOptions,
    DEFAULT_EPSILON,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{CertificateExhausted, SchemaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Shape {
    pub horizon: usize,
    pub n_u: usize,
    pub n_x: usize,
}

impl Shape {
    pub fn n(&self) -> usize {
        self.horizon * (self.n_u + self.n_x)
    }
}

pub fn parse_shapes(text: &str) -> Result<Vec<Shape>, SchemaError> {
    text.split(',')
        .map(|s| {
            let parts: Vec<&str> = s.trim().split(':').collect();
            let nums: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
            match nums.as_deref() {
                Some(&[horizon, n_u, n_x]) if horizon > 0 && n_u > 0 && n_x > 0 => {
                    Ok(Shape { horizon, n_u, n_x })
                }
                _ => Err(SchemaError(format!("shape {s:?} is not N:n_u:n_x with positive integers"))),
            }
        })
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Irwin–Hall approximation; plenty for instance generation
    (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
}

/// Koopman-structured instance with decaying block-lower-triangular `F`,
/// KdV-like weights and a random linear term.
pub fn random_instance(rng: &mut ChaCha8Rng, shape: Shape, rho: f64) -> BoxQpProblem {
    let Shape { horizon, n_u, n_x } = shape;
    let mut f = DMatrix::zeros(horizon * n_x, horizon * n_u);
    for i in 0..horizon {
        for j in 0..=i {
            let decay = 0.3 / (1.0 + (i - j) as f64);
            for r in 0..n_x {
                for c in 0..n_u {
                    f[(i * n_x + r, j * n_u + c)] = decay * gaussian(rng);
                }
            }
        }
    }
    let hessian = HessianForm::KoopmanStructured(KoopmanHessian {
        f,
        input_block: DMatrix::identity(horizon * n_u, horizon * n_u) * 0.05,
        state_diag: DVector::from_element(horizon * n_x, 1.0),
        rho,
    });
    let scale = rng.gen_range(0.5..3.0) * rho.sqrt();
    let h = DVector::from_fn(shape.n(), |_, _| scale * gaussian(rng));
    BoxQpProblem::new(hessian, h).expect("generated instance is positive definite")
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub shape: Shape,
    pub n: usize,
    pub instances: usize,
    pub certified_bound: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    pub mean_contraction: f64,
    pub structured_time: f64,
    pub dense_time: f64,
}

impl BenchRow {
    pub fn time_ratio(&self) -> f64 {
        self.structured_time / self.dense_time
    }
}

pub fn bench_shape(shape: Shape, instances: usize, seed: u64, epsilon: f64, rho: f64) -> anyhow::Result<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // one stream per shape keeps rows independent of the shape list order
    rng.set_stream(((shape.horizon as u64) << 40) ^ ((shape.n_u as u64) << 20) ^ shape.n_x as u64);
    let mut structured: Vec<SolveReport> = Vec::with_capacity(instances);
    let mut dense_time = 0.0;
    for _ in 0..instances {
        let p = random_instance(&mut rng, shape, rho);
        let run = |backend| solve_with(&p, SolverOptions { epsilon, backend, refine: false });
        let s = run(Backend::Structured)?;
        let d = run(Backend::Dense)?;
        if s.iterations != d.iterations {
            log::warn!(
                "backends disagree on iteration count ({} vs {}) for shape {shape:?}",
                s.iterations,
                d.iterations
            );
        }
        dense_time += d.wall_time;
        structured.push(s);
    }
    let k = instances as f64;
    let ratios: Vec<f64> = structured
        .iter()
        .flat_map(|r| r.per_iteration_contraction.iter().copied())
        .collect();
    Ok(BenchRow {
        shape,
        n: shape.n(),
        instances,
        certified_bound: structured.first().map_or(0, |r| r.certified_bound),
        max_iterations: structured.iter().map(|r| r.iterations).max().unwrap_or(0),
        mean_iterations: structured.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
        mean_contraction: ratios.iter().sum::<f64>() / ratios.len().max(1) as f64,
        structured_time: structured.iter().map(|r| r.wall_time).sum::<f64>() / k,
        dense_time: dense_time / k,
    })
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "n,horizon,n_u,n_x,instances,certified_bound,max_iterations,mean_iterations,mean_contraction,structured_time,dense_time,time_ratio\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
            r.n,
            r.shape.horizon,
            r.shape.n_u,
            r.shape.n_x,
            r.instances,
            r.certified_bound,
            r.max_iterations,
            r.mean_iterations,
            r.mean_contraction,
            r.structured_time,
            r.dense_time,
            r.time_ratio()
        );
    }
    out
}

pub fn run(
    out: &Path,
    shapes: &str,
    instances: usize,
    seed: u64,
    epsilon: Option<f64>,
    rho: Option<f64>,
) -> anyhow::Result<()> {
    let shapes = parse_shapes(shapes)?;
    if instances == 0 {
        return Err(SchemaError("instances must be positive".into()).into());
    }
    let epsilon = epsilon.unwrap_or(DEFAULT_EPSILON);
    let rho = rho.unwrap_or(100.0);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = RunManifest::new(
        "bench",
        &json!({"shapes": shapes, "instances": instances, "epsilon": epsilon, "rho": rho}),
    )?;
    manifest.seeds.insert("bench".into(), seed);

    let mut rows = Vec::with_capacity(shapes.len());
    for &shape in &shapes {
        let row = bench_shape(shape, instances, seed, epsilon, rho)?;
        println!(
            "n = {:5}: bound {:5}, iterations max {:3} mean {:6.1}, structured/dense time {:.3}",
            row.n,
            row.certified_bound,
            row.max_iterations,
            row.mean_iterations,
            row.time_ratio()
        );
        manifest
            .timings
            .insert(format!("n{}_structured_mean", row.n), row.structured_time);
        manifest.timings.insert(format!("n{}_dense_mean", row.n), row.dense_time);
        rows.push(row);
    }
    let csv_path = out.join("bench.csv");
    std::fs::write(&csv_path, to_csv(&rows))?;
    manifest.output(&csv_path)?;
    manifest.results = json!(rows
        .iter()
        .map(|r| json!({"n": r.n, "certified_bound": r.certified_bound, "max_iterations": r.max_iterations}))
        .collect::<Vec<_>>());
    manifest.write(out)?;
    if let Some(r) = rows.iter().find(|r| r.max_iterations > r.certified_bound) {
        return Err(CertificateExhausted(format!("n = {} exceeded its bound", r.n)).into());
    }
    Ok(())
}
