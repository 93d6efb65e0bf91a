use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use koopman_boxqp::boxqp::format::{row_major, ProblemFile};
use koopman_boxqp::boxqp::{solve_with, Backend, SolverOptions};
use koopman_boxqp::condensing::{build_boxqp, build_prediction_stack, NmpcSpec};
use koopman_boxqp::kdv::{closed_loop, generate_dataset, KdvError};
use koopman_boxqp::koopman::{fit_with_holdout, sample_rbf_centers, KoopmanModel, LiftSpec, ModelFile, SnapshotSet};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::manifest::{write_json, RunManifest};
use crate::{CertificateExhausted, Common, SchemaError};

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| SchemaError(format!("{}: {e}", path.display())).into())
}

fn load_model(path: &Path) -> anyhow::Result<KoopmanModel> {
    let file: ModelFile = read_json(path)?;
    file.into_model()
        .map_err(|e| SchemaError(format!("{}: {e}", path.display())).into())
}

fn apply_overrides(cfg: &mut ExperimentConfig, rho: Option<f64>, horizon: Option<usize>, epsilon: Option<f64>) {
    if let Some(r) = rho {
        cfg.mpc.rho = r;
    }
    if let Some(n) = horizon {
        cfg.mpc.horizon = n;
    }
    if let Some(e) = epsilon {
        cfg.solver.epsilon = e;
    }
}

fn check_model_matches(model: &KoopmanModel, spec: &NmpcSpec) -> anyhow::Result<()> {
    if model.n_x() != spec.n_x || model.n_u() != spec.n_u {
        return Err(SchemaError(format!(
            "model has n_x = {}, n_u = {} but the config describes n_x = {}, n_u = {}",
            model.n_x(),
            model.n_u(),
            spec.n_x,
            spec.n_u
        ))
        .into());
    }
    Ok(())
}

pub fn gen_data(common: &Common, seed: Option<u64>, trajectories: Option<usize>) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    if let Some(s) = seed {
        cfg.data.seed = s;
    }
    if let Some(n) = trajectories {
        cfg.data.n_traj = n;
    }
    prepare_out(&common.out)?;
    let mut manifest = RunManifest::new("gen-data", &cfg)?;
    manifest.seeds.insert("data".into(), cfg.data.seed);
    if let Some(c) = &common.config {
        manifest.input(c)?;
    }

    let t = Instant::now();
    let (data, stats) = generate_dataset(&cfg.kdv(), cfg.data.n_traj, cfg.data.traj_len, cfg.data.seed)?;
    manifest.timings.insert("generate".into(), t.elapsed().as_secs_f64());

    let csv_path = common.out.join("snapshots.csv");
    data.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    manifest.output(&csv_path)?;
    manifest.results = serde_json::to_value(stats)?;
    manifest.write(&common.out)?;
    println!(
        "{} rows from {} trajectories ({} discarded) -> {}",
        stats.rows,
        stats.trajectories,
        stats.discarded,
        csv_path.display()
    );
    Ok(())
}

pub fn fit(common: &Common, data_path: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    if let Some(s) = seed {
        cfg.lift.center_seed = s;
    }
    prepare_out(&common.out)?;
    let mut manifest = RunManifest::new("fit", &cfg)?;
    manifest.seeds.insert("centers".into(), cfg.lift.center_seed);
    manifest.input(data_path)?;

    let data = SnapshotSet::read_csv(File::open(data_path).with_context(|| format!("opening {}", data_path.display()))?)?;
    let [lo, hi] = cfg.lift.center_bounds;
    let centers = sample_rbf_centers(cfg.lift.n_rbf, &vec![(lo, hi); data.n_x()], cfg.lift.center_seed);
    let lift = LiftSpec::new(data.n_x(), centers);
    let t = Instant::now();
    let (mut model, report) = fit_with_holdout(&data, &lift, cfg.lift.ridge, cfg.lift.holdout)?;
    model.seed = Some(cfg.lift.center_seed);
    manifest.timings.insert("fit".into(), t.elapsed().as_secs_f64());

    let model_path = common.out.join("model.json");
    write_json(&model_path, &model.to_file())?;
    let report_path = common.out.join("fit_report.json");
    write_json(&report_path, &report)?;
    manifest.output(&model_path)?;
    manifest.output(&report_path)?;
    manifest.results = json!({
        "n_psi": model.n_psi(),
        "a_shape": [model.a.nrows(), model.a.ncols()],
        "b_shape": [model.b.nrows(), model.b.ncols()],
        "report": report,
    });
    manifest.write(&common.out)?;
    println!(
        "n_psi = {}, train rms {:.3e}, holdout rms {:.3e} (persistence {:.3e}) -> {}",
        model.n_psi(),
        report.train_rms,
        report.holdout_rms,
        report.holdout_persistence_rms,
        model_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    rows: usize,
    n_psi: usize,
    #[serde(rename = "E")]
    e: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<f64>,
    f_cols: usize,
    psi0: Vec<f64>,
    spec: &'a NmpcSpec,
}

pub fn condense(
    common: &Common,
    model_path: &Path,
    state: Option<&Path>,
    time: f64,
    rho: Option<f64>,
    horizon: Option<usize>,
    epsilon: Option<f64>,
) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    apply_overrides(&mut cfg, rho, horizon, epsilon);
    prepare_out(&common.out)?;
    let mut manifest = RunManifest::new("condense", &cfg)?;
    manifest.input(model_path)?;
    let model = load_model(model_path)?;
    let mut spec = cfg.nmpc_spec();
    check_model_matches(&model, &spec)?;
    spec.x_r = cfg.reference().at(time, spec.n_x);

    let x0 = match state {
        Some(p) => {
            manifest.input(p)?;
            let v: Vec<f64> = read_json(p)?;
            if v.len() != spec.n_x {
                bail!(SchemaError(format!("state has {} entries, expected {}", v.len(), spec.n_x)));
            }
            DVector::from_vec(v)
        }
        None => DVector::zeros(spec.n_x),
    };
    let psi0 = model.lift.lift(&x0);
    let t = Instant::now();
    let stack = build_prediction_stack(&model, spec.horizon);
    let (qp, _) = build_boxqp(&spec, &stack, &psi0)?;
    let problem = qp.problem(&psi0)?;
    manifest.timings.insert("condense".into(), t.elapsed().as_secs_f64());

    let problem_path = common.out.join("problem.json");
    write_json(&problem_path, &ProblemFile::from_problem(&problem, cfg.solver.epsilon))?;
    let sidecar_path = common.out.join("condensed.json");
    write_json(
        &sidecar_path,
        &Sidecar {
            rows: stack.e.nrows(),
            n_psi: stack.e.ncols(),
            e: row_major(&stack.e),
            f: row_major(&stack.f),
            f_cols: stack.f.ncols(),
            psi0: psi0.iter().copied().collect(),
            spec: &spec,
        },
    )?;
    manifest.output(&problem_path)?;
    manifest.output(&sidecar_path)?;
    manifest.results = json!({"n": problem.n(), "box_constraints": 2 * problem.n()});
    manifest.write(&common.out)?;
    println!(
        "BoxQP with {} variables and {} box constraints -> {}",
        problem.n(),
        2 * problem.n(),
        problem_path.display()
    );
    Ok(())
}

fn parse_backend(name: &str) -> Backend {
    match name {
        "dense" => Backend::Dense,
        "structured" => Backend::Structured,
        _ => Backend::Auto,
    }
}

pub fn solve(problem_path: &Path, out: &Path, epsilon: Option<f64>, backend: &str) -> anyhow::Result<()> {
    let file: ProblemFile = read_json(problem_path)?;
    let (problem, file_eps) = file.into_problem()?;
    let options = SolverOptions {
        epsilon: epsilon.unwrap_or(file_eps),
        backend: parse_backend(backend),
        refine: false,
    };
    prepare_out(out)?;
    let mut manifest = RunManifest::new(
        "solve",
        &json!({"epsilon": options.epsilon, "backend": options.backend}),
    )?;
    manifest.input(problem_path)?;
    let report = solve_with(&problem, options)?;
    manifest.timings.insert("solve".into(), report.wall_time);

    let report_path = out.join("report.json");
    write_json(&report_path, &report)?;
    manifest.output(&report_path)?;
    manifest.results = json!({
        "iterations": report.iterations,
        "certified_bound": report.certified_bound,
        "converged": report.converged,
        "final_gap": report.final_gap,
    });
    manifest.write(out)?;
    println!(
        "n = {}: {} iterations (certified bound {}), gap {:.2e} -> {}",
        problem.n(),
        report.iterations,
        report.certified_bound,
        report.final_gap,
        report_path.display()
    );
    if !report.converged {
        bail!(CertificateExhausted(format!(
            "gap {:e} after {} iterations",
            report.final_gap, report.iterations
        )));
    }
    Ok(())
}

pub fn simulate(
    common: &Common,
    model_path: &Path,
    duration: Option<f64>,
    rho: Option<f64>,
    horizon: Option<usize>,
    epsilon: Option<f64>,
) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(common.config.as_deref())?;
    apply_overrides(&mut cfg, rho, horizon, epsilon);
    if let Some(d) = duration {
        cfg.simulation.duration = d;
    }
    prepare_out(&common.out)?;
    let mut manifest = RunManifest::new("simulate", &cfg)?;
    manifest.input(model_path)?;
    if let Some(c) = &common.config {
        manifest.input(c)?;
    }
    let model = load_model(model_path)?;
    if let Some(s) = model.seed {
        manifest.seeds.insert("centers".into(), s);
    }
    let spec = cfg.nmpc_spec();
    check_model_matches(&model, &spec)?;
    let kdv = cfg.kdv();
    let reference = cfg.reference();
    let n = kdv.n_grid;

    let t = Instant::now();
    let log = closed_loop(
        &kdv,
        &model,
        &spec,
        |t| reference.at(t, n),
        &DVector::zeros(n),
        &cfg.closed_loop_options(),
    )?;
    manifest.timings.insert("closed_loop".into(), t.elapsed().as_secs_f64());
    manifest
        .timings
        .insert("solve_total".into(), log.solve_times.iter().sum());

    let out = &common.out;
    let mut csv_out = |name: &str, write: &dyn Fn(BufWriter<File>) -> Result<(), KdvError>| -> anyhow::Result<()> {
        let path = out.join(name);
        write(BufWriter::new(File::create(&path)?))?;
        manifest.output(&path)
    };
    csv_out("states.csv", &|w| log.write_states_csv(w))?;
    csv_out("inputs.csv", &|w| log.write_inputs_csv(w))?;
    csv_out("references.csv", &|w| log.write_references_csv(w))?;
    csv_out("iterations.csv", &|w| log.write_iterations_csv(w))?;
    let min_curvature = log.min_curvature.iter().copied().fold(f64::INFINITY, f64::min);
    let summary = json!({
        "steps": log.steps(),
        "n_decision": spec.n_decision(),
        "certified_bound": log.certified_bound,
        "mean_iterations": log.mean_iterations(),
        "max_iterations": log.max_iterations(),
        "all_converged": log.all_converged(),
        "max_final_gap": log.final_gaps.iter().copied().fold(0.0, f64::max),
        "max_abs_input": log.max_abs_input(),
        "state_violation": log.state_violation(),
        "mean_tracking_rms": log.mean_tracking_rms(),
        "min_curvature": if min_curvature.is_finite() { json!(min_curvature) } else { json!(null) },
    });
    let summary_path = out.join("summary.json");
    write_json(&summary_path, &summary)?;
    manifest.output(&summary_path)?;
    manifest.results = summary;
    manifest.write(out)?;
    println!(
        "{} instants, n = {}: mean {:.1} / max {} iterations (certified bound {}), max|u| {:.3}, state violation {:.3}",
        log.steps(),
        spec.n_decision(),
        log.mean_iterations(),
        log.max_iterations(),
        log.certified_bound,
        log.max_abs_input(),
        log.state_violation()
    );
    if !log.all_converged() {
        let misses = log.converged.iter().filter(|c| !**c).count();
        bail!(CertificateExhausted(format!("{misses} solves hit the certified bound without converging")));
    }
    Ok(())
}
