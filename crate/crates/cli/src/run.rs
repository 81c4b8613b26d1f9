//! Scenario dispatch. Points run concurrently on a private pool; each worker
//! writes only its own files, and the summary and manifest are assembled
//! after the join in point order.

use std::path::{Path, PathBuf};
use std::time::Instant;

use qfeedback_core::fock_master::{integrate_hierarchy, Drive, Integration, Trajectory};
use qfeedback_core::linear_response::{frequency_response, output_pulse, OutputOptions, OutputPulse};
use qfeedback_core::model::build_linear_model;
use qfeedback_core::pulses::{sample, PulseSpec, TimeGrid};
use qfeedback_core::single_excitation::{
    excite_with_pulse, integrate_amplitudes, steady_horizon, steady_state, verify_full_inversion, DqdDensity,
    PulseRun,
};
use qfeedback_core::stability::{classify_eigenvalues, marginal_eigenvalues, spc_classify, TOL_EIG, TOL_FREQ};
use qfeedback_core::{NetworkParams, C64};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{file_stem, Point, Scenario, ScenarioConfig};
use crate::output::{num, write_json, Csv, WrittenFile};

/// Vacuum runs stop once every hierarchy derivative is below this.
pub const STEADY_TOL: f64 = 1e-10;
/// Points per unit of the fastest rate when no step is configured.
const STEPS_PER_SCALE: f64 = 50.0;
/// Frequency samples for the all-pass check.
const OMEGA_POINTS: usize = 1001;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot use output directory {path}: {source}")]
    OutputDir { path: PathBuf, source: std::io::Error },
    #[error("point `{label}`: {source}")]
    Numerical { label: String, source: qfeedback_core::Error },
    #[error("writing {what}: {source}")]
    Io { what: String, source: std::io::Error },
}

#[derive(Debug, Clone, Serialize)]
pub struct PointTiming {
    pub label: String,
    pub ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub total_ms: f64,
    pub points: Vec<PointTiming>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub scenario: &'static str,
    pub config: Value,
    pub workers: usize,
    pub outputs: Vec<WrittenFile>,
    pub timings: Timings,
}

struct PointOutput {
    files: Vec<WrittenFile>,
    summary: Value,
    /// Output envelope, kept for the cross-point symmetry report.
    eta: Option<Vec<C64>>,
    decay_time: Option<f64>,
    ms: f64,
}

enum PointError {
    Numerical(qfeedback_core::Error),
    Io(String, std::io::Error),
}

impl From<qfeedback_core::Error> for PointError {
    fn from(e: qfeedback_core::Error) -> Self {
        PointError::Numerical(e)
    }
}

pub fn run(config: &ScenarioConfig, out_dir: &Path, workers: usize) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|source| RunError::OutputDir { path: out_dir.to_path_buf(), source })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<PointOutput, PointError>> =
        pool.install(|| config.points.par_iter().map(|p| run_point(config, p, out_dir)).collect());

    let mut outputs = Vec::new();
    let mut summaries = Vec::new();
    let mut timings = Vec::new();
    let mut done = Vec::new();
    for (point, result) in config.points.iter().zip(results) {
        match result {
            Ok(out) => {
                outputs.extend(out.files.iter().cloned());
                summaries.push(out.summary.clone());
                timings.push(PointTiming { label: point.label.clone(), ms: out.ms });
                done.push(out);
            }
            Err(PointError::Numerical(source)) => {
                return Err(RunError::Numerical { label: point.label.clone(), source });
            }
            Err(PointError::Io(what, source)) => return Err(RunError::Io { what, source }),
        }
    }

    let mut summary = json!({ "scenario": config.scenario.key(), "points": summaries });
    if config.scenario == Scenario::PulseResponse {
        summary["symmetry"] = Value::Array(mirror_pairs(config, &done));
        if let Some(table) = decay_table(config, &done) {
            summary["decay_times"] = table;
        }
    }
    let file = write_json(out_dir, "summary.json", &summary).map_err(|source| RunError::Io {
        what: "summary.json".into(),
        source,
    })?;
    outputs.push(file);

    let manifest = RunManifest {
        tool: "qfeedback-sim",
        version: env!("CARGO_PKG_VERSION"),
        core_version: qfeedback_core::VERSION,
        scenario: config.scenario.key(),
        config: config.raw.clone(),
        workers,
        outputs,
        timings: Timings { total_ms: start.elapsed().as_secs_f64() * 1e3, points: timings },
    };
    write_json(out_dir, "manifest.json", &manifest).map_err(|source| RunError::Io {
        what: "manifest.json".into(),
        source,
    })?;
    Ok(manifest)
}

fn run_point(config: &ScenarioConfig, point: &Point, dir: &Path) -> Result<PointOutput, PointError> {
    let start = Instant::now();
    let mut out = match config.scenario {
        Scenario::PulseResponse => pulse_response(config, point, dir),
        Scenario::Stability => stability(point),
        Scenario::Excitation => excitation(config, point, dir),
        Scenario::SteadyState => steady(point),
        Scenario::Invert => invert(config, point, dir),
    }?;
    out.ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

fn save(dir: &Path, name: String, csv: Csv) -> Result<WrittenFile, PointError> {
    crate::output::write_file(dir, &name, &csv.into_bytes()).map_err(|e| PointError::Io(name, e))
}

fn complex(z: C64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// Largest step of the form {1, 2, 5} x 10^k resolving `rate` with
/// [`STEPS_PER_SCALE`] steps.
pub fn nice_step(rate: f64) -> f64 {
    let limit = 1.0 / (STEPS_PER_SCALE * rate);
    let decade = 10f64.powf(limit.log10().floor());
    [5.0, 2.0, 1.0]
        .into_iter()
        .map(|m| m * decade)
        .find(|s| *s <= limit)
        .unwrap_or(decade)
}

fn model_rate(config: &ScenarioConfig, p: &NetworkParams) -> f64 {
    if config.closed_loop {
        p.fastest_rate()
    } else {
        p.fastest_rate().max(p.kappa)
    }
}

fn output_options(config: &ScenarioConfig) -> OutputOptions {
    let d = OutputOptions::default();
    OutputOptions {
        extension_cap: config.grid.extension_cap.unwrap_or(d.extension_cap),
        decay_threshold: config.grid.decay_threshold.unwrap_or(d.decay_threshold),
    }
}

fn envelope_csv(out: &OutputPulse, stride: usize) -> Csv {
    let mut csv = Csv::new(&["t", "xi_re", "xi_im", "eta_re", "eta_im"]);
    let grid = out.output.grid;
    for k in (0..grid.n_points).step_by(stride) {
        let (x, e) = (out.input.values[k], out.output.values[k]);
        csv.row(&[grid.t(k), x.re, x.im, e.re, e.im]);
    }
    csv
}

fn pulse_response(config: &ScenarioConfig, point: &Point, dir: &Path) -> Result<PointOutput, PointError> {
    let spec = point.pulse.as_ref().expect("validated pulse");
    let model = build_linear_model(&point.params, config.closed_loop)?;
    let rate = model_rate(config, &point.params);
    let g = config.grid;
    let grid = match (g.t_start, g.t_end) {
        (Some(a), Some(b)) => TimeGrid::covering(a, b, g.dt.unwrap_or(nice_step(rate.max(spec.fastest_rate()))))?,
        _ => match g.dt {
            Some(dt) => {
                let (a, b) = spec.support();
                TimeGrid::covering(g.t_start.unwrap_or(a), g.t_end.unwrap_or(b), dt)?
            }
            None => spec.default_grid(rate)?,
        },
    };
    let input = sample(spec, grid)?;
    let out = output_pulse(&model, &input, output_options(config))?;
    let span = 10.0 * rate;
    let omega: Vec<f64> = (0..OMEGA_POINTS)
        .map(|k| -span + 2.0 * span * k as f64 / (OMEGA_POINTS - 1) as f64)
        .collect();
    let allpass = frequency_response(&model, &omega)?.allpass_max_deviation();
    let decay = out.decay_time(0.01);
    let file = save(dir, format!("{}.csv", file_stem(&point.label)), envelope_csv(&out, g.output_stride))?;
    let max_imag = out.output.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let summary = json!({
        "label": point.label,
        "input_norm": out.input_norm(),
        "output_norm": out.output_norm(),
        "allpass_max_dev": allpass,
        "decay_time_1pct": decay,
        "max_abs_imag": max_imag,
        "file": file.file,
    });
    Ok(PointOutput {
        files: vec![file],
        summary,
        eta: Some(out.output.values),
        decay_time: Some(decay),
        ms: 0.0,
    })
}

fn stability(point: &Point) -> Result<PointOutput, PointError> {
    let p = &point.params;
    let v = spc_classify(p)?;
    let oracle = classify_eigenvalues(&v.witness, TOL_EIG);
    let mut summary = json!({
        "label": point.label,
        "kind": v.kind,
        "eigenvalues": v.witness.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
        "routh": {
            "R": v.routh.r.iter().map(|r| r.map(complex).unwrap_or(Value::Null)).collect::<Vec<_>>(),
            "degenerate": v.routh.is_degenerate(),
        },
        "eigen_oracle": oracle,
        "agree": oracle == v.kind,
    });
    if (p.delta_omega_1 - p.delta_omega_2).abs() < TOL_FREQ {
        let m = marginal_eigenvalues(p)?;
        summary["marginal_eigenvalues"] = m.iter().map(|z| complex(*z)).collect();
    }
    Ok(PointOutput { files: Vec::new(), summary, eta: None, decay_time: None, ms: 0.0 })
}

fn excitation(config: &ScenarioConfig, point: &Point, dir: &Path) -> Result<PointOutput, PointError> {
    let p = &point.params;
    let g = config.grid;
    let pulse_rate = point.pulse.as_ref().map_or(0.0, PulseSpec::fastest_rate);
    let dt = g.dt.unwrap_or_else(|| nice_step(p.fastest_rate().max(pulse_rate)));
    let t0 = g.t_start.unwrap_or(0.0);
    let t1 = g.t_end.unwrap_or_else(|| match &point.pulse {
        None => t0 + steady_horizon(p),
        Some(spec) => spec.support().1.max(t0) + 50.0 / p.kappa_tilde(),
    });
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let drive = match &point.pulse {
        None => Drive::Vacuum,
        Some(PulseSpec::Sampled(s)) => Drive::Pulse(s.clone()),
        Some(spec) => Drive::Pulse(sample(spec, TimeGrid::new(t0, dt / 2.0, 2 * steps + 1)?)?),
    };
    let mut cfg = Integration::new(t0, t0 + steps as f64 * dt, dt);
    cfg.n_cav = config.n_cav;
    cfg.drive_rate = pulse_rate;
    if point.pulse.is_none() {
        cfg.steady_tol = Some(STEADY_TOL);
    }
    let traj = integrate_hierarchy(p, &drive, point.initial, cfg)?;
    let mut csv = Csv::new(&["t", "p_e1", "p_e2", "p_cavity", "tr_rho11"]);
    for s in traj.samples.iter().step_by(g.output_stride) {
        csv.row(&[s.t, s.p_e1, s.p_e2, s.p_cavity, s.tr_rho11]);
    }
    let file = save(dir, format!("{}.csv", file_stem(&point.label)), csv)?;
    let last = traj.last();
    let summary = json!({
        "label": point.label,
        "initial_state": point.initial.label(),
        "drive": if point.pulse.is_some() { "single_photon" } else { "vacuum" },
        "final": {
            "t": last.t,
            "p_e1": last.p_e1,
            "p_e2": last.p_e2,
            "p_cavity": last.p_cavity,
            "tr_rho11": last.tr_rho11,
        },
        "max_p_e1": traj.samples.iter().map(|s| s.p_e1).fold(0.0, f64::max),
        "stopped": if traj.steady { "steady state (max |rhs| below 1e-10)" } else { "t_end reached" },
        "invariants": invariants(&traj),
        "file": file.file,
    });
    Ok(PointOutput { files: vec![file], summary, eta: None, decay_time: None, ms: 0.0 })
}

fn invariants(traj: &Trajectory) -> Value {
    let drift = traj
        .samples
        .iter()
        .map(|s| (s.tr_rho11 - 1.0).abs().max((s.tr_rho00 - 1.0).abs()))
        .fold(0.0, f64::max);
    json!({
        "max_trace_drift": drift,
        "max_hermiticity_defect": traj.samples.iter().map(|s| s.hermiticity_defect).fold(0.0, f64::max),
        "max_cross_defect": traj.samples.iter().map(|s| s.cross_defect).fold(0.0, f64::max),
    })
}

fn steady(point: &Point) -> Result<PointOutput, PointError> {
    let p = &point.params;
    let s = steady_state(p)?;
    let density = DqdDensity::from_steady(&s);
    let horizon = steady_horizon(p);
    let traj = integrate_amplitudes(p, horizon, nice_step(p.fastest_rate()))?;
    let end = traj.last();
    let deviation = [
        end.s2.norm() - s.s2_inf.norm(),
        end.s3.norm() - s.s3_inf.norm(),
        end.s4.norm(),
    ]
    .into_iter()
    .map(f64::abs)
    .fold(0.0, f64::max);
    let rows: Vec<Vec<Value>> = (0..4).map(|i| (0..4).map(|j| complex(density.rho[(i, j)])).collect()).collect();
    let summary = json!({
        "label": point.label,
        "s1_inf": complex(s.s1_inf),
        "s2_inf": complex(s.s2_inf),
        "s3_inf": complex(s.s3_inf),
        "alpha": s.alpha,
        "limit": s.limit,
        "density_basis": ["g1g2", "g1e2", "e1g2", "e1e2"],
        "density": rows,
        "purity": density.purity,
        "horizon": horizon,
        "integrated_deviation": deviation,
    });
    Ok(PointOutput { files: Vec::new(), summary, eta: None, decay_time: None, ms: 0.0 })
}

fn invert(config: &ScenarioConfig, point: &Point, dir: &Path) -> Result<PointOutput, PointError> {
    let p = &point.params;
    let g = config.grid;
    let pulse_rate = point.pulse.as_ref().map_or(p.kappa_tilde(), PulseSpec::fastest_rate);
    let mut run = PulseRun::new(
        g.dt.unwrap_or_else(|| nice_step(p.fastest_rate().max(pulse_rate))),
        g.after.unwrap_or(10.0 / p.kappa_tilde()),
    );
    run.n_cav = config.n_cav;
    let exc = match &point.pulse {
        None => verify_full_inversion(p, point.t_terminal, run)?,
        Some(spec) => excite_with_pulse(p, spec, run)?,
    };
    let terminal = exc.trajectory.samples[exc.terminal_index];
    let mut csv = Csv::new(&["t", "p_e1", "p_e2", "p_cav"]);
    for s in exc.trajectory.samples.iter().step_by(g.output_stride) {
        csv.row(&[s.t, s.p_e1, s.p_e2, s.p_cavity]);
    }
    let stem = file_stem(&point.label);
    let traj_file = save(dir, format!("{stem}.csv"), csv)?;
    let model = build_linear_model(p, true)?;
    let out = output_pulse(&model, &exc.pulse, output_options(config))?;
    let out_file = save(dir, format!("{stem}_output.csv"), envelope_csv(&out, g.output_stride))?;
    let summary = json!({
        "label": point.label,
        "t_terminal": terminal.t,
        "p_e1_at_terminal": terminal.p_e1,
        "p_e2_at_terminal": terminal.p_e2,
        "max_p_e1": exc.trajectory.samples.iter().map(|s| s.p_e1).fold(0.0, f64::max),
        "input_norm": exc.pulse.norm(),
        "output_norm": out.output_norm(),
        "invariants": invariants(&exc.trajectory),
        "files": [traj_file.file.clone(), out_file.file.clone()],
    });
    Ok(PointOutput { files: vec![traj_file, out_file], summary, eta: None, decay_time: None, ms: 0.0 })
}

/// Points whose detunings are exact negatives of each other, all else equal:
/// their outputs should be complex conjugates.
fn mirror_pairs(config: &ScenarioConfig, done: &[PointOutput]) -> Vec<Value> {
    let mut out = Vec::new();
    let pts = &config.points;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (a, b) = (&pts[i], &pts[j]);
            let mirrored = a.params.with_detunings(
                -a.params.delta_omega_1,
                -a.params.delta_omega_2,
                -a.params.delta_omega_r,
            );
            if a.params.is_mutual_resonance() || mirrored != b.params || a.pulse != b.pulse {
                continue;
            }
            let (Some(x), Some(y)) = (&done[i].eta, &done[j].eta) else { continue };
            let re = x.iter().zip(y).map(|(u, v)| (u.re - v.re).abs()).fold(0.0, f64::max);
            let im = x.iter().zip(y).map(|(u, v)| (u.im + v.im).abs()).fold(0.0, f64::max);
            out.push(json!({
                "pair": [a.label, b.label],
                "re_max_dev": re,
                "im_antisymmetry_max_dev": im,
                "lengths_match": x.len() == y.len(),
            }));
        }
    }
    out
}

/// 1% decay times against the swept value, with a monotonicity flag per
/// group of points sharing everything but the sweep value.
fn decay_table(config: &ScenarioConfig, done: &[PointOutput]) -> Option<Value> {
    let sweep = config.sweep.as_ref()?;
    let n = sweep.values.len();
    let mut groups = Vec::new();
    for (chunk_pts, chunk_out) in config.points.chunks(n).zip(done.chunks(n)) {
        let mut rows: Vec<(f64, &str, f64)> = chunk_pts
            .iter()
            .zip(chunk_out)
            .filter_map(|(p, o)| Some((p.sweep_value?, p.label.as_str(), o.decay_time?)))
            .collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let monotone = rows.windows(2).all(|w| w[1].2 > w[0].2);
        groups.push(json!({
            "rows": rows.iter().map(|(v, l, d)| json!({"label": l, "value": num(*v), "decay_time": d})).collect::<Vec<_>>(),
            "monotone_increasing": monotone,
        }));
    }
    Some(json!({ "key": sweep.key, "groups": groups }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(1e-3), 20.0);
        assert_eq!(nice_step(5e-3), 2.0);
        assert_eq!(nice_step(6e-3), 2.0);
        assert_eq!(nice_step(4.125e-3), 2.0);
        assert_eq!(nice_step(1.5e-3), 10.0);
        for r in [3.3e-4, 7.7e-3, 1.0, 42.0] {
            assert!(nice_step(r) * r <= 1.0 / STEPS_PER_SCALE);
        }
    }
}
