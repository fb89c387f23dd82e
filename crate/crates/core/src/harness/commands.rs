use std::fs;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::iterations::{run_inversion, InversionConfig, InversionOutcome, Problem, Scheme, StopReason};
use crate::saddle::DataSpaceHessian;
use crate::wavecore::io::{read_traces, write_model, write_traces};
use crate::wavecore::{forward_solve, sample, ModelGrid, SourceField, TraceData};

use super::config::ExperimentConfig;
use super::log::write_log;
use super::wavelet::{add_noise, ricker};

pub fn source_fields(cfg: &ExperimentConfig) -> Result<Vec<SourceField<f64>>> {
    let w = ricker(cfg.grid.nt, cfg.grid.dt, cfg.wavelet_hz, cfg.wavelet_amplitude);
    cfg.sources
        .iter()
        .map(|&s| SourceField::point_source(cfg.grid, s, &w))
        .collect()
}

fn model(cfg: &ExperimentConfig, which: &str) -> Result<Option<ModelGrid<f64>>> {
    let d = match which {
        "true_model" => &cfg.true_model,
        _ => &cfg.initial_model,
    };
    d.as_ref().map(|d| d.build(cfg.grid)).transpose()
}

/// Synthesizes traces in the true model, adds the configured noise, and
/// writes one trace file per source. Returns the written paths.
pub fn forward(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let m = model(cfg, "true_model")?
        .ok_or_else(|| Error::Config("`true_model` is required for forward modelling".into()))?;
    let g = cfg.geometry()?;
    let mut data = source_fields(cfg)?
        .iter()
        .map(|b| sample(&forward_solve(&m, b)?, &g))
        .collect::<Result<Vec<TraceData<f64>>>>()?;
    add_noise(&mut data, cfg.noise, cfg.seed.unwrap_or(0));
    fs::create_dir_all(&cfg.data_dir).map_err(|source| Error::Io {
        path: cfg.data_dir.clone(),
        source,
    })?;
    let mut paths = Vec::new();
    for (i, d) in data.iter().enumerate() {
        let path = cfg.trace_path(i);
        write_traces(&path, &cfg.grid, d)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn read_data(cfg: &ExperimentConfig) -> Result<Vec<TraceData<f64>>> {
    (0..cfg.sources.len())
        .map(|i| {
            let path = cfg.trace_path(i);
            let (spec, d) = read_traces::<f64>(&path)?;
            if !spec.same_shape(&cfg.grid) || d.n_receivers() != cfg.receivers.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} does not match the configured grid and receivers",
                    path.display()
                )));
            }
            Ok(d)
        })
        .collect()
}

/// Builds the inverse problem from the configuration and the trace files.
pub fn load_problem(cfg: &ExperimentConfig) -> Result<(Problem<f64>, ModelGrid<f64>)> {
    let m0 = model(cfg, "initial_model")?
        .ok_or_else(|| Error::Config("`initial_model` is required for inversion".into()))?;
    let mut p = Problem::new(cfg.geometry()?, source_fields(cfg)?, read_data(cfg)?)?
        .with_combination(cfg.combination);
    if let Some(mt) = model(cfg, "true_model")? {
        p = p.with_true_model(mt);
    }
    Ok((p, m0))
}

/// Largest diagonal entry of the data-space Hessian at `m0`.
pub fn hessian_scale(m0: &ModelGrid<f64>, p: &Problem<f64>) -> Result<f64> {
    let h = DataSpaceHessian::assemble(m0, &p.geometry)?;
    Ok((0..h.size()).map(|i| h.matrix()[(i, i)]).fold(0.0, f64::max))
}

#[derive(Debug)]
pub struct InvertReport {
    pub outcome: InversionOutcome<f64>,
    pub mu: f64,
    pub damping: Option<f64>,
}

impl InvertReport {
    pub fn diverged(&self) -> bool {
        matches!(self.outcome.stop, StopReason::Diverged(_))
    }
}

pub fn inversion_config(cfg: &ExperimentConfig, scheme: Scheme, scale: f64) -> InversionConfig<f64> {
    let mut ic = InversionConfig::new(scheme, cfg.mu.resolve(scale));
    ic.alpha = cfg.alpha;
    ic.damping = cfg.damping.map(|d| d.resolve(scale));
    ic.cg_tol = cfg.cg_tol;
    ic.cg_maxiter = cfg.cg_maxiter;
    ic.max_iter = cfg.max_iter;
    ic.misfit_tol = cfg.misfit_tol;
    ic.constraint_tol = cfg.constraint_tol;
    ic.gamma = cfg.gamma;
    ic.born_cg = cfg.born_cg;
    ic.estimate = cfg.estimate;
    ic
}

/// Runs `scheme` and writes the final model and the convergence log. A
/// diverged run still writes the last valid iterate.
pub fn invert(cfg: &ExperimentConfig, scheme: Scheme) -> Result<InvertReport> {
    let (p, m0) = load_problem(cfg)?;
    let relative = cfg.mu.is_relative() || cfg.damping.is_some_and(|d| d.is_relative());
    let scale = if relative { hessian_scale(&m0, &p)? } else { 1.0 };
    let ic = inversion_config(cfg, scheme, scale);
    let outcome = run_inversion(&ic, &p, m0)?;
    write_model(&cfg.model_out, outcome.model())?;
    let stop = match &outcome.stop {
        StopReason::MaxIter => "max-iter".to_string(),
        StopReason::Converged => "converged".to_string(),
        StopReason::Diverged(why) => format!("diverged ({why})"),
    };
    let metadata = [
        ("scheme", scheme.to_string()),
        ("mu", ic.mu.to_string()),
        ("damping", ic.damping.map_or("default".into(), |d| d.to_string())),
        ("noise", cfg.noise.to_string()),
        ("seed", cfg.seed.map_or("none".into(), |s| s.to_string())),
        ("stop", stop),
    ];
    write_log(&cfg.log, &metadata, &outcome.history)?;
    Ok(InvertReport {
        outcome,
        mu: ic.mu,
        damping: ic.damping,
    })
}
