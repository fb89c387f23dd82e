//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # 1D two-scatterer benchmark
//! nx = 81
//! dx = 8
//! true_model = uniform 2000; box 2300 176 256; box 1800 376 456
//! initial_model = uniform 2000
//! sources = 2, 78
//! receivers = 0..81:20
//! ```
//!
//! Velocities are in m/s and positions in meters; node lists take flat
//! indices, `ix:iz` pairs, or `start..end[:step]` ranges.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::iterations::MultiplierEstimate;
use crate::wavecore::io::read_model;
use crate::wavecore::{build_model, AcquisitionGeometry, GridSpec, ModelGrid, SourceCombination};

const KEYS: &[&str] = &[
    "ndim",
    "nx",
    "nz",
    "dx",
    "dz",
    "nt",
    "dt",
    "true_model",
    "initial_model",
    "sources",
    "receivers",
    "wavelet_hz",
    "wavelet_amplitude",
    "mu",
    "mu_relative",
    "alpha",
    "damping",
    "damping_relative",
    "cg_tol",
    "cg_maxiter",
    "max_iter",
    "misfit_tol",
    "constraint_tol",
    "gamma",
    "born_solver",
    "combination",
    "multiplier_estimate",
    "noise",
    "seed",
    "data_dir",
    "model_out",
    "log",
];

/// A parameter given either directly or as a multiple of the largest
/// diagonal entry of the data-space Hessian at the initial model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaled {
    Absolute(f64),
    Relative(f64),
}

impl Scaled {
    pub fn resolve(self, hessian_scale: f64) -> f64 {
        match self {
            Scaled::Absolute(x) => x,
            Scaled::Relative(r) => r * hessian_scale,
        }
    }

    pub fn is_relative(self) -> bool {
        matches!(self, Scaled::Relative(_))
    }
}

/// One term of a velocity-model description.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelTerm {
    Uniform(f64),
    /// Velocity above / below `depth` along the last axis.
    TwoLayer { top: f64, bottom: f64, depth: f64 },
    File(PathBuf),
    /// Overwrites the velocity inside `[x0, x1] × [z0, z1]`.
    Box { velocity: f64, x: (f64, f64), z: Option<(f64, f64)> },
    /// Adds `amplitude · exp(−r²/2σ²)` to the velocity.
    Gaussian { amplitude: f64, cx: f64, cz: f64, sigma: f64 },
}

/// A base term followed by anomalies, separated by `;`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDescriptor {
    pub terms: Vec<ModelTerm>,
}

fn numbers(words: &[&str], what: &str) -> std::result::Result<Vec<f64>, String> {
    words
        .iter()
        .map(|w| w.parse::<f64>().map_err(|_| format!("{what}: `{w}` is not a number")))
        .collect()
}

impl ModelDescriptor {
    pub fn parse(text: &str, base_dir: &Path) -> std::result::Result<Self, String> {
        let mut terms = Vec::new();
        for (i, part) in text.split(';').map(str::trim).enumerate() {
            let words: Vec<&str> = part.split_whitespace().collect();
            let Some((&kind, args)) = words.split_first() else {
                return Err("empty model term".into());
            };
            let term = match (kind, args.len()) {
                ("uniform", 1) => ModelTerm::Uniform(numbers(args, kind)?[0]),
                ("two-layer", 3) => {
                    let v = numbers(args, kind)?;
                    ModelTerm::TwoLayer { top: v[0], bottom: v[1], depth: v[2] }
                }
                ("file", 1) => ModelTerm::File(base_dir.join(args[0])),
                ("box", 3) | ("box", 5) => {
                    let v = numbers(args, kind)?;
                    ModelTerm::Box {
                        velocity: v[0],
                        x: (v[1], v[2]),
                        z: (v.len() == 5).then(|| (v[3], v[4])),
                    }
                }
                ("gaussian", 3) | ("gaussian", 4) => {
                    let v = numbers(args, kind)?;
                    let (cz, sigma) = if v.len() == 4 { (v[2], v[3]) } else { (0.0, v[2]) };
                    ModelTerm::Gaussian { amplitude: v[0], cx: v[1], cz, sigma }
                }
                _ => return Err(format!("cannot parse model term `{part}`")),
            };
            let is_base = matches!(
                term,
                ModelTerm::Uniform(_) | ModelTerm::TwoLayer { .. } | ModelTerm::File(_)
            );
            if is_base != (i == 0) {
                return Err(format!(
                    "`{part}`: a model is one base term (uniform, two-layer, file) followed by anomalies (box, gaussian)"
                ));
            }
            terms.push(term);
        }
        Ok(Self { terms })
    }

    /// Per-node velocities in m/s.
    pub fn velocities(&self, spec: &GridSpec<f64>) -> Result<Vec<f64>> {
        let coords = |node: usize| {
            let ix = node % spec.nx;
            let iz = node / spec.nx;
            (ix as f64 * spec.dx, iz as f64 * spec.dz)
        };
        let depth_of = |node: usize| {
            let (x, z) = coords(node);
            if spec.ndim == 1 {
                x
            } else {
                z
            }
        };
        let mut vel = vec![0.0; spec.nodes()];
        for term in &self.terms {
            match term {
                ModelTerm::Uniform(v) => vel.fill(*v),
                ModelTerm::TwoLayer { top, bottom, depth } => {
                    for (i, v) in vel.iter_mut().enumerate() {
                        *v = if depth_of(i) < *depth { *top } else { *bottom };
                    }
                }
                ModelTerm::File(path) => {
                    let m = read_model::<f64>(path)?;
                    if !m.spec().same_shape(spec) {
                        return Err(Error::ShapeMismatch(format!(
                            "model file {} does not match the configured grid",
                            path.display()
                        )));
                    }
                    vel = m.velocities();
                }
                ModelTerm::Box { velocity, x, z } => {
                    for (i, v) in vel.iter_mut().enumerate() {
                        let (px, pz) = coords(i);
                        let in_x = px >= x.0 && px <= x.1;
                        let in_z = z.is_none_or(|z| pz >= z.0 && pz <= z.1);
                        if in_x && in_z {
                            *v = *velocity;
                        }
                    }
                }
                ModelTerm::Gaussian { amplitude, cx, cz, sigma } => {
                    for (i, v) in vel.iter_mut().enumerate() {
                        let (px, pz) = coords(i);
                        let r2 = (px - cx).powi(2) + if spec.ndim == 2 { (pz - cz).powi(2) } else { 0.0 };
                        *v += amplitude * (-r2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
        }
        Ok(vel)
    }

    pub fn build(&self, spec: GridSpec<f64>) -> Result<ModelGrid<f64>> {
        build_model(spec, &self.velocities(&spec)?)
    }
}

/// Parses `3, 7:2, 10..20:5` into flat node indices.
pub fn parse_nodes(text: &str, spec: &GridSpec<f64>) -> std::result::Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for item in text.split([',', ' ', '\t']).filter(|s| !s.is_empty()) {
        let idx = |s: &str| s.parse::<usize>().map_err(|_| format!("bad node index `{s}` in `{item}`"));
        if let Some((a, rest)) = item.split_once("..") {
            let (b, step) = match rest.split_once(':') {
                Some((b, s)) => (idx(b)?, idx(s)?),
                None => (idx(rest)?, 1),
            };
            if step == 0 {
                return Err(format!("zero step in `{item}`"));
            }
            out.extend((idx(a)?..b).step_by(step));
        } else if let Some((ix, iz)) = item.split_once(':') {
            let (ix, iz) = (idx(ix)?, idx(iz)?);
            if ix >= spec.nx || iz >= spec.nz {
                return Err(format!("node `{item}` outside {}x{} grid", spec.nx, spec.nz));
            }
            out.push(spec.node(ix, iz));
        } else {
            out.push(idx(item)?);
        }
    }
    Ok(out)
}

/// Everything a `forward` or `invert` run needs. Relative paths are
/// resolved against the directory holding the configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridSpec<f64>,
    pub true_model: Option<ModelDescriptor>,
    pub initial_model: Option<ModelDescriptor>,
    pub sources: Vec<usize>,
    pub receivers: Vec<usize>,
    pub wavelet_hz: f64,
    pub wavelet_amplitude: f64,
    pub mu: Scaled,
    pub alpha: Option<f64>,
    pub damping: Option<Scaled>,
    pub cg_tol: f64,
    pub cg_maxiter: usize,
    pub max_iter: usize,
    pub misfit_tol: f64,
    pub constraint_tol: f64,
    pub gamma: f64,
    pub born_cg: bool,
    pub combination: SourceCombination,
    pub estimate: MultiplierEstimate,
    /// Noise standard deviation relative to the data RMS.
    pub noise: f64,
    pub seed: Option<u64>,
    pub data_dir: PathBuf,
    pub model_out: PathBuf,
    pub log: PathBuf,
}

struct Entries<'a> {
    path: &'a Path,
    map: BTreeMap<String, (usize, String)>,
}

impl Entries<'_> {
    fn err(&self, key: &str, message: impl std::fmt::Display) -> Error {
        let line = self.map.get(key).map_or(0, |(l, _)| *l);
        Error::Parse {
            path: self.path.to_path_buf(),
            message: format!("line {line}, `{key}`: {message}"),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|(_, v)| v.as_str())
    }

    fn get<V: FromStr>(&self, key: &str) -> Result<Option<V>>
    where
        V::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<V>().map_err(|e| self.err(key, e)))
            .transpose()
    }

    fn or<V: FromStr>(&self, key: &str, default: V) -> Result<V>
    where
        V::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn scaled(&self, abs: &str, rel: &str) -> Result<Option<Scaled>> {
        match (self.get::<f64>(abs)?, self.get::<f64>(rel)?) {
            (Some(_), Some(_)) => Err(self.err(rel, format!("give either `{abs}` or `{rel}`, not both"))),
            (Some(a), None) => Ok(Some(Scaled::Absolute(a))),
            (None, Some(r)) => Ok(Some(Scaled::Relative(r))),
            (None, None) => Ok(None),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, path, base)
    }

    pub fn parse(text: &str, path: &Path, base_dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: {message}", i + 1),
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(parse_err(format!("unknown key `{k}`")));
            }
            if map.insert(k.to_string(), (i + 1, v.to_string())).is_some() {
                return Err(parse_err(format!("duplicate key `{k}`")));
            }
        }
        let e = Entries { path, map };

        let ndim: usize = e.or("ndim", 1)?;
        let dx: f64 = e.or("dx", 8.0)?;
        let nt: usize = e.or("nt", 250)?;
        let dt: f64 = e.or("dt", 0.002)?;
        let grid = match ndim {
            1 => {
                if e.get::<usize>("nz")?.is_some_and(|nz| nz != 1) {
                    return Err(e.err("nz", "must be 1 when ndim = 1"));
                }
                GridSpec::new_1d(e.or("nx", 81)?, dx, nt, dt)
            }
            2 => GridSpec::new_2d(e.or("nx", 81)?, e.or("nz", 81)?, dx, e.or("dz", dx)?, nt, dt),
            _ => return Err(e.err("ndim", "must be 1 or 2")),
        }
        .map_err(|err| e.err("ndim", err))?;

        let model = |key: &str| -> Result<Option<ModelDescriptor>> {
            e.raw(key)
                .map(|t| ModelDescriptor::parse(t, base_dir).map_err(|m| e.err(key, m)))
                .transpose()
        };
        let nodes = |key: &str| -> Result<Vec<usize>> {
            match e.raw(key) {
                Some(t) => parse_nodes(t, &grid).map_err(|m| e.err(key, m)),
                None => Ok(Vec::new()),
            }
        };
        let sources = nodes("sources")?;
        let receivers = nodes("receivers")?;
        if sources.is_empty() {
            return Err(e.err("sources", "at least one source node is required"));
        }
        AcquisitionGeometry::new(&grid, sources.clone(), receivers.clone())
            .map_err(|err| e.err("receivers", err))?;

        let noise: f64 = e.or("noise", 0.0)?;
        let seed: Option<u64> = e.get("seed")?;
        if !(noise >= 0.0) {
            return Err(e.err("noise", "must be non-negative"));
        }
        if noise > 0.0 && seed.is_none() {
            return Err(e.err("noise", "a `seed` is required when noise > 0"));
        }

        let born_cg = match e.or::<String>("born_solver", "dense".into())?.as_str() {
            "dense" => false,
            "cg" => true,
            other => return Err(e.err("born_solver", format!("`{other}` is not dense or cg"))),
        };
        let combination = match e.or::<String>("combination", "sum-correlations".into())?.as_str() {
            "sum-correlations" => SourceCombination::SumCorrelations,
            "sum-updates" => SourceCombination::SumUpdates,
            other => {
                return Err(e.err("combination", format!("`{other}` is not sum-correlations or sum-updates")))
            }
        };
        let estimate = match e.or::<String>("multiplier_estimate", "damped-ls".into())?.as_str() {
            "damped-ls" => MultiplierEstimate::DampedLs,
            "adjoint" => MultiplierEstimate::Adjoint,
            other => {
                return Err(e.err("multiplier_estimate", format!("`{other}` is not damped-ls or adjoint")))
            }
        };
        let path_or = |key: &str, default: &str| base_dir.join(e.raw(key).unwrap_or(default));

        Ok(Self {
            grid,
            true_model: model("true_model")?,
            initial_model: model("initial_model")?,
            sources,
            receivers,
            wavelet_hz: e.or("wavelet_hz", 10.0)?,
            wavelet_amplitude: e.or("wavelet_amplitude", 1.0)?,
            mu: e.scaled("mu", "mu_relative")?.unwrap_or(Scaled::Relative(0.1)),
            alpha: e.get("alpha")?,
            damping: e.scaled("damping", "damping_relative")?,
            cg_tol: e.or("cg_tol", 1e-6)?,
            cg_maxiter: e.or("cg_maxiter", 2000)?,
            max_iter: e.or("max_iter", 50)?,
            misfit_tol: e.or("misfit_tol", 1e-10)?,
            constraint_tol: e.or("constraint_tol", 1e-10)?,
            gamma: e.or("gamma", 1.0)?,
            born_cg,
            combination,
            estimate,
            noise,
            seed,
            data_dir: path_or("data_dir", "data"),
            model_out: path_or("model_out", "model.txt"),
            log: path_or("log", "log.csv"),
        })
    }

    pub fn geometry(&self) -> Result<AcquisitionGeometry> {
        AcquisitionGeometry::new(&self.grid, self.sources.clone(), self.receivers.clone())
    }

    /// Nodes per shortest wavelength, taking `2.5 × peak` as the highest
    /// significant Ricker frequency.
    pub fn nodes_per_wavelength(&self, min_velocity: f64) -> f64 {
        let h = self.grid.dx.max(self.grid.dz);
        min_velocity / (2.5 * self.wavelet_hz) / h
    }

    pub fn trace_path(&self, source: usize) -> PathBuf {
        self.data_dir.join(format!("traces_{source:03}.txt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(text, Path::new("test.cfg"), Path::new("/base"))
    }

    #[test]
    fn defaults_and_paths() {
        let c = parse("sources = 2\nreceivers = 0..81:20 # five\n").unwrap();
        assert_eq!(c.grid.nx, 81);
        assert_eq!(c.receivers, vec![0, 20, 40, 60, 80]);
        assert_eq!(c.mu, Scaled::Relative(0.1));
        assert_eq!(c.log, PathBuf::from("/base/log.csv"));
        assert_eq!(c.trace_path(3), PathBuf::from("/base/data/traces_003.txt"));
        assert!(c.nodes_per_wavelength(2000.0) >= 10.0);
    }

    #[test]
    fn rejects_unknown_duplicate_and_conflicting_keys() {
        assert!(matches!(parse("sources = 1\nreceiver = 2"), Err(Error::Parse { .. })));
        assert!(parse("sources = 1\nsources = 2\nreceivers = 3").is_err());
        assert!(parse("sources = 1\nreceivers = 3\nmu = 1\nmu_relative = 2").is_err());
        assert!(parse("sources = 1\nreceivers = 3, 3").is_err());
        assert!(parse("sources = 1\nreceivers = 300").is_err());
        assert!(parse("sources = 1\nreceivers = 3\nnoise = 0.1").is_err());
        assert!(parse("sources = 1\nreceivers = 3\nnoise = 0.1\nseed = 4").is_ok());
        assert!(parse("sources = 1\nreceivers = 3\nscheme = al-multiplier").is_err());
    }

    #[test]
    fn two_dimensional_node_pairs() {
        let c = parse("ndim = 2\nnx = 10\nnz = 5\nsources = 2:1\nreceivers = 0:0, 9:4").unwrap();
        assert_eq!(c.sources, vec![12]);
        assert_eq!(c.receivers, vec![0, 49]);
    }

    #[test]
    fn model_terms_compose() {
        let spec = GridSpec::new_1d(11, 10.0, 10, 0.001).unwrap();
        let d = ModelDescriptor::parse("uniform 2000; gaussian 100 100 10; box 2500 20 40", Path::new(".")).unwrap();
        let v = d.velocities(&spec).unwrap();
        assert_eq!(&v[2..5], &[2500.0; 3]);
        assert_eq!(v[10], 2100.0);
        assert_eq!(v[1], 2000.0);
        let two = ModelDescriptor::parse("two-layer 1500 3000 45", Path::new(".")).unwrap();
        let v = two.velocities(&spec).unwrap();
        assert_eq!((v[4], v[5]), (1500.0, 3000.0));
        assert!(ModelDescriptor::parse("box 1 2 3", Path::new(".")).is_err());
        assert!(ModelDescriptor::parse("uniform 1; uniform 2", Path::new(".")).is_err());
    }
}
