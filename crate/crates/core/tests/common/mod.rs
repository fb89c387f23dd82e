#![allow(dead_code)]

use lagfwi::wavecore::{
    forward_solve, sample, AcquisitionGeometry, GridSpec, ModelGrid, SourceField, TraceData,
    Wavefield,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nondimensional 1D grid: dx = 1, dt = 0.5, so unit velocity has Courant 0.5.
pub fn grid_1d(nx: usize, nt: usize) -> GridSpec<f64> {
    GridSpec::new_1d(nx, 1.0, nt, 0.5).unwrap()
}

pub fn random_model(spec: GridSpec<f64>, rng: &mut ChaCha8Rng) -> ModelGrid<f64> {
    let values = (0..spec.nodes()).map(|_| rng.random_range(0.8..1.5)).collect();
    ModelGrid::new(spec, values).unwrap()
}

pub fn random_field(spec: GridSpec<f64>, rng: &mut ChaCha8Rng) -> Wavefield<f64> {
    let values = (0..spec.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    Wavefield::from_values(spec, values).unwrap()
}

pub fn random_traces(nr: usize, nt: usize, rng: &mut ChaCha8Rng) -> TraceData<f64> {
    let values = (0..nr * nt).map(|_| rng.random_range(-1.0..1.0)).collect();
    TraceData::from_values(nr, nt, values).unwrap()
}

/// Smooth causal pulse starting at zero.
pub fn pulse(nt: usize, center: f64, width: f64) -> Vec<f64> {
    (0..nt)
        .map(|n| {
            if n < 2 {
                return 0.0;
            }
            let t = (n as f64 - center) / width;
            (1.0 - 2.0 * t * t) * (-t * t).exp()
        })
        .collect()
}

/// The tiny dense-oracle problem: 1D nx = 7, nt = 8, two receivers, one
/// source.
pub struct Tiny {
    pub spec: GridSpec<f64>,
    pub geometry: AcquisitionGeometry,
    pub model: ModelGrid<f64>,
    pub true_model: ModelGrid<f64>,
    pub sources: Vec<SourceField<f64>>,
    pub data: Vec<TraceData<f64>>,
}

pub fn tiny(seed: u64) -> Tiny {
    let spec = grid_1d(7, 8);
    let geometry = AcquisitionGeometry::new(&spec, vec![1], vec![0, 5]).unwrap();
    let mut r = rng(seed);
    let true_model = random_model(spec, &mut r);
    let model = ModelGrid::uniform(spec, 1.1).unwrap();
    let wavelet = pulse(spec.nt, 3.0, 1.2);
    let b = SourceField::point_source(spec, 1, &wavelet).unwrap();
    let d = sample(&forward_solve(&true_model, &b).unwrap(), &geometry).unwrap();
    Tiny {
        spec,
        geometry,
        model,
        true_model,
        sources: vec![b],
        data: vec![d],
    }
}

pub fn rel(a: &[f64], b: &[f64]) -> f64 {
    lagfwi::scalar::rel_diff(a, b)
}

/// The tiny problem packaged for the iteration suite, optionally with a
/// second source at node 4.
pub fn tiny_problem(seed: u64, two_sources: bool) -> (lagfwi::iterations::Problem<f64>, ModelGrid<f64>) {
    let t = tiny(seed);
    let mut sources = t.sources.clone();
    let mut data = t.data.clone();
    let mut nodes = vec![1];
    if two_sources {
        let wavelet = pulse(t.spec.nt, 2.5, 1.0);
        let b = SourceField::point_source(t.spec, 4, &wavelet).unwrap();
        data.push(sample(&forward_solve(&t.true_model, &b).unwrap(), &t.geometry).unwrap());
        sources.push(b);
        nodes.push(4);
    }
    let g = AcquisitionGeometry::new(&t.spec, nodes, vec![0, 5]).unwrap();
    let p = lagfwi::iterations::Problem::new(g, sources, data)
        .unwrap()
        .with_true_model(t.true_model.clone());
    (p, t.model)
}

pub fn rel_fields(a: &[Wavefield<f64>], b: &[Wavefield<f64>]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm().powi(2)).sum();
    let den: f64 = b.iter().map(|y| y.norm().powi(2)).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}
