//! Identity battery behind `lagfwi selfcheck`. Every check builds its own
//! small seeded problem, so the battery is deterministic.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::iterations::{
    al_step, penalty_step, reduced_objective_and_gradient, refined_step, split_gs_step,
    IterationState, Problem, RefinedVariant, Scheme, StepSettings,
};
use crate::linalg::CgSettings;
use crate::oracle::{
    alternating_minimization_step, dense_saddle_solve, fd_gradient, multiplier_data_space_form,
    multiplier_source_space_form,
};
use crate::saddle::{
    companion_wavefield, multiplier_from_wavefield, solve_augmented_wavefield, solve_ls_multiplier,
    DataSpaceHessian, Orientation, PenaltyConfig,
};
use crate::scalar::rel_diff;
use crate::wavecore::{
    adjoint_solve, apply_wave_operator, apply_wave_operator_transpose, forward_solve, inject,
    sample, scattering_source, AcquisitionGeometry, GridSpec, ModelGrid, SourceField, TraceData,
    Wavefield,
};

/// Deliberate defects for testing that the battery notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Scales one sample of every adjoint solve by `1 + 1e-6`.
    Adjoint,
}

#[derive(Debug, Clone, Default)]
pub struct SelfcheckOptions {
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<32} {:>7.2}s  {}", self.name, self.seconds, self.detail)
    }
}

struct Ctx {
    fault: Option<Fault>,
}

impl Ctx {
    fn adjoint(&self, m: &ModelGrid<f64>, r: &SourceField<f64>) -> Result<Wavefield<f64>> {
        let mut v = adjoint_solve(m, r)?;
        if self.fault == Some(Fault::Adjoint) {
            let i = v.values().len() / 2;
            v.values_mut()[i] *= 1.0 + 1e-6;
        }
        Ok(v)
    }
}

/// Worst observed value against its tolerance.
struct Measured {
    worst: f64,
    tol: f64,
    what: &'static str,
}

impl Measured {
    fn new(what: &'static str, tol: f64) -> Self {
        Self { worst: 0.0, tol, what }
    }

    fn see(&mut self, x: f64) {
        self.worst = if x.is_nan() { f64::INFINITY } else { self.worst.max(x) };
    }
}

type Check = fn(&Ctx) -> Result<Measured>;

const CHECKS: &[(&str, Check)] = &[
    ("dot-test-forward-adjoint", dot_forward_adjoint),
    ("dot-test-sampling", dot_sampling),
    ("dot-test-wave-operator", dot_wave_operator),
    ("splitting-identity", splitting_identity),
    ("guttman-identity", guttman_identity),
    ("saddle-penalty-orientations", saddle_penalty),
    ("saddle-al-orientations", saddle_al),
    ("split-gs-equals-penalty", split_gs_equals_penalty),
    ("refined-epsilon-equals-al", refined_epsilon_equals_al),
    ("refined-variants-agree", refined_variants_agree),
    ("penalty-wavefield-equals-wri", penalty_equals_wri),
    ("al-wavefield-equals-admm", al_equals_admm),
    ("fd-gradient", fd_gradient_check),
    ("fixed-point-all-schemes", fixed_point),
];

pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

pub fn run_selfcheck(opts: &SelfcheckOptions) -> Vec<CheckResult> {
    run_selected(opts, |_| true)
}

/// Runs the checks whose name satisfies `filter`, in battery order.
pub fn run_selected(opts: &SelfcheckOptions, filter: impl Fn(&str) -> bool) -> Vec<CheckResult> {
    let ctx = Ctx { fault: opts.fault };
    CHECKS
        .iter()
        .filter(|(name, _)| filter(name))
        .map(|(name, check)| {
            let start = Instant::now();
            let (passed, detail) = match check(&ctx) {
                Ok(m) => (
                    m.worst <= m.tol,
                    format!("{} {:.2e} (tol {:.0e})", m.what, m.worst, m.tol),
                ),
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult {
                name,
                passed,
                detail,
                seconds: start.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn grid(nx: usize, nt: usize) -> GridSpec<f64> {
    GridSpec::new_1d(nx, 1.0, nt, 0.5).expect("fixed grid is valid")
}

fn random_model(spec: GridSpec<f64>, r: &mut ChaCha8Rng) -> Result<ModelGrid<f64>> {
    ModelGrid::new(spec, (0..spec.nodes()).map(|_| r.random_range(0.8..1.5)).collect())
}

fn random_field(spec: GridSpec<f64>, r: &mut ChaCha8Rng) -> Result<Wavefield<f64>> {
    Wavefield::from_values(spec, (0..spec.len()).map(|_| r.random_range(-1.0..1.0)).collect())
}

fn random_traces(nr: usize, nt: usize, r: &mut ChaCha8Rng) -> Result<TraceData<f64>> {
    TraceData::from_values(nr, nt, (0..nr * nt).map(|_| r.random_range(-1.0..1.0)).collect())
}

fn pulse(nt: usize, center: f64, width: f64) -> Vec<f64> {
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

/// Dot-test mismatch `|⟨Lx, y⟩ − ⟨x, L*y⟩|` scaled by the Cauchy-Schwarz
/// bound `max(‖Lx‖‖y‖, ‖x‖‖L*y‖)`, which stays meaningful when the inner
/// product itself nearly cancels.
fn rel_dot(lhs: f64, rhs: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        (lhs - rhs).abs()
    } else {
        (lhs - rhs).abs() / bound
    }
}

fn rel_fields(a: &[Wavefield<f64>], b: &[Wavefield<f64>]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm().powi(2)).sum();
    let den: f64 = b.iter().map(|y| y.norm().powi(2)).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Random consistent problem on the 7 × 8 grid with receivers at nodes 0
/// and 5 and sources at nodes 1 and 4, started from a uniform model.
fn tiny(seed: u64) -> Result<(Problem<f64>, ModelGrid<f64>)> {
    let spec = grid(7, 8);
    let mut r = rng(seed);
    let truth = random_model(spec, &mut r)?;
    let g = AcquisitionGeometry::new(&spec, vec![1, 4], vec![0, 5])?;
    let sources = vec![
        SourceField::point_source(spec, 1, &pulse(spec.nt, 3.0, 1.2))?,
        SourceField::point_source(spec, 4, &pulse(spec.nt, 2.5, 1.0))?,
    ];
    let data = sources
        .iter()
        .map(|b| sample(&forward_solve(&truth, b)?, &g))
        .collect::<Result<Vec<_>>>()?;
    let p = Problem::new(g, sources, data)?.with_true_model(truth);
    Ok((p, ModelGrid::uniform(spec, 1.1)?))
}

fn dot_forward_adjoint(ctx: &Ctx) -> Result<Measured> {
    let spec = grid(21, 64);
    let mut r = rng(101);
    let mut m = Measured::new("max relative dot mismatch", 1e-12);
    for _ in 0..100 {
        let model = random_model(spec, &mut r)?;
        let b = random_field(spec, &mut r)?;
        let y = random_field(spec, &mut r)?;
        let (x, z) = (forward_solve(&model, &b)?, ctx.adjoint(&model, &y)?);
        let bound = (x.norm() * y.norm()).max(b.norm() * z.norm());
        m.see(rel_dot(x.inner(&y), b.inner(&z), bound));
    }
    Ok(m)
}

fn dot_sampling(_: &Ctx) -> Result<Measured> {
    let spec = grid(21, 64);
    let mut r = rng(102);
    let mut m = Measured::new("max relative dot mismatch", 1e-12);
    for _ in 0..100 {
        let mut nodes: Vec<usize> = (0..spec.nodes()).filter(|_| r.random_bool(0.3)).collect();
        if nodes.is_empty() {
            nodes.push(r.random_range(0..spec.nodes()));
        }
        let g = AcquisitionGeometry::new(&spec, vec![0], nodes)?;
        let u = random_field(spec, &mut r)?;
        let d = random_traces(g.n_receivers(), spec.nt, &mut r)?;
        let (pu, ptd) = (sample(&u, &g)?, inject(&d, &g, &spec)?);
        let bound = (pu.norm() * d.norm()).max(u.norm() * ptd.norm());
        m.see(rel_dot(pu.inner(&d), u.inner(&ptd), bound));
    }
    Ok(m)
}

fn dot_wave_operator(_: &Ctx) -> Result<Measured> {
    let spec = grid(21, 64);
    let mut r = rng(103);
    let mut m = Measured::new("max relative dot mismatch", 1e-12);
    for _ in 0..100 {
        let model = random_model(spec, &mut r)?;
        let u = random_field(spec, &mut r)?;
        let y = random_field(spec, &mut r)?;
        let (au, aty) = (apply_wave_operator(&model, &u)?, apply_wave_operator_transpose(&model, &y)?);
        let bound = (au.norm() * y.norm()).max(u.norm() * aty.norm());
        m.see(rel_dot(au.inner(&y), u.inner(&aty), bound));
    }
    Ok(m)
}

fn splitting_identity(_: &Ctx) -> Result<Measured> {
    let spec = grid(21, 64);
    let mut r = rng(104);
    let mut m = Measured::new("max relative residual", 1e-12);
    for _ in 0..20 {
        let model = random_model(spec, &mut r)?;
        let dm: Vec<f64> = (0..spec.nodes()).map(|_| r.random_range(-0.2..0.2)).collect();
        let u = random_field(spec, &mut r)?;
        let base = apply_wave_operator(&model, &u)?;
        let shifted = apply_wave_operator(&model.perturbed(&dm)?, &u)?;
        let mut resid = &shifted - &base;
        resid.axpy(1.0, &scattering_source(&u, &dm)?);
        m.see(resid.norm() / base.norm());
    }
    Ok(m)
}

/// Tiny problem whose data no wavefield of the start model fits, plus a
/// running multiplier for the AL variants.
fn saddle_case(seed: u64) -> Result<(Problem<f64>, ModelGrid<f64>, TraceData<f64>, Wavefield<f64>)> {
    let (p, m0) = tiny(seed)?;
    let mut r = rng(seed + 1000);
    let mut d = p.data[0].clone();
    d.axpy(0.3 * d.norm() / 4.0, &random_traces(2, m0.spec().nt, &mut r)?);
    let w = random_field(*m0.spec(), &mut r)?.scaled(1e-2);
    Ok((p, m0, d, w))
}

fn guttman_identity(_: &Ctx) -> Result<Measured> {
    let (p, m0, d, w) = saddle_case(105)?;
    let b = &p.sources[0];
    let mut m = Measured::new("max relative difference", 1e-10);
    for mu in [1.0, 1e2, 1e4] {
        for w in [None, Some(&w)] {
            let src = multiplier_source_space_form(&m0, b, &d, &p.geometry, mu, w)?;
            let dat = multiplier_data_space_form(&m0, b, &d, &p.geometry, mu, w)?;
            m.see(rel_diff(src.values(), dat.values()));
        }
    }
    Ok(m)
}

fn saddle_orientations(with_w: bool, seed: u64) -> Result<Measured> {
    let (p, m0, d, w) = saddle_case(seed)?;
    let w = with_w.then_some(&w);
    let b = &p.sources[0];
    let h = DataSpaceHessian::assemble(&m0, &p.geometry)?;
    let mut m = Measured::new("max relative error vs dense saddle", 1e-8);
    for mu in [1.0, 1e2, 1e4] {
        let cfg = PenaltyConfig::new(mu).with_cg(1e-14, 20_000);
        let (u_ref, v_ref) = dense_saddle_solve(&m0, b, &d, &p.geometry, mu, w)?;
        let v = solve_ls_multiplier(&m0, b, &d, &p.geometry, &cfg, w, &h.factor_damped(mu)?)?;
        let u = companion_wavefield(&m0, b, &v, &cfg, w)?;
        m.see(rel_diff(u.values(), u_ref.values()));
        m.see(rel_diff(v.values(), v_ref.values()));
        let aug = solve_augmented_wavefield(&m0, b, &d, &p.geometry, &cfg, w)?;
        let vw = multiplier_from_wavefield(&m0, &aug.wavefield, b, mu, w)?;
        m.see(rel_diff(aug.wavefield.values(), u_ref.values()));
        m.see(rel_diff(vw.values(), v_ref.values()));
    }
    Ok(m)
}

fn saddle_penalty(_: &Ctx) -> Result<Measured> {
    saddle_orientations(false, 106)
}

fn saddle_al(_: &Ctx) -> Result<Measured> {
    saddle_orientations(true, 107)
}

const STEPS: usize = 5;
const MUS: [f64; 2] = [1.0, 1e2];

fn tight(mu: f64) -> PenaltyConfig<f64> {
    PenaltyConfig::new(mu).with_cg(1e-14, 20_000)
}

fn tight_cg() -> CgSettings<f64> {
    CgSettings::new(1e-14, 20_000)
}

fn iterate<F>(p: &Problem<f64>, m0: &ModelGrid<f64>, step: F) -> Result<Vec<IterationState<f64>>>
where
    F: Fn(&IterationState<f64>) -> Result<IterationState<f64>>,
{
    let mut states = vec![IterationState::initial(p, m0.clone())?];
    for _ in 0..STEPS {
        let next = step(states.last().expect("non-empty"))?;
        states.push(next);
    }
    Ok(states)
}

fn scaled(fields: &[Wavefield<f64>], s: f64) -> Vec<Wavefield<f64>> {
    fields.iter().map(|f| f.scaled(s)).collect()
}

fn split_gs_equals_penalty(_: &Ctx) -> Result<Measured> {
    let (p, m0) = tiny(108)?;
    let mut m = Measured::new("max per-iterate relative difference", 1e-8);
    for mu in MUS {
        let a = iterate(&p, &m0, |s| split_gs_step(s, &p, mu))?;
        let b = iterate(&p, &m0, |s| penalty_step(s, &p, &tight(mu), Orientation::Multiplier))?;
        for (x, y) in a.iter().zip(&b).skip(1) {
            m.see(rel_diff(x.m.values(), y.m.values()));
            m.see(rel_fields(&x.u, &y.u));
            m.see(rel_fields(&scaled(&x.lambda, mu), &y.v));
        }
    }
    Ok(m)
}

fn refined_epsilon_equals_al(_: &Ctx) -> Result<Measured> {
    let (p, m0) = tiny(109)?;
    let mut m = Measured::new("max per-iterate relative difference", 1e-8);
    for mu in MUS {
        let a = iterate(&p, &m0, |s| refined_step(s, &p, mu, RefinedVariant::Epsilon, tight_cg()))?;
        let b = iterate(&p, &m0, |s| al_step(s, &p, &tight(mu), Orientation::Multiplier))?;
        for (x, y) in a.iter().zip(&b).skip(1) {
            m.see(rel_diff(x.m.values(), y.m.values()));
            m.see(rel_fields(&x.u, &y.u));
            m.see(rel_fields(&x.lambda, &scaled(&y.v, 1.0 / mu)));
            m.see(rel_fields(&x.eps, &scaled(&y.w, 1.0 / mu)));
        }
    }
    Ok(m)
}

fn refined_variants_agree(_: &Ctx) -> Result<Measured> {
    let (p, m0) = tiny(110)?;
    let mut m = Measured::new("max per-iterate relative difference", 1e-8);
    for mu in MUS {
        let runs = [RefinedVariant::Direct, RefinedVariant::Rearranged, RefinedVariant::Epsilon]
            .into_iter()
            .map(|v| iterate(&p, &m0, |s| refined_step(s, &p, mu, v, tight_cg())))
            .collect::<Result<Vec<_>>>()?;
        for other in &runs[1..] {
            for (x, y) in runs[0].iter().zip(other).skip(1) {
                m.see(rel_diff(x.m.values(), y.m.values()));
                m.see(rel_fields(&x.u, &y.u));
                m.see(rel_fields(&x.lambda, &y.lambda));
                m.see(rel_fields(&x.eps, &y.eps));
            }
        }
    }
    Ok(m)
}

fn against_alternating(seed: u64, al: bool) -> Result<Measured> {
    let (p, m0) = tiny(seed)?;
    let mut m = Measured::new("max per-iterate relative difference", 1e-8);
    for mu in MUS {
        let states = if al {
            iterate(&p, &m0, |s| al_step(s, &p, &tight(mu), Orientation::Wavefield))?
        } else {
            iterate(&p, &m0, |s| penalty_step(s, &p, &tight(mu), Orientation::Wavefield))?
        };
        for pair in states.windows(2) {
            let w = al.then_some(pair[0].w.as_slice());
            let o = alternating_minimization_step(&pair[0].m, &p.sources, &p.data, &p.geometry, mu, w)?;
            m.see(rel_diff(pair[1].m.values(), o.model.values()));
            m.see(rel_fields(&pair[1].u, &o.wavefields));
            if al {
                m.see(rel_fields(&pair[1].w, &o.multipliers));
            }
        }
    }
    Ok(m)
}

fn penalty_equals_wri(_: &Ctx) -> Result<Measured> {
    against_alternating(111, false)
}

fn al_equals_admm(_: &Ctx) -> Result<Measured> {
    against_alternating(112, true)
}

/// Three sources on the 21 × 128 grid, random true model, uniform start.
fn fd_gradient_check(_: &Ctx) -> Result<Measured> {
    let spec = grid(21, 128);
    let mut r = rng(113);
    let truth = random_model(spec, &mut r)?;
    let nodes = vec![3, 10, 17];
    let g = AcquisitionGeometry::new(&spec, nodes.clone(), (0..21).step_by(2).collect())?;
    let sources = nodes
        .iter()
        .map(|&s| SourceField::point_source(spec, s, &pulse(spec.nt, 8.0, 2.0)))
        .collect::<Result<Vec<_>>>()?;
    let data = sources
        .iter()
        .map(|b| sample(&forward_solve(&truth, b)?, &g))
        .collect::<Result<Vec<_>>>()?;
    let p = Problem::new(g, sources, data)?;
    let m0 = ModelGrid::uniform(spec, 1.1)?;
    let (_, grad) = reduced_objective_and_gradient(&m0, &p)?;
    let fd = fd_gradient(&m0, &p.sources, &p.data, &p.geometry, 1e-6)?;
    let gmax = grad.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut m = Measured::new("max per-node relative error", 1e-5);
    for (a, b) in grad.iter().zip(&fd) {
        if a.abs() > 1e-8 * gmax {
            m.see((a - b).abs() / a.abs());
        }
    }
    Ok(m)
}

fn fixed_point(_: &Ctx) -> Result<Measured> {
    let (p, _) = tiny(114)?;
    let truth = p.true_model.clone().expect("tiny problems carry the truth");
    let settings = StepSettings::new(10.0).with_cg(1e-12, 5000);
    let mut m = Measured::new("max relative model change", 1e-10);
    for scheme in Scheme::ALL {
        let state = IterationState::initial(&p, truth.clone())?;
        let next = scheme.step(&state, &p, &settings)?;
        m.see(rel_diff(next.m.values(), truth.values()));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut names = check_names();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CHECKS.len());
    }

    #[test]
    fn adjoint_fault_is_detected_by_name() {
        let opts = SelfcheckOptions { fault: Some(Fault::Adjoint) };
        let res = run_selected(&opts, |n| n == "dot-test-forward-adjoint");
        assert_eq!(res.len(), 1);
        assert!(!res[0].passed, "{}", res[0]);
        let clean = run_selected(&SelfcheckOptions::default(), |n| n == "dot-test-forward-adjoint");
        assert!(clean[0].passed, "{}", clean[0]);
    }
}
