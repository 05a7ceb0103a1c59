//! Incompressibility handling on top of the stage integrators.
//!
//! Two families are provided. Projection methods advance the momentum
//! equation with a frozen pressure and project afterwards ([`pm1_step`],
//! [`pm3_step`]) or after every stage ([`pm1v_step`]). The DAE realisation
//! ([`dae_step`]) projects every stage while the recursion itself runs on
//! the unprojected buffers, so that it coincides with the Butcher form
//! `U_i = U*_i - c_i dt G phi_i`.
//!
//! Pressures are always returned in the zero-mean gauge.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BoundaryData, CellField, GridSpec, PointFn, VelocityField, WallValues};
use crate::integrators::{
    pirock_step, rk4_step, rk4_step_compensated, rkc_step, rock2_step, Butcher, HookMode, RkcTableau, Rock2Tableau, StageHook, StepOutput,
    Tolerance,
};
use crate::poisson::PoissonSolver;
use crate::spatial_ops::{
    add_gradient, divergence_with_walls, momentum_rhs_into, momentum_walls, MomentumRhsConfig, TangentialMode,
};

/// Smallest node for which a pressure-like variable may be formed.
const MIN_NODE: f64 = 1e-12;

/// Time integrator with its stage count fixed.
#[derive(Debug, Clone)]
pub enum Scheme {
    Rkc(RkcTableau),
    Rock2(Rock2Tableau),
    /// PIROCK with diffusion (plus forcing and pressure) as the stiff part.
    Pirock(Rock2Tableau),
    Rk4,
}

impl Scheme {
    /// Stages per step (right-hand side evaluations of the core recursion).
    pub fn stages(&self) -> usize {
        match self {
            Scheme::Rkc(t) => t.s,
            Scheme::Rock2(t) | Scheme::Pirock(t) => t.s,
            Scheme::Rk4 => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Rkc(_) => "rkc",
            Scheme::Rock2(_) => "rock2",
            Scheme::Pirock(_) => "pirock",
            Scheme::Rk4 => "rk4",
        }
    }
}

/// Everything a step needs besides the state: grid, boundary data, forcing
/// and a shared Poisson solver.
#[derive(Clone)]
pub struct FlowContext {
    pub spec: GridSpec,
    pub bc: BoundaryData,
    pub forcing: Option<PointFn>,
    pub include_advection: bool,
    pub solver: Arc<PoissonSolver>,
}

impl std::fmt::Debug for FlowContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowContext")
            .field("spec", &self.spec)
            .field("bc", &self.bc)
            .field("forcing", &self.forcing.is_some())
            .field("include_advection", &self.include_advection)
            .finish()
    }
}

impl FlowContext {
    pub fn new(spec: GridSpec, bc: BoundaryData, forcing: Option<PointFn>) -> Result<Self> {
        let solver = Arc::new(PoissonSolver::new(spec.n)?);
        Ok(Self { spec, bc, forcing, include_advection: true, solver })
    }

    pub fn without_advection(mut self) -> Self {
        self.include_advection = false;
        self
    }

    fn rhs_config(&self, pressure: bool, tangential: TangentialMode) -> MomentumRhsConfig {
        MomentumRhsConfig {
            include_pressure: pressure,
            include_advection: self.include_advection,
            include_diffusion: true,
            forcing: self.forcing.clone(),
            tangential,
        }
    }

    /// Momentum right-hand side `F(t, y)`, with `-grad p` when `p` is given.
    pub fn rhs(&self, t: f64, y: &[f64], p: Option<&[f64]>, tangential: TangentialMode, out: &mut [f64]) -> Result<()> {
        let walls = momentum_walls(&self.spec, y, &self.bc, t, tangential)?;
        let cfg = self.rhs_config(p.is_some(), tangential);
        momentum_rhs_into(&self.spec, y, p, &walls, t, &cfg, out)
    }

    /// Divergence of `y` with the boundary normal velocity at time `t`.
    pub fn divergence(&self, y: &[f64], t: f64) -> CellField {
        divergence_with_walls(&self.spec, y, &WallValues::sample(&self.bc.velocity, &self.spec, t))
    }

    /// Projects `y` in place onto fields that are discretely divergence-free
    /// for the boundary data at `t`; returns the potential that was removed.
    pub fn project(&self, y: &mut [f64], t: f64) -> Result<CellField> {
        let div = self.divergence(y, t);
        self.remove_gradient(y, &div)
    }

    /// Same projection with homogeneous boundary flux (for increments).
    pub fn project_homogeneous(&self, y: &mut [f64]) -> Result<CellField> {
        let div = divergence_with_walls(&self.spec, y, &WallValues::zeros(&self.spec));
        self.remove_gradient(y, &div)
    }

    fn remove_gradient(&self, y: &mut [f64], div: &CellField) -> Result<CellField> {
        let phi = self.solver.solve_neumann(div)?;
        add_gradient(&self.spec, &phi.data, -1.0, y);
        Ok(phi)
    }
}

/// Pressure-like variable `phi_i` of one projected stage.
#[derive(Debug, Clone)]
pub struct PhiRecord {
    /// Recursion index of the stage (`g_stage`).
    pub stage: usize,
    pub c: f64,
    /// `L^{-1}(M U*_i - r_1(t_i)) / (c_i dt)`.
    pub phi: CellField,
}

#[derive(Debug, Clone)]
pub struct CouplingState {
    pub u: VelocityField,
    /// Current pressure in the zero-mean gauge.
    pub p: CellField,
    pub t: f64,
    /// Stage potentials of the last DAE step.
    pub phi_log: Vec<PhiRecord>,
}

impl CouplingState {
    pub fn new(u: VelocityField, p: CellField, t: f64) -> Self {
        Self { u, p, t, phi_log: Vec::new() }
    }

    /// State at rest with zero pressure.
    pub fn at_rest(spec: &GridSpec, t: f64) -> Self {
        Self::new(VelocityField::zeros(spec), CellField::zeros(spec.n), t)
    }
}

/// Result of one coupled step.
#[derive(Debug, Clone)]
pub struct CoupledStep {
    pub state: CouplingState,
    /// Weighted RMS error estimate (0 without tolerance).
    pub err: f64,
    pub f_evals: usize,
}

/// Stage hook solving one Poisson problem per stage.
struct StageProjector<'a> {
    ctx: &'a FlowContext,
    mode: HookMode,
    log: Vec<PhiRecord>,
    last_raw: Option<CellField>,
}

impl<'a> StageProjector<'a> {
    fn new(ctx: &'a FlowContext, mode: HookMode) -> Self {
        Self { ctx, mode, log: Vec::new(), last_raw: None }
    }
}

impl StageHook for StageProjector<'_> {
    fn mode(&self) -> HookMode {
        self.mode
    }

    fn apply(&mut self, stage: usize, c: f64, t: f64, dt: f64, u: &mut [f64]) -> Result<()> {
        let raw = self.ctx.project(u, t)?;
        if self.mode == HookMode::ProjectDualBuffer {
            if c <= MIN_NODE {
                return Err(Error::DegenerateNode(c));
            }
            self.log.push(PhiRecord { stage, c, phi: raw.scaled(1.0 / (c * dt)) });
        }
        self.last_raw = Some(raw);
        Ok(())
    }

    fn project_error(&mut self, e: &mut [f64]) -> Result<()> {
        self.ctx.project_homogeneous(e).map(|_| ())
    }
}

fn advance<H: StageHook>(
    ctx: &FlowContext,
    scheme: &Scheme,
    y0: &[f64],
    t: f64,
    dt: f64,
    p: Option<&[f64]>,
    tangential: TangentialMode,
    hook: &mut H,
    tol: Option<Tolerance>,
) -> Result<StepOutput> {
    let mut f = |tt: f64, y: &[f64], out: &mut [f64]| ctx.rhs(tt, y, p, tangential, out);
    match scheme {
        Scheme::Rkc(tab) => rkc_step(tab, &mut f, y0, t, dt, hook, tol),
        Scheme::Rock2(tab) => rock2_step(tab, &mut f, y0, t, dt, hook, tol),
        Scheme::Rk4 => {
            if tol.is_some() {
                return Err(Error::Config("rk4 has no error estimate".into()));
            }
            let y = rk4_step(&mut f, y0, t, dt, hook)?;
            Ok(StepOutput { y, err: 0.0, f_evals: 4 })
        }
        Scheme::Pirock(tab) => {
            if hook.mode() != HookMode::None {
                return Err(Error::Config("pirock supports only the pm1 coupling".into()));
            }
            if tol.is_some() {
                return Err(Error::Config("pirock runs with a fixed step only".into()));
            }
            let spec = &ctx.spec;
            let mut diff = ctx.rhs_config(p.is_some(), tangential);
            diff.include_advection = false;
            let adv = MomentumRhsConfig {
                include_pressure: false,
                include_advection: true,
                include_diffusion: false,
                forcing: None,
                tangential,
            };
            let mut fd = |tt: f64, y: &[f64], out: &mut [f64]| {
                let w = momentum_walls(spec, y, &ctx.bc, tt, tangential)?;
                momentum_rhs_into(spec, y, p, &w, tt, &diff, out)
            };
            let mut fa = |tt: f64, y: &[f64], out: &mut [f64]| {
                if !ctx.include_advection {
                    out.fill(0.0);
                    return Ok(());
                }
                let w = momentum_walls(spec, y, &ctx.bc, tt, tangential)?;
                momentum_rhs_into(spec, y, None, &w, tt, &adv, out)
            };
            let y = pirock_step(tab, &mut fd, &mut fa, y0, t, dt)?;
            Ok(StepOutput { y, err: 0.0, f_evals: tab.s + 5 })
        }
    }
}

fn finish(ctx: &FlowContext, state: &CouplingState, y: Vec<f64>, p: CellField, dt: f64) -> Result<CouplingState> {
    let mut p = p;
    p.remove_mean();
    Ok(CouplingState { u: VelocityField::from_vec(&ctx.spec, y)?, p, t: state.t + dt, phi_log: Vec::new() })
}

fn projection_step(
    ctx: &FlowContext,
    state: &CouplingState,
    scheme: &Scheme,
    dt: f64,
    tol: Option<Tolerance>,
    tangential: TangentialMode,
) -> Result<CoupledStep> {
    let mut hook = StageProjector::new(ctx, HookMode::None);
    let out = advance(ctx, scheme, &state.u.data, state.t, dt, Some(&state.p.data), tangential, &mut hook, tol)?;
    let mut y = out.y;
    let phi1 = ctx.project(&mut y, state.t + dt)?;
    let p: Vec<f64> = state.p.data.iter().zip(&phi1.data).map(|(p, f)| p + 2.0 / dt * f).collect();
    let next = finish(ctx, state, y, CellField { n: ctx.spec.n, data: p }, dt)?;
    Ok(CoupledStep { state: next, err: out.err, f_evals: out.f_evals })
}

/// Projection method: momentum with frozen `p_n`, then
/// `u = u* - grad phi_1`, `p = p_n + (2/dt) phi_1`.
pub fn pm1_step(
    ctx: &FlowContext,
    state: &CouplingState,
    scheme: &Scheme,
    dt: f64,
    tol: Option<Tolerance>,
) -> Result<CoupledStep> {
    projection_step(ctx, state, scheme, dt, tol, TangentialMode::Dirichlet)
}

/// [`pm1_step`] with the tangential wall values of the virtual velocity
/// rebuilt from the exact normal derivative of the boundary data.
pub fn pm3_step(
    ctx: &FlowContext,
    state: &CouplingState,
    scheme: &Scheme,
    dt: f64,
    tol: Option<Tolerance>,
) -> Result<CoupledStep> {
    if ctx.bc.tangential_normal_derivative.is_none() {
        return Err(Error::MissingExactDerivative);
    }
    projection_step(ctx, state, scheme, dt, tol, TangentialMode::ExactNeumann)
}

/// Projection of every stage, the recursion continuing from the projected
/// stages; `p = p_n + (2/dt) phi_s`.
pub fn pm1v_step(
    ctx: &FlowContext,
    state: &CouplingState,
    scheme: &Scheme,
    dt: f64,
    tol: Option<Tolerance>,
) -> Result<CoupledStep> {
    let mut hook = StageProjector::new(ctx, HookMode::ProjectState);
    let out =
        advance(ctx, scheme, &state.u.data, state.t, dt, Some(&state.p.data), TangentialMode::Dirichlet, &mut hook, tol)?;
    let phi_s = hook.last_raw.take().ok_or_else(|| Error::Config("no stage was projected".into()))?;
    let p: Vec<f64> = state.p.data.iter().zip(&phi_s.data).map(|(p, f)| p + 2.0 / dt * f).collect();
    let next = finish(ctx, state, out.y, CellField { n: ctx.spec.n, data: p }, dt)?;
    Ok(CoupledStep { state: next, err: out.err, f_evals: out.f_evals })
}

/// DAE realisation: pressure-free `F`, every stage projected with the
/// boundary data of its own time, recursion on unprojected buffers.
///
/// The returned state carries the first-order pressure `phi_{s+1}` and the
/// stage potentials in `phi_log`.
pub fn dae_step(
    ctx: &FlowContext,
    state: &CouplingState,
    scheme: &Scheme,
    dt: f64,
    tol: Option<Tolerance>,
) -> Result<CoupledStep> {
    let mut hook = StageProjector::new(ctx, HookMode::ProjectDualBuffer);
    let out = advance(ctx, scheme, &state.u.data, state.t, dt, None, TangentialMode::Dirichlet, &mut hook, tol)?;
    let log = std::mem::take(&mut hook.log);
    let last = log.last().ok_or_else(|| Error::Config("no stage was projected".into()))?;
    let mut next = finish(ctx, state, out.y, last.phi.clone(), dt)?;
    next.phi_log = log;
    Ok(CoupledStep { state: next, err: out.err, f_evals: out.f_evals })
}

/// RK4 DAE step with Kahan-compensated accumulation, for reference runs.
/// `comp` carries the compensation between calls.
pub fn dae_step_rk4_compensated(
    ctx: &FlowContext,
    state: &CouplingState,
    comp: &mut [f64],
    dt: f64,
) -> Result<CoupledStep> {
    let mut hook = StageProjector::new(ctx, HookMode::ProjectDualBuffer);
    let mut f = |tt: f64, y: &[f64], out: &mut [f64]| ctx.rhs(tt, y, None, TangentialMode::Dirichlet, out);
    let mut y = state.u.data.clone();
    rk4_step_compensated(&mut f, &mut y, comp, state.t, dt, &mut hook)?;
    let log = std::mem::take(&mut hook.log);
    let last = log.last().ok_or_else(|| Error::Config("no stage was projected".into()))?;
    let mut next = finish(ctx, state, y, last.phi.clone(), dt)?;
    next.phi_log = log;
    Ok(CoupledStep { state: next, err: 0.0, f_evals: 4 })
}

/// Divergence of an acceleration field with the boundary acceleration
/// `r_1'` when available (homogeneous otherwise).
fn acceleration_divergence(ctx: &FlowContext, f: &[f64], t: f64) -> CellField {
    let walls = match &ctx.bc.velocity_dt {
        Some(d) => WallValues::sample(d, &ctx.spec, t),
        None => WallValues::zeros(&ctx.spec),
    };
    divergence_with_walls(&ctx.spec, f, &walls)
}

/// Second-order pressure by projecting the acceleration:
/// `L phi_2 = div F_m` with `F_m` including `-grad p_m`; returns `p_m + phi_2`.
pub fn pm1_second_order_pressure(ctx: &FlowContext, state: &CouplingState) -> Result<CellField> {
    let mut f = vec![0.0; ctx.spec.state_len()];
    ctx.rhs(state.t, &state.u.data, Some(&state.p.data), TangentialMode::Dirichlet, &mut f)?;
    let div = acceleration_divergence(ctx, &f, state.t);
    let phi2 = ctx.solver.solve_neumann(&div)?;
    let mut p = CellField { n: ctx.spec.n, data: state.p.data.iter().zip(&phi2.data).map(|(a, b)| a + b).collect() };
    p.remove_mean();
    Ok(p)
}

/// Pressure from the hidden constraint `L p = M F(u) - r_1'(t)`.
pub fn ap1_pressure(ctx: &FlowContext, state: &CouplingState) -> Result<CellField> {
    let d = ctx.bc.velocity_dt.as_ref().ok_or(Error::MissingVelocityDt)?;
    let mut f = vec![0.0; ctx.spec.state_len()];
    ctx.rhs(state.t, &state.u.data, None, TangentialMode::Dirichlet, &mut f)?;
    let div = divergence_with_walls(&ctx.spec, &f, &WallValues::sample(d, &ctx.spec, state.t));
    ctx.solver.solve_neumann(&div)
}

/// `l_j'(x)` for the Lagrange basis on `nodes`.
fn lagrange_derivative(nodes: &[f64], j: usize, x: f64) -> f64 {
    let mut sum = 0.0;
    for (k, &tk) in nodes.iter().enumerate() {
        if k == j {
            continue;
        }
        let mut term = 1.0 / (nodes[j] - tk);
        for (i, &ti) in nodes.iter().enumerate() {
            if i != j && i != k {
                term *= (x - ti) / (nodes[j] - ti);
            }
        }
        sum += term;
    }
    sum
}

/// Reconstruction weights `c_j l_j'(1)` for averages known at nodes
/// `c_j` (normalised times, the origin implied).
pub fn reconstruction_weights(c: &[f64]) -> Result<Vec<f64>> {
    if c.len() < 2 {
        return Err(Error::InvalidArgument(format!("reconstruction needs at least 3 nodes, got {}", c.len() + 1)));
    }
    let mut nodes = vec![0.0];
    nodes.extend_from_slice(c);
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            if (nodes[a] - nodes[b]).abs() <= MIN_NODE {
                return Err(Error::DegenerateNode(nodes[a]));
            }
        }
    }
    if (c[c.len() - 1] - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("last node must be the step end, got {}", c[c.len() - 1])));
    }
    Ok((0..c.len()).map(|j| c[j] * lagrange_derivative(&nodes, j + 1, 1.0)).collect())
}

/// Point value at the step end from the averages `phi` over `[t_n, t_n + c dt]`.
pub fn ap2_pressure(nodes: &[(f64, &CellField)]) -> Result<CellField> {
    let c: Vec<f64> = nodes.iter().map(|(c, _)| *c).collect();
    let w = reconstruction_weights(&c)?;
    let n = nodes[0].1.n;
    let mut p = CellField::zeros(n);
    for ((_, phi), wj) in nodes.iter().zip(&w) {
        if phi.n != n {
            return Err(Error::LengthMismatch { expected: n * n, got: phi.data.len() });
        }
        p.data.iter_mut().zip(&phi.data).for_each(|(a, b)| *a += wj * b);
    }
    p.remove_mean();
    Ok(p)
}

fn find_stage(log: &[PhiRecord], stage: usize) -> Result<&PhiRecord> {
    log.iter()
        .find(|r| r.stage == stage)
        .ok_or_else(|| Error::InvalidArgument(format!("stage {stage} missing from the potential log")))
}

/// RKC reconstruction on `{t_n, t_{g_{s-1}}, t_{n+1}}`.
pub fn ap2_pressure_rkc(log: &[PhiRecord], s: usize) -> Result<CellField> {
    if s < 3 {
        return Err(Error::InvalidArgument(format!("AP2 needs s >= 3, got {s}")));
    }
    let a = find_stage(log, s - 1)?;
    let b = find_stage(log, s)?;
    ap2_pressure(&[(a.c, &a.phi), (b.c, &b.phi)])
}

/// Weights recovering a second-order average from three first-order ones.
///
/// `E_n = L^{-1} M dF/dt(u_n, t_n)`, the common leading error term of the
/// stage potentials, is never formed: the weights annihilate it.
#[derive(Debug, Clone, PartialEq)]
pub struct Ap2wCoefficients {
    /// Stage indices `(i, j, k)` in recursion numbering.
    pub stages: [usize; 3],
    pub c: [f64; 3],
    pub e: [f64; 3],
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Ap2wCoefficients {
    pub fn from_parts(stages: [usize; 3], c: [f64; 3], e: [f64; 3]) -> Result<Self> {
        let [ci, cj, ck] = c;
        for (a, b) in [(ci, cj), (cj, ck), (ci, ck)] {
            if (a - b).abs() <= MIN_NODE {
                return Err(Error::DegenerateNode(a));
            }
        }
        let [ei, ej, ek] = e;
        let alpha = ej / (cj - ci);
        let beta = ei / (ci - cj) - ek / (ck - cj);
        let gamma = ej / (ck - cj);
        let sum = alpha + beta + gamma;
        if !(sum.abs() >= 1e-10) {
            return Err(Error::DegenerateWeights(format!("alpha + beta + gamma = {sum:e}")));
        }
        Ok(Self { stages, c, e, alpha, beta, gamma })
    }

    pub fn sum(&self) -> f64 {
        self.alpha + self.beta + self.gamma
    }
}

/// Stage order defect `e_m = c_m/2 - (1/c_m) sum_l a_ml c_l` of stage `g_m`;
/// `m = s` uses the weights `b`.
pub fn stage_defect(bt: &Butcher, m: usize) -> Result<f64> {
    let s = bt.stages();
    let (row, cm) = if m < s {
        (&bt.a[m], bt.c[m])
    } else if m == s {
        (&bt.b, bt.b.iter().sum())
    } else {
        return Err(Error::InvalidArgument(format!("stage {m} beyond {s}")));
    };
    if cm.abs() <= MIN_NODE {
        return Err(Error::DegenerateNode(cm));
    }
    let acc: f64 = row.iter().zip(&bt.c).map(|(a, c)| a * c).sum();
    Ok(0.5 * cm - acc / cm)
}

pub fn ap2w_coefficients(bt: &Butcher, stages: [usize; 3]) -> Result<Ap2wCoefficients> {
    let s = bt.stages();
    let node = |m: usize| if m < s { bt.c[m] } else { bt.b.iter().sum() };
    let c = stages.map(node);
    let e = [stage_defect(bt, stages[0])?, stage_defect(bt, stages[1])?, stage_defect(bt, stages[2])?];
    Ap2wCoefficients::from_parts(stages, c, e)
}

/// Second-order pressure from `(alpha phi_i + beta phi_j + gamma phi_k) / sum`
/// at node `c_j` and `phi_{s+1}` at the step end.
pub fn ap2w_pressure(log: &[PhiRecord], coeffs: &Ap2wCoefficients) -> Result<CellField> {
    let [i, j, k] = coeffs.stages;
    let (pi, pj, pk) = (find_stage(log, i)?, find_stage(log, j)?, find_stage(log, k)?);
    let last = log.last().ok_or_else(|| Error::InvalidArgument("empty potential log".into()))?;
    let sum = coeffs.sum();
    let mut avg = CellField::zeros(pj.phi.n);
    for (q, o) in avg.data.iter_mut().enumerate() {
        *o = (coeffs.alpha * pi.phi.data[q] + coeffs.beta * pj.phi.data[q] + coeffs.gamma * pk.phi.data[q]) / sum;
    }
    ap2_pressure(&[(coeffs.c[1], &avg), (last.c, &last.phi)])
}

/// ROCK2 choice: stages `g_1, g_2, g_3` around `g_2`.
pub fn ap2w_rock2(tab: &Rock2Tableau) -> Result<Ap2wCoefficients> {
    ap2w_coefficients(&tab.butcher(), [1, 2, 3])
}
