//! Single simulation driver.

use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use super::config::{CouplingKind, IntegratorKind, PressureKind, RunConfig, StepPolicy};
use super::problems::{ProblemKind, ProblemSpec};
use crate::coupling::{
    ap1_pressure, ap2_pressure_rkc, ap2w_pressure, ap2w_rock2, dae_step, dae_step_rk4_compensated, pm1_second_order_pressure,
    pm1_step, pm1v_step, pm3_step, CoupledStep, CouplingState, FlowContext, Scheme,
};
use crate::error::{Error, Result};
use crate::grid::{dump_field, fmt17, sample_cells, sample_velocity, CellField, DumpKind, GridSpec, VelocityField};
use crate::integrators::tableau::nominal_bound;
use crate::integrators::{rkc_tableau, rock2_tableau, select_stages, Method, StepController, Tolerance, DEFAULT_EPS, STAGE_CAP};
use crate::spatial_ops::spectral_radius_estimate;

/// Safety applied to the stability bound when the step size is adaptive.
const ADAPTIVE_BOUND_SAFETY: f64 = 0.95;

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub method: String,
    pub problem: ProblemKind,
    pub n: usize,
    pub re: f64,
    /// Time actually reached (the blow-up time for unstable runs).
    pub t_final: f64,
    pub velocity: VelocityField,
    /// Reported pressure in the zero-mean gauge.
    pub pressure: CellField,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub steps_attempted: usize,
    /// Sum of the stage counts of all attempted steps.
    pub total_stages: usize,
    pub max_stages: usize,
    /// Stage count of the last attempted step.
    pub last_stages: usize,
    pub f_evals: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub velocity_error: Option<f64>,
    pub pressure_error: Option<f64>,
    /// Largest `|div u|_inf / (1 + |u|_inf)` over accepted states.
    pub max_divergence: f64,
    pub initial_norm: f64,
    pub max_norm: f64,
    pub unstable: bool,
    pub blowup_time: Option<f64>,
    pub wall_time: f64,
}

impl RunReport {
    pub fn average_stages(&self) -> f64 {
        if self.steps_attempted == 0 {
            0.0
        } else {
            self.total_stages as f64 / self.steps_attempted as f64
        }
    }

    /// `key=value` lines.
    pub fn summary(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_else(|| "none".into());
        let rows: Vec<(&str, String)> = vec![
            ("method", self.method.clone()),
            ("problem", self.problem.name().into()),
            ("n", self.n.to_string()),
            ("re", fmt17(self.re)),
            ("t_final", fmt17(self.t_final)),
            ("steps_accepted", self.steps_accepted.to_string()),
            ("steps_rejected", self.steps_rejected.to_string()),
            ("steps_attempted", self.steps_attempted.to_string()),
            ("total_stages", self.total_stages.to_string()),
            ("average_stages", fmt17(self.average_stages())),
            ("max_stages", self.max_stages.to_string()),
            ("f_evals", self.f_evals.to_string()),
            ("dt_min", fmt17(self.dt_min)),
            ("dt_max", fmt17(self.dt_max)),
            ("velocity_error", opt(self.velocity_error)),
            ("pressure_error", opt(self.pressure_error)),
            ("max_divergence", fmt17(self.max_divergence)),
            ("initial_norm", fmt17(self.initial_norm)),
            ("max_norm", fmt17(self.max_norm)),
            ("unstable", self.unstable.to_string()),
            ("blowup_time", opt(self.blowup_time)),
            ("wall_time", fmt17(self.wall_time)),
        ];
        rows.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Writes `summary.txt` and the `u`, `v`, `p` dumps into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let put = |name: &str, text: String| {
            std::fs::write(dir.join(name), text).map_err(|e| Error::Io(format!("{name}: {e}")))
        };
        put("summary.txt", self.summary())?;
        put("u.txt", dump_field(DumpKind::U, self.n, self.t_final, self.velocity.u_part()))?;
        put("v.txt", dump_field(DumpKind::V, self.n, self.t_final, self.velocity.v_part()))?;
        put("p.txt", dump_field(DumpKind::P, self.n, self.t_final, &self.pressure.data))
    }
}

/// Grid, context and initial state of a configuration.
pub struct Setup {
    pub problem: ProblemSpec,
    pub ctx: FlowContext,
    pub state: CouplingState,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    let mut problem = ProblemSpec::build(cfg.problem, cfg.re)?;
    if !cfg.advection {
        problem = problem.without_advection();
    }
    let spec = GridSpec::new(cfg.n, cfg.re)?;
    let mut ctx = FlowContext::new(spec, problem.boundary.clone(), problem.forcing.clone())?;
    if !cfg.advection {
        ctx = ctx.without_advection();
    }
    let init = problem.initial.clone();
    let mut u = sample_velocity(&ctx.spec, &move |t, x, y| init(t, x, y), cfg.t0);
    // sampled fields are divergence-free only up to truncation error
    ctx.project(&mut u.data, cfg.t0)?;
    let p = match &problem.exact {
        Some(ex) => {
            let pf = ex.pressure.clone();
            let mut p = sample_cells(&ctx.spec, &move |t, x, y| pf(t, x, y), cfg.t0);
            p.remove_mean();
            p
        }
        None => CellField::zeros(cfg.n),
    };
    Ok(Setup { problem, ctx, state: CouplingState::new(u, p, cfg.t0) })
}

fn method_of(kind: IntegratorKind) -> Option<Method> {
    match kind {
        IntegratorKind::Rkc => Some(Method::Rkc),
        IntegratorKind::Rock2 | IntegratorKind::Pirock => Some(Method::Rock2),
        IntegratorKind::Rk4 => None,
    }
}

/// Builds schemes by stage count, caching tableaus.
struct SchemeCache {
    kind: IntegratorKind,
    cache: HashMap<usize, Scheme>,
}

impl SchemeCache {
    fn get(&mut self, s: usize) -> Result<&Scheme> {
        if !self.cache.contains_key(&s) {
            let scheme = match self.kind {
                IntegratorKind::Rkc => Scheme::Rkc(rkc_tableau(s, DEFAULT_EPS)?),
                IntegratorKind::Rock2 => Scheme::Rock2(rock2_tableau(s)?),
                IntegratorKind::Pirock => Scheme::Pirock(rock2_tableau(s)?),
                IntegratorKind::Rk4 => Scheme::Rk4,
            };
            self.cache.insert(s, scheme);
        }
        Ok(&self.cache[&s])
    }
}

fn min_stages(cfg: &RunConfig) -> usize {
    match (cfg.integrator, cfg.pressure) {
        (IntegratorKind::Rkc, PressureKind::Ap2) => 3,
        _ => 0,
    }
}

/// Stage count for a step of size `dt` (`rho` already includes any safety).
fn stages_for(cfg: &RunConfig, dt: f64, rho: f64) -> Result<usize> {
    if let Some(s) = cfg.stages {
        return Ok(s);
    }
    match method_of(cfg.integrator) {
        Some(m) => select_stages(dt, rho, m, min_stages(cfg)),
        None => Ok(4),
    }
}

fn take_step(cfg: &RunConfig, ctx: &FlowContext, state: &CouplingState, scheme: &Scheme, dt: f64, tol: Option<Tolerance>) -> Result<CoupledStep> {
    match cfg.coupling {
        CouplingKind::Pm1 => pm1_step(ctx, state, scheme, dt, tol),
        CouplingKind::Pm1v => pm1v_step(ctx, state, scheme, dt, tol),
        CouplingKind::Pm3 => pm3_step(ctx, state, scheme, dt, tol),
        CouplingKind::Dae => dae_step(ctx, state, scheme, dt, tol),
    }
}

/// Pressure requested by the configuration for a state just produced by a step.
fn recover_pressure(cfg: &RunConfig, ctx: &FlowContext, state: &CouplingState, scheme: Option<&Scheme>) -> Result<CellField> {
    match cfg.pressure {
        PressureKind::P1 => Ok(state.p.clone()),
        PressureKind::P2 => pm1_second_order_pressure(ctx, state),
        PressureKind::Ap1 => ap1_pressure(ctx, state),
        PressureKind::Ap2 => match scheme {
            Some(Scheme::Rkc(tab)) => ap2_pressure_rkc(&state.phi_log, tab.s),
            _ => Err(Error::Config("ap2 needs an rkc step".into())),
        },
        PressureKind::Ap2w => match scheme {
            Some(Scheme::Rock2(tab)) => ap2w_pressure(&state.phi_log, &ap2w_rock2(tab)?),
            _ => Err(Error::Config("ap2w needs a rock2 step".into())),
        },
    }
}

fn divergence_measure(ctx: &FlowContext, state: &CouplingState) -> f64 {
    let norm = state.u.inf_norm();
    ctx.divergence(&state.u.data, state.t).inf_norm() / (1.0 + norm)
}

/// Runs one simulation. Instability never errors: the report is flagged.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let clock = Instant::now();
    let Setup { problem, ctx, mut state } = setup(cfg)?;
    let rho = spectral_radius_estimate(&ctx.spec);
    let mut schemes = SchemeCache { kind: cfg.integrator, cache: HashMap::new() };
    let initial_norm = state.u.inf_norm();
    // velocity scale for the blow-up test; the cavity starts at rest
    let scale = if initial_norm > 0.0 { initial_norm } else { 1.0 };

    let mut rep = RunReport {
        method: cfg.method_name(),
        problem: cfg.problem,
        n: cfg.n,
        re: cfg.re,
        t_final: cfg.t0,
        velocity: state.u.clone(),
        pressure: state.p.clone(),
        steps_accepted: 0,
        steps_rejected: 0,
        steps_attempted: 0,
        total_stages: 0,
        max_stages: 0,
        last_stages: 0,
        f_evals: 0,
        dt_min: f64::INFINITY,
        dt_max: 0.0,
        velocity_error: None,
        pressure_error: None,
        max_divergence: divergence_measure(&ctx, &state),
        initial_norm,
        max_norm: initial_norm,
        unstable: false,
        blowup_time: None,
        wall_time: 0.0,
    };

    let (tol, mut controller, mut dt) = match cfg.step {
        StepPolicy::Fixed { dt } => (None, None, dt),
        StepPolicy::Adaptive { atol, rtol, dt0 } => {
            (Some(Tolerance { atol, rtol }), Some(StepController::new(atol, rtol)), dt0)
        }
    };
    let adaptive = controller.is_some();
    let rho_sel = if adaptive { rho / ADAPTIVE_BOUND_SAFETY } else { rho };
    let dt_cap = match method_of(cfg.integrator) {
        Some(m) if adaptive && rho > 0.0 => nominal_bound(m, STAGE_CAP) / rho_sel * (1.0 - 1e-9),
        _ => f64::INFINITY,
    };
    let mut comp = vec![0.0; ctx.spec.state_len()];
    let mut last_scheme: Option<Scheme> = None;
    let span = cfg.t_end - cfg.t0;

    while state.t < cfg.t_end - 1e-12 * span.max(1e-300) {
        let remaining = cfg.t_end - state.t;
        let mut h = dt.min(dt_cap);
        // absorb round-off so that fixed steps land on t_end
        if h >= remaining * (1.0 - 1e-9) {
            h = remaining;
        }
        let s = stages_for(cfg, h, rho_sel)?;
        let scheme = schemes.get(s)?.clone();
        rep.steps_attempted += 1;
        rep.total_stages += s;
        rep.max_stages = rep.max_stages.max(s);
        rep.last_stages = s;
        let res = if cfg.compensated {
            dae_step_rk4_compensated(&ctx, &state, &mut comp, h)
        } else {
            take_step(cfg, &ctx, &state, &scheme, h, tol)
        };
        let step = match res {
            Ok(step) => step,
            Err(Error::Diverged { .. }) if adaptive => {
                rep.steps_rejected += 1;
                dt = 0.1 * h;
                continue;
            }
            Err(Error::Diverged { .. }) => {
                rep.unstable = true;
                rep.blowup_time = Some(state.t + h);
                break;
            }
            Err(e) => return Err(e),
        };
        rep.f_evals += step.f_evals;
        if let Some(ctrl) = controller.as_mut() {
            let err = if step.err.is_finite() { step.err } else { f64::INFINITY };
            let (dt_new, accept) = ctrl.propose_dt(err, h);
            dt = dt_new;
            if !accept {
                rep.steps_rejected += 1;
                if !(dt > 1e-14 * span.max(1.0)) {
                    rep.unstable = true;
                    rep.blowup_time = Some(state.t);
                    break;
                }
                continue;
            }
        }
        let next = step.state;
        let norm = next.u.inf_norm();
        rep.steps_accepted += 1;
        rep.dt_min = rep.dt_min.min(h);
        rep.dt_max = rep.dt_max.max(h);
        let limit = cfg.abort_factor.map(|f| f * scale).unwrap_or(f64::INFINITY);
        if !norm.is_finite() || norm > limit {
            rep.unstable = true;
            rep.blowup_time = Some(next.t);
            rep.max_norm = if norm.is_finite() { rep.max_norm.max(norm) } else { f64::INFINITY };
            state = next;
            break;
        }
        rep.max_norm = rep.max_norm.max(norm);
        rep.max_divergence = rep.max_divergence.max(divergence_measure(&ctx, &next));
        if cfg.cp {
            rep.pressure = recover_pressure(cfg, &ctx, &next, Some(&scheme))?;
        }
        state = next;
        last_scheme = Some(scheme);
    }

    rep.t_final = state.t;
    rep.velocity = state.u.clone();
    if rep.dt_min.is_infinite() {
        rep.dt_min = 0.0;
    }
    if !rep.unstable {
        // without a step the report is the initial state itself
        rep.pressure = match last_scheme.as_ref() {
            Some(sch) => recover_pressure(cfg, &ctx, &state, Some(sch))?,
            None => state.p.clone(),
        };
        if let Some(ex) = &problem.exact {
            let vf = ex.velocity.clone();
            let ue = sample_velocity(&ctx.spec, &move |t, x, y| vf(t, x, y), state.t);
            rep.velocity_error = Some(max_diff(&state.u.data, &ue.data));
            let pf = ex.pressure.clone();
            let mut pe = sample_cells(&ctx.spec, &move |t, x, y| pf(t, x, y), state.t);
            pe.remove_mean();
            let mut p = rep.pressure.clone();
            p.remove_mean();
            rep.pressure = p;
            rep.pressure_error = Some(max_diff(&rep.pressure.data, &pe.data));
        }
    }
    rep.wall_time = clock.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.out {
        rep.write(dir)?;
    }
    Ok(rep)
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
