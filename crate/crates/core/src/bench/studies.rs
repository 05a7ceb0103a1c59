//! Experiment drivers. Every driver returns a [`Table`] whose rows are
//! sorted by key, so the CSV is independent of thread scheduling.

use std::path::Path;

use rayon::prelude::*;

use super::config::{CouplingKind, IntegratorKind, PressureKind, RunConfig, StepPolicy};
use super::run::{max_diff, run_simulation, RunReport};
use crate::error::{Error, Result};
use crate::grid::{fmt17, CellField, GridSpec, VelocityField};
use crate::integrators::tableau::nominal_bound;
use crate::integrators::Method;
use crate::spatial_ops::spectral_radius_estimate;

/// CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(path, self.to_csv()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Column `name` parsed as floats.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect())
    }
}

/// Observed order between consecutive rows; NaN when either error is not
/// a positive finite number.
pub fn slopes(h: &[f64], err: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; h.len()];
    for k in 1..h.len() {
        let (e0, e1) = (err[k - 1], err[k]);
        if e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite() && h[k] != h[k - 1] {
            out[k] = (e1 / e0).ln() / (h[k] / h[k - 1]).ln();
        }
    }
    out
}

fn zero_mean(p: &CellField) -> CellField {
    let mut q = p.clone();
    q.remove_mean();
    q
}

fn run_all(cfgs: &[RunConfig]) -> Result<Vec<RunReport>> {
    cfgs.par_iter().map(run_simulation).collect()
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub velocity_error: f64,
    pub pressure_error: f64,
    pub velocity_slope: f64,
    pub pressure_slope: f64,
}

fn convergence_rows(h: Vec<f64>, ev: Vec<f64>, ep: Vec<f64>) -> Vec<ConvergenceRow> {
    let (sv, sp) = (slopes(&h, &ev), slopes(&h, &ep));
    (0..h.len())
        .map(|k| ConvergenceRow {
            h: h[k],
            velocity_error: ev[k],
            pressure_error: ep[k],
            velocity_slope: sv[k],
            pressure_slope: sp[k],
        })
        .collect()
}

pub fn convergence_table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(&["h", "velocity_error", "pressure_error", "velocity_slope", "pressure_slope"]);
    for r in rows {
        t.rows.push(
            [r.h, r.velocity_error, r.pressure_error, r.velocity_slope, r.pressure_slope].iter().map(|x| fmt17(*x)).collect(),
        );
    }
    t
}

/// Temporal study: fixed grid, errors against a run with step `dt_ref`.
/// Rows are ordered by decreasing step.
pub fn convergence_time(template: &RunConfig, dts: &[f64], dt_ref: f64) -> Result<Vec<ConvergenceRow>> {
    let mut dts = dts.to_vec();
    dts.sort_by(|a, b| b.total_cmp(a));
    let mut cfgs: Vec<RunConfig> =
        dts.iter().map(|&dt| RunConfig { step: StepPolicy::Fixed { dt }, out: None, ..template.clone() }).collect();
    cfgs.push(RunConfig { step: StepPolicy::Fixed { dt: dt_ref }, out: None, ..template.clone() });
    let mut reps = run_all(&cfgs)?;
    let reference = reps.pop().expect("reference run");
    if reference.unstable {
        return Err(Error::Config("reference run is unstable".into()));
    }
    let pref = zero_mean(&reference.pressure);
    let (mut ev, mut ep) = (Vec::new(), Vec::new());
    for r in &reps {
        if r.unstable {
            ev.push(f64::INFINITY);
            ep.push(f64::INFINITY);
        } else {
            ev.push(max_diff(&r.velocity.data, &reference.velocity.data));
            ep.push(max_diff(&zero_mean(&r.pressure).data, &pref.data));
        }
    }
    Ok(convergence_rows(dts, ev, ep))
}

/// Cubic interpolation halfway between fine samples `lo` and `lo + 1`
/// (1-based, `len` samples); the stencil shifts inward at the ends.
fn mid_cubic(len: usize, lo: usize, f: impl Fn(usize) -> f64) -> f64 {
    const CENTRED: [f64; 4] = [-1.0, 9.0, 9.0, -1.0];
    const LOW: [f64; 4] = [5.0, 15.0, -5.0, 1.0];
    const HIGH: [f64; 4] = [1.0, -5.0, 15.0, 5.0];
    let (first, w) = if lo < 2 {
        (lo, LOW)
    } else if lo + 2 > len {
        (lo - 2, HIGH)
    } else {
        (lo - 1, CENTRED)
    };
    w.iter().enumerate().map(|(k, w)| w * f(first + k)).sum::<f64>() / 16.0
}

/// Restricts a velocity field of grid `fine` onto the nested grid `coarse`.
///
/// Normal coordinates coincide; along the staggered direction the coarse
/// point sits midway between two fine points and is interpolated with a
/// cubic, so the restriction does not pollute a second-order error estimate.
pub fn restrict_velocity(fine: &GridSpec, coarse: &GridSpec, u: &VelocityField) -> Result<VelocityField> {
    let r = nesting_ratio(fine, coarse)?;
    let n = fine.n;
    let mut out = VelocityField::zeros(coarse);
    let lo = |j: usize| (j - 1) * r + r / 2;
    for j in 1..=coarse.n {
        for i in 1..coarse.n {
            out.set_u(i, j, mid_cubic(n, lo(j), |jj| u.u(i * r, jj)));
            out.set_v(j, i, mid_cubic(n, lo(j), |ii| u.v(ii, i * r)));
        }
    }
    Ok(out)
}

/// Cell-field restriction: tensor-product cubic through the 4x4 fine
/// cells around each coarse centre.
pub fn restrict_cells(fine: &GridSpec, coarse: &GridSpec, p: &CellField) -> Result<CellField> {
    let r = nesting_ratio(fine, coarse)?;
    let n = fine.n;
    let lo = |j: usize| (j - 1) * r + r / 2;
    let mut out = CellField::zeros(coarse.n);
    for j in 1..=coarse.n {
        for i in 1..=coarse.n {
            out.set(i, j, mid_cubic(n, lo(j), |jj| mid_cubic(n, lo(i), |ii| p.at(ii, jj))));
        }
    }
    Ok(out)
}

fn nesting_ratio(fine: &GridSpec, coarse: &GridSpec) -> Result<usize> {
    let r = fine.n / coarse.n.max(1);
    if r < 2 || fine.n % coarse.n != 0 || !r.is_power_of_two() {
        return Err(Error::Config(format!("grid {} is not a nested refinement of {}", fine.n, coarse.n)));
    }
    Ok(r)
}

/// Spatial study: fixed step, errors against the nested grid `n_ref`.
/// Rows are ordered by decreasing `h = 1/N`.
pub fn convergence_space(template: &RunConfig, ns: &[usize], n_ref: usize) -> Result<Vec<ConvergenceRow>> {
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    let fine = GridSpec::new(n_ref, template.re)?;
    for &n in &ns {
        nesting_ratio(&fine, &GridSpec::new(n, template.re)?)?;
    }
    let mut cfgs: Vec<RunConfig> = ns.iter().map(|&n| RunConfig { n, out: None, ..template.clone() }).collect();
    cfgs.push(RunConfig { n: n_ref, out: None, ..template.clone() });
    let mut reps = run_all(&cfgs)?;
    let reference = reps.pop().expect("reference run");
    if reference.unstable {
        return Err(Error::Config("reference run is unstable".into()));
    }
    let (mut h, mut ev, mut ep) = (Vec::new(), Vec::new(), Vec::new());
    for (r, &n) in reps.iter().zip(&ns) {
        let coarse = GridSpec::new(n, template.re)?;
        h.push(coarse.dx);
        if r.unstable {
            ev.push(f64::INFINITY);
            ep.push(f64::INFINITY);
            continue;
        }
        let uref = restrict_velocity(&fine, &coarse, &reference.velocity)?;
        let pref = zero_mean(&restrict_cells(&fine, &coarse, &reference.pressure)?);
        ev.push(max_diff(&r.velocity.data, &uref.data));
        ep.push(max_diff(&zero_mean(&r.pressure).data, &pref.data));
    }
    Ok(convergence_rows(h, ev, ep))
}

/// Stability verdict: finite throughout and below ten times the initial
/// velocity scale at the end.
pub fn is_stable(cfg: &RunConfig) -> Result<bool> {
    let cfg = RunConfig { abort_factor: Some(10.0), out: None, ..cfg.clone() };
    let rep = run_simulation(&cfg)?;
    Ok(!rep.unstable)
}

/// Theoretical largest stable step `l_s / rho` of the diffusion operator.
pub fn theoretical_dt(method: Method, s: usize, n: usize, re: f64) -> Result<f64> {
    Ok(nominal_bound(method, s) / spectral_radius_estimate(&GridSpec::new(n, re)?))
}

/// Largest stable fixed step with `s` stages, by bisection between
/// `lo` (stable) and `hi` (unstable) to relative width `rel`.
pub fn max_stable_dt(template: &RunConfig, s: usize, mut lo: f64, mut hi: f64, rel: f64) -> Result<f64> {
    let at = |dt: f64| RunConfig { stages: Some(s), step: StepPolicy::Fixed { dt }, ..template.clone() };
    if !is_stable(&at(lo))? {
        return Err(Error::Config(format!("lower bracket dt={lo} is already unstable")));
    }
    while is_stable(&at(hi))? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Ok(f64::INFINITY);
        }
    }
    while hi - lo > rel * lo {
        let mid = (lo * hi).sqrt();
        if is_stable(&at(mid))? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Smallest stable stage count for a fixed step, searching upward from
/// the method's minimum.
pub fn min_stable_stages(template: &RunConfig, dt: f64, s_max: usize) -> Result<Option<usize>> {
    let floor = if template.integrator == IntegratorKind::Rkc { 2 } else { 3 };
    for s in floor..=s_max {
        if template.integrator != IntegratorKind::Rkc && crate::integrators::rock2_tableau(s).is_err() {
            continue;
        }
        let cfg = RunConfig { stages: Some(s), step: StepPolicy::Fixed { dt }, ..template.clone() };
        if is_stable(&cfg)? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

fn method_for(kind: IntegratorKind) -> Result<Method> {
    match kind {
        IntegratorKind::Rkc => Ok(Method::Rkc),
        IntegratorKind::Rock2 | IntegratorKind::Pirock => Ok(Method::Rock2),
        IntegratorKind::Rk4 => Err(Error::Config("stability sweeps need a stabilized method".into())),
    }
}

/// `max_dt_given_s` sweep: rows `(s, measured, theoretical, ratio)`.
pub fn stability_max_dt(template: &RunConfig, stages: &[usize], rel: f64) -> Result<Table> {
    let method = method_for(template.integrator)?;
    let mut rows: Vec<(usize, f64, f64)> = stages
        .par_iter()
        .map(|&s| {
            let th = theoretical_dt(method, s, template.n, template.re)?;
            let dt = max_stable_dt(template, s, 0.5 * th, 1.2 * th, rel)?;
            Ok((s, dt, th))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.0);
    let mut t = Table::new(&["s", "measured_dt", "theoretical_dt", "ratio"]);
    for (s, m, th) in rows {
        t.rows.push(vec![s.to_string(), fmt17(m), fmt17(th), fmt17(m / th)]);
    }
    Ok(t)
}

/// `min_s_given_dt` sweep over Reynolds numbers: rows `(re, min_s, predicted_s)`.
pub fn stability_min_s(template: &RunConfig, dt: f64, res: &[f64], s_max: usize) -> Result<Table> {
    let method = method_for(template.integrator)?;
    let mut rows: Vec<(f64, Option<usize>, usize)> = res
        .par_iter()
        .map(|&re| {
            let cfg = RunConfig { re, ..template.clone() };
            let rho = spectral_radius_estimate(&GridSpec::new(cfg.n, re)?);
            let predicted = crate::integrators::select_stages(dt, rho, method, 0)?;
            Ok((re, min_stable_stages(&cfg, dt, s_max)?, predicted))
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut t = Table::new(&["re", "min_stable_s", "predicted_s"]);
    for (re, s, p) in rows {
        t.rows.push(vec![fmt17(re), s.map(|s| s.to_string()).unwrap_or_else(|| "none".into()), p.to_string()]);
    }
    Ok(t)
}

/// Reference run for work-precision studies: compensated RK4 with the DAE coupling.
pub fn reference_config(template: &RunConfig, dt: f64) -> RunConfig {
    RunConfig {
        integrator: IntegratorKind::Rk4,
        coupling: CouplingKind::Dae,
        pressure: PressureKind::Ap1,
        cp: false,
        stages: None,
        compensated: true,
        step: StepPolicy::Fixed { dt },
        out: None,
        ..template.clone()
    }
}

/// Adaptive runs of every method at every tolerance (`atol = rtol`), with
/// errors against `reference`. Rows sorted by method then decreasing tolerance.
pub fn efficiency_study(methods: &[RunConfig], tolerances: &[f64], reference: &RunReport) -> Result<Table> {
    let mut cfgs = Vec::new();
    for m in methods {
        for &tol in tolerances {
            let dt0 = match m.step {
                StepPolicy::Adaptive { dt0, .. } => dt0,
                StepPolicy::Fixed { dt } => dt,
            };
            let cfg = RunConfig { step: StepPolicy::Adaptive { atol: tol, rtol: tol, dt0 }, out: None, ..m.clone() };
            cfg.validate()?;
            cfgs.push((tol, cfg));
        }
    }
    let pref = zero_mean(&reference.pressure);
    let mut rows: Vec<(String, f64, RunReport)> = cfgs
        .par_iter()
        .map(|(tol, cfg)| Ok((cfg.method_name(), *tol, run_simulation(cfg)?)))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut t = Table::new(&[
        "method", "tol", "wall_time", "velocity_error", "pressure_error", "steps", "rejected", "total_stages",
    ]);
    for (name, tol, r) in rows {
        let (ev, ep) = if r.unstable {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (max_diff(&r.velocity.data, &reference.velocity.data), max_diff(&zero_mean(&r.pressure).data, &pref.data))
        };
        t.rows.push(vec![
            name,
            fmt17(tol),
            fmt17(r.wall_time),
            fmt17(ev),
            fmt17(ep),
            r.steps_accepted.to_string(),
            r.steps_rejected.to_string(),
            r.total_stages.to_string(),
        ]);
    }
    Ok(t)
}

/// Adaptive runs over Reynolds numbers: stage statistics per run.
pub fn reynolds_study(template: &RunConfig, res: &[f64]) -> Result<Table> {
    let mut rows: Vec<(f64, RunReport)> = res
        .par_iter()
        .map(|&re| Ok((re, run_simulation(&RunConfig { re, out: None, ..template.clone() })?)))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut t = Table::new(&[
        "re", "average_stages", "total_stages", "steps", "rejected", "velocity_error", "pressure_error", "unstable",
    ]);
    let opt = |x: Option<f64>| x.map(fmt17).unwrap_or_else(|| "none".into());
    for (re, r) in rows {
        t.rows.push(vec![
            fmt17(re),
            fmt17(r.average_stages()),
            r.total_stages.to_string(),
            r.steps_accepted.to_string(),
            r.steps_rejected.to_string(),
            opt(r.velocity_error),
            opt(r.pressure_error),
            r.unstable.to_string(),
        ]);
    }
    Ok(t)
}

/// Centerline profiles: `u` along `x = 1/2` and `v` along `y = 1/2`,
/// including the wall values (lid speed 1 at the top).
pub fn centerlines(spec: &GridSpec, vel: &VelocityField) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    if spec.n % 2 != 0 {
        return Err(Error::Config("centerlines need an even grid".into()));
    }
    let m = spec.n / 2;
    let mut u = vec![(0.0, 0.0)];
    let mut v = vec![(0.0, 0.0)];
    for j in 1..=spec.n {
        u.push((spec.u_point(m, j).1, vel.u(m, j)));
        v.push((spec.v_point(j, m).0, vel.v(j, m)));
    }
    u.push((1.0, 1.0));
    v.push((1.0, 0.0));
    Ok((u, v))
}

/// Piecewise-linear interpolation on sorted abscissae (clamped at the ends).
pub fn interpolate(profile: &[(f64, f64)], x: f64) -> f64 {
    let k = profile.partition_point(|p| p.0 < x);
    if k == 0 {
        return profile[0].1;
    }
    if k == profile.len() {
        return profile[k - 1].1;
    }
    let (x0, y0) = profile[k - 1];
    let (x1, y1) = profile[k];
    if x1 == x0 {
        y1
    } else {
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// RMS and max deviation of a computed profile at reference ordinates.
pub fn profile_deviation(computed: &[(f64, f64)], reference: &[(f64, f64)]) -> (f64, f64) {
    if reference.is_empty() {
        return (0.0, 0.0);
    }
    let d: Vec<f64> = reference.iter().map(|&(x, r)| interpolate(computed, x) - r).collect();
    let rms = (d.iter().map(|e| e * e).sum::<f64>() / d.len() as f64).sqrt();
    (rms, d.iter().fold(0.0, |a, e| a.max(e.abs())))
}

/// Reference centerline data: CSV rows `profile,coord,value` with
/// `profile` either `u` (coordinate y) or `v` (coordinate x).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CenterlineReference {
    pub u: Vec<(f64, f64)>,
    pub v: Vec<(f64, f64)>,
}

impl CenterlineReference {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("profile") {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::Io(format!("reference line {}: expected profile,coord,value", no + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let x: f64 = f[1].parse().map_err(|_| bad())?;
            let y: f64 = f[2].parse().map_err(|_| bad())?;
            match f[0] {
                "u" => out.u.push((x, y)),
                "v" => out.v.push((x, y)),
                _ => return Err(bad()),
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhiaDeviation {
    pub u_rms: f64,
    pub u_max: f64,
    pub v_rms: f64,
    pub v_max: f64,
}

pub fn ghia_compare(spec: &GridSpec, vel: &VelocityField, reference: &CenterlineReference) -> Result<GhiaDeviation> {
    let (u, v) = centerlines(spec, vel)?;
    let (u_rms, u_max) = profile_deviation(&u, &reference.u);
    let (v_rms, v_max) = profile_deviation(&v, &reference.v);
    Ok(GhiaDeviation { u_rms, u_max, v_rms, v_max })
}

/// [`ghia_compare`] against a file; `None` (with a notice on stderr) when
/// the file does not exist.
pub fn ghia_compare_file(spec: &GridSpec, vel: &VelocityField, path: &Path) -> Result<Option<GhiaDeviation>> {
    if !path.exists() {
        eprintln!("reference {} not found; centerline comparison skipped", path.display());
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ghia_compare(spec, vel, &CenterlineReference::parse(&text)?).map(Some)
}

/// Largest velocity error on the rows of unknowns next to the walls.
pub fn wall_row_error(spec: &GridSpec, vel: &VelocityField, exact: &VelocityField) -> f64 {
    let n = spec.n;
    let mut e: f64 = 0.0;
    for i in 1..n {
        for j in [1, n] {
            e = e.max((vel.u(i, j) - exact.u(i, j)).abs());
            e = e.max((vel.v(j, i) - exact.v(j, i)).abs());
        }
    }
    e
}
