//! Benchmark problems on the unit square.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BoundaryData, PointFn, ScalarFn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemKind {
    Forced,
    Taylor,
    Cavity,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Forced => "forced",
            ProblemKind::Taylor => "taylor",
            ProblemKind::Cavity => "cavity",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forced" => Ok(ProblemKind::Forced),
            "taylor" => Ok(ProblemKind::Taylor),
            "cavity" => Ok(ProblemKind::Cavity),
            _ => Err(Error::Config(format!("unknown problem '{s}'"))),
        }
    }
}

/// Exact velocity and pressure.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: PointFn,
    pub pressure: ScalarFn,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub re: f64,
    pub boundary: BoundaryData,
    pub forcing: Option<PointFn>,
    pub exact: Option<ExactSolution>,
    pub initial: PointFn,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("kind", &self.kind)
            .field("re", &self.re)
            .field("forcing", &self.forcing.is_some())
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn build(kind: ProblemKind, re: f64) -> Result<Self> {
        match kind {
            ProblemKind::Forced => forced_flow(re),
            ProblemKind::Taylor => green_taylor(re),
            ProblemKind::Cavity => lid_driven_cavity(re),
        }
    }
}

impl ProblemSpec {
    /// The problem for the equation without the advection term: the forced
    /// flow keeps its fields with the matching forcing, and the decaying
    /// vortex keeps its velocity while its pressure (which only balances
    /// `(u.grad)u`) becomes zero.
    pub fn without_advection(mut self) -> Self {
        match self.kind {
            ProblemKind::Forced => {
                let nu = 1.0 / self.re;
                self.forcing = Some(Arc::new(move |t, x, y| forced::stokes_forcing(nu, t, x, y)));
            }
            ProblemKind::Taylor => {
                if let Some(ex) = self.exact.as_mut() {
                    ex.pressure = Arc::new(|_, _, _| 0.0);
                }
            }
            ProblemKind::Cavity => {}
        }
        self
    }
}

fn check_re(re: f64) -> Result<()> {
    if re > 0.0 && re.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("Reynolds number must be positive, got {re}")))
    }
}

/// Exact fields of the forced flow.
pub mod forced {
    use super::PI;

    pub fn velocity(t: f64, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let c = t.cos();
        (-c * sx * sx * (2.0 * PI * y).sin(), c * (2.0 * PI * x).sin() * sy * sy)
    }

    pub fn pressure(t: f64, x: f64, y: f64) -> f64 {
        let (cx, cy) = ((PI * x).cos(), (PI * y).cos());
        -t.sin() / 4.0 * (2.0 + cx) * (2.0 + cy) + PI * PI / 2.0 * t.cos() * (cx + cy + cx * cy)
    }

    pub fn velocity_dt(t: f64, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = velocity(0.0, x, y);
        (-t.sin() * u, -t.sin() * v)
    }

    /// `(du/dy, dv/dx)`.
    pub fn tangential_normal_derivative(t: f64, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        let c = t.cos();
        (-c * sx * sx * 2.0 * PI * (2.0 * PI * y).cos(), c * 2.0 * PI * (2.0 * PI * x).cos() * sy * sy)
    }

    /// `f = u_t + (u.grad)u + grad p - nu lap u`.
    ///
    /// With `A = sin^2(pi x)`, `B = sin(2 pi y)`, `D = sin(2 pi x)`,
    /// `E = sin^2(pi y)`: `u = -cos t A B`, `v = cos t D E`.
    pub fn forcing(nu: f64, t: f64, x: f64, y: f64) -> (f64, f64) {
        forcing_terms(nu, t, x, y, true)
    }

    /// Forcing of the same fields for the equation without `(u.grad)u`.
    pub fn stokes_forcing(nu: f64, t: f64, x: f64, y: f64) -> (f64, f64) {
        forcing_terms(nu, t, x, y, false)
    }

    fn forcing_terms(nu: f64, t: f64, x: f64, y: f64, advection: bool) -> (f64, f64) {
        let (c, s) = (t.cos(), t.sin());
        let (sx, cx, sy, cy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin(), (PI * y).cos());
        let a = sx * sx;
        let b = (2.0 * PI * y).sin();
        let d = (2.0 * PI * x).sin();
        let e = sy * sy;
        let c2x = (2.0 * PI * x).cos();
        let c2y = (2.0 * PI * y).cos();
        let pi2 = PI * PI;

        let u = -c * a * b;
        let v = c * d * e;

        let u_t = s * a * b;
        let u_x = -c * PI * d * b;
        let u_y = -c * a * 2.0 * PI * c2y;
        let lap_u = -c * (2.0 * pi2 * c2x * b - 4.0 * pi2 * a * b);
        let p_x = PI * s / 4.0 * sx * (2.0 + cy) - PI * pi2 / 2.0 * c * sx * (1.0 + cy);

        let v_t = -s * d * e;
        let v_x = c * 2.0 * PI * c2x * e;
        let v_y = c * d * PI * b;
        let lap_v = c * (-4.0 * pi2 * d * e + 2.0 * pi2 * d * c2y);
        let p_y = PI * s / 4.0 * sy * (2.0 + cx) - PI * pi2 / 2.0 * c * sy * (1.0 + cx);

        let k = if advection { 1.0 } else { 0.0 };
        (
            u_t + k * (u * u_x + v * u_y) + p_x - nu * lap_u,
            v_t + k * (u * v_x + v * v_y) + p_y - nu * lap_v,
        )
    }
}

/// Exact fields of the decaying vortex.
pub mod taylor {
    use super::PI;

    pub fn velocity(re: f64, t: f64, x: f64, y: f64) -> (f64, f64) {
        let d = (-2.0 * PI * PI * t / re).exp();
        (-d * (PI * x).sin() * (PI * y).cos(), d * (PI * x).cos() * (PI * y).sin())
    }

    pub fn pressure(re: f64, t: f64, x: f64, y: f64) -> f64 {
        0.25 * (-4.0 * PI * PI * t / re).exp() * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos())
    }
}

pub fn forced_flow(re: f64) -> Result<ProblemSpec> {
    check_re(re)?;
    let nu = 1.0 / re;
    let velocity: PointFn = Arc::new(forced::velocity);
    Ok(ProblemSpec {
        kind: ProblemKind::Forced,
        re,
        boundary: BoundaryData {
            velocity: velocity.clone(),
            velocity_dt: Some(Arc::new(forced::velocity_dt)),
            tangential_normal_derivative: Some(Arc::new(forced::tangential_normal_derivative)),
        },
        forcing: Some(Arc::new(move |t, x, y| forced::forcing(nu, t, x, y))),
        exact: Some(ExactSolution { velocity: velocity.clone(), pressure: Arc::new(forced::pressure) }),
        initial: velocity,
    })
}

pub fn green_taylor(re: f64) -> Result<ProblemSpec> {
    check_re(re)?;
    let velocity: PointFn = Arc::new(move |t, x, y| taylor::velocity(re, t, x, y));
    let k = -2.0 * PI * PI / re;
    let dt: PointFn = Arc::new(move |t, x, y| {
        let (u, v) = taylor::velocity(re, t, x, y);
        (k * u, k * v)
    });
    let dn: PointFn = Arc::new(move |t, x, y| {
        let d = (-2.0 * PI * PI * t / re).exp();
        let w = PI * d * (PI * x).sin() * (PI * y).sin();
        (w, -w)
    });
    Ok(ProblemSpec {
        kind: ProblemKind::Taylor,
        re,
        boundary: BoundaryData { velocity: velocity.clone(), velocity_dt: Some(dt), tangential_normal_derivative: Some(dn) },
        forcing: None,
        exact: Some(ExactSolution { velocity: velocity.clone(), pressure: Arc::new(move |t, x, y| taylor::pressure(re, t, x, y)) }),
        initial: velocity,
    })
}

/// Lid velocity `u = 1` on `y = 1` (corner faces included), rest elsewhere.
pub fn lid_driven_cavity(re: f64) -> Result<ProblemSpec> {
    check_re(re)?;
    let lid: PointFn = Arc::new(|_, _, y| if y >= 1.0 { (1.0, 0.0) } else { (0.0, 0.0) });
    let zero: PointFn = Arc::new(|_, _, _| (0.0, 0.0));
    Ok(ProblemSpec {
        kind: ProblemKind::Cavity,
        re,
        boundary: BoundaryData { velocity: lid, velocity_dt: Some(zero.clone()), tangential_normal_derivative: None },
        forcing: None,
        exact: None,
        initial: zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Residual of the momentum equation by centred differences of the exact fields.
    fn ns_residual(p: &ProblemSpec, t: f64, x: f64, y: f64, h: f64) -> (f64, f64) {
        let ex = p.exact.as_ref().unwrap();
        let vel = |t, x, y| (ex.velocity)(t, x, y);
        let pr = |t, x, y| (ex.pressure)(t, x, y);
        let nu = 1.0 / p.re;
        let (u, v) = vel(t, x, y);
        let d = |f: &dyn Fn(f64, f64, f64) -> (f64, f64), dt: f64, dx: f64, dy: f64| {
            let a = f(t + dt, x + dx, y + dy);
            let b = f(t - dt, x - dx, y - dy);
            ((a.0 - b.0) / (2.0 * h), (a.1 - b.1) / (2.0 * h))
        };
        let vt = d(&vel, h, 0.0, 0.0);
        let vx = d(&vel, 0.0, h, 0.0);
        let vy = d(&vel, 0.0, 0.0, h);
        let lap = |f: &dyn Fn(f64, f64, f64) -> (f64, f64)| {
            let c = f(t, x, y);
            let s = [f(t, x + h, y), f(t, x - h, y), f(t, x, y + h), f(t, x, y - h)];
            (
                (s.iter().map(|q| q.0).sum::<f64>() - 4.0 * c.0) / (h * h),
                (s.iter().map(|q| q.1).sum::<f64>() - 4.0 * c.1) / (h * h),
            )
        };
        let l = lap(&vel);
        let px = (pr(t, x + h, y) - pr(t, x - h, y)) / (2.0 * h);
        let py = (pr(t, x, y + h) - pr(t, x, y - h)) / (2.0 * h);
        let f = p.forcing.as_ref().map(|f| f(t, x, y)).unwrap_or((0.0, 0.0));
        (
            vt.0 + u * vx.0 + v * vy.0 + px - nu * l.0 - f.0,
            vt.1 + u * vx.1 + v * vy.1 + py - nu * l.1 - f.1,
        )
    }

    fn divergence_fd(p: &ProblemSpec, t: f64, x: f64, y: f64, h: f64) -> f64 {
        let f = &p.exact.as_ref().unwrap().velocity;
        (f(t, x + h, y).0 - f(t, x - h, y).0 + f(t, x, y + h).1 - f(t, x, y - h).1) / (2.0 * h)
    }

    #[test]
    fn forced_flow_vanishes_at_half_pi() {
        let p = forced_flow(100.0).unwrap();
        for (x, y) in [(0.3, 0.7), (0.5, 0.25), (0.9, 0.1)] {
            let (u, v) = (p.initial)(PI / 2.0, x, y);
            assert!(u.abs() < 1e-15 && v.abs() < 1e-15);
        }
    }

    #[test]
    fn exact_fields_satisfy_the_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [forced_flow(100.0).unwrap(), forced_flow(3.0).unwrap(), green_taylor(100.0).unwrap(), green_taylor(1.0).unwrap()] {
            for _ in 0..100 {
                let (t, x, y) = (rng.random_range(0.0..2.0), rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
                assert!(divergence_fd(&p, t, x, y, 1e-4).abs() <= 1e-6);
                let r = ns_residual(&p, t, x, y, 1e-3);
                let r2 = ns_residual(&p, t, x, y, 5e-4);
                let (a, b) = (r.0.abs().max(r.1.abs()), r2.0.abs().max(r2.1.abs()));
                assert!(a <= 2e-3, "{:?} {r:?}", p.kind);
                // a wrong forcing would leave an h-independent residual
                assert!(b <= 0.3 * a + 1e-9, "{:?} {a} {b}", p.kind);
            }
        }
    }

    #[test]
    fn advection_free_variants_satisfy_their_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [forced_flow(100.0).unwrap().without_advection(), green_taylor(10.0).unwrap().without_advection()] {
            for _ in 0..50 {
                let (t, x, y) = (rng.random_range(0.0..1.0), rng.random_range(0.01..0.99), rng.random_range(0.01..0.99));
                let r = stokes_residual(&p, t, x, y, 1e-3);
                let r2 = stokes_residual(&p, t, x, y, 5e-4);
                let (a, b) = (r.0.abs().max(r.1.abs()), r2.0.abs().max(r2.1.abs()));
                assert!(a <= 1e-4 && b <= 0.3 * a + 1e-9, "{:?} {a} {b}", p.kind);
            }
        }
    }

    fn stokes_residual(p: &ProblemSpec, t: f64, x: f64, y: f64, h: f64) -> (f64, f64) {
        let (u, v) = (p.exact.as_ref().unwrap().velocity)(t, x, y);
        let full = ns_residual(p, t, x, y, h);
        let vel = &p.exact.as_ref().unwrap().velocity;
        let dx = |k: usize, a: f64, b: f64| {
            let (p1, m1) = (vel(t, x + a, y + b), vel(t, x - a, y - b));
            if k == 0 { (p1.0 - m1.0) / (2.0 * h) } else { (p1.1 - m1.1) / (2.0 * h) }
        };
        (full.0 - u * dx(0, h, 0.0) - v * dx(0, 0.0, h), full.1 - u * dx(1, h, 0.0) - v * dx(1, 0.0, h))
    }

    #[test]
    fn wrong_forcing_is_detected() {
        let mut p = forced_flow(100.0).unwrap();
        p.forcing = Some(Arc::new(|t, x, y| forced::forcing(0.0, t, x, y)));
        let r = ns_residual(&p, 0.4, 0.3, 0.6, 1e-3);
        assert!(r.0.abs() + r.1.abs() > 1e-2);
    }

    #[test]
    fn boundary_derivatives_match_differences() {
        let h = 1e-6;
        for p in [forced_flow(100.0).unwrap(), green_taylor(10.0).unwrap()] {
            let f = &p.boundary.velocity;
            let dn = p.boundary.tangential_normal_derivative.as_ref().unwrap();
            let dt = p.boundary.velocity_dt.as_ref().unwrap();
            for (t, a) in [(0.2, 0.3), (1.1, 0.8)] {
                let uy = (f(t, a, 0.0 + h).0 - f(t, a, 0.0 - h).0) / (2.0 * h);
                let vx = (f(t, 1.0 + h, a).1 - f(t, 1.0 - h, a).1) / (2.0 * h);
                assert!((dn(t, a, 0.0).0 - uy).abs() < 1e-6);
                assert!((dn(t, 1.0, a).1 - vx).abs() < 1e-6);
                let ut = (f(t + h, a, 0.5).0 - f(t - h, a, 0.5).0) / (2.0 * h);
                assert!((dt(t, a, 0.5).0 - ut).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn green_taylor_values() {
        let p = green_taylor(100.0).unwrap();
        let ex = p.exact.as_ref().unwrap();
        assert!(((ex.pressure)(0.0, 0.0, 0.0) - 0.5).abs() < 1e-15);
        let (x, y) = (0.3, 0.2);
        let u0 = (p.initial)(0.0, x, y).0;
        assert!((u0 + (PI * x).sin() * (PI * y).cos()).abs() < 1e-15);
        let t = 0.7;
        let ratio = (ex.velocity)(t, x, y).0 / u0;
        assert!((ratio - (-2.0 * PI * PI * t / 100.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn zero_net_boundary_flux() {
        let spec = GridSpec::new(16, 100.0).unwrap();
        for p in [forced_flow(100.0).unwrap(), green_taylor(100.0).unwrap(), lid_driven_cavity(1000.0).unwrap()] {
            for t in [0.0, 0.4, 1.3] {
                assert!(p.boundary.boundary_flux(&spec, t).abs() < 1e-14);
            }
            if let Some(ex) = &p.exact {
                let (a, b) = ((p.initial)(0.0, 0.4, 0.6), (ex.velocity)(0.0, 0.4, 0.6));
                assert!((a.0 - b.0).abs() <= 1e-14 && (a.1 - b.1).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn cavity_lid_and_rest() {
        let p = lid_driven_cavity(1000.0).unwrap();
        assert_eq!((p.boundary.velocity)(0.0, 0.0, 1.0), (1.0, 0.0));
        assert_eq!((p.boundary.velocity)(0.0, 1.0, 1.0), (1.0, 0.0));
        assert_eq!((p.boundary.velocity)(0.0, 0.0, 0.5), (0.0, 0.0));
        assert_eq!((p.initial)(0.0, 0.5, 0.5), (0.0, 0.0));
        assert!(p.exact.is_none() && p.forcing.is_none());
        assert!(lid_driven_cavity(0.0).is_err());
    }
}
