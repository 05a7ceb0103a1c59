//! MAC-grid operators: divergence, face gradient, momentum right-hand side.
//!
//! All operators act on the flat state layout of [`VelocityField`] so that
//! integrators can call them on raw stage buffers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{BoundaryData, CellField, GridSpec, PointFn, VelocityField, WallValues};

/// How tangential wall values entering the wall-normal stencils are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentialMode {
    /// Sampled from the Dirichlet boundary velocity.
    #[default]
    Dirichlet,
    /// Reconstructed from the adjacent unknown and an exact normal derivative.
    ExactNeumann,
}

#[derive(Clone)]
pub struct MomentumRhsConfig {
    pub include_pressure: bool,
    pub include_advection: bool,
    pub include_diffusion: bool,
    pub forcing: Option<PointFn>,
    pub tangential: TangentialMode,
}

impl Default for MomentumRhsConfig {
    fn default() -> Self {
        Self {
            include_pressure: false,
            include_advection: true,
            include_diffusion: true,
            forcing: None,
            tangential: TangentialMode::Dirichlet,
        }
    }
}

impl std::fmt::Debug for MomentumRhsConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MomentumRhsConfig")
            .field("include_pressure", &self.include_pressure)
            .field("include_advection", &self.include_advection)
            .field("include_diffusion", &self.include_diffusion)
            .field("forcing", &self.forcing.is_some())
            .field("tangential", &self.tangential)
            .finish()
    }
}

/// One-sided first derivative at `x` from `f(x - h/2)` (wall), `f(x)`, `f(x + h)`.
#[inline]
pub fn fd1(wall: f64, f0: f64, f1: f64, h: f64) -> f64 {
    (f1 + 3.0 * f0 - 4.0 * wall) / (3.0 * h)
}

/// One-sided second derivative at `x` from `f(x - h/2)`, `f(x)`, `f(x + h)`, `f(x + 2h)`.
#[inline]
pub fn fd2(wall: f64, f0: f64, f1: f64, f2: f64, h: f64) -> f64 {
    (16.0 * wall - 25.0 * f0 + 10.0 * f1 - f2) / (5.0 * h * h)
}

/// Divergence at cell centres with boundary normal velocities from `walls`.
pub fn divergence_with_walls(spec: &GridSpec, state: &[f64], walls: &WallValues) -> CellField {
    let n = spec.n;
    let nu = spec.nu_len();
    let (us, vs) = state.split_at(nu);
    let inv = 1.0 / spec.dx;
    let mut out = CellField::zeros(n);
    out.data.par_chunks_mut(n).enumerate().for_each(|(jb, row)| {
        let b = jb + 1;
        for (ia, o) in row.iter_mut().enumerate() {
            let a = ia + 1;
            let ue = if a == n { walls.u_right[b - 1] } else { us[(b - 1) * (n - 1) + a - 1] };
            let uw = if a == 1 { walls.u_left[b - 1] } else { us[(b - 1) * (n - 1) + a - 2] };
            let vn = if b == n { walls.v_top[a - 1] } else { vs[(b - 1) * n + a - 1] };
            let vsouth = if b == 1 { walls.v_bottom[a - 1] } else { vs[(b - 2) * n + a - 1] };
            *o = (ue - uw + vn - vsouth) * inv;
        }
    });
    out
}

/// Divergence with boundary data evaluated at time `t`.
pub fn divergence(vel: &VelocityField, bc: &BoundaryData, spec: &GridSpec, t: f64) -> CellField {
    let walls = WallValues::sample(&bc.velocity, spec, t);
    divergence_with_walls(spec, &vel.data, &walls)
}

/// Gradient of a cell field onto interior faces; boundary faces are not stored.
pub fn gradient_to_faces(phi: &CellField, spec: &GridSpec) -> VelocityField {
    let mut out = VelocityField::zeros(spec);
    add_gradient(spec, &phi.data, 1.0, &mut out.data);
    out
}

/// `out += scale * grad(phi)` on the flat state layout.
pub fn add_gradient(spec: &GridSpec, phi: &[f64], scale: f64, out: &mut [f64]) {
    let n = spec.n;
    let nu = spec.nu_len();
    let f = scale / spec.dx;
    let (uo, vo) = out.split_at_mut(nu);
    uo.par_chunks_mut(n - 1).enumerate().for_each(|(jb, row)| {
        let base = jb * n;
        for (ib, o) in row.iter_mut().enumerate() {
            *o += f * (phi[base + ib + 1] - phi[base + ib]);
        }
    });
    vo.par_chunks_mut(n).enumerate().for_each(|(jb, row)| {
        let base = jb * n;
        for (ib, o) in row.iter_mut().enumerate() {
            *o += f * (phi[base + n + ib] - phi[base + ib]);
        }
    });
}

/// Wall values for the momentum stencils, with tangential entries replaced
/// by a derivative-based reconstruction in [`TangentialMode::ExactNeumann`].
pub fn momentum_walls(
    spec: &GridSpec,
    state: &[f64],
    bc: &BoundaryData,
    t: f64,
    mode: TangentialMode,
) -> Result<WallValues> {
    let mut w = WallValues::sample(&bc.velocity, spec, t);
    if mode == TangentialMode::ExactNeumann {
        let d = bc.tangential_normal_derivative.as_ref().ok_or(Error::MissingExactDerivative)?;
        let n = spec.n;
        let nu = spec.nu_len();
        let h = 0.5 * spec.dx;
        for k in 1..n {
            let p = k as f64 * spec.dx;
            w.ut_bottom[k - 1] = state[k - 1] - h * d(t, p, 0.0).0;
            w.ut_top[k - 1] = state[(n - 1) * (n - 1) + k - 1] + h * d(t, p, 1.0).0;
            w.vt_left[k - 1] = state[nu + (k - 1) * n] - h * d(t, 0.0, p).1;
            w.vt_right[k - 1] = state[nu + (k - 1) * n + n - 1] + h * d(t, 1.0, p).1;
        }
    }
    Ok(w)
}

/// Momentum right-hand side on raw buffers with precomputed wall values.
pub fn momentum_rhs_into(
    spec: &GridSpec,
    state: &[f64],
    p: Option<&[f64]>,
    walls: &WallValues,
    t: f64,
    cfg: &MomentumRhsConfig,
    out: &mut [f64],
) -> Result<()> {
    if state.len() != spec.state_len() {
        return Err(Error::LengthMismatch { expected: spec.state_len(), got: state.len() });
    }
    if out.len() != spec.state_len() {
        return Err(Error::LengthMismatch { expected: spec.state_len(), got: out.len() });
    }
    let p = if cfg.include_pressure {
        let p = p.ok_or(Error::PressureRequired)?;
        if p.len() != spec.cells() {
            return Err(Error::LengthMismatch { expected: spec.cells(), got: p.len() });
        }
        Some(p)
    } else {
        None
    };
    let n = spec.n;
    let m = n - 1;
    let nu_len = spec.nu_len();
    let dx = spec.dx;
    let inv_dx2 = 1.0 / (dx * dx);
    let nu = spec.nu;
    let (us, vs) = state.split_at(nu_len);
    let uat = |i: usize, j: usize| -> f64 {
        if i == 0 {
            walls.u_left[j - 1]
        } else if i == n {
            walls.u_right[j - 1]
        } else {
            us[(j - 1) * m + i - 1]
        }
    };
    let vat = |i: usize, j: usize| -> f64 {
        if j == 0 {
            walls.v_bottom[i - 1]
        } else if j == n {
            walls.v_top[i - 1]
        } else {
            vs[(j - 1) * n + i - 1]
        }
    };
    let (uo, vo) = out.split_at_mut(nu_len);

    uo.par_chunks_mut(m).enumerate().for_each(|(jb, row)| {
        let j = jb + 1;
        let y = (j as f64 - 0.5) * dx;
        for (ib, o) in row.iter_mut().enumerate() {
            let i = ib + 1;
            let u = us[jb * m + ib];
            let (ue, uw) = (uat(i + 1, j), uat(i - 1, j));
            let mut r = 0.0;
            if cfg.include_diffusion {
                let dxx = (ue - 2.0 * u + uw) * inv_dx2;
                let dyy = if j == 1 {
                    fd2(walls.ut_bottom[i - 1], u, uat(i, 2), uat(i, 3), dx)
                } else if j == n {
                    fd2(walls.ut_top[i - 1], u, uat(i, n - 1), uat(i, n - 2), dx)
                } else {
                    (uat(i, j + 1) - 2.0 * u + uat(i, j - 1)) * inv_dx2
                };
                r += nu * (dxx + dyy);
            }
            if cfg.include_advection {
                let dudx = (ue - uw) / (2.0 * dx);
                let dudy = if j == 1 {
                    fd1(walls.ut_bottom[i - 1], u, uat(i, 2), dx)
                } else if j == n {
                    -fd1(walls.ut_top[i - 1], u, uat(i, n - 1), dx)
                } else {
                    (uat(i, j + 1) - uat(i, j - 1)) / (2.0 * dx)
                };
                let vbar = 0.25 * (vat(i, j - 1) + vat(i + 1, j - 1) + vat(i, j) + vat(i + 1, j));
                r -= u * dudx + vbar * dudy;
            }
            if let Some(p) = p {
                r -= (p[jb * n + i] - p[jb * n + i - 1]) / dx;
            }
            if let Some(f) = &cfg.forcing {
                r += f(t, i as f64 * dx, y).0;
            }
            *o = r;
        }
    });

    vo.par_chunks_mut(n).enumerate().for_each(|(jb, row)| {
        let j = jb + 1;
        let y = j as f64 * dx;
        for (ib, o) in row.iter_mut().enumerate() {
            let i = ib + 1;
            let v = vs[jb * n + ib];
            let (vn, vsouth) = (vat(i, j + 1), vat(i, j - 1));
            let mut r = 0.0;
            if cfg.include_diffusion {
                let dyy = (vn - 2.0 * v + vsouth) * inv_dx2;
                let dxx = if i == 1 {
                    fd2(walls.vt_left[j - 1], v, vat(2, j), vat(3, j), dx)
                } else if i == n {
                    fd2(walls.vt_right[j - 1], v, vat(n - 1, j), vat(n - 2, j), dx)
                } else {
                    (vat(i + 1, j) - 2.0 * v + vat(i - 1, j)) * inv_dx2
                };
                r += nu * (dxx + dyy);
            }
            if cfg.include_advection {
                let dvdy = (vn - vsouth) / (2.0 * dx);
                let dvdx = if i == 1 {
                    fd1(walls.vt_left[j - 1], v, vat(2, j), dx)
                } else if i == n {
                    -fd1(walls.vt_right[j - 1], v, vat(n - 1, j), dx)
                } else {
                    (vat(i + 1, j) - vat(i - 1, j)) / (2.0 * dx)
                };
                let ubar = 0.25 * (uat(i - 1, j) + uat(i, j) + uat(i - 1, j + 1) + uat(i, j + 1));
                r -= ubar * dvdx + v * dvdy;
            }
            if let Some(p) = p {
                r -= (p[(jb + 1) * n + ib] - p[jb * n + ib]) / dx;
            }
            if let Some(f) = &cfg.forcing {
                r += f(t, (i as f64 - 0.5) * dx, y).1;
            }
            *o = r;
        }
    });
    Ok(())
}

/// `-(u.grad)u - grad p + nu lap u + f`, each term switchable through `cfg`.
pub fn momentum_rhs(
    vel: &VelocityField,
    p: Option<&CellField>,
    bc: &BoundaryData,
    spec: &GridSpec,
    t: f64,
    cfg: &MomentumRhsConfig,
) -> Result<VelocityField> {
    let walls = momentum_walls(spec, &vel.data, bc, t, cfg.tangential)?;
    let mut out = VelocityField::zeros(spec);
    momentum_rhs_into(spec, &vel.data, p.map(|c| c.data.as_slice()), &walls, t, cfg, &mut out.data)?;
    Ok(out)
}

/// Gershgorin bound on the spectral radius of the discrete diffusion operator.
pub fn spectral_radius_estimate(spec: &GridSpec) -> f64 {
    let centered: f64 = 1.0 + 2.0 + 1.0;
    let one_sided = (16.0 + 25.0 + 10.0 + 1.0) / 5.0;
    let interior = 2.0 * centered;
    let wall = centered + one_sided;
    let row = if spec.n >= 4 { interior.max(wall) } else { interior };
    spec.nu * row / (spec.dx * spec.dx)
}
