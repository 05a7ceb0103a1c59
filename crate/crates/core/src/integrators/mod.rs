//! Stabilized explicit Runge–Kutta integrators with per-stage hooks.
//!
//! Right-hand sides are `FnMut(t, y, out) -> Result<()>` closures writing
//! `F(t, y)` into `out`. Hooks let the coupling layer project stages onto
//! divergence-free fields in one of two ways (see [`HookMode`]).

pub mod controller;
pub mod pirock;
pub mod rk4;
pub mod rkc;
pub mod rock2;
pub mod tableau;

pub use controller::StepController;
pub use pirock::pirock_step;
pub use rk4::{rk4_step, rk4_step_compensated};
pub use rkc::rkc_step;
pub use rock2::rock2_step;
pub use tableau::{
    nodes_c, rkc_tableau, rock2_tableau, select_stages, stability_poly_eval, Butcher, Method, RkcTableau,
    Rock2Table, Rock2Tableau, DEFAULT_EPS, STAGE_CAP,
};

use crate::error::{Error, Result};
use crate::grid::weighted_rms_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookMode {
    /// Stages are used as computed.
    None,
    /// Each stage is projected and the recursion continues from the projected value.
    ProjectState,
    /// The recursion runs on unprojected buffers; `F` sees the projected stages.
    ProjectDualBuffer,
}

/// Per-stage callback. `stage` is the recursion index `j` of `g_j` (1-based),
/// `c` its node and `t` the stage time; `u` is projected in place.
pub trait StageHook {
    fn mode(&self) -> HookMode;
    fn apply(&mut self, stage: usize, c: f64, t: f64, dt: f64, u: &mut [f64]) -> Result<()>;
    /// Maps an error vector onto the constrained space (identity by default).
    fn project_error(&mut self, _e: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

/// Hook that never fires.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHook;

impl StageHook for NoHook {
    fn mode(&self) -> HookMode {
        HookMode::None
    }
    fn apply(&mut self, _: usize, _: f64, _: f64, _: f64, _: &mut [f64]) -> Result<()> {
        Ok(())
    }
}

/// Error-estimate tolerances; `None` skips the estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub y: Vec<f64>,
    /// Weighted RMS error estimate, 0 when no tolerance was given.
    pub err: f64,
    /// Right-hand side evaluations spent.
    pub f_evals: usize,
}

pub(crate) fn check_finite(y: &[f64], stage: usize) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { stage })
    }
}

pub(crate) fn weighted_error(e: &[f64], y0: &[f64], y1: &[f64], tol: Tolerance) -> Result<f64> {
    let scale: Vec<f64> = y0.iter().zip(y1).map(|(a, b)| a.abs().max(b.abs())).collect();
    weighted_rms_norm(e, &scale, tol.atol, tol.rtol)
}

/// Keeps a stage buffer and, in dual-buffer mode, a projected copy.
pub(crate) struct StageBuffers {
    pub mode: HookMode,
}

impl StageBuffers {
    /// Projects `g` according to the mode; returns the vector `F` should see.
    pub fn project<H: StageHook>(
        &self,
        hook: &mut H,
        stage: usize,
        c: f64,
        t: f64,
        dt: f64,
        g: &mut Vec<f64>,
    ) -> Result<Option<Vec<f64>>> {
        match self.mode {
            HookMode::None => Ok(None),
            HookMode::ProjectState => {
                hook.apply(stage, c, t, dt, g)?;
                check_finite(g, stage)?;
                Ok(None)
            }
            HookMode::ProjectDualBuffer => {
                let mut u = g.clone();
                hook.apply(stage, c, t, dt, &mut u)?;
                check_finite(&u, stage)?;
                Ok(Some(u))
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Records every stage it sees and leaves it unchanged.
    pub struct Recorder {
        pub mode: HookMode,
        pub seen: Vec<(usize, f64, f64)>,
    }

    impl StageHook for Recorder {
        fn mode(&self) -> HookMode {
            self.mode
        }
        fn apply(&mut self, stage: usize, c: f64, t: f64, _dt: f64, _u: &mut [f64]) -> Result<()> {
            self.seen.push((stage, c, t));
            Ok(())
        }
    }

    /// Linear projection onto the orthogonal complement of a fixed unit vector.
    pub struct Deflate {
        pub mode: HookMode,
        pub dir: Vec<f64>,
    }

    impl StageHook for Deflate {
        fn mode(&self) -> HookMode {
            self.mode
        }
        fn apply(&mut self, _: usize, _: f64, _: f64, _: f64, u: &mut [f64]) -> Result<()> {
            let d: f64 = u.iter().zip(&self.dir).map(|(a, b)| a * b).sum();
            u.iter_mut().zip(&self.dir).for_each(|(a, b)| *a -= d * b);
            Ok(())
        }
        fn project_error(&mut self, e: &mut [f64]) -> Result<()> {
            self.apply(0, 0.0, 0.0, 0.0, e)
        }
    }

    /// `y' = A y + g(t)` with a dense matrix.
    pub fn linear_rhs(a: Vec<Vec<f64>>, g: impl Fn(f64) -> Vec<f64>) -> impl FnMut(f64, &[f64], &mut [f64]) -> Result<()> {
        move |t, y, out| {
            let gt = g(t);
            for (i, o) in out.iter_mut().enumerate() {
                *o = a[i].iter().zip(y).map(|(x, z)| x * z).sum::<f64>() + gt[i];
            }
            Ok(())
        }
    }
}
