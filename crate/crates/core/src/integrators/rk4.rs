//! Classical RK4, used for reference solutions.

use super::{check_finite, HookMode, StageHook};
use crate::error::Result;

const NODES: [f64; 4] = [0.0, 0.5, 0.5, 1.0];

/// Increment `dt/6 (k1 + 2k2 + 2k3 + k4)`; stages are projected in dual-buffer
/// fashion when the hook asks for any projection.
fn increment<F, H>(f: &mut F, y0: &[f64], t: f64, dt: f64, hook: &mut H) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    H: StageHook,
{
    let n = y0.len();
    let project = hook.mode() != HookMode::None;
    let mut ks = vec![vec![0.0; n]; 4];
    f(t, y0, &mut ks[0])?;
    for i in 1..4 {
        let a = NODES[i];
        let mut u: Vec<f64> = (0..n).map(|k| y0[k] + a * dt * ks[i - 1][k]).collect();
        check_finite(&u, i)?;
        if project {
            hook.apply(i, a, t + a * dt, dt, &mut u)?;
        }
        f(t + a * dt, &u, &mut ks[i])?;
    }
    Ok((0..n).map(|k| dt / 6.0 * (ks[0][k] + 2.0 * ks[1][k] + 2.0 * ks[2][k] + ks[3][k])).collect())
}

pub fn rk4_step<F, H>(f: &mut F, y0: &[f64], t: f64, dt: f64, hook: &mut H) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    H: StageHook,
{
    let inc = increment(f, y0, t, dt, hook)?;
    let mut y: Vec<f64> = y0.iter().zip(&inc).map(|(a, b)| a + b).collect();
    check_finite(&y, 4)?;
    if hook.mode() != HookMode::None {
        hook.apply(4, 1.0, t + dt, dt, &mut y)?;
    }
    Ok(y)
}

/// RK4 step accumulating into `y` with Kahan compensation carried in `comp`.
pub fn rk4_step_compensated<F, H>(f: &mut F, y: &mut [f64], comp: &mut [f64], t: f64, dt: f64, hook: &mut H) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    H: StageHook,
{
    let inc = increment(f, y, t, dt, hook)?;
    for k in 0..y.len() {
        let d = inc[k] - comp[k];
        let sum = y[k] + d;
        comp[k] = (sum - y[k]) - d;
        y[k] = sum;
    }
    check_finite(y, 4)?;
    if hook.mode() != HookMode::None {
        // the projection correction bypasses the compensated sum
        hook.apply(4, 1.0, t + dt, dt, y)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::NoHook;

    #[test]
    fn constant_rhs() {
        let mut f = |_: f64, _: &[f64], o: &mut [f64]| {
            o.fill(1.0);
            Ok(())
        };
        assert_eq!(rk4_step(&mut f, &[0.5], 0.0, 0.25, &mut NoHook).unwrap(), vec![0.75]);
    }

    #[test]
    fn exponential_partial_sum() {
        let mut f = |_: f64, y: &[f64], o: &mut [f64]| {
            o[0] = y[0];
            Ok(())
        };
        let y = rk4_step(&mut f, &[1.0], 0.0, 0.1, &mut NoHook).unwrap();
        let h: f64 = 0.1;
        let want = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((y[0] - want).abs() < 1e-15);
        assert!((y[0] - 1.10517083).abs() < 1e-8);
    }

    #[test]
    fn fourth_order_slope() {
        let mut errs = Vec::new();
        for dt in [0.1, 0.05, 0.025] {
            let mut f = |_: f64, y: &[f64], o: &mut [f64]| {
                o[0] = -y[0];
                Ok(())
            };
            let steps = (1.0 / dt as f64).round() as usize;
            let mut y = vec![1.0];
            for k in 0..steps {
                y = rk4_step(&mut f, &y, k as f64 * dt, dt, &mut NoHook).unwrap();
            }
            errs.push((y[0] - (-1.0f64).exp()).abs());
        }
        for w in errs.windows(2) {
            assert!(((w[0] / w[1]).log2() - 4.0).abs() < 0.1, "{errs:?}");
        }
    }

    #[test]
    fn compensated_matches_plain_closely() {
        let mut f = |t: f64, y: &[f64], o: &mut [f64]| {
            o[0] = -y[0] + t.sin();
            Ok(())
        };
        let dt = 1e-3;
        let mut a = vec![1.0];
        let mut b = vec![1.0];
        let mut comp = vec![0.0];
        for k in 0..1000 {
            let t = k as f64 * dt;
            a = rk4_step(&mut f, &a, t, dt, &mut NoHook).unwrap();
            rk4_step_compensated(&mut f, &mut b, &mut comp, t, dt, &mut NoHook).unwrap();
        }
        let exact = 1.5 * (-1.0f64).exp() + 0.5 * (1.0f64.sin() - 1.0f64.cos());
        assert!((b[0] - exact).abs() <= (a[0] - exact).abs() + 1e-15);
        assert!((a[0] - b[0]).abs() < 1e-13);
    }
}
