use super::tableau::Rock2Tableau;
use super::{check_finite, weighted_error, HookMode, StageBuffers, StageHook, StepOutput, Tolerance};
use crate::error::{Error, Result};

/// One ROCK2 step: `s - 2` orthogonal-polynomial stages followed by the
/// two-stage finishing procedure. Hooks fire on `g_1..g_s` (never on `g*_s`).
///
/// The error estimate is `dt sigma (1 - tau/sigma^2) (F(g_{s-1}) - F(g_{s-2}))`,
/// passed through [`StageHook::project_error`] when a projecting hook is active.
pub fn rock2_step<F, H>(
    tab: &Rock2Tableau,
    f: &mut F,
    y0: &[f64],
    t: f64,
    dt: f64,
    hook: &mut H,
    tol: Option<Tolerance>,
) -> Result<StepOutput>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    H: StageHook,
{
    let s = tab.s;
    if s < 3 {
        return Err(Error::InvalidArgument(format!("ROCK2 needs s >= 3, got {s}")));
    }
    let mode = hook.mode();
    let bufs = StageBuffers { mode };
    let n = y0.len();
    let mut fbuf = vec![0.0; n];
    f(t, y0, &mut fbuf)?;
    let mut evals = 1;

    let mut gm2 = y0.to_vec();
    let mut gm1: Vec<f64> = y0.iter().zip(&fbuf).map(|(y, k)| y + dt * tab.mu[0] * k).collect();
    check_finite(&gm1, 1)?;
    let mut seen = bufs.project(hook, 1, tab.c[1], t + tab.c[1] * dt, dt, &mut gm1)?;
    for j in 2..=s - 2 {
        f(t + tab.c[j - 1] * dt, seen.as_deref().unwrap_or(&gm1), &mut fbuf)?;
        evals += 1;
        let (mu, nu, ka) = (tab.mu[j - 1], tab.nu[j - 1], tab.kappa[j - 1]);
        let mut g: Vec<f64> = (0..n).map(|k| dt * mu * fbuf[k] - nu * gm1[k] - ka * gm2[k]).collect();
        check_finite(&g, j)?;
        seen = bufs.project(hook, j, tab.c[j], t + tab.c[j] * dt, dt, &mut g)?;
        gm2 = std::mem::replace(&mut gm1, g);
    }
    // finishing procedure
    let mut f_sm2 = vec![0.0; n];
    f(t + tab.c[s - 2] * dt, seen.as_deref().unwrap_or(&gm1), &mut f_sm2)?;
    evals += 1;
    let sig = tab.sigma;
    let mut g_sm1: Vec<f64> = gm1.iter().zip(&f_sm2).map(|(g, k)| g + dt * sig * k).collect();
    check_finite(&g_sm1, s - 1)?;
    let seen_sm1 = bufs.project(hook, s - 1, tab.c[s - 1], t + tab.c[s - 1] * dt, dt, &mut g_sm1)?;
    let mut f_sm1 = vec![0.0; n];
    f(t + tab.c[s - 1] * dt, seen_sm1.as_deref().unwrap_or(&g_sm1), &mut f_sm1)?;
    evals += 1;
    let gap = tab.finishing_gap();
    let mut e: Vec<f64> = (0..n).map(|k| dt * gap * (f_sm1[k] - f_sm2[k])).collect();
    let mut g_s: Vec<f64> = (0..n).map(|k| g_sm1[k] + dt * sig * f_sm1[k] - e[k]).collect();
    check_finite(&g_s, s)?;
    let seen_s = bufs.project(hook, s, tab.c[s], t + dt, dt, &mut g_s)?;
    let y1 = seen_s.unwrap_or(g_s);

    let err = match tol {
        Some(tol) => {
            if mode != HookMode::None {
                hook.project_error(&mut e)?;
            }
            weighted_error(&e, y0, &y1, tol)?
        }
        None => 0.0,
    };
    Ok(StepOutput { y: y1, err, f_evals: evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::tableau::rock2_tableau;
    use crate::integrators::test_support::*;
    use crate::integrators::NoHook;

    const TOL: Option<Tolerance> = Some(Tolerance { atol: 1e-6, rtol: 1e-6 });

    fn zero(_: f64, _: &[f64], o: &mut [f64]) -> Result<()> {
        o.fill(0.0);
        Ok(())
    }

    #[test]
    fn zero_and_constant_rhs() {
        let tb = rock2_tableau(7).unwrap();
        let out = rock2_step(&tb, &mut zero, &[2.0, 3.0], 0.0, 0.5, &mut NoHook, TOL).unwrap();
        assert!((out.y[0] - 2.0).abs() < 1e-14 && (out.y[1] - 3.0).abs() < 1e-14);
        assert_eq!(out.err, 0.0);
        let mut one = |_: f64, _: &[f64], o: &mut [f64]| {
            o.fill(1.0);
            Ok(())
        };
        for s in [3, 4, 10, 52, 200] {
            let tb = rock2_tableau(s).unwrap();
            let out = rock2_step(&tb, &mut one, &[0.0], 0.0, 0.25, &mut NoHook, TOL).unwrap();
            assert!((out.y[0] - 0.25).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn linear_amplification_matches_polynomial() {
        for s in [3, 5, 13] {
            let tb = rock2_tableau(s).unwrap();
            let mut f = |_: f64, y: &[f64], o: &mut [f64]| {
                o[0] = -y[0];
                Ok(())
            };
            let dt = 0.4 * (s * s) as f64;
            let out = rock2_step(&tb, &mut f, &[1.0], 0.0, dt, &mut NoHook, None).unwrap();
            assert!((out.y[0] - tb.stability_polynomial(-dt)).abs() < 1e-12);
        }
    }

    #[test]
    fn stable_up_to_nominal_bound() {
        for s in [5, 13] {
            let tb = rock2_tableau(s).unwrap();
            let lim = 0.95 * 0.811 * (s * s) as f64;
            for k in 1..=400 {
                let z = -lim * k as f64 / 400.0;
                assert!(tb.stability_polynomial(z).abs() <= 1.0 + 1e-12, "s={s} z={z}");
            }
        }
    }

    #[test]
    fn stability_bound_sharpness() {
        for s in [5, 10, 20] {
            let tb = rock2_tableau(s).unwrap();
            let l = 0.811 * (s * s) as f64;
            let n = 4000;
            let first_bad = (1..=n)
                .map(|k| -1.2 * l * k as f64 / n as f64)
                .find(|&z| tb.stability_polynomial(z).abs() > 1.0 + 1e-12)
                .unwrap();
            let r = -first_bad / l;
            assert!(r > 0.95 && r < 1.05, "s={s}: {r}");
        }
    }

    #[test]
    fn second_order_convergence() {
        let exact = |t: f64| 1.5 * (-t).exp() + 0.5 * (t.sin() - t.cos());
        let tb = rock2_tableau(5).unwrap();
        let mut errs = Vec::new();
        for dt in [1e-1, 1e-2, 1e-3] {
            let mut f = |t: f64, y: &[f64], o: &mut [f64]| {
                o[0] = -y[0] + t.sin();
                Ok(())
            };
            let steps = (1.0 / dt as f64).round() as usize;
            let mut y = vec![1.0];
            for k in 0..steps {
                y = rock2_step(&tb, &mut f, &y, k as f64 * dt, dt, &mut NoHook, None).unwrap().y;
            }
            errs.push((y[0] - exact(1.0)).abs());
        }
        for w in errs.windows(2) {
            assert!(((w[0] / w[1]).log10() - 2.0).abs() < 0.1, "{errs:?}");
        }
    }

    #[test]
    fn butcher_reconstruction_matches_recursion() {
        let a = vec![vec![-3.0, 1.0, 0.0], vec![0.5, -2.0, 0.3], vec![0.0, 0.2, -1.0]];
        let apply = |v: &[f64]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|k| a[i][k] * v[k]).sum()).collect() };
        let y0 = vec![1.0, -0.5, 0.25];
        let dt = 0.3;
        for s in [3, 5, 10] {
            let tb = rock2_tableau(s).unwrap();
            let bt = tb.butcher();
            let mut rec = Recorder { mode: HookMode::None, seen: vec![] };
            let mut f = linear_rhs(a.clone(), |_| vec![0.0; 3]);
            let got = rock2_step(&tb, &mut f, &y0, 0.0, dt, &mut rec, None).unwrap().y;
            let mut fs = vec![apply(&y0)];
            for i in 1..s {
                let u: Vec<f64> = (0..3).map(|k| y0[k] + dt * (0..i).map(|j| bt.a[i][j] * fs[j][k]).sum::<f64>()).collect();
                fs.push(apply(&u));
            }
            for k in 0..3 {
                let want = y0[k] + dt * (0..s).map(|j| bt.b[j] * fs[j][k]).sum::<f64>();
                assert!((got[k] - want).abs() < 1e-12, "s={s}");
            }
        }
    }

    #[test]
    fn dual_buffer_matches_projected_butcher_form() {
        let a = vec![vec![-3.0, 1.0, 0.0], vec![0.5, -2.0, 0.3], vec![0.0, 0.2, -1.0]];
        let apply = |v: &[f64]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|k| a[i][k] * v[k]).sum()).collect() };
        let norm = 3.0f64;
        let dir = vec![1.0 / norm, 2.0 / norm, -2.0 / norm];
        let proj = |v: &mut Vec<f64>| {
            let d: f64 = v.iter().zip(&dir).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(&dir).for_each(|(x, y)| *x -= d * y);
        };
        let mut y0 = vec![1.0, 0.5, -0.25];
        proj(&mut y0);
        let dt = 0.2;
        for s in [3, 6] {
            let tb = rock2_tableau(s).unwrap();
            let bt = tb.butcher();
            let mut hook = Deflate { mode: HookMode::ProjectDualBuffer, dir: dir.clone() };
            let mut f = linear_rhs(a.clone(), |_| vec![0.0; 3]);
            let got = rock2_step(&tb, &mut f, &y0, 0.0, dt, &mut hook, None).unwrap().y;
            let mut fs = vec![apply(&y0)];
            for i in 1..s {
                let mut u: Vec<f64> = (0..3).map(|k| y0[k] + dt * (0..i).map(|j| bt.a[i][j] * fs[j][k]).sum::<f64>()).collect();
                proj(&mut u);
                fs.push(apply(&u));
            }
            let mut want: Vec<f64> = (0..3).map(|k| y0[k] + dt * (0..s).map(|j| bt.b[j] * fs[j][k]).sum::<f64>()).collect();
            proj(&mut want);
            for k in 0..3 {
                assert!((got[k] - want[k]).abs() < 1e-11, "s={s}");
            }
        }
    }

    #[test]
    fn hook_neutrality() {
        let a = vec![vec![-3.0, 1.0], vec![0.5, -2.0]];
        let tb = rock2_tableau(6).unwrap();
        let mut f = linear_rhs(a.clone(), |t| vec![t.sin(), 0.0]);
        let plain = rock2_step(&tb, &mut f, &[1.0, 2.0], 0.1, 0.2, &mut NoHook, None).unwrap();
        for mode in [HookMode::None, HookMode::ProjectState, HookMode::ProjectDualBuffer] {
            let mut rec = Recorder { mode, seen: vec![] };
            let out = rock2_step(&tb, &mut f, &[1.0, 2.0], 0.1, 0.2, &mut rec, None).unwrap();
            assert_eq!(out.y, plain.y);
            if mode != HookMode::None {
                let stages: Vec<usize> = rec.seen.iter().map(|s| s.0).collect();
                assert_eq!(stages, (1..=6).collect::<Vec<_>>());
                assert!((rec.seen[5].2 - 0.3).abs() < 1e-14);
            }
        }
    }
}
