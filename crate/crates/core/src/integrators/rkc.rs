use super::tableau::RkcTableau;
use super::{check_finite, weighted_error, HookMode, StageBuffers, StageHook, StepOutput, Tolerance};
use crate::error::{Error, Result};

/// One RKC step.
///
/// With a tolerance the embedded estimate
/// `(12 (y_n - y_{n+1}) + 6 dt (f_n + f_{n+1})) / 15` is returned; it is only
/// valid without projection, so projecting hooks combined with a tolerance
/// are refused.
pub fn rkc_step<F, H>(
    tab: &RkcTableau,
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
    let mode = hook.mode();
    if tol.is_some() && mode != HookMode::None {
        return Err(Error::Config("RKC error estimate is invalid with projected stages".into()));
    }
    let n = y0.len();
    let s = tab.s;
    let bufs = StageBuffers { mode };
    let mut f0 = vec![0.0; n];
    f(t, y0, &mut f0)?;
    let mut evals = 1;

    // g_{j-2}, g_{j-1} (unprojected in dual mode) and the vector F sees for g_{j-1}
    let mut gm2 = y0.to_vec();
    let mut gm1: Vec<f64> = y0.iter().zip(&f0).map(|(y, k)| y + tab.kappa[1] * dt * k).collect();
    check_finite(&gm1, 1)?;
    let mut seen = bufs.project(hook, 1, tab.c[1], t + tab.c[1] * dt, dt, &mut gm1)?;
    let mut fj = vec![0.0; n];
    for j in 2..=s {
        let tj = t + tab.c[j - 1] * dt;
        f(tj, seen.as_deref().unwrap_or(&gm1), &mut fj)?;
        evals += 1;
        let (mu, nu, kap, am1) = (tab.mu[j], tab.nu[j], tab.kappa[j], tab.a[j - 1]);
        let mut g = vec![0.0; n];
        for k in 0..n {
            let y = y0[k];
            g[k] = y + mu * (gm1[k] - y) + nu * (gm2[k] - y) + kap * dt * (fj[k] - am1 * f0[k]);
        }
        check_finite(&g, j)?;
        seen = bufs.project(hook, j, tab.c[j], t + tab.c[j] * dt, dt, &mut g)?;
        gm2 = std::mem::replace(&mut gm1, g);
    }
    let y1 = seen.unwrap_or(gm1);

    let err = match tol {
        Some(tol) => {
            let mut f1 = vec![0.0; n];
            f(t + dt, &y1, &mut f1)?;
            evals += 1;
            let e: Vec<f64> = (0..n)
                .map(|k| (12.0 * (y0[k] - y1[k]) + 6.0 * dt * (f0[k] + f1[k])) / 15.0)
                .collect();
            weighted_error(&e, y0, &y1, tol)?
        }
        None => 0.0,
    };
    Ok(StepOutput { y: y1, err, f_evals: evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::test_support::*;
    use crate::integrators::NoHook;

    fn tab(s: usize) -> RkcTableau {
        RkcTableau::new(s, 0.15).unwrap()
    }

    const TOL: Option<Tolerance> = Some(Tolerance { atol: 1e-6, rtol: 1e-6 });

    #[test]
    fn zero_rhs_is_identity() {
        let mut f = |_: f64, _: &[f64], o: &mut [f64]| {
            o.fill(0.0);
            Ok(())
        };
        let out = rkc_step(&tab(5), &mut f, &[1.0, -2.0], 0.0, 0.1, &mut NoHook, TOL).unwrap();
        assert_eq!(out.y, vec![1.0, -2.0]);
        assert_eq!(out.err, 0.0);
    }

    #[test]
    fn constant_rhs_exact_with_zero_error() {
        let mut f = |_: f64, _: &[f64], o: &mut [f64]| {
            o.fill(1.0);
            Ok(())
        };
        for s in [2, 5, 17] {
            let out = rkc_step(&tab(s), &mut f, &[0.5], 0.0, 0.3, &mut NoHook, TOL).unwrap();
            assert!((out.y[0] - 0.8).abs() < 1e-13);
            assert!(out.err < 1e-9);
        }
    }

    #[test]
    fn linear_amplification_matches_polynomial() {
        let tb = tab(5);
        let mut f = |_: f64, y: &[f64], o: &mut [f64]| {
            o[0] = -y[0];
            Ok(())
        };
        let out = rkc_step(&tb, &mut f, &[1.0], 0.0, 0.1, &mut NoHook, None).unwrap();
        assert!((out.y[0] - tb.stability_polynomial(-0.1)).abs() < 1e-12);
    }

    #[test]
    fn second_order_convergence() {
        // y' = -y + sin t, y(0) = 1 ; exact y = 1.5 e^{-t} + (sin t - cos t)/2
        let exact = |t: f64| 1.5 * (-t).exp() + 0.5 * (t.sin() - t.cos());
        let tb = tab(4);
        let mut errs = Vec::new();
        for dt in [1e-1, 1e-2, 1e-3] {
            let mut f = |t: f64, y: &[f64], o: &mut [f64]| {
                o[0] = -y[0] + t.sin();
                Ok(())
            };
            let steps = (1.0 / dt as f64).round() as usize;
            let mut y = vec![1.0];
            for k in 0..steps {
                y = rkc_step(&tb, &mut f, &y, k as f64 * dt, dt, &mut NoHook, None).unwrap().y;
            }
            errs.push((y[0] - exact(1.0)).abs());
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log10();
            assert!((slope - 2.0).abs() < 0.1, "{errs:?}");
        }
    }

    #[test]
    fn stability_bound_sharpness() {
        for s in [5, 10, 20] {
            let tb = tab(s);
            let l = 0.653 * (s * s) as f64;
            let n = 2000;
            let first_bad = (1..=n)
                .map(|k| -1.2 * l * k as f64 / n as f64)
                .find(|&z| tb.stability_polynomial(z).abs() > 1.0 + 1e-12)
                .unwrap();
            assert!(-first_bad > 0.95 * l && -first_bad < 1.05 * l, "s={s}: {}", -first_bad / l);
        }
    }

    #[test]
    fn hook_sees_every_stage() {
        let mut f = |_: f64, y: &[f64], o: &mut [f64]| {
            o[0] = -y[0];
            Ok(())
        };
        let tb = tab(6);
        let mut rec = Recorder { mode: HookMode::ProjectDualBuffer, seen: vec![] };
        let plain = rkc_step(&tb, &mut f, &[1.0], 0.5, 0.1, &mut NoHook, None).unwrap();
        let hooked = rkc_step(&tb, &mut f, &[1.0], 0.5, 0.1, &mut rec, None).unwrap();
        assert_eq!(plain.y, hooked.y);
        assert_eq!(rec.seen.len(), 6);
        assert!((rec.seen[5].1 - 1.0).abs() < 1e-12);
        assert!((rec.seen[5].2 - 0.6).abs() < 1e-12);
        let mut rec = Recorder { mode: HookMode::ProjectState, seen: vec![] };
        assert_eq!(rkc_step(&tb, &mut f, &[1.0], 0.5, 0.1, &mut rec, None).unwrap().y, plain.y);
    }

    #[test]
    fn dual_buffer_matches_butcher_form() {
        // y' = A y with the hook deflating direction d; Butcher oracle:
        // U*_i = y0 + dt sum_j a_ij F(U_j), U_i = P U*_i
        let a = vec![vec![-3.0, 1.0, 0.0], vec![0.5, -2.0, 0.3], vec![0.0, 0.2, -1.0]];
        let norm = (1.0f64 + 4.0 + 4.0).sqrt();
        let dir = vec![1.0 / norm, 2.0 / norm, -2.0 / norm];
        let proj = |v: &mut Vec<f64>| {
            let d: f64 = v.iter().zip(&dir).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(&dir).for_each(|(x, y)| *x -= d * y);
        };
        let mut y0 = vec![1.0, 0.5, -0.25];
        proj(&mut y0);
        let dt = 0.2;
        for s in [3, 5] {
            let tb = tab(s);
            let bt = tb.butcher();
            let mut f = linear_rhs(a.clone(), |_| vec![0.0; 3]);
            let mut hook = Deflate { mode: HookMode::ProjectDualBuffer, dir: dir.clone() };
            let got = rkc_step(&tb, &mut f, &y0, 0.0, dt, &mut hook, None).unwrap().y;
            let apply = |v: &[f64]| -> Vec<f64> { (0..3).map(|i| (0..3).map(|k| a[i][k] * v[k]).sum()).collect() };
            let mut us: Vec<Vec<f64>> = vec![y0.clone()];
            let mut fs: Vec<Vec<f64>> = vec![apply(&y0)];
            for i in 1..=s {
                let w = if i < s { &bt.a[i] } else { &bt.b };
                let mut u: Vec<f64> = (0..3).map(|k| y0[k] + dt * (0..i).map(|j| w[j] * fs[j][k]).sum::<f64>()).collect();
                proj(&mut u);
                fs.push(apply(&u));
                us.push(u);
            }
            for k in 0..3 {
                assert!((got[k] - us[s][k]).abs() < 1e-12, "s={s}");
            }
        }
    }

    #[test]
    fn refuses_estimate_with_projection() {
        let mut f = |_: f64, _: &[f64], o: &mut [f64]| {
            o.fill(0.0);
            Ok(())
        };
        let mut rec = Recorder { mode: HookMode::ProjectDualBuffer, seen: vec![] };
        assert!(matches!(rkc_step(&tab(3), &mut f, &[1.0], 0.0, 0.1, &mut rec, TOL), Err(Error::Config(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let mut f = |_: f64, _: &[f64], o: &mut [f64]| {
            o.fill(f64::INFINITY);
            Ok(())
        };
        assert!(matches!(rkc_step(&tab(3), &mut f, &[1.0], 0.0, 0.1, &mut NoHook, None), Err(Error::Diverged { stage: 1 })));
    }
}
