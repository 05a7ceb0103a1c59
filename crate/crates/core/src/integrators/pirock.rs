//! PIROCK restricted to `l = 2` without a reaction term.
//!
//! Time is carried by the diffusion partition: diffusion stages `K_j` sit at
//! `t + c_j dt` with `c_j = P_j'(0)`, and the advection stages built on
//! `K = K_s` inherit its time.

use super::check_finite;
use super::tableau::Rock2Tableau;
use crate::error::{Error, Result};

/// `gamma = 1 - sqrt(2)/2`.
pub const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// `beta = 1 - 2 P_s'(0)` for the continued recursion of degree `s`.
pub fn pirock_beta(tab: &Rock2Tableau) -> f64 {
    1.0 - 2.0 * tab.ext_c[tab.s]
}

/// One PIROCK step for `y' = F_D(y) + F_A(y)`.
pub fn pirock_step<D, A>(tab: &Rock2Tableau, fd: &mut D, fa: &mut A, y0: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    D: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    A: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let s = tab.s;
    if s < 3 {
        return Err(Error::InvalidArgument(format!("PIROCK needs s >= 3, got {s}")));
    }
    if tab.m() < s {
        return Err(Error::Table(format!("degree {s}: PIROCK needs {s} recursion entries, table has {}", tab.m())));
    }
    let n = y0.len();
    let c = &tab.ext_c;
    let mut fbuf = vec![0.0; n];
    fd(t, y0, &mut fbuf)?;
    let mut km2 = y0.to_vec();
    let mut km1: Vec<f64> = (0..n).map(|k| y0[k] + tab.mu[0] * dt * fbuf[k]).collect();
    check_finite(&km1, 1)?;
    // K_{s-2} and F_D(K_{s-2}) are kept for the finishing stages
    let mut k_sm2 = if s == 3 { Some(km1.clone()) } else { None };
    let mut fd_sm2 = vec![0.0; n];
    for j in 2..=s {
        fd(t + c[j - 1] * dt, &km1, &mut fbuf)?;
        if j - 1 == s - 2 {
            fd_sm2.copy_from_slice(&fbuf);
        }
        let (mu, nu, ka) = (tab.mu[j - 1], tab.nu[j - 1], tab.kappa[j - 1]);
        let kj: Vec<f64> = (0..n).map(|k| mu * dt * fbuf[k] - nu * km1[k] - ka * km2[k]).collect();
        check_finite(&kj, j)?;
        km2 = std::mem::replace(&mut km1, kj);
        if j == s - 2 {
            k_sm2 = Some(km1.clone());
        }
    }
    let big_k = km1;
    let k_sm2 = k_sm2.expect("K_{s-2} recorded");
    let sig = tab.sigma;
    let t_sm2 = t + c[s - 2] * dt;
    let ks_sm1: Vec<f64> = (0..n).map(|k| k_sm2[k] + sig * dt * fd_sm2[k]).collect();
    check_finite(&ks_sm1, s - 1)?;
    let mut fd_ks_sm1 = vec![0.0; n];
    fd(t_sm2 + sig * dt, &ks_sm1, &mut fd_ks_sm1)?;
    let ks_s: Vec<f64> = (0..n).map(|k| ks_sm1[k] + sig * dt * fd_ks_sm1[k]).collect();
    check_finite(&ks_s, s)?;

    let t_k = t + c[s] * dt;
    let beta = pirock_beta(tab);
    let mut fd_k = vec![0.0; n];
    let mut fa_k = vec![0.0; n];
    fd(t_k, &big_k, &mut fd_k)?;
    fa(t_k, &big_k, &mut fa_k)?;
    let k3: Vec<f64> = (0..n).map(|k| big_k[k] + (1.0 - 2.0 * GAMMA) * dt * fa_k[k]).collect();
    let k4: Vec<f64> = (0..n).map(|k| big_k[k] + dt / 3.0 * fa_k[k]).collect();
    check_finite(&k3, s + 3)?;
    check_finite(&k4, s + 4)?;
    let mut fa_4 = vec![0.0; n];
    fa(t_k, &k4, &mut fa_4)?;
    let k5: Vec<f64> = (0..n)
        .map(|k| big_k[k] + 2.0 / 3.0 * beta * dt * fd_k[k] + 2.0 / 3.0 * dt * fa_4[k])
        .collect();
    check_finite(&k5, s + 5)?;
    let mut fa_5 = vec![0.0; n];
    fa(t_k + 2.0 / 3.0 * beta * dt, &k5, &mut fa_5)?;
    let mut fd_3 = vec![0.0; n];
    fd(t_k, &k3, &mut fd_3)?;

    let gap = tab.finishing_gap();
    let w = 1.0 / (2.0 - 4.0 * GAMMA);
    let y1: Vec<f64> = (0..n)
        .map(|k| {
            ks_s[k] - gap * dt * (fd_ks_sm1[k] - fd_sm2[k])
                + 0.25 * dt * fa_k[k]
                + 0.75 * dt * fa_5[k]
                + w * dt * (fd_3[k] - fd_k[k])
        })
        .collect();
    check_finite(&y1, s + 6)?;
    Ok(y1)
}
