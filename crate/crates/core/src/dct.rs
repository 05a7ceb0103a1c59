//! DCT-II / DCT-III pair with naive, iterative, recursive and hybrid algorithms.
//!
//! Normalisation: forward `F_k = sum_n f_n cos((2n+1) k pi / 2N)` (unscaled),
//! inverse `f_n = (2/N) sum'_k F_k cos((2n+1) k pi / 2N)` where the `k = 0`
//! term is half-weighted.

use rayon::prelude::*;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DctAlgorithm {
    /// Direct double sum, `O(N^2)` cosine evaluations.
    Naive,
    /// Three-term recurrences, `O(N^2)` adds and multiplies; even `N`.
    Iterative,
    /// Halving recursion down to length 2, `O(N log N)`; `N` a power of two.
    Recursive,
    /// Recursive until the length reaches the cutoff, iterative below.
    Hybrid,
}

/// Default length at which the hybrid algorithm switches to the iterative one.
pub const DEFAULT_CUTOFF: usize = 8;

#[derive(Debug, Clone)]
struct IterTables {
    /// cos(theta_k / 2), sin(theta_k / 2), 2 cos(theta_k) with theta_k = k pi / N.
    ch: Vec<f64>,
    sh: Vec<f64>,
    c2: Vec<f64>,
    /// sin(theta_n), sin(theta_n / 2), 2 cos(theta_n) with theta_n = (2n+1) pi / N, n < N/2.
    sn: Vec<f64>,
    snh: Vec<f64>,
    cn2: Vec<f64>,
}

#[derive(Debug, Clone)]
struct RotTables {
    /// cos and sin of k pi / 2N for k < N/2.
    c: Vec<f64>,
    s: Vec<f64>,
}

/// Immutable transform plan with precomputed trigonometric factors.
#[derive(Debug, Clone)]
pub struct DctPlan {
    n: usize,
    algorithm: DctAlgorithm,
    cutoff: usize,
    /// Indexed by log2 of the length (only lengths that are used).
    iter: Vec<Option<IterTables>>,
    rot: Vec<Option<RotTables>>,
}

impl DctPlan {
    pub fn new(n: usize, algorithm: DctAlgorithm) -> Result<Self> {
        Self::with_cutoff(n, algorithm, DEFAULT_CUTOFF)
    }

    pub fn with_cutoff(n: usize, algorithm: DctAlgorithm, cutoff: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("DCT length must be at least 1".into()));
        }
        match algorithm {
            DctAlgorithm::Naive => {}
            DctAlgorithm::Iterative => {
                if n % 2 != 0 {
                    return Err(Error::InvalidArgument(format!("iterative DCT needs even length, got {n}")));
                }
            }
            DctAlgorithm::Recursive | DctAlgorithm::Hybrid => {
                if !n.is_power_of_two() || n < 2 {
                    return Err(Error::InvalidArgument(format!("recursive DCT needs a power of two, got {n}")));
                }
                if algorithm == DctAlgorithm::Hybrid && cutoff < 2 {
                    return Err(Error::InvalidArgument("hybrid cutoff must be at least 2".into()));
                }
            }
        }
        let slots = (usize::BITS - n.leading_zeros()) as usize + 1;
        let mut plan = Self { n, algorithm, cutoff, iter: vec![None; slots], rot: vec![None; slots] };
        match algorithm {
            DctAlgorithm::Naive => {}
            DctAlgorithm::Iterative => plan.add_iter(n),
            DctAlgorithm::Recursive | DctAlgorithm::Hybrid => {
                let mut len = n;
                loop {
                    let leaf = len == 2 || (algorithm == DctAlgorithm::Hybrid && len <= cutoff);
                    if leaf {
                        if len > 2 || algorithm == DctAlgorithm::Hybrid {
                            plan.add_iter(len);
                        }
                        break;
                    }
                    plan.add_rot(len);
                    len /= 2;
                }
            }
        }
        Ok(plan)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn algorithm(&self) -> DctAlgorithm {
        self.algorithm
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn slot(len: usize) -> usize {
        len.trailing_zeros() as usize
    }

    fn add_iter(&mut self, len: usize) {
        let nf = len as f64;
        let half = len / 2;
        let t = IterTables {
            ch: (0..len).map(|k| (k as f64 * PI / nf / 2.0).cos()).collect(),
            sh: (0..len).map(|k| (k as f64 * PI / nf / 2.0).sin()).collect(),
            c2: (0..len).map(|k| 2.0 * (k as f64 * PI / nf).cos()).collect(),
            sn: (0..half).map(|n| ((2 * n + 1) as f64 * PI / nf).sin()).collect(),
            snh: (0..half).map(|n| ((2 * n + 1) as f64 * PI / nf / 2.0).sin()).collect(),
            cn2: (0..half).map(|n| 2.0 * ((2 * n + 1) as f64 * PI / nf).cos()).collect(),
        };
        let s = Self::slot(len);
        if s >= self.iter.len() {
            self.iter.resize(s + 1, None);
        }
        self.iter[s] = Some(t);
    }

    fn add_rot(&mut self, len: usize) {
        let nf = len as f64;
        let t = RotTables {
            c: (0..len / 2).map(|k| (k as f64 * PI / (2.0 * nf)).cos()).collect(),
            s: (0..len / 2).map(|k| (k as f64 * PI / (2.0 * nf)).sin()).collect(),
        };
        let s = Self::slot(len);
        self.rot[s] = Some(t);
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: len });
        }
        Ok(())
    }

    /// Forward transform (DCT-II).
    pub fn dct(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f.len())?;
        let mut out = vec![0.0; self.n];
        self.dct_into(f, &mut out);
        Ok(out)
    }

    /// Inverse transform (DCT-III scaled by 2/N, half-weighted `F_0`).
    pub fn idct(&self, big_f: &[f64]) -> Result<Vec<f64>> {
        self.check(big_f.len())?;
        let mut out = vec![0.0; self.n];
        self.idct_into(big_f, &mut out);
        Ok(out)
    }

    /// Forward transform into a preallocated buffer; lengths must match the plan.
    pub fn dct_into(&self, f: &[f64], out: &mut [f64]) {
        match self.algorithm {
            DctAlgorithm::Naive => naive_dct_into(f, out),
            DctAlgorithm::Iterative => self.iter_dct(f, out),
            DctAlgorithm::Recursive | DctAlgorithm::Hybrid => self.rec_dct(f, out),
        }
    }

    pub fn idct_into(&self, big_f: &[f64], out: &mut [f64]) {
        match self.algorithm {
            DctAlgorithm::Naive => naive_idct_into(big_f, out),
            DctAlgorithm::Iterative => self.iter_idct(big_f, out),
            DctAlgorithm::Recursive | DctAlgorithm::Hybrid => self.rec_idct(big_f, out),
        }
    }

    fn is_leaf(&self, len: usize) -> bool {
        len == 2 || (self.algorithm == DctAlgorithm::Hybrid && len <= self.cutoff)
    }

    fn iter_dct(&self, f: &[f64], out: &mut [f64]) {
        let len = f.len();
        let t = self.iter[Self::slot(len)].as_ref().expect("iterative tables");
        let half = len / 2;
        for (k, o) in out.iter_mut().enumerate() {
            let odd = k % 2 == 1;
            // w_j for the parity of k, consumed on the fly
            let w = |j: usize| if odd { f[j] - f[len - 1 - j] } else { f[j] + f[len - 1 - j] };
            let (mut g1, mut g2) = (0.0, 0.0);
            let mut wprev = 0.0;
            for j in 0..half {
                let wj = w(j);
                let g = if odd {
                    t.sh[k] * (wj + wprev) + t.c2[k] * g1 - g2
                } else {
                    t.ch[k] * (wj - wprev) + t.c2[k] * g1 - g2
                };
                g2 = g1;
                g1 = g;
                wprev = wj;
            }
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            *o = sign * g1;
        }
    }

    fn iter_idct(&self, big_f: &[f64], out: &mut [f64]) {
        let len = big_f.len();
        let t = self.iter[Self::slot(len)].as_ref().expect("iterative tables");
        let half = len / 2;
        let scale = 2.0 / len as f64;
        let even = |m: usize| if m == 0 { 0.5 * big_f[0] } else { big_f[2 * m] };
        for n in 0..half {
            let (mut p1, mut p2) = (0.0, 0.0);
            let (mut q1, mut q2) = (0.0, 0.0);
            let mut fprev_odd = 0.0;
            for j in 0..half {
                let p = t.sn[n] * even(j) + t.cn2[n] * p1 - p2;
                let fo = big_f[2 * j + 1];
                let q = t.snh[n] * (fo + fprev_odd) + t.cn2[n] * q1 - q2;
                p2 = p1;
                p1 = p;
                q2 = q1;
                q1 = q;
                fprev_odd = fo;
            }
            let sign = if n % 2 == 0 { scale } else { -scale };
            out[n] = sign * (p1 + q1);
            out[len - 1 - n] = sign * (p1 - q1);
        }
    }

    /// Scratch length needed by the recursive transforms of length `len`.
    fn scratch_len(len: usize) -> usize {
        3 * len
    }

    fn rec_dct(&self, f: &[f64], out: &mut [f64]) {
        let mut work = vec![0.0; Self::scratch_len(f.len())];
        self.rec_dct_with(f, out, &mut work);
    }

    fn rec_idct(&self, big_f: &[f64], out: &mut [f64]) {
        let mut work = vec![0.0; Self::scratch_len(big_f.len())];
        self.rec_idct_with(big_f, out, &mut work);
    }

    fn rec_dct_with(&self, f: &[f64], out: &mut [f64], work: &mut [f64]) {
        let len = f.len();
        if self.is_leaf(len) {
            if len == 2 && self.iter[Self::slot(2)].is_none() {
                out[0] = f[0] + f[1];
                out[1] = (f[0] - f[1]) * FRAC_1_SQRT_2;
            } else {
                self.iter_dct(f, out);
            }
            return;
        }
        let half = len / 2;
        let (split, rest) = work.split_at_mut(len);
        let (lo, hi) = split.split_at_mut(half);
        for n in 0..half {
            lo[n] = f[2 * n] + f[2 * n + 1];
            let h = f[2 * n] - f[2 * n + 1];
            hi[n] = if n % 2 == 0 { h } else { -h };
        }
        {
            let (a, b) = out.split_at_mut(half);
            self.rec_dct_with(lo, a, rest);
            self.rec_dct_with(hi, b, rest);
        }
        // a = out[..half], b = out[half..]; each rotation reads and writes
        // the pair (k, len - k) only, so it runs in place
        let r = self.rot[Self::slot(len)].as_ref().expect("rotation tables");
        out[half] *= FRAC_1_SQRT_2;
        for k in 1..half {
            let (c, s) = (r.c[k], r.s[k]);
            let (ak, bk) = (out[k], out[len - k]);
            out[k] = c * ak + s * bk;
            out[len - k] = -s * ak + c * bk;
        }
    }

    fn rec_idct_with(&self, big_f: &[f64], out: &mut [f64], work: &mut [f64]) {
        let len = big_f.len();
        if self.is_leaf(len) {
            if len == 2 && self.iter[Self::slot(2)].is_none() {
                let a = 0.5 * big_f[0];
                let b = big_f[1] * FRAC_1_SQRT_2;
                out[0] = a + b;
                out[1] = a - b;
            } else {
                self.iter_idct(big_f, out);
            }
            return;
        }
        let half = len / 2;
        let r = self.rot[Self::slot(len)].as_ref().expect("rotation tables");
        let (split, rest) = work.split_at_mut(len);
        {
            let (w, v) = split.split_at_mut(half);
            w[0] = big_f[0];
            v[0] = 2.0 * FRAC_1_SQRT_2 * big_f[half];
            for k in 1..half {
                let (c, s) = (r.c[k], r.s[k]);
                w[k] = c * big_f[k] - s * big_f[len - k];
                let (p, m) = (big_f[half + k], big_f[half - k]);
                v[k] = FRAC_1_SQRT_2 * (c * (p + m) + s * (p - m));
            }
            let (cm, dm) = out.split_at_mut(half);
            self.rec_idct_with(w, cm, rest);
            self.rec_idct_with(v, dm, rest);
        }
        split.copy_from_slice(&out[..len]);
        let (cm, dm) = split.split_at(half);
        for m in 0..half {
            let d = if m % 2 == 0 { dm[m] } else { -dm[m] };
            out[2 * m] = 0.5 * (cm[m] + d);
            out[2 * m + 1] = 0.5 * (cm[m] - d);
        }
    }

    /// Row-column 2D forward transform of a row-major `N x N` array.
    pub fn dct2d(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_square(f.len())?;
        Ok(self.apply2d(f, false))
    }

    pub fn idct2d(&self, big_f: &[f64]) -> Result<Vec<f64>> {
        self.check_square(big_f.len())?;
        Ok(self.apply2d(big_f, true))
    }

    fn check_square(&self, len: usize) -> Result<()> {
        if len != self.n * self.n {
            return Err(Error::InvalidArgument(format!(
                "2D transform expects a square {n}x{n} array ({} values), got {len}",
                self.n * self.n,
                n = self.n
            )));
        }
        Ok(())
    }

    fn apply2d(&self, input: &[f64], inverse: bool) -> Vec<f64> {
        let n = self.n;
        let run = |src: &[f64], dst: &mut [f64]| {
            if inverse {
                self.idct_into(src, dst)
            } else {
                self.dct_into(src, dst)
            }
        };
        let mut rows = vec![0.0; n * n];
        rows.par_chunks_mut(n).zip(input.par_chunks(n)).for_each(|(dst, src)| run(src, dst));
        let mut tr = transpose(&rows, n);
        let mut cols = vec![0.0; n * n];
        cols.par_chunks_mut(n).zip(tr.par_chunks(n)).for_each(|(dst, src)| run(src, dst));
        tr.copy_from_slice(&cols);
        transpose(&tr, n)
    }
}

fn transpose(a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[c * n + r] = a[r * n + c];
        }
    }
    out
}

fn naive_dct_into(f: &[f64], out: &mut [f64]) {
    let nf = f.len() as f64;
    for (k, o) in out.iter_mut().enumerate() {
        *o = f
            .iter()
            .enumerate()
            .map(|(n, x)| x * ((2 * n + 1) as f64 * k as f64 * PI / (2.0 * nf)).cos())
            .sum();
    }
}

fn naive_idct_into(big_f: &[f64], out: &mut [f64]) {
    let nf = big_f.len() as f64;
    for (n, o) in out.iter_mut().enumerate() {
        let s: f64 = big_f
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let w = if k == 0 { 0.5 } else { 1.0 };
                w * x * ((2 * n + 1) as f64 * k as f64 * PI / (2.0 * nf)).cos()
            })
            .sum();
        *o = 2.0 / nf * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_oracle(f: &[f64]) -> Vec<f64> {
        let n = f.len();
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|m| f[m] * (PI * k as f64 * (2 * m + 1) as f64 / (2 * n) as f64).cos())
                    .sum()
            })
            .collect()
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    #[test]
    fn length_two_examples() {
        for alg in [DctAlgorithm::Naive, DctAlgorithm::Iterative, DctAlgorithm::Recursive, DctAlgorithm::Hybrid] {
            let p = DctPlan::new(2, alg).unwrap();
            let f = p.dct(&[1.0, 1.0]).unwrap();
            assert!((f[0] - 2.0).abs() < 1e-15 && f[1].abs() < 1e-15, "{alg:?}");
            let f = p.dct(&[1.0, 0.0]).unwrap();
            assert!((f[0] - 1.0).abs() < 1e-15 && (f[1] - FRAC_1_SQRT_2).abs() < 1e-15, "{alg:?}");
            let back = p.idct(&[2.0, 0.0]).unwrap();
            assert!((back[0] - 1.0).abs() < 1e-15 && (back[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn orthogonality_picks_single_mode() {
        let n = 16;
        for alg in [DctAlgorithm::Naive, DctAlgorithm::Iterative, DctAlgorithm::Recursive] {
            let p = DctPlan::new(n, alg).unwrap();
            for m in 1..n {
                let f: Vec<f64> = (0..n).map(|k| ((2 * k + 1) as f64 * m as f64 * PI / (2 * n) as f64).cos()).collect();
                let big = p.dct(&f).unwrap();
                for (k, v) in big.iter().enumerate() {
                    let want = if k == m { n as f64 / 2.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-12, "{alg:?} m={m} k={k}");
                }
            }
        }
    }

    #[test]
    fn delta_inverts_to_constant() {
        for n in [2, 4, 8, 32, 128] {
            let p = DctPlan::new(n, DctAlgorithm::Hybrid).unwrap();
            let mut d = vec![0.0; n];
            d[0] = 1.0;
            for v in p.idct(&d).unwrap() {
                assert!((v - 1.0 / n as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fast_algorithms_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut n = 2;
        while n <= 512 {
            let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let want = naive_oracle(&f);
            for alg in [DctAlgorithm::Iterative, DctAlgorithm::Recursive, DctAlgorithm::Hybrid] {
                let p = DctPlan::new(n, alg).unwrap();
                let got = p.dct(&f).unwrap();
                assert!(max_rel(&got, &want) < 1e-12, "dct {alg:?} n={n}");
                let back = p.idct(&got).unwrap();
                assert!(max_rel(&back, &f) < 1e-12, "idct {alg:?} n={n}");
            }
            n *= 2;
        }
    }

    #[test]
    fn hybrid_cutoff_is_configurable() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = naive_oracle(&f);
        for cutoff in [2, 8, 64, 256] {
            let p = DctPlan::with_cutoff(256, DctAlgorithm::Hybrid, cutoff).unwrap();
            assert!(max_rel(&p.dct(&f).unwrap(), &want) < 1e-12);
        }
    }

    #[test]
    fn constraint_errors() {
        assert!(DctPlan::new(6, DctAlgorithm::Recursive).is_err());
        assert!(DctPlan::new(5, DctAlgorithm::Iterative).is_err());
        assert!(DctPlan::new(12, DctAlgorithm::Hybrid).is_err());
        assert!(DctPlan::new(5, DctAlgorithm::Naive).is_ok());
        let p = DctPlan::new(8, DctAlgorithm::Iterative).unwrap();
        assert!(matches!(p.dct(&[0.0; 4]), Err(Error::LengthMismatch { .. })));
        assert!(p.dct2d(&[0.0; 60]).is_err());
    }

    #[test]
    fn two_d_constant_and_separable() {
        let n = 8;
        let p = DctPlan::new(n, DctAlgorithm::Hybrid).unwrap();
        let big = p.dct2d(&vec![1.0; n * n]).unwrap();
        assert!((big[0] - (n * n) as f64).abs() < 1e-12);
        assert!(big[1..].iter().all(|v| v.abs() < 1e-12));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // row index m runs along y (a), column index n along x (b)
        let f: Vec<f64> = (0..n * n).map(|idx| a[idx / n] * b[idx % n]).collect();
        let big = p.dct2d(&f).unwrap();
        let (da, db) = (naive_oracle(&a), naive_oracle(&b));
        for j in 0..n {
            for k in 0..n {
                assert!((big[j * n + k] - da[j] * db[k]).abs() < 1e-12);
            }
        }
        let back = p.idct2d(&big).unwrap();
        assert!(max_rel(&back, &f) < 1e-12);
    }

    #[test]
    fn naive_handles_odd_lengths() {
        let p = DctPlan::new(5, DctAlgorithm::Naive).unwrap();
        let f = [0.3, -1.0, 2.0, 0.5, 0.1];
        let back = p.idct(&p.dct(&f).unwrap()).unwrap();
        assert!(max_rel(&back, &f) < 1e-13);
    }
}
