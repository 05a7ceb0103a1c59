//! Recursion coefficients for RKC and ROCK2, Butcher reconstruction and nodes.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Largest stage count any integrator accepts.
pub const STAGE_CAP: usize = 200;

/// Default RKC damping parameter.
pub const DEFAULT_EPS: f64 = 0.15;

/// Environment variable naming an alternative ROCK2 coefficient file.
pub const ROCK2_TABLE_ENV: &str = "RKNS_ROCK2_TABLE";

const EMBEDDED_ROCK2: &str = include_str!("../../data/rock2_coefficients.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rkc,
    Rock2,
}

/// Values of `T_j`, `T'_j`, `T''_j` at `x` for `j = 0..=s`.
pub fn chebyshev_values(s: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; s + 1];
    let mut d1 = vec![0.0; s + 1];
    let mut d2 = vec![0.0; s + 1];
    t[0] = 1.0;
    if s >= 1 {
        t[1] = x;
        d1[1] = 1.0;
    }
    for j in 2..=s {
        t[j] = 2.0 * x * t[j - 1] - t[j - 2];
        d1[j] = 2.0 * t[j - 1] + 2.0 * x * d1[j - 1] - d1[j - 2];
        d2[j] = 4.0 * d1[j - 1] + 2.0 * x * d2[j - 1] - d2[j - 2];
    }
    (t, d1, d2)
}

#[derive(Debug, Clone)]
pub struct RkcTableau {
    pub s: usize,
    pub eps: f64,
    pub w0: f64,
    pub w1: f64,
    /// Index `j = 0..=s`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Index `j = 1..=s`; entry 0 unused (`nu_1` is zero).
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Node of stage `g_j`, `j = 0..=s`.
    pub c: Vec<f64>,
}

impl RkcTableau {
    pub fn new(s: usize, eps: f64) -> Result<Self> {
        if s < 2 {
            return Err(Error::InvalidArgument(format!("RKC needs s >= 2, got {s}")));
        }
        if s > STAGE_CAP {
            return Err(Error::StageCap { required: s, cap: STAGE_CAP });
        }
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("RKC damping must be positive, got {eps}")));
        }
        let w0 = 1.0 + eps / (s * s) as f64;
        let (t, d1, d2) = chebyshev_values(s, w0);
        let w1 = d1[s] / d2[s];
        let mut b = vec![0.0; s + 1];
        for j in 2..=s {
            b[j] = d2[j] / (d1[j] * d1[j]);
        }
        b[0] = b[2];
        b[1] = b[2];
        let a: Vec<f64> = (0..=s).map(|j| 1.0 - b[j] * t[j]).collect();
        let mut mu = vec![0.0; s + 1];
        let mut nu = vec![0.0; s + 1];
        let mut kappa = vec![0.0; s + 1];
        kappa[1] = b[1] * w1;
        for j in 2..=s {
            mu[j] = 2.0 * b[j] * w0 / b[j - 1];
            nu[j] = -b[j] / b[j - 2];
            kappa[j] = 2.0 * b[j] * w1 / b[j - 1];
        }
        let mut tab = Self { s, eps, w0, w1, a, b, mu, nu, kappa, c: Vec::new() };
        tab.c = tab.run_scalar(|_| 1.0, 0.0);
        Ok(tab)
    }

    /// Runs the stage recursion on a scalar autonomous problem with `dt = 1`
    /// and returns all stage values `g_0..g_s`.
    pub fn run_scalar(&self, f: impl Fn(f64) -> f64, y0: f64) -> Vec<f64> {
        let s = self.s;
        let mut g = vec![0.0; s + 1];
        g[0] = y0;
        let f0 = f(y0);
        g[1] = y0 + self.kappa[1] * f0;
        for j in 2..=s {
            g[j] = y0
                + self.mu[j] * (g[j - 1] - y0)
                + self.nu[j] * (g[j - 2] - y0)
                + self.kappa[j] * (f(g[j - 1]) - self.a[j - 1] * f0);
        }
        g
    }

    /// `R_s(z) = a_s + b_s T_s(w0 + w1 z)`.
    pub fn stability_polynomial(&self, z: f64) -> f64 {
        let (t, _, _) = chebyshev_values(self.s, self.w0 + self.w1 * z);
        self.a[self.s] + self.b[self.s] * t[self.s]
    }

    /// Butcher form over the stages `g_0..g_{s-1}`.
    pub fn butcher(&self) -> Butcher {
        let s = self.s;
        // row j: coefficients of dt F(g_k), k = 0..s-1, in g_j (j = 0..=s)
        let mut rows = vec![vec![0.0; s]; s + 1];
        rows[1][0] = self.kappa[1];
        for j in 2..=s {
            let mut r = vec![0.0; s];
            for k in 0..s {
                r[k] = self.mu[j] * rows[j - 1][k] + self.nu[j] * rows[j - 2][k];
            }
            r[j - 1] += self.kappa[j];
            r[0] -= self.kappa[j] * self.a[j - 1];
            rows[j] = r;
        }
        let b = rows.pop().unwrap();
        Butcher::from_rows(rows, b)
    }
}

#[derive(Debug, Clone)]
pub struct Rock2Tableau {
    pub s: usize,
    pub sigma: f64,
    pub tau: f64,
    /// Recursion entries `j = 1..=m` stored at index `j - 1`; ROCK2 uses the
    /// first `s - 2`, PIROCK the first `s`.
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Node of `g_j` for `j = 0..=s`.
    pub c: Vec<f64>,
    /// `P_j'(0)` for `j = 0..=m`, the nodes of the continued recursion.
    pub ext_c: Vec<f64>,
}

impl Rock2Tableau {
    fn from_record(s: usize, sigma: f64, tau: f64, mu: Vec<f64>, nu: Vec<f64>, kappa: Vec<f64>) -> Result<Self> {
        if s < 3 {
            return Err(Error::Table(format!("degree {s} below 3")));
        }
        if mu.len() < s - 2 {
            return Err(Error::Table(format!("degree {s}: only {} recursion entries", mu.len())));
        }
        let m = mu.len();
        let mut ext_c = vec![0.0; m + 1];
        ext_c[1] = mu[0];
        for j in 2..=m {
            ext_c[j] = mu[j - 1] - nu[j - 1] * ext_c[j - 1] - kappa[j - 1] * ext_c[j - 2];
        }
        let mut c: Vec<f64> = ext_c[..=s - 2].to_vec();
        c.push(c[s - 2] + sigma);
        c.push(c[s - 2] + 2.0 * sigma);
        let tab = Self { s, sigma, tau, mu, nu, kappa, c, ext_c };
        tab.validate()?;
        Ok(tab)
    }

    fn validate(&self) -> Result<()> {
        let bt = self.butcher();
        let (o1, o2) = bt.order_residuals();
        if o1.abs() > 1e-10 || o2.abs() > 1e-10 {
            return Err(Error::Table(format!(
                "degree {}: order conditions violated (sum b - 1 = {o1:e}, sum bc - 1/2 = {o2:e})",
                self.s
            )));
        }
        Ok(())
    }

    /// Number of recursion entries available.
    pub fn m(&self) -> usize {
        self.mu.len()
    }

    /// Damping-free finishing factor `sigma (1 - tau / sigma^2)`.
    pub fn finishing_gap(&self) -> f64 {
        self.sigma * (1.0 - self.tau / (self.sigma * self.sigma))
    }

    /// `P_{s-2}(z) w(z)`, the stability polynomial.
    pub fn stability_polynomial(&self, z: f64) -> f64 {
        let m = self.s - 2;
        let mut pm1 = 1.0;
        let mut p = 1.0 + self.mu[0] * z;
        for j in 2..=m {
            let next = self.mu[j - 1] * z * p - self.nu[j - 1] * p - self.kappa[j - 1] * pm1;
            pm1 = p;
            p = next;
        }
        (1.0 + 2.0 * self.sigma * z + self.tau * z * z) * p
    }

    /// Butcher form over the stages `g_0..g_{s-1}`.
    pub fn butcher(&self) -> Butcher {
        let s = self.s;
        let mut rows = vec![vec![0.0; s]; s];
        rows[1][0] = self.mu[0];
        for j in 2..=s - 2 {
            let mut r = vec![0.0; s];
            for k in 0..s {
                r[k] = -self.nu[j - 1] * rows[j - 1][k] - self.kappa[j - 1] * rows[j - 2][k];
            }
            r[j - 1] += self.mu[j - 1];
            rows[j] = r;
        }
        let mut last = rows[s - 2].clone();
        last[s - 2] += self.sigma;
        rows[s - 1] = last;
        let mut b = rows[s - 2].clone();
        b[s - 2] += 2.0 * self.sigma - self.tau / self.sigma;
        b[s - 1] += self.tau / self.sigma;
        Butcher::from_rows(rows, b)
    }
}

/// Explicit Butcher tableau `(A, b, c)`.
#[derive(Debug, Clone)]
pub struct Butcher {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl Butcher {
    fn from_rows(a: Vec<Vec<f64>>, b: Vec<f64>) -> Self {
        let c = a.iter().map(|r| r.iter().sum()).collect();
        Self { a, b, c }
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// `(sum b_i - 1, sum b_i c_i - 1/2)`.
    pub fn order_residuals(&self) -> (f64, f64) {
        let sb: f64 = self.b.iter().sum();
        let sbc: f64 = self.b.iter().zip(&self.c).map(|(b, c)| b * c).sum();
        (sb - 1.0, sbc - 0.5)
    }
}

/// All vendored ROCK2 degrees.
#[derive(Debug, Clone)]
pub struct Rock2Table {
    entries: BTreeMap<usize, Rock2Tableau>,
}

static GLOBAL_TABLE: OnceLock<Rock2Table> = OnceLock::new();

impl Rock2Table {
    /// Parses the whitespace-separated record format (see the data file header).
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let bad = |what: &str| Error::Table(format!("line {}: {what}", ln + 1));
            if toks.len() < 4 {
                return Err(bad("too few fields"));
            }
            let s: usize = toks[0].parse().map_err(|_| bad("degree"))?;
            let m: usize = toks[3].parse().map_err(|_| bad("entry count"))?;
            if toks.len() != 4 + 3 * m {
                return Err(bad(&format!("expected {} fields, found {}", 4 + 3 * m, toks.len())));
            }
            let nums: Vec<f64> = toks[1..3]
                .iter()
                .chain(&toks[4..])
                .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number {t:?}"))))
                .collect::<Result<_>>()?;
            let (sigma, tau) = (nums[0], nums[1]);
            let rest = &nums[2..];
            let tab = Rock2Tableau::from_record(
                s,
                sigma,
                tau,
                rest[..m].to_vec(),
                rest[m..2 * m].to_vec(),
                rest[2 * m..].to_vec(),
            )?;
            entries.insert(s, tab);
        }
        if entries.is_empty() {
            return Err(Error::Table("no records".into()));
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn embedded() -> Self {
        Self::parse(EMBEDDED_ROCK2).expect("embedded ROCK2 table is valid")
    }

    /// Process-wide table: the file named by `RKNS_ROCK2_TABLE` if set, else the embedded one.
    pub fn global() -> &'static Rock2Table {
        GLOBAL_TABLE.get_or_init(|| match std::env::var_os(ROCK2_TABLE_ENV) {
            Some(p) => Self::from_file(Path::new(&p))
                .unwrap_or_else(|e| panic!("{ROCK2_TABLE_ENV}={}: {e}", p.to_string_lossy())),
            None => Self::embedded(),
        })
    }

    /// Replaces the process-wide table; fails once it has been used.
    pub fn install(table: Rock2Table) -> Result<()> {
        GLOBAL_TABLE
            .set(table)
            .map_err(|_| Error::Config("ROCK2 table already initialised".into()))
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    pub fn get(&self, s: usize) -> Result<&Rock2Tableau> {
        self.entries.get(&s).ok_or_else(|| {
            let below = self.entries.range(..s).next_back().map(|(k, _)| *k);
            let above = self.entries.range(s..).next().map(|(k, _)| *k);
            Error::UnsupportedDegree { s, nearest: below.into_iter().chain(above).collect() }
        })
    }

    /// Smallest supported degree that is at least `s`.
    pub fn at_least(&self, s: usize) -> Option<usize> {
        self.entries.range(s..).next().map(|(k, _)| *k)
    }
}

pub fn rkc_tableau(s: usize, eps: f64) -> Result<RkcTableau> {
    RkcTableau::new(s, eps)
}

pub fn rock2_tableau(s: usize) -> Result<Rock2Tableau> {
    Rock2Table::global().get(s).cloned()
}

/// Nodes `c_1..c_{s+1}` (stage values of `y' = 1`, `y(0) = 0`, `dt = 1`).
pub fn nodes_c(method: Method, s: usize) -> Result<Vec<f64>> {
    match method {
        Method::Rkc => Ok(RkcTableau::new(s, DEFAULT_EPS)?.c),
        Method::Rock2 => Ok(Rock2Table::global().get(s)?.c.clone()),
    }
}

/// `R_s(z)` evaluated through one scalar step of the recursion.
pub fn stability_poly_eval(method: Method, s: usize, z: f64) -> Result<f64> {
    match method {
        Method::Rkc => {
            let t = RkcTableau::new(s, DEFAULT_EPS)?;
            Ok(*t.run_scalar(|y| z * y, 1.0).last().unwrap())
        }
        Method::Rock2 => {
            let t = Rock2Table::global().get(s)?;
            let m = s - 2;
            let mut g = vec![0.0; s + 1];
            g[0] = 1.0;
            g[1] = 1.0 + t.mu[0] * z;
            for j in 2..=m {
                g[j] = t.mu[j - 1] * z * g[j - 1] - t.nu[j - 1] * g[j - 1] - t.kappa[j - 1] * g[j - 2];
            }
            let fm2 = z * g[m];
            let g1 = g[m] + t.sigma * fm2;
            let fm1 = z * g1;
            Ok(g1 + t.sigma * fm1 - t.finishing_gap() * (fm1 - fm2))
        }
    }
}

/// Real stability bound `l_s` used for stage selection.
pub fn nominal_bound(method: Method, s: usize) -> f64 {
    let s2 = (s * s) as f64;
    match method {
        Method::Rkc => 0.653 * s2,
        Method::Rock2 => 0.811 * s2,
    }
}

/// Smallest admissible stage count with `dt * rho <= l_s`.
pub fn select_stages(dt: f64, rho: f64, method: Method, min_stages: usize) -> Result<usize> {
    select_stages_capped(dt, rho, method, min_stages, STAGE_CAP)
}

pub fn select_stages_capped(dt: f64, rho: f64, method: Method, min_stages: usize, cap: usize) -> Result<usize> {
    if !(dt > 0.0 && rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("select_stages needs dt > 0 and rho >= 0 (dt={dt}, rho={rho})")));
    }
    let floor = match method {
        Method::Rkc => 2,
        Method::Rock2 => 3,
    };
    let need = dt * rho;
    let per = match method {
        Method::Rkc => 0.653,
        Method::Rock2 => 0.811,
    };
    let mut s = ((need / per).sqrt().ceil() as usize).max(floor).max(min_stages);
    while s > 1 && nominal_bound(method, s - 1) * (1.0 + 1e-12) >= need && s - 1 >= floor.max(min_stages) {
        s -= 1;
    }
    while nominal_bound(method, s) * (1.0 + 1e-12) < need {
        s += 1;
    }
    if s > cap {
        return Err(Error::StageCap { required: s, cap });
    }
    if method == Method::Rock2 {
        let table = Rock2Table::global();
        return table.at_least(s).filter(|&d| d <= cap).ok_or(Error::StageCap { required: s, cap });
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_t2() {
        let (t, d1, d2) = chebyshev_values(2, 1.0375);
        assert!((t[2] - 1.1528125).abs() < 1e-14);
        assert!((d1[2] - 4.15).abs() < 1e-14);
        assert!((d2[2] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rkc_s2_coefficients() {
        let t = RkcTableau::new(2, 0.15).unwrap();
        assert!((t.w0 - 1.0375).abs() < 1e-15);
        assert!((t.w1 - 1.0375).abs() < 1e-14);
        assert!((t.b[2] - 4.0 / (4.15 * 4.15)).abs() < 1e-15);
        assert!((t.b[2] - 0.2322543).abs() < 1e-7);
        assert!((t.a[2] - (1.0 - t.b[2] * 1.1528125)).abs() < 1e-15);
        assert!((t.a[2] - 0.7322544).abs() < 1e-7);
        // kappa_1 = c_2 / T_2'(w0)
        assert!((t.kappa[1] - t.c[2] / 4.15).abs() < 1e-12);
    }

    #[test]
    fn rkc_damping() {
        for s in [5, 10, 20] {
            let t = RkcTableau::new(s, 0.15).unwrap();
            assert!((t.a[s] + t.b[s] - (1.0 - 0.05)).abs() < 2e-2);
        }
    }

    #[test]
    fn rkc_nodes_increase_and_end_at_one() {
        for s in [3, 10, 30] {
            let c = nodes_c(Method::Rkc, s).unwrap();
            assert_eq!(c.len(), s + 1);
            assert!((c[s] - 1.0).abs() < 1e-10);
            assert!(c.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn rock2_nodes_end_at_one() {
        for s in [3, 10, 30] {
            let c = nodes_c(Method::Rock2, s).unwrap();
            assert_eq!(c.len(), s + 1);
            assert!((c[s] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn order_conditions_all_tables() {
        for s in 2..=50 {
            let (o1, o2) = RkcTableau::new(s, 0.15).unwrap().butcher().order_residuals();
            assert!(o1.abs() < 1e-10 && o2.abs() < 1e-10, "rkc s={s}: {o1:e} {o2:e}");
        }
        let table = Rock2Table::global();
        for s in table.degrees() {
            let bt = table.get(s).unwrap().butcher();
            let (o1, o2) = bt.order_residuals();
            assert!(o1.abs() < 1e-10 && o2.abs() < 1e-10, "rock2 s={s}");
            let t = table.get(s).unwrap();
            assert!((bt.b[s - 1] - t.tau / t.sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn unsupported_degree_lists_neighbours() {
        match rock2_tableau(21) {
            Err(Error::UnsupportedDegree { s, nearest }) => {
                assert_eq!(s, 21);
                assert_eq!(nearest, vec![20, 22]);
            }
            other => panic!("{other:?}"),
        }
        assert!(rock2_tableau(1000).is_err());
    }

    #[test]
    fn stability_polynomial_consistency() {
        for s in [3, 5, 10] {
            for m in [Method::Rkc, Method::Rock2] {
                assert!((stability_poly_eval(m, s, 0.0).unwrap() - 1.0).abs() < 1e-13);
                let h = 1e-5;
                let d = (stability_poly_eval(m, s, h).unwrap() - stability_poly_eval(m, s, -h).unwrap()) / (2.0 * h);
                assert!((d - 1.0).abs() < 1e-6);
            }
            let rkc = RkcTableau::new(s, 0.15).unwrap();
            let z = -0.37 * s as f64;
            assert!((rkc.stability_polynomial(z) - stability_poly_eval(Method::Rkc, s, z).unwrap()).abs() < 1e-12);
            let r2 = rock2_tableau(s).unwrap();
            assert!((r2.stability_polynomial(z) - stability_poly_eval(Method::Rock2, s, z).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rkc_damped_strip() {
        let t = RkcTableau::new(15, 0.15).unwrap();
        let l = 0.653 * 225.0;
        let n = 4000;
        let worst = (0..=n)
            .map(|k| -1.0 - (0.9 * l - 1.0) * k as f64 / n as f64)
            .map(|z| t.stability_polynomial(z).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 0.98, "{worst}");
    }

    #[test]
    fn stage_selection() {
        assert_eq!(select_stages(1e-12, 1.0, Method::Rkc, 0).unwrap(), 2);
        assert_eq!(select_stages(1e-12, 1.0, Method::Rkc, 3).unwrap(), 3);
        assert_eq!(select_stages(1e-12, 1.0, Method::Rock2, 0).unwrap(), 3);
        assert_eq!(select_stages(65.3, 1.0, Method::Rkc, 0).unwrap(), 10);
        assert_eq!(select_stages(81.1, 1.0, Method::Rock2, 0).unwrap(), 10);
        assert_eq!(select_stages(65.4, 1.0, Method::Rkc, 0).unwrap(), 11);
        // 0.811 * 21^2 needs degree 21, which is absent: next is 22
        assert_eq!(select_stages(0.811 * 441.0, 1.0, Method::Rock2, 0).unwrap(), 22);
        assert!(matches!(select_stages(1e9, 1.0, Method::Rkc, 0), Err(Error::StageCap { .. })));
    }

    #[test]
    fn parse_rejects_bad_records() {
        assert!(Rock2Table::parse("# nothing\n").is_err());
        assert!(Rock2Table::parse("5 0.1 0.2 3 1 2").is_err());
        assert!(Rock2Table::parse("5 0.1 0.2 3 1 2 3 0 -1 -1 0 0 0").is_err());
    }
}
