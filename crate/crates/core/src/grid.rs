//! Uniform MAC grid on the unit square, field containers and norms.
//!
//! Indices follow the staggered layout: `u(i, j)` lives at
//! `(i dx, (j - 1/2) dx)` for `i = 1..N-1, j = 1..N`, `v(i, j)` at
//! `((i - 1/2) dx, j dx)` for `i = 1..N, j = 1..N-1`, and cell values at
//! `((i - 1/2) dx, (j - 1/2) dx)`. Boundary-normal velocities are never
//! stored; they come from [`BoundaryData`].

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Point function `(t, x, y) -> (a, b)`.
pub type PointFn = Arc<dyn Fn(f64, f64, f64) -> (f64, f64) + Send + Sync>;
/// Scalar point function `(t, x, y) -> value`.
pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n: usize,
    pub dx: f64,
    pub nu: f64,
}

impl GridSpec {
    /// Grid with `n` cells per side and viscosity `1 / re`.
    pub fn new(n: usize, re: f64) -> Result<Self> {
        if !(re > 0.0 && re.is_finite()) {
            return Err(Error::InvalidArgument(format!("Reynolds number must be positive, got {re}")));
        }
        Self::with_nu(n, 1.0 / re)
    }

    pub fn with_nu(n: usize, nu: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidArgument(format!("N must be at least 4, got {n}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
        }
        Ok(Self { n, dx: 1.0 / n as f64, nu })
    }

    /// Number of stored u unknowns, `(N-1) N`.
    pub fn nu_len(&self) -> usize {
        (self.n - 1) * self.n
    }

    pub fn nv_len(&self) -> usize {
        self.n * (self.n - 1)
    }

    /// Length of the flattened velocity state.
    pub fn state_len(&self) -> usize {
        self.nu_len() + self.nv_len()
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    /// Flat index of `u(i, j)`, 1-based indices.
    #[inline]
    pub fn u_idx(&self, i: usize, j: usize) -> usize {
        (j - 1) * (self.n - 1) + (i - 1)
    }

    /// Flat index of `v(i, j)` inside the full state (after all u values).
    #[inline]
    pub fn v_idx(&self, i: usize, j: usize) -> usize {
        self.nu_len() + (j - 1) * self.n + (i - 1)
    }

    #[inline]
    pub fn cell_idx(&self, i: usize, j: usize) -> usize {
        (j - 1) * self.n + (i - 1)
    }

    pub fn u_point(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.dx, (j as f64 - 0.5) * self.dx)
    }

    pub fn v_point(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 - 0.5) * self.dx, j as f64 * self.dx)
    }

    pub fn cell_point(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 - 0.5) * self.dx, (j as f64 - 0.5) * self.dx)
    }

    /// Inverse of [`GridSpec::u_point`]; `None` if the point is not a u node.
    pub fn u_index_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = x * self.n as f64;
        let fj = y * self.n as f64 + 0.5;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        (1..self.n).contains(&i).then_some(())?;
        (1..=self.n).contains(&j).then_some((i, j))
    }

    pub fn v_index_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (j, i) = self.u_index_of(y, x)?;
        Some((i, j))
    }

    pub fn cell_index_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = x * self.n as f64 + 0.5;
        let fj = y * self.n as f64 + 0.5;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        ((1..=self.n).contains(&i) && (1..=self.n).contains(&j)).then_some((i, j))
    }
}

/// Face-normal velocities; `data` is the integrator state (u block, then v block).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub n: usize,
    pub data: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(spec: &GridSpec) -> Self {
        Self { n: spec.n, data: vec![0.0; spec.state_len()] }
    }

    pub fn from_vec(spec: &GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != spec.state_len() {
            return Err(Error::LengthMismatch { expected: spec.state_len(), got: data.len() });
        }
        Ok(Self { n: spec.n, data })
    }

    fn nu_len(&self) -> usize {
        (self.n - 1) * self.n
    }

    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.data[(j - 1) * (self.n - 1) + (i - 1)]
    }

    pub fn v(&self, i: usize, j: usize) -> f64 {
        self.data[self.nu_len() + (j - 1) * self.n + (i - 1)]
    }

    pub fn set_u(&mut self, i: usize, j: usize, val: f64) {
        let k = (j - 1) * (self.n - 1) + (i - 1);
        self.data[k] = val;
    }

    pub fn set_v(&mut self, i: usize, j: usize, val: f64) {
        let k = self.nu_len() + (j - 1) * self.n + (i - 1);
        self.data[k] = val;
    }

    pub fn u_part(&self) -> &[f64] {
        &self.data[..self.nu_len()]
    }

    pub fn v_part(&self) -> &[f64] {
        &self.data[self.nu_len()..]
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.data)
    }
}

/// Cell-centred scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub n: usize,
    pub data: Vec<f64>,
}

impl CellField {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::LengthMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[(j - 1) * self.n + (i - 1)]
    }

    pub fn set(&mut self, i: usize, j: usize, val: f64) {
        self.data[(j - 1) * self.n + (i - 1)] = val;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Shift to zero mean (pressure gauge).
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        self.data.iter_mut().for_each(|x| *x -= m);
    }

    pub fn inf_norm(&self) -> f64 {
        inf_norm(&self.data)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|x| a * x).collect() }
    }
}

/// Max absolute entry (0 for an empty slice).
pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `sqrt(mean((err_k / (atol + rtol |y_k|))^2))`; a step is acceptable when this is at most 1.
pub fn weighted_rms_norm(err: &[f64], y: &[f64], atol: f64, rtol: f64) -> Result<f64> {
    if err.is_empty() {
        return Err(Error::EmptyState);
    }
    if err.len() != y.len() {
        return Err(Error::LengthMismatch { expected: err.len(), got: y.len() });
    }
    if !(atol > 0.0 && rtol > 0.0) {
        return Err(Error::InvalidArgument("atol and rtol must be positive".into()));
    }
    let s: f64 = err
        .iter()
        .zip(y)
        .map(|(e, yk)| {
            let r = e / (atol + rtol * yk.abs());
            r * r
        })
        .sum();
    Ok((s / err.len() as f64).sqrt())
}

/// Dirichlet velocity data on the boundary of the unit square.
#[derive(Clone)]
pub struct BoundaryData {
    pub velocity: PointFn,
    /// Time derivative of the boundary velocity.
    pub velocity_dt: Option<PointFn>,
    /// Exact `(du/dy, dv/dx)`, used by the PM3 boundary treatment.
    pub tangential_normal_derivative: Option<PointFn>,
}

impl std::fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryData")
            .field("velocity_dt", &self.velocity_dt.is_some())
            .field("tangential_normal_derivative", &self.tangential_normal_derivative.is_some())
            .finish()
    }
}

impl BoundaryData {
    /// Homogeneous (no-slip, no-penetration) data.
    pub fn homogeneous() -> Self {
        let zero: PointFn = Arc::new(|_, _, _| (0.0, 0.0));
        Self { velocity: zero.clone(), velocity_dt: Some(zero), tangential_normal_derivative: None }
    }

    /// Discrete outward flux, sum of normal face velocities times `dx`.
    pub fn boundary_flux(&self, spec: &GridSpec, t: f64) -> f64 {
        let w = WallValues::sample(&self.velocity, spec, t);
        let mut flux = 0.0;
        for k in 0..spec.n {
            flux += w.u_right[k] - w.u_left[k] + w.v_top[k] - w.v_bottom[k];
        }
        flux * spec.dx
    }
}

/// Boundary values needed by the stencils at one instant.
///
/// Normal values are sampled at face midpoints (`u_left[j-1]` at
/// `(0, (j-1/2) dx)`), tangential values at the wall projection of the
/// nearest unknowns (`ut_bottom[i-1]` at `(i dx, 0)`).
#[derive(Debug, Clone)]
pub struct WallValues {
    pub u_left: Vec<f64>,
    pub u_right: Vec<f64>,
    pub v_bottom: Vec<f64>,
    pub v_top: Vec<f64>,
    pub ut_bottom: Vec<f64>,
    pub ut_top: Vec<f64>,
    pub vt_left: Vec<f64>,
    pub vt_right: Vec<f64>,
}

impl WallValues {
    pub fn sample(f: &PointFn, spec: &GridSpec, t: f64) -> Self {
        let n = spec.n;
        let dx = spec.dx;
        let mut w = WallValues {
            u_left: Vec::with_capacity(n),
            u_right: Vec::with_capacity(n),
            v_bottom: Vec::with_capacity(n),
            v_top: Vec::with_capacity(n),
            ut_bottom: Vec::with_capacity(n - 1),
            ut_top: Vec::with_capacity(n - 1),
            vt_left: Vec::with_capacity(n - 1),
            vt_right: Vec::with_capacity(n - 1),
        };
        for k in 1..=n {
            let mid = (k as f64 - 0.5) * dx;
            w.u_left.push(f(t, 0.0, mid).0);
            w.u_right.push(f(t, 1.0, mid).0);
            w.v_bottom.push(f(t, mid, 0.0).1);
            w.v_top.push(f(t, mid, 1.0).1);
        }
        for k in 1..n {
            let p = k as f64 * dx;
            w.ut_bottom.push(f(t, p, 0.0).0);
            w.ut_top.push(f(t, p, 1.0).0);
            w.vt_left.push(f(t, 0.0, p).1);
            w.vt_right.push(f(t, 1.0, p).1);
        }
        w
    }

    /// All-zero boundary values.
    pub fn zeros(spec: &GridSpec) -> Self {
        let n = spec.n;
        WallValues {
            u_left: vec![0.0; n],
            u_right: vec![0.0; n],
            v_bottom: vec![0.0; n],
            v_top: vec![0.0; n],
            ut_bottom: vec![0.0; n - 1],
            ut_top: vec![0.0; n - 1],
            vt_left: vec![0.0; n - 1],
            vt_right: vec![0.0; n - 1],
        }
    }
}

/// Sample an exact velocity at the staggered points.
pub fn sample_velocity(spec: &GridSpec, f: &dyn Fn(f64, f64, f64) -> (f64, f64), t: f64) -> VelocityField {
    let mut out = VelocityField::zeros(spec);
    let n = spec.n;
    for j in 1..=n {
        for i in 1..n {
            let (x, y) = spec.u_point(i, j);
            out.data[spec.u_idx(i, j)] = f(t, x, y).0;
        }
    }
    for j in 1..n {
        for i in 1..=n {
            let (x, y) = spec.v_point(i, j);
            out.data[spec.v_idx(i, j)] = f(t, x, y).1;
        }
    }
    out
}

/// Sample a scalar at cell centres.
pub fn sample_cells(spec: &GridSpec, f: &dyn Fn(f64, f64, f64) -> f64, t: f64) -> CellField {
    let mut out = CellField::zeros(spec.n);
    for j in 1..=spec.n {
        for i in 1..=spec.n {
            let (x, y) = spec.cell_point(i, j);
            out.set(i, j, f(t, x, y));
        }
    }
    out
}

/// Which component a field dump holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    U,
    V,
    P,
}

/// Text dump: header line then one value per line with 17 significant digits.
pub fn dump_field(kind: DumpKind, n: usize, t: f64, values: &[f64]) -> String {
    let name = match kind {
        DumpKind::U => "u",
        DumpKind::V => "v",
        DumpKind::P => "p",
    };
    let mut s = format!("# field={name} N={n} t={}\n", fmt17(t));
    for v in values {
        let _ = writeln!(s, "{}", fmt17(*v));
    }
    s
}

/// Parse a dump produced by [`dump_field`].
pub fn parse_field_dump(text: &str) -> Result<(DumpKind, usize, f64, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Io("empty dump".into()))?;
    let mut kind = None;
    let mut n = None;
    let mut t = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            match k {
                "field" => {
                    kind = Some(match v {
                        "u" => DumpKind::U,
                        "v" => DumpKind::V,
                        "p" => DumpKind::P,
                        _ => return Err(Error::Io(format!("unknown field {v}"))),
                    })
                }
                "N" => n = v.parse().ok(),
                "t" => t = v.parse().ok(),
                _ => {}
            }
        }
    }
    let values = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<f64>().map_err(|e| Error::Io(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    match (kind, n, t) {
        (Some(k), Some(n), Some(t)) => Ok((k, n, t, values)),
        _ => Err(Error::Io(format!("bad dump header: {header}"))),
    }
}

/// Format with 17 significant digits (round-trips exactly).
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> GridSpec {
        GridSpec::new(n, 100.0).unwrap()
    }

    #[test]
    fn rejects_small_grids_and_bad_viscosity() {
        assert!(GridSpec::new(3, 1.0).is_err());
        assert!(GridSpec::new(8, 0.0).is_err());
        assert!(GridSpec::with_nu(8, -1.0).is_err());
        let g = spec(8);
        assert_eq!(g.dx * 8.0, 1.0);
    }

    #[test]
    fn zero_function_samples_to_zero() {
        let g = spec(8);
        let f = sample_velocity(&g, &|_, _, _| (0.0, 0.0), 0.0);
        assert!(f.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_field_sampled_at_known_coordinates() {
        let g = spec(8);
        let f = sample_velocity(&g, &|_, x, y| (x, -y), 0.0);
        for j in 1..=8 {
            for i in 1..8 {
                assert!((f.u(i, j) - i as f64 * g.dx).abs() < 1e-15);
            }
        }
        for j in 1..8 {
            for i in 1..=8 {
                assert!((f.v(i, j) + j as f64 * g.dx).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn taylor_green_samples_pointwise() {
        let g = spec(8);
        let pi = std::f64::consts::PI;
        let f = sample_velocity(&g, &|_, x, y| (-(pi * x).sin() * (pi * y).cos(), (pi * x).cos() * (pi * y).sin()), 0.0);
        for j in 1..=8 {
            for i in 1..8 {
                let want = -(pi * i as f64 * g.dx).sin() * (pi * (j as f64 - 0.5) * g.dx).cos();
                assert!((f.u(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn inf_norm_cases() {
        assert_eq!(inf_norm(&[0.0; 5]), 0.0);
        assert_eq!(inf_norm(&[0.0, 3.0, 0.0]), 3.0);
        let a: Vec<f64> = (0..100).map(|k| (k as f64 * 0.37).sin().abs() * if k % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut brute = 0.0f64;
        for x in &a {
            if x.abs() > brute {
                brute = x.abs();
            }
        }
        assert_eq!(inf_norm(&a), brute);
    }

    #[test]
    fn weighted_norm_definition() {
        assert_eq!(weighted_rms_norm(&[0.0; 4], &[1.0; 4], 1e-3, 1e-3).unwrap(), 0.0);
        let v = weighted_rms_norm(&[1e-4; 6], &[0.0; 6], 1e-4, 7.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(weighted_rms_norm(&[], &[], 1.0, 1.0), Err(Error::EmptyState));
    }

    #[test]
    fn index_roundtrip() {
        let g = spec(16);
        for j in 1..=16 {
            for i in 1..16 {
                let (x, y) = g.u_point(i, j);
                assert_eq!(g.u_index_of(x, y), Some((i, j)));
                let (x, y) = g.v_point(j, i);
                assert_eq!(g.v_index_of(x, y), Some((j, i)));
            }
            for i in 1..=16 {
                let (x, y) = g.cell_point(i, j);
                assert_eq!(g.cell_index_of(x, y), Some((i, j)));
            }
        }
        assert_eq!(g.u_index_of(0.0, 0.5 / 16.0), None);
    }

    #[test]
    fn dump_roundtrip() {
        let vals = vec![0.1, -1.0 / 3.0, std::f64::consts::PI, 1e-300];
        let s = dump_field(DumpKind::P, 2, 0.25, &vals);
        assert!(s.starts_with("# field=p N=2 t="));
        let (k, n, t, back) = parse_field_dump(&s).unwrap();
        assert_eq!((k, n, t), (DumpKind::P, 2, 0.25));
        assert_eq!(back, vals);
    }

    #[test]
    fn homogeneous_flux_is_zero() {
        let g = spec(8);
        assert_eq!(BoundaryData::homogeneous().boundary_flux(&g, 0.3), 0.0);
    }
}
