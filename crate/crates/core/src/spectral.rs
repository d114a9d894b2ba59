//! Fourier representation of real periodic vector fields on the unit torus.
//!
//! A field of truncation radius `n` is stored as three component arrays
//! over the cube `[-n, n]³` of wavevectors; coefficients outside the
//! Euclidean ball `|k| <= n` are kept at zero. The expansion convention is
//! `f(x) = Σ f̂_k e^{2πik·x}`, so `∂_j` multiplies by `2πi k_j` while the
//! fractional Laplacian `Λ^α` multiplies by `|k|^α` with no `2π` factor.

use std::f64::consts::PI;
use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;

pub const TWO_PI: f64 = 2.0 * PI;

#[inline]
pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Integer wavevector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode(pub [i32; 3]);

impl Mode {
    pub const ZERO: Mode = Mode([0, 0, 0]);

    pub fn norm2(self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn norm(self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    pub fn as_f64(self) -> [f64; 3] {
        [self.0[0] as f64, self.0[1] as f64, self.0[2] as f64]
    }

    /// True for the canonical half-space representative: first nonzero
    /// component positive (the zero mode is excluded).
    pub fn is_positive_half(self) -> bool {
        match self.0.iter().find(|&&c| c != 0) {
            Some(&c) => c > 0,
            None => false,
        }
    }
}

impl Neg for Mode {
    type Output = Mode;
    fn neg(self) -> Mode {
        Mode([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Add for Mode {
    type Output = Mode;
    fn add(self, o: Mode) -> Mode {
        Mode([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Mode {
    type Output = Mode;
    fn sub(self, o: Mode) -> Mode {
        Mode([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

thread_local! {
    static BALLS: RefCell<HashMap<usize, Arc<[(usize, Mode)]>>> = RefCell::new(HashMap::new());
}

fn ball_table(n: usize) -> Arc<[(usize, Mode)]> {
    BALLS.with(|b| {
        b.borrow_mut()
            .entry(n)
            .or_insert_with(|| {
                let ni = n as i32;
                let r2 = (n * n) as i64;
                let mut out = Vec::new();
                let mut idx = 0usize;
                for a in -ni..=ni {
                    for b in -ni..=ni {
                        for c in -ni..=ni {
                            let k = Mode([a, b, c]);
                            if k.norm2() <= r2 {
                                out.push((idx, k));
                            }
                            idx += 1;
                        }
                    }
                }
                out.into()
            })
            .clone()
    })
}

/// Regularity exponent of a Sobolev norm.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SobolevIndex(pub f64);

impl From<f64> for SobolevIndex {
    fn from(s: f64) -> Self {
        SobolevIndex(s)
    }
}

/// Truncated Fourier coefficients of a real vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    n: usize,
    comps: [Vec<Complex64>; 3],
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        let len = (2 * n + 1).pow(3);
        SpectralField { n, comps: [vec![ZERO; len], vec![ZERO; len], vec![ZERO; len]] }
    }

    /// Build from a per-mode function evaluated on the ball `|k| <= n`.
    /// The caller is responsible for Hermitian symmetry.
    pub fn from_fn(n: usize, mut f: impl FnMut(Mode) -> [Complex64; 3]) -> Self {
        let mut out = Self::zeros(n);
        for &(idx, k) in out.ball_modes().iter() {
            let v = f(k);
            for c in 0..3 {
                out.comps[c][idx] = v[c];
            }
        }
        out
    }

    /// A spatially constant field.
    pub fn constant(n: usize, v: [f64; 3]) -> Self {
        let mut out = Self::zeros(n);
        let idx = out.index(Mode::ZERO).unwrap();
        for c in 0..3 {
            out.comps[c][idx] = c64(v[c], 0.0);
        }
        out
    }

    /// Field `amp·cos(2πk·x) + bmp·sin(2πk·x)` for real vectors `amp`, `bmp`.
    pub fn trig_mode(n: usize, k: Mode, amp: [f64; 3], bmp: [f64; 3]) -> Self {
        let mut out = Self::zeros(n);
        if k == Mode::ZERO {
            return Self::constant(n, amp);
        }
        // cos = (e + e*)/2, sin = (e - e*)/(2i)
        let v: [Complex64; 3] = std::array::from_fn(|c| c64(0.5 * amp[c], -0.5 * bmp[c]));
        out.set_real_mode(k, v);
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.comps[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn comps(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.comps
    }

    pub fn in_ball(&self, k: Mode) -> bool {
        k.norm2() <= (self.n * self.n) as i64
    }

    /// Cube index of `k`, or `None` outside the ball.
    pub fn index(&self, k: Mode) -> Option<usize> {
        if !self.in_ball(k) {
            return None;
        }
        let n = self.n as i32;
        let s = self.side();
        Some((((k.0[0] + n) as usize) * s + (k.0[1] + n) as usize) * s + (k.0[2] + n) as usize)
    }

    pub fn mode_at(&self, idx: usize) -> Mode {
        let s = self.side();
        let n = self.n as i32;
        Mode([(idx / (s * s)) as i32 - n, ((idx / s) % s) as i32 - n, (idx % s) as i32 - n])
    }

    /// Index of `-k` given the index of `k`.
    #[inline]
    pub fn mirror(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    /// `(index, mode)` for every mode in the ball, in lexicographic order.
    pub fn ball_modes(&self) -> Arc<[(usize, Mode)]> {
        ball_table(self.n)
    }

    pub fn get(&self, k: Mode) -> [Complex64; 3] {
        match self.index(k) {
            Some(i) => [self.comps[0][i], self.comps[1][i], self.comps[2][i]],
            None => [ZERO; 3],
        }
    }

    pub fn at(&self, idx: usize) -> [Complex64; 3] {
        [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]]
    }

    /// Set the coefficient at `k` and its conjugate at `-k`. Modes outside the
    /// ball are ignored.
    pub fn set_real_mode(&mut self, k: Mode, v: [Complex64; 3]) {
        if let (Some(i), Some(j)) = (self.index(k), self.index(-k)) {
            for c in 0..3 {
                if i == j {
                    self.comps[c][i] = c64(v[c].re, 0.0);
                } else {
                    self.comps[c][i] = v[c];
                    self.comps[c][j] = v[c].conj();
                }
            }
        }
    }

    /// Apply a per-mode linear map (given mode and coefficient vector).
    pub fn map_modes(&self, mut f: impl FnMut(Mode, [Complex64; 3]) -> [Complex64; 3]) -> Self {
        let mut out = Self::zeros(self.n);
        for &(idx, k) in self.ball_modes().iter() {
            let v = f(k, self.at(idx));
            for c in 0..3 {
                out.comps[c][idx] = v[c];
            }
        }
        out
    }

    /// Multiply every component by a real per-mode weight.
    pub fn scale_modes(&self, mut w: impl FnMut(Mode) -> f64) -> Self {
        self.map_modes(|k, v| {
            let s = w(k);
            [v[0] * s, v[1] * s, v[2] * s]
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|z| *z *= a);
        out
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.n, other.n, "truncation radius mismatch");
        for c in 0..3 {
            for (x, y) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *x += y * a;
            }
        }
    }

    /// Keep only component `c` (used for scalar quantities, which are
    /// carried in component 0).
    pub fn component(&self, c: usize) -> Self {
        let mut out = Self::zeros(self.n);
        out.comps[0] = self.comps[c].clone();
        out
    }

    /// Real `L²(T³)` inner product `Σ_k Re(f̂_k · conj(ĝ_k))`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.n, other.n, "truncation radius mismatch");
        let mut acc = 0.0;
        for c in 0..3 {
            for (x, y) in self.comps[c].iter().zip(&other.comps[c]) {
                acc += x.re * y.re + x.im * y.im;
            }
        }
        acc
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn mean(&self) -> [Complex64; 3] {
        self.get(Mode::ZERO)
    }

    pub fn is_mean_free(&self) -> bool {
        self.mean().iter().all(|z| *z == ZERO)
    }

    /// `max_k |f̂(-k) - conj(f̂(k))|`.
    pub fn hermitian_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for c in 0..3 {
            let v = &self.comps[c];
            for idx in 0..v.len() {
                r = r.max((v[self.mirror(idx)] - v[idx].conj()).norm());
            }
        }
        r
    }

    /// `max_k |k · f̂_k|` (integer wavevector, no `2π`).
    pub fn divergence_residual(&self) -> f64 {
        let mut r: f64 = 0.0;
        for &(idx, k) in self.ball_modes().iter() {
            let kf = k.as_f64();
            let d = self.comps[0][idx] * kf[0] + self.comps[1][idx] * kf[1] + self.comps[2][idx] * kf[2];
            r = r.max(d.norm());
        }
        r
    }

    /// Re-embed at a different radius: zero-padding when growing, sharp ball
    /// truncation when shrinking.
    pub fn resized(&self, n: usize) -> Self {
        let mut out = Self::zeros(n);
        for &(idx, k) in out.ball_modes().iter() {
            if let Some(src) = self.index(k) {
                for c in 0..3 {
                    out.comps[c][idx] = self.comps[c][src];
                }
            }
        }
        out
    }

    fn zip_with(&self, other: &SpectralField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!(self.n, other.n, "truncation radius mismatch");
        let mut out = self.clone();
        for c in 0..3 {
            for (x, y) in out.comps[c].iter_mut().zip(&other.comps[c]) {
                *x = f(*x, *y);
            }
        }
        out
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, o: &SpectralField) -> SpectralField {
        self.zip_with(o, |a, b| a + b)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, o: &SpectralField) -> SpectralField {
        self.zip_with(o, |a, b| a - b)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scaled(a)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

/// Real vector field sampled on an `m³` uniform grid, `x = (i, j, l)/m`,
/// stored component-major with `l` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    m: usize,
    comps: [Vec<f64>; 3],
}

impl GridField {
    pub fn new(m: usize, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != m * m * m {
                return Err(Error::InvalidArgument(format!("grid component length {} != {}³", c.len(), m)));
            }
        }
        Ok(GridField { m, comps })
    }

    pub fn from_fn(m: usize, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut comps = [vec![0.0; m * m * m], vec![0.0; m * m * m], vec![0.0; m * m * m]];
        let h = 1.0 / m as f64;
        for i in 0..m {
            for j in 0..m {
                for l in 0..m {
                    let v = f([i as f64 * h, j as f64 * h, l as f64 * h]);
                    let idx = (i * m + j) * m + l;
                    for c in 0..3 {
                        comps[c][idx] = v[c];
                    }
                }
            }
        }
        GridField { m, comps }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn comps(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn into_comps(self) -> [Vec<f64>; 3] {
        self.comps
    }

    /// Grid quadrature of `|f|²` over the unit torus.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.comps.iter().flatten().map(|x| x * x).sum();
        (sum / (self.m * self.m * self.m) as f64).sqrt()
    }

    /// Maximum pointwise Euclidean magnitude.
    pub fn sup_norm(&self) -> f64 {
        let len = self.m * self.m * self.m;
        (0..len)
            .map(|i| (self.comps[0][i].powi(2) + self.comps[1][i].powi(2) + self.comps[2][i].powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Smallest even grid size `M >= 3n + 1` with prime factors in {2, 3, 5, 7}.
/// This is the exact 3/2-rule for quadratic products of fields on the ball
/// `|k| <= n`: aliases of `k + k'` with `|k_i + k'_i| <= 2n` fall outside
/// `[-n, n]`.
pub fn dealias_grid_size(n: usize) -> usize {
    smooth_even_at_least(3 * n + 1)
}

/// Smallest even size `>= min` whose prime factors are all in {2, 3, 5, 7}.
pub fn smooth_even_at_least(min: usize) -> usize {
    let mut m = min.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5, 7] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Grid values to Fourier coefficients of radius `n`.
pub fn forward_transform(g: &GridField, n: usize) -> Result<SpectralField> {
    if g.m < 2 * n + 1 {
        return Err(Error::GridTooSmall { m: g.m, n, need: 2 * n + 1 });
    }
    if g.comps.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteGrid);
    }
    let plan = Fft3::get(g.m);
    let spectra = plan.analyze(&[&g.comps[0], &g.comps[1], &g.comps[2]], n);
    let mut it = spectra.into_iter();
    Ok(SpectralField { n, comps: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] })
}

/// Evaluate a field on an `m³` grid.
pub fn inverse_transform(f: &SpectralField, m: usize) -> Result<GridField> {
    if m < 2 * f.n + 1 {
        return Err(Error::GridTooSmall { m, n: f.n, need: 2 * f.n + 1 });
    }
    let plan = Fft3::get(m);
    let grids = plan.synthesize(&[&f.comps[0], &f.comps[1], &f.comps[2]], f.n);
    let mut it = grids.into_iter();
    Ok(GridField { m, comps: [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] })
}

/// Multiply by `2πi k_axis` (axis in 0..3).
pub fn differentiate(f: &SpectralField, axis: usize) -> SpectralField {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    f.map_modes(|k, v| {
        let d = c64(0.0, TWO_PI * k.0[axis] as f64);
        [v[0] * d, v[1] * d, v[2] * d]
    })
}

/// `2πi (k × v̂_k)`.
pub fn curl(f: &SpectralField) -> SpectralField {
    f.map_modes(|k, v| {
        let kf = k.as_f64();
        let i2p = c64(0.0, TWO_PI);
        [
            (v[2] * kf[1] - v[1] * kf[2]) * i2p,
            (v[0] * kf[2] - v[2] * kf[0]) * i2p,
            (v[1] * kf[0] - v[0] * kf[1]) * i2p,
        ]
    })
}

/// Divergence, returned as a scalar in component 0.
pub fn divergence(f: &SpectralField) -> SpectralField {
    f.map_modes(|k, v| {
        let kf = k.as_f64();
        let d = (v[0] * kf[0] + v[1] * kf[1] + v[2] * kf[2]) * c64(0.0, TWO_PI);
        [d, ZERO, ZERO]
    })
}

/// Gradient of the scalar carried in component 0.
pub fn gradient(f: &SpectralField) -> SpectralField {
    f.map_modes(|k, v| {
        let kf = k.as_f64();
        let s = v[0] * c64(0.0, TWO_PI);
        [s * kf[0], s * kf[1], s * kf[2]]
    })
}

/// Per-mode orthogonal projection onto `k^⊥`; the mean is left unchanged.
pub fn leray_project(f: &SpectralField) -> SpectralField {
    f.map_modes(|k, v| {
        if k == Mode::ZERO {
            return v;
        }
        let kf = k.as_f64();
        let k2 = k.norm2() as f64;
        let dot = (v[0] * kf[0] + v[1] * kf[1] + v[2] * kf[2]) / k2;
        [v[0] - dot * kf[0], v[1] - dot * kf[1], v[2] - dot * kf[2]]
    })
}

/// Sharp Fourier-ball truncation `|k| <= n` (the radius of the container is
/// unchanged).
pub fn truncate(f: &SpectralField, n: usize) -> SpectralField {
    let r2 = (n * n) as i64;
    f.map_modes(|k, v| if k.norm2() <= r2 { v } else { [ZERO; 3] })
}

/// `Λ^α`: multiply by `|k|^α`, zero mode to zero.
pub fn apply_fractional_laplacian(f: &SpectralField, alpha: f64) -> Result<SpectralField> {
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveExponent(alpha));
    }
    Ok(fractional_multiplier(f, alpha))
}

/// `|k|^e` multiplier for any real exponent; the zero mode is sent to zero.
pub fn fractional_multiplier(f: &SpectralField, exponent: f64) -> SpectralField {
    f.scale_modes(|k| if k == Mode::ZERO { 0.0 } else { (k.norm2() as f64).powf(0.5 * exponent) })
}

/// `H^s` norm `(Σ (1+|k|^{2s})|f̂_k|²)^{1/2}`, or the `Ḣ^s` semi-norm.
pub fn sobolev_norm(f: &SpectralField, s: impl Into<SobolevIndex>, homogeneous: bool) -> f64 {
    let s = s.into().0;
    let mut acc = 0.0;
    for &(idx, k) in f.ball_modes().iter() {
        let mag2: f64 = (0..3).map(|c| f.comps[c][idx].norm_sqr()).sum();
        if mag2 == 0.0 {
            continue;
        }
        let w = if k == Mode::ZERO {
            if homogeneous {
                0.0
            } else {
                1.0
            }
        } else {
            let ks = (k.norm2() as f64).powf(s);
            if homogeneous {
                ks
            } else {
                1.0 + ks
            }
        };
        acc += w * mag2;
    }
    acc.sqrt()
}

/// Field values and Jacobian `∂_i f_j` on an `m³` grid.
pub struct FieldSamples {
    pub m: usize,
    pub values: [Vec<f64>; 3],
    /// `jacobian[i][j] = ∂_i f_j`.
    pub jacobian: [[Vec<f64>; 3]; 3],
}

impl FieldSamples {
    pub fn evaluate(f: &SpectralField, m: usize) -> Result<Self> {
        if m < 2 * f.n + 1 {
            return Err(Error::GridTooSmall { m, n: f.n, need: 2 * f.n + 1 });
        }
        Ok(Self::sample(f, m))
    }

    /// Like [`FieldSamples::evaluate`] but accepts `m = 2n`, where the `±n`
    /// modes alias onto one grid line. Only useful for negative controls.
    pub fn evaluate_aliased(f: &SpectralField, m: usize) -> Result<Self> {
        if m < 2 * f.n.max(1) {
            return Err(Error::GridTooSmall { m, n: f.n, need: 2 * f.n.max(1) });
        }
        Ok(Self::sample(f, m))
    }

    fn sample(f: &SpectralField, m: usize) -> Self {
        let grads: Vec<SpectralField> = (0..3).map(|i| differentiate(f, i)).collect();
        let mut spectra: Vec<&[Complex64]> = f.comps.iter().map(|v| v.as_slice()).collect();
        for g in &grads {
            spectra.extend(g.comps.iter().map(|v| v.as_slice()));
        }
        let mut grids = Fft3::get(m).synthesize(&spectra, f.n).into_iter();
        let mut next = || grids.next().unwrap();
        let values = [next(), next(), next()];
        let jacobian = [[next(), next(), next()], [next(), next(), next()], [next(), next(), next()]];
        FieldSamples { m, values, jacobian }
    }

    /// `(sup |f|, sup |∇f|)` with Euclidean (Frobenius) pointwise magnitudes.
    pub fn sup_norms(&self) -> (f64, f64) {
        let len = self.m.pow(3);
        let mut sup_f: f64 = 0.0;
        let mut sup_g: f64 = 0.0;
        for p in 0..len {
            let v = self.values[0][p].powi(2) + self.values[1][p].powi(2) + self.values[2][p].powi(2);
            let mut g = 0.0;
            for row in &self.jacobian {
                for col in row {
                    g += col[p] * col[p];
                }
            }
            sup_f = sup_f.max(v);
            sup_g = sup_g.max(g);
        }
        (sup_f.sqrt(), sup_g.sqrt())
    }

    pub fn w1inf(&self) -> f64 {
        let (a, b) = self.sup_norms();
        a.max(b)
    }

    /// Pointwise curl `J_i = ε_{ijk} ∂_j f_k` from the Jacobian.
    pub fn curl_values(&self) -> [Vec<f64>; 3] {
        let d = &self.jacobian;
        let len = self.m.pow(3);
        let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
        for p in 0..len {
            out[0][p] = d[1][2][p] - d[2][1][p];
            out[1][p] = d[2][0][p] - d[0][2][p];
            out[2][p] = d[0][1][p] - d[1][0][p];
        }
        out
    }
}

/// `max(‖f‖_{L∞}, ‖∇f‖_{L∞})` sampled on an `m³` grid.
pub fn w1inf_norm(f: &SpectralField, m: usize) -> Result<f64> {
    Ok(FieldSamples::evaluate(f, m)?.w1inf())
}

/// Bilinear pointwise products.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductOp {
    /// `f × g`
    Cross,
    /// `f · g`, a scalar carried in component 0
    Dot,
    /// `g₀ f`, with the scalar taken from component 0 of `g`
    Scale,
}

/// Pointwise product evaluated on a zero-padded grid and truncated back to
/// radius `n`.
pub fn dealiased_product(f: &SpectralField, g: &SpectralField, op: ProductOp) -> Result<SpectralField> {
    if f.n != g.n {
        return Err(Error::RadiusMismatch(f.n, g.n));
    }
    product_on_grid(f, g, op, dealias_grid_size(f.n))
}

/// Same as [`dealiased_product`] on an explicit grid size; `m < 3n+1`
/// produces aliased products, and at `m = 2n` the factors themselves alias
/// (the `±n` modes share a grid line).
pub fn product_on_grid(f: &SpectralField, g: &SpectralField, op: ProductOp, m: usize) -> Result<SpectralField> {
    if f.n != g.n {
        return Err(Error::RadiusMismatch(f.n, g.n));
    }
    let n = f.n;
    if m < 2 * n.max(1) {
        return Err(Error::GridTooSmall { m, n, need: 2 * n.max(1) });
    }
    let plan = Fft3::get(m);
    let spectra: Vec<&[Complex64]> = match op {
        ProductOp::Scale => {
            vec![&f.comps[0], &f.comps[1], &f.comps[2], &g.comps[0]]
        }
        _ => vec![&f.comps[0], &f.comps[1], &f.comps[2], &g.comps[0], &g.comps[1], &g.comps[2]],
    };
    let grids = plan.synthesize(&spectra, n);
    let grids = pointwise(&grids, op);
    let refs: Vec<&[f64]> = grids.iter().map(|v| v.as_slice()).collect();
    let spectra = plan.analyze(&refs, n);
    Ok(assemble(n, spectra))
}

pub(crate) fn assemble(n: usize, spectra: Vec<Vec<Complex64>>) -> SpectralField {
    let len = (2 * n + 1).pow(3);
    let mut it = spectra.into_iter();
    let a = it.next().unwrap_or_else(|| vec![ZERO; len]);
    let b = it.next().unwrap_or_else(|| vec![ZERO; len]);
    let c = it.next().unwrap_or_else(|| vec![ZERO; len]);
    SpectralField { n, comps: [a, b, c] }
}

fn pointwise(grids: &[Vec<f64>], op: ProductOp) -> Vec<Vec<f64>> {
    let len = grids[0].len();
    match op {
        ProductOp::Cross => {
            let (a, b) = (&grids[0..3], &grids[3..6]);
            let mut out = vec![vec![0.0; len], vec![0.0; len], vec![0.0; len]];
            for p in 0..len {
                out[0][p] = a[1][p] * b[2][p] - a[2][p] * b[1][p];
                out[1][p] = a[2][p] * b[0][p] - a[0][p] * b[2][p];
                out[2][p] = a[0][p] * b[1][p] - a[1][p] * b[0][p];
            }
            out
        }
        ProductOp::Dot => {
            let (a, b) = (&grids[0..3], &grids[3..6]);
            vec![(0..len).map(|p| a[0][p] * b[0][p] + a[1][p] * b[1][p] + a[2][p] * b[2][p]).collect()]
        }
        ProductOp::Scale => {
            let s = &grids[3];
            (0..3).map(|c| (0..len).map(|p| grids[c][p] * s[p]).collect()).collect()
        }
    }
}

/// Analyze grid values into a field of radius `n` (at most three components).
pub(crate) fn analyze_components(grids: &[&[f64]], n: usize, m: usize) -> SpectralField {
    assemble(n, Fft3::get(m).analyze(grids, n))
}
