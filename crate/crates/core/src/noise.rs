//! Divergence-free transport noise `Σ_k (c_k·∇)B ∘ dW^k`.

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::random::{keyed_rng, mix};
use crate::spectral::{
    analyze_components, c64, dealias_grid_size, differentiate, leray_project, Mode, SpectralField, TWO_PI, ZERO,
};

/// One coefficient field `c_k` with its nonzero Fourier support cached for
/// direct convolution.
#[derive(Clone, Debug)]
pub struct NoiseElement {
    field: SpectralField,
    support: Vec<(Mode, [Complex64; 3])>,
    /// Generating wavevector and amplitude when built from the trigonometric
    /// family.
    pub wavevector: Option<Mode>,
    pub amplitude: f64,
}

impl NoiseElement {
    pub fn from_field(field: SpectralField) -> Self {
        let support = field
            .ball_modes()
            .iter()
            .filter_map(|&(idx, k)| {
                let v = field.at(idx);
                v.iter().any(|z| *z != ZERO).then_some((k, v))
            })
            .collect();
        NoiseElement { field, support, wavevector: None, amplitude: 1.0 }
    }

    pub fn field(&self) -> &SpectralField {
        &self.field
    }

    pub fn support(&self) -> &[(Mode, [Complex64; 3])] {
        &self.support
    }

    /// `(c·∇)B` by direct convolution over the support of `c`, restricted to
    /// the ball of `B`.
    pub fn transport(&self, b: &SpectralField) -> SpectralField {
        let mut out = SpectralField::zeros(b.n());
        let modes = out.ball_modes();
        for &(p, cp) in &self.support {
            for &(idx, k) in modes.iter() {
                let q = k - p;
                let Some(iq) = b.index(q) else { continue };
                let qf = q.as_f64();
                let a = (cp[0] * qf[0] + cp[1] * qf[1] + cp[2] * qf[2]) * c64(0.0, TWO_PI);
                let bq = b.at(iq);
                let comps = out.comps_mut();
                for c in 0..3 {
                    comps[c][idx] += a * bq[c];
                }
            }
        }
        out
    }

    /// `Π (c·∇) B` with `Π` the Leray projection on the truncated space.
    pub fn projected_transport(&self, b: &SpectralField) -> SpectralField {
        leray_project(&self.transport(b))
    }
}

/// The family `{c_k}`.
#[derive(Clone, Debug)]
pub struct NoiseBasis {
    elements: Vec<NoiseElement>,
    pub gamma: f64,
    pub s: f64,
}

impl NoiseBasis {
    pub fn empty() -> Self {
        NoiseBasis { elements: Vec::new(), gamma: 0.0, s: 0.0 }
    }

    /// Arbitrary coefficient fields (not checked for divergence).
    pub fn from_fields(fields: Vec<SpectralField>) -> Self {
        NoiseBasis { elements: fields.into_iter().map(NoiseElement::from_field).collect(), gamma: 0.0, s: 0.0 }
    }

    pub fn from_elements(elements: Vec<NoiseElement>, gamma: f64, s: f64) -> Self {
        NoiseBasis { elements, gamma, s }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[NoiseElement] {
        &self.elements
    }

    /// Multiply every amplitude by `eps`.
    pub fn scaled(mut self, eps: f64) -> Self {
        for e in &mut self.elements {
            e.field = e.field.scaled(eps);
            e.support.iter_mut().for_each(|(_, v)| v.iter_mut().for_each(|z| *z *= eps));
            e.amplitude *= eps;
        }
        self
    }

    /// Re-embed every coefficient field at radius `n`.
    pub fn resized(&self, n: usize) -> Self {
        let elements = self
            .elements
            .iter()
            .map(|e| {
                let mut ne = NoiseElement::from_field(e.field.resized(n));
                ne.wavevector = e.wavevector;
                ne.amplitude = e.amplitude;
                ne
            })
            .collect();
        NoiseBasis { elements, gamma: self.gamma, s: self.s }
    }

    /// `Σ_k ‖c_k‖²_{H^{s+1}}` evaluated from the coefficients.
    pub fn regularity_budget(&self) -> f64 {
        self.elements.iter().map(|e| crate::spectral::sobolev_norm(&e.field, self.s + 1.0, false).powi(2)).sum()
    }

    /// The same sum in closed form, `Σ θ_j² (1 + |m_j|^{2s+2}) / 2`.
    pub fn closed_form_budget(&self) -> Option<f64> {
        self.elements
            .iter()
            .map(|e| e.wavevector.map(|m| 0.5 * e.amplitude.powi(2) * (1.0 + m.norm().powf(2.0 * self.s + 2.0))))
            .sum()
    }

    pub fn max_divergence_residual(&self) -> f64 {
        self.elements.iter().map(|e| e.field.divergence_residual()).fold(0.0, f64::max)
    }
}

/// Wavevectors of the canonical half-lattice ordered by `|m|`, ties broken
/// by descending lexicographic order (so `(1,0,0)` comes first).
pub fn enumerate_wavevectors(n: usize) -> Vec<Mode> {
    let n = n as i32;
    let mut out = Vec::new();
    for a in -n..=n {
        for b in -n..=n {
            for c in -n..=n {
                let m = Mode([a, b, c]);
                if m.is_positive_half() && m.norm2() <= (n * n) as i64 {
                    out.push(m);
                }
            }
        }
    }
    out.sort_by(|x, y| x.norm2().cmp(&y.norm2()).then(y.cmp(x)));
    out
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / r, v[1] / r, v[2] / r]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Orthonormal pair spanning `m^⊥`. For `seed = 0` the first vector is the
/// projection of the least-aligned coordinate axis; other seeds rotate the
/// pair by a seed-dependent angle.
pub(crate) fn polarizations(m: Mode, seed: u64) -> ([f64; 3], [f64; 3]) {
    let mf = m.as_f64();
    let mh = unit(mf);
    let axis = (0..3).min_by(|&i, &j| mf[i].abs().partial_cmp(&mf[j].abs()).unwrap()).unwrap();
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let d = e[0] * mh[0] + e[1] * mh[1] + e[2] * mh[2];
    let a1 = unit([e[0] - d * mh[0], e[1] - d * mh[1], e[2] - d * mh[2]]);
    let a2 = cross(mh, a1);
    if seed == 0 {
        return (a1, a2);
    }
    let mut rng = keyed_rng(seed, mix(m.norm2() as u64, (m.0[0] + 64) as u64 * 4096 + (m.0[1] + 64) as u64 * 64 + (m.0[2] + 64) as u64));
    let u: f64 = StandardNormal.sample(&mut rng);
    let th = u * std::f64::consts::PI;
    let (s, c) = th.sin_cos();
    let r1 = std::array::from_fn(|i| c * a1[i] + s * a2[i]);
    let r2 = std::array::from_fn(|i| -s * a1[i] + c * a2[i]);
    (r1, r2)
}

/// Trigonometric divergence-free basis: for each wavevector `m_j` (in
/// enumeration order) the fields `θ_j a₁ cos(2πm_j·x)` and
/// `θ_j a₂ sin(2πm_j·x)` with `θ_j = |m_j|^{-γ}` and `a₁, a₂ ⊥ m_j`.
pub fn build_noise_basis(k: usize, gamma: f64, s: f64, n: usize, seed: u64) -> Result<NoiseBasis> {
    if k == 0 {
        return Err(Error::InvalidNoise("K must be at least 1".into()));
    }
    if !(gamma > s + 2.5) {
        return Err(Error::InvalidNoise(format!(
            "decay exponent gamma = {gamma} must exceed s + 5/2 = {} for an l²(H^(s+1)) family",
            s + 2.5
        )));
    }
    let wavevectors = enumerate_wavevectors(n);
    if k > 2 * wavevectors.len() {
        return Err(Error::InvalidNoise(format!(
            "K = {k} exceeds the {} fields available at truncation {n}",
            2 * wavevectors.len()
        )));
    }
    let mut elements = Vec::with_capacity(k);
    for j in 0..k {
        let m = wavevectors[j / 2];
        let theta = m.norm().powf(-gamma);
        let (a1, a2) = polarizations(m, seed);
        let field = if j % 2 == 0 {
            SpectralField::trig_mode(n, m, a1.map(|x| theta * x), [0.0; 3])
        } else {
            SpectralField::trig_mode(n, m, [0.0; 3], a2.map(|x| theta * x))
        };
        let mut e = NoiseElement::from_field(field);
        e.wavevector = Some(m);
        e.amplitude = theta;
        elements.push(e);
    }
    Ok(NoiseBasis { elements, gamma, s })
}

/// `(c·∇)B` through dealiased grid products of `c` with each `∂_i B`.
pub fn transport_apply(c: &SpectralField, b: &SpectralField) -> Result<SpectralField> {
    transport_on_grid(c, b, dealias_grid_size(b.n()))
}

/// [`transport_apply`] on an explicit grid size.
pub fn transport_on_grid(c: &SpectralField, b: &SpectralField, m: usize) -> Result<SpectralField> {
    if c.n() != b.n() {
        return Err(Error::RadiusMismatch(c.n(), b.n()));
    }
    let n = b.n();
    let grads: Vec<SpectralField> = (0..3).map(|i| differentiate(b, i)).collect();
    let mut spectra: Vec<&[Complex64]> = c.comps().iter().map(|v| v.as_slice()).collect();
    for g in &grads {
        spectra.extend(g.comps().iter().map(|v| v.as_slice()));
    }
    let grids = Fft3::get(m).synthesize(&spectra, n);
    let len = m * m * m;
    let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for (j, o) in out.iter_mut().enumerate() {
        for (p, v) in o.iter_mut().enumerate() {
            // grids[3 + 3i + j] = ∂_i B_j
            *v = grids[0][p] * grids[3 + j][p] + grids[1][p] * grids[6 + j][p] + grids[2][p] * grids[9 + j][p];
        }
    }
    Ok(analyze_components(&[&out[0], &out[1], &out[2]], n, m))
}

/// `½ Σ_k T_k Π T_k B`, the Itô–Stratonovich correction of the projected
/// transport noise on the truncated space.
pub fn ito_correction(basis: &NoiseBasis, b: &SpectralField) -> SpectralField {
    let mut out = SpectralField::zeros(b.n());
    for e in basis.elements() {
        let tb = e.projected_transport(b);
        out.axpy(0.5, &e.transport(&tb));
    }
    out
}

/// Brownian increments `ΔW^k ~ N(0, dt)` for one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WienerIncrement {
    pub dw: Vec<f64>,
    pub dt: f64,
}

impl WienerIncrement {
    pub fn zeros(k: usize, dt: f64) -> Self {
        WienerIncrement { dw: vec![0.0; k], dt }
    }
}

/// Counter-based Gaussian stream keyed by `(seed, path_id)`; the increment
/// at `step` is a pure function of the key and the step index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream {
    pub seed: u64,
    pub path_id: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, path_id: u64) -> Self {
        NoiseStream { seed, path_id }
    }

    pub fn standard_normals(&self, step: u64, k: usize) -> Vec<f64> {
        let mut rng = keyed_rng(mix(self.seed, self.path_id), step);
        (0..k).map(|_| StandardNormal.sample(&mut rng)).collect()
    }
}

/// `K` independent `N(0, dt)` samples for `step` of the stream.
pub fn sample_increments(dt: f64, k: usize, stream: &NoiseStream, step: u64) -> Result<WienerIncrement> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let sd = dt.sqrt();
    Ok(WienerIncrement { dw: stream.standard_normals(step, k).into_iter().map(|z| z * sd).collect(), dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_field;
    use crate::spectral::sobolev_norm;

    /// Brute-force `Σ_m 2πi (ĉ_{k-m}·m) B̂_m` over all mode pairs.
    fn brute_transport(c: &SpectralField, b: &SpectralField) -> SpectralField {
        let modes = b.ball_modes();
        let mut out = SpectralField::zeros(b.n());
        for &(i, p) in modes.iter() {
            for &(j, q) in modes.iter() {
                let Some(t) = out.index(p + q) else { continue };
                let cp = c.at(i);
                let bq = b.at(j);
                let qf = q.as_f64();
                let a = (cp[0] * qf[0] + cp[1] * qf[1] + cp[2] * qf[2]) * c64(0.0, TWO_PI);
                for cc in 0..3 {
                    out.comps_mut()[cc][t] += a * bq[cc];
                }
            }
        }
        out
    }

    #[test]
    fn first_two_fields_are_axis_aligned() {
        let basis = build_noise_basis(2, 6.0, 3.0, 4, 0).unwrap();
        let e0 = SpectralField::trig_mode(4, Mode([1, 0, 0]), [0.0, 1.0, 0.0], [0.0; 3]);
        let e1 = SpectralField::trig_mode(4, Mode([1, 0, 0]), [0.0; 3], [0.0, 0.0, 1.0]);
        assert!((basis.elements()[0].field() - &e0).max_abs() < 1e-15);
        assert!((basis.elements()[1].field() - &e1).max_abs() < 1e-15);
    }

    #[test]
    fn basis_invariants() {
        for seed in [0, 5] {
            let basis = build_noise_basis(20, 6.0, 3.0, 4, seed).unwrap();
            assert!(basis.max_divergence_residual() <= 1e-14);
            for e in basis.elements() {
                assert!(e.field().is_mean_free());
                assert_eq!(e.field().hermitian_residual(), 0.0);
            }
        }
    }

    #[test]
    fn closed_form_budget_matches_norms() {
        let basis = build_noise_basis(8, 6.0, 3.0, 4, 0).unwrap();
        let direct = basis.regularity_budget();
        let closed = basis.closed_form_budget().unwrap();
        assert!((direct - closed).abs() <= 1e-10 * closed);
        let manual: f64 = basis
            .elements()
            .iter()
            .map(|e| 0.5 * e.amplitude.powi(2) * (1.0 + e.wavevector.unwrap().norm().powi(8)))
            .sum();
        assert!((manual - closed).abs() <= 1e-12 * closed);
    }

    #[test]
    fn build_errors() {
        assert!(build_noise_basis(0, 6.0, 3.0, 4, 0).is_err());
        assert!(build_noise_basis(4, 5.0, 3.0, 4, 0).is_err());
        // radius 1 has three half-space wavevectors, six fields
        assert!(build_noise_basis(6, 6.0, 3.0, 1, 0).is_ok());
        assert!(build_noise_basis(7, 6.0, 3.0, 1, 0).is_err());
    }

    #[test]
    fn transport_examples() {
        let c = random_field(3, 1, 1.0, true);
        let k = SpectralField::constant(3, [1.0, 2.0, 3.0]);
        assert!(transport_apply(&c, &k).unwrap().max_abs() < 1e-14);

        let b = random_field(3, 2, 1.0, true);
        let e1 = SpectralField::constant(3, [1.0, 0.0, 0.0]);
        let t = transport_apply(&e1, &b).unwrap();
        assert!((&t - &differentiate(&b, 0)).max_abs() <= 1e-13 * b.max_abs());
    }

    #[test]
    fn transport_matches_brute_force() {
        let c = random_field(2, 10, 0.0, true);
        let b = random_field(2, 11, 0.0, true);
        let fast = transport_apply(&c, &b).unwrap();
        let slow = brute_transport(&c, &b);
        assert!((&fast - &slow).max_abs() <= 1e-12 * slow.max_abs());
        let sparse = NoiseElement::from_field(c.clone()).transport(&b);
        assert!((&sparse - &slow).max_abs() <= 1e-12 * slow.max_abs());
    }

    #[test]
    fn sparse_path_matches_grid_path() {
        let basis = build_noise_basis(12, 6.0, 3.0, 6, 3).unwrap();
        let b = random_field(6, 4, 1.5, true);
        for e in basis.elements() {
            let fast = e.transport(&b);
            let grid = transport_apply(e.field(), &b).unwrap();
            let err = (&fast - &grid).max_abs();
            assert!(err <= 1e-12 * grid.max_abs().max(1e-300), "{err} {}", grid.max_abs());
        }
    }

    #[test]
    fn ito_correction_examples() {
        let basis = build_noise_basis(6, 6.0, 3.0, 4, 0).unwrap();
        let k = SpectralField::constant(4, [1.0, -1.0, 0.5]);
        assert_eq!(ito_correction(&basis, &k).max_abs(), 0.0);

        let b = random_field(4, 3, 1.0, true);
        let e1 = NoiseBasis::from_fields(vec![SpectralField::constant(4, [1.0, 0.0, 0.0])]);
        let corr = ito_correction(&e1, &b);
        let d11 = differentiate(&differentiate(&b, 0), 0).scaled(0.5);
        assert!((&corr - &d11).max_abs() <= 1e-13 * d11.max_abs());

        let b2 = random_field(4, 9, 1.0, true);
        let lhs = ito_correction(&basis, &(&b + &b2));
        let rhs = &ito_correction(&basis, &b) + &ito_correction(&basis, &b2);
        assert!((&lhs - &rhs).max_abs() <= 1e-12 * lhs.max_abs());
    }

    #[test]
    fn skew_symmetry_and_drift_cancellation() {
        let basis = build_noise_basis(8, 6.0, 3.0, 6, 1).unwrap();
        let b = random_field(6, 17, 1.5, true);
        for e in basis.elements() {
            let tb = e.transport(&b);
            let scale = e.field().l2_norm() * b.l2_norm() * sobolev_norm(&b, 1.0, true);
            assert!(tb.inner(&b).abs() <= 1e-11 * scale);
            let ptb = e.projected_transport(&b);
            let t2 = e.transport(&ptb);
            let resid = t2.inner(&b) + ptb.inner(&ptb);
            assert!(resid.abs() <= 1e-10 * ptb.inner(&ptb));
        }
    }

    #[test]
    fn increments_are_reproducible() {
        let s = NoiseStream::new(42, 7);
        let a = sample_increments(1e-3, 5, &s, 12).unwrap();
        let b = sample_increments(1e-3, 5, &s, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_increments(1e-3, 5, &s, 13).unwrap());
        assert!(sample_increments(0.0, 5, &s, 0).is_err());
    }

    #[test]
    fn increment_statistics() {
        let dt = 1e-4;
        let s = NoiseStream::new(1, 0);
        let draws: Vec<f64> = (0..100_000u64).map(|i| sample_increments(dt, 1, &s, i).unwrap().dw[0]).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!(mean.abs() <= 4.0 * (dt / 1e5).sqrt());
        assert!(var <= 2.0 * dt && var >= 0.5 * dt);
    }
}
