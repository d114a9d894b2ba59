//! Dyadic Littlewood–Paley blocks on the truncated Fourier lattice.
//!
//! Blocks are sharp per-mode multipliers: `Δ_{-1}` has weight `χ(|k|)` and
//! `Δ_q` (q ≥ 0) has weight `φ(2^{-q}|k|)` with `φ(ξ) = χ(ξ/2) − χ(ξ)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::random::random_field;
use crate::spectral::{c64, dealiased_product, smooth_even_at_least, Mode, ProductOp, SobolevIndex, SpectralField, TWO_PI};

/// Exp-based smooth step: 1 for `t <= 0`, 0 for `t >= 1`, `C^∞`, with
/// `ψ(1/2) = 1/2`.
pub fn smooth_step(t: f64) -> f64 {
    fn f(t: f64) -> f64 {
        if t > 0.0 {
            (-1.0 / t).exp()
        } else {
            0.0
        }
    }
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = f(1.0 - t);
        a / (a + f(t))
    }
}

/// Radial profiles `χ` (low-pass) and the `χ` used to build the band profile
/// `φ`. They coincide except for deliberately perturbed profiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicProfile {
    plateau: f64,
    support: f64,
    band_plateau: f64,
    band_support: f64,
}

impl Default for DyadicProfile {
    fn default() -> Self {
        DyadicProfile { plateau: 0.75, support: 1.0, band_plateau: 0.75, band_support: 1.0 }
    }
}

impl DyadicProfile {
    /// A profile whose band function is built from a `χ` with support edges
    /// shifted by `eps`, breaking the partition of unity.
    pub fn perturbed(eps: f64) -> Self {
        DyadicProfile { band_plateau: 0.75 + eps, band_support: 1.0 + eps, ..Default::default() }
    }

    fn ramp(xi: f64, plateau: f64, support: f64) -> f64 {
        smooth_step((xi.abs() - plateau) / (support - plateau))
    }

    pub fn chi(&self, xi: f64) -> f64 {
        Self::ramp(xi, self.plateau, self.support)
    }

    fn band_chi(&self, xi: f64) -> f64 {
        Self::ramp(xi, self.band_plateau, self.band_support)
    }

    pub fn phi(&self, xi: f64) -> f64 {
        self.band_chi(xi / 2.0) - self.band_chi(xi)
    }

    /// Block weight `φ_q(ξ)`; zero for `q < -1`.
    pub fn phi_q(&self, q: i32, xi: f64) -> f64 {
        match q {
            q if q < -1 => 0.0,
            -1 => self.chi(xi),
            q => self.phi(xi / 2f64.powi(q)),
        }
    }

    /// Sum of block weights `-1..=q`.
    pub fn low_pass_weight(&self, q: i32, xi: f64) -> f64 {
        (-1..=q).map(|j| self.phi_q(j, xi)).sum()
    }

    /// Largest block index with support inside radius `n`.
    pub fn qmax(n: usize) -> i32 {
        (n.max(1) as f64).log2().ceil() as i32 + 1
    }
}

/// `λ_q = 2^q` (so `λ_{-1} = 1/2`).
pub fn lambda(q: i32) -> f64 {
    2f64.powi(q)
}

/// `Δ_q f`.
pub fn dyadic_block(f: &SpectralField, q: i32, profile: &DyadicProfile) -> SpectralField {
    f.scale_modes(|k| profile.phi_q(q, k.norm()))
}

/// `S_q f = Σ_{j=-1}^{q} Δ_j f`.
pub fn low_pass(f: &SpectralField, q: i32, profile: &DyadicProfile) -> SpectralField {
    f.scale_modes(|k| profile.low_pass_weight(q, k.norm()))
}

/// `S_q f` via the telescoped weight `χ(2^{-q-1}|k|)`.
pub fn low_pass_telescoped(f: &SpectralField, q: i32, profile: &DyadicProfile) -> SpectralField {
    if q < -1 {
        return SpectralField::zeros(f.n());
    }
    f.scale_modes(|k| profile.chi(k.norm() / 2f64.powi(q + 1)))
}

/// `Δ̃_q = Δ_{q-1} + Δ_q + Δ_{q+1}`.
pub fn widened_block(f: &SpectralField, q: i32, profile: &DyadicProfile) -> SpectralField {
    f.scale_modes(|k| {
        let r = k.norm();
        profile.phi_q(q - 1, r) + profile.phi_q(q, r) + profile.phi_q(q + 1, r)
    })
}

/// Blocks `Δ_q f` for `q = -1..=qmax`.
#[derive(Clone, Debug)]
pub struct BlockDecomposition {
    pub blocks: Vec<SpectralField>,
}

impl BlockDecomposition {
    pub fn new(f: &SpectralField, profile: &DyadicProfile) -> Self {
        let qmax = DyadicProfile::qmax(f.n());
        BlockDecomposition { blocks: (-1..=qmax).map(|q| dyadic_block(f, q, profile)).collect() }
    }

    pub fn block(&self, q: i32) -> &SpectralField {
        &self.blocks[(q + 1) as usize]
    }

    pub fn reconstruct(&self) -> SpectralField {
        let mut out = SpectralField::zeros(self.blocks[0].n());
        for b in &self.blocks {
            out.axpy(1.0, b);
        }
        out
    }
}

/// `λ_q^{2s}‖Δ_q f‖²` for `q = -1..=qmax`.
pub fn lp_spectrum(f: &SpectralField, s: f64, profile: &DyadicProfile) -> Vec<f64> {
    let qmax = DyadicProfile::qmax(f.n());
    let mut out = vec![0.0; (qmax + 2) as usize];
    for &(idx, k) in f.ball_modes().iter() {
        let mag2: f64 = f.at(idx).iter().map(|z| z.norm_sqr()).sum();
        if mag2 == 0.0 {
            continue;
        }
        let r = k.norm();
        for q in -1..=qmax {
            let w = profile.phi_q(q, r);
            if w != 0.0 {
                out[(q + 1) as usize] += w * w * mag2;
            }
        }
    }
    for (i, v) in out.iter_mut().enumerate() {
        *v *= lambda(i as i32 - 1).powf(2.0 * s);
    }
    out
}

/// `(Σ_q λ_q^{2s}‖Δ_q f‖²)^{1/2}`.
pub fn lp_sobolev_norm(f: &SpectralField, s: impl Into<SobolevIndex>, profile: &DyadicProfile) -> f64 {
    lp_spectrum(f, s.into().0, profile).iter().sum::<f64>().sqrt()
}

/// The three Bony paraproduct pieces of `u · v`.
#[derive(Clone, Debug)]
pub struct BonyParts {
    pub low_high: SpectralField,
    pub high_low: SpectralField,
    pub resonant: SpectralField,
}

impl BonyParts {
    pub fn sum(&self) -> SpectralField {
        &(&self.low_high + &self.high_low) + &self.resonant
    }
}

/// Split `u · v` into `Σ S_{l-2}u·Δ_l v`, `Σ Δ_l u·S_{l-2}v` and
/// `Σ Δ_l u·Δ̃_l v` (scalars in component 0).
pub fn bony_decompose(u: &SpectralField, v: &SpectralField, profile: &DyadicProfile) -> Result<BonyParts> {
    if u.n() != v.n() {
        return Err(Error::RadiusMismatch(u.n(), v.n()));
    }
    let n = u.n();
    let qmax = DyadicProfile::qmax(n);
    let mut low_high = SpectralField::zeros(n);
    let mut high_low = SpectralField::zeros(n);
    let mut resonant = SpectralField::zeros(n);
    for l in -1..=qmax {
        let du = dyadic_block(u, l, profile);
        let dv = dyadic_block(v, l, profile);
        let su = low_pass(u, l - 2, profile);
        let sv = low_pass(v, l - 2, profile);
        let wv = widened_block(v, l, profile);
        low_high.axpy(1.0, &dealiased_product(&su, &dv, ProductOp::Dot)?);
        high_low.axpy(1.0, &dealiased_product(&du, &sv, ProductOp::Dot)?);
        resonant.axpy(1.0, &dealiased_product(&du, &wv, ProductOp::Dot)?);
    }
    Ok(BonyParts { low_high, high_low, resonant })
}

/// Extremes of the two Bernstein ratios over a set of trials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinRatios {
    /// `‖∇^k Δ_q u‖_r / (λ_q^k ‖Δ_q u‖_r)`
    pub lower: (f64, f64),
    /// `λ_q^{k+3(1/s-1/r)} ‖Δ_q u‖_s / ‖∇^k Δ_q u‖_r`
    pub upper: (f64, f64),
}

/// Truncation radius containing the support of `Δ_q`.
pub fn block_radius(q: i32) -> usize {
    if q < 0 {
        1
    } else {
        (1usize << (q + 1)) - 1
    }
}

/// `L^p` norm over the unit torus of the pointwise Euclidean magnitude of a
/// collection of real grid fields.
pub fn lp_norm(grids: &[Vec<f64>], p: f64) -> f64 {
    let len = grids[0].len();
    let mag = (0..len).map(|i| grids.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt());
    if p.is_infinite() {
        mag.fold(0.0, f64::max)
    } else {
        (mag.map(|x| x.powf(p)).sum::<f64>() / len as f64).powf(1.0 / p)
    }
}

/// Grid values of every component of `∇^order f`.
pub fn derivative_tensor(f: &SpectralField, order: u32, m: usize) -> Vec<Vec<f64>> {
    let mut fields = vec![f.clone()];
    for _ in 0..order {
        fields = fields.iter().flat_map(|g| (0..3).map(move |a| crate::spectral::differentiate(g, a))).collect();
    }
    let spectra: Vec<&[Complex64]> = fields.iter().flat_map(|g| g.comps().iter().map(|v| v.as_slice())).collect();
    Fft3::get(m).synthesize(&spectra, f.n())
}

/// Both Bernstein ratios for one `Δ_q`-supported field.
pub fn bernstein_ratios_for(block: &SpectralField, q: i32, deriv_order: u32, p_low: f64, p_high: f64) -> (f64, f64) {
    let m = smooth_even_at_least(2 * block.n() + 2);
    let base = derivative_tensor(block, 0, m);
    let deriv = if deriv_order == 0 { base.clone() } else { derivative_tensor(block, deriv_order, m) };
    let lam = lambda(q);
    let k = deriv_order as f64;
    let d_high = lp_norm(&deriv, p_high);
    let lower = d_high / (lam.powf(k) * lp_norm(&base, p_high));
    let gap = if p_high.is_infinite() { 1.0 / p_low } else { 1.0 / p_low - 1.0 / p_high };
    let upper = lam.powf(k + 3.0 * gap) * lp_norm(&base, p_low) / d_high;
    (lower, upper)
}

/// Sweep random `Δ_q`-supported fields and report ratio extremes.
pub fn bernstein_ratio(
    profile: &DyadicProfile,
    q: i32,
    deriv_order: u32,
    p_low: f64,
    p_high: f64,
    trials: usize,
    rng_seed: u64,
) -> Result<BernsteinRatios> {
    if !(1.0 <= p_low && p_low <= p_high) || trials == 0 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= p_low <= p_high and trials >= 1 (got {p_low}, {p_high}, {trials})"
        )));
    }
    let n = block_radius(q);
    let probe = SpectralField::from_fn(n, |_| [c64(1.0, 0.0); 3]);
    if dyadic_block(&probe, q, profile).max_abs() == 0.0 || q < -1 {
        return Err(Error::EmptyBlock { q, n });
    }
    let mut lower = (f64::INFINITY, f64::NEG_INFINITY);
    let mut upper = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..trials {
        let u = random_field(n, crate::random::mix(rng_seed, t as u64), 0.0, false);
        let mut block = dyadic_block(&u, q, profile);
        // the zero mode only belongs to Δ_{-1}; keep the block mean-free otherwise
        if q >= 0 {
            block.set_real_mode(Mode::ZERO, [c64(0.0, 0.0); 3]);
        }
        let (a, b) = bernstein_ratios_for(&block, q, deriv_order, p_low, p_high);
        lower = (lower.0.min(a), lower.1.max(a));
        upper = (upper.0.min(b), upper.1.max(b));
    }
    Ok(BernsteinRatios { lower, upper })
}

/// The `2π` eigenvalue factor relating `∇` and `|k|` under the `e^{2πik·x}`
/// convention.
pub const DERIVATIVE_FACTOR: f64 = TWO_PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dealiased_product, sobolev_norm};

    #[test]
    fn profile_plateaus() {
        let p = DyadicProfile::default();
        assert_eq!(p.chi(0.0), 1.0);
        assert_eq!(p.chi(0.75), 1.0);
        assert_eq!(p.chi(1.0), 0.0);
        assert_eq!(p.chi(3.0), 0.0);
        assert!((p.chi(0.875) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = p.chi(i as f64 * 0.0015);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn block_weights_at_unit_mode() {
        let p = DyadicProfile::default();
        assert_eq!(p.phi_q(-1, 1.0), 0.0);
        assert_eq!(p.phi_q(0, 1.0), 1.0);
        let f = SpectralField::trig_mode(3, Mode([1, 0, 0]), [0.0, 1.0, 0.0], [0.0; 3]);
        assert_eq!(dyadic_block(&f, -1, &p).max_abs(), 0.0);
        assert_eq!(dyadic_block(&f, 0, &p), f);
        for q in -1..4 {
            assert_eq!(dyadic_block(&SpectralField::zeros(3), q, &p).max_abs(), 0.0);
        }
    }

    #[test]
    fn telescoping_identity() {
        let p = DyadicProfile::default();
        for i in 0..2000 {
            let xi = i as f64 * 0.037;
            for qq in 0..8 {
                let lhs = p.chi(xi) + (0..=qq).map(|q| p.phi(xi / 2f64.powi(q))).sum::<f64>();
                let rhs = p.chi(xi / 2f64.powi(qq + 1));
                assert!((lhs - rhs).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn partition_of_unity_on_lattice() {
        let p = DyadicProfile::default();
        let n = 32;
        let qmax = DyadicProfile::qmax(n);
        let mut worst: f64 = 0.0;
        for a in -(n as i64)..=n as i64 {
            for b in -(n as i64)..=n as i64 {
                for c in -(n as i64)..=n as i64 {
                    let r2 = a * a + b * b + c * c;
                    if r2 > (n * n) as i64 {
                        continue;
                    }
                    let r = (r2 as f64).sqrt();
                    let total: f64 = (-1..=qmax).map(|q| p.phi_q(q, r)).sum();
                    worst = worst.max((total - 1.0).abs());
                }
            }
        }
        assert!(worst <= 1e-14, "{worst}");
    }

    #[test]
    fn block_supports_separate() {
        let p = DyadicProfile::default();
        for i in 0..4000 {
            let xi = i as f64 * 0.0173;
            for q in 0..8 {
                for q2 in (q + 2)..10 {
                    assert_eq!(p.phi_q(q, xi) * p.phi_q(q2, xi), 0.0);
                }
            }
        }
    }

    #[test]
    fn low_pass_two_routes_agree() {
        let p = DyadicProfile::default();
        let f = random_field(8, 4, 1.0, true);
        let qmax = DyadicProfile::qmax(8);
        assert!((&low_pass(&f, qmax, &p) - &f).max_abs() <= 1e-12 * f.max_abs());
        for q in -1..=qmax {
            let a = low_pass(&f, q, &p);
            let b = low_pass_telescoped(&f, q, &p);
            assert!((&a - &b).max_abs() <= 1e-13 * f.max_abs());
        }
        let mut hi = f.clone();
        hi.set_real_mode(Mode::ZERO, [c64(0.0, 0.0); 3]);
        let g = crate::spectral::truncate(&hi, 8);
        let only_high = &g - &crate::spectral::truncate(&g, 0);
        assert_eq!(low_pass(&only_high, -1, &p).max_abs(), 0.0);
    }

    #[test]
    fn reconstruction() {
        let p = DyadicProfile::default();
        let f = random_field(10, 1, 0.5, false);
        let d = BlockDecomposition::new(&f, &p);
        assert!((&d.reconstruct() - &f).l2_norm() <= 1e-12 * f.l2_norm());
    }

    #[test]
    fn lp_norm_equivalence() {
        let p = DyadicProfile::default();
        assert_eq!(lp_sobolev_norm(&SpectralField::zeros(4), 1.0, &p), 0.0);
        let f = random_field(8, 12, 1.0, false);
        let r = lp_sobolev_norm(&f, 0.0, &p) / f.l2_norm();
        assert!((0.5..=2.0).contains(&r), "{r}");
        for s in [0.0, 1.0, 2.6, 3.1] {
            let mut lo = f64::INFINITY;
            let mut hi: f64 = 0.0;
            for seed in 0..100 {
                let g = random_field(8, 100 + seed, 1.0, true);
                let ratio = lp_sobolev_norm(&g, s, &p) / sobolev_norm(&g, s, false);
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
            // frozen band: per-mode weights give ratio within [2^{-|s|-1}, 2^{|s|+1}]
            let band = 2f64.powf(s + 1.0);
            assert!(lo >= 1.0 / band && hi <= band, "s={s}: [{lo}, {hi}]");
        }
    }

    #[test]
    fn bony_examples() {
        let p = DyadicProfile::default();
        let v = random_field(6, 2, 0.5, true);
        let u = SpectralField::constant(6, [0.3, -1.0, 2.0]);
        let parts = bony_decompose(&u, &v, &p).unwrap();
        let direct = dealiased_product(&u, &v, ProductOp::Dot).unwrap();
        assert!((&parts.sum() - &direct).max_abs() <= 1e-13 * direct.max_abs());
        // with u constant only blocks l <= 1 of v enter the other two parts
        let resid = &parts.high_low + &parts.resonant;
        for &(idx, k) in resid.ball_modes().iter() {
            if k.norm() >= 4.0 {
                assert!(resid.at(idx)[0].norm() <= 1e-14);
            }
        }

        let z = SpectralField::zeros(6);
        let parts = bony_decompose(&v, &z, &p).unwrap();
        assert!(parts.sum().max_abs() <= 1e-13 * v.max_abs());

        let n = 12;
        let w = SpectralField::trig_mode(n, Mode([8, 0, 0]), [0.0, 1.0, 0.5], [0.0, 0.2, 0.0]);
        let parts = bony_decompose(&w, &w, &p).unwrap();
        let direct = dealiased_product(&w, &w, ProductOp::Dot).unwrap();
        assert!((&parts.sum() - &direct).max_abs() <= 1e-12 * direct.max_abs());
    }

    #[test]
    fn bernstein_single_shell_ratio_is_two_pi() {
        for q in 0..4 {
            let n = block_radius(q);
            let k = Mode([1 << q, 0, 0]);
            let f = SpectralField::trig_mode(n, k, [0.0, 1.0, 0.0], [0.0, 0.0, 0.7]);
            let (lower, _) = bernstein_ratios_for(&f, q, 1, 2.0, 2.0);
            assert!((lower - TWO_PI).abs() <= 1e-10, "{lower}");
        }
    }

    #[test]
    fn bernstein_identity_case() {
        let p = DyadicProfile::default();
        let r = bernstein_ratio(&p, 2, 0, 3.0, 3.0, 5, 1).unwrap();
        assert!((r.upper.0 - 1.0).abs() < 1e-13 && (r.upper.1 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bernstein_sweep_is_scale_free() {
        let p = DyadicProfile::default();
        let mut spreads = Vec::new();
        for q in [2, 3, 4] {
            let r = bernstein_ratio(&p, q, 1, 2.0, f64::INFINITY, 50, 99).unwrap();
            spreads.push((r.lower.1 / r.lower.0, r.upper.1 / r.upper.0));
            assert!(r.lower.0 > 0.5 && r.lower.1 < 4.0 * TWO_PI);
        }
        for w in spreads.windows(2) {
            assert!(w[1].0 / w[0].0 < 10.0 && w[0].0 / w[1].0 < 10.0);
            assert!(w[1].1 / w[0].1 < 10.0 && w[0].1 / w[1].1 < 10.0);
        }
    }

    #[test]
    fn bernstein_rejects_bad_arguments() {
        let p = DyadicProfile::default();
        assert!(bernstein_ratio(&p, 2, 1, 3.0, 2.0, 5, 1).is_err());
        assert!(bernstein_ratio(&p, 2, 1, 2.0, 2.0, 0, 1).is_err());
        assert!(matches!(bernstein_ratio(&p, -2, 1, 2.0, 2.0, 1, 1), Err(Error::EmptyBlock { .. })));
    }
}
