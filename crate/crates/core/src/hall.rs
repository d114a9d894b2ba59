//! The Hall nonlinearity `∇×((∇×B)×B)`, the cutoff `χ_r`, and the full drift
//! of the truncated Itô system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::littlewood_paley::smooth_step;
use crate::noise::NoiseBasis;
use crate::spectral::{
    analyze_components, apply_fractional_laplacian, curl, dealias_grid_size, leray_project, truncate, FieldSamples,
    SpectralField,
};

/// `χ_r`: 1 on `[0, r/2]`, 0 beyond `r`, smooth and non-increasing between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub r: f64,
}

impl CutoffProfile {
    pub fn new(r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidArgument(format!("cutoff threshold must be positive and finite, got {r}")));
        }
        Ok(CutoffProfile { r })
    }

    pub fn value(&self, x: f64) -> f64 {
        cutoff_value(self, x)
    }
}

pub fn cutoff_value(profile: &CutoffProfile, x: f64) -> f64 {
    let half = 0.5 * profile.r;
    smooth_step((x.abs() - half) / half)
}

/// Parameters of the deterministic part of the drift.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub alpha: f64,
    pub mu: f64,
    pub r: f64,
    pub cutoff_enabled: bool,
    /// Switches the Hall nonlinearity off entirely (noise and dissipation only).
    pub hall: bool,
}

impl Default for DriftParams {
    fn default() -> Self {
        DriftParams { alpha: 1.5, mu: 1.0, r: 1.0, cutoff_enabled: true, hall: true }
    }
}

impl DriftParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (1, 2], got {}", self.alpha)));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be non-negative, got {}", self.mu)));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidArgument(format!("r must be positive, got {}", self.r)));
        }
        Ok(())
    }

    pub fn cutoff(&self) -> CutoffProfile {
        CutoffProfile { r: self.r }
    }

    /// `χ_r(x)²`, or exactly 1 with the cutoff disabled.
    pub fn hall_weight(&self, w1inf: f64) -> f64 {
        if self.cutoff_enabled {
            let c = cutoff_value(&self.cutoff(), w1inf);
            c * c
        } else {
            1.0
        }
    }
}

fn hall_from_samples(samples: &FieldSamples, n: usize) -> SpectralField {
    let j = samples.curl_values();
    let b = &samples.values;
    let len = j[0].len();
    let mut jxb = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for p in 0..len {
        jxb[0][p] = j[1][p] * b[2][p] - j[2][p] * b[1][p];
        jxb[1][p] = j[2][p] * b[0][p] - j[0][p] * b[2][p];
        jxb[2][p] = j[0][p] * b[1][p] - j[1][p] * b[0][p];
    }
    curl(&analyze_components(&[&jxb[0], &jxb[1], &jxb[2]], n, samples.m))
}

/// `∇×((∇×B)×B)` with the product dealiased.
pub fn hall_term(b: &SpectralField) -> Result<SpectralField> {
    let samples = FieldSamples::evaluate(b, dealias_grid_size(b.n()))?;
    Ok(hall_from_samples(&samples, b.n()))
}

/// [`hall_term`] with the product formed on an `m³` grid; `m < 3n+1`
/// aliases (a negative control).
pub fn hall_term_on_grid(b: &SpectralField, m: usize) -> Result<SpectralField> {
    let samples = FieldSamples::evaluate_aliased(b, m)?;
    Ok(hall_from_samples(&samples, b.n()))
}

/// The Hall term in convective form `(B·∇)J − (J·∇)B` with both products
/// formed pointwise on an `m³` grid. Unlike the rotational form, its
/// L²-orthogonality to `B` relies on exact quadrature, so it breaks once
/// `m < 3n+1`.
pub fn hall_term_convective_on_grid(b: &SpectralField, m: usize) -> Result<SpectralField> {
    let sb = FieldSamples::evaluate_aliased(b, m)?;
    let sj = FieldSamples::evaluate_aliased(&curl(b), m)?;
    let len = m.pow(3);
    let (bv, bd) = (&sb.values, &sb.jacobian);
    let (jv, jd) = (&sj.values, &sj.jacobian);
    let mut out = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for p in 0..len {
        for (i, o) in out.iter_mut().enumerate() {
            o[p] = (0..3).map(|a| bv[a][p] * jd[a][i][p] - jv[a][p] * bd[a][i][p]).sum();
        }
    }
    Ok(analyze_components(&[&out[0], &out[1], &out[2]], b.n(), m))
}

/// The same term through `B×(∇×B) = (∇B)·B − (B·∇)B`, so that
/// `∇×(J×B) = −∇×[(∇B)·B − (B·∇)B]`.
pub fn hall_term_alt(b: &SpectralField) -> Result<SpectralField> {
    let (grad_energy, advective) = hall_alt_parts(b)?;
    Ok(-&curl(&(&grad_energy - &advective)))
}

/// `((∇B)·B, (B·∇)B)` as truncated spectral fields. The first is `½∇|B|²`.
pub fn hall_alt_parts(b: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    let m = dealias_grid_size(b.n());
    let s = FieldSamples::evaluate(b, m)?;
    let len = m.pow(3);
    let d = &s.jacobian;
    let v = &s.values;
    let mut ge = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    let mut adv = [vec![0.0; len], vec![0.0; len], vec![0.0; len]];
    for p in 0..len {
        for i in 0..3 {
            ge[i][p] = v[0][p] * d[i][0][p] + v[1][p] * d[i][1][p] + v[2][p] * d[i][2][p];
            adv[i][p] = v[0][p] * d[0][i][p] + v[1][p] * d[1][i][p] + v[2][p] * d[2][i][p];
        }
    }
    let ge = analyze_components(&[&ge[0], &ge[1], &ge[2]], b.n(), m);
    let adv = analyze_components(&[&adv[0], &adv[1], &adv[2]], b.n(), m);
    Ok((ge, adv))
}

/// The pieces of one drift evaluation, kept separate so integrators can
/// treat dissipation exactly and reuse the projected transports.
#[derive(Clone, Debug)]
pub struct DriftParts {
    /// `‖B‖_{W^{1,∞}}` on the dealiasing grid.
    pub w1inf: f64,
    /// `χ_r(‖B‖_{W^{1,∞}})`, or 1 with the cutoff off.
    pub chi: f64,
    /// `−χ_r² P_n Π ∇×(J×B)`.
    pub hall: SpectralField,
    /// `P_n Π ½Σ T_k Π T_k B`.
    pub correction: SpectralField,
    /// `Π T_k B` for each noise element.
    pub transports: Vec<SpectralField>,
}

impl DriftParts {
    /// Everything except the `−μΛ^α B` term.
    pub fn nondissipative(&self) -> SpectralField {
        &self.hall + &self.correction
    }
}

fn check_divergence(b: &SpectralField) -> Result<()> {
    let residual = b.divergence_residual();
    let tolerance = 1e-10 * b.max_abs().max(f64::MIN_POSITIVE);
    if residual > tolerance {
        return Err(Error::NotDivergenceFree { residual, tolerance });
    }
    Ok(())
}

/// Evaluate the Hall part, the cutoff argument and the noise transports in
/// one pass. `with_correction = false` skips the Itô correction (for
/// Stratonovich schemes).
pub fn drift_parts(b: &SpectralField, params: &DriftParams, basis: &NoiseBasis, with_correction: bool) -> Result<DriftParts> {
    check_divergence(b)?;
    let n = b.n();
    let samples = FieldSamples::evaluate(b, dealias_grid_size(n))?;
    let w1inf = samples.w1inf();
    let chi = if params.cutoff_enabled { cutoff_value(&params.cutoff(), w1inf) } else { 1.0 };
    let weight = params.hall_weight(w1inf);
    let hall = if params.hall && weight != 0.0 {
        truncate(&leray_project(&hall_from_samples(&samples, n)), n).scaled(-weight)
    } else {
        SpectralField::zeros(n)
    };
    let transports: Vec<SpectralField> = basis.elements().iter().map(|e| e.projected_transport(b)).collect();
    let mut correction = SpectralField::zeros(n);
    if with_correction {
        for (e, tb) in basis.elements().iter().zip(&transports) {
            correction.axpy(0.5, &e.transport(tb));
        }
        correction = truncate(&leray_project(&correction), n);
    }
    Ok(DriftParts { w1inf, chi, hall, correction, transports })
}

/// `−χ_r² P_n ∇×(J×B) − μΛ^α B + ½ P_n Σ T_k Π T_k B`.
pub fn drift(b: &SpectralField, params: &DriftParams, basis: &NoiseBasis, n: usize) -> Result<SpectralField> {
    if b.n() != n {
        return Err(Error::RadiusMismatch(b.n(), n));
    }
    let parts = drift_parts(b, params, basis, true)?;
    let diss = apply_fractional_laplacian(b, params.alpha)?.scaled(-params.mu);
    Ok(&parts.nondissipative() + &diss)
}
