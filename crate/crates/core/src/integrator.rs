//! Time stepping of the truncated SDE, stopping-time bookkeeping and single
//! trajectory runs.
//!
//! Dissipation is handled by the exact integrating factor
//! `E = e^{-μ|k|^α dt}`; everything else is explicit.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::checkpoint::read_checkpoint;
use crate::diagnostics::{DiagnosticsRecord, Events};
use crate::error::{Error, Result};
use crate::hall::{drift_parts, DriftParams, DriftParts};
use crate::littlewood_paley::DyadicProfile;
use crate::noise::{build_noise_basis, polarizations, sample_increments, NoiseBasis, NoiseStream, WienerIncrement};
use crate::random::keyed_spectrum;
use crate::spectral::{dealias_grid_size, leray_project, sobolev_norm, truncate, w1inf_norm, Mode, SpectralField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Integrating factor plus Euler–Maruyama on the Itô form.
    ExponentialEm,
    /// Integrating-factor Heun on the Stratonovich form (no correction drift).
    StratonovichHeun,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExponentialEm => "exponential-em",
            Scheme::StratonovichHeun => "stratonovich-heun",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exponential-em" => Some(Scheme::ExponentialEm),
            "stratonovich-heun" => Some(Scheme::StratonovichHeun),
            _ => None,
        }
    }
}

/// Initial-data families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InitialData {
    Zero,
    /// `amplitude · a cos(2πk·x)` with `a ⊥ k` the canonical polarization.
    SingleMode { mode: [i32; 3], amplitude: f64 },
    /// `amplitude · (0, sin 2πx₁, cos 2πx₁)`.
    Beltrami { amplitude: f64 },
    /// Keyed random spectrum with coefficients `∝ (1+|k|)^{-decay}`;
    /// `decay` defaults to `s + 2`.
    Random { amplitude: f64, seed: u64, decay: Option<f64> },
    Checkpoint { path: PathBuf },
}

impl InitialData {
    pub fn family(&self) -> &'static str {
        match self {
            InitialData::Zero => "zero",
            InitialData::SingleMode { .. } => "single-mode",
            InitialData::Beltrami { .. } => "beltrami",
            InitialData::Random { .. } => "random",
            InitialData::Checkpoint { .. } => "checkpoint",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    pub alpha: f64,
    pub mu: f64,
    pub r: f64,
    pub s: f64,
    /// Number of noise coefficient fields `K`.
    pub noise_modes: usize,
    pub noise_gamma: f64,
    /// Overall amplitude multiplying every `c_k`.
    pub noise_scale: f64,
    /// Rotates the polarization pairs of the noise basis; 0 is canonical.
    pub noise_seed: u64,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub cutoff_enabled: bool,
    pub hall: bool,
    pub ladder: Vec<f64>,
    pub initial: InitialData,
    /// Steps between diagnostics records.
    pub diagnostics_interval: usize,
    /// Moment `p` of the energy functional.
    pub moment_p: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: 8,
            alpha: 1.5,
            mu: 1.0,
            r: 1.0,
            s: 3.1,
            noise_modes: 4,
            noise_gamma: 6.0,
            noise_scale: 0.5,
            noise_seed: 0,
            dt: 1e-3,
            t_final: 0.1,
            seed: 0,
            scheme: Scheme::ExponentialEm,
            cutoff_enabled: true,
            hall: true,
            ladder: vec![10.0, 100.0, 1000.0],
            initial: InitialData::Random { amplitude: 0.02, seed: 1, decay: None },
            diagnostics_interval: 10,
            moment_p: 2.0,
        }
    }
}

impl SolverConfig {
    /// Every violated constraint, one message each.
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        if self.n == 0 {
            e.push("numerics.n: truncation radius must be at least 1".to_string());
        }
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            e.push(format!(
                "model.alpha = {}: the dissipation exponent must satisfy alpha in (1, 2] (well-posedness theorem)",
                self.alpha
            ));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            e.push(format!("model.mu = {}: resistivity must be finite and non-negative", self.mu));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            e.push(format!("model.r = {}: cutoff threshold must be positive", self.r));
        }
        if !self.s.is_finite() || self.s < 0.0 {
            e.push(format!("model.s = {}: Sobolev index must be finite and non-negative", self.s));
        }
        if self.noise_modes > 0 {
            if !(self.noise_gamma > self.s + 2.5) {
                e.push(format!(
                    "noise.gamma = {}: must exceed s + 5/2 = {} so that the coefficients are summable in H^(s+1)",
                    self.noise_gamma,
                    self.s + 2.5
                ));
            }
            if self.n > 0 && self.noise_modes > 2 * crate::noise::enumerate_wavevectors(self.n).len() {
                e.push(format!("noise.modes = {}: more fields than the truncation supports", self.noise_modes));
            }
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            e.push(format!("noise.scale = {}: must be finite and non-negative", self.noise_scale));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            e.push(format!("numerics.dt = {}: time step must be positive", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            e.push(format!("numerics.t_final = {}: horizon must be non-negative", self.t_final));
        } else if self.dt > 0.0 {
            let steps = (self.t_final / self.dt).round();
            if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
                e.push(format!("numerics.t_final = {}: must be an integer multiple of dt = {}", self.t_final, self.dt));
            }
        }
        if self.ladder.is_empty() {
            e.push("numerics.ladder: at least one level is required".to_string());
        }
        if self.ladder.windows(2).any(|w| !(w[0] < w[1])) || self.ladder.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            e.push("numerics.ladder: levels must be positive and strictly increasing".to_string());
        }
        if self.diagnostics_interval == 0 {
            e.push("output.interval: must be at least 1".to_string());
        }
        if !(self.moment_p >= 2.0) {
            e.push(format!("ensemble.p = {}: moment must be at least 2", self.moment_p));
        }
        match &self.initial {
            InitialData::SingleMode { mode, amplitude } => {
                let k = Mode(*mode);
                if k == Mode::ZERO || k.norm2() > (self.n * self.n) as i64 {
                    e.push(format!("initial.mode = {mode:?}: must be nonzero and inside the truncation ball"));
                }
                if !amplitude.is_finite() {
                    e.push("initial.amplitude: must be finite".to_string());
                }
            }
            InitialData::Beltrami { amplitude } | InitialData::Random { amplitude, .. } if !amplitude.is_finite() => {
                e.push("initial.amplitude: must be finite".to_string());
            }
            _ => {}
        }
        e
    }

    pub fn check(&self) -> Result<()> {
        let e = self.validate();
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    pub fn num_steps(&self) -> u64 {
        (self.t_final / self.dt).round() as u64
    }

    pub fn drift_params(&self) -> DriftParams {
        DriftParams { alpha: self.alpha, mu: self.mu, r: self.r, cutoff_enabled: self.cutoff_enabled, hall: self.hall }
    }

    pub fn noise_basis(&self) -> Result<NoiseBasis> {
        if self.noise_modes == 0 {
            return Ok(NoiseBasis::empty());
        }
        Ok(build_noise_basis(self.noise_modes, self.noise_gamma, self.s, self.n, self.noise_seed)?.scaled(self.noise_scale))
    }

    pub fn initial_field(&self) -> Result<SpectralField> {
        let n = self.n;
        let b = match &self.initial {
            InitialData::Zero => SpectralField::zeros(n),
            InitialData::SingleMode { mode, amplitude } => {
                let (a, _) = polarizations(Mode(*mode), 0);
                SpectralField::trig_mode(n, Mode(*mode), a.map(|x| amplitude * x), [0.0; 3])
            }
            InitialData::Beltrami { amplitude } => {
                SpectralField::trig_mode(n, Mode([1, 0, 0]), [0.0, 0.0, *amplitude], [0.0, *amplitude, 0.0])
            }
            InitialData::Random { amplitude, seed, decay } => {
                keyed_spectrum(n, *seed, decay.unwrap_or(self.s + 2.0)).scaled(*amplitude)
            }
            InitialData::Checkpoint { path } => read_checkpoint(path)?.b.resized(n),
        };
        Ok(truncate(&leray_project(&b), n))
    }
}

/// Independent increments on a fixed fine grid; coarser grids sum them.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    pub dt: f64,
    pub increments: Vec<Vec<f64>>,
}

impl BrownianPath {
    pub fn sample(stream: &NoiseStream, k: usize, dt: f64, steps: u64) -> Result<Self> {
        let increments = (0..steps).map(|j| sample_increments(dt, k, stream, j).map(|w| w.dw)).collect::<Result<_>>()?;
        Ok(BrownianPath { dt, increments })
    }

    /// The same path observed every `factor` fine steps.
    pub fn coarsened(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.increments.len() % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {} increments by a factor of {factor}",
                self.increments.len()
            )));
        }
        let increments = self
            .increments
            .chunks(factor)
            .map(|c| {
                let mut s = vec![0.0; c[0].len()];
                for w in c {
                    s.iter_mut().zip(w).for_each(|(a, b)| *a += b);
                }
                s
            })
            .collect();
        Ok(BrownianPath { dt: self.dt * factor as f64, increments })
    }

    pub fn increment(&self, step: u64) -> WienerIncrement {
        WienerIncrement { dw: self.increments[step as usize].clone(), dt: self.dt }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub step: u64,
    pub t: f64,
    pub b: SpectralField,
    pub sigma_r_hit: Option<f64>,
    /// First-hit time of each ladder level.
    pub ladder_hits: Vec<Option<f64>>,
    pub blown_up: bool,
    pub blow_up_time: Option<f64>,
}

impl TrajectoryState {
    pub fn new(b: SpectralField, levels: usize) -> Self {
        TrajectoryState {
            step: 0,
            t: 0.0,
            b,
            sigma_r_hit: None,
            ladder_hits: vec![None; levels],
            blown_up: false,
            blow_up_time: None,
        }
    }
}

/// Diagnostics series plus the summary of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub path_id: u64,
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: TrajectoryState,
    /// `sup_t ‖B‖^p_{H^s}` over every step.
    pub sup_hs_p: f64,
    /// `∫ ‖B‖^{p-2}_{H^s} ‖B‖²_{H^{s+α/2}} dt` by the left rectangle rule.
    pub dissipation_integral: f64,
}

/// A configured solver: drift parameters, noise basis and the
/// per-mode integrating factor.
#[derive(Clone, Debug)]
pub struct Solver {
    pub config: SolverConfig,
    pub params: DriftParams,
    pub basis: NoiseBasis,
    pub profile: DyadicProfile,
    factor: Vec<f64>,
}

impl Solver {
    pub fn new(config: &SolverConfig) -> Result<Self> {
        config.check()?;
        let basis = config.noise_basis()?;
        Self::with_basis(config, basis)
    }

    pub fn with_basis(config: &SolverConfig, basis: NoiseBasis) -> Result<Self> {
        if let Some(e) = basis.elements().first() {
            if e.field().n() != config.n {
                return Err(Error::RadiusMismatch(e.field().n(), config.n));
            }
        }
        let probe = SpectralField::zeros(config.n);
        let len = probe.len();
        let mut factor = vec![0.0; len];
        for &(idx, k) in probe.ball_modes().iter() {
            let rate = config.mu * (k.norm2() as f64).powf(0.5 * config.alpha);
            factor[idx] = (-rate * config.dt).exp();
        }
        Ok(Solver {
            config: config.clone(),
            params: config.drift_params(),
            basis,
            profile: DyadicProfile::default(),
            factor,
        })
    }

    fn integrate(&self, f: &SpectralField) -> SpectralField {
        apply_weights(f, &self.factor)
    }

    pub fn initial_state(&self) -> Result<TrajectoryState> {
        Ok(TrajectoryState::new(self.config.initial_field()?, self.config.ladder.len()))
    }

    pub fn uses_correction(&self) -> bool {
        self.config.scheme == Scheme::ExponentialEm
    }

    /// Drift pieces of `b` as the configured scheme needs them.
    pub fn parts(&self, b: &SpectralField) -> Result<DriftParts> {
        drift_parts(b, &self.params, &self.basis, self.uses_correction())
    }

    /// `dt·hall (+ dt·correction) + Σ ΠT_kB ΔW_k`.
    fn increment(&self, parts: &DriftParts, dw: &WienerIncrement, with_correction: bool) -> SpectralField {
        let mut f = parts.hall.scaled(dw.dt);
        if with_correction {
            f.axpy(dw.dt, &parts.correction);
        }
        for (tb, w) in parts.transports.iter().zip(&dw.dw) {
            f.axpy(*w, tb);
        }
        f
    }

    fn check_increment(&self, dw: &WienerIncrement) -> Result<()> {
        if dw.dw.len() != self.basis.len() {
            return Err(Error::InvalidArgument(format!(
                "increment has {} entries for {} noise fields",
                dw.dw.len(),
                self.basis.len()
            )));
        }
        if (dw.dt - self.config.dt).abs() > 1e-12 * self.config.dt {
            return Err(Error::InvalidArgument(format!("increment dt {} differs from the step {}", dw.dt, self.config.dt)));
        }
        Ok(())
    }

    /// One step from `state` given the drift pieces already evaluated at
    /// `state.b`. A non-finite result keeps the last finite field and marks
    /// the state as blown up.
    pub fn advance(&self, state: &TrajectoryState, parts: &DriftParts, dw: &WienerIncrement) -> Result<TrajectoryState> {
        self.check_increment(dw)?;
        let b = &state.b;
        let next = match self.config.scheme {
            Scheme::ExponentialEm => {
                let f = self.increment(parts, dw, true);
                self.integrate(&(b + &f))
            }
            Scheme::StratonovichHeun => {
                let f0 = self.increment(parts, dw, false);
                let predictor = self.integrate(&(b + &f0));
                let mut out = b.clone();
                out.axpy(0.5, &f0);
                let mut out = self.integrate(&out);
                if predictor.is_finite() {
                    let p1 = drift_parts(&predictor, &self.params, &self.basis, false)?;
                    out.axpy(0.5, &self.increment(&p1, dw, false));
                } else {
                    out = predictor;
                }
                out
            }
        };
        let step = state.step + 1;
        let t = step as f64 * self.config.dt;
        let mut new = state.clone();
        new.step = step;
        new.t = t;
        if next.is_finite() {
            new.b = leray_project(&next);
        } else {
            new.blown_up = true;
            new.blow_up_time.get_or_insert(t);
        }
        Ok(new)
    }

    pub fn step(&self, state: &TrajectoryState, dw: &WienerIncrement) -> Result<TrajectoryState> {
        let parts = self.parts(&state.b)?;
        self.advance(state, &parts, dw)
    }

    /// Record the stopping events implied by `w1inf = ‖B‖_{W^{1,∞}}` and
    /// `hs = ‖B‖_{H^s}` at the current time; returns the newly hit ones.
    pub fn mark_events(&self, state: &mut TrajectoryState, w1inf: f64, hs: f64) -> Events {
        let mut ev = Events::none(self.config.ladder.len());
        let t = state.t;
        if state.sigma_r_hit.is_none() && !(w1inf <= 0.5 * self.config.r) {
            state.sigma_r_hit = Some(t);
            ev.sigma_r = Some(t);
        }
        for (i, level) in self.config.ladder.iter().enumerate() {
            if state.ladder_hits[i].is_none() && !(hs < *level) {
                state.ladder_hits[i] = Some(t);
                ev.ladder[i] = Some(t);
            }
        }
        let top = state.ladder_hits.last().copied().flatten().is_some();
        if (top || !state.b.is_finite()) && state.blow_up_time.is_none() {
            state.blown_up = true;
            state.blow_up_time = Some(t);
        }
        if state.blown_up && state.blow_up_time == Some(t) {
            ev.blow_up = Some(t);
        }
        ev
    }

    pub fn w1inf(&self, b: &SpectralField) -> Result<f64> {
        w1inf_norm(b, dealias_grid_size(b.n()))
    }

    fn record(&self, state: &TrajectoryState, w1inf: f64, events: Events) -> DiagnosticsRecord {
        let chi = if self.params.cutoff_enabled { self.params.cutoff().value(w1inf) } else { 1.0 };
        DiagnosticsRecord::from_state(
            state.step,
            state.t,
            &state.b,
            self.config.s,
            self.config.alpha,
            w1inf,
            chi,
            &self.profile,
            events,
        )
    }

    /// Run to the horizon (or blow-up) from `state`, drawing increments from
    /// `increments(step)`.
    pub fn run_from(
        &self,
        path_id: u64,
        mut state: TrajectoryState,
        increments: &dyn Fn(u64) -> Result<WienerIncrement>,
    ) -> Result<TrajectoryRecord> {
        let cfg = &self.config;
        let steps = cfg.num_steps();
        let p = cfg.moment_p;
        let mut records = Vec::new();
        let mut pending = Events::none(cfg.ladder.len());
        let mut sup_hs_p: f64 = 0.0;
        let mut integral = 0.0;
        loop {
            let hs = sobolev_norm(&state.b, cfg.s, false);
            sup_hs_p = sup_hs_p.max(hs.powf(p));
            let done = state.step >= steps || state.blown_up;
            let parts = if done { None } else { Some(self.parts(&state.b)?) };
            let w1inf = match &parts {
                Some(parts) => parts.w1inf,
                None => self.w1inf(&state.b)?,
            };
            merge(&mut pending, self.mark_events(&mut state, w1inf, hs));
            let Some(parts) = parts.filter(|_| !state.blown_up) else {
                records.push(self.record(&state, w1inf, std::mem::replace(&mut pending, Events::none(0))));
                break;
            };
            if state.step % cfg.diagnostics_interval as u64 == 0 {
                let ev = std::mem::replace(&mut pending, Events::none(cfg.ladder.len()));
                records.push(self.record(&state, w1inf, ev));
            }
            let hd = sobolev_norm(&state.b, cfg.s + 0.5 * cfg.alpha, false);
            integral += cfg.dt * hs.powf(p - 2.0) * hd * hd;
            let dw = increments(state.step)?;
            let next = self.advance(&state, &parts, &dw)?;
            if next.blown_up && !state.blown_up {
                // keep the last finite field; the event lands on the final record
                let mut last = next;
                let t = last.blow_up_time.unwrap_or(last.t);
                last.b = state.b.clone();
                pending.blow_up = Some(t);
                let w = self.w1inf(&last.b)?;
                records.push(self.record(&last, w, std::mem::replace(&mut pending, Events::none(0))));
                state = last;
                break;
            }
            state = next;
        }
        Ok(TrajectoryRecord { path_id, records, final_state: state, sup_hs_p, dissipation_integral: integral })
    }

    /// Increments keyed by `(seed, path_id, step)`.
    pub fn stream_increments(&self, path_id: u64) -> impl Fn(u64) -> Result<WienerIncrement> {
        let stream = NoiseStream::new(self.config.seed, path_id);
        let (dt, k) = (self.config.dt, self.basis.len());
        move |step| sample_increments(dt, k, &stream, step)
    }

    pub fn run(&self, path_id: u64) -> Result<TrajectoryRecord> {
        let state = self.initial_state()?;
        let inc = self.stream_increments(path_id);
        self.run_from(path_id, state, &inc)
    }
}

fn merge(into: &mut Events, ev: Events) {
    if into.ladder.len() < ev.ladder.len() {
        into.ladder.resize(ev.ladder.len(), None);
    }
    into.sigma_r = into.sigma_r.or(ev.sigma_r);
    into.blow_up = into.blow_up.or(ev.blow_up);
    for (a, b) in into.ladder.iter_mut().zip(ev.ladder) {
        *a = a.or(b);
    }
}

fn apply_weights(f: &SpectralField, w: &[f64]) -> SpectralField {
    let mut out = f.clone();
    for comp in out.comps_mut().iter_mut() {
        for (z, &x) in comp.iter_mut().zip(w) {
            *z *= x;
        }
    }
    out
}

/// One integrating-factor Euler–Maruyama step of the Itô form.
pub fn step_exponential_em(
    state: &TrajectoryState,
    config: &SolverConfig,
    basis: &NoiseBasis,
    dw: &WienerIncrement,
) -> Result<TrajectoryState> {
    let cfg = SolverConfig { scheme: Scheme::ExponentialEm, ..config.clone() };
    Solver::with_basis(&cfg, basis.clone())?.step(state, dw)
}

/// One integrating-factor Heun step of the Stratonovich form.
pub fn step_stratonovich_heun(
    state: &TrajectoryState,
    config: &SolverConfig,
    basis: &NoiseBasis,
    dw: &WienerIncrement,
) -> Result<TrajectoryState> {
    let cfg = SolverConfig { scheme: Scheme::StratonovichHeun, ..config.clone() };
    Solver::with_basis(&cfg, basis.clone())?.step(state, dw)
}

/// Update `σ_r`, the ladder and the blow-up flag for the current state.
pub fn detect_stopping(state: &TrajectoryState, config: &SolverConfig) -> Result<TrajectoryState> {
    let solver = Solver::with_basis(config, NoiseBasis::empty())?;
    let mut out = state.clone();
    if out.ladder_hits.len() != config.ladder.len() {
        out.ladder_hits.resize(config.ladder.len(), None);
    }
    let (w, hs) = if state.b.is_finite() {
        (solver.w1inf(&state.b)?, sobolev_norm(&state.b, config.s, false))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    solver.mark_events(&mut out, w, hs);
    Ok(out)
}

/// Run one trajectory of `config` with the noise path keyed by
/// `(config.seed, path_id)`.
pub fn run_trajectory(config: &SolverConfig, path_id: u64) -> Result<TrajectoryRecord> {
    Solver::new(config)?.run(path_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::c64;

    fn decay_config(alpha: f64) -> SolverConfig {
        SolverConfig {
            n: 4,
            alpha,
            mu: 1.0,
            noise_modes: 0,
            dt: 0.01,
            t_final: 0.5,
            initial: InitialData::SingleMode { mode: [1, 1, 0], amplitude: 0.3 },
            ..Default::default()
        }
    }

    #[test]
    fn zero_field_is_absorbing() {
        let cfg = SolverConfig { n: 4, initial: InitialData::Zero, t_final: 0.05, dt: 0.01, ..Default::default() };
        let basis = cfg.noise_basis().unwrap();
        let state = TrajectoryState::new(SpectralField::zeros(4), cfg.ladder.len());
        let dw = sample_increments(cfg.dt, basis.len(), &NoiseStream::new(1, 2), 0).unwrap();
        assert_eq!(step_exponential_em(&state, &cfg, &basis, &dw).unwrap().b.max_abs(), 0.0);
        assert_eq!(step_stratonovich_heun(&state, &cfg, &basis, &dw).unwrap().b.max_abs(), 0.0);
        let rec = run_trajectory(&cfg, 0).unwrap();
        assert!(rec.records.iter().all(|r| r.l2 == 0.0 && r.events.is_empty()));
        assert_eq!(rec.final_state.sigma_r_hit, None);
    }

    #[test]
    fn single_step_dissipation_is_exact() {
        let mut cfg = decay_config(2.0);
        cfg.n = 3;
        let basis = NoiseBasis::empty();
        let mut b = SpectralField::zeros(3);
        b.set_real_mode(Mode([1, 0, 0]), [c64(0.0, 0.0), c64(0.25, 0.1), c64(0.0, 0.0)]);
        let state = TrajectoryState::new(b.clone(), 3);
        let next = step_exponential_em(&state, &cfg, &basis, &WienerIncrement::zeros(0, cfg.dt)).unwrap();
        let expect = b.get(Mode([1, 0, 0]))[1] * (-cfg.dt).exp();
        assert!((next.b.get(Mode([1, 0, 0]))[1] - expect).norm() <= 1e-16);
        assert_eq!(next.t, cfg.dt);
    }

    #[test]
    fn single_mode_run_follows_the_semigroup() {
        for alpha in [1.2, 1.5, 2.0] {
            let cfg = decay_config(alpha);
            let rec = run_trajectory(&cfg, 0).unwrap();
            let l0 = rec.records[0].l2;
            let lt = rec.final_state.b.l2_norm();
            let rate = 2f64.powf(0.5 * alpha);
            assert!((lt - l0 * (-rate * cfg.t_final).exp()).abs() <= 1e-10 * l0, "{alpha}");
        }
    }

    #[test]
    fn zero_horizon_gives_one_row() {
        let cfg = SolverConfig { n: 4, t_final: 0.0, ..Default::default() };
        let rec = run_trajectory(&cfg, 3).unwrap();
        assert_eq!(rec.records.len(), 1);
        assert_eq!(rec.records[0].t, 0.0);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = SolverConfig { n: 4, t_final: 0.02, dt: 0.002, diagnostics_interval: 2, ..Default::default() };
        let a = run_trajectory(&cfg, 5).unwrap();
        let b = run_trajectory(&cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = run_trajectory(&cfg, 6).unwrap();
        assert_ne!(a.final_state.b, c.final_state.b);
        let ts: Vec<f64> = a.records.iter().map(|r| r.t).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        for r in &a.records {
            assert!(r.divergence_residual <= 1e-11 * r.l2);
        }
    }

    #[test]
    fn stopping_examples() {
        let cfg = SolverConfig { n: 4, r: 0.1, ..Default::default() };
        let b = SpectralField::trig_mode(4, Mode([1, 0, 0]), [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]);
        let st = detect_stopping(&TrajectoryState::new(b, 3), &cfg).unwrap();
        assert_eq!(st.sigma_r_hit, Some(0.0));

        let st = detect_stopping(&TrajectoryState::new(SpectralField::zeros(4), 3), &cfg).unwrap();
        assert_eq!(st.sigma_r_hit, None);
        assert!(st.ladder_hits.iter().all(Option::is_none) && !st.blown_up);

        let cfg = SolverConfig { r: 100.0, ladder: vec![5.0, 50.0], diagnostics_interval: 5, ..decay_config(1.5) };
        let rec = run_trajectory(&cfg, 0).unwrap();
        assert!(rec.final_state.ladder_hits.iter().all(Option::is_none));
        assert!(!rec.final_state.blown_up);
        assert_eq!(rec.final_state.sigma_r_hit, None);

        let cfg = SolverConfig { ladder: vec![0.01, 0.1], ..cfg };
        let rec = run_trajectory(&cfg, 0).unwrap();
        assert!(rec.final_state.blown_up);
        assert_eq!(rec.final_state.ladder_hits, vec![Some(0.0), Some(0.0)]);
        assert_eq!(rec.records.len(), 1);
        assert_eq!(rec.records[0].events.blow_up, Some(0.0));
    }

    #[test]
    fn heun_without_noise_is_second_order_close_to_em() {
        let base = SolverConfig {
            n: 4,
            noise_modes: 0,
            mu: 0.2,
            r: 100.0,
            t_final: 0.04,
            initial: InitialData::Random { amplitude: 0.05, seed: 3, decay: Some(2.0) },
            ..Default::default()
        };
        let diff = |dt: f64| {
            let em = run_trajectory(&SolverConfig { dt, ..base.clone() }, 0).unwrap();
            let hn = run_trajectory(&SolverConfig { dt, scheme: Scheme::StratonovichHeun, ..base.clone() }, 0).unwrap();
            (&em.final_state.b - &hn.final_state.b).l2_norm()
        };
        let (e1, e2) = (diff(0.004), diff(0.002));
        let order = (e1 / e2).log2();
        assert!(order > 0.8, "{e1} {e2} {order}");
    }

    #[test]
    fn brownian_coarsening_sums_increments() {
        let p = BrownianPath::sample(&NoiseStream::new(1, 1), 2, 0.25, 4).unwrap();
        let c = p.coarsened(2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.dt, 0.5);
        assert_eq!(c.increments[1][0], p.increments[2][0] + p.increments[3][0]);
        assert!(p.coarsened(3).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = SolverConfig { alpha: 2.5, dt: -1.0, ladder: vec![2.0, 1.0], ..Default::default() };
        let errs = cfg.validate();
        assert_eq!(errs.len(), 3, "{errs:?}");
        assert!(errs[0].contains("(1, 2]"));
    }
}
