//! Per-sample diagnostics and their newline-delimited JSON encoding.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::littlewood_paley::{lp_spectrum, DyadicProfile};
use crate::spectral::{sobolev_norm, SpectralField};

/// Stopping events first detected since the previous record. Every field is
/// always present; `null` means "not in this interval".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Events {
    pub sigma_r: Option<f64>,
    /// One entry per ladder level, in level order.
    pub ladder: Vec<Option<f64>>,
    pub blow_up: Option<f64>,
}

impl Events {
    pub fn none(levels: usize) -> Self {
        Events { sigma_r: None, ladder: vec![None; levels], blow_up: None }
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_r.is_none() && self.blow_up.is_none() && self.ladder.iter().all(Option::is_none)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    pub l2: f64,
    pub hs: f64,
    /// `‖B‖_{H^{s+α/2}}`
    pub hs_dissipative: f64,
    pub w1inf: f64,
    pub chi: f64,
    /// `λ_q^{2s}‖Δ_q B‖²` for `q = -1..=qmax`.
    pub lp_spectrum: Vec<f64>,
    pub divergence_residual: f64,
    pub events: Events,
}

impl DiagnosticsRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn from_state(
        step: u64,
        t: f64,
        b: &SpectralField,
        s: f64,
        alpha: f64,
        w1inf: f64,
        chi: f64,
        profile: &DyadicProfile,
        events: Events,
    ) -> Self {
        DiagnosticsRecord {
            step,
            t,
            l2: b.l2_norm(),
            hs: sobolev_norm(b, s, false),
            hs_dissipative: sobolev_norm(b, s + 0.5 * alpha, false),
            w1inf,
            chi,
            lp_spectrum: lp_spectrum(b, s, profile),
            divergence_residual: b.divergence_residual(),
            events,
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn write_ndjson<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json_line()?)?;
    }
    Ok(())
}

pub fn read_ndjson<R: BufRead>(r: R) -> Result<Vec<DiagnosticsRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
