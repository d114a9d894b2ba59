//! Slow reference implementations by direct summation over mode pairs.
//! They share nothing with the FFT paths beyond the field container and are
//! meant for small radii only.

use num_complex::Complex64;

use crate::spectral::{c64, Mode, ProductOp, SpectralField, TWO_PI, ZERO};

fn cross(a: [Complex64; 3], b: [Complex64; 3]) -> [Complex64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn nonzero_modes(f: &SpectralField) -> Vec<(Mode, [Complex64; 3])> {
    f.ball_modes()
        .iter()
        .map(|&(idx, k)| (k, f.at(idx)))
        .filter(|(_, v)| v.iter().any(|z| *z != ZERO))
        .collect()
}

fn add_at(out: &mut SpectralField, k: Mode, v: [Complex64; 3]) {
    if let Some(idx) = out.index(k) {
        let comps = out.comps_mut();
        for c in 0..3 {
            comps[c][idx] += v[c];
        }
    }
}

/// The product of two band-limited fields by convolution, restricted to the
/// ball of radius `n`.
pub fn brute_product(f: &SpectralField, g: &SpectralField, op: ProductOp) -> SpectralField {
    let mut out = SpectralField::zeros(f.n());
    let fs = nonzero_modes(f);
    let gs = nonzero_modes(g);
    for &(p, a) in &fs {
        for &(q, b) in &gs {
            let v = match op {
                ProductOp::Cross => cross(a, b),
                ProductOp::Dot => [a[0] * b[0] + a[1] * b[1] + a[2] * b[2], ZERO, ZERO],
                ProductOp::Scale => [a[0] * b[0], a[1] * b[0], a[2] * b[0]],
            };
            add_at(&mut out, p + q, v);
        }
    }
    out
}

/// `∇×f` mode by mode.
pub fn brute_curl(f: &SpectralField) -> SpectralField {
    f.map_modes(|k, v| {
        let ik = k.as_f64().map(|x| c64(0.0, TWO_PI * x));
        cross(ik, v)
    })
}

/// `∇×((∇×B)×B)` by double convolution.
pub fn brute_hall(b: &SpectralField) -> SpectralField {
    brute_curl(&brute_product(&brute_curl(b), b, ProductOp::Cross))
}

/// `(c·∇)B` as `Σ_q 2πi (ĉ_{k−q}·q) B̂_q`.
pub fn brute_transport(c: &SpectralField, b: &SpectralField) -> SpectralField {
    let mut out = SpectralField::zeros(b.n());
    let cs = nonzero_modes(c);
    for &(q, bq) in &nonzero_modes(b) {
        let qf = q.as_f64();
        for &(p, cp) in &cs {
            let a = (cp[0] * qf[0] + cp[1] * qf[1] + cp[2] * qf[2]) * c64(0.0, TWO_PI);
            add_at(&mut out, p + q, bq.map(|z| a * z));
        }
    }
    out
}

/// Dense matrix of a linear operator on the coefficients of radius-`n`
/// fields, indexed by (ball mode, component).
pub struct OperatorMatrix {
    n: usize,
    modes: Vec<Mode>,
    entries: Vec<Complex64>,
}

impl OperatorMatrix {
    fn dim(&self) -> usize {
        3 * self.modes.len()
    }

    /// `u ↦ P_n (c·∇)u`, assembled entry by entry.
    pub fn transport(c: &SpectralField, n: usize) -> Self {
        let probe = SpectralField::zeros(n);
        let modes: Vec<Mode> = probe.ball_modes().iter().map(|&(_, k)| k).collect();
        let d = 3 * modes.len();
        let mut entries = vec![ZERO; d * d];
        for (row, &k) in modes.iter().enumerate() {
            for (col, &q) in modes.iter().enumerate() {
                let cp = c.get(k - q);
                let qf = q.as_f64();
                let a = (cp[0] * qf[0] + cp[1] * qf[1] + cp[2] * qf[2]) * c64(0.0, TWO_PI);
                for j in 0..3 {
                    entries[(3 * row + j) * d + 3 * col + j] = a;
                }
            }
        }
        OperatorMatrix { n, modes, entries }
    }

    /// Diagonal `|k|^e` (zero mode to zero).
    pub fn multiplier(n: usize, e: f64) -> Self {
        let probe = SpectralField::zeros(n);
        let modes: Vec<Mode> = probe.ball_modes().iter().map(|&(_, k)| k).collect();
        let d = 3 * modes.len();
        let mut entries = vec![ZERO; d * d];
        for (row, &k) in modes.iter().enumerate() {
            let w = if k == Mode::ZERO { 0.0 } else { (k.norm2() as f64).powf(0.5 * e) };
            for j in 0..3 {
                entries[(3 * row + j) * d + 3 * row + j] = c64(w, 0.0);
            }
        }
        OperatorMatrix { n, modes, entries }
    }

    pub fn mul(&self, other: &OperatorMatrix) -> OperatorMatrix {
        let d = self.dim();
        let mut entries = vec![ZERO; d * d];
        for i in 0..d {
            for l in 0..d {
                let a = self.entries[i * d + l];
                if a == ZERO {
                    continue;
                }
                for j in 0..d {
                    entries[i * d + j] += a * other.entries[l * d + j];
                }
            }
        }
        OperatorMatrix { n: self.n, modes: self.modes.clone(), entries }
    }

    pub fn add(&self, other: &OperatorMatrix, scale: f64) -> OperatorMatrix {
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b * scale).collect();
        OperatorMatrix { n: self.n, modes: self.modes.clone(), entries }
    }

    pub fn apply(&self, u: &SpectralField) -> SpectralField {
        let d = self.dim();
        let x: Vec<Complex64> = self.modes.iter().flat_map(|&k| u.get(k)).collect();
        let mut out = SpectralField::zeros(self.n);
        for (row, &k) in self.modes.iter().enumerate() {
            let mut v = [ZERO; 3];
            for (j, vj) in v.iter_mut().enumerate() {
                let r = &self.entries[(3 * row + j) * d..(3 * row + j + 1) * d];
                *vj = r.iter().zip(&x).map(|(a, b)| a * b).sum();
            }
            add_at(&mut out, k, v);
        }
        out
    }
}

/// `Λ^γ [Λ^s, c·∇] u` and `[[Λ^s, c·∇], c·∇] u` on radius `n` from the
/// dense matrices. Inputs should be supported well inside the ball so that
/// the truncations in between are exact.
pub fn matrix_commutators(c: &SpectralField, u: &SpectralField, s: f64, gamma: f64) -> (SpectralField, SpectralField) {
    let n = u.n();
    let t = OperatorMatrix::transport(c, n);
    let ls = OperatorMatrix::multiplier(n, s);
    let lg = OperatorMatrix::multiplier(n, gamma);
    let comm = ls.mul(&t).add(&t.mul(&ls), -1.0);
    let single = lg.mul(&comm).apply(u);
    let double = comm.mul(&t).add(&t.mul(&comm), -1.0).apply(u);
    (single, double)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_two_cosines() {
        // cos(2πx)·cos(2πx) = ½ + ½cos(4πx)
        let f = SpectralField::trig_mode(2, Mode([1, 0, 0]), [1.0, 0.0, 0.0], [0.0; 3]);
        let p = brute_product(&f, &f, ProductOp::Dot);
        assert!((p.get(Mode::ZERO)[0].re - 0.5).abs() < 1e-15);
        assert!((p.get(Mode([2, 0, 0]))[0].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn matrix_transport_matches_direct_sum() {
        let c = SpectralField::trig_mode(3, Mode([1, 0, 0]), [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]);
        let u = SpectralField::trig_mode(3, Mode([0, 1, 0]), [1.0, 0.0, 0.0], [0.0; 3]);
        let a = OperatorMatrix::transport(&c, 3).apply(&u);
        let b = brute_transport(&c, &u);
        assert!((&a - &b).max_abs() < 1e-14);
    }
}
