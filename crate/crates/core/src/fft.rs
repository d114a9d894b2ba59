//! Cubic 3-D FFTs on `m³` grids with pruning for band-limited data.
//!
//! Spectral data of radius `n` occupies only the wrapped index ranges
//! `0..=n` and `m-n..m` on each axis, so synthesis skips the lines that are
//! identically zero and analysis skips the lines whose output is discarded.
//! Two real fields are packed into one complex transform.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft3 {
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    work: RefCell<Work>,
}

/// Reusable buffers; plans are thread-local so a `RefCell` suffices.
#[derive(Default)]
struct Work {
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, Rc<Fft3>>> = RefCell::new(HashMap::new());
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dir {
    Forward,
    Inverse,
}

/// Wrapped grid index of a signed wavenumber.
#[inline]
pub(crate) fn wrap(k: i32, m: usize) -> usize {
    if k >= 0 {
        k as usize
    } else {
        (m as i64 + k as i64) as usize
    }
}

impl Fft3 {
    pub(crate) fn get(m: usize) -> Rc<Fft3> {
        PLANS.with(|plans| {
            plans
                .borrow_mut()
                .entry(m)
                .or_insert_with(|| {
                    let mut planner = FftPlanner::new();
                    Rc::new(Fft3 {
                        m,
                        fwd: planner.plan_fft_forward(m),
                        inv: planner.plan_fft_inverse(m),
                        work: RefCell::new(Work::default()),
                    })
                })
                .clone()
        })
    }

    fn plan(&self, dir: Dir) -> &Arc<dyn Fft<f64>> {
        match dir {
            Dir::Forward => &self.fwd,
            Dir::Inverse => &self.inv,
        }
    }

    /// Whether wrapped index `i` is inside the band `|k| <= n`.
    #[inline]
    fn in_band(i: usize, n: usize, m: usize) -> bool {
        i <= n || i >= m - n
    }

    fn band_indices(n: usize, m: usize) -> Vec<usize> {
        (0..m).filter(|&i| Self::in_band(i, n, m)).collect()
    }

    /// Transform along the contiguous axis for every line `(i, j)` in the band.
    fn pass_axis2(&self, data: &mut [Complex64], n: Option<usize>, dir: Dir, scratch: &mut Vec<Complex64>) {
        let m = self.m;
        let plan = self.plan(dir);
        ensure_scratch(scratch, plan.get_inplace_scratch_len());
        match n {
            None => plan.process_with_scratch(data, scratch),
            Some(n) => {
                for i in Self::band_indices(n, m) {
                    let plane = &mut data[i * m * m..(i + 1) * m * m];
                    // band rows j form two contiguous runs
                    let lo = &mut plane[..(n + 1) * m];
                    plan.process_with_scratch(lo, scratch);
                    if n > 0 {
                        let hi = &mut plane[(m - n) * m..];
                        plan.process_with_scratch(hi, scratch);
                    }
                }
            }
        }
    }

    /// Transform along axis 1 for planes `i` in the band (or all planes).
    fn pass_axis1(&self, data: &mut [Complex64], n: Option<usize>, dir: Dir, tmp: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let m = self.m;
        let plan = self.plan(dir);
        ensure_scratch(scratch, plan.get_inplace_scratch_len());
        tmp.resize(m * m, Complex64::new(0.0, 0.0));
        let planes: Vec<usize> = match n {
            None => (0..m).collect(),
            Some(n) => Self::band_indices(n, m),
        };
        for i in planes {
            let plane = &mut data[i * m * m..(i + 1) * m * m];
            transpose(plane, tmp, m);
            plan.process_with_scratch(tmp, scratch);
            transpose(tmp, plane, m);
        }
    }

    /// Transform along axis 0 for every line.
    fn pass_axis0(&self, data: &mut [Complex64], rows: Option<usize>, dir: Dir, tmp: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let m = self.m;
        let plan = self.plan(dir);
        ensure_scratch(scratch, plan.get_inplace_scratch_len());
        tmp.resize(m * m, Complex64::new(0.0, 0.0));
        let js: Vec<usize> = match rows {
            None => (0..m).collect(),
            Some(n) => Self::band_indices(n, m),
        };
        for j in js {
            for i in 0..m {
                let src = &data[(i * m + j) * m..(i * m + j + 1) * m];
                for (l, v) in src.iter().enumerate() {
                    tmp[l * m + i] = *v;
                }
            }
            plan.process_with_scratch(tmp, scratch);
            for i in 0..m {
                let dst = &mut data[(i * m + j) * m..(i * m + j + 1) * m];
                for (l, v) in dst.iter_mut().enumerate() {
                    *v = tmp[l * m + i];
                }
            }
        }
    }

    /// Unnormalized inverse transform of data supported on the band `|k_i| <= n`.
    fn inverse_banded(&self, data: &mut [Complex64], n: usize, tmp: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let band = (2 * n < self.m).then_some(n);
        self.pass_axis2(data, band, Dir::Inverse, scratch);
        self.pass_axis1(data, band, Dir::Inverse, tmp, scratch);
        self.pass_axis0(data, None, Dir::Inverse, tmp, scratch);
    }

    /// Unnormalized forward transform; only the band `|k_i| <= n` of the
    /// output is valid.
    fn forward_banded(&self, data: &mut [Complex64], n: usize, tmp: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) {
        let band = (2 * n < self.m).then_some(n);
        self.pass_axis0(data, None, Dir::Forward, tmp, scratch);
        self.pass_axis1(data, band, Dir::Forward, tmp, scratch);
        self.pass_axis2(data, band, Dir::Forward, scratch);
    }

    /// Synthesize real grid values from cube-indexed Hermitian spectra of
    /// radius `n`. Pairs of spectra share one complex transform.
    pub(crate) fn synthesize(&self, spectra: &[&[Complex64]], n: usize) -> Vec<Vec<f64>> {
        let m = self.m;
        let side = 2 * n + 1;
        let mut out = Vec::with_capacity(spectra.len());
        let mut work = self.work.borrow_mut();
        let Work { buf, tmp, scratch } = &mut *work;
        buf.resize(m * m * m, Complex64::new(0.0, 0.0));
        for chunk in spectra.chunks(2) {
            buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            let a = chunk[0];
            let b = chunk.get(1).copied();
            for i1 in 0..side {
                let w1 = wrap(i1 as i32 - n as i32, m);
                for i2 in 0..side {
                    let w2 = wrap(i2 as i32 - n as i32, m);
                    let src = (i1 * side + i2) * side;
                    let dst = (w1 * m + w2) * m;
                    for i3 in 0..side {
                        let w3 = wrap(i3 as i32 - n as i32, m);
                        let mut z = a[src + i3];
                        if let Some(b) = b {
                            let bv = b[src + i3];
                            z += Complex64::new(-bv.im, bv.re);
                        }
                        // += so that modes sharing a grid index on coarse grids alias
                        buf[dst + w3] += z;
                    }
                }
            }
            self.inverse_banded(buf, n, tmp, scratch);
            if b.is_some() {
                let mut re = Vec::with_capacity(buf.len());
                let mut im = Vec::with_capacity(buf.len());
                for z in buf.iter() {
                    re.push(z.re);
                    im.push(z.im);
                }
                out.push(re);
                out.push(im);
            } else {
                out.push(buf.iter().map(|z| z.re).collect());
            }
        }
        out
    }

    /// Analyze real grid values into cube-indexed spectra of radius `n`
    /// (normalized so that `f(x) = Σ f̂_k e^{2πik·x}`). Modes outside the
    /// Euclidean ball are set to zero.
    pub(crate) fn analyze(&self, grids: &[&[f64]], n: usize) -> Vec<Vec<Complex64>> {
        let m = self.m;
        let side = 2 * n + 1;
        let scale = 1.0 / (m * m * m) as f64;
        let r2 = (n * n) as i64;
        let mut out = Vec::with_capacity(grids.len());
        let mut work = self.work.borrow_mut();
        let Work { buf, tmp, scratch } = &mut *work;
        buf.resize(m * m * m, Complex64::new(0.0, 0.0));
        for chunk in grids.chunks(2) {
            let a = chunk[0];
            let b = chunk.get(1).copied();
            match b {
                Some(b) => {
                    for ((z, &x), &y) in buf.iter_mut().zip(a).zip(b) {
                        *z = Complex64::new(x, y);
                    }
                }
                None => {
                    for (z, &x) in buf.iter_mut().zip(a) {
                        *z = Complex64::new(x, 0.0);
                    }
                }
            }
            self.forward_banded(buf, n, tmp, scratch);
            let mut sa = vec![Complex64::new(0.0, 0.0); side * side * side];
            let mut sb = b.map(|_| vec![Complex64::new(0.0, 0.0); side * side * side]);
            for i1 in 0..side {
                let k1 = i1 as i32 - n as i32;
                for i2 in 0..side {
                    let k2 = i2 as i32 - n as i32;
                    for i3 in 0..side {
                        let k3 = i3 as i32 - n as i32;
                        if (k1 as i64).pow(2) + (k2 as i64).pow(2) + (k3 as i64).pow(2) > r2 {
                            continue;
                        }
                        let idx = (i1 * side + i2) * side + i3;
                        let zk = buf[(wrap(k1, m) * m + wrap(k2, m)) * m + wrap(k3, m)];
                        match sb.as_mut() {
                            None => sa[idx] = zk * scale,
                            Some(sb) => {
                                let zm = buf[(wrap(-k1, m) * m + wrap(-k2, m)) * m + wrap(-k3, m)].conj();
                                sa[idx] = (zk + zm) * (0.5 * scale);
                                let d = (zk - zm) * (0.5 * scale);
                                // divide by i
                                sb[idx] = Complex64::new(d.im, -d.re);
                            }
                        }
                    }
                }
            }
            if sb.is_none() {
                // a single real field: symmetrize so the result is exactly Hermitian
                let total = side * side * side;
                for idx in 0..total / 2 + 1 {
                    let mirror = total - 1 - idx;
                    let avg = (sa[idx] + sa[mirror].conj()) * 0.5;
                    sa[idx] = avg;
                    sa[mirror] = avg.conj();
                }
            }
            out.push(sa);
            if let Some(sb) = sb {
                out.push(sb);
            }
        }
        out
    }
}

fn ensure_scratch(scratch: &mut Vec<Complex64>, len: usize) {
    if scratch.len() < len {
        scratch.resize(len, Complex64::new(0.0, 0.0));
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const BLOCK: usize = 16;
    for ib in (0..m).step_by(BLOCK) {
        for jb in (0..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                for j in jb..(jb + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}
