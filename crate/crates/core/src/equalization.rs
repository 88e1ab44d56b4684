//! Linear equalizers and their complexity model.
//!
//! All equalizers return soft symbol estimates; slicing happens in
//! [`crate::modulation`]. Complexity is accounted with a flop model rather
//! than timed, see [`flop_report`].

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Domain, ValidatedConfig};
use crate::linalg::{CMatrix, ZERO};
use crate::transforms::{build_kernel, domain_plan};

/// Version of the formulas in [`flop_report`].
pub const FLOP_MODEL_VERSION: u32 = 1;
/// Pivot ratio below which a system is declared singular.
const SINGULAR_RATIO: f64 = 1e-13;

/// Per-bin MMSE `conj(H) y / (|H|^2 + noise_var)`; zero-forcing when the
/// noise variance is zero. `h` is reused cyclically when shorter than `y`
/// (one response per subcarrier, shared by all symbols). A bin with
/// `H = 0` and no noise yields 0.
pub fn equalize_one_tap(y: &[Complex64], h: &[Complex64], noise_var: f64) -> Vec<Complex64> {
    assert!(!h.is_empty() && y.len() % h.len() == 0, "response length must divide the symbol count");
    y.iter()
        .enumerate()
        .map(|(i, v)| {
            let hk = h[i % h.len()];
            let den = hk.norm_sqr() + noise_var;
            if den == 0.0 {
                ZERO
            } else {
                hk.conj() * v / den
            }
        })
        .collect()
}

/// `(H^H H + noise_var I)^{-1} H^H y` by LU with partial pivoting.
pub fn equalize_mmse(y: &[Complex64], h: &CMatrix, noise_var: f64) -> Result<Vec<Complex64>> {
    let n = h.ncols();
    if h.nrows() != n || y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: if h.nrows() != n { h.nrows() } else { y.len() },
        });
    }
    let hh = h.adjoint();
    let mut a = &hh * h;
    for i in 0..n {
        a[(i, i)] += noise_var;
    }
    let rhs = &hh * DVector::from_column_slice(y);
    let lu = a.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if n > 0 && (max == 0.0 || min / max < SINGULAR_RATIO) {
        return Err(Error::SingularSystem(format!("pivot ratio {:.3e}", if max > 0.0 { min / max } else { 0.0 })));
    }
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("LU solve failed".into()))?;
    Ok(x.iter().copied().collect())
}

/// Result of a banded solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedOutput {
    pub symbols: Vec<Complex64>,
    /// `||H - H_band||_F / ||H||_F`.
    pub truncated: f64,
    /// Set when the truncated part exceeds 1 % of the Frobenius norm.
    pub warning: Option<String>,
}

/// Threshold of [`BandedOutput::warning`].
pub const BAND_WARNING: f64 = 0.01;

/// Signed cyclic offset `j - i` folded into `(-n/2, n/2]`.
fn cyclic_offset(i: usize, j: usize, n: usize) -> i64 {
    let d = (j as i64 - i as i64).rem_euclid(n as i64);
    if 2 * d > n as i64 {
        d - n as i64
    } else {
        d
    }
}

/// MMSE restricted to the cyclic band `|j - i| <= b` of `H` (offsets taken
/// modulo `n`, since chirp- and delay-Doppler-domain channels wrap around).
///
/// The normal matrix `H_b^H H_b + noise_var I` is Hermitian with cyclic
/// half-bandwidth `w = 2 b`. Its Cholesky factor keeps band `w` except for
/// the last `w` rows, which fill in completely; the factorization therefore
/// costs `O(n w^2)`.
pub fn equalize_mmse_banded(y: &[Complex64], h: &CMatrix, noise_var: f64, b: usize) -> Result<BandedOutput> {
    let n = h.ncols();
    if h.nrows() != n || y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: if h.nrows() != n { h.nrows() } else { y.len() },
        });
    }
    // banded rows of H and truncation bookkeeping
    let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
    let (mut kept, mut total) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)];
            let e = v.norm_sqr();
            total += e;
            if e > 0.0 && cyclic_offset(i, j, n).unsigned_abs() as usize <= b {
                rows[i].push((j, v));
                kept += e;
            }
        }
    }
    let truncated = if total > 0.0 { ((total - kept).max(0.0) / total).sqrt() } else { 0.0 };
    let warning = (truncated > BAND_WARNING).then(|| {
        format!("band {b} drops {:.2}% of the channel's Frobenius norm", 100.0 * truncated)
    });

    // A = H_b^H H_b + sigma^2 I, rhs = H_b^H y
    let w = (2 * b).min(n.saturating_sub(1));
    let mut a = ArrowMatrix::zeros(n, w);
    let mut rhs = vec![ZERO; n];
    for (r, row) in rows.iter().enumerate() {
        for &(i, hi) in row {
            rhs[i] += hi.conj() * y[r];
            for &(j, hj) in row {
                if j <= i {
                    a.add(i, j, hi.conj() * hj);
                }
            }
        }
    }
    for i in 0..n {
        a.add(i, i, Complex64::new(noise_var, 0.0));
    }
    a.cholesky()?;
    Ok(BandedOutput {
        symbols: a.solve(rhs),
        truncated,
        warning,
    })
}

/// Lower triangle of a Hermitian matrix with band `w` plus `w` dense
/// trailing rows.
struct ArrowMatrix {
    n: usize,
    w: usize,
    /// Row `i < n - w` stores columns `i - w ..= i` (clamped at 0).
    band: Vec<Vec<Complex64>>,
    /// Row `n - w + t` stores columns `0 ..= n - w + t`.
    tail: Vec<Vec<Complex64>>,
}

impl ArrowMatrix {
    fn zeros(n: usize, w: usize) -> Self {
        let split = n - w;
        Self {
            n,
            w,
            band: (0..split).map(|i| vec![ZERO; i.min(w) + 1]).collect(),
            tail: (split..n).map(|i| vec![ZERO; i + 1]).collect(),
        }
    }

    fn lo(&self, i: usize) -> usize {
        if i < self.n - self.w {
            i.saturating_sub(self.w)
        } else {
            0
        }
    }

    fn slot(&mut self, i: usize, j: usize) -> &mut Complex64 {
        let split = self.n - self.w;
        if i < split {
            let lo = i.saturating_sub(self.w);
            &mut self.band[i][j - lo]
        } else {
            &mut self.tail[i - split][j]
        }
    }

    fn get(&self, i: usize, j: usize) -> Complex64 {
        let split = self.n - self.w;
        if i < split {
            let lo = i.saturating_sub(self.w);
            if j < lo {
                ZERO
            } else {
                self.band[i][j - lo]
            }
        } else {
            self.tail[i - split][j]
        }
    }

    /// Adds to `(i, j)` with `j <= i`. A cyclic-band entry with `i - j > w`
    /// is a wrap-around corner and always falls in a dense tail row.
    fn add(&mut self, i: usize, j: usize, v: Complex64) {
        debug_assert!(j <= i && j >= self.lo(i));
        *self.slot(i, j) += v;
    }

    /// In-place Cholesky `A = L L^H`.
    fn cholesky(&mut self) -> Result<()> {
        let mut max_pivot = 0.0f64;
        for i in 0..self.n {
            let lo_i = self.lo(i);
            for j in lo_i..=i {
                let lo = lo_i.max(self.lo(j));
                let mut s = self.get(i, j);
                for k in lo..j {
                    s -= self.get(i, k) * self.get(j, k).conj();
                }
                if i == j {
                    let d = s.re;
                    max_pivot = max_pivot.max(d.abs());
                    if !(d > SINGULAR_RATIO * max_pivot.max(f64::MIN_POSITIVE)) {
                        return Err(Error::SingularSystem(format!("non-positive pivot {d:.3e} at {i}")));
                    }
                    *self.slot(i, i) = Complex64::new(d.sqrt(), 0.0);
                } else {
                    let djj = self.get(j, j);
                    *self.slot(i, j) = s / djj;
                }
            }
        }
        Ok(())
    }

    fn solve(&self, mut x: Vec<Complex64>) -> Vec<Complex64> {
        let n = self.n;
        // L z = rhs
        for i in 0..n {
            let mut s = x[i];
            for k in self.lo(i)..i {
                s -= self.get(i, k) * x[k];
            }
            x[i] = s / self.get(i, i);
        }
        // L^H x = z
        let split = n - self.w;
        for i in (0..n).rev() {
            let mut s = x[i];
            let band_end = (i + self.w + 1).min(split).max(i + 1);
            for r in (i + 1..band_end).chain(split.max(i + 1)..n) {
                s -= self.get(r, i).conj() * x[r];
            }
            x[i] = s / self.get(i, i).conj();
        }
        x
    }
}

/// MMSE for a channel that is diagonal in the frequency domain, evaluated in
/// the waveform's multiplexing domain.
///
/// With `U = T_mux T_F^H` unitary and `H_mux = U diag(H) U^H`, the MMSE
/// solution is `U diag(conj(H) / (|H|^2 + noise_var)) U^H y`, identical to
/// [`equalize_mmse`] on the dense `H_mux` but `O(n log n)`.
pub fn equalize_mmse_spectral(
    y: &[Complex64],
    response: &[Complex64],
    noise_var: f64,
    cfg: &ValidatedConfig,
) -> Result<Vec<Complex64>> {
    if y.len() != cfg.grid_len() {
        return Err(Error::LengthMismatch {
            expected: cfg.grid_len(),
            got: y.len(),
        });
    }
    if response.len() != cfg.m() {
        return Err(Error::LengthMismatch {
            expected: cfg.m(),
            got: response.len(),
        });
    }
    let kernel = build_kernel(cfg);
    let freq_plan = domain_plan(Domain::Frequency, cfg);
    let f = freq_plan.analyze(&kernel.synthesize(y));
    let eq = equalize_one_tap(&f, response, noise_var);
    Ok(kernel.analyze(&freq_plan.synthesize(&eq)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EqMethod {
    OneTap,
    Mmse,
    MmseBanded,
    MmseSpectral,
}

impl std::fmt::Display for EqMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EqMethod::OneTap => "one-tap",
            EqMethod::Mmse => "mmse",
            EqMethod::MmseBanded => "mmse-banded",
            EqMethod::MmseSpectral => "mmse-spectral",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopReport {
    pub method: EqMethod,
    pub n: usize,
    pub b: Option<usize>,
    pub flops: f64,
    /// Full MMSE at the same `n`.
    pub reference_flops: f64,
    pub reduction_db: f64,
    pub model_version: u32,
}

/// Flop model, version [`FLOP_MODEL_VERSION`]:
///
/// | method        | flops                   |
/// |---------------|-------------------------|
/// | full MMSE     | `8 n^3`                 |
/// | banded MMSE   | `8 n max(b, 1)^2`       |
/// | one-tap       | `8 n`                   |
/// | spectral MMSE | `8 n + 10 n log2 n`     |
///
/// `8` counts real flops per complex multiply-add; the spectral entry adds
/// two radix-2 FFT passes (`5 n log2 n` each). Reduction is
/// `10 log10(8 n^3 / flops)`.
pub fn flop_report(method: EqMethod, n: usize, b: Option<usize>) -> FlopReport {
    let nf = n as f64;
    let flops = match method {
        EqMethod::Mmse => 8.0 * nf.powi(3),
        EqMethod::MmseBanded => 8.0 * nf * (b.unwrap_or(n).max(1) as f64).powi(2),
        EqMethod::OneTap => 8.0 * nf,
        EqMethod::MmseSpectral => 8.0 * nf + 10.0 * nf * nf.max(1.0).log2(),
    };
    let reference_flops = 8.0 * nf.powi(3);
    FlopReport {
        method,
        n,
        b: if method == EqMethod::MmseBanded { b } else { None },
        flops,
        reference_flops,
        reduction_db: 10.0 * (reference_flops / flops).log10(),
        model_version: FLOP_MODEL_VERSION,
    }
}

/// Smallest cyclic band that keeps all entries above `rel_threshold * max|H|`.
pub fn required_band(h: &CMatrix, rel_threshold: f64) -> usize {
    let n = h.ncols();
    let thr = rel_threshold * crate::linalg::max_abs(h);
    let mut b = 0;
    for i in 0..h.nrows() {
        for j in 0..n {
            if h[(i, j)].norm() > thr {
                b = b.max(cyclic_offset(i, j, n).unsigned_abs() as usize);
            }
        }
    }
    b
}
