//! Staged DFT kernel: pre-spread, permutation, block IDFT core, post diagonal.

use std::fmt;

use num_complex::Complex64;

use crate::dsp::{block_dft, chirp};
use crate::frame::{Domain, ValidatedConfig, Waveform};

/// One unitary stage of a kernel, acting on the whole frame vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stage {
    /// Unitary DFT (or IDFT) of length `len` over elements spaced `stride`
    /// apart, repeated over every `len * stride` super-block.
    Dft {
        len: usize,
        stride: usize,
        inverse: bool,
    },
    /// Reads the vector as `rows` chunks of `cols` and writes it transposed.
    RowColumn { rows: usize, cols: usize },
    /// Multiplies entry `p mod len` by `exp(-j 2 pi c p^2)` (conjugated if `conj`).
    Chirp { c: f64, len: usize, conj: bool },
}

impl Stage {
    pub fn dft(len: usize, inverse: bool) -> Stage {
        Stage::Dft {
            len,
            stride: 1,
            inverse,
        }
    }

    pub fn apply(&self, data: &mut Vec<Complex64>) {
        match *self {
            Stage::Dft {
                len,
                stride: 1,
                inverse,
            } => block_dft(data, len, inverse),
            Stage::Dft {
                len,
                stride,
                inverse,
            } => {
                let block = len * stride;
                assert_eq!(data.len() % block, 0);
                let mut buf = vec![Complex64::new(0.0, 0.0); len];
                for base in (0..data.len()).step_by(block) {
                    for off in 0..stride {
                        for j in 0..len {
                            buf[j] = data[base + off + stride * j];
                        }
                        block_dft(&mut buf, len, inverse);
                        for j in 0..len {
                            data[base + off + stride * j] = buf[j];
                        }
                    }
                }
            }
            Stage::RowColumn { rows, cols } => {
                assert_eq!(data.len(), rows * cols);
                let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
                for r in 0..rows {
                    for c in 0..cols {
                        out[r + rows * c] = data[c + cols * r];
                    }
                }
                *data = out;
            }
            Stage::Chirp { c, len, conj } => {
                if c == 0.0 {
                    return;
                }
                let table: Vec<Complex64> = (0..len)
                    .map(|p| if conj { chirp(c, p).conj() } else { chirp(c, p) })
                    .collect();
                for (i, v) in data.iter_mut().enumerate() {
                    *v *= table[i % len];
                }
            }
        }
    }

    pub fn adjoint(&self) -> Stage {
        match *self {
            Stage::Dft {
                len,
                stride,
                inverse,
            } => Stage::Dft {
                len,
                stride,
                inverse: !inverse,
            },
            Stage::RowColumn { rows, cols } => Stage::RowColumn {
                rows: cols,
                cols: rows,
            },
            Stage::Chirp { c, len, conj } => Stage::Chirp {
                c,
                len,
                conj: !conj,
            },
        }
    }

    fn is_identity(&self) -> bool {
        match *self {
            Stage::Dft { len, .. } => len == 1,
            Stage::Chirp { c, .. } => c == 0.0,
            Stage::RowColumn { rows, cols } => rows == 1 || cols == 1,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Stage::Dft {
                len,
                stride,
                inverse,
            } => {
                write!(f, "{}{len}", if inverse { "IDFT" } else { "DFT" })?;
                if stride > 1 {
                    write!(f, "/stride{stride}")?;
                }
                Ok(())
            }
            Stage::RowColumn { rows, cols } => write!(f, "P[{rows}x{cols}]"),
            Stage::Chirp { c, conj, .. } => {
                write!(f, "diag(exp({}j2pi*{c:e}*n^2))", if conj { "+" } else { "-" })
            }
        }
    }
}

/// Synthesis kernel mapping domain symbols to the prefix-free time payload.
///
/// Stages run in the order `pre_spread`, `permutation`, `core`, `post`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPlan {
    pub pre_spread: Vec<Stage>,
    pub permutation: Option<Stage>,
    pub core: Stage,
    pub post: Vec<Stage>,
    len: usize,
}

impl KernelPlan {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn stages(&self) -> impl Iterator<Item = &Stage> {
        self.pre_spread
            .iter()
            .chain(self.permutation.iter())
            .chain(std::iter::once(&self.core))
            .chain(self.post.iter())
    }

    /// Domain symbols to time payload.
    pub fn synthesize(&self, data: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(data.len(), self.len, "kernel length mismatch");
        let mut v = data.to_vec();
        for s in self.stages() {
            s.apply(&mut v);
        }
        v
    }

    /// Time payload to domain symbols (adjoint of [`Self::synthesize`]).
    pub fn analyze(&self, data: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(data.len(), self.len, "kernel length mismatch");
        let stages: Vec<Stage> = self.stages().copied().collect();
        let mut v = data.to_vec();
        for s in stages.iter().rev() {
            s.adjoint().apply(&mut v);
        }
        v
    }

    /// Dense synthesis matrix in row-major order; column `j` is the response
    /// to unit vector `j`.
    pub fn matrix(&self) -> Vec<Vec<Complex64>> {
        let n = self.len;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            cols.push(self.synthesize(&e));
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }
}

impl fmt::Display for KernelPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[Stage]| -> String {
            let s: Vec<String> = v
                .iter()
                .filter(|s| !s.is_identity())
                .map(|s| s.to_string())
                .collect();
            if s.is_empty() {
                "I".into()
            } else {
                s.join(" -> ")
            }
        };
        writeln!(f, "pre:  {}", list(&self.pre_spread))?;
        writeln!(
            f,
            "perm: {}",
            self.permutation.map_or("none".to_string(), |p| p.to_string())
        )?;
        writeln!(f, "core: {}", self.core)?;
        write!(f, "post: {}", list(&self.post))
    }
}

fn chirp_plan(m: usize, len: usize, c1: f64, c2: f64) -> KernelPlan {
    // x = A^H s with A = L(c2) F L(c1), so A^H = L(c1)^H F^H L(c2)^H.
    KernelPlan {
        pre_spread: vec![Stage::Chirp {
            c: c2,
            len: m,
            conj: true,
        }],
        permutation: None,
        core: Stage::dft(m, true),
        post: vec![Stage::Chirp {
            c: c1,
            len: m,
            conj: true,
        }],
        len,
    }
}

/// Synthesis plan of a domain, i.e. `T_d^H` taking domain symbols to time.
pub fn domain_plan(d: Domain, cfg: &ValidatedConfig) -> KernelPlan {
    let (m, n) = (cfg.m(), cfg.n());
    let len = m * n;
    match d {
        Domain::Time => KernelPlan {
            pre_spread: vec![],
            permutation: None,
            core: Stage::dft(1, true),
            post: vec![],
            len,
        },
        Domain::Frequency => KernelPlan {
            pre_spread: vec![],
            permutation: None,
            core: Stage::dft(m, true),
            post: vec![],
            len,
        },
        // DD layout is k + N*l. ISFFT = N-point IDFT along Doppler, M-point DFT
        // along delay; the interleaver then makes the grid symbol-major for the
        // Heisenberg (block IDFT) core.
        Domain::DelayDoppler => KernelPlan {
            pre_spread: vec![
                Stage::dft(n, true),
                Stage::Dft {
                    len: m,
                    stride: n,
                    inverse: false,
                },
            ],
            permutation: Some(Stage::RowColumn { rows: m, cols: n }),
            core: Stage::dft(m, true),
            post: vec![],
            len,
        },
        Domain::Affine => chirp_plan(m, len, cfg.c1(), cfg.c2()),
        Domain::Fresnel => {
            let s = cfg.fresnel_slope();
            chirp_plan(m, len, s, s)
        }
    }
}

/// Unified generation kernel of the configured waveform.
pub fn build_kernel(cfg: &ValidatedConfig) -> KernelPlan {
    match cfg.waveform() {
        Waveform::Ofdm => domain_plan(Domain::Frequency, cfg),
        Waveform::DftSOfdm => {
            let mut p = domain_plan(Domain::Frequency, cfg);
            p.pre_spread = vec![Stage::dft(cfg.subband(), false)];
            p
        }
        Waveform::Otfs => domain_plan(Domain::DelayDoppler, cfg),
        Waveform::Afdm => domain_plan(Domain::Affine, cfg),
        Waveform::Ocdm => domain_plan(Domain::Fresnel, cfg),
    }
}
