//! Convolution matrices and the stacked objective/constraint systems.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::export::{atomic_write, csv_rows_bytes, fmt_f64, write_json};
use crate::linalg::CMatrix;
use crate::scalar::{to_f64, Cx, Real};
use crate::waveform::WaveformAlphabet;

/// Tall Toeplitz matrix `(L + L_f - 1) x L_f` with `entry(r, c) = x[r - c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConvMatrix<T: Real> {
    pub entries: CMatrix<T>,
    pub source: usize,
    pub l: usize,
    pub l_f: usize,
}

/// Square circulant of order `L + L_f - 1` whose first column is the
/// zero-padded waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct CircularConvMatrix<T: Real> {
    pub entries: CMatrix<T>,
    pub source: usize,
    pub l: usize,
    pub l_f: usize,
}

pub fn build_linear_conv<T: Real>(wf: &[Cx<T>], l_f: usize) -> Result<LinearConvMatrix<T>> {
    if l_f == 0 {
        return invalid("L_f must be at least 1");
    }
    if wf.is_empty() {
        return invalid("waveform is empty");
    }
    let l = wf.len();
    let entries = DMatrix::from_fn(l + l_f - 1, l_f, |r, c| {
        if r >= c && r - c < l {
            wf[r - c]
        } else {
            Cx::zero()
        }
    });
    Ok(LinearConvMatrix { entries, source: 0, l, l_f })
}

pub fn build_circular_conv<T: Real>(wf: &[Cx<T>], l_f: usize) -> Result<CircularConvMatrix<T>> {
    if l_f == 0 {
        return invalid("L_f must be at least 1");
    }
    if wf.is_empty() {
        return invalid("waveform is empty");
    }
    let l = wf.len();
    let n = l + l_f - 1;
    let entries = DMatrix::from_fn(n, n, |r, c| {
        let d = (r + n - c) % n;
        if d < l {
            wf[d]
        } else {
            Cx::zero()
        }
    });
    Ok(CircularConvMatrix { entries, source: 0, l, l_f })
}

impl<T: Real> LinearConvMatrix<T> {
    pub fn with_source(mut self, source: usize) -> Self {
        self.source = source;
        self
    }
}

impl<T: Real> CircularConvMatrix<T> {
    pub fn with_source(mut self, source: usize) -> Self {
        self.source = source;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Linear,
    Circular,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flavor::Linear => "linear",
            Flavor::Circular => "circular",
        })
    }
}

/// Outcome of the dimension check for the linear constrained design.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Feasibility {
    Feasible {
        /// `(K-1)(L+L_f-1) == K L_f`: constraints use up every degree of freedom.
        lower_tight: bool,
    },
    Violated {
        bound: String,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible { .. })
    }
}

/// Checks `(K-1)(L+L_f-1) <= K L_f <= K(L+L_f-1)`; the lower bound is
/// skipped for `K = 1`.
pub fn check_feasibility(k: usize, l: usize, l_f: usize) -> Feasibility {
    if k == 0 || l == 0 || l_f == 0 {
        return Feasibility::Violated {
            bound: format!("K, L, L_f must be positive (got K={k}, L={l}, L_f={l_f})"),
        };
    }
    let n = l + l_f - 1;
    let (rows, cols) = ((k - 1) * n, k * l_f);
    if k > 1 && rows > cols {
        return Feasibility::Violated {
            bound: format!(
                "(K-1)(L+L_f-1) > K*L_f: {}*{} = {rows} > {k}*{l_f} = {cols} (need L_f >= {})",
                k - 1,
                n,
                (k - 1) * (l - 1)
            ),
        };
    }
    if cols > k * n {
        return Feasibility::Violated {
            bound: format!("K*L_f > K(L+L_f-1): {cols} > {}", k * n),
        };
    }
    Feasibility::Feasible {
        lower_tight: k > 1 && rows == cols,
    }
}

/// Smallest admissible `L_f` for `K` waveforms of length `L`.
pub fn min_filter_len(k: usize, l: usize) -> usize {
    ((k.saturating_sub(1)) * (l.saturating_sub(1))).max(1)
}

/// Filter length used when none is configured: `K (L - 1)`.
pub fn default_filter_len(k: usize, l: usize) -> usize {
    (k * l.saturating_sub(1)).max(1)
}

/// Centre of the output support, `floor((L + L_f - 1) / 2)`.
pub fn default_peak_index(l: usize, l_f: usize) -> usize {
    (l + l_f - 1) / 2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub k: usize,
    pub l: usize,
    pub l_f: usize,
}

impl Dims {
    /// Output length per waveform, `L + L_f - 1`.
    pub fn n(&self) -> usize {
        self.l + self.l_f - 1
    }

    /// Filter length per waveform for a flavor.
    pub fn taps(&self, flavor: Flavor) -> usize {
        match flavor {
            Flavor::Linear => self.l_f,
            Flavor::Circular => self.n(),
        }
    }
}

/// Block objective `X`, constraint `X~` and target `e` for one alphabet.
///
/// Only the `K` convolution blocks are stored; [`BlockSystem::x`] and
/// [`BlockSystem::xtil`] assemble the dense matrices on request.
#[derive(Clone, Debug)]
pub struct BlockSystem<T: Real> {
    pub blocks: Vec<CMatrix<T>>,
    pub flavor: Flavor,
    pub dims: Dims,
    pub peak_index: usize,
}

impl<T: Real> BlockSystem<T> {
    pub fn k(&self) -> usize {
        self.dims.k
    }

    /// Rows per block, `L + L_f - 1`.
    pub fn n(&self) -> usize {
        self.dims.n()
    }

    /// Columns per block.
    pub fn taps(&self) -> usize {
        self.dims.taps(self.flavor)
    }

    /// Unit impulse at `peak_index`, one block of `e`.
    pub fn e_block(&self) -> Vec<Cx<T>> {
        let mut e = vec![Cx::zero(); self.n()];
        e[self.peak_index] = Cx::new(T::one(), T::zero());
        e
    }

    pub fn e(&self) -> Vec<Cx<T>> {
        let b = self.e_block();
        (0..self.k()).flat_map(|_| b.iter().copied()).collect()
    }

    pub fn x(&self) -> CMatrix<T> {
        let (n, c, k) = (self.n(), self.taps(), self.k());
        let mut x = CMatrix::zeros(k * n, k * c);
        for (i, b) in self.blocks.iter().enumerate() {
            x.view_mut((i * n, i * c), (n, c)).copy_from(b);
        }
        x
    }

    pub fn xtil(&self) -> CMatrix<T> {
        let (n, c, k) = (self.n(), self.taps(), self.k());
        let mut x = CMatrix::zeros(k.saturating_sub(1) * n, k * c);
        for i in 0..k.saturating_sub(1) {
            x.view_mut((i * n, i * c), (n, c)).copy_from(&self.blocks[i]);
            x.view_mut((i * n, (i + 1) * c), (n, c)).copy_from(&(-&self.blocks[i + 1]));
        }
        x
    }

    /// Per-waveform outputs `Psi_k h_k` for a stacked filter vector.
    pub fn outputs(&self, h: &[Cx<T>]) -> Vec<Vec<Cx<T>>> {
        let c = self.taps();
        assert_eq!(h.len(), self.k() * c, "stacked filter length");
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let hk = crate::linalg::cvector(&h[i * c..(i + 1) * c]);
                (b * hk).as_slice().to_vec()
            })
            .collect()
    }

    /// `X~ h`, stacked.
    pub fn apply_xtil(&self, h: &[Cx<T>]) -> Vec<Cx<T>> {
        let y = self.outputs(h);
        y.windows(2)
            .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| *a - *b).collect::<Vec<_>>())
            .collect()
    }

    /// Writes `X`, `X~` and `e` as sparse `row,col,real,imag` CSV files plus
    /// a JSON sidecar into `dir`.
    pub fn dump(&self, dir: &Path, waveform_ids: &[u64]) -> Result<()> {
        let header: Vec<String> = ["row", "col", "real", "imag"].iter().map(|s| s.to_string()).collect();
        let sparse = |m: &CMatrix<T>| {
            let mut rows = Vec::new();
            for c in 0..m.ncols() {
                for r in 0..m.nrows() {
                    let z = m[(r, c)];
                    if !z.is_zero() {
                        rows.push(vec![r.to_string(), c.to_string(), fmt_f64(to_f64(z.re)), fmt_f64(to_f64(z.im))]);
                    }
                }
            }
            rows
        };
        atomic_write(&dir.join("X.csv"), &csv_rows_bytes(&header, sparse(&self.x()))?)?;
        atomic_write(&dir.join("Xtil.csv"), &csv_rows_bytes(&header, sparse(&self.xtil()))?)?;
        atomic_write(&dir.join("e.csv"), &crate::export::complex_csv_bytes(&self.e())?)?;
        #[derive(Serialize)]
        struct Sidecar<'a> {
            dims: Dims,
            flavor: Flavor,
            peak_index: usize,
            x_shape: (usize, usize),
            xtil_shape: (usize, usize),
            waveform_ids: &'a [u64],
        }
        let (n, c, k) = (self.n(), self.taps(), self.k());
        write_json(
            &dir.join("system.json"),
            &Sidecar {
                dims: self.dims,
                flavor: self.flavor,
                peak_index: self.peak_index,
                x_shape: (k * n, k * c),
                xtil_shape: (k.saturating_sub(1) * n, k * c),
                waveform_ids,
            },
        )
    }
}

/// Stacks the per-waveform convolution blocks.
///
/// The linear flavor is rejected with [`Error::Dimension`] when the
/// feasibility bound fails. `peak_index` must address a sample of the
/// `L + L_f - 1` output.
pub fn assemble_block_system<T: Real>(
    alphabet: &WaveformAlphabet<T>,
    l_f: usize,
    peak_index: usize,
    flavor: Flavor,
) -> Result<BlockSystem<T>> {
    let dims = Dims {
        k: alphabet.len(),
        l: alphabet.pulse_len(),
        l_f,
    };
    if l_f == 0 {
        return invalid("L_f must be at least 1");
    }
    if flavor == Flavor::Linear {
        if let Feasibility::Violated { bound } = check_feasibility(dims.k, dims.l, l_f) {
            return Err(Error::Dimension { bound });
        }
    }
    if peak_index >= dims.n() {
        return invalid(format!("peak_index {peak_index} outside output length {}", dims.n()));
    }
    let blocks = (0..dims.k)
        .map(|i| {
            let s = alphabet.samples(i);
            Ok(match flavor {
                Flavor::Linear => build_linear_conv(s, l_f)?.entries,
                Flavor::Circular => build_circular_conv(s, l_f)?.entries,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockSystem {
        blocks,
        flavor,
        dims,
        peak_index,
    })
}

/// Block system built from raw sample vectors, bypassing alphabet checks.
/// Intended for small hand-made instances.
pub fn block_system_from_samples<T: Real>(
    waveforms: &[Vec<Cx<T>>],
    l_f: usize,
    peak_index: usize,
    flavor: Flavor,
) -> Result<BlockSystem<T>> {
    let l = waveforms.first().map(Vec::len).unwrap_or(0);
    if waveforms.is_empty() || l == 0 || waveforms.iter().any(|w| w.len() != l) {
        return invalid("waveforms must be non-empty and share one length");
    }
    if l_f == 0 {
        return invalid("L_f must be at least 1");
    }
    let dims = Dims { k: waveforms.len(), l, l_f };
    if flavor == Flavor::Linear {
        if let Feasibility::Violated { bound } = check_feasibility(dims.k, l, l_f) {
            return Err(Error::Dimension { bound });
        }
    }
    if peak_index >= dims.n() {
        return invalid(format!("peak_index {peak_index} outside output length {}", dims.n()));
    }
    let blocks = waveforms
        .iter()
        .map(|w| {
            Ok(match flavor {
                Flavor::Linear => build_linear_conv(w, l_f)?.entries,
                Flavor::Circular => build_circular_conv(w, l_f)?.entries,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockSystem {
        blocks,
        flavor,
        dims,
        peak_index,
    })
}
