//! Strided convolutional dictionary.
//!
//! Atom `(i, j)` is filter `i` placed at sample offset `j·r`. With `M` shifts
//! per channel the flat coefficient index is `i·M + j` (channel-major), so a
//! channel's coefficients are contiguous.
//!
//! The dense matrix is never formed. Analysis and synthesis are direct
//! strided correlations and overlap-adds; `DᵀD` is kept as a [`GramTable`]
//! of channel-pair cross-correlations at stride-multiple lags, which does not
//! depend on the signal length.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filterbank::FilterSet;

/// Sparse coefficient vector as `(flat index, value)` pairs.
pub type SparseCode = [(usize, f64)];

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Smallest length `≥ max(len, filter_len)` with `(T − F_l)` a multiple of `stride`.
pub fn padded_len(len: usize, filter_len: usize, stride: usize) -> usize {
    if len <= filter_len {
        return filter_len;
    }
    let excess = len - filter_len;
    filter_len + excess.div_ceil(stride) * stride
}

#[derive(Debug, Clone)]
pub struct StridedDictionary {
    filters: Arc<FilterSet>,
    stride: usize,
    signal_len: usize,
    shifts: usize,
}

impl StridedDictionary {
    pub fn new(filters: impl Into<Arc<FilterSet>>, stride: usize, signal_len: usize) -> Result<Self> {
        let filters = filters.into();
        let filter_len = filters.filter_len();
        if stride == 0 {
            return Err(Error::InvalidConfig("stride must be at least 1".into()));
        }
        if signal_len < filter_len {
            return Err(Error::SignalTooShort {
                len: signal_len,
                filter_len,
            });
        }
        let shifts = (signal_len - filter_len) / stride + 1;
        Ok(Self {
            filters,
            stride,
            signal_len,
            shifts,
        })
    }

    pub fn filters(&self) -> &FilterSet {
        &self.filters
    }

    pub fn shared_filters(&self) -> Arc<FilterSet> {
        Arc::clone(&self.filters)
    }

    pub fn num_channels(&self) -> usize {
        self.filters.num_channels()
    }

    pub fn filter_len(&self) -> usize {
        self.filters.filter_len()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn shifts_per_channel(&self) -> usize {
        self.shifts
    }

    pub fn num_atoms(&self) -> usize {
        self.num_channels() * self.shifts
    }

    #[inline]
    pub fn flat_index(&self, channel: usize, shift: usize) -> usize {
        channel * self.shifts + shift
    }

    #[inline]
    pub fn split_index(&self, index: usize) -> (usize, usize) {
        (index / self.shifts, index % self.shifts)
    }

    fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected != actual {
            return Err(Error::LengthMismatch { expected, actual });
        }
        Ok(())
    }

    /// Projection `Dᵀ s`.
    pub fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.signal_len, signal.len())?;
        let mut out = vec![0.0; self.num_atoms()];
        self.correlate_into(signal, &mut out);
        Ok(out)
    }

    pub(crate) fn correlate_into(&self, signal: &[f64], out: &mut [f64]) {
        let (fl, r) = (self.filter_len(), self.stride);
        out.par_chunks_mut(self.shifts)
            .zip(self.filters.rows().collect::<Vec<_>>())
            .for_each(|(row_out, filter)| {
                for (j, o) in row_out.iter_mut().enumerate() {
                    *o = dot(filter, &signal[j * r..j * r + fl]);
                }
            });
    }

    /// Reconstruction `D a` from a dense coefficient vector.
    pub fn synthesize_signal(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        Self::check_len(self.num_atoms(), coeffs.len())?;
        let (fl, r) = (self.filter_len(), self.stride);
        let mut out = vec![0.0; self.signal_len];
        for (filter, row) in self.filters.rows().zip(coeffs.chunks_exact(self.shifts)) {
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    axpy(a, filter, &mut out[j * r..j * r + fl]);
                }
            }
        }
        Ok(out)
    }

    /// Reconstruction from a sparse code. Indices must be in range.
    pub fn synthesize_sparse(&self, active: &SparseCode) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.signal_len];
        self.synthesize_sparse_into(active, &mut out)?;
        Ok(out)
    }

    pub(crate) fn synthesize_sparse_into(&self, active: &SparseCode, out: &mut [f64]) -> Result<()> {
        let (fl, r) = (self.filter_len(), self.stride);
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(m, a) in active {
            self.check_index(m)?;
            let (i, j) = self.split_index(m);
            axpy(a, self.filters.filter(i), &mut out[j * r..j * r + fl]);
        }
        Ok(())
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.num_atoms() {
            return Err(Error::IndexOutOfRange {
                index,
                num_atoms: self.num_atoms(),
            });
        }
        Ok(())
    }

    pub fn gram(&self) -> GramTable {
        GramTable::new(&self.filters, self.stride)
    }

    /// Lateral inhibition `(DᵀD − I) a` for a sparse `a`.
    ///
    /// Work is proportional to `|active| · k · (2·lag_radius + 1)`.
    pub fn inhibit(&self, gram: &GramTable, active: &SparseCode) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_atoms()];
        self.inhibit_into(gram, active, &mut out)?;
        Ok(out)
    }

    pub(crate) fn inhibit_into(
        &self,
        gram: &GramTable,
        active: &SparseCode,
        out: &mut [f64],
    ) -> Result<()> {
        self.check_gram(gram)?;
        Self::check_len(self.num_atoms(), out.len())?;
        for &(m, _) in active {
            self.check_index(m)?;
        }
        let shifts = self.shifts as isize;
        let radius = gram.lag_radius as isize;
        out.par_chunks_mut(self.shifts)
            .enumerate()
            .for_each(|(i, row_out)| {
                row_out.iter_mut().for_each(|v| *v = 0.0);
                for &(m, a) in active {
                    let (j, s) = (m / self.shifts, (m % self.shifts) as isize);
                    let lags = gram.lags(i, j);
                    // target shift s1 = s + d for d in [-radius, radius]
                    let d_lo = (-radius).max(-s);
                    let d_hi = radius.min(shifts - 1 - s);
                    if d_lo > d_hi {
                        continue;
                    }
                    let src = &lags[(d_lo + radius) as usize..=(d_hi + radius) as usize];
                    let dst = &mut row_out[(s + d_lo) as usize..=(s + d_hi) as usize];
                    axpy(a, src, dst);
                    if i == j {
                        row_out[s as usize] -= a;
                    }
                }
            });
        Ok(())
    }

    /// One entry of `(DᵀD − I) x` for a dense `x`.
    pub(crate) fn inhibit_at(&self, gram: &GramTable, x: &[f64], index: usize) -> f64 {
        let (i, s1) = self.split_index(index);
        let (shifts, radius) = (self.shifts as isize, gram.lag_radius as isize);
        let s1 = s1 as isize;
        let mut acc = 0.0;
        for j in 0..self.num_channels() {
            let lags = gram.lags(i, j);
            // source shift s2 = s1 - d
            let d_lo = (-radius).max(s1 - (shifts - 1));
            let d_hi = radius.min(s1);
            if d_lo > d_hi {
                continue;
            }
            let row = &x[j * self.shifts..(j + 1) * self.shifts];
            for d in d_lo..=d_hi {
                acc += lags[(d + radius) as usize] * row[(s1 - d) as usize];
            }
        }
        acc - x[index]
    }

    fn check_gram(&self, gram: &GramTable) -> Result<()> {
        if gram.num_channels != self.num_channels() || gram.stride != self.stride {
            return Err(Error::InvalidConfig(
                "Gram table was built for a different dictionary".into(),
            ));
        }
        Ok(())
    }
}

/// Channel-pair cross-correlations of unit-norm filters at stride-multiple lags.
///
/// `lag(i, j, d) = Σ_n h_i[n] · h_j[n + d·r]`, which is the inner product of
/// atom `(i, s + d)` with atom `(j, s)` for any shift `s`.
#[derive(Debug, Clone)]
pub struct GramTable {
    cross_corr: Vec<f64>,
    num_channels: usize,
    stride: usize,
    lag_radius: usize,
}

impl GramTable {
    pub fn new(filters: &FilterSet, stride: usize) -> Self {
        let k = filters.num_channels();
        let fl = filters.filter_len();
        let lag_radius = fl.div_ceil(stride) - 1;
        let width = 2 * lag_radius + 1;
        let mut cross_corr = vec![0.0; k * k * width];
        cross_corr
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(pair, out)| {
                let (hi, hj) = (filters.filter(pair / k), filters.filter(pair % k));
                for (slot, o) in out.iter_mut().enumerate() {
                    let offset = (slot as isize - lag_radius as isize) * stride as isize;
                    *o = if offset >= 0 {
                        let off = offset as usize;
                        dot(&hi[..fl - off], &hj[off..])
                    } else {
                        let off = (-offset) as usize;
                        dot(&hi[off..], &hj[..fl - off])
                    };
                }
            });
        Self {
            cross_corr,
            num_channels: k,
            stride,
            lag_radius,
        }
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn lag_radius(&self) -> usize {
        self.lag_radius
    }

    /// All lags `-radius..=radius` for the pair `(i, j)`.
    #[inline]
    pub fn lags(&self, i: usize, j: usize) -> &[f64] {
        let width = 2 * self.lag_radius + 1;
        let start = (i * self.num_channels + j) * width;
        &self.cross_corr[start..start + width]
    }

    /// Correlation at lag `d`; zero beyond the radius.
    pub fn lag(&self, i: usize, j: usize, d: isize) -> f64 {
        if d.unsigned_abs() > self.lag_radius {
            return 0.0;
        }
        self.lags(i, j)[(d + self.lag_radius as isize) as usize]
    }
}
