//! FFT-backed convolution primitives used by the simulators and receivers.

use num_traits::Zero;
use rustfft::FftPlanner;

use crate::scalar::{lit, Cx, Real};

/// DFT of `x` zero-padded (or truncated) to `len` points.
pub fn dft_padded<T: Real>(x: &[Cx<T>], len: usize) -> Vec<Cx<T>> {
    let mut buf = vec![Cx::zero(); len];
    for (b, v) in buf.iter_mut().zip(x) {
        *b = *v;
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf
}

/// Inverse DFT with the `1/len` normalization, so `idft(dft_padded(x, n)) == x`.
pub fn idft<T: Real>(x: &[Cx<T>]) -> Vec<Cx<T>> {
    let len = x.len();
    let mut buf = x.to_vec();
    if len == 0 {
        return buf;
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let scale = lit::<T>(1.0) / lit::<T>(len as f64);
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Circular convolution of two sequences over `len` points.
///
/// Both inputs are zero-padded to `len`; inputs longer than `len` are an
/// error of the caller and panic.
pub fn circular_convolve<T: Real>(a: &[Cx<T>], b: &[Cx<T>], len: usize) -> Vec<Cx<T>> {
    assert!(a.len() <= len && b.len() <= len, "operand longer than circular length");
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut fa = vec![Cx::zero(); len];
    let mut fb = vec![Cx::zero(); len];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let scale = lit::<T>(1.0) / lit::<T>(len as f64);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * *y * scale;
    }
    inv.process(&mut fa);
    fa
}

/// Linear convolution, output length `a.len() + b.len() - 1`.
pub fn linear_convolve<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> Vec<Cx<T>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    // Short kernels are cheaper (and exact to rounding) done directly.
    if a.len().min(b.len()) <= 16 {
        return direct_convolve(a, b);
    }
    let n = out_len.next_power_of_two();
    let mut y = circular_convolve(a, b, n);
    y.truncate(out_len);
    y
}

/// O(len(a)·len(b)) reference convolution.
pub fn direct_convolve<T: Real>(a: &[Cx<T>], b: &[Cx<T>]) -> Vec<Cx<T>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut y = vec![Cx::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &h) in b.iter().enumerate() {
            y[i + j] += x * h;
        }
    }
    y
}

/// Reusable planner for repeated same-length circular convolutions against
/// a fixed set of kernels (one per alphabet symbol).
pub struct CircularConvolver<T: Real> {
    len: usize,
    kernels: Vec<Vec<Cx<T>>>,
    fwd: std::sync::Arc<dyn rustfft::Fft<T>>,
    inv: std::sync::Arc<dyn rustfft::Fft<T>>,
}

impl<T: Real> CircularConvolver<T> {
    pub fn new(kernels: &[Vec<Cx<T>>], len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let scale = lit::<T>(1.0) / lit::<T>(len as f64);
        let kernels = kernels
            .iter()
            .map(|k| {
                assert!(k.len() <= len, "kernel longer than circular length");
                let mut buf = vec![Cx::zero(); len];
                buf[..k.len()].copy_from_slice(k);
                fwd.process(&mut buf);
                buf.iter_mut().for_each(|v| *v *= scale);
                buf
            })
            .collect();
        Self { len, kernels, fwd, inv }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Circularly convolves `x` (zero-padded to the planner length) with kernel `k`.
    pub fn apply(&self, x: &[Cx<T>], k: usize) -> Vec<Cx<T>> {
        assert!(x.len() <= self.len, "input longer than circular length");
        let mut buf = vec![Cx::zero(); self.len];
        buf[..x.len()].copy_from_slice(x);
        self.fwd.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&self.kernels[k]) {
            *b *= *h;
        }
        self.inv.process(&mut buf);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    #[test]
    fn fft_and_direct_convolution_agree() {
        let a: Vec<Cx<f64>> = (0..40).map(|i| cx((i as f64 * 0.3).sin(), (i as f64).cos())).collect();
        let b: Vec<Cx<f64>> = (0..25).map(|i| cx(1.0 / (1.0 + i as f64), -0.5)).collect();
        let fast = linear_convolve(&a, &b);
        let slow = direct_convolve(&a, &b);
        assert_eq!(fast.len(), 64);
        for (x, y) in fast.iter().zip(&slow) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn circular_wraps_tail() {
        let a = vec![cx::<f64>(1.0, 0.0), cx(2.0, 0.0)];
        let b = vec![cx::<f64>(0.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0)];
        // delay by two on a length-3 ring: [1,2,0] -> [2,0,1]
        let y = circular_convolve(&a, &b, 3);
        let want = [2.0, 0.0, 1.0];
        for (v, w) in y.iter().zip(want) {
            assert!((v.re - w).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }
}
