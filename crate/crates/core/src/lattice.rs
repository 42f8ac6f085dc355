//! Discrete convolution on regular grids via zero-padded FFTs.

use num::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

fn fft_nd(data: &mut [Complex<f64>], shape: &[usize], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let st = strides(shape);
    let total: usize = shape.iter().product();
    for (k, &n) in shape.iter().enumerate() {
        let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        let stride = st[k];
        let lines = total / n;
        // line starts: all indices with coordinate k equal to 0
        let starts: Vec<usize> = (0..total).filter(|i| (i / stride) % n == 0).collect();
        debug_assert_eq!(starts.len(), lines);
        if stride == 1 {
            data.par_chunks_mut(n).for_each(|line| fft.process(line));
        } else {
            let mut buf = vec![Complex::new(0.0, 0.0); n];
            for &s in &starts {
                for j in 0..n {
                    buf[j] = data[s + j * stride];
                }
                fft.process(&mut buf);
                for j in 0..n {
                    data[s + j * stride] = buf[j];
                }
            }
        }
    }
}

/// Zero-padded spectral form of a grid of cell values, reusable against
/// several kernels.
pub(crate) struct PaddedSpectrum {
    ext: Vec<usize>,
    pad: Vec<usize>,
    spec: Vec<Complex<f64>>,
}

impl PaddedSpectrum {
    pub fn new(values: &[f64], ext: &[usize]) -> Self {
        let pad: Vec<usize> = ext.iter().map(|&n| 2 * n).collect();
        let total: usize = pad.iter().product();
        let mut spec = vec![Complex::new(0.0, 0.0); total];
        let pst = strides(&pad);
        let est = strides(ext);
        for (lin, &v) in values.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let mut p = 0;
            for k in 0..ext.len() {
                p += ((lin / est[k]) % ext[k]) * pst[k];
            }
            spec[p] = Complex::new(v, 0.0);
        }
        fft_nd(&mut spec, &pad, false);
        PaddedSpectrum { ext: ext.to_vec(), pad, spec }
    }

    /// out[i] = sum_j values[j] kern(i - j), kern taking integer offsets.
    pub fn convolve<F: Fn(&[i64]) -> f64 + Sync>(&self, kern: F) -> Vec<f64> {
        let d = self.ext.len();
        let pst = strides(&self.pad);
        let total: usize = self.pad.iter().product();
        let mut k: Vec<Complex<f64>> = (0..total)
            .into_par_iter()
            .map(|p| {
                let mut off = [0i64; 3];
                for a in 0..d {
                    let q = (p / pst[a]) % self.pad[a];
                    let n = self.ext[a];
                    off[a] = if q < n {
                        q as i64
                    } else if q > n {
                        q as i64 - 2 * n as i64
                    } else {
                        return Complex::new(0.0, 0.0);
                    };
                }
                Complex::new(kern(&off[..d]), 0.0)
            })
            .collect();
        fft_nd(&mut k, &self.pad, false);
        k.par_iter_mut().zip(self.spec.par_iter()).for_each(|(a, b)| *a *= b);
        fft_nd(&mut k, &self.pad, true);
        let scale = 1.0 / total as f64;
        let est = strides(&self.ext);
        let n: usize = self.ext.iter().product();
        (0..n)
            .map(|lin| {
                let mut p = 0;
                for a in 0..d {
                    p += ((lin / est[a]) % self.ext[a]) * pst[a];
                }
                k[p].re * scale
            })
            .collect()
    }
}

/// Direct O(n^2) reference for small grids.
pub(crate) fn convolve_direct<F: Fn(&[i64]) -> f64 + Sync>(
    values: &[f64],
    ext: &[usize],
    kern: F,
) -> Vec<f64> {
    let d = ext.len();
    let est = strides(ext);
    let idx = |lin: usize| -> [i64; 3] {
        let mut o = [0i64; 3];
        for a in 0..d {
            o[a] = ((lin / est[a]) % ext[a]) as i64;
        }
        o
    };
    let nz: Vec<(usize, f64)> = values.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
    (0..values.len())
        .into_par_iter()
        .map(|i| {
            let ii = idx(i);
            let mut s = 0.0;
            for &(j, v) in &nz {
                let jj = idx(j);
                let mut off = [0i64; 3];
                for a in 0..d {
                    off[a] = ii[a] - jj[a];
                }
                s += v * kern(&off[..d]);
            }
            s
        })
        .collect()
}
