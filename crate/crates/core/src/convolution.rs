//! Discrete convolution with translation-invariant kernels on a uniform grid
//! via zero-padded 3-D FFTs.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::green::C64;

/// Circulant embedding of a block-Toeplitz grid convolution.
pub struct ToeplitzConvolver {
    dims: [usize; 3],
    padded: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for ToeplitzConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzConvolver")
            .field("dims", &self.dims)
            .field("padded", &self.padded)
            .finish()
    }
}

impl ToeplitzConvolver {
    pub fn new(dims: [usize; 3]) -> Self {
        let padded = dims.map(|d| 2 * d);
        let mut planner = FftPlanner::new();
        Self {
            dims,
            padded,
            forward: padded.map(|p| planner.plan_fft_forward(p)),
            inverse: padded.map(|p| planner.plan_fft_inverse(p)),
        }
    }

    pub fn padded_len(&self) -> usize {
        self.padded.iter().product()
    }

    /// Spectra of an `m`-component kernel; `eval(offset, out)` receives the
    /// integer cell offset `target − source`.
    pub fn kernel_spectra(&self, m: usize, eval: impl Fn([i64; 3], &mut [C64])) -> Vec<Vec<C64>> {
        let len = self.padded_len();
        let mut tables = vec![vec![C64::new(0.0, 0.0); len]; m];
        let mut buf = vec![C64::new(0.0, 0.0); m];
        let [px, py, pz] = self.padded;
        let wrap = |i: usize, n: usize, p: usize| -> Option<i64> {
            if i < n {
                Some(i as i64)
            } else if i > p - n {
                Some(i as i64 - p as i64)
            } else {
                None
            }
        };
        for iz in 0..pz {
            let Some(oz) = wrap(iz, self.dims[2], pz) else { continue };
            for iy in 0..py {
                let Some(oy) = wrap(iy, self.dims[1], py) else { continue };
                for ix in 0..px {
                    let Some(ox) = wrap(ix, self.dims[0], px) else { continue };
                    eval([ox, oy, oz], &mut buf);
                    let idx = ix + px * (iy + py * iz);
                    for (t, v) in tables.iter_mut().zip(&buf) {
                        t[idx] = *v;
                    }
                }
            }
        }
        for t in &mut tables {
            self.transform(t, &self.forward);
        }
        tables
    }

    /// Zero-padded spectrum of a grid field.
    pub fn forward(&self, field: &[C64]) -> Vec<C64> {
        let [nx, ny, nz] = self.dims;
        let [px, py, _] = self.padded;
        let mut data = vec![C64::new(0.0, 0.0); self.padded_len()];
        for k in 0..nz {
            for j in 0..ny {
                let src = nx * (j + ny * k);
                let dst = px * (j + py * k);
                data[dst..dst + nx].copy_from_slice(&field[src..src + nx]);
            }
        }
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform of a spectrum, restricted to the original grid.
    pub fn inverse(&self, mut spectrum: Vec<C64>) -> Vec<C64> {
        self.transform(&mut spectrum, &self.inverse);
        let [nx, ny, nz] = self.dims;
        let [px, py, _] = self.padded;
        let scale = 1.0 / self.padded_len() as f64;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                let src = px * (j + py * k);
                out.extend(spectrum[src..src + nx].iter().map(|v| v * scale));
            }
        }
        out
    }

    fn transform(&self, data: &mut [C64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [px, py, pz] = self.padded;
        plans[0].process(data);
        let mut line = vec![C64::new(0.0, 0.0); py.max(pz)];
        for iz in 0..pz {
            for ix in 0..px {
                for (iy, l) in line[..py].iter_mut().enumerate() {
                    *l = data[ix + px * (iy + py * iz)];
                }
                plans[1].process(&mut line[..py]);
                for (iy, l) in line[..py].iter().enumerate() {
                    data[ix + px * (iy + py * iz)] = *l;
                }
            }
        }
        let plane = px * py;
        for iy in 0..py {
            for ix in 0..px {
                for (iz, l) in line[..pz].iter_mut().enumerate() {
                    *l = data[ix + px * iy + plane * iz];
                }
                plans[2].process(&mut line[..pz]);
                for (iz, l) in line[..pz].iter().enumerate() {
                    data[ix + px * iy + plane * iz] = *l;
                }
            }
        }
    }
}
