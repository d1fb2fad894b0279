//! Nyström systems `x − K L x = x₀` for volume integral equations on a grid.
//!
//! `L` maps the per-node unknowns to per-node sources (local, cell-volume
//! weighted); `K` is a sum of translation-invariant kernel components.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::convolution::ToeplitzConvolver;
use crate::error::Result;
use crate::green::C64;
use crate::grid::Grid;
use crate::linalg::{gmres, lu_solve, relative_residual, DenseMatrix, GmresOptions, LinearOperator, SolveReport};

/// `out[out_row] += coef · K_comp ∗ src[src_row]`
#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub out: usize,
    pub src: usize,
    pub comp: usize,
    pub coef: C64,
}

pub(crate) type KernelFn = Box<dyn Fn(&Vector3<f64>, &mut [C64]) + Send + Sync>;

pub(crate) struct VolumeSystem {
    pub grid: Grid,
    /// Unknowns per node.
    pub block: usize,
    /// Sources per node.
    pub sources: usize,
    pub components: usize,
    /// Kernel components at a nonzero offset `target − source`.
    pub kernel: KernelFn,
    /// Kernel components used for the self-cell (already divided by the cell volume).
    pub self_values: Vec<C64>,
    pub terms: Vec<Term>,
    /// Per-node `sources × block` row-major source maps; `None` for empty cells.
    pub local: Vec<Option<Vec<C64>>>,
}

/// FFT-backed application of `I − K L`.
pub(crate) struct FftOperator<'a> {
    conv: ToeplitzConvolver,
    spectra: Vec<Vec<C64>>,
    sys: &'a VolumeSystem,
}

impl VolumeSystem {
    fn offset(&self, o: [i64; 3]) -> Vector3<f64> {
        let h = self.grid.spacing();
        Vector3::new(o[0] as f64 * h[0], o[1] as f64 * h[1], o[2] as f64 * h[2])
    }

    fn kernel_at(&self, o: [i64; 3], out: &mut [C64]) {
        if o == [0, 0, 0] {
            out.copy_from_slice(&self.self_values);
        } else {
            (self.kernel)(&self.offset(o), out);
        }
    }

    pub fn dim(&self) -> usize {
        self.block * self.grid.len()
    }

    fn sources_of(&self, x: &[C64]) -> Vec<Vec<C64>> {
        let n = self.grid.len();
        let mut src = vec![vec![C64::new(0.0, 0.0); n]; self.sources];
        for (i, loc) in self.local.iter().enumerate() {
            if let Some(l) = loc {
                let xi = &x[i * self.block..(i + 1) * self.block];
                for (s, field) in src.iter_mut().enumerate() {
                    field[i] = (0..self.block).map(|c| l[s * self.block + c] * xi[c]).sum();
                }
            }
        }
        src
    }

    fn fft_operator(&self) -> FftOperator<'_> {
        let conv = ToeplitzConvolver::new(self.grid.dims);
        let spectra = conv.kernel_spectra(self.components, |o, out| self.kernel_at(o, out));
        FftOperator {
            conv,
            spectra,
            sys: self,
        }
    }

    /// Explicit `I − K L`.
    fn assemble(&self) -> DenseMatrix<C64> {
        let n = self.dim();
        let b = self.block;
        DenseMatrix::from_row_blocks(n, n, b, |i, rows| {
            let ti = self.grid.unravel(i);
            let mut kv = vec![C64::new(0.0, 0.0); self.components];
            for (j, loc) in self.local.iter().enumerate() {
                let Some(l) = loc else { continue };
                let tj = self.grid.unravel(j);
                let o = [0, 1, 2].map(|a| ti[a] as i64 - tj[a] as i64);
                self.kernel_at(o, &mut kv);
                for t in &self.terms {
                    let kc = t.coef * kv[t.comp];
                    for c in 0..b {
                        rows[t.out * n + j * b + c] -= kc * l[t.src * b + c];
                    }
                }
            }
            for r in 0..b {
                rows[r * n + i * b + r] += C64::new(1.0, 0.0);
            }
        })
    }

    /// Solves `x − K L x = rhs`; dense LU up to `dense_limit` unknowns.
    pub fn solve(&self, rhs: &[C64], dense_limit: usize, opts: &GmresOptions) -> Result<(Vec<C64>, SolveReport)> {
        if self.local.iter().all(Option::is_none) {
            return Ok((rhs.to_vec(), SolveReport::trivial()));
        }
        if self.dim() <= dense_limit {
            let a = self.assemble();
            let (x, mut report) = lu_solve(&a, rhs)?;
            report.relative_residual = relative_residual(&a, &x, rhs);
            Ok((x, report))
        } else {
            gmres(&self.fft_operator(), rhs, Some(rhs), opts)
        }
    }

    /// `K L x`, the scattered part for given unknowns.
    pub fn scatter(&self, x: &[C64]) -> Vec<C64> {
        self.fft_operator().scatter(x)
    }

    /// `K L x` evaluated at arbitrary points (outputs interleaved per point).
    pub fn scatter_at(&self, x: &[C64], points: &[Vector3<f64>]) -> Vec<C64> {
        let src = self.sources_of(x);
        let centers = self.grid.centers();
        let b = self.block;
        let occupied: Vec<usize> = (0..self.grid.len()).filter(|&j| self.local[j].is_some()).collect();
        points
            .par_iter()
            .flat_map_iter(|p| {
                let mut out = vec![C64::new(0.0, 0.0); b];
                let mut kv = vec![C64::new(0.0, 0.0); self.components];
                for &j in &occupied {
                    let d = p - centers[j];
                    if d.norm() == 0.0 {
                        kv.copy_from_slice(&self.self_values);
                    } else {
                        (self.kernel)(&d, &mut kv);
                    }
                    for t in &self.terms {
                        out[t.out] += t.coef * kv[t.comp] * src[t.src][j];
                    }
                }
                out
            })
            .collect()
    }
}

impl FftOperator<'_> {
    fn scatter(&self, x: &[C64]) -> Vec<C64> {
        let (conv, sys) = (&self.conv, self.sys);
        let src = sys.sources_of(x);
        let used: Vec<bool> = (0..sys.sources).map(|s| sys.terms.iter().any(|t| t.src == s)).collect();
        let src_hat: Vec<Option<Vec<C64>>> = src
            .iter()
            .zip(&used)
            .map(|(f, &u)| (u && f.iter().any(|v| *v != C64::new(0.0, 0.0))).then(|| conv.forward(f)))
            .collect();
        let len = conv.padded_len();
        let n = sys.grid.len();
        let mut out = vec![C64::new(0.0, 0.0); sys.dim()];
        for r in 0..sys.block {
            let mut acc = vec![C64::new(0.0, 0.0); len];
            let mut any = false;
            for t in sys.terms.iter().filter(|t| t.out == r) {
                if let Some(sh) = &src_hat[t.src] {
                    any = true;
                    let kh = &self.spectra[t.comp];
                    acc.par_iter_mut()
                        .zip(sh.par_iter().zip(kh.par_iter()))
                        .for_each(|(a, (s, k))| *a += t.coef * k * s);
                }
            }
            if any {
                let field = conv.inverse(acc);
                for i in 0..n {
                    out[i * sys.block + r] = field[i];
                }
            }
        }
        out
    }
}

impl LinearOperator<C64> for FftOperator<'_> {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let s = self.scatter(x);
        for ((yi, xi), si) in y.iter_mut().zip(x).zip(s) {
            *yi = xi - si;
        }
    }
}
