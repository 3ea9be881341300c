//! Symmetric matrices stored by diagonals, banded Cholesky and LDLᵀ inertia.

use crate::error::{CoreError, Result};

/// Symmetric matrix stored as a sparse set of lower diagonals.
///
/// `bands[d][i] = A[i + offsets[d], i]`; `offsets[0]` must be 0 (main
/// diagonal). The assembled grid operators populate only offsets
/// `{0, 1}` (interval) or `{0, 1, nx}` (rectangle), so matrix-vector
/// products stay O(n) while factorizations densify the band as needed.
#[derive(Debug, Clone)]
pub struct SymDiags {
    pub n: usize,
    pub offsets: Vec<usize>,
    pub bands: Vec<Vec<f64>>,
}

impl SymDiags {
    pub fn zeros(n: usize, offsets: Vec<usize>) -> Self {
        assert!(!offsets.is_empty() && offsets[0] == 0, "main diagonal first");
        assert!(offsets.windows(2).all(|w| w[0] < w[1]), "offsets ascending");
        let bands = offsets.iter().map(|&d| vec![0.0; n - d]).collect();
        SymDiags { n, offsets, bands }
    }

    pub fn bandwidth(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for v in y.iter_mut() {
            *v = 0.0;
        }
        for (&d, band) in self.offsets.iter().zip(&self.bands) {
            if d == 0 {
                for i in 0..self.n {
                    y[i] += band[i] * x[i];
                }
            } else {
                for i in 0..self.n - d {
                    y[i] += band[i] * x[i + d];
                    y[i + d] += band[i] * x[i];
                }
            }
        }
    }

    /// Congruence with a positive diagonal: A ← diag(s) · A · diag(s).
    pub fn scale_symmetric(&mut self, s: &[f64]) {
        debug_assert_eq!(s.len(), self.n);
        for (&d, band) in self.offsets.iter().zip(&mut self.bands) {
            for i in 0..self.n - d {
                band[i] *= s[i] * s[i + d];
            }
        }
    }

    /// A ← A + shift·I
    pub fn add_identity(&mut self, shift: f64) {
        for v in self.bands[0].iter_mut() {
            *v += shift;
        }
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin_bounds(&self) -> (f64, f64) {
        let n = self.n;
        let mut radius = vec![0.0; n];
        for (&d, band) in self.offsets.iter().zip(&self.bands) {
            if d == 0 {
                continue;
            }
            for i in 0..n - d {
                radius[i] += band[i].abs();
                radius[i + d] += band[i].abs();
            }
        }
        let diag = &self.bands[0];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            lo = lo.min(diag[i] - radius[i]);
            hi = hi.max(diag[i] + radius[i]);
        }
        (lo, hi)
    }

    /// Dense square copy (small problems only).
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for (&d, band) in self.offsets.iter().zip(&self.bands) {
            for i in 0..n - d {
                a[(i + d) * n + i] = band[i];
                a[i * n + i + d] = band[i];
            }
        }
        a
    }

    /// Dense band copy in column-major band layout:
    /// `data[j*(bw+1) + d] = A[j+d, j]`.
    fn to_band_storage(&self, extra_shift: f64) -> (usize, Vec<f64>) {
        let n = self.n;
        let bw = self.bandwidth();
        let mut data = vec![0.0; n * (bw + 1)];
        for (&d, band) in self.offsets.iter().zip(&self.bands) {
            for i in 0..n - d {
                data[i * (bw + 1) + d] = band[i];
            }
        }
        if extra_shift != 0.0 {
            for j in 0..n {
                data[j * (bw + 1)] += extra_shift;
            }
        }
        (bw, data)
    }

    /// Banded Cholesky of A + shift·I (must be positive definite).
    pub fn cholesky_shifted(&self, shift: f64) -> Result<BandCholesky> {
        let (bw, mut data) = self.to_band_storage(shift);
        let n = self.n;
        let w = bw + 1;
        for j in 0..n {
            let reach = bw.min(n - 1 - j);
            let ajj = data[j * w];
            if ajj <= 0.0 {
                return Err(CoreError::Solver {
                    message: format!("banded Cholesky pivot {ajj:.3e} at column {j}"),
                    worst_residual: ajj,
                });
            }
            let ljj = ajj.sqrt();
            data[j * w] = ljj;
            for d in 1..=reach {
                data[j * w + d] /= ljj;
            }
            for t in 1..=reach {
                let ljt = data[j * w + t];
                if ljt == 0.0 {
                    continue;
                }
                let col = (j + t) * w;
                for d in 0..=(reach - t) {
                    data[col + d] -= ljt * data[j * w + t + d];
                }
            }
        }
        Ok(BandCholesky { n, bw, data })
    }

    /// Inertia count with breakdown recovery: retries with a slightly
    /// jittered `tau` when the plain factorization hits a tiny pivot. The
    /// jitter stays far below any certifiable spectral gap, so the count
    /// is unchanged.
    pub fn inertia_below_robust(&self, tau: f64) -> Result<usize> {
        let (lo, hi) = self.gershgorin_bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let mut last = Err(CoreError::Solver {
            message: "inertia: no attempt made".into(),
            worst_residual: f64::NAN,
        });
        for attempt in 0..6 {
            let jitter = match attempt {
                0 => 0.0,
                a => {
                    let mag = 1e-10 * scale * (1 << (a - 1)) as f64;
                    if a % 2 == 1 {
                        mag
                    } else {
                        -mag
                    }
                }
            };
            match self.inertia_below(tau + jitter) {
                Ok(count) => return Ok(count),
                e @ Err(_) => last = e,
            }
        }
        last
    }

    /// Number of eigenvalues strictly below `tau`, by Sylvester inertia of
    /// the banded LDLᵀ factorization of A − tau·I. Fails on a near-zero
    /// pivot; the caller should perturb `tau` and retry (or use
    /// [`Self::inertia_below_robust`]).
    pub fn inertia_below(&self, tau: f64) -> Result<usize> {
        let (bw, mut data) = self.to_band_storage(-tau);
        let n = self.n;
        let w = bw + 1;
        let scale = self
            .bands[0]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(tau.abs())
            .max(1.0);
        let tiny = scale * 1e-11;
        let mut negatives = 0usize;
        for j in 0..n {
            let reach = bw.min(n - 1 - j);
            let dj = data[j * w];
            if dj.abs() < tiny {
                return Err(CoreError::Solver {
                    message: format!("LDLt pivot {dj:.3e} too small at column {j}"),
                    worst_residual: dj.abs(),
                });
            }
            if dj < 0.0 {
                negatives += 1;
            }
            for t in 1..=reach {
                let ajt = data[j * w + t];
                if ajt == 0.0 {
                    continue;
                }
                let factor = ajt / dj;
                let col = (j + t) * w;
                for d in 0..=(reach - t) {
                    data[col + d] -= factor * data[j * w + t + d];
                }
            }
        }
        Ok(negatives)
    }
}

/// Banded Cholesky factor; solves L Lᵀ x = b.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    /// column-major band layout of L: `data[j*(bw+1)+d] = L[j+d, j]`
    data: Vec<f64>,
}

impl BandCholesky {
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        x.copy_from_slice(b);
        self.solve_in_place(x);
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        // forward: L y = b
        for j in 0..n {
            let col = j * w;
            let yj = x[j] / self.data[col];
            x[j] = yj;
            let reach = bw.min(n - 1 - j);
            for d in 1..=reach {
                x[j + d] -= self.data[col + d] * yj;
            }
        }
        // backward: Lᵀ x = y
        for j in (0..n).rev() {
            let col = j * w;
            let reach = bw.min(n - 1 - j);
            let mut s = x[j];
            for d in 1..=reach {
                s -= self.data[col + d] * x[j + d];
            }
            x[j] = s / self.data[col];
        }
    }
}
