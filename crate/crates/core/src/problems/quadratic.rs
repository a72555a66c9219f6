use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::oracle::{step_rng, GradientOracle};

/// `f(x) = x^T A x / 2` with `A = Q diag(eigenvalues) Q^T`, minimized at 0.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    eigenvalues: Vec<f64>,
    rotation: Option<DMatrix<f64>>,
    origin: Vec<f64>,
}

impl QuadraticProblem {
    /// Axis-aligned quadratic.
    pub fn diagonal(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::EmptyState);
        }
        if let Some(&bad) = eigenvalues.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue {bad} must be positive and finite"
            )));
        }
        let origin = vec![0.0; eigenvalues.len()];
        Ok(QuadraticProblem {
            eigenvalues,
            rotation: None,
            origin,
        })
    }

    /// Same spectrum in a random orthonormal basis drawn from `seed`.
    pub fn with_random_rotation(mut self, seed: u64) -> Self {
        let n = self.dim();
        let mut rng = step_rng(seed, 0x726f_7461_7465);
        let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        // Sign fix so the result is Haar distributed.
        for j in 0..n {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        self.rotation = Some(q);
        self
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rotation(&self) -> Option<&DMatrix<f64>> {
        self.rotation.as_ref()
    }

    pub fn min_eig(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eig(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Unit eigenvector of the largest eigenvalue.
    pub fn top_eigenvector(&self) -> Vec<f64> {
        let (idx, _) =
            self.eigenvalues
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &l)| {
                    if l > best.1 {
                        (i, l)
                    } else {
                        best
                    }
                });
        match &self.rotation {
            Some(q) => q.column(idx).iter().copied().collect(),
            None => {
                let mut e = vec![0.0; self.dim()];
                e[idx] = 1.0;
                e
            }
        }
    }

    /// Eigenbasis coordinates of `x`.
    fn to_eigenbasis(&self, x: &[f64]) -> Vec<f64> {
        match &self.rotation {
            Some(q) => (q.transpose() * DVector::from_column_slice(x))
                .as_slice()
                .to_vec(),
            None => x.to_vec(),
        }
    }
}

impl GradientOracle for QuadraticProblem {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let y = self.to_eigenbasis(x);
        0.5 * y
            .iter()
            .zip(&self.eigenvalues)
            .map(|(y, l)| l * y * y)
            .sum::<f64>()
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.rotation {
            None => {
                for ((o, xi), l) in out.iter_mut().zip(x).zip(&self.eigenvalues) {
                    *o = l * xi;
                }
            }
            Some(q) => {
                let mut y = q.transpose() * DVector::from_column_slice(x);
                for (yi, l) in y.iter_mut().zip(&self.eigenvalues) {
                    *yi *= l;
                }
                out.copy_from_slice((q * y).as_slice());
            }
        }
    }

    fn minimizer(&self) -> Option<&[f64]> {
        Some(&self.origin)
    }

    fn min_value(&self) -> Option<f64> {
        Some(0.0)
    }

    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        Some((self.min_eig(), self.max_eig()))
    }
}

/// Eigenvalues spaced log-uniformly from `min_eig` to `max_eig`, both included.
pub fn log_spaced(dim: usize, min_eig: f64, max_eig: f64) -> Result<Vec<f64>> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("need dim >= 2, got {dim}")));
    }
    if !(min_eig > 0.0 && min_eig <= max_eig && max_eig.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < min_eig <= max_eig, got ({min_eig}, {max_eig})"
        )));
    }
    let ratio = (max_eig / min_eig).ln();
    let mut eigs: Vec<f64> = (0..dim)
        .map(|i| min_eig * (ratio * i as f64 / (dim - 1) as f64).exp())
        .collect();
    eigs[0] = min_eig;
    eigs[dim - 1] = max_eig;
    Ok(eigs)
}

/// Anisotropic benchmark quadratic, axis-aligned unless `rotation_seed` is given.
pub fn make_fig3_quadratic(
    dim: usize,
    min_eig: f64,
    max_eig: f64,
    rotation_seed: Option<u64>,
) -> Result<QuadraticProblem> {
    let q = QuadraticProblem::diagonal(log_spaced(dim, min_eig, max_eig)?)?;
    Ok(match rotation_seed {
        Some(s) => q.with_random_rotation(s),
        None => q,
    })
}

/// The 200-dimensional default with eigenvalues in `[1, 1e4]`.
pub fn default_fig3_quadratic() -> QuadraticProblem {
    make_fig3_quadratic(200, 1.0, 1e4, None).expect("default bounds are valid")
}

/// `A^{-1} 1`: the point whose gradient is the all-ones vector.
pub fn unit_gradient_point(q: &QuadraticProblem) -> Vec<f64> {
    let ones = vec![1.0; q.dim()];
    let y = q.to_eigenbasis(&ones);
    let scaled: Vec<f64> = y.iter().zip(q.eigenvalues()).map(|(y, l)| y / l).collect();
    match q.rotation() {
        None => scaled,
        Some(r) => (r * DVector::from_vec(scaled)).as_slice().to_vec(),
    }
}
