//! Dense complex operators on the 2^N spin Hilbert space.
//!
//! Everything downstream manipulates Hermitian generators stored in ordinary
//! frequency units (Hz); the 2pi lives inside [`OperatorMatrix::propagator`],
//! so `propagator(h, t) = exp(-2πi h t)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance for Hermiticity checks on constructed operators.
pub const HERMITICITY_TOL: f64 = 1e-12;

/// A square complex matrix acting on the joint spin space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    mat: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn from_matrix(mat: DMatrix<C64>) -> Self {
        assert_eq!(mat.nrows(), mat.ncols(), "operator must be square");
        Self { mat }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    /// Single-site spin-1/2 operator (Pauli matrix over 2).
    pub fn pauli_half(axis: Axis) -> Self {
        let h = |re: f64, im: f64| C64::new(re, im);
        let m = match axis {
            Axis::X => DMatrix::from_row_slice(
                2,
                2,
                &[h(0.0, 0.0), h(0.5, 0.0), h(0.5, 0.0), h(0.0, 0.0)],
            ),
            Axis::Y => DMatrix::from_row_slice(
                2,
                2,
                &[h(0.0, 0.0), h(0.0, -0.5), h(0.0, 0.5), h(0.0, 0.0)],
            ),
            Axis::Z => DMatrix::from_row_slice(
                2,
                2,
                &[h(0.5, 0.0), h(0.0, 0.0), h(0.0, 0.0), h(-0.5, 0.0)],
            ),
        };
        Self { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: self.mat.map(|v| v * s),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat - &other.mat,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat * &other.mat,
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.diagonal().iter().sum()
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max |A - A^dagger| entry; zero for Hermitian matrices.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() < HERMITICITY_TOL
    }

    /// Re tr(rho * self), the expectation of this observable in state `rho`.
    pub fn expectation(&self, rho: &Self) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        let n = self.dim();
        for i in 0..n {
            for k in 0..n {
                acc += rho.mat[(i, k)] * self.mat[(k, i)];
            }
        }
        acc.re
    }

    /// Eigendecomposition of a Hermitian matrix; eigenvalues are real.
    pub fn eigh(&self) -> Result<HermitianEigen> {
        if !self.is_hermitian() {
            return Err(Error::NumericalIntegrity {
                what: "hermiticity defect before eigendecomposition",
                value: self.hermiticity_defect(),
                limit: HERMITICITY_TOL,
            });
        }
        let eig = self.mat.clone().symmetric_eigen();
        Ok(HermitianEigen {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    /// exp(-2πi * self * t) for a Hermitian generator in Hz, via eigendecomposition.
    pub fn propagator(&self, t: f64) -> Result<Self> {
        Ok(self.eigh()?.propagator(t))
    }

    /// Conjugation U * self * U^dagger.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        Self {
            mat: &u.mat * &self.mat * u.mat.adjoint(),
        }
    }

    /// ||U^dagger U - 1||_max, the unitarity defect.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.adjoint().mul(self))
            .sub(&Self::identity(n))
            .max_abs()
    }
}

/// Spatial axis selector for collective spin operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Cached eigendecomposition of a Hermitian generator, used to build exact
/// piecewise-constant propagators for many different interval lengths.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// exp(-2πi * H * t) reconstructed from the eigenbasis.
    pub fn propagator(&self, t: f64) -> OperatorMatrix {
        let n = self.eigenvalues.len();
        let mut phased = self.vectors.clone();
        // Scale columns by the eigenphases, then multiply by V^dagger.
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let ph = C64::from_polar(1.0, -std::f64::consts::TAU * lam * t);
            for i in 0..n {
                phased[(i, j)] *= ph;
            }
        }
        OperatorMatrix {
            mat: phased * self.vectors.adjoint(),
        }
    }
}
