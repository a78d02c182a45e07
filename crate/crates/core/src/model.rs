//! Continuous-time linear-Gaussian model `dX = (A X + B u) dt + Σ^{1/2} dW`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_finite, pinv_with_rank, Matrix, SpdMatrix, Vector};

#[derive(Debug, Clone)]
pub struct ModelSpec {
    a: Matrix,
    b: Matrix,
    sigma: SpdMatrix,
    x0: Vector,
    horizon: f64,
    penalty: Option<SpdMatrix>,
}

impl ModelSpec {
    pub fn new(
        a: Matrix,
        b: Matrix,
        sigma: Matrix,
        x0: Vector,
        horizon: f64,
        penalty: Option<Matrix>,
    ) -> Result<Self> {
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::Dimension(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B must have {n} rows, got {}", b.nrows())));
        }
        if sigma.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "Sigma must be {n}x{n}, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if x0.len() != n {
            return Err(Error::Dimension(format!("x0 must have length {n}, got {}", x0.len())));
        }
        if !x0.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("x0 has non-finite entries".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("horizon T must be positive and finite, got {horizon}")));
        }
        let sigma = SpdMatrix::positive_definite(sigma)
            .map_err(|e| Error::Config(format!("Sigma: {e}")))?;
        let m = b.ncols();
        let penalty = match penalty {
            Some(r) => {
                if r.shape() != (m, m) {
                    return Err(Error::Dimension(format!(
                        "penalty must be {m}x{m}, got {}x{}",
                        r.nrows(),
                        r.ncols()
                    )));
                }
                Some(
                    SpdMatrix::positive_definite(r)
                        .map_err(|e| Error::Config(format!("penalty: {e}")))?,
                )
            }
            None => None,
        };
        Ok(ModelSpec { a, b, sigma, x0, horizon, penalty })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }
    pub fn x0(&self) -> &Vector {
        &self.x0
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn penalty(&self) -> Option<&SpdMatrix> {
        self.penalty.as_ref()
    }
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `BᵀΣ⁻¹B`, the metric under which energy equals path-space KL.
    pub fn noise_metric(&self) -> Matrix {
        let chol = self.sigma.as_matrix().clone().cholesky().expect("Sigma validated PD");
        let s_inv_b = chol.solve(&self.b);
        crate::linalg::symmetrize(&(self.b.transpose() * s_inv_b))
    }

    /// Effort metric: the penalty `R` when given, else `BᵀΣ⁻¹B`.
    pub fn effort_metric(&self) -> Result<EffortMetric> {
        match &self.penalty {
            Some(r) => EffortMetric::from_matrix(r.as_matrix().clone()),
            None => EffortMetric::from_matrix(self.noise_metric()),
        }
    }

    pub fn with_sigma(&self, sigma: Matrix) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            sigma,
            self.x0.clone(),
            self.horizon,
            self.penalty.as_ref().map(|p| p.as_matrix().clone()),
        )
    }

    pub fn with_penalty(&self, penalty: Option<Matrix>) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.sigma.as_matrix().clone(),
            self.x0.clone(),
            self.horizon,
            penalty,
        )
    }

    pub fn with_b(&self, b: Matrix) -> Result<Self> {
        Self::new(
            self.a.clone(),
            b,
            self.sigma.as_matrix().clone(),
            self.x0.clone(),
            self.horizon,
            None,
        )
    }
}

/// Quadratic effort weight `M` with its pseudoinverse and numerical rank.
#[derive(Debug, Clone, Serialize)]
pub struct EffortMetric {
    #[serde(serialize_with = "crate::report::ser_matrix")]
    pub m: Matrix,
    #[serde(serialize_with = "crate::report::ser_matrix")]
    pub m_pinv: Matrix,
    pub rank: usize,
}

impl EffortMetric {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        let (m_pinv, rank) = pinv_with_rank(&m, None)?;
        Ok(EffortMetric { m, m_pinv, rank })
    }

    pub fn is_singular(&self) -> bool {
        self.rank < self.m.nrows()
    }

    /// `uᵀ M u`.
    pub fn quad_form(&self, u: &Vector) -> f64 {
        u.dot(&(&self.m * u))
    }
}

/// Reference systems used throughout the tests and as CLI defaults.
pub mod fixtures {
    use super::*;

    /// `A = 0, B = 1, Σ = 1, x0 = 0, T = 1`.
    pub fn scalar() -> ModelSpec {
        ModelSpec::new(
            Matrix::zeros(1, 1),
            Matrix::identity(1, 1),
            Matrix::identity(1, 1),
            Vector::zeros(1),
            1.0,
            None,
        )
        .expect("valid fixture")
    }

    /// Double integrator altitude model, `σ = 0.5`, `T = 1`.
    pub fn drone() -> ModelSpec {
        ModelSpec::new(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Matrix::from_column_slice(2, 1, &[0.0, 1.0]),
            Matrix::identity(2, 2) * 0.25,
            Vector::zeros(2),
            1.0,
            None,
        )
        .expect("valid fixture")
    }

    /// Altitude direction `w = [1, 0]` for [`drone`].
    pub fn drone_direction() -> Vector {
        Vector::from_vec(vec![1.0, 0.0])
    }
}
