//! Double-well free energy `f = f₁ + f₂` with the logarithmic part
//! `f₁(ρ) = c (ρ ln ρ + (1−ρ) ln(1−ρ))` and a polynomial perturbation `f₂`.

use crate::error::{Result, SolverError};

pub const DEFAULT_BARRIER_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    c: f64,
    /// `f₂(ρ) = Σ poly[i] ρⁱ`, degree ≤ 4.
    poly: Vec<f64>,
    barrier_guard: f64,
}

impl PotentialSpec {
    /// Logarithmic coefficient `c` and `f₂(ρ) = c₂ ρ(1−ρ)`.
    pub fn new(c: f64, c2: f64) -> Result<Self> {
        Self::with_polynomial(c, vec![0.0, c2, -c2], DEFAULT_BARRIER_GUARD)
    }

    pub fn with_polynomial(c: f64, poly: Vec<f64>, barrier_guard: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(SolverError::InvalidInput(format!("potential.c must be > 0, got {c}")));
        }
        if poly.len() > 5 {
            return Err(SolverError::InvalidInput(format!(
                "f2 degree must be <= 4, got {}",
                poly.len() - 1
            )));
        }
        if poly.iter().any(|a| !a.is_finite()) {
            return Err(SolverError::InvalidInput("f2 coefficients must be finite".into()));
        }
        if !(barrier_guard > 0.0 && barrier_guard < 0.5) {
            return Err(SolverError::InvalidInput(format!(
                "potential.barrier_guard must lie in (0, 0.5), got {barrier_guard}"
            )));
        }
        Ok(Self { c, poly, barrier_guard })
    }

    pub fn with_guard(mut self, guard: f64) -> Result<Self> {
        Self::with_polynomial(self.c, std::mem::take(&mut self.poly), guard)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn polynomial(&self) -> &[f64] {
        &self.poly
    }

    pub fn barrier_guard(&self) -> f64 {
        self.barrier_guard
    }

    pub fn admissible(&self, rho: f64) -> bool {
        rho >= self.barrier_guard && rho <= 1.0 - self.barrier_guard
    }

    fn check(&self, rho: f64) -> Result<()> {
        if self.admissible(rho) {
            Ok(())
        } else {
            Err(SolverError::Domain {
                value: rho,
                guard: self.barrier_guard,
            })
        }
    }

    /// k-th derivative of f₂ by Horner on the differentiated coefficients.
    fn poly_derivative(&self, k: usize, rho: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &a) in self.poly.iter().enumerate().skip(k).rev() {
            let falling: f64 = (0..k).map(|j| (i - j) as f64).product();
            acc = acc * rho + a * falling;
        }
        acc
    }

    pub fn f_value(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        let log_part = self.c * (rho * rho.ln() + (1.0 - rho) * (1.0 - rho).ln());
        Ok(log_part + self.poly_derivative(0, rho))
    }

    pub fn f_prime(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.c * (rho.ln() - (1.0 - rho).ln()) + self.poly_derivative(1, rho))
    }

    pub fn f_second(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.c / (rho * (1.0 - rho)) + self.poly_derivative(2, rho))
    }

    pub fn f_third(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        let s = rho * (1.0 - rho);
        Ok(self.c * (2.0 * rho - 1.0) / (s * s) + self.poly_derivative(3, rho))
    }

    /// `f₁′(ρ)` alone.
    pub fn log_prime(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        Ok(self.c * (rho.ln() - (1.0 - rho).ln()))
    }

    /// `f₂″(ρ)` alone.
    pub fn poly_second(&self, rho: f64) -> f64 {
        self.poly_derivative(2, rho)
    }
}
