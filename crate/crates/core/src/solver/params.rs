use crate::scalar::Real;

use super::SolverError;

/// Physical constants of the Boussinesq cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams<T> {
    /// Reference velocity flooring the artificial compressibility speed (m/s).
    pub u_ref: T,
    /// Kinematic viscosity (m²/s).
    pub nu: T,
    /// Thermal diffusivity (m²/s).
    pub alpha: T,
    /// Thermal expansion coefficient (1/K).
    pub sigma: T,
    /// Gravity vector (m/s²).
    pub g: [T; 3],
    /// Pressure dissipation strength κ; the per-axis coefficient is
    /// `κ·Δ³/u_ref`.
    pub dissipation: T,
    /// Wall temperature at x = 0 (K).
    pub t_hot: T,
    /// Wall temperature at x = L (K).
    pub t_cold: T,
    /// Reference temperature of the buoyancy term (K).
    pub t_inf: T,
    /// Cavity edge length (m).
    pub length: T,
    /// Constant Boussinesq density.
    pub rho: T,
}

impl<T: Real> FluidParams<T> {
    pub const PRANDTL: f64 = 0.71;
    pub const RAYLEIGH: f64 = 1.0e5;

    /// Air-like defaults for a 0.05 m cavity at Ra = 1e5, Pr = 0.71, gravity
    /// along −z, hot wall at x = 0.
    pub fn cavity() -> Self {
        Self::with_rayleigh(Self::RAYLEIGH)
    }

    /// Same fluid with ν and α rescaled so the Rayleigh number is `ra`.
    pub fn with_rayleigh(ra: f64) -> Self {
        let (t_hot, t_cold, t_inf) = (305.0, 295.0, 300.0);
        let (g, sigma, length) = (9.81, 1.0 / t_inf, 0.05);
        let nu_alpha = g * sigma * (t_hot - t_cold) * length * length * length / ra;
        let alpha = (nu_alpha / Self::PRANDTL).sqrt();
        let nu = Self::PRANDTL * alpha;
        FluidParams {
            u_ref: T::lit(0.02),
            nu: T::lit(nu),
            alpha: T::lit(alpha),
            sigma: T::lit(sigma),
            g: [T::zero(), T::zero(), T::lit(-g)],
            dissipation: T::lit(0.01),
            t_hot: T::lit(t_hot),
            t_cold: T::lit(t_cold),
            t_inf: T::lit(t_inf),
            length: T::lit(length),
            rho: T::one(),
        }
    }

    /// Cavity defaults with both walls at the reference temperature.
    pub fn quiescent() -> Self {
        let mut p = Self::cavity();
        p.t_hot = p.t_inf;
        p.t_cold = p.t_inf;
        p
    }

    pub fn rayleigh(&self) -> T {
        let gmag = self.g.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
        let l = self.length;
        gmag * self.sigma * (self.t_hot - self.t_cold) * l * l * l / (self.nu * self.alpha)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |name: &'static str, x: T| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(SolverError::InvalidParam(name))
            }
        };
        positive("u_ref", self.u_ref)?;
        positive("nu", self.nu)?;
        positive("alpha", self.alpha)?;
        positive("rho", self.rho)?;
        positive("length", self.length)?;
        if self.dissipation.is_nan() || self.dissipation < T::zero() {
            return Err(SolverError::InvalidParam("dissipation"));
        }
        if self.t_hot.is_nan() || self.t_cold.is_nan() || self.t_hot < self.t_cold {
            return Err(SolverError::InvalidParam("t_hot < t_cold"));
        }
        Ok(())
    }
}

/// Time-marching controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub max_steps: usize,
    /// Convergence threshold on the normalised residual norms.
    pub conv_tol: f64,
    pub rescale_pressure: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { cfl: 0.8, max_steps: 100, conv_tol: 1e-8, rescale_pressure: true }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.cfl < 0.0 || !self.cfl.is_finite() {
            return Err(SolverError::InvalidParam("cfl"));
        }
        if self.conv_tol.is_nan() || self.conv_tol <= 0.0 {
            return Err(SolverError::InvalidParam("conv_tol"));
        }
        Ok(())
    }
}
