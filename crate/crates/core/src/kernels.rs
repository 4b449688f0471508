//! Kelvin fundamental solutions for the 2D isotropic elastic plane and the
//! constitutive relations used for traction recovery.
//!
//! `r_i = (Q_i - P_i) / r` throughout: derivatives are taken with respect to
//! the field point `Q`, and the normal in `T` is the outward normal at `Q`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{BinnError, Result, Vec2};

pub type Block2 = nalgebra::Matrix2<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneMode {
    PlaneStrain,
    PlaneStress,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub mode: PlaneMode,
}

impl Material {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, mode: PlaneMode) -> Result<Self> {
        if !(youngs_modulus > 0.0) || !youngs_modulus.is_finite() {
            return Err(BinnError::Config(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(BinnError::Config(format!(
                "Poisson's ratio must lie in (-1, 0.5), got {poisson_ratio}"
            )));
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            mode,
        })
    }

    pub fn plane_strain(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        Self::new(youngs_modulus, poisson_ratio, PlaneMode::PlaneStrain)
    }

    pub fn plane_stress(youngs_modulus: f64, poisson_ratio: f64) -> Result<Self> {
        Self::new(youngs_modulus, poisson_ratio, PlaneMode::PlaneStress)
    }

    /// Shear modulus.
    pub fn mu(&self) -> f64 {
        self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))
    }

    /// Lamé constant for the active mode.
    pub fn lambda(&self) -> f64 {
        let (e, nu) = (self.youngs_modulus, self.poisson_ratio);
        match self.mode {
            PlaneMode::PlaneStrain => e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            PlaneMode::PlaneStress => e * nu / (1.0 - nu * nu),
        }
    }

    /// Poisson's ratio entering the kernels: `nu` in plane strain,
    /// `nu / (1 + nu)` in plane stress.
    pub fn kernel_nu(&self) -> f64 {
        match self.mode {
            PlaneMode::PlaneStrain => self.poisson_ratio,
            PlaneMode::PlaneStress => self.poisson_ratio / (1.0 + self.poisson_ratio),
        }
    }

    pub fn kernel_constants(&self) -> KernelConstants {
        let nu = self.kernel_nu();
        let mu = self.mu();
        KernelConstants {
            nu,
            u_scale: 1.0 / (8.0 * PI * mu * (1.0 - nu)),
            t_scale: -1.0 / (4.0 * PI * (1.0 - nu)),
        }
    }
}

/// Precomputed prefactors shared by every kernel evaluation.
#[derive(Clone, Copy, Debug)]
pub struct KernelConstants {
    pub nu: f64,
    /// `1 / (8 pi mu (1 - nu))`
    pub u_scale: f64,
    /// `-1 / (4 pi (1 - nu))`
    pub t_scale: f64,
}

impl KernelConstants {
    /// Displacement kernel for `d = Q - P`, `d != 0`.
    #[inline]
    pub fn u(&self, d: Vec2) -> Block2 {
        let r = d.norm();
        let (r1, r2) = (d.x / r, d.y / r);
        let a = (4.0 * self.nu - 3.0) * r.ln();
        let c = self.u_scale;
        Block2::new(c * (a + r1 * r1), c * r1 * r2, c * r1 * r2, c * (a + r2 * r2))
    }

    /// Traction kernel for `d = Q - P`, `d != 0`, unit normal `n` at `Q`.
    #[inline]
    pub fn t(&self, d: Vec2, n: Vec2) -> Block2 {
        let r = d.norm();
        let (r1, r2) = (d.x / r, d.y / r);
        let drdn = r1 * n.x + r2 * n.y;
        let m = 1.0 - 2.0 * self.nu;
        let c = self.t_scale / r;
        let anti = m * (r1 * n.y - r2 * n.x);
        Block2::new(
            c * drdn * (m + 2.0 * r1 * r1),
            c * (drdn * 2.0 * r1 * r2 - anti),
            c * (drdn * 2.0 * r1 * r2 + anti),
            c * drdn * (m + 2.0 * r2 * r2),
        )
    }
}

/// `U_ij(P, Q)`.
pub fn kelvin_u(p: Vec2, q: Vec2, material: &Material) -> Result<Block2> {
    let d = q - p;
    if d.norm() == 0.0 {
        return Err(BinnError::SingularEvaluation);
    }
    Ok(material.kernel_constants().u(d))
}

/// `T_ij(P, Q)` with the unit outward normal `n` at `Q`.
pub fn kelvin_t(p: Vec2, q: Vec2, n: Vec2, material: &Material) -> Result<Block2> {
    let d = q - p;
    if d.norm() == 0.0 {
        return Err(BinnError::SingularEvaluation);
    }
    Ok(material.kernel_constants().t(d, n))
}

/// Stress from a displacement gradient `grad_u[(a, b)] = du_a / dx_b`.
pub fn stress_from_gradient(grad_u: &Block2, material: &Material) -> Block2 {
    let eps = (grad_u + grad_u.transpose()) * 0.5;
    let tr = eps.trace();
    Block2::identity() * (material.lambda() * tr) + eps * (2.0 * material.mu())
}

/// Cauchy traction `t_i = sigma_ij n_j`.
pub fn traction(sigma: &Block2, n: Vec2) -> Vec2 {
    sigma * n
}
