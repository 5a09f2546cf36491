//! Actuator-disc loading curves and turbine power.

use crate::error::{FvwError, Result};
use crate::linalg::{dot, Vec3};

/// High-induction thrust constant of the empirical Glauert-type branch.
pub const CT1_DEFAULT: f64 = 2.3;

/// Induction at which the momentum branch hands over to the empirical branch.
pub fn transition_induction(ct1: f64) -> f64 {
    1.0 - 0.5 * ct1.sqrt()
}

fn check_domain(a: f64) -> Result<()> {
    if a < 1.0 && a.is_finite() {
        Ok(())
    } else {
        Err(FvwError::InductionDomain(a))
    }
}

/// Local thrust coefficient `c_t'(a)`.
pub fn thrust_coefficient(a: f64, ct1: f64) -> Result<f64> {
    check_domain(a)?;
    let b = 1.0 - a;
    Ok(if a <= transition_induction(ct1) {
        4.0 * a / b
    } else {
        (ct1 - 4.0 * (ct1.sqrt() - 1.0) * b) / (b * b)
    })
}

pub fn d_thrust_coefficient(a: f64, ct1: f64) -> Result<f64> {
    check_domain(a)?;
    let b = 1.0 - a;
    Ok(if a <= transition_induction(ct1) {
        4.0 / (b * b)
    } else {
        2.0 * ct1 / (b * b * b) - 4.0 * (ct1.sqrt() - 1.0) / (b * b)
    })
}

/// Local power coefficient `c_p'(a) = 4a / (1 - a)`.
pub fn power_coefficient(a: f64) -> Result<f64> {
    check_domain(a)?;
    Ok(4.0 * a / (1.0 - a))
}

pub fn d_power_coefficient(a: f64) -> Result<f64> {
    check_domain(a)?;
    Ok(4.0 / ((1.0 - a) * (1.0 - a)))
}

/// Rotor normal `n(psi) = R_z(psi) e_x`, pointing downstream.
#[inline]
pub fn rotor_normal(psi: f64) -> Vec3 {
    let (s, c) = psi.sin_cos();
    [c, -s, 0.0]
}

#[inline]
pub fn d_rotor_normal(psi: f64) -> Vec3 {
    let (s, c) = psi.sin_cos();
    [-s, -c, 0.0]
}

/// Circulation shed into every element of a new ring during one time step:
/// `c_t'(a) * 0.5 * (u_r . n(psi))^2 * h`.
pub fn shed_circulation(a: f64, psi: f64, u_r: Vec3, h: f64, ct1: f64) -> Result<f64> {
    let un = dot(u_r, rotor_normal(psi));
    Ok(thrust_coefficient(a, ct1)? * 0.5 * un * un * h)
}

/// Power of a turbine with disc-averaged velocity `u_r`.
///
/// Virtual turbines do not act on the simulated flow, so their rotor velocity
/// is lowered by the induction factor before the power is evaluated.
pub fn turbine_power(u_r: Vec3, a: f64, psi: f64, is_virtual: bool, rotor_area: f64) -> Result<f64> {
    let cp = power_coefficient(a)?;
    let mut un = dot(u_r, rotor_normal(psi));
    if is_virtual {
        un *= 1.0 - a;
    }
    Ok(0.5 * cp * rotor_area * un * un * un)
}

/// Partial derivatives of [`turbine_power`] with respect to `u_r`, `a` and
/// `psi` (the latter with the disc-averaged velocity held fixed).
pub(crate) fn d_turbine_power(
    u_r: Vec3,
    a: f64,
    psi: f64,
    is_virtual: bool,
    rotor_area: f64,
) -> Result<(Vec3, f64, f64)> {
    let cp = power_coefficient(a)?;
    let n = rotor_normal(psi);
    let un = dot(u_r, n);
    let dn = dot(u_r, d_rotor_normal(psi));
    let f = if is_virtual { 1.0 - a } else { 1.0 };
    let eff = f * un;
    let common = 1.5 * cp * rotor_area * eff * eff * f;
    let d_ur = [common * n[0], common * n[1], common * n[2]];
    let d_psi = common * dn;
    let d_a = if is_virtual {
        // 0.5 A (u.n)^3 d/da [4a(1-a)^2]
        0.5 * rotor_area * un * un * un * (4.0 * f * f - 8.0 * a * f)
    } else {
        0.5 * rotor_area * un * un * un * d_power_coefficient(a)?
    };
    Ok((d_ur, d_a, d_psi))
}
