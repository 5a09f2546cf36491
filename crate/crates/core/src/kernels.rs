//! Regularised Biot-Savart kernels for 2D vortex points and 3D straight vortex
//! filaments, with analytic partial derivatives.
//!
//! All lengths are in rotor diameters and velocities in units of the inflow
//! speed. Both kernels use a Gaussian core of size `sigma`.
//!
//! Sign conventions follow the model exactly: in 2D the relative position is
//! `r = x1 - x0` (source minus target) and the velocity direction is
//! `[-r_y, r_x]`; in 3D `r0 = x2 - x1`, `r1 = x1 - x0`, `r2 = x2 - x0`.

use std::f64::consts::PI;

use crate::error::{FvwError, Result};
use crate::linalg::{
    cross, dot, mat_add, mat_neg, mat_scale, mat_sub, matmul, norm_sq, outer, scale, skew, sub, transpose, Mat3, Vec3,
};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// `||r1 x r2||^2` below this value is treated as a collinear configuration.
pub const DEGENERACY_THRESHOLD: f64 = 1e-24;

/// Spatial dimension of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimension {
    Two,
    Three,
}

impl Dimension {
    pub fn n_d(self) -> usize {
        match self {
            Dimension::Two => 2,
            Dimension::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dimension {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, String> {
        match value {
            2 => Ok(Dimension::Two),
            3 => Ok(Dimension::Three),
            other => Err(format!("dimension must be 2 or 3, got {other}")),
        }
    }
}

impl From<Dimension> for u8 {
    fn from(d: Dimension) -> u8 {
        d.n_d() as u8
    }
}

/// Partial derivatives of the 2D point-vortex kernel.
///
/// Matrices are indexed `[row][col] = d u_row / d x_col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPartials2D {
    pub du_dx0: Mat2,
    pub du_dx1: Mat2,
    pub du_dgamma: Vec2,
}

/// Partial derivatives of the 3D filament kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelPartials3D {
    pub du_dx0: Mat3,
    pub du_dx1: Mat3,
    pub du_dx2: Mat3,
    pub du_dgamma: Vec3,
}

/// Velocity induced at `x0` by a point vortex of strength `gamma` at `x1`.
///
/// Returns zero for coincident points, which is the limit of the regularised
/// kernel.
pub fn induced_velocity_2d(x0: Vec2, x1: Vec2, gamma: f64, sigma: f64) -> Vec2 {
    let r = [x1[0] - x0[0], x1[1] - x0[1]];
    let r_sq = r[0] * r[0] + r[1] * r[1];
    if r_sq == 0.0 {
        return [0.0, 0.0];
    }
    let core = -(-r_sq / (sigma * sigma)).exp_m1();
    let f = gamma / (2.0 * PI * r_sq) * core;
    [-r[1] * f, r[0] * f]
}

/// Analytic partials of [`induced_velocity_2d`].
///
/// The position partials are assembled with the product rule on the three
/// factors `u0 = [-r_y, r_x]`, `u1 = gamma / (2 pi |r|^2)` and
/// `u2 = 1 - exp(-|r|^2 / sigma^2)`.
pub fn d_induced_velocity_2d(x0: Vec2, x1: Vec2, gamma: f64, sigma: f64) -> Result<KernelPartials2D> {
    let r = [x1[0] - x0[0], x1[1] - x0[1]];
    let r_sq = r[0] * r[0] + r[1] * r[1];
    if r_sq == 0.0 {
        return Err(FvwError::DegenerateKernel("coincident 2D vortex and evaluation point"));
    }
    let s2 = sigma * sigma;
    let decay = (-r_sq / s2).exp();
    let u0 = [-r[1], r[0]];
    // unit circulation; scaled by gamma at the end
    let u1 = 1.0 / (2.0 * PI * r_sq);
    let u2 = -(-r_sq / s2).exp_m1();
    let du0: Mat2 = [[0.0, -1.0], [1.0, 0.0]];
    let du1 = [-r[0] / (PI * r_sq * r_sq), -r[1] / (PI * r_sq * r_sq)];
    let du2 = [2.0 * r[0] / s2 * decay, 2.0 * r[1] / s2 * decay];

    let mut du_dr = [[0.0; 2]; 2];
    for (i, row) in du_dr.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = gamma * (du0[i][j] * u1 * u2 + u0[i] * du1[j] * u2 + u0[i] * u1 * du2[j]);
        }
    }
    let du_dx0 = [[-du_dr[0][0], -du_dr[0][1]], [-du_dr[1][0], -du_dr[1][1]]];
    Ok(KernelPartials2D {
        du_dx0,
        du_dx1: du_dr,
        du_dgamma: [u0[0] * u1 * u2, u0[1] * u1 * u2],
    })
}

/// Velocity induced at `x0` by a straight filament from `x1` to `x2` with
/// circulation `gamma`.
///
/// Returns zero when the evaluation point is collinear with the filament
/// (including coincidence with an end point).
pub fn induced_velocity_3d(x0: Vec3, x1: Vec3, x2: Vec3, gamma: f64, sigma: f64) -> Vec3 {
    let r0 = sub(x2, x1);
    let r1 = sub(x1, x0);
    let r2 = sub(x2, x0);
    let c = cross(r1, r2);
    let c_sq = norm_sq(c);
    if c_sq < DEGENERACY_THRESHOLD {
        return [0.0; 3];
    }
    let n1 = norm_sq(r1).sqrt();
    let n2 = norm_sq(r2).sqrt();
    let u1 = dot(r0, sub(scale(r1, 1.0 / n1), scale(r2, 1.0 / n2)));
    let u2 = -(-c_sq / (sigma * sigma * norm_sq(r0))).exp_m1();
    scale(c, gamma / (4.0 * PI * c_sq) * u1 * u2)
}

/// Analytic partials of [`induced_velocity_3d`].
pub fn d_induced_velocity_3d(x0: Vec3, x1: Vec3, x2: Vec3, gamma: f64, sigma: f64) -> Result<KernelPartials3D> {
    let r0 = sub(x2, x1);
    let r1 = sub(x1, x0);
    let r2 = sub(x2, x0);
    let c = cross(r1, r2);
    let c_sq = norm_sq(c);
    if c_sq < DEGENERACY_THRESHOLD {
        return Err(FvwError::DegenerateKernel("evaluation point collinear with filament"));
    }
    let s2 = sigma * sigma;
    let r0_sq = norm_sq(r0);
    let r1_sq = norm_sq(r1);
    let r2_sq = norm_sq(r2);
    let n1 = r1_sq.sqrt();
    let n2 = r2_sq.sqrt();

    // factors at unit circulation
    let k = 1.0 / (4.0 * PI);
    let u0 = scale(c, k / c_sq);
    let dir = sub(scale(r1, 1.0 / n1), scale(r2, 1.0 / n2));
    let u1 = dot(r0, dir);
    let arg = c_sq / (s2 * r0_sq);
    let decay = (-arg).exp();
    let u2 = -(-arg).exp_m1();

    // d u0 / d c
    let ident = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let du0_dc = mat_scale(
        &mat_sub(&mat_scale(&ident, c_sq), &mat_scale(&outer(c, c), 2.0)),
        k / (c_sq * c_sq),
    );
    let du0_dr1 = matmul(&du0_dc, &transpose(&skew(r2)));
    let du0_dr2 = matmul(&du0_dc, &skew(r1));

    let du1_dr0 = dir;
    let du1_dr1 = scale(sub(scale(r0, r1_sq), scale(r1, dot(r0, r1))), 1.0 / (r1_sq * n1));
    let du1_dr2 = scale(sub(scale(r0, r2_sq), scale(r2, dot(r0, r2))), -1.0 / (r2_sq * n2));

    let du2_dr0 = scale(r0, -decay * 2.0 * c_sq / (s2 * r0_sq * r0_sq));
    let dc_coef = scale(c, decay * 2.0 / (s2 * r0_sq));
    let du2_dr1 = crate::linalg::vecmat(dc_coef, &transpose(&skew(r2)));
    let du2_dr2 = crate::linalg::vecmat(dc_coef, &skew(r1));

    // product rule; d u0 / d r0 = 0
    let du_dr0 = mat_add(&outer(u0, scale(du1_dr0, u2)), &outer(u0, scale(du2_dr0, u1)));
    let du_dr1 = mat_add(
        &mat_add(&mat_scale(&du0_dr1, u1 * u2), &outer(u0, scale(du1_dr1, u2))),
        &outer(u0, scale(du2_dr1, u1)),
    );
    let du_dr2 = mat_add(
        &mat_add(&mat_scale(&du0_dr2, u1 * u2), &outer(u0, scale(du1_dr2, u2))),
        &outer(u0, scale(du2_dr2, u1)),
    );

    let du_dx0 = mat_scale(&mat_neg(&mat_add(&du_dr1, &du_dr2)), gamma);
    let du_dx1 = mat_scale(&mat_sub(&du_dr1, &du_dr0), gamma);
    let du_dx2 = mat_scale(&mat_add(&du_dr2, &du_dr0), gamma);
    Ok(KernelPartials3D {
        du_dx0,
        du_dx1,
        du_dx2,
        du_dgamma: scale(u0, u1 * u2),
    })
}

/// Rotation about the z-axis by `psi`, as an `n_d x n_d` matrix.
///
/// The matrix is `[[cos, sin], [-sin, cos]]` (identity on z in 3D), so the
/// rotor normal `R_z(psi) e_x = (cos psi, -sin psi)`.
pub fn rotation_z(psi: f64, dim: Dimension) -> Vec<Vec<f64>> {
    truncate(&rot_z3(psi), dim)
}

/// Elementwise derivative of [`rotation_z`] with respect to `psi`.
pub fn d_rotation_z(psi: f64, dim: Dimension) -> Vec<Vec<f64>> {
    truncate(&d_rot_z3(psi), dim)
}

fn truncate(m: &Mat3, dim: Dimension) -> Vec<Vec<f64>> {
    let n = dim.n_d();
    m.iter().take(n).map(|row| row[..n].to_vec()).collect()
}

pub(crate) fn rot_z3(psi: f64) -> Mat3 {
    let (s, c) = psi.sin_cos();
    [[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub(crate) fn d_rot_z3(psi: f64) -> Mat3 {
    let (s, c) = psi.sin_cos();
    [[-s, c, 0.0], [-c, -s, 0.0], [0.0, 0.0, 0.0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_2d(x0: Vec2, x1: Vec2, gamma: f64, sigma: f64, h: f64) -> (Mat2, Mat2) {
        let mut j0 = [[0.0; 2]; 2];
        let mut j1 = [[0.0; 2]; 2];
        for c in 0..2 {
            let (mut p, mut m) = (x0, x0);
            p[c] += h;
            m[c] -= h;
            let (up, um) = (
                induced_velocity_2d(p, x1, gamma, sigma),
                induced_velocity_2d(m, x1, gamma, sigma),
            );
            for r in 0..2 {
                j0[r][c] = (up[r] - um[r]) / (2.0 * h);
            }
            let (mut p, mut m) = (x1, x1);
            p[c] += h;
            m[c] -= h;
            let (up, um) = (
                induced_velocity_2d(x0, p, gamma, sigma),
                induced_velocity_2d(x0, m, gamma, sigma),
            );
            for r in 0..2 {
                j1[r][c] = (up[r] - um[r]) / (2.0 * h);
            }
        }
        (j0, j1)
    }

    fn fd_3d(x: [Vec3; 3], gamma: f64, sigma: f64, h: f64) -> [Mat3; 3] {
        let mut out = [[[0.0; 3]; 3]; 3];
        for (p, jac) in out.iter_mut().enumerate() {
            for c in 0..3 {
                let (mut xp, mut xm) = (x, x);
                xp[p][c] += h;
                xm[p][c] -= h;
                let up = induced_velocity_3d(xp[0], xp[1], xp[2], gamma, sigma);
                let um = induced_velocity_3d(xm[0], xm[1], xm[2], gamma, sigma);
                for r in 0..3 {
                    jac[r][c] = (up[r] - um[r]) / (2.0 * h);
                }
            }
        }
        out
    }

    fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
        (a - b).abs() <= abs + rel * a.abs().max(b.abs())
    }

    #[test]
    fn point_vortex_unit_distance() {
        let u = induced_velocity_2d([1.0, 0.0], [0.0, 0.0], 2.0 * PI, 0.1);
        assert!(u[0].abs() < 1e-15);
        assert!((u[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_vortex_coincident_is_zero() {
        assert_eq!(induced_velocity_2d([0.3, 0.2], [0.3, 0.2], 5.0, 0.1), [0.0, 0.0]);
        assert!(d_induced_velocity_2d([0.3, 0.2], [0.3, 0.2], 5.0, 0.1).is_err());
    }

    #[test]
    fn point_vortex_scalar_oracle() {
        let (x0, x1, gamma, sigma) = ([0.0, 0.0], [0.0, 0.5], 0.1, 0.1);
        let u = induced_velocity_2d(x0, x1, gamma, sigma);
        // independent scalar evaluation of the magnitude: Gamma/(2 pi d) (1 - exp(-d^2/s^2))
        let d: f64 = 0.5;
        let expected = gamma / (2.0 * PI * d) * (1.0 - (-d * d / (sigma * sigma)).exp());
        assert!((u[0] * 0.0 + u[1] * 0.5).abs() < 1e-18);
        assert!(((u[0] * u[0] + u[1] * u[1]).sqrt() - expected).abs() < 1e-15);
    }

    #[test]
    fn filament_matches_finite_segment_formula() {
        let gamma = 4.0 * PI;
        let u = induced_velocity_3d([1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 1.0, 0.0], gamma, 1e-6);
        // Gamma/(4 pi d) (cos t1 - cos t2), d = 1, t1 = 45 deg, t2 = 135 deg
        let d = 1.0;
        let mag = gamma / (4.0 * PI * d) * ((PI / 4.0).cos() - (3.0 * PI / 4.0).cos());
        assert!((mag - 2f64.sqrt()).abs() < 1e-12);
        assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
        assert!((u[2] - mag).abs() < 1e-12);
    }

    #[test]
    fn filament_degenerate_cases() {
        let a = [0.0, 0.0, 0.0];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(induced_velocity_3d([2.0, 2.0, 2.0], a, b, 1.0, 0.1), [0.0; 3]);
        assert_eq!(induced_velocity_3d(a, a, b, 1.0, 0.1), [0.0; 3]);
        assert_eq!(induced_velocity_3d([0.0, 1.0, 0.0], a, b, 0.0, 0.1), [0.0; 3]);
        assert!(d_induced_velocity_3d([2.0, 2.0, 2.0], a, b, 1.0, 0.1).is_err());
    }

    #[test]
    fn d_point_vortex_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x0: Vec2 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x1 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let dist = ((x1[0] - x0[0]).powi(2) + (x1[1] - x0[1]).powi(2)).sqrt();
            if dist < 0.05 {
                continue;
            }
            let p = d_induced_velocity_2d(x0, x1, 1.0, 0.1).unwrap();
            let (f0, f1) = fd_2d(x0, x1, 1.0, 0.1, 1e-7);
            let scale = p.du_dx0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for r in 0..2 {
                for c in 0..2 {
                    assert!(close(p.du_dx0[r][c], f0[r][c], 1e-6, 1e-6 * scale), "{p:?} {f0:?}");
                    assert!(close(p.du_dx1[r][c], f1[r][c], 1e-6, 1e-6 * scale));
                }
            }
        }
    }

    #[test]
    fn d_point_vortex_structure() {
        let p = d_induced_velocity_2d([0.1, -0.2], [0.4, 0.3], 2.0, 0.1).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(p.du_dx0[r][c], -p.du_dx1[r][c]);
            }
        }
        let unit = induced_velocity_2d([0.1, -0.2], [0.4, 0.3], 1.0, 0.1);
        assert!((p.du_dgamma[0] - unit[0]).abs() < 1e-15);
        assert!((p.du_dgamma[1] - unit[1]).abs() < 1e-15);
    }

    fn random_triplet(rng: &mut ChaCha8Rng) -> Option<[Vec3; 3]> {
        let mut v = || {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]
        };
        let x = [v(), v(), v()];
        let r1 = sub(x[1], x[0]);
        let r2 = sub(x[2], x[0]);
        let r0 = sub(x[2], x[1]);
        // keep away from the collinear set, where FD steps would cross the kink
        let perp = norm_sq(cross(r1, r2)).sqrt() / norm_sq(r0).sqrt();
        (perp > 0.05 && norm_sq(r0) > 0.01).then_some(x)
    }

    #[test]
    fn d_filament_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 1000 {
            let Some(x) = random_triplet(&mut rng) else { continue };
            checked += 1;
            let p = d_induced_velocity_3d(x[0], x[1], x[2], 1.0, 0.16).unwrap();
            let fd = fd_3d(x, 1.0, 0.16, 1e-7);
            let an = [p.du_dx0, p.du_dx1, p.du_dx2];
            let scale = an.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..3 {
                for r in 0..3 {
                    for c in 0..3 {
                        assert!(
                            close(an[k][r][c], fd[k][r][c], 1e-6, 1e-6 * scale),
                            "block {k} ({r},{c}): {} vs {}",
                            an[k][r][c],
                            fd[k][r][c]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn d_filament_translation_invariance_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let Some(x) = random_triplet(&mut rng) else { continue };
            let p1 = d_induced_velocity_3d(x[0], x[1], x[2], 1.0, 0.16).unwrap();
            let p3 = d_induced_velocity_3d(x[0], x[1], x[2], 3.0, 0.16).unwrap();
            for r in 0..3 {
                for c in 0..3 {
                    let s = p1.du_dx0[r][c] + p1.du_dx1[r][c] + p1.du_dx2[r][c];
                    let mag = p1.du_dx0[r][c].abs().max(1.0);
                    assert!(s.abs() <= 1e-12 * mag, "sum {s}");
                    assert!(close(p3.du_dx1[r][c], 3.0 * p1.du_dx1[r][c], 1e-14, 1e-14));
                }
            }
            let unit = induced_velocity_3d(x[0], x[1], x[2], 1.0, 0.16);
            for r in 0..3 {
                assert!(close(p3.du_dgamma[r], unit[r], 1e-12, 1e-15));
            }
        }
    }

    #[test]
    fn rotation_examples() {
        for dim in [Dimension::Two, Dimension::Three] {
            let r = rotation_z(0.0, dim);
            for i in 0..dim.n_d() {
                for j in 0..dim.n_d() {
                    assert_eq!(r[i][j], if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        let r = rotation_z(PI / 2.0, Dimension::Two);
        let expected = [[0.0, 1.0], [-1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((r[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn d_rotation_matches_fd() {
        let h = 1e-6;
        for &psi in &[-1.2, -0.3, 0.0, 0.4, 1.5] {
            for dim in [Dimension::Two, Dimension::Three] {
                let d = d_rotation_z(psi, dim);
                let p = rotation_z(psi + h, dim);
                let m = rotation_z(psi - h, dim);
                for i in 0..dim.n_d() {
                    for j in 0..dim.n_d() {
                        let fd = (p[i][j] - m[i][j]) / (2.0 * h);
                        assert!(close(d[i][j], fd, 1e-8, 1e-10), "{} vs {}", d[i][j], fd);
                    }
                }
            }
        }
    }
}
