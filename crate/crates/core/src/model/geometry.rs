//! Ring shedding positions and rotor sampling layouts.

use std::f64::consts::PI;

use crate::kernels::{rot_z3, Dimension};
use crate::linalg::{add, matvec, Vec3};

/// Rotor radius in rotor diameters.
pub const ROTOR_RADIUS: f64 = 0.5;

/// Unrotated offsets of a freshly shed ring relative to the turbine.
///
/// 2D: the two rotor edge points `(0, +r)` and `(0, -r)`. 3D: `n_e + 1` points on
/// the circle of radius `r` in the y-z plane, the last one closing the ring.
pub fn ring_template(dim: Dimension, elements: usize) -> Vec<Vec3> {
    match dim {
        Dimension::Two => vec![[0.0, ROTOR_RADIUS, 0.0], [0.0, -ROTOR_RADIUS, 0.0]],
        Dimension::Three => {
            let mut pts: Vec<Vec3> = (0..elements)
                .map(|i| {
                    let t = 2.0 * PI * i as f64 / elements as f64;
                    [0.0, ROTOR_RADIUS * t.cos(), ROTOR_RADIUS * t.sin()]
                })
                .collect();
            mirror_symmetrize(&mut pts);
            pts.push(pts[0]);
            pts
        }
    }
}

/// Unrotated sampling offsets over the rotor.
///
/// 2D: midpoints of `n_u` equal segments of the rotor line. 3D: an equal-area
/// polar layout with `n_u = rings * azimuths` points at the area centroid radii
/// `r sqrt((j + 1/2) / rings)`; a single point sits at the disc centre.
pub fn disc_template(dim: Dimension, n_u: usize) -> Vec<Vec3> {
    if n_u == 1 {
        return vec![[0.0; 3]];
    }
    let mut pts = match dim {
        Dimension::Two => (0..n_u)
            .map(|i| [0.0, ROTOR_RADIUS * (2.0 * (i as f64 + 0.5) / n_u as f64 - 1.0), 0.0])
            .collect::<Vec<_>>(),
        Dimension::Three => {
            let rings = (1..=n_u)
                .filter(|&d| n_u.is_multiple_of(d) && 4 * d * d <= n_u)
                .max()
                .unwrap_or(1);
            let azimuths = n_u / rings;
            let mut pts = Vec::with_capacity(n_u);
            for j in 0..rings {
                let radius = ROTOR_RADIUS * ((j as f64 + 0.5) / rings as f64).sqrt();
                let offset = if j % 2 == 0 { 0.5 } else { 0.0 };
                for i in 0..azimuths {
                    let t = 2.0 * PI * (i as f64 + offset) / azimuths as f64;
                    pts.push([0.0, radius * t.cos(), radius * t.sin()]);
                }
            }
            pts
        }
    };
    mirror_symmetrize(&mut pts);
    pts
}

/// Group points with their exact mirror image under `y -> -y`. Points on the
/// mirror plane, or without a partner, stand alone.
pub(crate) fn mirror_pairs(pts: &[Vec3]) -> Vec<(usize, Option<usize>)> {
    let mut used = vec![false; pts.len()];
    let mut out = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = if pts[i][1] == 0.0 {
            None
        } else {
            (i + 1..pts.len()).find(|&j| !used[j] && pts[j] == [pts[i][0], -pts[i][1], pts[i][2]])
        };
        if let Some(j) = partner {
            used[j] = true;
        }
        out.push((i, partner));
    }
    out
}

/// Make the point set exactly symmetric under `y -> -y`.
///
/// Trigonometric evaluation leaves mirror partners differing in the last bits;
/// exact symmetry keeps mirrored yaw configurations bitwise mirrored.
fn mirror_symmetrize(pts: &mut [Vec3]) {
    let tol = 1e-12;
    let n = pts.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        if pts[i][1].abs() < tol {
            pts[i][1] = 0.0;
            done[i] = true;
            continue;
        }
        if let Some(j) =
            (i + 1..n).find(|&j| !done[j] && (pts[j][1] + pts[i][1]).abs() < tol && (pts[j][2] - pts[i][2]).abs() < tol)
        {
            pts[j] = [pts[i][0], -pts[i][1], pts[i][2]];
            done[j] = true;
        }
        done[i] = true;
    }
}

/// Rotate the template by `psi` about z and translate to `center`.
pub fn place(template: &[Vec3], psi: f64, center: Vec3) -> Vec<Vec3> {
    let r = rot_z3(psi);
    template.iter().map(|&p| add(center, matvec(&r, p))).collect()
}
