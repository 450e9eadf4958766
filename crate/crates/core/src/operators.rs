//! Discrete spatial operators on the interior face graph.
//!
//! All operators are pure: they read their inputs and return fresh values.
//! Per-cell results are gathered through the grid's neighbor lists, so every
//! output entry is written by exactly one task.

use crate::fields::ScalarField;
use crate::geometry::Grid;
use crate::par;

/// One value per interior face, oriented from the face's `first` cell to its
/// `second` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceValues {
    pub values: Vec<f64>,
}

impl FaceValues {
    /// Net amount entering each cell per unit time when the values are
    /// fluxes: `+flux` for the `second` cell and `-flux` for the `first`.
    pub fn net_inflow(&self, grid: &Grid) -> Vec<f64> {
        let flux = &self.values;
        par::map_indexed(grid.num_active(), |c| {
            grid.links(c)
                .iter()
                .map(|l| -l.orientation * flux[l.face])
                .sum()
        })
    }
}

/// Neumann Laplacian written into `out`.
pub fn laplacian_into(grid: &Grid, f: &[f64], out: &mut [f64]) {
    par::fill_indexed(out, |c| {
        let fc = f[c];
        grid.links(c)
            .iter()
            .map(|l| grid.coupling(grid.faces()[l.face].axis) * (f[l.neighbor] - fc))
            .sum()
    });
}

/// `(1/V_c) * sum_f A_f (f_nb - f_c) / h`; boundary faces contribute nothing.
pub fn laplacian_apply(grid: &Grid, f: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; grid.num_active()];
    laplacian_into(grid, f.values(), &mut out);
    f.with_values(out)
}

/// Two-point gradient `(f_second - f_first) / h` on each interior face.
pub fn grad_on_faces(grid: &Grid, f: &ScalarField) -> FaceValues {
    let faces = grid.faces();
    let vals = f.values();
    let values = par::map_indexed(faces.len(), |i| {
        let face = faces[i];
        (vals[face.second] - vals[face.first]) / grid.spacing()[face.axis]
    });
    FaceValues { values }
}

/// Taxis velocity `chi * grad(v) - xi * grad(w)` on each interior face.
pub fn face_velocities(
    grid: &Grid,
    v: &ScalarField,
    w: Option<&ScalarField>,
    chi: f64,
    xi: f64,
) -> FaceValues {
    let faces = grid.faces();
    let vv = v.values();
    let wv = w.map(|w| w.values());
    let values = par::map_indexed(faces.len(), |i| {
        let face = faces[i];
        let h = grid.spacing()[face.axis];
        let attract = chi * ((vv[face.second] - vv[face.first]) / h);
        match wv {
            Some(wv) => attract - xi * ((wv[face.second] - wv[face.first]) / h),
            None => attract,
        }
    });
    FaceValues { values }
}

/// Donor-cell fluxes `A_f * V_f * u_donor` for the given face velocities.
pub fn upwind_fluxes(grid: &Grid, u: &ScalarField, velocity: &FaceValues) -> FaceValues {
    let faces = grid.faces();
    let uv = u.values();
    let vel = &velocity.values;
    let values = par::map_indexed(faces.len(), |i| {
        let face = faces[i];
        let speed = vel[i];
        let donor = if speed > 0.0 { face.first } else { face.second };
        grid.face_area(face.axis) * speed * uv[donor]
    });
    FaceValues { values }
}

/// Upwinded `-div(u V)` with `V = chi grad v - xi grad w` (w term dropped
/// when `w` is absent).
pub fn taxis_divergence(
    grid: &Grid,
    u: &ScalarField,
    v: &ScalarField,
    w: Option<&ScalarField>,
    chi: f64,
    xi: f64,
) -> ScalarField {
    let velocity = face_velocities(grid, v, w, chi, xi);
    let fluxes = upwind_fluxes(grid, u, &velocity);
    let inv_vol = 1.0 / grid.cell_volume();
    let mut net = fluxes.net_inflow(grid);
    net.iter_mut().for_each(|x| *x *= inv_vol);
    u.with_values(net)
}

/// Largest explicit taxis step that keeps the donor-cell update monotone:
/// `h / (2 dim max|V_f|)`, `+inf` when every velocity vanishes.
pub fn cfl_max_dt(grid: &Grid, v: &ScalarField, w: Option<&ScalarField>, chi: f64, xi: f64) -> f64 {
    let velocity = face_velocities(grid, v, w, chi, xi);
    cfl_from_velocities(grid, &velocity)
}

pub fn cfl_from_velocities(grid: &Grid, velocity: &FaceValues) -> f64 {
    let vel = &velocity.values;
    let vmax = par::max_indexed(vel.len(), |i| vel[i].abs());
    if vmax > 0.0 {
        grid.min_spacing() / (2.0 * grid.dim() as f64 * vmax)
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};
    use std::sync::Arc;

    fn unit_spacing_box(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::boxed(&[0.0, 0.0], &[n as f64, n as f64]), &[n, n]).unwrap())
    }

    /// Two active cells side by side along x with spacing `h`, cut out of a
    /// 3x3 box by a disk centered between them.
    fn pair(h: f64) -> Arc<Grid> {
        let spec = DomainSpec {
            kind: crate::geometry::DomainKind::Disk,
            lower: vec![0.0, 0.0],
            upper: vec![3.0 * h, 3.0 * h],
            center: Some(vec![h, 1.5 * h]),
            radius: Some(0.55 * h),
        };
        let g = build_grid(&spec, &[3, 3]).unwrap();
        assert_eq!(g.num_active(), 2);
        assert_eq!(g.faces().len(), 1);
        Arc::new(g)
    }

    fn field(g: &Arc<Grid>, v: &[f64]) -> ScalarField {
        ScalarField::from_values(Arc::clone(g), v.to_vec()).unwrap()
    }

    #[test]
    fn laplacian_of_constant_is_zero() {
        let g = Arc::new(build_grid(&DomainSpec::disk([0.0, 0.0], 1.0), &[15, 15]).unwrap());
        let l = laplacian_apply(&g, &ScalarField::constant(Arc::clone(&g), 3.7));
        assert!(l.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_point_source_stencil() {
        let g = unit_spacing_box(3);
        let mut vals = vec![0.0; 9];
        vals[g.active_index([1, 1, 0]).unwrap()] = 1.0;
        let l = laplacian_apply(&g, &field(&g, &vals));
        let at = |i, j| l.values()[g.active_index([i, j, 0]).unwrap()];
        assert_eq!(at(1, 1), -4.0);
        for (i, j) in [(0, 1), (2, 1), (1, 0), (1, 2)] {
            assert_eq!(at(i, j), 1.0);
        }
        for (i, j) in [(0, 0), (2, 0), (0, 2), (2, 2)] {
            assert_eq!(at(i, j), 0.0);
        }
    }

    #[test]
    fn laplacian_on_masked_pair() {
        let g = pair(0.5);
        let l = laplacian_apply(&g, &field(&g, &[0.0, 1.0]));
        assert_eq!(l.values(), &[4.0, -4.0]);
    }

    #[test]
    fn gradients() {
        let g = unit_spacing_box(4);
        let zero = grad_on_faces(&g, &ScalarField::constant(Arc::clone(&g), 2.0));
        assert!(zero.values.iter().all(|&x| x == 0.0));
        let xs: Vec<f64> = (0..g.num_active()).map(|c| g.center(c)[0]).collect();
        let grad = grad_on_faces(&g, &field(&g, &xs));
        for (face, value) in g.faces().iter().zip(&grad.values) {
            assert_eq!(*value, if face.axis == 0 { 1.0 } else { 0.0 });
        }
        let p = pair(0.25);
        assert_eq!(grad_on_faces(&p, &field(&p, &[0.0, 1.0])).values, vec![4.0]);
    }

    #[test]
    fn taxis_divergence_special_cases() {
        let g = Arc::new(build_grid(&DomainSpec::disk([0.0, 0.0], 1.0), &[12, 12]).unwrap());
        let xs: Vec<f64> = (0..g.num_active()).map(|c| g.center(c)[0].powi(2) + g.center(c)[1]).collect();
        let u = field(&g, &xs.iter().map(|x| x.abs() + 1.0).collect::<Vec<_>>());
        let v = field(&g, &xs);
        let zero = taxis_divergence(&g, &u, &v, Some(&v), 0.0, 0.0);
        assert!(zero.values().iter().all(|&x| x == 0.0));
        let cancel = taxis_divergence(&g, &u, &v, Some(&v.clone()), 7.0, 7.0);
        assert!(cancel.values().iter().all(|&x| x == 0.0));
        assert_eq!(cfl_max_dt(&g, &v, Some(&v), 7.0, 7.0), f64::INFINITY);
        assert_eq!(cfl_max_dt(&g, &v, None, 0.0, 0.0), f64::INFINITY);
    }

    #[test]
    fn donor_cell_on_pair() {
        // h = 1: A = 1 and V = 1 in 2D.
        let g = pair(1.0);
        let div = taxis_divergence(&g, &field(&g, &[1.0, 0.0]), &field(&g, &[0.0, 1.0]), None, 1.0, 0.0);
        assert_eq!(div.values(), &[-1.0, 1.0]);
        // Velocity pointing the other way draws from cell 2, which is empty.
        let back = taxis_divergence(&g, &field(&g, &[1.0, 0.0]), &field(&g, &[1.0, 0.0]), None, 1.0, 0.0);
        assert_eq!(back.values(), &[0.0, 0.0]);
    }

    #[test]
    fn cfl_formula() {
        // v = 10 x on spacing 0.01 gives |V| = 10 with chi = 1.
        let g = Arc::new(build_grid(&DomainSpec::boxed(&[0.0, 0.0], &[0.1, 0.1]), &[10, 10]).unwrap());
        let v: Vec<f64> = (0..g.num_active()).map(|c| 10.0 * g.center(c)[0]).collect();
        let dt = cfl_max_dt(&g, &field(&g, &v), None, 1.0, 0.0);
        assert!((dt - 2.5e-4).abs() < 1e-12, "{dt}");
    }
}
