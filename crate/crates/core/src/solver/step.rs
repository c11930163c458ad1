use crate::mesh::{interior_box, Axis, Box3, FieldSet, Var};
use crate::scalar::Real;

use super::residual::compute_beta;
use super::{FluidParams, SolverError};

/// Stable explicit step: `cfl` times the smallest of the convective limit
/// `Δ_a / (|V_a| + β)` over axes and nodes and the diffusive limits
/// `Δ_min² / 6ν`, `Δ_min² / 6α`.
pub fn compute_dt<T: Real>(
    fields: &FieldSet<T>,
    params: &FluidParams<T>,
    cfl: T,
) -> Result<T, SolverError> {
    let h = fields.grid().spacing();
    let hmin = h.iter().copied().fold(T::infinity(), T::min);
    let six = T::lit(6.0);
    let mut limit = (hmin * hmin / (six * params.nu)).min(hmin * hmin / (six * params.alpha));
    let (u, v, w) = (&fields[Var::U], &fields[Var::V], &fields[Var::W]);
    let (p, t) = (&fields[Var::P], &fields[Var::T]);
    let mut finite = true;
    interior_box(fields.grid().n()).for_each(|i, j, k| {
        let vel = [u.get(i, j, k), v.get(i, j, k), w.get(i, j, k)];
        finite &= vel.iter().all(|x| x.is_finite());
        finite &= p.get(i, j, k).is_finite() && t.get(i, j, k).is_finite();
        let beta = compute_beta(vel[0], vel[1], vel[2], params.u_ref);
        for a in Axis::ALL {
            let c = h[a.index()] / (vel[a.index()].abs() + beta);
            limit = limit.min(c);
        }
    });
    if !finite || !limit.is_finite() {
        return Err(SolverError::NonFinite("time step"));
    }
    Ok(cfl * limit)
}

/// `q += dt R` at the nodes of `region` for every variable.
pub fn euler_step_region<T: Real>(fields: &mut FieldSet<T>, residuals: &FieldSet<T>, dt: T, region: &Box3) {
    for var in Var::ALL {
        let r = &residuals[var];
        let q = &mut fields[var];
        region.for_each(|i, j, k| {
            let id = q.idx(i, j, k);
            q.as_mut_slice()[id] = q.as_slice()[id] + dt * r.as_slice()[id];
        });
    }
}

/// Forward Euler update of the interior; ghosts untouched.
pub fn euler_step<T: Real>(fields: &mut FieldSet<T>, residuals: &FieldSet<T>, dt: T) {
    let region = interior_box(fields.grid().n());
    euler_step_region(fields, residuals, dt, &region);
}

/// Shifts interior pressure so the cavity centre reads zero.
pub fn rescale_pressure<T: Real>(fields: &mut FieldSet<T>, p_center: T) {
    let p = &mut fields[Var::P];
    interior_box(p.n()).for_each(|i, j, k| {
        let id = p.idx(i, j, k);
        p.as_mut_slice()[id] = p.as_slice()[id] - p_center;
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid3;

    #[test]
    fn quiescent_dt_is_convective() {
        let g = Grid3::with_spacing([32; 3], [0.05 / 31.0; 3]).unwrap();
        let mut params = FluidParams::<f64>::cavity();
        params.u_ref = 1.0;
        params.nu = 1e-12;
        params.alpha = 1e-12;
        let f = FieldSet::new(g);
        let dt = compute_dt(&f, &params, 0.8).unwrap();
        assert_eq!(dt, 0.8 * (0.05 / 31.0) / 1.0);
        assert_eq!(compute_dt(&f, &params, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn nan_velocity_is_an_error() {
        let g = Grid3::cube(5, 1.0).unwrap();
        let mut f = FieldSet::<f64>::new(g);
        f[Var::U].set(3, 3, 3, f64::NAN);
        assert!(matches!(
            compute_dt(&f, &FluidParams::cavity(), 0.8),
            Err(SolverError::NonFinite(_))
        ));
    }

    #[test]
    fn euler_arithmetic() {
        let g = Grid3::cube(5, 1.0).unwrap();
        let mut f = FieldSet::<f64>::new(g);
        f[Var::T].fill(1.0);
        let before = f.clone();
        let mut r = FieldSet::new(g);
        euler_step(&mut f, &r, 0.7);
        assert_eq!(f, before);
        r[Var::P].fill(2.0);
        euler_step(&mut f, &r, 0.0);
        assert_eq!(f, before);
        euler_step(&mut f, &r, 0.5);
        assert_eq!(f[Var::P].get(2, 2, 2), 1.0);
        // ghosts untouched
        assert_eq!(f[Var::P].get(1, 2, 2), 0.0);
    }

    #[test]
    fn rescale_pins_and_is_idempotent() {
        let g = Grid3::cube(5, 1.0).unwrap();
        let mut f = FieldSet::<f64>::new(g);
        f[Var::P].fill_interior(7.0);
        rescale_pressure(&mut f, 7.0);
        interior_box(g.n()).for_each(|i, j, k| assert_eq!(f[Var::P].get(i, j, k), 0.0));
        let c = f[Var::P].get(4, 4, 4);
        let once = f.clone();
        rescale_pressure(&mut f, c);
        assert_eq!(f, once);
    }
}
