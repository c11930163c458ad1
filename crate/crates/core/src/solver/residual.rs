//! Steady-state residuals of the artificial compressibility system.
//!
//! At every interior node
//!
//! ```text
//! R_p   = -β² (ρ ∇·V + Σ_a ε_a D⁴_a p),      ε_a = κ Δ_a³ / u_ref
//! R_Vj  = -(V·∇) V_j - ∂_j p / ρ + ν ∇² V_j + σ (T - T∞) g_j
//! R_T   = -(V·∇) T + α ∇² T
//! ```
//!
//! with second-order central first and second differences and the five-point
//! fourth difference `D⁴`. Only axis-aligned neighbours are read: one ghost
//! layer for the velocities and temperature, two for pressure.
//!
//! `ε_a` is constant per axis. With the wall closures both `Σ ∇·V` and
//! `Σ D⁴ p` vanish over the cavity, so a steady state with `R_p = 0` exists;
//! a node-dependent `ε` would break that and leave a uniform pressure drift.

use crate::mesh::{interior_box, Axis, Box3, Field3, FieldSet, Var};
use crate::scalar::Real;

use super::FluidParams;

/// Artificial compressibility speed: the local speed floored at `u_ref`.
#[inline]
pub fn compute_beta<T: Real>(u: T, v: T, w: T, u_ref: T) -> T {
    (u * u + v * v + w * w).sqrt().max(u_ref)
}

/// Five-point fourth difference of `p` along `axis` at storage index `(i, j, k)`.
pub fn fourth_difference<T: Real>(
    p: &Field3<T>,
    axis: Axis,
    i: usize,
    j: usize,
    k: usize,
    spacing: T,
) -> T {
    let s = p.stride(axis);
    let id = p.idx(i, j, k);
    let d = p.as_slice();
    stencil4(d, id, s) / spacing.powi(4)
}

#[inline(always)]
fn stencil4<T: Real>(d: &[T], id: usize, s: usize) -> T {
    let four = T::lit(4.0);
    let six = T::lit(6.0);
    d[id - 2 * s] - four * d[id - s] + six * d[id] - four * d[id + s] + d[id + 2 * s]
}

/// Residuals over the whole interior.
pub fn compute_residual<T: Real>(fields: &FieldSet<T>, params: &FluidParams<T>, out: &mut FieldSet<T>) {
    let region = interior_box(fields.grid().n());
    compute_residual_region(fields, params, &region, out);
}

/// Residuals at the nodes of `region` only; other entries of `out` untouched.
pub fn compute_residual_region<T: Real>(
    fields: &FieldSet<T>,
    params: &FluidParams<T>,
    region: &Box3,
    out: &mut FieldSet<T>,
) {
    if region.is_empty() {
        return;
    }
    let pf = &fields[Var::P];
    let sx = pf.stride(Axis::I);
    let sy = pf.stride(Axis::J);
    let sz = pf.stride(Axis::K);
    let [hx, hy, hz] = fields.grid().spacing();

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let (cx, cy, cz) = (half / hx, half / hy, half / hz);
    let (lx, ly, lz) = (T::one() / (hx * hx), T::one() / (hy * hy), T::one() / (hz * hz));
    let (qx, qy, qz) = (lx * lx, ly * ly, lz * lz);
    let kr = params.dissipation / params.u_ref;
    let (ex, ey, ez) = (kr * hx * hx * hx, kr * hy * hy * hy, kr * hz * hz * hz);
    let inv_rho = T::one() / params.rho;
    let [gx, gy, gz] = params.g;

    let p = pf.as_slice();
    let u = fields[Var::U].as_slice();
    let v = fields[Var::V].as_slice();
    let w = fields[Var::W].as_slice();
    let t = fields[Var::T].as_slice();

    let [rp, ru, rv, rw, rt] = out.fields_mut();
    let (rp, ru, rv, rw, rt) = (
        rp.as_mut_slice(),
        ru.as_mut_slice(),
        rv.as_mut_slice(),
        rw.as_mut_slice(),
        rt.as_mut_slice(),
    );

    let d1 = |f: &[T], id: usize| {
        (
            (f[id + sx] - f[id - sx]) * cx,
            (f[id + sy] - f[id - sy]) * cy,
            (f[id + sz] - f[id - sz]) * cz,
        )
    };
    let lap = |f: &[T], id: usize| {
        let c = two * f[id];
        (f[id + sx] - c + f[id - sx]) * lx
            + (f[id + sy] - c + f[id - sy]) * ly
            + (f[id + sz] - c + f[id - sz]) * lz
    };

    for k in region.lo[2]..region.hi[2] {
        for j in region.lo[1]..region.hi[1] {
            let row = pf.idx(0, j, k);
            for i in region.lo[0]..region.hi[0] {
                let id = row + i;
                let (u0, v0, w0) = (u[id], v[id], w[id]);
                let beta = compute_beta(u0, v0, w0, params.u_ref);

                let (dudx, dudy, dudz) = d1(u, id);
                let (dvdx, dvdy, dvdz) = d1(v, id);
                let (dwdx, dwdy, dwdz) = d1(w, id);
                let (dpdx, dpdy, dpdz) = d1(p, id);
                let (dtdx, dtdy, dtdz) = d1(t, id);

                let div = dudx + dvdy + dwdz;
                let damping = ex * stencil4(p, id, sx) * qx
                    + ey * stencil4(p, id, sy) * qy
                    + ez * stencil4(p, id, sz) * qz;
                rp[id] = -(beta * beta) * (params.rho * div + damping);

                let buoy = params.sigma * (t[id] - params.t_inf);
                ru[id] = -(u0 * dudx + v0 * dudy + w0 * dudz) - inv_rho * dpdx
                    + params.nu * lap(u, id)
                    + buoy * gx;
                rv[id] = -(u0 * dvdx + v0 * dvdy + w0 * dvdz) - inv_rho * dpdy
                    + params.nu * lap(v, id)
                    + buoy * gy;
                rw[id] = -(u0 * dwdx + v0 * dwdy + w0 * dwdz) - inv_rho * dpdz
                    + params.nu * lap(w, id)
                    + buoy * gz;
                rt[id] = -(u0 * dtdx + v0 * dtdy + w0 * dtdz) + params.alpha * lap(t, id);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Grid3;

    #[test]
    fn beta_floor_and_magnitude() {
        assert_eq!(compute_beta(0.0, 0.0, 0.0, 1.0), 1.0);
        assert_eq!(compute_beta(3.0, 4.0, 0.0, 1.0), 5.0);
        assert_eq!(compute_beta(0.1, 0.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn fourth_difference_on_polynomials() {
        let n = [9; 3];
        let h = 0.5;
        for axis in Axis::ALL {
            let coord = |i: usize, j: usize, k: usize| [i, j, k][axis.index()] as f64 * h;
            let lin = Field3::from_fn(n, |i, j, k| 3.0 * coord(i, j, k) - 1.0);
            let quartic = Field3::from_fn(n, |i, j, k| coord(i, j, k).powi(4));
            let c = Field3::filled(n, 2.5);
            interior_box(n).for_each(|i, j, k| {
                assert_eq!(fourth_difference(&lin, axis, i, j, k, h), 0.0);
                assert_eq!(fourth_difference(&c, axis, i, j, k, h), 0.0);
                let q = fourth_difference(&quartic, axis, i, j, k, h);
                assert!((q - 24.0).abs() < 1e-9, "{q}");
            });
        }
    }

    #[test]
    fn quiescent_state_has_zero_residual() {
        let g = Grid3::cube(6, 0.05).unwrap();
        let params = FluidParams::<f64>::cavity();
        let mut f = FieldSet::new(g);
        f[Var::P].fill(3.0);
        f[Var::T].fill(params.t_inf);
        let mut r = FieldSet::new(g);
        r[Var::U].fill(9.0);
        compute_residual(&f, &params, &mut r);
        interior_box(g.n()).for_each(|i, j, k| {
            for var in Var::ALL {
                assert_eq!(r[var].get(i, j, k), 0.0);
            }
        });
    }

    #[test]
    fn linear_temperature_drives_only_w() {
        let g = Grid3::cube(7, 0.07).unwrap();
        let params = FluidParams::<f64>::cavity();
        let mut f = FieldSet::new(g);
        let h = g.spacing()[0];
        f[Var::T] = Field3::from_fn(g.n(), |i, _, _| params.t_inf + 2.0 * (i as f64 * h - 0.03));
        let mut r = FieldSet::new(g);
        compute_residual(&f, &params, &mut r);
        interior_box(g.n()).for_each(|i, j, k| {
            let expected = params.sigma * (f[Var::T].get(i, j, k) - params.t_inf) * params.g[2];
            assert_eq!(r[Var::W].get(i, j, k), expected);
            assert!(r[Var::T].get(i, j, k).abs() < 1e-9);
            for var in [Var::P, Var::U, Var::V] {
                assert_eq!(r[var].get(i, j, k), 0.0);
            }
        });
    }

    #[test]
    fn region_restricts_writes() {
        let g = Grid3::cube(6, 1.0).unwrap();
        let params = FluidParams::<f64>::cavity();
        let mut f = FieldSet::new(g);
        f[Var::T] = Field3::from_fn(g.n(), |i, j, k| (i * j + k) as f64);
        let mut r = FieldSet::new(g);
        for var in Var::ALL {
            r[var].fill(f64::NAN);
        }
        let region = Box3::new([3, 3, 3], [5, 4, 6]);
        compute_residual_region(&f, &params, &region, &mut r);
        interior_box(g.n()).for_each(|i, j, k| {
            let inside = region.contains([i, j, k]);
            assert_eq!(r[Var::T].get(i, j, k).is_nan(), !inside);
        });
    }
}
