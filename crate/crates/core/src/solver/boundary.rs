//! Physical wall conditions written into the ghost layers.
//!
//! Walls sit half a spacing outside the first interior node. Along the wall
//! normal, `m1, m2, m3` are the first three interior nodes counted from the
//! wall and `g1, g2` the ghosts (g1 adjacent).
//!
//! * velocity, no-slip: `g_d = -m_d`
//! * temperature, isothermal x-walls: `g_d = 2 T_wall - m_d`
//! * temperature, adiabatic walls: `g_d = m_d`
//! * pressure, every wall: `g1 = 3 m1 - 3 m2 + m3`, `g2 = 3 g1 - 3 m1 + m2`

use crate::decomp::NeighborTable;
use crate::mesh::{interior_box, Axis, Face, Field3, FieldSet, Side, Var, GHOST};
use crate::scalar::Real;

use super::FluidParams;

/// Thermal condition of a wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WallKind<T> {
    Isothermal(T),
    Adiabatic,
}

impl<T: Real> WallKind<T> {
    /// Hot wall at x = 0, cold wall at x = L, all others adiabatic.
    pub fn for_face(face: Face, params: &FluidParams<T>) -> Self {
        match (face.axis, face.side) {
            (Axis::I, Side::Low) => WallKind::Isothermal(params.t_hot),
            (Axis::I, Side::High) => WallKind::Isothermal(params.t_cold),
            _ => WallKind::Adiabatic,
        }
    }
}

/// Storage indices `[m1, m2, m3, g1, g2]` along the normal of `face`.
fn normal_indices(n: usize, side: Side) -> [usize; 5] {
    match side {
        Side::Low => [GHOST, GHOST + 1, GHOST + 2, GHOST - 1, GHOST - 2],
        Side::High => {
            let last = n + GHOST - 1;
            [last, last - 1, last - 2, last + 1, last + 2]
        }
    }
}

fn fill_wall<T: Real>(field: &mut Field3<T>, face: Face, rule: impl Fn(T, T, T) -> (T, T)) {
    let n = field.n();
    let a = face.axis.index();
    let [m1, m2, m3, g1, g2] = normal_indices(n[a], face.side);
    let mut plane = interior_box(n);
    plane.lo[a] = 0;
    plane.hi[a] = 1;
    plane.for_each(|i, j, k| {
        let at = |m: usize| {
            let mut c = [i, j, k];
            c[a] = m;
            c
        };
        let [x1, x2, x3] = [m1, m2, m3].map(|m| {
            let c = at(m);
            field.get(c[0], c[1], c[2])
        });
        let (y1, y2) = rule(x1, x2, x3);
        let c = at(g1);
        field.set(c[0], c[1], c[2], y1);
        let c = at(g2);
        field.set(c[0], c[1], c[2], y2);
    });
}

/// Fills the ghost layers of every wall face of `walls`; inter-block faces
/// are left for the halo exchange.
pub fn apply_boundary_conditions<T: Real>(
    fields: &mut FieldSet<T>,
    walls: &NeighborTable,
    params: &FluidParams<T>,
) {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    for face in Face::ALL.into_iter().filter(|&f| walls.is_wall(f)) {
        for var in Var::VELOCITY {
            fill_wall(&mut fields[var], face, |m1, m2, _| (-m1, -m2));
        }
        match WallKind::for_face(face, params) {
            WallKind::Isothermal(tw) => {
                fill_wall(&mut fields[Var::T], face, |m1, m2, _| (two * tw - m1, two * tw - m2))
            }
            WallKind::Adiabatic => fill_wall(&mut fields[Var::T], face, |m1, m2, _| (m1, m2)),
        }
        fill_wall(&mut fields[Var::P], face, |m1, m2, m3| {
            let g1 = three * m1 - three * m2 + m3;
            (g1, three * g1 - three * m1 + m2)
        });
    }
}
