//! Inter-block ghost exchange.
//!
//! Four strategies share one pipeline: pack, post non-blocking sends and
//! receives, wait, unpack. They differ only in how many messages cross each
//! face, how many layers of each variable travel, and whether the copy walks
//! memory row-wise (packed) or element by element (strided). All of them
//! leave the ghost layers the residual actually reads (two of p, one of
//! everything else) bitwise identical.
//!
//! Ghost corners and edges are never exchanged: every stencil in the scheme
//! is axis-aligned.

mod exchange;
mod plan;

use thiserror::Error;

use crate::decomp::{BlockMap, NeighborTable};
use crate::mesh::{interior_box, Box3, Face, FieldSet, MeshError, Side, Var, GHOST};
use crate::scalar::Real;
use crate::transport::{Transport, TransportError};

pub use exchange::{ExchangeFault, Exchanger};
pub use plan::{
    build_plan, decode_tag, message_tag, ExchangePlan, FacePlan, MessageSpec, Part, Strategy, PACKED_GROUP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExchangeError {
    #[error("rank {rank} stalled waiting on {waiting:?}")]
    Stalled { rank: usize, waiting: Vec<String> },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("exchange finished without a matching begin")]
    NotStarted,
    #[error("exchange begun twice without finishing")]
    AlreadyInFlight,
    #[error("unknown exchange strategy {0:?}")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaceTraffic {
    pub bytes: u64,
    pub messages: u64,
}

/// Cumulative halo traffic sent by one rank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ByteLedger {
    pub per_face: [FaceTraffic; 6],
    pub exchanges: u64,
}

impl ByteLedger {
    pub fn record(&mut self, face: Face, bytes: u64) {
        let slot = &mut self.per_face[face.id()];
        slot.bytes += bytes;
        slot.messages += 1;
    }

    pub fn bytes(&self) -> u64 {
        self.per_face.iter().map(|f| f.bytes).sum()
    }

    pub fn messages(&self) -> u64 {
        self.per_face.iter().map(|f| f.messages).sum()
    }

    /// Average traffic of a single exchange.
    pub fn per_exchange(&self) -> ByteLedger {
        let e = self.exchanges.max(1);
        ByteLedger {
            per_face: self.per_face.map(|f| FaceTraffic { bytes: f.bytes / e, messages: f.messages / e }),
            exchanges: 1,
        }
    }

    pub fn merge(&mut self, other: &ByteLedger) {
        for (a, b) in self.per_face.iter_mut().zip(other.per_face.iter()) {
            a.bytes += b.bytes;
            a.messages += b.messages;
        }
        self.exchanges = self.exchanges.max(other.exchanges);
    }
}

/// Split of a block's interior for overlapping communication with computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapRegions {
    /// Nodes at least two layers from every inter-block face.
    pub internal: Box3,
    /// Disjoint boxes covering the rest of the interior.
    pub external: Vec<Box3>,
}

impl OverlapRegions {
    pub fn internal_count(&self) -> usize {
        self.internal.count()
    }

    pub fn external_count(&self) -> usize {
        self.external.iter().map(Box3::count).sum()
    }
}

/// Internal core and external shell of a block with interior extents `n`.
///
/// A block too thin to have a core gets an empty internal box and the whole
/// interior as external shell.
pub fn compute_overlap_regions(n: [usize; 3], table: &NeighborTable) -> OverlapRegions {
    let full = interior_box(n);
    let mut core = full;
    for face in crate::mesh::Face::ALL {
        if table.is_wall(face) {
            continue;
        }
        let a = face.axis.index();
        match face.side {
            Side::Low => core.lo[a] += GHOST,
            Side::High => core.hi[a] = core.hi[a].saturating_sub(GHOST),
        }
    }
    if (0..3).any(|a| core.lo[a] >= core.hi[a]) {
        return OverlapRegions { internal: Box3::new(full.lo, full.lo), external: vec![full] };
    }
    // Peel the shell: k slabs over the full i-j extent, then j slabs inside
    // the core's k range, then i slabs inside the core's j-k range.
    let mut external = Vec::new();
    let mut bounds = full;
    for a in (0..3).rev() {
        let mut below = bounds;
        below.hi[a] = core.lo[a];
        let mut above = bounds;
        above.lo[a] = core.hi[a];
        external.extend([below, above].into_iter().filter(|b| !b.is_empty()));
        bounds.lo[a] = core.lo[a];
        bounds.hi[a] = core.hi[a];
    }
    OverlapRegions { internal: core, external }
}

/// Pressure at the global pinning node, identical on every rank.
pub fn center_pressure_broadcast<T: Real, C: Transport>(
    fields: &FieldSet<T>,
    map: &BlockMap<T>,
    transport: &mut C,
) -> Result<T, ExchangeError> {
    let owner = map.center_owner();
    let local = if transport.rank() == owner {
        let c = map.center_node();
        let start = map.extents[owner].start;
        let at: [usize; 3] = std::array::from_fn(|a| c[a] - start[a] + GHOST);
        vec![fields[Var::P].get(at[0], at[1], at[2])]
    } else {
        Vec::new()
    };
    if transport.size() == 1 {
        return Ok(local[0]);
    }
    let got = transport.broadcast(owner, local)?;
    Ok(got[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{Neighbor, NeighborTable};
    use crate::mesh::Axis;

    fn table_with(faces: &[Face]) -> NeighborTable {
        let mut t = NeighborTable::all_walls();
        for f in faces {
            t.0[f.id()] = Neighbor::Rank(1);
        }
        t
    }

    #[test]
    fn all_walls_core_is_whole_interior() {
        let r = compute_overlap_regions([9, 8, 7], &NeighborTable::all_walls());
        assert_eq!(r.internal_count(), 9 * 8 * 7);
        assert!(r.external.is_empty());
    }

    #[test]
    fn all_inter_block_128() {
        let r = compute_overlap_regions([128; 3], &table_with(&Face::ALL));
        assert_eq!(r.internal_count(), 124 * 124 * 124);
        assert_eq!(r.internal_count() + r.external_count(), 128 * 128 * 128);
    }

    #[test]
    fn single_k_face() {
        let n = 11;
        let r = compute_overlap_regions([n; 3], &table_with(&[Face::new(Axis::K, Side::High)]));
        assert_eq!(r.internal_count(), n * n * (n - 2));
    }

    #[test]
    fn thin_block_two_faces() {
        let faces = [Face::new(Axis::J, Side::Low), Face::new(Axis::J, Side::High)];
        let r = compute_overlap_regions([5; 3], &table_with(&faces));
        assert_eq!(r.internal_count(), 5 * 5);
        let r = compute_overlap_regions([5, 4, 5], &table_with(&faces));
        assert_eq!(r.internal_count(), 0);
        assert_eq!(r.external_count(), 5 * 4 * 5);
    }

    #[test]
    fn ledger_arithmetic() {
        let mut l = ByteLedger::default();
        l.record(Face::ALL[1], 80);
        l.record(Face::ALL[1], 80);
        l.record(Face::ALL[4], 16);
        l.exchanges = 2;
        assert_eq!(l.bytes(), 176);
        assert_eq!(l.messages(), 3);
        assert_eq!(l.per_exchange().per_face[1], FaceTraffic { bytes: 80, messages: 1 });
    }
}
