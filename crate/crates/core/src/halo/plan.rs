use std::fmt;
use std::str::FromStr;

use crate::decomp::{BlockExtent, NeighborTable};
use crate::mesh::{face_ghost_box, face_interior_box, transverse_area, Axis, Box3, Face, Var};
use crate::transport::Tag;

use super::ExchangeError;

/// Ghost-exchange strategy, from the naive port to fully packed messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// One strided message per variable and face, two layers of everything.
    Baseline,
    /// i-faces packed into one buffer; j/k faces as in Baseline.
    V1,
    /// V1 with stencil-sized depths: two layers of p, one of u, v, w, T.
    V2,
    /// V2 with packed buffers on every decomposed axis.
    V3,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Baseline, Strategy::V1, Strategy::V2, Strategy::V3];

    /// Exchange depth of `var`.
    pub fn depth(self, var: Var) -> usize {
        match (self, var) {
            (Strategy::Baseline | Strategy::V1, _) | (_, Var::P) => 2,
            _ => 1,
        }
    }

    /// Whether faces normal to `axis` travel as one packed buffer.
    pub fn packs(self, axis: Axis) -> bool {
        match self {
            Strategy::Baseline => false,
            Strategy::V1 | Strategy::V2 => axis == Axis::I,
            Strategy::V3 => true,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Baseline => "baseline",
            Strategy::V1 => "v1",
            Strategy::V2 => "v2",
            Strategy::V3 => "v3",
        })
    }
}

impl FromStr for Strategy {
    type Err = ExchangeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" => Ok(Strategy::Baseline),
            "v1" => Ok(Strategy::V1),
            "v2" => Ok(Strategy::V2),
            "v3" => Ok(Strategy::V3),
            _ => Err(ExchangeError::UnknownStrategy(s.to_owned())),
        }
    }
}

/// Variable group of a packed message in the tag scheme.
pub const PACKED_GROUP: u32 = 7;

/// `face_id * 8 + group`, where `face` is the sender's face.
pub fn message_tag(face: Face, group: u32) -> Tag {
    face.id() as Tag * 8 + group
}

/// Inverse of [`message_tag`].
pub fn decode_tag(tag: Tag) -> Option<(Face, u32)> {
    let face = *Face::ALL.get((tag / 8) as usize)?;
    Some((face, tag % 8))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Part {
    pub var: Var,
    pub depth: usize,
}

/// One message crossing a face in each direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageSpec {
    pub group: u32,
    pub parts: Vec<Part>,
    /// Packed buffers are filled row-wise; unpacked ones element by element.
    pub packed: bool,
    /// Scalars per message.
    pub len: usize,
}

impl MessageSpec {
    pub fn send_tag(&self, face: Face) -> Tag {
        message_tag(face, self.group)
    }

    /// The neighbour sends across its opposite face.
    pub fn recv_tag(&self, face: Face) -> Tag {
        message_tag(face.opposite(), self.group)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacePlan {
    pub face: Face,
    pub neighbor: usize,
    pub messages: Vec<MessageSpec>,
}

/// Everything a rank needs to refresh its inter-block ghosts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangePlan {
    pub strategy: Strategy,
    pub rank: usize,
    /// Interior extents of the block.
    pub n: [usize; 3],
    pub faces: Vec<FacePlan>,
}

impl ExchangePlan {
    pub fn send_region(&self, face: Face, part: Part) -> Box3 {
        face_interior_box(self.n, face, part.depth)
    }

    pub fn recv_region(&self, face: Face, part: Part) -> Box3 {
        face_ghost_box(self.n, face, part.depth)
    }

    /// Scalars this rank sends per exchange.
    pub fn scalars_sent(&self) -> usize {
        self.faces.iter().flat_map(|f| &f.messages).map(|m| m.len).sum()
    }

    pub fn messages_sent(&self) -> usize {
        self.faces.iter().map(|f| f.messages.len()).sum()
    }

    pub fn face(&self, face: Face) -> Option<&FacePlan> {
        self.faces.iter().find(|f| f.face == face)
    }
}

/// Lays out sends and receives for every inter-block face of one block.
pub fn build_plan(extent: &BlockExtent, table: &NeighborTable, strategy: Strategy) -> ExchangePlan {
    let n = extent.size();
    let faces = table
        .inter_block_faces()
        .map(|(face, neighbor)| {
            let area = transverse_area(n, face.axis);
            let part = |var| Part { var, depth: strategy.depth(var) };
            let messages = if strategy.packs(face.axis) {
                let parts: Vec<Part> = Var::ALL.iter().map(|&v| part(v)).collect();
                let len = parts.iter().map(|p| p.depth * area).sum();
                vec![MessageSpec { group: PACKED_GROUP, parts, packed: true, len }]
            } else {
                Var::ALL
                    .iter()
                    .map(|&v| {
                        let p = part(v);
                        MessageSpec { group: v.index() as u32, parts: vec![p], packed: false, len: p.depth * area }
                    })
                    .collect()
            };
            FacePlan { face, neighbor, messages }
        })
        .collect();
    ExchangePlan { strategy, rank: extent.rank, n, faces }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{neighbors, partition, Dims};
    use crate::mesh::Side;

    fn plan_for(n: [usize; 3], dims: Dims, rank: usize, s: Strategy) -> ExchangePlan {
        let ext = partition(n, dims).unwrap()[rank];
        build_plan(&ext, &neighbors(dims, rank).unwrap(), s)
    }

    #[test]
    fn per_face_volumes_for_128_blocks() {
        let v1 = plan_for([256; 3], Dims([2, 2, 2]), 0, Strategy::V1);
        let v2 = plan_for([256; 3], Dims([2, 2, 2]), 0, Strategy::V2);
        assert_eq!(v1.faces.len(), 3);
        for (a, b) in v1.faces.iter().zip(&v2.faces) {
            let s1: usize = a.messages.iter().map(|m| m.len).sum();
            let s2: usize = b.messages.iter().map(|m| m.len).sum();
            assert_eq!(s1, 2 * 128 * 128 * 5);
            assert_eq!(s2, 6 * 128 * 128);
            assert_eq!(s2 * 10, s1 * 6);
        }
    }

    #[test]
    fn single_rank_plan_is_empty() {
        let p = plan_for([32; 3], Dims([1, 1, 1]), 0, Strategy::V3);
        assert!(p.faces.is_empty());
        assert_eq!(p.scalars_sent(), 0);
    }

    #[test]
    fn message_counts_by_strategy() {
        let count = |s| plan_for([32; 3], Dims([2, 2, 2]), 0, s).messages_sent();
        assert_eq!(count(Strategy::Baseline), 15);
        assert_eq!(count(Strategy::V1), 11);
        assert_eq!(count(Strategy::V2), 11);
        assert_eq!(count(Strategy::V3), 3);
    }

    #[test]
    fn tags_are_unique_and_decodable() {
        let p = plan_for([32; 3], Dims([2, 2, 2]), 7, Strategy::Baseline);
        let mut tags: Vec<Tag> =
            p.faces.iter().flat_map(|f| f.messages.iter().map(move |m| m.send_tag(f.face))).collect();
        let total = tags.len();
        tags.sort_unstable();
        tags.dedup();
        assert_eq!(tags.len(), total);
        let f = Face::new(Axis::K, Side::Low);
        assert_eq!(decode_tag(message_tag(f, 3)), Some((f, 3)));
        assert_eq!(decode_tag(99), None);
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("v4".parse::<Strategy>().is_err());
    }
}
