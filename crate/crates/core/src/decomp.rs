//! Structured partitioning of the global grid into per-rank blocks.
//!
//! Ranks are laid out on a Cartesian process grid `(p_i, p_j, p_k)` and
//! decoded i-fastest, so rank `r` sits at `(r % p_i, (r / p_i) % p_j, r / (p_i p_j))`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mesh::{Axis, Face, Grid3, MeshError, Side, MIN_INTERIOR};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecompError {
    #[error("rank count must be at least 1")]
    NoRanks,
    #[error("dims {dims} do not describe a {mode} decomposition of {np} ranks; feasible: {feasible}")]
    InvalidDims { dims: Dims, mode: DecompMode, np: usize, feasible: String },
    #[error("block of rank {rank} has {size} nodes along {axis:?}, at least {MIN_INTERIOR} are required")]
    TooThin { rank: usize, axis: Axis, size: usize },
    #[error("rank {rank} out of range for {np} ranks")]
    RankOutOfRange { rank: usize, np: usize },
    #[error("growth type 1 is tabulated for powers of two only, got np = {0}")]
    NotPowerOfTwo(usize),
    #[error("unknown decomposition mode {0:?}")]
    UnknownMode(String),
    #[error("cannot parse process dims {0:?}, expected PIxPJxPK")]
    BadDims(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// How many index directions are split across ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecompMode {
    OneD(Axis),
    TwoD,
    ThreeD,
}

impl DecompMode {
    pub const ALL: [DecompMode; 5] = [
        DecompMode::OneD(Axis::I),
        DecompMode::OneD(Axis::J),
        DecompMode::OneD(Axis::K),
        DecompMode::TwoD,
        DecompMode::ThreeD,
    ];
}

impl fmt::Display for DecompMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecompMode::OneD(a) => write!(f, "1d-{}", a.name()),
            DecompMode::TwoD => f.write_str("2d"),
            DecompMode::ThreeD => f.write_str("3d"),
        }
    }
}

impl FromStr for DecompMode {
    type Err = DecompError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "1d-i" => Ok(DecompMode::OneD(Axis::I)),
            "1d-j" => Ok(DecompMode::OneD(Axis::J)),
            "1d-k" | "1d" => Ok(DecompMode::OneD(Axis::K)),
            "2d" => Ok(DecompMode::TwoD),
            "3d" => Ok(DecompMode::ThreeD),
            _ => Err(DecompError::UnknownMode(s.to_owned())),
        }
    }
}

/// Process-grid shape `(p_i, p_j, p_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims(pub [usize; 3]);

impl Dims {
    pub fn ranks(&self) -> usize {
        self.0.iter().product()
    }

    pub fn along(&self, axis: Axis) -> usize {
        self.0[axis.index()]
    }

    /// Whether `self` is a legal process grid for `mode`.
    pub fn fits(&self, mode: DecompMode) -> bool {
        let [pi, pj, pk] = self.0;
        match mode {
            DecompMode::OneD(a) => Axis::ALL.iter().all(|&b| b == a || self.along(b) == 1),
            DecompMode::TwoD => pi == 1,
            DecompMode::ThreeD => pi >= 1 && pj >= 1 && pk >= 1,
        }
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.0[0], self.0[1], self.0[2])
    }
}

impl FromStr for Dims {
    type Err = DecompError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<usize> = s
            .split(['x', 'X'])
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| DecompError::BadDims(s.to_owned()))?;
        match parts.as_slice() {
            &[a, b, c] if a > 0 && b > 0 && c > 0 => Ok(Dims([a, b, c])),
            _ => Err(DecompError::BadDims(s.to_owned())),
        }
    }
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut f = 2;
    while f * f <= n {
        while n.is_multiple_of(f) {
            out.push(f);
            n /= f;
        }
        f += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Factors `np` into a process grid for `mode`.
///
/// Prime factors are handed out largest first, each to the currently smallest
/// slot, ties going to k, then j, then i. The products are then ordered so
/// that `p_i <= p_j <= p_k`.
pub fn choose_dims(np: usize, mode: DecompMode) -> Result<Dims, DecompError> {
    if np == 0 {
        return Err(DecompError::NoRanks);
    }
    let axes: &[Axis] = match mode {
        DecompMode::OneD(a) => {
            let mut d = [1; 3];
            d[a.index()] = np;
            return Ok(Dims(d));
        }
        DecompMode::TwoD => &[Axis::J, Axis::K],
        DecompMode::ThreeD => &[Axis::I, Axis::J, Axis::K],
    };
    let mut factors = prime_factors(np);
    factors.sort_unstable_by(|a, b| b.cmp(a));
    let mut slots = vec![1usize; axes.len()];
    for f in factors {
        // Scan from the highest-priority slot so ties land on k first.
        let target = (0..slots.len()).rev().min_by_key(|&s| slots[s]).expect("non-empty");
        slots[target] *= f;
    }
    slots.sort_unstable();
    let mut d = [1; 3];
    for (axis, p) in axes.iter().zip(slots) {
        d[axis.index()] = p;
    }
    Ok(Dims(d))
}

/// Checks user-supplied dims against `np` and `mode`.
pub fn validate_dims(dims: Dims, np: usize, mode: DecompMode) -> Result<Dims, DecompError> {
    if dims.ranks() == np && dims.fits(mode) {
        return Ok(dims);
    }
    let feasible = DecompMode::ALL
        .iter()
        .filter_map(|&m| choose_dims(np, m).ok().map(|d| format!("{m}:{d}")))
        .collect::<Vec<_>>()
        .join(", ");
    Err(DecompError::InvalidDims { dims, mode, np, feasible })
}

/// Splits `n` nodes over `p` blocks; the lower blocks take the remainder.
/// Returns `(start, len)` per block.
pub fn split_axis(n: usize, p: usize) -> Vec<(usize, usize)> {
    let base = n / p;
    let extra = n % p;
    let mut start = 0;
    (0..p)
        .map(|b| {
            let len = base + usize::from(b < extra);
            let out = (start, len);
            start += len;
            out
        })
        .collect()
}

/// Global interior index range owned by one rank (inclusive on both ends).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockExtent {
    pub rank: usize,
    pub start: [usize; 3],
    pub end: [usize; 3],
}

impl BlockExtent {
    pub fn size(&self) -> [usize; 3] {
        std::array::from_fn(|a| self.end[a] + 1 - self.start[a])
    }

    pub fn volume(&self) -> usize {
        self.size().iter().product()
    }

    pub fn contains(&self, global: [usize; 3]) -> bool {
        (0..3).all(|a| global[a] >= self.start[a] && global[a] <= self.end[a])
    }
}

pub fn rank_coords(dims: Dims, rank: usize) -> [usize; 3] {
    let [pi, pj, _] = dims.0;
    [rank % pi, (rank / pi) % pj, rank / (pi * pj)]
}

pub fn coords_rank(dims: Dims, c: [usize; 3]) -> usize {
    let [pi, pj, _] = dims.0;
    c[0] + pi * (c[1] + pj * c[2])
}

/// Tiles the global interior `n` over `dims`, one extent per rank in rank order.
pub fn partition(n: [usize; 3], dims: Dims) -> Result<Vec<BlockExtent>, DecompError> {
    let splits: [Vec<(usize, usize)>; 3] = std::array::from_fn(|a| split_axis(n[a], dims.0[a]));
    (0..dims.ranks())
        .map(|rank| {
            let c = rank_coords(dims, rank);
            let mut start = [0; 3];
            let mut end = [0; 3];
            for axis in Axis::ALL {
                let a = axis.index();
                let (s, len) = splits[a][c[a]];
                if len < MIN_INTERIOR {
                    return Err(DecompError::TooThin { rank, axis, size: len });
                }
                start[a] = s;
                end[a] = s + len - 1;
            }
            Ok(BlockExtent { rank, start, end })
        })
        .collect()
}

/// What lies across one face of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Rank(usize),
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborTable(pub [Neighbor; 6]);

impl NeighborTable {
    pub fn get(&self, face: Face) -> Neighbor {
        self.0[face.id()]
    }

    pub fn is_wall(&self, face: Face) -> bool {
        self.get(face) == Neighbor::Wall
    }

    pub fn all_walls() -> Self {
        NeighborTable([Neighbor::Wall; 6])
    }

    /// Faces shared with another rank, in face-id order.
    pub fn inter_block_faces(&self) -> impl Iterator<Item = (Face, usize)> + '_ {
        Face::ALL.into_iter().filter_map(|f| match self.get(f) {
            Neighbor::Rank(r) => Some((f, r)),
            Neighbor::Wall => None,
        })
    }
}

/// Six-face neighbour table of `rank`; no periodic wrap.
pub fn neighbors(dims: Dims, rank: usize) -> Result<NeighborTable, DecompError> {
    let np = dims.ranks();
    if rank >= np {
        return Err(DecompError::RankOutOfRange { rank, np });
    }
    let c = rank_coords(dims, rank);
    Ok(NeighborTable(Face::ALL.map(|face| {
        let a = face.axis.index();
        let mut nc = c;
        match face.side {
            Side::Low if c[a] > 0 => nc[a] -= 1,
            Side::High if c[a] + 1 < dims.0[a] => nc[a] += 1,
            _ => return Neighbor::Wall,
        }
        Neighbor::Rank(coords_rank(dims, nc))
    })))
}

/// Global grid, process grid, per-rank extents and neighbour tables.
#[derive(Debug, Clone)]
pub struct BlockMap<T> {
    pub global: Grid3<T>,
    pub dims: Dims,
    pub extents: Vec<BlockExtent>,
    pub tables: Vec<NeighborTable>,
}

impl<T: Real> BlockMap<T> {
    pub fn new(global: Grid3<T>, dims: Dims) -> Result<Self, DecompError> {
        let extents = partition(global.n(), dims)?;
        let tables = (0..dims.ranks())
            .map(|r| neighbors(dims, r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BlockMap { global, dims, extents, tables })
    }

    pub fn ranks(&self) -> usize {
        self.extents.len()
    }

    /// Grid of one rank's block, sharing the global spacing.
    pub fn local_grid(&self, rank: usize) -> Result<Grid3<T>, DecompError> {
        Ok(Grid3::with_spacing(self.extents[rank].size(), self.global.spacing())?)
    }

    /// Global node at which pressure is pinned: `floor((N-1)/2)` per axis.
    pub fn center_node(&self) -> [usize; 3] {
        self.global.n().map(|m| (m - 1) / 2)
    }

    pub fn center_owner(&self) -> usize {
        let c = self.center_node();
        self.extents
            .iter()
            .find(|e| e.contains(c))
            .map(|e| e.rank)
            .expect("extents tile the global interior")
    }
}

/// Weak-scaling problem-size schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GrowthType {
    /// Same size sequence for every decomposition.
    Uniform,
    /// Size grows along the decomposed directions.
    FollowDims,
}

impl GrowthType {
    pub fn number(self) -> u8 {
        match self {
            GrowthType::Uniform => 1,
            GrowthType::FollowDims => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(GrowthType::Uniform),
            2 => Some(GrowthType::FollowDims),
            _ => None,
        }
    }
}

/// Global grid for `np` ranks under a weak-scaling schedule.
///
/// Type 2 multiplies `base` axis-wise by the process grid of `mode`, so the
/// per-rank volume is exactly `base`. Type 1 ignores `mode` and follows the
/// 3D sequence (k doubles first, then j, then i); it is defined for powers of
/// two only.
pub fn grow_grid(
    base: [usize; 3],
    np: usize,
    mode: DecompMode,
    growth: GrowthType,
) -> Result<[usize; 3], DecompError> {
    let dims = match growth {
        GrowthType::FollowDims => choose_dims(np, mode)?,
        GrowthType::Uniform => {
            if np == 0 {
                return Err(DecompError::NoRanks);
            }
            if !np.is_power_of_two() {
                return Err(DecompError::NotPowerOfTwo(np));
            }
            choose_dims(np, DecompMode::ThreeD)?
        }
    };
    Ok(std::array::from_fn(|a| base[a] * dims.0[a]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_of_two_dims_rows() {
        assert_eq!(choose_dims(8, DecompMode::ThreeD).unwrap(), Dims([2, 2, 2]));
        assert_eq!(choose_dims(4, DecompMode::ThreeD).unwrap(), Dims([1, 2, 2]));
        assert_eq!(choose_dims(8, DecompMode::TwoD).unwrap(), Dims([1, 2, 4]));
        for mode in DecompMode::ALL {
            assert_eq!(choose_dims(1, mode).unwrap(), Dims([1, 1, 1]));
        }
    }

    #[test]
    fn non_power_of_two_dims_stay_ordered() {
        assert_eq!(choose_dims(12, DecompMode::ThreeD).unwrap(), Dims([2, 2, 3]));
        assert_eq!(choose_dims(24, DecompMode::ThreeD).unwrap(), Dims([2, 3, 4]));
        assert_eq!(choose_dims(6, DecompMode::TwoD).unwrap(), Dims([1, 2, 3]));
        assert_eq!(choose_dims(7, DecompMode::TwoD).unwrap(), Dims([1, 1, 7]));
        assert_eq!(choose_dims(0, DecompMode::TwoD).unwrap_err(), DecompError::NoRanks);
    }

    #[test]
    fn validate_reports_alternatives() {
        let err = validate_dims(Dims([2, 1, 2]), 4, DecompMode::TwoD).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2d:1x2x2"), "{msg}");
        assert!(validate_dims(Dims([1, 1, 4]), 4, DecompMode::TwoD).is_ok());
        assert!(validate_dims(Dims([1, 1, 3]), 4, DecompMode::ThreeD).is_err());
    }

    #[test]
    fn split_rules() {
        assert_eq!(split_axis(256, 2), vec![(0, 128), (128, 128)]);
        let s = split_axis(10, 3);
        assert_eq!(s.iter().map(|x| x.1).collect::<Vec<_>>(), vec![4, 3, 3]);
        assert_eq!(s.iter().map(|x| x.1).sum::<usize>(), 10);
        assert_eq!(s[2].0, 7);
    }

    #[test]
    fn thin_blocks_rejected() {
        let err = partition([8, 16, 16], Dims([2, 1, 1])).unwrap_err();
        assert_eq!(err, DecompError::TooThin { rank: 0, axis: Axis::I, size: 4 });
    }

    #[test]
    fn rank_zero_neighbours_in_2x2x2() {
        let t = neighbors(Dims([2, 2, 2]), 0).unwrap();
        assert_eq!(t.get(Face::new(Axis::I, Side::High)), Neighbor::Rank(1));
        assert_eq!(t.get(Face::new(Axis::J, Side::High)), Neighbor::Rank(2));
        assert_eq!(t.get(Face::new(Axis::K, Side::High)), Neighbor::Rank(4));
        for axis in Axis::ALL {
            assert!(t.is_wall(Face::new(axis, Side::Low)));
        }
        assert_eq!(neighbors(Dims([1, 1, 1]), 0).unwrap(), NeighborTable::all_walls());
        assert!(neighbors(Dims([1, 1, 2]), 2).is_err());
    }

    #[test]
    fn growth_tables() {
        let b = [256; 3];
        assert_eq!(grow_grid(b, 8, DecompMode::ThreeD, GrowthType::FollowDims).unwrap(), [512; 3]);
        assert_eq!(
            grow_grid(b, 8, DecompMode::TwoD, GrowthType::FollowDims).unwrap(),
            [256, 512, 1024]
        );
        assert_eq!(
            grow_grid(b, 8, DecompMode::OneD(Axis::K), GrowthType::FollowDims).unwrap(),
            [256, 256, 2048]
        );
        for mode in DecompMode::ALL {
            assert_eq!(grow_grid(b, 32, mode, GrowthType::Uniform).unwrap(), [512, 1024, 1024]);
        }
        assert_eq!(
            grow_grid(b, 6, DecompMode::ThreeD, GrowthType::Uniform).unwrap_err(),
            DecompError::NotPowerOfTwo(6)
        );
    }

    #[test]
    fn center_owner_2x2x2() {
        let g = Grid3::cube(256, 0.05f64).unwrap();
        let map = BlockMap::new(g, Dims([2, 2, 2])).unwrap();
        assert_eq!(map.center_node(), [127; 3]);
        assert_eq!(map.center_owner(), 0);
        let g = Grid3::cube(33, 0.05f64).unwrap();
        let map = BlockMap::new(g, Dims([2, 2, 2])).unwrap();
        // node 16 lies in the lower block (17 nodes) on every axis
        assert_eq!(map.center_owner(), 0);
    }

    #[test]
    fn mode_and_dims_text() {
        for m in DecompMode::ALL {
            assert_eq!(m.to_string().parse::<DecompMode>().unwrap(), m);
        }
        assert_eq!("2x2x4".parse::<Dims>().unwrap(), Dims([2, 2, 4]));
        assert!("2x2".parse::<Dims>().is_err());
        assert!("0x1x1".parse::<Dims>().is_err());
    }
}
