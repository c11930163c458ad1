//! Ghosted structured storage and the face-slab copy kernels.
//!
//! Every field carries [`GHOST`] layers on each side of each axis. Indices
//! handed to [`Field3`] are *storage* indices: 0-based, ghosts included, so
//! the interior of an axis with `n` nodes occupies `2..=n+1` (a 1-based
//! layout would start it at 3).
//!
//! The linear address of `(i, j, k)` is `i + (nx+4) * (j + (ny+4) * k)`.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Real;

/// Ghost layers per side, fixed for every variable.
pub const GHOST: usize = 2;

/// Smallest interior extent the fourth-difference stencil tolerates.
pub const MIN_INTERIOR: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("axis {axis:?} has {n} interior nodes, at least {MIN_INTERIOR} are required")]
    TooSmall { axis: Axis, n: usize },
    #[error("node spacing along {axis:?} must be positive and finite")]
    BadSpacing { axis: Axis },
    #[error("grid {0:?} overflows the linear index space")]
    Overflow([usize; 3]),
    #[error("slab depth {0} is not 1 or 2")]
    BadDepth(usize),
    #[error("slab of {found} scalars does not fit a region of {expected}")]
    SlabMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    I,
    J,
    K,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::I, Axis::J, Axis::K];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::I => "i",
            Axis::J => "j",
            Axis::K => "k",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Low,
    High,
}

/// One of the six faces of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Face {
    pub axis: Axis,
    pub side: Side,
}

impl Face {
    /// Faces in id order: i-low, i-high, j-low, j-high, k-low, k-high.
    pub const ALL: [Face; 6] = [
        Face::new(Axis::I, Side::Low),
        Face::new(Axis::I, Side::High),
        Face::new(Axis::J, Side::Low),
        Face::new(Axis::J, Side::High),
        Face::new(Axis::K, Side::Low),
        Face::new(Axis::K, Side::High),
    ];

    pub const fn new(axis: Axis, side: Side) -> Self {
        Face { axis, side }
    }

    #[inline]
    pub fn id(self) -> usize {
        2 * self.axis.index() + usize::from(self.side == Side::High)
    }

    pub fn opposite(self) -> Face {
        let side = match self.side {
            Side::Low => Side::High,
            Side::High => Side::Low,
        };
        Face::new(self.axis, side)
    }
}

impl std::fmt::Display for Face {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sign = match self.side {
            Side::Low => '-',
            Side::High => '+',
        };
        write!(f, "{sign}{}", self.axis.name())
    }
}

/// Interior node counts and spacings of one block (or of the whole cavity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3<T> {
    n: [usize; 3],
    spacing: [T; 3],
}

impl<T: Real> Grid3<T> {
    /// Cell-centred grid spanning `lengths`: spacing is `length / n` and the
    /// walls sit half a spacing outside the first and last interior node.
    pub fn new(n: [usize; 3], lengths: [T; 3]) -> Result<Self, MeshError> {
        let mut spacing = [T::zero(); 3];
        for a in Axis::ALL {
            let count = T::from_usize(n[a.index()]).ok_or(MeshError::Overflow(n))?;
            spacing[a.index()] = lengths[a.index()] / count;
        }
        Self::with_spacing(n, spacing)
    }

    pub fn cube(n: usize, length: T) -> Result<Self, MeshError> {
        Self::new([n; 3], [length; 3])
    }

    pub fn with_spacing(n: [usize; 3], spacing: [T; 3]) -> Result<Self, MeshError> {
        for a in Axis::ALL {
            if n[a.index()] < MIN_INTERIOR {
                return Err(MeshError::TooSmall { axis: a, n: n[a.index()] });
            }
            let h = spacing[a.index()];
            if h <= T::zero() || !h.is_finite() {
                return Err(MeshError::BadSpacing { axis: a });
            }
        }
        n.iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m.checked_add(2 * GHOST)?))
            .ok_or(MeshError::Overflow(n))?;
        Ok(Grid3 { n, spacing })
    }
}

impl<T: Copy> Grid3<T> {
    #[inline]
    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> [T; 3] {
        self.spacing
    }

    /// Storage extents per axis, ghosts included.
    #[inline]
    pub fn extents(&self) -> [usize; 3] {
        self.n.map(|m| m + 2 * GHOST)
    }

    pub fn interior_count(&self) -> usize {
        self.n.iter().product()
    }
}

/// Half-open box of storage indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Box3 {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Box3 {
    pub fn new(lo: [usize; 3], hi: [usize; 3]) -> Self {
        Box3 { lo, hi }
    }

    pub fn count(&self) -> usize {
        (0..3).map(|a| self.hi[a].saturating_sub(self.lo[a])).product()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] < self.hi[a])
    }

    /// Visits every index in k-outer, i-inner order.
    pub fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        for k in self.lo[2]..self.hi[2] {
            for j in self.lo[1]..self.hi[1] {
                for i in self.lo[0]..self.hi[0] {
                    f(i, j, k);
                }
            }
        }
    }
}

/// The interior of a block with interior counts `n`.
pub fn interior_box(n: [usize; 3]) -> Box3 {
    Box3::new([GHOST; 3], n.map(|m| m + GHOST))
}

/// The `depth` outermost interior layers next to `face` (transverse interior only).
pub fn face_interior_box(n: [usize; 3], face: Face, depth: usize) -> Box3 {
    let mut b = interior_box(n);
    let a = face.axis.index();
    match face.side {
        Side::Low => b.hi[a] = GHOST + depth,
        Side::High => b.lo[a] = n[a] + GHOST - depth,
    }
    b
}

/// The `depth` ghost layers just outside `face` (transverse interior only).
pub fn face_ghost_box(n: [usize; 3], face: Face, depth: usize) -> Box3 {
    let mut b = interior_box(n);
    let a = face.axis.index();
    match face.side {
        Side::Low => {
            b.lo[a] = GHOST - depth;
            b.hi[a] = GHOST;
        }
        Side::High => {
            b.lo[a] = n[a] + GHOST;
            b.hi[a] = n[a] + GHOST + depth;
        }
    }
    b
}

/// Product of the two interior extents transverse to `axis`.
pub fn transverse_area(n: [usize; 3], axis: Axis) -> usize {
    Axis::ALL
        .iter()
        .filter(|&&a| a != axis)
        .map(|a| n[a.index()])
        .product()
}

/// One scalar field with ghost layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3<T> {
    data: Vec<T>,
    n: [usize; 3],
    ext: [usize; 3],
}

impl<T: Real> Field3<T> {
    pub fn zeros(n: [usize; 3]) -> Self {
        Self::filled(n, T::zero())
    }

    pub fn filled(n: [usize; 3], value: T) -> Self {
        let ext = n.map(|m| m + 2 * GHOST);
        Field3 { data: vec![value; ext[0] * ext[1] * ext[2]], n, ext }
    }

    /// Fills every storage cell (ghosts included) from `f(i, j, k)`.
    pub fn from_fn(n: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut field = Self::zeros(n);
        let ext = field.ext;
        Box3::new([0; 3], ext).for_each(|i, j, k| {
            let id = field.idx(i, j, k);
            field.data[id] = f(i, j, k);
        });
        field
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    /// Overwrites interior cells with `value`, ghosts untouched.
    pub fn fill_interior(&mut self, value: T) {
        let b = interior_box(self.n);
        b.for_each(|i, j, k| {
            let id = self.idx(i, j, k);
            self.data[id] = value;
        });
    }
}

impl<T: Copy> Field3<T> {
    #[inline(always)]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.ext[0] && j < self.ext[1] && k < self.ext[2]);
        i + self.ext[0] * (j + self.ext[1] * k)
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.idx(i, j, k)]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: T) {
        let id = self.idx(i, j, k);
        self.data[id] = value;
    }

    /// Linear address step for a unit move along `axis`.
    #[inline(always)]
    pub fn stride(&self, axis: Axis) -> usize {
        match axis {
            Axis::I => 1,
            Axis::J => self.ext[0],
            Axis::K => self.ext[0] * self.ext[1],
        }
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn extents(&self) -> [usize; 3] {
        self.ext
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Appends the cells of `region` to `out`, copying whole i-rows at once.
    pub fn pack_rows(&self, region: &Box3, out: &mut Vec<T>) {
        if region.is_empty() {
            return;
        }
        out.reserve(region.count());
        for k in region.lo[2]..region.hi[2] {
            for j in region.lo[1]..region.hi[1] {
                let start = self.idx(region.lo[0], j, k);
                let len = region.hi[0] - region.lo[0];
                out.extend_from_slice(&self.data[start..start + len]);
            }
        }
    }

    /// Appends the cells of `region` to `out` one element at a time through
    /// full index arithmetic, the way an unpacked strided transfer walks memory.
    pub fn gather_strided(&self, region: &Box3, out: &mut Vec<T>) {
        out.reserve(region.count());
        region.for_each(|i, j, k| out.push(self.get(i, j, k)));
    }

    /// Writes `src` into `region` in the order produced by [`Field3::pack_rows`].
    /// Returns the number of scalars consumed.
    pub fn unpack_rows(&mut self, region: &Box3, src: &[T]) -> Result<usize, MeshError> {
        let count = region.count();
        if src.len() < count {
            return Err(MeshError::SlabMismatch { expected: count, found: src.len() });
        }
        if count == 0 {
            return Ok(0);
        }
        let len = region.hi[0] - region.lo[0];
        let mut offset = 0;
        for k in region.lo[2]..region.hi[2] {
            for j in region.lo[1]..region.hi[1] {
                let start = self.idx(region.lo[0], j, k);
                self.data[start..start + len].copy_from_slice(&src[offset..offset + len]);
                offset += len;
            }
        }
        Ok(count)
    }

    /// Element-wise counterpart of [`Field3::unpack_rows`].
    pub fn scatter_strided(&mut self, region: &Box3, src: &[T]) -> Result<usize, MeshError> {
        let count = region.count();
        if src.len() < count {
            return Err(MeshError::SlabMismatch { expected: count, found: src.len() });
        }
        let mut it = src.iter();
        region.for_each(|i, j, k| {
            let id = self.idx(i, j, k);
            self.data[id] = *it.next().expect("length checked");
        });
        Ok(count)
    }
}

/// The five solution variables, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    P,
    U,
    V,
    W,
    T,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::P, Var::U, Var::V, Var::W, Var::T];
    pub const VELOCITY: [Var; 3] = [Var::U, Var::V, Var::W];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::P => "p",
            Var::U => "u",
            Var::V => "v",
            Var::W => "w",
            Var::T => "T",
        }
    }

    pub fn velocity(axis: Axis) -> Var {
        Var::VELOCITY[axis.index()]
    }
}

/// Pressure, the three velocity components and temperature on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet<T> {
    grid: Grid3<T>,
    fields: [Field3<T>; 5],
}

impl<T: Real> FieldSet<T> {
    pub fn new(grid: Grid3<T>) -> Self {
        let n = grid.n();
        FieldSet { grid, fields: std::array::from_fn(|_| Field3::zeros(n)) }
    }

    pub fn grid(&self) -> &Grid3<T> {
        &self.grid
    }

    pub fn fields(&self) -> &[Field3<T>; 5] {
        &self.fields
    }

    pub fn fields_mut(&mut self) -> &mut [Field3<T>; 5] {
        &mut self.fields
    }
}

impl<T> Index<Var> for FieldSet<T> {
    type Output = Field3<T>;

    fn index(&self, var: Var) -> &Field3<T> {
        &self.fields[var as usize]
    }
}

impl<T> IndexMut<Var> for FieldSet<T> {
    fn index_mut(&mut self, var: Var) -> &mut Field3<T> {
        &mut self.fields[var as usize]
    }
}

/// Allocates all five fields, zero-initialised, ghosts included.
pub fn allocate_fieldset<T: Real>(grid: Grid3<T>) -> Result<FieldSet<T>, MeshError> {
    let grid = Grid3::with_spacing(grid.n(), grid.spacing())?;
    Ok(FieldSet::new(grid))
}

/// Contiguous copy of the layers next to one face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceSlab<T> {
    pub face: Face,
    pub depth: usize,
    pub vars: usize,
    /// Interior extents of the block the slab was cut from.
    pub n: [usize; 3],
    pub data: Vec<T>,
}

impl<T> FaceSlab<T> {
    pub fn expected_len(n: [usize; 3], face: Face, depth: usize, vars: usize) -> usize {
        depth * transverse_area(n, face.axis) * vars
    }
}

fn check_depth(depth: usize) -> Result<(), MeshError> {
    if depth == 1 || depth == 2 {
        Ok(())
    } else {
        Err(MeshError::BadDepth(depth))
    }
}

/// Copies the `depth` outermost interior layers next to `face` into a slab,
/// in i-fastest order.
pub fn extract_face_slab<T: Real>(
    field: &Field3<T>,
    face: Face,
    depth: usize,
) -> Result<FaceSlab<T>, MeshError> {
    check_depth(depth)?;
    let n = field.n();
    let mut data = Vec::new();
    field.pack_rows(&face_interior_box(n, face, depth), &mut data);
    Ok(FaceSlab { face, depth, vars: 1, n, data })
}

/// All five variables of a field set stacked in [`Var`] order.
pub fn extract_fieldset_slab<T: Real>(
    set: &FieldSet<T>,
    face: Face,
    depth: usize,
) -> Result<FaceSlab<T>, MeshError> {
    check_depth(depth)?;
    let n = set.grid().n();
    let region = face_interior_box(n, face, depth);
    let mut data = Vec::with_capacity(region.count() * 5);
    for var in Var::ALL {
        set[var].pack_rows(&region, &mut data);
    }
    Ok(FaceSlab { face, depth, vars: 5, n, data })
}

/// Overwrites the `slab.depth` ghost layers outside `target` with the slab.
///
/// A slab cut from face `F` of one block belongs in the ghosts outside
/// `F.opposite()` of its neighbour; the transverse extents must agree.
pub fn insert_face_slab<T: Real>(
    field: &mut Field3<T>,
    target: Face,
    slab: &FaceSlab<T>,
) -> Result<(), MeshError> {
    check_depth(slab.depth)?;
    if slab.vars != 1 {
        return Err(MeshError::SlabMismatch {
            expected: slab.data.len() / slab.vars.max(1),
            found: slab.data.len(),
        });
    }
    let n = field.n();
    let expected = FaceSlab::<T>::expected_len(n, target, slab.depth, 1);
    if target.axis != slab.face.axis || slab.data.len() != expected {
        return Err(MeshError::SlabMismatch { expected, found: slab.data.len() });
    }
    field.unpack_rows(&face_ghost_box(n, target, slab.depth), &slab.data)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coded(n: [usize; 3]) -> Field3<f64> {
        Field3::from_fn(n, |i, j, k| (i + 100 * j + 10000 * k) as f64)
    }

    #[test]
    fn allocation_sizes() {
        let g = Grid3::cube(32, 0.05).unwrap();
        let set = allocate_fieldset(g).unwrap();
        assert_eq!(set[Var::P].as_slice().len(), 36 * 36 * 36);
        let g = Grid3::cube(5, 0.05).unwrap();
        let set = allocate_fieldset(g).unwrap();
        for var in Var::ALL {
            assert_eq!(set[var].as_slice().len(), 9 * 9 * 9);
            assert!(set[var].as_slice().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn rejects_thin_grid() {
        let err = Grid3::new([4, 8, 8], [0.05f64; 3]).unwrap_err();
        assert_eq!(err, MeshError::TooSmall { axis: Axis::I, n: 4 });
    }

    #[test]
    fn rejects_bad_spacing() {
        let err = Grid3::with_spacing([8; 3], [1.0, 0.0, 1.0f64]).unwrap_err();
        assert_eq!(err, MeshError::BadSpacing { axis: Axis::J });
    }

    #[test]
    fn layout_strides() {
        let f = Field3::<f64>::zeros([7, 6, 5]);
        assert_eq!(f.idx(3, 2, 2) - f.idx(2, 2, 2), 1);
        assert_eq!(f.idx(2, 3, 2) - f.idx(2, 2, 2), 7 + 4);
        assert_eq!(f.idx(2, 2, 3) - f.idx(2, 2, 2), (7 + 4) * (6 + 4));
        assert_eq!(f.stride(Axis::K), (7 + 4) * (6 + 4));
    }

    #[test]
    fn face_ids_are_dense() {
        for (id, face) in Face::ALL.iter().enumerate() {
            assert_eq!(face.id(), id);
            assert_eq!(face.opposite().opposite(), *face);
        }
    }

    #[test]
    fn i_low_slab_is_first_two_interior_planes() {
        let n = [32; 3];
        let f = coded(n);
        let slab = extract_face_slab(&f, Face::new(Axis::I, Side::Low), 2).unwrap();
        assert_eq!(slab.data.len(), 2 * 32 * 32);
        let mut it = slab.data.iter();
        for k in 2..34 {
            for j in 2..34 {
                for i in 2..4 {
                    assert_eq!(*it.next().unwrap(), f.get(i, j, k));
                }
            }
        }
    }

    #[test]
    fn constant_field_gives_constant_slab() {
        let f = Field3::filled([6, 7, 8], 3.25f64);
        for face in Face::ALL {
            let s = extract_face_slab(&f, face, 2).unwrap();
            assert!(s.data.iter().all(|&x| x == 3.25));
        }
    }

    #[test]
    fn k_high_depth_one_matches_closed_form() {
        let n = [6, 7, 9];
        let f = coded(n);
        let slab = extract_face_slab(&f, Face::new(Axis::K, Side::High), 1).unwrap();
        // Only the plane k = nz + 1; entry (i, j) sits at (i-2) + nx*(j-2).
        assert_eq!(slab.data.len(), 6 * 7);
        for j in 0..7 {
            for i in 0..6 {
                let expected = ((i + 2) + 100 * (j + 2) + 10000 * (9 + 1)) as f64;
                assert_eq!(slab.data[i + 6 * j], expected);
            }
        }
    }

    #[test]
    fn depth_one_insert_keeps_second_ghost_layer() {
        let n = [5; 3];
        let src = Field3::filled(n, 1.0f64);
        let mut dst = Field3::filled(n, -7.0f64);
        let face = Face::new(Axis::J, Side::High);
        let slab = extract_face_slab(&src, face.opposite(), 1).unwrap();
        insert_face_slab(&mut dst, face, &slab).unwrap();
        for k in 2..7 {
            for i in 2..7 {
                assert_eq!(dst.get(i, 7, k), 1.0);
                assert_eq!(dst.get(i, 8, k), -7.0);
            }
        }
    }

    #[test]
    fn insert_rejects_wrong_shape() {
        let f = Field3::<f64>::zeros([6, 6, 6]);
        let mut g = Field3::<f64>::zeros([6, 7, 6]);
        let slab = extract_face_slab(&f, Face::new(Axis::I, Side::Low), 2).unwrap();
        assert!(matches!(
            insert_face_slab(&mut g, Face::new(Axis::I, Side::High), &slab),
            Err(MeshError::SlabMismatch { .. })
        ));
        assert_eq!(extract_face_slab(&f, Face::ALL[0], 3).unwrap_err(), MeshError::BadDepth(3));
    }

    #[test]
    fn periodic_copy_ghosts_equal_wrapped_interior() {
        let n = [6, 5, 7];
        let f = coded(n);
        for face in Face::ALL {
            for depth in [1, 2] {
                let mut g = f.clone();
                let slab = extract_face_slab(&f, face, depth).unwrap();
                insert_face_slab(&mut g, face.opposite(), &slab).unwrap();
                let a = face.axis.index();
                face_ghost_box(n, face.opposite(), depth).for_each(|i, j, k| {
                    let mut p = [i, j, k];
                    // periodic wrap of a ghost index onto the interior
                    p[a] = if p[a] < GHOST { p[a] + n[a] } else { p[a] - n[a] };
                    assert_eq!(g.get(i, j, k), f.get(p[0], p[1], p[2]));
                });
            }
        }
    }

    #[test]
    fn fieldset_slab_stacks_variables() {
        let g = Grid3::cube(5, 1.0f64).unwrap();
        let mut set = FieldSet::new(g);
        for var in Var::ALL {
            set[var].fill(var.index() as f64);
        }
        let s = extract_fieldset_slab(&set, Face::ALL[3], 2).unwrap();
        assert_eq!(s.data.len(), FaceSlab::<f64>::expected_len([5; 3], Face::ALL[3], 2, 5));
        for (v, chunk) in s.data.chunks(50).enumerate() {
            assert!(chunk.iter().all(|&x| x == v as f64));
        }
    }
}
