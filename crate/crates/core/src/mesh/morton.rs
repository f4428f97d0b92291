use std::cmp::Ordering;
use std::fmt;

use crate::error::MeshError;

/// Deepest refinement level a key can address.
pub const MAX_LEVEL: u8 = 28;

/// Quadtree cell address: refinement level plus the Z-order index of the
/// cell among the `4^level` cells of that level (x in the low bit of each pair).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MortonKey {
    level: u8,
    index: u64,
}

impl fmt::Debug for MortonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l, i, j) = self.decode();
        write!(f, "L{l}({i},{j})")
    }
}

#[inline]
fn spread(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

#[inline]
fn compact(v: u64) -> u32 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    x = (x | (x >> 16)) & 0x0000_0000_ffff_ffff;
    x as u32
}

/// Edge directions of a cell, in the order left, right, bottom, top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn offset(self) -> (i64, i64) {
        match self {
            Side::Left => (-1, 0),
            Side::Right => (1, 0),
            Side::Bottom => (0, -1),
            Side::Top => (0, 1),
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
            Side::Bottom => Side::Top,
            Side::Top => Side::Bottom,
        }
    }

    pub fn normal(self) -> [f64; 2] {
        let (dx, dy) = self.offset();
        [dx as f64, dy as f64]
    }

    /// Child positions `(dx, dy)` touching this side, ordered along the edge.
    pub fn children(self) -> [(u32, u32); 2] {
        match self {
            Side::Left => [(0, 0), (0, 1)],
            Side::Right => [(1, 0), (1, 1)],
            Side::Bottom => [(0, 0), (1, 0)],
            Side::Top => [(0, 1), (1, 1)],
        }
    }

    pub fn is_vertical(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }
}

impl MortonKey {
    pub const ROOT: MortonKey = MortonKey { level: 0, index: 0 };

    pub fn encode(level: u8, i: u32, j: u32) -> Result<Self, MeshError> {
        if level > MAX_LEVEL {
            return Err(MeshError::TooDeep(level));
        }
        let n = 1u64 << level;
        if i as u64 >= n || j as u64 >= n {
            return Err(MeshError::OutOfRange { level, i, j });
        }
        Ok(Self { level, index: spread(i) | (spread(j) << 1) })
    }

    pub fn decode(self) -> (u8, u32, u32) {
        (self.level, compact(self.index), compact(self.index >> 1))
    }

    pub fn level(self) -> u8 {
        self.level
    }

    pub fn index(self) -> u64 {
        self.index
    }

    pub fn coords(self) -> (u32, u32) {
        (compact(self.index), compact(self.index >> 1))
    }

    /// Child `c = dx | (dy << 1)`.
    pub fn child(self, c: u8) -> MortonKey {
        debug_assert!(c < 4 && self.level < MAX_LEVEL);
        MortonKey { level: self.level + 1, index: (self.index << 2) | c as u64 }
    }

    pub fn child_at(self, dx: u32, dy: u32) -> MortonKey {
        self.child((dx | (dy << 1)) as u8)
    }

    pub fn children(self) -> [MortonKey; 4] {
        [self.child(0), self.child(1), self.child(2), self.child(3)]
    }

    pub fn parent(self) -> Option<MortonKey> {
        (self.level > 0).then(|| MortonKey { level: self.level - 1, index: self.index >> 2 })
    }

    pub fn ancestor(self, level: u8) -> MortonKey {
        debug_assert!(level <= self.level);
        MortonKey { level, index: self.index >> (2 * (self.level - level)) }
    }

    /// Position among siblings, `dx | (dy << 1)`.
    pub fn child_id(self) -> u8 {
        (self.index & 3) as u8
    }

    pub fn is_ancestor_or_self_of(self, other: MortonKey) -> bool {
        other.level >= self.level && other.ancestor(self.level) == self
    }

    /// Position of the lower-left corner on the finest grid.
    pub fn anchor(self) -> u64 {
        self.index << (2 * (MAX_LEVEL - self.level))
    }

    /// Same-level neighbor across `side`, `None` outside the root cell.
    pub fn neighbor(self, side: Side) -> Option<MortonKey> {
        let (i, j) = self.coords();
        let (dx, dy) = side.offset();
        let n = 1i64 << self.level;
        let (ni, nj) = (i as i64 + dx, j as i64 + dy);
        if ni < 0 || nj < 0 || ni >= n || nj >= n {
            return None;
        }
        Some(MortonKey { level: self.level, index: spread(ni as u32) | (spread(nj as u32) << 1) })
    }

    /// Cell in reference coordinates: lower-left corner and side length.
    pub fn reference_box(self) -> ([f64; 2], f64) {
        let (i, j) = self.coords();
        let s = 1.0 / (1u64 << self.level) as f64;
        ([i as f64 * s, j as f64 * s], s)
    }
}

impl Ord for MortonKey {
    /// Depth-first Z-order: by anchor, ancestors before descendants.
    fn cmp(&self, other: &Self) -> Ordering {
        self.anchor().cmp(&other.anchor()).then(self.level.cmp(&other.level))
    }
}

impl PartialOrd for MortonKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn morton_encode(level: u8, i: u32, j: u32) -> Result<MortonKey, MeshError> {
    MortonKey::encode(level, i, j)
}

pub fn morton_decode(key: MortonKey) -> (u8, u32, u32) {
    key.decode()
}
