//! Universe partitioning and table sizing.
//!
//! The universe is cut into blocks of `y` elements; `x³` consecutive blocks
//! form a superblock whose blocks sit on the integral points of the cube in
//! row-major order. Superblock `s` uses the line family of slope index
//! `s + 1`, and every line of every family owns one `y`-bit slot of T0.

use crate::geometry::{self, CubePoint, LineId};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayoutError {
    #[error("universe size must be at least 1")]
    EmptyUniverse,
    #[error("cube side and block size must be at least 1 (got x={x}, y={y})")]
    ZeroOverride { x: u64, y: u64 },
    #[error("universe of size {0} is too large to address")]
    TooLarge(u64),
    #[error("line ({c}, {k}) is not part of family {n}", c = .line.c, k = .line.k)]
    UnknownLine { n: u64, line: LineId },
    #[error("slot {slot} out of range (directory has {total} slots)")]
    SlotOutOfRange { slot: u64, total: u64 },
    #[error("block {block} out of range (have {count})")]
    BlockOutOfRange { block: u64, count: u64 },
}

/// Addressing parameters for a universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Params {
    pub m_requested: u64,
    /// Elements per block.
    pub y: u64,
    /// Cube side.
    pub x: u64,
    pub num_superblocks: u64,
    pub m_padded: u64,
}

/// Smallest `r` with `r^den ≥ m^num`.
fn ceil_rational_root(m: u64, num: u32, den: u32) -> Option<u64> {
    let target = (m as u128).checked_pow(num)?;
    let reaches = |r: u64| match (r as u128).checked_pow(den) {
        Some(v) => v >= target,
        None => true,
    };
    let (mut lo, mut hi) = (1u64, 1u64);
    while !reaches(hi) {
        hi = hi.checked_mul(2)?;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

impl Params {
    /// Default choice `x = ⌈m^{3/11}⌉`, `y = ⌈m^{1/11}⌉`, or the given
    /// `(x, y)` override.
    pub fn choose(m: u64, overrides: Option<(u64, u64)>) -> Result<Self, LayoutError> {
        if m == 0 {
            return Err(LayoutError::EmptyUniverse);
        }
        let (x, y) = match overrides {
            Some((x, y)) if x == 0 || y == 0 => return Err(LayoutError::ZeroOverride { x, y }),
            Some(xy) => xy,
            None => (
                ceil_rational_root(m, 3, 11).ok_or(LayoutError::TooLarge(m))?,
                ceil_rational_root(m, 1, 11).ok_or(LayoutError::TooLarge(m))?,
            ),
        };
        Self::from_parts(m, x, y, None)
    }

    /// Rebuild parameters, optionally demanding a specific superblock count
    /// (used when decoding a serialized structure).
    pub(crate) fn from_parts(
        m: u64,
        x: u64,
        y: u64,
        num_superblocks: Option<u64>,
    ) -> Result<Self, LayoutError> {
        if m == 0 {
            return Err(LayoutError::EmptyUniverse);
        }
        if x == 0 || y == 0 {
            return Err(LayoutError::ZeroOverride { x, y });
        }
        let superblock_size = x
            .checked_pow(3)
            .and_then(|c| c.checked_mul(y))
            .ok_or(LayoutError::TooLarge(m))?;
        let num_superblocks = num_superblocks.unwrap_or_else(|| m.div_ceil(superblock_size));
        let m_padded = num_superblocks
            .checked_mul(superblock_size)
            .ok_or(LayoutError::TooLarge(m))?;
        if num_superblocks == 0 || m_padded < m {
            return Err(LayoutError::TooLarge(m));
        }
        Ok(Self {
            m_requested: m,
            y,
            x,
            num_superblocks,
            m_padded,
        })
    }

    pub fn blocks_per_superblock(&self) -> u64 {
        self.x.pow(3)
    }

    pub fn superblock_size(&self) -> u64 {
        self.blocks_per_superblock() * self.y
    }

    pub fn num_blocks(&self) -> u64 {
        self.m_padded / self.y
    }

    /// Superblock and cube point of a global block (row-major within the
    /// superblock).
    pub fn block_position(&self, block: u64) -> Result<(u64, CubePoint), LayoutError> {
        if block >= self.num_blocks() {
            return Err(LayoutError::BlockOutOfRange {
                block,
                count: self.num_blocks(),
            });
        }
        let per = self.blocks_per_superblock();
        Ok((block / per, CubePoint::from_index(block % per, self.x)))
    }

    /// Inverse of [`Params::block_position`].
    pub fn block_at(&self, superblock: u64, point: CubePoint) -> u64 {
        superblock * self.blocks_per_superblock() + point.index(self.x)
    }
}

/// Maps every `(slope index, line)` pair to a distinct T0 slot.
///
/// Slots run through superblocks in order, and within a superblock through
/// its lines in `(c, k)` order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotDirectory {
    lines: Vec<Vec<LineId>>,
    /// `offsets[s]` is the first slot of superblock `s`; one trailing entry
    /// holds the total.
    offsets: Vec<u64>,
}

impl SlotDirectory {
    pub fn build(params: &Params) -> Self {
        let lines: Vec<Vec<LineId>> = (1..=params.num_superblocks)
            .map(|n| geometry::enumerate_lines(n, params.x).expect("slope index starts at 1"))
            .collect();
        let mut offsets = Vec::with_capacity(lines.len() + 1);
        let mut acc = 0u64;
        offsets.push(0);
        for family in &lines {
            acc += family.len() as u64;
            offsets.push(acc);
        }
        Self { lines, offsets }
    }

    pub fn total_lines(&self) -> u64 {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn family(&self, n: u64) -> Option<&[LineId]> {
        n.checked_sub(1)
            .and_then(|s| self.lines.get(s as usize))
            .map(Vec::as_slice)
    }

    pub fn family_len(&self, n: u64) -> u64 {
        self.family(n).map_or(0, |f| f.len() as u64)
    }

    /// T0 slot of `line` in family `n`.
    pub fn slot(&self, n: u64, line: LineId) -> Result<u64, LayoutError> {
        let family = self.family(n).ok_or(LayoutError::UnknownLine { n, line })?;
        let pos = family
            .binary_search(&line)
            .map_err(|_| LayoutError::UnknownLine { n, line })?;
        Ok(self.offsets[(n - 1) as usize] + pos as u64)
    }

    /// Inverse of [`SlotDirectory::slot`].
    pub fn line_of_slot(&self, slot: u64) -> Result<(u64, LineId), LayoutError> {
        let total = self.total_lines();
        if slot >= total {
            return Err(LayoutError::SlotOutOfRange { slot, total });
        }
        let s = self.offsets.partition_point(|&o| o <= slot) - 1;
        let line = self.lines[s][(slot - self.offsets[s]) as usize];
        Ok((s as u64 + 1, line))
    }
}

/// Parameters together with their slot directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub params: Params,
    pub directory: SlotDirectory,
}

impl Layout {
    pub fn new(params: Params) -> Self {
        let directory = SlotDirectory::build(&params);
        Self { params, directory }
    }

    pub fn space_report(&self) -> SpaceModel {
        SpaceModel::measure(&self.params, &self.directory)
    }
}

/// Measured table sizes and the constants fitted to the asymptotic
/// shapes `lines ≈ c·m³/(x⁷y³)` and `S ≈ x³y + C·m³/(x⁷y²) + m/y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceModel {
    pub m: u64,
    pub x: u64,
    pub y: u64,
    pub total_lines: u64,
    pub t_bits: u64,
    pub t0_bits: u64,
    pub t1_bits: u64,
    pub total: u64,
    /// `total / m^{10/11}`.
    pub ratio: f64,
    /// `total_lines / (m³/(x⁷y³))`, with `m` the padded universe size.
    pub c_lines: f64,
    /// `t0_bits / (m³/(x⁷y²))`.
    pub c_space: f64,
    /// Space prediction `x³y + C·m³/(x⁷y²) + m/y` at the fitted `C`.
    pub predicted: f64,
}

impl SpaceModel {
    pub fn measure(params: &Params, directory: &SlotDirectory) -> Self {
        let Params {
            x,
            y,
            m_padded,
            m_requested,
            ..
        } = *params;
        let total_lines = directory.total_lines();
        let t_bits = m_padded / y;
        let t1_bits = x.pow(3) * y;
        let t0_bits = total_lines * y;
        let total = t_bits + t0_bits + t1_bits;
        let line_shape = lines_shape(m_padded, x, y);
        let space_shape = line_shape * y as f64;
        let c_lines = total_lines as f64 / line_shape;
        let c_space = t0_bits as f64 / space_shape;
        Self {
            m: m_requested,
            x,
            y,
            total_lines,
            t_bits,
            t0_bits,
            t1_bits,
            total,
            ratio: total as f64 / (m_requested as f64).powf(10.0 / 11.0),
            c_lines,
            c_space,
            predicted: t1_bits as f64 + c_space * space_shape + t_bits as f64,
        }
    }

    /// One-line machine-readable record.
    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }

    pub fn text_header() -> &'static str {
        "       m     x     y        t_bits       t0_bits       t1_bits         total  total/m^(10/11)"
    }

    pub fn to_text_row(&self) -> String {
        format!(
            "{:>8} {:>5} {:>5} {:>13} {:>13} {:>13} {:>13} {:>16.4}",
            self.m, self.x, self.y, self.t_bits, self.t0_bits, self.t1_bits, self.total, self.ratio
        )
    }
}

/// `m³/(x⁷y³)`, which equals `N³·x²` for `N` superblocks when `m = N·x³·y`.
pub fn lines_shape(m: u64, x: u64, y: u64) -> f64 {
    let (m, x, y) = (m as f64, x as f64, y as f64);
    m.powi(3) / (x.powi(7) * y.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_params() {
        let p = Params::choose(2048, None).unwrap();
        assert_eq!((p.x, p.y), (8, 2));
        assert_eq!(p.superblock_size(), 1024);
        assert_eq!(p.num_superblocks, 2);
        assert_eq!(p.m_padded, 2048);

        let p = Params::choose(1, None).unwrap();
        assert_eq!((p.x, p.y, p.num_superblocks, p.m_padded), (1, 1, 1, 1));
    }

    #[test]
    fn override_params() {
        let p = Params::choose(1024, Some((4, 2))).unwrap();
        assert_eq!(p.superblock_size(), 128);
        assert_eq!(p.num_superblocks, 8);
        assert_eq!(p.m_padded, 1024);

        let p = Params::choose(1000, Some((3, 2))).unwrap();
        assert_eq!(p.num_superblocks, 19);
        assert_eq!(p.m_padded, 1026);
    }

    #[test]
    fn param_errors() {
        assert_eq!(Params::choose(0, None), Err(LayoutError::EmptyUniverse));
        assert!(matches!(
            Params::choose(10, Some((0, 2))),
            Err(LayoutError::ZeroOverride { .. })
        ));
    }

    #[test]
    fn integer_roots_are_exact_at_powers() {
        // m = 2^11·k: exact roots must not be bumped up by rounding.
        for e in 1..=3u32 {
            let m = 1u64 << (11 * e);
            assert_eq!(ceil_rational_root(m, 3, 11), Some(1 << (3 * e)));
            assert_eq!(ceil_rational_root(m, 1, 11), Some(1 << e));
            assert_eq!(ceil_rational_root(m + 1, 1, 11), Some((1 << e) + 1));
        }
        assert_eq!(ceil_rational_root(1 << 15, 3, 11), Some(18));
        assert_eq!(ceil_rational_root(1 << 15, 1, 11), Some(3));
    }

    #[test]
    fn slot_directory_small() {
        let p = Params::from_parts(1, 1, 1, None).unwrap();
        let d = SlotDirectory::build(&p);
        assert_eq!(d.total_lines(), 1);

        let p = Params::from_parts(16, 2, 1, None).unwrap();
        assert_eq!(p.num_superblocks, 2);
        let d = SlotDirectory::build(&p);
        let first = geometry::enumerate_lines(1, 2).unwrap();
        for (i, &l) in first.iter().enumerate() {
            assert_eq!(d.slot(1, l).unwrap(), i as u64);
        }
        let second = geometry::enumerate_lines(2, 2).unwrap();
        assert_eq!(d.slot(2, second[0]).unwrap(), 7);
        assert_eq!(d.total_lines(), 15);

        let absent = LineId { c: 100, k: 100 };
        assert!(matches!(
            d.slot(1, absent),
            Err(LayoutError::UnknownLine { .. })
        ));
        assert!(d.slot(3, first[0]).is_err());
        assert!(d.line_of_slot(15).is_err());
    }

    #[test]
    fn slot_directory_is_bijective() {
        let p = Params::choose(1024, Some((4, 2))).unwrap();
        let d = SlotDirectory::build(&p);
        let mut prev: Option<u64> = None;
        for slot in 0..d.total_lines() {
            let (n, line) = d.line_of_slot(slot).unwrap();
            assert_eq!(d.slot(n, line).unwrap(), slot);
            if let Some(p) = prev {
                assert!(slot > p);
            }
            prev = Some(slot);
        }
        let sum: u64 = (1..=p.num_superblocks).map(|n| d.family_len(n)).sum();
        assert_eq!(sum, d.total_lines());
    }

    #[test]
    fn space_examples() {
        let l = Layout::new(Params::choose(1, Some((1, 1))).unwrap());
        let s = l.space_report();
        assert_eq!((s.t_bits, s.t1_bits, s.t0_bits, s.total), (1, 1, 1, 3));

        let l = Layout::new(Params::choose(2048, None).unwrap());
        let s = l.space_report();
        let lines = geometry::enumerate_lines(1, 8).unwrap().len() as u64
            + geometry::enumerate_lines(2, 8).unwrap().len() as u64;
        assert_eq!(s.t_bits, 1024);
        assert_eq!(s.t1_bits, 1024);
        assert_eq!(s.t0_bits, 2 * lines);
        assert_eq!(s.total, s.t_bits + s.t0_bits + s.t1_bits);
        assert!((s.predicted - s.total as f64).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn addressing_round_trip(x in 1u64..7, y in 1u64..5, m in 1u64..3000, seed in any::<u64>()) {
            let p = Params::choose(m, Some((x, y))).unwrap();
            prop_assert_eq!(p.m_padded % p.superblock_size(), 0);
            prop_assert!(p.m_padded >= m);
            let e = seed % p.m_padded;
            let block = e / p.y;
            let (s, point) = p.block_position(block).unwrap();
            prop_assert!(s < p.num_superblocks);
            prop_assert_eq!(p.block_at(s, point), block);
            prop_assert_eq!(p.block_at(s, point) * p.y + e % p.y, e);
        }
    }
}
