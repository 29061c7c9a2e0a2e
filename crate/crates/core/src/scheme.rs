//! Storage and query schemes.
//!
//! Storing a set means choosing, for every block that holds an element,
//! whether its bit vector lives in its line's T0 slot or at its cube point
//! in T1. A choice is feasible when
//!
//! * (F1) no line carries two T0 element blocks,
//! * (F2) no cube point carries two T1 element blocks,
//! * (F3) no empty block is squeezed out of both tables: if element block
//!   `a` takes its line's T0 slot, every other block on that line reads T1,
//!   so no T1 element block from another superblock may sit on one of those
//!   points.
//!
//! Empty blocks then read T0 unless their line's slot is taken.

use crate::geometry::{self, CubePoint, LineId};
use crate::layout::{Layout, LayoutError, Params};
use crate::tables::{self, BitVec, Header, TableError, Tables};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use std::sync::Arc;
use thiserror::Error;

/// Largest set the scheme stores.
pub const CAPACITY: usize = 5;

/// Most elements an audit trailer may list. Above [`CAPACITY`] so that
/// forced witness structures can be saved.
pub const AUDIT_LIMIT: usize = 64;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("element {element} outside universe of size {m}")]
    OutOfUniverse { element: u64, m: u64 },
    #[error("set has {0} distinct elements, capacity is {CAPACITY}")]
    Capacity(usize),
    #[error("block {0} listed twice")]
    DuplicateBlock(u64),
    #[error("no side given for block {0}")]
    MissingSide(u64),
    #[error(
        "no feasible assignment for a set of size {} (blocks {blocks:?}); \
         a set this small must always be storable",
        elements.len()
    )]
    ContractViolation {
        elements: Vec<u64>,
        blocks: Vec<u64>,
    },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Table(#[from] TableError),
}

/// A block of the universe with its derived geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct BlockRef {
    pub global_block: u64,
    pub superblock: u64,
    /// Slope index of the superblock's line family, `superblock + 1`.
    pub slope: u64,
    pub point: CubePoint,
    pub line: LineId,
}

impl BlockRef {
    pub fn new(params: &Params, global_block: u64) -> Result<Self, LayoutError> {
        let (superblock, point) = params.block_position(global_block)?;
        let slope = superblock + 1;
        Ok(Self {
            global_block,
            superblock,
            slope,
            point,
            line: geometry::line_id_unchecked(slope, point),
        })
    }
}

/// Block and in-block offset of an element of the requested universe.
pub fn address(params: &Params, element: u64) -> Result<(BlockRef, u64), SchemeError> {
    if element >= params.m_requested {
        return Err(SchemeError::OutOfUniverse {
            element,
            m: params.m_requested,
        });
    }
    address_padded(params, element)
}

fn address_padded(params: &Params, element: u64) -> Result<(BlockRef, u64), SchemeError> {
    if element >= params.m_padded {
        return Err(SchemeError::OutOfUniverse {
            element,
            m: params.m_padded,
        });
    }
    let block = BlockRef::new(params, element / params.y)?;
    Ok((block, element % params.y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    T0,
    T1,
}

impl Side {
    pub fn bit(self) -> bool {
        self == Side::T1
    }
}

/// Whether sides `sa` for `a` and `sb` for `b` clash under F1–F3.
fn pair_conflicts(a: &BlockRef, sa: Side, b: &BlockRef, sb: Side) -> bool {
    if a.superblock == b.superblock {
        return sa == Side::T0 && sb == Side::T0 && a.line == b.line;
    }
    match (sa, sb) {
        (Side::T1, Side::T1) => a.point == b.point,
        (Side::T0, Side::T1) => trapped_on_line(a, b),
        (Side::T1, Side::T0) => trapped_on_line(b, a),
        (Side::T0, Side::T0) => false,
    }
}

/// `t1` sits on a point of `t0`'s line other than `t0`'s own point.
fn trapped_on_line(t0: &BlockRef, t1: &BlockRef) -> bool {
    t1.point != t0.point && geometry::line_id_unchecked(t0.slope, t1.point) == t0.line
}

/// A side for every element block, keyed by global block index.
pub type ElementSides = BTreeMap<u64, Side>;

/// Outcome of [`solve_assignment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Feasible(ElementSides),
    Infeasible,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Solution::Feasible(_))
    }
}

/// Searches all `2^k` side choices for the given element blocks.
///
/// Blocks are sorted by global index and choices are visited in reflected
/// Gray-code order, bit `i` sending block `i` to T0, so all-T1 comes first
/// and the result is canonical. Accepts any `k < 64`; only `k ≤ 5` is
/// guaranteed feasible.
pub fn solve_assignment(blocks: &[BlockRef]) -> Result<Solution, SchemeError> {
    let mut sorted = blocks.to_vec();
    sorted.sort_unstable_by_key(|b| b.global_block);
    if let Some(w) = sorted
        .windows(2)
        .find(|w| w[0].global_block == w[1].global_block)
    {
        return Err(SchemeError::DuplicateBlock(w[0].global_block));
    }
    let k = sorted.len();
    assert!(k < 64, "solver handles fewer than 64 blocks");

    // forbidden[i][j] bit (2·si + sj) set when sides (si, sj) clash.
    let sides = [Side::T1, Side::T0];
    let mut forbidden = vec![[0u8; 64]; k];
    let mut any = false;
    for i in 0..k {
        for j in (i + 1)..k {
            let mut mask = 0u8;
            for (si, &a) in sides.iter().enumerate() {
                for (sj, &b) in sides.iter().enumerate() {
                    if pair_conflicts(&sorted[i], a, &sorted[j], b) {
                        mask |= 1 << (2 * si + sj);
                    }
                }
            }
            forbidden[i][j] = mask;
            any |= mask != 0;
        }
    }

    let side_of = |mask: u64, i: usize| (mask >> i) & 1;
    let feasible = |mask: u64| {
        (0..k).all(|i| {
            ((i + 1)..k).all(|j| {
                let combo = 2 * side_of(mask, i) + side_of(mask, j);
                forbidden[i][j] & (1 << combo) == 0
            })
        })
    };

    let found = if any {
        (0..1u64 << k).map(|g| g ^ (g >> 1)).find(|&m| feasible(m))
    } else {
        Some(0)
    };
    Ok(match found {
        Some(mask) => Solution::Feasible(
            sorted
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let side = if side_of(mask, i) == 1 {
                        Side::T0
                    } else {
                        Side::T1
                    };
                    (b.global_block, side)
                })
                .collect(),
        ),
        None => Solution::Infeasible,
    })
}

/// Sides for element blocks plus the direction bit of every block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub element_sides: ElementSides,
    pub direction_bits: BitVec,
}

impl Assignment {
    /// Direction bits: element blocks follow their side; an empty block
    /// reads T1 exactly when a T0 element block holds its line's slot.
    pub fn materialize(params: &Params, element_sides: ElementSides) -> Result<Self, SchemeError> {
        let mut bits = BitVec::zeros(params.num_blocks());
        for (&block, &side) in &element_sides {
            let b = BlockRef::new(params, block)?;
            match side {
                Side::T1 => bits.set(block),
                Side::T0 => {
                    for p in geometry::points_on_line(b.slope, params.x, b.line)
                        .expect("slope index starts at 1")
                    {
                        let other = params.block_at(b.superblock, p);
                        if other != block {
                            bits.set(other);
                        }
                    }
                }
            }
        }
        Ok(Self {
            element_sides,
            direction_bits: bits,
        })
    }
}

/// A sealed structure holding a set of at most [`CAPACITY`] elements.
#[derive(Debug, Clone)]
pub struct StoredSet {
    layout: Arc<Layout>,
    tables: Tables,
    /// Stored elements, kept for audit and never read by queries.
    elements: Option<Vec<u64>>,
}

impl PartialEq for StoredSet {
    fn eq(&self, other: &Self) -> bool {
        self.layout.params == other.layout.params
            && self.tables == other.tables
            && self.elements == other.elements
    }
}

/// Store `elements` (duplicates collapse) into fresh tables.
pub fn store(layout: &Arc<Layout>, elements: &[u64]) -> Result<StoredSet, SchemeError> {
    let params = &layout.params;
    let mut set: Vec<u64> = elements.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.len() > CAPACITY {
        return Err(SchemeError::Capacity(set.len()));
    }
    let mut addressed = Vec::with_capacity(set.len());
    for &e in &set {
        addressed.push(address(params, e)?);
    }
    let mut blocks: Vec<BlockRef> = addressed.iter().map(|(b, _)| *b).collect();
    blocks.dedup_by_key(|b| b.global_block);

    let sides = match solve_assignment(&blocks)? {
        Solution::Feasible(s) => s,
        Solution::Infeasible => {
            return Err(SchemeError::ContractViolation {
                elements: set,
                blocks: blocks.iter().map(|b| b.global_block).collect(),
            })
        }
    };
    let tables = write_tables(layout, &sides, &addressed)?;
    Ok(StoredSet {
        layout: Arc::clone(layout),
        tables,
        elements: Some(set),
    })
}

/// Write `elements` with the given block sides without checking that the
/// sides are storable. The result may answer some queries wrongly; it is
/// meant for inspecting sets the solver rejects.
pub fn store_forced(
    layout: &Arc<Layout>,
    elements: &[u64],
    sides: &ElementSides,
) -> Result<StoredSet, SchemeError> {
    let params = &layout.params;
    let mut set: Vec<u64> = elements.to_vec();
    set.sort_unstable();
    set.dedup();
    if set.len() > AUDIT_LIMIT {
        return Err(SchemeError::Capacity(set.len()));
    }
    let mut addressed = Vec::with_capacity(set.len());
    for &e in &set {
        let a = address(params, e)?;
        if !sides.contains_key(&a.0.global_block) {
            return Err(SchemeError::MissingSide(a.0.global_block));
        }
        addressed.push(a);
    }
    let tables = write_tables(layout, sides, &addressed)?;
    Ok(StoredSet {
        layout: Arc::clone(layout),
        tables,
        elements: Some(set),
    })
}

fn write_tables(
    layout: &Layout,
    sides: &ElementSides,
    addressed: &[(BlockRef, u64)],
) -> Result<Tables, SchemeError> {
    let params = &layout.params;
    let assignment = Assignment::materialize(params, sides.clone())?;
    let mut tables = Tables::new(params, layout.directory.total_lines());
    for block in assignment.direction_bits.ones() {
        tables.set_t(block)?;
    }
    for (block, offset) in addressed {
        match sides[&block.global_block] {
            Side::T1 => tables.set_t1(block.point, *offset)?,
            Side::T0 => {
                let slot = layout.directory.slot(block.slope, block.line)?;
                tables.set_t0(slot, *offset)?;
            }
        }
    }
    tables.seal();
    Ok(tables)
}

impl StoredSet {
    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn params(&self) -> &Params {
        &self.layout.params
    }

    pub fn tables(&self) -> &Tables {
        &self.tables
    }

    pub fn audit_elements(&self) -> Option<&[u64]> {
        self.elements.as_deref()
    }

    /// Membership of an element of the requested universe, in two probes.
    pub fn query(&self, element: u64) -> Result<bool, SchemeError> {
        let (block, offset) = address(self.params(), element)?;
        self.probe_pair(&block, offset)
    }

    /// [`StoredSet::query`] extended to the padding past `m_requested`,
    /// which always answers false.
    pub fn query_padded(&self, element: u64) -> Result<bool, SchemeError> {
        let (block, offset) = address_padded(self.params(), element)?;
        self.probe_pair(&block, offset)
    }

    fn probe_pair(&self, block: &BlockRef, offset: u64) -> Result<bool, SchemeError> {
        if self.tables.probe_t(block.global_block)? {
            Ok(self.tables.probe_t1(block.point, offset)?)
        } else {
            let slot = self.layout.directory.slot(block.slope, block.line)?;
            Ok(self.tables.probe_t0(slot, offset)?)
        }
    }

    #[doc(hidden)]
    pub fn inject_direction_fault(&mut self, block: u64) {
        self.tables.inject_direction_fault(block);
    }

    pub fn header(&self) -> Header {
        let p = self.params();
        Header {
            m_requested: p.m_requested,
            m_padded: p.m_padded,
            x: p.x,
            y: p.y,
            num_superblocks: p.num_superblocks,
            total_lines: self.layout.directory.total_lines(),
        }
    }

    /// Tables format plus a trailing audit section: a flag byte, then (if
    /// set) a u64 count and the elements.
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        self.tables.write_to(&self.header(), w)?;
        match &self.elements {
            Some(el) => {
                w.write_all(&[1])?;
                w.write_all(&(el.len() as u64).to_le_bytes())?;
                for e in el {
                    w.write_all(&e.to_le_bytes())?;
                }
            }
            None => w.write_all(&[0])?,
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    /// Bare tables format, without the audit trailer.
    pub fn tables_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.tables
            .write_to(&self.header(), &mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    /// Decode either the bare tables format or tables plus audit trailer.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, SchemeError> {
        let (header, tables) = Tables::read_from(r)?;
        let params = Params::from_parts(
            header.m_requested,
            header.x,
            header.y,
            Some(header.num_superblocks),
        )
        .map_err(|e| TableError::Corrupt(e.to_string()))?;
        if params.m_padded != header.m_padded {
            return Err(TableError::Corrupt("padded size disagrees with layout".into()).into());
        }
        let layout = Layout::new(params);
        if layout.directory.total_lines() != header.total_lines {
            return Err(TableError::Corrupt("line count disagrees with layout".into()).into());
        }
        let elements = read_audit(r)?;
        Ok(Self {
            layout: Arc::new(layout),
            tables,
            elements,
        })
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, SchemeError> {
        Self::read_from(&mut bytes)
    }
}

fn read_audit<R: Read>(r: &mut R) -> Result<Option<Vec<u64>>, TableError> {
    let mut flag = [0u8; 1];
    let elements = match r.read(&mut flag)? {
        0 => return Ok(None),
        _ => match flag[0] {
            0 => None,
            1 => {
                let count = tables::read_u64(r)?;
                if count > AUDIT_LIMIT as u64 {
                    return Err(TableError::Corrupt(format!("audit lists {count} elements")));
                }
                let mut el = Vec::with_capacity(count as usize);
                for _ in 0..count {
                    el.push(tables::read_u64(r)?);
                }
                Some(el)
            }
            f => return Err(TableError::Corrupt(format!("audit flag {f}"))),
        },
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(TableError::Corrupt("trailing bytes".into()));
    }
    Ok(elements)
}
