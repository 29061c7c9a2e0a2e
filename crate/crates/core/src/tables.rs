//! The three bit vectors T, T0 and T1, their probe primitives, and the
//! binary format.
//!
//! Format (all integers little-endian):
//!
//! ```text
//! "BP5\0"  u16 version
//! u64 m_requested, m_padded, x, y, num_superblocks, total_lines
//! T, T0, T1: each u64 bit length followed by ⌈len/64⌉ u64 words
//! ```
//!
//! Bit `i` of a vector lives in word `i / 64` at position `i % 64`.

use crate::geometry::CubePoint;
use crate::layout::Params;
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"BP5\0";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{table} index {index} out of range (length {len})")]
    OutOfRange {
        table: &'static str,
        index: u64,
        len: u64,
    },
    #[error("offset {offset} out of range for block size {y}")]
    OffsetOutOfRange { offset: u64, y: u64 },
    #[error("tables are sealed")]
    Sealed,
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u16),
    #[error("corrupt structure: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Fixed-length bit vector over little-endian 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitVec {
    words: Vec<u64>,
    len: u64,
}

impl BitVec {
    pub fn zeros(len: u64) -> Self {
        Self {
            words: vec![0; len.div_ceil(64) as usize],
            len,
        }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        debug_assert!(i < self.len);
        (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: u64) {
        debug_assert!(i < self.len);
        self.words[(i / 64) as usize] |= 1 << (i % 64);
    }

    #[inline]
    pub(crate) fn toggle(&mut self, i: u64) {
        self.words[(i / 64) as usize] ^= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(&self.len.to_le_bytes())?;
        for word in &self.words {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R, expected_len: u64, name: &str) -> Result<Self, TableError> {
        let len = read_u64(r)?;
        if len != expected_len {
            return Err(TableError::Corrupt(format!(
                "{name} has {len} bits, header implies {expected_len}"
            )));
        }
        let mut v = Self::zeros(len);
        for word in v.words.iter_mut() {
            *word = read_u64(r)?;
        }
        if len % 64 != 0 {
            let tail = v.words.last().copied().unwrap_or(0) >> (len % 64);
            if tail != 0 {
                return Err(TableError::Corrupt(format!("{name} has bits past its end")));
            }
        }
        Ok(v)
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

/// Per-thread probe tallies. Every probe primitive bumps the calling
/// thread's counter; callers diff [`probes::current`] around a query.
/// With the `probe-accounting` feature off, all of this compiles to
/// nothing and [`probes::current`] stays at zero.
pub mod probes {
    #[cfg(feature = "probe-accounting")]
    thread_local! {
        static TALLY: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
    }

    #[inline]
    pub(crate) fn record() {
        #[cfg(feature = "probe-accounting")]
        TALLY.with(|t| t.set(t.get() + 1));
    }

    /// Probes performed so far on this thread.
    #[inline]
    pub fn current() -> u64 {
        #[cfg(feature = "probe-accounting")]
        {
            TALLY.with(|t| t.get())
        }
        #[cfg(not(feature = "probe-accounting"))]
        {
            0
        }
    }

    pub const fn enabled() -> bool {
        cfg!(feature = "probe-accounting")
    }
}

/// Table header fields that pin down the layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub m_requested: u64,
    pub m_padded: u64,
    pub x: u64,
    pub y: u64,
    pub num_superblocks: u64,
    pub total_lines: u64,
}

/// T (one direction bit per block), T0 (one `y`-bit slot per line) and
/// T1 (one `y`-bit slot per cube point).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    y: u64,
    x: u64,
    t: BitVec,
    t0: BitVec,
    t1: BitVec,
    sealed: bool,
}

impl Tables {
    pub fn new(params: &Params, total_lines: u64) -> Self {
        Self {
            y: params.y,
            x: params.x,
            t: BitVec::zeros(params.num_blocks()),
            t0: BitVec::zeros(total_lines * params.y),
            t1: BitVec::zeros(params.x.pow(3) * params.y),
            sealed: false,
        }
    }

    pub fn t(&self) -> &BitVec {
        &self.t
    }

    pub fn t0(&self) -> &BitVec {
        &self.t0
    }

    pub fn t1(&self) -> &BitVec {
        &self.t1
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn seal(&mut self) {
        self.sealed = true;
    }

    fn check_offset(&self, offset: u64) -> Result<(), TableError> {
        if offset >= self.y {
            Err(TableError::OffsetOutOfRange { offset, y: self.y })
        } else {
            Ok(())
        }
    }

    fn check_t(&self, block: u64) -> Result<(), TableError> {
        if block >= self.t.len() {
            return Err(TableError::OutOfRange {
                table: "T",
                index: block,
                len: self.t.len(),
            });
        }
        Ok(())
    }

    fn t1_index(&self, point: CubePoint, offset: u64) -> Result<u64, TableError> {
        self.check_offset(offset)?;
        if point.a >= self.x || point.b >= self.x || point.z >= self.x {
            return Err(TableError::OutOfRange {
                table: "T1",
                index: point.index(self.x),
                len: self.x.pow(3),
            });
        }
        Ok(point.index(self.x) * self.y + offset)
    }

    fn t0_index(&self, slot: u64, offset: u64) -> Result<u64, TableError> {
        self.check_offset(offset)?;
        let slots = self.t0.len() / self.y;
        if slot >= slots {
            return Err(TableError::OutOfRange {
                table: "T0",
                index: slot,
                len: slots,
            });
        }
        Ok(slot * self.y + offset)
    }

    /// First probe: the direction bit of a block.
    pub fn probe_t(&self, block: u64) -> Result<bool, TableError> {
        self.check_t(block)?;
        probes::record();
        Ok(self.t.get(block))
    }

    /// Second probe when the direction bit is 1.
    pub fn probe_t1(&self, point: CubePoint, offset: u64) -> Result<bool, TableError> {
        let i = self.t1_index(point, offset)?;
        probes::record();
        Ok(self.t1.get(i))
    }

    /// Second probe when the direction bit is 0.
    pub fn probe_t0(&self, slot: u64, offset: u64) -> Result<bool, TableError> {
        let i = self.t0_index(slot, offset)?;
        probes::record();
        Ok(self.t0.get(i))
    }

    fn writable(&self) -> Result<(), TableError> {
        if self.sealed {
            Err(TableError::Sealed)
        } else {
            Ok(())
        }
    }

    pub fn set_t(&mut self, block: u64) -> Result<(), TableError> {
        self.writable()?;
        self.check_t(block)?;
        self.t.set(block);
        Ok(())
    }

    pub fn set_t1(&mut self, point: CubePoint, offset: u64) -> Result<(), TableError> {
        self.writable()?;
        let i = self.t1_index(point, offset)?;
        self.t1.set(i);
        Ok(())
    }

    pub fn set_t0(&mut self, slot: u64, offset: u64) -> Result<(), TableError> {
        self.writable()?;
        let i = self.t0_index(slot, offset)?;
        self.t0.set(i);
        Ok(())
    }

    /// Flip a direction bit even on sealed tables. Only for fault-injection
    /// checks of the verifier.
    #[doc(hidden)]
    pub fn inject_direction_fault(&mut self, block: u64) {
        self.t.toggle(block);
    }

    pub fn write_to<W: Write>(&self, header: &Header, w: &mut W) -> io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        for field in [
            header.m_requested,
            header.m_padded,
            header.x,
            header.y,
            header.num_superblocks,
            header.total_lines,
        ] {
            w.write_all(&field.to_le_bytes())?;
        }
        self.t.write_to(w)?;
        self.t0.write_to(w)?;
        self.t1.write_to(w)
    }

    /// Read a header and the three vectors; the result is sealed.
    pub fn read_from<R: Read>(r: &mut R) -> Result<(Header, Self), TableError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MAGIC {
            return Err(TableError::BadMagic);
        }
        let mut version = [0u8; 2];
        r.read_exact(&mut version)?;
        let version = u16::from_le_bytes(version);
        if version != VERSION {
            return Err(TableError::BadVersion(version));
        }
        let mut f = [0u64; 6];
        for v in f.iter_mut() {
            *v = read_u64(r)?;
        }
        let header = Header {
            m_requested: f[0],
            m_padded: f[1],
            x: f[2],
            y: f[3],
            num_superblocks: f[4],
            total_lines: f[5],
        };
        let Header {
            x,
            y,
            m_padded,
            total_lines,
            ..
        } = header;
        if x == 0 || y == 0 || m_padded % y != 0 {
            return Err(TableError::Corrupt("inconsistent header".into()));
        }
        let cube = x
            .checked_pow(3)
            .and_then(|c| c.checked_mul(y))
            .ok_or_else(|| TableError::Corrupt("cube size overflows".into()))?;
        let t0_len = total_lines
            .checked_mul(y)
            .ok_or_else(|| TableError::Corrupt("T0 size overflows".into()))?;
        let t = BitVec::read_from(r, m_padded / y, "T")?;
        let t0 = BitVec::read_from(r, t0_len, "T0")?;
        let t1 = BitVec::read_from(r, cube, "T1")?;
        Ok((
            header,
            Self {
                y,
                x,
                t,
                t0,
                t1,
                sealed: true,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Params;

    fn small() -> (Params, Tables) {
        let p = Params::choose(1024, Some((4, 2))).unwrap();
        let t = Tables::new(&p, 10);
        (p, t)
    }

    #[test]
    fn lengths_follow_params() {
        let (p, t) = small();
        assert_eq!(t.t().len(), 512);
        assert_eq!(t.t1().len(), 128);
        assert_eq!(t.t0().len(), 20);
        assert_eq!(t.t().len(), p.num_blocks());
    }

    #[test]
    fn zero_tables_read_zero() {
        let (_, t) = small();
        assert!(!t.probe_t(0).unwrap());
        assert!(!t.probe_t(511).unwrap());
        assert!(!t.probe_t1(CubePoint { a: 3, b: 3, z: 3 }, 1).unwrap());
        assert!(!t.probe_t0(9, 1).unwrap());
    }

    #[test]
    fn bounds_are_checked() {
        let (_, t) = small();
        assert!(matches!(t.probe_t(512), Err(TableError::OutOfRange { .. })));
        assert!(matches!(
            t.probe_t1(CubePoint { a: 0, b: 0, z: 0 }, 2),
            Err(TableError::OffsetOutOfRange { .. })
        ));
        assert!(t.probe_t1(CubePoint { a: 4, b: 0, z: 0 }, 0).is_err());
        assert!(t.probe_t0(10, 0).is_err());
        assert!(t.probe_t0(0, 2).is_err());
    }

    #[test]
    fn set_then_read_and_seal() {
        let (_, mut t) = small();
        let p = CubePoint { a: 1, b: 2, z: 3 };
        t.set_t(7).unwrap();
        t.set_t(7).unwrap();
        t.set_t1(p, 1).unwrap();
        t.set_t0(4, 0).unwrap();
        assert!(t.probe_t(7).unwrap());
        assert!(t.probe_t1(p, 1).unwrap());
        assert!(!t.probe_t1(p, 0).unwrap());
        assert!(t.probe_t0(4, 0).unwrap());
        assert_eq!(t.t().count_ones(), 1);
        assert_eq!(t.t1().ones().collect::<Vec<_>>(), vec![p.index(4) * 2 + 1]);

        t.seal();
        assert!(matches!(t.set_t(8), Err(TableError::Sealed)));
        assert!(matches!(t.set_t1(p, 0), Err(TableError::Sealed)));
        assert!(matches!(t.set_t0(0, 0), Err(TableError::Sealed)));
    }

    #[cfg(feature = "probe-accounting")]
    #[test]
    fn probes_are_counted() {
        let (_, t) = small();
        let before = probes::current();
        t.probe_t(0).unwrap();
        t.probe_t0(0, 0).unwrap();
        assert_eq!(probes::current() - before, 2);
        let _ = t.probe_t(9999);
        assert_eq!(probes::current() - before, 2);
    }

    #[test]
    fn serialization_layout() {
        let (p, mut t) = small();
        t.set_t(0).unwrap();
        t.set_t(65).unwrap();
        t.seal();
        let header = Header {
            m_requested: 1024,
            m_padded: p.m_padded,
            x: 4,
            y: 2,
            num_superblocks: 8,
            total_lines: 10,
        };
        let mut bytes = Vec::new();
        t.write_to(&header, &mut bytes).unwrap();
        assert_eq!(&bytes[..6], b"BP5\0\x01\x00");
        assert_eq!(u64::from_le_bytes(bytes[6..14].try_into().unwrap()), 1024);
        // T length then first two words.
        assert_eq!(u64::from_le_bytes(bytes[54..62].try_into().unwrap()), 512);
        assert_eq!(u64::from_le_bytes(bytes[62..70].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[70..78].try_into().unwrap()), 2);
        let expected_len = 6 + 48 + (8 + 64) + (8 + 8) + (8 + 16);
        assert_eq!(bytes.len(), expected_len);

        let (h2, t2) = Tables::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(h2, header);
        assert_eq!(t2, t);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            Tables::read_from(&mut bad.as_slice()),
            Err(TableError::BadMagic)
        ));
        let truncated = &bytes[..bytes.len() - 3];
        assert!(Tables::read_from(&mut &truncated[..]).is_err());
    }
}
