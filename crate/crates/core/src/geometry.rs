//! Lattice geometry of the `x`-sided cube that hosts table T1.
//!
//! Superblock `n` (1-based) partitions the cube into parallel lines with
//! direction vector `(n, 1, n²)`: slope `1/n` in the bottom layer, then
//! slope `n²/√(1+n²)` inside each vertical slice cut along those layer
//! lines. A line is identified by its two intercepts
//! `c = a − n·b` (layer) and `k = z − n²·b` (slice), so "same line" is an
//! equality test on [`LineId`].

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("slope index must be at least 1, got {0}")]
    ZeroSlope(u64),
    #[error("point ({a}, {b}, {z}) lies outside a cube of side {side}")]
    OutOfCube { a: u64, b: u64, z: u64, side: u64 },
    #[error("slope indices must be pairwise distinct, got ({0}, {1}, {2})")]
    RepeatedSlopes(u64, u64, u64),
}

/// An integral point of the cube, `0 ≤ a, b, z < side`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CubePoint {
    pub a: u64,
    pub b: u64,
    pub z: u64,
}

impl CubePoint {
    pub fn new(a: u64, b: u64, z: u64, side: u64) -> Result<Self, GeometryError> {
        if a >= side || b >= side || z >= side {
            return Err(GeometryError::OutOfCube { a, b, z, side });
        }
        Ok(Self { a, b, z })
    }

    /// Row-major position of the point: `a + b·side + z·side²`.
    pub fn index(&self, side: u64) -> u64 {
        self.a + side * (self.b + side * self.z)
    }

    /// Inverse of [`CubePoint::index`].
    pub fn from_index(index: u64, side: u64) -> Self {
        Self {
            a: index % side,
            b: (index / side) % side,
            z: index / (side * side),
        }
    }
}

/// The line of superblock `n`'s family through a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct LineId {
    /// Layer intercept `a − n·b`.
    pub c: i64,
    /// Slice intercept `z − n²·b`.
    pub k: i64,
}

fn check_slope(n: u64) -> Result<(), GeometryError> {
    if n == 0 {
        Err(GeometryError::ZeroSlope(n))
    } else {
        Ok(())
    }
}

/// Line through `p` in the family of slope index `n`.
pub fn line_id(n: u64, p: CubePoint) -> Result<LineId, GeometryError> {
    check_slope(n)?;
    Ok(line_id_unchecked(n, p))
}

#[inline]
pub(crate) fn line_id_unchecked(n: u64, p: CubePoint) -> LineId {
    let n = n as i64;
    let b = p.b as i64;
    LineId {
        c: p.a as i64 - n * b,
        k: p.z as i64 - n * n * b,
    }
}

/// The points of a line that fall inside the cube, in increasing `b`.
pub fn points_on_line(n: u64, side: u64, line: LineId) -> Result<Vec<CubePoint>, GeometryError> {
    check_slope(n)?;
    let n = n as i64;
    let side_i = side as i64;
    let pts = (0..side_i)
        .filter_map(|b| {
            let a = line.c + n * b;
            let z = line.k + n * n * b;
            ((0..side_i).contains(&a) && (0..side_i).contains(&z)).then_some(CubePoint {
                a: a as u64,
                b: b as u64,
                z: z as u64,
            })
        })
        .collect();
    Ok(pts)
}

/// Every line of family `n` that meets the cube, sorted by `(c, k)`.
pub fn enumerate_lines(n: u64, side: u64) -> Result<Vec<LineId>, GeometryError> {
    check_slope(n)?;
    let total = side.pow(3);
    let mut lines: Vec<LineId> = (0..total)
        .map(|i| line_id_unchecked(n, CubePoint::from_index(i, side)))
        .collect();
    lines.sort_unstable();
    lines.dedup();
    Ok(lines)
}

/// Closed-form count of slope-`1/n` lines covering an `x × x` grid:
/// `2x + (n−1)(x−1) − 1`.
pub fn count_layer_lines(n: u64, side: u64) -> Result<u64, GeometryError> {
    check_slope(n)?;
    if side == 0 {
        return Ok(0);
    }
    Ok(2 * side + (n - 1) * (side - 1) - 1)
}

/// Widest slice of family `n`: `x/n · √(1+n²)`. Reporting only.
pub fn slice_width(n: u64, side: u64) -> Result<f64, GeometryError> {
    check_slope(n)?;
    let n = n as f64;
    Ok(side as f64 / n * (1.0 + n * n).sqrt())
}

/// Determinant of the matrix whose rows are the direction vectors
/// `(nᵢ, 1, nᵢ²)`. It equals `(n₁−n₂)(n₂−n₃)(n₁−n₃)`, which is nonzero for
/// distinct indices, so three lines through a common point never share a
/// plane.
pub fn coplanarity_certificate(n1: u64, n2: u64, n3: u64) -> Result<i128, GeometryError> {
    for n in [n1, n2, n3] {
        check_slope(n)?;
    }
    if n1 == n2 || n2 == n3 || n1 == n3 {
        return Err(GeometryError::RepeatedSlopes(n1, n2, n3));
    }
    let row = |n: u64| {
        let n = n as i128;
        [n, 1, n * n]
    };
    let [r0, r1, r2] = [row(n1), row(n2), row(n3)];
    Ok(
        r0[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0])
            + r0[2] * (r1[0] * r2[1] - r1[1] * r2[0]),
    )
}
