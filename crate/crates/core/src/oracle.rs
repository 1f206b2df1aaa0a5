//! Query-counted oracle access to matrices and vectors, and the index-routing
//! transformers built on top of it: row/column concatenation, extraction,
//! block embedding and output summation.
//!
//! An oracle is an immutable composition tree. Leaves either hold local data
//! (free to read) or wrap an input and charge a [`QueryLedger`] on every
//! charged read. Composite nodes only route indices, so a charged query on a
//! composite reaches exactly the leaves its entry depends on.
//!
//! Reads come in two flavours. [`MatrixOracle::query`] is an algorithm-level
//! query and charges the ledger at the leaves. [`MatrixOracle::peek`] is for
//! simulation machinery (computing ground truth, evaluating a solver
//! profile) and charges nothing.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};
use crate::linalg::{FpMatrix, FpVector};

/// Who a ledger entry is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    /// Entry reads of the input matrix `U_M`.
    Matrix,
    /// Entry reads of the input vector `U_v`.
    Vector,
    /// Calls to the average-case solver.
    Solver,
    /// Model cost charged by the product verifier.
    VerifierCharged,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::Matrix,
        Source::Vector,
        Source::Solver,
        Source::VerifierCharged,
    ];

    fn slot(self) -> usize {
        match self {
            Source::Matrix => 0,
            Source::Vector => 1,
            Source::Solver => 2,
            Source::VerifierCharged => 3,
        }
    }
}

/// Per-source monotone query counters. One ledger belongs to one trial.
#[derive(Debug, Default)]
pub struct QueryLedger {
    counters: [AtomicU64; 4],
}

/// A point-in-time copy of a ledger.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub matrix: u64,
    pub vector: u64,
    pub solver: u64,
    pub verifier_charged: u64,
}

impl QueryLedger {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    #[inline]
    pub fn charge(&self, source: Source, amount: u64) {
        self.counters[source.slot()].fetch_add(amount, Ordering::Relaxed);
    }

    pub fn count(&self, source: Source) -> u64 {
        self.counters[source.slot()].load(Ordering::Relaxed)
    }

    pub fn total(&self) -> u64 {
        Source::ALL.iter().map(|&s| self.count(s)).sum()
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        LedgerSnapshot {
            matrix: self.count(Source::Matrix),
            vector: self.count(Source::Vector),
            solver: self.count(Source::Solver),
            verifier_charged: self.count(Source::VerifierCharged),
        }
    }
}

impl LedgerSnapshot {
    pub fn total(&self) -> u64 {
        self.matrix + self.vector + self.solver + self.verifier_charged
    }

    /// Matrix reads plus verifier-charged cost, the merged `U_M` count.
    pub fn matrix_merged(&self) -> u64 {
        self.matrix + self.verifier_charged
    }

    /// Component-wise difference `self - earlier`.
    pub fn since(&self, earlier: &LedgerSnapshot) -> LedgerSnapshot {
        LedgerSnapshot {
            matrix: self.matrix - earlier.matrix,
            vector: self.vector - earlier.vector,
            solver: self.solver - earlier.solver,
            verifier_charged: self.verifier_charged - earlier.verifier_charged,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Access {
    Charged,
    Free,
}

trait MatrixNode: Send + Sync {
    /// Indices are already range-checked by the handle.
    fn entry(&self, i: usize, j: usize, access: Access) -> u32;
}

trait VectorNode: Send + Sync {
    fn entry(&self, i: usize, access: Access) -> u32;
}

/// Oracle access to a matrix. Cheap to clone.
#[derive(Clone)]
pub struct MatrixOracle {
    field: PrimeField,
    rows: usize,
    cols: usize,
    node: Arc<dyn MatrixNode>,
}

/// Oracle access to a vector. Cheap to clone.
#[derive(Clone)]
pub struct VectorOracle {
    field: PrimeField,
    len: usize,
    node: Arc<dyn VectorNode>,
}

impl fmt::Debug for MatrixOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MatrixOracle({}x{} over {})",
            self.rows, self.cols, self.field
        )
    }
}

impl fmt::Debug for VectorOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorOracle({} over {})", self.len, self.field)
    }
}

struct MatrixLeaf {
    matrix: FpMatrix,
    charge: Option<(Arc<QueryLedger>, Source)>,
}

impl MatrixNode for MatrixLeaf {
    #[inline]
    fn entry(&self, i: usize, j: usize, access: Access) -> u32 {
        if access == Access::Charged {
            if let Some((ledger, source)) = &self.charge {
                ledger.charge(*source, 1);
            }
        }
        self.matrix.raw_at(i, j)
    }
}

struct VectorLeaf {
    vector: FpVector,
    charge: Option<(Arc<QueryLedger>, Source)>,
}

impl VectorNode for VectorLeaf {
    #[inline]
    fn entry(&self, i: usize, access: Access) -> u32 {
        if access == Access::Charged {
            if let Some((ledger, source)) = &self.charge {
                ledger.charge(*source, 1);
            }
        }
        self.vector.raw()[i]
    }
}

struct RowConcat {
    parts: Vec<MatrixOracle>,
    d: usize,
}

impl MatrixNode for RowConcat {
    fn entry(&self, i: usize, j: usize, access: Access) -> u32 {
        self.parts[i / self.d].node.entry(i % self.d, j, access)
    }
}

struct ColConcat {
    parts: Vec<MatrixOracle>,
    d: usize,
}

impl MatrixNode for ColConcat {
    fn entry(&self, i: usize, j: usize, access: Access) -> u32 {
        self.parts[j / self.d].node.entry(i, j % self.d, access)
    }
}

/// Index shift into a parent: `(i, j) -> (row_off + i, col_off + j)`.
struct Window {
    parent: MatrixOracle,
    row_off: usize,
    col_off: usize,
}

impl MatrixNode for Window {
    fn entry(&self, i: usize, j: usize, access: Access) -> u32 {
        self.parent
            .node
            .entry(self.row_off + i, self.col_off + j, access)
    }
}

/// A `d x d` parent placed at column block `position`, zero elsewhere.
struct Embedded {
    parent: MatrixOracle,
    lo: usize,
    hi: usize,
}

impl MatrixNode for Embedded {
    fn entry(&self, i: usize, j: usize, access: Access) -> u32 {
        if (self.lo..self.hi).contains(&j) {
            self.parent.node.entry(i, j - self.lo, access)
        } else {
            0
        }
    }
}

struct VectorConcat {
    parts: Vec<VectorOracle>,
    d: usize,
}

impl VectorNode for VectorConcat {
    fn entry(&self, i: usize, access: Access) -> u32 {
        self.parts[i / self.d].node.entry(i % self.d, access)
    }
}

struct VectorWindow {
    parent: VectorOracle,
    off: usize,
}

impl VectorNode for VectorWindow {
    fn entry(&self, i: usize, access: Access) -> u32 {
        self.parent.node.entry(self.off + i, access)
    }
}

struct VectorSum {
    parts: Vec<VectorOracle>,
    field: PrimeField,
}

impl VectorNode for VectorSum {
    fn entry(&self, i: usize, access: Access) -> u32 {
        self.parts
            .iter()
            .fold(0, |acc, p| self.field.add_raw(acc, p.node.entry(i, access)))
    }
}

fn same_field(a: PrimeField, b: PrimeField) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::FieldMismatch {
            left: a.modulus(),
            right: b.modulus(),
        })
    }
}

/// Oracle for `M` charging [`Source::Matrix`] on every query.
pub fn wrap_matrix(m: FpMatrix, ledger: &Arc<QueryLedger>) -> MatrixOracle {
    MatrixOracle::charged(m, ledger, Source::Matrix)
}

/// Oracle for `v` charging [`Source::Vector`] on every query.
pub fn wrap_vector(v: FpVector, ledger: &Arc<QueryLedger>) -> VectorOracle {
    VectorOracle::charged(v, ledger, Source::Vector)
}

impl MatrixOracle {
    pub fn charged(m: FpMatrix, ledger: &Arc<QueryLedger>, source: Source) -> Self {
        Self::leaf(m, Some((Arc::clone(ledger), source)))
    }

    /// Oracle over locally held data; queries are free.
    pub fn local(m: FpMatrix) -> Self {
        Self::leaf(m, None)
    }

    fn leaf(m: FpMatrix, charge: Option<(Arc<QueryLedger>, Source)>) -> Self {
        Self {
            field: m.field(),
            rows: m.rows(),
            cols: m.cols(),
            node: Arc::new(MatrixLeaf { matrix: m, charge }),
        }
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::IndexOutOfRange(format!(
                "query ({i}, {j}) on a {}x{} oracle",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Charged query for entry `(i, j)`.
    pub fn query(&self, i: usize, j: usize) -> Result<FieldElement> {
        self.check(i, j)?;
        Ok(self
            .field
            .element(self.node.entry(i, j, Access::Charged) as u64))
    }

    /// Uncharged read for entry `(i, j)`.
    pub fn peek(&self, i: usize, j: usize) -> Result<FieldElement> {
        self.check(i, j)?;
        Ok(self
            .field
            .element(self.node.entry(i, j, Access::Free) as u64))
    }

    pub(crate) fn read(&self, i: usize, j: usize, access: Access) -> u32 {
        debug_assert!(i < self.rows && j < self.cols);
        self.node.entry(i, j, access)
    }

    fn collect(&self, access: Access) -> FpMatrix {
        let mut data = Vec::with_capacity(self.rows * self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                data.push(self.node.entry(i, j, access));
            }
        }
        FpMatrix::from_raw(self.field, self.rows, self.cols, data)
    }

    /// Reads every entry with charged queries.
    pub fn read_all(&self) -> FpMatrix {
        self.collect(Access::Charged)
    }

    /// Reads every entry without charging.
    pub fn materialize(&self) -> FpMatrix {
        self.collect(Access::Free)
    }
}

impl VectorOracle {
    pub fn charged(v: FpVector, ledger: &Arc<QueryLedger>, source: Source) -> Self {
        Self::leaf(v, Some((Arc::clone(ledger), source)))
    }

    pub fn local(v: FpVector) -> Self {
        Self::leaf(v, None)
    }

    fn leaf(v: FpVector, charge: Option<(Arc<QueryLedger>, Source)>) -> Self {
        Self {
            field: v.field(),
            len: v.len(),
            node: Arc::new(VectorLeaf { vector: v, charge }),
        }
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.len {
            return Err(Error::IndexOutOfRange(format!(
                "query {i} on a length-{} oracle",
                self.len
            )));
        }
        Ok(())
    }

    pub fn query(&self, i: usize) -> Result<FieldElement> {
        self.check(i)?;
        Ok(self
            .field
            .element(self.node.entry(i, Access::Charged) as u64))
    }

    pub fn peek(&self, i: usize) -> Result<FieldElement> {
        self.check(i)?;
        Ok(self.field.element(self.node.entry(i, Access::Free) as u64))
    }

    pub(crate) fn read(&self, i: usize, access: Access) -> u32 {
        debug_assert!(i < self.len);
        self.node.entry(i, access)
    }

    fn collect(&self, access: Access) -> FpVector {
        FpVector::from_raw(
            self.field,
            (0..self.len).map(|i| self.node.entry(i, access)).collect(),
        )
    }

    pub fn read_all(&self) -> FpVector {
        self.collect(Access::Charged)
    }

    pub fn materialize(&self) -> FpVector {
        self.collect(Access::Free)
    }
}

fn check_parts<T>(parts: &[T], what: &str) -> Result<()> {
    if parts.is_empty() {
        return Err(Error::InvalidParameter(format!("no {what} to combine")));
    }
    Ok(())
}

/// Row-wise concatenation of `N` oracles, each `d x n`, into an `Nd x n`
/// oracle. Query `(i, j)` routes to part `i / d` at `(i mod d, j)`.
pub fn concat_rows(parts: Vec<MatrixOracle>) -> Result<MatrixOracle> {
    check_parts(&parts, "matrices")?;
    let (field, d, n) = (parts[0].field, parts[0].rows, parts[0].cols);
    for p in &parts {
        same_field(field, p.field)?;
        if p.rows != d || p.cols != n {
            return Err(Error::DimensionMismatch(format!(
                "row concatenation of {d}x{n} and {}x{}",
                p.rows, p.cols
            )));
        }
    }
    if d == 0 {
        return Err(Error::InvalidParameter("empty blocks".into()));
    }
    Ok(MatrixOracle {
        field,
        rows: parts.len() * d,
        cols: n,
        node: Arc::new(RowConcat { parts, d }),
    })
}

/// Column-wise concatenation of `N` oracles, each `n x d`, into an `n x Nd`
/// oracle. Query `(i, j)` routes to part `j / d` at `(i, j mod d)`.
pub fn concat_cols(parts: Vec<MatrixOracle>) -> Result<MatrixOracle> {
    check_parts(&parts, "matrices")?;
    let (field, n, d) = (parts[0].field, parts[0].rows, parts[0].cols);
    for p in &parts {
        same_field(field, p.field)?;
        if p.rows != n || p.cols != d {
            return Err(Error::DimensionMismatch(format!(
                "column concatenation of {n}x{d} and {}x{}",
                p.rows, p.cols
            )));
        }
    }
    if d == 0 {
        return Err(Error::InvalidParameter("empty blocks".into()));
    }
    Ok(MatrixOracle {
        field,
        rows: n,
        cols: parts.len() * d,
        node: Arc::new(ColConcat { parts, d }),
    })
}

/// Concatenation of `N` vector oracles of length `d`.
pub fn concat_vectors(parts: Vec<VectorOracle>) -> Result<VectorOracle> {
    check_parts(&parts, "vectors")?;
    let (field, d) = (parts[0].field, parts[0].len);
    for p in &parts {
        same_field(field, p.field)?;
        if p.len != d {
            return Err(Error::DimensionMismatch(format!(
                "vector concatenation of lengths {d} and {}",
                p.len
            )));
        }
    }
    if d == 0 {
        return Err(Error::InvalidParameter("empty blocks".into()));
    }
    Ok(VectorOracle {
        field,
        len: parts.len() * d,
        node: Arc::new(VectorConcat { parts, d }),
    })
}

fn check_window(offset: usize, size: usize, total: usize, axis: &str) -> Result<()> {
    if size == 0 || size > total || offset > total - size {
        return Err(Error::IndexOutOfRange(format!(
            "{axis} window at offset {offset} of size {size} in extent {total}"
        )));
    }
    Ok(())
}

fn window(
    parent: &MatrixOracle,
    row_off: usize,
    rows: usize,
    col_off: usize,
    cols: usize,
) -> MatrixOracle {
    MatrixOracle {
        field: parent.field,
        rows,
        cols,
        node: Arc::new(Window {
            parent: parent.clone(),
            row_off,
            col_off,
        }),
    }
}

/// The `d x n` submatrix of rows `offset .. offset + d`.
pub fn extract_submatrix(parent: &MatrixOracle, offset: usize, d: usize) -> Result<MatrixOracle> {
    check_window(offset, d, parent.rows, "row")?;
    Ok(window(parent, offset, d, 0, parent.cols))
}

/// The `n x d` submatrix of columns `offset .. offset + d`.
pub fn extract_submatrix_cols(
    parent: &MatrixOracle,
    offset: usize,
    d: usize,
) -> Result<MatrixOracle> {
    check_window(offset, d, parent.cols, "column")?;
    Ok(window(parent, 0, parent.rows, offset, d))
}

/// Block `M^{(i,j)}`: query `(r, c)` reads parent `(i*d + r, j*d + c)`.
pub fn extract_block(parent: &MatrixOracle, i: usize, j: usize, d: usize) -> Result<MatrixOracle> {
    if d == 0 || parent.rows % d != 0 || parent.cols % d != 0 {
        return Err(Error::InvalidParameter(format!(
            "block size {d} does not divide {}x{}",
            parent.rows, parent.cols
        )));
    }
    let rows = extract_submatrix(parent, i * d, d)?;
    extract_submatrix_cols(&rows, j * d, d)
}

/// Entries `offset .. offset + d` of a vector oracle.
pub fn extract_subvector(parent: &VectorOracle, offset: usize, d: usize) -> Result<VectorOracle> {
    check_window(offset, d, parent.len, "vector")?;
    Ok(VectorOracle {
        field: parent.field,
        len: d,
        node: Arc::new(VectorWindow {
            parent: parent.clone(),
            off: offset,
        }),
    })
}

/// Entry-wise sum; each query reads every component once.
pub fn sum_vector_oracles(parts: Vec<VectorOracle>) -> Result<VectorOracle> {
    check_parts(&parts, "vectors")?;
    let (field, len) = (parts[0].field, parts[0].len);
    for p in &parts {
        same_field(field, p.field)?;
        if p.len != len {
            return Err(Error::DimensionMismatch(format!(
                "sum of lengths {len} and {}",
                p.len
            )));
        }
    }
    Ok(VectorOracle {
        field,
        len,
        node: Arc::new(VectorSum { parts, field }),
    })
}

/// Places a `d x d` oracle as column block `position` of a `d x kd` oracle
/// whose other entries are zero. Zero entries cost no parent query.
pub fn embed_block_matrix(
    parent: &MatrixOracle,
    position: usize,
    k: usize,
) -> Result<MatrixOracle> {
    let d = parent.rows;
    if parent.cols != d {
        return Err(Error::DimensionMismatch(format!(
            "embedding needs a square block, got {}x{}",
            parent.rows, parent.cols
        )));
    }
    if position >= k {
        return Err(Error::IndexOutOfRange(format!(
            "block position {position} with {k} blocks"
        )));
    }
    Ok(MatrixOracle {
        field: parent.field,
        rows: d,
        cols: k * d,
        node: Arc::new(Embedded {
            parent: parent.clone(),
            lo: position * d,
            hi: (position + 1) * d,
        }),
    })
}

/// A square oracle grown to `padded_n`: the parent sits top-left, padded
/// diagonal entries are one, everything else in the padding is zero.
struct PaddedMatrix {
    parent: MatrixOracle,
    n: usize,
}

impl MatrixNode for PaddedMatrix {
    fn entry(&self, i: usize, j: usize, access: Access) -> u32 {
        if i < self.n && j < self.n {
            self.parent.node.entry(i, j, access)
        } else {
            (i == j) as u32
        }
    }
}

struct PaddedVector {
    parent: VectorOracle,
}

impl VectorNode for PaddedVector {
    fn entry(&self, i: usize, access: Access) -> u32 {
        if i < self.parent.len {
            self.parent.node.entry(i, access)
        } else {
            0
        }
    }
}

/// Oracle view of [`crate::linalg::pad_to_multiple`] for a square matrix.
pub fn pad_matrix_oracle(parent: &MatrixOracle, padded_n: usize) -> Result<MatrixOracle> {
    let n = parent.rows;
    if parent.cols != n || padded_n < n {
        return Err(Error::DimensionMismatch(format!(
            "cannot pad a {}x{} oracle to {padded_n}",
            parent.rows, parent.cols
        )));
    }
    if padded_n == n {
        return Ok(parent.clone());
    }
    Ok(MatrixOracle {
        field: parent.field,
        rows: padded_n,
        cols: padded_n,
        node: Arc::new(PaddedMatrix {
            parent: parent.clone(),
            n,
        }),
    })
}

/// Zero-extends a vector oracle to `padded_len`.
pub fn pad_vector_oracle(parent: &VectorOracle, padded_len: usize) -> Result<VectorOracle> {
    if padded_len < parent.len {
        return Err(Error::DimensionMismatch(format!(
            "cannot pad a length-{} oracle to {padded_len}",
            parent.len
        )));
    }
    if padded_len == parent.len {
        return Ok(parent.clone());
    }
    Ok(VectorOracle {
        field: parent.field,
        len: padded_len,
        node: Arc::new(PaddedVector {
            parent: parent.clone(),
        }),
    })
}
