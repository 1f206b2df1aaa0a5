//! Dense matrices and vectors over F_p.
//!
//! This is the trusted ground truth: every probabilistic component is
//! checked against [`FpMatrix::matvec`]. All indices are 0-based, and block
//! `i` of size `d` covers indices `i*d .. (i+1)*d`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::field::{FieldElement, PrimeField};

/// Row-major dense matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FpMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

/// Dense vector over a prime field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FpVector {
    field: PrimeField,
    data: Vec<u32>,
}

fn check_field(a: PrimeField, b: PrimeField) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::FieldMismatch {
            left: a.modulus(),
            right: b.modulus(),
        })
    }
}

impl FpMatrix {
    /// Builds a matrix from row-major integers, reducing each mod p.
    pub fn new(field: PrimeField, rows: usize, cols: usize, values: &[u64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let data = values.iter().map(|&x| field.element(x).value()).collect();
        Ok(Self {
            field,
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows(field: PrimeField, rows: &[&[u64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<u64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(field, rows.len(), cols, &flat)
    }

    pub(crate) fn from_raw(field: PrimeField, rows: usize, cols: usize, data: Vec<u32>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|&x| x < field.modulus()));
        Self {
            field,
            rows,
            cols,
            data,
        }
    }

    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Self::from_raw(field, rows, cols, vec![0; rows * cols])
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix entry by entry from a function of `(row, col)`.
    pub fn from_fn(
        field: PrimeField,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> FieldElement,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let e = f(i, j);
                check_field(field, e.field())?;
                data.push(e.value());
            }
        }
        Ok(Self::from_raw(field, rows, cols, data))
    }

    /// The `index`-th matrix in lexicographic (base-p, row-major) order.
    pub fn from_index(field: PrimeField, rows: usize, cols: usize, mut index: u64) -> Self {
        let p = field.order();
        let mut data = vec![0u32; rows * cols];
        for slot in data.iter_mut().rev() {
            *slot = (index % p) as u32;
            index /= p;
        }
        Self::from_raw(field, rows, cols, data)
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

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major residues.
    pub fn raw(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub(crate) fn raw_at(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Result<FieldElement> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::IndexOutOfRange(format!(
                "({i}, {j}) in a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(self.field.element(self.raw_at(i, j) as u64))
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Reference product `Mv`.
    pub fn matvec(&self, v: &FpVector) -> Result<FpVector> {
        check_field(self.field, v.field)?;
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let data = (0..self.rows)
            .map(|i| {
                self.field
                    .dot_raw(self.row(i).iter().copied(), v.data.iter().copied())
            })
            .collect();
        Ok(FpVector::from_raw(self.field, data))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        check_field(self.field, other.field)?;
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let f = self.field;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f.add_raw(a, b))
            .collect();
        Ok(Self::from_raw(f, self.rows, self.cols, data))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let f = self.field;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f.sub_raw(a, b))
            .collect();
        Ok(Self::from_raw(f, self.rows, self.cols, data))
    }

    /// The `d x d` block `(i, j)`: entries `M[i*d + r][j*d + c]`.
    pub fn block(&self, i: usize, j: usize, d: usize) -> Result<Self> {
        if d == 0 || self.rows % d != 0 || self.cols % d != 0 {
            return Err(Error::InvalidParameter(format!(
                "block size {d} does not divide {}x{}",
                self.rows, self.cols
            )));
        }
        if i >= self.rows / d || j >= self.cols / d {
            return Err(Error::IndexOutOfRange(format!(
                "block ({i}, {j}) with block size {d} in a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let mut data = Vec::with_capacity(d * d);
        for r in 0..d {
            let row = &self.row(i * d + r)[j * d..(j + 1) * d];
            data.extend_from_slice(row);
        }
        Ok(Self::from_raw(self.field, d, d, data))
    }

    /// Vertical stack of matrices with equal column counts.
    pub fn stack_rows(parts: &[FpMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to stack".into()))?;
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            check_field(first.field, m.field)?;
            if m.cols != first.cols {
                return Err(Error::DimensionMismatch("column counts differ".into()));
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Self::from_raw(first.field, rows, first.cols, data))
    }

    /// Horizontal stack of matrices with equal row counts.
    pub fn stack_cols(parts: &[FpMatrix]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to stack".into()))?;
        for m in parts {
            check_field(first.field, m.field)?;
            if m.rows != first.rows {
                return Err(Error::DimensionMismatch("row counts differ".into()));
            }
        }
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut data = Vec::with_capacity(first.rows * cols);
        for i in 0..first.rows {
            for m in parts {
                data.extend_from_slice(m.row(i));
            }
        }
        Ok(Self::from_raw(first.field, first.rows, cols, data))
    }
}

impl FpVector {
    pub fn new(field: PrimeField, values: &[u64]) -> Self {
        let data = values.iter().map(|&x| field.element(x).value()).collect();
        Self { field, data }
    }

    pub(crate) fn from_raw(field: PrimeField, data: Vec<u32>) -> Self {
        debug_assert!(data.iter().all(|&x| x < field.modulus()));
        Self { field, data }
    }

    pub fn from_elements(field: PrimeField, elems: &[FieldElement]) -> Result<Self> {
        for e in elems {
            check_field(field, e.field())?;
        }
        Ok(Self::from_raw(
            field,
            elems.iter().map(|e| e.value()).collect(),
        ))
    }

    pub fn zeros(field: PrimeField, len: usize) -> Self {
        Self::from_raw(field, vec![0; len])
    }

    /// The `index`-th vector in lexicographic (base-p) order.
    pub fn from_index(field: PrimeField, len: usize, mut index: u64) -> Self {
        let p = field.order();
        let mut data = vec![0u32; len];
        for slot in data.iter_mut().rev() {
            *slot = (index % p) as u32;
            index /= p;
        }
        Self::from_raw(field, data)
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn raw(&self) -> &[u32] {
        &self.data
    }

    pub fn get(&self, i: usize) -> Result<FieldElement> {
        self.data
            .get(i)
            .map(|&x| self.field.element(x as u64))
            .ok_or_else(|| {
                Error::IndexOutOfRange(format!("{i} in a length-{} vector", self.data.len()))
            })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        check_field(self.field, other.field)?;
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "length {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let f = self.field;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f.add_raw(a, b))
            .collect();
        Ok(Self::from_raw(f, data))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let f = self.field;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f.sub_raw(a, b))
            .collect();
        Ok(Self::from_raw(f, data))
    }

    pub fn scale(&self, c: FieldElement) -> Result<Self> {
        check_field(self.field, c.field())?;
        let f = self.field;
        Ok(Self::from_raw(
            f,
            self.data.iter().map(|&a| f.mul_raw(a, c.value())).collect(),
        ))
    }

    /// Entries `offset .. offset + len`.
    pub fn slice(&self, offset: usize, len: usize) -> Result<Self> {
        if offset + len > self.len() {
            return Err(Error::IndexOutOfRange(format!(
                "slice {offset}..{} of a length-{} vector",
                offset + len,
                self.len()
            )));
        }
        Ok(Self::from_raw(
            self.field,
            self.data[offset..offset + len].to_vec(),
        ))
    }

    pub fn concat(parts: &[FpVector]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("nothing to concatenate".into()))?;
        let mut data = Vec::new();
        for v in parts {
            check_field(first.field, v.field)?;
            data.extend_from_slice(&v.data);
        }
        Ok(Self::from_raw(first.field, data))
    }
}

pub fn random_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    field: PrimeField,
    rng: &mut R,
) -> Result<FpMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let p = field.modulus();
    let data = (0..rows * cols).map(|_| rng.gen_range(0..p)).collect();
    Ok(FpMatrix::from_raw(field, rows, cols, data))
}

pub fn random_vector<R: Rng + ?Sized>(
    len: usize,
    field: PrimeField,
    rng: &mut R,
) -> Result<FpVector> {
    if len == 0 {
        return Err(Error::InvalidParameter(
            "vector length must be positive".into(),
        ));
    }
    let p = field.modulus();
    Ok(FpVector::from_raw(
        field,
        (0..len).map(|_| rng.gen_range(0..p)).collect(),
    ))
}

/// A square instance padded so that `k` divides its dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Padded {
    pub matrix: FpMatrix,
    pub vector: FpVector,
    pub original_n: usize,
}

/// Embeds `M` in the top-left of an `n' x n'` matrix, where `n'` is the
/// smallest multiple of `k` that is at least `n`. Padding rows and columns
/// are zero except for ones on the padded diagonal; `v` is zero-extended.
/// The first `n` coordinates of the padded product equal `Mv`.
pub fn pad_to_multiple(m: &FpMatrix, v: &FpVector, k: usize) -> Result<Padded> {
    check_field(m.field, v.field)?;
    if !m.is_square() || m.cols != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix and matching vector, got {}x{} and {}",
            m.rows,
            m.cols,
            v.len()
        )));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let n = m.rows;
    let padded_n = n.div_ceil(k) * k;
    if padded_n == n {
        return Ok(Padded {
            matrix: m.clone(),
            vector: v.clone(),
            original_n: n,
        });
    }
    let mut data = vec![0u32; padded_n * padded_n];
    for i in 0..n {
        data[i * padded_n..i * padded_n + n].copy_from_slice(m.row(i));
    }
    for i in n..padded_n {
        data[i * padded_n + i] = 1;
    }
    let mut vdata = v.data.clone();
    vdata.resize(padded_n, 0);
    Ok(Padded {
        matrix: FpMatrix::from_raw(m.field, padded_n, padded_n, data),
        vector: FpVector::from_raw(v.field, vdata),
        original_n: n,
    })
}
