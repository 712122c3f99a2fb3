//! Dense row-major matrices over the extended reals.
//!
//! Rows index the x side, columns the y side; the flattened pair index of
//! entry `(x, y)` is `x * cols + y` and is shared by every vectorized view
//! in the crate (quadratic forms, grid axes over pair space).
//!
//! JSON form: `{"rows": r, "cols": c, "data": [..]}` with row-major `data`.
//! Infinite entries serialize as the strings `"inf"` and `"-inf"` so that
//! files round-trip losslessly; NaN is rejected on both paths.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|x| x.is_nan()) {
            return Err(Error::Domain("matrix entry is NaN".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn require_same_shape(&self, other: &Matrix, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Entrywise combination; shapes must already agree.
    pub fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        debug_assert!(self.same_shape(other));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn emin(&self, other: &Matrix) -> Matrix {
        self.zip(other, f64::min)
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.zip(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        self.zip(other, |a, b| a + b)
    }

    /// Largest absolute entry; infinite entries dominate.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn sup_diff(&self, other: &Matrix) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.data[i * self.cols..(i + 1) * self.cols].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// True if every entry of `self` is `<= other + tol`.
    pub fn le(&self, other: &Matrix, tol: f64) -> bool {
        debug_assert!(self.same_shape(other));
        self.data.iter().zip(&other.data).all(|(&a, &b)| a <= b + tol)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// One extended-real entry in a JSON array.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum Entry {
    Num(f64),
    Word(String),
}

pub(crate) fn entry_to_json(x: f64) -> Entry {
    if x == f64::INFINITY {
        Entry::Word("inf".into())
    } else if x == f64::NEG_INFINITY {
        Entry::Word("-inf".into())
    } else {
        Entry::Num(x)
    }
}

pub(crate) fn entry_from_json(e: &Entry) -> std::result::Result<f64, String> {
    match e {
        Entry::Num(x) if x.is_nan() => Err("NaN entry".into()),
        Entry::Num(x) => Ok(*x),
        Entry::Word(w) => match w.as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            other => Err(format!("unrecognized entry {other:?}")),
        },
    }
}

/// Serialize a slice of extended reals with `"inf"` / `"-inf"` markers.
pub fn serialize_ext_slice<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|&x| entry_to_json(x)))
}

/// Deserialize a vector of extended reals accepting `"inf"` / `"-inf"`.
pub fn deserialize_ext_vec<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<f64>, D::Error> {
    let raw = Vec::<Entry>::deserialize(d)?;
    raw.iter()
        .map(|e| entry_from_json(e).map_err(D::Error::custom))
        .collect()
}

#[derive(Serialize)]
struct MatrixSer<'a> {
    rows: usize,
    cols: usize,
    #[serde(serialize_with = "serialize_ext_slice")]
    data: &'a [f64],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDe {
    rows: usize,
    cols: usize,
    #[serde(deserialize_with = "deserialize_ext_vec")]
    data: Vec<f64>,
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixSer { rows: self.rows, cols: self.cols, data: &self.data }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixDe::deserialize(d)?;
        Matrix::new(raw.rows, raw.cols, raw.data).map_err(D::Error::custom)
    }
}
