//! Wire encoding shared by the transport and the raw binary file format.
//!
//! Scalars are IEEE-754 little-endian. A matrix is a 24-byte header — rows,
//! cols, precision tag (the scalar byte width), each an unsigned 64-bit
//! little-endian field — followed by the column-major payload.

use crate::dense::{DenseMatrix, DenseVector};
use crate::error::{Error, Result};
use crate::scalar::{Precision, Scalar};

pub const MATRIX_HEADER_LEN: usize = 24;

pub fn encode_scalars<S: Scalar>(values: &[S], out: &mut Vec<u8>) {
    out.reserve(values.len() * S::PRECISION.width());
    for &v in values {
        v.write_le(out);
    }
}

pub fn decode_scalars<S: Scalar>(bytes: &[u8]) -> Result<Vec<S>> {
    let w = S::PRECISION.width();
    if bytes.len() % w != 0 {
        return Err(Error::CollectiveMisuse(format!(
            "scalar payload of {} bytes is not a multiple of {w}",
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(w).map(S::read_le).collect())
}

pub fn encode_header(rows: usize, cols: usize, precision: Precision) -> [u8; MATRIX_HEADER_LEN] {
    let mut h = [0u8; MATRIX_HEADER_LEN];
    h[0..8].copy_from_slice(&(rows as u64).to_le_bytes());
    h[8..16].copy_from_slice(&(cols as u64).to_le_bytes());
    h[16..24].copy_from_slice(&(precision.width() as u64).to_le_bytes());
    h
}

pub fn decode_header(bytes: &[u8]) -> Result<(usize, usize, Precision)> {
    if bytes.len() < MATRIX_HEADER_LEN {
        return Err(Error::InvalidInput("matrix header truncated".into()));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let tag = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let precision = Precision::from_width(tag)
        .ok_or_else(|| Error::InvalidInput(format!("unknown precision tag {tag}")))?;
    Ok((rows, cols, precision))
}

/// Serializes a matrix: 24-byte header plus column-major scalars (padding
/// rows are not transmitted).
pub fn encode_matrix<S: Scalar>(m: &DenseMatrix<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(MATRIX_HEADER_LEN + m.rows() * m.cols() * S::PRECISION.width());
    out.extend_from_slice(&encode_header(m.rows(), m.cols(), S::PRECISION));
    for j in 0..m.cols() {
        encode_scalars(m.col(j), &mut out);
    }
    out
}

pub fn decode_matrix<S: Scalar>(bytes: &[u8]) -> Result<DenseMatrix<S>> {
    let (rows, cols, precision) = decode_header(bytes)?;
    if precision != S::PRECISION {
        return Err(Error::InvalidInput(format!(
            "matrix payload is {precision}, expected {}",
            S::PRECISION
        )));
    }
    let data = decode_scalars::<S>(&bytes[MATRIX_HEADER_LEN..])?;
    if data.len() != rows * cols {
        return Err(Error::InvalidInput(format!(
            "matrix payload holds {} scalars, header says {rows}x{cols}",
            data.len()
        )));
    }
    DenseMatrix::from_column_major(rows, cols, data)
}

/// A vector travels as an `n x 1` matrix.
pub fn encode_vector<S: Scalar>(v: &DenseVector<S>) -> Vec<u8> {
    let mut out = Vec::with_capacity(MATRIX_HEADER_LEN + v.len() * S::PRECISION.width());
    out.extend_from_slice(&encode_header(v.len(), 1, S::PRECISION));
    encode_scalars(v.as_slice(), &mut out);
    out
}

pub fn decode_vector<S: Scalar>(bytes: &[u8]) -> Result<DenseVector<S>> {
    let m = decode_matrix::<S>(bytes)?;
    if m.cols() != 1 {
        return Err(Error::InvalidInput(format!(
            "expected a vector, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.into_vector())
}
