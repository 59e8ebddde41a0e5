//! Matrix file formats: Matrix Market (array written, array and coordinate
//! read) and the raw binary layout shared with the transport wire encoding.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::transport::wire;

/// How a matrix is laid out in a Matrix Market file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmSymmetry {
    General,
    Symmetric,
}

/// Writes a dense matrix in Matrix Market array format. Symmetric output
/// stores the lower triangle only, per the format definition.
pub fn write_matrix_market<S: Scalar, W: Write>(
    out: &mut W,
    m: &DenseMatrix<S>,
    symmetry: MmSymmetry,
) -> Result<()> {
    let sym = match symmetry {
        MmSymmetry::General => "general",
        MmSymmetry::Symmetric => "symmetric",
    };
    if symmetry == MmSymmetry::Symmetric && m.rows() != m.cols() {
        return Err(Error::InvalidInput(
            "symmetric matrix market output needs a square matrix".into(),
        ));
    }
    writeln!(out, "%%MatrixMarket matrix array real {sym}")?;
    writeln!(out, "{} {}", m.rows(), m.cols())?;
    for j in 0..m.cols() {
        let start = if symmetry == MmSymmetry::Symmetric { j } else { 0 };
        for i in start..m.rows() {
            writeln!(out, "{:?}", m.get(i, j).to_f64())?;
        }
    }
    Ok(())
}

pub fn write_matrix_market_file<S: Scalar>(
    path: &Path,
    m: &DenseMatrix<S>,
    symmetry: MmSymmetry,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix_market(&mut f, m, symmetry)
}

/// Reads a Matrix Market file into a dense matrix. Array and coordinate
/// formats are accepted; coordinate input is densified. Symmetric (and
/// skew-symmetric) storage is expanded to both triangles.
pub fn read_matrix_market<S: Scalar, R: Read>(input: R) -> Result<DenseMatrix<S>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty matrix market file".into()))??;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5 || fields[0] != "%%MatrixMarket" || fields[1] != "matrix" {
        return Err(Error::InvalidInput(
            "expected a `%%MatrixMarket matrix ...` header".into(),
        ));
    }
    let format = fields[2];
    let field = fields[3];
    let symmetry = fields[4];
    if !matches!(field, "real" | "integer" | "double") {
        return Err(Error::InvalidInput(format!(
            "unsupported matrix market field `{field}` (real data only)"
        )));
    }
    let (sym, skew) = match symmetry {
        "general" => (false, false),
        "symmetric" => (true, false),
        "skew-symmetric" => (true, true),
        other => {
            return Err(Error::InvalidInput(format!(
                "unsupported matrix market symmetry `{other}`"
            )))
        }
    };

    // first non-comment line carries the size
    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some(t.to_string());
        break;
    }
    let size_line = size_line.ok_or_else(|| Error::InvalidInput("missing size line".into()))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| Error::InvalidInput(format!("bad size entry `{v}`")))
        })
        .collect::<Result<_>>()?;

    let parse_val = |tok: &str| -> Result<f64> {
        tok.parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad numeric entry `{tok}`")))
    };

    match format {
        "array" => {
            if dims.len() != 2 {
                return Err(Error::InvalidInput("array size line needs `rows cols`".into()));
            }
            let (rows, cols) = (dims[0], dims[1]);
            if sym && rows != cols {
                return Err(Error::InvalidInput("symmetric array must be square".into()));
            }
            let mut m = DenseMatrix::<S>::zeros(rows, cols);
            let mut j = 0usize;
            let mut i = 0usize;
            let mut done = rows == 0 || cols == 0;
            for line in lines {
                let line = line?;
                for tok in line.split_whitespace() {
                    if tok.starts_with('%') {
                        break;
                    }
                    if done {
                        return Err(Error::InvalidInput("too many array entries".into()));
                    }
                    let v = S::from_f64(parse_val(tok)?);
                    m.set(i, j, v);
                    if sym && i != j {
                        m.set(j, i, if skew { -v } else { v });
                    }
                    i += 1;
                    if i >= rows {
                        j += 1;
                        i = if sym { j } else { 0 };
                        if j >= cols {
                            done = true;
                        }
                    }
                }
            }
            if !done {
                return Err(Error::InvalidInput("array data ended early".into()));
            }
            Ok(m)
        }
        "coordinate" => {
            if dims.len() != 3 {
                return Err(Error::InvalidInput(
                    "coordinate size line needs `rows cols nnz`".into(),
                ));
            }
            let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
            let mut m = DenseMatrix::<S>::zeros(rows, cols);
            let mut seen = 0usize;
            for line in lines {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('%') {
                    continue;
                }
                let toks: Vec<&str> = t.split_whitespace().collect();
                if toks.len() < 3 {
                    return Err(Error::InvalidInput(format!("bad coordinate line `{t}`")));
                }
                let i: usize = toks[0]
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad row index `{}`", toks[0])))?;
                let j: usize = toks[1]
                    .parse()
                    .map_err(|_| Error::InvalidInput(format!("bad col index `{}`", toks[1])))?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(Error::InvalidInput(format!(
                        "coordinate ({i},{j}) outside {rows}x{cols} (indices are 1-based)"
                    )));
                }
                let v = S::from_f64(parse_val(toks[2])?);
                m.set(i - 1, j - 1, v);
                if sym && i != j {
                    m.set(j - 1, i - 1, if skew { -v } else { v });
                }
                seen += 1;
            }
            if seen != nnz {
                return Err(Error::InvalidInput(format!(
                    "coordinate file promised {nnz} entries, found {seen}"
                )));
            }
            Ok(m)
        }
        other => Err(Error::InvalidInput(format!(
            "unsupported matrix market format `{other}`"
        ))),
    }
}

pub fn read_matrix_market_file<S: Scalar>(path: &Path) -> Result<DenseMatrix<S>> {
    read_matrix_market(std::fs::File::open(path)?)
}

/// Raw binary: the 24-byte header plus column-major little-endian payload
/// from the wire encoding.
pub fn write_binary_file<S: Scalar>(path: &Path, m: &DenseMatrix<S>) -> Result<()> {
    let bytes = wire::encode_matrix(m);
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_binary_file<S: Scalar>(path: &Path) -> Result<DenseMatrix<S>> {
    let bytes = std::fs::read(path)?;
    wire::decode_matrix::<S>(&bytes)
}

/// Peeks the precision tag of a raw binary file without loading the payload.
pub fn binary_file_precision(path: &Path) -> Result<crate::scalar::Precision> {
    let mut f = std::fs::File::open(path)?;
    let mut header = [0u8; wire::MATRIX_HEADER_LEN];
    f.read_exact(&mut header)?;
    let (_, _, precision) = wire::decode_header(&header)?;
    Ok(precision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn array_round_trip_general() {
        let mut rng = SplitMix64::new(1);
        let m = DenseMatrix::<f64>::from_fn(5, 3, |_, _| rng.next_f64() * 10.0 - 5.0);
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m, MmSymmetry::General).unwrap();
        let back = read_matrix_market::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn array_round_trip_symmetric() {
        let mut rng = SplitMix64::new(2);
        let n = 4;
        let mut m = DenseMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = rng.next_f64();
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m, MmSymmetry::Symmetric).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix array real symmetric"));
        let back = read_matrix_market::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn coordinate_densifies_and_expands_symmetry() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n3 3 2.0\n";
        let m = read_matrix_market::<f64, _>(text.as_bytes()).unwrap();
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(2, 2), 2.0);
        assert_eq!(m.get(2, 0), 0.0);
    }

    #[test]
    fn rejects_malformed_headers() {
        assert!(read_matrix_market::<f64, _>("not a header\n1 1\n0\n".as_bytes()).is_err());
        assert!(read_matrix_market::<f64, _>(
            "%%MatrixMarket matrix array complex general\n1 1\n0 0\n".as_bytes()
        )
        .is_err());
    }

    #[test]
    fn binary_round_trip() {
        let dir = std::env::temp_dir().join("gridsolve-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.bin");
        let mut rng = SplitMix64::new(3);
        let m = DenseMatrix::<f64>::from_fn(6, 4, |_, _| rng.next_f64());
        write_binary_file(&path, &m).unwrap();
        assert_eq!(binary_file_precision(&path).unwrap(), crate::scalar::Precision::F64);
        let back = read_binary_file::<f64>(&path).unwrap();
        assert_eq!(back, m);
        // byte-exact determinism of the writer
        write_binary_file(&dir.join("m2.bin"), &m).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(dir.join("m2.bin")).unwrap()
        );
    }
}
