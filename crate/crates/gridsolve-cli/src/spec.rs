//! Problem specifications: what matrix and right-hand side to solve.

use std::path::PathBuf;
use std::str::FromStr;

use gridsolve::dense::{DenseMatrix, DenseVector};
use gridsolve::error::{Error, Result};
use gridsolve::scalar::Scalar;
use gridsolve::{gen, io};

/// Matrix source: a seeded generator kind or a file.
///
/// Textual form: `random_dense:n=64`, `spd:n=64`, `poisson2d:n=64`,
/// `file:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatrixSpec {
    RandomDense { n: usize },
    Spd { n: usize },
    Poisson2d { n: usize },
    File { path: PathBuf },
}

impl MatrixSpec {
    pub fn realize<S: Scalar>(&self, seed: u64) -> Result<DenseMatrix<S>> {
        match self {
            MatrixSpec::RandomDense { n } => Ok(gen::random_dense(*n, seed)),
            MatrixSpec::Spd { n } => Ok(gen::spd(*n, seed)),
            MatrixSpec::Poisson2d { n } => gen::poisson2d(*n),
            MatrixSpec::File { path } => load_matrix(path),
        }
    }
}

impl FromStr for MatrixSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "file" => {
                if rest.is_empty() {
                    return Err(Error::InvalidInput("file spec needs a path: file:PATH".into()));
                }
                Ok(MatrixSpec::File { path: rest.into() })
            }
            "random_dense" | "spd" | "poisson2d" => {
                let n = parse_n(rest)?;
                Ok(match kind {
                    "random_dense" => MatrixSpec::RandomDense { n },
                    "spd" => MatrixSpec::Spd { n },
                    _ => MatrixSpec::Poisson2d { n },
                })
            }
            other => Err(Error::InvalidInput(format!(
                "unknown matrix kind `{other}` (expected random_dense, spd, poisson2d, or file)"
            ))),
        }
    }
}

fn parse_n(rest: &str) -> Result<usize> {
    for part in rest.split(',') {
        if let Some(v) = part.strip_prefix("n=") {
            return v
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad dimension `{v}`")));
        }
    }
    Err(Error::InvalidInput(
        "generator spec needs a dimension, e.g. spd:n=64".into(),
    ))
}

/// Right-hand-side source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RhsSpec {
    Ones,
    Random,
    File { path: PathBuf },
}

impl RhsSpec {
    pub fn realize<S: Scalar>(&self, n: usize, seed: u64) -> Result<DenseVector<S>> {
        match self {
            RhsSpec::Ones => Ok(DenseVector::ones(n)),
            // offset keeps the rhs stream independent of the matrix stream
            RhsSpec::Random => Ok(gen::random_rhs(n, seed ^ 0x9E37_79B9)),
            RhsSpec::File { path } => {
                let m = load_matrix::<S>(path)?;
                if m.cols() != 1 {
                    return Err(Error::InvalidInput(format!(
                        "rhs file must hold a single column, got {}x{}",
                        m.rows(),
                        m.cols()
                    )));
                }
                Ok(m.into_vector())
            }
        }
    }
}

impl FromStr for RhsSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ones" => Ok(RhsSpec::Ones),
            "random" => Ok(RhsSpec::Random),
            other => match other.split_once(':') {
                Some(("file", path)) if !path.is_empty() => Ok(RhsSpec::File { path: path.into() }),
                _ => Err(Error::InvalidInput(format!(
                    "unknown rhs spec `{other}` (expected ones, random, or file:PATH)"
                ))),
            },
        }
    }
}

/// Loads a matrix file, sniffing Matrix Market vs raw binary from the
/// leading bytes.
pub fn load_matrix<S: Scalar>(path: &std::path::Path) -> Result<DenseMatrix<S>> {
    let mut head = [0u8; 14];
    {
        use std::io::Read;
        let mut f = std::fs::File::open(path)?;
        let got = f.read(&mut head)?;
        if got == 0 {
            return Err(Error::InvalidInput(format!("{} is empty", path.display())));
        }
    }
    if head.starts_with(b"%%MatrixMarket") {
        io::read_matrix_market_file(path)
    } else {
        let file_precision = io::binary_file_precision(path)?;
        if file_precision != S::PRECISION {
            // precision mixing is a dimension-class error, not an i/o one
            return Err(Error::DimensionMismatch(format!(
                "{} holds {file_precision} data, run requested {}",
                path.display(),
                S::PRECISION
            )));
        }
        io::read_binary_file(path)
    }
}
