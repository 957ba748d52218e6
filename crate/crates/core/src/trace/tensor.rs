//! `FVTS` tensor container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "FVTS"
//! 4       2           version, u16 LE (= 1)
//! 6       1           dtype (1 = f32)
//! 7       1           ndim (2, 3 or 4)
//! 8       8 * ndim    dims, u64 LE each
//! ...     4 * prod    payload, row-major f32 LE
//! ```
//!
//! Two dimensions hold one matrix, three a stack of matrices, and four a
//! `layer x head x query x key` attention dump.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::linalg::DenseMatrix;

pub const MAGIC: [u8; 4] = *b"FVTS";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 1;
/// Largest element count a reader will allocate.
pub const MAX_ELEMENTS: u64 = 1 << 31;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    values: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        if !(2..=4).contains(&dims.len()) {
            return invalid(format!(
                "tensor must have 2 to 4 dimensions, got {}",
                dims.len()
            ));
        }
        if dims.contains(&0) {
            return invalid(format!("tensor dimensions must be positive, got {dims:?}"));
        }
        let count: usize = dims.iter().product();
        if count != values.len() {
            return invalid(format!(
                "dims {dims:?} need {count} values, got {}",
                values.len()
            ));
        }
        Ok(Self { dims, values })
    }

    /// Narrows a matrix to `f32`.
    pub fn from_matrix(matrix: &DenseMatrix) -> Self {
        Self {
            dims: vec![matrix.rows(), matrix.cols()],
            values: matrix.data().iter().map(|&v| v as f32).collect(),
        }
    }

    /// Stacks equally shaped matrices into a 3-D tensor.
    pub fn from_matrices(matrices: &[DenseMatrix]) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return invalid("matrix stack is empty");
        };
        let (r, c) = (first.rows(), first.cols());
        if matrices.iter().any(|m| m.rows() != r || m.cols() != c) {
            return invalid("matrices in a stack must share one shape");
        }
        let values = matrices
            .iter()
            .flat_map(|m| m.data().iter().map(|&v| v as f32))
            .collect();
        Self::new(vec![matrices.len(), r, c], values)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Matrices addressable by [`Tensor::matrix`]: 1 for 2-D, the leading
    /// dimension for 3-D, none for 4-D.
    pub fn matrix_count(&self) -> usize {
        match self.dims.len() {
            2 => 1,
            3 => self.dims[0],
            _ => 0,
        }
    }

    /// Matrix `index`, widened to `f64`.
    pub fn matrix(&self, index: usize) -> Result<DenseMatrix> {
        let count = self.matrix_count();
        if index >= count {
            return invalid(format!(
                "matrix index {index} out of range for tensor with dims {:?}",
                self.dims
            ));
        }
        let (r, c) = (
            self.dims[self.dims.len() - 2],
            self.dims[self.dims.len() - 1],
        );
        let data = self.values[index * r * c..(index + 1) * r * c]
            .iter()
            .map(|&v| v as f64)
            .collect();
        DenseMatrix::new(r, c, data)
    }
}

pub fn write_tensor<W: Write>(tensor: &Tensor, mut sink: W) -> Result<()> {
    let mut header = Vec::with_capacity(8 + 8 * tensor.dims.len());
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.push(DTYPE_F32);
    header.push(tensor.dims.len() as u8);
    for &d in &tensor.dims {
        header.extend_from_slice(&(d as u64).to_le_bytes());
    }
    sink.write_all(&header)?;
    let mut payload = Vec::with_capacity(4 * tensor.values.len());
    for v in &tensor.values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&payload)?;
    sink.flush()?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut source: R) -> Result<Tensor> {
    let mut fixed = [0u8; 8];
    read_or_truncated(&mut source, &mut fixed, "header")?;
    if fixed[..4] != MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &fixed[..4])));
    }
    let version = u16::from_le_bytes([fixed[4], fixed[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    if fixed[6] != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype {}", fixed[6])));
    }
    let ndim = fixed[7] as usize;
    if !(2..=4).contains(&ndim) {
        return Err(Error::Format(format!("unsupported ndim {ndim}")));
    }
    let mut dim_bytes = vec![0u8; 8 * ndim];
    read_or_truncated(&mut source, &mut dim_bytes, "dims")?;
    let dims: Vec<u64> = dim_bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if dims.contains(&0) {
        return Err(Error::Format(format!("zero dimension in {dims:?}")));
    }
    let elements = dims
        .iter()
        .try_fold(1u128, |acc, &d| acc.checked_mul(d as u128))
        .unwrap_or(u128::MAX);
    if elements > MAX_ELEMENTS as u128 {
        return Err(Error::Size {
            elements,
            limit: MAX_ELEMENTS,
        });
    }
    let mut payload = vec![0u8; 4 * elements as usize];
    read_or_truncated(&mut source, &mut payload, "payload")?;
    let mut extra = [0u8; 1];
    if source.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Tensor::new(dims.iter().map(|&d| d as usize).collect(), values)
}

fn read_or_truncated<R: Read>(source: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    source.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub fn read_tensor_file(path: &Path) -> Result<Tensor> {
    read_tensor(BufReader::new(File::open(path)?))
}

pub fn write_tensor_file(tensor: &Tensor, path: &Path) -> Result<()> {
    write_tensor(tensor, BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(t: &Tensor) -> Vec<u8> {
        let mut buf = Vec::new();
        write_tensor(t, &mut buf).unwrap();
        buf
    }

    #[test]
    fn identity_round_trip() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let bytes = encode(&t);
        assert_eq!(&bytes[..8], b"FVTS\x01\x00\x01\x02");
        assert_eq!(bytes.len(), 8 + 16 + 16);
        let back = read_tensor(&bytes[..]).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.matrix(0).unwrap().data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn header_errors() {
        let good = encode(&Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_tensor(&bad_magic[..]), Err(Error::Format(_))));
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(
            read_tensor(&bad_version[..]),
            Err(Error::Format(_))
        ));
        let mut bad_dtype = good.clone();
        bad_dtype[6] = 2;
        assert!(matches!(read_tensor(&bad_dtype[..]), Err(Error::Format(_))));
        let mut bad_ndim = good.clone();
        bad_ndim[7] = 5;
        assert!(matches!(read_tensor(&bad_ndim[..]), Err(Error::Format(_))));
        assert!(matches!(
            read_tensor(&good[..good.len() - 1]),
            Err(Error::Format(_))
        ));
        assert!(matches!(read_tensor(&good[..5]), Err(Error::Format(_))));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(read_tensor(&trailing[..]), Err(Error::Format(_))));
    }

    #[test]
    fn oversized_dims_are_refused_before_allocation() {
        let mut bytes = b"FVTS\x01\x00\x01\x02".to_vec();
        bytes.extend_from_slice(&(1u64 << 20).to_le_bytes());
        bytes.extend_from_slice(&(1u64 << 12).to_le_bytes());
        assert!(matches!(read_tensor(&bytes[..]), Err(Error::Size { .. })));
        let mut huge = b"FVTS\x01\x00\x01\x03".to_vec();
        for _ in 0..3 {
            huge.extend_from_slice(&u64::MAX.to_le_bytes());
        }
        assert!(matches!(read_tensor(&huge[..]), Err(Error::Size { .. })));
    }

    #[test]
    fn stacks_and_indexing() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let t = Tensor::from_matrices(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(t.dims(), &[2, 1, 2]);
        assert_eq!(t.matrix(1).unwrap(), b);
        assert!(t.matrix(2).is_err());
        let four = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        assert!(four.matrix(0).is_err());
        assert!(Tensor::new(vec![4], vec![0.0; 4]).is_err());
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }
}
