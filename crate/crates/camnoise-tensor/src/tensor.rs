//! Dense row-major tensors of rank 1 through 4.

use crate::element::Element;
use crate::error::GraphError;

/// Maximum supported tensor rank (batch × channels × height × width).
pub const MAX_RANK: usize = 4;

/// A dense row-major tensor with a static shape.
///
/// Rank is between 1 and [`MAX_RANK`]; the last dimension varies fastest.
/// This is deliberately a plain data container — all structure (batch,
/// channel, spatial interpretation) lives in the graph nodes that use it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F: Element> {
    dims: Vec<usize>,
    data: Vec<F>,
}

impl<F: Element> Tensor<F> {
    /// Creates a tensor from a shape and matching backing buffer.
    ///
    /// # Errors
    ///
    /// Returns [`GraphError::BadTensor`] when the rank is 0 or above
    /// [`MAX_RANK`], any dimension is 0, or `data.len()` differs from the
    /// product of `dims`.
    pub fn new(dims: &[usize], data: Vec<F>) -> Result<Self, GraphError> {
        if dims.is_empty() || dims.len() > MAX_RANK {
            return Err(GraphError::BadTensor(format!(
                "rank {} outside supported range 1..={MAX_RANK}",
                dims.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(GraphError::BadTensor(format!(
                "zero-sized dimension in shape {dims:?}"
            )));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(GraphError::BadTensor(format!(
                "shape {dims:?} needs {len} elements, buffer holds {}",
                data.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Creates a zero-filled tensor of the given shape.
    ///
    /// # Panics
    ///
    /// Panics on an invalid shape (see [`Tensor::new`]); zero construction is
    /// only used with shapes the library itself derived.
    pub fn zeros(dims: &[usize]) -> Self {
        let len: usize = dims.iter().product();
        Self::new(dims, vec![F::ZERO; len]).expect("internally derived shape must be valid")
    }

    /// Tensor shape, outermost dimension first.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total element count.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True when the tensor holds no elements (never true for a valid shape).
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Read-only view of the row-major backing buffer.
    pub fn data(&self) -> &[F] {
        &self.data
    }

    /// Mutable view of the row-major backing buffer.
    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    /// Consumes the tensor and returns the backing buffer.
    pub fn into_data(self) -> Vec<F> {
        self.data
    }
}
