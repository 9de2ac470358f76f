//! Dense rank-≤4 tensors in (N, C, H, W) layout.
//!
//! Values are stored row-major. Training runs in `f32`; gradient checks use
//! `f64`, so every numeric kernel is generic over [`Real`].

use std::fmt;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Element type for all numeric kernels. Implemented for `f32` and `f64`.
pub trait Real:
    Float + NumAssignOps + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Dense tensor with up to four dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    /// All-zero tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(
            !shape.is_empty() && shape.len() <= 4,
            "tensor rank must be 1..=4, got {}",
            shape.len()
        );
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); len],
        }
    }

    /// Builds a tensor from existing data. Panics if the length does not
    /// match the shape product.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Self {
        assert!(!shape.is_empty() && shape.len() <= 4);
        let expect: usize = shape.iter().product();
        assert_eq!(
            data.len(),
            expect,
            "tensor data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn fill(&mut self, v: T) {
        self.data.fill(v);
    }

    /// Dimension size, with rank-checked access.
    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterprets the tensor with a new shape of identical volume.
    pub fn reshaped(mut self, shape: &[usize]) -> Self {
        let expect: usize = shape.iter().product();
        assert_eq!(self.data.len(), expect, "reshape volume mismatch");
        self.shape = shape.to_vec();
        self
    }

    /// Converts element type, used to cross between f32 training tensors and
    /// f64 gradient-check tensors.
    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }
}

/// Formats a shape as `NxCxHxW` for error messages.
pub fn fmt_shape(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}
