//! Minimal dense CHW tensor and the scalar abstraction.
//!
//! The whole numerical stack is generic over [`Scalar`] so the same code path
//! can run in `f32` (training speed) and `f64` (the finite-difference and
//! oracle suites). Loss *values* are always accumulated in `f64` regardless of
//! the activation type.

use crate::error::{Error, Result};

/// Floating-point element of tensors and parameters.
pub trait Scalar:
    num_traits::Float + Copy + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static
{
    const DTYPE: &'static str;
    const BYTES: usize;

    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Bit pattern, widened to u64. Used for byte-identity assertions.
    fn bits(self) -> u64;
    fn write_le(self, out: &mut Vec<u8>);
    fn from_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;

    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn bits(self) -> u64 {
        self.to_bits() as u64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn bits(self) -> u64 {
        self.to_bits()
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn from_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

/// Dense `[channels, height, width]` tensor, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    c: usize,
    h: usize,
    w: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor { c, h, w, data: vec![T::zero(); c * h * w] }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != c * h * w {
            return Err(Error::Shape(format!(
                "tensor data length {} != {}x{}x{}",
                data.len(),
                c,
                h,
                w
            )));
        }
        Ok(Tensor { c, h, w, data })
    }

    pub fn c(&self) -> usize {
        self.c
    }
    pub fn h(&self) -> usize {
        self.h
    }
    pub fn w(&self) -> usize {
        self.w
    }
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
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

    #[inline]
    pub fn channel(&self, c: usize) -> &[T] {
        let hw = self.h * self.w;
        &self.data[c * hw..(c + 1) * hw]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let hw = self.h * self.w;
        &mut self.data[c * hw..(c + 1) * hw]
    }

    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[T] {
        let start = (c * self.h + y) * self.w;
        &self.data[start..start + self.w]
    }

    #[inline]
    pub fn row_mut(&mut self, c: usize, y: usize) -> &mut [T] {
        let start = (c * self.h + y) * self.w;
        &mut self.data[start..start + self.w]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        self.data[(c * self.h + y) * self.w + x] = v;
    }

    /// Stack `a` on top of `b` along the channel axis.
    pub fn concat_channels(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        if a.h != b.h || a.w != b.w {
            return Err(Error::Shape(format!(
                "concat: spatial dims {}x{} vs {}x{}",
                a.h, a.w, b.h, b.w
            )));
        }
        let mut data = Vec::with_capacity((a.c + b.c) * a.h * a.w);
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Ok(Tensor { c: a.c + b.c, h: a.h, w: a.w, data })
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|&v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn scale(&mut self, factor: T) {
        for v in &mut self.data {
            *v = *v * factor;
        }
    }

    /// `self += factor * other`, elementwise.
    pub fn add_scaled(&mut self, other: &Tensor<T>, factor: T) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "add_scaled: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a = *a + factor * b;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bitwise equality (distinguishes NaN payloads and signed zeros).
    pub fn bit_eq(&self, other: &Tensor<T>) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(other.data.iter())
                .all(|(a, b)| a.bits() == b.bits())
    }
}

/// Per-pixel class indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn zeros(h: usize, w: usize) -> Self {
        Mask { h, w, data: vec![0; h * w] }
    }

    pub fn from_vec(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::Shape(format!(
                "mask data length {} != {}x{}",
                data.len(),
                h,
                w
            )));
        }
        Ok(Mask { h, w, data })
    }

    pub fn h(&self) -> usize {
        self.h
    }
    pub fn w(&self) -> usize {
        self.w
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: u8) {
        self.data[y * self.w + x] = v;
    }

    pub fn max_class(&self) -> u8 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn count_class(&self, class: u8) -> usize {
        self.data.iter().filter(|&&v| v == class).count()
    }
}

/// Bitwise equality of two flat parameter vectors.
pub fn params_bit_eq<T: Scalar>(a: &[T], b: &[T]) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.bits() == y.bits())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_stacks_channels() {
        let a = Tensor::from_vec(1, 2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(2, 2, 2, (0..8).map(|i| i as f64).collect()).unwrap();
        let c = Tensor::concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), (3, 2, 2));
        assert_eq!(c.channel(0), a.channel(0));
        assert_eq!(c.channel(1), b.channel(0));
        assert_eq!(c.channel(2), b.channel(1));
    }

    #[test]
    fn concat_rejects_mismatched_spatial_dims() {
        let a = Tensor::<f64>::zeros(1, 2, 2);
        let b = Tensor::<f64>::zeros(1, 3, 2);
        assert!(Tensor::concat_channels(&a, &b).is_err());
    }

    #[test]
    fn bit_eq_distinguishes_negative_zero() {
        let a = Tensor::from_vec(1, 1, 1, vec![0.0f64]).unwrap();
        let b = Tensor::from_vec(1, 1, 1, vec![-0.0f64]).unwrap();
        assert_eq!(a, b); // numeric equality
        assert!(!a.bit_eq(&b)); // but not bitwise
    }
}
