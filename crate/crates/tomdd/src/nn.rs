//! Neural-network layer primitives: 2D convolution, leaky ReLU, 2x2 max
//! pooling and nearest-neighbor upsampling, each with an exact backward pass.
//!
//! The kernels are plain loops arranged so the innermost dimension walks
//! contiguous rows; `axpy` auto-vectorizes and `dot` uses fixed-width lane
//! accumulators, which keeps the accumulation order independent of the
//! optimizer and the results bit-reproducible run to run.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `y += alpha * x` over a contiguous row.
#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x.iter()) {
        *yi = *yi + alpha * xi;
    }
}

/// Dot product with eight independent lane accumulators (fixed order).
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    const LANES: usize = 8;
    let mut acc = [T::zero(); LANES];
    let chunks = a.len() / LANES;
    for i in 0..chunks {
        let ai = &a[i * LANES..(i + 1) * LANES];
        let bi = &b[i * LANES..(i + 1) * LANES];
        for l in 0..LANES {
            acc[l] = acc[l] + ai[l] * bi[l];
        }
    }
    let mut tail = T::zero();
    for i in chunks * LANES..a.len() {
        tail = tail + a[i] * b[i];
    }
    // Pairwise lane reduction, then the tail.
    let s01 = acc[0] + acc[1];
    let s23 = acc[2] + acc[3];
    let s45 = acc[4] + acc[5];
    let s67 = acc[6] + acc[7];
    ((s01 + s23) + (s45 + s67)) + tail
}

/// Shape of a square convolution. Weights are laid out
/// `[out_ch][in_ch][k][k]` followed by `[out_ch]` biases in the flat
/// parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvShape {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub pad: usize,
}

impl ConvShape {
    pub fn k3(in_ch: usize, out_ch: usize) -> Self {
        ConvShape { in_ch, out_ch, k: 3, pad: 1 }
    }

    pub fn k1(in_ch: usize, out_ch: usize) -> Self {
        ConvShape { in_ch, out_ch, k: 1, pad: 0 }
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.k * self.k
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_ch
    }

    #[inline]
    fn w_idx(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> usize {
        ((oc * self.in_ch + ic) * self.k + ky) * self.k + kx
    }
}

/// Output rows `y` for which input row `y + ky - pad` is in bounds, and the
/// matching x ranges. Returns `(y0, y1, x0, x1)`; iterate `y in y0..y1`,
/// `x in x0..x1`, reading input at `(y + ky - pad, x + kx - pad)`.
#[inline]
fn valid_range(size: usize, kofs: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(kofs);
    let hi = (size + pad - kofs).min(size);
    (lo, hi.max(lo))
}

/// `out = conv(x) + bias`; same spatial size (stride 1).
pub fn conv2d_forward<T: Scalar>(
    shape: &ConvShape,
    w: &[T],
    b: &[T],
    x: &Tensor<T>,
    out: &mut Tensor<T>,
) {
    let (h, wid) = (x.h(), x.w());
    debug_assert_eq!(x.c(), shape.in_ch);
    debug_assert_eq!(out.shape(), (shape.out_ch, h, wid));
    for oc in 0..shape.out_ch {
        out.channel_mut(oc).fill(b[oc]);
    }
    for oc in 0..shape.out_ch {
        for ic in 0..shape.in_ch {
            for ky in 0..shape.k {
                let (y0, y1) = valid_range(h, ky, shape.pad);
                for kx in 0..shape.k {
                    let (x0, x1) = valid_range(wid, kx, shape.pad);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = w[shape.w_idx(oc, ic, ky, kx)];
                    for y in y0..y1 {
                        let iy = y + ky - shape.pad;
                        let in_row = &x.row(ic, iy)[x0 + kx - shape.pad..x1 + kx - shape.pad];
                        let out_row = &mut out.row_mut(oc, y)[x0..x1];
                        axpy(wv, in_row, out_row);
                    }
                }
            }
        }
    }
}

/// Accumulates `d_x += conv_backward(d_out)` (caller zero-initializes).
pub fn conv2d_backward_input<T: Scalar>(
    shape: &ConvShape,
    w: &[T],
    d_out: &Tensor<T>,
    d_x: &mut Tensor<T>,
) {
    let (h, wid) = (d_x.h(), d_x.w());
    debug_assert_eq!(d_out.shape(), (shape.out_ch, h, wid));
    debug_assert_eq!(d_x.c(), shape.in_ch);
    for oc in 0..shape.out_ch {
        for ic in 0..shape.in_ch {
            for ky in 0..shape.k {
                let (y0, y1) = valid_range(h, ky, shape.pad);
                for kx in 0..shape.k {
                    let (x0, x1) = valid_range(wid, kx, shape.pad);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = w[shape.w_idx(oc, ic, ky, kx)];
                    for y in y0..y1 {
                        let iy = y + ky - shape.pad;
                        let d_out_row = &d_out.row(oc, y)[x0..x1];
                        let d_x_row =
                            &mut d_x.row_mut(ic, iy)[x0 + kx - shape.pad..x1 + kx - shape.pad];
                        axpy(wv, d_out_row, d_x_row);
                    }
                }
            }
        }
    }
}

/// Accumulates weight and bias gradients into `d_w`/`d_b`.
pub fn conv2d_backward_params<T: Scalar>(
    shape: &ConvShape,
    x: &Tensor<T>,
    d_out: &Tensor<T>,
    d_w: &mut [T],
    d_b: &mut [T],
) {
    let (h, wid) = (x.h(), x.w());
    debug_assert_eq!(d_w.len(), shape.weight_len());
    debug_assert_eq!(d_b.len(), shape.out_ch);
    for oc in 0..shape.out_ch {
        let mut acc = T::zero();
        for y in 0..h {
            acc = acc + d_out.row(oc, y).iter().fold(T::zero(), |s, &v| s + v);
        }
        d_b[oc] = d_b[oc] + acc;
    }
    for oc in 0..shape.out_ch {
        for ic in 0..shape.in_ch {
            for ky in 0..shape.k {
                let (y0, y1) = valid_range(h, ky, shape.pad);
                for kx in 0..shape.k {
                    let (x0, x1) = valid_range(wid, kx, shape.pad);
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = T::zero();
                    for y in y0..y1 {
                        let iy = y + ky - shape.pad;
                        let d_out_row = &d_out.row(oc, y)[x0..x1];
                        let in_row = &x.row(ic, iy)[x0 + kx - shape.pad..x1 + kx - shape.pad];
                        acc = acc + dot(d_out_row, in_row);
                    }
                    let idx = shape.w_idx(oc, ic, ky, kx);
                    d_w[idx] = d_w[idx] + acc;
                }
            }
        }
    }
}

/// In-place leaky ReLU.
pub fn leaky_relu_forward<T: Scalar>(slope: T, x: &mut Tensor<T>) {
    for v in x.data_mut() {
        if *v < T::zero() {
            *v = slope * *v;
        }
    }
}

/// Backward through leaky ReLU, keyed on the *output* sign (valid because the
/// activation preserves sign for positive slope).
pub fn leaky_relu_backward<T: Scalar>(slope: T, output: &Tensor<T>, d: &mut Tensor<T>) {
    debug_assert_eq!(output.shape(), d.shape());
    for (dv, &ov) in d.data_mut().iter_mut().zip(output.data().iter()) {
        if ov <= T::zero() {
            *dv = *dv * slope;
        }
    }
}

/// 2x2 max pooling, stride 2. Returns the pooled map and per-output argmax
/// codes (0..4: `dy * 2 + dx`). Spatial dims must be even.
pub fn maxpool2_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u8>)> {
    let (c, h, w) = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("maxpool2 needs even dims, got {}x{}", h, w)));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(c, oh, ow);
    let mut arg = vec![0u8; c * oh * ow];
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = x.get(ci, 2 * oy, 2 * ox);
                let mut code = 0u8;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let v = x.get(ci, 2 * oy + dy, 2 * ox + dx);
                        if v > best {
                            best = v;
                            code = (dy * 2 + dx) as u8;
                        }
                    }
                }
                out.set(ci, oy, ox, best);
                arg[(ci * oh + oy) * ow + ox] = code;
            }
        }
    }
    Ok((out, arg))
}

/// Scatter pooled gradients back to the argmax positions.
pub fn maxpool2_backward<T: Scalar>(d_out: &Tensor<T>, arg: &[u8]) -> Tensor<T> {
    let (c, oh, ow) = d_out.shape();
    let mut d_x = Tensor::zeros(c, oh * 2, ow * 2);
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let code = arg[(ci * oh + oy) * ow + ox] as usize;
                let (dy, dx) = (code / 2, code % 2);
                let v = d_out.get(ci, oy, ox);
                d_x.set(ci, 2 * oy + dy, 2 * ox + dx, v);
            }
        }
    }
    d_x
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (c, h, w) = x.shape();
    let mut out = Tensor::zeros(c, h * 2, w * 2);
    for ci in 0..c {
        for y in 0..h {
            for x_ in 0..w {
                let v = x.get(ci, y, x_);
                out.set(ci, 2 * y, 2 * x_, v);
                out.set(ci, 2 * y, 2 * x_ + 1, v);
                out.set(ci, 2 * y + 1, 2 * x_, v);
                out.set(ci, 2 * y + 1, 2 * x_ + 1, v);
            }
        }
    }
    out
}

/// Backward of nearest-neighbor 2x upsampling: sum each 2x2 block.
pub fn upsample2_backward<T: Scalar>(d_out: &Tensor<T>) -> Tensor<T> {
    let (c, h2, w2) = d_out.shape();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut d_x = Tensor::zeros(c, h, w);
    for ci in 0..c {
        for y in 0..h {
            for x_ in 0..w {
                let s = ((d_out.get(ci, 2 * y, 2 * x_) + d_out.get(ci, 2 * y, 2 * x_ + 1))
                    + d_out.get(ci, 2 * y + 1, 2 * x_))
                    + d_out.get(ci, 2 * y + 1, 2 * x_ + 1);
                d_x.set(ci, y, x_, s);
            }
        }
    }
    d_x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_tensor(c: usize, h: usize, w: usize, rng: &mut impl Rng) -> Tensor<f64> {
        let data = (0..c * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::from_vec(c, h, w, data).unwrap()
    }

    /// Brute-force convolution used as the oracle for the row-sliced kernel.
    fn conv_naive(shape: &ConvShape, w: &[f64], b: &[f64], x: &Tensor<f64>) -> Tensor<f64> {
        let (h, wid) = (x.h(), x.w());
        let mut out = Tensor::zeros(shape.out_ch, h, wid);
        for oc in 0..shape.out_ch {
            for y in 0..h {
                for xx in 0..wid {
                    let mut acc = b[oc];
                    for ic in 0..shape.in_ch {
                        for ky in 0..shape.k {
                            for kx in 0..shape.k {
                                let iy = y as isize + ky as isize - shape.pad as isize;
                                let ix = xx as isize + kx as isize - shape.pad as isize;
                                if iy >= 0 && (iy as usize) < h && ix >= 0 && (ix as usize) < wid {
                                    acc += w[shape.w_idx(oc, ic, ky, kx)]
                                        * x.get(ic, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    out.set(oc, y, xx, acc);
                }
            }
        }
        out
    }

    #[test]
    fn conv_forward_matches_naive() {
        let mut rng = crate::rng::stream(11, "nn-test", 0);
        for &(k, pad) in &[(3usize, 1usize), (1, 0)] {
            let shape = ConvShape { in_ch: 3, out_ch: 2, k, pad };
            let w: Vec<f64> = (0..shape.weight_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..shape.out_ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = rand_tensor(3, 5, 6, &mut rng);
            let mut out = Tensor::zeros(2, 5, 6);
            conv2d_forward(&shape, &w, &b, &x, &mut out);
            let want = conv_naive(&shape, &w, &b, &x);
            for (a, b) in out.data().iter().zip(want.data().iter()) {
                assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = crate::rng::stream(13, "nn-test", 1);
        let shape = ConvShape::k3(2, 2);
        let w: Vec<f64> = (0..shape.weight_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..shape.out_ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = rand_tensor(2, 4, 4, &mut rng);
        // Scalar objective: weighted sum of outputs with fixed coefficients.
        let coef = rand_tensor(2, 4, 4, &mut rng);
        let loss = |w: &[f64], b: &[f64], x: &Tensor<f64>| -> f64 {
            let mut out = Tensor::zeros(2, 4, 4);
            conv2d_forward(&shape, w, b, x, &mut out);
            out.data().iter().zip(coef.data().iter()).map(|(o, c)| o * c).sum()
        };

        let mut d_w = vec![0.0; shape.weight_len()];
        let mut d_b = vec![0.0; shape.out_ch];
        let mut d_x = Tensor::zeros(2, 4, 4);
        conv2d_backward_params(&shape, &x, &coef, &mut d_w, &mut d_b);
        conv2d_backward_input(&shape, &w, &coef, &mut d_x);

        let eps = 1e-6;
        for i in 0..d_w.len() {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += eps;
            wm[i] -= eps;
            let num = (loss(&wp, &b, &x) - loss(&wm, &b, &x)) / (2.0 * eps);
            assert!((num - d_w[i]).abs() < 1e-6, "dw[{}]: {} vs {}", i, num, d_w[i]);
        }
        for i in 0..d_b.len() {
            let mut bp = b.clone();
            let mut bm = b.clone();
            bp[i] += eps;
            bm[i] -= eps;
            let num = (loss(&w, &bp, &x) - loss(&w, &bm, &x)) / (2.0 * eps);
            assert!((num - d_b[i]).abs() < 1e-6);
        }
        for i in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.data_mut()[i] += eps;
            xm.data_mut()[i] -= eps;
            let num = (loss(&w, &b, &xp) - loss(&w, &b, &xm)) / (2.0 * eps);
            assert!((num - d_x.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn maxpool_roundtrip_routes_gradient_to_argmax() {
        let x = Tensor::from_vec(
            1,
            2,
            4,
            vec![
                0.1, 0.9, //
                0.2, 0.3, //
                0.8, 0.4, //
                0.5, 0.7,
            ],
        )
        .unwrap();
        let (out, arg) = maxpool2_forward(&x).unwrap();
        assert_eq!(out.shape(), (1, 1, 2));
        assert_eq!(out.data(), &[0.9, 0.8]);
        let d_out = Tensor::from_vec(1, 1, 2, vec![1.0, 2.0]).unwrap();
        let d_x = maxpool2_backward(&d_out, &arg);
        assert_eq!(d_x.get(0, 0, 1), 1.0);
        assert_eq!(d_x.get(0, 1, 0), 2.0);
        assert_eq!(d_x.data().iter().filter(|&&v| v != 0.0).count(), 2);
    }

    #[test]
    fn maxpool_rejects_odd_dims() {
        let x = Tensor::<f64>::zeros(1, 3, 4);
        assert!(maxpool2_forward(&x).is_err());
    }

    #[test]
    fn upsample_backward_sums_blocks() {
        let x = Tensor::from_vec(1, 1, 2, vec![1.0, 2.0]).unwrap();
        let up = upsample2_forward(&x);
        assert_eq!(up.data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
        let d = upsample2_backward(&up);
        assert_eq!(d.data(), &[4.0, 8.0]);
    }

    #[test]
    fn leaky_relu_backward_uses_output_sign() {
        let mut x = Tensor::from_vec(1, 1, 3, vec![-2.0, 0.0, 3.0]).unwrap();
        leaky_relu_forward(0.1, &mut x);
        assert_eq!(x.data(), &[-0.2, 0.0, 3.0]);
        let mut d = Tensor::from_vec(1, 1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        leaky_relu_backward(0.1, &x, &mut d);
        assert_eq!(d.data(), &[0.1, 0.1, 1.0]);
    }
}
