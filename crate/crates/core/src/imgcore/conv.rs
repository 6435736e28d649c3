use super::image::Plane;
use crate::scalar::Scalar;

/// 3x3 coefficients indexed `[row][col]`.
pub type Kernel3 = [[f64; 3]; 3];

pub const SOBEL_X: Kernel3 = [[1.0, 0.0, -1.0], [2.0, 0.0, -2.0], [1.0, 0.0, -1.0]];
pub const SOBEL_Y: Kernel3 = [[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]];

/// Correlates `plane` with `kernel` as written (no flip), replicating border samples.
pub fn convolve3x3<T: Scalar>(plane: &Plane<T>, kernel: &Kernel3) -> Plane<T> {
    let (w, h) = plane.dims();
    let k = kernel.map(|row| row.map(T::lit));
    Plane::from_fn(w, h, |x, y| {
        // positive and negative taps summed apart so flat regions cancel exactly
        let (mut pos, mut neg) = (T::zero(), T::zero());
        for (dy, row) in k.iter().enumerate() {
            for (dx, &kv) in row.iter().enumerate() {
                let v =
                    plane.get_clamped(x as isize + dx as isize - 1, y as isize + dy as isize - 1);
                if kv > T::zero() {
                    pos = pos + kv * v;
                } else if kv < T::zero() {
                    neg = neg - kv * v;
                }
            }
        }
        pos - neg
    })
}

/// Transpose of [`convolve3x3`]: scatters each output weight back onto the
/// input samples it was read from, border replication included.
pub fn convolve3x3_adjoint<T: Scalar>(weights: &Plane<T>, kernel: &Kernel3) -> Plane<T> {
    let (w, h) = weights.dims();
    let k = kernel.map(|row| row.map(T::lit));
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let g = weights.get(x, y);
            if g == T::zero() {
                continue;
            }
            for (dy, row) in k.iter().enumerate() {
                let yy = (y as isize + dy as isize - 1).clamp(0, h as isize - 1) as usize;
                for (dx, &kv) in row.iter().enumerate() {
                    if kv != T::zero() {
                        let xx = (x as isize + dx as isize - 1).clamp(0, w as isize - 1) as usize;
                        out[yy * w + xx] = out[yy * w + xx] + kv * g;
                    }
                }
            }
        }
    }
    Plane::new(w, h, out).expect("same dimensions")
}
