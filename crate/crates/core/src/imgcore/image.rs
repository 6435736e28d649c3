use crate::error::{DiverError, Result};
use crate::scalar::Scalar;

/// Single-channel row-major sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DiverError::EmptyImage);
        }
        if data.len() != width * height {
            return Err(DiverError::BufferLength {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(width > 0 && height > 0, "plane must be nonempty");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(width > 0 && height > 0, "plane must be nonempty");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Sample at a signed coordinate with replicate padding.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let xi = x.clamp(0, self.width as isize - 1) as usize;
        let yi = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yi * self.width + xi]
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// H×W×3 RGB image stored as three planes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlanar<T> {
    width: usize,
    height: usize,
    planes: [Vec<T>; 3],
}

impl<T: Scalar> ImagePlanar<T> {
    /// Builds an image from three planes, rejecting empty, mis-sized or non-finite input.
    pub fn new(width: usize, height: usize, planes: [Vec<T>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DiverError::EmptyImage);
        }
        for p in &planes {
            if p.len() != width * height {
                return Err(DiverError::BufferLength {
                    width,
                    height,
                    len: p.len(),
                });
            }
        }
        let img = Self {
            width,
            height,
            planes,
        };
        img.check_finite()?;
        Ok(img)
    }

    pub fn filled(width: usize, height: usize, rgb: [T; 3]) -> Self {
        assert!(width > 0 && height > 0, "image must be nonempty");
        let n = width * height;
        Self {
            width,
            height,
            planes: rgb.map(|v| vec![v; n]),
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Self {
        assert!(width > 0 && height > 0, "image must be nonempty");
        let n = width * height;
        let mut planes = [
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        ];
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for c in 0..3 {
                    planes[c].push(px[c]);
                }
            }
        }
        Self {
            width,
            height,
            planes,
        }
    }

    /// Builds an image from interleaved RGB samples.
    pub fn from_interleaved(width: usize, height: usize, rgb: &[T]) -> Result<Self> {
        if rgb.len() != 3 * width * height {
            return Err(DiverError::BufferLength {
                width,
                height,
                len: rgb.len() / 3,
            });
        }
        let planes = [0, 1, 2].map(|c| rgb.iter().skip(c).step_by(3).copied().collect());
        Self::new(width, height, planes)
    }

    pub(crate) fn from_planes_unchecked(width: usize, height: usize, planes: [Vec<T>; 3]) -> Self {
        debug_assert!(planes.iter().all(|p| p.len() == width * height));
        Self {
            width,
            height,
            planes,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Pixel count (per plane).
    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        &self.planes[c]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<T>; 3] {
        &self.planes
    }

    pub fn into_planes(self) -> [Vec<T>; 3] {
        self.planes
    }

    /// Copies channel `c` into a standalone plane.
    pub fn channel(&self, c: usize) -> Plane<T> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.planes[c].clone(),
        }
    }

    #[inline]
    pub fn pixel(&self, i: usize) -> [T; 3] {
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    #[inline]
    pub fn set_pixel(&mut self, i: usize, rgb: [T; 3]) {
        for c in 0..3 {
            self.planes[c][i] = rgb[c];
        }
    }

    /// Applies `f` to every sample of every plane.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            planes: [0, 1, 2].map(|c| self.planes[c].iter().map(|&v| f(v)).collect()),
        }
    }

    /// Applies `f(channel, sample)` to every sample.
    pub fn map_channels(&self, f: impl Fn(usize, T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            planes: [0, 1, 2].map(|c| self.planes[c].iter().map(|&v| f(c, v)).collect()),
        }
    }

    pub fn clamped(&self) -> Self {
        self.map(|v| v.clamp01())
    }

    pub fn check_finite(&self) -> Result<()> {
        for p in &self.planes {
            if let Some(index) = p.iter().position(|v| !v.is_finite()) {
                return Err(DiverError::NonFiniteSample { index });
            }
        }
        Ok(())
    }

    pub fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        if self.dims() != other {
            return Err(DiverError::DimensionMismatch {
                expected: self.dims(),
                actual: other,
            });
        }
        Ok(())
    }

    /// Per-channel arithmetic means.
    pub fn channel_means(&self) -> [T; 3] {
        [0, 1, 2].map(|c| crate::scalar::mean(&self.planes[c]))
    }

    /// Interleaved RGB samples.
    pub fn to_interleaved(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(3 * self.pixel_count());
        for i in 0..self.pixel_count() {
            out.extend_from_slice(&self.pixel(i));
        }
        out
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> ImagePlanar<U> {
        ImagePlanar {
            width: self.width,
            height: self.height,
            planes: [0, 1, 2].map(|c| self.planes[c].iter().map(|v| U::lit(v.as_f64())).collect()),
        }
    }
}

/// Relative scene depth, nonnegative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T>(Plane<T>);

impl<T: Scalar> DepthMap<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        Self::from_plane(Plane::new(width, height, data)?)
    }

    pub fn from_plane(plane: Plane<T>) -> Result<Self> {
        for (index, &v) in plane.as_slice().iter().enumerate() {
            if !v.is_finite() {
                return Err(DiverError::NonFiniteSample { index });
            }
            if v < T::zero() {
                return Err(DiverError::NegativeDepth { index });
            }
        }
        Ok(Self(plane))
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        assert!(value >= T::zero() && value.is_finite());
        Self(Plane::filled(width, height, value))
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        Self::from_plane(Plane::from_fn(width, height, &mut f))
    }

    pub fn plane(&self) -> &Plane<T> {
        &self.0
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    /// Min-max rescale to `[0, 1]`; a degenerate range maps every sample to 0.5.
    pub fn normalized(&self) -> Self {
        let s = self.as_slice();
        let lo = s.iter().copied().fold(T::infinity(), T::min);
        let hi = s.iter().copied().fold(T::neg_infinity(), T::max);
        let range = hi - lo;
        if !(range > T::lit(1e-12)) {
            return Self(self.0.map(|_| T::lit(0.5)));
        }
        Self(self.0.map(|v| ((v - lo) / range).clamp01()))
    }

    pub fn cast<U: Scalar>(&self) -> DepthMap<U> {
        DepthMap(Plane {
            width: self.0.width,
            height: self.0.height,
            data: self.0.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        })
    }
}
