use crate::error::ImageError;
use crate::geometry::Rect;

use super::RasterImage;

/// A continuously sampleable intensity `x -> I(x)` with an a.e. defined gradient.
pub trait IntensityField: Send + Sync {
    fn value(&self, p: [f64; 2]) -> f64;
    fn gradient(&self, p: [f64; 2]) -> [f64; 2];
}

/// Template/reference pair driving the registration forcing.
#[derive(Clone, Copy)]
pub struct ImagePair<'a> {
    pub template: &'a dyn IntensityField,
    pub reference: &'a dyn IntensityField,
}

impl<'a> ImagePair<'a> {
    pub fn new(template: &'a dyn IntensityField, reference: &'a dyn IntensityField) -> Self {
        Self { template, reference }
    }

    /// `(T(x+u) - R(x)) * grad T(x+u)` together with the mismatch `T(x+u) - R(x)`.
    #[inline]
    pub fn forcing_and_mismatch(&self, x: [f64; 2], u: [f64; 2]) -> ([f64; 2], f64) {
        let y = [x[0] + u[0], x[1] + u[1]];
        let mismatch = self.template.value(y) - self.reference.value(x);
        let g = self.template.gradient(y);
        ([mismatch * g[0], mismatch * g[1]], mismatch)
    }
}

/// Registration forcing `f_u(x) = (T(x+u) - R(x)) grad T(x+u)`.
pub fn forcing(
    template: &dyn IntensityField,
    reference: &dyn IntensityField,
    x: [f64; 2],
    u_at_x: [f64; 2],
) -> [f64; 2] {
    ImagePair::new(template, reference).forcing_and_mismatch(x, u_at_x).0
}

/// Discrete convolution with a normalized Gaussian truncated at radius `ceil(4 sigma)`,
/// clamping indices at the image border.
pub fn gaussian_smooth(img: &RasterImage, sigma: f64) -> RasterImage {
    assert!(sigma >= 0.0, "sigma must be non-negative");
    if sigma == 0.0 {
        return img.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (img.width(), img.height());
    let src = img.intensity();
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;

    let mut tmp = vec![0.0; w * h];
    for j in 0..h {
        let row = &src[j * w..(j + 1) * w];
        for i in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                acc += kw * row[clampi(i as isize + k as isize - r, w)];
            }
            tmp[j * w + i] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for j in 0..h {
        for i in 0..w {
            let mut acc = 0.0;
            for (k, &kw) in kernel.iter().enumerate() {
                acc += kw * tmp[clampi(j as isize + k as isize - r, h) * w + i];
            }
            out[j * w + i] = acc.clamp(0.0, 1.0);
        }
    }
    RasterImage::from_parts_unchecked(w, h, out)
}

/// Normalized 1D Gaussian weights on `-ceil(4 sigma) ..= ceil(4 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Bilinear interpolant of (smoothed) pixel values over a physical rectangle.
///
/// Pixel `(i, j)` has its center at `origin + ((i + 1/2) / W * Lx, (j + 1/2) / H * Ly)`.
/// Queries outside the band of pixel centers are clamped, so the field is
/// constant along the outward normal there.
#[derive(Debug, Clone)]
pub struct ImageField {
    coefficients: RasterImage,
    sigma: f64,
    domain: Rect,
    scale: [f64; 2],
}

/// Smooth `img` with `sigma` and wrap it as a sampleable field over `domain`.
pub fn build_field(img: &RasterImage, domain: Rect, sigma: f64) -> Result<ImageField, ImageError> {
    if !(domain.size[0] > 0.0 && domain.size[1] > 0.0) {
        return Err(ImageError::BadDomain(domain.size));
    }
    let coefficients = gaussian_smooth(img, sigma);
    let scale = [img.width() as f64 / domain.size[0], img.height() as f64 / domain.size[1]];
    Ok(ImageField { coefficients, sigma, domain, scale })
}

impl ImageField {
    pub fn coefficients(&self) -> &RasterImage {
        &self.coefficients
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    /// Physical coordinates of the center of pixel `(i, j)`.
    pub fn pixel_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.domain.origin[0] + (i as f64 + 0.5) / self.scale[0],
            self.domain.origin[1] + (j as f64 + 0.5) / self.scale[1],
        ]
    }

    #[inline]
    fn pixel_coords(&self, p: [f64; 2]) -> [f64; 2] {
        [(p[0] - self.domain.origin[0]) * self.scale[0] - 0.5, (p[1] - self.domain.origin[1]) * self.scale[1] - 0.5]
    }
}

/// Interval lookup along one pixel axis.
///
/// Returns the cell index, local coordinate in `[0, 1]`, and whether the
/// derivative along this axis is live (false in the clamped bands). At an
/// interior pixel line the cell on the lesser side is selected.
#[inline]
fn locate(t: f64, n: usize) -> (usize, f64, bool) {
    let last = (n - 1) as f64;
    if t <= 0.0 {
        return (0, 0.0, false);
    }
    if t > last {
        return (n - 2, 1.0, false);
    }
    let c = (t.ceil() as usize).clamp(1, n - 1) - 1;
    (c, t - c as f64, true)
}

impl IntensityField for ImageField {
    fn value(&self, p: [f64; 2]) -> f64 {
        let [px, py] = self.pixel_coords(p);
        let img = &self.coefficients;
        let (i, s, _) = locate(px, img.width());
        let (j, t, _) = locate(py, img.height());
        let v00 = img.get(i, j);
        let v10 = img.get(i + 1, j);
        let v01 = img.get(i, j + 1);
        let v11 = img.get(i + 1, j + 1);
        (1.0 - t) * ((1.0 - s) * v00 + s * v10) + t * ((1.0 - s) * v01 + s * v11)
    }

    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let [px, py] = self.pixel_coords(p);
        let img = &self.coefficients;
        let (i, s, live_x) = locate(px, img.width());
        let (j, t, live_y) = locate(py, img.height());
        let v00 = img.get(i, j);
        let v10 = img.get(i + 1, j);
        let v01 = img.get(i, j + 1);
        let v11 = img.get(i + 1, j + 1);
        let gx = if live_x { ((1.0 - t) * (v10 - v00) + t * (v11 - v01)) * self.scale[0] } else { 0.0 };
        let gy = if live_y { ((1.0 - s) * (v01 - v00) + s * (v11 - v10)) * self.scale[1] } else { 0.0 };
        [gx, gy]
    }
}

/// Analytic paraboloid `I(x) = |x - c|^2` (no clamping), used for synthetic
/// verification images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Paraboloid {
    pub center: [f64; 2],
}

impl Paraboloid {
    pub fn new(center: [f64; 2]) -> Self {
        Self { center }
    }
}

impl IntensityField for Paraboloid {
    #[inline]
    fn value(&self, p: [f64; 2]) -> f64 {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy
    }

    #[inline]
    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        [2.0 * (p[0] - self.center[0]), 2.0 * (p[1] - self.center[1])]
    }
}

/// Affine-in-each-variable field `a + b x + c y + d x y`.
#[derive(Debug, Clone, Copy)]
pub struct Bilinear {
    pub coeffs: [f64; 4],
}

impl IntensityField for Bilinear {
    fn value(&self, p: [f64; 2]) -> f64 {
        let [a, b, c, d] = self.coeffs;
        a + b * p[0] + c * p[1] + d * p[0] * p[1]
    }

    fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        let [_, b, c, d] = self.coeffs;
        [b + d * p[1], c + d * p[0]]
    }
}
