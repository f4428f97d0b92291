use std::path::Path;

use image::{DynamicImage, GrayImage};

use crate::error::ImageError;

/// Row-major grayscale raster with intensities in `[0, 1]`.
///
/// Row 0 is the first row of the file; the sampling layer maps it to the
/// lowest `y` coordinate of the physical domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    intensity: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, intensity: Vec<f64>) -> Result<Self, ImageError> {
        if width < 2 || height < 2 {
            return Err(ImageError::Degenerate { width, height });
        }
        if intensity.len() != width * height {
            return Err(ImageError::GridLength { expected: width * height, got: intensity.len() });
        }
        if let Some((index, &value)) = intensity.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self { width, height, intensity })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                data.push(f(i, j).clamp(0.0, 1.0));
            }
        }
        Self::new(width, height, data)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.intensity[j * self.width + i]
    }

    pub fn mean(&self) -> f64 {
        self.intensity.iter().sum::<f64>() / self.intensity.len() as f64
    }

    /// Construct without the range check; callers guarantee a valid grid.
    pub(crate) fn from_parts_unchecked(width: usize, height: usize, intensity: Vec<f64>) -> Self {
        debug_assert_eq!(intensity.len(), width * height);
        Self { width, height, intensity }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        let buf: Vec<u8> = self.intensity.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        let img =
            GrayImage::from_raw(self.width as u32, self.height as u32, buf).expect("buffer length matches dimensions");
        img.save(path).map_err(|e| ImageError::Write { path: path.to_path_buf(), reason: e.to_string() })
    }
}

/// Load an 8/16-bit grayscale PNG or PGM, rescaling the full bit range onto `[0, 1]`.
pub fn load_raster(path: &Path) -> Result<RasterImage, ImageError> {
    let unreadable = |reason: String| ImageError::Unreadable { path: path.to_path_buf(), reason };
    let reader = image::ImageReader::open(path)
        .map_err(|e| unreadable(e.to_string()))?
        .with_guessed_format()
        .map_err(|e| unreadable(e.to_string()))?;
    let img = reader.decode().map_err(|e| unreadable(e.to_string()))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    if width < 2 || height < 2 {
        return Err(ImageError::Degenerate { width, height });
    }
    let intensity: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        DynamicImage::ImageLuma16(g) => g.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
        other => {
            return Err(ImageError::NotGrayscale { path: path.to_path_buf(), color: format!("{:?}", other.color()) })
        }
    };
    RasterImage::new(width, height, intensity)
}
