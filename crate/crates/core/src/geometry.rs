/// Axis-aligned rectangle `[x0, x0 + w] x [y0, y0 + h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub origin: [f64; 2],
    pub size: [f64; 2],
}

impl Rect {
    pub fn new(origin: [f64; 2], size: [f64; 2]) -> Self {
        Self { origin, size }
    }

    pub fn unit() -> Self {
        Self::new([0.0, 0.0], [1.0, 1.0])
    }

    /// Rectangle with the longer side scaled to one, matching a `width x height` raster.
    pub fn for_raster(width: usize, height: usize) -> Self {
        let m = width.max(height) as f64;
        Self::new([0.0, 0.0], [width as f64 / m, height as f64 / m])
    }

    pub fn area(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    pub fn max(&self) -> [f64; 2] {
        [self.origin[0] + self.size[0], self.origin[1] + self.size[1]]
    }

    pub fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        let hi = self.max();
        [p[0].clamp(self.origin[0], hi[0]), p[1].clamp(self.origin[1], hi[1])]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let hi = self.max();
        p[0] >= self.origin[0] && p[0] <= hi[0] && p[1] >= self.origin[1] && p[1] <= hi[1]
    }

    /// Map a reference point in `[0, 1]^2` into the rectangle.
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        [self.origin[0] + self.size[0] * xi[0], self.origin[1] + self.size[1] * xi[1]]
    }

    pub fn diameter(&self) -> f64 {
        self.size[0].hypot(self.size[1])
    }
}
