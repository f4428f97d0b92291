use std::f64::consts::PI;

use super::RasterImage;

/// Synthetic head-slice phantom on an `n x n` grid: skull ring, folded cortex,
/// white matter and two ventricles, with sharp tissue boundaries.
///
/// `warp` is the amplitude (in units of the image width) of a fixed smooth
/// deformation applied before sampling; `0.0` gives the undeformed phantom.
pub fn brain_phantom(n: usize, warp: f64) -> RasterImage {
    let nf = n as f64;
    RasterImage::from_fn(n, n, |i, j| {
        let x = (i as f64 + 0.5) / nf;
        let y = (j as f64 + 0.5) / nf;
        // pull back through x -> x + d(x)
        let dx = warp * (PI * x).sin() * (PI * y).sin() * (2.0 * PI * y).cos();
        let dy = warp * 0.7 * (2.0 * PI * x).sin() * (PI * y).sin();
        phantom_value(x - dx, y - dy)
    })
    .expect("phantom intensities lie in [0, 1]")
}

fn ellipse(x: f64, y: f64, c: [f64; 2], r: [f64; 2]) -> f64 {
    ((x - c[0]) / r[0]).powi(2) + ((y - c[1]) / r[1]).powi(2)
}

fn phantom_value(x: f64, y: f64) -> f64 {
    let head = ellipse(x, y, [0.5, 0.5], [0.42, 0.46]);
    if head > 1.0 {
        return 0.0;
    }
    let brain = ellipse(x, y, [0.5, 0.5], [0.37, 0.41]);
    if brain > 1.0 {
        return 0.95;
    }
    let theta = (y - 0.5).atan2(x - 0.5);
    let folds = 0.06 * (11.0 * theta).sin() + 0.03 * (17.0 * theta + 1.0).cos();
    let white = ellipse(x, y, [0.5, 0.5], [0.27, 0.31]);
    let mut v = if white.sqrt() > 0.8 + folds { 0.45 } else { 0.7 };
    let vl = ellipse(x, y, [0.43, 0.52], [0.045, 0.13]);
    let vr = ellipse(x, y, [0.57, 0.52], [0.045, 0.13]);
    if vl <= 1.0 || vr <= 1.0 {
        v = 0.12;
    }
    if ellipse(x, y, [0.5, 0.3], [0.06, 0.04]) <= 1.0 {
        v = 0.85;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_has_structure_and_warp_changes_it() {
        let a = brain_phantom(64, 0.0);
        let b = brain_phantom(64, 0.03);
        assert_eq!((a.width(), a.height()), (64, 64));
        let distinct: std::collections::BTreeSet<u64> = a.intensity().iter().map(|v| v.to_bits()).collect();
        assert!(distinct.len() >= 5);
        assert_eq!(a.get(0, 0), 0.0);
        let diff = a.intensity().iter().zip(b.intensity()).filter(|(p, q)| p != q).count();
        assert!(diff > 50);
        assert_eq!(brain_phantom(64, 0.0), a);
    }
}
