use serde::{Deserialize, Serialize};

use super::Point3;
use crate::{Error, Result};

/// Regular scalar grid. Voxel `(i, j, k)` is centred at
/// `origin + (i·sx, j·sy, k·sz)`; storage is x-fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume3 {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: Point3,
    pub voxels: Vec<f64>,
}

impl Volume3 {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: Point3, voxels: Vec<f64>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if voxels.len() != n {
            return Err(Error::LengthMismatch {
                what: "voxel array",
                expected: n,
                got: voxels.len(),
            });
        }
        if spacing.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("voxel spacing must be positive".into()));
        }
        Ok(Self {
            dims,
            spacing,
            origin,
            voxels,
        })
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], origin: Point3) -> Result<Self> {
        Self::new(dims, spacing, origin, vec![0.0; dims[0] * dims[1] * dims[2]])
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.voxels[self.index(i, j, k)]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3 {
        Point3::new(
            self.origin.x + i as f64 * self.spacing[0],
            self.origin.y + j as f64 * self.spacing[1],
            self.origin.z + k as f64 * self.spacing[2],
        )
    }

    /// Continuous voxel coordinates of `p`.
    pub fn to_grid(&self, p: &Point3) -> [f64; 3] {
        [
            (p.x - self.origin.x) / self.spacing[0],
            (p.y - self.origin.y) / self.spacing[1],
            (p.z - self.origin.z) / self.spacing[2],
        ]
    }

    /// Index of the voxel whose centre is nearest to `p`, if inside the grid.
    pub fn nearest_voxel(&self, p: &Point3) -> Option<[usize; 3]> {
        let g = self.to_grid(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = g[a].round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    /// Value at the nearest voxel centre; `None` outside the grid.
    pub fn sample_nearest(&self, p: &Point3) -> Option<f64> {
        self.nearest_voxel(p).map(|[i, j, k]| self.get(i, j, k))
    }

    pub fn max_value(&self) -> f64 {
        self.voxels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.voxels.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// 2D image, row-major (`u` fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Image2 {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl Image2 {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.pixels[u + self.width * v]
    }

    /// Scales into `[0, 1]` by the maximum; an all-zero image stays zero.
    pub fn normalized(&self) -> Image2 {
        let max = self.pixels.iter().copied().fold(0.0f64, f64::max);
        let min = self.pixels.iter().copied().fold(0.0f64, f64::min);
        let span = max - min;
        let pixels = if span > 0.0 {
            self.pixels.iter().map(|p| (p - min) / span).collect()
        } else {
            vec![0.0; self.pixels.len()]
        };
        Image2 {
            width: self.width,
            height: self.height,
            pixels,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_voxel_rounds_and_bounds() {
        let v = Volume3::zeros([2, 3, 4], [0.5, 1.0, 2.0], Point3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(v.nearest_voxel(&Point3::new(1.26, 1.4, 4.9)), Some([1, 1, 2]));
        assert_eq!(v.nearest_voxel(&Point3::new(0.7, 0.0, 0.0)), None);
        assert_eq!(v.center(1, 2, 3), Point3::new(1.5, 2.0, 6.0));
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(Volume3::zeros([1, 1, 1], [0.0, 1.0, 1.0], Point3::origin()).is_err());
    }
}
