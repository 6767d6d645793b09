use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::matrix::Matrix;

/// Column z-scoring with training-fold statistics. Constant columns divide by 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let mut mean = Vec::with_capacity(x.cols());
        let mut scale = Vec::with_capacity(x.cols());
        for j in 0..x.cols() {
            let c = x.column(j);
            let s = math::population_std(&c);
            mean.push(math::mean(&c));
            scale.push(if s > 0.0 { s } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.scale)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..x.rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }

    pub fn inverse(&self, z: &Matrix) -> Matrix {
        let mut out = z.clone();
        for i in 0..z.rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.scale[j] + self.mean[j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn two_point_column() {
        let x = Matrix::from_rows(&[[1.0], [3.0]]).unwrap();
        let s = Standardizer::fit(&x);
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.scale, vec![1.0]);
        assert_eq!(s.transform(&x).as_slice(), &[-1.0, 1.0]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let x = Matrix::from_rows(&[[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]]).unwrap();
        let z = Standardizer::fit(&x).transform(&x);
        assert!(z.column(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn moments_and_round_trip() {
        let rows: Vec<[f64; 3]> = (0..17).map(|i| [i as f64 * 0.7 - 3.0, (i * i) as f64, 1e3 + (i % 5) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let s = Standardizer::fit(&x);
        let z = s.transform(&x);
        for j in 0..3 {
            let c = z.column(j);
            assert!(math::mean(&c).abs() < 1e-9);
            assert!((math::population_std(&c) - 1.0).abs() < 1e-9);
        }
        let back = s.inverse(&z);
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }
}
