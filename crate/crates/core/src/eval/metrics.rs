use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// `2|P & G| / (|P| + |G|)` over binary masks; 1 when both are empty.
pub fn dice_score(pred: ArrayView2<'_, u8>, gt: ArrayView2<'_, u8>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::ShapeMismatch {
            expected: gt.shape().to_vec(),
            got: pred.shape().to_vec(),
        });
    }
    let (mut inter, mut p, mut g) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.iter().zip(gt.iter()) {
        let (a, b) = (a > 0, b > 0);
        inter += (a && b) as usize;
        p += a as usize;
        g += b as usize;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptySplit);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};

    #[test]
    fn worked_values() {
        let a = arr2(&[[1u8, 1], [0, 0]]);
        let b = arr2(&[[1u8, 0], [1, 0]]);
        assert!((dice_score(a.view(), b.view()).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(dice_score(a.view(), a.view()).unwrap(), 1.0);
        let z = Array2::<u8>::zeros((2, 2));
        assert_eq!(dice_score(z.view(), z.view()).unwrap(), 1.0);
        assert_eq!(dice_score(z.view(), a.view()).unwrap(), 0.0);
    }

    #[test]
    fn unequal_shapes_are_rejected() {
        let a = Array2::<u8>::zeros((2, 2));
        let b = Array2::<u8>::zeros((2, 3));
        assert!(matches!(dice_score(a.view(), b.view()), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!((m, s), (5.0, 2.0));
        assert!(mean_std(&[]).is_err());
    }
}
