use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Numerically stable softmax over the logits.
pub fn softmax<S: Scalar>(logits: &[S]) -> Vec<S> {
    let m = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&l| (l - m).exp()).collect();
    let z: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Softmax cross-entropy `logsumexp(logits) - logits[label]`.
///
/// With two classes this is the binary cross-entropy of `ŷ = softmax(logits)[1]`.
pub fn cross_entropy<S: Scalar>(logits: &[S], label: u8) -> Result<S> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite {
            layer: "loss input".into(),
        });
    }
    let label = label as usize;
    if label >= logits.len() {
        return Err(Error::Shape(format!("label {label} out of range for {} logits", logits.len())));
    }
    let m = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let lse = m + logits.iter().map(|&l| (l - m).exp()).sum::<S>().ln();
    Ok(lse - logits[label])
}

/// `∂loss/∂logits = softmax(logits) − onehot(label)`.
pub fn cross_entropy_grad<S: Scalar>(logits: &[S], label: u8) -> Vec<S> {
    let mut g = softmax(logits);
    g[label as usize] -= S::one();
    g
}

/// Binary cross-entropy written directly in terms of the clone probability.
pub fn binary_cross_entropy<S: Scalar>(prob: S, label: u8) -> S {
    let y = if label == 1 { S::one() } else { S::zero() };
    -(y * prob.ln() + (S::one() - y) * (S::one() - prob).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(cross_entropy(&[0.0, 0.0], 0).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(cross_entropy(&[0.0, 0.0], 1).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);
        // ln(1 + e^-2) and ln(1 + e^2)
        assert_abs_diff_eq!(cross_entropy(&[2.0, 0.0], 0).unwrap(), 0.126_928_011_042_972_6, epsilon = 1e-12);
        assert_abs_diff_eq!(cross_entropy(&[2.0, 0.0], 1).unwrap(), 2.126_928_011_042_972_6, epsilon = 1e-12);
    }

    #[test]
    fn stable_for_large_logits() {
        let l = cross_entropy(&[1000.0f64, -1000.0], 0).unwrap();
        assert!(l.is_finite() && l >= 0.0);
        let l = cross_entropy(&[1000.0f64, -1000.0], 1).unwrap();
        assert_abs_diff_eq!(l, 2000.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(cross_entropy(&[f64::NAN, 0.0], 0).is_err());
        assert!(cross_entropy(&[f64::INFINITY, 0.0], 1).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let l: f32 = cross_entropy(&[2.0f32, 0.0], 1).unwrap();
        assert!((l - 2.126_928).abs() < 1e-5);
    }
}
