use crate::error::{CeError, Result};
use crate::scalar::Scalar;

/// Truncation rule applied to each far-block row before elimination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompressionStrategy {
    /// Keep singular values above `eps·σ₁` (or above `eps` when `absolute`).
    AdaptiveEps { eps: f64, absolute: bool },
    /// Keep exactly `r` directions of every row that has far blocks.
    FixedRank(usize),
}

impl CompressionStrategy {
    pub fn eps(eps: f64) -> Self {
        Self::AdaptiveEps { eps, absolute: false }
    }

    pub fn rank(r: usize) -> Self {
        Self::FixedRank(r)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::AdaptiveEps { eps, .. } if !(eps > 0.0 && eps.is_finite()) => {
                Err(CeError::InvalidParameter(format!("eps must be positive, got {eps}")))
            }
            _ => Ok(()),
        }
    }

    /// Retained rank for a row whose far blocks have singular values `sigma`
    /// (descending). `has_far` is false when the row has no far blocks at all.
    pub fn rank_for<T: Scalar>(&self, sigma: &[T], has_far: bool, rows: usize) -> usize {
        if !has_far {
            return 0;
        }
        match *self {
            Self::FixedRank(r) => r.min(rows),
            Self::AdaptiveEps { eps, absolute } => {
                let s1 = sigma.first().map_or(0.0, |s| s.as_f64());
                if s1 <= 0.0 {
                    return 0;
                }
                let cut = if absolute { eps } else { eps * s1 };
                sigma.iter().take_while(|s| s.as_f64() > cut).count()
            }
        }
    }
}

impl std::fmt::Display for CompressionStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Self::AdaptiveEps { eps, absolute: false } => write!(f, "eps={eps:e}"),
            Self::AdaptiveEps { eps, absolute: true } => write!(f, "abs-eps={eps:e}"),
            Self::FixedRank(r) => write!(f, "rank={r}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_rules() {
        let s = [10.0f64, 1.0, 1e-3, 1e-9];
        assert_eq!(CompressionStrategy::eps(1e-2).rank_for(&s, true, 4), 2);
        assert_eq!(CompressionStrategy::eps(1e-5).rank_for(&s, true, 4), 3);
        assert_eq!(CompressionStrategy::eps(1e-12).rank_for(&s, true, 4), 4);
        // boundary: sigma equal to the cut is dropped
        assert_eq!(CompressionStrategy::eps(0.1).rank_for(&s, true, 4), 1);
        let abs = CompressionStrategy::AdaptiveEps { eps: 0.5, absolute: true };
        assert_eq!(abs.rank_for(&s, true, 4), 2);
        assert_eq!(CompressionStrategy::eps(1e-2).rank_for(&[0.0f64; 3], true, 3), 0);
        assert_eq!(CompressionStrategy::rank(4).rank_for(&s, true, 8), 4);
        assert_eq!(CompressionStrategy::rank(4).rank_for(&s, true, 3), 3);
        assert_eq!(CompressionStrategy::rank(4).rank_for::<f64>(&[], false, 8), 0);
        assert!(CompressionStrategy::eps(0.0).validate().is_err());
        assert!(CompressionStrategy::eps(f64::NAN).validate().is_err());
    }
}
