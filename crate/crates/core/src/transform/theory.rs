//! Closed-form parameter formulas derived from the transform's distance
//! structure.

use crate::error::{Error, Result};

/// Smallest scaling that separates filter groups whose members lie within
/// `intra_diameter` of each other and whose filters differ by at least
/// `filter_gap`:
///
/// `alpha* = sqrt((2 D + D^2) / ((d*/m) g^2 - 2 D g))`, defined when
/// `(d*/m) g > 2 D`.
///
/// The raw value is returned; callers clamp to the `alpha >= 1` constraint.
pub fn separation_alpha(intra_diameter: f64, filter_gap: f64, padded_dim: usize, m: usize) -> Result<f64> {
    if !(intra_diameter >= 0.0) || !intra_diameter.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "intra-cluster diameter must be >= 0 (got {intra_diameter})"
        )));
    }
    if !(filter_gap > 0.0) || !filter_gap.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "filter gap must be > 0 (got {filter_gap})"
        )));
    }
    if m == 0 || padded_dim == 0 || padded_dim % m != 0 {
        return Err(Error::InvalidParameter(format!(
            "padded dimension {padded_dim} must be a positive multiple of m = {m}"
        )));
    }
    let segments = (padded_dim / m) as f64;
    let lhs = segments * filter_gap;
    let rhs = 2.0 * intra_diameter;
    if lhs <= rhs {
        return Err(Error::SeparationUnsatisfied { lhs, rhs });
    }
    let num = 2.0 * intra_diameter + intra_diameter * intra_diameter;
    let den = segments * filter_gap * filter_gap - 2.0 * intra_diameter * filter_gap;
    Ok((num / den).sqrt())
}

/// Scaling that aligns transformed distances with a combined score weighted
/// by `lambda`: `max(1, sqrt((1 - lambda) / lambda))`.
pub fn optimal_alpha(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be > 0 for a finite optimum (got {lambda}); use pre-filtering for filter-only scoring"
        )));
    }
    if lambda > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be <= 1 (got {lambda})"
        )));
    }
    Ok(((1.0 - lambda) / lambda).sqrt().max(1.0))
}
