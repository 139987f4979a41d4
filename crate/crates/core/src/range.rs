//! Linear position outputs `y = C_p p` from ranges or direct position fixes.
//!
//! For range sensing, squared ranges to a reference anchor are differenced
//! against the others, which cancels `|p|^2` and leaves one linear equation
//! `(a_ref - a_i)^T p = y_i` per non-reference anchor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::so3::Vec3;
use crate::vehicle::measure_ranges;

/// Smallest admissible singular value of `C_p`.
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOutput {
    pub y: DVector<f64>,
    pub c_p: DMatrix<f64>,
}

impl LinearOutput {
    pub fn dim(&self) -> usize {
        self.y.len()
    }
}

fn check_anchors(anchors: &[Vec3], reference: usize) -> Result<()> {
    if anchors.len() < 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            actual: anchors.len(),
        });
    }
    if reference >= anchors.len() {
        return Err(Error::validation(
            "reference_anchor",
            format!(
                "index {reference} out of range for {} anchors",
                anchors.len()
            ),
        ));
    }
    Ok(())
}

/// Smallest singular value of an `m x 3` matrix.
pub fn min_singular_value(c_p: &DMatrix<f64>) -> f64 {
    c_p.singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Output matrix with rows `(a_ref - a_i)^T` for every `i != reference`.
pub fn build_cp(anchors: &[Vec3], reference: usize) -> Result<DMatrix<f64>> {
    check_anchors(anchors, reference)?;
    let a_ref = anchors[reference];
    let rows: Vec<_> = anchors
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != reference)
        .map(|(_, a)| (a_ref - a).transpose())
        .collect();
    let c_p = DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]);
    let sigma = min_singular_value(&c_p);
    if sigma < RANK_TOL {
        return Err(Error::CoplanarAnchors(sigma));
    }
    Ok(c_p)
}

/// `y_i = (d_i^2 - d_ref^2 - |a_i|^2 + |a_ref|^2) / 2` for every `i != reference`.
pub fn build_y(ranges: &[f64], anchors: &[Vec3], reference: usize) -> Result<DVector<f64>> {
    check_anchors(anchors, reference)?;
    if ranges.len() != anchors.len() {
        return Err(Error::DimensionMismatch {
            expected: anchors.len(),
            actual: ranges.len(),
        });
    }
    if let Some(&d) = ranges.iter().find(|d| d.is_nan() || **d < 0.0) {
        return Err(Error::validation(
            "ranges",
            format!("negative or NaN range {d}"),
        ));
    }
    let d_ref = ranges[reference];
    let a_ref_sq = anchors[reference].norm_squared();
    let y: Vec<f64> = (0..anchors.len())
        .filter(|&i| i != reference)
        .map(|i| {
            0.5 * (ranges[i] * ranges[i] - d_ref * d_ref - anchors[i].norm_squared() + a_ref_sq)
        })
        .collect();
    Ok(DVector::from_vec(y))
}

/// Full position fix: `y = p`, `C_p = I_3`.
pub fn gps_output(p: &Vec3) -> LinearOutput {
    LinearOutput {
        y: DVector::from_column_slice(p.as_slice()),
        c_p: DMatrix::identity(3, 3),
    }
}

/// Turns raw sensor readings into linear outputs for a fixed sensor setup.
#[derive(Debug, Clone)]
pub enum PositionFrontend {
    Ranges {
        anchors: Vec<Vec3>,
        reference: usize,
        c_p: DMatrix<f64>,
    },
    Gps,
}

impl PositionFrontend {
    pub fn ranges(anchors: Vec<Vec3>, reference: usize) -> Result<Self> {
        let c_p = build_cp(&anchors, reference)?;
        Ok(PositionFrontend::Ranges {
            anchors,
            reference,
            c_p,
        })
    }

    pub fn c_p(&self) -> DMatrix<f64> {
        match self {
            PositionFrontend::Ranges { c_p, .. } => c_p.clone(),
            PositionFrontend::Gps => DMatrix::identity(3, 3),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            PositionFrontend::Ranges { c_p, .. } => c_p.nrows(),
            PositionFrontend::Gps => 3,
        }
    }

    /// Raw channels: one range per anchor, or three position components.
    pub fn channel_count(&self) -> usize {
        match self {
            PositionFrontend::Ranges { anchors, .. } => anchors.len(),
            PositionFrontend::Gps => 3,
        }
    }

    /// Linear output at true position `p`, with `noise` added to the raw
    /// channels (ranges are clamped at zero).
    pub fn output(&self, p: &Vec3, noise: &[f64]) -> Result<DVector<f64>> {
        if noise.len() != self.channel_count() {
            return Err(Error::DimensionMismatch {
                expected: self.channel_count(),
                actual: noise.len(),
            });
        }
        match self {
            PositionFrontend::Ranges {
                anchors, reference, ..
            } => {
                let ranges: Vec<f64> = measure_ranges(p, anchors)
                    .iter()
                    .zip(noise)
                    .map(|(d, n)| (d + n).max(0.0))
                    .collect();
                build_y(&ranges, anchors, *reference)
            }
            PositionFrontend::Gps => Ok(DVector::from_fn(3, |i, _| p[i] + noise[i])),
        }
    }
}
