//! Row-column array geometry and the propagation medium.
//!
//! Coordinate convention used everywhere in this crate:
//!
//! * rows are long in `x` and stacked along `y` (transmit / bias side),
//! * columns are long in `y` and stacked along `x` (receive side),
//! * `z` is depth away from the array, the array plane is `z = 0`,
//! * the array is centered on the origin.
//!
//! A row `r` and a column `c` overlap in a `pitch × pitch` patch; its center
//! is the "crossing" `(x_c, y_r, 0)` that acts as the virtual 2D element of
//! the decoded receive aperture.

use crate::error::{Error, Result};
use crate::num::Real;

/// Physical description of a row-column array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry<S> {
    /// Number of row electrodes (stacked along `y`).
    pub rows: usize,
    /// Number of column electrodes (stacked along `x`).
    pub cols: usize,
    /// Element center-to-center spacing in meters (same along both axes).
    pub pitch: S,
    /// Gap between adjacent elements in meters; active width is `pitch - kerf`.
    pub kerf: S,
    /// Nominal transducer center frequency in hertz.
    pub center_frequency: S,
}

/// Uniform lossless propagation medium plus the acquisition sample rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumSpec<S> {
    /// Speed of sound in meters per second.
    pub speed_of_sound: S,
    /// Receive sampling frequency in hertz.
    pub sampling_frequency: S,
}

/// Centerline of a single long element (row or column).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centerline<S> {
    /// Midpoint of the element, on the array plane.
    pub center: [S; 3],
    /// Unit direction the element extends along.
    pub direction: [S; 3],
    /// Full length of the element in meters.
    pub length: S,
}

impl<S: Real> ArrayGeometry<S> {
    /// Checks the mechanical description for internal consistency.
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidSpec(format!(
                "array needs at least one row and one column (got {} x {})",
                self.rows, self.cols
            )));
        }
        if !(self.pitch > S::zero()) || !self.pitch.is_finite() {
            return Err(Error::InvalidSpec("pitch must be positive".into()));
        }
        if self.kerf < S::zero() || self.kerf >= self.pitch {
            return Err(Error::InvalidSpec(
                "kerf must satisfy 0 <= kerf < pitch".into(),
            ));
        }
        if !(self.center_frequency > S::zero()) {
            return Err(Error::InvalidSpec(
                "center frequency must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `y` coordinate of row `r`; rows are centered on the origin so row
    /// `r` sits at `(r - (rows-1)/2) · pitch`.
    #[inline]
    pub fn row_y(&self, r: usize) -> Result<S> {
        if r >= self.rows {
            return Err(Error::IndexOutOfRange(format!(
                "row {} of {}",
                r, self.rows
            )));
        }
        let half = S::of((self.rows - 1) as f64 / 2.0);
        Ok((S::of(r as f64) - half) * self.pitch)
    }

    /// `x` coordinate of column `c`, mirror-image definition of [`row_y`].
    ///
    /// [`row_y`]: ArrayGeometry::row_y
    #[inline]
    pub fn column_x(&self, c: usize) -> Result<S> {
        if c >= self.cols {
            return Err(Error::IndexOutOfRange(format!(
                "column {} of {}",
                c, self.cols
            )));
        }
        let half = S::of((self.cols - 1) as f64 / 2.0);
        Ok((S::of(c as f64) - half) * self.pitch)
    }

    /// Centerline of row `r`: a segment at constant `y`, spanning the full
    /// aperture width along `x`, on the array plane `z = 0`.
    pub fn row_centerline(&self, r: usize) -> Result<Centerline<S>> {
        let y = self.row_y(r)?;
        Ok(Centerline {
            center: [S::zero(), y, S::zero()],
            direction: [S::one(), S::zero(), S::zero()],
            length: self.aperture_x(),
        })
    }

    /// Centerline of column `c`: a segment at constant `x` spanning `y`.
    pub fn column_centerline(&self, c: usize) -> Result<Centerline<S>> {
        let x = self.column_x(c)?;
        Ok(Centerline {
            center: [x, S::zero(), S::zero()],
            direction: [S::zero(), S::one(), S::zero()],
            length: self.aperture_y(),
        })
    }

    /// Center of the overlap patch of row `r` and column `c`: the virtual
    /// element of the decoded 2D receive aperture.
    #[inline]
    pub fn crossing_position(&self, r: usize, c: usize) -> Result<[S; 3]> {
        Ok([self.column_x(c)?, self.row_y(r)?, S::zero()])
    }

    /// Aperture width along `x` (the stacking extent of the columns).
    #[inline]
    pub fn aperture_x(&self) -> S {
        S::of(self.cols as f64) * self.pitch
    }

    /// Aperture width along `y` (the stacking extent of the rows).
    #[inline]
    pub fn aperture_y(&self) -> S {
        S::of(self.rows as f64) * self.pitch
    }

    /// Active (radiating) width of one element: `pitch - kerf`.
    #[inline]
    pub fn element_width(&self) -> S {
        self.pitch - self.kerf
    }
}

impl<S: Real> MediumSpec<S> {
    /// Checks the medium parameters.
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_of_sound > S::zero()) {
            return Err(Error::InvalidSpec(
                "speed of sound must be positive".into(),
            ));
        }
        if !(self.sampling_frequency > S::zero()) {
            return Err(Error::InvalidSpec(
                "sampling frequency must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Wavelength of the given frequency in this medium.
    #[inline]
    pub fn wavelength(&self, frequency: S) -> S {
        self.speed_of_sound / frequency
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(rows: usize, cols: usize) -> ArrayGeometry<f64> {
        ArrayGeometry {
            rows,
            cols,
            pitch: 250e-6,
            kerf: 30e-6,
            center_frequency: 6.25e6,
        }
    }

    #[test]
    fn single_crossing_sits_at_origin() {
        let g = geom(1, 1);
        assert_eq!(g.crossing_position(0, 0).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn odd_count_centers_middle_row_exactly() {
        let g = geom(5, 5);
        assert_eq!(g.row_y(2).unwrap(), 0.0);
        assert_eq!(g.column_x(2).unwrap(), 0.0);
    }

    #[test]
    fn even_count_straddles_origin_at_half_pitch() {
        let g = geom(4, 4);
        assert_eq!(g.row_y(1).unwrap(), -125e-6);
        assert_eq!(g.row_y(2).unwrap(), 125e-6);
    }

    #[test]
    fn rows_and_columns_are_orthogonal_lines() {
        let g = geom(8, 8);
        let row = g.row_centerline(3).unwrap();
        let col = g.column_centerline(5).unwrap();
        let dot: f64 = row
            .direction
            .iter()
            .zip(col.direction.iter())
            .map(|(a, b)| a * b)
            .sum();
        assert_eq!(dot, 0.0);
        assert_eq!(row.length, g.aperture_x());
        assert_eq!(col.length, g.aperture_y());
    }

    #[test]
    fn out_of_range_indices_are_rejected() {
        let g = geom(4, 4);
        assert!(matches!(g.row_y(4), Err(Error::IndexOutOfRange(_))));
        assert!(matches!(
            g.crossing_position(0, 4),
            Err(Error::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let mut g = geom(4, 4);
        g.kerf = 300e-6; // larger than pitch
        assert!(g.validate().is_err());
        let mut g = geom(4, 4);
        g.pitch = 0.0;
        assert!(g.validate().is_err());
        assert!(geom(0, 4).validate().is_err());
    }

    proptest! {
        /// Element layout is mirror-symmetric: index `n-1-k` is the exact
        /// negation of index `k` (exact in floating point, since the offset
        /// factors are exact negations of each other).
        #[test]
        fn layout_is_mirror_symmetric(rows in 1usize..64, cols in 1usize..64,
                                      r in 0usize..64, c in 0usize..64) {
            let r = r % rows;
            let c = c % cols;
            let g = geom(rows, cols);
            prop_assert_eq!(g.row_y(r).unwrap(), -g.row_y(rows - 1 - r).unwrap());
            prop_assert_eq!(g.column_x(c).unwrap(), -g.column_x(cols - 1 - c).unwrap());
        }
    }
}
