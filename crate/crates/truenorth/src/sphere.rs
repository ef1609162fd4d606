//! Spherical geometry primitives shared by every other module: bearing
//! vectors, rotations, the equirectangular pixel mapping, and in-plane
//! angle measurements.
//!
//! Conventions, fixed here and used everywhere:
//!
//! * A [`Bearing`] is a unit 3-vector on the viewing sphere. The forward
//!   ("true north") direction is `(0, 0, 1)`, up is `(0, 1, 0)`, and
//!   `(1, 0, 0)` points to the viewer's right.
//! * Rotations are unit quaternions in the Hamilton convention; they are
//!   serialized in `(w, x, y, z)` order in every file format.
//! * Equirectangular pixel `(x, y)` maps to longitude
//!   `lon = 2π·x/width − π` and latitude `lat = π/2 − π·y/height`, so the
//!   image center is the forward direction and row 0 is the north pole.

use nalgebra::{Unit, UnitQuaternion, UnitVector3, Vector3};

use crate::error::{Error, Result};

/// Unit direction on the viewing sphere.
pub type Bearing = UnitVector3<f64>;

/// Unit quaternion rotation (Hamilton convention, serialized w-first).
pub type Rotation = UnitQuaternion<f64>;

/// Unit translation direction; two-view translation is only recoverable up
/// to scale, so only the direction is kept.
pub type TranslationDir = UnitVector3<f64>;

/// The forward ("true north") direction.
pub fn front() -> Bearing {
    Unit::new_unchecked(Vector3::new(0.0, 0.0, 1.0))
}

/// The backward direction, opposite to [`front`].
pub fn back() -> Bearing {
    Unit::new_unchecked(Vector3::new(0.0, 0.0, -1.0))
}

/// Builds a bearing from components, normalizing them.
///
/// Fails if the vector is too short to normalize reliably.
pub fn bearing(x: f64, y: f64, z: f64) -> Result<Bearing> {
    Unit::try_new(Vector3::new(x, y, z), 1e-12)
        .ok_or_else(|| Error::invalid(format!("cannot normalize near-zero direction ({x}, {y}, {z})")))
}

/// Rotates `p` about `axis` by `angle` radians using Rodrigues' formula.
///
/// `axis` must already be unit-norm (deviation above 1e-6 is rejected).
pub fn rotate_rodrigues(axis: &Vector3<f64>, angle: f64, p: &Bearing) -> Result<Bearing> {
    let norm = axis.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("rotation axis norm {norm} deviates from 1")));
    }
    let (sin_a, cos_a) = angle.sin_cos();
    let v = p.into_inner();
    let rotated = v * cos_a + axis.cross(&v) * sin_a + axis * (axis.dot(&v)) * (1.0 - cos_a);
    Ok(Unit::new_normalize(rotated))
}

/// Signed angle from `reference` to the projection of `target` onto the
/// plane with the given `normal`, positive by the right-hand rule about
/// `normal`.
///
/// `normal` must be unit and orthogonal to `reference` (within 1e-6).
pub fn signed_angle_in_plane(
    reference: &Bearing,
    target: &Bearing,
    normal: &Vector3<f64>,
) -> Result<f64> {
    if (normal.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid("plane normal is not unit-norm".to_string()));
    }
    if reference.dot(normal).abs() > 1e-6 {
        return Err(Error::invalid(
            "reference direction is not orthogonal to the plane normal".to_string(),
        ));
    }
    let in_plane = target.into_inner() - normal * target.dot(normal);
    if in_plane.norm() < 1e-9 {
        return Err(Error::degenerate(
            "target is parallel to the plane normal; in-plane projection vanishes".to_string(),
        ));
    }
    let sin_part = reference.cross(&in_plane).dot(normal);
    let cos_part = reference.dot(&in_plane);
    Ok(sin_part.atan2(cos_part))
}

/// L_p distance between two rotations, measured on quaternion components
/// `(w, x, y, z)` after aligning `b` to the same hemisphere as `a`.
///
/// The alignment makes the metric invariant under the quaternion double
/// cover: `q` and `-q` denote the same rotation and compare as equal.
pub fn quat_path_difference(a: &Rotation, b: &Rotation, p: u8) -> f64 {
    let (da, db) = (a.quaternion(), b.quaternion());
    let dot = da.w * db.w + da.i * db.i + da.j * db.j + da.k * db.k;
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    let diff = [
        da.w - sign * db.w,
        da.i - sign * db.i,
        da.j - sign * db.j,
        da.k - sign * db.k,
    ];
    match p {
        1 => diff.iter().map(|d| d.abs()).sum(),
        2 => diff.iter().map(|d| d * d).sum::<f64>().sqrt(),
        _ => panic!("quat_path_difference supports p = 1 or p = 2 only"),
    }
}

/// Aligns `b` to the hemisphere of `a` and returns the component-wise
/// difference `(w, x, y, z)`; the residual form of [`quat_path_difference`].
pub fn quat_difference_vector(a: &Rotation, b: &Rotation) -> [f64; 4] {
    let (da, db) = (a.quaternion(), b.quaternion());
    let dot = da.w * db.w + da.i * db.i + da.j * db.j + da.k * db.k;
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    [
        da.w - sign * db.w,
        da.i - sign * db.i,
        da.j - sign * db.j,
        da.k - sign * db.k,
    ]
}

/// Equirectangular frame geometry. Full 360° frames have `width == 2 * height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErGeometry {
    pub width: u32,
    pub height: u32,
}

impl ErGeometry {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("equirectangular geometry must be non-empty"));
        }
        Ok(ErGeometry { width, height })
    }

    /// Converts a continuous pixel position to a bearing.
    ///
    /// `x` must lie in `[0, width)` and `y` in `[0, height)`.
    pub fn bearing_at(&self, x: f64, y: f64) -> Result<Bearing> {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        if !(0.0..w).contains(&x) || !(0.0..h).contains(&y) {
            return Err(Error::invalid(format!(
                "pixel ({x}, {y}) outside [0, {w}) x [0, {h})"
            )));
        }
        let lon = 2.0 * std::f64::consts::PI * (x / w) - std::f64::consts::PI;
        let lat = std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * (y / h);
        Ok(Unit::new_normalize(Vector3::new(
            lat.cos() * lon.sin(),
            lat.sin(),
            lat.cos() * lon.cos(),
        )))
    }

    /// Converts a bearing to a continuous pixel position.
    ///
    /// The result has `x` in `[0, width)` and `y` in `[0, height]`; `y` can
    /// reach `height` exactly at the south pole. At the exact poles the
    /// longitude is undefined and `x = 0` is returned by convention.
    pub fn pixel_of(&self, b: &Bearing) -> (f64, f64) {
        let (w, h) = (f64::from(self.width), f64::from(self.height));
        let y_comp = b.y.clamp(-1.0, 1.0);
        if 1.0 - y_comp.abs() < 1e-12 {
            return (0.0, if y_comp > 0.0 { 0.0 } else { h });
        }
        let lat = y_comp.asin();
        let lon = b.x.atan2(b.z);
        let mut x = (lon + std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * w;
        if x >= w {
            x -= w;
        }
        let y = (std::f64::consts::FRAC_PI_2 - lat) / std::f64::consts::PI * h;
        (x, y)
    }
}

/// Pinhole mapping for wide-angle (non-360°) footage with the stated
/// horizontal field of view; vertical FoV follows from the aspect ratio.
pub fn wide_angle_bearing_at(
    width: u32,
    height: u32,
    hfov_deg: f64,
    x: f64,
    y: f64,
) -> Result<Bearing> {
    let (w, h) = (f64::from(width), f64::from(height));
    if !(0.0..w).contains(&x) || !(0.0..h).contains(&y) {
        return Err(Error::invalid(format!("pixel ({x}, {y}) outside [0, {w}) x [0, {h})")));
    }
    if !(0.0..360.0).contains(&hfov_deg) || hfov_deg <= 0.0 {
        return Err(Error::invalid(format!("horizontal FoV {hfov_deg} out of (0, 360)")));
    }
    let focal = (w / 2.0) / (hfov_deg.to_radians() / 2.0).tan();
    Ok(Unit::new_normalize(Vector3::new(
        (x - w / 2.0) / focal,
        -(y - h / 2.0) / focal,
        1.0,
    )))
}
