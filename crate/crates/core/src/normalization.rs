//! Data normalization: a virtual camera rotated to look at the face centre
//! from a fixed distance, with its x-axis perpendicular to the head's y-axis.
//!
//! Image points are mapped by the full warp `K_n · S · R · K⁻¹`; gaze
//! directions are mapped by the rotation `R` alone.

use std::io::Write;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ImageBuffer, ImageEncoder, Pixel};
use nalgebra::{Matrix3, Point2, Vector3};
use thiserror::Error;

use crate::geom::{normalize_checked, CameraIntrinsics, GeomError, RigidTransform};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormalizationError {
    #[error("face centre must lie in front of the camera")]
    DegenerateFaceCenter,
    #[error("normalizing rotation is undefined: head y-axis and camera y-axis are both parallel to the view ray")]
    GimbalDegenerate,
    #[error("point maps to infinity under the warp")]
    DegeneratePoint,
    #[error("warp matrix is not invertible")]
    SingularWarp,
    #[error("source image is empty")]
    EmptyImage,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("failed to write patch: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationParams<T: Scalar> {
    /// Distance of the normalized camera from the face centre (mm).
    pub norm_distance: T,
    pub norm_intrinsics: CameraIntrinsics<T>,
    /// Side of the square output patch (pixels).
    pub patch_size: u32,
}

impl<T: Scalar> NormalizationParams<T> {
    pub fn new(norm_distance: T, norm_intrinsics: CameraIntrinsics<T>, patch_size: u32) -> Result<Self, NormalizationError> {
        if !(norm_distance > T::zero()) || patch_size == 0 {
            return Err(NormalizationError::InvalidParams("distance and patch size must be positive".into()));
        }
        norm_intrinsics.validate()?;
        Ok(Self { norm_distance, norm_intrinsics, patch_size })
    }
}

impl<T: Scalar> Default for NormalizationParams<T> {
    /// 600 mm, focal length 960 px, 448×448 patch.
    fn default() -> Self {
        let half: T = lit(224.0);
        Self {
            norm_distance: lit(600.0),
            norm_intrinsics: CameraIntrinsics { fx: lit(960.0), fy: lit(960.0), cx: half, cy: half, width_px: 448, height_px: 448 },
            patch_size: 448,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFrame<T: Scalar> {
    /// Rotation from camera to normalized camera.
    pub rotation: Matrix3<T>,
    /// `norm_distance / ‖face_center‖`.
    pub scale: T,
    /// Pixel warp from the source camera to the normalized camera.
    pub warp: Matrix3<T>,
    pub warp_inverse: Matrix3<T>,
    pub face_center_cam: Vector3<T>,
    pub patch_size: u32,
    /// Set when the head y-axis was parallel to the view ray and the camera
    /// y-axis was used to build the rotation instead.
    pub gimbal_fallback: bool,
}

impl<T: Scalar> NormalizedFrame<T> {
    /// Camera-frame direction into normalized space.
    pub fn normalize_gaze(&self, g: &Vector3<T>) -> Vector3<T> {
        self.rotation * g
    }

    /// Head rotation as seen by the normalized camera.
    pub fn normalized_head_rotation(&self, head_pose: &RigidTransform<T>) -> Matrix3<T> {
        self.rotation * head_pose.rotation
    }

    /// Camera-frame 3D point into the normalized camera frame (rotation and scaling).
    pub fn normalize_point_3d(&self, p: &Vector3<T>) -> Vector3<T> {
        let mut q = self.rotation * p;
        q.z *= self.scale;
        q
    }
}

pub fn compute_normalization<T: Scalar>(
    face_center: &Vector3<T>,
    head_pose: &RigidTransform<T>,
    cam: &CameraIntrinsics<T>,
    params: &NormalizationParams<T>,
) -> Result<NormalizedFrame<T>, NormalizationError> {
    if !(face_center.z > T::zero()) || !face_center.iter().all(|v| v.is_finite()) {
        return Err(NormalizationError::DegenerateFaceCenter);
    }
    let distance = face_center.norm();
    let z_axis = face_center / distance;
    let head_y: Vector3<T> = head_pose.rotation.column(1).into_owned();
    let gimbal_tol: T = lit(1e-6);

    let mut gimbal_fallback = false;
    let mut x_dir = head_y.cross(&z_axis);
    if x_dir.norm() < gimbal_tol {
        gimbal_fallback = true;
        x_dir = Vector3::y().cross(&z_axis);
        if x_dir.norm() < gimbal_tol {
            return Err(NormalizationError::GimbalDegenerate);
        }
    }
    let x_axis = normalize_checked(&x_dir)?;
    let y_axis = z_axis.cross(&x_axis);
    let rotation = Matrix3::from_rows(&[x_axis.transpose(), y_axis.transpose(), z_axis.transpose()]);

    let scale = params.norm_distance / distance;
    let scaling = Matrix3::from_diagonal(&Vector3::new(T::one(), T::one(), scale));
    let warp = params.norm_intrinsics.matrix() * scaling * rotation * cam.inverse_matrix();
    let warp_inverse = warp.try_inverse().ok_or(NormalizationError::SingularWarp)?;
    if !warp_inverse.iter().all(|v| v.is_finite()) {
        return Err(NormalizationError::SingularWarp);
    }
    Ok(NormalizedFrame {
        rotation,
        scale,
        warp,
        warp_inverse,
        face_center_cam: *face_center,
        patch_size: params.patch_size,
        gimbal_fallback,
    })
}

fn apply_homography<T: Scalar>(h: &Matrix3<T>, p: &Point2<T>) -> Result<Point2<T>, NormalizationError> {
    let q = h * Vector3::new(p.x, p.y, T::one());
    let scale = q.x.abs().max(q.y.abs()).max(T::one());
    if q.z.abs() <= T::default_epsilon() * scale {
        return Err(NormalizationError::DegeneratePoint);
    }
    Ok(Point2::new(q.x / q.z, q.y / q.z))
}

/// Source pixel → normalized pixel.
pub fn warp_point<T: Scalar>(p: &Point2<T>, frame: &NormalizedFrame<T>) -> Result<Point2<T>, NormalizationError> {
    apply_homography(&frame.warp, p)
}

/// Normalized pixel → source pixel.
pub fn unwarp_point<T: Scalar>(p: &Point2<T>, frame: &NormalizedFrame<T>) -> Result<Point2<T>, NormalizationError> {
    apply_homography(&frame.warp_inverse, p)
}

/// Normalized-space gaze direction back to the camera frame: `Rᵀ · g_n`.
pub fn denormalize_gaze<T: Scalar>(g_n: &Vector3<T>, frame: &NormalizedFrame<T>) -> Result<Vector3<T>, NormalizationError> {
    let n = g_n.norm();
    if !n.is_finite() || (n - T::one()).abs() > T::invariant_tol() {
        return Err(GeomError::InvalidVector("normalized gaze must be a unit vector").into());
    }
    Ok(frame.rotation.transpose() * g_n)
}

/// Resamples `img` through `warp` (source → output pixels) into an
/// `out_w × out_h` image using bilinear interpolation. Samples falling
/// outside the source contribute zero. Pixel centres sit at integer coordinates.
pub fn warp_image_with<P, T>(
    img: &ImageBuffer<P, Vec<u8>>,
    warp: &Matrix3<T>,
    out_w: u32,
    out_h: u32,
) -> Result<ImageBuffer<P, Vec<u8>>, NormalizationError>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    if img.width() == 0 || img.height() == 0 {
        return Err(NormalizationError::EmptyImage);
    }
    let inv = warp.try_inverse().ok_or(NormalizationError::SingularWarp)?;
    let inv: Matrix3<f64> = inv.map(|v| v.to_f64_lossy());
    if !inv.iter().all(|v| v.is_finite()) {
        return Err(NormalizationError::SingularWarp);
    }
    let (w, h) = (img.width() as i64, img.height() as i64);
    let channels = P::CHANNEL_COUNT as usize;
    let mut out = ImageBuffer::<P, Vec<u8>>::new(out_w, out_h);
    let mut acc = vec![0.0f64; channels];
    for v in 0..out_h {
        for u in 0..out_w {
            let q = inv * Vector3::new(u as f64, v as f64, 1.0);
            if q.z.abs() < f64::EPSILON {
                continue;
            }
            let (x, y) = (q.x / q.z, q.y / q.z);
            if !(x > -1.0 && y > -1.0 && x < w as f64 && y < h as f64) {
                continue;
            }
            let (x0, y0) = (x.floor(), y.floor());
            let (fx, fy) = (x - x0, y - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (dx, dy, wgt) in [(0, 0, (1.0 - fx) * (1.0 - fy)), (1, 0, fx * (1.0 - fy)), (0, 1, (1.0 - fx) * fy), (1, 1, fx * fy)] {
                let (xi, yi) = (x0 + dx, y0 + dy);
                if wgt == 0.0 || xi < 0 || yi < 0 || xi >= w || yi >= h {
                    continue;
                }
                let px = img.get_pixel(xi as u32, yi as u32);
                for (a, c) in acc.iter_mut().zip(px.channels()) {
                    *a += wgt * f64::from(*c);
                }
            }
            let dst = out.get_pixel_mut(u, v);
            for (c, a) in dst.channels_mut().iter_mut().zip(&acc) {
                *c = a.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

/// Crops the normalized face patch (`patch_size × patch_size`).
pub fn warp_image<P, T>(img: &ImageBuffer<P, Vec<u8>>, frame: &NormalizedFrame<T>) -> Result<ImageBuffer<P, Vec<u8>>, NormalizationError>
where
    P: Pixel<Subpixel = u8>,
    T: Scalar,
{
    warp_image_with(img, &frame.warp, frame.patch_size, frame.patch_size)
}

fn save_pnm(buf: &[u8], w: u32, h: u32, color: image::ExtendedColorType, subtype: PnmSubtype, path: &Path) -> Result<(), NormalizationError> {
    let io_err = |e: std::io::Error| NormalizationError::Io(e.to_string());
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut writer = std::io::BufWriter::new(file);
    PnmEncoder::new(&mut writer)
        .with_subtype(subtype)
        .write_image(buf, w, h, color)
        .map_err(|e| NormalizationError::Io(e.to_string()))?;
    writer.flush().map_err(io_err)
}

/// Writes a grey patch as binary PGM (P5).
pub fn save_pgm(img: &image::GrayImage, path: &Path) -> Result<(), NormalizationError> {
    let subtype = PnmSubtype::Graymap(SampleEncoding::Binary);
    save_pnm(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::L8, subtype, path)
}

/// Writes a colour patch as binary PPM (P6).
pub fn save_ppm(img: &image::RgbImage, path: &Path) -> Result<(), NormalizationError> {
    let subtype = PnmSubtype::Pixmap(SampleEncoding::Binary);
    save_pnm(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8, subtype, path)
}
