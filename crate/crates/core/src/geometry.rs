//! Pinhole camera model, perspective projection and covariance math.
//!
//! Camera space follows the OpenCV convention: `+x` right, `+y` down, `+z`
//! forward. Integer pixel `(i, j)` spans `[i, i+1) x [j, j+1)`, so a continuous
//! projection `(u, v)` lands in pixel `(floor(u), floor(v))` and pixel centers
//! sit at half-integer coordinates.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Matrix4, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};

pub const DEFAULT_NEAR_PLANE: f64 = 0.01;

/// Anti-aliasing floor added to the diagonal of every projected covariance.
pub const COV2D_REGULARIZATION: f64 = 0.3;

const ORTHONORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Rotation block of the world-to-camera transform.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub near_plane: f64,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: usize,
        height: usize,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let cam = Camera {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            near_plane: DEFAULT_NEAR_PLANE,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn from_world_to_camera(
        width: usize,
        height: usize,
        intrinsics: [f64; 4],
        world_to_camera: &Matrix4<f64>,
    ) -> Result<Self> {
        let [fx, fy, cx, cy] = intrinsics;
        let bottom = world_to_camera.row(3);
        let expected = [0.0, 0.0, 0.0, 1.0];
        if bottom.iter().zip(expected).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(Error::Config(format!(
                "world_to_camera last row must be (0,0,0,1), got {bottom}"
            )));
        }
        let rotation = world_to_camera.fixed_view::<3, 3>(0, 0).into_owned();
        let translation = world_to_camera.fixed_view::<3, 1>(0, 3).into_owned();
        Self::new(width, height, fx, fy, cx, cy, rotation, translation)
    }

    /// Camera at `eye` looking at `target`, with `up` hinting the world up axis.
    pub fn look_at(
        width: usize,
        height: usize,
        fov_x_deg: f64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Config("eye and target coincide".into()))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Config("up vector is parallel to the view direction".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        let f = (width as f64 / 2.0) / (fov_x_deg.to_radians() / 2.0).tan();
        Self::new(
            width,
            height,
            f,
            f,
            width as f64 / 2.0,
            height as f64 / 2.0,
            rotation,
            translation,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera resolution must be nonzero".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::Config(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        if !(self.near_plane > 0.0) {
            return Err(Error::Config("near plane must be positive".into()));
        }
        let gram = self.rotation.transpose() * self.rotation;
        let off = (gram - Matrix3::identity()).abs().max();
        if !(off <= ORTHONORMAL_TOLERANCE) || !(self.rotation.determinant() > 0.0) {
            return Err(Error::Config(
                "world_to_camera rotation block is not a proper orthonormal rotation".into(),
            ));
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("non-finite camera translation".into()));
        }
        Ok(())
    }

    pub fn world_to_camera(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    #[inline]
    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// World-space optical axis direction.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.row(2).transpose()
    }

    /// Pinhole projection of a camera-space point, without clipping.
    #[inline]
    pub fn project_camera_space(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    pub fn contains_pixel(&self, uv: &Vector2<f64>) -> bool {
        uv.x >= 0.0 && uv.y >= 0.0 && uv.x < self.width as f64 && uv.y < self.height as f64
    }
}

/// Projects a world point; `None` when at or behind the near plane or
/// outside `[0, W) x [0, H)`.
pub fn project_point(camera: &Camera, point: &Vector3<f64>) -> Option<Vector2<f64>> {
    let p = camera.to_camera(point);
    if !(p.z > camera.near_plane) {
        return None;
    }
    let uv = camera.project_camera_space(&p);
    camera.contains_pixel(&uv).then_some(uv)
}

/// Integer pixel containing a world point's projection.
pub fn project_to_pixel(camera: &Camera, point: &Vector3<f64>) -> Option<(usize, usize)> {
    project_point(camera, point).map(|uv| (uv.x.floor() as usize, uv.y.floor() as usize))
}

/// `R S S^T R^T` for per-axis scales and a unit rotation.
pub fn world_covariance(scale: &Vector3<f64>, rotation: &UnitQuaternion<f64>) -> Matrix3<f64> {
    let m = rotation.to_rotation_matrix().into_inner() * Matrix3::from_diagonal(scale);
    m * m.transpose()
}

/// Screen-space covariance of a Gaussian, with the default regularization.
pub fn project_covariance(camera: &Camera, position: &Vector3<f64>, cov3d: &Matrix3<f64>) -> Result<Matrix2<f64>> {
    project_covariance_with(camera, position, cov3d, COV2D_REGULARIZATION)
}

/// First-order (EWA) projection `J W cov3d W^T J^T + reg I`.
pub fn project_covariance_with(
    camera: &Camera,
    position: &Vector3<f64>,
    cov3d: &Matrix3<f64>,
    regularization: f64,
) -> Result<Matrix2<f64>> {
    let t = camera.to_camera(position);
    if !(t.z > camera.near_plane) {
        return Err(Error::Contract(format!(
            "cannot project covariance at camera depth {} (near plane {})",
            t.z, camera.near_plane
        )));
    }
    let jac = projection_jacobian(camera, &t);
    let m = jac * camera.rotation;
    let cov = m * cov3d * m.transpose();
    let cov = (cov + cov.transpose()) * 0.5;
    Ok(cov + Matrix2::identity() * regularization)
}

/// Jacobian of the pinhole projection w.r.t. camera-space position.
pub fn projection_jacobian(camera: &Camera, t: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / t.z;
    let iz2 = iz * iz;
    Matrix2x3::new(
        camera.fx * iz,
        0.0,
        -camera.fx * t.x * iz2,
        0.0,
        camera.fy * iz,
        -camera.fy * t.y * iz2,
    )
}

/// Screen-space Gaussian footprint consumed by the rasterizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected2DGaussian {
    pub mean: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    pub depth: f64,
    pub source_index: usize,
}

impl Projected2DGaussian {
    /// Inverse covariance as `(a, b, c)` of `[[a, b], [b, c]]`; `None` when the
    /// covariance is not positive definite.
    pub fn conic(&self) -> Option<[f64; 3]> {
        let (a, b, c) = (self.cov2d[(0, 0)], self.cov2d[(0, 1)], self.cov2d[(1, 1)]);
        let det = a * c - b * b;
        if !(a > 0.0 && c > 0.0 && det > 0.0) || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some([c * inv, -b * inv, a * inv])
    }
}
