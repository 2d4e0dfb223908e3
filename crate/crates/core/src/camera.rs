//! Pinhole cameras: x right, y down, z forward; world-to-camera `R, t`.

use nalgebra::{Matrix3, Matrix4};

use crate::geometry::Vec3;

pub const DEFAULT_NEAR: f64 = 0.01;
pub const DEFAULT_GUARD_BAND: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    pub id: u32,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub screen: [f64; 2],
    pub depth: f64,
    pub visible: bool,
}

impl PinholeCamera {
    /// Camera at `center` looking at `target`; `up_hint` picks the roll
    /// (image y runs opposite to it).
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(id: u32, width: usize, height: usize, focal: f64, center: Vec3, target: Vec3, up_hint: Vec3) -> Self {
        let forward = (target - center).normalize();
        let mut right = (-up_hint).cross(&forward);
        if right.norm() < 1e-9 {
            right = Vec3::x().cross(&forward);
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * center);
        Self {
            id,
            width,
            height,
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            rotation,
            translation,
        }
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Unit world-space direction of the ray through the center of pixel `(px, py)`.
    pub fn ray_direction(&self, px: usize, py: usize) -> Vec3 {
        let d = Vec3::new((px as f64 + 0.5 - self.cx) / self.fx, (py as f64 + 0.5 - self.cy) / self.fy, 1.0);
        (self.rotation.transpose() * d).normalize()
    }

    /// Combined intrinsic and extrinsic map from world to homogeneous
    /// screen coordinates `(x z, y z, 1, z)`.
    pub fn world_to_screen(&self) -> Matrix4<f64> {
        #[rustfmt::skip]
        let k = Matrix4::new(
            self.fx, 0.0, self.cx, 0.0,
            0.0, self.fy, self.cy, 0.0,
            0.0, 0.0, 0.0, 1.0,
            0.0, 0.0, 1.0, 0.0,
        );
        let mut rt = Matrix4::identity();
        rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        k * rt
    }

    pub fn project(&self, p: &Vec3, near: f64, guard_band: f64) -> Projection {
        let c = self.to_camera(p);
        let depth = c.z;
        if depth <= near {
            return Projection { screen: [f64::NAN, f64::NAN], depth, visible: false };
        }
        let sx = self.fx * c.x / depth + self.cx;
        let sy = self.fy * c.y / depth + self.cy;
        let (w, h) = (self.width as f64, self.height as f64);
        let visible = sx >= -guard_band * w && sx <= (1.0 + guard_band) * w && sy >= -guard_band * h && sy <= (1.0 + guard_band) * h;
        Projection { screen: [sx, sy], depth, visible }
    }

    /// Checks the rotation is orthonormal with determinant +1.
    pub fn rotation_is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        err <= tol && (r.determinant() - 1.0).abs() <= tol && self.fx > 0.0 && self.fy > 0.0
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

pub fn project_vertex(camera: &PinholeCamera, p: &Vec3) -> Projection {
    camera.project(p, DEFAULT_NEAR, DEFAULT_GUARD_BAND)
}
