//! Shared geometric primitives: rigid poses, axis-aligned boxes, and the
//! SO(3) helpers used by the pose-graph smoother.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Rigid transform (rotation then translation), mapping local points into the
/// parent frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Quat,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Quat, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Quat::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Quat::identity(), translation }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_dir(&self, d: &Vec3) -> Vec3 {
        self.rotation * d
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        Pose { rotation: inv_rot, translation: -(inv_rot * self.translation) }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Linear interpolation of translation, shortest-arc spherical
    /// interpolation of rotation, `alpha` in [0, 1].
    pub fn interpolate(&self, other: &Pose, alpha: f64) -> Pose {
        let translation = self.translation + (other.translation - self.translation) * alpha;
        let rotation = self
            .rotation
            .slerp(&other.rotation, alpha);
        Pose { rotation, translation }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Wire form of a pose: position `p = [x, y, z]` meters, quaternion
/// `q = [w, x, y, z]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PoseJson {
    pub p: [f64; 3],
    pub q: [f64; 4],
}

impl From<&Pose> for PoseJson {
    fn from(pose: &Pose) -> Self {
        let q = pose.rotation.quaternion();
        PoseJson {
            p: [pose.translation.x, pose.translation.y, pose.translation.z],
            q: [q.w, q.i, q.j, q.k],
        }
    }
}

impl From<PoseJson> for Pose {
    fn from(j: PoseJson) -> Self {
        let q = nalgebra::Quaternion::new(j.q[0], j.q[1], j.q[2], j.q[3]);
        Pose {
            rotation: UnitQuaternion::from_quaternion(q),
            translation: Vec3::new(j.p[0], j.p[1], j.p[2]),
        }
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(PoseJson::deserialize(d)?.into())
    }
}

/// Axis-aligned box, `min <= max` componentwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Option<Aabb> {
        if min.x <= max.x && min.y <= max.y && min.z <= max.z {
            Some(Aabb { min, max })
        } else {
            None
        }
    }

    pub fn from_point(p: Vec3) -> Aabb {
        Aabb { min: p, max: p }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Vec3>>(points: I) -> Option<Aabb> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut aabb = Aabb::from_point(first);
        for p in it {
            aabb.expand_point(p);
        }
        Some(aabb)
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn expand_point(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn inflate(&self, eps: f64) -> Aabb {
        let d = Vec3::new(eps, eps, eps);
        Aabb { min: self.min - d, max: self.max + d }
    }

    pub fn contains_point(&self, p: &Vec3, eps: f64) -> bool {
        p.x >= self.min.x - eps
            && p.y >= self.min.y - eps
            && p.z >= self.min.z - eps
            && p.x <= self.max.x + eps
            && p.y <= self.max.y + eps
            && p.z <= self.max.z + eps
    }

    pub fn contains_box(&self, other: &Aabb, eps: f64) -> bool {
        self.contains_point(&other.min, eps) && self.contains_point(&other.max, eps)
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && self.max.x >= other.min.x
            && self.min.y <= other.max.y
            && self.max.y >= other.min.y
            && self.min.z <= other.max.z
            && self.max.z >= other.min.z
    }

    /// Slab test against the segment `a + t (b - a)`, `t` in [0, 1].
    pub fn intersects_segment(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for ax in 0..3 {
            if d[ax].abs() < 1e-15 {
                if a[ax] < self.min[ax] || a[ax] > self.max[ax] {
                    return false;
                }
            } else {
                let inv = 1.0 / d[ax];
                let mut near = (self.min[ax] - a[ax]) * inv;
                let mut far = (self.max[ax] - a[ax]) * inv;
                if near > far {
                    std::mem::swap(&mut near, &mut far);
                }
                t0 = t0.max(near);
                t1 = t1.min(far);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    /// Slab test against the ray `o + t d` for `t >= 0`; returns the entry
    /// parameter (clamped to 0 when the origin is inside).
    pub fn ray_entry(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for ax in 0..3 {
            if d[ax].abs() < 1e-15 {
                if o[ax] < self.min[ax] || o[ax] > self.max[ax] {
                    return None;
                }
            } else {
                let inv = 1.0 / d[ax];
                let mut near = (self.min[ax] - o[ax]) * inv;
                let mut far = (self.max[ax] - o[ax]) * inv;
                if near > far {
                    std::mem::swap(&mut near, &mut far);
                }
                t0 = t0.max(near);
                t1 = t1.min(far);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some(t0)
    }
}

/// Wire form of a box: `{min: [x,y,z], max: [x,y,z]}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AabbJson {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl From<&Aabb> for AabbJson {
    fn from(b: &Aabb) -> Self {
        AabbJson {
            min: [b.min.x, b.min.y, b.min.z],
            max: [b.max.x, b.max.y, b.max.z],
        }
    }
}

impl From<AabbJson> for Aabb {
    fn from(j: AabbJson) -> Self {
        Aabb {
            min: Vec3::new(j.min[0], j.min[1], j.min[2]),
            max: Vec3::new(j.max[0], j.max[1], j.max[2]),
        }
    }
}

impl Serialize for Aabb {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AabbJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Aabb {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(AabbJson::deserialize(d)?.into())
    }
}

pub fn vec3_to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn array_to_vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation-vector exponential.
pub fn rotvec_to_quat(v: &Vec3) -> Quat {
    Quat::from_scaled_axis(*v)
}

/// Rotation-vector logarithm (principal branch, angle in [0, pi]).
pub fn quat_to_rotvec(q: &Quat) -> Vec3 {
    q.scaled_axis()
}

/// Inverse of the right Jacobian of the SO(3) exponential at `v`.
///
/// With r(d) = log(exp(v_hat) exp(d_hat)), dr/dd at d = 0 equals this matrix.
pub fn right_jacobian_inv(v: &Vec3) -> Matrix3<f64> {
    let theta = v.norm();
    let w = skew(v);
    if theta < 1e-7 {
        return Matrix3::identity() + 0.5 * w + (1.0 / 12.0) * w * w;
    }
    let theta2 = theta * theta;
    let coeff = 1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() + 0.5 * w + coeff * w * w
}
