//! Six-joint serial arm (the macro module) described by standard DH parameters.

use nalgebra::{Matrix6, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::dls::{self, Chain, IkOptions};
use crate::error::{KinematicsError, Result};
use crate::real::{lit, Real};
use crate::se3::Pose;

/// One standard DH row: `Rz(θ + offset) · Tz(d) · Tx(a) · Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
#[serde(deny_unknown_fields)]
pub struct DhRow<T: Real> {
    #[serde(rename = "a_mm")]
    pub a: T,
    #[serde(rename = "d_mm")]
    pub d: T,
    #[serde(rename = "alpha_rad")]
    pub alpha: T,
    #[serde(rename = "theta_offset_rad", default)]
    pub theta_offset: T,
}

impl<T: Real> DhRow<T> {
    pub fn new(a: T, d: T, alpha: T, theta_offset: T) -> Self {
        Self {
            a,
            d,
            alpha,
            theta_offset,
        }
    }

    pub fn transform(&self, theta: T) -> Pose<T> {
        let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), theta + self.theta_offset);
        let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.alpha);
        let translation = Vector3::new(T::zero(), T::zero(), self.d) + rz * Vector3::new(self.a, T::zero(), T::zero());
        Pose::new(rz * rx, translation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
#[serde(transparent)]
pub struct DhTable<T: Real> {
    pub rows: [DhRow<T>; 6],
}

impl<T: Real> DhTable<T> {
    /// Publicly documented UR5e parameters, in millimetres.
    pub fn ur5e() -> Self {
        let half_pi = T::frac_pi_2();
        let z = T::zero();
        Self {
            rows: [
                DhRow::new(z, lit(162.5), half_pi, z),
                DhRow::new(lit(-425.0), z, z, z),
                DhRow::new(lit(-392.2), z, z, z),
                DhRow::new(z, lit(133.3), half_pi, z),
                DhRow::new(z, lit(99.7), -half_pi, z),
                DhRow::new(z, lit(99.6), z, z),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.rows.iter().all(|r| {
            r.a.is_finite() && r.d.is_finite() && r.alpha.is_finite() && r.theta_offset.is_finite()
        });
        if finite {
            Ok(())
        } else {
            Err(KinematicsError::NonFinite("DH table"))
        }
    }

    /// `Σ|a| + Σ|d|`, an upper bound on the tip distance from the base.
    pub fn reach(&self) -> T {
        self.rows
            .iter()
            .fold(T::zero(), |acc, r| acc + r.a.abs() + r.d.abs())
    }
}

/// Joint angles of the arm, rad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
#[serde(transparent)]
pub struct ArmConfig<T: Real> {
    pub joints: [T; 6],
}

impl<T: Real> ArmConfig<T> {
    pub fn new(joints: [T; 6]) -> Self {
        Self { joints }
    }
}

fn default_limits<T: Real>() -> [[T; 2]; 6] {
    let two_pi = T::two_pi();
    [[-two_pi, two_pi]; 6]
}

/// DH table plus joint limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
#[serde(deny_unknown_fields)]
pub struct ArmModel<T: Real> {
    pub dh: DhTable<T>,
    #[serde(rename = "joint_limits_rad", default = "default_limits")]
    pub limits: [[T; 2]; 6],
}

impl<T: Real> ArmModel<T> {
    pub fn ur5e() -> Self {
        Self {
            dh: DhTable::ur5e(),
            limits: default_limits(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dh.validate()?;
        for [lo, hi] in &self.limits {
            if !(lo <= hi) {
                return Err(KinematicsError::InvalidParameter(
                    "joint limit lower bound exceeds upper bound".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &ArmConfig<T>) -> bool {
        q.joints
            .iter()
            .zip(&self.limits)
            .all(|(v, [lo, hi])| v.is_finite() && v >= lo && v <= hi)
    }

    pub fn clamp(&self, q: &ArmConfig<T>) -> ArmConfig<T> {
        let mut joints = q.joints;
        for (v, [lo, hi]) in joints.iter_mut().zip(&self.limits) {
            *v = v.clamp(*lo, *hi);
        }
        ArmConfig { joints }
    }

    /// Frames `0..=6` of the chain; frame 0 is the base.
    pub fn frames(&self, q: &ArmConfig<T>) -> [Pose<T>; 7] {
        let mut frames = [Pose::identity(); 7];
        for (i, row) in self.dh.rows.iter().enumerate() {
            frames[i + 1] = frames[i].compose(&row.transform(q.joints[i]));
        }
        frames
    }

    /// Geometric Jacobian in the base frame: rows are tip linear velocity
    /// (mm/rad) and angular velocity (rad/rad).
    pub fn jacobian(&self, q: &ArmConfig<T>) -> Matrix6<T> {
        let frames = self.frames(q);
        let tip = frames[6].translation;
        let mut jacobian = Matrix6::zeros();
        for i in 0..6 {
            let axis = frames[i].rotation * Vector3::z();
            let linear = axis.cross(&(tip - frames[i].translation));
            for row in 0..3 {
                jacobian[(row, i)] = linear[row];
                jacobian[(row + 3, i)] = axis[row];
            }
        }
        jacobian
    }
}

/// Tool flange pose in the arm base frame.
pub fn arm_fk<T: Real>(model: &ArmModel<T>, q: &ArmConfig<T>) -> Pose<T> {
    model.frames(q)[6]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmIkSolution<T: Real> {
    pub config: ArmConfig<T>,
    pub converged: bool,
    pub iterations: usize,
    pub position_error: T,
    pub orientation_error: T,
}

impl<T: Real> Chain<T, 6> for ArmModel<T> {
    fn fk(&self, joints: &Vector6<T>) -> Result<Pose<T>> {
        Ok(arm_fk(self, &to_config(joints)))
    }

    fn jacobian(&self, joints: &Vector6<T>) -> Result<Matrix6<T>> {
        Ok(ArmModel::jacobian(self, &to_config(joints)))
    }

    fn clamp(&self, joints: &Vector6<T>) -> Vector6<T> {
        Vector6::from(ArmModel::clamp(self, &to_config(joints)).joints)
    }
}

fn to_config<T: Real>(joints: &Vector6<T>) -> ArmConfig<T> {
    let mut q = [T::zero(); 6];
    q.copy_from_slice(joints.as_slice());
    ArmConfig { joints: q }
}

pub fn arm_ik<T: Real>(
    model: &ArmModel<T>,
    target: &Pose<T>,
    seed: &ArmConfig<T>,
    opts: &IkOptions<T>,
) -> Result<ArmIkSolution<T>> {
    if seed.joints.iter().any(|v| !v.is_finite()) {
        return Err(KinematicsError::NonFinite("arm seed"));
    }
    let solution = dls::solve(model, target, &Vector6::from(seed.joints), opts)?;
    Ok(ArmIkSolution {
        config: to_config(&solution.joints),
        converged: solution.converged,
        iterations: solution.iterations,
        position_error: solution.position_error,
        orientation_error: solution.orientation_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn planar(l1: f64, l2: f64) -> ArmModel<f64> {
        let z = 0.0;
        ArmModel {
            dh: DhTable {
                rows: [
                    DhRow::new(l1, z, z, z),
                    DhRow::new(l2, z, z, z),
                    DhRow::new(z, z, z, z),
                    DhRow::new(z, z, z, z),
                    DhRow::new(z, z, z, z),
                    DhRow::new(z, z, z, z),
                ],
            },
            limits: default_limits(),
        }
    }

    #[test]
    fn planar_straight_chain() {
        let m = planar(300.0, 200.0);
        let tip = arm_fk(&m, &ArmConfig::default());
        assert_relative_eq!(tip.translation, Vector3::new(500.0, 0.0, 0.0), epsilon = 1e-9);
        let tip = arm_fk(&m, &ArmConfig::new([FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0]));
        assert_relative_eq!(tip.translation, Vector3::new(0.0, 500.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn ur5e_zero_pose() {
        // six-matrix product evaluated independently at 30 digits
        // x = a2 + a3, y = -(d4 + d6), z = d1 - d5
        let tip = arm_fk(&ArmModel::ur5e(), &ArmConfig::default());
        assert_relative_eq!(tip.translation, Vector3::new(-817.2, -232.9, 62.8), epsilon = 1e-9);
        // tool z points along -y, tool x along +x
        assert_relative_eq!(tip.rotation * Vector3::z(), Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(tip.rotation * Vector3::x(), Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn geometric_jacobian_matches_differences() {
        let m = ArmModel::ur5e();
        let q = ArmConfig::new([0.3, -1.2, 1.4, -0.8, -1.5, 0.4]);
        let j = m.jacobian(&q);
        let h = 1e-6;
        for k in 0..6 {
            let mut plus = q;
            let mut minus = q;
            plus.joints[k] += h;
            minus.joints[k] -= h;
            let a = arm_fk(&m, &plus);
            let b = arm_fk(&m, &minus);
            let dp = (a.translation - b.translation) / (2.0 * h);
            let dr = (a.rotation * b.rotation.inverse()).scaled_axis() / (2.0 * h);
            for row in 0..3 {
                assert_relative_eq!(j[(row, k)], dp[row], epsilon = 1e-4, max_relative = 1e-6);
                assert_relative_eq!(j[(row + 3, k)], dr[row], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn ik_fixed_point() {
        let m = ArmModel::ur5e();
        let q = ArmConfig::new([0.1, -1.5, 1.5, -1.4, -1.6, 0.2]);
        let target = arm_fk(&m, &q);
        let s = arm_ik(&m, &target, &q, &IkOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.iterations, 0);
        assert_eq!(s.config, q);
    }

    #[test]
    fn ik_unreachable_flagged() {
        let m = ArmModel::ur5e();
        let target = Pose::from_translation(2000.0, 0.0, 0.0);
        let seed = ArmConfig::new([0.0, -1.5, 1.5, -1.5, -1.5, 0.0]);
        let s = arm_ik(&m, &target, &seed, &IkOptions::default()).unwrap();
        assert!(!s.converged);
        assert!(m.within_limits(&s.config));
    }

    #[test]
    fn model_json() {
        let m = ArmModel::<f64>::ur5e();
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"a_mm\":-425.0"));
        let back: ArmModel<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
