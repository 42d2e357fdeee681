//! Rolling-joint continuum manipulator geometry and forward kinematics.
//!
//! The snake is two sub-modules (proximal, distal) of `n` rolling interfaces
//! each, mounted at the end of a straight shaft. Each module bends about two
//! axes (pan, tilt); a module angle is split evenly across the module's
//! interfaces of that axis. The distal module is rolled about z relative to
//! the proximal one.

use std::fmt;

use nalgebra::{Matrix6x4, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{InterfaceId, KinematicsError, Result};
use crate::real::{lit, to_f64, Real};
use crate::se3::{rotation_vector, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Bending about the local y axis; the tip swings toward +x.
    Pan,
    /// Bending about the local x axis; the tip swings toward -y.
    Tilt,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Pan => f.write_str("pan"),
            Axis::Tilt => f.write_str("tilt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModuleSide {
    Proximal,
    Distal,
}

impl fmt::Display for ModuleSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleSide::Proximal => f.write_str("proximal"),
            ModuleSide::Distal => f.write_str("distal"),
        }
    }
}

/// Geometry of one sub-module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModuleParamsRepr<T>", into = "ModuleParamsRepr<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ModuleParams<T: Real> {
    /// Number of rolling interfaces.
    pub n: usize,
    /// Joint width (diameter), mm.
    pub w: T,
    /// Half-angle of curvature of each rolling surface, rad.
    pub alpha: T,
    /// Separation between rolling surfaces, mm.
    pub d: T,
    /// Rolling-surface radius, mm.
    pub r: T,
    pub axis_pattern: Vec<Axis>,
}

impl<T: Real> ModuleParams<T> {
    /// Module with an alternating pan/tilt pattern starting at pan and the
    /// rolling radius whose chord equals the joint width.
    pub fn new(n: usize, w: T, alpha: T, d: T) -> Result<Self> {
        let params = Self {
            n,
            w,
            alpha,
            d,
            r: Self::chord_radius(w, alpha),
            axis_pattern: alternating_pattern(n),
        };
        params.validate()?;
        Ok(params)
    }

    /// `w / (2·sin α)`.
    pub fn chord_radius(w: T, alpha: T) -> T {
        w / (lit::<T>(2.0) * alpha.sin())
    }

    pub fn with_radius(mut self, r: T) -> Result<Self> {
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_axis_pattern(mut self, pattern: Vec<Axis>) -> Result<Self> {
        self.axis_pattern = pattern;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(KinematicsError::InvalidParameter(msg));
        if self.n < 1 {
            return invalid("module needs at least one interface".into());
        }
        if !(self.w > T::zero()) {
            return invalid(format!("w must be positive, got {}", to_f64(self.w)));
        }
        if !(self.alpha > T::zero() && self.alpha < T::frac_pi_2()) {
            return invalid(format!(
                "alpha must lie in (0, pi/2), got {}",
                to_f64(self.alpha)
            ));
        }
        if !(self.d >= T::zero()) {
            return invalid(format!("d must be non-negative, got {}", to_f64(self.d)));
        }
        if !(self.r > T::zero()) || !self.r.is_finite() {
            return invalid(format!("r must be positive, got {}", to_f64(self.r)));
        }
        if self.axis_pattern.len() != self.n {
            return invalid(format!(
                "axis pattern has {} entries for n = {}",
                self.axis_pattern.len(),
                self.n
            ));
        }
        if self.count(Axis::Pan) == 0 {
            return invalid("axis pattern needs at least one pan interface".into());
        }
        if self.n >= 2 && self.count(Axis::Tilt) == 0 {
            return invalid("axis pattern needs at least one tilt interface".into());
        }
        Ok(())
    }

    /// Number of interfaces bending about `axis`.
    pub fn count(&self, axis: Axis) -> usize {
        self.axis_pattern.iter().filter(|a| **a == axis).count()
    }

    /// Largest admissible per-interface angle, `2α`.
    pub fn interface_limit(&self) -> T {
        lit::<T>(2.0) * self.alpha
    }

    /// Largest admissible module angle about `axis`.
    pub fn module_limit(&self, axis: Axis) -> T {
        self.interface_limit() * lit::<T>(self.count(axis) as f64)
    }

    /// Per-interface angle for a module angle about `axis` (even split).
    pub fn interface_angle(&self, axis: Axis, module_angle: T) -> T {
        match self.count(axis) {
            0 => T::zero(),
            c => module_angle / lit::<T>(c as f64),
        }
    }
}

fn alternating_pattern(n: usize) -> Vec<Axis> {
    (0..n)
        .map(|i| if i % 2 == 0 { Axis::Pan } else { Axis::Tilt })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModuleParamsRepr<T> {
    n: usize,
    w_mm: T,
    alpha_rad: T,
    d_mm: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r_mm: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis_pattern: Option<Vec<Axis>>,
}

impl<T: Real> TryFrom<ModuleParamsRepr<T>> for ModuleParams<T> {
    type Error = KinematicsError;

    fn try_from(repr: ModuleParamsRepr<T>) -> Result<Self> {
        let mut params = ModuleParams {
            n: repr.n,
            w: repr.w_mm,
            alpha: repr.alpha_rad,
            d: repr.d_mm,
            r: ModuleParams::chord_radius(repr.w_mm, repr.alpha_rad),
            axis_pattern: repr
                .axis_pattern
                .unwrap_or_else(|| alternating_pattern(repr.n)),
        };
        if let Some(r) = repr.r_mm {
            params.r = r;
        }
        params.validate()?;
        Ok(params)
    }
}

impl<T: Real> From<ModuleParams<T>> for ModuleParamsRepr<T> {
    fn from(p: ModuleParams<T>) -> Self {
        Self {
            n: p.n,
            w_mm: p.w,
            alpha_rad: p.alpha,
            d_mm: p.d,
            r_mm: Some(p.r),
            axis_pattern: Some(p.axis_pattern),
        }
    }
}

fn default_roll<T: Real>() -> T {
    T::frac_pi_4()
}
fn default_shaft<T: Real>() -> T {
    lit(250.0)
}
fn default_segment<T: Real>() -> T {
    lit(2.0)
}
fn default_pulley_radius<T: Real>() -> T {
    lit(5.0)
}
fn default_pulley_travel<T: Real>() -> T {
    T::frac_pi_2()
}

/// Full geometry of the continuum manipulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
#[serde(deny_unknown_fields)]
pub struct SnakeDescriptor<T: Real> {
    pub proximal: ModuleParams<T>,
    pub distal: ModuleParams<T>,
    /// Fixed roll about z between the two modules, rad.
    #[serde(rename = "inter_module_roll_rad", default = "default_roll")]
    pub inter_module_roll: T,
    #[serde(rename = "shaft_length_mm", default = "default_shaft")]
    pub shaft_length: T,
    /// Height of each solid segment (base adaptor, nodes, end-effector base), mm.
    #[serde(rename = "segment_height_mm", default = "default_segment")]
    pub segment_height: T,
    #[serde(rename = "pulley_radius_mm", default = "default_pulley_radius")]
    pub pulley_radius: T,
    /// Pulley travel limit, rad (symmetric).
    #[serde(rename = "pulley_travel_rad", default = "default_pulley_travel")]
    pub pulley_travel: T,
}

impl<T: Real> SnakeDescriptor<T> {
    /// Proximal (n=3, w=4, α=0.2, d=1) and distal (n=3, w=4, α=0.88, d=1)
    /// modules on a 250 mm shaft, rolled 45° relative to each other.
    pub fn reference() -> Self {
        Self {
            proximal: ModuleParams::new(3, lit(4.0), lit(0.2), lit(1.0))
                .expect("reference proximal module is valid"),
            distal: ModuleParams::new(3, lit(4.0), lit(0.88), lit(1.0))
                .expect("reference distal module is valid"),
            inter_module_roll: default_roll(),
            shaft_length: default_shaft(),
            segment_height: default_segment(),
            pulley_radius: default_pulley_radius(),
            pulley_travel: default_pulley_travel(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.proximal.validate()?;
        self.distal.validate()?;
        if !(self.pulley_radius > T::zero()) {
            return Err(KinematicsError::InvalidParameter(
                "pulley_radius must be positive".into(),
            ));
        }
        if !(self.pulley_travel > T::zero()) {
            return Err(KinematicsError::InvalidParameter(
                "pulley_travel must be positive".into(),
            ));
        }
        if !(self.segment_height >= T::zero()) || !(self.shaft_length >= T::zero()) {
            return Err(KinematicsError::InvalidParameter(
                "segment_height and shaft_length must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn module(&self, side: ModuleSide) -> &ModuleParams<T> {
        match side {
            ModuleSide::Proximal => &self.proximal,
            ModuleSide::Distal => &self.distal,
        }
    }

    /// Number of solid segments: one before every interface plus the end-effector base.
    pub fn solid_segments(&self) -> usize {
        self.proximal.n + self.distal.n + 1
    }

    /// Length of the straight snake, excluding the shaft.
    pub fn straight_length(&self) -> T {
        let gaps = lit::<T>(self.proximal.n as f64) * self.proximal.d
            + lit::<T>(self.distal.n as f64) * self.distal.d;
        gaps + lit::<T>(self.solid_segments() as f64) * self.segment_height
    }

    /// Module-angle limits in [`SnakeConfig`] order.
    pub fn limits(&self) -> [T; 4] {
        JOINTS.map(|(side, axis)| self.module(side).module_limit(axis))
    }

    /// Checks every interface against `|φ| ≤ 2α`.
    pub fn check_limits(&self, config: &SnakeConfig<T>) -> Result<()> {
        for (k, (side, axis)) in JOINTS.iter().enumerate() {
            let module = self.module(*side);
            let theta = config.theta[k];
            if !theta.is_finite() {
                return Err(KinematicsError::NonFinite("snake config"));
            }
            let phi = module.interface_angle(*axis, theta);
            let limit = module.interface_limit();
            let over = if module.count(*axis) == 0 {
                theta != T::zero()
            } else {
                phi.abs() > limit * (T::one() + lit(1e-12))
            };
            if over {
                let index = module
                    .axis_pattern
                    .iter()
                    .position(|a| a == axis)
                    .unwrap_or(0);
                return Err(KinematicsError::JointLimit {
                    interface: InterfaceId {
                        module: *side,
                        index,
                        axis: *axis,
                    },
                    angle: to_f64(phi),
                    limit: to_f64(limit),
                });
            }
        }
        Ok(())
    }

    /// Clamps every module angle into its limit envelope.
    pub fn clamp(&self, config: &SnakeConfig<T>) -> SnakeConfig<T> {
        let limits = self.limits();
        let mut theta = config.theta;
        for (value, limit) in theta.iter_mut().zip(limits) {
            *value = value.clamp(-limit, limit);
        }
        SnakeConfig { theta }
    }
}

/// Joint order of [`SnakeConfig::theta`].
pub const JOINTS: [(ModuleSide, Axis); 4] = [
    (ModuleSide::Proximal, Axis::Pan),
    (ModuleSide::Proximal, Axis::Tilt),
    (ModuleSide::Distal, Axis::Pan),
    (ModuleSide::Distal, Axis::Tilt),
];

/// Module angles `(proximal_pan, proximal_tilt, distal_pan, distal_tilt)`, rad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SnakeConfig<T: Real> {
    pub theta: [T; 4],
}

impl<T: Real> SnakeConfig<T> {
    pub fn new(proximal_pan: T, proximal_tilt: T, distal_pan: T, distal_tilt: T) -> Self {
        Self {
            theta: [proximal_pan, proximal_tilt, distal_pan, distal_tilt],
        }
    }

    pub fn zero() -> Self {
        Self {
            theta: [T::zero(); 4],
        }
    }

    pub fn angle(&self, side: ModuleSide, axis: Axis) -> T {
        let k = JOINTS
            .iter()
            .position(|j| *j == (side, axis))
            .expect("every (side, axis) pair is a joint");
        self.theta[k]
    }
}

fn interface_rotation<T: Real>(axis: Axis, phi: T) -> UnitQuaternion<T> {
    match axis {
        Axis::Pan => UnitQuaternion::from_axis_angle(&Vector3::y_axis(), phi),
        Axis::Tilt => UnitQuaternion::from_axis_angle(&Vector3::x_axis(), phi),
    }
}

/// Rolling-contact transform across one interface bent by `phi`.
///
/// The upper surface rolls on the lower one without slipping, so the centre
/// line between the two arcs always bisects the bend.
pub fn interface_transform<T: Real>(params: &ModuleParams<T>, axis: Axis, phi: T) -> Result<Pose<T>> {
    let limit = params.interface_limit();
    if !phi.is_finite() {
        return Err(KinematicsError::NonFinite("interface angle"));
    }
    if phi.abs() > limit * (T::one() + lit(1e-12)) {
        return Err(KinematicsError::InterfaceLimit {
            angle: to_f64(phi),
            limit: to_f64(limit),
        });
    }
    Ok(interface_transform_unchecked(params, axis, phi))
}

fn interface_transform_unchecked<T: Real>(params: &ModuleParams<T>, axis: Axis, phi: T) -> Pose<T> {
    let r = params.r;
    let two = lit::<T>(2.0);
    let half = phi / two;
    let span = two * r + params.d;
    let along = span * half.sin() - r * phi.sin();
    let z = -r + span * half.cos() - r * phi.cos();
    let translation = match axis {
        Axis::Pan => Vector3::new(along, T::zero(), z),
        Axis::Tilt => Vector3::new(T::zero(), -along, z),
    };
    Pose::new(interface_rotation(axis, phi), translation)
}

/// Frames of the snake from the micro-module base outward: the shaft end,
/// then the frame after every interface, then the tip.
pub fn snake_frames<T: Real>(desc: &SnakeDescriptor<T>, config: &SnakeConfig<T>) -> Result<Vec<Pose<T>>> {
    desc.check_limits(config)?;
    let segment = Pose::from_translation(T::zero(), T::zero(), desc.segment_height);
    let mut frames = Vec::with_capacity(desc.proximal.n + desc.distal.n + 2);
    let mut current = Pose::from_translation(T::zero(), T::zero(), desc.shaft_length);
    frames.push(current);
    for side in [ModuleSide::Proximal, ModuleSide::Distal] {
        if side == ModuleSide::Distal {
            current = current.compose(&Pose::rot_z(desc.inter_module_roll));
        }
        let module = desc.module(side);
        for axis in &module.axis_pattern {
            let phi = module.interface_angle(*axis, config.angle(side, *axis));
            current = current
                .compose(&segment)
                .compose(&interface_transform_unchecked(module, *axis, phi));
            frames.push(current);
        }
    }
    frames.push(current.compose(&segment));
    Ok(frames)
}

/// Tip pose relative to the micro-module base.
pub fn snake_fk<T: Real>(desc: &SnakeDescriptor<T>, config: &SnakeConfig<T>) -> Result<Pose<T>> {
    let frames = snake_frames(desc, config)?;
    Ok(*frames.last().expect("frames always include the tip"))
}

/// Central-difference Jacobian of [`snake_fk`]: translation rows in mm/rad,
/// rotation rows in rad/rad, both in the micro-module base frame. Columns
/// next to a joint limit fall back to one-sided differences.
pub fn snake_jacobian<T: Real>(desc: &SnakeDescriptor<T>, config: &SnakeConfig<T>) -> Result<Matrix6x4<T>> {
    snake_jacobian_with_step(desc, config, T::fd_step())
}

pub fn snake_jacobian_with_step<T: Real>(
    desc: &SnakeDescriptor<T>,
    config: &SnakeConfig<T>,
    step: T,
) -> Result<Matrix6x4<T>> {
    desc.check_limits(config)?;
    let limits = desc.limits();
    let mut jacobian = Matrix6x4::zeros();
    for k in 0..4 {
        if limits[k] == T::zero() {
            continue;
        }
        let mut plus = *config;
        let mut minus = *config;
        let hi = (config.theta[k] + step).min(limits[k]);
        let lo = (config.theta[k] - step).max(-limits[k]);
        plus.theta[k] = hi;
        minus.theta[k] = lo;
        let span = hi - lo;
        let a = snake_fk(desc, &plus)?;
        let b = snake_fk(desc, &minus)?;
        let dp = (a.translation - b.translation) / span;
        let dr = rotation_vector(&(a.rotation * b.rotation.inverse())) / span;
        for row in 0..3 {
            jacobian[(row, k)] = dp[row];
            jacobian[(row + 3, k)] = dr[row];
        }
    }
    Ok(jacobian)
}
