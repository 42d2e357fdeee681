//! Joint space → tendon space → actuator space.
//!
//! Each bending axis of each module is driven by an antagonist tendon pair
//! wound on one pulley. Distal tendons are routed through the proximal
//! module, so they also change length when the proximal module bends.

use serde::{Deserialize, Serialize};

use crate::error::{KinematicsError, Result};
use crate::real::{lit, to_f64, Real};
use crate::snake::{Axis, ModuleSide, SnakeConfig, SnakeDescriptor, JOINTS};

/// Change in left tendon length across one interface bent by `phi`:
/// `2r·(cos α − cos(α − φ/2))`. The right tendon is `tendon_delta(alpha, r, -phi)`.
pub fn tendon_delta<T: Real>(alpha: T, r: T, phi: T) -> Result<T> {
    let limit = lit::<T>(2.0) * alpha;
    if !phi.is_finite() {
        return Err(KinematicsError::NonFinite("interface angle"));
    }
    if phi.abs() > limit * (T::one() + lit(1e-12)) {
        return Err(KinematicsError::InterfaceLimit {
            angle: to_f64(phi),
            limit: to_f64(limit),
        });
    }
    Ok(lit::<T>(2.0) * r * (alpha.cos() - (alpha - phi / lit(2.0)).cos()))
}

/// Tendon length changes from the straight configuration, mm.
///
/// Index `k` follows [`JOINTS`]: proximal pan, proximal tilt, distal pan,
/// distal tilt.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct TendonState<T: Real> {
    pub left: [T; 4],
    pub right: [T; 4],
}

impl<T: Real> TendonState<T> {
    pub fn zero() -> Self {
        Self {
            left: [T::zero(); 4],
            right: [T::zero(); 4],
        }
    }

    /// The eight deltas as `left[0..4]` followed by `right[0..4]`.
    pub fn lengths(&self) -> [T; 8] {
        let mut out = [T::zero(); 8];
        out[..4].copy_from_slice(&self.left);
        out[4..].copy_from_slice(&self.right);
        out
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            left: self.left.map(|v| v * factor),
            right: self.right.map(|v| v * factor),
        }
    }
}

/// Pulley angles, one per antagonist pair, rad.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ActuatorCommand<T: Real> {
    pub pulley_angles: [T; 4],
}

/// Modules whose interfaces a tendon of `side` passes through.
fn crossed_modules(side: ModuleSide) -> &'static [ModuleSide] {
    match side {
        ModuleSide::Proximal => &[ModuleSide::Proximal],
        ModuleSide::Distal => &[ModuleSide::Proximal, ModuleSide::Distal],
    }
}

/// Sums the per-interface length change over every interface a tendon
/// crosses. A pan tendon sees the pan interfaces of each crossed module and
/// a tilt tendon the tilt interfaces.
pub fn joints_to_tendons<T: Real>(desc: &SnakeDescriptor<T>, config: &SnakeConfig<T>) -> Result<TendonState<T>> {
    desc.check_limits(config)?;
    let mut state = TendonState::zero();
    for (k, (side, axis)) in JOINTS.iter().enumerate() {
        for crossed in crossed_modules(*side) {
            let module = desc.module(*crossed);
            let phi = module.interface_angle(*axis, config.angle(*crossed, *axis));
            for _ in 0..module.count(*axis) {
                state.left[k] += tendon_delta(module.alpha, module.r, phi)?;
                state.right[k] += tendon_delta(module.alpha, module.r, -phi)?;
            }
        }
    }
    Ok(state)
}

/// Pulley angle for pair `k` is `(Δl_left − Δl_right) / (2·pulley_radius)`.
pub fn tendons_to_actuators<T: Real>(desc: &SnakeDescriptor<T>, tendons: &TendonState<T>) -> Result<ActuatorCommand<T>> {
    let mut pulley_angles = [T::zero(); 4];
    for (k, out) in pulley_angles.iter_mut().enumerate() {
        let (l, r) = (tendons.left[k], tendons.right[k]);
        if !l.is_finite() || !r.is_finite() {
            return Err(KinematicsError::NonFinite("tendon state"));
        }
        let angle = (l - r) / (lit::<T>(2.0) * desc.pulley_radius);
        if angle.abs() > desc.pulley_travel {
            return Err(KinematicsError::PulleySaturation {
                pair: k,
                angle: to_f64(angle),
                limit: to_f64(desc.pulley_travel),
            });
        }
        *out = angle;
    }
    Ok(ActuatorCommand { pulley_angles })
}

/// Module angles realised by a set of pulley angles.
///
/// Across one interface the antagonist difference is
/// `Δl_l − Δl_r = −4·r·sin α·sin(φ/2)`, so each pair inverts in closed form
/// once the proximal contribution to the distal tendons is removed. Angles
/// outside the reachable range saturate at the joint limit.
pub fn actuators_to_joints<T: Real>(desc: &SnakeDescriptor<T>, command: &ActuatorCommand<T>) -> SnakeConfig<T> {
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let mut config = SnakeConfig::zero();
    let diff_of = |side: ModuleSide, axis: Axis, theta: T| {
        let module = desc.module(side);
        let count = lit::<T>(module.count(axis) as f64);
        let phi = module.interface_angle(axis, theta);
        -four * module.r * module.alpha.sin() * (phi / two).sin() * count
    };
    for (k, (side, axis)) in JOINTS.iter().enumerate() {
        let mut diff = command.pulley_angles[k] * two * desc.pulley_radius;
        if *side == ModuleSide::Distal {
            let k_prox = k - 2;
            diff -= diff_of(ModuleSide::Proximal, *axis, config.theta[k_prox]);
        }
        let module = desc.module(*side);
        let count = module.count(*axis);
        if count == 0 {
            continue;
        }
        let gain = four * module.r * module.alpha.sin() * lit::<T>(count as f64);
        let s = (-diff / gain).clamp(-T::one(), T::one());
        let phi = (two * s.asin()).clamp(-module.interface_limit(), module.interface_limit());
        config.theta[k] = phi * lit::<T>(count as f64);
    }
    desc.clamp(&config)
}
