//! Clutched, scaled pose mirroring from one stylus to two robot modules.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::real::{lit, Real};
use crate::se3::{scale_rotation, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct StylusSample<T: Real> {
    /// Stylus tip in the stylus base frame.
    pub pose: Pose<T>,
    pub white_button: bool,
    pub grey_button: bool,
    /// Monotonic time, s.
    pub timestamp: T,
}

/// How a button drives its clutch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClutchMode {
    /// Each press toggles engagement.
    #[default]
    Toggle,
    /// Engaged while the button is held.
    Hold,
}

/// Reference poses captured at engagement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ClutchRefs<T: Real> {
    pub stylus: Pose<T>,
    pub robot: Pose<T>,
}

/// Clutch of one teleoperated module. References exist iff engaged.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct ClutchState<T: Real> {
    pub refs: Option<ClutchRefs<T>>,
    /// Button level seen on the previous sample.
    pub button_down: bool,
}

impl<T: Real> ClutchState<T> {
    pub fn engaged(&self) -> bool {
        self.refs.is_some()
    }

    pub fn disengaged() -> Self {
        Self {
            refs: None,
            button_down: false,
        }
    }

    /// Drops engagement without touching the button history.
    pub fn release(&mut self) {
        self.refs = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
#[serde(default, deny_unknown_fields)]
pub struct TeleopParams<T: Real> {
    pub translation_scale: T,
    pub rotation_scale: T,
    /// Rotation from the stylus base frame to the robot base frame, `[w, x, y, z]`.
    #[serde(with = "crate::se3::wxyz")]
    pub frame_map: UnitQuaternion<T>,
}

impl<T: Real> Default for TeleopParams<T> {
    fn default() -> Self {
        Self {
            translation_scale: T::one(),
            rotation_scale: T::one(),
            frame_map: UnitQuaternion::identity(),
        }
    }
}

impl<T: Real> TeleopParams<T> {
    pub fn macro_default() -> Self {
        Self::default()
    }

    pub fn micro_default() -> Self {
        Self {
            translation_scale: lit(0.2),
            ..Self::default()
        }
    }

    pub fn is_valid(&self) -> bool {
        self.translation_scale > T::zero()
            && self.rotation_scale > T::zero()
            && self.translation_scale.is_finite()
            && self.rotation_scale.is_finite()
    }
}

/// Advances a clutch by one button sample.
///
/// In toggle mode a rising edge engages a disengaged clutch (capturing both
/// reference poses) and disengages an engaged one. In hold mode the rising
/// edge engages and the falling edge disengages.
pub fn on_button_edge<T: Real>(
    state: &ClutchState<T>,
    pressed: bool,
    stylus_pose: &Pose<T>,
    robot_pose: &Pose<T>,
    mode: ClutchMode,
) -> ClutchState<T> {
    let rising = pressed && !state.button_down;
    let falling = !pressed && state.button_down;
    let engage = ClutchRefs {
        stylus: *stylus_pose,
        robot: *robot_pose,
    };
    let refs = match (mode, state.refs) {
        (ClutchMode::Toggle, None) if rising => Some(engage),
        (ClutchMode::Toggle, Some(_)) if rising => None,
        (ClutchMode::Hold, None) if rising => Some(engage),
        (ClutchMode::Hold, Some(_)) if falling => None,
        (_, refs) => refs,
    };
    ClutchState {
        refs,
        button_down: pressed,
    }
}

/// Robot target mirroring the stylus motion since engagement, or `None`
/// while disengaged.
pub fn track<T: Real>(state: &ClutchState<T>, params: &TeleopParams<T>, stylus_pose: &Pose<T>) -> Option<Pose<T>> {
    let refs = state.refs.as_ref()?;
    let map = params.frame_map;
    let dp = map * (stylus_pose.translation - refs.stylus.translation);
    let translation = refs.robot.translation + dp * params.translation_scale;
    let delta = map * stylus_pose.rotation * refs.stylus.rotation.inverse() * map.inverse();
    let mut rotation = scale_rotation(&delta, params.rotation_scale) * refs.robot.rotation;
    rotation.renormalize();
    Some(Pose::new(rotation, translation))
}

/// Which module a command is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Module {
    Macro,
    Micro,
}

/// Clutch pair for the macro (white button) and micro (grey button) modules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct TeleopRouter<T: Real> {
    pub macro_clutch: ClutchState<T>,
    pub micro_clutch: ClutchState<T>,
    pub mode: ClutchMode,
}

/// Targets emitted by one routed sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Targets<T: Real> {
    pub macro_target: Option<Pose<T>>,
    pub micro_target: Option<Pose<T>>,
}

impl<T: Real> TeleopRouter<T> {
    pub fn new(mode: ClutchMode) -> Self {
        Self {
            macro_clutch: ClutchState::disengaged(),
            micro_clutch: ClutchState::disengaged(),
            mode,
        }
    }

    /// Feeds only the button levels of `sample` to both clutches.
    pub fn update_clutches(&mut self, sample: &StylusSample<T>, macro_pose: &Pose<T>, micro_pose: &Pose<T>) {
        self.macro_clutch = on_button_edge(
            &self.macro_clutch,
            sample.white_button,
            &sample.pose,
            macro_pose,
            self.mode,
        );
        self.micro_clutch = on_button_edge(
            &self.micro_clutch,
            sample.grey_button,
            &sample.pose,
            micro_pose,
            self.mode,
        );
    }

    /// White button edges drive the macro clutch and grey edges the micro
    /// clutch; each engaged module then tracks the stylus with its own
    /// parameters. `macro_pose` and `micro_pose` are the current robot poses,
    /// captured as references on engagement.
    pub fn route(
        &mut self,
        sample: &StylusSample<T>,
        macro_pose: &Pose<T>,
        micro_pose: &Pose<T>,
        macro_params: &TeleopParams<T>,
        micro_params: &TeleopParams<T>,
    ) -> Targets<T> {
        self.update_clutches(sample, macro_pose, micro_pose);
        Targets {
            macro_target: track(&self.macro_clutch, macro_params, &sample.pose),
            micro_target: track(&self.micro_clutch, micro_params, &sample.pose),
        }
    }

    pub fn clutch(&self, module: Module) -> &ClutchState<T> {
        match module {
            Module::Macro => &self.macro_clutch,
            Module::Micro => &self.micro_clutch,
        }
    }

    /// Disengages both modules (dead-man release).
    pub fn release_all(&mut self) {
        self.macro_clutch.release();
        self.micro_clutch.release();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn params_json_uses_wxyz() {
        let p = TeleopParams::<f64> {
            frame_map: UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_2),
            ..TeleopParams::micro_default()
        };
        let v = serde_json::to_value(p).unwrap();
        let q = v["frame_map"].as_array().unwrap();
        assert!((q[0].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((q[3].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let back: TeleopParams<f64> = serde_json::from_value(v).unwrap();
        assert!(back.frame_map.angle_to(&p.frame_map) < 1e-12);
        assert!(serde_json::from_str::<TeleopParams<f64>>(r#"{"frame_map": [0, 0, 0, 0]}"#).is_err());
    }

    fn robot() -> Pose<f64> {
        Pose::from_translation(100.0, -50.0, 300.0).compose(&Pose::rot_z(0.3))
    }

    fn engaged_at(stylus: Pose<f64>) -> ClutchState<f64> {
        on_button_edge(&ClutchState::disengaged(), true, &stylus, &robot(), ClutchMode::Toggle)
    }

    #[test]
    fn press_engages_and_captures() {
        let s = Pose::from_translation(1.0, 2.0, 3.0);
        let c = engaged_at(s);
        assert!(c.engaged());
        assert_eq!(c.refs.unwrap().stylus, s);
        assert_eq!(c.refs.unwrap().robot, robot());
    }

    #[test]
    fn hold_without_edge_is_unchanged() {
        let c = engaged_at(Pose::identity());
        let held = on_button_edge(&c, true, &Pose::from_translation(9.0, 9.0, 9.0), &Pose::identity(), ClutchMode::Toggle);
        assert_eq!(held, c);
    }

    #[test]
    fn second_press_disengages() {
        let c = engaged_at(Pose::identity());
        let released = on_button_edge(&c, false, &Pose::identity(), &Pose::identity(), ClutchMode::Toggle);
        assert!(released.engaged());
        let off = on_button_edge(&released, true, &Pose::identity(), &Pose::identity(), ClutchMode::Toggle);
        assert!(!off.engaged());
        assert!(off.refs.is_none());
    }

    #[test]
    fn hold_mode_follows_level() {
        let c = on_button_edge(&ClutchState::disengaged(), true, &Pose::identity(), &robot(), ClutchMode::Hold);
        assert!(c.engaged());
        let c = on_button_edge(&c, false, &Pose::identity(), &robot(), ClutchMode::Hold);
        assert!(!c.engaged());
    }

    #[test]
    fn at_reference_target_is_robot_ref() {
        let s = Pose::from_translation(5.0, 5.0, 5.0).compose(&Pose::rot_z(1.0));
        let c = engaged_at(s);
        let t = track(&c, &TeleopParams::default(), &s).unwrap();
        assert_relative_eq!(t.translation, robot().translation, epsilon = 1e-12);
        assert_relative_eq!(t.rotation.angle_to(&robot().rotation), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn translation_scaled() {
        let c = engaged_at(Pose::identity());
        let params = TeleopParams {
            translation_scale: 0.5,
            ..TeleopParams::default()
        };
        let t = track(&c, &params, &Pose::from_translation(10.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(t.translation, robot().translation + Vector3::new(5.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn rotation_composed_onto_ref() {
        let c = engaged_at(Pose::identity());
        let angle = 30f64.to_radians();
        let t = track(&c, &TeleopParams::default(), &Pose::rot_z(angle)).unwrap();
        let expected = Pose::rot_z(angle).rotation * robot().rotation;
        assert_relative_eq!(t.rotation.angle_to(&expected), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn frame_map_rotates_deltas() {
        let c = engaged_at(Pose::identity());
        let params = TeleopParams {
            frame_map: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
            ..TeleopParams::default()
        };
        let t = track(&c, &params, &Pose::from_translation(10.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(t.translation, robot().translation + Vector3::new(0.0, 10.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn disengaged_emits_nothing() {
        assert!(track(&ClutchState::<f64>::disengaged(), &TeleopParams::default(), &Pose::identity()).is_none());
    }

    #[test]
    fn routing_combinations() {
        let mut router = TeleopRouter::<f64>::new(ClutchMode::Toggle);
        let m = TeleopParams::macro_default();
        let u = TeleopParams::micro_default();
        let mut sample = StylusSample {
            pose: Pose::identity(),
            white_button: false,
            grey_button: false,
            timestamp: 0.0,
        };
        let t = router.route(&sample, &robot(), &Pose::identity(), &m, &u);
        assert_eq!((t.macro_target.is_some(), t.micro_target.is_some()), (false, false));
        sample.white_button = true;
        let t = router.route(&sample, &robot(), &Pose::identity(), &m, &u);
        assert_eq!((t.macro_target.is_some(), t.micro_target.is_some()), (true, false));
        sample.grey_button = true;
        let t = router.route(&sample, &robot(), &Pose::identity(), &m, &u);
        assert_eq!((t.macro_target.is_some(), t.micro_target.is_some()), (true, true));
        router.release_all();
        let t = router.route(&sample, &robot(), &Pose::identity(), &m, &u);
        assert_eq!((t.macro_target.is_some(), t.micro_target.is_some()), (false, false));
    }
}
