//! Inverse kinematics of the continuum manipulator.

use nalgebra::{Matrix6x4, Vector4};

use crate::dls::{self, Chain, IkOptions};
use crate::error::Result;
use crate::real::{lit, Real};
use crate::se3::Pose;
use crate::snake::{snake_fk, snake_jacobian, SnakeConfig, SnakeDescriptor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnakeIkSolution<T: Real> {
    pub config: SnakeConfig<T>,
    pub converged: bool,
    pub iterations: usize,
    pub position_error: T,
    pub orientation_error: T,
}

impl<T: Real> Chain<T, 4> for SnakeDescriptor<T> {
    fn fk(&self, joints: &Vector4<T>) -> Result<Pose<T>> {
        snake_fk(self, &to_config(joints))
    }

    fn jacobian(&self, joints: &Vector4<T>) -> Result<Matrix6x4<T>> {
        snake_jacobian(self, &to_config(joints))
    }

    fn clamp(&self, joints: &Vector4<T>) -> Vector4<T> {
        Vector4::from(SnakeDescriptor::clamp(self, &to_config(joints)).theta)
    }

    /// The best few points of a coarse grid over the joint envelope, ranked
    /// by pose error to `target`. Large distal bends wrap the orientation
    /// error, so a local search from zero can land in the wrong branch.
    fn restart_seeds(&self, target: &Pose<T>) -> Vec<Vector4<T>> {
        const STEPS: [usize; 4] = [5, 3, 9, 5];
        const KEEP: usize = 4;
        let limits = self.limits();
        let axis_values = |k: usize| -> Vec<T> {
            let n = STEPS[k];
            (0..n)
                .map(|i| {
                    let f = lit::<T>(2.0 * i as f64 / (n - 1) as f64 - 1.0);
                    f * limits[k] * lit(0.9)
                })
                .collect()
        };
        let values: Vec<Vec<T>> = (0..4).map(axis_values).collect();
        let mut ranked: Vec<(T, Vector4<T>)> = Vec::new();
        for &a in &values[0] {
            for &b in &values[1] {
                for &c in &values[2] {
                    for &d in &values[3] {
                        let q = Vector4::new(a, b, c, d);
                        let Ok(pose) = snake_fk(self, &to_config(&q)) else {
                            continue;
                        };
                        // mm against rad, weighted by the snake's length scale
                        let cost = pose.position_distance(target)
                            + pose.rotation_distance(target) * lit(10.0);
                        ranked.push((cost, q));
                    }
                }
            }
        }
        ranked.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
        ranked.into_iter().take(KEEP).map(|(_, q)| q).collect()
    }
}

fn to_config<T: Real>(joints: &Vector4<T>) -> SnakeConfig<T> {
    SnakeConfig {
        theta: [joints[0], joints[1], joints[2], joints[3]],
    }
}

/// Solves for the module angles that place the tip at `target` (relative to
/// the micro-module base). The seed must lie within joint limits.
pub fn solve_ik<T: Real>(
    desc: &SnakeDescriptor<T>,
    target: &Pose<T>,
    seed: &SnakeConfig<T>,
    opts: &IkOptions<T>,
) -> Result<SnakeIkSolution<T>> {
    desc.check_limits(seed)?;
    let solution = dls::solve(desc, target, &Vector4::from(seed.theta), opts)?;
    Ok(SnakeIkSolution {
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
    use crate::dls::TaskSpace;
    use nalgebra::Vector3;

    #[test]
    fn fixed_point_takes_zero_iterations() {
        let d = SnakeDescriptor::<f64>::reference();
        let seed = SnakeConfig::new(0.3, -0.1, 0.9, 0.4);
        let target = snake_fk(&d, &seed).unwrap();
        let s = solve_ik(&d, &target, &seed, &IkOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.iterations, 0);
        assert_eq!(s.config, seed);
    }

    #[test]
    fn recovers_reachable_target() {
        let d = SnakeDescriptor::<f64>::reference();
        let truth = SnakeConfig::new(-0.4, 0.2, 1.2, -0.6);
        let target = snake_fk(&d, &truth).unwrap();
        let s = solve_ik(&d, &target, &SnakeConfig::zero(), &IkOptions::default()).unwrap();
        assert!(s.converged, "{s:?}");
        let reached = snake_fk(&d, &s.config).unwrap();
        assert!(reached.position_distance(&target) < 0.01);
    }

    #[test]
    fn unreachable_target_stays_in_limits() {
        let d = SnakeDescriptor::<f64>::reference();
        let target = Pose::from_translation(80.0, -40.0, 150.0);
        let s = solve_ik(&d, &target, &SnakeConfig::zero(), &IkOptions::default()).unwrap();
        assert!(!s.converged);
        assert!(d.check_limits(&s.config).is_ok());
    }

    #[test]
    fn position_task_ignores_orientation() {
        let d = SnakeDescriptor::<f64>::reference();
        let mut target = snake_fk(&d, &SnakeConfig::zero()).unwrap();
        target.translation += Vector3::new(1.0, 0.5, -0.1);
        target.rotation = nalgebra::UnitQuaternion::from_euler_angles(1.0, 0.0, 0.0);
        let opts = IkOptions {
            task: TaskSpace::Position,
            ..IkOptions::default()
        };
        let s = solve_ik(&d, &target, &SnakeConfig::zero(), &opts).unwrap();
        assert!(s.converged, "{s:?}");
        assert!(s.position_error < 0.01);
    }

    #[test]
    fn seed_outside_limits_is_an_error() {
        let d = SnakeDescriptor::<f64>::reference();
        let target = Pose::identity();
        assert!(solve_ik(&d, &target, &SnakeConfig::new(2.0, 0.0, 0.0, 0.0), &IkOptions::default()).is_err());
    }
}
