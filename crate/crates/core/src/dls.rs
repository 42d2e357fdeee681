//! Damped least squares inverse kinematics.

use nalgebra::{DMatrix, DVector, Matrix6, SMatrix, SVector, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{KinematicsError, Result};
use crate::real::{lit, Real};
use crate::se3::Pose;

/// One damped least squares update, `Jᵀ·(J·Jᵀ + λ²·I)⁻¹·dx`.
///
/// With `lambda = 0` this is the Moore-Penrose pseudo-inverse, computed from
/// an SVD; a rank-deficient `J` is then a [`KinematicsError::Singular`].
pub fn dls_step<T: Real, const N: usize>(
    jacobian: &SMatrix<T, 6, N>,
    dx: &Vector6<T>,
    lambda: T,
) -> Result<SVector<T, N>> {
    if !(lambda >= T::zero()) {
        return Err(KinematicsError::InvalidParameter(
            "damping must be non-negative".into(),
        ));
    }
    if lambda == T::zero() {
        return pseudo_inverse_step(jacobian, dx);
    }
    let gram: Matrix6<T> = jacobian * jacobian.transpose() + Matrix6::identity() * (lambda * lambda);
    let chol = gram.cholesky().ok_or(KinematicsError::Singular)?;
    Ok(jacobian.transpose() * chol.solve(dx))
}

fn pseudo_inverse_step<T: Real, const N: usize>(
    jacobian: &SMatrix<T, 6, N>,
    dx: &Vector6<T>,
) -> Result<SVector<T, N>> {
    let dynamic = DMatrix::from_iterator(6, N, jacobian.iter().copied());
    let svd = dynamic.svd(true, true);
    let largest = svd.singular_values.max();
    let rank = N.min(6);
    let tol = T::singular_tolerance() * largest.max(T::one());
    let deficient = svd
        .singular_values
        .iter()
        .take(rank)
        .any(|s| *s <= tol);
    if deficient {
        return Err(KinematicsError::Singular);
    }
    let rhs = DVector::from_column_slice(dx.as_slice());
    let x = svd.solve(&rhs, tol).map_err(|_| KinematicsError::Singular)?;
    Ok(SVector::from_column_slice(x.as_slice()))
}

/// Which parts of the pose error the solver drives to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSpace {
    /// Position and orientation.
    #[default]
    Full,
    /// Position only; orientation rows are dropped from the system.
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
#[serde(default)]
pub struct IkOptions<T: Real> {
    pub lambda: T,
    /// Largest change of any joint in one iteration, rad.
    pub max_step: T,
    /// Position tolerance, mm.
    pub pos_tol: T,
    /// Orientation tolerance, rad.
    pub rot_tol: T,
    /// Iteration budget, shared by the seed and any restarts.
    pub max_iters: usize,
    pub task: TaskSpace,
    /// Restart from the chain's alternative seeds when progress stalls.
    pub restarts: bool,
    /// Iterations without a 1% improvement that count as a stall.
    pub stall_iters: usize,
}

impl<T: Real> Default for IkOptions<T> {
    fn default() -> Self {
        Self {
            lambda: lit(0.1),
            max_step: lit(0.05),
            pos_tol: lit(0.01),
            rot_tol: lit(0.1f64.to_radians()),
            max_iters: 200,
            task: TaskSpace::Full,
            restarts: true,
            stall_iters: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution<T: Real, const N: usize> {
    pub joints: SVector<T, N>,
    pub converged: bool,
    pub iterations: usize,
    /// Position error of `joints`, mm.
    pub position_error: T,
    /// Orientation error of `joints`, rad.
    pub orientation_error: T,
}

/// A kinematic chain the DLS solver can drive.
pub trait Chain<T: Real, const N: usize> {
    fn fk(&self, joints: &SVector<T, N>) -> Result<Pose<T>>;
    fn jacobian(&self, joints: &SVector<T, N>) -> Result<SMatrix<T, 6, N>>;
    fn clamp(&self, joints: &SVector<T, N>) -> SVector<T, N>;

    /// Alternative starting points for `target`, tried in order when the
    /// solver stalls.
    fn restart_seeds(&self, target: &Pose<T>) -> Vec<SVector<T, N>> {
        let _ = target;
        Vec::new()
    }
}

fn errors<T: Real>(current: &Pose<T>, target: &Pose<T>) -> (T, T) {
    (
        current.position_distance(target),
        current.rotation_distance(target),
    )
}

fn within<T: Real>(opts: &IkOptions<T>, pos: T, rot: T) -> bool {
    pos < opts.pos_tol && (opts.task == TaskSpace::Position || rot < opts.rot_tol)
}

/// Normalised error used to rank iterates.
fn score<T: Real>(opts: &IkOptions<T>, pos: T, rot: T) -> T {
    let p = pos / opts.pos_tol;
    match opts.task {
        TaskSpace::Full => p.max(rot / opts.rot_tol),
        TaskSpace::Position => p,
    }
}

/// Iterates DLS updates from `seed` toward `target`, clamping each update to
/// `max_step` and each iterate to the chain's joint limits.
///
/// When `opts.restarts` is set and the error stops improving, the search
/// continues from the chain's restart seeds within the same iteration
/// budget. Returns the best iterate seen; `converged` is false when the
/// tolerances were never met.
pub fn solve<T: Real, const N: usize, C: Chain<T, N>>(
    chain: &C,
    target: &Pose<T>,
    seed: &SVector<T, N>,
    opts: &IkOptions<T>,
) -> Result<IkSolution<T, N>> {
    let mut seeds = vec![chain.clamp(seed)];
    if opts.restarts {
        seeds.extend(chain.restart_seeds(target).iter().map(|s| chain.clamp(s)));
    }
    let mut best: Option<(T, IkSolution<T, N>)> = None;
    let mut used = 0;
    for start in seeds {
        if used >= opts.max_iters && best.is_some() {
            break;
        }
        let mut joints = start;
        let mut current = chain.fk(&joints)?;
        let (mut pos, mut rot) = errors(&current, target);
        let mut run_best = score(opts, pos, rot);
        let mut last_gain = 0;
        let mut local = 0;
        loop {
            let s = score(opts, pos, rot);
            if best.as_ref().is_none_or(|(b, _)| s < *b) {
                best = Some((
                    s,
                    IkSolution {
                        joints,
                        converged: false,
                        iterations: used,
                        position_error: pos,
                        orientation_error: rot,
                    },
                ));
            }
            if within(opts, pos, rot) {
                return Ok(IkSolution {
                    joints,
                    converged: true,
                    iterations: used,
                    position_error: pos,
                    orientation_error: rot,
                });
            }
            if used >= opts.max_iters {
                break;
            }
            if s < run_best * lit(0.99) {
                run_best = s;
                last_gain = local;
            } else if opts.restarts && local - last_gain >= opts.stall_iters {
                break;
            }
            let mut jacobian = chain.jacobian(&joints)?;
            let mut dx = current.error_twist(target);
            if opts.task == TaskSpace::Position {
                for row in 3..6 {
                    dx[row] = T::zero();
                    jacobian.row_mut(row).fill(T::zero());
                }
            }
            let mut update = dls_step(&jacobian, &dx, opts.lambda)?;
            let largest = update.amax();
            if largest > opts.max_step {
                update *= opts.max_step / largest;
            }
            joints = chain.clamp(&(joints + update));
            current = chain.fk(&joints)?;
            (pos, rot) = errors(&current, target);
            used += 1;
            local += 1;
        }
    }
    Ok(best.expect("at least one seed is evaluated").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, Matrix6x4, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn embedded_identity() -> Matrix6x4<f64> {
        let mut j = Matrix6x4::zeros();
        for i in 0..4 {
            j[(i, i)] = 1.0;
        }
        j
    }

    #[test]
    fn undamped_identity() {
        let dx = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let q = dls_step(&embedded_identity(), &dx, 0.0).unwrap();
        assert_relative_eq!(q, Vector4::new(1.0, 0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn damped_identity() {
        let dx = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let q = dls_step(&embedded_identity(), &dx, 1.0).unwrap();
        assert_relative_eq!(q, Vector4::new(0.5, 0.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn undamped_singular() {
        let mut j = embedded_identity();
        j[(3, 3)] = 0.0;
        let dx = Vector6::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(dls_step(&j, &dx, 0.0), Err(KinematicsError::Singular));
        // damping regularises the same system
        assert!(dls_step(&j, &dx, 0.1).is_ok());
    }

    #[test]
    fn negative_damping_rejected() {
        let dx = Vector6::zeros();
        assert!(dls_step(&embedded_identity(), &dx, -1.0).is_err());
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let j = Matrix6x4::from_fn(|_, _| rng.gen_range(-5.0..5.0));
            let dx = Vector6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let lambda: f64 = rng.gen_range(0.01..2.0);
            let q = dls_step(&j, &dx, lambda).unwrap();
            let normal = (j.transpose() * j + Matrix4::identity() * lambda * lambda)
                .try_inverse()
                .unwrap()
                * j.transpose()
                * dx;
            assert_relative_eq!(q, normal, epsilon = 1e-9);
        }
    }

    #[test]
    fn update_shrinks_with_damping() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let j = Matrix6::from_fn(|_, _| rng.gen_range(-3.0..3.0));
            let dx = Vector6::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let mut previous = f64::INFINITY;
            for lambda in [0.0, 0.01, 0.1, 0.5, 1.0, 3.0, 10.0] {
                let norm = dls_step(&j, &dx, lambda).unwrap().norm();
                assert!(norm <= previous * (1.0 + 1e-12));
                previous = norm;
            }
        }
    }
}
