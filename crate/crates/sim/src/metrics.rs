//! Tracking error between the scaled stylus path and the robot path.

use macromicro_core::{snake_fk, Module, SnakeConfig};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::trace::{SimFrame, Trace};
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingReport {
    pub module: Module,
    pub rms_position_error_mm: f64,
    pub max_position_error_mm: f64,
    pub discrete_frechet_mm: f64,
    /// x, y, z.
    pub rms_per_axis_mm: [f64; 3],
    pub frames: u64,
    pub expected_samples: u64,
    pub actual_samples: u64,
    pub intervals: u64,
}

impl TrackingReport {
    pub const CSV_HEADER: &'static str = "module,rms_position_error_mm,max_position_error_mm,discrete_frechet_mm,rms_x_mm,rms_y_mm,rms_z_mm,frames,expected_samples,actual_samples,intervals";

    pub fn to_csv(&self) -> String {
        let m = match self.module {
            Module::Macro => "macro",
            Module::Micro => "micro",
        };
        let [x, y, z] = self.rms_per_axis_mm;
        format!(
            "{}\n{m},{},{},{},{x},{y},{z},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.rms_position_error_mm,
            self.max_position_error_mm,
            self.discrete_frechet_mm,
            self.frames,
            self.expected_samples,
            self.actual_samples,
            self.intervals
        )
    }
}

/// One engaged frame: where the module should be and where it is, in the
/// module's command frame (arm base for macro, flange for micro).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub expected: Vector3<f64>,
    pub actual: Vector3<f64>,
    /// First frame of a new engagement.
    pub starts_interval: bool,
}

/// Rebuilds the scaled, frame-mapped stylus path from the recorded clutch
/// references and pairs it with the recomputed end-effector path.
pub fn engaged_path(trace: &Trace, module: Module) -> Result<Vec<PathPoint>, SimError> {
    let cfg = &trace.header.config;
    let params = match module {
        Module::Macro => cfg.macro_teleop,
        Module::Micro => cfg.micro_teleop,
    };
    let mut out = Vec::new();
    let mut prev_refs = None;
    for f in &trace.frames {
        let refs = match module {
            Module::Macro => f.macro_refs,
            Module::Micro => f.micro_refs,
        };
        let Some(r) = refs else {
            prev_refs = None;
            continue;
        };
        let expected =
            r.robot.translation + params.frame_map * (f.stylus.pose.translation - r.stylus.translation) * params.translation_scale;
        out.push(PathPoint {
            t: f.t,
            expected,
            actual: actual_position(trace, f, module)?,
            starts_interval: prev_refs != Some(r),
        });
        prev_refs = Some(r);
    }
    Ok(out)
}

fn actual_position(trace: &Trace, f: &SimFrame, module: Module) -> Result<Vector3<f64>, SimError> {
    let cfg = &trace.header.config;
    Ok(match module {
        Module::Macro => f.flange_pose.translation,
        Module::Micro => {
            let tip = snake_fk(&cfg.snake, &SnakeConfig { theta: f.snake_config })?;
            cfg.flange_offset.compose(&tip).translation
        }
    })
}

pub fn evaluate(trace: &Trace, module: Module) -> Result<TrackingReport, SimError> {
    let path = engaged_path(trace, module)?;
    if path.len() < 2 {
        return Err(SimError::Report(format!(
            "no engaged interval for the {} module ({} engaged frames)",
            match module {
                Module::Macro => "macro",
                Module::Micro => "micro",
            },
            path.len()
        )));
    }
    let n = path.len() as f64;
    let mut sq = Vector3::zeros();
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for p in &path {
        let d = p.actual - p.expected;
        sq += d.component_mul(&d);
        sum += d.norm_squared();
        max = max.max(d.norm());
    }
    let expected: Vec<_> = path.iter().map(|p| p.expected).collect();
    let actual: Vec<_> = path.iter().map(|p| p.actual).collect();
    Ok(TrackingReport {
        module,
        rms_position_error_mm: (sum / n).sqrt(),
        max_position_error_mm: max,
        discrete_frechet_mm: discrete_frechet(&expected, &actual),
        rms_per_axis_mm: [(sq.x / n).sqrt(), (sq.y / n).sqrt(), (sq.z / n).sqrt()],
        frames: trace.frames.len() as u64,
        expected_samples: expected.len() as u64,
        actual_samples: actual.len() as u64,
        intervals: path.iter().filter(|p| p.starts_interval).count() as u64,
    })
}

/// Discrete Fréchet distance (Eiter and Mannila), O(n·m) time, O(m) memory.
pub fn discrete_frechet(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut prev = vec![0.0f64; b.len()];
    let mut row = vec![0.0f64; b.len()];
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            let d = (p - q).norm();
            row[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => row[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(row[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len() - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> Vector3<f64> {
        Vector3::new(x, 0.0, 0.0)
    }

    #[test]
    fn frechet_identity_and_offset() {
        let a: Vec<_> = (0..10).map(|i| v(i as f64)).collect();
        assert_eq!(discrete_frechet(&a, &a), 0.0);
        let b: Vec<_> = a.iter().map(|p| p + Vector3::new(0.0, 2.0, 0.0)).collect();
        assert!((discrete_frechet(&a, &b) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn frechet_is_order_sensitive() {
        // same point set, reversed traversal
        let a = vec![v(0.0), v(1.0), v(2.0)];
        let b = vec![v(2.0), v(1.0), v(0.0)];
        assert_eq!(discrete_frechet(&a, &b), 2.0);
    }

    #[test]
    fn frechet_brute_force_small() {
        // all monotone couplings of 3×3 sequences
        let a = vec![v(0.0), Vector3::new(1.0, 1.0, 0.0), v(2.0)];
        let b = vec![v(0.0), v(1.5), v(2.0)];
        fn walk(a: &[Vector3<f64>], b: &[Vector3<f64>], i: usize, j: usize) -> f64 {
            let d = (a[i] - b[j]).norm();
            if i == a.len() - 1 && j == b.len() - 1 {
                return d;
            }
            let mut best = f64::INFINITY;
            if i + 1 < a.len() {
                best = best.min(walk(a, b, i + 1, j));
            }
            if j + 1 < b.len() {
                best = best.min(walk(a, b, i, j + 1));
            }
            if i + 1 < a.len() && j + 1 < b.len() {
                best = best.min(walk(a, b, i + 1, j + 1));
            }
            d.max(best)
        }
        assert!((discrete_frechet(&a, &b) - walk(&a, &b, 0, 0)).abs() < 1e-15);
    }
}
