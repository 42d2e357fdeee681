//! Rate-limited hobby-servo model driving one pulley.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ServoError {
    #[error("travel limits must satisfy min < max, got [{min}, {max}]")]
    BadLimits { min: f64, max: f64 },
    #[error("max_speed must be positive and finite, got {0}")]
    BadSpeed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoState {
    pub position: f64,
    pub target: f64,
    /// rad/s
    pub max_speed: f64,
    pub min: f64,
    pub max: f64,
}

impl ServoState {
    pub fn new(max_speed: f64, min: f64, max: f64) -> Result<Self, ServoError> {
        if !(max_speed > 0.0 && max_speed.is_finite()) {
            return Err(ServoError::BadSpeed(max_speed));
        }
        if !(min < max && min.is_finite() && max.is_finite()) {
            return Err(ServoError::BadLimits { min, max });
        }
        let rest = 0.0f64.clamp(min, max);
        Ok(Self {
            position: rest,
            target: rest,
            max_speed,
            min,
            max,
        })
    }

    /// Sets the goal; goals beyond travel park at the limit.
    pub fn set_target(&mut self, target: f64) {
        if target.is_finite() {
            self.target = target.clamp(self.min, self.max);
        }
    }

    /// Moves toward the target by at most `max_speed·dt`.
    pub fn step(&self, dt: f64) -> ServoState {
        if !(dt > 0.0) {
            return *self;
        }
        let limit = self.max_speed * dt;
        let goal = self.target.clamp(self.min, self.max);
        let gap = goal - self.position;
        let mut next = if gap.abs() <= limit {
            goal
        } else {
            self.position + limit.copysign(gap)
        };
        next = next.clamp(self.min, self.max);
        // the addition may round one ulp past the bound
        while (next - self.position).abs() > limit {
            next = if next > self.position { next.next_down() } else { next.next_up() };
        }
        ServoState {
            position: next,
            ..*self
        }
    }

    pub fn at_target(&self) -> bool {
        self.position == self.target
    }
}

/// The four pulley servos of the micro module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServoBank {
    pub servos: [ServoState; 4],
}

impl ServoBank {
    pub fn new(max_speed: f64, min: f64, max: f64) -> Result<Self, ServoError> {
        let servo = ServoState::new(max_speed, min, max)?;
        Ok(Self { servos: [servo; 4] })
    }

    /// 6.1 rad/s, ±π/2 travel.
    pub fn hobby() -> Self {
        Self::new(6.1, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)
            .expect("default servo parameters are valid")
    }

    pub fn set_targets(&mut self, targets: &[f64; 4]) {
        for (servo, t) in self.servos.iter_mut().zip(targets) {
            servo.set_target(*t);
        }
    }

    pub fn step(&mut self, dt: f64) {
        for servo in &mut self.servos {
            *servo = servo.step(dt);
        }
    }

    /// Stops every servo where it is.
    pub fn freeze(&mut self) {
        for servo in &mut self.servos {
            servo.target = servo.position;
        }
    }

    pub fn positions(&self) -> [f64; 4] {
        self.servos.map(|s| s.position)
    }

    pub fn targets(&self) -> [f64; 4] {
        self.servos.map(|s| s.target)
    }
}
