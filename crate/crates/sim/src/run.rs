//! Deterministic batch runs.

use crate::config::SimConfig;
use crate::engine::{pulleys_for, Engine};
use crate::link::{servo_bank, InProcessLink};
use crate::scenario::{Scenario, StylusStream};
use crate::trace::{Header, Summary, Trace};
use crate::SimError;

/// Runs `scenario` in simulated time. The same inputs always produce the
/// same trace, bit for bit. `seed` overrides the scenario's own.
pub fn run(scenario: &Scenario, cfg: &SimConfig, seed: Option<u64>) -> Result<Trace, SimError> {
    cfg.validate()?;
    scenario.validate()?;
    let seed = seed.unwrap_or(scenario.seed);
    let rates = cfg.rates;
    let ticks = (scenario.duration() * f64::from(rates.control_hz)).round() as u64;
    let per_tick = rates.samples_per_tick();

    let initial = scenario.initial;
    // start from wire-resolution angles so re-sending the initial pose is a no-op
    let pulleys = pulleys_for(cfg, &initial.snake())?.map(|a| {
        format!("{a:.6}").parse::<f64>().expect("formatted float parses")
    });
    let bank = servo_bank(&cfg.servo, pulleys)?;
    let mut engine = Engine::new(cfg.clone(), &initial, InProcessLink::new(bank))?;
    let mut stylus = StylusStream::new(scenario, rates.stylus_hz, ticks * per_tick, seed);

    let mut frames = Vec::new();
    let mut events = Vec::new();
    let mut batch = Vec::with_capacity(per_tick as usize);
    for k in 0..=ticks {
        batch.clear();
        let take = if k == 0 { 1 } else { per_tick };
        batch.extend(stylus.by_ref().take(take as usize));
        let out = engine.step(&batch)?;
        events.extend(out.events);
        if rates.records(k) {
            frames.push(out.frame);
        }
    }
    let summary = Summary {
        ticks: ticks + 1,
        stylus_samples: engine.samples_consumed(),
        frames: frames.len() as u64,
        events: events.len() as u64,
    };
    Ok(Trace {
        header: Header::new(cfg, &scenario.name, seed),
        frames,
        events,
        summary: Some(summary),
    })
}
