//! The actuator-failure battery: one case per flight phase and failure kind,
//! each flown with an informed and an unaware allocator.

use crate::alloc::FailureMode;
use crate::sim::{FailureInjection, Scenario};

/// Failures are injected this long after the start of a run.
pub const FAILURE_TIME: f64 = 10.0;
pub const RUN_DURATION: f64 = 30.0;

const HOVER_ALTITUDE: f64 = 30.0;
const CRUISE_SPEED: f64 = 18.0;
const CRUISE_ALTITUDE: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BatteryCase {
    pub name: &'static str,
    pub cruise: bool,
    pub actuator: &'static str,
    pub mode: FailureMode,
}

impl BatteryCase {
    /// Scenario named `<case>` when informed and `<case>_unaware` otherwise.
    pub fn scenario(&self, informed: bool) -> Scenario {
        let name = if informed { self.name.to_string() } else { format!("{}_unaware", self.name) };
        let mut s = if self.cruise {
            Scenario::cruise(&name, CRUISE_SPEED, CRUISE_ALTITUDE, RUN_DURATION)
        } else {
            Scenario::hover(&name, [0.0, 0.0, HOVER_ALTITUDE], RUN_DURATION)
        };
        s.failures.push(FailureInjection {
            time: FAILURE_TIME,
            actuator: self.actuator.to_string(),
            mode: self.mode,
        });
        s.allocator.informed = informed;
        s
    }
}

/// Motor cutoff and 60° tilt lock in hover; motor cutoff, elevator locked at
/// 6° and aileron locked at 15° in cruise.
pub fn battery_cases() -> Vec<BatteryCase> {
    vec![
        BatteryCase { name: "hover_motor_cut", cruise: false, actuator: "motor1", mode: FailureMode::Cutoff },
        BatteryCase {
            name: "hover_tilt_lock",
            cruise: false,
            actuator: "tilt1",
            mode: FailureMode::Locked(60f64.to_radians()),
        },
        BatteryCase { name: "cruise_motor_cut", cruise: true, actuator: "motor1", mode: FailureMode::Cutoff },
        BatteryCase {
            name: "cruise_elevator_lock",
            cruise: true,
            actuator: "elevator",
            mode: FailureMode::Locked(6f64.to_radians()),
        },
        BatteryCase {
            name: "cruise_aileron_lock",
            cruise: true,
            actuator: "aileron_l",
            mode: FailureMode::Locked(15f64.to_radians()),
        },
    ]
}

/// Every battery case, informed then unaware.
pub fn battery_scenarios() -> Vec<Scenario> {
    battery_cases().iter().flat_map(|c| [c.scenario(true), c.scenario(false)]).collect()
}
