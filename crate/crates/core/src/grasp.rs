//! Finite-state grasp controller over a simulated hydraulic finger
//! plant. Each state installs per-channel error weights; control is
//! proportional descent on the weighted squared error, with a dead-band
//! emulating hydraulic hysteresis and a unilateral-spring virtual
//! object providing contact forces.

use crate::error::{Error, Result};
use crate::hand::FINGER_COUNT;

/// One sensor snapshot: per-finger readings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    /// Tip normal force, N.
    pub force: [f64; FINGER_COUNT],
    /// Actuator pressure, arbitrary units (here: actuation magnitude).
    pub pressure: [f64; FINGER_COUNT],
    /// Normalized piston position in [0,1].
    pub position: [f64; FINGER_COUNT],
}

impl SensorFrame {
    pub fn validate(&self) -> Result<()> {
        for i in 0..FINGER_COUNT {
            if !self.force[i].is_finite()
                || !self.pressure[i].is_finite()
                || !self.position[i].is_finite()
            {
                return Err(Error::invalid(format!("finger {}: non-finite reading", i)));
            }
            if !(0.0..=1.0).contains(&self.position[i]) {
                return Err(Error::invalid(format!(
                    "finger {}: piston position {} outside [0,1]",
                    i, self.position[i]
                )));
            }
        }
        Ok(())
    }
}

/// Weight and setpoint of one error channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub weight: f64,
    pub setpoint: f64,
}

impl ChannelSpec {
    pub fn off() -> ChannelSpec {
        ChannelSpec {
            weight: 0.0,
            setpoint: 0.0,
        }
    }
}

/// Per-channel weighting installed by each behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorWeights {
    pub force: ChannelSpec,
    pub pressure: ChannelSpec,
    pub position: ChannelSpec,
}

impl BehaviorWeights {
    pub fn validate(&self) -> Result<()> {
        let channels = [self.force, self.pressure, self.position];
        if channels.iter().any(|c| c.weight < 0.0 || !c.weight.is_finite()) {
            return Err(Error::invalid("channel weights must be >= 0"));
        }
        if channels.iter().all(|c| c.weight == 0.0) {
            return Err(Error::invalid("behavior needs at least one active channel"));
        }
        Ok(())
    }
}

/// E = sum over fingers and channels of w_c (reading_c - setpoint_c)^2,
/// plus the descent gradient dE/dx per finger. `contact_slope` is the
/// local force/position slope (object stiffness in contact, 0 in free
/// air); the pressure channel is monitoring-only and contributes no
/// gradient.
pub fn control_error(
    weights: &BehaviorWeights,
    sensors: &SensorFrame,
    contact_slope: &[f64; FINGER_COUNT],
) -> Result<(f64, [f64; FINGER_COUNT])> {
    weights.validate()?;
    sensors.validate()?;
    let mut e = 0.0;
    let mut grad = [0.0; FINGER_COUNT];
    for i in 0..FINGER_COUNT {
        let df = sensors.force[i] - weights.force.setpoint;
        let dp = sensors.pressure[i] - weights.pressure.setpoint;
        let dx = sensors.position[i] - weights.position.setpoint;
        e += weights.force.weight * df * df
            + weights.pressure.weight * dp * dp
            + weights.position.weight * dx * dx;
        grad[i] = 2.0 * weights.force.weight * df * contact_slope[i]
            + 2.0 * weights.position.weight * dx;
    }
    Ok((e, grad))
}

/// Controller phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Rest,
    Preshape,
    Close,
    Hold,
    Comply,
    Release,
}

impl Phase {
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Rest => "Rest",
            Phase::Preshape => "Preshape",
            Phase::Close => "Close",
            Phase::Hold => "Hold",
            Phase::Comply => "Comply",
            Phase::Release => "Release",
        }
    }
}

/// Directed edges of the transition graph (self-loops always allowed).
pub const TRANSITION_GRAPH: &[(Phase, Phase)] = &[
    (Phase::Rest, Phase::Preshape),
    (Phase::Preshape, Phase::Close),
    (Phase::Close, Phase::Hold),
    (Phase::Hold, Phase::Comply),
    (Phase::Rest, Phase::Release),
    (Phase::Preshape, Phase::Release),
    (Phase::Close, Phase::Release),
    (Phase::Hold, Phase::Release),
    (Phase::Comply, Phase::Release),
    (Phase::Release, Phase::Rest),
];

/// Check that consecutive phases only use graph edges or self-loops.
pub fn validate_transitions(phases: &[Phase]) -> Result<()> {
    for (i, pair) in phases.windows(2).enumerate() {
        if pair[0] != pair[1] && !TRANSITION_GRAPH.contains(&(pair[0], pair[1])) {
            return Err(Error::invalid(format!(
                "illegal transition {} -> {} at step {}",
                pair[0].name(),
                pair[1].name(),
                i + 1
            )));
        }
    }
    Ok(())
}

/// Top-down commands to the automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Grasp,
    Release,
}

/// Automaton state: phase plus the installed weighting and a dwell timer.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspState {
    pub phase: Phase,
    pub weights: BehaviorWeights,
    pub steps_in_phase: usize,
}

/// All numeric knobs of the controller and scripted episode.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspConfig {
    pub dt: f64,
    pub duration: f64,
    /// Episode script: when the grasp/release commands arrive, seconds.
    pub grasp_at: f64,
    pub release_at: Option<f64>,
    /// External pull on the object, active over [disturb_from, disturb_to).
    pub disturb_from: f64,
    pub disturb_to: f64,
    pub disturb_force: f64,
    /// Close -> Hold contact force threshold, N.
    pub contact_threshold: f64,
    /// Hold -> Comply when force exceeds setpoint by this much, N.
    pub comply_excess: f64,
    /// Preshape -> Close position tolerance.
    pub preshape_eps: f64,
    /// Release -> Rest position tolerance.
    pub open_eps: f64,
    pub rest_position: f64,
    pub preshape_position: f64,
    pub close_position: f64,
    pub hold_force: f64,
    pub comply_force: f64,
    /// Position-channel weight of the motion behaviors.
    pub w_position: f64,
    /// Force-channel weight of Hold/Comply.
    pub w_force: f64,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig {
            dt: 2e-4,
            duration: 4.0,
            grasp_at: 0.1,
            release_at: None,
            disturb_from: 0.0,
            disturb_to: 0.0,
            disturb_force: 0.0,
            contact_threshold: 1.0,
            comply_excess: 1.0,
            preshape_eps: 0.01,
            open_eps: 0.01,
            rest_position: 0.0,
            preshape_position: 0.35,
            close_position: 1.0,
            hold_force: 1.0,
            comply_force: 0.3,
            w_position: 50.0,
            w_force: 1.0,
        }
    }
}

impl GraspConfig {
    /// The weighting each phase installs.
    pub fn behavior(&self, phase: Phase) -> BehaviorWeights {
        let position_to = |setpoint: f64| BehaviorWeights {
            force: ChannelSpec::off(),
            pressure: ChannelSpec::off(),
            position: ChannelSpec {
                weight: self.w_position,
                setpoint,
            },
        };
        let force_to = |setpoint: f64| BehaviorWeights {
            force: ChannelSpec {
                weight: self.w_force,
                setpoint,
            },
            pressure: ChannelSpec::off(),
            position: ChannelSpec::off(),
        };
        match phase {
            Phase::Rest => position_to(self.rest_position),
            Phase::Preshape => position_to(self.preshape_position),
            Phase::Close => position_to(self.close_position),
            Phase::Hold => force_to(self.hold_force),
            Phase::Comply => force_to(self.comply_force),
            Phase::Release => position_to(self.rest_position),
        }
    }

    pub fn initial_state(&self) -> GraspState {
        GraspState {
            phase: Phase::Rest,
            weights: self.behavior(Phase::Rest),
            steps_in_phase: 0,
        }
    }
}

fn mean(values: &[f64; FINGER_COUNT]) -> f64 {
    values.iter().sum::<f64>() / FINGER_COUNT as f64
}

/// Advance the automaton one step. Sensory triggers and commands both
/// fire here; a command with no defined edge from the current phase is
/// a no-op recorded in `log`.
pub fn fsm_step(
    state: &mut GraspState,
    sensors: &SensorFrame,
    command: Option<Command>,
    cfg: &GraspConfig,
    log: &mut Vec<String>,
) -> Result<()> {
    sensors.validate()?;
    let mut next = state.phase;
    match command {
        Some(Command::Release) => next = Phase::Release,
        Some(Command::Grasp) => {
            if state.phase == Phase::Rest {
                next = Phase::Preshape;
            } else {
                log.push(format!(
                    "ignored grasp command in {} (no such transition)",
                    state.phase.name()
                ));
            }
        }
        None => {}
    }
    if next == state.phase {
        next = match state.phase {
            Phase::Preshape
                if (mean(&sensors.position) - cfg.preshape_position).abs() < cfg.preshape_eps =>
            {
                Phase::Close
            }
            Phase::Close if mean(&sensors.force) > cfg.contact_threshold => Phase::Hold,
            Phase::Hold if mean(&sensors.force) > cfg.hold_force + cfg.comply_excess => {
                Phase::Comply
            }
            Phase::Release if mean(&sensors.position) < cfg.open_eps => Phase::Rest,
            p => p,
        };
    }
    if next != state.phase {
        state.phase = next;
        state.weights = cfg.behavior(next);
        state.steps_in_phase = 0;
    } else {
        state.steps_in_phase += 1;
    }
    Ok(())
}

/// Overdamped piston with a unilateral-spring object and an actuation
/// dead-band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerPlant {
    pub position: f64,
    pub velocity: f64,
    /// Piston position where the fingertip first touches the object.
    pub contact: f64,
    /// Object stiffness, N per position unit.
    pub stiffness: f64,
    /// Viscous damping, N per (position unit / s).
    pub damping: f64,
    /// Proportional descent gain.
    pub gain: f64,
    /// Actuation magnitudes below this are absorbed by friction.
    pub hysteresis: f64,
}

impl Default for FingerPlant {
    fn default() -> Self {
        FingerPlant {
            position: 0.0,
            velocity: 0.0,
            contact: 0.6,
            stiffness: 100.0,
            damping: 2.0,
            gain: 0.25,
            hysteresis: 0.01,
        }
    }
}

impl FingerPlant {
    pub fn validate(&self) -> Result<()> {
        if self.stiffness < 0.0 || self.damping <= 0.0 || self.hysteresis < 0.0 {
            return Err(Error::invalid(
                "plant needs stiffness >= 0, damping > 0, hysteresis >= 0",
            ));
        }
        Ok(())
    }

    /// Spring contact force at the current position.
    pub fn contact_force(&self) -> f64 {
        self.stiffness * (self.position - self.contact).max(0.0)
    }
}

/// Closed-form Hold equilibrium of the proportional loop:
/// F* = G sp / (1 + G) with loop gain G = 2 gain w_F k.
pub fn steady_state_force(gain: f64, w_force: f64, stiffness: f64, setpoint: f64) -> f64 {
    let g = 2.0 * gain * w_force * stiffness;
    g * setpoint / (1.0 + g)
}

/// One log row of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub time: f64,
    pub phase: Phase,
    pub sensors: SensorFrame,
    pub error: f64,
}

/// Full episode record.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspTrace {
    pub rows: Vec<TraceRow>,
    pub log: Vec<String>,
}

impl GraspTrace {
    pub fn final_phase(&self) -> Option<Phase> {
        self.rows.last().map(|r| r.phase)
    }

    pub fn phases(&self) -> Vec<Phase> {
        self.rows.iter().map(|r| r.phase).collect()
    }

    /// CSV: step, time, state, then per-finger position/force/pressure,
    /// then the scalar error.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,time,state");
        for i in 0..FINGER_COUNT {
            out.push_str(&format!(",pos{i},force{i},pressure{i}"));
        }
        out.push_str(",error\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:?},{}", r.step, r.time, r.phase.name()));
            for i in 0..FINGER_COUNT {
                out.push_str(&format!(
                    ",{:?},{:?},{:?}",
                    r.sensors.position[i], r.sensors.force[i], r.sensors.pressure[i]
                ));
            }
            out.push_str(&format!(",{:?}\n", r.error));
        }
        out
    }
}

/// Scripted closed-loop episode: explicit Euler on five identical
/// plants under the automaton's current behavior. Deterministic.
pub fn simulate(plant: &FingerPlant, cfg: &GraspConfig) -> Result<GraspTrace> {
    plant.validate()?;
    if !(cfg.dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    if !(cfg.duration >= 0.0) {
        return Err(Error::invalid("duration must be >= 0"));
    }
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let mut plants = [*plant; FINGER_COUNT];
    let mut state = cfg.initial_state();
    let mut actuation = [0.0f64; FINGER_COUNT];
    let mut rows = Vec::with_capacity(steps);
    let mut log = Vec::new();
    let mut grasp_sent = false;
    let mut release_sent = false;
    for step in 0..steps {
        let time = step as f64 * cfg.dt;
        let disturbing = cfg.disturb_force != 0.0 && time >= cfg.disturb_from && time < cfg.disturb_to;
        let mut sensors = SensorFrame {
            force: [0.0; FINGER_COUNT],
            pressure: [0.0; FINGER_COUNT],
            position: [0.0; FINGER_COUNT],
        };
        let mut slope = [0.0; FINGER_COUNT];
        for i in 0..FINGER_COUNT {
            let p = &plants[i];
            if !p.position.is_finite() {
                return Err(Error::numeric(format!(
                    "simulation diverged at step {} (finger {})",
                    step, i
                )));
            }
            let spring = p.contact_force();
            sensors.force[i] = spring + if disturbing { cfg.disturb_force } else { 0.0 };
            sensors.pressure[i] = actuation[i].abs();
            sensors.position[i] = p.position.clamp(0.0, 1.0);
            slope[i] = if p.position > p.contact { p.stiffness } else { 0.0 };
        }
        let mut command = None;
        if !grasp_sent && time >= cfg.grasp_at {
            command = Some(Command::Grasp);
            grasp_sent = true;
        }
        if let Some(t_rel) = cfg.release_at {
            if !release_sent && time >= t_rel {
                command = Some(Command::Release);
                release_sent = true;
            }
        }
        fsm_step(&mut state, &sensors, command, cfg, &mut log)?;
        let (error, grad) = control_error(&state.weights, &sensors, &slope)?;
        for i in 0..FINGER_COUNT {
            let mut u = -plants[i].gain * grad[i];
            if u.abs() < plants[i].hysteresis {
                u = 0.0;
            }
            actuation[i] = u;
            let spring = plants[i].contact_force();
            let v = (u - spring) / plants[i].damping;
            plants[i].velocity = v;
            plants[i].position = (plants[i].position + cfg.dt * v).clamp(-0.5, 1.5);
            if !plants[i].position.is_finite() {
                return Err(Error::numeric(format!(
                    "simulation diverged at step {} (finger {})",
                    step, i
                )));
            }
        }
        rows.push(TraceRow {
            step,
            time,
            phase: state.phase,
            sensors,
            error,
        });
    }
    Ok(GraspTrace { rows, log })
}
