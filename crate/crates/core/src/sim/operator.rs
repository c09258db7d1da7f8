//! Scripted operator models: sine wrench injection for the leader-side
//! frequency response, scripted setpoint sources for the follower-side
//! experiments, and a spring hand dragging the leader through a
//! contact-drag-lift pattern for the bilateral energy tests.

use serde::{Deserialize, Serialize};

use crate::se3::Vec6;

/// Piecewise-linear contact-drag-lift trajectory, repeated `reps` times.
///
/// Offsets are relative to the leader TCP home: descend to `press_depth`
/// below home, hold, drag `drag_dist` along +x, lift to `lift_depth`, return
/// laterally, repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragLiftScript {
    pub reps: usize,
    pub press_depth: f64,
    pub drag_dist: f64,
    pub lift_depth: f64,
    pub lead_in: f64,
    pub t_descend: f64,
    pub t_hold: f64,
    pub t_drag: f64,
    pub t_lift: f64,
    pub t_return: f64,
}

impl DragLiftScript {
    pub fn rep_duration(&self) -> f64 {
        self.t_descend + self.t_hold + self.t_drag + self.t_lift + self.t_return
    }

    pub fn total_duration(&self) -> f64 {
        self.lead_in + self.reps as f64 * self.rep_duration()
    }

    /// Hand target offset `[dx, dy, dz]`-style 6-vector at time `t`.
    pub fn offset(&self, t: f64) -> Vec6 {
        let mut out = Vec6::zeros();
        if t <= self.lead_in {
            return out;
        }
        let rep_t = (t - self.lead_in) % self.rep_duration();
        let rep_idx = ((t - self.lead_in) / self.rep_duration()) as usize;
        if rep_idx >= self.reps {
            // Script finished: stay lifted.
            out[2] = -self.lift_depth;
            return out;
        }
        let lerp = |a: f64, b: f64, s: f64| a + (b - a) * s.clamp(0.0, 1.0);
        let mut seg = rep_t;
        // Reps after the first start from the lifted height.
        let start_z = if rep_idx == 0 { 0.0 } else { -self.lift_depth };
        if seg < self.t_descend {
            out[2] = lerp(start_z, -self.press_depth, seg / self.t_descend);
            return out;
        }
        seg -= self.t_descend;
        if seg < self.t_hold {
            out[2] = -self.press_depth;
            return out;
        }
        seg -= self.t_hold;
        if seg < self.t_drag {
            out[2] = -self.press_depth;
            out[0] = lerp(0.0, self.drag_dist, seg / self.t_drag);
            return out;
        }
        seg -= self.t_drag;
        if seg < self.t_lift {
            out[0] = self.drag_dist;
            out[2] = lerp(-self.press_depth, -self.lift_depth, seg / self.t_lift);
            return out;
        }
        seg -= self.t_lift;
        out[2] = -self.lift_depth;
        out[0] = lerp(self.drag_dist, 0.0, seg / self.t_return);
        out
    }

    /// Time windows `[start, end)` of the `reps` contact-capable phases
    /// (descend through drag), for per-repetition envelope analysis.
    pub fn contact_windows(&self) -> Vec<(f64, f64)> {
        (0..self.reps)
            .map(|i| {
                let base = self.lead_in + i as f64 * self.rep_duration();
                (base, base + self.t_descend + self.t_hold + self.t_drag + self.t_lift)
            })
            .collect()
    }
}

/// What drives the session.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    /// Nothing moves on its own.
    Idle,
    /// Sine wrench injected as the leader's haptic reference stream, with the
    /// leader TCP clamped (leader frequency response).
    WrenchInjector { axis: usize, amplitude: f64, freq_hz: f64 },
    /// Virtual leader descending along -z at constant speed to `depth` below
    /// home (collision experiment).
    SetpointDescent { speed: f64, depth: f64, lead_in: f64 },
    /// Virtual leader tracking a sine offset (follower frequency response).
    SetpointSine { axis: usize, amplitude: f64, freq_hz: f64 },
    /// Spring hand holding the leader TCP and tracking a drag-lift script.
    Hand { script: DragLiftScript, stiffness: Vec6 },
}

impl Operator {
    /// Injected haptic reference at time `t` (wrench-injector scenarios).
    pub fn injected_wrench(&self, t: f64) -> Option<Vec6> {
        match self {
            Operator::WrenchInjector { axis, amplitude, freq_hz } => {
                let mut w = Vec6::zeros();
                w[*axis] = amplitude * (2.0 * std::f64::consts::PI * freq_hz * t).sin();
                Some(w)
            }
            _ => None,
        }
    }

    /// Virtual-leader pose offset from home at time `t` (scripted-setpoint
    /// scenarios).
    pub fn virtual_offset(&self, t: f64) -> Option<Vec6> {
        match self {
            Operator::SetpointDescent { speed, depth, lead_in } => {
                let mut off = Vec6::zeros();
                if t > *lead_in {
                    off[2] = -((t - lead_in) * speed).min(*depth);
                }
                Some(off)
            }
            Operator::SetpointSine { axis, amplitude, freq_hz } => {
                let mut off = Vec6::zeros();
                off[*axis] = amplitude * (2.0 * std::f64::consts::PI * freq_hz * t).sin();
                Some(off)
            }
            _ => None,
        }
    }

    /// Hand-spring target offset at time `t` (bilateral scenarios).
    pub fn hand_offset(&self, t: f64) -> Option<(Vec6, Vec6)> {
        match self {
            Operator::Hand { script, stiffness } => Some((script.offset(t), *stiffness)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn script() -> DragLiftScript {
        DragLiftScript {
            reps: 3,
            press_depth: 0.198,
            drag_dist: 0.06,
            lift_depth: 0.10,
            lead_in: 0.5,
            t_descend: 1.2,
            t_hold: 0.8,
            t_drag: 1.5,
            t_lift: 0.6,
            t_return: 0.6,
        }
    }

    #[test]
    fn sine_injection_matches_closed_form() {
        let op = Operator::WrenchInjector { axis: 2, amplitude: 1.0, freq_hz: 1.5 };
        // amplitude 1 N at 1.5 Hz: w(t) = sin(3*pi*t)
        let w = op.injected_wrench(0.1).unwrap();
        assert_relative_eq!(w[2], (3.0 * std::f64::consts::PI * 0.1).sin(), epsilon = 1e-15);
        assert_eq!(op.virtual_offset(0.1), None);
    }

    #[test]
    fn descent_reaches_depth_at_expected_time() {
        let op = Operator::SetpointDescent { speed: 0.05, depth: 0.2, lead_in: 0.0 };
        // 0.05 m/s reaches -200 mm at t = 4 s and holds.
        assert_relative_eq!(op.virtual_offset(4.0).unwrap()[2], -0.2, epsilon = 1e-12);
        assert_relative_eq!(op.virtual_offset(2.0).unwrap()[2], -0.1, epsilon = 1e-12);
        assert_relative_eq!(op.virtual_offset(9.0).unwrap()[2], -0.2, epsilon = 1e-12);
    }

    #[test]
    fn drag_lift_produces_three_contact_episodes() {
        let s = script();
        let windows = s.contact_windows();
        assert_eq!(windows.len(), 3);
        // Inside each window the script reaches press depth; between windows
        // (return phase) it is lifted.
        for (start, _end) in &windows {
            let mid = start + s.t_descend + 0.5 * s.t_hold;
            assert_relative_eq!(s.offset(mid)[2], -s.press_depth, epsilon = 1e-12);
        }
        let between = windows[0].1 + 0.5 * s.t_return;
        assert_relative_eq!(s.offset(between)[2], -s.lift_depth, epsilon = 1e-12);
    }

    #[test]
    fn script_is_continuous_at_segment_boundaries() {
        let s = script();
        let mut t = 0.0;
        let mut prev = s.offset(0.0);
        while t < s.total_duration() + 1.0 {
            t += 0.001;
            let cur = s.offset(t);
            let jump = (cur - prev).amax();
            assert!(jump < 0.01, "jump {jump} at t={t}");
            prev = cur;
        }
    }
}
