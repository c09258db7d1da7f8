//! 6-D biquad notch bank with per-axis depth blending, and the first-order
//! low-pass used for velocity-error filtering.
//!
//! The notch is the normalized RBJ cookbook form. For axis `i` with center
//! `f0_i` and sharpness `kappa_i` at sample rate `fs`:
//!
//! ```text
//! w0  = 2*pi*f0_i / fs        eta = sin(w0) / (2*kappa_i)
//! b   = [1, -2*cos(w0), 1] / (1 + eta)
//! a   = [1, -2*cos(w0)/(1+eta), (1-eta)/(1+eta)]
//! ```
//!
//! A per-axis depth `lambda_i` in `[0, 1]` blends the raw input with the
//! biquad output: `out = (1 - lambda) * raw + lambda * notched`, so
//! `lambda = 0` bypasses the axis bit-exactly and `lambda = 1` applies the
//! full notch.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::se3::Vec6;

/// Notch design parameters for all six axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotchParams {
    /// Center frequency per axis (Hz).
    pub f0: Vec6,
    /// Sharpness (Q) per axis.
    pub kappa: Vec6,
    /// Depth per axis in `[0, 1]`.
    pub lambda: Vec6,
    /// Sample rate (Hz).
    pub fs: f64,
}

impl NotchParams {
    /// Uniform parameters on all axes.
    pub fn uniform(f0: f64, kappa: f64, lambda: f64, fs: f64) -> Self {
        Self {
            f0: Vec6::repeat(f0),
            kappa: Vec6::repeat(kappa),
            lambda: Vec6::repeat(lambda),
            fs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::BadParams(format!("sample rate must be positive, got {}", self.fs)));
        }
        for i in 0..6 {
            if !(self.f0[i] > 0.0 && self.f0[i] < self.fs / 2.0) {
                return Err(Error::BadParams(format!(
                    "f0[{i}] = {} outside (0, fs/2 = {})",
                    self.f0[i],
                    self.fs / 2.0
                )));
            }
            if !(self.kappa[i] > 0.0) {
                return Err(Error::BadParams(format!("kappa[{i}] must be positive")));
            }
            if !(0.0..=1.0).contains(&self.lambda[i]) {
                return Err(Error::BadParams(format!("lambda[{i}] must be in [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Normalized biquad coefficients plus Direct Form II transposed state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
    z1: f64,
    z2: f64,
}

impl Biquad {
    /// RBJ notch at normalized angular frequency `w0` with sharpness `kappa`.
    pub fn notch(w0: f64, kappa: f64) -> Self {
        let eta = w0.sin() / (2.0 * kappa);
        let a0 = 1.0 + eta;
        let c = -2.0 * w0.cos();
        Biquad {
            b0: 1.0 / a0,
            b1: c / a0,
            b2: 1.0 / a0,
            a1: c / a0,
            a2: (1.0 - eta) / a0,
            z1: 0.0,
            z2: 0.0,
        }
    }

    /// One Direct Form II transposed update.
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }

    /// Magnitude of the transfer function at normalized angular frequency `w`.
    pub fn gain_at(&self, w: f64) -> f64 {
        use nalgebra::Complex;
        let z1 = Complex::new(w.cos(), -w.sin());
        let z2 = z1 * z1;
        let num = Complex::new(self.b0, 0.0) + z1 * self.b1 + z2 * self.b2;
        let den = Complex::new(1.0, 0.0) + z1 * self.a1 + z2 * self.a2;
        (num / den).norm()
    }

    /// Poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        self.a2.abs() < 1.0 && self.a1.abs() < 1.0 + self.a2
    }

    pub fn reset(&mut self) {
        self.z1 = 0.0;
        self.z2 = 0.0;
    }
}

/// Per-axis notch biquads with their depth coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct NotchBank {
    axes: [Biquad; 6],
    lambda: Vec6,
}

/// Design a [`NotchBank`] from validated parameters.
pub fn notch_design(params: &NotchParams) -> Result<NotchBank> {
    params.validate()?;
    let mut axes = [Biquad::default(); 6];
    for i in 0..6 {
        let w0 = 2.0 * PI * params.f0[i] / params.fs;
        axes[i] = Biquad::notch(w0, params.kappa[i]);
    }
    Ok(NotchBank { axes, lambda: params.lambda })
}

impl NotchBank {
    /// Advance every axis one sample and return the depth-blended output.
    pub fn step(&mut self, raw: &Vec6) -> Vec6 {
        let mut out = Vec6::zeros();
        for i in 0..6 {
            let notched = self.axes[i].step(raw[i]);
            let lambda = self.lambda[i];
            out[i] = (1.0 - lambda) * raw[i] + lambda * notched;
        }
        out
    }

    pub fn reset(&mut self) {
        for axis in &mut self.axes {
            axis.reset();
        }
    }

    pub fn axis(&self, i: usize) -> &Biquad {
        &self.axes[i]
    }

    pub fn lambda(&self) -> &Vec6 {
        &self.lambda
    }
}

/// Advance a notch bank one sample (free-function form of [`NotchBank::step`]).
pub fn notch_step(bank: &mut NotchBank, raw: &Vec6) -> Vec6 {
    bank.step(raw)
}

/// First-order low-pass state over a 6-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPassState {
    /// Time constant (s).
    pub tau: f64,
    /// Held output.
    pub y: Vec6,
}

impl LowPassState {
    pub fn new(tau: f64) -> Self {
        Self { tau, y: Vec6::zeros() }
    }

    /// Backward-Euler update `y += alpha * (u - y)` with
    /// `alpha = dt / (tau + dt)`; returns the new output.
    pub fn step(&mut self, u: &Vec6, dt: f64) -> Vec6 {
        let alpha = dt / (self.tau + dt);
        self.y += (u - self.y) * alpha;
        self.y
    }
}

/// Free-function form of [`LowPassState::step`].
pub fn lowpass_step(state: &mut LowPassState, u: &Vec6, dt: f64) -> Vec6 {
    state.step(u, dt)
}
