//! Physical observables assembled from amplitude chains.
//!
//! Every correlator here is a ratio of the amplitudes produced by
//! [`crate::amplitude`]: equal-time correlation functions
//! `g^(n) = |P_n/n!|² / |P_1|^{2n}`, their multi-tone (dynamical) and
//! cross-channel generalizations, and single-photon transmissions
//! `T = 2π|P_1|²`. The `n!`, `1/√(2π)`, and phase prefactors cancel inside
//! each ratio, so the implementations work directly with the bare chains.
//!
//! At a dark transmission point the defining ratio is 0/0; results then carry
//! an explicit `undefined` flag (with a NaN value) instead of dividing.

use num_complex::Complex64 as C64;

use crate::amplitude::{
    chain_cross, chain_single, eval_components, multi_drive_components, same_channel_sum, DriveTone,
};
use crate::engine::Engine;
use crate::error::{Error, Result};

/// Threshold on `|P₁|²` below which correlator ratios are flagged undefined.
pub const UNDEFINED_THRESHOLD: f64 = 1e-30;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Numerical context recorded with each correlator value.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Magnitude of the single-photon amplitude `|P₁|` entering the
    /// denominator (or the transmitted amplitude for transmissions).
    pub p1_magnitude: f64,
    /// Dimensions of the excitation blocks visited (levels `1..=n`).
    pub block_dims: Vec<usize>,
    /// Reciprocal condition estimates of the resolvent factorizations used.
    pub rconds: Vec<f64>,
}

/// A correlator or transmission value with its context.
#[derive(Debug, Clone)]
pub struct CorrelatorResult {
    /// The observable; NaN when `undefined` is set.
    pub value: f64,
    /// Photon order `n` (1 for transmissions).
    pub order: usize,
    /// True when the defining ratio degenerates to 0/0 at a dark point.
    pub undefined: bool,
    pub diagnostics: Diagnostics,
}

impl CorrelatorResult {
    fn defined(value: f64, order: usize, diagnostics: Diagnostics) -> Self {
        CorrelatorResult {
            value,
            order,
            undefined: false,
            diagnostics,
        }
    }

    fn undefined(order: usize, diagnostics: Diagnostics) -> Self {
        CorrelatorResult {
            value: f64::NAN,
            order,
            undefined: true,
            diagnostics,
        }
    }
}

fn single_tone_diagnostics(engine: &Engine, n: usize, omega_d: f64, p1_sqr: f64) -> Diagnostics {
    Diagnostics {
        p1_magnitude: p1_sqr.sqrt(),
        block_dims: (1..=n).map(|l| engine.basis(l).dim()).collect(),
        rconds: (1..=n)
            .filter_map(|l| engine.resolvent_rcond(l, l as f64 * omega_d).ok())
            .collect(),
    }
}

fn require_distinct(engine: &Engine, in_channel: usize, out_channel: usize) -> Result<()> {
    if in_channel == out_channel {
        return Err(Error::InvalidChannelCombination(format!(
            "input and output are both channel '{}'; use the same-channel variant",
            engine.model().channel(in_channel).id
        )));
    }
    Ok(())
}

/// Equal-time `n`th-order correlation `g^(n)(0)` of `out_channel` under a
/// single weak tone at `ω_d` entering through a distinct `in_channel`.
pub fn etcf(
    engine: &Engine,
    n: usize,
    omega_d: f64,
    in_channel: usize,
    out_channel: usize,
) -> Result<CorrelatorResult> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation order must be at least 2, got {n}"
        )));
    }
    require_distinct(engine, in_channel, out_channel)?;
    let s1 = chain_single(engine, in_channel, out_channel, 1, omega_d)?;
    let p1_sqr = s1.norm_sqr() / TWO_PI;
    let diag = single_tone_diagnostics(engine, n, omega_d, p1_sqr);
    if p1_sqr < UNDEFINED_THRESHOLD {
        return Ok(CorrelatorResult::undefined(n, diag));
    }
    let sn = chain_single(engine, in_channel, out_channel, n, omega_d)?;
    let value = sn.norm_sqr() / s1.norm_sqr().powi(n as i32);
    Ok(CorrelatorResult::defined(value, n, diag))
}

/// Single-photon transmission `T = 2π|P₁|²` from `in_channel` into a
/// distinct `out_channel`.
pub fn transmission(
    engine: &Engine,
    omega_d: f64,
    in_channel: usize,
    out_channel: usize,
) -> Result<CorrelatorResult> {
    require_distinct(engine, in_channel, out_channel)?;
    let s1 = chain_single(engine, in_channel, out_channel, 1, omega_d)?;
    let value = s1.norm_sqr();
    let diag = single_tone_diagnostics(engine, 1, omega_d, value / TWO_PI);
    Ok(CorrelatorResult::defined(value, 1, diag))
}

fn multi_diagnostics(engine: &Engine, n: usize, drives: &[DriveTone], p1_sqr: f64) -> Diagnostics {
    Diagnostics {
        p1_magnitude: p1_sqr.sqrt(),
        block_dims: (1..=n).map(|l| engine.basis(l).dim()).collect(),
        rconds: drives
            .iter()
            .filter_map(|tone| engine.resolvent_rcond(1, tone.frequency).ok())
            .collect(),
    }
}

/// Equal-time `g^(n)` of `out_channel` under several simultaneous drive
/// tones, evaluated at time `t`. With all tone frequencies equal the result
/// is `t`-independent; otherwise it is periodic in `t` with the beat period.
pub fn etcf_multi(
    engine: &Engine,
    n: usize,
    drives: &[DriveTone],
    out_channel: usize,
    t: f64,
) -> Result<CorrelatorResult> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation order must be at least 2, got {n}"
        )));
    }
    let k1 = eval_components(&multi_drive_components(engine, 1, drives, out_channel)?, t);
    let p1_sqr = k1.norm_sqr() / TWO_PI;
    let diag = multi_diagnostics(engine, n, drives, p1_sqr);
    if p1_sqr < UNDEFINED_THRESHOLD {
        return Ok(CorrelatorResult::undefined(n, diag));
    }
    let kn = eval_components(&multi_drive_components(engine, n, drives, out_channel)?, t);
    let value = kn.norm_sqr() / k1.norm_sqr().powi(n as i32);
    Ok(CorrelatorResult::defined(value, n, diag))
}

/// Single-photon transmission under several mutually coherent tones of equal
/// frequency: `T = |A₁|² / |Σ η_i|²`. Unequal frequencies have no stationary
/// transmission and are rejected.
pub fn transmission_multi(
    engine: &Engine,
    drives: &[DriveTone],
    out_channel: usize,
) -> Result<CorrelatorResult> {
    if drives.is_empty() {
        return Err(Error::InvalidArgument(
            "transmission requires at least one tone".into(),
        ));
    }
    let f0 = drives[0].frequency;
    if drives.iter().any(|tone| tone.frequency != f0) {
        return Err(Error::UnequalDriveFrequencies);
    }
    let k1 = eval_components(
        &multi_drive_components(engine, 1, drives, out_channel)?,
        0.0,
    );
    let eta_sum: C64 = drives.iter().map(|tone| tone.amplitude).sum();
    let diag = multi_diagnostics(engine, 1, drives, k1.norm_sqr() / TWO_PI);
    if eta_sum.norm_sqr() < UNDEFINED_THRESHOLD {
        // Perfectly destructive drive amplitudes: zero input flux, 0/0.
        return Ok(CorrelatorResult::undefined(1, diag));
    }
    let value = k1.norm_sqr() / eta_sum.norm_sqr();
    Ok(CorrelatorResult::defined(value, 1, diag))
}

/// Equal-time cross-correlation of `outputs.len()` distinct detection
/// channels under one tone through `in_channel`:
/// `g^(ν) = |P_ν/n!|² / ∏_j |P₁^{(ν_j)}|²`. The drive channel must not
/// appear among the outputs.
pub fn cross_correlation(
    engine: &Engine,
    outputs: &[usize],
    omega_d: f64,
    in_channel: usize,
) -> Result<CorrelatorResult> {
    let n = outputs.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cross-correlation requires at least one output".into(),
        ));
    }
    if outputs.contains(&in_channel) {
        return Err(Error::InvalidChannelCombination(format!(
            "drive channel '{}' appears among the outputs; bypass photons are not separable here",
            engine.model().channel(in_channel).id
        )));
    }
    let mut denominator = 1.0f64;
    let mut p1_min = f64::INFINITY;
    for &out in outputs {
        let s1 = chain_single(engine, in_channel, out, 1, omega_d)?;
        denominator *= s1.norm_sqr();
        p1_min = p1_min.min(s1.norm_sqr() / TWO_PI);
    }
    let diag = single_tone_diagnostics(engine, n, omega_d, p1_min);
    if p1_min < UNDEFINED_THRESHOLD {
        return Ok(CorrelatorResult::undefined(n, diag));
    }
    let sn = chain_cross(engine, in_channel, outputs, omega_d)?;
    Ok(CorrelatorResult::defined(
        sn.norm_sqr() / denominator,
        n,
        diag,
    ))
}

/// Equal-time `g^(n)` of the *driven* channel itself, including the photons
/// that bypass the system.
pub fn etcf_same_channel(
    engine: &Engine,
    n: usize,
    omega_d: f64,
    channel: usize,
) -> Result<CorrelatorResult> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation order must be at least 2, got {n}"
        )));
    }
    let s1 = same_channel_sum(engine, 1, omega_d, channel)?;
    let p1_sqr = s1.norm_sqr() / TWO_PI;
    let diag = single_tone_diagnostics(engine, n, omega_d, p1_sqr);
    if p1_sqr < UNDEFINED_THRESHOLD {
        return Ok(CorrelatorResult::undefined(n, diag));
    }
    let sn = same_channel_sum(engine, n, omega_d, channel)?;
    let value = sn.norm_sqr() / s1.norm_sqr().powi(n as i32);
    Ok(CorrelatorResult::defined(value, n, diag))
}

/// Transmission of the driven channel itself, `T = |1 + S₁|²`, counting the
/// interference of the bypassing drive with the re-emitted field.
pub fn transmission_same_channel(
    engine: &Engine,
    omega_d: f64,
    channel: usize,
) -> Result<CorrelatorResult> {
    let s1 = same_channel_sum(engine, 1, omega_d, channel)?;
    let value = s1.norm_sqr();
    let diag = single_tone_diagnostics(engine, 1, omega_d, value / TWO_PI);
    Ok(CorrelatorResult::defined(value, 1, diag))
}
