//! Equal-time emission amplitudes from resolvent chains.
//!
//! In the weak-drive limit the `n`-photon detection amplitude factorizes into
//! a backward chain of resolvent solves climbing the excitation ladder,
//!
//! ```text
//! v_0 = |vac⟩,   v_l = K(l, ω_1 + … + ω_l)⁻¹ · O†_in v_{l−1},
//! ```
//!
//! contracted with a forward row of output lowering blocks,
//!
//! ```text
//! w_0 = ⟨vac|,   w_l = w_{l−1} · O_out(l),        S_n = w_n · v_n .
//! ```
//!
//! Everything in this module is expressed through those two moves. The
//! specialized entry points cover a single drive tone with distinct input and
//! output channels ([`chain_single`]), several simultaneous tones
//! ([`multi_drive_components`]), a channel probing its own drive
//! ([`same_channel_sum`]), and the fully general case of arbitrary input and
//! output channel multisets with per-photon frequencies
//! ([`amplitude_general`]), which also accounts for the photons that bypass
//! the system entirely.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::engine::Engine;
use crate::error::{Error, Result};

/// Hard combinatorial cap for [`amplitude_general`].
pub const GENERAL_ORDER_LIMIT: usize = 6;

/// Hard cap for the single-drive and multi-drive chain builders.
pub const CHAIN_ORDER_LIMIT: usize = 10;

/// One coherent drive tone: the channel it enters through, its amplitude
/// relative to the reference tone, and its (absolute) frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTone {
    pub channel: usize,
    pub amplitude: C64,
    pub frequency: f64,
}

/// A fully general equal-time amplitude request: `n` input photons with
/// individual channels and frequencies, `n` output channels, and the common
/// detection time.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeRequest {
    /// Input photons as `(channel, frequency)` pairs.
    pub inputs: Vec<(usize, f64)>,
    /// Output detection channels, one per photon.
    pub outputs: Vec<usize>,
    /// Common detection time (enters only as a global phase).
    pub time: f64,
}

fn check_order(engine: &Engine, n: usize, limit: usize) -> Result<()> {
    let cap = limit.min(engine.max_photons());
    if n > cap {
        return Err(Error::OrderTooLarge {
            order: n,
            limit: cap,
        });
    }
    Ok(())
}

fn vacuum() -> Array1<C64> {
    Array1::from(vec![C64::new(1.0, 0.0)])
}

/// Bilinear contraction of a forward row with a backward vector (no
/// conjugation; the row already represents a bra).
fn contract(w: &Array1<C64>, v: &Array1<C64>) -> C64 {
    w.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

fn binomial(n: usize, m: usize) -> f64 {
    let mut acc = 1.0f64;
    for i in 0..m.min(n - m) {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Forward output row after `n` lowerings through `out_channel`:
/// `⟨vac| O_out(1) ⋯ O_out(n)` as a coefficient vector on the `n`-excitation
/// basis.
fn forward_row(engine: &Engine, out_channel: usize, n: usize) -> Array1<C64> {
    let mut w = vacuum();
    for l in 1..=n {
        w = engine.lower_channel_row(out_channel, l, &w);
    }
    w
}

/// Bare `n`-photon chain `S_n` for one drive tone at `ω_d` entering through
/// `in_channel` and detected in `out_channel` (the two may coincide; the
/// bypass contributions of a self-probing channel are *not* included here —
/// see [`same_channel_sum`]).
///
/// `S_0 = 1`, and the single-photon transmission between distinct channels is
/// `|S_1|²`.
pub fn chain_single(
    engine: &Engine,
    in_channel: usize,
    out_channel: usize,
    n: usize,
    omega_d: f64,
) -> Result<C64> {
    check_order(engine, n, CHAIN_ORDER_LIMIT)?;
    let mut v = vacuum();
    for l in 1..=n {
        let rhs = engine.raise_channel(in_channel, l, &v);
        v = engine.resolvent_apply(l, l as f64 * omega_d, &rhs)?;
    }
    let w = forward_row(engine, out_channel, n);
    Ok(contract(&w, &v))
}

/// Chain with one input tone but `n` individually chosen output channels:
/// `⟨vac| O_{ν_1}(1) ⋯ O_{ν_n}(n) [K⁻¹ O†_in]ⁿ |vac⟩`. The output product is
/// order-independent because lowering operators of different channels
/// commute.
pub fn chain_cross(
    engine: &Engine,
    in_channel: usize,
    outputs: &[usize],
    omega_d: f64,
) -> Result<C64> {
    let n = outputs.len();
    check_order(engine, n, CHAIN_ORDER_LIMIT)?;
    let mut v = vacuum();
    for l in 1..=n {
        let rhs = engine.raise_channel(in_channel, l, &v);
        v = engine.resolvent_apply(l, l as f64 * omega_d, &rhs)?;
    }
    let mut w = vacuum();
    for (l, &ch) in (1..).zip(outputs.iter()) {
        w = engine.lower_channel_row(ch, l, &w);
    }
    Ok(contract(&w, &v))
}

/// Self-probing channel sum `Σ_{m=0}^{n} C(n,m) S_m` where `S_m` is the
/// `m`-photon chain with `channel` as both input and output and `S_0 = 1`.
/// Each detected photon either bypasses the system (binomially many ways) or
/// is scattered; `|Σ|²/|Σ_1|^{2n}` is the self-channel `g^(n)` and
/// `|Σ_1|² = |1 + S_1|²` the self-channel transmission.
pub fn same_channel_sum(engine: &Engine, n: usize, omega_d: f64, channel: usize) -> Result<C64> {
    check_order(engine, n, CHAIN_ORDER_LIMIT)?;
    let mut total = C64::new(0.0, 0.0);
    let mut v = vacuum();
    for m in 0..=n {
        if m > 0 {
            let rhs = engine.raise_channel(channel, m, &v);
            v = engine.resolvent_apply(m, m as f64 * omega_d, &rhs)?;
        }
        let w = forward_row(engine, channel, m);
        total += binomial(n, m) * contract(&w, &v);
    }
    Ok(total)
}

/// Full `n`-photon amplitude for one tone with distinct input and output
/// channels, including the factorial and flux prefactors:
/// `P_n = n! · Iⁿ · S_n` with `I = e^{−iω_d t}/√(2π)`.
pub fn amplitude_single_drive(
    engine: &Engine,
    n: usize,
    omega_d: f64,
    in_channel: usize,
    out_channel: usize,
    t: f64,
) -> Result<C64> {
    let chain = chain_single(engine, in_channel, out_channel, n, omega_d)?;
    let i_fac = C64::from_polar(1.0 / (2.0 * PI).sqrt(), -omega_d * t);
    Ok(factorial(n) * i_fac.powu(n as u32) * chain)
}

/// Full `n`-photon amplitude for a channel probing its own drive:
/// `P_n = n! · Iⁿ · Σ_m C(n,m) S_m`.
pub fn amplitude_same_channel(
    engine: &Engine,
    n: usize,
    omega_d: f64,
    channel: usize,
    t: f64,
) -> Result<C64> {
    let sum = same_channel_sum(engine, n, omega_d, channel)?;
    let i_fac = C64::from_polar(1.0 / (2.0 * PI).sqrt(), -omega_d * t);
    Ok(factorial(n) * i_fac.powu(n as u32) * sum)
}

/// Harmonic decomposition of the `n`-photon multi-tone kernel.
///
/// For `m` tones the kernel is a sum over all `mⁿ` orderings of which tone
/// supplied each absorbed photon. Orderings sharing a tone-count vector `c`
/// oscillate at the common total frequency `ω(c) = Σ_j c_j ω_j`, so the
/// kernel collapses to a finite harmonic series
///
/// ```text
//  A_n(t) = Σ_c  a_c · e^{−i ω(c) t} ,
/// ```
///
/// returned here as `(ω(c), a_c)` pairs sorted by frequency. The coefficients
/// are accumulated level-by-level over count vectors — the sum over orderings
/// is exact, never sampled — with one resolvent solve per `(level, partial
/// count)` pair. Evaluate the series at any `t` with [`eval_components`], or
/// use [`amplitude_multi_drive_kernel`] directly.
pub fn multi_drive_components(
    engine: &Engine,
    n: usize,
    drives: &[DriveTone],
    out_channel: usize,
) -> Result<Vec<(f64, C64)>> {
    if drives.is_empty() {
        return Err(Error::InvalidArgument(
            "multi-drive kernel requires at least one tone".into(),
        ));
    }
    check_order(engine, n, CHAIN_ORDER_LIMIT)?;
    let m = drives.len();
    let guard = engine.model().options().term_guard;
    let terms = (m as u128).pow(n as u32);
    if terms > u128::from(guard) {
        return Err(Error::TermGuardExceeded { terms, guard });
    }

    // DP over tone-count vectors: level l holds, for each count vector c with
    // |c| = l, the backward vector summed over every ordering consistent
    // with c.
    let mut level: HashMap<Vec<u32>, Array1<C64>> = HashMap::new();
    level.insert(vec![0; m], vacuum());
    for l in 1..=n {
        let dim = engine.basis(l).dim();
        let mut pre: HashMap<Vec<u32>, Array1<C64>> = HashMap::new();
        for (counts, v) in &level {
            for (j, tone) in drives.iter().enumerate() {
                let mut raised = engine.raise_channel(tone.channel, l, v);
                raised.mapv_inplace(|x| tone.amplitude * x);
                let mut next_counts = counts.clone();
                next_counts[j] += 1;
                let slot = pre.entry(next_counts).or_insert_with(|| Array1::zeros(dim));
                *slot += &raised;
            }
        }
        level = pre
            .into_iter()
            .map(|(counts, rhs)| {
                let omega: f64 = counts
                    .iter()
                    .zip(drives.iter())
                    .map(|(&c, tone)| f64::from(c) * tone.frequency)
                    .sum();
                let solved = engine.resolvent_apply(l, omega, &rhs)?;
                Ok((counts, solved))
            })
            .collect::<Result<_>>()?;
    }

    let w = forward_row(engine, out_channel, n);
    let mut by_freq: HashMap<u64, (f64, C64)> = HashMap::new();
    for (counts, v) in &level {
        let omega: f64 = counts
            .iter()
            .zip(drives.iter())
            .map(|(&c, tone)| f64::from(c) * tone.frequency)
            .sum();
        let amp = contract(&w, v);
        let slot = by_freq
            .entry(omega.to_bits())
            .or_insert((omega, C64::new(0.0, 0.0)));
        slot.1 += amp;
    }
    let mut components: Vec<(f64, C64)> = by_freq.into_values().collect();
    components.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(components)
}

/// Evaluate a harmonic series from [`multi_drive_components`] at time `t`.
pub fn eval_components(components: &[(f64, C64)], t: f64) -> C64 {
    components
        .iter()
        .map(|&(omega, amp)| amp * C64::from_polar(1.0, -omega * t))
        .sum()
}

/// Multi-tone kernel `A_n(t)`: the `n`-photon emission amplitude into
/// `out_channel` under several simultaneous drive tones, up to the common
/// `n!·(2π)^{−n/2}` prefactor (which cancels in every correlator ratio).
/// With a single unit-amplitude tone this reduces to [`chain_single`].
pub fn amplitude_multi_drive_kernel(
    engine: &Engine,
    n: usize,
    drives: &[DriveTone],
    out_channel: usize,
    t: f64,
) -> Result<C64> {
    Ok(eval_components(
        &multi_drive_components(engine, n, drives, out_channel)?,
        t,
    ))
}

/// Number of channel-preserving pairings between two index sets: the product
/// of factorials of the common channel multiplicities when the multisets
/// match, zero otherwise.
fn bypass_pairings(in_channels: &[usize], out_channels: &[usize]) -> f64 {
    let mut counts: HashMap<usize, i64> = HashMap::new();
    for &c in in_channels {
        *counts.entry(c).or_insert(0) += 1;
    }
    for &c in out_channels {
        *counts.entry(c).or_insert(0) -= 1;
    }
    if counts.values().any(|&v| v != 0) {
        return 0.0;
    }
    in_channels
        .iter()
        .collect::<std::collections::HashSet<_>>()
        .iter()
        .map(|&&c| factorial(in_channels.iter().filter(|&&x| x == c).count()))
        .product()
}

/// Fully general equal-time `n`-photon amplitude `P_n` for arbitrary input
/// and output channel multisets and per-photon input frequencies.
///
/// The amplitude is an exact sum over how many photons (`m = 0..n`) actually
/// scatter: every input subset `D` of size `m` contributes a backward subset
/// chain (summed over absorption orderings, with the resolvent frequency
/// tracking the running total of the absorbed frequencies), every output
/// subset `B` of size `m` a forward product row, and the `n−m` remaining
/// photons must bypass the system pairwise within identical channels. Both
/// subset families are built by dynamic programming over bitmasks, so the
/// ordering sums are exact at `2ⁿ` storage. The result carries the global
/// prefactor `e^{−i k_tot t} / (2π)^{n/2}`.
pub fn amplitude_general(engine: &Engine, req: &AmplitudeRequest) -> Result<C64> {
    let n = req.inputs.len();
    if req.outputs.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "amplitude request pairs {} inputs with {} outputs",
            n,
            req.outputs.len()
        )));
    }
    check_order(engine, n, GENERAL_ORDER_LIMIT)?;
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }

    let size = 1usize << n;
    // Backward subset chains V[S] (summed over orderings of S).
    let mut backward: Vec<Array1<C64>> = Vec::with_capacity(size);
    backward.push(vacuum());
    for mask in 1..size {
        let l = mask.count_ones() as usize;
        let omega: f64 = (0..n)
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| req.inputs[j].1)
            .sum();
        let dim = engine.basis(l).dim();
        let mut rhs: Array1<C64> = Array1::zeros(dim);
        for j in 0..n {
            if mask >> j & 1 == 1 {
                let prev = &backward[mask & !(1 << j)];
                rhs += &engine.raise_channel(req.inputs[j].0, l, prev);
            }
        }
        backward.push(engine.resolvent_apply(l, omega, &rhs)?);
    }

    // Forward subset rows W[B]; the output product is order-independent, so
    // peeling the lowest set bit is a valid canonical order.
    let mut forward: Vec<Array1<C64>> = Vec::with_capacity(size);
    forward.push(vacuum());
    for mask in 1..size {
        let l = mask.count_ones() as usize;
        let j = mask.trailing_zeros() as usize;
        let prev = &forward[mask & !(1 << j)];
        forward.push(engine.lower_channel_row(req.outputs[j], l, prev));
    }

    let mut total = C64::new(0.0, 0.0);
    for in_mask in 0..size {
        let m = in_mask.count_ones();
        let leftover_in: Vec<usize> = (0..n)
            .filter(|j| in_mask >> j & 1 == 0)
            .map(|j| req.inputs[j].0)
            .collect();
        for out_mask in 0..size {
            if out_mask.count_ones() != m {
                continue;
            }
            let leftover_out: Vec<usize> = (0..n)
                .filter(|j| out_mask >> j & 1 == 0)
                .map(|j| req.outputs[j])
                .collect();
            let pairings = bypass_pairings(&leftover_in, &leftover_out);
            if pairings == 0.0 {
                continue;
            }
            total += pairings * contract(&forward[out_mask], &backward[in_mask]);
        }
    }

    let k_tot: f64 = req.inputs.iter().map(|&(_, k)| k).sum();
    let prefactor = C64::from_polar((2.0 * PI).powf(-(n as f64) / 2.0), -k_tot * req.time);
    Ok(prefactor * total)
}
