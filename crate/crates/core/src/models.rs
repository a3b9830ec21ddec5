//! Prebuilt models: the driven Jaynes–Cummings system with its closed-form
//! correlators, dimerized cavity–atom chains, and waveguide-coupled atom
//! arrays, plus a registry of named builtins for the command line.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::amplitude::DriveTone;
use crate::error::{Error, Result};
use crate::model::{
    waveguide_from_geometry, ChannelSpec, ChannelWeight, CouplingSpec, DriveSpec, ModelSpec,
    SiteKind, SiteSpec, SystemModel,
};

/// Parameters of a lossy Jaynes–Cummings system.
///
/// Both the cavity and the atom decay through an input channel (`b`) and a
/// separate readout channel (`c`), with total rates `κ = κ_b + κ_c` and
/// `γ = γ_b + γ_c`. The closed-form correlators below depend only on the
/// totals; the splits fix how strongly drives and detectors couple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcParams {
    pub omega_c: f64,
    pub omega_e: f64,
    pub g: f64,
    pub kappa_b: f64,
    pub kappa_c: f64,
    pub gamma_b: f64,
    pub gamma_c: f64,
}

impl JcParams {
    /// Even input/readout splits: `κ_b = κ_c = κ/2`, `γ_b = γ_c = γ/2`.
    pub fn symmetric(omega_c: f64, omega_e: f64, g: f64, kappa: f64, gamma: f64) -> Self {
        JcParams {
            omega_c,
            omega_e,
            g,
            kappa_b: 0.5 * kappa,
            kappa_c: 0.5 * kappa,
            gamma_b: 0.5 * gamma,
            gamma_c: 0.5 * gamma,
        }
    }

    /// The reference parameter point used throughout the examples:
    /// `κ = 1`, `γ = 0.2`, `g = 0.6`, `ω_c = 0`, `ω_e = 1` (units of `κ`).
    pub fn standard() -> Self {
        JcParams::symmetric(0.0, 1.0, 0.6, 1.0, 0.2)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_b + self.kappa_c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_b + self.gamma_c
    }
}

/// Channel indices of the model built by [`jc_model`].
pub const JC_CAVITY_IN: usize = 0;
pub const JC_CAVITY_OUT: usize = 1;
pub const JC_ATOM_IN: usize = 2;
pub const JC_ATOM_OUT: usize = 3;

/// Which port(s) the coherent drive enters through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JcScheme {
    /// Drive the cavity input channel.
    Cavity,
    /// Drive the atom input channel.
    Atom,
    /// Drive both simultaneously at one frequency; `eta` is the ratio of the
    /// atom to the cavity *Rabi* strength (not of the coherent amplitudes).
    Both { eta: f64 },
}

/// Unvalidated spec for a Jaynes–Cummings model (adjust `options` before
/// freezing it with [`SystemModel::from_spec`] if needed).
pub fn jc_model_spec(p: &JcParams) -> ModelSpec {
    let weight = |w: f64| C64::new(w.sqrt(), 0.0);
    ModelSpec {
        sites: vec![
            SiteSpec {
                id: "cavity".into(),
                kind: SiteKind::Boson,
                frequency: p.omega_c,
            },
            SiteSpec {
                id: "atom".into(),
                kind: SiteKind::Qubit,
                frequency: p.omega_e,
            },
        ],
        couplings: vec![CouplingSpec {
            site_i: "cavity".into(),
            site_j: "atom".into(),
            amplitude: C64::new(p.g, 0.0),
        }],
        channels: vec![
            ChannelSpec {
                id: "b1".into(),
                weights: vec![ChannelWeight {
                    site: "cavity".into(),
                    weight: weight(p.kappa_b),
                }],
                contributes_decay: true,
            },
            ChannelSpec {
                id: "c1".into(),
                weights: vec![ChannelWeight {
                    site: "cavity".into(),
                    weight: weight(p.kappa_c),
                }],
                contributes_decay: true,
            },
            ChannelSpec {
                id: "b2".into(),
                weights: vec![ChannelWeight {
                    site: "atom".into(),
                    weight: weight(p.gamma_b),
                }],
                contributes_decay: true,
            },
            ChannelSpec {
                id: "c2".into(),
                weights: vec![ChannelWeight {
                    site: "atom".into(),
                    weight: weight(p.gamma_c),
                }],
                contributes_decay: true,
            },
        ],
        drives: vec![DriveSpec {
            channel: "b1".into(),
            relative_amplitude: C64::new(1.0, 0.0),
            frequency: 0.0,
        }],
        ..ModelSpec::default()
    }
}

/// Lossy Jaynes–Cummings model with channels `b1`, `c1` (cavity input and
/// readout) and `b2`, `c2` (atom input and readout).
pub fn jc_model(p: &JcParams) -> Arc<SystemModel> {
    SystemModel::from_spec(jc_model_spec(p)).expect("Jaynes-Cummings spec is valid by construction")
}

/// Drive tones realizing a [`JcScheme`] at frequency `omega_d`.
///
/// The scheme's `eta` is a Rabi-strength ratio; converted to a coherent
/// amplitude ratio it picks up `√(κ_b/γ_b)` because the two tones enter
/// through channels of different rates.
pub fn jc_drive_tones(p: &JcParams, scheme: JcScheme, omega_d: f64) -> Vec<DriveTone> {
    let unit = C64::new(1.0, 0.0);
    match scheme {
        JcScheme::Cavity => vec![DriveTone {
            channel: JC_CAVITY_IN,
            amplitude: unit,
            frequency: omega_d,
        }],
        JcScheme::Atom => {
            vec![DriveTone {
                channel: JC_ATOM_IN,
                amplitude: unit,
                frequency: omega_d,
            }]
        }
        JcScheme::Both { eta } => vec![
            DriveTone {
                channel: JC_CAVITY_IN,
                amplitude: unit,
                frequency: omega_d,
            },
            DriveTone {
                channel: JC_ATOM_IN,
                amplitude: C64::new(eta * (p.kappa_b / p.gamma_b).sqrt(), 0.0),
                frequency: omega_d,
            },
        ],
    }
}

/// Tones for the dynamical scheme: a cavity tone at `omega1` plus an atom
/// tone at `omega2` with Rabi ratio `eta`.
pub fn jc_dynamical_drive_tones(
    p: &JcParams,
    omega1: f64,
    omega2: f64,
    eta: f64,
) -> Vec<DriveTone> {
    vec![
        DriveTone {
            channel: JC_CAVITY_IN,
            amplitude: C64::new(1.0, 0.0),
            frequency: omega1,
        },
        DriveTone {
            channel: JC_ATOM_IN,
            amplitude: C64::new(eta * (p.kappa_b / p.gamma_b).sqrt(), 0.0),
            frequency: omega2,
        },
    ]
}

/// Closed-form `g⁽²⁾(0)` of the weakly driven Jaynes–Cummings system read
/// out at the cavity, for each drive scheme.
///
/// With the complex detunings `D_c = (ω_c − iκ/2) − ω_d` and
/// `D_e = (ω_e − iγ/2) − ω_d`, the atom-driven value is
/// `|D_c D_e − g²|² / |D_c(D_c + D_e) − g²|²`, and the other schemes multiply
/// it by a scheme-dependent interference factor.
pub fn jc_g2_closed(p: &JcParams, scheme: JcScheme, omega_d: f64) -> f64 {
    let g2 = p.g * p.g;
    let dc = C64::new(p.omega_c - omega_d, -0.5 * p.kappa());
    let de = C64::new(p.omega_e - omega_d, -0.5 * p.gamma());
    let ge = (dc * de - g2).norm_sqr() / (dc * (dc + de) - g2).norm_sqr();
    match scheme {
        JcScheme::Atom => ge,
        JcScheme::Cavity => ge * (de * (dc + de) + g2).norm_sqr() / de.norm_sqr().powi(2),
        JcScheme::Both { eta } => {
            let shifted = dc + de - eta * p.g;
            ge * (g2 - dc * (dc + de) + shifted * shifted).norm_sqr()
                / (de - eta * p.g).norm_sqr().powi(2)
        }
    }
}

/// Closed-form time-dependent `g⁽²⁾(t)` under the two-tone dynamical scheme
/// (cavity tone at `omega1`, atom tone at `omega2`, Rabi ratio `eta`): a
/// ratio of trigonometric polynomials in `δ t` with `δ = ω₂ − ω₁`, periodic
/// with period `2π/|δ|`.
pub fn jc_g2_dynamical_closed(p: &JcParams, omega1: f64, omega2: f64, eta: f64, t: f64) -> f64 {
    let g = p.g;
    let g2 = g * g;
    let dc1 = C64::new(p.omega_c - omega1, -0.5 * p.kappa());
    let dc2 = C64::new(p.omega_c - omega2, -0.5 * p.kappa());
    let de1 = C64::new(p.omega_e - omega1, -0.5 * p.gamma());
    let de2 = C64::new(p.omega_e - omega2, -0.5 * p.gamma());
    let dcb = 0.5 * (dc1 + dc2);
    let deb = 0.5 * (de1 + de2);
    let two_mid = dcb * (dcb + deb) - g2;
    let c1 = (de1 * (de1 + dc1) + g2) / ((de1 * dc1 - g2) * (dc1 * (dc1 + de1) - g2));
    let c2 = C64::new(eta * eta * g2, 0.0) / ((de2 * dc2 - g2) * (dc2 * (dc2 + de2) - g2));
    let c3 = -eta * g * de1 / ((de1 * dc1 - g2) * two_mid);
    let c4 = -eta * g * (2.0 * dc2 + de1) / ((de2 * dc2 - g2) * two_mid);
    let c5 = de1 / (de1 * dc1 - g2);
    let c6 = C64::new(-eta * g, 0.0) / (de2 * dc2 - g2);
    let delta = omega2 - omega1;
    let ph1 = C64::from_polar(1.0, -delta * t);
    let ph2 = C64::from_polar(1.0, -2.0 * delta * t);
    let num = c1 + c2 * ph2 + (c3 + c4) * ph1;
    let den = c5 + c6 * ph1;
    num.norm_sqr() / den.norm_sqr().powi(2)
}

/// Parameters of a dimerized cavity chain with atoms on one sublattice.
///
/// `n_cavities` bosonic modes form dimer cells with intra-cell hopping `1`
/// (the unit of energy) and inter-cell hopping `t_hop`; atom `j` couples with
/// strength `g` to cavity `2j − s`, so `s = 1` places the atoms on the odd
/// sublattice and `s = 0` on the even one. Every cavity decays at `κ` and
/// every atom at `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimerParams {
    pub n_cavities: usize,
    /// Sublattice selector for the atoms, `0` or `1`.
    pub s: usize,
    pub t_hop: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub g: f64,
    pub omega_c: f64,
    pub omega_e: f64,
}

impl DimerParams {
    /// The reference chain: eight cavities, `t = 0.5`, `κ = 1`, `γ = 0.8`,
    /// `g = 0.6`, everything on resonance.
    pub fn standard(s: usize) -> Self {
        DimerParams {
            n_cavities: 8,
            s,
            t_hop: 0.5,
            kappa: 1.0,
            gamma: 0.8,
            g: 0.6,
            omega_c: 0.0,
            omega_e: 0.0,
        }
    }
}

/// A dimer chain with its conventional drive and readout ports.
#[derive(Debug, Clone)]
pub struct DimerChain {
    pub model: Arc<SystemModel>,
    /// Loss channel of the first cavity (the driven port).
    pub drive_channel: usize,
    /// Loss channel of the penultimate cavity (the detected port).
    pub signal_channel: usize,
}

pub fn dimer_jc_chain_spec(p: &DimerParams) -> Result<ModelSpec> {
    if p.n_cavities < 4 || p.n_cavities % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "dimer chain needs an even cavity count of at least 4, got {}",
            p.n_cavities
        )));
    }
    if p.s > 1 {
        return Err(Error::InvalidArgument(format!(
            "sublattice selector must be 0 or 1, got {}",
            p.s
        )));
    }
    let n_atoms = p.n_cavities / 2;
    let mut sites: Vec<SiteSpec> = (1..=p.n_cavities)
        .map(|i| SiteSpec {
            id: format!("cav{i}"),
            kind: SiteKind::Boson,
            frequency: p.omega_c,
        })
        .collect();
    sites.extend((1..=n_atoms).map(|j| SiteSpec {
        id: format!("atom{j}"),
        kind: SiteKind::Qubit,
        frequency: p.omega_e,
    }));
    let mut couplings = Vec::new();
    for j in 1..=n_atoms {
        couplings.push(CouplingSpec {
            site_i: format!("cav{}", 2 * j - 1),
            site_j: format!("cav{}", 2 * j),
            amplitude: C64::new(1.0, 0.0),
        });
        if 2 * j < p.n_cavities {
            couplings.push(CouplingSpec {
                site_i: format!("cav{}", 2 * j),
                site_j: format!("cav{}", 2 * j + 1),
                amplitude: C64::new(p.t_hop, 0.0),
            });
        }
        couplings.push(CouplingSpec {
            site_i: format!("atom{j}"),
            site_j: format!("cav{}", 2 * j - p.s),
            amplitude: C64::new(p.g, 0.0),
        });
    }
    let mut channels: Vec<ChannelSpec> = (1..=p.n_cavities)
        .map(|i| ChannelSpec {
            id: format!("k{i}"),
            weights: vec![ChannelWeight {
                site: format!("cav{i}"),
                weight: C64::new(p.kappa.sqrt(), 0.0),
            }],
            contributes_decay: true,
        })
        .collect();
    channels.extend((1..=n_atoms).map(|j| ChannelSpec {
        id: format!("g{j}"),
        weights: vec![ChannelWeight {
            site: format!("atom{j}"),
            weight: C64::new(p.gamma.sqrt(), 0.0),
        }],
        contributes_decay: true,
    }));
    let drives = vec![DriveSpec {
        channel: "k1".into(),
        relative_amplitude: C64::new(1.0, 0.0),
        frequency: 0.0,
    }];
    Ok(ModelSpec {
        sites,
        couplings,
        channels,
        drives,
        ..ModelSpec::default()
    })
}

/// Build a dimer chain and pick its drive and readout ports.
///
/// The drive always enters at cavity 1 and the signal is always read at
/// cavity `n_cavities − 1`. With the atoms on the odd sublattice this is the
/// configuration as drawn; with the atoms on the even sublattice it is the
/// mirror relabeling of driving the *last* cavity and reading the second, so
/// the fixed-port convention covers both endpoint choices while keeping the
/// two `s` values physically distinct.
pub fn dimer_jc_chain(p: &DimerParams) -> Result<DimerChain> {
    let model = SystemModel::from_spec(dimer_jc_chain_spec(p)?)?;
    let drive_channel = model.channel_id_to_index("k1")?;
    let signal_channel = model.channel_id_to_index(&format!("k{}", p.n_cavities - 1))?;
    Ok(DimerChain {
        model,
        drive_channel,
        signal_channel,
    })
}

/// Geometry of a dimerized emitter array along a waveguide.
#[derive(Debug, Clone)]
pub struct WaveguideGeometry {
    pub positions: Vec<f64>,
    pub gamma: f64,
    pub k: f64,
    pub d1: f64,
    pub d2: f64,
}

/// A waveguide-coupled array with its two propagation channels.
#[derive(Debug, Clone)]
pub struct WaveguideChain {
    pub model: Arc<SystemModel>,
    pub geometry: WaveguideGeometry,
    /// Channel index of the right-moving (transmission) port.
    pub right_channel: usize,
    /// Channel index of the left-moving (reflection) port.
    pub left_channel: usize,
}

pub fn waveguide_dimer_chain_spec(
    n_atoms: usize,
    d1: f64,
    d2: f64,
    gamma: f64,
    k: f64,
) -> Result<(ModelSpec, WaveguideGeometry)> {
    if n_atoms < 2 {
        return Err(Error::InvalidArgument(format!(
            "waveguide chain needs at least 2 atoms, got {n_atoms}"
        )));
    }
    if !(d1 > 0.0) || !(d2 > 0.0) || !(gamma > 0.0) || !(k > 0.0) {
        return Err(Error::InvalidArgument(
            "waveguide spacings, decay rate and wave number must be positive".into(),
        ));
    }
    let mut positions = Vec::with_capacity(n_atoms);
    let mut x = 0.0;
    for i in 0..n_atoms {
        positions.push(x);
        x += if i % 2 == 0 { d1 } else { d2 };
    }
    let parts = waveguide_from_geometry(&positions, gamma, k);
    let sites: Vec<SiteSpec> = (1..=n_atoms)
        .map(|i| SiteSpec {
            id: format!("q{i}"),
            kind: SiteKind::Qubit,
            frequency: 0.0,
        })
        .collect();
    let couplings: Vec<CouplingSpec> = parts
        .coherent_couplings
        .iter()
        .filter(|&&(_, _, amp)| amp != 0.0)
        .map(|&(i, j, amp)| CouplingSpec {
            site_i: format!("q{}", i + 1),
            site_j: format!("q{}", j + 1),
            amplitude: C64::new(amp, 0.0),
        })
        .collect();
    let channel = |id: &str, weights: &[C64]| ChannelSpec {
        id: id.into(),
        weights: weights
            .iter()
            .enumerate()
            .map(|(i, &w)| ChannelWeight {
                site: format!("q{}", i + 1),
                weight: w,
            })
            .collect(),
        contributes_decay: true,
    };
    let channels = vec![
        channel("right", &parts.right_weights),
        channel("left", &parts.left_weights),
    ];
    let drives = vec![DriveSpec {
        channel: "right".into(),
        relative_amplitude: C64::new(1.0, 0.0),
        frequency: 0.0,
    }];
    let spec = ModelSpec {
        sites,
        couplings,
        channels,
        drives,
        ..ModelSpec::default()
    };
    let geometry = WaveguideGeometry {
        positions,
        gamma,
        k,
        d1,
        d2,
    };
    Ok((spec, geometry))
}

/// Dimerized atom array in a waveguide: alternating spacings `d1`, `d2`,
/// identical atoms (frequencies are measured from the atomic line), and the
/// right/left-mover decay channel pair.
pub fn waveguide_dimer_chain(
    n_atoms: usize,
    d1: f64,
    d2: f64,
    gamma: f64,
    k: f64,
) -> Result<WaveguideChain> {
    let (spec, geometry) = waveguide_dimer_chain_spec(n_atoms, d1, d2, gamma, k)?;
    let model = SystemModel::from_spec(spec)?;
    let right_channel = model.channel_id_to_index("right")?;
    let left_channel = model.channel_id_to_index("left")?;
    Ok(WaveguideChain {
        model,
        geometry,
        right_channel,
        left_channel,
    })
}

/// Single-excitation spectrum of the λ-commensurate dimerized array
/// (`d1 + d2` equal to the guided wavelength `2π/k`): the `n` eigenvalues
/// `±|γ sin(k d1) / (1 − e^{2πi m/n})|` for odd `m < n`, sorted ascending.
pub fn waveguide_spectrum(n_atoms: usize, gamma: f64, k: f64, d1: f64) -> Result<Vec<f64>> {
    if n_atoms < 2 || n_atoms % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "spectrum formula needs an even atom count of at least 2, got {n_atoms}"
        )));
    }
    let mut out = Vec::with_capacity(n_atoms);
    for m in (1..n_atoms).step_by(2) {
        let denom = C64::new(1.0, 0.0) - C64::from_polar(1.0, TAU * m as f64 / n_atoms as f64);
        let e = (gamma * (k * d1).sin() / denom.norm()).abs();
        out.push(e);
        out.push(-e);
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("spectrum values are finite"));
    Ok(out)
}

/// Names accepted by [`builtin_model`].
pub fn builtin_names() -> &'static [&'static str] {
    &[
        "jc",
        "cavity",
        "emitter",
        "dimer-s0",
        "dimer-s1",
        "waveguide",
    ]
}

/// Construct a named builtin model.
///
/// * `jc` — the standard Jaynes–Cummings point, cavity drive on `b1`.
/// * `cavity` — a critically coupled linear cavity (`κ_b = κ_c = 1/2`).
/// * `emitter` — one atom coupled symmetrically to a waveguide.
/// * `dimer-s0` / `dimer-s1` — the eight-cavity dimer chain.
/// * `waveguide` — twenty atoms at quarter-wavelength dimerization.
pub fn builtin_model(name: &str) -> Result<Arc<SystemModel>> {
    match name {
        "jc" => Ok(jc_model(&JcParams::standard())),
        "cavity" => SystemModel::from_json_str(
            r#"{
                "sites": [{"id": "a", "kind": "boson", "frequency": 0.0}],
                "channels": [
                    {"id": "b", "weights": [{"site": "a", "weight": [0.7071067811865476, 0.0]}]},
                    {"id": "c", "weights": [{"site": "a", "weight": [0.7071067811865476, 0.0]}]}
                ],
                "drives": [{"channel": "b", "relative_amplitude": [1.0, 0.0], "frequency": 0.0}]
            }"#,
        ),
        "emitter" => SystemModel::from_json_str(
            r#"{
                "sites": [{"id": "q", "kind": "qubit", "frequency": 0.0}],
                "channels": [
                    {"id": "right", "weights": [{"site": "q", "weight": [0.7071067811865476, 0.0]}]},
                    {"id": "left", "weights": [{"site": "q", "weight": [0.7071067811865476, 0.0]}]}
                ],
                "drives": [{"channel": "right", "relative_amplitude": [1.0, 0.0], "frequency": 0.0}]
            }"#,
        ),
        "dimer-s0" => Ok(dimer_jc_chain(&DimerParams::standard(0))?.model),
        "dimer-s1" => Ok(dimer_jc_chain(&DimerParams::standard(1))?.model),
        "waveguide" => {
            let lambda = TAU;
            Ok(waveguide_dimer_chain(20, 0.25 * lambda, 0.75 * lambda, 1.0, 1.0)?.model)
        }
        other => Err(Error::UnknownId {
            kind: "builtin model",
            id: other.into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlator;
    use crate::engine::Engine;

    #[test]
    fn engine_matches_closed_form_for_all_schemes() {
        let p = JcParams::standard();
        let engine = Engine::new(jc_model(&p));
        for &det in &[-3.2, -1.306, -0.5, 0.0, 0.9, 1.844, 4.7] {
            let omega_d = p.omega_c - det;
            for scheme in [
                JcScheme::Cavity,
                JcScheme::Atom,
                JcScheme::Both { eta: 3.0 },
            ] {
                let closed = jc_g2_closed(&p, scheme, omega_d);
                let tones = jc_drive_tones(&p, scheme, omega_d);
                let got = correlator::etcf_multi(&engine, 2, &tones, JC_CAVITY_OUT, 0.0)
                    .unwrap()
                    .value;
                assert!(
                    (got - closed).abs() < 1e-6 * closed.abs().max(1e-12),
                    "det {det}, scheme {scheme:?}: engine {got:.12e} vs closed {closed:.12e}"
                );
            }
        }
    }

    #[test]
    fn single_tone_schemes_reduce_to_plain_etcf() {
        let p = JcParams::standard();
        let engine = Engine::new(jc_model(&p));
        let omega_d = p.omega_c - 0.7;
        let via_chain = correlator::etcf(&engine, 2, omega_d, JC_CAVITY_IN, JC_CAVITY_OUT)
            .unwrap()
            .value;
        let closed = jc_g2_closed(&p, JcScheme::Cavity, omega_d);
        assert!((via_chain - closed).abs() < 1e-6 * closed);
    }

    #[test]
    fn dynamical_closed_form_is_periodic_and_static_at_zero_detuning() {
        let p = JcParams::standard();
        let (w1, w2) = (p.omega_c + 0.3, p.omega_c - 0.45);
        let period = TAU / (w2 - w1).abs();
        for &t in &[0.0, 0.37, 1.93] {
            let a = jc_g2_dynamical_closed(&p, w1, w2, 1.3, t);
            let b = jc_g2_dynamical_closed(&p, w1, w2, 1.3, t + period);
            assert!((a - b).abs() < 1e-12 * a.abs());
        }
        // Degenerate tones reduce to the static two-port scheme.
        let w = p.omega_c + 0.3;
        let dynamic = jc_g2_dynamical_closed(&p, w, w, 1.0, 0.0);
        let static_ce = jc_g2_closed(&p, JcScheme::Both { eta: 1.0 }, w);
        assert!(
            (dynamic - static_ce).abs() < 1e-12 * static_ce,
            "dynamic {dynamic} vs static {static_ce}"
        );
    }

    #[test]
    fn dynamical_closed_form_matches_kernel_engine() {
        let p = JcParams::standard();
        let engine = Engine::new(jc_model(&p));
        let (w1, w2) = (p.omega_c + 0.6, p.omega_c - 0.2);
        let eta = 1.4;
        let tones = jc_dynamical_drive_tones(&p, w1, w2, eta);
        for &t in &[0.0, 1.1, 3.7, 6.2] {
            let closed = jc_g2_dynamical_closed(&p, w1, w2, eta, t);
            let got = correlator::etcf_multi(&engine, 2, &tones, JC_CAVITY_OUT, t)
                .unwrap()
                .value;
            assert!(
                (got - closed).abs() < 1e-6 * closed.abs(),
                "t = {t}: engine {got:.12e} vs closed {closed:.12e}"
            );
        }
    }

    #[test]
    fn dimer_chain_reproduces_frozen_resonant_values() {
        // Four-cavity chain on resonance; the two sublattice placements give
        // sharply different bunching.
        for (s, expected) in [(0, 0.3606823172), (1, 0.0634053935)] {
            let chain = dimer_jc_chain(&DimerParams {
                n_cavities: 4,
                s,
                ..DimerParams::standard(s)
            })
            .unwrap();
            let engine = Engine::new(Arc::clone(&chain.model));
            let g2 = correlator::etcf(&engine, 2, 0.0, chain.drive_channel, chain.signal_channel)
                .unwrap()
                .value;
            assert!(
                (g2 - expected).abs() < 1e-6 * expected,
                "s = {s}: g2 = {g2:.10}, expected {expected}"
            );
        }
    }

    #[test]
    fn dimer_chain_rejects_bad_shapes() {
        let odd = DimerParams {
            n_cavities: 6,
            s: 2,
            ..DimerParams::standard(0)
        };
        assert!(dimer_jc_chain(&odd).is_err());
        let tiny = DimerParams {
            n_cavities: 2,
            ..DimerParams::standard(0)
        };
        assert!(dimer_jc_chain(&tiny).is_err());
        let uneven = DimerParams {
            n_cavities: 7,
            ..DimerParams::standard(1)
        };
        assert!(dimer_jc_chain(&uneven).is_err());
    }

    #[test]
    fn waveguide_spectrum_matches_dense_diagonalization() {
        use ndarray::Array2;
        use ndarray_linalg::{EigValsh, UPLO};
        let (n, gamma, k) = (8, 1.0, 1.0);
        let lambda = TAU / k;
        for frac in [0.1, 0.25, 0.4] {
            let d1 = frac * lambda;
            let chain = waveguide_dimer_chain(n, d1, lambda - d1, gamma, k).unwrap();
            let mut h: Array2<f64> = Array2::zeros((n, n));
            for c in chain.model.couplings() {
                h[(c.site_i, c.site_j)] = c.amplitude.re;
                h[(c.site_j, c.site_i)] = c.amplitude.re;
            }
            let mut eigs = h.eigvalsh(UPLO::Lower).unwrap().to_vec();
            eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let closed = waveguide_spectrum(n, gamma, k, d1).unwrap();
            for (a, b) in eigs.iter().zip(&closed) {
                assert!((a - b).abs() < 1e-12, "d1/λ = {frac}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn waveguide_channels_reproduce_collective_decay() {
        // Σ_ch ξ_i ξ_j* over the two movers must equal γ·cos(k(x_i − x_j)).
        let chain = waveguide_dimer_chain(6, 1.1, TAU - 1.1, 0.8, 1.0).unwrap();
        let right = &chain.model.channel(chain.right_channel).weights;
        let left = &chain.model.channel(chain.left_channel).weights;
        for i in 0..6 {
            for j in 0..6 {
                let decay = right[i].1 * right[j].1.conj() + left[i].1 * left[j].1.conj();
                let expected =
                    0.8 * (1.0 * (chain.geometry.positions[i] - chain.geometry.positions[j])).cos();
                assert!((decay.re - expected).abs() < 1e-12);
                assert!(decay.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn builtins_resolve_and_round_trip_through_json() {
        for &name in builtin_names() {
            let model = builtin_model(name).unwrap();
            let json = model.canonical_json();
            let reparsed = SystemModel::from_json_str(&json).unwrap();
            assert_eq!(model.sha256_hex(), reparsed.sha256_hex(), "builtin {name}");
        }
        assert!(builtin_model("no-such-model").is_err());
    }
}
