//! System model: sites, number-conserving couplings, loss/readout channels and
//! coherent drives, together with schema-level validation.
//!
//! A model describes an open quantum system whose Hamiltonian commutes with
//! the total excitation number. Sites are bosonic modes or two-level atoms;
//! couplings are excitation-swap terms `A o_i† o_j + h.c.`; channels are
//! (possibly collective) loss/readout ports with site weights `ξ` in
//! square-root-rate units, so that a local channel on site `k` with rate `κ`
//! carries the single weight `ξ_k = √κ`. Factors of `2π` from the flat-band
//! bath density of states appear only in transmission formulas, never in the
//! stored weights.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Serialize a complex number as a two-element `[re, im]` array.
pub mod serde_c64 {
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &C64, ser: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(des: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(des)?;
        Ok(C64::new(re, im))
    }
}

/// Physical kind of a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteKind {
    /// Harmonic mode; occupation bounded only by the excitation block.
    Boson,
    /// Two-level atom; occupation 0 or 1.
    Qubit,
}

/// One site of the system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteSpec {
    pub id: String,
    pub kind: SiteKind,
    /// Bare transition/resonance frequency of the site.
    pub frequency: f64,
}

/// Excitation-conserving coupling `amplitude · o_i† o_j + h.c.` between two
/// distinct sites.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub site_i: String,
    pub site_j: String,
    #[serde(with = "serde_c64")]
    pub amplitude: C64,
}

/// One entry of a channel's site-weight vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelWeight {
    pub site: String,
    /// Weight `ξ` in square-root-rate units (`√κ` for a local channel).
    #[serde(with = "serde_c64")]
    pub weight: C64,
}

/// A loss/readout channel: the collective lowering operator `o_ch = Σ ξ_k o_k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub id: String,
    pub weights: Vec<ChannelWeight>,
    /// Whether this channel's `o_ch† o_ch` enters the anti-Hermitian part of
    /// the effective Hamiltonian. Readout-only bookkeeping channels may be
    /// declared with `false`.
    #[serde(default = "default_true")]
    pub contributes_decay: bool,
}

fn default_true() -> bool {
    true
}

/// A weak coherent drive feeding one channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriveSpec {
    pub channel: String,
    /// Coherent-state amplitude of this tone relative to the first drive
    /// (`β_l / β_1`). Note this is an amplitude ratio, not a Rabi-frequency
    /// ratio; for tones entering through channels of different rates the two
    /// conventions differ by `√(κ_1/κ_l)`.
    #[serde(with = "serde_c64")]
    pub relative_amplitude: C64,
    pub frequency: f64,
}

/// Solver options carried with the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Upper bound on the photon order `n` of correlation requests.
    #[serde(default = "default_max_photons")]
    pub max_photons: usize,
    /// Absolute resolvent regularization `ε`. When absent, a scale-aware
    /// default `1e-9 · max(1, ‖H_eff‖_∞)` is used per block.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Cap on the `mⁿ` term count of multi-drive kernels (`m` tones, order
    /// `n`); requests above it are rejected instead of silently truncated.
    #[serde(default = "default_term_guard")]
    pub term_guard: u64,
}

fn default_max_photons() -> usize {
    6
}

fn default_term_guard() -> u64 {
    1_000_000
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            max_photons: default_max_photons(),
            epsilon: None,
            term_guard: default_term_guard(),
        }
    }
}

/// A raw normally-ordered product term `amplitude · (∏ o_c†)(∏ o_a)`,
/// injectable programmatically (not part of the JSON schema). Used both as an
/// extension hook for Kerr-type diagonal nonlinearities and as the vehicle for
/// U(1)-violation checks: a term is admissible only if it creates as many
/// excitations as it annihilates.
#[derive(Debug, Clone)]
pub struct ProductTerm {
    pub creators: Vec<String>,
    pub annihilators: Vec<String>,
    pub amplitude: C64,
    /// Add the Hermitian conjugate as well. Set `false` for terms that are
    /// already self-adjoint (e.g. `a†a†aa` with real amplitude).
    pub add_conjugate: bool,
}

/// JSON-facing, unvalidated model description.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelSpec {
    pub sites: Vec<SiteSpec>,
    #[serde(default)]
    pub couplings: Vec<CouplingSpec>,
    pub channels: Vec<ChannelSpec>,
    #[serde(default)]
    pub drives: Vec<DriveSpec>,
    #[serde(default)]
    pub options: ModelOptions,
    #[serde(skip)]
    pub extra_terms: Vec<ProductTerm>,
}

/// Report of the excitation-number conservation check.
#[derive(Debug, Clone, Default)]
pub struct U1Report {
    /// `(term index in extra_terms, net excitation change)` for each violation.
    pub violations: Vec<(usize, i64)>,
}

impl U1Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that every Hamiltonian term conserves total excitation number.
///
/// Site frequencies and swap couplings conserve excitation number by
/// construction; only raw [`ProductTerm`]s can violate it (for example a
/// squeezing-style `o_i o_j` term, which changes the excitation number
/// by −2).
pub fn validate_u1(spec: &ModelSpec) -> U1Report {
    let mut report = U1Report::default();
    for (idx, term) in spec.extra_terms.iter().enumerate() {
        let net = term.creators.len() as i64 - term.annihilators.len() as i64;
        if net != 0 {
            report.violations.push((idx, net));
        }
    }
    report
}

/// Resolved coupling with canonical site indices.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedCoupling {
    pub site_i: usize,
    pub site_j: usize,
    pub amplitude: C64,
}

/// Resolved channel with canonical site indices.
#[derive(Debug, Clone)]
pub struct ResolvedChannel {
    pub id: String,
    pub weights: Vec<(usize, C64)>,
    pub contributes_decay: bool,
}

/// Resolved drive tone.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedDrive {
    pub channel: usize,
    pub relative_amplitude: C64,
    pub frequency: f64,
}

/// Resolved product term with canonical site indices.
#[derive(Debug, Clone)]
pub struct ResolvedProductTerm {
    pub creators: Vec<usize>,
    pub annihilators: Vec<usize>,
    pub amplitude: C64,
    pub add_conjugate: bool,
}

/// A validated, immutable system model.
///
/// Construction via [`SystemModel::from_spec`] checks identifier uniqueness
/// and resolution, parameter finiteness, and excitation-number conservation,
/// and precomputes index maps. Canonical site order is declaration order.
#[derive(Debug)]
pub struct SystemModel {
    spec: ModelSpec,
    site_index: HashMap<String, usize>,
    channel_index: HashMap<String, usize>,
    couplings: Vec<ResolvedCoupling>,
    channels: Vec<ResolvedChannel>,
    drives: Vec<ResolvedDrive>,
    extra_terms: Vec<ResolvedProductTerm>,
}

impl SystemModel {
    /// Validate a raw spec and build the resolved model.
    pub fn from_spec(spec: ModelSpec) -> Result<Arc<SystemModel>> {
        let fail = |path: String, message: String| Error::ModelValidation { path, message };

        if spec.sites.is_empty() {
            return Err(fail("sites".into(), "at least one site is required".into()));
        }
        if spec.channels.is_empty() {
            return Err(fail(
                "channels".into(),
                "at least one channel is required".into(),
            ));
        }

        let mut site_index = HashMap::new();
        for (i, site) in spec.sites.iter().enumerate() {
            if site.id.is_empty() {
                return Err(fail(format!("sites[{i}].id"), "empty id".into()));
            }
            if !site.frequency.is_finite() {
                return Err(fail(
                    format!("sites[{i}].frequency"),
                    "must be finite".into(),
                ));
            }
            if site_index.insert(site.id.clone(), i).is_some() {
                return Err(fail(
                    format!("sites[{i}].id"),
                    format!("duplicate id `{}`", site.id),
                ));
            }
        }

        let lookup_site = |path: String, id: &str| -> Result<usize> {
            site_index
                .get(id)
                .copied()
                .ok_or_else(|| fail(path, format!("unknown site id `{id}`")))
        };

        let mut couplings = Vec::with_capacity(spec.couplings.len());
        for (i, c) in spec.couplings.iter().enumerate() {
            let si = lookup_site(format!("couplings[{i}].site_i"), &c.site_i)?;
            let sj = lookup_site(format!("couplings[{i}].site_j"), &c.site_j)?;
            if si == sj {
                return Err(fail(
                    format!("couplings[{i}]"),
                    "self-coupling is a frequency shift; fold it into the site frequency".into(),
                ));
            }
            if !c.amplitude.re.is_finite() || !c.amplitude.im.is_finite() {
                return Err(fail(
                    format!("couplings[{i}].amplitude"),
                    "must be finite".into(),
                ));
            }
            couplings.push(ResolvedCoupling {
                site_i: si,
                site_j: sj,
                amplitude: c.amplitude,
            });
        }

        let mut channel_index = HashMap::new();
        let mut channels = Vec::with_capacity(spec.channels.len());
        for (i, ch) in spec.channels.iter().enumerate() {
            if ch.id.is_empty() {
                return Err(fail(format!("channels[{i}].id"), "empty id".into()));
            }
            if channel_index.insert(ch.id.clone(), i).is_some() {
                return Err(fail(
                    format!("channels[{i}].id"),
                    format!("duplicate id `{}`", ch.id),
                ));
            }
            if ch.weights.is_empty() {
                return Err(fail(
                    format!("channels[{i}].weights"),
                    "a channel needs at least one site weight".into(),
                ));
            }
            let mut weights = Vec::with_capacity(ch.weights.len());
            let mut seen = HashSet::new();
            for (j, w) in ch.weights.iter().enumerate() {
                let s = lookup_site(format!("channels[{i}].weights[{j}].site"), &w.site)?;
                if !seen.insert(s) {
                    return Err(fail(
                        format!("channels[{i}].weights[{j}].site"),
                        format!("site `{}` listed twice in one channel", w.site),
                    ));
                }
                if !w.weight.re.is_finite() || !w.weight.im.is_finite() {
                    return Err(fail(
                        format!("channels[{i}].weights[{j}].weight"),
                        "must be finite".into(),
                    ));
                }
                weights.push((s, w.weight));
            }
            channels.push(ResolvedChannel {
                id: ch.id.clone(),
                weights,
                contributes_decay: ch.contributes_decay,
            });
        }

        let mut drives = Vec::with_capacity(spec.drives.len());
        for (i, d) in spec.drives.iter().enumerate() {
            let ch = channel_index.get(&d.channel).copied().ok_or_else(|| {
                fail(
                    format!("drives[{i}].channel"),
                    format!("unknown channel id `{}`", d.channel),
                )
            })?;
            if !d.frequency.is_finite() {
                return Err(fail(
                    format!("drives[{i}].frequency"),
                    "must be finite".into(),
                ));
            }
            if !d.relative_amplitude.re.is_finite() || !d.relative_amplitude.im.is_finite() {
                return Err(fail(
                    format!("drives[{i}].relative_amplitude"),
                    "must be finite".into(),
                ));
            }
            drives.push(ResolvedDrive {
                channel: ch,
                relative_amplitude: d.relative_amplitude,
                frequency: d.frequency,
            });
        }

        if spec.options.max_photons == 0 {
            return Err(fail(
                "options.max_photons".into(),
                "must be at least 1".into(),
            ));
        }
        if spec.options.term_guard == 0 {
            return Err(fail(
                "options.term_guard".into(),
                "must be at least 1".into(),
            ));
        }
        if let Some(eps) = spec.options.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(fail(
                    "options.epsilon".into(),
                    "must be finite and positive".into(),
                ));
            }
        }

        let u1 = validate_u1(&spec);
        if let Some(&(idx, net)) = u1.violations.first() {
            return Err(fail(
                format!("extra_terms[{idx}]"),
                format!("term changes the excitation number by {net}; only number-conserving terms are admissible"),
            ));
        }
        let mut extra_terms = Vec::with_capacity(spec.extra_terms.len());
        for (i, t) in spec.extra_terms.iter().enumerate() {
            let mut creators = Vec::new();
            let mut annihilators = Vec::new();
            for id in &t.creators {
                creators.push(lookup_site(format!("extra_terms[{i}].creators"), id)?);
            }
            for id in &t.annihilators {
                annihilators.push(lookup_site(format!("extra_terms[{i}].annihilators"), id)?);
            }
            extra_terms.push(ResolvedProductTerm {
                creators,
                annihilators,
                amplitude: t.amplitude,
                add_conjugate: t.add_conjugate,
            });
        }

        Ok(Arc::new(SystemModel {
            spec,
            site_index,
            channel_index,
            couplings,
            channels,
            drives,
            extra_terms,
        }))
    }

    /// Parse and validate a model from JSON text.
    pub fn from_json_str(json: &str) -> Result<Arc<SystemModel>> {
        let spec: ModelSpec = serde_json::from_str(json)?;
        SystemModel::from_spec(spec)
    }

    /// Load and validate a model from a JSON file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Arc<SystemModel>> {
        let text = std::fs::read_to_string(path)?;
        SystemModel::from_json_str(&text)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.spec.sites.len()
    }

    pub fn site(&self, idx: usize) -> &SiteSpec {
        &self.spec.sites[idx]
    }

    pub fn site_kind(&self, idx: usize) -> SiteKind {
        self.spec.sites[idx].kind
    }

    /// Maximum occupation of a site inside the `n`-excitation block.
    pub fn site_cap(&self, idx: usize, n: usize) -> u32 {
        match self.site_kind(idx) {
            SiteKind::Boson => n as u32,
            SiteKind::Qubit => 1.min(n) as u32,
        }
    }

    pub fn site_id_to_index(&self, id: &str) -> Result<usize> {
        self.site_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId {
                kind: "site",
                id: id.into(),
            })
    }

    pub fn channel_id_to_index(&self, id: &str) -> Result<usize> {
        self.channel_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId {
                kind: "channel",
                id: id.into(),
            })
    }

    pub fn couplings(&self) -> &[ResolvedCoupling] {
        &self.couplings
    }

    pub fn channels(&self) -> &[ResolvedChannel] {
        &self.channels
    }

    pub fn channel(&self, idx: usize) -> &ResolvedChannel {
        &self.channels[idx]
    }

    pub fn drives(&self) -> &[ResolvedDrive] {
        &self.drives
    }

    pub fn extra_terms(&self) -> &[ResolvedProductTerm] {
        &self.extra_terms
    }

    pub fn options(&self) -> &ModelOptions {
        &self.spec.options
    }

    /// The weight vector of a channel in canonical site order, by channel id.
    pub fn channel_lowering_coefficients(&self, channel_id: &str) -> Result<Vec<(usize, C64)>> {
        let idx = self.channel_id_to_index(channel_id)?;
        Ok(self.channels[idx].weights.clone())
    }

    /// Total decay rate `κ̃_k = Σ_ch |ξ_{ch,k}|²` collected by site.
    pub fn site_decay_rates(&self) -> Vec<f64> {
        let mut rates = vec![0.0; self.n_sites()];
        for ch in &self.channels {
            if !ch.contributes_decay {
                continue;
            }
            for &(site, w) in &ch.weights {
                rates[site] += w.norm_sqr();
            }
        }
        rates
    }

    /// Deterministic compact JSON encoding of the schema-visible part of the
    /// model (field order fixed by the struct definitions).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.spec).expect("model serialization cannot fail")
    }

    /// Pretty-printed JSON for export.
    pub fn to_json_pretty(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.spec).expect("model serialization cannot fail");
        s.push('\n');
        s
    }

    /// SHA-256 of the canonical JSON, hex-encoded. Recorded in CSV metadata so
    /// output files are traceable to the exact model that produced them.
    pub fn sha256_hex(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            let _ = write!(out, "{b:02x}");
        }
        out
    }
}

/// Geometry-derived pieces of a waveguide-mediated atom array.
///
/// For emitters at positions `x_j` with total single-atom decay rate `γ` into
/// a linear waveguide probed at wave number `k`, elimination of the guided
/// modes under the Markov approximation produces an exchange interaction with
/// a sine kernel and a collective two-channel decay with a cosine kernel.
#[derive(Debug, Clone)]
pub struct WaveguideParts {
    /// Upper-triangle coherent couplings `(i, j, (γ/2)·sin(k|x_i − x_j|))`.
    pub coherent_couplings: Vec<(usize, usize, f64)>,
    /// Right-mover channel weights `√(γ/2)·e^{−i k x_j}`.
    pub right_weights: Vec<C64>,
    /// Left-mover channel weights `√(γ/2)·e^{+i k x_j}`.
    pub left_weights: Vec<C64>,
    /// Collective decay kernel `γ·cos(k(x_i − x_j))`; equals
    /// `Σ_{ch} ξ_{ch,i} ξ_{ch,j}*` over the two channels.
    pub decay_matrix: Array2<f64>,
}

/// Build the waveguide-mediated couplings and the left/right decay channel
/// pair for emitters at `positions`.
pub fn waveguide_from_geometry(positions: &[f64], gamma: f64, k: f64) -> WaveguideParts {
    let n = positions.len();
    let mut coherent = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let amp = 0.5 * gamma * (k * (positions[i] - positions[j]).abs()).sin();
            coherent.push((i, j, amp));
        }
    }
    let half = (0.5 * gamma).sqrt();
    let right: Vec<C64> = positions
        .iter()
        .map(|&x| half * C64::from_polar(1.0, -k * x))
        .collect();
    let left: Vec<C64> = positions
        .iter()
        .map(|&x| half * C64::from_polar(1.0, k * x))
        .collect();
    let mut decay = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            decay[(i, j)] = gamma * (k * (positions[i] - positions[j])).cos();
        }
    }
    WaveguideParts {
        coherent_couplings: coherent,
        right_weights: right,
        left_weights: left,
        decay_matrix: decay,
    }
}
