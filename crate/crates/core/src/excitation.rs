//! Excitation-number blocks: basis enumeration and block operators.
//!
//! Because every Hamiltonian term conserves total excitation number, each
//! `n`-excitation subspace is finite-dimensional (bosonic occupations are
//! bounded by `n` itself) and all operators decompose into blocks between
//! adjacent subspaces. Lowering operators map the `n`-excitation subspace to
//! the `(n−1)`-excitation subspace; the effective Hamiltonian
//! `H_eff = H_sys − (i/2) Σ_ch o_ch† o_ch` is block-diagonal.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::model::SystemModel;

/// Orthonormal occupation basis of one excitation block.
#[derive(Debug)]
pub struct ExcitationBasis {
    n: usize,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl ExcitationBasis {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn index_of(&self, occupations: &[u32]) -> Option<usize> {
        self.index.get(occupations).copied()
    }
}

/// Enumerate all occupation states with total excitation number `n`,
/// respecting per-site caps (qubits hold at most one excitation). States are
/// ordered lexicographically descending in canonical site order, so the
/// fully-left-loaded state comes first; for a cavity+atom pair this yields
/// `{|n, g⟩, |n−1, e⟩}`.
pub fn enumerate_basis(model: &SystemModel, n: usize) -> ExcitationBasis {
    let n_sites = model.n_sites();
    let caps: Vec<u32> = (0..n_sites).map(|k| model.site_cap(k, n)).collect();
    let mut states = Vec::new();
    let mut acc = vec![0u32; n_sites];

    fn rec(site: usize, remaining: u32, caps: &[u32], acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if site == caps.len() {
            if remaining == 0 {
                out.push(acc.clone());
            }
            return;
        }
        // Highest occupation first gives lexicographic-descending output.
        let hi = caps[site].min(remaining);
        for occ in (0..=hi).rev() {
            acc[site] = occ;
            rec(site + 1, remaining - occ, caps, acc, out);
        }
        acc[site] = 0;
    }
    rec(0, n as u32, &caps, &mut acc, &mut states);

    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    ExcitationBasis { n, states, index }
}

/// A dense operator block between two excitation bases.
#[derive(Debug)]
pub struct BlockMatrix {
    pub rows: Arc<ExcitationBasis>,
    pub cols: Arc<ExcitationBasis>,
    pub data: Array2<C64>,
}

impl BlockMatrix {
    /// Dump the block as `row,col,re,im` CSV lines (all entries, including
    /// zeros) for debugging and external inspection.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "row,col,re,im")?;
        for ((i, j), z) in self.data.indexed_iter() {
            writeln!(out, "{i},{j},{:.17e},{:.17e}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// Lowering-operator block `⟨n−1|o_site|n⟩` between two given bases.
pub fn site_lowering_block_with(
    rows: &Arc<ExcitationBasis>,
    cols: &Arc<ExcitationBasis>,
    site: usize,
) -> BlockMatrix {
    let mut data = Array2::zeros((rows.dim(), cols.dim()));
    let mut scratch: Vec<u32> = Vec::new();
    for (c, state) in cols.states().iter().enumerate() {
        let occ = state[site];
        if occ == 0 {
            continue;
        }
        scratch.clear();
        scratch.extend_from_slice(state);
        scratch[site] -= 1;
        let r = rows
            .index_of(&scratch)
            .expect("lowered state must exist in the (n-1)-excitation basis");
        data[(r, c)] = C64::new(f64::from(occ).sqrt(), 0.0);
    }
    BlockMatrix {
        rows: Arc::clone(rows),
        cols: Arc::clone(cols),
        data,
    }
}

/// Lowering-operator block of one site, mapping the `n`-excitation subspace
/// to the `(n−1)`-excitation subspace.
pub fn site_lowering_block(model: &SystemModel, site: usize, n: usize) -> BlockMatrix {
    assert!(n >= 1, "lowering block requires n >= 1");
    let rows = Arc::new(enumerate_basis(model, n - 1));
    let cols = Arc::new(enumerate_basis(model, n));
    site_lowering_block_with(&rows, &cols, site)
}

/// Channel lowering block `Σ_k ξ_k ⟨n−1|o_k|n⟩` between two given bases.
pub fn channel_lowering_block_with(
    model: &SystemModel,
    rows: &Arc<ExcitationBasis>,
    cols: &Arc<ExcitationBasis>,
    channel: usize,
) -> BlockMatrix {
    let mut data: Array2<C64> = Array2::zeros((rows.dim(), cols.dim()));
    for &(site, weight) in &model.channel(channel).weights {
        let b = site_lowering_block_with(rows, cols, site);
        data.zip_mut_with(&b.data, |acc, &x| *acc += weight * x);
    }
    BlockMatrix {
        rows: Arc::clone(rows),
        cols: Arc::clone(cols),
        data,
    }
}

/// Channel lowering block mapping excitation subspace `n` to `n−1`.
pub fn channel_lowering_block(model: &SystemModel, channel: usize, n: usize) -> BlockMatrix {
    assert!(n >= 1, "lowering block requires n >= 1");
    let rows = Arc::new(enumerate_basis(model, n - 1));
    let cols = Arc::new(enumerate_basis(model, n));
    channel_lowering_block_with(model, &rows, &cols, channel)
}

/// Apply a normally-ordered product term to every basis state and accumulate
/// its matrix elements into `data`.
fn apply_product_term(
    basis: &ExcitationBasis,
    caps: &[u32],
    amplitude: C64,
    creators: &[usize],
    annihilators: &[usize],
    data: &mut Array2<C64>,
) {
    let mut scratch: Vec<u32> = Vec::new();
    'cols: for (c, state) in basis.states().iter().enumerate() {
        scratch.clear();
        scratch.extend_from_slice(state);
        let mut factor = 1.0f64;
        for &site in annihilators {
            if scratch[site] == 0 {
                continue 'cols;
            }
            factor *= f64::from(scratch[site]).sqrt();
            scratch[site] -= 1;
        }
        for &site in creators {
            if scratch[site] >= caps[site] {
                continue 'cols;
            }
            scratch[site] += 1;
            factor *= f64::from(scratch[site]).sqrt();
        }
        let r = basis
            .index_of(&scratch)
            .expect("number-conserving term must stay inside the block");
        data[(r, c)] += amplitude * factor;
    }
}

/// Hermitian system-Hamiltonian block on the `n`-excitation subspace: on-site
/// frequencies, swap couplings, and any number-conserving product terms.
pub fn h_sys_block_with(model: &SystemModel, basis: &Arc<ExcitationBasis>) -> BlockMatrix {
    let n = basis.n();
    let n_sites = model.n_sites();
    let caps: Vec<u32> = (0..n_sites).map(|k| model.site_cap(k, n)).collect();
    let mut data: Array2<C64> = Array2::zeros((basis.dim(), basis.dim()));

    for (i, state) in basis.states().iter().enumerate() {
        let diag: f64 = state
            .iter()
            .zip(0..n_sites)
            .map(|(&occ, k)| f64::from(occ) * model.site(k).frequency)
            .sum();
        data[(i, i)] = C64::new(diag, 0.0);
    }

    for coupling in model.couplings() {
        let pairs = [
            (coupling.site_i, coupling.site_j, coupling.amplitude),
            (coupling.site_j, coupling.site_i, coupling.amplitude.conj()),
        ];
        for (raise, lower, amp) in pairs {
            apply_product_term(basis, &caps, amp, &[raise], &[lower], &mut data);
        }
    }

    for term in model.extra_terms() {
        apply_product_term(
            basis,
            &caps,
            term.amplitude,
            &term.creators,
            &term.annihilators,
            &mut data,
        );
        if term.add_conjugate {
            apply_product_term(
                basis,
                &caps,
                term.amplitude.conj(),
                &term.annihilators,
                &term.creators,
                &mut data,
            );
        }
    }

    BlockMatrix {
        rows: Arc::clone(basis),
        cols: Arc::clone(basis),
        data,
    }
}

/// Hermitian system-Hamiltonian block on the `n`-excitation subspace.
pub fn h_sys_block(model: &SystemModel, n: usize) -> BlockMatrix {
    let basis = Arc::new(enumerate_basis(model, n));
    h_sys_block_with(model, &basis)
}

/// Effective-Hamiltonian block
/// `H_eff^(n) = H_sys^(n) − (i/2) Σ_ch (O_ch)† O_ch`, where `O_ch` is the
/// channel lowering block out of the `n`-excitation subspace. The sum runs
/// over decay-contributing channels only.
pub fn h_eff_block_with(
    model: &SystemModel,
    basis: &Arc<ExcitationBasis>,
    lower_basis: &Arc<ExcitationBasis>,
) -> BlockMatrix {
    let mut block = h_sys_block_with(model, basis);
    let half_i = C64::new(0.0, 0.5);
    for (ch_idx, ch) in model.channels().iter().enumerate() {
        if !ch.contributes_decay {
            continue;
        }
        let b = channel_lowering_block_with(model, lower_basis, basis, ch_idx);
        // (O†O) via the conjugate-transpose product; keeps the anti-Hermitian
        // part exactly positive semidefinite.
        let bd = b.data.mapv(|z| z.conj()).reversed_axes();
        let prod = bd.dot(&b.data);
        block.data.zip_mut_with(&prod, |acc, &x| *acc -= half_i * x);
    }
    block
}

/// Effective-Hamiltonian block on the `n`-excitation subspace.
pub fn h_eff_block(model: &SystemModel, n: usize) -> BlockMatrix {
    let basis = Arc::new(enumerate_basis(model, n));
    let lower = Arc::new(enumerate_basis(model, n.saturating_sub(1)));
    if n == 0 {
        // Vacuum block: no decay, bare energy zero.
        return h_sys_block_with(model, &basis);
    }
    h_eff_block_with(model, &basis, &lower)
}
