//! Cached resolvent solves on excitation blocks.
//!
//! Every amplitude in the weak-drive expansion is a product of factors
//! `K(n, ω)⁻¹ = [−i (H_eff^(n) − (ω + iε) I)]⁻¹` applied to vectors, where
//! `H_eff^(n)` is the effective-Hamiltonian block on the `n`-excitation
//! subspace and `ε > 0` is a small positive shift keeping the inverse
//! well-defined at real resonances. The [`Engine`] owns one immutable model
//! and caches bases, operator blocks, and LU factorizations keyed by
//! `(n, ω)`, so sweeps that vary only drive parameters reuse every
//! factorization.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use ndarray::{Array1, Array2, OwnedRepr};
use ndarray_linalg::solve::LUFactorized;
use ndarray_linalg::{FactorizeInto, ReciprocalConditionNum, Solve};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::excitation::{enumerate_basis, h_sys_block_with, BlockMatrix, ExcitationBasis};
use crate::model::SystemModel;

/// Relative residual (after one refinement step) above which a resolvent
/// solve is rejected as numerically singular.
const RESIDUAL_LIMIT: f64 = 1e-8;

/// Reciprocal-condition-number floor below which a factorization is rejected.
const RCOND_FLOOR: f64 = 1e-13;

/// Default relative shift: `ε = EPSILON_SCALE · max(1, ‖H_eff^(n)‖_∞)`.
const EPSILON_SCALE: f64 = 1e-9;

/// LU factorization of the shifted block `H_eff^(n) − (ω + iε) I`, kept
/// together with the matrix itself (for residual checks) and its estimated
/// reciprocal condition number.
struct FactorizedShift {
    matrix: Array2<C64>,
    lu: LUFactorized<OwnedRepr<C64>>,
    rcond: f64,
}

/// Solver for one model: block construction, factorization caches, and the
/// resolvent application primitive used by all amplitude assembly.
///
/// The engine is `Send + Sync`; parallel sweeps share a single instance.
pub struct Engine {
    model: Arc<SystemModel>,
    bases: RwLock<HashMap<usize, Arc<ExcitationBasis>>>,
    channel_blocks: RwLock<HashMap<(usize, usize), Arc<BlockMatrix>>>,
    h_eff_blocks: RwLock<HashMap<usize, Arc<BlockMatrix>>>,
    shifts: RwLock<HashMap<(usize, u64), Arc<FactorizedShift>>>,
}

impl Engine {
    pub fn new(model: Arc<SystemModel>) -> Self {
        Self {
            model,
            bases: RwLock::new(HashMap::new()),
            channel_blocks: RwLock::new(HashMap::new()),
            h_eff_blocks: RwLock::new(HashMap::new()),
            shifts: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &Arc<SystemModel> {
        &self.model
    }

    /// Largest photon order the model allows.
    pub fn max_photons(&self) -> usize {
        self.model.options().max_photons
    }

    /// Cached basis of the `n`-excitation subspace.
    pub fn basis(&self, n: usize) -> Arc<ExcitationBasis> {
        if let Some(b) = self.bases.read().unwrap().get(&n) {
            return Arc::clone(b);
        }
        let built = Arc::new(enumerate_basis(&self.model, n));
        let mut guard = self.bases.write().unwrap();
        Arc::clone(guard.entry(n).or_insert(built))
    }

    /// Cached channel lowering block mapping excitation subspace `n` to
    /// `n−1`. Requires `n ≥ 1`.
    pub fn channel_block(&self, channel: usize, n: usize) -> Arc<BlockMatrix> {
        assert!(n >= 1, "lowering block requires n >= 1");
        let key = (channel, n);
        if let Some(b) = self.channel_blocks.read().unwrap().get(&key) {
            return Arc::clone(b);
        }
        let rows = self.basis(n - 1);
        let cols = self.basis(n);
        let built = Arc::new(crate::excitation::channel_lowering_block_with(
            &self.model,
            &rows,
            &cols,
            channel,
        ));
        let mut guard = self.channel_blocks.write().unwrap();
        Arc::clone(guard.entry(key).or_insert(built))
    }

    /// Cached effective-Hamiltonian block on the `n`-excitation subspace.
    pub fn h_eff(&self, n: usize) -> Arc<BlockMatrix> {
        if let Some(b) = self.h_eff_blocks.read().unwrap().get(&n) {
            return Arc::clone(b);
        }
        let basis = self.basis(n);
        let mut block = h_sys_block_with(&self.model, &basis);
        if n >= 1 {
            let half_i = C64::new(0.0, 0.5);
            for (ch_idx, ch) in self.model.channels().iter().enumerate() {
                if !ch.contributes_decay {
                    continue;
                }
                let b = self.channel_block(ch_idx, n);
                let bd = b.data.mapv(|z| z.conj()).reversed_axes();
                let prod = bd.dot(&b.data);
                block.data.zip_mut_with(&prod, |acc, &x| *acc -= half_i * x);
            }
        }
        let built = Arc::new(block);
        let mut guard = self.h_eff_blocks.write().unwrap();
        Arc::clone(guard.entry(n).or_insert(built))
    }

    /// Infinity norm (max absolute row sum) of `H_eff^(n)`.
    pub fn h_eff_norm(&self, n: usize) -> f64 {
        let h = self.h_eff(n);
        let mut best = 0.0f64;
        for row in h.data.rows() {
            let s: f64 = row.iter().map(|z| z.norm()).sum();
            best = best.max(s);
        }
        best
    }

    /// Positive shift used in the resolvent on block `n`: either the model's
    /// absolute override or `1e−9 · max(1, ‖H_eff^(n)‖_∞)`.
    pub fn epsilon(&self, n: usize) -> f64 {
        match self.model.options().epsilon {
            Some(e) => e,
            None => EPSILON_SCALE * self.h_eff_norm(n).max(1.0),
        }
    }

    fn shift(&self, n: usize, omega: f64) -> Result<Arc<FactorizedShift>> {
        let key = (n, omega.to_bits());
        if let Some(s) = self.shifts.read().unwrap().get(&key) {
            return Ok(Arc::clone(s));
        }
        let h = self.h_eff(n);
        let dim = h.data.nrows();
        let z = C64::new(omega, self.epsilon(n));
        let mut matrix = h.data.clone();
        for i in 0..dim {
            matrix[(i, i)] -= z;
        }
        let lu = matrix.clone().factorize_into()?;
        let rcond = lu.rcond()?;
        if !(rcond >= RCOND_FLOOR) {
            return Err(Error::SingularResolvent { n, omega, rcond });
        }
        let built = Arc::new(FactorizedShift { matrix, lu, rcond });
        let mut guard = self.shifts.write().unwrap();
        Ok(Arc::clone(guard.entry(key).or_insert(built)))
    }

    /// Apply the resolvent: solve `K(n, ω) x = rhs` with
    /// `K = −i (H_eff^(n) − (ω + iε) I)`, including a residual check with one
    /// step of iterative refinement.
    pub fn resolvent_apply(&self, n: usize, omega: f64, rhs: &Array1<C64>) -> Result<Array1<C64>> {
        if rhs.is_empty() {
            return Ok(Array1::zeros(0));
        }
        let shift = self.shift(n, omega)?;
        let mut x = shift.lu.solve(rhs)?;
        let rhs_norm = rhs
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let residual = |x: &Array1<C64>| -> (Array1<C64>, f64) {
            let r = rhs - &shift.matrix.dot(x);
            let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (r, rn / rhs_norm)
        };
        let (r, mut rel) = residual(&x);
        if rel > 1e-13 {
            let dx = shift.lu.solve(&r)?;
            x += &dx;
            rel = residual(&x).1;
        }
        if rel > RESIDUAL_LIMIT {
            return Err(Error::SingularResolvent {
                n,
                omega,
                rcond: shift.rcond,
            });
        }
        // K⁻¹ = i (H_eff − ω − iε)⁻¹.
        Ok(x.mapv(|v| C64::new(0.0, 1.0) * v))
    }

    /// Estimated reciprocal condition number of the shifted block used by
    /// `resolvent_apply(n, ω, ·)`.
    pub fn resolvent_rcond(&self, n: usize, omega: f64) -> Result<f64> {
        Ok(self.shift(n, omega)?.rcond)
    }

    /// Apply the raising block of a channel: `B_ch(n)† v`, mapping the
    /// `(n−1)`-excitation subspace into the `n`-excitation subspace.
    pub fn raise_channel(&self, channel: usize, n: usize, v: &Array1<C64>) -> Array1<C64> {
        let b = self.channel_block(channel, n);
        b.data.mapv(|z| z.conj()).reversed_axes().dot(v)
    }

    /// Advance a forward row vector through a channel lowering block:
    /// returns `w · B_ch(n)` (plain transpose product, no conjugation),
    /// mapping row representations from the `(n−1)` to the `n` subspace.
    pub fn lower_channel_row(&self, channel: usize, n: usize, w: &Array1<C64>) -> Array1<C64> {
        let b = self.channel_block(channel, n);
        b.data.t().dot(w)
    }
}
