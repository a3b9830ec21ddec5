//! Brute-force Lindblad master-equation oracle.
//!
//! This module validates the analytic amplitude pipeline from the opposite
//! direction: truncate the bosonic sites at a finite Fock cutoff, build the
//! full density-matrix equation of motion
//!
//! ```text
//! ρ̇ = −i[H + H_drive, ρ] + Σ_ch ( L ρ L† − ½{L†L, ρ} ) ,
//! ```
//!
//! and read correlators directly off the (periodic) steady state. Except for
//! the shared model description, nothing here is reused from the analytic
//! path: states are enumerated differently, operators are dense matrices on
//! the truncated product space, and the solvers are a direct null-space solve
//! and an adaptive Runge–Kutta integrator.
//!
//! # Weak-drive conditioning
//!
//! At drive strength Ω the steady state is graded: the coherence between
//! states with `n_i` and `n_j` total excitations scales as `Ω^{n_i+n_j}`, so
//! the interesting two-photon components sit ~12 orders below the vacuum
//! population at Ω = 10⁻³. A direct solve in that representation loses them
//! to roundoff. [`LindbladOracle::steady_state`] therefore conjugates the
//! Liouvillian by the diagonal grading `ρ_ij ↦ ρ_ij / Ω^{n_i+n_j}` — an exact
//! similarity transformation that makes every sought component O(1) — solves
//! the trace-normalized linear system there, and transforms back.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use ndarray_linalg::solve::LUFactorized;
use ndarray_linalg::{EigValsh, FactorizeInto, ReciprocalConditionNum, Solve, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{SiteKind, SystemModel};

/// Truncation of the bosonic sites (qubits are always capped at one).
///
/// `total` optionally caps the *total* excitation number across all sites,
/// which is the natural truncation in the weak-drive regime: amplitudes fall
/// off as `Ω^n`, so states above the cap contribute at relative order
/// `Ω^{2(total+1−n)}` to an `n`-photon correlator. Without the total cap,
/// `per_boson` should exceed the correlator order by a safety margin of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockCutoff {
    pub per_boson: usize,
    pub total: Option<usize>,
}

impl FockCutoff {
    pub fn per_site(per_boson: usize) -> Self {
        FockCutoff {
            per_boson,
            total: None,
        }
    }

    pub fn total(per_boson: usize, total: usize) -> Self {
        FockCutoff {
            per_boson,
            total: Some(total),
        }
    }
}

/// One coherent tone driving a channel of the model: the drive Hamiltonian is
/// `A·L†_ch e^{−iω t} + h.c.` in the lab frame, with `L_ch = Σ ξ_i o_i` the
/// channel operator. `|A|·‖ξ_ch‖` plays the role of the Rabi strength Ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleDrive {
    pub channel: usize,
    pub amplitude: C64,
    pub frequency: f64,
}

/// Operator selectors for correlator evaluation on oracle states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorSpec {
    /// Bare lowering operator of one site.
    Site(usize),
    /// Weighted channel operator `Σ ξ_i o_i`.
    Channel(usize),
    /// Output field of a driven channel, `A·1 − i·L_ch`: the transmitted
    /// drive interfering with the re-emitted field.
    OutputField { channel: usize, amplitude: C64 },
}

/// Dense steady (or evolved) state with solution diagnostics.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub rho: Array2<C64>,
    /// Max-norm of the graded equation-of-motion residual.
    pub residual: f64,
    /// Total population on cutoff-boundary states.
    pub boundary_population: f64,
}

/// Population threshold above which the truncation is considered saturated.
const SATURATION_LIMIT: f64 = 1e-8;

/// Steady-state residual ceiling (in the graded representation).
const RESIDUAL_LIMIT: f64 = 1e-10;

/// Reciprocal-condition floor; below it the null space is presumed
/// degenerate (multiple steady states).
const DEGENERACY_FLOOR: f64 = 1e-12;

/// Threshold for correlator denominators.
const DENOMINATOR_FLOOR: f64 = 1e-30;

pub struct LindbladOracle {
    model: Arc<SystemModel>,
    cutoff: FockCutoff,
    states: Vec<Vec<u32>>,
    excitations: Vec<u32>,
    vacuum: usize,
    boundary: Vec<bool>,
    lowering: Vec<Array2<C64>>,
}

impl LindbladOracle {
    pub fn new(model: Arc<SystemModel>, cutoff: FockCutoff) -> Result<Self> {
        if cutoff.per_boson == 0 {
            return Err(Error::InvalidArgument(
                "Fock cutoff must be at least 1".into(),
            ));
        }
        if let Some(t) = cutoff.total {
            if t == 0 {
                return Err(Error::InvalidArgument(
                    "total excitation cap must be at least 1".into(),
                ));
            }
        }
        let n_sites = model.n_sites();
        let caps: Vec<u32> = (0..n_sites)
            .map(|k| match model.site(k).kind {
                SiteKind::Boson => cutoff.per_boson as u32,
                SiteKind::Qubit => 1,
            })
            .collect();

        // Plain mixed-radix odometer (last site fastest), filtered by the
        // total cap — deliberately a different enumeration scheme than the
        // analytic path uses.
        let mut states: Vec<Vec<u32>> = Vec::new();
        let mut current = vec![0u32; n_sites];
        'odometer: loop {
            let total: u32 = current.iter().sum();
            if cutoff.total.map_or(true, |t| total <= t as u32) {
                states.push(current.clone());
            }
            for k in (0..n_sites).rev() {
                if current[k] < caps[k] {
                    current[k] += 1;
                    continue 'odometer;
                }
                current[k] = 0;
            }
            break;
        }

        let excitations: Vec<u32> = states.iter().map(|s| s.iter().sum()).collect();
        let vacuum = excitations
            .iter()
            .position(|&n| n == 0)
            .expect("vacuum state present in any truncation");
        let boundary: Vec<bool> = states
            .iter()
            .zip(&excitations)
            .map(|(s, &n)| {
                let total_hit = cutoff.total.map_or(false, |t| n == t as u32);
                let site_hit = s
                    .iter()
                    .zip(&caps)
                    .zip(0..n_sites)
                    .any(|((&occ, &cap), k)| {
                        matches!(model.site(k).kind, SiteKind::Boson) && occ == cap
                    });
                total_hit || site_hit
            })
            .collect();

        let dim = states.len();
        let index: std::collections::HashMap<&[u32], usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_slice(), i))
            .collect();
        let mut lowering = Vec::with_capacity(n_sites);
        let mut scratch: Vec<u32> = Vec::new();
        for k in 0..n_sites {
            let mut op: Array2<C64> = Array2::zeros((dim, dim));
            for (c, s) in states.iter().enumerate() {
                if s[k] == 0 {
                    continue;
                }
                scratch.clear();
                scratch.extend_from_slice(s);
                scratch[k] -= 1;
                if let Some(&r) = index.get(scratch.as_slice()) {
                    op[(r, c)] = C64::new(f64::from(s[k]).sqrt(), 0.0);
                }
            }
            lowering.push(op);
        }

        Ok(LindbladOracle {
            model,
            cutoff,
            states,
            excitations,
            vacuum,
            boundary,
            lowering,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.cutoff
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    /// Channel operator `L_ch = Σ ξ_i o_i` on the truncated space.
    fn channel_operator(&self, channel: usize) -> Array2<C64> {
        let dim = self.dim();
        let mut op: Array2<C64> = Array2::zeros((dim, dim));
        for &(site, weight) in &self.model.channel(channel).weights {
            op.zip_mut_with(&self.lowering[site], |acc, &x| *acc += weight * x);
        }
        op
    }

    fn dissipators(&self) -> Vec<Array2<C64>> {
        (0..self.model.channels().len())
            .filter(|&ch| self.model.channel(ch).contributes_decay)
            .map(|ch| self.channel_operator(ch))
            .collect()
    }

    /// System Hamiltonian in a frame rotating at `frame`, without drives.
    fn hamiltonian_rotating(&self, frame: f64) -> Array2<C64> {
        let dim = self.dim();
        let mut h: Array2<C64> = Array2::zeros((dim, dim));
        for (i, s) in self.states.iter().enumerate() {
            let e: f64 = s
                .iter()
                .zip(0..self.model.n_sites())
                .map(|(&occ, k)| f64::from(occ) * (self.model.site(k).frequency - frame))
                .sum();
            h[(i, i)] = C64::new(e, 0.0);
        }
        for coupling in self.model.couplings() {
            let raise = self.lowering[coupling.site_i]
                .mapv(|z| z.conj())
                .reversed_axes();
            let hop = raise.dot(&self.lowering[coupling.site_j]);
            h.zip_mut_with(&hop, |acc, &x| *acc += coupling.amplitude * x);
            let hop_dag = hop.mapv(|z| z.conj()).reversed_axes();
            h.zip_mut_with(&hop_dag, |acc, &x| *acc += coupling.amplitude.conj() * x);
        }
        for term in self.model.extra_terms() {
            let dim_eye = Array2::from_diag(&Array1::from_elem(dim, C64::new(1.0, 0.0)));
            let mut op = dim_eye;
            for &site in term.annihilators.iter().rev() {
                op = self.lowering[site].dot(&op);
            }
            for &site in term.creators.iter().rev() {
                let raise = self.lowering[site].mapv(|z| z.conj()).reversed_axes();
                op = raise.dot(&op);
            }
            h.zip_mut_with(&op, |acc, &x| *acc += term.amplitude * x);
            if term.add_conjugate {
                let op_dag = op.mapv(|z| z.conj()).reversed_axes();
                h.zip_mut_with(&op_dag, |acc, &x| *acc += term.amplitude.conj() * x);
            }
        }
        h
    }

    /// Static drive Hamiltonian `Σ_j (A_j L†_j + A*_j L_j)` (rotating frame
    /// absorbs the tone phases only when all frequencies are equal).
    fn drive_hamiltonian(&self, drives: &[OracleDrive]) -> Array2<C64> {
        let dim = self.dim();
        let mut h: Array2<C64> = Array2::zeros((dim, dim));
        for drive in drives {
            let l = self.channel_operator(drive.channel);
            let l_dag = l.mapv(|z| z.conj()).reversed_axes();
            h.zip_mut_with(&l_dag, |acc, &x| *acc += drive.amplitude * x);
            h.zip_mut_with(&l, |acc, &x| *acc += drive.amplitude.conj() * x);
        }
        h
    }

    /// Equation-of-motion right-hand side in matrix form.
    fn rhs(&self, h: &Array2<C64>, dissipators: &[Array2<C64>], rho: &Array2<C64>) -> Array2<C64> {
        let mi = C64::new(0.0, -1.0);
        let mut out = (h.dot(rho) - rho.dot(h)).mapv(|z| mi * z);
        for l in dissipators {
            let l_dag = l.mapv(|z| z.conj()).reversed_axes();
            let ldl = l_dag.dot(l);
            out += &l.dot(rho).dot(&l_dag);
            let anti = ldl.dot(rho) + rho.dot(&ldl);
            out.zip_mut_with(&anti, |acc, &x| *acc -= 0.5 * x);
        }
        out
    }

    /// Effective drive strength used as the grading base.
    fn grading_scale(&self, drives: &[OracleDrive]) -> f64 {
        drives
            .iter()
            .map(|d| {
                let norm: f64 = self
                    .model
                    .channel(d.channel)
                    .weights
                    .iter()
                    .map(|&(_, w)| w.norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                d.amplitude.norm() * norm
            })
            .fold(0.0, f64::max)
    }

    fn vacuum_projector(&self) -> Array2<C64> {
        let dim = self.dim();
        let mut rho: Array2<C64> = Array2::zeros((dim, dim));
        rho[(self.vacuum, self.vacuum)] = C64::new(1.0, 0.0);
        rho
    }

    fn boundary_population(&self, rho: &Array2<C64>) -> f64 {
        self.boundary
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b)
            .map(|(i, _)| rho[(i, i)].re)
            .sum()
    }

    fn check_saturation(&self, rho: &Array2<C64>) -> Result<f64> {
        let population = self.boundary_population(rho);
        if population > SATURATION_LIMIT {
            return Err(Error::CutoffSaturated {
                population,
                limit: SATURATION_LIMIT,
            });
        }
        Ok(population)
    }

    /// Steady state of the driven master equation. All tones must share one
    /// frequency so that a rotating frame removes the time dependence.
    ///
    /// The solve happens in the graded representation (see the module docs),
    /// with the trace condition replacing the vacuum-population row of the
    /// singular Liouvillian; the result is checked for residual, positivity,
    /// Hermiticity, and cutoff saturation.
    pub fn steady_state(&self, drives: &[OracleDrive]) -> Result<DensityMatrix> {
        if let Some(first) = drives.first() {
            if drives.iter().any(|d| d.frequency != first.frequency) {
                return Err(Error::UnequalDriveFrequencies);
            }
        }
        let frame = drives.first().map_or(0.0, |d| d.frequency);
        let h = {
            let mut h = self.hamiltonian_rotating(frame);
            h += &self.drive_hamiltonian(drives);
            h
        };
        let dissipators = self.dissipators();
        let scale = self.grading_scale(drives);
        if scale == 0.0 {
            // Undriven: the steady state is the vacuum projector whenever
            // every site can decay; verify rather than assume.
            let rho = self.vacuum_projector();
            let residual = self
                .rhs(&h, &dissipators, &rho)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if residual > RESIDUAL_LIMIT {
                return Err(Error::SteadyState(format!(
                    "undriven model has no vacuum steady state (residual {residual:.3e})"
                )));
            }
            return Ok(DensityMatrix {
                rho,
                residual,
                boundary_population: 0.0,
            });
        }

        let dim = self.dim();
        let sup_dim = dim * dim;
        // Column-stacked vectorization: index(i, j) = j·dim + i represents
        // ρ_ij; vec(AρB) = (Bᵀ ⊗ A) vec(ρ).
        let mut sup: Array2<C64> = Array2::zeros((sup_dim, sup_dim));
        let eye = Array2::from_diag(&Array1::from_elem(dim, C64::new(1.0, 0.0)));
        let mi = C64::new(0.0, -1.0);
        add_kron(&mut sup, &eye, &h, mi);
        add_kron(&mut sup, &h.t().to_owned(), &eye, -mi);
        for l in &dissipators {
            let l_conj = l.mapv(|z| z.conj());
            let ldl = l_conj.t().dot(l);
            add_kron(&mut sup, &l_conj, l, C64::new(1.0, 0.0));
            add_kron(&mut sup, &eye, &ldl, C64::new(-0.5, 0.0));
            add_kron(&mut sup, &ldl.t().to_owned(), &eye, C64::new(-0.5, 0.0));
        }

        // Exact similarity by the grading weights Ω^(n_i+n_j).
        let weights: Vec<f64> = {
            let mut w = vec![0.0; sup_dim];
            for j in 0..dim {
                for i in 0..dim {
                    w[j * dim + i] = scale.powi((self.excitations[i] + self.excitations[j]) as i32);
                }
            }
            w
        };
        for r in 0..sup_dim {
            for c in 0..sup_dim {
                let f = weights[c] / weights[r];
                sup[(r, c)] *= f;
            }
        }

        // Replace the vacuum-diagonal row by the (graded) trace condition.
        let trace_row = self.vacuum * dim + self.vacuum;
        for c in 0..sup_dim {
            sup[(trace_row, c)] = C64::new(0.0, 0.0);
        }
        for i in 0..dim {
            sup[(trace_row, i * dim + i)] = C64::new(weights[i * dim + i], 0.0);
        }
        let mut rhs_vec: Array1<C64> = Array1::zeros(sup_dim);
        rhs_vec[trace_row] = C64::new(1.0, 0.0);

        let lu: LUFactorized<_> = sup
            .factorize_into()
            .map_err(|_| Error::DegenerateSteadyState { dim: sup_dim })?;
        let rcond = lu.rcond()?;
        if !(rcond >= DEGENERACY_FLOOR) {
            return Err(Error::DegenerateSteadyState { dim: sup_dim });
        }
        let solution = lu.solve(&rhs_vec)?;

        // Back to the physical representation.
        let mut rho: Array2<C64> = Array2::zeros((dim, dim));
        for j in 0..dim {
            for i in 0..dim {
                rho[(i, j)] = solution[j * dim + i] * weights[j * dim + i];
            }
        }
        let herm_defect = {
            let rho_dag = rho.mapv(|z| z.conj()).reversed_axes();
            (&rho - &rho_dag)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max)
        };
        if herm_defect > 1e-10 {
            return Err(Error::SteadyState(format!(
                "steady state lost Hermiticity (defect {herm_defect:.3e})"
            )));
        }
        let rho_dag = rho.mapv(|z| z.conj()).reversed_axes();
        rho = (&rho + &rho_dag).mapv(|z| 0.5 * z);
        let trace: f64 = (0..dim).map(|i| rho[(i, i)].re).sum();
        if (trace - 1.0).abs() > 1e-8 {
            return Err(Error::SteadyState(format!(
                "trace defect {:.3e}",
                trace - 1.0
            )));
        }
        rho.mapv_inplace(|z| z / trace);

        // Graded residual of the full equation of motion (the replaced trace
        // row included, since ρ̇ must vanish row-wise).
        let dot = self.rhs(&h, &dissipators, &rho);
        let mut residual = 0.0f64;
        for j in 0..dim {
            for i in 0..dim {
                residual = residual.max(dot[(i, j)].norm() / weights[j * dim + i]);
            }
        }
        if residual > RESIDUAL_LIMIT {
            return Err(Error::SteadyState(format!(
                "steady-state residual {residual:.3e} exceeds {RESIDUAL_LIMIT:.0e}"
            )));
        }

        let eigs = rho.eigvalsh(UPLO::Lower)?;
        if eigs.iter().any(|&e| e < -1e-10) {
            return Err(Error::SteadyState(format!(
                "steady state not positive semidefinite (min eigenvalue {:.3e})",
                eigs.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }

        let boundary_population = self.check_saturation(&rho)?;
        Ok(DensityMatrix {
            rho,
            residual,
            boundary_population,
        })
    }

    /// Integrate the (generally time-dependent) master equation from `rho0`
    /// at `t = 0` through the increasing sample times in `t_grid`, in a frame
    /// rotating at `frame`. Tones detuned from `frame` keep explicit
    /// `e^{−i(ω_j−frame)t}` phases.
    ///
    /// Uses an adaptive Dormand–Prince 5(4) pair with per-element tolerance
    /// `atol + rtol·|ρ_ij|`.
    pub fn evolve(
        &self,
        drives: &[OracleDrive],
        frame: f64,
        rho0: &Array2<C64>,
        t_grid: &[f64],
        rtol: f64,
        atol: f64,
    ) -> Result<Vec<DensityMatrix>> {
        if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid.first().map_or(true, |&t| t < 0.0) {
            return Err(Error::InvalidArgument(
                "evolution sample times must be non-negative and strictly increasing".into(),
            ));
        }
        let h_static = self.hamiltonian_rotating(frame);
        let dissipators = self.dissipators();
        let tone_ops: Vec<(Array2<C64>, C64, f64)> = drives
            .iter()
            .map(|d| {
                let l = self.channel_operator(d.channel);
                let l_dag = l.mapv(|z| z.conj()).reversed_axes();
                (l_dag, d.amplitude, d.frequency - frame)
            })
            .collect();
        let h_at = |t: f64| -> Array2<C64> {
            let mut h = h_static.clone();
            for (l_dag, amp, delta) in &tone_ops {
                let phase = amp * C64::from_polar(1.0, -delta * t);
                h.zip_mut_with(l_dag, |acc, &x| *acc += phase * x);
                let l = l_dag.mapv(|z| z.conj()).reversed_axes();
                h.zip_mut_with(&l, |acc, &x| *acc += phase.conj() * x);
            }
            h
        };
        let f = |t: f64, rho: &Array2<C64>| self.rhs(&h_at(t), &dissipators, rho);

        // Dormand–Prince 5(4) tableau.
        const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
        const A: [[f64; 6]; 7] = [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        // Fifth-order weights are the last A row (FSAL); error weights are
        // the difference to the embedded fourth-order solution.
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];

        let mut t = 0.0f64;
        let mut y = rho0.clone();
        let mut k: Vec<Array2<C64>> = vec![Array2::zeros(y.raw_dim()); 7];
        k[0] = f(t, &y);
        let mut dt = 1e-3f64;
        let mut out = Vec::with_capacity(t_grid.len());
        let mut steps = 0usize;
        const MAX_STEPS: usize = 20_000_000;

        for &t_target in t_grid {
            while t < t_target {
                if steps > MAX_STEPS {
                    return Err(Error::Integration(format!(
                        "step budget exhausted at t = {t:.6} (target {t_target:.6})"
                    )));
                }
                steps += 1;
                let h_step = dt.min(t_target - t);
                for stage in 1..7 {
                    let mut arg = y.clone();
                    for (j, kj) in k.iter().enumerate().take(stage) {
                        let a = A[stage][j];
                        if a != 0.0 {
                            arg.zip_mut_with(kj, |acc, &x| *acc += h_step * a * x);
                        }
                    }
                    k[stage] = f(t + C[stage] * h_step, &arg);
                }
                // k[6] is f at the fifth-order solution (FSAL).
                let y_new = {
                    let mut acc = y.clone();
                    for (j, kj) in k.iter().enumerate().take(6) {
                        let a = A[6][j];
                        if a != 0.0 {
                            acc.zip_mut_with(kj, |v, &x| *v += h_step * a * x);
                        }
                    }
                    acc
                };
                let mut err = 0.0f64;
                {
                    let mut e_acc: Array2<C64> = Array2::zeros(y.raw_dim());
                    for (j, kj) in k.iter().enumerate() {
                        if E[j] != 0.0 {
                            e_acc.zip_mut_with(kj, |v, &x| *v += h_step * E[j] * x);
                        }
                    }
                    for ((idx, e), &yv) in e_acc.indexed_iter().zip(y_new.iter()) {
                        let scale = atol + rtol * yv.norm().max(y[idx].norm());
                        err = err.max(e.norm() / scale);
                    }
                }
                if err <= 1.0 {
                    t += h_step;
                    y = y_new;
                    k[0] = f(t, &y);
                }
                let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
                dt = (h_step * factor.clamp(0.2, 5.0)).max(1e-12);
            }
            let boundary_population = self.check_saturation(&y)?;
            let trace: f64 = (0..self.dim()).map(|i| y[(i, i)].re).sum();
            if (trace - 1.0).abs() > 1e-8 {
                return Err(Error::Integration(format!(
                    "trace drifted to 1{:+.3e} at t = {t:.6}",
                    trace - 1.0
                )));
            }
            out.push(DensityMatrix {
                rho: y.clone(),
                residual: f64::NAN,
                boundary_population,
            });
        }
        Ok(out)
    }

    /// Materialize an operator selector as a dense matrix.
    pub fn operator(&self, spec: OperatorSpec) -> Array2<C64> {
        match spec {
            OperatorSpec::Site(site) => self.lowering[site].clone(),
            OperatorSpec::Channel(channel) => self.channel_operator(channel),
            OperatorSpec::OutputField { channel, amplitude } => {
                let mut op = self
                    .channel_operator(channel)
                    .mapv(|z| C64::new(0.0, -1.0) * z);
                for i in 0..self.dim() {
                    op[(i, i)] += amplitude;
                }
                op
            }
        }
    }

    /// Photon flux `Tr[o†o ρ]` of an operator.
    pub fn flux(&self, state: &DensityMatrix, spec: OperatorSpec) -> f64 {
        let op = self.operator(spec);
        let op_dag = op.mapv(|z| z.conj()).reversed_axes();
        trace_of(&op_dag.dot(&op).dot(&state.rho))
    }

    /// Normalized equal-time correlator `Tr[o†ⁿ oⁿ ρ] / Tr[o†o ρ]ⁿ`.
    pub fn correlator_g_n(
        &self,
        state: &DensityMatrix,
        spec: OperatorSpec,
        n: usize,
    ) -> Result<f64> {
        let op = self.operator(spec);
        let op_dag = op.mapv(|z| z.conj()).reversed_axes();
        let den = trace_of(&op_dag.dot(&op).dot(&state.rho));
        if den.abs() < DENOMINATOR_FLOOR {
            return Err(Error::DenominatorBelowThreshold { value: den });
        }
        let mut op_n = op.clone();
        for _ in 1..n {
            op_n = op.dot(&op_n);
        }
        let op_n_dag = op_n.mapv(|z| z.conj()).reversed_axes();
        let num = trace_of(&op_n_dag.dot(&op_n).dot(&state.rho));
        Ok(num / den.powi(n as i32))
    }

    /// Cross-correlator `Tr[(∏o_j)† (∏o_j) ρ] / ∏ Tr[o_j†o_j ρ]` over a list
    /// of (mutually commuting) operator selectors.
    pub fn correlator_cross(&self, state: &DensityMatrix, specs: &[OperatorSpec]) -> Result<f64> {
        let mut product: Option<Array2<C64>> = None;
        let mut den = 1.0f64;
        for &spec in specs {
            let op = self.operator(spec);
            let op_dag = op.mapv(|z| z.conj()).reversed_axes();
            let d = trace_of(&op_dag.dot(&op).dot(&state.rho));
            if d.abs() < DENOMINATOR_FLOOR {
                return Err(Error::DenominatorBelowThreshold { value: d });
            }
            den *= d;
            product = Some(match product {
                None => op,
                Some(p) => op.dot(&p),
            });
        }
        let product = product
            .ok_or_else(|| Error::InvalidArgument("cross-correlator needs operators".into()))?;
        let product_dag = product.mapv(|z| z.conj()).reversed_axes();
        let num = trace_of(&product_dag.dot(&product).dot(&state.rho));
        Ok(num / den)
    }

    pub fn vacuum_state(&self) -> DensityMatrix {
        DensityMatrix {
            rho: self.vacuum_projector(),
            residual: 0.0,
            boundary_population: 0.0,
        }
    }
}

fn trace_of(m: &Array2<C64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// `out += factor · (A ⊗ B)` over non-zero entries only, with the Kronecker
/// convention matching column-stacked vectorization.
fn add_kron(out: &mut Array2<C64>, a: &Array2<C64>, b: &Array2<C64>, factor: C64) {
    let d = a.nrows();
    let nz = |m: &Array2<C64>| -> Vec<(usize, usize, C64)> {
        m.indexed_iter()
            .filter(|(_, z)| **z != C64::new(0.0, 0.0))
            .map(|((i, j), &z)| (i, j, z))
            .collect()
    };
    let a_nz = nz(a);
    let b_nz = nz(b);
    for &(p1, q1, av) in &a_nz {
        let fa = factor * av;
        for &(p2, q2, bv) in &b_nz {
            out[(p1 * d + p2, q1 * d + q2)] += fa * bv;
        }
    }
}
