//! Discrete-velocity BGK flows, the Andréiev identity and the defect bound.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::pairwise_sum;
use crate::error::{Error, Result};
use crate::fluid::{c_n, SlabTensor};
use crate::inequality::DEFAULT_TOL;
use crate::report::CheckReport;
use crate::sym::{psd_check, SymMat, PSD_TOL};

/// Tuple budget for exhaustive Andréiev enumeration.
pub const ANDREIEV_BUDGET: u128 = 10_000_000;
pub const ANDREIEV_SEED: u64 = 0x5EED;
/// Relative moment residual accepted from the Maxwellian fit.
pub const FIT_TOL: f64 = 1e-12;

/// `f(y_i, v_k)` on a uniform 1-D grid with a discrete velocity quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticState {
    pub x_min: f64,
    pub dy: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `f[cell][node]`.
    pub f: Vec<Vec<f64>>,
    pub tau: f64,
    #[serde(default)]
    pub time: f64,
}

/// Midpoint quadrature on `[−v_max, v_max]`.
pub fn uniform_velocity_grid(v_max: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * v_max / count as f64;
    ((0..count).map(|k| -v_max + (k as f64 + 0.5) * h).collect(), vec![h; count])
}

impl KineticState {
    pub fn from_fn(
        x_min: f64,
        x_max: f64,
        cells: usize,
        (nodes, weights): (Vec<f64>, Vec<f64>),
        tau: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if cells < 2 || !(x_max > x_min) {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells on a non-empty interval, got {cells}"
            )));
        }
        let dy = (x_max - x_min) / cells as f64;
        let values = (0..cells)
            .map(|i| {
                let y = x_min + (i as f64 + 0.5) * dy;
                nodes.iter().map(|&v| f(y, v)).collect()
            })
            .collect();
        let s = KineticState {
            x_min,
            dy,
            nodes,
            weights,
            f: values,
            tau,
            time: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::NegativeRelaxation { tau: self.tau });
        }
        if !(self.dy > 0.0) || self.f.is_empty() {
            return Err(Error::InvalidGrid("kinetic state needs cells with positive spacing".into()));
        }
        if self.nodes.is_empty() || self.nodes.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.nodes.len(),
                got: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !(*w > 0.0)) || self.nodes.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("velocity weights must be positive and nodes finite"));
        }
        for (i, row) in self.f.iter().enumerate() {
            if row.len() != self.nodes.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.nodes.len(),
                    got: row.len(),
                });
            }
            if let Some((k, &value)) = row.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
                return Err(Error::NegativeDistribution { cell: i, node: k, value });
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.f.len()
    }

    /// `(ρ, m, ∫ f v²)` in one cell.
    pub fn moments(&self, cell: usize) -> [f64; 3] {
        moments_of(&self.f[cell], &self.nodes, &self.weights)
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&(0..self.cells()).map(|i| self.moments(i)[0]).collect::<Vec<_>>()) * self.dy
    }

    pub fn energy(&self) -> f64 {
        0.5 * pairwise_sum(&(0..self.cells()).map(|i| self.moments(i)[2]).collect::<Vec<_>>()) * self.dy
    }

    /// `Σ dy Σ_k w_k f ln f`.
    pub fn h_functional(&self) -> f64 {
        let terms: Vec<f64> = self
            .f
            .iter()
            .flat_map(|row| {
                row.iter()
                    .zip(&self.weights)
                    .map(|(f, w)| if *f > 0.0 { w * f * f.ln() } else { 0.0 })
            })
            .collect();
        pairwise_sum(&terms) * self.dy
    }

    /// The same distribution carried by the velocity nodes `v_k + c`.
    pub fn shifted(&self, c: f64) -> KineticState {
        let mut s = self.clone();
        s.nodes.iter_mut().for_each(|v| *v += c);
        s
    }
}

fn moments_of(f: &[f64], nodes: &[f64], weights: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for ((f, v), w) in f.iter().zip(nodes).zip(weights) {
        let a = w * f;
        out[0] += a;
        out[1] += a * v;
        out[2] += a * v * v;
    }
    out
}

/// `Σ_k w_k f(y, v_k) (1, v_k) ⊗ (1, v_k)`.
pub fn kinetic_moment_tensor(state: &KineticState, cell: usize) -> SymMat {
    let [r, m, s] = state.moments(cell);
    SymMat::from_packed(2, vec![r, m, s]).expect("2x2 packed")
}

/// The discrete Maxwellian `exp(α + βv + γv²)` with the moments of `f`, or
/// `None` when the moments are not reachable within [`FIT_TOL`].
pub fn fit_maxwellian(f: &[f64], nodes: &[f64], weights: &[f64]) -> Option<Vec<f64>> {
    let mu = moments_of(f, nodes, weights);
    let scale = mu[0] + mu[1].abs() + mu[2];
    if !(mu[0] > 0.0) {
        return None;
    }
    let u = mu[1] / mu[0];
    let temp = mu[2] / mu[0] - u * u;
    if !(temp > 1e-14 * (1.0 + u * u)) {
        return None;
    }
    let mut theta = Vector3::new(
        (mu[0] / (2.0 * std::f64::consts::PI * temp).sqrt()).ln() - u * u / (2.0 * temp),
        u / temp,
        -0.5 / temp,
    );
    let target = Vector3::new(mu[0], mu[1], mu[2]);
    let eval = |t: &Vector3<f64>| -> (Vec<f64>, Vector3<f64>, Matrix3<f64>, f64) {
        let vals: Vec<f64> = nodes.iter().map(|v| (t[0] + t[1] * v + t[2] * v * v).exp()).collect();
        let mut g = -target;
        let mut h = Matrix3::zeros();
        let mut phi = 0.0;
        for ((m, v), w) in vals.iter().zip(nodes).zip(weights) {
            let feat = Vector3::new(1.0, *v, v * v);
            g += w * m * feat;
            h += w * m * feat * feat.transpose();
            phi += w * m;
        }
        (vals, g, h, phi - t.dot(&target))
    };
    let (mut vals, mut g, mut h, mut obj) = eval(&theta);
    let mut stalls = 0;
    for _ in 0..100 {
        let gnorm = g.norm();
        if gnorm <= 1e-15 * scale || stalls >= 2 {
            break;
        }
        let step = {
            let c = h.cholesky()?;
            c.solve(&(-g))
        };
        // backtracking on the convex dual objective
        let mut t = 1.0;
        let mut moved = false;
        while t >= 1e-9 {
            let trial = theta + t * step;
            let next = eval(&trial);
            // near the optimum the objective is flat to roundoff; the gradient still decides
            if next.3.is_finite() && (next.3 <= obj || next.1.norm() < gnorm) {
                theta = trial;
                (vals, g, h, obj) = next;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        // near roundoff the residual stops shrinking quadratically
        if !moved || (gnorm <= 1e-10 * scale && g.norm() > 0.5 * gnorm) {
            stalls += 1;
        }
        if !moved {
            break;
        }
    }
    if !(g.norm() <= FIT_TOL * scale) {
        return None;
    }
    // one linearized correction absorbs the last residual: M (1 + c·φ)
    if let Some(chol) = h.cholesky() {
        let c = chol.solve(&(-g));
        let corrected: Vec<f64> = vals
            .iter()
            .zip(nodes)
            .map(|(m, v)| m * (1.0 + c[0] + c[1] * v + c[2] * v * v))
            .collect();
        if corrected.iter().all(|m| *m >= 0.0) {
            vals = corrected;
        }
    }
    Some(vals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticStep {
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub energy: f64,
    pub h: f64,
}

#[derive(Clone, Debug)]
pub struct KineticTrajectory {
    /// State at the start of every step, followed by the final state.
    pub frames: Vec<KineticState>,
    pub steps: Vec<KineticStep>,
    pub times: Vec<f64>,
    /// Largest relative change of a cell moment caused by relaxation.
    pub max_relaxation_defect: f64,
    /// Largest one-step increase of the H-functional.
    pub max_h_increase: f64,
    /// Cells in which the Maxwellian fit failed and relaxation was skipped.
    pub skipped_fits: usize,
}

impl KineticTrajectory {
    pub fn final_state(&self) -> &KineticState {
        self.frames.last().expect("non-empty trajectory")
    }

    /// Moment tensors of the frames with velocity nodes shifted by `shift`.
    pub fn tensor_with_shift(&self, shift: f64) -> SlabTensor {
        let frames = &self.frames[..self.frames.len() - 1];
        SlabTensor {
            times: self.times.clone(),
            cell_volume: frames[0].dy,
            slabs: frames
                .iter()
                .map(|s| {
                    let s = s.shifted(shift);
                    (0..s.cells()).map(|i| kinetic_moment_tensor(&s, i)).collect()
                })
                .collect(),
        }
    }

    pub fn tensor(&self) -> SlabTensor {
        self.tensor_with_shift(0.0)
    }

    /// CSV with columns `t,mass,energy,h`.
    pub fn csv(&self) -> String {
        let mut out = String::from("t,mass,energy,h\n");
        for s in &self.steps {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", s.t, s.mass, s.energy, s.h));
        }
        out
    }
}

/// Upwind transport with zero inflow, then relaxation toward the discrete
/// Maxwellian with factor `1 − exp(−Δt/τ)`.
pub fn bgk_run_1d(init: &KineticState, t_end: f64, cfl: f64) -> Result<KineticTrajectory> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::CflViolation { cfl, max: 1.0 });
    }
    init.validate()?;
    if !(t_end > 0.0) {
        return Err(Error::invalid("t_end must be positive"));
    }
    let vmax = init.nodes.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let base_dt = if vmax > 0.0 { cfl * init.dy / vmax } else { t_end };
    let mut s = init.clone();
    s.time = 0.0;
    let cells = s.cells();
    let mut frames = Vec::new();
    let mut times = vec![0.0];
    let mut steps = vec![KineticStep {
        t: 0.0,
        dt: 0.0,
        mass: s.mass(),
        energy: s.energy(),
        h: s.h_functional(),
    }];
    let mut max_relaxation_defect: f64 = 0.0;
    let mut max_h_increase: f64 = 0.0;
    let mut skipped_fits = 0;
    while s.time < t_end {
        let dt = base_dt.min(t_end - s.time);
        frames.push(s.clone());
        let h_before = s.h_functional();
        let old = s.f.clone();
        for (k, &v) in s.nodes.iter().enumerate() {
            let nu = v * dt / s.dy;
            for i in 0..cells {
                let upstream = if nu >= 0.0 {
                    if i > 0 {
                        old[i - 1][k]
                    } else {
                        0.0
                    }
                } else if i + 1 < cells {
                    old[i + 1][k]
                } else {
                    0.0
                };
                s.f[i][k] = (1.0 - nu.abs()) * old[i][k] + nu.abs() * upstream;
            }
        }
        let kappa = 1.0 - (-dt / s.tau).exp();
        let (nodes, weights) = (&s.nodes, &s.weights);
        let relaxed: Vec<(Vec<f64>, f64, bool)> =
            s.f.par_iter()
                .map(|row| {
                    let before = moments_of(row, nodes, weights);
                    match fit_maxwellian(row, nodes, weights) {
                        Some(m) => {
                            let new: Vec<f64> = row.iter().zip(&m).map(|(f, m)| f + kappa * (m - f)).collect();
                            let after = moments_of(&new, nodes, weights);
                            let scale = before[0] + before[1].abs() + before[2];
                            let defect = (0..3).map(|j| (after[j] - before[j]).abs()).fold(0.0, f64::max) / scale;
                            (new, defect, true)
                        }
                        None => (row.clone(), 0.0, false),
                    }
                })
                .collect();
        for (i, (row, defect, ok)) in relaxed.into_iter().enumerate() {
            s.f[i] = row;
            max_relaxation_defect = max_relaxation_defect.max(defect);
            if !ok && old[i].iter().any(|f| *f > 0.0) {
                skipped_fits += 1;
            }
        }
        s.time += dt;
        if t_end - s.time < 1e-14 * t_end {
            s.time = t_end;
        }
        let h = s.h_functional();
        max_h_increase = max_h_increase.max(h - h_before);
        times.push(s.time);
        steps.push(KineticStep {
            t: s.time,
            dt,
            mass: s.mass(),
            energy: s.energy(),
            h,
        });
    }
    frames.push(s);
    Ok(KineticTrajectory {
        frames,
        steps,
        times,
        max_relaxation_defect,
        max_h_increase,
        skipped_fits,
    })
}

/// `I_T = Σ Δt Δy (det A)^{1/n}` for the kinetic moment tensor.
pub fn bony_functional(traj: &KineticTrajectory) -> Result<f64> {
    traj.tensor().det_integral()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticDiagnostics {
    pub m0: f64,
    pub e0: f64,
    pub d0: f64,
    pub c_n: f64,
}

/// `D₀ = ½ ∫∫∫∫ f₀ f₀' |v' − v|²`; the space integrals factor out, leaving a
/// double sum over velocity nodes.
pub fn kinetic_invariants(init: &KineticState) -> Result<KineticDiagnostics> {
    init.validate()?;
    let nv = init.nodes.len();
    let w: Vec<f64> = (0..nv)
        .map(|k| init.weights[k] * init.dy * pairwise_sum(&init.f.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect();
    let mut terms = Vec::with_capacity(nv * nv);
    for a in 0..nv {
        for b in 0..nv {
            let dv = init.nodes[a] - init.nodes[b];
            terms.push(0.5 * w[a] * w[b] * dv * dv);
        }
    }
    Ok(KineticDiagnostics {
        m0: pairwise_sum(&w),
        e0: init.energy(),
        d0: pairwise_sum(&terms),
        c_n: c_n(1),
    })
}

/// `I_T ≤ 2 c_n M₀^{1/n} √D₀`, judged against the measure-corrected bound.
pub fn kinetic_bound_check(traj: &KineticTrajectory, diag: &KineticDiagnostics) -> Result<CheckReport> {
    let tensor = traj.tensor();
    let lhs = tensor.det_integral()?;
    let rhs = 2.0 * diag.c_n * diag.m0 * diag.d0.sqrt();
    let corrected = tensor.corrected_bound()?;
    Ok(CheckReport::new("kinetic_bound", lhs, rhs, DEFAULT_TOL)
        .with_grid(&crate::domain::GridSpec::new(vec![tensor.slabs.len(), tensor.slabs[0].len()]))
        .with_extra("rhs_corrected", corrected.bound)
        .with_extra("lambda", corrected.lambda)
        .with_extra("divergence_mass", corrected.divergence_mass)
        .with_extra("max_relaxation_defect", traj.max_relaxation_defect)
        .with_extra("max_h_increase", traj.max_h_increase)
        .with_extra("d0", diag.d0)
        .with_notes("pass is judged against rhs_corrected")
        .judge_against(corrected.bound))
}

/// A weighted atom `w δ_v` in velocity space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub v: Vec<f64>,
    pub w: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AndreievResult {
    /// `det Σ w (1, v) ⊗ (1, v)`.
    pub direct: f64,
    /// `(1/d!) Σ_{tuples} w…w Δ²`, exact or sampled.
    pub bruteforce: f64,
    /// Standard error of a sampled estimate, 0 when exhaustive.
    pub stderr: f64,
    pub exhaustive: bool,
}

fn check_atoms(atoms: &[Atom], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("velocity dimension must be positive"));
    }
    for a in atoms {
        if a.v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.v.len(),
            });
        }
        if !(a.w >= 0.0) {
            return Err(Error::invalid(format!("atom weight must be non-negative, got {}", a.w)));
        }
    }
    Ok(())
}

fn direct_det(atoms: &[Atom], n: usize) -> f64 {
    let d = n + 1;
    let mut a = DMatrix::<f64>::zeros(d, d);
    for atom in atoms {
        let x: Vec<f64> = std::iter::once(1.0).chain(atom.v.iter().copied()).collect();
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] += atom.w * x[i] * x[j];
            }
        }
    }
    a.determinant()
}

fn tuple_term(atoms: &[Atom], idx: &[usize], n: usize) -> f64 {
    let d = n + 1;
    let m = DMatrix::from_fn(d, d, |r, c| if c == 0 { 1.0 } else { atoms[idx[r]].v[c - 1] });
    let delta = m.determinant();
    idx.iter().map(|&i| atoms[i].w).product::<f64>() * delta * delta
}

fn factorial(d: usize) -> f64 {
    (1..=d).map(|k| k as f64).product()
}

/// Exhaustive evaluation of both sides of the Andréiev identity.
pub fn andreiev_det(atoms: &[Atom], n: usize) -> Result<AndreievResult> {
    check_atoms(atoms, n)?;
    let d = n + 1;
    let count = atoms.len();
    let tuples = (count as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if tuples > ANDREIEV_BUDGET {
        return Err(Error::BudgetExceeded {
            tuples,
            budget: ANDREIEV_BUDGET,
        });
    }
    if count == 0 {
        return Ok(AndreievResult {
            direct: direct_det(atoms, n),
            bruteforce: 0.0,
            stderr: 0.0,
            exhaustive: true,
        });
    }
    // one shard per leading index, combined in order
    let partial: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|first| {
            let rest = (count as u128).pow(n as u32) as usize;
            let mut idx = vec![0usize; d];
            idx[0] = first;
            let terms: Vec<f64> = (0..rest)
                .map(|mut r| {
                    for slot in idx.iter_mut().skip(1) {
                        *slot = r % count;
                        r /= count;
                    }
                    tuple_term(atoms, &idx, n)
                })
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(AndreievResult {
        direct: direct_det(atoms, n),
        bruteforce: pairwise_sum(&partial) / factorial(d),
        stderr: 0.0,
        exhaustive: true,
    })
}

/// Exhaustive below the budget; above it, a Monte Carlo estimate stratified
/// on the leading index with seed [`ANDREIEV_SEED`].
pub fn andreiev_estimate(atoms: &[Atom], n: usize, samples: usize) -> Result<AndreievResult> {
    match andreiev_det(atoms, n) {
        Err(Error::BudgetExceeded { .. }) => {}
        other => return other,
    }
    let d = n + 1;
    let count = atoms.len();
    let per = samples.div_ceil(count).max(2);
    // each stratum contributes (1/N) E[N^n · term | first index]
    let strata: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|first| {
            let mut rng = ChaCha8Rng::seed_from_u64(ANDREIEV_SEED ^ (first as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let scale = (count as f64).powi(n as i32);
            let mut idx = vec![0usize; d];
            idx[0] = first;
            let xs: Vec<f64> = (0..per)
                .map(|_| {
                    for slot in idx.iter_mut().skip(1) {
                        *slot = rng.random_range(0..count);
                    }
                    scale * tuple_term(atoms, &idx, n)
                })
                .collect();
            let mean = pairwise_sum(&xs) / per as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (per as f64 - 1.0);
            (mean, var / per as f64)
        })
        .collect();
    let total: f64 = strata.iter().map(|s| s.0).sum();
    let var: f64 = strata.iter().map(|s| s.1).sum();
    Ok(AndreievResult {
        direct: direct_det(atoms, n),
        bruteforce: total / factorial(d),
        stderr: var.sqrt() / factorial(d),
        exhaustive: false,
    })
}

/// One point of a renormalized kinetic solution: mass, momentum, the
/// second-moment matrix `T` and the defect `Σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectSample {
    pub rho: f64,
    pub m: Vec<f64>,
    pub t: SymMat,
    pub sigma: SymMat,
}

impl DefectSample {
    fn moment_matrix(&self) -> SymMat {
        let n = self.m.len();
        SymMat::from_fn(n + 1, |i, j| match (i, j) {
            (0, 0) => self.rho,
            (0, j) => self.m[j - 1],
            (i, 0) => self.m[i - 1],
            (i, j) => self.t.get(i - 1, j - 1),
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.m.len();
        if self.t.dim() != n || self.sigma.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.t.dim(),
            });
        }
        for a in [self.moment_matrix(), self.sigma.clone()] {
            if !psd_check(&a, PSD_TOL) {
                return Err(Error::NotPsd {
                    min_eigenvalue: a.min_eigenvalue(),
                });
            }
        }
        Ok(())
    }

    /// `det [[ρ, mᵀ], [m, T + Σ]] − ρ det Σ`.
    pub fn margin(&self) -> f64 {
        let mut a = self.moment_matrix();
        let n = self.m.len();
        for i in 0..n {
            for j in i..n {
                a.set(i + 1, j + 1, a.get(i + 1, j + 1) + self.sigma.get(i, j));
            }
        }
        a.det() - self.rho * self.sigma.det()
    }
}

fn random_psd(n: usize, rng: &mut impl Rng) -> SymMat {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    SymMat::from_fn(n, |i, j| (0..n).map(|k| b[i][k] * b[j][k]).sum())
}

/// Checks `det A ≥ ρ det Σ` for the sample and for `count` random PSD
/// perturbations of its moment matrix and defect.
pub fn defect_schur_check(sample: &DefectSample, count: usize, seed: u64) -> Result<CheckReport> {
    sample.validate()?;
    let n = sample.m.len();
    let base = sample.margin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_margin = base;
    for _ in 0..count {
        // add one random atom w (1, v) ⊗ (1, v) to the moments
        let w: f64 = rng.random_range(0.0..1.0);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut s = sample.clone();
        s.rho += w;
        for i in 0..n {
            s.m[i] += w * v[i];
        }
        s.t = s.t.add(&SymMat::outer(&v).scale(w));
        s.sigma = s.sigma.add(&random_psd(n, &mut rng));
        min_margin = min_margin.min(s.margin());
    }
    let mut report = CheckReport::new(
        "defect_schur",
        sample.rho * sample.sigma.det(),
        sample.margin() + sample.rho * sample.sigma.det(),
        1e-12,
    )
    .with_extra("min_margin", min_margin)
    .with_extra("samples", count as f64);
    report.pass = report.pass && min_margin >= -1e-12;
    Ok(report)
}

/// Shorthand used by the property tests and the CLI: the default atom set
/// for a kinetic state cell, `w_k f(y, v_k) δ_{v_k}`.
pub fn cell_atoms(state: &KineticState, cell: usize) -> Vec<Atom> {
    state
        .nodes
        .iter()
        .zip(&state.weights)
        .zip(&state.f[cell])
        .map(|((v, w), f)| Atom { v: vec![*v], w: w * f })
        .collect()
}

/// `(max |direct − bruteforce| / (1 + |direct|))` over `draws` random atom sets.
pub fn andreiev_random_study(n: usize, atoms: usize, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let set: Vec<Atom> = (0..atoms)
            .map(|_| Atom {
                v: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                w: rng.random_range(0.0..1.0),
            })
            .collect();
        let r = andreiev_det(&set, n)?;
        worst = worst.max((r.direct - r.bruteforce).abs() / (1.0 + r.direct.abs()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atom_identity() {
        let atoms = vec![Atom { v: vec![0.0], w: 1.0 }, Atom { v: vec![1.0], w: 1.0 }];
        let r = andreiev_det(&atoms, 1).unwrap();
        assert!((r.direct - 1.0).abs() < 1e-15 && (r.bruteforce - 1.0).abs() < 1e-15);
        let single = vec![Atom {
            v: vec![0.3, 0.2],
            w: 2.0,
        }];
        let r = andreiev_det(&single, 2).unwrap();
        assert!(r.direct.abs() < 1e-15 && r.bruteforce == 0.0);
    }

    #[test]
    fn random_atoms_agree() {
        assert!(andreiev_random_study(2, 6, 20, 7).unwrap() <= 1e-12);
        assert!(andreiev_random_study(1, 8, 20, 8).unwrap() <= 1e-12);
    }

    #[test]
    fn budget_and_sampling() {
        let atoms: Vec<Atom> = (0..400)
            .map(|k| Atom {
                v: vec![(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()],
                w: 1.0 / 400.0,
            })
            .collect();
        assert!(matches!(andreiev_det(&atoms, 2), Err(Error::BudgetExceeded { .. })));
        let r = andreiev_estimate(&atoms, 2, 200_000).unwrap();
        assert!(!r.exhaustive && r.stderr > 0.0);
        assert!((r.direct - r.bruteforce).abs() <= 5.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn maxwellian_fit_matches_moments() {
        let (nodes, weights) = uniform_velocity_grid(6.0, 40);
        let f: Vec<f64> = nodes
            .iter()
            .map(|v| (-(v - 1.0_f64).powi(2) / 0.2).exp() + (-(v + 1.0_f64).powi(2) / 0.2).exp())
            .collect();
        let m = fit_maxwellian(&f, &nodes, &weights).unwrap();
        let a = moments_of(&f, &nodes, &weights);
        let b = moments_of(&m, &nodes, &weights);
        for j in 0..3 {
            assert!((a[j] - b[j]).abs() <= 1e-13 * (1.0 + a[j].abs()), "{j}: {} {}", a[j], b[j]);
        }
        // a single atom has no Maxwellian
        let mut spike = vec![0.0; nodes.len()];
        spike[7] = 1.0;
        assert!(fit_maxwellian(&spike, &nodes, &weights).is_none());
    }

    fn two_beams() -> KineticState {
        KineticState::from_fn(-10.0, 10.0, 100, uniform_velocity_grid(4.0, 32), 0.1, |y, v| {
            (-y * y).exp() * ((-(v - 1.0) * (v - 1.0) / 0.2).exp() + (-(v + 1.0) * (v + 1.0) / 0.2).exp())
        })
        .unwrap()
    }

    #[test]
    fn bgk_conserves_and_dissipates() {
        let s = two_beams();
        let t = bgk_run_1d(&s, 0.5, 0.9).unwrap();
        assert!(t.max_relaxation_defect <= 1e-13, "{}", t.max_relaxation_defect);
        assert!(t.max_h_increase <= 1e-12, "{}", t.max_h_increase);
        assert_eq!(t.skipped_fits, 0);
        let m0 = t.steps[0].mass;
        assert!(t.steps.iter().all(|r| (r.mass - m0).abs() <= 1e-12 * m0));
        let d = kinetic_invariants(&s).unwrap();
        let r = kinetic_bound_check(&t, &d).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn equilibrium_is_stationary() {
        let (nodes, weights) = uniform_velocity_grid(6.0, 48);
        let f: Vec<f64> = nodes.iter().map(|v| (-v * v / 2.0).exp()).collect();
        let m = fit_maxwellian(&f, &nodes, &weights).unwrap();
        let s = KineticState {
            x_min: 0.0,
            dy: 0.1,
            nodes,
            weights,
            f: vec![m.clone(); 40],
            tau: 1.0,
            time: 0.0,
        };
        // zero inflow reaches at most one cell per step
        let t = bgk_run_1d(&s, 3.0 * 0.9 * 0.1 / 5.875, 0.9).unwrap();
        assert_eq!(t.steps.len(), 4);
        for row in &t.final_state().f[4..36] {
            for (a, b) in row.iter().zip(&m) {
                assert!((a - b).abs() <= 1e-13 * (1.0 + b), "{a} {b}");
            }
        }
    }

    #[test]
    fn bony_vanishes_on_monokinetic_data() {
        let (nodes, weights) = uniform_velocity_grid(2.0, 8);
        let s = KineticState::from_fn(0.0, 1.0, 4, (nodes, weights), 1.0, |_, v| {
            if (v - 0.25).abs() < 1e-9 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        for i in 0..s.cells() {
            assert!(kinetic_moment_tensor(&s, i).det().abs() < 1e-15);
        }
        let t = bgk_run_1d(&s, 0.1, 0.5).unwrap();
        assert!(bony_functional(&t).unwrap().abs() < 1e-15);
        assert!(t.skipped_fits > 0);
    }

    #[test]
    fn galilean_shift() {
        let s = two_beams();
        let t = bgk_run_1d(&s, 0.2, 0.9).unwrap();
        let a = t.tensor().det_integral().unwrap();
        let b = t.tensor_with_shift(0.75).det_integral().unwrap();
        assert!((a - b).abs() <= 1e-12 * a, "{a} {b}");
        let d0 = kinetic_invariants(&s).unwrap().d0;
        let d1 = kinetic_invariants(&s.shifted(0.75)).unwrap().d0;
        assert!((d0 - d1).abs() <= 1e-12 * d0);
    }

    #[test]
    fn schur_examples() {
        let s = DefectSample {
            rho: 2.0,
            m: vec![1.0],
            t: SymMat::diag(&[1.0]),
            sigma: SymMat::diag(&[1.0]),
        };
        let r = defect_schur_check(&s, 1000, 1).unwrap();
        assert!((r.rhs - 3.0).abs() < 1e-15 && (r.lhs - 2.0).abs() < 1e-15 && r.pass);
        let block = DefectSample {
            rho: 1.5,
            m: vec![0.0, 0.0],
            t: SymMat::zeros(2),
            sigma: SymMat::diag(&[2.0, 3.0]),
        };
        assert!(block.margin().abs() < 1e-14);
        let bad = DefectSample {
            sigma: SymMat::diag(&[-1.0]),
            ..s
        };
        assert!(matches!(defect_schur_check(&bad, 1, 1), Err(Error::NotPsd { .. })));
    }
}
