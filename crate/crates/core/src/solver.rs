//! Time loop: CFL step selection, predictor, corrector and relaxation per
//! step, retries, landing on the final time and per-step diagnostics.

use serde::{Deserialize, Serialize};

use crate::corrector::{CorrectorOptions, Update};
use crate::discretization::{DgState, Discretization};
use crate::error::{RelaxationError, Result, SolverError};
use crate::predictor::{default_max_iterations, DEFAULT_TOLERANCE};
use crate::relaxation::{apply_relaxation, GammaMethod, RelaxationProblem};
use crate::pde::PdeSystem;

/// Which entropy budget the relaxation enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RelaxationMode {
    /// `γ = 1`, the plain scheme.
    Off,
    /// Budget without the face dissipation: entropy is conserved up to
    /// boundary fluxes.
    #[default]
    Conservative,
    /// Budget includes the dissipation of the Rusanov flux.
    Dissipative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions {
    pub cfl: f64,
    pub correction: bool,
    pub relaxation: RelaxationMode,
    /// Defaults to `N + 2`.
    pub picard_max_iter: Option<usize>,
    pub picard_tol: f64,
    /// Absolute tolerance on `R(γ)`; defaults to `1e-13 max(1, |𝓔|)`.
    pub newton_tol: Option<f64>,
    pub newton_max_iter: usize,
    pub max_retries: usize,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            correction: true,
            relaxation: RelaxationMode::Conservative,
            picard_max_iter: None,
            picard_tol: DEFAULT_TOLERANCE,
            newton_tol: None,
            newton_max_iter: 50,
            max_retries: 8,
        }
    }
}

impl SchemeOptions {
    /// The unmodified scheme: no entropy correction, no relaxation.
    pub fn baseline() -> Self {
        Self {
            correction: false,
            relaxation: RelaxationMode::Off,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(SolverError::Config("picard tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// One row of diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepRecord {
    pub step: usize,
    /// Time after the step.
    pub time: f64,
    pub dt: f64,
    pub gamma: f64,
    pub entropy: f64,
    /// `R(γ)` at the accepted `γ`.
    pub entropy_residual: f64,
    pub mass_0: f64,
    pub newton_iters: usize,
    /// NaN when every cell stage was flagged.
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// `γ Δt Σ_s β_s ∮𝒢` over the domain boundary.
    pub boundary_flux: f64,
    /// `γ Δt Σ_s β_s Σ_i D_i`
    pub dissipation: f64,
    /// Entropy decrease the relaxation enforced, `γ Δt Σ_s β_s B_s`.
    pub budget: f64,
    pub gamma_method: Option<GammaMethod>,
    pub predictor_iterations: usize,
    pub predictor_unconverged: usize,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunDiagnostics {
    /// Row 0 describes the initial state.
    pub rows: Vec<StepRecord>,
    pub initial_entropy: f64,
    pub cumulative_boundary_flux: f64,
    pub cumulative_dissipation: f64,
    pub cumulative_budget: f64,
    pub final_time: f64,
}

impl RunDiagnostics {
    /// `𝓔ⁿ` plus the entropy that left through the boundary, plus the
    /// dissipated entropy when the budget includes it. Constant up to round-off
    /// when relaxation is on.
    pub fn accounted_entropy(&self, mode: RelaxationMode) -> f64 {
        let last = self.rows.last().map_or(self.initial_entropy, |r| r.entropy);
        match mode {
            RelaxationMode::Dissipative => last + self.cumulative_boundary_flux + self.cumulative_dissipation,
            _ => last + self.cumulative_boundary_flux,
        }
    }

    /// `𝓔ⁿ + Σ γΔtΣβB`, exact up to `tol_R` per step whenever relaxation is on.
    pub fn budget_closure(&self) -> f64 {
        let last = self.rows.last().map_or(self.initial_entropy, |r| r.entropy);
        last + self.cumulative_budget
    }
}

pub struct Solver<P> {
    pub disc: Discretization<P>,
    pub opts: SchemeOptions,
    pub state: DgState,
    pub diagnostics: RunDiagnostics,
}

impl<P> std::fmt::Debug for Solver<P> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver")
            .field("cells", &self.disc.mesh.num_cells())
            .field("time", &self.state.time)
            .finish_non_exhaustive()
    }
}

/// Remaining time, in steps, below which a run stops instead of stepping.
const SLIVER: f64 = 0.1;

/// A step computed but not yet applied.
pub struct TrialStep {
    pub state: DgState,
    pub update: Update,
    pub record: StepRecord,
}

fn is_retryable(e: &SolverError) -> bool {
    matches!(e, SolverError::State(_) | SolverError::Relaxation(_))
}

impl<P: PdeSystem> Solver<P> {
    pub fn new(disc: Discretization<P>, opts: SchemeOptions, state: DgState) -> Result<Self> {
        opts.validate()?;
        disc.check_admissible(&state)?;
        let entropy = disc.total_entropy(&state)?;
        let row = StepRecord {
            step: 0,
            time: state.time,
            dt: 0.0,
            gamma: 1.0,
            entropy,
            entropy_residual: 0.0,
            mass_0: disc.mass(&state)[0],
            newton_iters: 0,
            alpha_min: f64::NAN,
            alpha_max: f64::NAN,
            boundary_flux: 0.0,
            dissipation: 0.0,
            budget: 0.0,
            gamma_method: None,
            predictor_iterations: 0,
            predictor_unconverged: 0,
            retries: 0,
        };
        let diagnostics = RunDiagnostics {
            rows: vec![row],
            initial_entropy: entropy,
            cumulative_boundary_flux: 0.0,
            cumulative_dissipation: 0.0,
            cumulative_budget: 0.0,
            final_time: state.time,
        };
        Ok(Self {
            disc,
            opts,
            state,
            diagnostics,
        })
    }

    fn corrector_options(&self) -> CorrectorOptions {
        CorrectorOptions {
            correction: self.opts.correction,
            predictor_max_iter: self
                .opts
                .picard_max_iter
                .unwrap_or_else(|| default_max_iterations(self.disc.degree())),
            predictor_tol: self.opts.picard_tol,
        }
    }

    /// `CFL · min_i r_i / ((2N+1) λ_i)`; infinite when no signal moves.
    pub fn compute_dt(&self) -> Result<f64> {
        let scale = (2 * self.disc.degree() + 1) as f64;
        let mut dt = f64::INFINITY;
        for ci in 0..self.disc.num_cells() {
            let c = &self.disc.cells[ci];
            let vals = self.disc.cell_point_values(self.disc.cell_block(&self.state.coeffs, ci), ci);
            let mut lambda = 0.0f64;
            for (u, x) in vals.iter().zip(&c.points) {
                lambda = lambda.max(self.disc.pde.max_speed(u, *x)?);
            }
            if lambda > 0.0 {
                dt = dt.min(c.inradius / (scale * lambda));
            }
        }
        Ok(self.opts.cfl * dt)
    }

    /// Computes one step of size `dt` from the current state without
    /// applying it.
    pub fn trial_step(&self, dt: f64) -> Result<TrialStep> {
        let disc = &self.disc;
        let update = disc.compute_update(&self.state, dt, &self.corrector_options())?;
        let per_dt = match self.opts.relaxation {
            RelaxationMode::Dissipative => update.budget_flux + update.budget_dissipation,
            _ => update.budget_flux,
        };
        let problem = RelaxationProblem::new(disc, &self.state, &update.delta, dt * per_dt)?;
        let (gamma, iters, method) = match self.opts.relaxation {
            RelaxationMode::Off => (1.0, 0, None),
            _ => {
                let tol = self.opts.newton_tol.unwrap_or_else(|| problem.default_tolerance());
                let g = problem.solve(tol, self.opts.newton_max_iter)?;
                (g.gamma, g.iterations, Some(g.method))
            }
        };
        if !(gamma > 0.0) {
            return Err(RelaxationError::NoRoot {
                lo: gamma,
                hi: gamma,
                r_lo: f64::NAN,
                r_hi: f64::NAN,
            }
            .into());
        }
        let residual = problem.residual(gamma)?;
        let mut state = self.state.clone();
        apply_relaxation(&mut state, &update.delta, gamma, dt);
        disc.check_admissible(&state)?;
        let entropy = disc.total_entropy(&state)?;
        let (alpha_min, alpha_max) = update.alpha_range().unwrap_or((f64::NAN, f64::NAN));
        let record = StepRecord {
            step: self.diagnostics.rows.len(),
            time: state.time,
            dt,
            gamma,
            entropy,
            entropy_residual: residual,
            mass_0: disc.mass(&state)[0],
            newton_iters: iters,
            alpha_min,
            alpha_max,
            boundary_flux: gamma * dt * update.boundary_flux,
            dissipation: gamma * dt * update.budget_dissipation,
            budget: gamma * problem.budget,
            gamma_method: method,
            predictor_iterations: update.predictor_iterations,
            predictor_unconverged: update.predictor_unconverged,
            retries: 0,
        };
        Ok(TrialStep { state, update, record })
    }

    /// Takes one step, halving `dt` on recoverable failures. Returns the
    /// accepted record; its `dt` may be smaller than requested.
    pub fn step(&mut self, dt: f64) -> Result<StepRecord> {
        let mut dt = dt;
        let mut retries = 0;
        loop {
            match self.trial_step(dt) {
                Ok(mut trial) => {
                    trial.record.retries = retries;
                    self.accept(trial.state, trial.record.clone());
                    return Ok(trial.record);
                }
                Err(e) if is_retryable(&e) && retries < self.opts.max_retries => {
                    retries += 1;
                    dt *= 0.5;
                }
                Err(e) if is_retryable(&e) => {
                    return Err(SolverError::RetriesExhausted {
                        step: self.diagnostics.rows.len(),
                        retries,
                        time: self.state.time,
                        source: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Applies a step computed by [`Solver::trial_step`] from the current state.
    pub fn commit(&mut self, trial: TrialStep) {
        self.accept(trial.state, trial.record);
    }

    fn accept(&mut self, state: DgState, record: StepRecord) {
        let d = &mut self.diagnostics;
        d.cumulative_boundary_flux += record.boundary_flux;
        d.cumulative_dissipation += record.dissipation;
        d.cumulative_budget += record.budget;
        d.final_time = state.time;
        d.rows.push(record);
        self.state = state;
    }

    /// Integrates to `final_time`. The step lengths near the end are chosen
    /// from the previous `γ` so that the relaxed time `t + γΔt` lands close to
    /// `final_time`: the last step has `γ_prev Δt = t_f - t`, and a remainder
    /// below two steps is split in halves. The run stops after the planned
    /// last step, or when the remainder is below a tenth of a step or below
    /// 1.5 times the previous step's extra relaxed time `(γ - 1)Δt`: such a
    /// sliver step would need a huge `γ` in conservative mode. The reported
    /// final time can therefore differ from `final_time` by that much.
    pub fn run(&mut self, final_time: f64, mut observer: impl FnMut(&Self, &StepRecord)) -> Result<()> {
        self.run_steps(final_time, usize::MAX, &mut observer)
    }

    /// As [`Solver::run`], stopping early after `max_steps` steps.
    pub fn run_steps(
        &mut self,
        final_time: f64,
        max_steps: usize,
        observer: &mut impl FnMut(&Self, &StepRecord),
    ) -> Result<()> {
        let eps = 1e-14 * final_time.abs().max(1.0);
        let mut taken = 0;
        while final_time - self.state.time > eps && taken < max_steps {
            let remaining = final_time - self.state.time;
            let cfl = self.compute_dt()?;
            let prev = self.diagnostics.rows.last();
            let g = prev.map_or(1.0, |r| r.gamma).clamp(0.5, 2.0);
            // Extra relaxed time of the previous step. A step much shorter than
            // this would need γ ≫ 1 once γ absorbs the flux dissipation.
            let extra = prev.map_or(0.0, |r| (r.gamma - 1.0) * r.dt).max(0.0);
            if taken > 0 && remaining < (SLIVER * g * cfl).max(1.5 * extra) {
                break;
            }
            let (dt, last) = if remaining <= g * cfl {
                (remaining / g, true)
            } else if remaining < 2.0 * g * cfl {
                (0.5 * remaining / g, false)
            } else {
                (cfl, false)
            };
            let rec = self.step(dt)?;
            taken += 1;
            observer(self, &rec);
            if last && rec.dt == dt {
                break;
            }
        }
        Ok(())
    }

    /// Takes `count` steps of fixed size (no landing).
    pub fn run_fixed(&mut self, dt: f64, count: usize) -> Result<()> {
        for _ in 0..count {
            self.step(dt)?;
        }
        Ok(())
    }
}
