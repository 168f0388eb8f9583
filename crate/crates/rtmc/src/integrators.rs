//! Constrained symplectic integration.
//!
//! One step of the constrained leapfrog (RATTLE) scheme with stepsize `h`:
//!
//! ```text
//! Q      = x + h v - (h^2/2) grad U(x)          (unconstrained drift)
//! Q     <- Q - C_i(x)^T dlam_i, cycling i = 1..m until |g_i(Q)| < tol,
//!          with dlam_i = g_i(Q) / (C_i(Q) . C_i(x))   (position multipliers)
//! x'     = Q,   v_half = (x' - x) / h
//! v'     = P(x') (v_half - (h/2) grad U(x'))          (velocity multipliers)
//! ```
//!
//! The position multipliers are solved Gauss-Seidel style, one constraint at
//! a time in fixed ascending order so runs are reproducible. The velocity
//! stage uses the tangent projector at `x'`, which is algebraically the same
//! as solving the velocity multiplier system and reuses the Gram
//! factorization. The scheme is symmetric, symplectic, of order 2, and keeps
//! iterates on the constraint manifold up to the solve tolerance.
//!
//! Non-convergence of the position solve is a soft failure: the step reports
//! `converged = false` and samplers treat the proposal as rejected.

use crate::manifold::{project_tangent_with_jacobian, ConstraintManifold, PhasePoint};
use crate::targets::{hamiltonian, TargetDensity};
use crate::{DMat, DVec, Error, Result};

/// Smallest multiplier denominator `C_i(Q) . C_i(x)` treated as usable.
const DENOMINATOR_FLOOR: f64 = 1e-14;

/// Parameters of a single constrained step.
#[derive(Debug, Clone)]
pub struct RattleConfig {
    /// Stepsize `h` in time units.
    pub stepsize: f64,
    /// Constraint residual bound for the position solve (infinity norm).
    pub shake_tol: f64,
    /// Maximum Gauss-Seidel sweeps before the step is declared failed.
    pub shake_max_iters: usize,
    /// Added to the Gram diagonal before the velocity solve.
    pub gram_regularization: f64,
}

impl RattleConfig {
    pub fn new(stepsize: f64) -> Self {
        Self {
            stepsize,
            shake_tol: 1e-10,
            shake_max_iters: 500,
            gram_regularization: 0.0,
        }
    }
}

/// Outcome of a (multi-)step constrained flow.
#[derive(Debug, Clone)]
pub struct FlowResult {
    pub end_state: PhasePoint,
    /// False when any position solve hit the sweep cap with residual above
    /// tolerance; the end state is then the last consistent state.
    pub converged: bool,
    /// Largest number of position-solve sweeps used by any step.
    pub shake_iterations: usize,
    /// Total energy `H = U + v.v/2` at the start state.
    pub energy_start: f64,
    /// Total energy at the end state.
    pub energy_end: f64,
}

/// Scratch buffers reused across steps of a flow.
struct Workspace {
    q: DVec,
    grad: DVec,
    jac: DMat,
    row: Vec<f64>,
}

impl Workspace {
    fn new(n: usize, m: usize) -> Self {
        Self {
            q: DVec::zeros(n),
            grad: DVec::zeros(n),
            jac: DMat::zeros(m, n),
            row: vec![0.0; n],
        }
    }
}

struct StepOutcome {
    converged: bool,
    sweeps: usize,
}

/// One constrained step, in place. `grad` must hold `grad U(x)` on entry and
/// holds `grad U(x')` on exit (reused by the next step).
fn step_in_place(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    x: &mut DVec,
    v: &mut DVec,
    grad: &mut DVec,
    cfg: &RattleConfig,
    ws: &mut Workspace,
) -> Result<StepOutcome> {
    let h = cfg.stepsize;
    let m = manifold.constraint_dim();

    // Unconstrained drift.
    ws.q.copy_from(x);
    ws.q.axpy(h, v, 1.0);
    ws.q.axpy(-0.5 * h * h, grad, 1.0);

    // Position multipliers, cycling the constraints in ascending order.
    let mut sweeps = 0;
    let converged = loop {
        let xs = x.as_slice();
        {
            let qs = ws.q.as_mut_slice();
            for i in 0..m {
                let g = manifold.constraint_value(qs, i);
                let denom = manifold.jacobian_rows_dot(qs, xs, i);
                if denom.abs() < DENOMINATOR_FLOOR || !denom.is_finite() {
                    return Ok(StepOutcome {
                        converged: false,
                        sweeps,
                    });
                }
                let dlam = g / denom;
                manifold.subtract_scaled_jacobian_row(xs, i, dlam, qs);
            }
        }
        sweeps += 1;
        let residual = manifold.constraint_residual_inf(&ws.q);
        if !residual.is_finite() {
            return Ok(StepOutcome {
                converged: false,
                sweeps,
            });
        }
        if residual < cfg.shake_tol {
            break true;
        }
        if sweeps >= cfg.shake_max_iters {
            break false;
        }
    };
    if !converged {
        return Ok(StepOutcome {
            converged: false,
            sweeps,
        });
    }

    // Half-step velocity from the actual displacement, so the position
    // multipliers are folded in exactly regardless of sweep count.
    // v_half = (x' - x)/h; then v' = P(x')(v_half - (h/2) grad U(x')).
    v.copy_from(&ws.q);
    v.axpy(-1.0, x, 1.0);
    *v /= h;
    std::mem::swap(x, &mut ws.q);
    target.gradient_into(x, grad);
    v.axpy(-0.5 * h, grad, 1.0);
    if m == 1 {
        // Single constraint: the Gram system is scalar.
        let xs = x.as_slice();
        let gram = manifold.jacobian_rows_dot(xs, xs, 0) + cfg.gram_regularization;
        if gram.abs() < DENOMINATOR_FLOOR {
            return Err(Error::SingularConstraint { cond: f64::INFINITY });
        }
        let cw = manifold.jacobian_row_dot(xs, 0, v.as_slice());
        manifold.subtract_scaled_jacobian_row(xs, 0, cw / gram, v.as_mut_slice());
    } else {
        fill_jacobian(manifold, x, &mut ws.jac, &mut ws.row);
        project_tangent_with_jacobian(&ws.jac, cfg.gram_regularization, v)?;
    }
    Ok(StepOutcome {
        converged: true,
        sweeps,
    })
}

fn fill_jacobian(
    manifold: &dyn ConstraintManifold,
    x: &DVec,
    jac: &mut DMat,
    row: &mut [f64],
) {
    let xs = x.as_slice();
    for i in 0..manifold.constraint_dim() {
        manifold.jacobian_row_write(xs, i, row);
        for (j, &value) in row.iter().enumerate() {
            jac[(i, j)] = value;
        }
    }
}

/// A single constrained step. On a failed position solve the returned state
/// is the unchanged input and `converged` is false.
pub fn rattle_step(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    state: &PhasePoint,
    cfg: &RattleConfig,
) -> Result<FlowResult> {
    flow(manifold, target, state, cfg, 1)
}

/// Composition of `steps` constrained steps with a shared scratch workspace.
/// Aborts on the first failed position solve, reporting `converged = false`
/// and the last consistent state.
pub fn flow(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    state: &PhasePoint,
    cfg: &RattleConfig,
    steps: usize,
) -> Result<FlowResult> {
    let n = manifold.ambient_dim();
    if state.x.len() != n || state.v.len() != n {
        return Err(Error::DimensionMismatch {
            context: "flow state",
            expected: n,
            got: state.x.len(),
        });
    }
    let mut ws = Workspace::new(n, manifold.constraint_dim());
    let mut x = state.x.clone();
    let mut v = state.v.clone();
    let energy_start = hamiltonian(target, state);
    target.gradient_into(&x, &mut ws.grad);

    let mut max_sweeps = 0;
    for _ in 0..steps {
        let before_x = x.clone();
        let before_v = v.clone();
        let mut grad = std::mem::replace(&mut ws.grad, DVec::zeros(0));
        let outcome = step_in_place(manifold, target, &mut x, &mut v, &mut grad, cfg, &mut ws)?;
        ws.grad = grad;
        max_sweeps = max_sweeps.max(outcome.sweeps);
        if !outcome.converged {
            let end_state = PhasePoint::new(before_x, before_v);
            let energy_end = hamiltonian(target, &end_state);
            return Ok(FlowResult {
                end_state,
                converged: false,
                shake_iterations: max_sweeps,
                energy_start,
                energy_end,
            });
        }
    }
    let end_state = PhasePoint::new(x, v);
    let energy_end = hamiltonian(target, &end_state);
    Ok(FlowResult {
        end_state,
        converged: true,
        shake_iterations: max_sweeps,
        energy_start,
        energy_end,
    })
}

/// Momentum reversal `(x, v) -> (x, -v)`; an involution that leaves the
/// Hamiltonian unchanged.
pub fn momentum_flip(state: &PhasePoint) -> PhasePoint {
    PhasePoint::new(state.x.clone(), -&state.v)
}

/// Re-integrates the flipped proposal and checks return to the start state
/// within `rev_tol` (joint infinity norm over position and velocity). False
/// when the backward solve fails to converge.
///
/// The caller must have produced `proposal = flip(flow(start))` with the
/// same `cfg` and `steps`.
pub fn reversibility_check(
    manifold: &dyn ConstraintManifold,
    target: &dyn TargetDensity,
    start: &PhasePoint,
    proposal: &PhasePoint,
    cfg: &RattleConfig,
    steps: usize,
    rev_tol: f64,
) -> Result<bool> {
    let back = flow(manifold, target, proposal, cfg, steps)?;
    if !back.converged {
        return Ok(false);
    }
    let returned = momentum_flip(&back.end_state);
    let dx = (&returned.x - &start.x).amax();
    let dv = (&returned.v - &start.v).amax();
    Ok(dx.max(dv) <= rev_tol)
}

/// Exact great-circle flow on the unit sphere for zero potential:
///
/// ```text
/// x(t) = x cos(|v| t) + (v/|v|) sin(|v| t)
/// v(t) = -x |v| sin(|v| t) + v cos(|v| t)
/// ```
///
/// Errors when the input is off the sphere or the velocity is not tangent.
/// `v = 0` returns the input unchanged.
pub fn sphere_geodesic_flow(x: &DVec, v: &DVec, t: f64) -> Result<PhasePoint> {
    if x.len() != v.len() {
        return Err(Error::DimensionMismatch {
            context: "sphere_geodesic_flow",
            expected: x.len(),
            got: v.len(),
        });
    }
    let radial = (x.norm() - 1.0).abs();
    if radial > 1e-9 {
        return Err(Error::OffManifold {
            residual: radial,
            tol: 1e-9,
        });
    }
    let speed = v.norm();
    let tangency = x.dot(v).abs();
    if tangency > 1e-9 * (1.0 + speed) {
        return Err(Error::OffManifold {
            residual: tangency,
            tol: 1e-9,
        });
    }
    if speed == 0.0 || t == 0.0 {
        return Ok(PhasePoint::new(x.clone(), v.clone()));
    }
    let angle = speed * t;
    let (sin, cos) = angle.sin_cos();
    let x_new = x * cos + v * (sin / speed);
    let v_new = x * (-speed * sin) + v * cos;
    Ok(PhasePoint::new(x_new, v_new))
}
