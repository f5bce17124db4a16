//! The local Rayleigh quotient, its minimization over vector fields, the
//! weak-form residual, and the vectorial-to-scalar collapse pipeline.
//!
//! The quotient of a field `u` is the ratio of the p-integral of the
//! Frobenius norm of the cell gradients to the p-integral of the
//! midpoint-interpolated modulus `|u|`. Both integrands live at cell
//! midpoints, so the quotient is a smooth function of the nodal values.

use rand::Rng;
use serde::Serialize;

use crate::error::{require_p, Error, Result};
use crate::fields::{
    cell_midpoint_modulus, cell_midpoint_values, discrete_gradient, p_integral, CellCorners,
    Grid, VectorField,
};
use crate::optim::{self, QuotientObjective};
use crate::rng::task_rng;
use crate::vecalg::{modulus_field, proportionality_residual, rank_one_factor, CollapseReport};

/// Weight regularization for the singular gradient weight `|Du|^{p-2}` when
/// p < 2: the gradient uses `(|Du|^2 + EPS_REG^2)^{(p-2)/2}`. The objective
/// itself is exact.
pub const EPS_REG: f64 = 1e-10;

/// Stopping and line-search parameters for the projected-descent minimizers.
#[derive(Debug, Clone, Serialize)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Relative quotient change per step, averaged over a 10-step window.
    pub quotient_tolerance: f64,
    /// Infinity-norm threshold on the log-quotient gradient.
    pub gradient_tolerance: f64,
    /// Armijo slope fraction.
    pub armijo_c: f64,
    /// Backtracking factor in (0, 1).
    pub backtrack: f64,
    /// Number of independently seeded restarts.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iterations: 50_000,
            quotient_tolerance: 1e-12,
            gradient_tolerance: 1e-8,
            armijo_c: 1e-4,
            backtrack: 0.5,
            restarts: 5,
            seed: 0,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iterations",
                reason: "must be positive".into(),
            });
        }
        for (name, v) in [
            ("quotient_tolerance", self.quotient_tolerance),
            ("gradient_tolerance", self.gradient_tolerance),
            ("armijo_c", self.armijo_c),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter {
                    name: match name {
                        "quotient_tolerance" => "quotient_tolerance",
                        "gradient_tolerance" => "gradient_tolerance",
                        _ => "armijo_c",
                    },
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter {
                name: "backtrack",
                reason: format!("must lie in (0, 1), got {}", self.backtrack),
            });
        }
        Ok(())
    }
}

/// Outcome of a quotient minimization.
#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    /// Quotient of `field`, recomputed after the final step.
    pub lambda: f64,
    pub p: f64,
    pub iterations: usize,
    pub final_step: f64,
    /// Quotient after the initial guess and after every accepted step;
    /// non-increasing by construction.
    pub quotient_history: Vec<f64>,
    /// Minimizing field, normalized to unit p-integral of its modulus.
    pub field: VectorField,
}

/// The local Rayleigh quotient of a nonzero field.
pub fn rayleigh_local(u: &VectorField, p: f64) -> Result<f64> {
    require_p(p)?;
    let grad = discrete_gradient(u);
    let grid = u.grid();
    let num_vals: Vec<f64> = (0..grid.cell_count())
        .map(|c| grad.frobenius_sq(c).sqrt())
        .collect();
    let num = p_integral(&num_vals, p, grid)?;
    let den = p_integral(&cell_midpoint_modulus(u), p, grid)?;
    if den == 0.0 {
        return Err(Error::ZeroField);
    }
    Ok(num / den)
}

/// The gradient weight at one cell: `|Du|^{p-2}`, regularized below p = 2.
#[inline]
fn gradient_weight(frob_sq: f64, p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else if p > 2.0 {
        frob_sq.sqrt().powf(p - 2.0)
    } else {
        (frob_sq + EPS_REG * EPS_REG).powf(0.5 * (p - 2.0))
    }
}

/// Stiffness action: `K[node, k] = sum_cells vol * |Du|^{p-2} *
/// grad u_k . d(grad u_k)/d(u_node)`, i.e. `(1/p)` times the derivative of
/// the quotient numerator.
fn stiffness_action(u: &VectorField, p: f64) -> VectorField {
    let grid = u.grid();
    let n = u.n_comp();
    let grad = discrete_gradient(u);
    let vol = grid.cell_volume();
    let mut out = VectorField::zeros(grid.clone(), n);
    let values = out.values_mut();

    if grid.dim() == 1 {
        let h = grid.axis(0).spacing();
        for cell in 0..grid.cell_count() {
            let w = vol * gradient_weight(grad.frobenius_sq(cell), p);
            for k in 0..n {
                let g = grad.gradient(cell, k)[0];
                values[cell * n + k] -= w * g / h;
                values[(cell + 1) * n + k] += w * g / h;
            }
        }
    } else {
        let hx = grid.axis(0).spacing();
        let hy = grid.axis(1).spacing();
        for cell in 0..grid.cell_count() {
            let w = vol * gradient_weight(grad.frobenius_sq(cell), p);
            let [n00, n10, n01, n11] = match grid.cell_corners(cell) {
                CellCorners::Rect(r) => r,
                CellCorners::Line(_) => unreachable!(),
            };
            for k in 0..n {
                let g = grad.gradient(cell, k);
                let cx = w * g[0] / (2.0 * hx);
                let cy = w * g[1] / (2.0 * hy);
                values[n00 * n + k] += -cx - cy;
                values[n10 * n + k] += cx - cy;
                values[n01 * n + k] += -cx + cy;
                values[n11 * n + k] += cx + cy;
            }
        }
    }
    out.zero_boundary();
    out
}

/// Mass action: `M[node, k] = sum_cells vol * |u_mid|^{p-2} u_mid_k *
/// d(u_mid_k)/d(u_node)`, i.e. `(1/p)` times the derivative of the
/// quotient denominator.
fn mass_action(u: &VectorField, p: f64) -> VectorField {
    let grid = u.grid();
    let n = u.n_comp();
    let mids = cell_midpoint_values(u);
    let vol = grid.cell_volume();
    let mut out = VectorField::zeros(grid.clone(), n);
    let values = out.values_mut();

    for cell in 0..grid.cell_count() {
        let m = &mids[cell * n..(cell + 1) * n];
        let norm_sq: f64 = m.iter().map(|x| x * x).sum();
        if norm_sq == 0.0 {
            continue;
        }
        let scale = if p == 2.0 {
            1.0
        } else {
            norm_sq.sqrt().powf(p - 2.0)
        };
        let corners = grid.cell_corners(cell);
        let cs = corners.as_slice();
        let shape = 1.0 / cs.len() as f64;
        for &node in cs {
            for k in 0..n {
                values[node * n + k] += vol * scale * m[k] * shape;
            }
        }
    }
    out.zero_boundary();
    out
}

/// Nodal gradient of `log rayleigh_local`: `(p/num) K - (p/den) M` with
/// boundary entries forced to zero.
pub fn quotient_gradient(u: &VectorField, p: f64) -> Result<VectorField> {
    require_p(p)?;
    let grid = u.grid();
    let grad = discrete_gradient(u);
    let num_vals: Vec<f64> = (0..grid.cell_count())
        .map(|c| grad.frobenius_sq(c).sqrt())
        .collect();
    let num = p_integral(&num_vals, p, grid)?;
    let den = p_integral(&cell_midpoint_modulus(u), p, grid)?;
    if den == 0.0 || num == 0.0 {
        return Err(Error::ZeroField);
    }
    let k_act = stiffness_action(u, p);
    let m_act = mass_action(u, p);
    let mut out = k_act;
    out.scale(p / num);
    out.axpy(-p / den, &m_act);
    Ok(out)
}

pub(crate) struct LocalObjective {
    pub p: f64,
}

impl QuotientObjective for LocalObjective {
    fn p(&self) -> f64 {
        self.p
    }
    fn quotient(&self, u: &VectorField) -> Result<f64> {
        rayleigh_local(u, self.p)
    }
    fn log_gradient(&self, u: &VectorField) -> Result<VectorField> {
        quotient_gradient(u, self.p)
    }
}

/// Minimizes the local Rayleigh quotient over N-component fields on `grid`.
pub fn minimize_local(
    grid: &Grid,
    n: usize,
    p: f64,
    opts: &MinimizeOptions,
) -> Result<EigenResult> {
    require_p(p)?;
    optim::descend(&LocalObjective { p }, grid, n, opts)
}

/// Max weak-form residual `|int |Du|^{p-2} Du . Dphi - lambda int
/// |u|^{p-2} u . phi|` over `test_count` random smooth test fields phi
/// (zero on the boundary, normalized to unit p-integral of the modulus).
pub fn weak_residual(
    u: &VectorField,
    lambda: f64,
    p: f64,
    test_count: usize,
    seed: u64,
) -> Result<f64> {
    require_p(p)?;
    let grid = u.grid();
    let n = u.n_comp();
    let grad_u = discrete_gradient(u);
    let mids_u = cell_midpoint_values(u);
    let vol = grid.cell_volume();

    let mut worst = 0.0f64;
    for trial in 0..test_count {
        let mut rng = task_rng(seed, trial as u64);
        let phi = random_bump(grid, n, &mut rng, p)?;
        let grad_phi = discrete_gradient(&phi);
        let mids_phi = cell_midpoint_values(&phi);

        let mut stiff = 0.0;
        let mut mass = 0.0;
        for cell in 0..grid.cell_count() {
            let w = gradient_weight(grad_u.frobenius_sq(cell), p);
            let mut dot_grad = 0.0;
            for k in 0..n {
                let gu = grad_u.gradient(cell, k);
                let gp = grad_phi.gradient(cell, k);
                for a in 0..grid.dim() {
                    dot_grad += gu[a] * gp[a];
                }
            }
            stiff += vol * w * dot_grad;

            let m = &mids_u[cell * n..(cell + 1) * n];
            let norm_sq: f64 = m.iter().map(|x| x * x).sum();
            if norm_sq > 0.0 {
                let scale = if p == 2.0 {
                    1.0
                } else {
                    norm_sq.sqrt().powf(p - 2.0)
                };
                let mut dot = 0.0;
                for k in 0..n {
                    dot += m[k] * mids_phi[cell * n + k];
                }
                mass += vol * scale * dot;
            }
        }
        worst = worst.max((stiff - lambda * mass).abs());
    }
    Ok(worst)
}

/// Random low-frequency sine combination, unit-normalized.
fn random_bump(grid: &Grid, n: usize, rng: &mut impl Rng, p: f64) -> Result<VectorField> {
    let modes = 4usize;
    let dim = grid.dim();
    let (a0, b0) = (grid.axis(0).start, grid.axis(0).end);
    let (a1, b1) = if dim == 2 {
        (grid.axis(1).start, grid.axis(1).end)
    } else {
        (0.0, 1.0)
    };
    let mut coeffs = vec![0.0; n * modes * modes];
    for c in coeffs.iter_mut() {
        *c = rng.gen_range(-1.0..1.0);
    }
    let mut phi = VectorField::from_fn(grid.clone(), n, move |x, y, k| {
        let xi = (x - a0) / (b0 - a0);
        let eta = (y - a1) / (b1 - a1);
        let mut acc = 0.0;
        for mx in 1..=modes {
            for my in 1..=if dim == 2 { modes } else { 1 } {
                let c = coeffs[k * modes * modes + (mx - 1) * modes + (my - 1)];
                let sx = (std::f64::consts::PI * mx as f64 * xi).sin();
                let sy = if dim == 2 {
                    (std::f64::consts::PI * my as f64 * eta).sin()
                } else {
                    1.0
                };
                acc += c / ((mx * my) as f64).powi(2) * sx * sy;
            }
        }
        acc
    });
    let norm = p_integral(&cell_midpoint_modulus(&phi), p, grid)?;
    if norm > 0.0 {
        phi.scale(norm.powf(-1.0 / p));
    }
    Ok(phi)
}

/// Result of [`collapse_pipeline`]: the vector and scalar minimizations
/// plus the rank-one diagnostics tying them together.
#[derive(Debug, Clone, Serialize)]
pub struct CollapseOutcome {
    pub vector: EigenResult,
    pub scalar: EigenResult,
    pub collapse: CollapseReport,
    /// `|Lambda_1 - lambda_1| / lambda_1`.
    pub lambda_gap_rel: f64,
    /// p-integral distance between the normalized modulus of the vector
    /// minimizer and the sign-aligned scalar minimizer.
    pub modulus_mismatch: f64,
    /// Pointwise rank-one residual of the vector minimizer.
    pub proportionality: f64,
}

/// Runs the vectorial and the scalar minimization on the same grid and
/// factorizes the vectorial minimizer.
pub fn collapse_pipeline(
    grid: &Grid,
    n: usize,
    p: f64,
    opts: &MinimizeOptions,
) -> Result<CollapseOutcome> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: "collapse pipeline needs N >= 2".into(),
        });
    }
    let vector = minimize_local(grid, n, p, opts)?;
    let scalar = minimize_local(grid, 1, p, opts)?;
    let collapse = rank_one_factor(&vector.field)?;
    let lambda_gap_rel = (vector.lambda - scalar.lambda).abs() / scalar.lambda;
    let proportionality = proportionality_residual(&vector.field).value;

    // compare |u_N| with the scalar minimizer up to sign and normalization
    let mut w = modulus_field(&vector.field).to_vector();
    optim::normalize_field(&mut w, p)?;
    let mut omega = scalar.field.clone();
    let dot: f64 = w
        .values()
        .iter()
        .zip(omega.values())
        .map(|(a, b)| a * b)
        .sum();
    if dot < 0.0 {
        omega.scale(-1.0);
    }
    let w_mid = cell_midpoint_values(&w);
    let o_mid = cell_midpoint_values(&omega);
    let diff: Vec<f64> = w_mid.iter().zip(&o_mid).map(|(a, b)| a - b).collect();
    let modulus_mismatch = p_integral(&diff, p, grid)?.powf(1.0 / p);

    Ok(CollapseOutcome {
        vector,
        scalar,
        collapse,
        lambda_gap_rel,
        modulus_mismatch,
        proportionality,
    })
}
