//! Shared projected-descent driver for scale-invariant quotients.
//!
//! Both the local and the fractional Rayleigh quotients are minimized the
//! same way: step along the negative gradient of the log-quotient with
//! Armijo backtracking, renormalize to unit p-integral after every accepted
//! step (the quotient is scale-invariant, so renormalization preserves the
//! objective), and run several independently seeded restarts in parallel.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{cell_midpoint_modulus, p_integral, Grid, VectorField};
use crate::local::{EigenResult, MinimizeOptions};
use crate::rng::task_rng;

/// A scale-invariant quotient with an explicit log-gradient.
pub(crate) trait QuotientObjective: Sync {
    fn p(&self) -> f64;
    fn quotient(&self, u: &VectorField) -> Result<f64>;
    /// Gradient of `log quotient` with boundary entries zeroed.
    fn log_gradient(&self, u: &VectorField) -> Result<VectorField>;
}

/// Rescale so that the p-integral of the midpoint modulus equals 1.
pub(crate) fn normalize_field(u: &mut VectorField, p: f64) -> Result<()> {
    let i = p_integral(&cell_midpoint_modulus(u), p, u.grid())?;
    if i <= 0.0 {
        return Err(Error::ZeroField);
    }
    u.scale(i.powf(-1.0 / p));
    Ok(())
}

/// First Dirichlet Laplace eigenfunction interpolant times a direction `c`.
fn ground_state_init(grid: &Grid, c: &[f64]) -> VectorField {
    let (a0, b0) = (grid.axis(0).start, grid.axis(0).end);
    let dim = grid.dim();
    let (a1, b1) = if dim == 2 {
        (grid.axis(1).start, grid.axis(1).end)
    } else {
        (0.0, 1.0)
    };
    let c = c.to_vec();
    VectorField::from_fn(grid.clone(), c.len(), move |x, y, k| {
        let sx = (std::f64::consts::PI * (x - a0) / (b0 - a0)).sin();
        let sy = if dim == 2 {
            (std::f64::consts::PI * (y - a1) / (b1 - a1)).sin()
        } else {
            1.0
        };
        c[k] * sx * sy
    })
}

/// Nodal noise passed through a few neighbor-averaging sweeps.
fn smoothed_noise_init(grid: &Grid, n: usize, rng: &mut impl Rng) -> VectorField {
    let nodes = grid.node_count();
    let mut values: Vec<f64> = (0..nodes * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (nx, ny) = (grid.axis(0).nodes, if grid.dim() == 2 { grid.axis(1).nodes } else { 1 });
    for _ in 0..10 {
        let old = values.clone();
        for node in 0..nodes {
            let (ix, iy) = grid.node_multi(node);
            for k in 0..n {
                let mut acc = old[node * n + k];
                let mut count = 1.0;
                let mut add = |jx: i64, jy: i64| {
                    if jx >= 0 && jx < nx as i64 && jy >= 0 && jy < ny as i64 {
                        acc += old[(jx as usize * ny + jy as usize) * n + k];
                        count += 1.0;
                    }
                };
                add(ix as i64 - 1, iy as i64);
                add(ix as i64 + 1, iy as i64);
                if grid.dim() == 2 {
                    add(ix as i64, iy as i64 - 1);
                    add(ix as i64, iy as i64 + 1);
                }
                values[node * n + k] = acc / count;
            }
        }
    }
    let mut field = VectorField::zeros(grid.clone(), n);
    field.values_mut().copy_from_slice(&values);
    field.zero_boundary();
    field
}

fn random_unit(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return c.iter().map(|x| x / norm).collect();
        }
    }
}

/// One seeded descent run.
fn descend_once(
    obj: &dyn QuotientObjective,
    grid: &Grid,
    n: usize,
    opts: &MinimizeOptions,
    restart: usize,
) -> Result<EigenResult> {
    let p = obj.p();
    let mut rng = task_rng(opts.seed, restart as u64);
    let mut u = if restart == 0 {
        let c = random_unit(n, &mut rng);
        ground_state_init(grid, &c)
    } else {
        smoothed_noise_init(grid, n, &mut rng)
    };
    normalize_field(&mut u, p)?;

    let mut q = obj.quotient(&u)?;
    let mut history = vec![q];
    let window = 10;
    let mut alpha = 1.0f64;
    let mut final_step = 0.0;
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        let g = obj.log_gradient(&u)?;
        let g_inf = g.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if g_inf <= opts.gradient_tolerance {
            break;
        }
        let gg: f64 = g.values().iter().map(|x| x * x).sum();

        // Armijo backtracking on the log-quotient
        alpha = (alpha * 2.0).min(1e12);
        let mut accepted = false;
        while alpha >= 1e-18 {
            let mut trial = u.clone();
            trial.axpy(-alpha, &g);
            if normalize_field(&mut trial, p).is_err() {
                alpha *= opts.backtrack;
                continue;
            }
            let q_trial = obj.quotient(&trial)?;
            if q_trial.ln() <= q.ln() - opts.armijo_c * alpha * gg {
                u = trial;
                q = q_trial;
                final_step = alpha;
                accepted = true;
                break;
            }
            alpha *= opts.backtrack;
        }

        if !accepted {
            // no descent step at machine precision: fine if a stopping
            // criterion already holds, otherwise a genuine stall
            let plateaued = history.len() > window && {
                let prev = history[history.len() - 1 - window];
                (prev - q) <= opts.quotient_tolerance * window as f64 * q.abs()
            };
            if plateaued || g_inf <= opts.gradient_tolerance {
                break;
            }
            return Err(Error::Stall {
                iteration: iter,
                quotient: q,
                gradient_norm: g_inf,
            });
        }

        history.push(q);
        if history.len() > window {
            let prev = history[history.len() - 1 - window];
            if (prev - q) <= opts.quotient_tolerance * window as f64 * q.abs() {
                break;
            }
        }
    }

    // the reported eigenvalue is the recomputed quotient of the final field
    let lambda = obj.quotient(&u)?;
    Ok(EigenResult {
        lambda,
        p,
        iterations,
        final_step,
        quotient_history: history,
        field: u,
    })
}

/// Multi-restart projected descent; returns the best run (smallest final
/// quotient, ties broken by the smallest restart index).
pub(crate) fn descend(
    obj: &dyn QuotientObjective,
    grid: &Grid,
    n: usize,
    opts: &MinimizeOptions,
) -> Result<EigenResult> {
    opts.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            reason: "need at least one component".into(),
        });
    }
    let runs: Vec<(usize, Result<EigenResult>)> = (0..opts.restarts.max(1))
        .into_par_iter()
        .map(|r| (r, descend_once(obj, grid, n, opts, r)))
        .collect();

    let mut best: Option<(usize, EigenResult)> = None;
    let mut first_err: Option<Error> = None;
    for (r, run) in runs {
        match run {
            Ok(res) => {
                let better = match &best {
                    None => true,
                    Some((br, bres)) => {
                        res.lambda < bres.lambda || (res.lambda == bres.lambda && r < *br)
                    }
                };
                if better {
                    best = Some((r, res));
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    match best {
        Some((_, res)) => Ok(res),
        None => Err(first_err.unwrap_or(Error::ZeroField)),
    }
}
