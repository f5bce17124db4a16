//! Exact vector-algebra identities and inequalities: Lagrange's identity,
//! modulus fields, gradient domination, proportionality residuals, rank-one
//! collapse detection, and the monotonicity inequalities of the power map
//! `a -> |a|^{p-2} a`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{cell_midpoint_values, discrete_gradient, ScalarField, VectorField};
use crate::quad::adaptive_quad;

/// Both sides of Lagrange's identity for coefficients `t` and vectors `vs`
/// (each of the same length d):
///
/// lhs = |sum_i t_i V_i|^2,
/// rhs = (sum_i t_i^2)(sum_i |V_i|^2) - sum_{i<j} |t_i V_j - t_j V_i|^2.
///
/// The two sides are evaluated independently by direct summation so the
/// caller can compare them.
pub fn lagrange_gap(t: &[f64], vs: &[Vec<f64>]) -> Result<(f64, f64)> {
    if t.len() != vs.len() || t.is_empty() {
        return Err(Error::ComponentMismatch(t.len(), vs.len()));
    }
    let d = vs[0].len();
    if vs.iter().any(|v| v.len() != d) || d == 0 {
        return Err(Error::ComponentMismatch(d, 0));
    }
    let n = t.len();

    let mut combo = vec![0.0; d];
    for i in 0..n {
        for (c, &v) in combo.iter_mut().zip(&vs[i]) {
            *c += t[i] * v;
        }
    }
    let lhs: f64 = combo.iter().map(|c| c * c).sum();

    let t_sq: f64 = t.iter().map(|x| x * x).sum();
    let v_sq: f64 = vs.iter().flat_map(|v| v.iter().map(|x| x * x)).sum();
    let mut cross = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for a in 0..d {
                let e = t[i] * vs[j][a] - t[j] * vs[i][a];
                s += e * e;
            }
            cross += s;
        }
    }
    Ok((lhs, t_sq * v_sq - cross))
}

/// The modulus field `w(x) = |u(x)|` (nodewise Euclidean norm).
pub fn modulus_field(u: &VectorField) -> ScalarField {
    let n = u.n_comp();
    let values: Vec<f64> = (0..u.grid().node_count())
        .map(|node| {
            u.node(node).iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    debug_assert_eq!(values.len() * n / n, values.len());
    ScalarField::new(u.grid().clone(), values).expect("modulus of a valid field is valid")
}

/// Cellwise check of `|grad w| <= |Du|` together with the termwise
/// decomposition `w^2 |grad w|^2 + sum_{i<j} |u_i grad u_j - u_j grad u_i|^2
/// = w^2 |Du|^2`.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    /// max over all cells of `|grad w| - |Du|`.
    pub max_violation: f64,
    /// Same max restricted to cells whose corner values of `w` all exceed
    /// `threshold`.
    pub max_violation_positive_w: f64,
    /// max over positive-w cells of the termwise identity defect,
    /// normalized by `1 + w^2 |Du|^2`.
    pub identity_defect: f64,
    /// Corner threshold used for the positive-w restriction (the grid spacing).
    pub threshold: f64,
}

/// Evaluates the gradient-domination inequality and the underlying
/// decomposition on every cell. Fields are compared at cell midpoints.
pub fn gradient_domination(u: &VectorField) -> DominationReport {
    let grid = u.grid();
    let n = u.n_comp();
    let dim = grid.dim();
    let w = modulus_field(u);
    let wv = w.to_vector();
    let grad_w = discrete_gradient(&wv);
    let grad_u = discrete_gradient(u);
    let w_mid = cell_midpoint_values(&wv);
    let u_mid = cell_midpoint_values(u);
    let threshold = grid.max_spacing();

    let mut max_violation = f64::NEG_INFINITY;
    let mut max_violation_pos = f64::NEG_INFINITY;
    let mut identity_defect = 0.0f64;

    for cell in 0..grid.cell_count() {
        let gw = grad_w.frobenius_sq(cell).sqrt();
        let du = grad_u.frobenius_sq(cell).sqrt();
        let viol = gw - du;
        max_violation = max_violation.max(viol);

        let corners = grid.cell_corners(cell);
        let positive = corners
            .as_slice()
            .iter()
            .all(|&c| w.values()[c] > threshold);
        if !positive {
            continue;
        }
        max_violation_pos = max_violation_pos.max(viol);

        // termwise decomposition at the cell midpoint
        let wm = w_mid[cell];
        let mut cross = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let ui = u_mid[cell * n + i];
                let uj = u_mid[cell * n + j];
                let gi = grad_u.gradient(cell, i);
                let gj = grad_u.gradient(cell, j);
                let mut s = 0.0;
                for a in 0..dim {
                    let e = ui * gj[a] - uj * gi[a];
                    s += e * e;
                }
                cross += s;
            }
        }
        let lhs = wm * wm * gw * gw + cross;
        let rhs = wm * wm * du * du;
        identity_defect = identity_defect.max((lhs - rhs).abs() / (1.0 + rhs));
    }

    DominationReport {
        max_violation,
        max_violation_positive_w: if max_violation_pos.is_finite() {
            max_violation_pos
        } else {
            0.0
        },
        identity_defect,
        threshold,
    }
}

/// Result of [`proportionality_residual`].
#[derive(Debug, Clone, Copy)]
pub struct ProportionalityResidual {
    /// max over cells and component pairs i<j of `|u_i grad u_j - u_j grad u_i|`.
    pub value: f64,
    /// True when N = 1 and the residual is vacuously zero.
    pub vacuous: bool,
}

/// Pointwise rank-one witness: the residual vanishes exactly on fields of
/// the form `c * f`. Midpoint values of `u` pair with cell gradients.
pub fn proportionality_residual(u: &VectorField) -> ProportionalityResidual {
    let n = u.n_comp();
    if n == 1 {
        return ProportionalityResidual {
            value: 0.0,
            vacuous: true,
        };
    }
    let grid = u.grid();
    let dim = grid.dim();
    let grad = discrete_gradient(u);
    let mids = cell_midpoint_values(u);
    let mut max = 0.0f64;
    for cell in 0..grid.cell_count() {
        for i in 0..n {
            for j in (i + 1)..n {
                let ui = mids[cell * n + i];
                let uj = mids[cell * n + j];
                let gi = grad.gradient(cell, i);
                let gj = grad.gradient(cell, j);
                let mut s = 0.0;
                for a in 0..dim {
                    let e = ui * gj[a] - uj * gi[a];
                    s += e * e;
                }
                max = max.max(s.sqrt());
            }
        }
    }
    ProportionalityResidual {
        value: max,
        vacuous: false,
    }
}

/// Best rank-one factorization `u ~ c * omega` of a vector field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseReport {
    /// Unit direction vector, first component above 1e-12 in magnitude made
    /// positive.
    pub c: Vec<f64>,
    /// Ratio sigma_2 / sigma_1 of the node-sample matrix; zero iff the field
    /// is exactly rank-one.
    pub residual_ratio: f64,
    /// Projection of the samples onto `c`.
    pub omega: ScalarField,
}

/// Rank-one fit through the N x N Gram matrix of the node samples: power
/// iteration for the top direction, deflation for the second. At most 200
/// iterations, convergence when successive direction estimates differ by
/// less than 1e-12.
pub fn rank_one_factor(u: &VectorField) -> Result<CollapseReport> {
    if u.is_zero() {
        return Err(Error::ZeroField);
    }
    let n = u.n_comp();
    let nodes = u.grid().node_count();

    // Gram matrix of the (nodes x N) sample matrix
    let mut gram = vec![0.0; n * n];
    for node in 0..nodes {
        let row = u.node(node);
        for i in 0..n {
            for j in 0..n {
                gram[i * n + j] += row[i] * row[j];
            }
        }
    }

    let (lam1, c1) = power_iteration(&gram, n, None);
    let (lam2, _) = power_iteration(&gram, n, Some(&c1));
    let sigma1 = lam1.max(0.0).sqrt();
    let sigma2 = lam2.max(0.0).sqrt();
    let residual_ratio = if sigma1 > 0.0 {
        (sigma2 / sigma1).clamp(0.0, 1.0)
    } else {
        return Err(Error::ZeroField);
    };

    // canonical sign
    let mut c = c1;
    if let Some(&lead) = c.iter().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            for x in &mut c {
                *x = -*x;
            }
        }
    }
    let omega_values: Vec<f64> = (0..nodes)
        .map(|node| u.node(node).iter().zip(&c).map(|(a, b)| a * b).sum())
        .collect();
    let omega = ScalarField::new(u.grid().clone(), omega_values)
        .expect("projection of a valid field is valid");

    Ok(CollapseReport {
        c,
        residual_ratio,
        omega,
    })
}

/// Top eigenpair of a symmetric PSD matrix, optionally deflated against a
/// unit vector.
fn power_iteration(gram: &[f64], n: usize, deflate: Option<&[f64]>) -> (f64, Vec<f64>) {
    let matvec = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            out[i] = (0..n).map(|j| gram[i * n + j] * v[j]).sum();
        }
        if let Some(c) = deflate {
            let proj: f64 = out.iter().zip(c).map(|(a, b)| a * b).sum();
            for (o, &ci) in out.iter_mut().zip(c) {
                *o -= proj * ci;
            }
        }
    };

    // start direction: uniform, made orthogonal to the deflated direction;
    // fall back to the least-aligned basis vector if that degenerates
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    if let Some(c) = deflate {
        let proj: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
        for (x, &ci) in v.iter_mut().zip(c) {
            *x -= proj * ci;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            let k = c
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            v.iter_mut().for_each(|x| *x = 0.0);
            v[k] = 1.0;
            let proj: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (x, &ci) in v.iter_mut().zip(c) {
                *x -= proj * ci;
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in &mut v {
                *x /= norm;
            }
        } else {
            for x in &mut v {
                *x /= norm;
            }
        }
    }

    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..200 {
        matvec(&v, &mut w);
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return (0.0, v);
        }
        // align sign so the convergence test sees a Cauchy sequence
        let dot: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        let mut delta = 0.0f64;
        for (vi, &wi) in v.iter_mut().zip(&w) {
            let next = sign * wi / norm;
            delta = delta.max((next - *vi).abs());
            *vi = next;
        }
        if delta < 1e-12 {
            break;
        }
    }
    (lambda.max(0.0), v)
}

/// The power map `a -> |a|^{p-2} a`, extended continuously by 0 at the
/// origin (valid since p > 1).
pub fn vector_power(a: &[f64], p: f64) -> Vec<f64> {
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; a.len()];
    }
    let scale = if p == 2.0 { 1.0 } else { norm.powf(p - 2.0) };
    a.iter().map(|&x| scale * x).collect()
}

/// Outcome of [`monotonicity_bounds`].
#[derive(Debug, Clone, Copy)]
pub struct MonotonicityCheck {
    pub upper_ok: bool,
    pub lower_ok: bool,
    pub lhs: f64,
    pub upper_rhs: f64,
    pub lower_rhs: f64,
}

/// Numerically verifies, for `1 < p <= 2`, the two bounds on the power map:
///
/// upper: `| |a|^{p-2}a - |b|^{p-2}b | <= (3-p) |b-a| int_0^1 |a + tau(b-a)|^{p-2} dtau`
/// lower: `| |a|^{p-2}a - |b|^{p-2}b | >= (p-1) |b-a| (1 + |a|^2 + |b|^2)^{(p-2)/2}`
///
/// The tau-integral is evaluated by adaptive quadrature split at the point
/// of closest approach to the origin; when the segment passes through 0 the
/// (integrable) singularity is integrated analytically.
pub fn monotonicity_bounds(a: &[f64], b: &[f64], p: f64) -> Result<MonotonicityCheck> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: format!("monotonicity bounds require 1 < p <= 2, got {p}"),
        });
    }
    if a.len() != b.len() {
        return Err(Error::ComponentMismatch(a.len(), b.len()));
    }

    let pa = vector_power(a, p);
    let pb = vector_power(b, p);
    let lhs = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();

    let diff: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let dist = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    if dist == 0.0 {
        return Ok(MonotonicityCheck {
            upper_ok: true,
            lower_ok: true,
            lhs: 0.0,
            upper_rhs: 0.0,
            lower_rhs: 0.0,
        });
    }

    let na_sq: f64 = a.iter().map(|x| x * x).sum();
    let nb_sq: f64 = b.iter().map(|x| x * x).sum();

    let tau_integral = segment_power_integral(a, &diff, p - 2.0);
    let upper_rhs = (3.0 - p) * dist * tau_integral;
    let lower_rhs = (p - 1.0) * dist * (1.0 + na_sq + nb_sq).powf(0.5 * (p - 2.0));

    let slack = 1e-9;
    Ok(MonotonicityCheck {
        upper_ok: lhs <= upper_rhs * (1.0 + slack) + 1e-12,
        lower_ok: lhs >= lower_rhs * (1.0 - slack) - 1e-12,
        lhs,
        upper_rhs,
        lower_rhs,
    })
}

/// `int_0^1 |a + tau d|^e dtau` for `e in (-1, 0]`.
fn segment_power_integral(a: &[f64], d: &[f64], e: f64) -> f64 {
    if e == 0.0 {
        return 1.0;
    }
    let dd: f64 = d.iter().map(|x| x * x).sum();
    let ad: f64 = a.iter().zip(d).map(|(x, y)| x * y).sum();
    let tau_star = (-ad / dd).clamp(0.0, 1.0);
    let at_min: f64 = a
        .iter()
        .zip(d)
        .map(|(x, y)| {
            let v = x + tau_star * y;
            v * v
        })
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x.abs())
        .chain(a.iter().zip(d).map(|(x, y)| (x + y).abs()))
        .fold(0.0f64, f64::max);

    if at_min <= 1e-13 * scale.max(1e-300) {
        // segment passes through the origin: |a + tau d| = |d| |tau - tau*|
        // exactly, so the integral is elementary
        let norm_d = dd.sqrt();
        let q = e + 1.0;
        return norm_d.powf(e) * (tau_star.powf(q) + (1.0 - tau_star).powf(q)) / q;
    }

    let f = |tau: f64| -> f64 {
        let r_sq: f64 = a
            .iter()
            .zip(d)
            .map(|(x, y)| {
                let v = x + tau * y;
                v * v
            })
            .sum();
        r_sq.sqrt().powf(e)
    };
    // Split at the closest approach and substitute tau = tau* +- R sigma^m
    // with m = 1/(1+e) on each side; this absorbs the near-singular layer
    // so the adaptive rule sees a bounded integrand even for tiny closest
    // distances.
    let m = 1.0 / (1.0 + e);
    let mut total = 0.0;
    if tau_star > 0.0 {
        let r = tau_star;
        let g = |sigma: f64| f(tau_star - r * sigma.powf(m)) * r * m * sigma.powf(m - 1.0);
        total += adaptive_quad(&g, 0.0, 1.0, 1e-13, 1e-11);
    }
    if tau_star < 1.0 {
        let r = 1.0 - tau_star;
        let g = |sigma: f64| f(tau_star + r * sigma.powf(m)) * r * m * sigma.powf(m - 1.0);
        total += adaptive_quad(&g, 0.0, 1.0, 1e-13, 1e-11);
    }
    total
}

/// `|x|^{p-2} x` for scalars.
#[inline]
pub fn scalar_power(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if p == 2.0 {
        x
    } else {
        x.abs().powf(p - 2.0) * x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use crate::rng::task_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn sin_field(grid: Grid, coeffs: &[f64]) -> VectorField {
        let (a, b) = (grid.axis(0).start, grid.axis(0).end);
        let coeffs = coeffs.to_vec();
        VectorField::from_fn(grid, coeffs.len(), move |x, _, k| {
            coeffs[k] * (PI * (x - a) / (b - a)).sin()
        })
    }

    #[test]
    fn lagrange_single_term() {
        let (lhs, rhs) = lagrange_gap(&[2.0], &[vec![1.0, -3.0, 0.5]]).unwrap();
        assert_eq!(lhs, rhs);
        assert!((lhs - 4.0 * (1.0 + 9.0 + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn lagrange_unit_coefficient() {
        let vs = vec![vec![0.3, -1.2], vec![7.0, 2.0]];
        let (lhs, rhs) = lagrange_gap(&[1.0, 0.0], &vs).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((lhs - (0.09 + 1.44)).abs() < 1e-12);
    }

    #[test]
    fn lagrange_mismatch_is_error() {
        assert!(lagrange_gap(&[1.0, 2.0], &[vec![1.0]]).is_err());
    }

    #[test]
    fn lagrange_random_gap_small() {
        let mut rng = task_rng(11, 0);
        for _ in 0..1000 {
            let n = rng.gen_range(1..=8);
            let d = rng.gen_range(1..=4);
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let vs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect();
            let (lhs, rhs) = lagrange_gap(&t, &vs).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()),
                "gap too large: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn modulus_pythagoras() {
        let g = Grid::line(0.0, 1.0, 21).unwrap();
        let f = |x: f64| (PI * x).sin();
        let u = VectorField::from_fn(g, 2, move |x, _, k| if k == 0 { 3.0 * f(x) } else { 4.0 * f(x) });
        let w = modulus_field(&u);
        for (node, &wv) in w.values().iter().enumerate() {
            let (x, _) = w.grid().node_coords(node);
            let expect = if w.grid().is_boundary(node) { 0.0 } else { 5.0 * f(x) };
            assert!((wv - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn modulus_scalar_abs() {
        let g = Grid::line(0.0, 1.0, 21).unwrap();
        let u = VectorField::from_fn(g, 1, |x, _, _| (2.0 * PI * x).sin());
        let w = modulus_field(&u);
        for (node, &wv) in w.values().iter().enumerate() {
            assert!((wv - u.node(node)[0].abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn domination_scalar_nonnegative() {
        let g = Grid::line(0.0, 1.0, 201).unwrap();
        let u = VectorField::from_fn(g, 1, |x, _, _| (PI * x).sin());
        let rep = gradient_domination(&u);
        // N = 1 with constant sign: |grad w| = |grad u| exactly
        assert!(rep.max_violation <= 1e-12, "{rep:?}");
    }

    #[test]
    fn domination_rank_one_equality() {
        let g = Grid::line(0.0, 1.0, 101).unwrap();
        let u = sin_field(g, &[0.6, -0.8]);
        let rep = gradient_domination(&u);
        assert!(rep.max_violation.abs() <= 1e-10, "{rep:?}");
        assert!(rep.identity_defect <= 1e-10, "{rep:?}");
    }

    #[test]
    fn domination_smooth_field_order_h() {
        let g = Grid::line(0.0, 1.0, 801).unwrap();
        let h = g.max_spacing();
        let u = VectorField::from_fn(g, 3, |x, _, k| match k {
            0 => (PI * x).sin(),
            1 => 0.5 * (2.0 * PI * x).sin() + 0.3 * (PI * x).sin(),
            _ => 0.2 * (3.0 * PI * x).sin() - 0.4 * (PI * x).sin(),
        });
        let rep = gradient_domination(&u);
        assert!(
            rep.max_violation_positive_w <= 50.0 * h,
            "violation {} vs h {}",
            rep.max_violation_positive_w,
            h
        );
        assert!(rep.identity_defect <= 50.0 * h, "{rep:?}");
    }

    #[test]
    fn proportionality_rank_one_zero() {
        let g = Grid::line(0.0, 1.0, 64).unwrap();
        let u = sin_field(g, &[1.0, 2.0, -0.5]);
        let r = proportionality_residual(&u);
        assert!(!r.vacuous);
        assert!(r.value < 1e-12, "{}", r.value);
    }

    #[test]
    fn proportionality_independent_positive() {
        let g = Grid::line(0.0, 1.0, 64).unwrap();
        let u = VectorField::from_fn(g, 2, |x, _, k| {
            if k == 0 {
                (PI * x).sin()
            } else {
                (2.0 * PI * x).sin()
            }
        });
        let r = proportionality_residual(&u);
        assert!(r.value > 1e-2, "{}", r.value);
    }

    #[test]
    fn proportionality_scalar_vacuous() {
        let g = Grid::line(0.0, 1.0, 16).unwrap();
        let u = VectorField::from_fn(g, 1, |x, _, _| x * (1.0 - x));
        let r = proportionality_residual(&u);
        assert!(r.vacuous);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn rank_one_axis_aligned() {
        let g = Grid::line(0.0, 1.0, 65).unwrap();
        let f = |x: f64| (PI * x).sin();
        let u = VectorField::from_fn(g, 2, move |x, _, k| if k == 0 { 2.0 * f(x) } else { 0.0 });
        let rep = rank_one_factor(&u).unwrap();
        assert!((rep.c[0] - 1.0).abs() < 1e-12);
        assert!(rep.c[1].abs() < 1e-12);
        assert!(rep.residual_ratio < 1e-12);
        for (node, &o) in rep.omega.values().iter().enumerate() {
            assert!((o - 2.0 * u.node(node)[0] / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_diagonal_direction() {
        let g = Grid::line(0.0, 1.0, 65).unwrap();
        let u = sin_field(g, &[1.0, 1.0]);
        let rep = rank_one_factor(&u).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((rep.c[0] - inv_sqrt2).abs() < 1e-10);
        assert!((rep.c[1] - inv_sqrt2).abs() < 1e-10);
        assert!(rep.residual_ratio < 1e-12);
    }

    #[test]
    fn rank_one_sign_canonical() {
        let g = Grid::line(0.0, 1.0, 65).unwrap();
        let u = sin_field(g, &[-1.0, -1.0]);
        let rep = rank_one_factor(&u).unwrap();
        assert!(rep.c[0] > 0.0);
        // omega absorbs the sign
        assert!(rep.omega.values()[32] < 0.0);
    }

    #[test]
    fn rank_one_orthogonal_equal_norms() {
        // orthogonal components of equal norm: Gram = sigma^2 I, ratio 1.
        // Oracle: closed-form eigenvalues of the 2x2 Gram matrix.
        let g = Grid::line(0.0, 1.0, 257).unwrap();
        let u = VectorField::from_fn(g.clone(), 2, |x, _, k| {
            if k == 0 {
                (PI * x).sin()
            } else {
                (2.0 * PI * x).sin()
            }
        });
        // brute-force 2x2 Gram eigenvalues
        let (mut g00, mut g01, mut g11) = (0.0, 0.0, 0.0);
        for node in 0..g.node_count() {
            let r = u.node(node);
            g00 += r[0] * r[0];
            g01 += r[0] * r[1];
            g11 += r[1] * r[1];
        }
        let tr = g00 + g11;
        let det = g00 * g11 - g01 * g01;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
        let expected = (l2 / l1).sqrt();

        let rep = rank_one_factor(&u).unwrap();
        // near-degenerate pair: power iteration resolves the ratio to the
        // width of the (tiny) spectral gap
        assert!(
            (rep.residual_ratio - expected).abs() < 1e-6,
            "{} vs {}",
            rep.residual_ratio,
            expected
        );
        // sin and 2sin are orthogonal with equal discrete norms
        assert!((rep.residual_ratio - 1.0).abs() < 1e-6);
    }

    #[test]
    fn collapse_report_json_shape() {
        let g = Grid::line(0.0, 1.0, 17).unwrap();
        let u = sin_field(g, &[0.6, 0.8]);
        let rep = rank_one_factor(&u).unwrap();
        let v = serde_json::to_value(&rep).unwrap();
        assert!(v["c"].is_array());
        assert!(v["residual_ratio"].is_number());
        assert!(v["omega"]["values"].is_array());
    }

    #[test]
    fn rank_one_zero_field_is_error() {
        let g = Grid::line(0.0, 1.0, 9).unwrap();
        let u = VectorField::zeros(g, 2);
        assert!(matches!(rank_one_factor(&u), Err(Error::ZeroField)));
    }

    #[test]
    fn vector_power_examples() {
        assert_eq!(vector_power(&[3.0, -1.0], 2.0), vec![3.0, -1.0]);
        assert_eq!(vector_power(&[0.0, 0.0], 1.3), vec![0.0, 0.0]);
        let v = vector_power(&[3.0, 4.0], 3.0);
        assert!((v[0] - 15.0).abs() < 1e-12);
        assert!((v[1] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_p2_antipodal_equality() {
        let a = [1.5, -0.5];
        let b = [-1.5, 0.5];
        let chk = monotonicity_bounds(&a, &b, 2.0).unwrap();
        assert!(chk.upper_ok && chk.lower_ok);
        let two_norm_a = 2.0 * (1.5f64 * 1.5 + 0.25).sqrt();
        assert!((chk.lhs - two_norm_a).abs() < 1e-12);
        assert!((chk.upper_rhs - two_norm_a).abs() < 1e-12);
        assert!((chk.lower_rhs - two_norm_a).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_equal_points() {
        let a = [0.3, 0.7, -0.1];
        let chk = monotonicity_bounds(&a, &a, 1.5).unwrap();
        assert!(chk.upper_ok && chk.lower_ok);
        assert_eq!(chk.lhs, 0.0);
    }

    #[test]
    fn monotonicity_through_origin() {
        // b = -2a: segment passes through 0; analytic branch
        let a = [0.8, -0.6];
        let b = [-1.6, 1.2];
        for p in [1.1, 1.5, 1.9] {
            let chk = monotonicity_bounds(&a, &b, p).unwrap();
            assert!(chk.upper_ok && chk.lower_ok, "p={p}: {chk:?}");
        }
    }

    #[test]
    fn monotonicity_random_sampling() {
        let mut rng = task_rng(5, 0);
        for &p in &[1.1, 1.5, 1.9, 2.0] {
            for _ in 0..2000 {
                let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let b: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let chk = monotonicity_bounds(&a, &b, p).unwrap();
                assert!(chk.upper_ok, "upper failed p={p} a={a:?} b={b:?} {chk:?}");
                assert!(chk.lower_ok, "lower failed p={p} a={a:?} b={b:?} {chk:?}");
            }
        }
    }

    #[test]
    fn tau_integral_against_midpoint_oracle() {
        // independent check of the quadrature path on a regular segment
        let a = [1.0, 0.4];
        let d = [-1.3, 0.2];
        let e = -0.5;
        let quad_val = segment_power_integral(&a, &d, e);
        let n = 200_000;
        let mut acc = 0.0;
        for i in 0..n {
            let tau = (i as f64 + 0.5) / n as f64;
            let x = a[0] + tau * d[0];
            let y = a[1] + tau * d[1];
            acc += (x * x + y * y).sqrt().powf(e);
        }
        let mid = acc / n as f64;
        assert!((quad_val - mid).abs() < 1e-8, "{quad_val} vs {mid}");
    }

    proptest! {
        #[test]
        fn vector_power_is_odd(x in -5.0f64..5.0, y in -5.0f64..5.0, p in 1.1f64..4.0) {
            let a = [x, y];
            let na = [-x, -y];
            let va = vector_power(&a, p);
            let vna = vector_power(&na, p);
            prop_assert_eq!(va[0], -vna[0]);
            prop_assert_eq!(va[1], -vna[1]);
        }

        #[test]
        fn collapse_equivalence_rank_one(c0 in 0.1f64..2.0, c1 in -2.0f64..2.0) {
            let g = Grid::line(0.0, 1.0, 33).unwrap();
            let u = sin_field(g, &[c0, c1]);
            let prop_res = proportionality_residual(&u);
            let rep = rank_one_factor(&u).unwrap();
            prop_assert!(prop_res.value < 1e-10);
            // sigma_2/sigma_1 carries a sqrt(machine-eps) floor from the
            // roundoff of the Gram assembly
            prop_assert!(rep.residual_ratio < 1e-7);
        }
    }
}
