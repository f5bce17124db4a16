//! The generalized sine ODE system and the Dirichlet eigenvalue ladder.
//!
//! The second-order problem `-(|u'|^{p-2} u')' = L |u|^{p-2} u` is integrated
//! as the first-order system
//!
//! ```text
//! u' = |v|^{q-2} v,        v' = -L |u|^{p-2} u,       q = p / (p - 1),
//! ```
//!
//! with `v = |u'|^{p-2} u'` as the state variable, which keeps the right-hand
//! side continuous through the zeros of `u'`. The integrator is an adaptive
//! Dormand-Prince 5(4) pair with error-per-unit-step control and cubic
//! Hermite dense output between accepted steps.

use serde::Serialize;

use crate::error::{require_p, Error, Result};
use crate::vecalg::vector_power;

/// One sample of the first-order system.
#[derive(Debug, Clone)]
pub struct OdeState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// A time-ordered solution of the system, with enough data for cubic
/// Hermite interpolation between accepted steps.
#[derive(Debug, Clone)]
pub struct Trajectory {
    p: f64,
    lambda: f64,
    tol: f64,
    states: Vec<OdeState>,
    /// slopes (du/dt, dv/dt) at each accepted state
    slopes: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Trajectory {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn states(&self) -> &[OdeState] {
        &self.states
    }

    pub fn n_comp(&self) -> usize {
        self.states[0].u.len()
    }

    pub fn t_end(&self) -> f64 {
        self.states.last().unwrap().t
    }

    /// Dense output at time `t` via cubic Hermite interpolation.
    pub fn sample(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if t < self.states[0].t || t > self.t_end() * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidParameter {
                name: "t",
                reason: format!("outside trajectory range [0, {}]", self.t_end()),
            });
        }
        let idx = match self
            .states
            .binary_search_by(|s| s.t.partial_cmp(&t).unwrap())
        {
            Ok(i) => return Ok((self.states[i].u.clone(), self.states[i].v.clone())),
            Err(i) => i.saturating_sub(1).min(self.states.len() - 2),
        };
        let s0 = &self.states[idx];
        let s1 = &self.states[idx + 1];
        let h = s1.t - s0.t;
        let theta = ((t - s0.t) / h).clamp(0.0, 1.0);
        let (f0u, f0v) = (&self.slopes[idx].0, &self.slopes[idx].1);
        let (f1u, f1v) = (&self.slopes[idx + 1].0, &self.slopes[idx + 1].1);
        let u = hermite(theta, h, &s0.u, f0u, &s1.u, f1u);
        let v = hermite(theta, h, &s0.v, f0v, &s1.v, f1v);
        Ok((u, v))
    }

    /// Maximum over accepted states of the drift of the conserved quantity
    /// `(lambda/p) |u|^p + (1/q) |v|^q` (which is [`energy`] when lambda = 1).
    pub fn energy_drift(&self) -> f64 {
        let e0 = invariant_energy(&self.states[0].u, &self.states[0].v, self.p, self.lambda);
        self.states
            .iter()
            .map(|s| (invariant_energy(&s.u, &s.v, self.p, self.lambda) - e0).abs())
            .fold(0.0, f64::max)
    }

    /// Writes rows `t, u_1..u_N, v_1..v_N, energy`.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let n = self.n_comp();
        write!(w, "# t")?;
        for k in 0..n {
            write!(w, ", u{}", k + 1)?;
        }
        for k in 0..n {
            write!(w, ", v{}", k + 1)?;
        }
        writeln!(w, ", energy")?;
        for s in &self.states {
            write!(w, "{:.17e}", s.t)?;
            for x in &s.u {
                write!(w, ", {x:.17e}")?;
            }
            for x in &s.v {
                write!(w, ", {x:.17e}")?;
            }
            writeln!(w, ", {:.17e}", energy(&s.u, &s.v, self.p))?;
        }
        Ok(())
    }
}

fn hermite(theta: f64, h: f64, y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64]) -> Vec<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Closed-form first Dirichlet eigenvalue on (0, 1):
/// `(2 pi)^p (p - 1) / [p sin(pi / p)]^p`.
pub fn lambda_p_closed(p: f64) -> Result<f64> {
    require_p(p)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let s = p * (std::f64::consts::PI / p).sin();
    Ok(two_pi.powf(p) * (p - 1.0) / s.powf(p))
}

/// `(1/p) |u|^p + (1/q) |v|^q` with `q = p / (p - 1)`.
pub fn energy(u: &[f64], v: &[f64], p: f64) -> f64 {
    let q = p / (p - 1.0);
    norm(u).powf(p) / p + norm(v).powf(q) / q
}

/// The quantity conserved by the system at eigenvalue factor `lambda`:
/// `(lambda/p) |u|^p + (1/q) |v|^q`. Coincides with [`energy`] at lambda = 1.
pub fn invariant_energy(u: &[f64], v: &[f64], p: f64, lambda: f64) -> f64 {
    let q = p / (p - 1.0);
    lambda * norm(u).powf(p) / p + norm(v).powf(q) / q
}

// Dormand-Prince 5(4) coefficients (A matrix and embedded error row; the
// stage times are not needed for the autonomous system).
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
const ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct System {
    p: f64,
    q: f64,
    lambda: f64,
}

impl System {
    fn eval(&self, u: &[f64], v: &[f64], du: &mut [f64], dv: &mut [f64]) {
        let pu = vector_power(u, self.p);
        let pv = vector_power(v, self.q);
        du.copy_from_slice(&pv);
        for (o, x) in dv.iter_mut().zip(&pu) {
            *o = -self.lambda * x;
        }
    }
}

/// Integrates the first-order system from `u(0) = a`, `u'(0) = b`
/// (so `v(0) = |b|^{p-2} b`) up to `t_end`.
///
/// Error control is per unit step: the local error of each accepted step is
/// at most `tol * h / t_end`, which keeps the accumulated drift of the
/// conserved energy within a small multiple of `tol` over the whole horizon.
pub fn integrate_ivp(
    p: f64,
    lambda: f64,
    a: &[f64],
    b: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    require_p(p)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("must be positive, got {lambda}"),
        });
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must be positive, got {t_end}"),
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must lie in (0, 1), got {tol}"),
        });
    }
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ComponentMismatch(a.len(), b.len()));
    }

    let n = a.len();
    let sys = System {
        p,
        q: p / (p - 1.0),
        lambda,
    };
    let v0 = vector_power(b, p);

    let mut t = 0.0;
    let mut u = a.to_vec();
    let mut v = v0;
    let mut states = Vec::new();
    let mut slopes = Vec::new();

    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    sys.eval(&u, &v, &mut du, &mut dv);
    states.push(OdeState {
        t,
        u: u.clone(),
        v: v.clone(),
    });
    slopes.push((du.clone(), dv.clone()));

    // stage storage over the stacked state y = (u, v)
    let dim = 2 * n;
    let mut k = vec![vec![0.0; dim]; 7];
    for i in 0..n {
        k[0][i] = du[i];
        k[0][n + i] = dv[i];
    }

    let h_max = t_end / 20.0;
    let mut h = (t_end * 1e-3).min(h_max);
    let tau = tol / t_end; // error per unit step
    // Per-step floor: across the non-Lipschitz manifolds (u = 0 or v = 0
    // with fractional powers) the local order collapses and the per-unit
    // budget would force the step to zero. Crossing steps may carry up to
    // tol/500 each, which keeps the accumulated drift of a few thousand
    // such steps well inside the 100*tol energy contract.
    let err_floor = tol / 500.0;
    let mut stage_u = vec![0.0; n];
    let mut stage_v = vec![0.0; n];
    let mut y_new = vec![0.0; dim];

    while t < t_end {
        if h < 1e-14 * t_end {
            return Err(Error::StepUnderflow { t, h });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        // stages 2..7 (k[0] is fresh from FSAL or initialization)
        for s in 1..7 {
            for i in 0..n {
                let mut acc_u = 0.0;
                let mut acc_v = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc_u += A[s][j] * kj[i];
                    acc_v += A[s][j] * kj[n + i];
                }
                stage_u[i] = u[i] + h * acc_u;
                stage_v[i] = v[i] + h * acc_v;
            }
            let (head, tail) = k[s].split_at_mut(n);
            sys.eval(&stage_u, &stage_v, head, tail);
        }

        // 5th-order solution is stage 7's argument; error from the embedded pair
        for i in 0..dim {
            let (base, off) = if i < n { (u[i], 0) } else { (v[i - n], n) };
            let idx = if i < n { i } else { i - n };
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(6) {
                acc += A[6][j] * kj[off + idx];
            }
            y_new[i] = base + h * acc;
        }
        let mut err_norm = 0.0f64;
        for i in 0..dim {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += ERR[j] * kj[i];
            }
            e *= h;
            let y_here = if i < n { u[i] } else { v[i - n] };
            let w = 1.0 + y_here.abs().max(y_new[i].abs());
            err_norm = err_norm.max((e / w).abs());
        }

        let target = (tau * h).max(err_floor);
        if err_norm <= target {
            t += h;
            u.copy_from_slice(&y_new[..n]);
            v.copy_from_slice(&y_new[n..]);
            // FSAL: k7 was evaluated at (t + h, y_new)
            let k6 = k[6].clone();
            k[0].copy_from_slice(&k6);
            states.push(OdeState {
                t,
                u: u.clone(),
                v: v.clone(),
            });
            slopes.push((k6[..n].to_vec(), k6[n..].to_vec()));
        }

        let factor = if err_norm > 0.0 {
            0.9 * (target / err_norm).powf(0.25)
        } else {
            5.0
        };
        h = (h * factor.clamp(0.2, 5.0)).min(h_max);
    }

    Ok(Trajectory {
        p,
        lambda,
        tol,
        states,
        slopes,
    })
}

/// The generalized sine: scalar solution of the system at lambda = 1 with
/// `u(0) = 0`, `u'(0) = 1`.
pub fn psine(p: f64, t_end: f64, tol: f64) -> Result<Trajectory> {
    integrate_ivp(p, 1.0, &[0.0], &[1.0], t_end, tol)
}

/// Locations of the sign changes of the scalar component of a trajectory,
/// refined by bisection on the dense output to absolute tolerance `tol`.
fn extract_zeros(traj: &Trajectory, tol: f64) -> Vec<f64> {
    let mut zeros = Vec::new();
    let states = traj.states();
    for w in states.windows(2) {
        let (u0, u1) = (w[0].u[0], w[1].u[0]);
        if u0 == 0.0 && w[0].t == 0.0 {
            continue; // the seeded zero at t = 0
        }
        if u0 * u1 < 0.0 || (u1 == 0.0 && u0 != 0.0) {
            let mut lo = w[0].t;
            let mut hi = w[1].t;
            let f_lo = u0;
            for _ in 0..200 {
                if hi - lo <= tol {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let (um, _) = traj.sample(mid).expect("in range");
                if um[0] * f_lo > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
    }
    zeros
}

/// Smallest `T > 0` with `omega(T) = 0`, found by integrating until the
/// first sign change and bisecting on the dense output.
pub fn first_zero(p: f64, tol: f64) -> Result<f64> {
    let t_est = lambda_p_closed(p)?.powf(1.0 / p);
    let horizon_cap = 10.0 * t_est;
    let mut horizon = 1.5 * t_est;
    loop {
        let traj = psine(p, horizon, tol)?;
        let zeros = extract_zeros(&traj, tol);
        if let Some(&z) = zeros.first() {
            return Ok(z);
        }
        horizon *= 2.0;
        if horizon > horizon_cap {
            return Err(Error::NoSignChange {
                horizon: horizon_cap,
            });
        }
    }
}

/// One rung of the Dirichlet ladder.
#[derive(Debug, Clone, Serialize)]
pub struct LadderEntry {
    pub k: usize,
    pub lambda: f64,
}

/// The eigenvalue ladder `Lambda_k = T_k^p` from the first `k_max` zeros of
/// the generalized sine.
#[derive(Debug, Clone, Serialize)]
pub struct EigenLadder {
    pub p: f64,
    pub entries: Vec<LadderEntry>,
}

impl EigenLadder {
    /// JSON object `{p, entries, closed_form}` with the closed-form ladder
    /// `k^p lambda_p` alongside the shot values.
    pub fn export_json(&self) -> Result<serde_json::Value> {
        let lam = lambda_p_closed(self.p)?;
        let closed: Vec<f64> = self
            .entries
            .iter()
            .map(|e| (e.k as f64).powf(self.p) * lam)
            .collect();
        Ok(serde_json::json!({
            "p": self.p,
            "entries": self.entries,
            "closed_form": closed,
        }))
    }
}

/// Shoots the first `k_max` Dirichlet eigenvalues from one long integration
/// of the generalized sine.
pub fn shoot_ladder(p: f64, k_max: usize, tol: f64) -> Result<EigenLadder> {
    if k_max == 0 {
        return Err(Error::InvalidParameter {
            name: "k_max",
            reason: "must be at least 1".into(),
        });
    }
    let t_est = lambda_p_closed(p)?.powf(1.0 / p);
    let cap = 10.0 * k_max as f64 * t_est;
    let mut horizon = (k_max as f64 + 0.7) * t_est;
    loop {
        let traj = psine(p, horizon, tol)?;
        let zeros = extract_zeros(&traj, tol);
        if zeros.len() >= k_max {
            let entries = zeros
                .iter()
                .take(k_max)
                .enumerate()
                .map(|(i, &t)| LadderEntry {
                    k: i + 1,
                    lambda: t.powf(p),
                })
                .collect();
            return Ok(EigenLadder { p, entries });
        }
        horizon *= 1.5;
        if horizon > cap {
            return Err(Error::NoSignChange { horizon: cap });
        }
    }
}

/// Cached generalized-sine trajectory with dense output; extends itself when
/// sampled beyond the current horizon.
pub struct PsineCache {
    p: f64,
    tol: f64,
    traj: Trajectory,
}

impl PsineCache {
    pub fn new(p: f64, tol: f64) -> Result<PsineCache> {
        let t_est = lambda_p_closed(p)?.powf(1.0 / p);
        let traj = psine(p, 2.5 * t_est, tol)?;
        Ok(PsineCache { p, tol, traj })
    }

    fn ensure(&mut self, t: f64) -> Result<()> {
        if t > self.traj.t_end() {
            self.traj = psine(self.p, 1.5 * t, self.tol)?;
        }
        Ok(())
    }

    /// `omega(t)` for `t >= 0`.
    pub fn omega(&mut self, t: f64) -> Result<f64> {
        self.ensure(t)?;
        Ok(self.traj.sample(t)?.0[0])
    }

    /// The scaled solution `u(t) = (c / Lambda^{1/p}) omega(Lambda^{1/p} t)`
    /// of the system at eigenvalue factor `lambda` with `u(0) = 0`,
    /// `u'(0) = c`.
    pub fn explicit_solution(&mut self, lambda: f64, c: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                reason: format!("must be positive, got {lambda}"),
            });
        }
        let root = lambda.powf(1.0 / self.p);
        let w = self.omega(root * t)?;
        Ok(c.iter().map(|&ci| ci * w / root).collect())
    }
}

/// Integrates the same IVP with the adaptive Runge-Kutta scheme and a
/// fixed-step implicit midpoint scheme and returns the maximum pointwise
/// discrepancy of the stacked (u, v) state -- a numerical witness of
/// uniqueness, including across the non-Lipschitz manifolds.
pub fn uniqueness_stress(p: f64, lambda: f64, a: &[f64], b: &[f64], t_end: f64) -> Result<f64> {
    require_p(p)?;
    if a.iter().all(|&x| x == 0.0) && b.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidParameter {
            name: "a,b",
            reason: "initial data must not both vanish".into(),
        });
    }
    let traj = integrate_ivp(p, lambda, a, b, t_end, 1e-11)?;

    let n = a.len();
    let sys = System {
        p,
        q: p / (p - 1.0),
        lambda,
    };
    let t_scale = lambda_p_closed(p)?.powf(1.0 / p) / lambda.powf(1.0 / p);
    let steps = ((20_000.0 * t_end / t_scale).ceil() as usize).clamp(60_000, 800_000);
    let h = t_end / steps as f64;

    let mut u = a.to_vec();
    let mut v = vector_power(b, p);
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut mv = vec![0.0; n];
    let mut max_disc = 0.0f64;
    let compare_every = (steps / 2000).max(1);

    for step in 0..steps {
        // implicit midpoint: solve y_mid = y + (h/2) f(y_mid) by fixed point
        sys.eval(&u, &v, &mut du, &mut dv);
        for i in 0..n {
            mu[i] = u[i] + 0.5 * h * du[i];
            mv[i] = v[i] + 0.5 * h * dv[i];
        }
        for _ in 0..60 {
            sys.eval(&mu, &mv, &mut du, &mut dv);
            let mut delta = 0.0f64;
            for i in 0..n {
                let nu = u[i] + 0.5 * h * du[i];
                let nv = v[i] + 0.5 * h * dv[i];
                delta = delta.max((nu - mu[i]).abs().max((nv - mv[i]).abs()));
                mu[i] = nu;
                mv[i] = nv;
            }
            if delta < 1e-15 {
                break;
            }
        }
        for i in 0..n {
            u[i] = 2.0 * mu[i] - u[i];
            v[i] = 2.0 * mv[i] - v[i];
        }
        let t = (step + 1) as f64 * h;

        if (step + 1) % compare_every == 0 || step + 1 == steps {
            let (ru, rv) = traj.sample(t.min(traj.t_end()))?;
            let mut d = 0.0;
            for i in 0..n {
                d += (ru[i] - u[i]).powi(2) + (rv[i] - v[i]).powi(2);
            }
            max_disc = max_disc.max(d.sqrt());
        }
    }
    Ok(max_disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;
    use rand::Rng;
    use std::f64::consts::PI;

    // closed-form lambda_p evaluated with 50-digit arithmetic
    const LAMBDA_1_5: f64 = 5.318_718_076_379_171_6;
    const LAMBDA_3: f64 = 28.288_761_976_002_555;
    const LAMBDA_4: f64 = 73.056_818_275_501_83;

    #[test]
    fn lambda_closed_form_values() {
        assert!((lambda_p_closed(2.0).unwrap() - PI * PI).abs() < 1e-12);
        assert!((lambda_p_closed(4.0).unwrap() - LAMBDA_4).abs() < 1e-9 * LAMBDA_4);
        assert!((lambda_p_closed(1.5).unwrap() - LAMBDA_1_5).abs() < 1e-9 * LAMBDA_1_5);
        assert!((lambda_p_closed(3.0).unwrap() - LAMBDA_3).abs() < 1e-9 * LAMBDA_3);
        assert!(lambda_p_closed(1.0).is_err());
        assert!(lambda_p_closed(0.5).is_err());
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy(&[0.0], &[0.0], 2.0), 0.0);
        assert!((energy(&[3.0, 4.0], &[0.0, 0.0], 2.0) - 12.5).abs() < 1e-14);
        assert!((energy(&[0.0, 0.0], &[1.0, 0.0], 3.0) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn helmholtz_case_matches_sine() {
        let traj = integrate_ivp(2.0, 1.0, &[0.0], &[1.0], 2.0 * PI, 1e-10).unwrap();
        // structural invariants: strictly increasing times, exact initial state
        for w in traj.states().windows(2) {
            assert!(w[1].t > w[0].t);
        }
        assert_eq!(traj.states()[0].u[0], 0.0);
        assert_eq!(traj.states()[0].v[0], 1.0);
        let mut max_err = 0.0f64;
        for s in traj.states() {
            max_err = max_err.max((s.u[0] - s.t.sin()).abs());
            max_err = max_err.max((s.v[0] - s.t.cos()).abs());
        }
        // dense samples too
        for i in 0..200 {
            let t = 2.0 * PI * i as f64 / 200.0;
            let (u, v) = traj.sample(t).unwrap();
            max_err = max_err.max((u[0] - t.sin()).abs());
            max_err = max_err.max((v[0] - t.cos()).abs());
        }
        assert!(max_err <= 1e-8, "max err {max_err}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let traj = integrate_ivp(3.0, 1.0, &[0.0, 0.0], &[0.0, 0.0], 5.0, 1e-9).unwrap();
        for s in traj.states() {
            assert!(s.u.iter().all(|&x| x == 0.0));
            assert!(s.v.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn matches_explicit_solution_vector() {
        let (p, lambda) = (3.0, 5.0);
        let c = [1.0, 2.0];
        let t_end = 2.0;
        let traj = integrate_ivp(p, lambda, &[0.0, 0.0], &c, t_end, 1e-9).unwrap();
        let mut cache = PsineCache::new(p, 1e-10).unwrap();
        let mut max_err = 0.0f64;
        for i in 1..=100 {
            let t = t_end * i as f64 / 100.0;
            let (u, _) = traj.sample(t).unwrap();
            let expect = cache.explicit_solution(lambda, &c, t).unwrap();
            for k in 0..2 {
                max_err = max_err.max((u[k] - expect[k]).abs());
            }
        }
        assert!(max_err <= 1e-6, "max err {max_err}");
    }

    #[test]
    fn psine_initial_slope_exact() {
        let traj = psine(2.5, 1.0, 1e-8).unwrap();
        let s0 = &traj.states()[0];
        assert_eq!(s0.u[0], 0.0);
        assert_eq!(s0.v[0], 1.0); // |1|^{p-2} * 1
    }

    #[test]
    fn psine_energy_is_one_over_q() {
        for p in [1.5, 2.0, 3.0] {
            let q = p / (p - 1.0);
            let tol = 1e-10;
            let traj = psine(p, 8.0, tol).unwrap();
            for s in traj.states() {
                let e = energy(&s.u, &s.v, p);
                assert!(
                    (e - 1.0 / q).abs() <= 100.0 * tol,
                    "p={p}: energy {e} vs {}",
                    1.0 / q
                );
            }
        }
    }

    #[test]
    fn first_zero_p2_is_pi() {
        let t = first_zero(2.0, 1e-10).unwrap();
        assert!((t - PI).abs() < 1e-8, "got {t}");
    }

    #[test]
    fn first_zero_p4() {
        let t = first_zero(4.0, 1e-10).unwrap();
        assert!((t - LAMBDA_4.powf(0.25)).abs() < 1e-4, "got {t}");
    }

    #[test]
    fn first_zero_consistent_with_closed_form() {
        for p in [1.2, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0] {
            let t = first_zero(p, 1e-10).unwrap();
            let lam = lambda_p_closed(p).unwrap();
            let rel = (t.powf(p) - lam).abs() / lam;
            assert!(rel <= 1e-6, "p={p}: rel err {rel}");
        }
    }

    #[test]
    fn explicit_solution_at_origin_and_slope() {
        let mut cache = PsineCache::new(3.0, 1e-10).unwrap();
        let c = [0.7, -1.1];
        let at0 = cache.explicit_solution(2.0, &c, 0.0).unwrap();
        assert!(at0.iter().all(|&x| x == 0.0));
        // finite-difference derivative at 0 equals c
        let h = 1e-6;
        let at_h = cache.explicit_solution(2.0, &c, h).unwrap();
        for k in 0..2 {
            assert!(((at_h[k] / h) - c[k]).abs() <= 1e-5, "component {k}");
        }
    }

    #[test]
    fn psine_cache_extends_horizon() {
        let mut cache = PsineCache::new(2.0, 1e-9).unwrap();
        // far beyond the initial 2.5 half-period horizon
        let t = 12.0 * PI;
        let w = cache.omega(t).unwrap();
        assert!((w - t.sin()).abs() < 1e-5, "omega({t}) = {w}");
    }

    #[test]
    fn explicit_solution_linear_case() {
        let mut cache = PsineCache::new(2.0, 1e-10).unwrap();
        for i in 1..=20 {
            let t = i as f64 * 0.1;
            let u = cache.explicit_solution(4.0, &[1.0, 0.0], t).unwrap();
            assert!((u[0] - (2.0 * t).sin() / 2.0).abs() < 1e-7);
            assert_eq!(u[1], 0.0);
        }
    }

    #[test]
    fn ladder_p2_squares() {
        let ladder = shoot_ladder(2.0, 3, 1e-10).unwrap();
        for e in &ladder.entries {
            let expect = (e.k as f64 * PI).powi(2);
            assert!(
                (e.lambda - expect).abs() <= 1e-5 * expect,
                "k={}: {} vs {expect}",
                e.k,
                e.lambda
            );
        }
    }

    #[test]
    fn ladder_p3_second_rung() {
        let ladder = shoot_ladder(3.0, 2, 1e-10).unwrap();
        let lam3 = lambda_p_closed(3.0).unwrap();
        let e = &ladder.entries[1];
        assert_eq!(e.k, 2);
        assert!((e.lambda - 8.0 * lam3).abs() <= 1e-5 * 8.0 * lam3);
    }

    #[test]
    fn ladder_ratios_are_k_to_p() {
        for p in [1.5, 2.5] {
            let ladder = shoot_ladder(p, 3, 1e-10).unwrap();
            let l1 = ladder.entries[0].lambda;
            for e in &ladder.entries {
                let ratio = e.lambda / l1;
                let expect = (e.k as f64).powf(p);
                assert!(
                    (ratio - expect).abs() <= 1e-5 * expect,
                    "p={p} k={}: {ratio} vs {expect}",
                    e.k
                );
            }
        }
    }

    #[test]
    fn zero_spacing_half_period() {
        let ladder = shoot_ladder(2.7, 4, 1e-10).unwrap();
        let ts: Vec<f64> = ladder
            .entries
            .iter()
            .map(|e| e.lambda.powf(1.0 / 2.7))
            .collect();
        let t1 = ts[0];
        for w in ts.windows(2) {
            let gap = w[1] - w[0];
            assert!((gap - t1).abs() <= 1e-5 * t1, "gap {gap} vs {t1}");
        }
    }

    #[test]
    fn direction_invariance() {
        // a = 0: trajectory stays in span{b}
        let b = [3.0, 4.0];
        let unit = [0.6, 0.8];
        let traj = integrate_ivp(2.6, 1.0, &[0.0, 0.0], &b, 9.0, 1e-10).unwrap();
        for s in traj.states() {
            let ortho = (s.u[0] * unit[1] - s.u[1] * unit[0]).abs();
            assert!(ortho <= 1e-8, "orthogonal drift {ortho} at t={}", s.t);
        }
    }

    #[test]
    fn energy_conservation_random_ivps() {
        let mut rng = task_rng(77, 0);
        for trial in 0..10 {
            let p = rng.gen_range(1.2..6.0);
            let n = if trial % 2 == 0 { 1 } else { 3 };
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tol = 1e-9;
            let t_scale = lambda_p_closed(p).unwrap().powf(1.0 / p);
            let traj = integrate_ivp(p, 1.0, &a, &b, 3.5 * t_scale, tol).unwrap();
            let drift = traj.energy_drift();
            assert!(drift <= 100.0 * tol, "p={p} N={n}: drift {drift}");
        }
    }

    #[test]
    fn scaling_law_random() {
        let mut rng = task_rng(78, 0);
        for _ in 0..5 {
            let lambda = rng.gen_range(0.5..10.0);
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = 2.4;
            let t_end = 1.5;
            let traj = integrate_ivp(p, lambda, &[0.0; 3], &c, t_end, 1e-9).unwrap();
            let mut cache = PsineCache::new(p, 1e-10).unwrap();
            for i in 1..=40 {
                let t = t_end * i as f64 / 40.0;
                let (u, _) = traj.sample(t).unwrap();
                let expect = cache.explicit_solution(lambda, &c, t).unwrap();
                for k in 0..3 {
                    assert!(
                        (u[k] - expect[k]).abs() <= 1e-6,
                        "lambda={lambda} t={t} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn uniqueness_p2_tight() {
        let d = uniqueness_stress(2.0, 1.0, &[0.0], &[1.0], 6.0).unwrap();
        assert!(d <= 1e-8, "discrepancy {d}");
    }

    #[test]
    fn uniqueness_nonlipschitz_u() {
        // p = 1.5: u passes through 0 where |u|^{p-2} is singular
        let t1 = lambda_p_closed(1.5).unwrap().powf(1.0 / 1.5);
        let d = uniqueness_stress(1.5, 1.0, &[0.0, 0.0], &[1.0, 1.0], 2.5 * t1).unwrap();
        assert!(d <= 1e-5, "discrepancy {d}");
    }

    #[test]
    fn uniqueness_nonlipschitz_v() {
        // p = 3: v(0) = 0, so the dual power |v|^{q-2} is the singular one
        let t1 = lambda_p_closed(3.0).unwrap().powf(1.0 / 3.0);
        let d = uniqueness_stress(3.0, 1.0, &[1.0, 0.0], &[0.0, 0.0], 2.0 * t1).unwrap();
        assert!(d <= 1e-5, "discrepancy {d}");
    }

    #[test]
    fn sample_beyond_horizon_errors() {
        let traj = psine(2.0, 1.0, 1e-8).unwrap();
        assert!(traj.sample(2.0).is_err());
    }

    #[test]
    fn trajectory_csv_has_energy_column() {
        let traj = psine(2.0, 1.0, 1e-8).unwrap();
        let mut buf = Vec::new();
        traj.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().contains("energy"));
    }
}
