//! State-evolution recursions lower-bounding the estimation error of any
//! general first-order method, and the coefficient arrays of the
//! bound-achieving Bayes-AMP.
//!
//! Regression: with `tau_0^2 = inf`,
//!
//! ```text
//! tilde_tau_s^2 = mmse(tau_s^2) / delta
//! sigma_s^2     = (tau_Theta^2 - mmse(tau_s^2)) / delta
//! 1 / tau_{s+1}^2 = score_expectation(sigma_s, tilde_tau_s)
//! ```
//!
//! Low-rank: over PSD matrices, starting from `Q_0 = 0`,
//!
//! ```text
//! Qhat_t  = V_{Theta,V}(Q_t) / delta
//! Q_{t+1} = V_{Lambda,U}(Qhat_t)
//! ```
//!
//! Gaussian side information on the signal folds into both recursions as an
//! additive information shift inside the `V` map (see [`crate::prior`]).

use nalgebra::DMatrix;

use crate::channel::{score_expectation, OutputChannel};
use crate::error::Error;
use crate::mat;
use crate::prior::{JointPrior, Prior};
use crate::quad::GaussHermite;
use crate::Result;

/// Convergence threshold for fixed-point iteration (max-norm).
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Default iteration cap for trace runners.
pub const DEFAULT_T_MAX: usize = 200;

/// Scalar state of the regression recursion at iteration `t`.
#[derive(Debug, Clone, Copy)]
pub struct RegressionSEState {
    pub t: usize,
    /// Effective observation noise variance; `inf` at `t = 0`.
    pub tau2: f64,
    pub sigma2: f64,
    pub tilde_tau2: f64,
}

impl RegressionSEState {
    /// Initial state: `tau_0^2 = inf`, with `sigma_0`, `tilde_tau_0` derived
    /// from the conditional-prior statistics.
    pub fn initial(prior: &JointPrior, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        let mmse_inf = prior.mmse_scalar(f64::INFINITY)?;
        let tau_theta2 = prior.second_moment_scalar();
        Ok(RegressionSEState {
            t: 0,
            tau2: f64::INFINITY,
            sigma2: (tau_theta2 - mmse_inf) / delta,
            tilde_tau2: mmse_inf / delta,
        })
    }

    /// `delta * (sigma^2 + tilde_tau^2) - tau_Theta^2`, which the recursion
    /// keeps at zero.
    pub fn consistency_residual(&self, prior: &JointPrior, delta: f64) -> f64 {
        delta * (self.sigma2 + self.tilde_tau2) - prior.second_moment_scalar()
    }
}

/// Matrix state of the low-rank recursion at iteration `t`. `qhat` is the
/// intermediate map value that produced `q`.
#[derive(Debug, Clone)]
pub struct LowRankSEState {
    pub t: usize,
    pub q: DMatrix<f64>,
    pub qhat: DMatrix<f64>,
}

impl LowRankSEState {
    pub fn initial(r: usize) -> Self {
        LowRankSEState {
            t: 0,
            q: DMatrix::zeros(r, r),
            qhat: DMatrix::zeros(r, r),
        }
    }
}

/// One regression step: recompute `(sigma, tilde_tau)` from the current
/// noise level, then the next noise level from the score expectation.
///
/// A zero score is legal and yields `tau^2 = inf` (no information gained).
pub fn se_regression_step(
    state: &RegressionSEState,
    prior: &JointPrior,
    channel: &OutputChannel,
    delta: f64,
) -> Result<RegressionSEState> {
    check_delta(delta)?;
    let score = score_expectation(
        channel,
        state.sigma2.max(0.0).sqrt(),
        state.tilde_tau2.max(0.0).sqrt(),
    )?;
    // scores at quadrature-noise level mean no information was gained
    let tau2_next = if score.value > 1e-13 {
        1.0 / score.value
    } else {
        f64::INFINITY
    };
    let mmse = prior.mmse_scalar(tau2_next)?;
    let tau_theta2 = prior.second_moment_scalar();
    Ok(RegressionSEState {
        t: state.t + 1,
        tau2: tau2_next,
        sigma2: (tau_theta2 - mmse) / delta,
        tilde_tau2: mmse / delta,
    })
}

/// One low-rank step: `Qhat = V_Theta(Q)/delta`, then `Q' = V_Lambda(Qhat)`.
pub fn se_lowrank_step(
    state: &LowRankSEState,
    prior_theta: &Prior,
    prior_lambda: &Prior,
    delta: f64,
) -> Result<LowRankSEState> {
    check_delta(delta)?;
    let r = prior_theta.dim();
    if state.q.nrows() != r || prior_lambda.dim() != r {
        return Err(Error::Domain("state/prior dimension mismatch".into()));
    }
    let qhat = prior_theta.v_second_moment(&state.q)? / delta;
    let q = prior_lambda.v_second_moment(&qhat)?;
    Ok(LowRankSEState {
        t: state.t + 1,
        q,
        qhat,
    })
}

/// A recursion trace together with its convergence flag.
#[derive(Debug, Clone)]
pub struct SeTrace<S> {
    pub states: Vec<S>,
    pub converged: bool,
}

/// Run the regression recursion from `tau_0^2 = inf` until the state moves
/// by less than [`FIXED_POINT_TOL`] or `t_max` steps elapse.
pub fn run_regression_se(
    prior: &JointPrior,
    channel: &OutputChannel,
    delta: f64,
    t_max: usize,
) -> Result<SeTrace<RegressionSEState>> {
    let mut states = vec![RegressionSEState::initial(prior, delta)?];
    let mut converged = false;
    for _ in 0..t_max {
        let prev = *states.last().unwrap();
        let next = se_regression_step(&prev, prior, channel, delta)?;
        let delta_state = inf_aware_diff(prev.tau2, next.tau2)
            .max((prev.sigma2 - next.sigma2).abs())
            .max((prev.tilde_tau2 - next.tilde_tau2).abs());
        states.push(next);
        if delta_state < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    Ok(SeTrace { states, converged })
}

/// Run the low-rank recursion from `Q_0 = 0`.
pub fn run_lowrank_se(
    prior_theta: &Prior,
    prior_lambda: &Prior,
    delta: f64,
    t_max: usize,
) -> Result<SeTrace<LowRankSEState>> {
    let mut states = vec![LowRankSEState::initial(prior_theta.dim())];
    let mut converged = false;
    for _ in 0..t_max {
        let prev = states.last().unwrap().clone();
        let next = se_lowrank_step(&prev, prior_theta, prior_lambda, delta)?;
        let delta_state = (&next.q - &prev.q)
            .amax()
            .max((&next.qhat - &prev.qhat).amax());
        states.push(next);
        if delta_state < FIXED_POINT_TOL {
            converged = true;
            break;
        }
    }
    Ok(SeTrace { states, converged })
}

fn inf_aware_diff(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Square-loss lower bound along a regression trace: `mmse(tau_t^2)`.
pub fn regression_lower_bound_mse(
    trace: &[RegressionSEState],
    prior: &JointPrior,
) -> Result<Vec<f64>> {
    trace.iter().map(|s| prior.mmse_scalar(s.tau2)).collect()
}

/// Square-loss lower bound along a low-rank trace:
/// `E[|Theta|^2] - tr V_{Theta,V}(Q_t)`.
pub fn lowrank_lower_bound_mse(trace: &[LowRankSEState], prior_theta: &Prior) -> Result<Vec<f64>> {
    let m2 = prior_theta.second_moment().trace();
    trace
        .iter()
        .map(|s| Ok(m2 - prior_theta.v_second_moment(&s.q)?.trace()))
        .collect()
}

/// State-evolution coefficient arrays for an AMP algorithm, indexed by the
/// AMP iterate (`alphas[0]` belongs to the first iterate `a^1`).
#[derive(Debug, Clone)]
pub struct AmpSECoeffs {
    pub r: usize,
    /// Signal coefficient of `a^s`: `a^s ~ alpha_s Theta + Z^s`.
    pub alphas: Vec<DMatrix<f64>>,
    /// Signal coefficient of `b^t` (low-rank model only).
    pub gammas: Option<Vec<DMatrix<f64>>>,
    /// `T_{s,t} = Cov(Z^s, Z^t)`, lower triangle: `t_cov[t-1][s-1]`, `s <= t`.
    pub t_cov: Vec<Vec<DMatrix<f64>>>,
    /// `Sigma_{s,t}` for the `b`-side Gaussians, same layout.
    pub sigma_cov: Vec<Vec<DMatrix<f64>>>,
    /// Regression only: `(Sigma_{0,0}, [Sigma_{0,t}]_t)` for the row of the
    /// signal component `B^0`.
    pub sigma_zero: Option<(DMatrix<f64>, Vec<DMatrix<f64>>)>,
    /// Set when the horizon was truncated because the noise scale underflowed.
    pub truncated_at: Option<usize>,
}

impl AmpSECoeffs {
    pub fn horizon(&self) -> usize {
        self.alphas.len()
    }

    /// `T_{s,t}` with one-based iterate indices.
    pub fn t_block(&self, s: usize, t: usize) -> &DMatrix<f64> {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        &self.t_cov[hi - 1][lo - 1]
    }

    /// `Sigma_{s,t}` with one-based iterate indices.
    pub fn sigma_block(&self, s: usize, t: usize) -> &DMatrix<f64> {
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        &self.sigma_cov[hi - 1][lo - 1]
    }

    /// Assemble `T_{[1:k]}` as a dense block matrix.
    pub fn t_block_matrix(&self, k: usize) -> DMatrix<f64> {
        mat::block_matrix(k, self.r, |s, t| self.t_block(s + 1, t + 1).clone())
    }

    /// Assemble `Sigma_{[0:k]}` (regression, includes the `B^0` row) or
    /// `Sigma_{[1:k]}` (low-rank).
    pub fn sigma_block_matrix(&self, k: usize) -> DMatrix<f64> {
        match &self.sigma_zero {
            Some((s00, s0t)) => mat::block_matrix(k + 1, self.r, |s, t| {
                let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
                if lo == 0 && hi == 0 {
                    s00.clone()
                } else if lo == 0 {
                    s0t[hi - 1].clone()
                } else {
                    self.sigma_block(lo, hi).clone()
                }
            }),
            None => mat::block_matrix(k, self.r, |s, t| self.sigma_block(s + 1, t + 1).clone()),
        }
    }

    /// Verify that the block covariance arrays are PSD within `-1e-8`.
    pub fn check_psd(&self) -> Result<()> {
        let k = self.horizon();
        if k == 0 {
            return Ok(());
        }
        for m in [self.t_block_matrix(k), self.sigma_block_matrix(k)] {
            let min = mat::min_eigenvalue(&m);
            if min < -1e-8 {
                return Err(Error::Numerical(format!(
                    "SE covariance degenerate (min eigenvalue {min:.3e})"
                )));
            }
        }
        Ok(())
    }
}

/// Bayes-AMP coefficients for the regression model.
///
/// Diagonals are closed form: `alpha_s = m_{s-1}/tilde_tau_{s-1}` and
/// `T_{s,s} = m_{s-1}` with `m` the innovation second moment
/// `E[E[G1|Y,G0,U]^2]`, and `Sigma_{t,t} = sigma_t^2`. Off-diagonal `Sigma`
/// blocks collapse to the less-informative index by the tower property of
/// nested observations; off-diagonal `T` blocks are genuine
/// two-observation integrals over the walk increments and are evaluated by
/// quadrature.
pub fn bayes_amp_coeffs_regression(
    prior: &JointPrior,
    channel: &OutputChannel,
    delta: f64,
    t_max: usize,
) -> Result<AmpSECoeffs> {
    check_delta(delta)?;
    if t_max == 0 {
        return Err(Error::Domain("t_max must be >= 1".into()));
    }
    let tau_theta2 = prior.second_moment_scalar();
    let mut states = vec![RegressionSEState::initial(prior, delta)?];
    let mut scores = Vec::new();
    let mut truncated_at = None;
    for s in 0..t_max {
        let cur = *states.last().unwrap();
        if cur.tilde_tau2.max(0.0).sqrt() < 1e-12 {
            truncated_at = Some(s);
            break;
        }
        let score = score_expectation(channel, cur.sigma2.max(0.0).sqrt(), cur.tilde_tau2.sqrt())?;
        scores.push(score.value);
        states.push(se_regression_step(&cur, prior, channel, delta)?);
    }
    let horizon = scores.len();

    let mut alphas = Vec::with_capacity(horizon);
    let mut t_cov: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(horizon);
    let mut sigma_cov: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(horizon);
    let mut sigma_zero_row = Vec::with_capacity(horizon);
    let m1 = |v: f64| DMatrix::from_row_slice(1, 1, &[v]);

    for t in 1..=horizon {
        let walk_prev = &states[t - 1];
        let m_val = scores[t - 1] * walk_prev.tilde_tau2;
        alphas.push(m1(m_val / walk_prev.tilde_tau2.sqrt()));

        let mut t_row = Vec::with_capacity(t);
        for s in 1..t {
            t_row.push(m1(bayes_walk_t_cross(
                channel,
                &states[s - 1],
                &states[t - 1],
            )?));
        }
        t_row.push(m1(m_val));
        t_cov.push(t_row);

        let sigma_t = states[t].sigma2;
        sigma_zero_row.push(m1(sigma_t));
        let mut s_row = Vec::with_capacity(t);
        for s in 1..t {
            s_row.push(m1(states[s].sigma2));
        }
        s_row.push(m1(sigma_t));
        sigma_cov.push(s_row);
    }

    Ok(AmpSECoeffs {
        r: 1,
        alphas,
        gammas: None,
        t_cov,
        sigma_cov,
        sigma_zero: Some((m1(tau_theta2 / delta), sigma_zero_row)),
        truncated_at,
    })
}

/// Cross innovation moment `E[f_p(B^p; Y, U) f_q(B^q; Y, U)]` of the Bayes
/// update rules at walk indices `p <= q`, where `f_p = E[G1 | Y, B^p, U]`.
///
/// The walk gives `B^q = B^p + W_pq` with an independent increment, and
/// `Y | B^q, U` has mixture density `M0_q`, so the inner expectation over
/// `Y` is the `y`-integral of `(M1_p / M0_p) * M1_q`.
fn bayes_walk_t_cross(
    channel: &OutputChannel,
    walk_p: &RegressionSEState,
    walk_q: &RegressionSEState,
) -> Result<f64> {
    let (sp2, ttp2) = (walk_p.sigma2.max(0.0), walk_p.tilde_tau2.max(0.0));
    let (sq2, ttq2) = (walk_q.sigma2.max(0.0), walk_q.tilde_tau2.max(0.0));
    let inc2 = (sq2 - sp2).max(0.0);
    let gh_outer = GaussHermite::new(21)?;
    let x_abs_max = 9.0 * (sq2.sqrt() + ttq2.sqrt() + inc2.sqrt()).max(1e-6);
    let (y_lo, y_hi) = channel.y_range(x_abs_max);
    let n_y = 2049usize;
    let h = (y_hi - y_lo) / (n_y - 1) as f64;

    let outer_p: Vec<(f64, f64)> = if sp2 > 0.0 {
        gh_outer.iter().collect()
    } else {
        vec![(0.0, 1.0)]
    };
    let outer_inc: Vec<(f64, f64)> = if inc2 > 0.0 {
        gh_outer.iter().collect()
    } else {
        vec![(0.0, 1.0)]
    };

    let mut total = 0.0;
    for &(u, wu) in channel.u_atoms() {
        for &(ga, wa) in &outer_p {
            let bp = sp2.sqrt() * ga;
            for &(gb, wb) in &outer_inc {
                let bq = bp + inc2.sqrt() * gb;
                let mut acc = 0.0;
                for i in 0..n_y {
                    let y = y_lo + i as f64 * h;
                    let (m0p, m1p, _) =
                        channel.gauss_mix(y, bp, ttp2, u).unwrap_or((0.0, 0.0, 0.0));
                    let (_, m1q, _) =
                        channel.gauss_mix(y, bq, ttq2, u).unwrap_or((0.0, 0.0, 0.0));
                    if m0p > 1e-300 {
                        acc += simpson_weight(i, n_y) * (m1p / m0p) * m1q;
                    }
                }
                total += wu * wa * wb * acc * h / 3.0;
            }
        }
    }
    Ok(total)
}

fn simpson_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Bayes-AMP coefficients for the low-rank model: `alpha_t = Q_{t-1}`,
/// `gamma_t = Qhat_{t-1}`, `T_{t,t} = Q_{t-1}`, `Sigma_{t,t} = Qhat_{t-1}`,
/// with cross blocks at the less-informative index (the observations are
/// exactly nested here).
pub fn bayes_amp_coeffs_lowrank(
    prior_theta: &Prior,
    prior_lambda: &Prior,
    delta: f64,
    t_max: usize,
) -> Result<AmpSECoeffs> {
    check_delta(delta)?;
    if t_max == 0 {
        return Err(Error::Domain("t_max must be >= 1".into()));
    }
    let trace = run_lowrank_se(prior_theta, prior_lambda, delta, t_max)?;
    let state_at = |t: usize| {
        // after convergence the trace may be shorter than t_max
        let idx = t.min(trace.states.len() - 1);
        &trace.states[idx]
    };
    let r = prior_theta.dim();
    let mut alphas = Vec::with_capacity(t_max);
    let mut gammas = Vec::with_capacity(t_max);
    let mut t_cov = Vec::with_capacity(t_max);
    let mut sigma_cov = Vec::with_capacity(t_max);
    for t in 1..=t_max {
        alphas.push(state_at(t - 1).q.clone());
        gammas.push(state_at(t).qhat.clone());
        let mut t_row = Vec::with_capacity(t);
        let mut s_row = Vec::with_capacity(t);
        for s in 1..=t {
            t_row.push(state_at(s - 1).q.clone());
            s_row.push(state_at(s).qhat.clone());
        }
        t_cov.push(t_row);
        sigma_cov.push(s_row);
    }
    Ok(AmpSECoeffs {
        r,
        alphas,
        gammas: Some(gammas),
        t_cov,
        sigma_cov,
        sigma_zero: None,
        truncated_at: None,
    })
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must be positive, got {delta}")))
    }
}

/// Render a regression trace as CSV (`inf` literal for infinite values).
pub fn regression_trace_csv(trace: &[RegressionSEState], lb: &[f64]) -> String {
    let mut out = String::from("t,tau2,sigma2,tilde_tau2,lb_mse\n");
    for (s, l) in trace.iter().zip(lb) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.t, s.tau2, s.sigma2, s.tilde_tau2, l
        ));
    }
    out
}

/// Render a low-rank trace as CSV with row-major `Q` and `Qhat` entries.
pub fn lowrank_trace_csv(trace: &[LowRankSEState], lb: &[f64]) -> String {
    let r = trace.first().map_or(1, |s| s.q.nrows());
    let mut out = String::from("t");
    for i in 0..r {
        for j in 0..r {
            out.push_str(&format!(",Q_{}{}", i + 1, j + 1));
        }
    }
    for i in 0..r {
        for j in 0..r {
            out.push_str(&format!(",Qhat_{}{}", i + 1, j + 1));
        }
    }
    out.push_str(",lb_mse\n");
    for (s, l) in trace.iter().zip(lb) {
        out.push_str(&s.t.to_string());
        for i in 0..r {
            for j in 0..r {
                out.push_str(&format!(",{}", s.q[(i, j)]));
            }
        }
        for i in 0..r {
            for j in 0..r {
                out.push_str(&format!(",{}", s.qhat[(i, j)]));
            }
        }
        out.push_str(&format!(",{l}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{linear_gauss, uninformative};
    use crate::prior::{discretized_gaussian, three_point, three_point_perfect_side, JointPrior};
    use approx::assert_abs_diff_eq;

    #[test]
    fn point_mass_prior_reports_perfect_knowledge() {
        let p = JointPrior::scalar(&[(2.0, 1.0)]).unwrap();
        let s0 = RegressionSEState::initial(&p, 2.0).unwrap();
        assert_abs_diff_eq!(s0.tilde_tau2, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s0.sigma2, 4.0 / 2.0, epsilon = 1e-14);
        let s1 = se_regression_step(&s0, &p, &linear_gauss(0.5), 2.0).unwrap();
        // degenerate innovation noise: no score, but the mmse is already 0
        assert_abs_diff_eq!(
            regression_lower_bound_mse(&[s1], &p).unwrap()[0],
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn uninformative_channel_never_learns() {
        let p = discretized_gaussian(21, 1.0).unwrap();
        let trace = run_regression_se(&p, &uninformative(), 2.0, 5).unwrap();
        for s in &trace.states[1..] {
            assert!(s.tau2.is_infinite());
        }
        let lb = regression_lower_bound_mse(&trace.states, &p).unwrap();
        let var = p.mmse_scalar(f64::INFINITY).unwrap();
        for l in lb {
            assert_abs_diff_eq!(l, var, epsilon = 1e-12);
        }
        assert!(trace.converged);
    }

    /// Independent oracle: for the linear channel the recursion closes over
    /// scalars as tau_{t+1}^2 = mmse(tau_t^2)/delta + s^2; with the exact
    /// Gaussian prior the mmse is tau^2/(1+tau^2).
    #[test]
    fn linear_channel_matches_gaussian_recursion() {
        let s = 0.5f64;
        let delta = 2.0;
        let p = discretized_gaussian(21, 1.0).unwrap();
        let trace = run_regression_se(&p, &linear_gauss(s), delta, 4).unwrap();
        // one step from tau_0^2 = inf: exactly 1/delta + s^2
        assert!(
            (trace.states[1].tau2 - (1.0 / delta + s * s)).abs() < 1e-6,
            "tau_1^2 = {}",
            trace.states[1].tau2
        );
        // subsequent steps against the exact Gaussian-prior recursion
        let mut tau2 = f64::INFINITY;
        for t in 1..4 {
            let mmse = if tau2.is_infinite() {
                1.0
            } else {
                tau2 / (1.0 + tau2)
            };
            tau2 = mmse / delta + s * s;
            assert!(
                (trace.states[t].tau2 - tau2).abs() < 1e-3,
                "t={t}: {} vs {}",
                trace.states[t].tau2,
                tau2
            );
        }
    }

    #[test]
    fn regression_tau_monotone_and_consistent() {
        let p = three_point(2.0, 0.3, 1.0).unwrap();
        let delta = 1.7;
        let trace = run_regression_se(&p, &linear_gauss(0.7), delta, 8).unwrap();
        for w in trace.states.windows(2) {
            if !w[0].tau2.is_infinite() {
                assert!(w[1].tau2 <= w[0].tau2 + 1e-9);
            }
        }
        for s in &trace.states {
            assert!(s.consistency_residual(&p, delta).abs() < 1e-9);
        }
    }

    #[test]
    fn lowrank_zero_fixed_point_without_side_info() {
        let theta = Prior::Atoms(three_point(5.0f64.sqrt(), 0.2, 1.0).unwrap());
        let lambda = Prior::standard_gaussian(1);
        let trace = run_lowrank_se(&theta, &lambda, 1.5, 6).unwrap();
        for s in &trace.states {
            assert_abs_diff_eq!(s.q[(0, 0)], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lowrank_side_info_lifts_first_step() {
        let theta = Prior::Atoms(
            three_point(5.0f64.sqrt(), 0.2, 1.5f64.sqrt())
                .unwrap()
                .with_gaussian_side_info(0.1)
                .unwrap(),
        );
        let lambda = Prior::standard_gaussian(1);
        let trace = run_lowrank_se(&theta, &lambda, 1.5, 10).unwrap();
        assert!(trace.states[1].q[(0, 0)] > 1e-4);
        // r=1 monotonicity from q_0 = 0
        for w in trace.states.windows(2) {
            assert!(w[1].q[(0, 0)] >= w[0].q[(0, 0)] - 1e-9);
        }
    }

    #[test]
    fn lowrank_perfect_side_info_exact_theta_knowledge() {
        let delta = 1.5f64;
        let theta = Prior::Atoms(three_point_perfect_side(5.0f64.sqrt(), 0.2, 1.0).unwrap());
        let lambda = Prior::standard_gaussian(1);
        let s1 = se_lowrank_step(&LowRankSEState::initial(1), &theta, &lambda, delta).unwrap();
        let m2 = theta.second_moment()[(0, 0)];
        assert_abs_diff_eq!(s1.qhat[(0, 0)], m2 / delta, epsilon = 1e-10);
        let expect_q = lambda
            .v_second_moment(&DMatrix::from_row_slice(1, 1, &[m2 / delta]))
            .unwrap()[(0, 0)];
        assert_abs_diff_eq!(s1.q[(0, 0)], expect_q, epsilon = 1e-12);
        // mmse gap at the theta side is zero
        let lb = lowrank_lower_bound_mse(&[s1], &theta).unwrap();
        assert_abs_diff_eq!(lb[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn lowrank_fixed_point_is_self_consistent() {
        let delta = 1.5f64;
        let theta = Prior::Atoms(
            three_point(5.0f64.sqrt(), 0.2, delta.sqrt())
                .unwrap()
                .with_gaussian_side_info(0.1 / (5.0 * 0.2 * 0.9) / delta)
                .unwrap(),
        );
        let lambda = Prior::standard_gaussian(1);
        let trace = run_lowrank_se(&theta, &lambda, delta, 400).unwrap();
        assert!(trace.converged, "did not converge in 400 iterations");
        let last = trace.states.last().unwrap();
        let qhat = theta.v_second_moment(&last.q).unwrap() / delta;
        let q = lambda.v_second_moment(&qhat).unwrap();
        assert!((&q - &last.q).amax() < 1e-10);
    }

    #[test]
    fn regression_bayes_coeffs_shapes_and_psd() {
        let p = discretized_gaussian(21, 1.0).unwrap();
        let ch = linear_gauss(0.5);
        let c = bayes_amp_coeffs_regression(&p, &ch, 2.0, 4).unwrap();
        assert_eq!(c.horizon(), 4);
        c.check_psd().unwrap();
        // effective noise of iterate s equals the SE tau_s^2
        let trace = run_regression_se(&p, &ch, 2.0, 4).unwrap();
        for s in 1..=4usize {
            let alpha = c.alphas[s - 1][(0, 0)];
            let tss = c.t_block(s, s)[(0, 0)];
            assert!(
                (tss / (alpha * alpha) - trace.states[s].tau2).abs() < 1e-6,
                "iterate {s}"
            );
        }
    }

    /// For the all-Gaussian model the cross innovation moment has the
    /// closed form tt_p * tt_q / (tt_p^2 + s^2) (walk indices p <= q).
    #[test]
    fn bayes_walk_cross_matches_gaussian_closed_form() {
        let s = 0.5f64;
        let p = discretized_gaussian(21, 1.0).unwrap();
        let ch = linear_gauss(s);
        let c = bayes_amp_coeffs_regression(&p, &ch, 2.0, 3).unwrap();
        let trace = run_regression_se(&p, &ch, 2.0, 3).unwrap();
        for t in 2..=3usize {
            for sdx in 1..t {
                let ttp = trace.states[sdx - 1].tilde_tau2;
                let ttq = trace.states[t - 1].tilde_tau2;
                let expected = (ttp * ttq).sqrt() / (ttp + s * s);
                let got = c.t_block(sdx, t)[(0, 0)];
                assert!(
                    (got - expected).abs() < 2e-4,
                    "T_{{{sdx},{t}}} = {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn lowrank_bayes_coeffs_match_se_trace() {
        let delta = 1.5f64;
        let theta = Prior::Atoms(
            three_point(5.0f64.sqrt(), 0.2, delta.sqrt())
                .unwrap()
                .with_gaussian_side_info(0.08)
                .unwrap(),
        );
        let lambda = Prior::standard_gaussian(1);
        let c = bayes_amp_coeffs_lowrank(&theta, &lambda, delta, 5).unwrap();
        let trace = run_lowrank_se(&theta, &lambda, delta, 5).unwrap();
        c.check_psd().unwrap();
        for t in 1..=5usize {
            assert_abs_diff_eq!(
                c.alphas[t - 1][(0, 0)],
                trace.states[t - 1].q[(0, 0)],
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                c.gammas.as_ref().unwrap()[t - 1][(0, 0)],
                trace.states[t].qhat[(0, 0)],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn csv_renders_inf_literal() {
        let p = discretized_gaussian(11, 1.0).unwrap();
        let trace = run_regression_se(&p, &uninformative(), 2.0, 2).unwrap();
        let lb = regression_lower_bound_mse(&trace.states, &p).unwrap();
        let csv = regression_trace_csv(&trace.states, &lb);
        assert!(csv.starts_with("t,tau2,sigma2,tilde_tau2,lb_mse\n"));
        assert!(csv.contains(",inf,"));
    }

    #[test]
    fn bad_delta_rejected() {
        let p = discretized_gaussian(11, 1.0).unwrap();
        assert!(RegressionSEState::initial(&p, 0.0).is_err());
        assert!(RegressionSEState::initial(&p, -1.0).is_err());
    }
}
