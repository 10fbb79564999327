//! Closed-form recursions and weak-recovery bounds for the two worked
//! applications: sparse PCA on the spiked model and sparse phase retrieval.
//!
//! Both applications use the three-point sparse prior
//! `(1-eps) d_0 + (eps/2)(d_{+mu} + d_{-mu})` and fold the oracle side
//! information of strength `alpha` into the recursions through the shifted
//! argument `q + alpha_tilde`.

use serde::{Deserialize, Serialize};

use crate::channel::{score_expectation, OutputChannel};
use crate::error::Error;
use crate::prior::{three_point, Prior};
use crate::quad::{adaptive_trapezoid, GaussHermite, DEFAULT_ORDER};
use crate::Result;

/// Sparse PCA configuration. `mu` is the spike atom magnitude
/// (`mu = R / sqrt(eps)` convention), `eps` the sparsity level, `delta` the
/// aspect ratio `n/p`, and `alpha` the side-information strength.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpcaConfig {
    pub mu: f64,
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl SpcaConfig {
    pub fn new(mu: f64, eps: f64, delta: f64, alpha: f64) -> Result<Self> {
        let cfg = SpcaConfig {
            mu,
            eps,
            delta,
            alpha,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::Domain("mu must be positive".into()));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Domain("eps must lie in (0, 1]".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain("delta must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Domain("alpha must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// `alpha / (mu^2 eps (1 - alpha))`.
    pub fn alpha_tilde(&self) -> f64 {
        self.alpha / (self.mu * self.mu * self.eps * (1.0 - self.alpha))
    }

    /// Linear coefficient of the recursion at the uninformative fixed point;
    /// supercritical when above one.
    pub fn growth_coefficient(&self) -> f64 {
        self.mu.powi(4) * self.eps * self.eps * self.delta
    }

    /// Priors for running the spiked model in the engine normalization:
    /// the signal atoms carry the `sqrt(delta)` rescaling and the Gaussian
    /// side information enters with strength `alpha_tilde`, while the factor
    /// variable stays exactly standard Gaussian.
    pub fn engine_priors(&self) -> Result<(Prior, Prior)> {
        let theta = three_point(self.mu, self.eps, self.delta.sqrt())?
            .with_gaussian_side_info(self.alpha_tilde())?;
        Ok((Prior::Atoms(theta), Prior::standard_gaussian(1)))
    }
}

/// Sparse phase retrieval configuration; the prior is pinned to the
/// three-point law with `mu = 1/sqrt(eps)` so the signal has unit second
/// moment in the row-normalized convention.
#[derive(Debug)]
pub struct PrConfig {
    pub channel: OutputChannel,
    pub delta: f64,
    pub eps: f64,
    pub alpha: f64,
}

impl PrConfig {
    pub fn new(channel: OutputChannel, delta: f64, eps: f64, alpha: f64) -> Result<Self> {
        if !channel.symmetric {
            return Err(Error::Domain(
                "phase retrieval requires a symmetric channel".into(),
            ));
        }
        if !channel.has_density() {
            return Err(Error::Domain("channel density required for SE".into()));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Domain("eps must lie in (0, 1]".into()));
        }
        if !(delta > 0.0) {
            return Err(Error::Domain("delta must be positive".into()));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Domain("alpha must lie in [0, 1)".into()));
        }
        Ok(PrConfig {
            channel,
            delta,
            eps,
            alpha,
        })
    }

    pub fn mu(&self) -> f64 {
        self.eps.sqrt().recip()
    }

    /// `alpha / (1 - alpha)`; the `mu^2 eps` factor is one here.
    pub fn alpha_tilde(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }
}

/// Posterior-second-moment map of the three-point prior under a Gaussian
/// observation with Fisher information `info`:
/// `E[E[Theta | sqrt(info) Theta + G]^2]` for atoms `{0, +-mu}`.
///
/// Evaluated per true atom with shifted log-space posterior weights, which
/// stays accurate for any `info` (the observation-density exponents are
/// always comparable around the conditioning atom, unlike the single
/// standard-normal expectation form whose mass escapes the quadrature range
/// for large arguments).
fn three_point_vmap(mu: f64, eps: f64, info: f64) -> f64 {
    if info <= 0.0 {
        return 0.0;
    }
    let s = info.sqrt();
    let atoms = [0.0, mu, -mu];
    let weights = [1.0 - eps, eps / 2.0, eps / 2.0];
    let gh = GaussHermite::new(DEFAULT_ORDER).expect("default quadrature order");
    let posterior_mean = |y: f64| {
        let mut max = f64::NEG_INFINITY;
        let mut lw = [f64::NEG_INFINITY; 3];
        for b in 0..3 {
            if weights[b] > 0.0 {
                let d = y - s * atoms[b];
                lw[b] = weights[b].ln() - 0.5 * d * d;
                max = max.max(lw[b]);
            }
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for b in 0..3 {
            let w = (lw[b] - max).exp();
            num += w * atoms[b];
            den += w;
        }
        num / den
    };
    let mut total = 0.0;
    for b in 0..3 {
        if weights[b] <= 0.0 {
            continue;
        }
        let base = s * atoms[b];
        total += weights[b]
            * gh.expect(|g| {
                let m = posterior_mean(base + g);
                m * m
            });
    }
    total.max(0.0)
}

/// `V_{+-}(q)`: the spiked-model second-moment map at argument `q`,
/// evaluated at information `delta * q`. Lies in `[0, mu^2 eps]`.
pub fn spca_vpm(cfg: &SpcaConfig, q: f64) -> Result<f64> {
    if q < 0.0 {
        return Err(Error::Domain("q must be nonnegative".into()));
    }
    Ok(three_point_vmap(cfg.mu, cfg.eps, cfg.delta * q))
}

/// `F_eps(q)` for phase retrieval: the same map at information `q` with
/// `mu = 1/sqrt(eps)`, so `F_eps(q) = q + O(q^2)`.
pub fn pr_f_eps(eps: f64, q: f64) -> Result<f64> {
    if q < 0.0 {
        return Err(Error::Domain("q must be nonnegative".into()));
    }
    Ok(three_point_vmap(eps.sqrt().recip(), eps, q))
}

/// Trace of a scalar recursion plus its convergence flag.
#[derive(Debug, Clone)]
pub struct ScalarTrace {
    pub q: Vec<f64>,
    pub converged: bool,
}

/// Spiked-model recursion `q_{t+1} = V(q_t + at) / (1 + V(q_t + at))` from
/// `q_0 = 0`; `at` is the side-information shift.
pub fn spca_recursion(cfg: &SpcaConfig, t_max: usize) -> Result<ScalarTrace> {
    cfg.validate()?;
    if t_max == 0 {
        return Err(Error::Domain("t_max must be >= 1".into()));
    }
    let at = cfg.alpha_tilde();
    let mut q = vec![0.0];
    let mut converged = false;
    for _ in 0..t_max {
        let v = spca_vpm(cfg, q.last().unwrap() + at)?;
        let next = v / (1.0 + v);
        let diff = (next - q.last().unwrap()).abs();
        q.push(next);
        if diff < 1e-12 {
            converged = true;
            break;
        }
    }
    Ok(ScalarTrace { q, converged })
}

/// Correlation upper bound `sqrt(V(q_t + at) / (mu^2 eps))` at iteration `t`.
pub fn spca_correlation_bound(cfg: &SpcaConfig, t: usize) -> Result<f64> {
    let trace = spca_recursion(cfg, t.max(1))?;
    let q_t = trace.q[t.min(trace.q.len() - 1)];
    let v = spca_vpm(cfg, q_t + cfg.alpha_tilde())?;
    Ok((v / (cfg.mu * cfg.mu * cfg.eps)).sqrt().min(1.0))
}

/// Regime classification of the minimax corollary for sparse PCA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum SpcaRegime {
    /// `R^2 < sqrt((1-eps)/(4 delta))`: explicit constants.
    BExplicit { alpha_star: f64, c_star: f64 },
    /// `R^2 < 1/sqrt(delta)` only: constants exist but are not explicit.
    AExists,
    /// No guarantee claimed.
    None,
}

/// Classify `(R, delta, eps)` and return the explicit constants
/// `alpha_* = min(eps/(4 delta), 1/2)`, `C_* = 3/R^2` in the explicit regime.
pub fn spca_corollary_constants(r_norm: f64, delta: f64, eps: f64) -> Result<SpcaRegime> {
    if !(r_norm > 0.0 && delta > 0.0 && eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain("R, delta, eps must be positive (eps <= 1)".into()));
    }
    let r2 = r_norm * r_norm;
    if r2 < ((1.0 - eps) / (4.0 * delta)).sqrt() {
        Ok(SpcaRegime::BExplicit {
            alpha_star: (eps / (4.0 * delta)).min(0.5),
            c_star: 3.0 / r2,
        })
    } else if r2 < delta.sqrt().recip() {
        Ok(SpcaRegime::AExists)
    } else {
        Ok(SpcaRegime::None)
    }
}

/// Critical observations-per-dimension ratio for weak recovery in a
/// symmetric channel:
/// `delta_sp = ( \int T(y)^2 / P(y) dy )^{-1}` with `P(y) = E_G[p(y|G)]`
/// and `T(y) = E_G[p(y|G)(G^2 - 1)]`, `G ~ N(0,1)`.
///
/// Returns `inf` when the integral vanishes (no information about the
/// signal direction, e.g. a channel whose density is free of `x`).
pub fn delta_sp(channel: &OutputChannel) -> Result<f64> {
    if !channel.symmetric {
        return Err(Error::Domain(
            "delta_sp requires a symmetric channel".into(),
        ));
    }
    if !channel.has_density() {
        return Err(Error::Domain("channel density required for SE".into()));
    }
    let (lo, hi) = channel.y_range(9.0);
    let half = lo.abs().max(hi.abs());
    let mut total = 0.0;
    for &(u, wu) in channel.u_atoms() {
        let integrand = |y: f64| {
            let (p, _, m2) = channel.gauss_mix(y, 0.0, 1.0, u).unwrap_or((0.0, 0.0, 0.0));
            if p < 1e-300 {
                0.0
            } else {
                let t = m2 - p;
                t * t / p
            }
        };
        // symmetric grid about zero per the channel symmetry convention
        let integral = adaptive_trapezoid(integrand, -half, half, 1e-7, "delta_sp integral")?;
        total += wu * integral.value;
    }
    if total <= 1e-12 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / total)
    }
}

/// `H(qhat)`: the score integral of the row-normalized recursion, equal to
/// the score expectation at `sigma = sqrt(qhat)`, `tilde_tau = sqrt(1-qhat)`.
pub fn pr_h(channel: &OutputChannel, qhat: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&qhat) {
        return Err(Error::Domain(format!(
            "qhat must lie in [0, 1], got {qhat}"
        )));
    }
    Ok(score_expectation(channel, qhat.sqrt(), (1.0 - qhat).sqrt())?.value)
}

/// Phase-retrieval recursion `qhat_t = F_eps(q_t + at)`,
/// `q_{t+1} = delta * H(qhat_t)` from `q_0 = 0`. Returns `(q_t, qhat_t)`
/// pairs for `t = 0..` and the convergence flag.
pub fn pr_recursion(cfg: &PrConfig, t_max: usize) -> Result<PrTrace> {
    if t_max == 0 {
        return Err(Error::Domain("t_max must be >= 1".into()));
    }
    let at = cfg.alpha_tilde();
    let mut qs = vec![0.0f64];
    let mut qhats = Vec::new();
    let mut converged = false;
    for _ in 0..t_max {
        let q_cur = *qs.last().unwrap();
        let qhat = pr_f_eps(cfg.eps, q_cur + at)?.min(1.0);
        qhats.push(qhat);
        let q_next = cfg.delta * pr_h(&cfg.channel, qhat)?;
        let diff = (q_next - q_cur).abs();
        qs.push(q_next);
        if diff < 1e-12 {
            converged = true;
            break;
        }
    }
    // close the last pair
    let qhat_last = pr_f_eps(cfg.eps, qs.last().unwrap() + at)?.min(1.0);
    qhats.push(qhat_last);
    Ok(PrTrace {
        q: qs,
        qhat: qhats,
        converged,
    })
}

/// Trace of the phase-retrieval recursion.
#[derive(Debug, Clone)]
pub struct PrTrace {
    pub q: Vec<f64>,
    pub qhat: Vec<f64>,
    pub converged: bool,
}

/// Correlation upper bound `sqrt(qhat_t)` at iteration `t`.
pub fn pr_correlation_bound(cfg: &PrConfig, t: usize) -> Result<f64> {
    let trace = pr_recursion(cfg, t.max(1))?;
    let idx = t.min(trace.qhat.len() - 1);
    Ok(trace.qhat[idx].sqrt())
}

/// Sweep CSV for either application: `mu,eps,delta,alpha,t,q_t,bound`.
pub fn sweep_csv(mu: f64, eps: f64, delta: f64, alpha: f64, rows: &[(usize, f64, f64)]) -> String {
    let mut out = String::from("mu,eps,delta,alpha,t,q_t,bound\n");
    for &(t, q, bound) in rows {
        out.push_str(&format!("{mu},{eps},{delta},{alpha},{t},{q},{bound}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{abs_gauss, uninformative};
    use crate::se::run_lowrank_se;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn reference_cfg() -> SpcaConfig {
        SpcaConfig::new(5.0f64.sqrt(), 0.2, 1.5, 0.1).unwrap()
    }

    #[test]
    fn vpm_zero_at_origin() {
        assert_abs_diff_eq!(spca_vpm(&reference_cfg(), 0.0).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn vpm_small_q_slope() {
        let cfg = reference_cfg();
        let q = 1e-4;
        let slope = spca_vpm(&cfg, q).unwrap() / q;
        let expected = cfg.growth_coefficient();
        assert!(
            (slope / expected - 1.0).abs() < 0.01,
            "slope {slope} vs {expected}"
        );
    }

    /// 10^7-sample Monte Carlo oracle for V at the reference configuration.
    #[test]
    fn vpm_matches_monte_carlo() {
        let cfg = reference_cfg();
        let q = 0.3;
        let got = spca_vpm(&cfg, q).unwrap();
        let c = cfg.mu * (cfg.delta * q).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000_000usize;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let g: f64 = rng.sample(StandardNormal);
            let ap = (c * g - 0.5 * c * c).exp();
            let am = (-c * g - 0.5 * c * c).exp();
            let num = 0.25 * (ap - am) * (ap - am);
            let den = 1.0 - cfg.eps + cfg.eps * 0.5 * (ap + am);
            let s = cfg.mu * cfg.mu * cfg.eps * cfg.eps * num / den;
            acc += s;
            acc2 += s * s;
        }
        let mean = acc / n as f64;
        let stderr = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (got - mean).abs() < 3.0 * stderr,
            "{got} vs MC {mean} +- {stderr}"
        );
    }

    #[test]
    fn vpm_bounded_and_monotone() {
        let cfg = reference_cfg();
        let cap = cfg.mu * cfg.mu * cfg.eps;
        let mut prev = -1.0;
        for i in 0..60 {
            let q = i as f64 * 0.25;
            let v = spca_vpm(&cfg, q).unwrap();
            assert!(v >= prev - 1e-9, "not monotone at q={q}");
            assert!((-1e-12..=cap + 1e-9).contains(&v));
            prev = v;
        }
        // saturation at very large q (no overflow in the shifted form)
        let v = spca_vpm(&cfg, 1e4).unwrap();
        assert!((v - cap).abs() < 1e-6);
    }

    #[test]
    fn recursion_zero_without_side_info() {
        let cfg = SpcaConfig::new(5.0f64.sqrt(), 0.2, 1.5, 0.0).unwrap();
        let trace = spca_recursion(&cfg, 30).unwrap();
        for q in &trace.q {
            assert_abs_diff_eq!(*q, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn recursion_stays_in_unit_interval() {
        let cfg = reference_cfg();
        let trace = spca_recursion(&cfg, 60).unwrap();
        for q in &trace.q {
            assert!((0.0..1.0).contains(q));
        }
    }

    #[test]
    fn subcritical_recursion_respects_paper_bound() {
        // mu^4 eps^2 delta < 1, small alpha: sup_t q_t <= 2 at / (1 - coeff)
        let cfg = SpcaConfig::new(1.2, 0.2, 1.0, 0.01).unwrap();
        let coeff = cfg.growth_coefficient();
        assert!(coeff < 1.0);
        let cap = 2.0 * cfg.alpha_tilde() / (1.0 - coeff);
        let trace = spca_recursion(&cfg, 120).unwrap();
        for q in &trace.q {
            assert!(*q <= cap, "q={q} exceeds {cap}");
        }
    }

    /// Independent bisection oracle for the positive fixed point of
    /// q = V(q + at) / (1 + V(q + at)).
    fn bisect_fixed_point(cfg: &SpcaConfig) -> f64 {
        let at = cfg.alpha_tilde();
        let f = |q: f64| {
            let v = spca_vpm(cfg, q + at).unwrap();
            v / (1.0 + v) - q
        };
        let (mut lo, mut hi) = (1e-6, 1.0 - 1e-12);
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn supercritical_recursion_converges_to_bisection_fixed_point() {
        let cfg = reference_cfg();
        assert!(cfg.growth_coefficient() > 1.0);
        let trace = spca_recursion(&cfg, 400).unwrap();
        assert!(trace.converged);
        let q_star = *trace.q.last().unwrap();
        assert!(q_star > 0.05);
        let oracle = bisect_fixed_point(&cfg);
        assert!(
            (q_star - oracle).abs() < 1e-9,
            "fixed point {q_star} vs bisection {oracle}"
        );
    }

    #[test]
    fn correlation_bound_limits() {
        // alpha = 0 subcritical: bound 0
        let cfg = SpcaConfig::new(1.2, 0.2, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(spca_correlation_bound(&cfg, 10).unwrap(), 0.0, epsilon = 1e-9);
        // V saturates, bound -> 1 for perfect knowledge
        let cfg = reference_cfg();
        let v = spca_vpm(&cfg, 1e6).unwrap();
        let b = (v / (cfg.mu * cfg.mu * cfg.eps)).sqrt();
        assert!((b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn corollary_constants_regimes() {
        // gate negation: R^2 sqrt(delta) >= 1
        assert_eq!(
            spca_corollary_constants(1.2, 1.0, 0.1).unwrap(),
            SpcaRegime::None
        );
        // explicit regime arithmetic
        match spca_corollary_constants(0.5, 1.0, 0.1).unwrap() {
            SpcaRegime::BExplicit { alpha_star, c_star } => {
                assert_abs_diff_eq!(alpha_star, 0.025, epsilon = 1e-15);
                assert_abs_diff_eq!(c_star, 12.0, epsilon = 1e-12);
            }
            other => panic!("expected explicit regime, got {other:?}"),
        }
        // min tie: eps/(4 delta) = 1/2 exactly
        match spca_corollary_constants(0.1, 0.25, 0.5).unwrap() {
            SpcaRegime::BExplicit { alpha_star, .. } => {
                assert_abs_diff_eq!(alpha_star, 0.5, epsilon = 1e-15);
            }
            other => panic!("expected explicit regime, got {other:?}"),
        }
        // middle regime: R^2 < 1/sqrt(delta) but above the explicit gate
        assert_eq!(
            spca_corollary_constants(0.9, 1.0, 0.1).unwrap(),
            SpcaRegime::AExists
        );
    }

    /// The recursion computes the same object as the matrix state evolution
    /// run on the engine-normalized priors.
    #[test]
    fn recursion_matches_lowrank_state_evolution() {
        let cfg = reference_cfg();
        let (theta, lambda) = cfg.engine_priors().unwrap();
        let trace_se = run_lowrank_se(&theta, &lambda, cfg.delta, 10).unwrap();
        let trace_q = spca_recursion(&cfg, 10).unwrap();
        for t in 0..=10usize.min(trace_se.states.len() - 1).min(trace_q.q.len() - 1) {
            assert!(
                (trace_se.states[t].q[(0, 0)] - trace_q.q[t]).abs() < 1e-8,
                "t={t}: SE {} vs recursion {}",
                trace_se.states[t].q[(0, 0)],
                trace_q.q[t]
            );
        }
    }

    #[test]
    fn delta_sp_uninformative_is_infinite() {
        assert!(delta_sp(&uninformative()).unwrap().is_infinite());
    }

    #[test]
    fn delta_sp_requires_symmetry() {
        assert!(delta_sp(&crate::channel::linear_gauss(0.5)).is_err());
    }

    /// Refined-grid oracle at double density over the same interval.
    #[test]
    fn delta_sp_matches_refined_grid_oracle() {
        let ch = abs_gauss(0.2);
        let got = delta_sp(&ch).unwrap();
        let gh = GaussHermite::new(DEFAULT_ORDER).unwrap();
        let (lo, hi) = ch.y_range(9.0);
        let half = lo.abs().max(hi.abs());
        let n = 262_145usize;
        let h = 2.0 * half / (n - 1) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let y = -half + i as f64 * h;
            let mut p = 0.0;
            let mut t = 0.0;
            for (g, w) in gh.iter() {
                let d = ch.density_at(y, g, 0.0).unwrap();
                p += w * d;
                t += w * d * (g * g - 1.0);
            }
            let val = if p < 1e-300 { 0.0 } else { t * t / p };
            acc += if i == 0 || i == n - 1 { 0.5 * val } else { val };
        }
        let oracle = 1.0 / (acc * h);
        assert!(
            (got / oracle - 1.0).abs() < 0.005,
            "{got} vs refined-grid {oracle}"
        );
    }

    #[test]
    fn delta_sp_noiseless_limit_is_half() {
        // y = |x| + tiny noise approaches the known threshold 1/2
        let got = delta_sp(&abs_gauss(0.02)).unwrap();
        assert!((got - 0.5).abs() < 0.02, "{got}");
    }

    #[test]
    fn delta_sp_increases_with_noise() {
        let a = delta_sp(&abs_gauss(0.2)).unwrap();
        let b = delta_sp(&abs_gauss(0.5)).unwrap();
        assert!(a < b, "delta_sp(0.2)={a} vs delta_sp(0.5)={b}");
    }

    fn pr_cfg(delta: f64, eps: f64, alpha: f64) -> PrConfig {
        PrConfig::new(abs_gauss(0.2), delta, eps, alpha).unwrap()
    }

    #[test]
    fn pr_zero_without_side_info() {
        let cfg = pr_cfg(1.0, 1.0, 0.0);
        let trace = pr_recursion(&cfg, 10).unwrap();
        for q in &trace.q {
            assert!(q.abs() < 1e-12);
        }
        assert_abs_diff_eq!(pr_correlation_bound(&cfg, 5).unwrap(), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn pr_small_q_expansions() {
        // F_eps(q) = q + O(q^2)
        let q = 1e-4;
        for eps in [1.0, 0.5, 0.2] {
            let f = pr_f_eps(eps, q).unwrap();
            assert!((f / q - 1.0).abs() < 0.01, "eps={eps}: F(q)/q = {}", f / q);
        }
        // H(q) = q / delta_sp + O(q^2)
        let ch = abs_gauss(0.2);
        let dsp = delta_sp(&ch).unwrap();
        let h = pr_h(&ch, q).unwrap();
        assert!(
            (h / (q / dsp) - 1.0).abs() < 0.01,
            "H slope {} vs 1/delta_sp {}",
            h / q,
            1.0 / dsp
        );
    }

    #[test]
    fn pr_subcritical_containment_bound() {
        let ch = abs_gauss(0.2);
        let dsp = delta_sp(&ch).unwrap();
        let delta = 0.8 * dsp;
        let cfg = pr_cfg(delta, 1.0, 1e-3);
        let eta = (dsp - delta) / (2.0 * dsp);
        let cap = cfg.alpha_tilde() / eta;
        let trace = pr_recursion(&cfg, 150).unwrap();
        for q in &trace.q {
            assert!(*q <= cap, "q={q} exceeds {cap}");
        }
    }

    #[test]
    fn pr_supercritical_escape_matches_bisection() {
        let ch = abs_gauss(0.2);
        let dsp = delta_sp(&ch).unwrap();
        let cfg = pr_cfg(1.5 * dsp, 1.0, 1e-3);
        let trace = pr_recursion(&cfg, 400).unwrap();
        let q_star = *trace.q.last().unwrap();
        assert!(q_star > 0.05, "no escape: {q_star}");
        // smallest positive root of q = delta * H(F(q + at)), found by a
        // sign scan followed by bisection (the map may have several fixed
        // points; the recursion from zero converges to the first one)
        let at = cfg.alpha_tilde();
        let f = |q: f64| {
            let qh = pr_f_eps(cfg.eps, q + at).unwrap().min(1.0);
            cfg.delta * pr_h(&cfg.channel, qh).unwrap() - q
        };
        let step = 0.02;
        let mut lo = 0.02;
        assert!(f(lo) > 0.0);
        let mut hi = lo;
        loop {
            hi += step;
            if f(hi) < 0.0 {
                break;
            }
            assert!(hi < 50.0, "no sign change found");
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);
        assert!(
            (q_star - oracle).abs() < 1e-6 * oracle.max(1.0),
            "{q_star} vs {oracle}"
        );
    }

    #[test]
    fn f_eps_agrees_with_prior_second_moment_map() {
        // two routes to the same map: closed form vs posterior quadrature
        let eps = 0.2f64;
        let p = three_point(eps.sqrt().recip(), eps, 1.0).unwrap();
        for q in [0.05, 0.3, 1.0, 3.0] {
            let closed = pr_f_eps(eps, q).unwrap();
            let quadrature = p
                .v_second_moment(&nalgebra::DMatrix::from_row_slice(1, 1, &[q]))
                .unwrap()[(0, 0)];
            assert!(
                (closed - quadrature).abs() < 1e-8,
                "q={q}: {closed} vs {quadrature}"
            );
        }
    }

    #[test]
    fn sweep_csv_shape() {
        let rows = vec![(0, 0.0, 0.1), (1, 0.2, 0.4)];
        let csv = sweep_csv(2.0, 0.2, 1.5, 0.1, &rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("mu,eps,delta,alpha,t,q_t,bound\n"));
    }
}
