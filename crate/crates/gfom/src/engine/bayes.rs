//! Construction of the bound-achieving Bayes-AMP algorithms.
//!
//! The update rules close over the precomputed state-evolution parameters:
//!
//! * regression: `f_t(b; y, u) = E[G1 | Y=y, B^t=b, U=u]`, evaluated through
//!   the channel's Gaussian-mixing moments, and
//!   `g_t(a; v) = E[Theta | alpha_t Theta + Z^t = a; V=v]`;
//! * low-rank: `f_t(b; u) = E[Lambda | gamma_t Lambda + Sigma_tt^{1/2} G = b; U=u]`
//!   and `g_t(a; v) = E[Theta | alpha_t Theta + T_tt^{1/2} G = a; V=v]`.
//!
//! Because each rule touches only the latest iterate, the Onsager memory is
//! a single term per update; its coefficients come from the posterior-variance
//! identities rather than finite differences.

use nalgebra::DMatrix;
use std::sync::Arc;

use crate::channel::OutputChannel;
use crate::error::Error;
use crate::prior::{JointPrior, Prior};
use crate::quad::{GaussHermite, GaussHermiteTensor, DEFAULT_ORDER};
use crate::se::{self, AmpSECoeffs};
use crate::Result;

use super::{FRule, GRule, OnsagerCoeffs, UpdateRuleSeq};

/// A fully assembled Bayes-AMP program: rules, Onsager coefficients, and the
/// state-evolution arrays they were derived from.
pub struct BayesAmp {
    pub rules: UpdateRuleSeq,
    pub onsager: OnsagerCoeffs,
    pub coeffs: AmpSECoeffs,
}

/// Bayes-AMP for the regression model.
///
/// Requires a prior whose conditional mean given the side information
/// vanishes (the factor-side update at `t = 0` has no access to the
/// variable-side information); the degenerate point-mass-given-V case is
/// handled by the exact side-information estimator instead.
pub fn bayes_amp_regression(
    prior: &JointPrior,
    channel: Arc<OutputChannel>,
    delta: f64,
    t_max: usize,
) -> Result<BayesAmp> {
    if t_max == 0 {
        return Err(Error::Domain("t_max must be >= 1".into()));
    }
    let state0 = se::RegressionSEState::initial(prior, delta)?;
    let prior_arc = Arc::new(Prior::Atoms(prior.clone()));

    if state0.tilde_tau2 < 1e-12 {
        // Theta is determined by V alone: f plays no role and g is exact.
        return degenerate_side_info_program(prior_arc, t_max);
    }
    if state0.sigma2 > 1e-10 {
        return Err(Error::Config(
            "regression Bayes-AMP requires E[Theta|V] = 0 (centered conditional prior); \
             informative initializations belong to the low-rank model"
                .into(),
        ));
    }

    let coeffs = se::bayes_amp_coeffs_regression(prior, &channel, delta, t_max)?;
    let horizon = coeffs.horizon();
    if horizon == 0 {
        return Err(Error::Numerical(
            "state evolution horizon truncated at zero".into(),
        ));
    }
    // walk states 0..horizon give (sigma_t, tilde_tau_t) for f_t
    let trace = se::run_regression_se(prior, &channel, delta, horizon)?;
    let walk: Vec<(f64, f64)> = trace
        .states
        .iter()
        .map(|s| (s.sigma2.max(0.0), s.tilde_tau2.max(0.0)))
        .collect();

    let channel_arc = channel;
    let mut f_rules: Vec<FRule> = Vec::with_capacity(horizon);
    let mut f_derivs = Vec::with_capacity(horizon);
    let mut g_rules: Vec<GRule> = Vec::with_capacity(horizon.saturating_sub(1));
    let mut g_derivs = Vec::with_capacity(horizon.saturating_sub(1));

    for t in 0..horizon {
        let (_, tt2) = walk[t.min(walk.len() - 1)];
        let ch = Arc::clone(&channel_arc);
        f_rules.push(Box::new(move |args: &super::FArgs, out: &mut [f64]| {
            let b = if args.t == 0 { 0.0 } else { args.hist[(args.t - 1) * args.r] };
            let (m0, m1, _) = ch.gauss_mix(args.y, b, tt2, args.u[0]).unwrap_or((0.0, 0.0, 0.0));
            out[0] = if m0 > 1e-300 { m1 / m0 } else { 0.0 };
        }));
        let ch = Arc::clone(&channel_arc);
        let ttd = tt2.sqrt();
        f_derivs.push(Some(Box::new(
            move |args: &super::FArgs, s: usize, out: &mut [f64]| {
                out[0] = if args.t > 0 && s + 1 == args.t {
                    let b = args.hist[(args.t - 1) * args.r];
                    let (m0, m1, m2) =
                        ch.gauss_mix(args.y, b, tt2, args.u[0]).unwrap_or((0.0, 0.0, 0.0));
                    if m0 > 1e-300 {
                        let mean = m1 / m0;
                        ((m2 / m0 - mean * mean) - 1.0) / ttd
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
            },
        ) as super::FDeriv));
    }

    // g_t for every iterate up to the horizon; the last entry also serves as
    // the row-wise estimator at the final iterate
    for t in 1..=horizon {
        let alpha = coeffs.alphas[t - 1].clone();
        let noise = coeffs.t_block(t, t).clone();
        let pr = Arc::clone(&prior_arc);
        let (a_c, n_c) = (alpha.clone(), noise.clone());
        g_rules.push(Box::new(move |args: &super::GArgs, out: &mut [f64]| {
            let a = if args.t == 0 { 0.0 } else { args.hist[(args.t - 1) * args.r] };
            let m = pr
                .denoise(&[a], &a_c, &n_c, args.v)
                .expect("denoiser evaluation");
            out[0] = m[0];
        }));
        let pr = Arc::clone(&prior_arc);
        g_derivs.push(Some(Box::new(
            move |args: &super::GArgs, s: usize, out: &mut [f64]| {
                out[0] = if args.t > 0 && s + 1 == args.t && noise[(0, 0)] > 0.0 {
                    let a = args.hist[(args.t - 1) * args.r];
                    let cov = pr
                        .denoise_cov(&[a], &alpha, &noise, args.v)
                        .expect("denoiser covariance");
                    cov[(0, 0)] * alpha[(0, 0)] / noise[(0, 0)]
                } else {
                    0.0
                };
            },
        ) as super::GDeriv));
    }
    // Onsager: xi_{t,t} = -alpha_{t+1}; zeta_{t,t-1} = alpha_t tt_t^2 / T_tt
    let r = 1usize;
    let mut xi = Vec::new();
    let mut zeta = Vec::new();
    for t in 1..horizon {
        let mut xi_row = vec![DMatrix::zeros(r, r); t];
        xi_row[t - 1] = -coeffs.alphas[t].clone();
        xi.push(xi_row);

        let mut zeta_row = vec![DMatrix::zeros(r, r); t];
        let t_tt = coeffs.t_block(t, t)[(0, 0)];
        let num = coeffs.alphas[t - 1][(0, 0)] * walk[t].1;
        zeta_row[t - 1] = DMatrix::from_row_slice(1, 1, &[if t_tt > 0.0 { num / t_tt } else { 0.0 }]);
        zeta.push(zeta_row);
    }

    Ok(BayesAmp {
        rules: UpdateRuleSeq {
            r,
            f_rules,
            g_rules,
            f_derivs,
            g_derivs,
            lipschitz_hint: None,
        },
        onsager: OnsagerCoeffs { r, xi, zeta },
        coeffs,
    })
}

fn degenerate_side_info_program(prior: Arc<Prior>, t_max: usize) -> Result<BayesAmp> {
    let r = prior.dim();
    let mut f_rules: Vec<FRule> = Vec::new();
    let mut g_rules: Vec<GRule> = Vec::new();
    let zero_obs = DMatrix::zeros(r, r);
    for _ in 0..t_max {
        f_rules.push(Box::new(|_args, out| out.fill(0.0)));
    }
    for _ in 1..=t_max {
        let pr = Arc::clone(&prior);
        let (oc, nc) = (zero_obs.clone(), zero_obs.clone());
        g_rules.push(Box::new(move |args: &super::GArgs, out: &mut [f64]| {
            let m = pr
                .denoise(&vec![0.0; args.r], &oc, &nc, args.v)
                .expect("side-info denoiser");
            for j in 0..args.r {
                out[j] = m[j];
            }
        }));
    }
    let coeffs = AmpSECoeffs {
        r,
        alphas: vec![DMatrix::zeros(r, r); t_max],
        gammas: None,
        t_cov: (1..=t_max).map(|t| vec![DMatrix::zeros(r, r); t]).collect(),
        sigma_cov: (1..=t_max).map(|t| vec![DMatrix::zeros(r, r); t]).collect(),
        sigma_zero: None,
        truncated_at: Some(0),
    };
    Ok(BayesAmp {
        rules: UpdateRuleSeq {
            r,
            f_derivs: (0..t_max).map(|_| None).collect(),
            g_derivs: (1..=t_max).map(|_| None).collect(),
            f_rules,
            g_rules,
            lipschitz_hint: None,
        },
        onsager: OnsagerCoeffs::zeros(r, t_max),
        coeffs,
    })
}

/// Bayes-AMP for the low-rank model.
pub fn bayes_amp_lowrank(
    prior_theta: &Prior,
    prior_lambda: &Prior,
    delta: f64,
    t_max: usize,
) -> Result<BayesAmp> {
    let coeffs = se::bayes_amp_coeffs_lowrank(prior_theta, prior_lambda, delta, t_max)?;
    let r = prior_theta.dim();
    let theta_arc = Arc::new(prior_theta.clone());
    let lambda_arc = Arc::new(prior_lambda.clone());

    let mut f_rules: Vec<FRule> = Vec::with_capacity(t_max);
    let mut f_derivs = Vec::with_capacity(t_max);
    let mut g_rules: Vec<GRule> = Vec::with_capacity(t_max);
    let mut g_derivs = Vec::with_capacity(t_max);
    let gammas = coeffs.gammas.as_ref().expect("low-rank gammas");

    for t in 0..t_max {
        // f_t applies to iterate b^t with coefficients (gamma_t, Sigma_tt);
        // f_0 has no observation and conditions on side information only.
        let (gamma, sigma) = if t == 0 {
            (DMatrix::zeros(r, r), DMatrix::zeros(r, r))
        } else {
            (gammas[t - 1].clone(), coeffs.sigma_block(t, t).clone())
        };
        let pl = Arc::clone(&lambda_arc);
        let (g_c, s_c) = (gamma.clone(), sigma.clone());
        f_rules.push(Box::new(move |args: &super::FArgs, out: &mut [f64]| {
            let zeros = vec![0.0; args.r];
            let b = if args.t == 0 {
                &zeros[..]
            } else {
                &args.hist[(args.t - 1) * args.r..args.t * args.r]
            };
            let m = pl.denoise(b, &g_c, &s_c, args.u).expect("lambda denoiser");
            for j in 0..args.r {
                out[j] = m[j];
            }
        }));
        let pl = Arc::clone(&lambda_arc);
        f_derivs.push(Some(Box::new(
            move |args: &super::FArgs, s: usize, out: &mut [f64]| {
                out.fill(0.0);
                if args.t > 0 && s + 1 == args.t && sigma.amax() > 0.0 {
                    let b = &args.hist[(args.t - 1) * args.r..args.t * args.r];
                    let cov = pl
                        .denoise_cov(b, &gamma, &sigma, args.u)
                        .expect("lambda denoiser covariance");
                    let jac = cov * gamma.transpose() * crate::mat::psd_solve(&sigma, &DMatrix::identity(args.r, args.r));
                    for i in 0..args.r {
                        for j in 0..args.r {
                            out[i * args.r + j] = jac[(i, j)];
                        }
                    }
                }
            },
        ) as super::FDeriv));
    }

    for t in 1..=t_max {
        let alpha = coeffs.alphas[t - 1].clone();
        let noise = coeffs.t_block(t, t).clone();
        let pt = Arc::clone(&theta_arc);
        let (a_c, n_c) = (alpha.clone(), noise.clone());
        g_rules.push(Box::new(move |args: &super::GArgs, out: &mut [f64]| {
            let zeros = vec![0.0; args.r];
            let a = if args.t == 0 {
                &zeros[..]
            } else {
                &args.hist[(args.t - 1) * args.r..args.t * args.r]
            };
            let m = pt.denoise(a, &a_c, &n_c, args.v).expect("theta denoiser");
            for j in 0..args.r {
                out[j] = m[j];
            }
        }));
        let pt = Arc::clone(&theta_arc);
        g_derivs.push(Some(Box::new(
            move |args: &super::GArgs, s: usize, out: &mut [f64]| {
                out.fill(0.0);
                if args.t > 0 && s + 1 == args.t && noise.amax() > 0.0 {
                    let a = &args.hist[(args.t - 1) * args.r..args.t * args.r];
                    let cov = pt
                        .denoise_cov(a, &alpha, &noise, args.v)
                        .expect("theta denoiser covariance");
                    let jac = cov * alpha.transpose() * crate::mat::psd_solve(&noise, &DMatrix::identity(args.r, args.r));
                    for i in 0..args.r {
                        for j in 0..args.r {
                            out[i * args.r + j] = jac[(i, j)];
                        }
                    }
                }
            },
        ) as super::GDeriv));
    }

    // Onsager: zeta_{t,t-1} = (1/delta) E[dg_t], xi_{t,t} = E[df_t], by
    // quadrature over the iterate marginals.
    let mut xi = Vec::new();
    let mut zeta = Vec::new();
    for t in 1..t_max {
        let mut xi_row = vec![DMatrix::zeros(r, r); t];
        let gamma = &gammas[t - 1];
        let sigma = coeffs.sigma_block(t, t);
        xi_row[t - 1] = expected_denoiser_jacobian(prior_lambda, gamma, sigma)?;
        xi.push(xi_row);

        let mut zeta_row = vec![DMatrix::zeros(r, r); t];
        let alpha = &coeffs.alphas[t - 1];
        let noise = coeffs.t_block(t, t);
        zeta_row[t - 1] = expected_denoiser_jacobian(prior_theta, alpha, noise)? / delta;
        zeta.push(zeta_row);
    }

    Ok(BayesAmp {
        rules: UpdateRuleSeq {
            r,
            f_rules,
            g_rules,
            f_derivs,
            g_derivs,
            lipschitz_hint: None,
        },
        onsager: OnsagerCoeffs { r, xi, zeta },
        coeffs,
    })
}

/// `E[d m / d b]` over the marginal of `b = C theta + N^{1/2} G`, where `m`
/// is the posterior-mean denoiser with observation coefficient `C` and noise
/// covariance `N`: the Jacobian is `Cov(theta | b) C^T N^{-1}`, averaged by
/// quadrature (closed form for the Gaussian prior).
fn expected_denoiser_jacobian(
    prior: &Prior,
    obs_coeff: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let r = prior.dim();
    if noise_cov.amax() == 0.0 && obs_coeff.amax() == 0.0 {
        return Ok(DMatrix::zeros(r, r));
    }
    let n_inv = crate::mat::psd_solve(noise_cov, &DMatrix::identity(r, r));
    match prior {
        Prior::Gaussian { .. } => {
            let cov = prior.denoise_cov(&vec![0.0; r], obs_coeff, noise_cov, &vec![0.0; r])?;
            Ok(cov * obs_coeff.transpose() * n_inv)
        }
        Prior::Atoms(p) => {
            let noise_sqrt = crate::mat::psd_sqrt(noise_cov, crate::mat::PSD_CLAMP)?;
            let a_sqrt = match p.info_matrix() {
                Some(a) => Some(crate::mat::psd_sqrt(&a, crate::mat::PSD_CLAMP)?),
                None => None,
            };
            let tensor = GaussHermiteTensor::new(r)?;
            let side_tensor = a_sqrt.as_ref().map(|_| GaussHermiteTensor::new(r).unwrap());
            let mut total = DMatrix::zeros(r, r);
            for ((ta, va), &wa) in p.atoms.iter().zip(&p.weights) {
                if wa <= 0.0 {
                    continue;
                }
                let tvec = nalgebra::DVector::from_column_slice(ta);
                let base = obs_coeff * &tvec;
                let mut acc = DMatrix::zeros(r, r);
                tensor.expect_weighted(|g, w| {
                    let mut b = vec![0.0; r];
                    for i in 0..r {
                        b[i] = base[i];
                        for j in 0..r {
                            b[i] += noise_sqrt[(i, j)] * g[j];
                        }
                    }
                    match (&a_sqrt, &side_tensor) {
                        (Some(asq), Some(st)) => {
                            // average over the realized Gaussian side info too
                            let side_base = asq * &tvec;
                            let mut inner = DMatrix::zeros(r, r);
                            st.expect_weighted(|gs, ws| {
                                let mut vv = vec![0.0; r];
                                for i in 0..r {
                                    vv[i] = side_base[i] + gs[i];
                                }
                                let cov = prior
                                    .denoise_cov(&b, obs_coeff, noise_cov, &vv)
                                    .expect("denoise cov");
                                inner += ws * cov;
                            });
                            acc += w * inner;
                        }
                        _ => {
                            let cov = prior
                                .denoise_cov(&b, obs_coeff, noise_cov, va)
                                .expect("denoise cov");
                            acc += w * cov;
                        }
                    }
                });
                total += wa * acc;
            }
            Ok(total * obs_coeff.transpose() * n_inv)
        }
    }
}

/// Innovation second moment `E[E[G1|Y,G0,U]^2]` at a walk state
/// `(sigma2, tilde_tau2)`.
pub fn innovation_second_moment(
    channel: &OutputChannel,
    sigma2: f64,
    tilde_tau2: f64,
) -> Result<f64> {
    Ok(crate::channel::score_expectation(
        channel,
        sigma2.max(0.0).sqrt(),
        tilde_tau2.max(0.0).sqrt(),
    )?
    .value
        * tilde_tau2)
}
