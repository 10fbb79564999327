//! Output channels `y = h(x, w)` for the regression model, with evaluable
//! conditional densities, and the score expectation driving the regression
//! state evolution.
//!
//! The score expectation is
//! `(1/tt^2) E[ E[G1 | Y, G0, U]^2 ]` with `Y = h(s*G0 + tt*G1, W)`,
//! evaluated in score form: for each outer node `(g0, u)` the inner
//! quadrature produces the mixture density `D(y) = E_{G1} p(y | s g0 + tt G1, u)`
//! and its signal moment `N(y) = (1/tt) E_{G1}[G1 p(...)]`, and the identity
//! `E_Y[(N/D)^2 | g0, u] = \int N(y)^2 / D(y) dy` reduces the outer average
//! over `Y` to a one-dimensional integral.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::quad::{adaptive_trapezoid, GaussHermite, DEFAULT_ORDER};
use crate::Result;

/// Law of the channel noise `W` (per observation row).
#[derive(Debug, Clone)]
pub enum WLaw {
    Gaussian { sd: f64 },
    Atoms(Vec<(f64, f64)>),
}

/// Joint law of `(W, U)`: `W` as above, `U` finite discrete and independent
/// unless encoded jointly through atoms.
#[derive(Debug, Clone)]
pub struct NoiseLaw {
    pub w: WLaw,
    /// `(value, weight)` atoms for the side information `U`.
    pub u: Vec<(f64, f64)>,
}

impl NoiseLaw {
    pub fn gaussian_w(sd: f64) -> Self {
        NoiseLaw {
            w: WLaw::Gaussian { sd },
            u: vec![(0.0, 1.0)],
        }
    }
}

type HFn = dyn Fn(f64, f64) -> f64 + Sync + Send;
type DensityFn = dyn Fn(f64, f64, f64) -> f64 + Sync + Send;
type YBoundFn = dyn Fn(f64) -> (f64, f64) + Sync + Send;
type MixFn = dyn Fn(f64, f64, f64, f64) -> (f64, f64, f64) + Sync + Send;

pub(crate) fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// The regression observation law `y = h(x, w)` together with an evaluable
/// conditional density `p(y | x, u)` when one exists.
pub struct OutputChannel {
    name: String,
    h: Box<HFn>,
    density: Option<Box<DensityFn>>,
    pub noise_law: NoiseLaw,
    /// Asserts `p(y|x) = p(y|-x)`; required by the phase-retrieval routines.
    pub symmetric: bool,
    /// Plausible support of `y` given `|x| <= x_abs_max`, used to size the
    /// adaptive integration grids.
    y_bound: Box<YBoundFn>,
    /// Analytic Gaussian-mixing moments, when available:
    /// `(y, mean, var_x, u) -> (E[p], E[G p], E[G^2 p])` for
    /// `p = p(y | mean + sqrt(var_x) G, u)`, `G ~ N(0,1)`.
    mix: Option<Box<MixFn>>,
    /// Smallest `x`-scale over which the density varies; sizes the fallback
    /// grid when no analytic mixing is available.
    x_width: f64,
}

impl std::fmt::Debug for OutputChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OutputChannel")
            .field("name", &self.name)
            .field("has_density", &self.density.is_some())
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

impl OutputChannel {
    pub fn new(
        name: impl Into<String>,
        h: impl Fn(f64, f64) -> f64 + Sync + Send + 'static,
        density: Option<Box<DensityFn>>,
        noise_law: NoiseLaw,
        symmetric: bool,
        y_bound: impl Fn(f64) -> (f64, f64) + Sync + Send + 'static,
    ) -> Self {
        OutputChannel {
            name: name.into(),
            h: Box::new(h),
            density,
            noise_law,
            symmetric,
            y_bound: Box::new(y_bound),
            mix: None,
            x_width: 1.0,
        }
    }

    pub fn with_mix(
        mut self,
        mix: impl Fn(f64, f64, f64, f64) -> (f64, f64, f64) + Sync + Send + 'static,
    ) -> Self {
        self.mix = Some(Box::new(mix));
        self
    }

    pub fn with_x_width(mut self, width: f64) -> Self {
        self.x_width = width.max(1e-6);
        self
    }

    /// Gaussian-mixed density moments
    /// `(E[p], E[G p], E[G^2 p])` for `p = p(y | mean + sqrt(var_x) G, u)`.
    ///
    /// Uses the channel's analytic form when present; otherwise a composite
    /// Simpson rule over `g` whose resolution tracks the density width.
    pub fn gauss_mix(&self, y: f64, mean: f64, var_x: f64, u: f64) -> Result<(f64, f64, f64)> {
        if let Some(mix) = &self.mix {
            return Ok(mix(y, mean, var_x, u));
        }
        if !self.has_density() {
            return Err(Error::Domain("channel density required for SE".into()));
        }
        let a = var_x.max(0.0).sqrt();
        if a < 1e-300 {
            let p = self.density_at(y, mean, u)?;
            return Ok((p, 0.0, 0.0));
        }
        // resolve the kernel width in g-units
        let g_step = (0.2 * self.x_width / a).min(0.02);
        let n = ((18.0 / g_step).ceil() as usize | 1).min(1_000_001);
        let h = 18.0 / (n - 1) as f64;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let g = -9.0 + i as f64 * h;
            let k = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let w = k * norm_pdf(g);
            let p = self.density_at(y, mean + a * g, u)?;
            m0 += w * p;
            m1 += w * g * p;
            m2 += w * g * g * p;
        }
        let scale = h / 3.0;
        Ok((m0 * scale, m1 * scale, m2 * scale))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn observe(&self, x: f64, w: f64) -> f64 {
        (self.h)(x, w)
    }

    pub fn has_density(&self) -> bool {
        self.density.is_some()
    }

    pub fn density_at(&self, y: f64, x: f64, u: f64) -> Result<f64> {
        match &self.density {
            Some(d) => Ok(d(y, x, u)),
            None => Err(Error::Domain("channel density required for SE".into())),
        }
    }

    pub fn u_atoms(&self) -> &[(f64, f64)] {
        &self.noise_law.u
    }

    pub fn y_range(&self, x_abs_max: f64) -> (f64, f64) {
        (self.y_bound)(x_abs_max)
    }

    /// Check `\int p(y|x, u) dy = 1` at sampled `(x, u)` within quadrature
    /// tolerance, and spot-check the linear growth bound on `h`.
    pub fn validate(&self) -> Result<()> {
        if self.density.is_some() {
            for &x in &[-2.0, -0.3, 0.0, 0.7, 3.1] {
                for &(u, _) in self.u_atoms() {
                    let (lo, hi) = self.y_range(f64::abs(x) + 1.0);
                    let mass = adaptive_trapezoid(
                        |y| self.density_at(y, x, u).unwrap_or(0.0),
                        lo,
                        hi,
                        1e-9,
                        "density normalization",
                    )?;
                    if (mass.value - 1.0).abs() > 1e-6 {
                        return Err(Error::Numerical(format!(
                            "channel '{}' density mass {} at x={x}",
                            self.name, mass.value
                        )));
                    }
                }
            }
        }
        // growth condition |h(x,w)| <= C (1 + |x| + |w|) on a grid
        let mut c_max: f64 = 0.0;
        for &x in &[-50.0, -5.0, -1.0, 0.0, 1.0, 5.0, 50.0] {
            for &w in &[-20.0, -1.0, 0.0, 1.0, 20.0] {
                let ratio = self.observe(x, w).abs() / (1.0 + x.abs() + w.abs());
                c_max = c_max.max(ratio);
            }
        }
        if !c_max.is_finite() || c_max > 1e6 {
            return Err(Error::Domain(format!(
                "channel '{}' violates the linear growth condition (C ~ {c_max:.3e})",
                self.name
            )));
        }
        Ok(())
    }
}

/// Result of a score computation, carrying the degenerate-noise flag.
#[derive(Debug, Clone, Copy)]
pub struct ScoreValue {
    pub value: f64,
    /// Set when `tilde_tau` underflowed and the score was defined as zero.
    pub degenerate_tilde_tau: bool,
}

/// `(1/tt^2) E[E[G1 | Y, G0, U]^2]` for `Y = h(sigma G0 + tilde_tau G1, W)`.
///
/// Requires the channel density. Nonnegative, and at most `1/tilde_tau^2`.
pub fn score_expectation(
    channel: &OutputChannel,
    sigma: f64,
    tilde_tau: f64,
) -> Result<ScoreValue> {
    if !channel.has_density() {
        return Err(Error::Domain("channel density required for SE".into()));
    }
    if sigma < 0.0 {
        return Err(Error::Domain("sigma must be nonnegative".into()));
    }
    if tilde_tau < 1e-12 {
        // The G1 component carries no information in this limit.
        return Ok(ScoreValue {
            value: 0.0,
            degenerate_tilde_tau: true,
        });
    }
    let gh = GaussHermite::new(DEFAULT_ORDER)?;
    let outer: Vec<(f64, f64)> = if sigma > 0.0 {
        gh.iter().collect()
    } else {
        vec![(0.0, 1.0)]
    };
    let x_abs_max = 9.0 * (sigma.hypot(tilde_tau)).max(1e-6);
    let (y_lo, y_hi) = channel.y_range(x_abs_max);
    let tt2 = tilde_tau * tilde_tau;

    let mut total = 0.0;
    for &(u, wu) in channel.u_atoms() {
        for &(g0, w0) in &outer {
            let base = sigma * g0;
            let integrand = |y: f64| {
                let (m0, m1, _) = channel.gauss_mix(y, base, tt2, u).unwrap_or((0.0, 0.0, 0.0));
                if m0 < 1e-300 {
                    return 0.0;
                }
                m1 * m1 / (tt2 * m0)
            };
            let integral = adaptive_trapezoid(integrand, y_lo, y_hi, 1e-7, "score integral")?;
            total += wu * w0 * integral.value;
        }
    }
    Ok(ScoreValue {
        value: total.max(0.0),
        degenerate_tilde_tau: false,
    })
}

/// Serializable channel reference: a registry name plus parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    #[serde(flatten)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl ChannelSpec {
    pub fn named(name: &str, params: &[(&str, f64)]) -> Self {
        let mut map = serde_json::Map::new();
        for &(k, v) in params {
            map.insert(k.to_string(), serde_json::json!(v));
        }
        ChannelSpec {
            name: name.to_string(),
            params: map,
        }
    }

    pub fn build(&self) -> Result<OutputChannel> {
        let get = |k: &str| self.params.get(k).and_then(|v| v.as_f64());
        match self.name.as_str() {
            "linear_gauss" => {
                let sd = get("sigma").unwrap_or(1.0);
                if sd <= 0.0 {
                    return Err(Error::Config("linear_gauss needs sigma > 0".into()));
                }
                Ok(linear_gauss(sd))
            }
            "abs_gauss" => {
                let sd = get("sigma").unwrap_or(0.2);
                if sd <= 0.0 {
                    return Err(Error::Config("abs_gauss needs sigma > 0".into()));
                }
                Ok(abs_gauss(sd))
            }
            "uninformative" => Ok(uninformative()),
            other => Err(Error::Config(format!("unknown channel '{other}'"))),
        }
    }
}

fn gauss_density(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// `y = x + sd * w`, `w ~ N(0,1)`.
pub fn linear_gauss(sd: f64) -> OutputChannel {
    OutputChannel::new(
        format!("linear_gauss(sigma={sd})"),
        move |x, w| x + sd * w,
        Some(Box::new(move |y, x, _u| gauss_density(y, x, sd))),
        NoiseLaw::gaussian_w(sd),
        false,
        move |xm| (-xm - 10.0 * sd, xm + 10.0 * sd),
    )
    .with_x_width(sd)
    .with_mix(move |y, mean, var_x, _u| {
        // phi(g) * phi_sd(c - a g) = phi_sqrt(a^2+sd^2)(c) * phi_sp(g - mp)
        let a2 = var_x.max(0.0);
        let tot = a2 + sd * sd;
        let c = y - mean;
        let amp = norm_pdf(c / tot.sqrt()) / tot.sqrt();
        let mp = a2.sqrt() * c / tot;
        let sp2 = sd * sd / tot;
        (amp, amp * mp, amp * (mp * mp + sp2))
    })
}

/// `y = |x| + sd * w`, `w ~ N(0,1)`; symmetric in `x`.
pub fn abs_gauss(sd: f64) -> OutputChannel {
    OutputChannel::new(
        format!("abs_gauss(sigma={sd})"),
        move |x, w| x.abs() + sd * w,
        Some(Box::new(move |y, x, _u| gauss_density(y, x.abs(), sd))),
        NoiseLaw::gaussian_w(sd),
        true,
        move |xm| (-xm - 10.0 * sd, xm + 10.0 * sd),
    )
    .with_x_width(sd)
    .with_mix(move |y, mean, var_x, _u| {
        // split at g* = -mean/a where the sign of x = mean + a g flips;
        // each half is a truncated Gaussian product with closed moments
        let a = var_x.max(0.0).sqrt();
        if a < 1e-300 {
            return (gauss_density(y, mean.abs(), sd), 0.0, 0.0);
        }
        let g_star = -mean / a;
        let tot = a * a + sd * sd;
        let sdt = tot.sqrt();
        let sp = sd / sdt;

        // x >= 0 piece: kernel phi_sd(c_p - a g), c_p = y - mean
        let c_p = y - mean;
        let amp_p = norm_pdf(c_p / sdt) / sdt;
        let mu_p = a * c_p / tot;
        let z_p = (g_star - mu_p) / sp;
        let (cdf_p, pdf_p) = (1.0 - norm_cdf(z_p), norm_pdf(z_p));
        let m0_p = amp_p * cdf_p;
        let m1_p = amp_p * (mu_p * cdf_p + sp * pdf_p);
        let m2_p = amp_p * ((mu_p * mu_p + sp * sp) * cdf_p + sp * (mu_p + g_star) * pdf_p);

        // x < 0 piece: kernel phi_sd(c_m + a g), c_m = y + mean
        let c_m = y + mean;
        let amp_m = norm_pdf(c_m / sdt) / sdt;
        let mu_m = -a * c_m / tot;
        let z_m = (g_star - mu_m) / sp;
        let (cdf_m, pdf_m) = (norm_cdf(z_m), norm_pdf(z_m));
        let m0_m = amp_m * cdf_m;
        let m1_m = amp_m * (mu_m * cdf_m - sp * pdf_m);
        let m2_m = amp_m * ((mu_m * mu_m + sp * sp) * cdf_m - sp * (mu_m + g_star) * pdf_m);

        (m0_p + m0_m, m1_p + m1_m, m2_p + m2_m)
    })
}

/// `y = w`: the density does not depend on `x`, so no information flows.
pub fn uninformative() -> OutputChannel {
    OutputChannel::new(
        "uninformative",
        |_x, w| w,
        Some(Box::new(|y, _x, _u| gauss_density(y, 0.0, 1.0))),
        NoiseLaw::gaussian_w(1.0),
        true,
        |_xm| (-10.0, 10.0),
    )
    .with_mix(|y, _mean, _var_x, _u| {
        let p = gauss_density(y, 0.0, 1.0);
        (p, 0.0, p)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn builtin_channels_validate() {
        for ch in [linear_gauss(0.5), abs_gauss(0.2), uninformative()] {
            ch.validate().unwrap();
        }
    }

    #[test]
    fn uninformative_channel_scores_zero() {
        let s = score_expectation(&uninformative(), 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(s.value, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn linear_gaussian_score_closed_form() {
        // sigma = 0, tilde_tau = 1: score = 1 / (1 + s^2)
        for s in [0.3, 1.0, 2.0] {
            let got = score_expectation(&linear_gauss(s), 0.0, 1.0).unwrap().value;
            assert!(
                (got - 1.0 / (1.0 + s * s)).abs() < 1e-6,
                "s={s}: {got} vs {}",
                1.0 / (1.0 + s * s)
            );
        }
        // general sigma, tilde_tau: score = 1/(tt^2 + s^2)
        let (sig, tt, s) = (0.8, 0.6, 0.5);
        let got = score_expectation(&linear_gauss(s), sig, tt).unwrap().value;
        assert!((got - 1.0 / (tt * tt + s * s)).abs() < 1e-6);
    }

    /// Monte Carlo oracle for the linear-Gaussian score at sigma=0:
    /// E[E[G1|Y]^2]/tt^2 with E[G1|y] = tt*y/(tt^2+s^2), averaged over Y.
    #[test]
    fn linear_gaussian_score_matches_monte_carlo() {
        let s = 0.7;
        let tt = 1.0;
        let got = score_expectation(&linear_gauss(s), 0.0, tt).unwrap().value;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000usize;
        let mut acc = 0.0;
        for _ in 0..n {
            let g1: f64 = rng.sample(StandardNormal);
            let w: f64 = rng.sample(StandardNormal);
            let y = tt * g1 + s * w;
            let post = tt * y / (tt * tt + s * s);
            acc += post * post;
        }
        let oracle = acc / n as f64 / (tt * tt);
        assert!((got - oracle).abs() < 3.0e-3, "{got} vs {oracle}");
    }

    #[test]
    fn symmetric_channel_score_vanishes_without_g0() {
        // sign of G1 unidentifiable from |.| when sigma = 0
        let got = score_expectation(&abs_gauss(0.3), 0.0, 1.0).unwrap().value;
        assert!(got.abs() < 1e-10, "{got}");
        // but a positive G0 component breaks the symmetry
        let got = score_expectation(&abs_gauss(0.3), 0.8, 0.6).unwrap().value;
        assert!(got > 1e-3);
    }

    #[test]
    fn score_bounded_by_inverse_noise() {
        for (sig, tt) in [(0.0, 1.0), (0.5, 0.7), (1.0, 0.2)] {
            for ch in [linear_gauss(0.4), abs_gauss(0.25)] {
                let s = score_expectation(&ch, sig, tt).unwrap().value;
                assert!(s >= 0.0);
                assert!(s <= 1.0 / (tt * tt) + 1e-6, "score {s} over bound");
            }
        }
    }

    #[test]
    fn degenerate_tilde_tau_flagged() {
        let s = score_expectation(&linear_gauss(0.5), 0.5, 1e-15).unwrap();
        assert!(s.degenerate_tilde_tau);
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn missing_density_rejected() {
        let ch = OutputChannel::new(
            "sample_only",
            |x, w| x + w,
            None,
            NoiseLaw::gaussian_w(1.0),
            false,
            |xm| (-xm - 10.0, xm + 10.0),
        );
        let err = score_expectation(&ch, 0.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("channel density required for SE"));
    }

    #[test]
    fn channel_spec_round_trip() {
        let spec: ChannelSpec =
            serde_json::from_str(r#"{"name":"abs_gauss","sigma":0.1}"#).unwrap();
        let ch = spec.build().unwrap();
        assert!(ch.symmetric);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("abs_gauss"));
        assert!(ChannelSpec::named("nope", &[]).build().is_err());
    }
}
