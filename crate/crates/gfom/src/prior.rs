//! Signal priors and the scalar/vector Bayes computations built on them:
//! posterior means, MMSE, and second moments of conditional expectations.
//!
//! Priors are finite discrete joint distributions of `(theta, v)` pairs.
//! Side information comes in two forms:
//!
//! * the discrete `v` component of each atom (possibly constant, i.e.
//!   uninformative, or equal to `theta`, i.e. perfect), and
//! * an optional Gaussian observation `v = A^{1/2} theta + g`,
//!   `g ~ N(0, I_r)`, described by its information matrix `A`. This is how
//!   the oracle-initialization side information of the applications enters:
//!   it adds `A` to the Fisher information of every Gaussian observation of
//!   `theta`.
//!
//! A separate [`Prior`] enum admits an exact Gaussian marginal, needed for
//! the factor-side variable of the spiked-matrix model, where the posterior
//! mean is linear and all second-moment maps are closed form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mat::{self, PSD_CLAMP};
use crate::quad::{GaussHermite, GaussHermiteTensor};
use crate::Result;

/// Tolerance for matching a discrete side-information vector to an atom.
const V_MATCH_TOL: f64 = 1e-12;

/// Finite discrete joint distribution of `(theta, v)` in `R^r x R^r`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointPrior {
    /// Signal dimension per coordinate (`r = 1` for regression).
    pub dim: usize,
    /// Atom list; each entry is the pair `[theta, v]`.
    pub atoms: Vec<(Vec<f64>, Vec<f64>)>,
    /// Atom probabilities, summing to one.
    pub weights: Vec<f64>,
    /// Information matrix `A` of an additional Gaussian side observation
    /// `A^{1/2} theta + g`; row-major `r x r`, omitted when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_v_info: Option<Vec<f64>>,
}

impl JointPrior {
    pub fn new(dim: usize, atoms: Vec<(Vec<f64>, Vec<f64>)>, weights: Vec<f64>) -> Result<Self> {
        let p = JointPrior {
            dim,
            atoms,
            weights,
            gaussian_v_info: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Scalar prior from `(theta, weight)` pairs with uninformative side
    /// information.
    pub fn scalar(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            1,
            atoms.iter().map(|&(t, _)| (vec![t], vec![0.0])).collect(),
            atoms.iter().map(|&(_, w)| w).collect(),
        )
    }

    /// Attach Gaussian side information of scalar strength `a >= 0`
    /// (information matrix `a * I_r`).
    pub fn with_gaussian_side_info(mut self, a: f64) -> Result<Self> {
        if a < 0.0 {
            return Err(Error::Domain("side information strength must be >= 0".into()));
        }
        let mut m = vec![0.0; self.dim * self.dim];
        for i in 0..self.dim {
            m[i * self.dim + i] = a;
        }
        self.gaussian_v_info = Some(m);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::Domain("prior must have at least one atom".into()));
        }
        if self.dim == 0 || self.dim > 4 {
            return Err(Error::Domain(format!(
                "prior dimension must satisfy 1 <= r <= 4, got {}",
                self.dim
            )));
        }
        if self.weights.len() != self.atoms.len() {
            return Err(Error::Domain("weights and atoms length mismatch".into()));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Domain("weights must be nonnegative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "weights must sum to 1 (got {total})"
            )));
        }
        for (t, v) in &self.atoms {
            if t.len() != self.dim || v.len() != self.dim {
                return Err(Error::Domain("atom dimension mismatch".into()));
            }
        }
        if let Some(a) = &self.gaussian_v_info {
            if a.len() != self.dim * self.dim {
                return Err(Error::Domain("gaussian_v_info shape mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn info_matrix(&self) -> Option<DMatrix<f64>> {
        self.gaussian_v_info
            .as_ref()
            .map(|a| DMatrix::from_row_slice(self.dim, self.dim, a))
    }

    /// `E[Theta Theta^T]`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for ((t, _), &w) in self.atoms.iter().zip(&self.weights) {
            let tv = DVector::from_column_slice(t);
            m += w * &tv * tv.transpose();
        }
        m
    }

    /// `E[|Theta|^2]` (`tau_Theta^2` in the scalar case).
    pub fn second_moment_scalar(&self) -> f64 {
        self.second_moment().trace()
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for ((t, _), &w) in self.atoms.iter().zip(&self.weights) {
            m += w * DVector::from_column_slice(t);
        }
        m
    }

    /// Atoms grouped by their discrete side-information value.
    fn v_groups(&self) -> Vec<(Vec<f64>, Vec<usize>)> {
        let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
        for (i, (_, v)) in self.atoms.iter().enumerate() {
            match groups.iter_mut().find(|(gv, _)| vec_close(gv, v)) {
                Some((_, idx)) => idx.push(i),
                None => groups.push((v.clone(), vec![i])),
            }
        }
        groups
    }

    /// `E[Var(Theta | V)]` using the discrete side information only
    /// (the scalar conditional-prior MMSE at infinite noise).
    pub fn conditional_prior_variance(&self) -> f64 {
        let mut total = 0.0;
        for (_, idx) in self.v_groups() {
            let pw: f64 = idx.iter().map(|&i| self.weights[i]).sum();
            if pw <= 0.0 {
                continue;
            }
            let mut mean = DVector::zeros(self.dim);
            let mut sq = 0.0;
            for &i in &idx {
                let t = DVector::from_column_slice(&self.atoms[i].0);
                mean += self.weights[i] / pw * &t;
                sq += self.weights[i] / pw * t.norm_squared();
            }
            total += pw * (sq - mean.norm_squared());
        }
        total
    }

    /// Posterior mean of `Theta` given the Gaussian observation
    /// `y = Q^{1/2} Theta + G` and side information `v`.
    ///
    /// With discrete side information, `v` must match the `v`-component of
    /// some atom. With Gaussian side information, `v` is the realized side
    /// observation and enters through its likelihood.
    pub fn posterior_mean(&self, y: &[f64], q: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
        let q_sqrt = mat::psd_sqrt(q, PSD_CLAMP)?;
        let a_sqrt = match self.info_matrix() {
            Some(a) => Some(mat::psd_sqrt(&a, PSD_CLAMP)?),
            None => None,
        };
        let m = self.posterior_mean_prepared(y, &q_sqrt, a_sqrt.as_ref(), v)?;
        Ok(m.as_slice().to_vec())
    }

    /// Same as [`posterior_mean`](Self::posterior_mean) with precomputed
    /// square roots, for use in inner quadrature loops.
    pub fn posterior_mean_prepared(
        &self,
        y: &[f64],
        q_sqrt: &DMatrix<f64>,
        gauss_side_sqrt: Option<&DMatrix<f64>>,
        v: &[f64],
    ) -> Result<DVector<f64>> {
        let r = self.dim;
        let yv = DVector::from_column_slice(y);
        let sv = DVector::from_column_slice(v);
        let mut logw = Vec::with_capacity(self.atoms.len());
        let mut active = Vec::with_capacity(self.atoms.len());
        for (i, ((t, va), &w)) in self.atoms.iter().zip(&self.weights).enumerate() {
            if w <= 0.0 {
                continue;
            }
            let tv = DVector::from_column_slice(t);
            let mut lw = w.ln() - 0.5 * (&yv - q_sqrt * &tv).norm_squared();
            match gauss_side_sqrt {
                Some(a_sqrt) => {
                    lw -= 0.5 * (&sv - a_sqrt * &tv).norm_squared();
                }
                None => {
                    if !vec_close(va, v) {
                        continue;
                    }
                }
            }
            logw.push(lw);
            active.push(i);
        }
        if active.is_empty() {
            return Err(Error::Domain("side information outside prior support".into()));
        }
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = DVector::zeros(r);
        let mut den = 0.0;
        for (&i, &lw) in active.iter().zip(&logw) {
            let w = (lw - max).exp();
            num += w * DVector::from_column_slice(&self.atoms[i].0);
            den += w;
        }
        if den <= 0.0 || !den.is_finite() {
            // all likelihoods underflow: fall back to the conditional prior
            // mean over the admissible atoms
            let mut pm = DVector::zeros(r);
            let mut pw = 0.0;
            for &i in &active {
                pm += self.weights[i] * DVector::from_column_slice(&self.atoms[i].0);
                pw += self.weights[i];
            }
            return Ok(pm / pw);
        }
        Ok(num / den)
    }

    /// Posterior second moment `E[Theta Theta^T | y, v]` and mean, sharing
    /// the weight computation with the mean (used for analytic Onsager
    /// derivatives).
    pub fn posterior_mean_and_second_moment(
        &self,
        y: &[f64],
        q_sqrt: &DMatrix<f64>,
        gauss_side_sqrt: Option<&DMatrix<f64>>,
        v: &[f64],
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let r = self.dim;
        let yv = DVector::from_column_slice(y);
        let sv = DVector::from_column_slice(v);
        let mut logw = Vec::with_capacity(self.atoms.len());
        let mut active = Vec::with_capacity(self.atoms.len());
        for (i, ((t, va), &w)) in self.atoms.iter().zip(&self.weights).enumerate() {
            if w <= 0.0 {
                continue;
            }
            let tv = DVector::from_column_slice(t);
            let mut lw = w.ln() - 0.5 * (&yv - q_sqrt * &tv).norm_squared();
            match gauss_side_sqrt {
                Some(a_sqrt) => lw -= 0.5 * (&sv - a_sqrt * &tv).norm_squared(),
                None => {
                    if !vec_close(va, v) {
                        continue;
                    }
                }
            }
            logw.push(lw);
            active.push(i);
        }
        if active.is_empty() {
            return Err(Error::Domain("side information outside prior support".into()));
        }
        let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut num = DVector::zeros(r);
        let mut num2 = DMatrix::zeros(r, r);
        let mut den = 0.0;
        for (&i, &lw) in active.iter().zip(&logw) {
            let w = (lw - max).exp();
            let tv = DVector::from_column_slice(&self.atoms[i].0);
            num += w * &tv;
            num2 += w * &tv * tv.transpose();
            den += w;
        }
        Ok((num / den, num2 / den))
    }

    /// Minimum mean square error for estimating scalar `Theta` from side
    /// information and the observation `Theta + tau G`. `tau2` may be
    /// `f64::INFINITY`, in which case the observation is absent and the
    /// conditional-prior statistics are returned.
    pub fn mmse_scalar(&self, tau2: f64) -> Result<f64> {
        if self.dim != 1 {
            return Err(Error::Domain("mmse_scalar requires a scalar prior".into()));
        }
        if !(tau2 > 0.0) {
            return Err(Error::Domain(format!("tau2 must be positive, got {tau2}")));
        }
        let obs_info = if tau2.is_infinite() { 0.0 } else { 1.0 / tau2 };
        let side_info = self.info_matrix().map_or(0.0, |a| a[(0, 0)]);
        let total_info = obs_info + side_info;
        if total_info <= 0.0 {
            return Ok(self.conditional_prior_variance());
        }
        // Combined sufficient observation Theta + total_info^{-1/2} G,
        // conditioning also on the discrete side information of each atom.
        let noise = total_info.sqrt().recip();
        let gh = GaussHermite::new(crate::quad::DEFAULT_ORDER)?;
        let groups = self.v_groups();
        let mut total = 0.0;
        for (_, idx) in &groups {
            let pw: f64 = idx.iter().map(|&i| self.weights[i]).sum();
            if pw <= 0.0 {
                continue;
            }
            for &b in idx {
                let tb = self.atoms[b].0[0];
                let wb = self.weights[b];
                total += wb
                    * gh.expect(|g| {
                        let y = tb + noise * g;
                        let m = scalar_posterior_mean_grouped(self, idx, y, total_info);
                        (tb - m) * (tb - m)
                    });
            }
        }
        Ok(total.max(0.0))
    }

    /// Second moment of the conditional expectation,
    /// `E[ E[Theta | Q^{1/2}Theta + G; V] E[Theta | ...]^T ]`, by tensor
    /// Gauss-Hermite quadrature over `G ~ N(0, I_r)`.
    pub fn v_second_moment(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if q.nrows() != self.dim || q.ncols() != self.dim {
            return Err(Error::Domain("Q dimension mismatch".into()));
        }
        let a = self.info_matrix();
        let q_eff = match &a {
            Some(a) => q + a,
            None => q.clone(),
        };
        let q_sqrt = mat::psd_sqrt(&q_eff, PSD_CLAMP)?;
        let tensor = GaussHermiteTensor::new(self.dim)?;
        let r = self.dim;
        let mut out = DMatrix::zeros(r, r);
        let mut y = vec![0.0; r];
        for ((tb, vb), &wb) in self.atoms.iter().zip(&self.weights) {
            if wb <= 0.0 {
                continue;
            }
            let tbv = DVector::from_column_slice(tb);
            let base = &q_sqrt * &tbv;
            // Gaussian side information is already folded into q_eff:
            // conditioning on the combined observation is sufficient.
            let mut acc = DMatrix::zeros(r, r);
            tensor.expect_weighted(|g, w| {
                for i in 0..r {
                    y[i] = base[i] + g[i];
                }
                let m = self
                    .posterior_mean_prepared(&y, &q_sqrt, None, vb)
                    .expect("atom side info always matches itself");
                acc.gemm(w, &m, &m.transpose(), 1.0);
            });
            out += wb * acc;
        }
        Ok(mat::symmetrize(&out))
    }
}

/// Posterior mean within a discrete-side-information group, for the scalar
/// combined observation `y` with Fisher information `info`.
fn scalar_posterior_mean_grouped(prior: &JointPrior, idx: &[usize], y: f64, info: f64) -> f64 {
    let sq = info.sqrt();
    let mut max = f64::NEG_INFINITY;
    let mut lws = Vec::with_capacity(idx.len());
    for &i in idx {
        let t = prior.atoms[i].0[0];
        let lw = prior.weights[i].ln() - 0.5 * (sq * (y - t)) * (sq * (y - t));
        lws.push(lw);
        if lw > max {
            max = lw;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&i, &lw) in idx.iter().zip(&lws) {
        let w = (lw - max).exp();
        num += w * prior.atoms[i].0[0];
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        // underflow: conditional prior mean of the group
        let pw: f64 = idx.iter().map(|&i| prior.weights[i]).sum();
        idx.iter().map(|&i| prior.weights[i] * prior.atoms[i].0[0]).sum::<f64>() / pw
    }
}

/// A prior that is either a finite atom list or an exact centered Gaussian.
///
/// The Gaussian variant keeps the factor-side map of the spiked model exact:
/// its posterior mean under a Gaussian observation is linear, so second
/// moments are closed form rather than quadrature.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Atoms(JointPrior),
    Gaussian {
        dim: usize,
        /// Covariance of the Gaussian marginal, row-major `r x r`.
        cov: Vec<f64>,
    },
}

impl Prior {
    pub fn standard_gaussian(dim: usize) -> Self {
        let mut cov = vec![0.0; dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = 1.0;
        }
        Prior::Gaussian { dim, cov }
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::Atoms(p) => p.dim,
            Prior::Gaussian { dim, .. } => *dim,
        }
    }

    pub fn second_moment(&self) -> DMatrix<f64> {
        match self {
            Prior::Atoms(p) => p.second_moment(),
            Prior::Gaussian { dim, cov } => DMatrix::from_row_slice(*dim, *dim, cov),
        }
    }

    /// Second moment of the conditional expectation under the observation
    /// `Q^{1/2} theta + G`.
    pub fn v_second_moment(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if mat::min_eigenvalue(q) < -PSD_CLAMP {
            return Err(Error::Domain(format!(
                "matrix not PSD (min eigenvalue {:.3e})",
                mat::min_eigenvalue(q)
            )));
        }
        match self {
            Prior::Atoms(p) => p.v_second_moment(q),
            Prior::Gaussian { dim, cov } => {
                let c = DMatrix::from_row_slice(*dim, *dim, cov);
                let q_sqrt = mat::psd_sqrt(q, PSD_CLAMP)?;
                // V(Q) = C Q^{1/2} (Q^{1/2} C Q^{1/2} + I)^{-1} Q^{1/2} C
                let s = &q_sqrt * &c * &q_sqrt + DMatrix::identity(*dim, *dim);
                let inner = mat::psd_solve(&s, &(&q_sqrt * &c));
                Ok(mat::symmetrize(&(&c * &q_sqrt * inner)))
            }
        }
    }

    /// Posterior mean given `y = obs_coeff * theta + noise`,
    /// `noise ~ N(0, noise_cov)`, with side information `v`.
    ///
    /// This is the general denoiser form used by the AMP engine; for atom
    /// priors the observation is whitened internally.
    pub fn denoise(
        &self,
        y: &[f64],
        obs_coeff: &DMatrix<f64>,
        noise_cov: &DMatrix<f64>,
        v: &[f64],
    ) -> Result<DVector<f64>> {
        match self {
            Prior::Atoms(p) => {
                let (wh_y, wh_coeff) = whiten(y, obs_coeff, noise_cov)?;
                if wh_coeff.amax() == 0.0 {
                    // degenerate observation: condition on side info only
                    let a_sqrt = match p.info_matrix() {
                        Some(a) => Some(mat::psd_sqrt(&a, PSD_CLAMP)?),
                        None => None,
                    };
                    return p.posterior_mean_prepared(
                        &vec![0.0; p.dim],
                        &DMatrix::zeros(p.dim, p.dim),
                        a_sqrt.as_ref(),
                        v,
                    );
                }
                // whitened observation wh_y = wh_coeff * theta + g: this is a
                // general linear observation; reuse the weight machinery with
                // "q_sqrt" replaced by the whitened coefficient.
                let a_sqrt = match p.info_matrix() {
                    Some(a) => Some(mat::psd_sqrt(&a, PSD_CLAMP)?),
                    None => None,
                };
                p.posterior_mean_prepared(wh_y.as_slice(), &wh_coeff, a_sqrt.as_ref(), v)
            }
            Prior::Gaussian { dim, cov } => {
                let c = DMatrix::from_row_slice(*dim, *dim, cov);
                let yv = DVector::from_column_slice(y);
                // E[theta | y] = C B^T (B C B^T + N)^{-1} y
                let s = obs_coeff * &c * obs_coeff.transpose() + noise_cov;
                let k = mat::psd_solve(&s, &(obs_coeff * &c));
                Ok(k.transpose() * yv)
            }
        }
    }

    /// Posterior variance statistics for the same observation model:
    /// returns `E[theta theta^T | y] - m m^T`.
    pub fn denoise_cov(
        &self,
        y: &[f64],
        obs_coeff: &DMatrix<f64>,
        noise_cov: &DMatrix<f64>,
        v: &[f64],
    ) -> Result<DMatrix<f64>> {
        match self {
            Prior::Atoms(p) => {
                let (wh_y, wh_coeff) = whiten(y, obs_coeff, noise_cov)?;
                let a_sqrt = match p.info_matrix() {
                    Some(a) => Some(mat::psd_sqrt(&a, PSD_CLAMP)?),
                    None => None,
                };
                let (m, m2) = p.posterior_mean_and_second_moment(
                    wh_y.as_slice(),
                    &wh_coeff,
                    a_sqrt.as_ref(),
                    v,
                )?;
                Ok(m2 - &m * m.transpose())
            }
            Prior::Gaussian { dim, cov } => {
                let c = DMatrix::from_row_slice(*dim, *dim, cov);
                let s = obs_coeff * &c * obs_coeff.transpose() + noise_cov;
                let k = mat::psd_solve(&s, &(obs_coeff * &c));
                Ok(&c - k.transpose() * obs_coeff * &c)
            }
        }
    }
}

/// Whiten the observation `y = B theta + noise`, `noise ~ N(0, N)`, into
/// `N^{-1/2} y = N^{-1/2} B theta + g`. Degenerate noise directions are
/// handled by the pseudo-inverse square root.
fn whiten(
    y: &[f64],
    obs_coeff: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let eig = nalgebra::SymmetricEigen::new(mat::symmetrize(noise_cov));
    if eig.eigenvalues.iter().any(|&l| l < -1e-8) {
        return Err(Error::Numerical("SE covariance degenerate".into()));
    }
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| {
        if l <= PSD_CLAMP {
            0.0
        } else {
            l.sqrt().recip()
        }
    }));
    let w = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let yv = DVector::from_column_slice(y);
    Ok(((&w * yv).column(0).into_owned(), &w * obs_coeff))
}

fn vec_close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= V_MATCH_TOL)
}

/// Named prior constructors used by configs and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriorSpec {
    Named {
        name: String,
        #[serde(flatten)]
        params: serde_json::Map<String, serde_json::Value>,
    },
    Inline(JointPrior),
}

impl PriorSpec {
    pub fn build(&self) -> Result<Prior> {
        match self {
            PriorSpec::Inline(p) => {
                p.validate()?;
                Ok(Prior::Atoms(p.clone()))
            }
            PriorSpec::Named { name, params } => {
                let get = |k: &str| params.get(k).and_then(|v| v.as_f64());
                match name.as_str() {
                    "three_point" => {
                        let mu = get("mu")
                            .ok_or_else(|| Error::Config("three_point needs mu".into()))?;
                        let eps = get("eps")
                            .ok_or_else(|| Error::Config("three_point needs eps".into()))?;
                        if !(eps > 0.0 && eps <= 1.0) {
                            return Err(Error::Config("eps must lie in (0, 1]".into()));
                        }
                        let scale = get("scale").unwrap_or(1.0);
                        let mut p = three_point(mu, eps, scale)?;
                        if let Some(a) = get("gaussian_v_info") {
                            p = p.with_gaussian_side_info(a)?;
                        }
                        Ok(Prior::Atoms(p))
                    }
                    "two_point" => {
                        let mu =
                            get("mu").ok_or_else(|| Error::Config("two_point needs mu".into()))?;
                        Ok(Prior::Atoms(JointPrior::scalar(&[
                            (mu, 0.5),
                            (-mu, 0.5),
                        ])?))
                    }
                    "point_mass" => {
                        let c = get("value")
                            .ok_or_else(|| Error::Config("point_mass needs value".into()))?;
                        Ok(Prior::Atoms(JointPrior::scalar(&[(c, 1.0)])?))
                    }
                    "discretized_gaussian" => {
                        let points = get("points").unwrap_or(21.0) as usize;
                        let var = get("variance").unwrap_or(1.0);
                        Ok(Prior::Atoms(discretized_gaussian(points, var)?))
                    }
                    "gaussian" => {
                        let var = get("variance").unwrap_or(1.0);
                        Ok(Prior::Gaussian {
                            dim: 1,
                            cov: vec![var],
                        })
                    }
                    other => Err(Error::Config(format!("unknown prior '{other}'"))),
                }
            }
        }
    }
}

/// Three-point sparse prior `(1-eps) d_0 + (eps/2)(d_{+mu} + d_{-mu})`,
/// with every atom scaled by `scale`.
pub fn three_point(mu: f64, eps: f64, scale: f64) -> Result<JointPrior> {
    JointPrior::scalar(&[
        (0.0, 1.0 - eps),
        (scale * mu, eps / 2.0),
        (-scale * mu, eps / 2.0),
    ])
}

/// Finite-atom discretization of `N(0, variance)` on Gauss-Hermite nodes.
pub fn discretized_gaussian(points: usize, variance: f64) -> Result<JointPrior> {
    let gh = GaussHermite::new(points)?;
    let sd = variance.sqrt();
    let atoms: Vec<(f64, f64)> = gh.iter().map(|(x, w)| (sd * x, w)).collect();
    JointPrior::scalar(&atoms)
}

/// Three-point prior with perfect side information (`v = theta`).
pub fn three_point_perfect_side(mu: f64, eps: f64, scale: f64) -> Result<JointPrior> {
    JointPrior::new(
        1,
        vec![
            (vec![0.0], vec![0.0]),
            (vec![scale * mu], vec![scale * mu]),
            (vec![-scale * mu], vec![-scale * mu]),
        ],
        vec![1.0 - eps, eps / 2.0, eps / 2.0],
    )
}
