//! Seeded synthetic instances for the two models.
//!
//! All randomness flows from a ChaCha stream cipher keyed by the instance
//! seed, with a fixed substream per component, so instances are bit-identical
//! across runs and platforms for a given seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{OutputChannel, WLaw};
use crate::error::Error;
use crate::mat::{self, PSD_CLAMP};
use crate::prior::Prior;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Regression,
    LowRank,
}

/// Specification of an instance to generate.
pub struct InstanceSpec {
    pub model: ModelKind,
    pub n: usize,
    pub p: usize,
    pub prior_theta: Prior,
    pub prior_lambda: Option<Prior>,
    pub channel: Option<OutputChannel>,
}

impl InstanceSpec {
    pub fn regression(n: usize, p: usize, prior: Prior, channel: OutputChannel) -> Self {
        InstanceSpec {
            model: ModelKind::Regression,
            n,
            p,
            prior_theta: prior,
            prior_lambda: None,
            channel: Some(channel),
        }
    }

    pub fn lowrank(n: usize, p: usize, prior_theta: Prior, prior_lambda: Prior) -> Self {
        InstanceSpec {
            model: ModelKind::LowRank,
            n,
            p,
            prior_theta,
            prior_lambda: Some(prior_lambda),
            channel: None,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Instance> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::Config("n and p must be positive".into()));
        }
        let r = self.prior_theta.dim();
        // substreams: 0 = design/noise matrix, 1 = (theta, v), 2 = n-side
        let mut rng_x = stream_rng(seed, 0);
        let mut rng_t = stream_rng(seed, 1);
        let mut rng_n = stream_rng(seed, 2);

        let (theta, v) = sample_prior_rows(&self.prior_theta, self.p, &mut rng_t)?;

        // row-major fill order, fixed for reproducibility
        let scale = (self.n as f64).sqrt().recip();
        let mut xdata = vec![0.0f64; self.n * self.p];
        for val in xdata.iter_mut() {
            let z: f64 = rng_x.sample(StandardNormal);
            *val = scale * z;
        }
        let mut x = DMatrix::from_row_slice(self.n, self.p, &xdata);

        match self.model {
            ModelKind::Regression => {
                let channel = self
                    .channel
                    .as_ref()
                    .ok_or_else(|| Error::Config("regression instance needs a channel".into()))?;
                if r != 1 {
                    return Err(Error::Config("regression instances are scalar (r = 1)".into()));
                }
                let mut u = DMatrix::zeros(self.n, 1);
                let mut y = DVector::zeros(self.n);
                let xt = &x * &theta;
                for i in 0..self.n {
                    let w = match &channel.noise_law.w {
                        WLaw::Gaussian { sd: _ } => rng_n.sample::<f64, _>(StandardNormal),
                        WLaw::Atoms(atoms) => pick_atom(atoms, rng_n.gen::<f64>()),
                    };
                    u[(i, 0)] = pick_atom(channel.u_atoms(), rng_n.gen::<f64>());
                    y[i] = channel.observe(xt[(i, 0)], w);
                }
                Ok(Instance {
                    model: self.model,
                    n: self.n,
                    p: self.p,
                    r,
                    x,
                    theta,
                    lambda: None,
                    y,
                    u,
                    v,
                    seed,
                })
            }
            ModelKind::LowRank => {
                let prior_lambda = self
                    .prior_lambda
                    .as_ref()
                    .ok_or_else(|| Error::Config("low-rank instance needs a lambda prior".into()))?;
                if prior_lambda.dim() != r {
                    return Err(Error::Config("prior dimension mismatch".into()));
                }
                let (lambda, u) = sample_prior_rows(prior_lambda, self.n, &mut rng_n)?;
                // X = (1/n) lambda theta^T + Z
                x.gemm(1.0 / self.n as f64, &lambda, &theta.transpose(), 1.0);
                Ok(Instance {
                    model: self.model,
                    n: self.n,
                    p: self.p,
                    r,
                    x,
                    theta,
                    lambda: Some(lambda),
                    y: DVector::zeros(self.n), // dummy observations
                    u,
                    v,
                    seed,
                })
            }
        }
    }
}

/// A generated instance: data matrix, ground truth, observations, and side
/// information.
pub struct Instance {
    pub model: ModelKind,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub x: DMatrix<f64>,
    pub theta: DMatrix<f64>,
    pub lambda: Option<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub seed: u64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pick_atom(atoms: &[(f64, f64)], unif: f64) -> f64 {
    let mut acc = 0.0;
    for &(value, weight) in atoms {
        acc += weight;
        if unif < acc {
            return value;
        }
    }
    atoms.last().map(|a| a.0).unwrap_or(0.0)
}

/// Sample `rows` iid draws of `(theta, v)` from a prior. For atom priors the
/// `v` column carries either the atom's discrete side value or, when the
/// prior declares Gaussian side information `A`, the realized observation
/// `A^{1/2} theta + g`.
fn sample_prior_rows(
    prior: &Prior,
    rows: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = prior.dim();
    let mut theta = DMatrix::zeros(rows, r);
    let mut v = DMatrix::zeros(rows, r);
    match prior {
        Prior::Atoms(p) => {
            let a_sqrt = match p.info_matrix() {
                Some(a) => Some(mat::psd_sqrt(&a, PSD_CLAMP)?),
                None => None,
            };
            for i in 0..rows {
                let unif: f64 = rng.gen();
                let mut acc = 0.0;
                let mut idx = p.atoms.len() - 1;
                for (k, &w) in p.weights.iter().enumerate() {
                    acc += w;
                    if unif < acc {
                        idx = k;
                        break;
                    }
                }
                let (ta, va) = &p.atoms[idx];
                for j in 0..r {
                    theta[(i, j)] = ta[j];
                }
                match &a_sqrt {
                    Some(a) => {
                        // v = A^{1/2} theta + g
                        for j in 0..r {
                            let mut s: f64 = rng.sample(StandardNormal);
                            for k in 0..r {
                                s += a[(j, k)] * ta[k];
                            }
                            v[(i, j)] = s;
                        }
                    }
                    None => {
                        for j in 0..r {
                            v[(i, j)] = va[j];
                        }
                    }
                }
            }
        }
        Prior::Gaussian { dim, cov } => {
            let c = DMatrix::from_row_slice(*dim, *dim, cov);
            let c_sqrt = mat::psd_sqrt(&c, PSD_CLAMP)?;
            for i in 0..rows {
                let g = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
                let t = &c_sqrt * g;
                for j in 0..r {
                    theta[(i, j)] = t[j];
                }
            }
        }
    }
    Ok((theta, v))
}
