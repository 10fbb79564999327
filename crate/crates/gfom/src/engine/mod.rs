//! Finite-instance execution of general first-order methods and AMP
//! algorithms, with an instrumented multiply counter.
//!
//! Update rules are row-wise maps. The `f` side acts on rows of the
//! `n x r` iterates (factor side, sees `y` and `u`); the `g` side acts on
//! rows of the `p x r` iterates (variable side, sees `v`). Histories are
//! passed flattened: `hist[s*r..(s+1)*r]` is the row of the `(s+1)`-th
//! iterate.

pub mod bayes;
pub mod check;
pub mod instance;
pub mod onsager;

pub use instance::{Instance, ModelKind};

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Hard cap on stored iterates; keeps memory bounded at desk scale.
pub const MAX_ITERATES: usize = 64;

/// Arguments to an `f`-side rule.
pub struct FArgs<'a> {
    /// Flattened history of `b`-rows, `t * r` entries.
    pub hist: &'a [f64],
    pub t: usize,
    pub r: usize,
    pub y: f64,
    pub u: &'a [f64],
}

/// Arguments to a `g`-side rule.
pub struct GArgs<'a> {
    /// Flattened history of `a`-rows, `t * r` entries.
    pub hist: &'a [f64],
    pub t: usize,
    pub r: usize,
    pub v: &'a [f64],
}

pub type FRule = Box<dyn Fn(&FArgs, &mut [f64]) + Sync + Send>;
pub type GRule = Box<dyn Fn(&GArgs, &mut [f64]) + Sync + Send>;
/// Jacobian of a rule with respect to history block `s` (zero-based);
/// writes `d out_i / d hist[s*r + j]` to `out[i*r + j]`.
pub type FDeriv = Box<dyn Fn(&FArgs, usize, &mut [f64]) + Sync + Send>;
pub type GDeriv = Box<dyn Fn(&GArgs, usize, &mut [f64]) + Sync + Send>;

/// The update rules `(f_t)_{t>=0}`, `(g_t)_{t>=1}` of an AMP algorithm,
/// with optional analytic Jacobians for the Onsager computations.
pub struct UpdateRuleSeq {
    pub r: usize,
    /// `f_rules[t]` is `f_t`; `f_0` receives an empty history.
    pub f_rules: Vec<FRule>,
    /// `g_rules[t-1]` is `g_t`.
    pub g_rules: Vec<GRule>,
    pub f_derivs: Vec<Option<FDeriv>>,
    pub g_derivs: Vec<Option<GDeriv>>,
    pub lipschitz_hint: Option<f64>,
}

impl UpdateRuleSeq {
    pub fn horizon_f(&self) -> usize {
        self.f_rules.len()
    }

    pub fn horizon_g(&self) -> usize {
        self.g_rules.len()
    }
}

/// Deterministic Onsager coefficient matrices: `xi[t-1][s-1]` is the
/// `r x r` matrix on `g_s` in the `a^{t+1}` update (`1 <= s <= t`), and
/// `zeta[t-1][s]` the matrix on `f_s` in the `b^t` update (`0 <= s < t`).
#[derive(Debug, Clone)]
pub struct OnsagerCoeffs {
    pub r: usize,
    pub xi: Vec<Vec<DMatrix<f64>>>,
    pub zeta: Vec<Vec<DMatrix<f64>>>,
}

impl OnsagerCoeffs {
    pub fn zeros(r: usize, t_max: usize) -> Self {
        OnsagerCoeffs {
            r,
            xi: (1..t_max)
                .map(|t| vec![DMatrix::zeros(r, r); t])
                .collect(),
            zeta: (1..t_max)
                .map(|t| vec![DMatrix::zeros(r, r); t])
                .collect(),
        }
    }

    fn check_covers(&self, t_star: usize) -> Result<()> {
        if t_star >= 2 && (self.xi.len() < t_star - 1 || self.zeta.len() < t_star - 1) {
            return Err(Error::Config(format!(
                "Onsager coefficients cover {} iterations, need {}",
                self.xi.len() + 1,
                t_star
            )));
        }
        Ok(())
    }
}

/// A general first-order method: row-wise rule sequences plus the final
/// estimator, all applied against multiplications by `X` and `X^T`.
pub struct GfomSpec {
    pub r: usize,
    /// `F_t^{(1)}(u^1..u^t; y, u)`, `t >= 0`.
    pub f1: Vec<FRule>,
    /// `F_t^{(2)}(v^1..v^t; v)`, `t >= 0`.
    pub f2: Vec<GRule>,
    /// `G_t^{(1)}(v^1..v^t; v)`, `t >= 1` at index `t-1`.
    pub g1: Vec<GRule>,
    /// `G_t^{(2)}(u^1..u^{t-1}; y, u)`, `t >= 1` at index `t-1`.
    pub g2: Vec<FRule>,
    /// Estimator `G_*(v^1..v^{t}; v)` applied row-wise.
    pub g_star: GRule,
}

/// Output of a GFOM run.
pub struct GfomRun {
    pub v_iters: Vec<DMatrix<f64>>,
    pub u_iters: Vec<DMatrix<f64>>,
    pub theta_hat: DMatrix<f64>,
    pub multiplies: usize,
}

/// Output of an AMP run.
pub struct AmpRun {
    pub a_iters: Vec<DMatrix<f64>>,
    pub b_iters: Vec<DMatrix<f64>>,
    pub multiplies: usize,
}

fn check_t_star(t_star: usize) -> Result<()> {
    if t_star == 0 {
        return Err(Error::Domain("t_star must be >= 1".into()));
    }
    if t_star > MAX_ITERATES {
        return Err(Error::Config(format!(
            "t_star = {t_star} exceeds the stored-iterate cap {MAX_ITERATES}"
        )));
    }
    Ok(())
}

/// Apply an `f`-side rule row-wise over the `n`-side iterate history.
fn apply_f_rows(
    rule: &FRule,
    t: usize,
    r: usize,
    hist: &[DMatrix<f64>],
    y: &DVector<f64>,
    u: &DMatrix<f64>,
    n: usize,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, r);
    let mut hbuf = vec![0.0; t * r];
    let mut ubuf = vec![0.0; r];
    let mut obuf = vec![0.0; r];
    for i in 0..n {
        for (s, m) in hist.iter().take(t).enumerate() {
            for j in 0..r {
                hbuf[s * r + j] = m[(i, j)];
            }
        }
        for j in 0..r {
            ubuf[j] = u[(i, j)];
        }
        let args = FArgs {
            hist: &hbuf,
            t,
            r,
            y: y[i],
            u: &ubuf,
        };
        obuf.fill(0.0);
        rule(&args, &mut obuf);
        for j in 0..r {
            out[(i, j)] = obuf[j];
        }
    }
    out
}

/// Apply a `g`-side rule row-wise over the `p`-side iterate history.
fn apply_g_rows(
    rule: &GRule,
    t: usize,
    r: usize,
    hist: &[DMatrix<f64>],
    v: &DMatrix<f64>,
    p: usize,
) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(p, r);
    let mut hbuf = vec![0.0; t * r];
    let mut vbuf = vec![0.0; r];
    let mut obuf = vec![0.0; r];
    for j_row in 0..p {
        for (s, m) in hist.iter().take(t).enumerate() {
            for j in 0..r {
                hbuf[s * r + j] = m[(j_row, j)];
            }
        }
        for j in 0..r {
            vbuf[j] = v[(j_row, j)];
        }
        let args = GArgs {
            hist: &hbuf,
            t,
            r,
            v: &vbuf,
        };
        obuf.fill(0.0);
        rule(&args, &mut obuf);
        for j in 0..r {
            out[(j_row, j)] = obuf[j];
        }
    }
    out
}

/// Run a GFOM for `t_star` iterations: produces `v^1..v^{t_star}`,
/// `u^1..u^{t_star-1}`, and the row-wise estimate, using exactly
/// `2 t_star - 1` matrix multiplications.
pub fn gfom_run(spec: &GfomSpec, inst: &Instance, t_star: usize) -> Result<GfomRun> {
    check_t_star(t_star)?;
    if spec.f1.len() < t_star || spec.f2.len() < t_star {
        return Err(Error::Config(format!(
            "GFOM F-rules cover {} iterations, need {}",
            spec.f1.len(),
            t_star
        )));
    }
    if t_star >= 2 && (spec.g1.len() < t_star - 1 || spec.g2.len() < t_star - 1) {
        return Err(Error::Config(format!(
            "GFOM G-rules cover {} iterations, need {}",
            spec.g1.len() + 1,
            t_star
        )));
    }
    let (n, p, r) = (inst.n, inst.p, spec.r);
    let mut multiplies = 0usize;

    let f0 = apply_f_rows(&spec.f1[0], 0, r, &[], &inst.y, &inst.u, n);
    multiplies += 1;
    let mut v_iters =
        vec![inst.x.tr_mul(&f0) + apply_g_rows(&spec.f2[0], 0, r, &[], &inst.v, p)];
    let mut u_iters: Vec<DMatrix<f64>> = Vec::new();

    for t in 1..t_star {
        let g1 = apply_g_rows(&spec.g1[t - 1], t, r, &v_iters, &inst.v, p);
        multiplies += 1;
        let u_t =
            &inst.x * g1 + apply_f_rows(&spec.g2[t - 1], t - 1, r, &u_iters, &inst.y, &inst.u, n);
        u_iters.push(u_t);

        let f1 = apply_f_rows(&spec.f1[t], t, r, &u_iters, &inst.y, &inst.u, n);
        multiplies += 1;
        let v_next =
            inst.x.tr_mul(&f1) + apply_g_rows(&spec.f2[t], t, r, &v_iters, &inst.v, p);
        v_iters.push(v_next);
    }

    let theta_hat = apply_g_rows(&spec.g_star, t_star, r, &v_iters, &inst.v, p);
    Ok(GfomRun {
        v_iters,
        u_iters,
        theta_hat,
        multiplies,
    })
}

/// Run an AMP algorithm for `t_star` iterations: produces `a^1..a^{t_star}`
/// and `b^1..b^{t_star-1}` with the Onsager memory terms, using exactly
/// `2 t_star - 1` matrix multiplications.
pub fn amp_run(
    rules: &UpdateRuleSeq,
    onsager: &OnsagerCoeffs,
    inst: &Instance,
    t_star: usize,
) -> Result<AmpRun> {
    check_t_star(t_star)?;
    if rules.f_rules.len() < t_star {
        return Err(Error::Config(format!(
            "AMP f-rules cover {} iterations, need {}",
            rules.f_rules.len(),
            t_star
        )));
    }
    if t_star >= 2 && rules.g_rules.len() < t_star - 1 {
        return Err(Error::Config(format!(
            "AMP g-rules cover {} iterations, need {}",
            rules.g_rules.len() + 1,
            t_star
        )));
    }
    onsager.check_covers(t_star)?;
    let (n, p, r) = (inst.n, inst.p, rules.r);
    let mut multiplies = 0usize;

    let mut f_cache = vec![apply_f_rows(&rules.f_rules[0], 0, r, &[], &inst.y, &inst.u, n)];
    multiplies += 1;
    let mut a_iters = vec![inst.x.tr_mul(&f_cache[0])];
    let mut b_iters: Vec<DMatrix<f64>> = Vec::new();
    let mut g_cache: Vec<DMatrix<f64>> = Vec::new();

    for t in 1..t_star {
        let g_t = apply_g_rows(&rules.g_rules[t - 1], t, r, &a_iters, &inst.v, p);
        multiplies += 1;
        let mut b_t = &inst.x * &g_t;
        for (s, f_s) in f_cache.iter().enumerate().take(t) {
            b_t -= f_s * onsager.zeta[t - 1][s].transpose();
        }
        g_cache.push(g_t);
        b_iters.push(b_t);

        let f_t = apply_f_rows(&rules.f_rules[t], t, r, &b_iters, &inst.y, &inst.u, n);
        multiplies += 1;
        let mut a_next = inst.x.tr_mul(&f_t);
        for (s, g_s) in g_cache.iter().enumerate().take(t) {
            a_next -= g_s * onsager.xi[t - 1][s].transpose();
        }
        f_cache.push(f_t);
        a_iters.push(a_next);
    }

    Ok(AmpRun {
        a_iters,
        b_iters,
        multiplies,
    })
}

/// Apply a `g`-side estimator (e.g. a Bayes denoiser) to the last iterate
/// history, row-wise.
pub fn apply_estimator(
    rule: &GRule,
    t: usize,
    r: usize,
    a_iters: &[DMatrix<f64>],
    v: &DMatrix<f64>,
) -> DMatrix<f64> {
    apply_g_rows(rule, t, r, a_iters, v, v.nrows())
}

#[cfg(test)]
mod tests {
    use super::instance::InstanceSpec;
    use super::*;
    use crate::channel::linear_gauss;
    use crate::prior::{discretized_gaussian, Prior};

    fn small_instance() -> Instance {
        let prior = Prior::Atoms(discretized_gaussian(11, 1.0).unwrap());
        InstanceSpec::regression(60, 30, prior, linear_gauss(0.5))
            .generate(7)
            .unwrap()
    }

    fn zero_rules(t: usize) -> UpdateRuleSeq {
        UpdateRuleSeq {
            r: 1,
            f_rules: (0..t).map(|_| -> FRule { Box::new(|_, out| out[0] = 0.0) }).collect(),
            g_rules: (1..t).map(|_| -> GRule { Box::new(|_, out| out[0] = 0.0) }).collect(),
            f_derivs: (0..t).map(|_| None).collect(),
            g_derivs: (1..t).map(|_| None).collect(),
            lipschitz_hint: None,
        }
    }

    #[test]
    fn zero_rules_give_zero_iterates() {
        let inst = small_instance();
        let run = amp_run(&zero_rules(3), &OnsagerCoeffs::zeros(1, 3), &inst, 3).unwrap();
        for a in &run.a_iters {
            assert_eq!(a.amax(), 0.0);
        }
        assert_eq!(run.multiplies, 5);
    }

    #[test]
    fn first_amp_iterate_is_xt_f0() {
        let inst = small_instance();
        let mut rules = zero_rules(2);
        rules.f_rules[0] = Box::new(|args, out| out[0] = args.y);
        let run = amp_run(&rules, &OnsagerCoeffs::zeros(1, 2), &inst, 1).unwrap();
        let expect = inst.x.tr_mul(&DMatrix::from_column_slice(inst.n, 1, inst.y.as_slice()));
        assert!((&run.a_iters[0] - expect).amax() < 1e-14);
        assert_eq!(run.multiplies, 1);
    }

    #[test]
    fn gfom_xty_single_multiply() {
        let inst = small_instance();
        let spec = GfomSpec {
            r: 1,
            f1: vec![Box::new(|args: &FArgs, out: &mut [f64]| out[0] = args.y)],
            f2: vec![Box::new(|_: &GArgs, out: &mut [f64]| out[0] = 0.0)],
            g1: vec![],
            g2: vec![],
            g_star: Box::new(|args, out| out[0] = args.hist[(args.t - 1) * args.r]),
        };
        let run = gfom_run(&spec, &inst, 1).unwrap();
        let expect = inst.x.tr_mul(&DMatrix::from_column_slice(inst.n, 1, inst.y.as_slice()));
        assert!((&run.v_iters[0] - &expect).amax() < 1e-14);
        assert!((&run.theta_hat - expect).amax() < 1e-14);
        assert_eq!(run.multiplies, 1);
    }

    #[test]
    fn multiply_count_is_2t_minus_1() {
        let inst = small_instance();
        for t in 1..=4usize {
            let run = amp_run(&zero_rules(t), &OnsagerCoeffs::zeros(1, t), &inst, t).unwrap();
            assert_eq!(run.multiplies, 2 * t - 1);
            assert_eq!(run.a_iters.len(), t);
            assert_eq!(run.b_iters.len(), t - 1);
        }
    }

    #[test]
    fn missing_rules_rejected() {
        let inst = small_instance();
        assert!(amp_run(&zero_rules(2), &OnsagerCoeffs::zeros(1, 2), &inst, 5).is_err());
        assert!(amp_run(&zero_rules(2), &OnsagerCoeffs::zeros(1, 2), &inst, 0).is_err());
        assert!(
            amp_run(&zero_rules(66), &OnsagerCoeffs::zeros(1, 66), &inst, 66).is_err(),
            "iterate cap"
        );
    }
}
