//! One adaptive Metropolis-within-Gibbs chain.
//!
//! Linear predictors, detection logits, and regional totals are cached so
//! each update only evaluates the terms it touches. Spatial effects are kept
//! at exact sum-to-zero per connected component: a single-site move shifts
//! the rest of the component by `−ε/|C|` through a lazy per-component offset,
//! and on the largest component the shift is absorbed into the intercept so
//! only the moved site's mean abundance changes.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, StandardNormal};

use super::config::{Block, SamplerConfig};
use super::layout::ParamLayout;
use super::problem::Problem;
use super::rng::stream_rng;
use super::samples::{ChainDraws, PosteriorSamples, SampleMetadata};
use super::step::{accept, AdaptiveScale, SCALAR_TARGET};
use crate::error::{Error, Result};
use statrs::function::factorial::ln_factorial;
use statrs::function::gamma::ln_gamma;

use crate::model::dist::{
    exponential_ln_pdf, gamma_ln_pdf, laplace_ln_pdf, ln_inv_logit, negbin_ln_pmf, normal_ln_pdf, poisson_ln_pmf,
    sample_negbin,
};
use crate::model::{clamp_log_lambda, posterior_terms, Dims, ParameterState};
use crate::scenarios::CullScenario;
use crate::spatial::{field_cross_products, is_valid_correlation, n_correlations, precision_matrix, spd_log_det};

/// Initialisation attempts before giving up.
pub const INIT_ATTEMPTS: usize = 100;

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a > b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// λ-dependent part of the negative binomial log mass, in terms of `η = ln λ`.
fn nb_kernel(n: u64, eta: f64, theta: f64, ln_theta: f64) -> f64 {
    let nf = n as f64;
    nf * eta - (nf + theta) * ln_add_exp(ln_theta, eta)
}

/// Longest range summed term by term before switching to log-gamma differences.
const SHORT_RANGE: u64 = 16;

/// `ln b! − ln a!`.
fn ln_factorial_diff(a: u64, b: u64) -> f64 {
    match a.cmp(&b) {
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => -ln_factorial_diff(b, a),
        std::cmp::Ordering::Less if b - a <= SHORT_RANGE => ((a + 1)..=b).map(|k| (k as f64).ln()).sum(),
        std::cmp::Ordering::Less => ln_factorial(b) - ln_factorial(a),
    }
}

/// `ln Γ(θ + b) − ln Γ(θ + a)`.
fn ln_rising_diff(theta: f64, a: u64, b: u64) -> f64 {
    match a.cmp(&b) {
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => -ln_rising_diff(theta, b, a),
        std::cmp::Ordering::Less if b - a <= SHORT_RANGE => (a..b).map(|k| (theta + k as f64).ln()).sum(),
        std::cmp::Ordering::Less => ln_gamma(theta + b as f64) - ln_gamma(theta + a as f64),
    }
}

fn laplace_draw<R: Rng + ?Sized>(location: f64, scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn dot_row(m: &DMatrix<f64>, row: usize, coef: &[f64]) -> f64 {
    coef.iter().enumerate().map(|(c, b)| m[(row, c)] * b).sum()
}

/// Draws a starting point from the priors with `Φ = 0` and
/// `N = max(observed, round(λ))`.
///
/// A draw is kept once the joint log posterior is finite and every initial
/// log mean abundance lies within `[−3, ln(1 + M) + 3]`, where `M` is the
/// species' largest visit count or cull-implied site abundance. After
/// [`INIT_ATTEMPTS`] draws the last finite one is used; if none was finite an
/// error reports the terms of the final attempt.
pub fn initial_state<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    scenario: &CullScenario,
    rng: &mut R,
) -> Result<ParameterState> {
    let ds = problem.dataset;
    let pr = problem.priors;
    let dims = Dims::of(ds);
    scenario.check_shape(dims.n_species, dims.n_regions)?;
    let (s, m) = (dims.n_species, dims.n_sites);
    let region_sizes: Vec<usize> = problem.geometry.region_members().iter().map(Vec::len).collect();
    let upper: Vec<f64> = (0..s)
        .map(|i| {
            let mut big = (0..m).map(|j| ds.max_count(i, j)).max().unwrap_or(0) as f64;
            if ds.has_culls() {
                for (k, &size) in region_sizes.iter().enumerate() {
                    let z = ds.cull(i, k).unwrap_or(0) as f64;
                    big = big.max(z / (scenario.kappa[i][k] * size.max(1) as f64));
                }
            }
            (1.0 + big).ln() + 3.0
        })
        .collect();
    let normal = Normal::new(pr.normal_mean, pr.normal_sd).map_err(|e| Error::Config(e.to_string()))?;
    let gamma = Gamma::new(pr.gamma_shape, pr.gamma_scale).map_err(|e| Error::Config(e.to_string()))?;
    let expo = Exp::new(pr.exp_rate).map_err(|e| Error::Config(e.to_string()))?;

    let mut fallback = None;
    let mut last_report = String::new();
    for _ in 0..INIT_ATTEMPTS {
        let mut st = ParameterState::zeros(dims);
        for i in 0..s {
            st.beta0[i] = normal.sample(rng);
            for b in st.beta[i].iter_mut() {
                *b = laplace_draw(pr.laplace_location, pr.laplace_scale, rng);
            }
            st.delta0[i] = normal.sample(rng);
            for d in st.delta[i].iter_mut() {
                *d = normal.sample(rng);
            }
            st.tau[i] = gamma.sample(rng);
            st.theta[i] = expo.sample(rng);
        }
        let n_rho = n_correlations(s);
        loop {
            st.rho = (0..n_rho).map(|_| rng.random_range(-1.0..1.0)).collect();
            if is_valid_correlation(s, &st.rho) {
                break;
            }
        }
        let mut plausible = true;
        for i in 0..s {
            for j in 0..m {
                let eta = st.beta0[i] + dot_row(ds.x(), j, &st.beta[i]);
                plausible &= (-3.0..=upper[i]).contains(&eta);
                let lambda = clamp_log_lambda(eta).exp();
                st.n[i][j] = ds.max_count(i, j).max(lambda.round() as u64);
            }
        }
        let terms = posterior_terms(
            &st,
            ds,
            scenario,
            pr,
            problem.geometry,
            problem.adjacency,
        )?;
        if terms.total().is_finite() {
            if plausible {
                return Ok(st);
            }
            fallback = Some(st);
        } else {
            last_report = format!("{terms:?}");
        }
    }
    match fallback {
        Some(st) => {
            log::warn!("no prior draw gave plausible initial abundances; using the last finite draw");
            Ok(st)
        }
        None => Err(Error::NonFiniteState(format!(
            "no finite initial state after {INIT_ATTEMPTS} prior draws; last attempt: {last_report}"
        ))),
    }
}

struct Scales {
    beta0: Vec<AdaptiveScale>,
    beta: Vec<Vec<AdaptiveScale>>,
    beta_shift: Vec<AdaptiveScale>,
    delta0: Vec<AdaptiveScale>,
    delta: Vec<Vec<AdaptiveScale>>,
    delta_shift: Vec<AdaptiveScale>,
    tau: Vec<AdaptiveScale>,
    theta: Vec<AdaptiveScale>,
    rho: Vec<AdaptiveScale>,
    u: Vec<Vec<AdaptiveScale>>,
    n_width: Vec<Vec<AdaptiveScale>>,
    /// Bookkeeping only; the independence proposal has no scale.
    n_indep: Vec<AdaptiveScale>,
}

impl Scales {
    fn new(dims: Dims, config: &SamplerConfig) -> Self {
        let p = &config.proposal_scales;
        let s = dims.n_species;
        let a = |v: f64| AdaptiveScale::new(v, SCALAR_TARGET);
        Self {
            beta0: vec![a(p.beta0); s],
            beta: vec![vec![a(p.beta); dims.n_x]; s],
            beta_shift: vec![a(p.beta0); s],
            delta0: vec![a(p.delta0); s],
            delta: vec![vec![a(p.delta); dims.n_g]; s],
            delta_shift: vec![a(p.delta0); s],
            tau: vec![a(p.log_tau); s],
            theta: vec![a(p.log_theta); s],
            rho: vec![a(p.atanh_rho); dims.n_rho()],
            u: vec![vec![a(p.u); dims.n_sites]; s],
            n_width: vec![vec![a(config.latent_step_width as f64); dims.n_sites]; s],
            n_indep: vec![a(1.0); s],
        }
    }

    fn groups(&mut self) -> Vec<(&'static str, Vec<&mut AdaptiveScale>)> {
        vec![
            ("beta0", self.beta0.iter_mut().collect()),
            ("beta", self.beta.iter_mut().flatten().collect()),
            ("beta-shift", self.beta_shift.iter_mut().collect()),
            ("delta0", self.delta0.iter_mut().collect()),
            ("delta", self.delta.iter_mut().flatten().collect()),
            ("delta-shift", self.delta_shift.iter_mut().collect()),
            ("log-tau", self.tau.iter_mut().collect()),
            ("log-theta", self.theta.iter_mut().collect()),
            ("atanh-rho", self.rho.iter_mut().collect()),
            ("u-site", self.u.iter_mut().flatten().collect()),
            ("latent-n", self.n_width.iter_mut().flatten().collect()),
            ("latent-n-independence", self.n_indep.iter_mut().collect()),
        ]
    }

    fn end_batch(&mut self) {
        for (_, group) in self.groups() {
            for s in group {
                s.end_batch(true);
            }
        }
        for s in self.n_width.iter_mut().flatten() {
            s.clamp_min(1.0);
        }
    }

    fn reset_totals(&mut self) {
        for (_, group) in self.groups() {
            for s in group {
                s.reset_totals();
            }
        }
    }

    fn acceptance(&mut self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for (name, group) in self.groups() {
            let (a, p) = group.iter().fold((0u64, 0u64), |(a, p), s| {
                let (sa, sp) = s.totals();
                (a + sa, p + sp)
            });
            if p > 0 {
                out.insert(name.to_string(), a as f64 / p as f64);
            }
        }
        out
    }
}

pub(crate) struct Chain<'a> {
    problem: Problem<'a>,
    scenario: &'a CullScenario,
    config: &'a SamplerConfig,
    state: ParameterState,
    dims: Dims,
    xb: Vec<Vec<f64>>,
    gd: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
    ln_theta: Vec<f64>,
    sum_counts: Vec<Vec<u64>>,
    n_visits: Vec<Vec<u64>>,
    max_count: Vec<Vec<u64>>,
    region: Vec<Vec<u64>>,
    sigma: DMatrix<f64>,
    log_det_sigma: f64,
    comp: Vec<usize>,
    comp_members: Vec<Vec<usize>>,
    anchor: usize,
    offset: Vec<Vec<f64>>,
    rank: f64,
    scales: Scales,
    site_order: Vec<usize>,
    eta_buf: Vec<(usize, f64)>,
    rng: ChaCha8Rng,
    #[cfg(test)]
    last_ratio: f64,
    #[cfg(test)]
    last_accepted: bool,
}

impl<'a> Chain<'a> {
    pub(crate) fn new(
        problem: Problem<'a>,
        scenario: &'a CullScenario,
        config: &'a SamplerConfig,
        state: ParameterState,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let ds = problem.dataset;
        state.check_support(ds)?;
        if ds.has_culls() {
            scenario.check_shape(ds.n_species(), ds.n_regions())?;
        }
        let dims = Dims::of(ds);
        let (s, m) = (dims.n_species, dims.n_sites);
        let adj = problem.adjacency;
        let comp_members = adj.components();
        let anchor = (0..comp_members.len())
            .max_by_key(|&c| (comp_members[c].len(), std::cmp::Reverse(c)))
            .unwrap_or(0);
        let grid = |f: &dyn Fn(usize, usize) -> u64| -> Vec<Vec<u64>> {
            (0..s).map(|i| (0..m).map(|j| f(i, j)).collect()).collect()
        };
        let sum_counts = grid(&|i, j| ds.visits(i, j).iter().sum());
        let n_visits = grid(&|i, j| ds.visits(i, j).len() as u64);
        let max_count = grid(&|i, j| ds.max_count(i, j));
        let mut chain = Self {
            problem,
            scenario,
            config,
            dims,
            xb: vec![vec![0.0; m]; s],
            gd: vec![vec![0.0; m]; s],
            eta: vec![vec![0.0; m]; s],
            ln_theta: vec![0.0; s],
            sum_counts,
            n_visits,
            max_count,
            region: Vec::new(),
            sigma: DMatrix::zeros(s, s),
            log_det_sigma: 0.0,
            comp: (0..m).map(|j| adj.component_of(j)).collect(),
            offset: vec![vec![0.0; comp_members.len()]; s],
            rank: (m - comp_members.len()) as f64,
            comp_members,
            anchor,
            scales: Scales::new(dims, config),
            site_order: (0..m).collect(),
            eta_buf: Vec::new(),
            rng,
            state,
            #[cfg(test)]
            last_ratio: f64::NAN,
            #[cfg(test)]
            last_accepted: false,
        };
        chain.refresh()?;
        let lp = chain.log_posterior()?;
        if !lp.is_finite() {
            return Err(Error::NonFiniteState(format!("initial log posterior is {lp}")));
        }
        Ok(chain)
    }

    fn frozen(&self, block: Block) -> bool {
        self.config.is_frozen(block)
    }

    /// Recomputes every cache from the state.
    fn refresh(&mut self) -> Result<()> {
        let ds = self.problem.dataset;
        let st = &self.state;
        for i in 0..self.dims.n_species {
            for j in 0..self.dims.n_sites {
                self.xb[i][j] = dot_row(ds.x(), j, &st.beta[i]);
                self.gd[i][j] = dot_row(ds.g(), j, &st.delta[i]);
                self.eta[i][j] = clamp_log_lambda(st.beta0[i] + self.xb[i][j] + st.u[i][j]);
            }
            self.ln_theta[i] = st.theta[i].ln();
        }
        self.region = crate::model::regional_totals(st, self.problem.geometry);
        self.sigma = st.sigma()?;
        self.log_det_sigma = spd_log_det(&self.sigma)?;
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn state(&self) -> &ParameterState {
        &self.state
    }

    pub(crate) fn log_posterior(&self) -> Result<f64> {
        let p = &self.problem;
        Ok(posterior_terms(&self.state, p.dataset, self.scenario, p.priors, p.geometry, p.adjacency)?.total())
    }

    fn culls_active(&self) -> bool {
        self.problem.dataset.has_culls()
    }

    // ----- shared likelihood pieces -----

    fn latent_delta(&self, i: usize, changes: &[(usize, f64)]) -> f64 {
        let (theta, ln_theta) = (self.state.theta[i], self.ln_theta[i]);
        changes
            .iter()
            .map(|&(j, new)| {
                let n = self.state.n[i][j];
                nb_kernel(n, new, theta, ln_theta) - nb_kernel(n, self.eta[i][j], theta, ln_theta)
            })
            .sum()
    }

    /// Visit-likelihood part that depends on the detection logit.
    fn obs_kernel(&self, i: usize, j: usize, logit: f64) -> f64 {
        let t = self.n_visits[i][j];
        if t == 0 {
            return 0.0;
        }
        self.sum_counts[i][j] as f64 * logit - (t * self.state.n[i][j]) as f64 * softplus(logit)
    }

    fn obs_delta(&self, i: usize, delta0: f64, gd: &[f64]) -> f64 {
        (0..self.dims.n_sites)
            .filter(|&j| self.n_visits[i][j] > 0)
            .map(|j| {
                self.obs_kernel(i, j, delta0 + gd[j]) - self.obs_kernel(i, j, self.state.delta0[i] + self.gd[i][j])
            })
            .sum()
    }

    fn normal_prior(&self, x: f64) -> f64 {
        let p = self.problem.priors;
        normal_ln_pdf(x, p.normal_mean, p.normal_sd)
    }

    fn laplace_prior(&self, x: f64) -> f64 {
        let p = self.problem.priors;
        laplace_ln_pdf(x, p.laplace_location, p.laplace_scale)
    }

    fn gaussian(&mut self, scale: f64) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        scale * z
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        let ok = accept(log_ratio, &mut self.rng);
        #[cfg(test)]
        {
            self.last_ratio = log_ratio;
            self.last_accepted = ok;
        }
        ok
    }

    fn eta_with(&self, i: usize, beta0: f64, xb: &[f64]) -> Vec<f64> {
        (0..self.dims.n_sites)
            .map(|j| clamp_log_lambda(beta0 + xb[j] + self.state.u[i][j]))
            .collect()
    }

    fn try_abundance(&mut self, i: usize, beta0: f64, beta: Vec<f64>, xb: Vec<f64>, prior_delta: f64) -> bool {
        let eta = self.eta_with(i, beta0, &xb);
        let changes: Vec<(usize, f64)> = eta.iter().copied().enumerate().collect();
        let ratio = self.latent_delta(i, &changes) + prior_delta;
        let ok = self.accept(ratio);
        if ok {
            self.state.beta0[i] = beta0;
            self.state.beta[i] = beta;
            self.xb[i] = xb;
            self.eta[i] = eta;
        }
        ok
    }

    // ----- blocks -----

    fn update_beta0(&mut self, i: usize) {
        let old = self.state.beta0[i];
        let new = old + self.gaussian(self.scales.beta0[i].scale());
        let prior = self.normal_prior(new) - self.normal_prior(old);
        let (beta, xb) = (self.state.beta[i].clone(), self.xb[i].clone());
        let ok = self.try_abundance(i, new, beta, xb, prior);
        self.scales.beta0[i].record(ok);
    }

    fn update_beta(&mut self, i: usize, k: usize) {
        let x = self.problem.dataset.x();
        let old = self.state.beta[i][k];
        let step = self.gaussian(self.scales.beta[i][k].scale());
        let mut beta = self.state.beta[i].clone();
        beta[k] = old + step;
        let xb: Vec<f64> = (0..self.dims.n_sites).map(|j| dot_row(x, j, &beta)).collect();
        let prior = self.laplace_prior(beta[k]) - self.laplace_prior(old);
        let ok = self.try_abundance(i, self.state.beta0[i], beta, xb, prior);
        self.scales.beta[i][k].record(ok);
    }

    /// Moves the intercept and all coefficients in opposite directions, along
    /// the ridge that compositional covariates leave nearly flat.
    fn update_beta_shift(&mut self, i: usize) {
        let x = self.problem.dataset.x();
        let step = self.gaussian(self.scales.beta_shift[i].scale());
        let beta0 = self.state.beta0[i] + step;
        let beta: Vec<f64> = self.state.beta[i].iter().map(|b| b - step).collect();
        let xb: Vec<f64> = (0..self.dims.n_sites).map(|j| dot_row(x, j, &beta)).collect();
        let mut prior = self.normal_prior(beta0) - self.normal_prior(self.state.beta0[i]);
        for (new, old) in beta.iter().zip(&self.state.beta[i]) {
            prior += self.laplace_prior(*new) - self.laplace_prior(*old);
        }
        let ok = self.try_abundance(i, beta0, beta, xb, prior);
        self.scales.beta_shift[i].record(ok);
    }

    fn try_detection(&mut self, i: usize, delta0: f64, delta: Vec<f64>, gd: Vec<f64>, prior_delta: f64) -> bool {
        let ratio = self.obs_delta(i, delta0, &gd) + prior_delta;
        let ok = self.accept(ratio);
        if ok {
            self.state.delta0[i] = delta0;
            self.state.delta[i] = delta;
            self.gd[i] = gd;
        }
        ok
    }

    fn update_delta0(&mut self, i: usize) {
        let old = self.state.delta0[i];
        let new = old + self.gaussian(self.scales.delta0[i].scale());
        let prior = self.normal_prior(new) - self.normal_prior(old);
        let (delta, gd) = (self.state.delta[i].clone(), self.gd[i].clone());
        let ok = self.try_detection(i, new, delta, gd, prior);
        self.scales.delta0[i].record(ok);
    }

    fn update_delta(&mut self, i: usize, l: usize) {
        let g = self.problem.dataset.g();
        let old = self.state.delta[i][l];
        let mut delta = self.state.delta[i].clone();
        delta[l] = old + self.gaussian(self.scales.delta[i][l].scale());
        let gd: Vec<f64> = (0..self.dims.n_sites).map(|j| dot_row(g, j, &delta)).collect();
        let prior = self.normal_prior(delta[l]) - self.normal_prior(old);
        let ok = self.try_detection(i, self.state.delta0[i], delta, gd, prior);
        self.scales.delta[i][l].record(ok);
    }

    fn update_delta_shift(&mut self, i: usize) {
        let g = self.problem.dataset.g();
        let step = self.gaussian(self.scales.delta_shift[i].scale());
        let delta0 = self.state.delta0[i] + step;
        let delta: Vec<f64> = self.state.delta[i].iter().map(|d| d - step).collect();
        let gd: Vec<f64> = (0..self.dims.n_sites).map(|j| dot_row(g, j, &delta)).collect();
        let mut prior = self.normal_prior(delta0) - self.normal_prior(self.state.delta0[i]);
        for (new, old) in delta.iter().zip(&self.state.delta[i]) {
            prior += self.normal_prior(*new) - self.normal_prior(*old);
        }
        let ok = self.try_detection(i, delta0, delta, gd, prior);
        self.scales.delta_shift[i].record(ok);
    }

    /// `(m − c)/2 · log det Σ − ½ tr(Σ W)` for a candidate Σ.
    fn micar_sigma_term(&self, sigma: &DMatrix<f64>, log_det: f64, w: &DMatrix<f64>) -> f64 {
        0.5 * self.rank * log_det - 0.5 * sigma.component_mul(w).sum()
    }

    fn try_sigma(&mut self, tau: &[f64], rho: &[f64], w: &DMatrix<f64>, extra: f64) -> bool {
        if !is_valid_correlation(tau.len(), rho) {
            return false;
        }
        let Ok(sigma) = precision_matrix(tau, rho) else {
            return false;
        };
        let Ok(log_det) = spd_log_det(&sigma) else {
            return false;
        };
        let ratio = self.micar_sigma_term(&sigma, log_det, w)
            - self.micar_sigma_term(&self.sigma, self.log_det_sigma, w)
            + extra;
        let ok = self.accept(ratio);
        if ok {
            self.sigma = sigma;
            self.log_det_sigma = log_det;
        }
        ok
    }

    fn update_tau(&mut self, i: usize, w: &DMatrix<f64>) {
        let p = self.problem.priors;
        let old = self.state.tau[i];
        let new = old * self.gaussian(self.scales.tau[i].scale()).exp();
        let extra = gamma_ln_pdf(new, p.gamma_shape, p.gamma_scale) - gamma_ln_pdf(old, p.gamma_shape, p.gamma_scale)
            + new.ln()
            - old.ln();
        let mut tau = self.state.tau.clone();
        tau[i] = new;
        let rho = self.state.rho.clone();
        let ok = new > 0.0 && new.is_finite() && self.try_sigma(&tau, &rho, w, extra);
        if ok {
            self.state.tau = tau;
        }
        self.scales.tau[i].record(ok);
    }

    fn update_rho(&mut self, pair: usize, w: &DMatrix<f64>) {
        let old = self.state.rho[pair];
        let new = (old.atanh() + self.gaussian(self.scales.rho[pair].scale())).tanh();
        let mut ok = false;
        if new.abs() < 1.0 {
            let extra = (1.0 - new * new).ln() - (1.0 - old * old).ln();
            let mut rho = self.state.rho.clone();
            rho[pair] = new;
            let tau = self.state.tau.clone();
            ok = self.try_sigma(&tau, &rho, w, extra);
            if ok {
                self.state.rho = rho;
            }
        }
        self.scales.rho[pair].record(ok);
    }

    fn update_theta(&mut self, i: usize) {
        let rate = self.problem.priors.exp_rate;
        let old = self.state.theta[i];
        let new = old * self.gaussian(self.scales.theta[i].scale()).exp();
        let mut ok = false;
        if new > 0.0 && new.is_finite() {
            let mut ratio = exponential_ln_pdf(new, rate) - exponential_ln_pdf(old, rate) + new.ln() - old.ln();
            for j in 0..self.dims.n_sites {
                let n = self.state.n[i][j];
                let lambda = self.eta[i][j].exp();
                ratio += negbin_ln_pmf(n, lambda, new) - negbin_ln_pmf(n, lambda, old);
            }
            ok = self.accept(ratio);
            if ok {
                self.state.theta[i] = new;
                self.ln_theta[i] = new.ln();
            }
        }
        self.scales.theta[i].record(ok);
    }

    /// Single-site move `u_ij += ε` with the component re-centred.
    fn update_field_site(&mut self, i: usize, j: usize) {
        let c = self.comp[j];
        let size = self.comp_members[c].len();
        if size < 2 {
            return;
        }
        let eps = self.gaussian(self.scales.u[i][j].scale());
        let adj = self.problem.adjacency;
        let deg = adj.degree(j) as f64;
        // (L φ_b)_j on stored values; the lazy offset cancels within a component.
        let s = self.dims.n_species;
        let mut micar = 0.0;
        for b in 0..s {
            let row = &self.state.u[b];
            let lphi = deg * row[j] - adj.neighbors(j).iter().map(|&k| row[k]).sum::<f64>();
            if b == i {
                micar -= 0.5 * self.sigma[(i, i)] * (2.0 * eps * lphi + eps * eps * deg);
            } else {
                micar -= self.sigma[(i, b)] * eps * lphi;
            }
        }
        let shift = eps / size as f64;
        let absorb = c == self.anchor && !self.frozen(Block::Beta0);
        let new_offset = self.offset[i][c] - shift;
        let beta0 = if absorb { self.state.beta0[i] + shift } else { self.state.beta0[i] };
        let mut changes = std::mem::take(&mut self.eta_buf);
        changes.clear();
        let true_u = |chain: &Self, l: usize, off: f64| chain.state.u[i][l] + off;
        if absorb {
            let u_j = true_u(self, j, new_offset) + eps;
            changes.push((j, clamp_log_lambda(beta0 + self.xb[i][j] + u_j)));
            for (other, members) in self.comp_members.iter().enumerate() {
                if other == c {
                    continue;
                }
                for &l in members {
                    let u_l = true_u(self, l, self.offset[i][other]);
                    changes.push((l, clamp_log_lambda(beta0 + self.xb[i][l] + u_l)));
                }
            }
        } else {
            for &l in &self.comp_members[c] {
                let u_l = true_u(self, l, new_offset) + if l == j { eps } else { 0.0 };
                changes.push((l, clamp_log_lambda(beta0 + self.xb[i][l] + u_l)));
            }
        }
        let mut ratio = micar + self.latent_delta(i, &changes);
        if absorb {
            ratio += self.normal_prior(beta0) - self.normal_prior(self.state.beta0[i]);
        }
        let ok = self.accept(ratio);
        if ok {
            self.state.u[i][j] += eps;
            self.offset[i][c] = new_offset;
            self.state.beta0[i] = beta0;
            for &(l, e) in &changes {
                self.eta[i][l] = e;
            }
        }
        self.eta_buf = changes;
        self.scales.u[i][j].record(ok);
    }

    /// Applies lazy offsets and removes floating-point drift from the
    /// per-component means.
    fn settle_field(&mut self) {
        let absorb = !self.frozen(Block::Beta0);
        for i in 0..self.dims.n_species {
            for (c, members) in self.comp_members.iter().enumerate() {
                let off = std::mem::take(&mut self.offset[i][c]);
                if members.len() < 2 {
                    continue;
                }
                let row = &mut self.state.u[i];
                for &l in members {
                    row[l] += off;
                }
                let mean = members.iter().map(|&l| row[l]).sum::<f64>() / members.len() as f64;
                for &l in members {
                    row[l] -= mean;
                }
                if absorb && c == self.anchor {
                    self.state.beta0[i] += mean;
                }
            }
        }
    }

    fn cull_delta(&self, i: usize, j: usize, old: u64, new: u64) -> f64 {
        if !self.culls_active() {
            return 0.0;
        }
        let k = self.problem.geometry.region_of(j);
        let kappa = self.scenario.kappa[i][k];
        let z = self.problem.dataset.cull(i, k).unwrap_or(0);
        let r = self.region[i][k];
        let r_new = r + new - old;
        poisson_ln_pmf(z, r_new as f64 * kappa) - poisson_ln_pmf(z, r as f64 * kappa)
    }

    /// Change in the site's visit log-likelihood when N moves from `old` to `new`.
    fn obs_n_delta(&self, i: usize, j: usize, old: u64, new: u64) -> f64 {
        let visits = self.problem.dataset.visits(i, j);
        if visits.is_empty() {
            return 0.0;
        }
        let logit = self.state.delta0[i] + self.gd[i][j];
        let t = visits.len() as f64;
        let step = new as f64 - old as f64;
        t * ln_factorial_diff(old, new) - visits.iter().map(|&n| ln_factorial_diff(old - n, new - n)).sum::<f64>()
            + t * step * ln_inv_logit(-logit)
    }

    /// Change in `log NegBin(N; λ, θ)` when N moves from `old` to `new`.
    fn latent_n_delta(&self, i: usize, j: usize, old: u64, new: u64) -> f64 {
        let theta = self.state.theta[i];
        let eta = self.eta[i][j];
        let step = new as f64 - old as f64;
        ln_rising_diff(theta, old, new) - ln_factorial_diff(old, new)
            + step * (eta - ln_add_exp(self.ln_theta[i], eta))
    }

    fn set_n(&mut self, i: usize, j: usize, new: u64) {
        let old = self.state.n[i][j];
        let k = self.problem.geometry.region_of(j);
        self.region[i][k] = self.region[i][k] + new - old;
        self.state.n[i][j] = new;
    }

    fn update_n_walk(&mut self, i: usize, j: usize) {
        let w = self.scales.n_width[i][j].scale().round().max(1.0) as u64;
        let step = self.rng.random_range(1..=w);
        let up = self.rng.random::<bool>();
        let old = self.state.n[i][j];
        let ok = match if up { old.checked_add(step) } else { old.checked_sub(step) } {
            Some(new) if new >= self.max_count[i][j] => {
                let ratio = self.latent_n_delta(i, j, old, new)
                    + self.obs_n_delta(i, j, old, new)
                    + self.cull_delta(i, j, old, new);
                let ok = self.accept(ratio);
                if ok {
                    self.set_n(i, j, new);
                }
                ok
            }
            _ => false,
        };
        self.scales.n_width[i][j].record(ok);
    }

    /// Independence proposal from the latent negative binomial itself, so
    /// only the data terms enter the ratio.
    fn update_n_independent(&mut self, i: usize, j: usize) {
        let new = sample_negbin(self.eta[i][j].exp(), self.state.theta[i], &mut self.rng);
        let old = self.state.n[i][j];
        let mut ok = false;
        if new >= self.max_count[i][j] && new != old {
            let ratio = self.obs_n_delta(i, j, old, new) + self.cull_delta(i, j, old, new);
            ok = self.accept(ratio);
            if ok {
                self.set_n(i, j, new);
            }
        } else if new == old {
            ok = true;
        }
        self.scales.n_indep[i].record(ok);
    }

    pub(crate) fn sweep(&mut self) -> Result<()> {
        let s = self.dims.n_species;
        let m = self.dims.n_sites;
        if !self.frozen(Block::Field) {
            for i in 0..s {
                for j in 0..m {
                    self.update_field_site(i, j);
                }
            }
            self.settle_field();
            self.refresh()?;
        }
        for i in 0..s {
            if !self.frozen(Block::Beta0) {
                self.update_beta0(i);
            }
            if !self.frozen(Block::Beta) {
                for k in 0..self.dims.n_x {
                    self.update_beta(i, k);
                }
                if self.dims.n_x > 0 && !self.frozen(Block::Beta0) {
                    self.update_beta_shift(i);
                }
            }
        }
        for i in 0..s {
            if !self.frozen(Block::Delta0) {
                self.update_delta0(i);
            }
            if !self.frozen(Block::Delta) {
                for l in 0..self.dims.n_g {
                    self.update_delta(i, l);
                }
                if self.dims.n_g > 0 && !self.frozen(Block::Delta0) {
                    self.update_delta_shift(i);
                }
            }
        }
        let need_w = !self.frozen(Block::LogTau) || (!self.frozen(Block::AtanhRho) && s > 1);
        let w = if need_w {
            field_cross_products(&self.state.u, self.problem.adjacency)
        } else {
            DMatrix::zeros(s, s)
        };
        if !self.frozen(Block::LogTau) {
            for i in 0..s {
                self.update_tau(i, &w);
            }
        }
        if !self.frozen(Block::LogTheta) {
            for i in 0..s {
                self.update_theta(i);
            }
        }
        if !self.frozen(Block::AtanhRho) {
            for p in 0..self.state.rho.len() {
                self.update_rho(p, &w);
            }
        }
        if !self.frozen(Block::Latent) {
            let mut order = std::mem::take(&mut self.site_order);
            order.shuffle(&mut self.rng);
            for &j in &order {
                for i in 0..s {
                    self.update_n_walk(i, j);
                    self.update_n_independent(i, j);
                }
            }
            self.site_order = order;
        }
        for (i, row) in self.eta.iter().enumerate() {
            if row.iter().any(|e| !e.is_finite()) || !self.state.beta0[i].is_finite() {
                return Err(Error::NonFiniteState(format!("species {i} linear predictor")));
            }
        }
        Ok(())
    }

    fn record_row(&self, layout: &ParamLayout, out: &mut Vec<f64>) -> Result<()> {
        let st = &self.state;
        let start = out.len();
        out.extend(&st.beta0);
        out.extend(st.beta.iter().flatten());
        out.extend(&st.delta0);
        out.extend(st.delta.iter().flatten());
        out.extend(&st.tau);
        out.extend(&st.theta);
        out.extend(&st.rho);
        out.extend(st.correlations()?);
        out.extend(st.n.iter().map(|row| row.iter().sum::<u64>() as f64));
        out.extend(self.region.iter().flatten().map(|&r| r as f64));
        if layout.store_fields {
            out.extend(st.u.iter().flatten());
            out.extend(st.n.iter().flatten().map(|&n| n as f64));
        }
        debug_assert_eq!(out.len() - start, layout.len());
        Ok(())
    }

    /// Runs every sweep, adapting during burn-in and storing thinned draws after.
    pub(crate) fn run(mut self, chain_id: usize, layout: &ParamLayout) -> Result<ChainDraws> {
        let cfg = self.config;
        let mut values = Vec::with_capacity(cfg.retained_per_chain() * layout.len());
        let mut iterations = Vec::with_capacity(cfg.retained_per_chain());
        for t in 1..=cfg.n_iterations {
            self.sweep()?;
            if t <= cfg.n_burnin {
                if cfg.adapt && t % cfg.adapt_window == 0 {
                    self.scales.end_batch();
                }
                if t == cfg.n_burnin {
                    self.scales.reset_totals();
                }
            } else if (t - cfg.n_burnin) % cfg.thin == 0 {
                self.record_row(layout, &mut values)?;
                iterations.push(t);
            }
        }
        Ok(ChainDraws {
            chain: chain_id,
            scenario: self.scenario.id,
            iterations,
            values,
            acceptance: self.scales.acceptance(),
        })
    }
}

/// Runs one chain from a prior draw. The random stream is determined by
/// `(config.seed, scenario.id, chain_id)`.
pub fn run_chain(
    problem: &Problem<'_>,
    scenario: &CullScenario,
    config: &SamplerConfig,
    chain_id: usize,
) -> Result<PosteriorSamples> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, scenario.id as u64, chain_id as u64);
    let init = initial_state(problem, scenario, &mut rng)?;
    run_from(problem, scenario, config, chain_id, init, rng)
}

/// Runs one chain from a given starting state; frozen blocks stay at their
/// starting values.
pub fn run_chain_from(
    problem: &Problem<'_>,
    scenario: &CullScenario,
    config: &SamplerConfig,
    chain_id: usize,
    init: ParameterState,
) -> Result<PosteriorSamples> {
    config.validate()?;
    scenario.check_shape(problem.dataset.n_species(), problem.dataset.n_regions())?;
    let rng = stream_rng(config.seed, scenario.id as u64, chain_id as u64);
    run_from(problem, scenario, config, chain_id, init, rng)
}

fn run_from(
    problem: &Problem<'_>,
    scenario: &CullScenario,
    config: &SamplerConfig,
    chain_id: usize,
    init: ParameterState,
    rng: ChaCha8Rng,
) -> Result<PosteriorSamples> {
    let layout = ParamLayout::new(Dims::of(problem.dataset), config.store_fields);
    let chain = Chain::new(*problem, scenario, config, init, rng)?;
    let draws = chain.run(chain_id, &layout)?;
    Ok(PosteriorSamples {
        layout,
        chains: vec![draws],
        metadata: SampleMetadata {
            config: config.clone(),
            scenarios: vec![scenario.id],
            seed: config.seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CullRecord, Observation, PriorConfig, SpeciesDataset};
    use crate::spatial::{build_adjacency, Adjacency, GridGeometry, NeighborRule};
    use rand::SeedableRng;

    pub(crate) struct Fixture {
        pub geometry: GridGeometry,
        pub adjacency: Adjacency,
        pub dataset: SpeciesDataset,
        pub priors: PriorConfig,
        pub scenario: CullScenario,
    }

    impl Fixture {
        fn problem(&self) -> Problem<'_> {
            Problem::new(&self.geometry, &self.adjacency, &self.dataset, &self.priors).unwrap()
        }
    }

    fn fixture(with_culls: bool) -> Fixture {
        let geometry = GridGeometry::lattice_strips(4, 3, 2).unwrap();
        let adjacency = build_adjacency(&geometry, &NeighborRule::Rook).unwrap();
        let m = geometry.n_sites();
        let s = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut obs = Vec::new();
        for i in 0..s {
            for j in 0..m {
                for t in 0..2 {
                    obs.push(Observation {
                        species: i,
                        site: j,
                        visit: t,
                        count: rng.random_range(0..6),
                    });
                }
            }
        }
        let culls = if with_culls {
            (0..s)
                .flat_map(|i| (0..2).map(move |k| CullRecord { species: i, region: k, count: 3 + i as u64 }))
                .collect()
        } else {
            Vec::new()
        };
        let x = DMatrix::from_fn(m, 2, |j, c| if c == 0 { 0.2 + 0.05 * j as f64 } else { 0.8 - 0.05 * j as f64 });
        let g = DMatrix::from_element(m, 1, 1.0);
        let dataset = SpeciesDataset::new(s, &geometry, obs, culls, x, g).unwrap();
        Fixture {
            geometry,
            adjacency,
            dataset,
            priors: PriorConfig::default(),
            scenario: CullScenario::constant(0, s, 2, 0.2).unwrap(),
        }
    }

    fn short_config() -> SamplerConfig {
        SamplerConfig {
            n_iterations: 60,
            n_burnin: 20,
            thin: 2,
            n_chains: 1,
            adapt_window: 10,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn caches_track_full_recomputation() {
        let f = fixture(true);
        let p = f.problem();
        let cfg = short_config();
        let mut rng = stream_rng(3, 0, 0);
        let init = initial_state(&p, &f.scenario, &mut rng).unwrap();
        let mut chain = Chain::new(p, &f.scenario, &cfg, init, rng).unwrap();
        for _ in 0..30 {
            chain.sweep().unwrap();
            let st = chain.state().clone();
            let lp = chain.log_posterior().unwrap();
            assert!(lp.is_finite());
            for i in 0..2 {
                for j in 0..12 {
                    let fresh = crate::model::log_mean_abundance(&st, &f.dataset, i, j);
                    assert!((fresh - chain.eta[i][j]).abs() < 1e-9);
                }
                let sum: f64 = st.u[i].iter().sum();
                assert!(sum.abs() < 1e-9, "field sum {sum}");
            }
            assert_eq!(chain.region, crate::model::regional_totals(&st, &f.geometry));
            st.check_support(&f.dataset).unwrap();
        }
    }

    #[test]
    fn local_ratios_match_joint_differences() {
        let f = fixture(true);
        let p = f.problem();
        let cfg = short_config();
        let mut rng = stream_rng(9, 0, 0);
        let init = initial_state(&p, &f.scenario, &mut rng).unwrap();
        let mut chain = Chain::new(p, &f.scenario, &cfg, init, rng).unwrap();
        // Warm up so the state is in a typical region.
        for _ in 0..30 {
            chain.sweep().unwrap();
        }
        type Move = fn(&mut Chain<'_>);
        let moves: Vec<(&str, Move)> = vec![
            ("beta0", |c| c.update_beta0(1)),
            ("beta", |c| c.update_beta(0, 1)),
            ("beta-shift", |c| c.update_beta_shift(0)),
            ("delta0", |c| c.update_delta0(1)),
            ("delta", |c| c.update_delta(0, 0)),
            ("delta-shift", |c| c.update_delta_shift(1)),
            ("theta", |c| c.update_theta(0)),
            ("u", |c| c.update_field_site(1, 5)),
            ("n-walk", |c| c.update_n_walk(0, 3)),
            ("n-indep", |c| c.update_n_independent(1, 7)),
        ];
        let mut checked = vec![0usize; moves.len()];
        for round in 0..3000 {
            let idx = round % moves.len();
            let (name, mv) = &moves[idx];
            chain.settle_field();
            chain.refresh().unwrap();
            let before = chain.log_posterior().unwrap();
            let old = chain.state().clone();
            chain.last_accepted = false;
            mv(&mut chain);
            if !chain.last_accepted {
                continue;
            }
            chain.settle_field();
            chain.refresh().unwrap();
            let new = chain.state();
            let after = chain.log_posterior().unwrap();
            let correction = match *name {
                "theta" => new.theta[0].ln() - old.theta[0].ln(),
                "n-indep" => {
                    let lambda = chain.eta[1][7].exp();
                    negbin_ln_pmf(new.n[1][7], lambda, new.theta[1]) - negbin_ln_pmf(old.n[1][7], lambda, old.theta[1])
                }
                _ => 0.0,
            };
            let expected = chain.last_ratio - if *name == "theta" { correction } else { -correction };
            assert!(
                (after - before - expected).abs() < 1e-7,
                "{name}: joint moved {} but local ratio said {expected}",
                after - before
            );
            checked[idx] += 1;
        }
        assert!(checked.iter().all(|&c| c > 0), "{checked:?}");
    }

    #[test]
    fn sigma_ratios_match_joint_differences() {
        let f = fixture(false);
        let p = f.problem();
        let cfg = short_config();
        let mut rng = stream_rng(4, 0, 0);
        let init = initial_state(&p, &f.scenario, &mut rng).unwrap();
        let mut chain = Chain::new(p, &f.scenario, &cfg, init, rng).unwrap();
        for _ in 0..20 {
            chain.sweep().unwrap();
        }
        let mut checked = 0;
        for round in 0..400 {
            let w = field_cross_products(&chain.state.u, f.problem().adjacency);
            let before = chain.log_posterior().unwrap();
            let old = chain.state().clone();
            chain.last_accepted = false;
            let jac = if round % 2 == 0 {
                chain.update_tau(round % 4 / 2, &w);
                chain.state.tau.iter().zip(&old.tau).map(|(a, b)| a.ln() - b.ln()).sum::<f64>()
            } else {
                chain.update_rho(0, &w);
                (1.0 - chain.state.rho[0].powi(2)).ln() - (1.0 - old.rho[0].powi(2)).ln()
            };
            if !chain.last_accepted {
                continue;
            }
            let after = chain.log_posterior().unwrap();
            assert!((after - before - (chain.last_ratio - jac)).abs() < 1e-8);
            checked += 1;
        }
        assert!(checked > 20);
    }

    #[test]
    fn same_seed_same_draws() {
        let f = fixture(true);
        let p = f.problem();
        let cfg = short_config();
        let a = run_chain(&p, &f.scenario, &cfg, 0).unwrap();
        let b = run_chain(&p, &f.scenario, &cfg, 0).unwrap();
        let c = run_chain(&p, &f.scenario, &cfg, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.chains[0].values, c.chains[0].values);
        assert_eq!(a.chains[0].n_draws(), cfg.retained_per_chain());
        a.verify_derived(f.geometry.site_region()).unwrap();
    }

    #[test]
    fn retained_draws_respect_support() {
        let f = fixture(false);
        let p = f.problem();
        let cfg = short_config();
        let samples = run_chain(&p, &f.scenario, &cfg, 0).unwrap();
        let l = &samples.layout;
        for d in 0..samples.chains[0].n_draws() {
            let row = samples.chains[0].row(d, l.len());
            for i in 0..2 {
                assert!(row[l.tau(i)] > 0.0 && row[l.theta(i)] > 0.0);
                for j in 0..12 {
                    assert!(row[l.n(i, j).unwrap()] >= f.dataset.max_count(i, j) as f64);
                }
            }
            assert!(row[l.rho(0)].abs() < 1.0);
        }
    }

    #[test]
    fn frozen_blocks_do_not_move() {
        let f = fixture(true);
        let p = f.problem();
        let cfg = SamplerConfig {
            frozen: Block::ALL.iter().copied().filter(|b| *b != Block::Latent).collect(),
            ..short_config()
        };
        let mut rng = stream_rng(1, 0, 0);
        let init = initial_state(&p, &f.scenario, &mut rng).unwrap();
        let mut chain = Chain::new(p, &f.scenario, &cfg, init.clone(), rng).unwrap();
        for _ in 0..20 {
            chain.sweep().unwrap();
        }
        let st = chain.state();
        assert_eq!(st.beta0, init.beta0);
        assert_eq!(st.u, init.u);
        assert_eq!(st.tau, init.tau);
        assert_ne!(st.n, init.n);
    }
}
