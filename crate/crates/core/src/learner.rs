// SPDX-License-Identifier: Apache-2.0

//! Online recovery of the combination matrix and the expected log-likelihood
//! ratios from the log-belief stream alone.
//!
//! The learner keeps the last `M + 1` log-belief matrices. With `Δ_{i−1}` the
//! newest of them minus the mean of the `M` before it, every new `Λ_i` drives
//!
//! ```text
//! A_i = A_{i−1} + μ(1−δ) Δ_{i−1} (Λ_iᵀ − (1−δ) Λ_{i−1}ᵀ A_{i−1} − δ L̂_{i−1}ᵀ)
//! L̂_i = (1/(δM)) Σ_{j=i−M+1}^{i} (Λ_j − (1−δ) A_iᵀ Λ_{j−1})
//! ```
//!
//! in that order. No projection is applied to `A_i`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact recomputation period of the running window sums.
const RESYNC_PERIOD: usize = 10_000;

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GslConfig {
    pub mu: f64,
    pub delta: f64,
    #[serde(rename = "M")]
    pub window: usize,
    #[serde(rename = "W", default = "default_one")]
    pub batch: usize,
    #[serde(default)]
    pub l1_weight: f64,
    /// Leading stream entries ignored entirely.
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default)]
    pub known_llr: bool,
}

impl GslConfig {
    pub fn new(mu: f64, delta: f64, window: usize) -> Self {
        Self {
            mu,
            delta,
            window,
            batch: 1,
            l1_weight: 0.0,
            burn_in: 0,
            known_llr: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "δ = {} not in (0, 1)",
                self.delta
            )));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "μ = {} must be nonnegative",
                self.mu
            )));
        }
        if self.window == 0 || self.batch == 0 {
            return Err(Error::InvalidParameter(
                "window M and batch W must be at least 1".into(),
            ));
        }
        if !(self.l1_weight >= 0.0) {
            return Err(Error::InvalidParameter(
                "l1 weight must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// `Δ = Λ_last − (1/M) Σ Λ_earlier` over a window of `M + 1` matrices.
pub fn delta_matrix(window: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    if window.len() < 2 {
        return Err(Error::InsufficientWindow {
            have: window.len(),
            need: 2,
        });
    }
    let m = window.len() - 1;
    let mut mean = window[0].clone();
    for w in &window[1..m] {
        mean += w;
    }
    Ok(&window[m] - mean / m as f64)
}

/// `(1/(δM)) Σ_j (Λ_j − (1−δ) Aᵀ Λ_{j−1})` over the `M` consecutive pairs of the window.
pub fn llr_estimate(window: &[DMatrix<f64>], a: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
    if window.len() < 2 {
        return Err(Error::InsufficientWindow {
            have: window.len(),
            need: 2,
        });
    }
    let m = window.len() - 1;
    let mut acc = DMatrix::zeros(window[0].nrows(), window[0].ncols());
    for pair in window.windows(2) {
        acc += &pair[1] - a.tr_mul(&pair[0]) * (1.0 - delta);
    }
    Ok(acc / (delta * m as f64))
}

/// Gradient with respect to `A` of `½‖Λ_i − (1−δ)AᵀΛ_{i−1} − δL̂_{i−1}‖²_F` taken
/// along the centered regressor `Δ_{i−1}`:
/// `−(1−δ) Δ_{i−1} (Λ_iᵀ − (1−δ) Λ_{i−1}ᵀ A − δ L̂_{i−1}ᵀ)`.
///
/// When `L̂_{i−1}` is the window estimate at the same `A`, this is the exact
/// gradient of `½‖Δ_i − (1−δ)AᵀΔ_{i−1}‖²_F`.
pub fn analytic_gradient(
    lambda: &DMatrix<f64>,
    lambda_prev: &DMatrix<f64>,
    delta_prev: &DMatrix<f64>,
    llr: &DMatrix<f64>,
    a: &DMatrix<f64>,
    delta: f64,
) -> DMatrix<f64> {
    let residual_t =
        lambda.transpose() - lambda_prev.tr_mul(a) * (1.0 - delta) - llr.transpose() * delta;
    -(delta_prev * residual_t) * (1.0 - delta)
}

/// Instantaneous cost `½‖Δ_i − (1−δ)AᵀΔ_{i−1}‖²_F`.
pub fn risk_cost(
    delta_i: &DMatrix<f64>,
    delta_prev: &DMatrix<f64>,
    a: &DMatrix<f64>,
    delta: f64,
) -> f64 {
    0.5 * (delta_i - a.tr_mul(delta_prev) * (1.0 - delta)).norm_squared()
}

/// Gradient of [`risk_cost`]: `−(1−δ) Δ_{i−1}(Δ_iᵀ − (1−δ)Δ_{i−1}ᵀA)`.
pub fn risk_gradient(
    delta_i: &DMatrix<f64>,
    delta_prev: &DMatrix<f64>,
    a: &DMatrix<f64>,
    delta: f64,
) -> DMatrix<f64> {
    let residual_t = delta_i.transpose() - delta_prev.tr_mul(a) * (1.0 - delta);
    -(delta_prev * residual_t) * (1.0 - delta)
}

/// `(1/(1−δ)) (E Δ_{i−1}Δ_{i−1}ᵀ)⁻¹ E Δ_{i−1}Δ_iᵀ`.
pub fn closed_form_minimizer(
    cov: &DMatrix<f64>,
    cross: &DMatrix<f64>,
    delta: f64,
) -> Result<DMatrix<f64>> {
    if cov.nrows() != cross.nrows() || !cov.is_square() {
        return Err(Error::DimensionMismatch(
            "moment matrices disagree in shape".into(),
        ));
    }
    let sol = cov
        .clone()
        .lu()
        .solve(cross)
        .ok_or(Error::SingularMoments)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularMoments);
    }
    Ok(sol / (1.0 - delta))
}

/// `‖A − B‖²_F`.
pub fn reconstruction_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok((a - b).norm_squared())
}

/// Ring buffer of the last `M + 1` log-belief matrices with running sums of
/// its first `M` (`head`) and last `M` (`tail`) entries.
#[derive(Debug, Clone)]
pub struct LogWindow {
    m: usize,
    mats: VecDeque<DMatrix<f64>>,
    head: DMatrix<f64>,
    tail: DMatrix<f64>,
    since_resync: usize,
}

impl LogWindow {
    pub fn new(m: usize, rows: usize, cols: usize) -> Self {
        Self {
            m,
            mats: VecDeque::with_capacity(m + 2),
            head: DMatrix::zeros(rows, cols),
            tail: DMatrix::zeros(rows, cols),
            since_resync: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.mats.len() == self.m + 1
    }

    pub fn newest(&self) -> Option<&DMatrix<f64>> {
        self.mats.back()
    }

    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        self.mats.iter().cloned().collect()
    }

    pub fn push(&mut self, lambda: DMatrix<f64>) {
        let was_full = self.is_full();
        self.mats.push_back(lambda);
        self.since_resync += 1;
        if !was_full || self.since_resync >= RESYNC_PERIOD {
            if self.mats.len() > self.m + 1 {
                self.mats.pop_front();
            }
            self.resync();
            return;
        }
        self.mats.pop_front();
        // new head = old tail; new tail drops the new front and gains the newcomer
        self.head.copy_from(&self.tail);
        self.tail += &self.mats[self.m];
        self.tail -= &self.mats[0];
    }

    /// Recomputes both running sums from the stored matrices.
    pub fn resync(&mut self) {
        self.since_resync = 0;
        self.head.fill(0.0);
        self.tail.fill(0.0);
        for (j, mat) in self.mats.iter().enumerate() {
            if j < self.m {
                self.head += mat;
            }
            if j > 0 {
                self.tail += mat;
            }
        }
    }

    /// `Δ` of the window; requires a full window.
    pub fn delta(&self) -> Result<DMatrix<f64>> {
        self.check_full()?;
        Ok(self.mats[self.m].clone() - &self.head / self.m as f64)
    }

    /// `L̂(A)` of the window; requires a full window.
    pub fn llr_estimate(&self, a: &DMatrix<f64>, delta: f64) -> Result<DMatrix<f64>> {
        let mut out = self.tail.clone();
        self.llr_estimate_into(a, delta, &mut out)?;
        Ok(out)
    }

    /// [`LogWindow::llr_estimate`] written into `out`.
    pub fn llr_estimate_into(
        &self,
        a: &DMatrix<f64>,
        delta: f64,
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        self.check_full()?;
        out.copy_from(&self.tail);
        out.gemm_tr(-(1.0 - delta), a, &self.head, 1.0);
        *out /= delta * self.m as f64;
        Ok(())
    }

    fn check_full(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(Error::InsufficientWindow {
                have: self.mats.len(),
                need: self.m + 1,
            })
        }
    }
}

/// Current estimates and the log-belief window.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub a: DMatrix<f64>,
    pub llr: DMatrix<f64>,
    pub window: LogWindow,
    /// Number of stream entries consumed after burn-in.
    pub iteration: usize,
}

impl LearnerState {
    /// `A₀ = 11ᵀ/N`, `L̂₀ = 0`.
    pub fn new(n_agents: usize, n_cols: usize, window: usize) -> Self {
        Self {
            a: DMatrix::from_element(n_agents, n_agents, 1.0 / n_agents as f64),
            llr: DMatrix::zeros(n_agents, n_cols),
            window: LogWindow::new(window, n_agents, n_cols),
            iteration: 0,
        }
    }

    /// Gradient term of the incoming `Λ_i` at the current estimates. A
    /// supplied `llr` replaces `L̂_{i−1}` and switches to the known-likelihood
    /// cost, whose regressor is `Λ_{i−1}`.
    pub fn gradient_term(
        &self,
        lambda: &DMatrix<f64>,
        delta: f64,
        llr: Option<&DMatrix<f64>>,
    ) -> Result<DMatrix<f64>> {
        let d = self.window.delta()?;
        let prev = self.window.newest().expect("full window");
        Ok(match llr {
            Some(l) => analytic_gradient(lambda, prev, prev, l, &self.a, delta),
            None => analytic_gradient(lambda, prev, &d, &self.llr, &self.a, delta),
        })
    }
}

/// `A += μ(1−δ) D (Λ_iᵀ − (1−δ)Λ_{i−1}ᵀA − δLᵀ)` in place, with `D` the regressor.
fn descend(
    a: &mut DMatrix<f64>,
    regressor: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    prev: &DMatrix<f64>,
    llr: &DMatrix<f64>,
    mu: f64,
    delta: f64,
) {
    let mut residual_t = lambda.transpose();
    residual_t.gemm_tr(-(1.0 - delta), prev, a, 1.0);
    for k in 0..llr.nrows() {
        for c in 0..llr.ncols() {
            residual_t[(c, k)] -= delta * llr[(k, c)];
        }
    }
    a.gemm(mu * (1.0 - delta), regressor, &residual_t, 1.0);
}

/// One SGD update followed by the window advance and the `L̂` refresh at the new `A`.
pub fn sgd_step(state: &mut LearnerState, lambda: &DMatrix<f64>, config: &GslConfig) -> Result<()> {
    let d = state.window.delta()?;
    let prev = state.window.newest().expect("full window");
    descend(
        &mut state.a,
        &d,
        lambda,
        prev,
        &state.llr,
        config.mu,
        config.delta,
    );
    state.window.push(lambda.clone());
    state
        .window
        .llr_estimate_into(&state.a, config.delta, &mut state.llr)?;
    state.iteration += 1;
    Ok(())
}

/// SGD on `½‖Λ_i − (1−δ)AᵀΛ_{i−1} − δL̄‖²_F` with the true `L̄`; its exact
/// gradient uses `Λ_{i−1}` itself as the regressor. `L̂` is left untouched.
pub fn sgd_step_known_llr(
    state: &mut LearnerState,
    lambda: &DMatrix<f64>,
    llr_true: &DMatrix<f64>,
    config: &GslConfig,
) -> Result<()> {
    state.window.delta()?;
    let prev = state.window.newest().expect("full window");
    descend(
        &mut state.a,
        prev,
        lambda,
        prev,
        llr_true,
        config.mu,
        config.delta,
    );
    state.window.push(lambda.clone());
    state.iteration += 1;
    Ok(())
}

/// Entrywise `sign(x) max(|x| − t, 0)`.
pub fn soft_threshold(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    m.map(|x| x.signum() * (x.abs() - t).max(0.0))
}

/// Averaged step over a batch of gradient terms, proximal ℓ1 shrinkage by
/// `μα`, then the `L̂` refresh (skipped in known-likelihood mode).
pub fn minibatch_prox_step(
    state: &mut LearnerState,
    batch: &[DMatrix<f64>],
    config: &GslConfig,
) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("empty gradient batch".into()));
    }
    let mut mean = batch[0].clone();
    for g in &batch[1..] {
        mean += g;
    }
    mean /= batch.len() as f64;
    state.a -= mean * config.mu;
    if config.l1_weight > 0.0 {
        state.a = soft_threshold(&state.a, config.mu * config.l1_weight);
    }
    if !config.known_llr && state.window.is_full() {
        state.llr = state.window.llr_estimate(&state.a, config.delta)?;
    }
    Ok(())
}

/// Streaming driver that dispatches each incoming `Λ` to the right update.
#[derive(Debug, Clone)]
pub struct Learner {
    config: GslConfig,
    state: LearnerState,
    llr_true: Option<DMatrix<f64>>,
    batch: Vec<DMatrix<f64>>,
    seen: usize,
}

impl Learner {
    pub fn new(config: GslConfig, n_agents: usize, n_cols: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state: LearnerState::new(n_agents, n_cols, config.window),
            config,
            llr_true: None,
            batch: Vec::new(),
            seen: 0,
        })
    }

    /// Supplies (or replaces) the true `L̄` consumed when `known_llr` is set.
    pub fn set_known_llr(&mut self, llr: DMatrix<f64>) {
        self.llr_true = Some(llr);
    }

    pub fn config(&self) -> &GslConfig {
        &self.config
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.state.a
    }

    /// Current `L̂`, or the supplied `L̄` in known-likelihood mode.
    pub fn llr(&self) -> &DMatrix<f64> {
        match (&self.llr_true, self.config.known_llr) {
            (Some(l), true) => l,
            _ => &self.state.llr,
        }
    }

    /// Number of parameter updates applied or pending in a batch.
    pub fn updates(&self) -> usize {
        self.state.iteration
    }

    pub fn observe(&mut self, lambda: &DMatrix<f64>) -> Result<()> {
        self.seen += 1;
        if self.seen <= self.config.burn_in {
            return Ok(());
        }
        if lambda.shape() != self.state.llr.shape() {
            return Err(Error::DimensionMismatch(format!(
                "log-belief matrix is {:?}, learner expects {:?}",
                lambda.shape(),
                self.state.llr.shape()
            )));
        }
        if !self.state.window.is_full() {
            self.state.window.push(lambda.clone());
            return Ok(());
        }
        let known = if self.config.known_llr {
            Some(self.llr_true.as_ref().ok_or_else(|| {
                Error::InvalidParameter(
                    "known_llr set but no expected log-likelihood matrix supplied".into(),
                )
            })?)
        } else {
            None
        };
        let plain = self.config.batch == 1 && self.config.l1_weight == 0.0;
        match (plain, known) {
            (true, None) => sgd_step(&mut self.state, lambda, &self.config),
            (true, Some(l)) => sgd_step_known_llr(&mut self.state, lambda, l, &self.config),
            (false, known) => {
                let g = self.state.gradient_term(lambda, self.config.delta, known)?;
                self.batch.push(g);
                self.state.window.push(lambda.clone());
                self.state.iteration += 1;
                if self.batch.len() == self.config.batch {
                    let batch = std::mem::take(&mut self.batch);
                    minibatch_prox_step(&mut self.state, &batch, &self.config)
                } else if known.is_none() {
                    self.state.llr = self
                        .state
                        .window
                        .llr_estimate(&self.state.a, self.config.delta)?;
                    Ok(())
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Sample moments `E Δ_{i−1}Δ_{i−1}ᵀ` and `E Δ_{i−1}Δ_iᵀ` accumulated from a stream.
#[derive(Debug, Clone)]
pub struct DeltaMoments {
    window: LogWindow,
    prev_delta: Option<DMatrix<f64>>,
    cov: DMatrix<f64>,
    cross: DMatrix<f64>,
    count: usize,
}

impl DeltaMoments {
    pub fn new(m: usize, n_agents: usize, n_cols: usize) -> Self {
        Self {
            window: LogWindow::new(m, n_agents, n_cols),
            prev_delta: None,
            cov: DMatrix::zeros(n_agents, n_agents),
            cross: DMatrix::zeros(n_agents, n_agents),
            count: 0,
        }
    }

    pub fn push(&mut self, lambda: &DMatrix<f64>) {
        self.window.push(lambda.clone());
        if !self.window.is_full() {
            return;
        }
        let d = self.window.delta().expect("full window");
        if let Some(p) = &self.prev_delta {
            self.cov += p * p.transpose();
            self.cross += p * d.transpose();
            self.count += 1;
        }
        self.prev_delta = Some(d);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `(cov, cross)` sample averages.
    pub fn moments(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if self.count == 0 {
            return Err(Error::EmptyInput("no moment samples".into()));
        }
        let c = self.count as f64;
        Ok((&self.cov / c, &self.cross / c))
    }

    pub fn minimizer(&self, delta: f64) -> Result<DMatrix<f64>> {
        let (cov, cross) = self.moments()?;
        closed_form_minimizer(&cov, &cross, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn delta_cases() {
        let same = vec![col(&[1.0, 2.0]); 4];
        assert!(delta_matrix(&same).unwrap().iter().all(|&x| x == 0.0));
        let d = delta_matrix(&[col(&[1.0, 2.0]), col(&[4.0, -1.0])]).unwrap();
        assert_eq!(d, col(&[3.0, -3.0]));
        // M = 3: last minus mean of the first three
        let w = [
            col(&[1.0, 0.0]),
            col(&[2.0, 3.0]),
            col(&[6.0, -3.0]),
            col(&[5.0, 1.0]),
        ];
        assert_relative_eq!(delta_matrix(&w).unwrap(), col(&[2.0, 1.0]), epsilon = 1e-15);
        assert!(matches!(
            delta_matrix(&w[..1]),
            Err(Error::InsufficientWindow { .. })
        ));
    }

    #[test]
    fn llr_estimate_inverts_noiseless_recursion() {
        let a = DMatrix::from_row_slice(2, 2, &[0.7, 0.4, 0.3, 0.6]);
        let lbar = DMatrix::from_row_slice(2, 2, &[0.2, -0.1, 0.05, 0.3]);
        let delta = 0.1;
        let mut lam = DMatrix::zeros(2, 2);
        let mut window = Vec::new();
        for _ in 0..12 {
            lam = a.tr_mul(&lam) * (1.0 - delta) + &lbar * delta;
            window.push(lam.clone());
        }
        let est = llr_estimate(&window, &a, delta).unwrap();
        assert_relative_eq!(est, lbar, epsilon = 1e-12);
        let zeros = vec![DMatrix::<f64>::zeros(2, 2); 5];
        assert_eq!(
            llr_estimate(&zeros, &a, delta).unwrap(),
            DMatrix::zeros(2, 2)
        );
    }

    #[test]
    fn window_running_sums_match_scratch() {
        for m in [1usize, 2, 5] {
            let mut w = LogWindow::new(m, 2, 1);
            let mut all = Vec::new();
            for t in 0..40 {
                let x = col(&[(t as f64 * 0.37).sin(), (t as f64 * 1.3).cos() * t as f64]);
                all.push(x.clone());
                w.push(x);
                if all.len() > m {
                    let tail = &all[all.len() - m - 1..];
                    assert_relative_eq!(
                        w.delta().unwrap(),
                        delta_matrix(tail).unwrap(),
                        epsilon = 1e-12
                    );
                    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.5, 0.9]);
                    assert_relative_eq!(
                        w.llr_estimate(&a, 0.2).unwrap(),
                        llr_estimate(tail, &a, 0.2).unwrap(),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn zero_delta_leaves_a_unchanged() {
        let cfg = GslConfig::new(0.5, 0.1, 2);
        let mut s = LearnerState::new(2, 1, 2);
        for _ in 0..3 {
            s.window.push(col(&[1.0, 1.0]));
        }
        let a0 = s.a.clone();
        sgd_step(&mut s, &col(&[3.0, -2.0]), &cfg).unwrap();
        assert_eq!(s.a, a0);
    }

    #[test]
    fn zero_mu_only_advances_window() {
        let cfg = GslConfig::new(0.0, 0.1, 1);
        let mut s = LearnerState::new(2, 1, 1);
        s.window.push(col(&[0.0, 1.0]));
        s.window.push(col(&[2.0, 1.0]));
        let a0 = s.a.clone();
        sgd_step(&mut s, &col(&[1.0, 5.0]), &cfg).unwrap();
        assert_eq!(s.a, a0);
        assert_eq!(s.window.newest().unwrap(), &col(&[1.0, 5.0]));
        sgd_step_known_llr(&mut s, &col(&[1.0, 2.0]), &col(&[0.0, 0.0]), &cfg).unwrap();
        assert_eq!(s.a, a0);
    }

    #[test]
    fn single_step_hand_evaluated() {
        // N = 2, H = 2, M = 1, δ = 0.5, μ = 1, A₀ = ½·11ᵀ, L̂₀ = 0.
        // window Λ₀ = (1, 0), Λ₁ = (0, 2); Δ₁ = (−1, 2).
        // Λ₂ = (1, 1): residual row = Λ₂ᵀ − ½Λ₁ᵀA₀ = (1, 1) − ½(1, 1) = (½, ½).
        // A₂ = A₀ + 1·½·Δ₁(½, ½) = A₀ + ¼[[−1, −1], [2, 2]].
        let cfg = GslConfig::new(1.0, 0.5, 1);
        let mut s = LearnerState::new(2, 1, 1);
        s.window.push(col(&[1.0, 0.0]));
        s.window.push(col(&[0.0, 2.0]));
        sgd_step(&mut s, &col(&[1.0, 1.0]), &cfg).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.25, 0.25, 1.0, 1.0]);
        assert_relative_eq!(s.a, expected, epsilon = 1e-15);
        // L̂₂ = (Λ₂ − ½A₂ᵀΛ₁)/½ with A₂ᵀΛ₁ = (2, 2)
        assert_relative_eq!(s.llr, col(&[0.0, 0.0]), epsilon = 1e-15);
    }

    #[test]
    fn step_before_fill_is_an_error() {
        let cfg = GslConfig::new(0.1, 0.1, 3);
        let mut s = LearnerState::new(2, 1, 3);
        s.window.push(col(&[1.0, 1.0]));
        assert!(matches!(
            sgd_step(&mut s, &col(&[1.0, 1.0]), &cfg),
            Err(Error::InsufficientWindow { .. })
        ));
    }

    #[test]
    fn known_llr_matches_sgd_with_same_llr() {
        let cfg = GslConfig::new(0.3, 0.2, 2);
        let mut s = LearnerState::new(2, 1, 2);
        // the first M entries sum to zero, so Δ_{i−1} = Λ_{i−1} and both regressors agree
        for v in [[0.1, 0.4], [-0.1, -0.4], [0.3, 0.3]] {
            s.window.push(col(&v));
        }
        s.llr = col(&[0.7, -0.1]);
        let mut t = s.clone();
        let lbar = s.llr.clone();
        sgd_step(&mut s, &col(&[0.9, 0.2]), &cfg).unwrap();
        sgd_step_known_llr(&mut t, &col(&[0.9, 0.2]), &lbar, &cfg).unwrap();
        assert_relative_eq!(s.a, t.a, epsilon = 1e-15);
    }

    #[test]
    fn known_llr_uses_plain_regressor() {
        let cfg = GslConfig::new(0.3, 0.2, 2);
        let mut s = LearnerState::new(2, 1, 2);
        for v in [[0.1, 0.4], [0.5, -0.2], [0.3, 0.3]] {
            s.window.push(col(&v));
        }
        let lbar = col(&[0.7, -0.1]);
        let a0 = s.a.clone();
        let (lam, prev) = (col(&[0.9, 0.2]), col(&[0.3, 0.3]));
        sgd_step_known_llr(&mut s, &lam, &lbar, &cfg).unwrap();
        let g = analytic_gradient(&lam, &prev, &prev, &lbar, &a0, cfg.delta);
        assert_relative_eq!(s.a, a0 - g * cfg.mu, epsilon = 1e-15);
    }

    #[test]
    fn minibatch_degenerate_and_threshold() {
        let mut cfg = GslConfig::new(0.3, 0.2, 2);
        let mut a = Learner::new(cfg, 2, 1).unwrap();
        cfg.batch = 1;
        cfg.l1_weight = 0.0;
        let mut s = LearnerState::new(2, 1, 2);
        let stream = [
            [0.1, 0.4],
            [0.5, -0.2],
            [0.3, 0.3],
            [0.9, 0.2],
            [-0.4, 0.1],
            [0.2, 0.8],
        ];
        for v in &stream[..3] {
            s.window.push(col(v));
        }
        for v in &stream {
            a.observe(&col(v)).unwrap();
        }
        for v in &stream[3..] {
            let g = s.gradient_term(&col(v), cfg.delta, None).unwrap();
            s.window.push(col(v));
            minibatch_prox_step(&mut s, &[g], &cfg).unwrap();
        }
        assert_relative_eq!(&s.a, a.a(), epsilon = 1e-15);
        assert_relative_eq!(&s.llr, a.llr(), epsilon = 1e-15);

        let big = GslConfig {
            l1_weight: 1e6,
            ..cfg
        };
        let g = s.gradient_term(&col(&[0.0, 1.0]), cfg.delta, None).unwrap();
        minibatch_prox_step(&mut s, &[g.clone(), g], &big).unwrap();
        assert!(s.a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_vanishes_at_minimizer_and_zero_delta() {
        let d = DMatrix::zeros(2, 1);
        let g = analytic_gradient(
            &col(&[1.0, 2.0]),
            &col(&[0.5, 0.1]),
            &d,
            &col(&[0.2, 0.2]),
            &DMatrix::identity(2, 2),
            0.1,
        );
        assert_eq!(g, DMatrix::zeros(2, 2));
    }

    #[test]
    fn closed_form_scalar_and_singular() {
        let cov = DMatrix::from_element(1, 1, 2.0);
        let cross = DMatrix::from_element(1, 1, 0.9);
        let a = closed_form_minimizer(&cov, &cross, 0.1).unwrap();
        assert_relative_eq!(a[(0, 0)], 0.9 / 2.0 / 0.9, epsilon = 1e-15);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            closed_form_minimizer(&sing, &DMatrix::identity(2, 2), 0.1),
            Err(Error::SingularMoments)
        ));
    }

    #[test]
    fn closed_form_recovers_noiseless_linear_system() {
        // Δ_i = (1−δ)AᵀΔ_{i−1} exactly: sample moments give back A
        let a = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, 0.5, 0.3, 0.6, 0.0, 0.5, 0.4]);
        let delta = 0.1;
        let mut cov = DMatrix::zeros(3, 3);
        let mut cross = DMatrix::zeros(3, 3);
        let starts = [
            col(&[1.0, 0.0, 0.0]),
            col(&[0.0, 1.0, 0.0]),
            col(&[0.0, 0.0, 1.0]),
            col(&[1.0, -1.0, 2.0]),
        ];
        for d0 in starts {
            let d1 = a.tr_mul(&d0) * (1.0 - delta);
            cov += &d0 * d0.transpose();
            cross += &d0 * d1.transpose();
        }
        let est = closed_form_minimizer(&cov, &cross, delta).unwrap();
        assert_relative_eq!(est, a, epsilon = 1e-12);
    }

    #[test]
    fn reconstruction_error_cases() {
        let a = DMatrix::from_element(2, 2, 0.5);
        assert_eq!(reconstruction_error(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        b[(1, 0)] += 0.3;
        assert_relative_eq!(reconstruction_error(&a, &b).unwrap(), 0.09, epsilon = 1e-15);
        assert!(reconstruction_error(&a, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn config_json_keys() {
        let cfg: GslConfig =
            serde_json::from_str(r#"{"mu":0.1,"delta":0.05,"M":50,"W":30,"l1_weight":0.006,"burn_in":10,"known_llr":false}"#)
                .unwrap();
        assert_eq!(cfg.window, 50);
        assert_eq!(cfg.batch, 30);
        let cfg: GslConfig = serde_json::from_str(r#"{"mu":0.1,"delta":0.05,"M":50}"#).unwrap();
        assert_eq!(cfg.batch, 1);
        assert!(GslConfig::new(0.1, 1.5, 3).validate().is_err());
    }
}
