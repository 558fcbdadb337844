//! Hierarchical Bayesian 2PL model in non-centered form.
//!
//! `P(y = 1) = logistic(a_i (theta_j + e_i))` with `b_i = -e_i`,
//! `e_i = beta_e + u_e,i`, `log a_i = beta_a + u_a,i`, and item effects
//! `(u_e, u_a) = diag(tau) L z` where `L` is the Cholesky factor of the 2x2
//! correlation matrix with correlation `rho`.
//!
//! Unconstrained layout: `theta[J], beta_e, beta_a, z_e[I], z_a[I],
//! log tau_e, log tau_a, atanh rho`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::responses::{Outcome, ResponseDataset};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub participant: u32,
    pub item: u32,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Irt2plModel {
    pub participants: Vec<String>,
    pub items: Vec<String>,
    pub observations: Vec<Observation>,
}

/// Offsets of each block in the unconstrained parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub participants: usize,
    pub items: usize,
}

impl ParamLayout {
    pub fn dim(&self) -> usize {
        self.participants + 2 * self.items + 5
    }
    pub fn theta(&self, j: usize) -> usize {
        j
    }
    pub fn beta_e(&self) -> usize {
        self.participants
    }
    pub fn beta_a(&self) -> usize {
        self.participants + 1
    }
    pub fn z_e(&self, i: usize) -> usize {
        self.participants + 2 + i
    }
    pub fn z_a(&self, i: usize) -> usize {
        self.participants + 2 + self.items + i
    }
    pub fn log_tau_e(&self) -> usize {
        self.participants + 2 + 2 * self.items
    }
    pub fn log_tau_a(&self) -> usize {
        self.log_tau_e() + 1
    }
    pub fn atanh_rho(&self) -> usize {
        self.log_tau_e() + 2
    }
}

/// Parameters on their natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedParams {
    pub theta: Vec<f64>,
    pub easiness: Vec<f64>,
    pub discrimination: Vec<f64>,
    pub beta_e: f64,
    pub beta_a: f64,
    pub tau_e: f64,
    pub tau_a: f64,
    pub rho: f64,
}

impl ConstrainedParams {
    /// Flattened in the order of [`Irt2plModel::parameter_names`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.theta.len() + 2 * self.easiness.len() + 5);
        out.extend_from_slice(&self.theta);
        out.extend_from_slice(&self.easiness);
        out.extend_from_slice(&self.discrimination);
        out.extend_from_slice(&[self.beta_e, self.beta_a, self.tau_e, self.tau_a, self.rho]);
        out
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let t = x.exp();
        t / (1.0 + t)
    }
}

impl Irt2plModel {
    pub fn new(participants: Vec<String>, items: Vec<String>, observations: Vec<Observation>) -> Result<Self> {
        for o in &observations {
            if o.participant as usize >= participants.len() || o.item as usize >= items.len() {
                return Err(Error::InvalidConfig(format!(
                    "observation ({}, {}) out of range",
                    o.participant, o.item
                )));
            }
        }
        Ok(Irt2plModel {
            participants,
            items,
            observations,
        })
    }

    /// Observed (non-skipped) cells of the dataset.
    pub fn from_dataset(data: &ResponseDataset) -> Self {
        let mut observations = Vec::new();
        for (j, row) in data.outcomes.iter().enumerate() {
            for (i, &o) in row.iter().enumerate() {
                if o != Outcome::Skip {
                    observations.push(Observation {
                        participant: j as u32,
                        item: i as u32,
                        correct: o == Outcome::Correct,
                    });
                }
            }
        }
        Irt2plModel {
            participants: data.participants.iter().map(|p| p.participant_id.clone()).collect(),
            items: data.item_ids.clone(),
            observations,
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            participants: self.participants.len(),
            items: self.items.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.layout().dim()
    }

    /// Names of the constrained quantities reported per draw.
    pub fn parameter_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        names.extend(self.participants.iter().map(|p| format!("theta[{p}]")));
        names.extend(self.items.iter().map(|i| format!("e[{i}]")));
        names.extend(self.items.iter().map(|i| format!("a[{i}]")));
        names.extend(["beta_e", "beta_a", "tau_e", "tau_a", "rho"].map(String::from));
        names
    }

    pub fn constrain(&self, x: &[f64]) -> ConstrainedParams {
        let l = self.layout();
        let tau_e = x[l.log_tau_e()].exp();
        let tau_a = x[l.log_tau_a()].exp();
        let rho = x[l.atanh_rho()].tanh();
        let s = (1.0 - rho * rho).max(0.0).sqrt();
        let beta_e = x[l.beta_e()];
        let beta_a = x[l.beta_a()];
        let easiness = (0..l.items).map(|i| beta_e + tau_e * x[l.z_e(i)]).collect();
        let discrimination = (0..l.items)
            .map(|i| (beta_a + tau_a * (rho * x[l.z_e(i)] + s * x[l.z_a(i)])).exp())
            .collect();
        ConstrainedParams {
            theta: x[..l.participants].to_vec(),
            easiness,
            discrimination,
            beta_e,
            beta_a,
            tau_e,
            tau_a,
            rho,
        }
    }

    /// Joint log density and its gradient.
    pub fn log_posterior(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != self.dim() {
            return Err(Error::InvalidConfig(format!(
                "parameter vector has length {}, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {pos}")));
        }
        let mut grad = vec![0.0; x.len()];
        let lp = self.log_posterior_into(x, &mut grad);
        Ok((lp, grad))
    }

    /// Allocation-free variant; `grad` is overwritten. Inputs are not checked.
    pub fn log_posterior_into(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let l = self.layout();
        let (n_j, n_i) = (l.participants, l.items);
        grad.iter_mut().for_each(|g| *g = 0.0);

        let beta_e = x[l.beta_e()];
        let beta_a = x[l.beta_a()];
        let log_tau_e = x[l.log_tau_e()];
        let log_tau_a = x[l.log_tau_a()];
        let w = x[l.atanh_rho()];
        let tau_e = log_tau_e.exp();
        let tau_a = log_tau_a.exp();
        let rho = w.tanh();
        let one_m_rho2 = 1.0 - rho * rho;
        let s = one_m_rho2.max(0.0).sqrt();

        let z_e = &x[l.z_e(0)..l.z_e(0) + n_i];
        let z_a = &x[l.z_a(0)..l.z_a(0) + n_i];
        let mut e = Vec::with_capacity(n_i);
        let mut a = Vec::with_capacity(n_i);
        let mut mix = Vec::with_capacity(n_i);
        for i in 0..n_i {
            e.push(beta_e + tau_e * z_e[i]);
            let m = rho * z_e[i] + s * z_a[i];
            mix.push(m);
            a.push((beta_a + tau_a * m).exp());
        }

        // Likelihood
        let mut lp = 0.0;
        let mut g_e = vec![0.0; n_i];
        let mut g_la = vec![0.0; n_i];
        for o in &self.observations {
            let (j, i) = (o.participant as usize, o.item as usize);
            let eta = a[i] * (x[j] + e[i]);
            let t = (-eta.abs()).exp();
            let softplus = eta.max(0.0) + t.ln_1p();
            let p = if eta >= 0.0 { 1.0 / (1.0 + t) } else { t / (1.0 + t) };
            let resid = if o.correct {
                lp += eta - softplus;
                1.0 - p
            } else {
                lp -= softplus;
                -p
            };
            grad[j] += resid * a[i];
            g_e[i] += resid * a[i];
            g_la[i] += resid * eta;
        }

        // Chain rule back to the unconstrained item block.
        let (mut d_beta_e, mut d_beta_a, mut d_log_tau_e, mut d_log_tau_a, mut d_w) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n_i {
            d_beta_e += g_e[i];
            d_beta_a += g_la[i];
            grad[l.z_e(i)] += g_e[i] * tau_e + g_la[i] * tau_a * rho;
            grad[l.z_a(i)] += g_la[i] * tau_a * s;
            d_log_tau_e += g_e[i] * tau_e * z_e[i];
            d_log_tau_a += g_la[i] * tau_a * mix[i];
            d_w += g_la[i] * tau_a * (one_m_rho2 * z_e[i] - rho * s * z_a[i]);
        }

        // Priors
        let mut std_normal = |idx: usize| {
            lp += -0.5 * x[idx] * x[idx] - HALF_LN_2PI;
            grad[idx] -= x[idx];
        };
        for j in 0..n_j {
            std_normal(l.theta(j));
        }
        std_normal(l.beta_e());
        std_normal(l.beta_a());
        for i in 0..n_i {
            std_normal(l.z_e(i));
            std_normal(l.z_a(i));
        }
        // Half-normal(0, 1) on tau with log-transform Jacobian.
        lp += 2.0 * (LN_2 - HALF_LN_2PI) - 0.5 * (tau_e * tau_e + tau_a * tau_a) + log_tau_e + log_tau_a;
        d_log_tau_e += 1.0 - tau_e * tau_e;
        d_log_tau_a += 1.0 - tau_a * tau_a;
        // LKJ(2) on the 2x2 correlation: (3/4)(1 - rho^2), times tanh Jacobian (1 - rho^2).
        lp += (0.75f64).ln() + 2.0 * one_m_rho2.ln();
        d_w += -4.0 * rho;

        grad[l.beta_e()] += d_beta_e;
        grad[l.beta_a()] += d_beta_a;
        grad[l.log_tau_e()] += d_log_tau_e;
        grad[l.log_tau_a()] += d_log_tau_a;
        grad[l.atanh_rho()] += d_w;
        lp
    }
}
