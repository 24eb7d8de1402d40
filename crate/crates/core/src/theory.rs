//! Closed-form evaluators for the consistency theory: balanced-case bounds
//! and condition, the optimal-rate lower bound, unbalanced-case (K = 2)
//! quantities and bounds, and the heatmap grid over signal strength and
//! parameter-estimate accuracy.
//!
//! Natural logarithms throughout.

use serde::Serialize;

use crate::error::{Error, Result};

/// Binary entropy -g ln g - (1-g) ln(1-g), 0 at the endpoints by continuity.
pub fn binary_entropy(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid_parameter(format!(
            "gamma must be in [0,1], got {gamma}"
        )));
    }
    if gamma == 0.0 || gamma == 1.0 {
        return Ok(0.0);
    }
    Ok(-gamma * gamma.ln() - (1.0 - gamma) * (1.0 - gamma).ln())
}

fn kappa_unchecked(gamma: f64, n: f64) -> f64 {
    (n.ln() - (4.0 * std::f64::consts::PI * gamma * (1.0 - gamma) + 1.0 / (3.0 * n)).ln()) / n
}

/// kappa_gamma(n) = (ln n - ln(4 pi gamma (1-gamma) + 1/(3n))) / n.
/// Rejects the endpoints, which lie outside the initialization sets.
pub fn kappa(gamma: f64, n: f64) -> Result<f64> {
    if n <= 0.0 {
        return Err(Error::invalid_parameter(format!("n must be > 0, got {n}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::invalid_parameter(format!(
            "gamma must be in (0,1), got {gamma}"
        )));
    }
    Ok(kappa_unchecked(gamma, n))
}

/// Everything the balanced-case consistency analysis evaluates to at one
/// parameter point.
#[derive(Clone, Debug, Serialize)]
pub struct BalancedBoundReport {
    pub k: usize,
    pub n: f64,
    pub a: f64,
    pub b: f64,
    pub sigma2: f64,
    pub gamma: f64,
    /// h(gamma)
    pub entropy_h: f64,
    /// kappa_gamma(2n/K)
    pub kappa: f64,
    /// C(n, gamma) = h(gamma) + kappa_gamma(2n/K) + (1-gamma) ln(K-1)
    pub c_n_gamma: f64,
    /// (1/8) (gamma K - 1)^2 / (K (K-1)^2) * (a-b)^2 / sigma^2
    pub condition_lhs: f64,
    pub condition_holds: bool,
    /// (K-1) exp{ -(1/4) (gamma K - 1)^2 / (K (K-1)^2) * n (a-b)^2 / sigma^2 }
    pub expected_error_bound: f64,
    /// exp{ -(1/8) (gamma K - 1)^2 / (K-1)^2 * (n/K) (a-b)^2 / sigma^2 }
    pub prob_threshold: f64,
    /// (K-1) exp{ -n (condition_lhs - C(n, gamma)) }
    pub prob_rhs: f64,
    /// Leading-order optimal-rate lower bound exp{ -(n/K) (a-b)^2 / (4 sigma^2) }
    pub xu_lower_bound: f64,
}

/// Evaluate the balanced-case bounds. gamma = 1 (a fully correct
/// initialization) is allowed; the entropy and kappa terms stay finite.
pub fn balanced_bounds(
    k: usize,
    n: f64,
    a: f64,
    b: f64,
    sigma2: f64,
    gamma: f64,
) -> Result<BalancedBoundReport> {
    if k < 2 {
        return Err(Error::invalid_parameter("K must be >= 2"));
    }
    if a == b {
        return Err(Error::invalid_parameter("a and b must differ"));
    }
    if sigma2 <= 0.0 {
        return Err(Error::invalid_parameter("sigma2 must be > 0"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::invalid_parameter(format!(
            "gamma must be in (0,1], got {gamma}"
        )));
    }
    if gamma == 1.0 / k as f64 {
        return Err(Error::invalid_parameter(
            "gamma = 1/K is excluded (uninformative initialization)",
        ));
    }
    if n <= 0.0 {
        return Err(Error::invalid_parameter("n must be > 0"));
    }
    let kf = k as f64;
    let snr = (a - b) * (a - b) / sigma2;
    let gk = gamma * kf - 1.0;
    let shape = gk * gk / (kf * (kf - 1.0) * (kf - 1.0));

    let entropy_h = binary_entropy(gamma)?;
    let kappa_v = kappa_unchecked(gamma, 2.0 * n / kf);
    let c_n_gamma = entropy_h + kappa_v + (1.0 - gamma) * (kf - 1.0).ln();
    let condition_lhs = 0.125 * shape * snr;
    let expected_error_bound = (kf - 1.0) * (-0.25 * shape * n * snr).exp();
    let prob_threshold = (-0.125 * gk * gk / ((kf - 1.0) * (kf - 1.0)) * n / kf * snr).exp();
    let prob_rhs = (kf - 1.0) * (-n * (condition_lhs - c_n_gamma)).exp();
    let xu_lower_bound = (-(n / kf) * snr / 4.0).exp();

    Ok(BalancedBoundReport {
        k,
        n,
        a,
        b,
        sigma2,
        gamma,
        entropy_h,
        kappa: kappa_v,
        c_n_gamma,
        condition_lhs,
        condition_holds: condition_lhs > c_n_gamma,
        expected_error_bound,
        prob_threshold,
        prob_rhs,
        xu_lower_bound,
    })
}

/// Everything the unbalanced two-community analysis evaluates to.
/// Bounds are None when the sign conditions fail or tau^2 degenerates.
#[derive(Clone, Debug, Serialize)]
pub struct UnbalancedBoundReport {
    pub pi1: f64,
    pub pi2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub a: f64,
    pub b: f64,
    pub sigma2: f64,
    pub ahat: f64,
    pub bhat: f64,
    pub sigma2hat: f64,
    pub n: f64,
    pub pi_tilde1: f64,
    pub pi_tilde2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub tau2: f64,
    pub f_ab: f64,
    pub f_ba: f64,
    pub t1: f64,
    pub t2: f64,
    pub sign_conditions_hold: bool,
    pub bound_comm1: Option<f64>,
    pub bound_comm2: Option<f64>,
    pub expected_error_bound: Option<f64>,
    pub c1_gamma_pi: f64,
    pub c2_gamma_pi: f64,
}

/// Evaluate the unbalanced-case (K = 2) quantities and bounds.
pub fn unbalanced_bounds(
    pi: (f64, f64),
    gamma: (f64, f64),
    truth: (f64, f64, f64),
    estimates: (f64, f64, f64),
    n: f64,
) -> Result<UnbalancedBoundReport> {
    let (pi1, pi2) = pi;
    let (gamma1, gamma2) = gamma;
    let (a, b, sigma2) = truth;
    let (ahat, bhat, sigma2hat) = estimates;
    if (pi1 + pi2 - 1.0).abs() > 1e-12 || pi1 < 0.0 || pi2 < 0.0 {
        return Err(Error::invalid_parameter("pi1 + pi2 must equal 1"));
    }
    if sigma2 <= 0.0 || sigma2hat <= 0.0 {
        return Err(Error::invalid_parameter("variances must be > 0"));
    }
    if (ahat - bhat) * (a - b) <= 0.0 {
        return Err(Error::invalid_parameter(
            "estimates must satisfy (ahat - bhat)(a - b) > 0",
        ));
    }
    if n <= 0.0 {
        return Err(Error::invalid_parameter("n must be > 0"));
    }

    let pi_tilde1 = gamma1 * pi1 + (1.0 - gamma2) * pi2;
    let pi_tilde2 = (1.0 - gamma1) * pi1 + gamma2 * pi2;
    let beta1 = pi_tilde2 * ((1.0 - gamma2) * pi2 - gamma1 * pi1);
    let beta2 = pi_tilde1 * ((1.0 - gamma1) * pi1 - gamma2 * pi2);
    let tau2 = beta1 * beta1 * pi1 + beta2 * beta2 * pi2;

    let f = |x: f64, y: f64| {
        (-2.0 * x + ahat + bhat) * (beta1 * gamma1 * pi1 - beta2 * (1.0 - gamma1) * pi1)
            + (-2.0 * y + ahat + bhat) * (beta1 * (1.0 - gamma2) * pi2 - beta2 * gamma2 * pi2)
    };
    let f_ab = f(a, b);
    let f_ba = f(b, a);
    let log_term = 2.0 * sigma2hat * pi_tilde1 * pi_tilde2 / (n * (ahat - bhat))
        * (pi_tilde1 / pi_tilde2).ln();
    let t1 = log_term + f_ab;
    let t2 = log_term + f_ba;

    let sign_conditions_hold = if a > b {
        t1 >= 0.0 && t2 < 0.0
    } else {
        t1 < 0.0 && t2 >= 0.0
    };

    let c1_gamma_pi = beta1 * pi2 + beta2 * pi1 - (beta1 + beta2) * (pi1 * gamma1 + pi2 * gamma2);
    let c2_gamma_pi = beta1 * pi2 - beta2 * pi1 + (beta1 + beta2) * (pi1 * gamma1 - pi2 * gamma2);

    let (bound_comm1, bound_comm2, expected_error_bound) = if sign_conditions_hold && tau2 > 0.0 {
        let b1 = (-n * t1 * t1 / (2.0 * sigma2 * tau2)).exp();
        let b2 = (-n * t2 * t2 / (2.0 * sigma2 * tau2)).exp();
        (Some(b1), Some(b2), Some(pi1 * b1 + pi2 * b2))
    } else {
        (None, None, None)
    };

    Ok(UnbalancedBoundReport {
        pi1,
        pi2,
        gamma1,
        gamma2,
        a,
        b,
        sigma2,
        ahat,
        bhat,
        sigma2hat,
        n,
        pi_tilde1,
        pi_tilde2,
        beta1,
        beta2,
        tau2,
        f_ab,
        f_ba,
        t1,
        t2,
        sign_conditions_hold,
        bound_comm1,
        bound_comm2,
        expected_error_bound,
        c1_gamma_pi,
        c2_gamma_pi,
    })
}

/// Heatmap of the log expected-error bound over |a-b| (columns) and the
/// parameter-estimate accuracy delta (rows). None marks cells where the sign
/// conditions fail at every corner of the estimate box.
#[derive(Clone, Debug, Serialize)]
pub struct BoundHeatmap {
    pub ab_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    /// Row-major, rows indexed by delta, columns by |a-b|.
    pub log_bound: Vec<Option<f64>>,
}

impl BoundHeatmap {
    pub fn cell(&self, delta_idx: usize, ab_idx: usize) -> Option<f64> {
        self.log_bound[delta_idx * self.ab_grid.len() + ab_idx]
    }
}

/// Evaluate the heatmap in the known-variance regime (sigma2hat = sigma2,
/// b = 0, a = |a-b|). The worst case over the estimate box
/// [a - delta, a + delta] x [b - delta, b + delta] is attained at a corner,
/// so only the four corners are evaluated.
pub fn bound_heatmap(
    pi: (f64, f64),
    gamma: (f64, f64),
    n: f64,
    sigma2: f64,
    ab_grid: &[f64],
    delta_grid: &[f64],
) -> Result<BoundHeatmap> {
    if ab_grid.is_empty() || delta_grid.is_empty() {
        return Err(Error::invalid_parameter("grids must be non-empty"));
    }
    let mut log_bound = Vec::with_capacity(ab_grid.len() * delta_grid.len());
    for &delta in delta_grid {
        for &ab in ab_grid {
            let (a, b) = (ab, 0.0);
            let mut worst: Option<f64> = None;
            for &da in &[-delta, delta] {
                for &db in &[-delta, delta] {
                    let (ahat, bhat) = (a + da, b + db);
                    if (ahat - bhat) * (a - b) <= 0.0 {
                        continue;
                    }
                    let rep = unbalanced_bounds(
                        pi,
                        gamma,
                        (a, b, sigma2),
                        (ahat, bhat, sigma2),
                        n,
                    )?;
                    if let Some(bound) = rep.expected_error_bound {
                        worst = Some(match worst {
                            Some(w) if w >= bound => w,
                            _ => bound,
                        });
                    }
                }
            }
            log_bound.push(worst.map(f64::ln));
        }
    }
    Ok(BoundHeatmap {
        ab_grid: ab_grid.to_vec(),
        delta_grid: delta_grid.to_vec(),
        log_bound,
    })
}
