//! The step graphon of an SBM and the stationary measure of the random walk
//! exploring it.
//!
//! The walk's invariant density on class `q` is proportional to the mean
//! connectivity `pibar_q = sum_r pi_qr alpha_r`, so class `q` carries mass
//! `alpha_tilde_q = alpha_q pibar_q / pibar` instead of `alpha_q`. The CDF
//! `gamma` of that measure is piecewise affine and maps `[A_{q-1}, A_q)` onto
//! `[A~_{q-1}, A~_q)`; its inverse converts biased weights back to `alpha`.

use crate::error::{Error, Result};
use crate::sbm::{dot, sum, ClassPartition, SbmParams};

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}

/// `kappa_theta(x, y) = pi_{q(x), q(y)}`.
pub fn graphon_eval(params: &SbmParams, x: f64, y: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    Ok(params.pi().get(params.class_of(x), params.class_of(y)))
}

/// Mean connectivities and the biased class weights seen by the walk.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedProfile {
    /// `pibar_q = sum_r pi_qr alpha_r`
    pub pi_bar_per_class: Vec<f64>,
    /// `pibar = sum_q pibar_q alpha_q`
    pub pi_bar: f64,
    /// `alpha_tilde_q = alpha_q pibar_q / pibar`
    pub alpha_tilde: Vec<f64>,
    /// Prefix sums of `alpha_tilde`, starting at 0 and ending at exactly 1.
    pub cutpoints_tilde: Vec<f64>,
    cutpoints: Vec<f64>,
}

impl BiasedProfile {
    pub fn new(params: &SbmParams) -> Self {
        Self::from_parts(params.alpha(), |q| params.pi().row(q).to_vec())
    }

    /// Profile for raw weights and matrix rows; used by the de-biasing code
    /// where candidate weights may touch the simplex boundary.
    pub(crate) fn from_parts(alpha: &[f64], row: impl Fn(usize) -> Vec<f64>) -> Self {
        let q = alpha.len();
        let pi_bar_per_class: Vec<f64> = (0..q).map(|c| dot(&row(c), alpha)).collect();
        let pi_bar = dot(&pi_bar_per_class, alpha);
        let alpha_tilde: Vec<f64> = (0..q)
            .map(|c| alpha[c] * pi_bar_per_class[c] / pi_bar)
            .collect();
        let cutpoints_tilde = ClassPartition::from_weights(&alpha_tilde).cutpoints().to_vec();
        let cutpoints = ClassPartition::from_weights(alpha).cutpoints().to_vec();
        Self { pi_bar_per_class, pi_bar, alpha_tilde, cutpoints_tilde, cutpoints }
    }

    pub fn alpha_tilde_sum(&self) -> f64 {
        sum(&self.alpha_tilde)
    }

    /// `gamma(x) = A~_{q-1} + (pibar_q / pibar)(x - A_{q-1})` on `I_q`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        if x == 1.0 {
            return Ok(1.0);
        }
        let q = ClassPartition::class_index(&self.cutpoints, x);
        let slope = self.pi_bar_per_class[q] / self.pi_bar;
        let v = self.cutpoints_tilde[q] + slope * (x - self.cutpoints[q]);
        Ok(v.clamp(0.0, 1.0))
    }

    /// Exact inverse of [`BiasedProfile::cdf`]; a bijection while every
    /// `alpha_q > 0` and `pi_qr > 0`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        check_unit("v", v)?;
        if v == 1.0 {
            return Ok(1.0);
        }
        let q = ClassPartition::class_index(&self.cutpoints_tilde, v);
        let slope = self.pi_bar / self.pi_bar_per_class[q];
        let x = self.cutpoints[q] + slope * (v - self.cutpoints_tilde[q]);
        Ok(x.clamp(0.0, 1.0))
    }
}

impl ClassPartition {
    /// Zero-based interval index of `x` for a raw cutpoint vector.
    pub(crate) fn class_index(cutpoints: &[f64], x: f64) -> usize {
        let q = cutpoints.len() - 1;
        cutpoints[1..].partition_point(|&a| a <= x).min(q - 1)
    }
}

pub fn biased_profile(params: &SbmParams) -> BiasedProfile {
    BiasedProfile::new(params)
}

pub fn gamma_cdf(params: &SbmParams, x: f64) -> Result<f64> {
    BiasedProfile::new(params).cdf(x)
}

pub fn gamma_inverse(params: &SbmParams, v: f64) -> Result<f64> {
    BiasedProfile::new(params).inverse(v)
}

/// Parameters of the biased graphon `kappa_{theta~}`: same `pi`, weights `alpha_tilde`.
pub fn biased_params(params: &SbmParams) -> SbmParams {
    let profile = BiasedProfile::new(params);
    let mut alpha = profile.alpha_tilde;
    // absorb rounding so the weight invariant holds at construction
    let excess = sum(&alpha) - 1.0;
    let last = alpha.len() - 1;
    alpha[last] -= excess;
    SbmParams::new(alpha, params.pi().clone()).expect("biased weights are positive")
}

pub fn check_connected(params: &SbmParams) -> bool {
    params.is_connected()
}
