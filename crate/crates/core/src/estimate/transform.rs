//! Maps between the unconstrained optimizer space and natural parameters.
//!
//! Free coordinates, in order:
//! `alr_gm, alr_coop, alr_free` (additive log-ratios against the altruist
//! share), two preference coordinates, `ln beta`, and the omega logit.
//! Charness-Rabin weights use `5 tanh(x / 5)`, a smooth map onto
//! `(-5, 5)`; the welfare weights and omega use logistic maps.

use crate::choice::{logistic, NoiseParams};
use crate::error::{Error, Result};
use crate::kernels::{CondCoopSpec, SocialParams, TypeParams, WelfareParams};
use crate::model::{MixtureParams, TypeShares};

pub const SOCIAL_BOUND: f64 = 5.0;
/// Smallest share or probability used when inverting a transform.
const FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameterization {
    pub spec: CondCoopSpec,
    /// Holds the preference parameters fixed, leaving five free coordinates.
    pub fixed_prefs: Option<TypeParams>,
}

impl Parameterization {
    pub fn new(spec: CondCoopSpec, fixed_prefs: Option<TypeParams>) -> Result<Self> {
        if let Some(p) = fixed_prefs {
            let ok = matches!(
                (spec, p),
                (
                    CondCoopSpec::ModifiedGm | CondCoopSpec::PureCc,
                    TypeParams::Social(_)
                ) | (CondCoopSpec::ReciprocalFairness, TypeParams::Welfare(_))
            );
            if !ok {
                return Err(Error::InvalidParams(format!(
                    "fixed preferences {p:?} do not fit the {spec} specification"
                )));
            }
        }
        Ok(Parameterization { spec, fixed_prefs })
    }

    pub fn dim(&self) -> usize {
        if self.fixed_prefs.is_some() {
            5
        } else {
            7
        }
    }

    /// Expands a free vector to the full seven coordinates, with `NaN`
    /// in the fixed preference slots.
    fn full(&self, x: &[f64]) -> [f64; 7] {
        if self.fixed_prefs.is_some() {
            [x[0], x[1], x[2], f64::NAN, f64::NAN, x[3], x[4]]
        } else {
            [x[0], x[1], x[2], x[3], x[4], x[5], x[6]]
        }
    }

    pub fn to_params(&self, x: &[f64]) -> Result<MixtureParams> {
        if x.len() != self.dim() {
            return Err(Error::InvalidParams(format!(
                "expected {} free coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite free parameters {x:?}"
            )));
        }
        let f = self.full(x);
        let shares = TypeShares::new(alr_inverse([f[0], f[1], f[2]]))?;
        let prefs = match self.fixed_prefs {
            Some(p) => p,
            None => match self.spec {
                CondCoopSpec::ReciprocalFairness => {
                    TypeParams::Welfare(WelfareParams::new(logistic(f[3]), logistic(f[4]))?)
                }
                _ => TypeParams::Social(SocialParams::new(
                    SOCIAL_BOUND * (f[4] / SOCIAL_BOUND).tanh(),
                    SOCIAL_BOUND * (f[3] / SOCIAL_BOUND).tanh(),
                )?),
            },
        };
        let noise = NoiseParams::new(f[5].exp(), 0.5 * logistic(f[6]))?;
        MixtureParams::new(shares, self.spec, prefs, noise)
    }

    /// Inverse map; boundary values are pulled inside by a small floor.
    pub fn to_free(&self, p: &MixtureParams) -> Result<Vec<f64>> {
        if p.spec != self.spec {
            return Err(Error::InvalidParams(format!(
                "parameters are for {}, parameterization is for {}",
                p.spec, self.spec
            )));
        }
        let alr = alr_forward(&p.shares.0);
        let (a, b) = match p.prefs {
            TypeParams::Social(sp) => (social_inverse(sp.sigma), social_inverse(sp.rho)),
            TypeParams::Welfare(wp) => (logit(wp.gamma), logit(wp.delta)),
            TypeParams::None => {
                return Err(Error::InvalidParams(
                    "mixture without preference parameters".into(),
                ))
            }
        };
        let lb = p.noise.beta.max(FLOOR).ln();
        let lo = logit(2.0 * p.noise.omega);
        Ok(if self.fixed_prefs.is_some() {
            vec![alr[0], alr[1], alr[2], lb, lo]
        } else {
            vec![alr[0], alr[1], alr[2], a, b, lb, lo]
        })
    }

    /// `(pi_gm, pi_coop, pi_free, pi_alt, sigma|gamma, rho|delta, beta, omega)`.
    pub fn natural(&self, x: &[f64]) -> Result<[f64; 8]> {
        Ok(self.to_params(x)?.to_natural())
    }

    /// Box from which restart points are drawn, per free coordinate.
    pub fn start_box(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(-2.0, 2.0); 3];
        if self.fixed_prefs.is_none() {
            let pref = match self.spec {
                CondCoopSpec::ReciprocalFairness => (-3.0, 3.0),
                _ => (-2.5, 2.5),
            };
            b.push(pref);
            b.push(pref);
        }
        b.push((0.05f64.ln(), 3.0f64.ln()));
        b.push((-3.0, 3.0));
        b
    }

    /// Natural coordinates that are free to move (both preference slots
    /// drop out when they are fixed).
    pub fn free_natural_indices(&self) -> Vec<usize> {
        if self.fixed_prefs.is_some() {
            vec![0, 1, 2, 3, 6, 7]
        } else {
            (0..8).collect()
        }
    }
}

/// Shares from additive log-ratios against the last component.
pub fn alr_inverse(a: [f64; 3]) -> [f64; 4] {
    let max = a.iter().copied().fold(0.0, f64::max);
    let e = [
        (a[0] - max).exp(),
        (a[1] - max).exp(),
        (a[2] - max).exp(),
        (-max).exp(),
    ];
    let total: f64 = e.iter().sum();
    e.map(|v| v / total)
}

pub fn alr_forward(pi: &[f64; 4]) -> [f64; 3] {
    let last = pi[3].max(FLOOR).ln();
    [
        pi[0].max(FLOOR).ln() - last,
        pi[1].max(FLOOR).ln() - last,
        pi[2].max(FLOOR).ln() - last,
    ]
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(FLOOR, 1.0 - FLOOR);
    (p / (1.0 - p)).ln()
}

fn social_inverse(v: f64) -> f64 {
    let r = (v / SOCIAL_BOUND).clamp(-1.0 + FLOOR, 1.0 - FLOOR);
    SOCIAL_BOUND * r.atanh()
}
