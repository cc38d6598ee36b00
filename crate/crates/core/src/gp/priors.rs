//! Hyperpriors and the unconstrained parameterization used by the fitters.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, LogNormal};

use crate::error::{invalid, Result};

/// Lower bound on every learned noise variance.
pub const NOISE_FLOOR: f64 = 1e-6;
/// Added to softplus outputs so positive parameters never reach exactly zero.
pub const POSITIVE_JITTER: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriorKind {
    /// Shape-rate parameterization.
    Gamma { shape: f64, rate: f64 },
    /// `ln x ~ N(mu, sigma²)`.
    LogNormal { mu: f64, sigma: f64 },
    Beta { a: f64, b: f64 },
}

/// Which hyperparameters a prior applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Lengthscale,
    /// Signal variance of single-output (independent) kernels.
    Outputscale,
    /// Per-objective scales `σ_i` of an equicorrelated task block.
    TaskScale,
    /// Shared inter-objective correlation `ρ`.
    Correlation,
    Noise,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperPriorSpec {
    pub kind: PriorKind,
    pub target: ParamGroup,
}

// Lanczos approximation, g = 7, n = 9.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

impl PriorKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PriorKind::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            PriorKind::LogNormal { sigma, mu } => sigma > 0.0 && mu.is_finite(),
            PriorKind::Beta { a, b } => a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid prior parameters {self:?}"))
        }
    }

    /// Log-density on the natural scale; `-inf` outside the support.
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            PriorKind::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            PriorKind::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (x.ln() - mu) / sigma;
                -x.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
            PriorKind::Beta { a, b } => {
                if x <= 0.0 || x >= 1.0 {
                    return f64::NEG_INFINITY;
                }
                let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
                (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta
            }
        }
    }

    pub fn mode(&self) -> f64 {
        match *self {
            PriorKind::Gamma { shape, rate } => ((shape - 1.0) / rate).max(1e-3),
            PriorKind::LogNormal { mu, sigma } => (mu - sigma * sigma).exp(),
            PriorKind::Beta { a, b } => {
                if a > 1.0 && b > 1.0 {
                    (a - 1.0) / (a + b - 2.0)
                } else {
                    a / (a + b)
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PriorKind::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
            PriorKind::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("validated").sample(rng),
            PriorKind::Beta { a, b } => Beta::new(a, b).expect("validated").sample(rng),
        }
    }
}

/// The hyperpriors attached to one model. Groups without an entry carry an
/// improper flat prior.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PriorSet {
    specs: Vec<HyperPriorSpec>,
}

impl PriorSet {
    pub fn new(specs: Vec<HyperPriorSpec>) -> Result<Self> {
        for s in &specs {
            s.kind.validate()?;
        }
        Ok(Self { specs })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn get(&self, group: ParamGroup) -> Option<&PriorKind> {
        self.specs.iter().find(|s| s.target == group).map(|s| &s.kind)
    }

    pub fn specs(&self) -> &[HyperPriorSpec] {
        &self.specs
    }

    /// Gamma(1.5, 1) lengthscales, LogNormal(-4, 1) noise, LogNormal(-2, 3)
    /// function variance, Beta(2, 2) correlation.
    pub fn standard() -> Self {
        Self {
            specs: vec![
                HyperPriorSpec { kind: PriorKind::Gamma { shape: 1.5, rate: 1.0 }, target: ParamGroup::Lengthscale },
                HyperPriorSpec { kind: PriorKind::LogNormal { mu: -4.0, sigma: 1.0 }, target: ParamGroup::Noise },
                HyperPriorSpec { kind: PriorKind::LogNormal { mu: -2.0, sigma: 3.0 }, target: ParamGroup::Outputscale },
                HyperPriorSpec { kind: PriorKind::Beta { a: 2.0, b: 2.0 }, target: ParamGroup::Correlation },
            ],
        }
    }

    /// As [`PriorSet::standard`] but with LogNormal(0.5, 1.5) lengthscales, for
    /// kernels that model what a meta-learned prior leaves unexplained.
    pub fn residual() -> Self {
        let mut p = Self::standard();
        p.specs[0] = HyperPriorSpec {
            kind: PriorKind::LogNormal { mu: 0.5, sigma: 1.5 },
            target: ParamGroup::Lengthscale,
        };
        p
    }

    pub fn log_density(&self, group: ParamGroup, x: f64) -> f64 {
        self.get(group).map_or(0.0, |p| p.log_pdf(x))
    }

    /// Sampling distribution for restart points: the prior when one exists,
    /// a group-specific default otherwise.
    pub fn sample<R: Rng + ?Sized>(&self, group: ParamGroup, rng: &mut R) -> f64 {
        match self.get(group) {
            Some(p) => p.sample(rng),
            None => match group {
                ParamGroup::Correlation => rng.random_range(0.05..0.95),
                ParamGroup::Noise => LogNormal::new(-4.0, 1.0).expect("const").sample(rng),
                _ => LogNormal::new(0.0, 0.5).expect("const").sample(rng),
            },
        }
    }

    pub fn mode(&self, group: ParamGroup) -> f64 {
        match self.get(group) {
            Some(p) => p.mode(),
            None => match group {
                ParamGroup::Correlation => 0.5,
                ParamGroup::Noise => 1e-2,
                _ => 1.0,
            },
        }
    }
}

#[inline]
pub fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u
    } else {
        u.exp().ln_1p()
    }
}

#[inline]
pub fn inv_softplus(v: f64) -> f64 {
    if v > 30.0 {
        v
    } else {
        v.exp_m1().max(f64::MIN_POSITIVE).ln()
    }
}

/// Unconstrained scalar to a strictly positive value.
#[inline]
pub fn to_positive(u: f64) -> f64 {
    softplus(u) + POSITIVE_JITTER
}

#[inline]
pub fn from_positive(v: f64) -> f64 {
    inv_softplus((v - POSITIVE_JITTER).max(1e-300))
}

#[inline]
pub fn to_noise(u: f64) -> f64 {
    NOISE_FLOOR + softplus(u)
}

#[inline]
pub fn from_noise(v: f64) -> f64 {
    inv_softplus((v - NOISE_FLOOR).max(1e-300))
}

#[inline]
pub fn to_unit(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

#[inline]
pub fn from_unit(v: f64) -> f64 {
    let v = v.clamp(1e-12, 1.0 - 1e-12);
    (v / (1.0 - v)).ln()
}
