//! Synthetic binary-classification problems with an analytically known
//! regression function.
//!
//! Each family declares the constants it claims to satisfy: a smoothness
//! pair `(alpha, smooth_l)` bounding |eta(x) - eta(z)| by
//! `smooth_l * mass(open ball)^{alpha/d}`, and a margin-noise pair
//! `(beta, margin_c)` bounding the mass near the decision boundary by
//! `margin_c * eps^beta`. The verifiers in [`verify`] test those claims by
//! Monte Carlo; the built-in families are expected to pass their own
//! declarations, deliberately-wrong fixtures to fail.

mod verify;

pub use verify::{
    theorem1_constant, verify_holder, verify_margin_noise, verify_smoothness, verify_theorem1,
    AssumptionId, AssumptionReport, CheckRecord, DEFAULT_SLACK_SIGMA,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::geometry::{Point, Pool};
use crate::{Label, Result};

/// Standard normal CDF.
fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// The distribution families built into the crate.
#[derive(Debug, Clone, PartialEq)]
enum FamilyKind {
    /// Uniform on [0,1], eta(x) = x.
    Linear1d,
    /// Uniform on [0,1]^d, eta = 1/2 + sign(x1 - 1/2) |2 x1 - 1|^kappa / 2.
    PowerMargin { kappa: f64 },
    /// Standard normal marginal, eta = normal CDF. The support has infinite
    /// Lebesgue measure, so no density floor exists.
    Gaussian1d,
    /// Uniform on [0,1]^d, constant eta.
    Constant { eta: f64 },
    /// Uniform on [0,1], eta = 1 at x >= 1/2 else 0. A fixture whose
    /// discontinuity violates any smoothness claim.
    Step1d,
}

/// Hölder-continuity metadata: |eta(x) - eta(z)| <= l * dist^{alpha_h}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderMeta {
    pub alpha_h: f64,
    pub l: f64,
}

/// A synthetic problem: marginal sampler, analytic eta, declared constants.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    name: String,
    kind: FamilyKind,
    dim: usize,
    /// Smoothness exponent in (0, 1].
    pub alpha: f64,
    /// Smoothness constant, >= 1.
    pub smooth_l: f64,
    /// Margin-noise exponent, >= 0.
    pub beta: f64,
    /// Margin-noise constant, >= 1.
    pub margin_c: f64,
    /// Hölder metadata when the family is Hölder continuous.
    pub holder: Option<HolderMeta>,
    /// Lower bound on the marginal density over its support, when one exists.
    pub density_floor: Option<f64>,
}

impl ProblemSpec {
    /// Uniform marginal on [0,1] with eta(x) = x.
    pub fn linear_1d() -> Self {
        ProblemSpec {
            name: "linear-1d".into(),
            kind: FamilyKind::Linear1d,
            dim: 1,
            alpha: 1.0,
            smooth_l: 1.0,
            beta: 1.0,
            margin_c: 2.0,
            holder: Some(HolderMeta { alpha_h: 1.0, l: 1.0 }),
            density_floor: Some(1.0),
        }
    }

    /// Uniform marginal on [0,1]^d with a polynomial margin profile along
    /// the first coordinate; the margin exponent is 1/kappa.
    pub fn power_margin(kappa: f64, dim: usize) -> Result<Self> {
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(Error::invalid("power-margin requires kappa >= 1"));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let d = dim as f64;
        Ok(ProblemSpec {
            name: format!("power-margin:kappa={kappa}"),
            kind: FamilyKind::PowerMargin { kappa },
            dim,
            alpha: 1.0,
            // eta is kappa-Lipschitz and a ball of radius r centered in the
            // cube holds mass at least (min(r,1)/sqrt(d))^d.
            smooth_l: kappa * d.sqrt(),
            beta: 1.0 / kappa,
            margin_c: 2.0,
            holder: Some(HolderMeta { alpha_h: 1.0, l: kappa }),
            density_floor: Some(1.0),
        })
    }

    /// Standard normal marginal with eta the normal CDF: smooth in the
    /// ball-mass sense with constant 1 even though no density floor exists.
    pub fn gaussian_1d() -> Self {
        ProblemSpec {
            name: "gaussian-1d".into(),
            kind: FamilyKind::Gaussian1d,
            dim: 1,
            alpha: 1.0,
            smooth_l: 1.0,
            beta: 1.0,
            margin_c: 2.0,
            holder: Some(HolderMeta { alpha_h: 1.0, l: 0.4 }),
            density_floor: None,
        }
    }

    /// Constant eta over the uniform cube; mainly a test fixture.
    pub fn constant(eta: f64, dim: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid("constant eta must lie in [0, 1]"));
        }
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(ProblemSpec {
            name: format!("constant:eta={eta}"),
            kind: FamilyKind::Constant { eta },
            dim,
            alpha: 1.0,
            smooth_l: 1.0,
            beta: 1.0,
            margin_c: 2.0,
            holder: Some(HolderMeta { alpha_h: 1.0, l: 1.0 }),
            density_floor: Some(1.0),
        })
    }

    /// Discontinuous fixture: uniform on [0,1], eta jumps 0 -> 1 at 1/2.
    /// Declares smoothness constants it cannot satisfy.
    pub fn step_1d() -> Self {
        ProblemSpec {
            name: "step-1d".into(),
            kind: FamilyKind::Step1d,
            dim: 1,
            alpha: 1.0,
            smooth_l: 1.0,
            beta: 1.0,
            margin_c: 2.0,
            holder: None,
            density_floor: Some(1.0),
        }
    }

    /// Resolve a family from its CLI name, e.g. `linear-1d`,
    /// `power-margin:kappa=2`, `gaussian-1d`, `constant:eta=1`, `step-1d`.
    ///
    /// Trailing `key=value` parameters may also override the declared
    /// constants (`alpha`, `l`, `beta`, `c`), which is how deliberately
    /// wrong fixtures are expressed: `power-margin:kappa=2,beta=5`.
    pub fn parse(name: &str) -> Result<Self> {
        let (base, rest) = match name.split_once(':') {
            Some((b, r)) => (b, r),
            None => (name, ""),
        };
        let mut params = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed family parameter '{part}'")))?;
            let value: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("family parameter '{part}' is not a number")))?;
            params.insert(k.trim().to_string(), value);
        }

        let take = |params: &mut std::collections::BTreeMap<String, f64>, key: &str| {
            params.remove(key)
        };

        let mut spec = match base {
            "linear-1d" => ProblemSpec::linear_1d(),
            "gaussian-1d" => ProblemSpec::gaussian_1d(),
            "step-1d" => ProblemSpec::step_1d(),
            "power-margin" => {
                let kappa = take(&mut params, "kappa")
                    .ok_or_else(|| Error::invalid("power-margin requires kappa=<value>"))?;
                let dim = take(&mut params, "d").map(|d| d as usize).unwrap_or(1);
                ProblemSpec::power_margin(kappa, dim)?
            }
            "constant" => {
                let eta = take(&mut params, "eta")
                    .ok_or_else(|| Error::invalid("constant requires eta=<value>"))?;
                let dim = take(&mut params, "d").map(|d| d as usize).unwrap_or(1);
                ProblemSpec::constant(eta, dim)?
            }
            other => {
                return Err(Error::invalid(format!(
                    "unknown family '{other}' (known: linear-1d, power-margin, gaussian-1d, constant, step-1d)"
                )))
            }
        };

        if let Some(alpha) = take(&mut params, "alpha") {
            spec.alpha = alpha;
        }
        if let Some(l) = take(&mut params, "l") {
            spec.smooth_l = l;
        }
        if let Some(beta) = take(&mut params, "beta") {
            spec.beta = beta;
        }
        if let Some(c) = take(&mut params, "c") {
            spec.margin_c = c;
        }
        if let Some(key) = params.keys().next() {
            return Err(Error::invalid(format!(
                "unknown parameter '{key}' for family '{base}'"
            )));
        }
        spec.name = name.to_string();
        Ok(spec)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The regression function eta(x) = P(Y = 1 | X = x).
    pub fn eta(&self, x: &Point) -> f64 {
        debug_assert_eq!(x.dim(), self.dim);
        let c = x.coords();
        match &self.kind {
            FamilyKind::Linear1d => c[0].clamp(0.0, 1.0),
            FamilyKind::PowerMargin { kappa } => {
                let t = 2.0 * c[0].clamp(0.0, 1.0) - 1.0;
                0.5 + 0.5 * t.signum() * t.abs().powf(*kappa)
            }
            FamilyKind::Gaussian1d => normal_cdf(c[0]),
            FamilyKind::Constant { eta } => *eta,
            FamilyKind::Step1d => {
                if c[0] >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Bayes-optimal label: 1 iff eta(x) >= 1/2.
    pub fn bayes_label(&self, x: &Point) -> Label {
        if self.eta(x) >= 0.5 {
            1
        } else {
            0
        }
    }

    /// One draw from the marginal.
    pub fn sample_x<R: Rng>(&self, rng: &mut R) -> Point {
        match &self.kind {
            FamilyKind::Gaussian1d => Point::from_raw(vec![rng.sample(StandardNormal)]),
            _ => Point::from_raw((0..self.dim).map(|_| rng.random::<f64>()).collect()),
        }
    }

    /// `w` i.i.d. draws from the marginal; identical (spec, w, seed) gives
    /// identical pools.
    pub fn sample_pool(&self, w: usize, seed: u64) -> Result<Pool> {
        if w == 0 {
            return Err(Error::invalid("pool size must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Pool::new((0..w).map(|_| self.sample_x(&mut rng)).collect())
    }
}
