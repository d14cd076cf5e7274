//! Convergence-bound evaluator.
//!
//! Iterates
//!
//! ```text
//! B(t) = X(t−1) B(t−1) + Y(t−1),   B(0) = ‖θ_PS(0) − θ*‖²
//! X(a) = 1 − μ η(a) (τ − η(a)(τ − 1))
//! ```
//!
//! where `Y(a)` collects the aggregation-error terms (a fading-correction
//! double sum, interference and receiver noise) and the local-drift terms.
//! The loss bound is `(L/2) B(t)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedStreams};
use crate::trainer::LearningRate;

/// Which final fraction the fading-correction coefficient uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AVariant {
    /// `(Mα + 1)(K + 1) β₁β₂ / (MαK β̄²)`.
    Plus,
    /// `(2 + (Mα − 1)(K − 1)) β₁β₂ / (MαK β̄²)`.
    Minus,
}

impl fmt::Display for AVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AVariant::Plus => "plus",
            AVariant::Minus => "minus",
        })
    }
}

impl FromStr for AVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "plus" => Ok(AVariant::Plus),
            "minus" => Ok(AVariant::Minus),
            other => Err(Error::invalid("a_variant", format!("unknown variant `{other}`"))),
        }
    }
}

/// How sums over the participant set `S_a` are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParticipantStats {
    /// Plug in `|S_a| = Mα`: pair sums scale with `α²`, single sums with `α`.
    Expected,
    /// Draw `S_a` from Bernoulli(α) per iteration.
    Sampled { seed: u64 },
}

impl fmt::Display for ParticipantStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParticipantStats::Expected => f.write_str("expected"),
            ParticipantStats::Sampled { seed } => write!(f, "sampled:{seed}"),
        }
    }
}

impl FromStr for ParticipantStats {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "expected" {
            return Ok(ParticipantStats::Expected);
        }
        s.strip_prefix("sampled:")
            .and_then(|seed| seed.parse().ok())
            .map(|seed| ParticipantStats::Sampled { seed })
            .ok_or_else(|| Error::invalid("participants", format!("expected `expected` or `sampled:<seed>`, got `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundParams {
    pub devices: usize,
    pub antennas: usize,
    /// `N`, half the model dimension.
    pub symbols: usize,
    pub tau: usize,
    pub alpha: f64,
    /// Equal data ratio `p`.
    pub data_ratio: f64,
    pub gains: Vec<f64>,
    pub beta_bar: f64,
    pub fading_var: f64,
    pub noise_var: f64,
    /// `G²`.
    pub grad_sq: f64,
    pub smoothness: f64,
    pub mu: f64,
    pub gamma: f64,
    pub lr: LearningRate,
    pub initial_dist: f64,
    pub rounds: u64,
    pub variant: AVariant,
    pub stats: ParticipantStats,
    /// When false the interference and noise terms vanish and `A` loses its
    /// fading correction, giving the error-free bound.
    pub over_the_air: bool,
}

impl BoundParams {
    /// Large-model setting with unit gains and `K = M = 40`.
    pub fn large_model() -> Self {
        let devices = 40;
        Self {
            devices,
            antennas: devices,
            symbols: 153_749,
            tau: 1,
            alpha: 1.0,
            data_ratio: 1.0 / devices as f64,
            gains: vec![1.0; devices],
            beta_bar: 1.0,
            fading_var: 1.0,
            noise_var: 5.0,
            grad_sq: 1.0,
            smoothness: 10.0,
            mu: 1.0,
            gamma: 0.0,
            lr: LearningRate::Linear {
                initial: 1e-2,
                slope: 1e-6,
            },
            initial_dist: 1e3,
            rounds: 400,
            variant: AVariant::Plus,
            stats: ParticipantStats::Expected,
            over_the_air: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("devices", self.devices as f64),
            ("antennas", self.antennas as f64),
            ("tau", self.tau as f64),
            ("data_ratio", self.data_ratio),
            ("beta_bar", self.beta_bar),
            ("sigma_h2", self.fading_var),
            ("mu", self.mu),
            ("L", self.smoothness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        let non_negative = [
            ("sigma_z2", self.noise_var),
            ("G2", self.grad_sq),
            ("gamma", self.gamma),
            ("initial_dist", self.initial_dist),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        if !(self.alpha > 0.0) {
            return Err(Error::ZeroParticipationRate);
        }
        if self.alpha > 1.0 {
            return Err(Error::invalid("alpha", "must lie in (0, 1]"));
        }
        if self.gains.len() != self.devices {
            return Err(Error::DimensionMismatch {
                expected: self.devices,
                found: self.gains.len(),
            });
        }
        if self.gains.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::invalid("gains", "must be positive"));
        }
        self.lr.validate()
    }

    /// Largest admissible step, `min{1, 1/(τμ)}`.
    pub fn max_lr(&self) -> f64 {
        1f64.min(1.0 / (self.tau as f64 * self.mu))
    }

    pub fn lr_at(&self, a: u64) -> Result<f64> {
        let eta = self.lr.at(a);
        let max = self.max_lr();
        if !(0.0..=max).contains(&eta) {
            return Err(Error::LearningRateOutOfRange { lr: eta, max });
        }
        Ok(eta)
    }

    fn fraction(&self) -> f64 {
        let ma = self.devices as f64 * self.alpha;
        let k = self.antennas as f64;
        let numerator = match self.variant {
            AVariant::Plus => (ma + 1.0) * (k + 1.0),
            AVariant::Minus => 2.0 + (ma - 1.0) * (k - 1.0),
        };
        numerator / (ma * k)
    }
}

/// `X(a)`.
pub fn x_factor(params: &BoundParams, a: u64) -> Result<f64> {
    let eta = params.lr_at(a)?;
    let tau = params.tau as f64;
    Ok(1.0 - params.mu * eta * (tau - eta * (tau - 1.0)))
}

/// `A(m₁, m₂)` for the OTA bound.
pub fn a_coeff(params: &BoundParams, m1: usize, m2: usize, variant: AVariant) -> Result<f64> {
    if !(params.alpha > 0.0) {
        return Err(Error::ZeroParticipationRate);
    }
    let b1 = params.gains[m1] / params.beta_bar;
    let b2 = params.gains[m2] / params.beta_bar;
    let p = BoundParams {
        variant,
        ..params.clone()
    };
    Ok(1.0 - b1 - b2 + p.fraction() * b1 * b2)
}

/// The five summands of `Y(a)`; the aggregation-error part is split into
/// the `A` double sum, interference and noise.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct YTerms {
    pub a_sum: f64,
    pub interference: f64,
    pub noise: f64,
    pub drift: f64,
    pub variance: f64,
    pub bias: f64,
}

impl YTerms {
    pub fn total(&self) -> f64 {
        self.a_sum + self.interference + self.noise + self.drift + self.variance + self.bias
    }
}

/// Sums over a participant set of the normalised gains `b_m = β_m / β̄`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticipantSums {
    /// Weight of the all-pairs sum (`|S|²` or `(Mα)²`).
    pub pairs: f64,
    /// `Σ b_m` counted in all-pairs weighting.
    pub pair_b: f64,
    /// `(Σ b_m)²` counted in all-pairs weighting.
    pub pair_bb: f64,
    /// `Σ_{m ≠ m'} b_m b_m'`.
    pub off_diagonal_bb: f64,
    /// `Σ b_m`.
    pub single_b: f64,
}

impl ParticipantSums {
    pub fn of_set(params: &BoundParams, set: &[usize]) -> Self {
        let n = set.len() as f64;
        let b: f64 = set.iter().map(|&m| params.gains[m] / params.beta_bar).sum();
        let b2: f64 = set.iter().map(|&m| (params.gains[m] / params.beta_bar).powi(2)).sum();
        Self {
            pairs: n * n,
            pair_b: n * b,
            pair_bb: b * b,
            off_diagonal_bb: b * b - b2,
            single_b: b,
        }
    }

    pub fn expected(params: &BoundParams) -> Self {
        let a = params.alpha;
        let m = params.devices as f64;
        let b: f64 = params.gains.iter().map(|g| g / params.beta_bar).sum();
        let b2: f64 = params.gains.iter().map(|g| (g / params.beta_bar).powi(2)).sum();
        Self {
            pairs: a * a * m * m,
            pair_b: a * a * m * b,
            pair_bb: a * a * b * b,
            off_diagonal_bb: (a * a * b * b - a * b2).max(0.0),
            single_b: a * b,
        }
    }
}

/// `Y(a)` given the participant sums for iteration `a`.
pub fn y_term(params: &BoundParams, a: u64, sums: &ParticipantSums) -> Result<YTerms> {
    let eta = params.lr_at(a)?;
    let tau = params.tau as f64;
    let g2 = params.grad_sq;
    let step = tau * tau * g2 * eta * eta;
    // Σ_{m₁,m₂} (1 − b₁ − b₂ + F b₁ b₂) = pairs − 2 pair_b + F pair_bb
    let fraction = if params.over_the_air { params.fraction() } else { 1.0 };
    let a_sum = sums.pairs - 2.0 * sums.pair_b + fraction * sums.pair_bb;
    let (interference, noise) = if params.over_the_air {
        let k = params.antennas as f64;
        (
            step * sums.off_diagonal_bb / k,
            params.noise_var * params.symbols as f64
                / (params.data_ratio.powi(2) * k * params.fading_var)
                * sums.single_b
                / params.beta_bar,
        )
    } else {
        (0.0, 0.0)
    };
    Ok(YTerms {
        a_sum: step * a_sum,
        interference,
        noise,
        drift: (1.0 + params.mu * (1.0 - eta)) * eta * eta * g2 * tau * (tau - 1.0) * (2.0 * tau - 1.0) / 6.0,
        variance: eta * eta * (tau * tau + tau - 1.0) * g2,
        bias: 2.0 * eta * (tau - 1.0) * params.gamma,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundRow {
    pub t: u64,
    /// `X(t)`, the factor applied to reach `t + 1`.
    pub x: f64,
    pub y: YTerms,
    /// Bound on `E‖θ_PS(t) − θ*‖²`.
    pub dist: f64,
    /// `(L/2)` times `dist`.
    pub loss: f64,
}

/// Rows `t = 0..=T`. Bound values are clamped at zero.
pub fn bound_trace(params: &BoundParams) -> Result<Vec<BoundRow>> {
    params.validate()?;
    let streams = match params.stats {
        ParticipantStats::Sampled { seed } => Some(SeedStreams::new(seed)),
        ParticipantStats::Expected => None,
    };
    let expected = ParticipantSums::expected(params);
    let mut dist = params.initial_dist;
    let mut rows = Vec::with_capacity(params.rounds as usize + 1);
    for t in 0..=params.rounds {
        let sums = match &streams {
            None => expected,
            Some(s) => {
                let set: Vec<usize> = (0..params.devices)
                    .filter(|&m| s.stream(Purpose::Participation, m as u64, t).random::<f64>() < params.alpha)
                    .collect();
                ParticipantSums::of_set(params, &set)
            }
        };
        let x = x_factor(params, t)?;
        let y = y_term(params, t, &sums)?;
        rows.push(BoundRow {
            t,
            x,
            y,
            dist,
            loss: 0.5 * params.smoothness * dist,
        });
        dist = (x * dist + y.total()).max(0.0);
    }
    Ok(rows)
}

/// The three curves compared side by side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundScenario {
    Conventional,
    EhErrorFree,
    EhOta,
}

impl BoundScenario {
    pub const ALL: [BoundScenario; 3] = [
        BoundScenario::Conventional,
        BoundScenario::EhErrorFree,
        BoundScenario::EhOta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundScenario::Conventional => "conventional",
            BoundScenario::EhErrorFree => "eh_error_free",
            BoundScenario::EhOta => "eh_ota",
        }
    }

    /// Conventional training has every device every round and no channel;
    /// the harvesting curves use participation rate `eh_alpha`.
    pub fn apply(self, base: &BoundParams, eh_alpha: f64) -> BoundParams {
        let (alpha, over_the_air) = match self {
            BoundScenario::Conventional => (1.0, false),
            BoundScenario::EhErrorFree => (eh_alpha, false),
            BoundScenario::EhOta => (eh_alpha, true),
        };
        BoundParams {
            alpha,
            over_the_air,
            ..base.clone()
        }
    }
}

impl fmt::Display for BoundScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn constant_lr(params: &BoundParams) -> Result<f64> {
    match params.lr {
        LearningRate::Constant(eta) => {
            params.lr_at(0)?;
            Ok(eta)
        }
        _ => Err(Error::invalid("lr", "closed forms need a constant learning rate")),
    }
}

fn stationary_numerator(params: &BoundParams, eta: f64) -> f64 {
    2.0 * eta * eta * params.grad_sq
        + params.noise_var * params.symbols as f64
            / (params.data_ratio.powi(2) * params.antennas as f64 * params.fading_var)
}

/// Closed-form loss bound after `t` iterations for `τ = 1`, unit gains and
/// a constant step.
pub fn closed_form_loss(params: &BoundParams, t: u64) -> Result<f64> {
    let eta = constant_lr(params)?;
    let l = params.smoothness;
    let mu = params.mu;
    let decay = (1.0 - mu * eta).powf(t as f64);
    Ok(0.5 * l * decay * params.initial_dist
        + l / (2.0 * mu * eta) * stationary_numerator(params, eta) * (1.0 - decay))
}

/// `lim_{T→∞}` of [`closed_form_loss`].
pub fn asymptotic_floor(params: &BoundParams) -> Result<f64> {
    let eta = constant_lr(params)?;
    if eta == 0.0 {
        return Err(Error::invalid("lr", "the floor needs a positive step"));
    }
    Ok(params.smoothness / (2.0 * params.mu * eta) * stationary_numerator(params, eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3_constant(eta: f64) -> BoundParams {
        BoundParams {
            lr: LearningRate::Constant(eta),
            ..BoundParams::large_model()
        }
    }

    #[test]
    fn x_factor_examples() {
        let mut p = fig3_constant(0.0);
        assert_eq!(x_factor(&p, 0).unwrap(), 1.0);
        p.lr = LearningRate::Constant(0.3);
        assert!((x_factor(&p, 5).unwrap() - 0.7).abs() < 1e-15);
        p.tau = 3;
        p.lr = LearningRate::Constant(0.01);
        assert!((x_factor(&p, 0).unwrap() - 0.9702).abs() < 1e-15);
        p.lr = LearningRate::Constant(0.5);
        assert!(matches!(x_factor(&p, 0), Err(Error::LearningRateOutOfRange { .. })));
    }

    #[test]
    fn a_coeff_examples() {
        let p = BoundParams::large_model();
        let t1 = a_coeff(&p, 0, 1, AVariant::Plus).unwrap();
        let l4 = a_coeff(&p, 0, 1, AVariant::Minus).unwrap();
        assert!((t1 - (-1.0 + 41.0 * 41.0 / 1600.0)).abs() < 1e-15);
        assert!((t1 - 0.050625).abs() < 1e-15);
        assert!((l4 - (-1.0 + (2.0 + 39.0 * 39.0) / 1600.0)).abs() < 1e-15);
        assert!((l4 + 0.048125).abs() < 1e-15);

        let zero = BoundParams { alpha: 0.0, ..p.clone() };
        assert!(matches!(a_coeff(&zero, 0, 0, AVariant::Plus), Err(Error::ZeroParticipationRate)));

        let mut big = BoundParams { antennas: 1 << 30, devices: 1 << 20, ..p };
        big.gains = vec![0.5, 2.0];
        for v in [AVariant::Plus, AVariant::Minus] {
            let a = a_coeff(&big, 0, 1, v).unwrap();
            assert!((a - (1.0 - 0.5 - 2.0 + 1.0)).abs() < 1e-5);
        }
    }

    #[test]
    fn y_term_small_cases() {
        let mut p = fig3_constant(0.05);
        p.gamma = 3.0;
        let y = y_term(&p, 0, &ParticipantSums::expected(&p)).unwrap();
        assert_eq!((y.drift, y.bias), (0.0, 0.0));

        p.noise_var = 0.0;
        p.grad_sq = 0.0;
        p.tau = 2;
        p.gamma = 0.0;
        assert_eq!(y_term(&p, 0, &ParticipantSums::expected(&p)).unwrap().total(), 0.0);
    }

    #[test]
    fn y_term_large_model_golden_value() {
        // Scalar evaluation of the five summands at η = 0.01, α = 1.
        let p = fig3_constant(0.01);
        let y = y_term(&p, 0, &ParticipantSums::expected(&p)).unwrap();
        assert!((y.a_sum - 0.0081).abs() < 1e-15);
        assert!((y.interference - 0.0039).abs() < 1e-15);
        assert!((y.noise - 1_229_992_000.0).abs() < 1e-12 * 1.23e9);
        assert!((y.variance - 1e-4).abs() < 1e-18);
        assert!((y.total() - 1_229_992_000.012_1).abs() < 1e-3);
    }

    #[test]
    fn closed_form_sums_match_explicit_double_sums() {
        let mut p = BoundParams::large_model();
        p.devices = 6;
        p.gains = vec![0.3, 1.2, 2.5, 0.9, 1.0, 4.0];
        p.beta_bar = 1.4;
        p.alpha = 0.5;
        let set = [0, 2, 3, 5];
        let s = ParticipantSums::of_set(&p, &set);
        let mut a_sum = 0.0;
        let mut off = 0.0;
        for &i in &set {
            for &j in &set {
                a_sum += a_coeff(&p, i, j, AVariant::Plus).unwrap();
                if i != j {
                    off += p.gains[i] * p.gains[j] / p.beta_bar.powi(2);
                }
            }
        }
        let fr = p.fraction();
        assert!((s.pairs - 2.0 * s.pair_b + fr * s.pair_bb - a_sum).abs() < 1e-12);
        assert!((s.off_diagonal_bb - off).abs() < 1e-12);
    }

    #[test]
    fn zero_y_gives_geometric_decay() {
        let mut p = fig3_constant(0.02);
        p.noise_var = 0.0;
        p.grad_sq = 0.0;
        p.rounds = 50;
        let trace = bound_trace(&p).unwrap();
        for r in &trace {
            let want = 0.98f64.powi(r.t as i32) * 1e3;
            assert!((r.dist - want).abs() < 1e-10 * want);
        }
    }

    #[test]
    fn recursion_matches_product_form() {
        let mut p = BoundParams::large_model();
        p.rounds = 1000;
        p.tau = 3;
        p.gamma = 0.5;
        p.lr = LearningRate::Linear { initial: 0.2, slope: 1.5e-4 };
        p.alpha = 0.3;
        let trace = bound_trace(&p).unwrap();
        let xs: Vec<f64> = trace.iter().map(|r| r.x).collect();
        let ys: Vec<f64> = trace.iter().map(|r| r.y.total()).collect();
        for t in [1usize, 2, 10, 250, 1000] {
            let prod = |from: usize| xs[from..t].iter().product::<f64>();
            let want = prod(0) * p.initial_dist + (0..t).map(|b| ys[b] * prod(b + 1)).sum::<f64>();
            assert!((trace[t].dist - want).abs() <= 1e-10 * want);
        }
    }

    #[test]
    fn bound_monotone_in_parameters() {
        let base = BoundParams { rounds: 100, ..fig3_constant(0.01) };
        let at_end = |p: &BoundParams| bound_trace(p).unwrap().last().unwrap().loss;
        let b0 = at_end(&base);
        assert!(at_end(&BoundParams { antennas: 80, ..base.clone() }) <= b0);
        assert!(at_end(&BoundParams { noise_var: 10.0, ..base.clone() }) >= b0);
        assert!(at_end(&BoundParams { symbols: 200_000, ..base.clone() }) >= b0);
        assert!(at_end(&BoundParams { grad_sq: 2.0, ..base.clone() }) >= b0);
    }

    #[test]
    fn floor_examples() {
        let p = fig3_constant(0.01);
        let f = asymptotic_floor(&p).unwrap();
        let want = 10.0 / 0.02 * (2e-4 + 5.0 * 153_749.0 * 1600.0 / 40.0);
        assert!((f - want).abs() < 1e-6 * want);
        let f2 = asymptotic_floor(&BoundParams { antennas: 80, ..p.clone() }).unwrap();
        assert!(f2 < f);
        let quiet = BoundParams { noise_var: 0.0, grad_sq: 0.0, ..p };
        assert_eq!(asymptotic_floor(&quiet).unwrap(), 0.0);
        assert!(asymptotic_floor(&BoundParams::large_model()).is_err());
    }

    #[test]
    fn sampled_participants_are_deterministic() {
        let p = BoundParams {
            alpha: 0.25,
            stats: ParticipantStats::Sampled { seed: 3 },
            rounds: 40,
            ..BoundParams::large_model()
        };
        assert_eq!(bound_trace(&p).unwrap(), bound_trace(&p).unwrap());
    }
}
