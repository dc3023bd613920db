//! Concrete distributions obtained by substituting parent values into an
//! expression. All interval masses come from closed-form CDFs.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::Distribution as _;
use statrs::function::{beta, erf, gamma};
use thiserror::Error;

use super::ast::DistKind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParameterDomainError {
    #[error("{dist}: {message}")]
    Invalid { dist: &'static str, message: String },
    #[error("TNormal truncation to [{lo}, {hi}] leaves no mass (mean {mean}, variance {variance})")]
    DegenerateTruncation { mean: f64, variance: f64, lo: f64, hi: f64 },
}

fn invalid(dist: &'static str, message: impl Into<String>) -> ParameterDomainError {
    ParameterDomainError::Invalid { dist, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    Point(f64),
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, variance: f64 },
    TNormal(TruncatedNormal),
    Binomial { n: u64, p: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / SQRT_2)
}

/// Standard normal upper tail `1 - Phi(z)`.
pub fn std_normal_sf(z: f64) -> f64 {
    0.5 * erf::erfc(z / SQRT_2)
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_inv_cdf(u: f64) -> f64 {
    -SQRT_2 * erf::erfc_inv(2.0 * u)
}

/// `Phi(zb) - Phi(za)` evaluated on whichever tail keeps precision.
fn std_normal_mass(za: f64, zb: f64) -> f64 {
    if za >= zb {
        return 0.0;
    }
    if za > 0.0 {
        (std_normal_sf(za) - std_normal_sf(zb)).max(0.0)
    } else if zb < 0.0 {
        (std_normal_cdf(zb) - std_normal_cdf(za)).max(0.0)
    } else {
        (1.0 - std_normal_cdf(za) - std_normal_sf(zb)).max(0.0)
    }
}

/// Normal distribution restricted to `[lo, hi]`, parameterized by the
/// untruncated mean and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mu: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
    /// Untruncated normal mass inside `[lo, hi]`.
    pub z: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, variance: f64, lo: f64, hi: f64) -> Result<Self, ParameterDomainError> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(invalid("TNormal", format!("variance must be positive, got {variance}")));
        }
        if !(lo < hi) {
            return Err(invalid("TNormal", format!("bounds must satisfy lo < hi, got [{lo}, {hi}]")));
        }
        let sigma = variance.sqrt();
        let z = std_normal_mass((lo - mean) / sigma, (hi - mean) / sigma);
        if z < 1e-300 {
            return Err(ParameterDomainError::DegenerateTruncation { mean, variance, lo, hi });
        }
        Ok(Self { mu: mean, sigma, lo, hi, z })
    }

    fn alpha_beta(&self) -> (f64, f64) {
        ((self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma)
    }

    /// Truncated mean, `mu + sigma (phi(a) - phi(b)) / Z`.
    pub fn mean(&self) -> f64 {
        let (a, b) = self.alpha_beta();
        let m = self.mu + self.sigma * (pdf_or_zero(a) - pdf_or_zero(b)) / self.z;
        m.clamp(self.lo, self.hi)
    }

    pub fn variance(&self) -> f64 {
        let (a, b) = self.alpha_beta();
        let (pa, pb) = (pdf_or_zero(a), pdf_or_zero(b));
        let ta = if a.is_finite() { a * pa } else { 0.0 };
        let tb = if b.is_finite() { b * pb } else { 0.0 };
        let r = (pa - pb) / self.z;
        (self.sigma * self.sigma * (1.0 + (ta - tb) / self.z - r * r)).max(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        self.mass(self.lo, x)
    }

    /// Mass of `[a, b)` after truncation.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let a = a.max(self.lo);
        let b = b.min(self.hi);
        if a >= b {
            return 0.0;
        }
        (std_normal_mass((a - self.mu) / self.sigma, (b - self.mu) / self.sigma) / self.z).min(1.0)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - (self.sigma * (2.0 * PI).sqrt()).ln() - self.z.ln()
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> f64 {
        if self.z > 0.25 {
            loop {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                let x = self.mu + self.sigma * z;
                if x >= self.lo && x <= self.hi {
                    return x;
                }
            }
        }
        // Inverse CDF on the lower tail; mirror when the window sits above the mean.
        let (a, b) = self.alpha_beta();
        let (a, b, flip) = if a > 0.0 { (-b, -a, true) } else { (a, b, false) };
        let (ua, ub) = (std_normal_cdf(a), std_normal_cdf(b));
        let u = ua + (ub - ua) * rng.random::<f64>();
        let z = std_normal_inv_cdf(u).clamp(a, b);
        let z = if flip { -z } else { z };
        (self.mu + self.sigma * z).clamp(self.lo, self.hi)
    }
}

fn pdf_or_zero(z: f64) -> f64 {
    if z.is_finite() {
        std_normal_pdf(z)
    } else {
        0.0
    }
}

/// Closed-form moments and CDF of `TNormal(mean, variance, lo, hi)`.
pub fn tnormal_moments(mean: f64, variance: f64, lo: f64, hi: f64) -> Result<TruncatedNormal, ParameterDomainError> {
    TruncatedNormal::new(mean, variance, lo, hi)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    gamma::ln_gamma(n as f64 + 1.0) - gamma::ln_gamma(k as f64 + 1.0) - gamma::ln_gamma((n - k) as f64 + 1.0)
}

impl Distribution {
    /// Builds a distribution from evaluated parameters, checking domains.
    /// Binomial `n` is floored; zero-variance normals collapse to points.
    pub fn from_params(kind: DistKind, p: &[f64]) -> Result<Self, ParameterDomainError> {
        if let Some(bad) = p.iter().find(|x| x.is_nan()) {
            return Err(invalid(kind.name(), format!("parameter is {bad}")));
        }
        match kind {
            DistKind::Arithmetic => Ok(Distribution::Point(p[0])),
            DistKind::Uniform => {
                if !(p[0] < p[1]) || !p[0].is_finite() || !p[1].is_finite() {
                    return Err(invalid("Uniform", format!("need finite lo < hi, got ({}, {})", p[0], p[1])));
                }
                Ok(Distribution::Uniform { lo: p[0], hi: p[1] })
            }
            DistKind::Normal => {
                if p[1] < 0.0 || !p[1].is_finite() {
                    return Err(invalid("Normal", format!("variance must be >= 0, got {}", p[1])));
                }
                if p[1] == 0.0 {
                    return Ok(Distribution::Point(p[0]));
                }
                Ok(Distribution::Normal { mean: p[0], variance: p[1] })
            }
            DistKind::TNormal => {
                if p[1] < 0.0 {
                    return Err(invalid("TNormal", format!("variance must be >= 0, got {}", p[1])));
                }
                if !(p[2] < p[3]) {
                    return Err(invalid("TNormal", format!("bounds must satisfy lo < hi, got [{}, {}]", p[2], p[3])));
                }
                if p[1] == 0.0 {
                    return Ok(Distribution::Point(p[0].clamp(p[2], p[3])));
                }
                Ok(Distribution::TNormal(TruncatedNormal::new(p[0], p[1], p[2], p[3])?))
            }
            DistKind::Binomial => {
                let n = p[0];
                if !(n >= 0.0) || !n.is_finite() {
                    return Err(invalid("Binomial", format!("n must be a nonnegative integer, got {n}")));
                }
                let mut prob = p[1];
                if !(-1e-12..=1.0 + 1e-12).contains(&prob) {
                    return Err(invalid("Binomial", format!("p must lie in [0, 1], got {prob}")));
                }
                prob = prob.clamp(0.0, 1.0);
                Ok(Distribution::Binomial { n: n.floor() as u64, p: prob })
            }
            DistKind::Exponential => {
                if !(p[0] > 0.0) || !p[0].is_finite() {
                    return Err(invalid("Exponential", format!("rate must be > 0, got {}", p[0])));
                }
                Ok(Distribution::Exponential { rate: p[0] })
            }
            DistKind::Gamma => {
                if !(p[0] > 0.0 && p[1] > 0.0) || !p[0].is_finite() || !p[1].is_finite() {
                    return Err(invalid("Gamma", format!("shape and rate must be > 0, got ({}, {})", p[0], p[1])));
                }
                Ok(Distribution::Gamma { shape: p[0], rate: p[1] })
            }
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Distribution::Point(_))
    }

    pub fn is_integer_valued(&self) -> bool {
        matches!(self, Distribution::Binomial { .. })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Point(v) => v,
            Distribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution::Normal { mean, .. } => mean,
            Distribution::TNormal(t) => t.mean(),
            Distribution::Binomial { n, p } => n as f64 * p,
            Distribution::Exponential { rate } => 1.0 / rate,
            Distribution::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Point(_) => 0.0,
            Distribution::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Distribution::Normal { variance, .. } => variance,
            Distribution::TNormal(t) => t.variance(),
            Distribution::Binomial { n, p } => n as f64 * p * (1.0 - p),
            Distribution::Exponential { rate } => 1.0 / (rate * rate),
            Distribution::Gamma { shape, rate } => shape / (rate * rate),
        }
    }

    fn binomial_ln_pmf(n: u64, p: f64, k: u64) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        if p == 0.0 {
            return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        if p == 1.0 {
            return if k == n { 0.0 } else { f64::NEG_INFINITY };
        }
        ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
    }

    /// `P(X <= k)`.
    fn binomial_cdf(n: u64, p: f64, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let k = k as u64;
        if k >= n {
            return 1.0;
        }
        if p == 0.0 {
            return 1.0;
        }
        if p == 1.0 {
            return 0.0;
        }
        beta::beta_reg((n - k) as f64, k as f64 + 1.0, 1.0 - p)
    }

    /// `P(X > k)`.
    fn binomial_sf(n: u64, p: f64, k: i64) -> f64 {
        if k < 0 {
            return 1.0;
        }
        let k = k as u64;
        if k >= n {
            return 0.0;
        }
        if p == 0.0 {
            return 0.0;
        }
        if p == 1.0 {
            return 1.0;
        }
        beta::beta_reg(k as f64 + 1.0, (n - k) as f64, p)
    }

    /// Interval mass. Continuous families: `P(a <= X < b)`. Binomial:
    /// `P(ceil(a) <= X <= floor(b))`. Point masses: indicator of
    /// `a <= v < b`, or `v == a` when `a == b`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        match *self {
            Distribution::Point(v) => {
                if (a <= v && v < b) || (a == b && v == a) {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::Uniform { lo, hi } => {
                let l = a.max(lo);
                let h = b.min(hi);
                if h > l {
                    (h - l) / (hi - lo)
                } else {
                    0.0
                }
            }
            Distribution::Normal { mean, variance } => {
                let s = variance.sqrt();
                std_normal_mass((a - mean) / s, (b - mean) / s)
            }
            Distribution::TNormal(t) => t.mass(a, b),
            Distribution::Binomial { n, p } => {
                let lo = a.ceil().max(0.0);
                let hi = b.floor().min(n as f64);
                if lo > hi {
                    return 0.0;
                }
                let (lo, hi) = (lo as u64, hi as u64);
                if hi - lo < 64 {
                    return (lo..=hi).map(|k| Self::binomial_ln_pmf(n, p, k).exp()).sum::<f64>().min(1.0);
                }
                let m = if lo as f64 > n as f64 * p {
                    Self::binomial_sf(n, p, lo as i64 - 1) - Self::binomial_sf(n, p, hi as i64)
                } else {
                    Self::binomial_cdf(n, p, hi as i64) - Self::binomial_cdf(n, p, lo as i64 - 1)
                };
                m.clamp(0.0, 1.0)
            }
            Distribution::Exponential { rate } => {
                let a = a.max(0.0);
                if b <= a {
                    return 0.0;
                }
                (-rate * a).exp() * -(-rate * (b - a)).exp_m1()
            }
            Distribution::Gamma { shape, rate } => {
                let a = a.max(0.0);
                if b <= a {
                    return 0.0;
                }
                let m = if a * rate > shape {
                    gamma::gamma_ur(shape, a * rate) - if b.is_finite() { gamma::gamma_ur(shape, b * rate) } else { 0.0 }
                } else {
                    let upper = if b.is_finite() { gamma::gamma_lr(shape, b * rate) } else { 1.0 };
                    upper - if a > 0.0 { gamma::gamma_lr(shape, a * rate) } else { 0.0 }
                };
                m.clamp(0.0, 1.0)
            }
        }
    }

    /// Range outside which the distribution has negligible mass
    /// (well below 1e-20).
    pub fn effective_range(&self) -> [f64; 2] {
        match *self {
            Distribution::Point(v) => [v, v],
            Distribution::Uniform { lo, hi } => [lo, hi],
            Distribution::Normal { mean, variance } => {
                let s = variance.sqrt();
                [mean - 10.0 * s, mean + 10.0 * s]
            }
            Distribution::TNormal(t) => {
                let r = [t.lo.max(t.mu - 10.0 * t.sigma), t.hi.min(t.mu + 10.0 * t.sigma)];
                if r[0] < r[1] {
                    r
                } else {
                    [t.lo, t.hi]
                }
            }
            Distribution::Binomial { n, p } => {
                let m = n as f64 * p;
                let w = 12.0 * (m * (1.0 - p)).sqrt() + 5.0;
                [(m - w).floor().max(0.0), (m + w).ceil().min(n as f64)]
            }
            Distribution::Exponential { rate } => [0.0, 50.0 / rate],
            Distribution::Gamma { shape, rate } => [0.0, (shape + 15.0 * shape.sqrt() + 30.0) / rate],
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Point(v) => {
                if x >= v {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::Binomial { n, p } => Self::binomial_cdf(n, p, x.floor() as i64),
            Distribution::TNormal(t) => t.cdf(x),
            _ => self.mass(f64::NEG_INFINITY, x),
        }
    }

    /// Log density (continuous families) or log pmf (Binomial). Point
    /// masses give 0 at their value and -inf elsewhere.
    pub fn ln_density(&self, x: f64) -> f64 {
        match *self {
            Distribution::Point(v) => {
                if (x - v).abs() <= 1e-9 * v.abs().max(1.0) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Distribution::Normal { mean, variance } => {
                -0.5 * (x - mean).powi(2) / variance - 0.5 * (2.0 * PI * variance).ln()
            }
            Distribution::TNormal(t) => t.ln_pdf(x),
            Distribution::Binomial { n, p } => {
                if x < 0.0 || x.fract() != 0.0 {
                    f64::NEG_INFINITY
                } else {
                    Self::binomial_ln_pmf(n, p, x as u64)
                }
            }
            Distribution::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Distribution::Gamma { shape, rate } => {
                if x < 0.0 || (x == 0.0 && shape != 1.0) {
                    if x == 0.0 && shape < 1.0 {
                        return f64::INFINITY;
                    }
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - gamma::ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> f64 {
        match *self {
            Distribution::Point(v) => v,
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Distribution::Normal { mean, variance } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                mean + variance.sqrt() * z
            }
            Distribution::TNormal(t) => t.sample(rng),
            Distribution::Binomial { n, p } => {
                if p == 0.0 || n == 0 {
                    0.0
                } else if p == 1.0 {
                    n as f64
                } else {
                    rand_distr::Binomial::new(n, p).expect("validated parameters").sample(rng) as f64
                }
            }
            Distribution::Exponential { rate } => rand_distr::Exp::new(rate).expect("validated parameters").sample(rng),
            Distribution::Gamma { shape, rate } => {
                rand_distr::Gamma::new(shape, 1.0 / rate).expect("validated parameters").sample(rng)
            }
        }
    }

    /// Draws from the distribution conditioned on `[a, b]` by inverting
    /// the CDF numerically.
    pub fn sample_within<G: Rng + ?Sized>(&self, a: f64, b: f64, rng: &mut G) -> f64 {
        if let Distribution::Point(v) = *self {
            return v.clamp(a, b);
        }
        if let Distribution::Binomial { .. } = self {
            let lo = a.ceil();
            let hi = b.floor();
            let total = self.mass(lo, hi);
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut k = lo;
            while k < hi {
                acc += self.mass(k, k);
                if acc >= target {
                    return k;
                }
                k += 1.0;
            }
            return hi;
        }
        let total = self.mass(a, b);
        let target = rng.random::<f64>() * total;
        let (mut l, mut h) = (a, b);
        for _ in 0..200 {
            let mid = 0.5 * (l + h);
            if mid <= l || mid >= h {
                break;
            }
            if self.mass(a, mid) < target {
                l = mid;
            } else {
                h = mid;
            }
        }
        0.5 * (l + h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Composite Simpson quadrature, used as an independent check.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn tnormal_low_mean_matches_mills_ratio() {
        let t = tnormal_moments(0.01, 0.001, 0.0, 1.0).unwrap();
        // mu + sigma phi(alpha) / (1 - Phi(alpha)), alpha = -0.01 / sqrt(0.001)
        let s = 0.001f64.sqrt();
        let alpha = -0.01 / s;
        let phi = (-0.5 * alpha * alpha).exp() / (2.0 * PI).sqrt();
        let oracle = 0.01 + s * phi / (1.0 - 0.5 * erf::erfc(-alpha / SQRT_2));
        assert!((t.mean() - oracle).abs() < 1e-9);
        assert!((t.mean() - 0.0292).abs() < 5e-4, "{}", t.mean());
    }

    #[test]
    fn tnormal_symmetric_mean() {
        let t = tnormal_moments(0.5, 0.001, 0.0, 1.0).unwrap();
        assert!((t.mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tnormal_top_state_mass() {
        let t = tnormal_moments(1.0, 0.001, 0.0, 1.0).unwrap();
        assert!(t.mass(0.8, 1.0) >= 0.97);
    }

    #[test]
    fn tnormal_moments_agree_with_quadrature() {
        for &(m, v, lo, hi) in &[(0.01, 0.001, 0.0, 1.0), (0.3, 0.01, 0.0, 1.0), (100.0, 250.0, 0.0, 160.0), (2.0, 1.0, -1.0, 0.5)] {
            let t = tnormal_moments(m, v, lo, hi).unwrap();
            let pdf = |x: f64| t.ln_pdf(x).exp();
            let z0 = simpson(pdf, lo, hi, 20_000);
            let m1 = simpson(|x| x * pdf(x), lo, hi, 20_000);
            let m2 = simpson(|x| (x - m1).powi(2) * pdf(x), lo, hi, 20_000);
            assert!((z0 - 1.0).abs() < 1e-8);
            assert!(((t.mean() - m1) / m1).abs() < 1e-6, "mean {m} {v}");
            assert!(((t.variance() - m2) / m2).abs() < 1e-6, "var {m} {v}");
        }
    }

    #[test]
    fn degenerate_truncation() {
        assert!(matches!(
            TruncatedNormal::new(0.0, 1e-4, 50.0, 60.0),
            Err(ParameterDomainError::DegenerateTruncation { .. })
        ));
    }

    #[test]
    fn parameter_domains() {
        assert!(Distribution::from_params(DistKind::Exponential, &[0.0]).is_err());
        assert!(Distribution::from_params(DistKind::Binomial, &[10.0, 1.5]).is_err());
        assert!(Distribution::from_params(DistKind::Uniform, &[1.0, 1.0]).is_err());
        assert!(Distribution::from_params(DistKind::Normal, &[0.0, -1.0]).is_err());
        assert_eq!(
            Distribution::from_params(DistKind::Binomial, &[10.7, 0.5]).unwrap(),
            Distribution::Binomial { n: 10, p: 0.5 }
        );
        assert_eq!(Distribution::from_params(DistKind::Normal, &[3.0, 0.0]).unwrap(), Distribution::Point(3.0));
    }

    #[test]
    fn binomial_tail_masses_use_both_routes_consistently() {
        let d = Distribution::Binomial { n: 100_000, p: 0.015 };
        let direct: f64 = (1400..=1600).map(|k| d.mass(k as f64, k as f64)).sum();
        let cdf = d.mass(1400.0, 1600.0);
        assert!((direct - cdf).abs() < 1e-10);
        assert!((d.mass(0.0, 100_000.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_sample_mean() {
        let d = Distribution::Exponential { rate: 0.01 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 100.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn tnormal_sample_mean() {
        let d = Distribution::from_params(DistKind::TNormal, &[0.01, 0.001, 0.0, 1.0]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.0292).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn uniform_samples_in_support() {
        let d = Distribution::Uniform { lo: 0.0, hi: 1.0 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        assert!((0..10_000).map(|_| d.sample(&mut rng)).all(|x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn full_support_masses_are_one() {
        let cases = [
            Distribution::Uniform { lo: -2.0, hi: 5.0 },
            Distribution::Normal { mean: 1.0, variance: 4.0 },
            Distribution::TNormal(TruncatedNormal::new(0.2, 0.01, 0.0, 1.0).unwrap()),
            Distribution::Binomial { n: 1000, p: 0.01 },
            Distribution::Exponential { rate: 0.01 },
            Distribution::Gamma { shape: 4.0, rate: 15000.0 },
        ];
        for d in cases {
            assert!((d.mass(f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn sample_within_respects_interval() {
        let d = Distribution::Exponential { rate: 0.5 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = d.sample_within(1.0, 2.0, &mut rng);
            assert!((1.0..=2.0).contains(&x));
        }
    }
}
