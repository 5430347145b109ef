//! Concentration bounds, fidelity certificates, parameter planning and
//! resource cost comparison.
//!
//! All probability arithmetic is in `f64`. The copy counts of the
//! stabilizer-testing baseline overflow any float for moderate `n`, so they
//! are computed exactly with [`BigUint`].

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling without replacement: `K` of `N + K` binary values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerflingParams {
    /// `K`
    pub sample: usize,
    /// `N`
    pub remainder: usize,
    /// `v ∈ (0, 1)`
    pub deviation: f64,
}

impl SerflingParams {
    pub fn population(&self) -> usize {
        self.sample + self.remainder
    }
}

/// Lower bound on `Pr[Σ_rest Y ≤ (N/K) Σ_sample Y + N v]`:
/// `1 − exp(−2 v² N K² / ((N + K)(K + 1)))`.
pub fn serfling_bound(p: &SerflingParams) -> Result<f64> {
    if p.sample == 0 || p.remainder == 0 || !(p.deviation > 0.0 && p.deviation < 1.0) {
        return Err(Error::InvalidParams(format!("serfling parameters {p:?}")));
    }
    let (n, k, v) = (p.remainder as f64, p.sample as f64, p.deviation);
    Ok(1.0 - (-2.0 * v * v * n * k * k / ((n + k) * (k + 1.0))).exp())
}

/// Independent variables `ξ_i ∈ [a_i, b_i]` and a deviation `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzumaParams {
    pub ranges: Vec<(f64, f64)>,
    pub deviation: f64,
}

impl AzumaParams {
    /// `m` variables valued in `{0, 1}`.
    pub fn binary(m: usize, deviation: f64) -> Self {
        AzumaParams {
            ranges: vec![(0.0, 1.0); m],
            deviation,
        }
    }
}

/// Lower bound on `Pr[mean − E[mean] ≤ t]`: `1 − exp(−2 m² t² / Σ (b_i − a_i)²)`.
pub fn azuma_hoeffding_bound(p: &AzumaParams) -> Result<f64> {
    let m = p.ranges.len();
    if m == 0 || !(p.deviation > 0.0) || p.ranges.iter().any(|(a, b)| !(b >= a)) {
        return Err(Error::InvalidParams("azuma-hoeffding parameters".into()));
    }
    let spread: f64 = p.ranges.iter().map(|(a, b)| (b - a) * (b - a)).sum();
    if spread == 0.0 {
        // Constant variables never deviate.
        return Ok(1.0);
    }
    let m = m as f64;
    Ok(1.0 - (-2.0 * m * m * p.deviation * p.deviation / spread).exp())
}

/// Who issues a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// The requesting client, threshold `K/(2n)`.
    Client,
    /// The randomly drawn third-party verifier, threshold `3K/(4n)`.
    Arbiter,
}

/// Which constants the arbiter certificate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateVariant {
    /// Coefficient 3 and `λ ≤ (n−1)²/9`, as stated in the theorem.
    Theorem,
    /// Coefficient `7/3 + 2/√6 ≈ 3.1498` and `λ ≤ (n−1)²/10`, as derived.
    #[default]
    Appendix,
}

impl CertificateVariant {
    pub fn arbiter_coefficient(self) -> f64 {
        match self {
            CertificateVariant::Theorem => 3.0,
            CertificateVariant::Appendix => APPENDIX_COEFFICIENT,
        }
    }
}

/// `7/3 + 2/√6`
pub const APPENDIX_COEFFICIENT: f64 = 7.0 / 3.0 + 0.816_496_580_927_726;

pub const MIN_QUBITS: usize = 6;

/// Copy count and thresholds derived from `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPlan {
    pub n: usize,
    /// `K = ⌈n² ln n⌉`
    pub k: usize,
    /// `5K`
    pub copies: usize,
    /// `K / (2n)`
    pub c_client: f64,
    /// `3K / (4n)`
    pub c_arbiter: f64,
}

pub fn plan_parameters(n: usize) -> Result<ProtocolPlan> {
    if n < MIN_QUBITS {
        return Err(Error::TooSmallN(n));
    }
    let nf = n as f64;
    let k = (nf * nf * nf.ln()).ceil() as usize;
    Ok(plan_with_k(n, k))
}

/// Plan with an explicit `K`, thresholds as usual.
pub fn plan_with_k(n: usize, k: usize) -> ProtocolPlan {
    let (nf, kf) = (n as f64, k as f64);
    ProtocolPlan {
        n,
        k,
        copies: 5 * k,
        c_client: kf / (2.0 * nf),
        c_arbiter: 3.0 * kf / (4.0 * nf),
    }
}

/// Admissible `λ` interval for a role.
pub fn lambda_range(n: usize, role: Role, variant: CertificateVariant) -> Result<(f64, f64)> {
    if n < MIN_QUBITS {
        return Err(Error::TooSmallN(n));
    }
    let nf = n as f64;
    let sq = (nf - 1.0) * (nf - 1.0);
    Ok(match role {
        Role::Client => (16f64.ln() / nf.ln(), sq / 16.0),
        Role::Arbiter => {
            let div = match variant {
                CertificateVariant::Theorem => 9.0,
                CertificateVariant::Appendix => 10.0,
            };
            (4f64.ln() / nf.ln(), sq / div)
        }
    })
}

/// Fidelity lower bound with its confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCertificate {
    pub role: Role,
    pub n: usize,
    pub k: usize,
    pub observed_failures: usize,
    pub lambda: f64,
    pub fidelity_bound: f64,
    pub confidence_bound: f64,
    pub variant: CertificateVariant,
    /// The confidence is non-positive, so the certificate says nothing.
    pub vacuous: bool,
}

fn check_lambda(lambda: f64, (lo, hi): (f64, f64)) -> Result<()> {
    // Admit rounding at the endpoints, e.g. λ = log_n 16 computed elsewhere.
    let eps = 1e-12;
    if !(lambda >= lo - eps && lambda <= hi + eps) {
        return Err(Error::LambdaOutOfRange { lambda, lo, hi });
    }
    Ok(())
}

fn is_vacuous(p: f64) -> bool {
    p <= 1e-12
}

/// Certificate for an accepting arbiter: `F ≥ 1 − (c√λ + 1)/n` with
/// probability `≥ 1 − 4 n^{−λ}`.
pub fn arbiter_certificate(
    n: usize,
    k: usize,
    failures: usize,
    lambda: f64,
    variant: CertificateVariant,
) -> Result<FidelityCertificate> {
    let range = lambda_range(n, Role::Arbiter, variant)?;
    if k == 0 {
        return Err(Error::InvalidParams("K must be positive".into()));
    }
    let threshold = plan_with_k(n, k).c_arbiter;
    if failures as f64 > threshold {
        return Err(Error::ThresholdExceeded { failures, threshold });
    }
    check_lambda(lambda, range)?;
    let nf = n as f64;
    let fidelity_bound = 1.0 - (variant.arbiter_coefficient() * lambda.sqrt() + 1.0) / nf;
    let confidence_bound = 1.0 - 4.0 * nf.powf(-lambda);
    Ok(FidelityCertificate {
        role: Role::Arbiter,
        n,
        k,
        observed_failures: failures,
        lambda,
        fidelity_bound,
        confidence_bound,
        variant,
        vacuous: is_vacuous(confidence_bound),
    })
}

/// Certificate for an accepting client: `F ≥ 1 − (4√λ + 1)/n` with
/// probability `≥ 1 − 4 n^{−λ/2}`.
pub fn client_certificate(n: usize, k: usize, failures: usize, lambda: f64) -> Result<FidelityCertificate> {
    let range = lambda_range(n, Role::Client, CertificateVariant::Theorem)?;
    if k == 0 {
        return Err(Error::InvalidParams("K must be positive".into()));
    }
    let threshold = plan_with_k(n, k).c_client;
    if failures as f64 > threshold {
        return Err(Error::ThresholdExceeded { failures, threshold });
    }
    check_lambda(lambda, range)?;
    let nf = n as f64;
    let fidelity_bound = 1.0 - (4.0 * lambda.sqrt() + 1.0) / nf;
    let confidence_bound = 1.0 - 4.0 * nf.powf(-lambda / 2.0);
    Ok(FidelityCertificate {
        role: Role::Client,
        n,
        k,
        observed_failures: failures,
        lambda,
        fidelity_bound,
        confidence_bound,
        variant: CertificateVariant::Theorem,
        vacuous: is_vacuous(confidence_bound),
    })
}

/// Fidelity estimate before substituting the acceptance condition:
/// `1 − (7/3) v − 2t − 4 (K1 + K2) / (3K)`.
pub fn fidelity_estimate_from_counts(v: f64, t: f64, k: usize, failures: usize) -> Result<f64> {
    if !(v > 0.0 && v < 1.0) || !(t > 0.0) || k == 0 {
        return Err(Error::InvalidParams(format!("v = {v}, t = {t}, K = {k}")));
    }
    Ok(1.0 - 7.0 / 3.0 * v - 2.0 * t - 4.0 * failures as f64 / (3.0 * k as f64))
}

/// Joint confidence of the two sampling steps and two averaging steps that
/// back the arbiter's estimate, before the simplification to `1 − 4n^{−λ}`.
pub fn arbiter_confidence_from_deviations(k: usize, v: f64, t: f64) -> Result<f64> {
    let s1 = serfling_bound(&SerflingParams {
        sample: k,
        remainder: 4 * k,
        deviation: v,
    })?;
    let s2 = serfling_bound(&SerflingParams {
        sample: k,
        remainder: 3 * k,
        deviation: v,
    })?;
    let a = azuma_hoeffding_bound(&AzumaParams::binary(3 * k, t))?;
    Ok(s1 * s2 * a * a)
}

/// Parameters of the stabilizer-testing baseline: `k` test rounds and `m`
/// additional copies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatoParams {
    pub k: BigUint,
    pub m: BigUint,
}

impl SatoParams {
    /// Smallest admissible parameters: `k = 4n² − 1`, `m = ⌈2 ln 2 · kⁿ · n⁵⌉`.
    pub fn minimal(n: usize) -> Self {
        let k = sato_min_k(n);
        let m = sato_min_m(n, &k);
        SatoParams { k, m }
    }
}

fn sato_min_k(n: usize) -> BigUint {
    BigUint::from(4 * n * n - 1)
}

fn sato_min_m(n: usize, k: &BigUint) -> BigUint {
    let x = k.pow(n as u32) * BigUint::from(n).pow(5);
    ceil_two_ln2_times(&x)
}

/// `floor(ln 2 · 2^bits)` up to an additive error below `bits + 1`, from
/// `ln 2 = Σ_{j≥1} 1 / (j 2^j)`.
fn ln2_fixed(bits: u64) -> BigUint {
    let mut acc = BigUint::zero();
    for j in 1..=bits {
        acc += (BigUint::one() << (bits - j)) / BigUint::from(j);
    }
    acc
}

/// Exact `⌈2 ln 2 · x⌉` for `x ≥ 1`.
fn ceil_two_ln2_times(x: &BigUint) -> BigUint {
    let mut bits = x.bits() + 64;
    loop {
        let l = ln2_fixed(bits);
        let num = (x * &l) << 1u32;
        let q = &num >> bits;
        let rem = &num - (&q << bits);
        // True value lies in [num, num + err] / 2^bits.
        let err = (x * BigUint::from(bits + 1)) << 1u32;
        if rem + err < (BigUint::one() << bits) {
            return q + 1u32;
        }
        bits += 64;
    }
}

fn log10_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits < 1000 {
        x.to_f64().unwrap().log10()
    } else {
        let shift = bits - 64;
        (x >> shift).to_f64().unwrap().log10() + shift as f64 * 2f64.log10()
    }
}

/// Copies and local measurements, ours against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub n: usize,
    pub k: usize,
    /// `5K`
    pub our_copies: usize,
    /// `2K · n`, the verification stage
    pub our_measurements: usize,
    /// Decimal `2k + m + 1`
    pub sato_copies: String,
    /// Decimal `k · n · 2ⁿ`
    pub sato_measurements: String,
    pub sato_copies_log10: f64,
    pub sato_measurements_log10: f64,
}

impl CostReport {
    pub fn sato_copies_big(&self) -> BigUint {
        self.sato_copies.parse().expect("decimal")
    }

    pub fn sato_measurements_big(&self) -> BigUint {
        self.sato_measurements.parse().expect("decimal")
    }
}

pub fn cost_comparison(n: usize, sato: &SatoParams) -> Result<CostReport> {
    let plan = plan_parameters(n)?;
    let k_min = sato_min_k(n);
    if sato.k < k_min {
        return Err(Error::InvalidParams(format!("baseline k must be at least {k_min}")));
    }
    let m_min = sato_min_m(n, &sato.k);
    if sato.m < m_min {
        return Err(Error::InvalidParams(format!("baseline m must be at least {m_min}")));
    }
    let copies: BigUint = &sato.k * 2u32 + &sato.m + 1u32;
    let measurements: BigUint = &sato.k * BigUint::from(n) * (BigUint::one() << n);
    Ok(CostReport {
        n,
        k: plan.k,
        our_copies: plan.copies,
        our_measurements: 2 * plan.k * n,
        sato_copies_log10: log10_big(&copies),
        sato_measurements_log10: log10_big(&measurements),
        sato_copies: copies.to_string(),
        sato_measurements: measurements.to_string(),
    })
}
