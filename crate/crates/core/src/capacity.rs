//! Variational p-capacities of annuli and points for radial weights.
//!
//! For p > 1 the capacity of the annulus {r' < |x| < r} is the closed form
//! (∫ ŵ^{1/(1-p)} dρ)^{1-p}; for p = 1 it is the essential infimum of ŵ
//! over the radius interval. A divergent dual integral from the origin
//! means the point has capacity exactly zero. Hyperquadrant and bow-tie
//! capacities differ from the full-space one by the exact factors 2^{-n}
//! and 2^{1-n}.
//!
//! Everything here is cross-checked by a discrete energy-minimization
//! oracle on a log-spaced grid, solved by two independent routes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mag::{log2_one_minus_exp2_neg, Mag, MagSum};
use crate::measure::mu_ball_mag;
use crate::quad::Integral;
use crate::weight::{Family, RadialWeight};

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapDomain {
    FullSpace,
    PositiveQuadrant,
    BowTie,
}

impl CapDomain {
    /// log2 of the factor relative to the full-space capacity.
    pub fn log2_factor(self, n: u32) -> f64 {
        match self {
            CapDomain::FullSpace => 0.0,
            CapDomain::PositiveQuadrant => -(n as f64),
            CapDomain::BowTie => -(n as f64 - 1.0),
        }
    }

    pub fn parse(s: &str) -> Result<CapDomain> {
        match s {
            "fullspace" | "full_space" | "rn" => Ok(CapDomain::FullSpace),
            "quadrant" | "positive_quadrant" | "xplus" => Ok(CapDomain::PositiveQuadrant),
            "bowtie" | "bow_tie" => Ok(CapDomain::BowTie),
            other => Err(Error::InvalidConfig(format!("unknown domain '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CapacityQuery {
    pub p: f64,
    /// 0 encodes the point {0}.
    pub r_inner: f64,
    pub r_outer: f64,
    pub domain: CapDomain,
}

impl CapacityQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::OutOfRange(format!("p = {} must be >= 1", self.p)));
        }
        if !(self.r_inner >= 0.0 && self.r_outer > self.r_inner) {
            return Err(Error::OutOfRange(format!(
                "need 0 <= r_inner < r_outer, got ({}, {})",
                self.r_inner, self.r_outer
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMethod {
    ClosedFormDual,
    EssInf,
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityResult {
    pub value: f64,
    pub log2_value: f64,
    /// True when the value is exactly zero because the dual integral from
    /// the origin diverges.
    pub zero_by_divergent_dual: bool,
    pub method: CapacityMethod,
    pub domain: CapDomain,
}

/// Capacity of the annulus (or of the point {0} when `r_inner = 0`).
pub fn annulus_capacity(w: &RadialWeight, q: &CapacityQuery) -> Result<CapacityResult> {
    q.validate()?;
    let lo_log2 = if q.r_inner == 0.0 {
        f64::NEG_INFINITY
    } else {
        q.r_inner.log2()
    };
    annulus_capacity_log2(w, q.p, lo_log2, q.r_outer.log2(), q.domain)
}

/// Same with log2 radii, usable at staircase scales.
pub fn annulus_capacity_log2(
    w: &RadialWeight,
    p: f64,
    lo_log2: f64,
    hi_log2: f64,
    domain: CapDomain,
) -> Result<CapacityResult> {
    if !(p >= 1.0) {
        return Err(Error::OutOfRange(format!("p = {p} must be >= 1")));
    }
    let n = w.n();
    let nm1 = n as f64 - 1.0;
    let factor = domain.log2_factor(n);
    if p == 1.0 {
        // essinf of ŵ over the interval
        let essinf = w
            .essinf_pow(nm1, lo_log2, hi_log2)
            .mul(Mag::from_f64(w.omega()));
        let v = essinf.mul(Mag::from_log2(factor));
        return Ok(CapacityResult {
            value: v.to_f64(),
            log2_value: v.log2(),
            zero_by_divergent_dual: false,
            method: CapacityMethod::EssInf,
            domain,
        });
    }
    let s = 1.0 / (1.0 - p);
    // dual integral ∫ ŵ^s dρ = ω^s ∫ ρ^{(n-1)s} w^s dρ
    match w.integral_pow_log2(nm1 * s, s, lo_log2, hi_log2) {
        Integral::Divergent => Ok(CapacityResult {
            value: 0.0,
            log2_value: f64::NEG_INFINITY,
            zero_by_divergent_dual: true,
            method: CapacityMethod::ClosedFormDual,
            domain,
        }),
        Integral::Finite(d) => {
            let dual_full = d.mul(Mag::from_log2(s * w.omega().log2()));
            let cap = dual_full.powf(1.0 - p).mul(Mag::from_log2(factor));
            Ok(CapacityResult {
                value: cap.to_f64(),
                log2_value: cap.log2(),
                zero_by_divergent_dual: false,
                method: CapacityMethod::ClosedFormDual,
                domain,
            })
        }
    }
}

/// Capacity of the point {0} relative to B_r.
pub fn point_capacity(
    w: &RadialWeight,
    p: f64,
    r: f64,
    domain: CapDomain,
) -> Result<CapacityResult> {
    annulus_capacity(
        w,
        &CapacityQuery {
            p,
            r_inner: 0.0,
            r_outer: r,
            domain,
        },
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct ShrinkSample {
    /// Inner radius as decades below r: r_inner = r·10^{-k}.
    pub decades: f64,
    pub cap: f64,
    pub cap_log2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointCapacityLimit {
    pub samples: Vec<ShrinkSample>,
    pub limit: f64,
    pub converged: bool,
    pub positive: bool,
    /// log2 of 1e-12 · μ(B_r)/r^p, the positivity threshold.
    pub threshold_log2: f64,
}

/// Point capacity as the limit of annulus capacities with shrinking inner
/// radius, decided without ever touching the 0-endpoint closed form. The
/// shrink schedule reaches 256 decades; convergence is declared on a
/// vanishing or geometrically extrapolable tail, so slow power tails near
/// classification boundaries still resolve.
pub fn point_capacity_limit(
    w: &RadialWeight,
    p: f64,
    r: f64,
    domain: CapDomain,
) -> Result<PointCapacityLimit> {
    assert!(r > 0.0);
    let schedule: [f64; 15] = [
        2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0, 96.0, 128.0, 192.0, 256.0,
    ];
    let hi = r.log2();
    let mu = mu_ball_mag(w, r)?;
    let threshold_log2 = mu.log2() - p * hi + (1e-12f64).log2();

    let mut samples = Vec::with_capacity(schedule.len());
    let mut caps: Vec<Mag> = Vec::with_capacity(schedule.len());
    for &k in &schedule {
        let lo = hi - k * 10f64.log2();
        let c = annulus_capacity_log2(w, p, lo, hi, domain)?;
        caps.push(Mag::from_log2(c.log2_value));
        samples.push(ShrinkSample {
            decades: k,
            cap: c.value,
            cap_log2: c.log2_value,
        });
    }

    // capacities are nonincreasing along the schedule; analyze the tail
    let last = *caps.last().unwrap();
    let prev = caps[caps.len() - 2];
    let rel_step = if last.is_zero() {
        if prev.is_zero() {
            0.0
        } else {
            1.0
        }
    } else {
        ((prev.log2() - last.log2()) * LN_2).abs()
    };
    let mut converged = rel_step <= 1e-6;
    if !converged && !last.is_zero() {
        // geometric extrapolation of the capacity decrements
        let m = caps.len();
        let base = caps[m - 1].log2();
        let v: Vec<f64> = caps[m - 4..]
            .iter()
            .map(|c| (c.log2() - base).exp2())
            .collect();
        let d1 = v[0] - v[1];
        let d2 = v[1] - v[2];
        let d3 = v[2] - v[3];
        if d2 > 0.0 && d3 > 0.0 {
            let q1 = d2 / d1.max(f64::MIN_POSITIVE);
            let q2 = d3 / d2;
            if q1 < 0.8 && q2 < 0.8 {
                let tail = d3 * q2 / (1.0 - q2);
                converged = tail <= 1e-5 * v[3];
            }
        } else if d2 <= 0.0 && d3 <= 0.0 {
            converged = true; // flat within rounding
        }
    }
    let positive = last.log2() > threshold_log2 && converged;
    Ok(PointCapacityLimit {
        limit: last.to_f64(),
        samples,
        converged,
        positive,
        threshold_log2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    Positive,
    Zero,
}

/// Point-capacity positivity of w = |x|^α φ^β: positive iff α < p-n, or
/// α = p-n with β > p-1, or p = 1, α = 1-n, β >= 0.
pub fn classify_powerlog_positivity(n: u32, p: f64, alpha: f64, beta: f64) -> Result<Positivity> {
    if !(alpha > -(n as f64)) {
        return Err(Error::OutOfRange(format!("alpha {alpha} <= -n")));
    }
    if !(p >= 1.0) {
        return Err(Error::OutOfRange(format!("p = {p} < 1")));
    }
    let pn = p - n as f64;
    let positive = alpha < pn
        || (alpha == pn && beta > p - 1.0)
        || (p == 1.0 && alpha == 1.0 - n as f64 && beta >= 0.0);
    Ok(if positive {
        Positivity::Positive
    } else {
        Positivity::Zero
    })
}

/// Whether cap({0}, B_r) ≳ r^{-p} μ(B_r) holds uniformly for the same
/// family: case α < p-n, or the p = 1 case α = 1-n, β >= 0. The log
/// boundary α = p-n, β > p-1 gives positive capacity without the uniform
/// comparison.
pub fn classify_powerlog_capacity_condition(
    n: u32,
    p: f64,
    alpha: f64,
    beta: f64,
) -> Result<bool> {
    if !(alpha > -(n as f64)) {
        return Err(Error::OutOfRange(format!("alpha {alpha} <= -n")));
    }
    if !(p >= 1.0) {
        return Err(Error::OutOfRange(format!("p = {p} < 1")));
    }
    let pn = p - n as f64;
    Ok(alpha < pn || (p == 1.0 && alpha == 1.0 - n as f64 && beta >= 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionVerdict {
    Holds,
    Fails,
    Borderline,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioSample {
    pub log2_r: f64,
    /// log2 of cap({0}, B_r)·r^p/μ(B_r).
    pub log2_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityConditionReport {
    pub p: f64,
    pub window_log2: (f64, f64),
    pub verdict: ConditionVerdict,
    /// Fitted d(log2 ratio)/d(log2 (1/r)): negative = decays toward 0.
    pub fitted_slope: f64,
    pub spread_log2: f64,
    pub min_ratio_log2: f64,
    pub max_ratio_log2: f64,
    pub zero_capacity: bool,
    /// cap ≤ 2^p r^{-p} μ(B_r) must always hold (Lipschitz test function).
    pub upper_bound_ok: bool,
    pub samples: Vec<RatioSample>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionConfig {
    /// Boundedness factor F: "holds" needs max/min ratio <= F.
    pub boundedness_factor: f64,
    /// |slope| beyond this is a decay trend.
    pub slope_threshold: f64,
    /// Sample count across the window (breakpoints are added on top).
    pub samples: usize,
}

impl Default for ConditionConfig {
    fn default() -> Self {
        ConditionConfig {
            boundedness_factor: 50.0,
            slope_threshold: 0.05,
            samples: 48,
        }
    }
}

/// Checks cap({0}, B_r) ≃ r^{-p} μ(B_r) across a log window of radii.
/// Ratios are formed in log2 space, so staircase windows of hundreds of
/// octaves are fine.
pub fn capacity_condition_check(
    w: &RadialWeight,
    p: f64,
    window_log2: (f64, f64),
    cfg: &ConditionConfig,
) -> Result<CapacityConditionReport> {
    let (lo, hi) = window_log2;
    if !(hi > lo) {
        return Err(Error::InvalidConfig("empty capacity-condition window".into()));
    }
    if (hi - lo) * 2f64.log10() < 3.0 {
        return Err(Error::WindowTooNarrow(
            "capacity-condition window must span at least 3 decades".into(),
        ));
    }
    let mut xs: Vec<f64> = (0..cfg.samples)
        .map(|i| lo + (hi - lo) * i as f64 / (cfg.samples - 1) as f64)
        .collect();
    xs.extend(w.breakpoints_log2_in(lo, hi));
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut samples = Vec::with_capacity(xs.len());
    let mut zero_capacity = false;
    let mut upper_bound_ok = true;
    for &x in &xs {
        let cap = annulus_capacity_log2(w, p, f64::NEG_INFINITY, x, CapDomain::FullSpace)?;
        if cap.zero_by_divergent_dual {
            zero_capacity = true;
            break;
        }
        let mu = crate::measure::mu_ball_mag_log2(w, x)?;
        let log2_ratio = cap.log2_value + p * x - mu.log2();
        if log2_ratio > p + 1e-6 {
            upper_bound_ok = false;
        }
        samples.push(RatioSample { log2_r: x, log2_ratio });
    }

    if zero_capacity {
        return Ok(CapacityConditionReport {
            p,
            window_log2,
            verdict: ConditionVerdict::Fails,
            fitted_slope: f64::NEG_INFINITY,
            spread_log2: f64::INFINITY,
            min_ratio_log2: f64::NEG_INFINITY,
            max_ratio_log2: f64::NEG_INFINITY,
            zero_capacity: true,
            upper_bound_ok,
            samples,
        });
    }

    let min = samples
        .iter()
        .map(|s| s.log2_ratio)
        .fold(f64::INFINITY, f64::min);
    let max = samples
        .iter()
        .map(|s| s.log2_ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let spread = max - min;

    // least-squares slope of log2 ratio against log2(1/r)
    let m = samples.len() as f64;
    let mean_x = samples.iter().map(|s| -s.log2_r).sum::<f64>() / m;
    let mean_y = samples.iter().map(|s| s.log2_ratio).sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for s in &samples {
        let dx = -s.log2_r - mean_x;
        sxx += dx * dx;
        sxy += dx * (s.log2_ratio - mean_y);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };

    // monotone decay of per-chunk minima toward small radii
    let chunks = 8usize.min(samples.len());
    let chunk_min: Vec<f64> = (0..chunks)
        .map(|c| {
            let a = c * samples.len() / chunks;
            let b = ((c + 1) * samples.len() / chunks).max(a + 1);
            samples[a..b]
                .iter()
                .map(|s| s.log2_ratio)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // chunk 0 holds the smallest radii; decay means minima rise with radius
    let decreasing_toward_zero =
        chunk_min.windows(2).filter(|w| w[1] >= w[0]).count() as f64 >= 0.7 * (chunks - 1) as f64;

    let spread_ok = spread <= cfg.boundedness_factor.log2();
    let decaying = slope < -cfg.slope_threshold;
    let verdict = if spread_ok && !decaying {
        ConditionVerdict::Holds
    } else if (decaying || !spread_ok) && decreasing_toward_zero {
        ConditionVerdict::Fails
    } else {
        ConditionVerdict::Borderline
    };

    Ok(CapacityConditionReport {
        p,
        window_log2,
        verdict,
        fitted_slope: slope,
        spread_log2: spread,
        min_ratio_log2: min,
        max_ratio_log2: max,
        zero_capacity: false,
        upper_bound_ok,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub value: f64,
    pub series_path: f64,
    pub descent_path: f64,
    pub rel_gap: f64,
    pub nodes: usize,
}

/// Discrete capacity oracle: minimizes Σ |u_i - u_{i-1}|^p Δρ_i^{1-p} ŵ_i
/// over node values with u = 1 at the inner radius and u = 0 at the outer,
/// on a log-spaced grid with family breakpoints snapped into the node set.
///
/// For p > 1 the exact series-composition optimum and an independent
/// projected-Newton minimization must agree to 1e-6 before the oracle
/// reports. For p = 1 the oracle is the grid minimum of ŵ with two
/// bracketed refinement passes.
pub fn discrete_capacity_oracle(
    w: &RadialWeight,
    q: &CapacityQuery,
    nodes: usize,
) -> Result<OracleResult> {
    q.validate()?;
    if q.r_inner <= 0.0 {
        return Err(Error::OutOfRange(
            "oracle needs r_inner > 0; take a shrinking sequence for points".into(),
        ));
    }
    if nodes < 64 {
        return Err(Error::OutOfRange("oracle needs at least 64 nodes".into()));
    }
    let factor = q.domain.log2_factor(w.n());

    // log-spaced nodes (natural log) with breakpoints snapped in
    let (lo, hi) = (q.r_inner.ln(), q.r_outer.ln());
    let mut xs: Vec<f64> = (0..=nodes)
        .map(|i| lo + (hi - lo) * i as f64 / nodes as f64)
        .collect();
    for b in w.breakpoints_in(q.r_inner, q.r_outer) {
        let lb = b.ln();
        let pos = ((lb - lo) / (hi - lo) * nodes as f64).round() as usize;
        if pos > 0 && pos < nodes {
            xs[pos] = lb;
        }
    }
    let rho: Vec<f64> = xs.iter().map(|x| x.exp()).collect();

    // midpoint ŵ in rescaled form to keep its powers inside f64 range
    let m = w.n() as f64 - 1.0;
    let omega_log2 = w.omega().log2();
    let wh_log2: Vec<f64> = (0..nodes)
        .map(|i| {
            let mid = 0.5 * (xs[i] + xs[i + 1]) / LN_2;
            omega_log2 + w.w_log2(mid) + m * mid
        })
        .collect();
    let scale = wh_log2.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let wh: Vec<f64> = wh_log2.iter().map(|&l| (l - scale).exp2()).collect();

    if q.p == 1.0 {
        // grid minimum over midpoints and nodes, then two bracketed passes
        let mut best = f64::INFINITY;
        let mut best_i = 0usize;
        for (i, &v) in wh.iter().enumerate() {
            if v < best {
                best = v;
                best_i = i;
            }
        }
        let value_at = |x_ln: f64| -> f64 {
            let x = x_ln / LN_2;
            (omega_log2 + w.w_log2(x) + m * x - scale).exp2()
        };
        for &x in &xs {
            let v = value_at(x);
            if v < best {
                best = v;
            }
        }
        let mut lo_b = xs[best_i.saturating_sub(1)];
        let mut hi_b = xs[(best_i + 2).min(nodes)];
        for _ in 0..2 {
            let mut local_best = f64::INFINITY;
            let mut local_arg = lo_b;
            for j in 0..=64 {
                let x = lo_b + (hi_b - lo_b) * j as f64 / 64.0;
                let v = value_at(x);
                if v < local_best {
                    local_best = v;
                    local_arg = x;
                }
            }
            best = best.min(local_best);
            let h = (hi_b - lo_b) / 64.0;
            lo_b = (local_arg - h).max(lo);
            hi_b = (local_arg + h).min(hi);
        }
        let value = (best.log2() + scale + factor).exp2();
        return Ok(OracleResult {
            value,
            series_path: value,
            descent_path: value,
            rel_gap: 0.0,
            nodes,
        });
    }

    let p = q.p;
    let s = 1.0 / (1.0 - p);
    // exact discrete optimum via series composition
    let mut dual = 0.0;
    for i in 0..nodes {
        dual += (rho[i + 1] - rho[i]) * wh[i].powf(s);
    }
    let series_scaled = dual.powf(1.0 - p);

    // independent route: projected Newton descent on the node energies
    let c: Vec<f64> = (0..nodes)
        .map(|i| wh[i] * (rho[i + 1] - rho[i]).powf(1.0 - p))
        .collect();
    let descent_scaled = newton_chain_min(&c, p);

    let rel_gap = (series_scaled - descent_scaled).abs() / series_scaled;
    let series = (series_scaled.log2() + scale + factor).exp2();
    let descent = (descent_scaled.log2() + scale + factor).exp2();
    if rel_gap > 1e-6 {
        return Err(Error::OracleDisagreement {
            series,
            descent,
            rel_gap,
        });
    }
    Ok(OracleResult {
        value: series,
        series_path: series,
        descent_path: descent,
        rel_gap,
        nodes,
    })
}

/// Minimizes Σ c_i |u_{i-1} - u_i|^p over u_1..u_{N-1} with u_0 = 1,
/// u_N = 0, by damped Newton steps on the tridiagonal system with
/// projection into [0, 1]. Never consults the series formula.
fn newton_chain_min(c: &[f64], p: f64) -> f64 {
    let n = c.len();
    let mut u: Vec<f64> = (0..=n).map(|i| 1.0 - i as f64 / n as f64).collect();
    let energy = |u: &[f64]| -> f64 {
        let mut e = 0.0;
        for i in 0..n {
            e += c[i] * (u[i] - u[i + 1]).abs().powf(p);
        }
        e
    };
    let mut e = energy(&u);
    let mut stall = 0;
    for _ in 0..300 {
        let mut grad = vec![0.0; n - 1];
        let mut diag = vec![0.0; n - 1];
        let mut off = vec![0.0; n.saturating_sub(2)];
        let phi = |d: f64| d.abs().powf(p - 1.0) * d.signum();
        let kap = |d: f64| (p - 1.0) * d.abs().powf(p - 2.0).clamp(1e-30, 1e30);
        for j in 1..n {
            let d_left = u[j - 1] - u[j];
            let d_right = u[j] - u[j + 1];
            grad[j - 1] = p * (-c[j - 1] * phi(d_left) + c[j] * phi(d_right));
            diag[j - 1] = p * (c[j - 1] * kap(d_left) + c[j] * kap(d_right)) + 1e-300;
            if j >= 2 {
                off[j - 2] = -p * c[j - 1] * kap(d_left);
            }
        }
        // Thomas solve H step = -grad
        let mut cp = vec![0.0; n - 1];
        let mut dp = vec![0.0; n - 1];
        cp[0] = if n >= 3 { off[0] / diag[0] } else { 0.0 };
        dp[0] = -grad[0] / diag[0];
        for i in 1..n - 1 {
            let denom = diag[i] - off[i - 1] * cp[i - 1];
            if i < n - 2 {
                cp[i] = off[i] / denom;
            }
            dp[i] = (-grad[i] - off[i - 1] * dp[i - 1]) / denom;
        }
        let mut step = vec![0.0; n - 1];
        step[n - 2] = dp[n - 2];
        for i in (0..n - 2).rev() {
            step[i] = dp[i] - cp[i] * step[i + 1];
        }
        // backtracking line search with projection into [0,1]
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let mut trial = u.clone();
            for j in 1..n {
                trial[j] = (u[j] + t * step[j - 1]).clamp(0.0, 1.0);
            }
            let et = energy(&trial);
            if et < e * (1.0 - 1e-16) {
                let rel = (e - et) / e.max(f64::MIN_POSITIVE);
                u = trial;
                e = et;
                improved = true;
                if rel < 1e-13 {
                    stall += 1;
                } else {
                    stall = 0;
                }
                break;
            }
            t *= 0.5;
        }
        if !improved {
            stall += 1;
        }
        if stall >= 3 {
            break;
        }
    }
    e
}

#[derive(Clone, Debug, Serialize)]
pub struct StairDecaySample {
    /// Inner radius is the staircase scale α_k = 2^{-2^k}.
    pub inner_piece: u32,
    /// log2 of the inner radius; -inf once past f64 exponent range.
    pub log2_inner: f64,
    pub cap: f64,
    pub cap_log2: f64,
}

/// Point-capacity decay along the staircase scales: capacities of the
/// annuli (α_K, α_{k0}) for increasing K, accumulated from per-piece
/// closed forms indexed by k, so K may run far past representable radii.
/// Lead exponents within 1e-12 of criticality are snapped to exact
/// flatness; that is what lets the critically-borderline exponent decay
/// instead of stalling on the f64 rounding of p.
pub fn staircase_point_capacity_decay(
    w: &RadialWeight,
    p: f64,
    outer_piece: u32,
    inner_pieces: &[u32],
) -> Result<Vec<StairDecaySample>> {
    match w.family() {
        Family::DyadicStaircase {
            truncation_log2: None,
        } => {}
        Family::DyadicStaircase { .. } => {
            return Err(Error::InvalidConfig(
                "decay series needs the untruncated staircase".into(),
            ))
        }
        _ => {
            return Err(Error::InvalidConfig(
                "decay series is a staircase-family operation".into(),
            ))
        }
    }
    if !(p > 1.0) {
        return Err(Error::OutOfRange("decay series needs p > 1".into()));
    }
    let s = 1.0 / (1.0 - p);
    let omega = w.omega();

    let snap = |e: f64| if e.abs() < 1e-12 { 0.0 } else { e };
    let a_quad = 3.0 * s + 1.0;
    let a_const = s + 1.0;
    let e_shared = snap(3.5 * s + 1.5);
    let e_steep = snap(2.0 * s + 1.0);

    let term = |e: f64, k: u32| -> f64 {
        if e == 0.0 {
            0.0
        } else {
            -e * 2.0f64.powi(k.min(2100) as i32)
        }
    };

    let piece_contribution = |k: u32| -> Mag {
        let pow_k = 2.0f64.powi(k.min(2100) as i32);
        let mut acc = MagSum::new();
        // quadratic branch (β_k, α_k), width 0.5·2^k in log2
        {
            let v = if a_quad > 0.0 {
                let d = 0.5 * a_quad * pow_k;
                term(e_steep, k) - a_quad.log2() + log2_one_minus_exp2_neg(d)
            } else if a_quad < 0.0 {
                let d = -0.5 * a_quad * pow_k;
                term(e_shared, k) - (-a_quad).log2() + log2_one_minus_exp2_neg(d)
            } else {
                s * pow_k + (0.5 * pow_k * LN_2).log2()
            };
            if v > f64::NEG_INFINITY {
                acc.add(Mag::from_log2(v));
            }
        }
        // constant branch (α_{k+1}, β_k), width 0.5·2^k in log2
        {
            let v = if a_const > 0.0 {
                let d = 0.5 * a_const * pow_k;
                term(e_shared, k) - a_const.log2() + log2_one_minus_exp2_neg(d)
            } else if a_const < 0.0 {
                let d = -0.5 * a_const * pow_k;
                term(snap(2.0 * (s + a_const)), k) - (-a_const).log2()
                    + log2_one_minus_exp2_neg(d)
            } else {
                -2.0 * s * pow_k + (0.5 * pow_k * LN_2).log2()
            };
            if v > f64::NEG_INFINITY {
                acc.add(Mag::from_log2(v));
            }
        }
        acc.total()
    };

    let mut ks: Vec<u32> = inner_pieces.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.first().map(|&k| k <= outer_piece).unwrap_or(true) {
        return Err(Error::InvalidConfig(
            "inner pieces must lie strictly below the outer piece".into(),
        ));
    }

    let mut out = Vec::with_capacity(ks.len());
    let mut sum = MagSum::new();
    let mut k_cursor = outer_piece;
    for &target in &ks {
        while k_cursor < target {
            sum.add(piece_contribution(k_cursor));
            k_cursor += 1;
        }
        let dual = sum.total().mul(Mag::from_log2(s * omega.log2()));
        let cap = dual.powf(1.0 - p);
        let log2_inner = if target <= 1023 {
            -(2.0f64.powi(target as i32))
        } else {
            f64::NEG_INFINITY
        };
        out.push(StairDecaySample {
            inner_piece: target,
            log2_inner,
            cap: cap.to_f64(),
            cap_log2: cap.log2(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_weight_closed_forms() {
        // n=1, p=2: cap({0}, B_1) = 2, and generally 2 r^{1-p}
        let w = RadialWeight::constant(1);
        let c = point_capacity(&w, 2.0, 1.0, CapDomain::FullSpace).unwrap();
        assert_relative_eq!(c.value, 2.0, max_relative = 1e-12);
        for (p, r) in [(2.0, 0.5), (3.0, 2.0), (1.5, 0.1)] {
            let c = point_capacity(&w, p, r, CapDomain::FullSpace).unwrap();
            assert_relative_eq!(c.value, 2.0 * r.powf(1.0 - p), max_relative = 1e-10);
        }
        // n=2, p=2: divergent dual, capacity exactly 0
        let w2 = RadialWeight::constant(2);
        let c = point_capacity(&w2, 2.0, 1.0, CapDomain::FullSpace).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.zero_by_divergent_dual);
        // n=2, p=2, annulus 1..e: (∫ dρ/(2πρ))^{-1} = 2π
        let c = annulus_capacity(
            &w2,
            &CapacityQuery {
                p: 2.0,
                r_inner: 1.0,
                r_outer: std::f64::consts::E,
                domain: CapDomain::FullSpace,
            },
        )
        .unwrap();
        assert_relative_eq!(c.value, 2.0 * PI, max_relative = 1e-8);
    }

    #[test]
    fn point_capacity_hand_integral() {
        // PowerLog n=2 α=-1.5, p=2, r=1: (∫_0^1 ρ^{1/2}/(2π) dρ)^{-1} = 3π
        let w = RadialWeight::power_log(2, -1.5, 0.0).unwrap();
        let c = point_capacity(&w, 2.0, 1.0, CapDomain::FullSpace).unwrap();
        assert_relative_eq!(c.value, 3.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn log_boundary_capacity() {
        // PowerLog n=2 α=0 β=2, p=2, r=0.1: cap = 2π ln 10
        let w = RadialWeight::power_log(2, 0.0, 2.0).unwrap();
        let c = point_capacity(&w, 2.0, 0.1, CapDomain::FullSpace).unwrap();
        assert_relative_eq!(c.value, 2.0 * PI * 10f64.ln(), max_relative = 1e-9);
    }

    #[test]
    fn p1_essinf_capacity() {
        // w(ρ)=ρ on R¹: ŵ = 2ρ, essinf over (0,1) = 0
        let w = RadialWeight::power_log(1, 1.0, 0.0).unwrap();
        let c = point_capacity(&w, 1.0, 1.0, CapDomain::FullSpace).unwrap();
        assert_eq!(c.value, 0.0);
        // constant on R¹: essinf = 2; bow-tie factor 2^{1-n} = 1, quadrant 1/2
        let w = RadialWeight::constant(1);
        let c = point_capacity(&w, 1.0, 1.0, CapDomain::BowTie).unwrap();
        assert_relative_eq!(c.value, 2.0, max_relative = 1e-12);
        let c = point_capacity(&w, 1.0, 1.0, CapDomain::PositiveQuadrant).unwrap();
        assert_relative_eq!(c.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn quadrant_factors_exact() {
        let w = RadialWeight::power_log(2, -1.0, 0.0).unwrap();
        let q = CapacityQuery {
            p: 2.5,
            r_inner: 0.1,
            r_outer: 1.0,
            domain: CapDomain::FullSpace,
        };
        let full = annulus_capacity(&w, &q).unwrap().value;
        let quad = annulus_capacity(
            &w,
            &CapacityQuery {
                domain: CapDomain::PositiveQuadrant,
                ..q
            },
        )
        .unwrap()
        .value;
        let bow = annulus_capacity(
            &w,
            &CapacityQuery {
                domain: CapDomain::BowTie,
                ..q
            },
        )
        .unwrap()
        .value;
        assert_eq!(full, 4.0 * quad);
        assert_eq!(full, 2.0 * bow);
    }

    #[test]
    fn oracle_agrees_with_closed_form() {
        // w ≡ 1, n=2, p=3, annulus 0.5..1
        let w = RadialWeight::constant(2);
        let q = CapacityQuery {
            p: 3.0,
            r_inner: 0.5,
            r_outer: 1.0,
            domain: CapDomain::FullSpace,
        };
        let closed = annulus_capacity(&w, &q).unwrap().value;
        let oracle = discrete_capacity_oracle(&w, &q, 4096).unwrap();
        assert_relative_eq!(closed, oracle.value, max_relative = 1e-4);
        assert!(oracle.rel_gap <= 1e-6);
        // hand value: (∫_0.5^1 (2πρ)^{-1/2})^{-2} = 2π/(2(1-√½))²
        let hand = 2.0 * PI / (2.0 * (1.0 - 0.5f64.sqrt())).powi(2);
        assert_relative_eq!(closed, hand, max_relative = 1e-10);
    }

    #[test]
    fn oracle_converges_to_point_capacity() {
        // w ≡ 1, n=1, p=2: r_inner → 0 approaches the closed form 2
        let w = RadialWeight::constant(1);
        let q = CapacityQuery {
            p: 2.0,
            r_inner: 1e-6,
            r_outer: 1.0,
            domain: CapDomain::FullSpace,
        };
        let oracle = discrete_capacity_oracle(&w, &q, 4096).unwrap();
        assert_relative_eq!(oracle.value, 2.0, max_relative = 1e-5);
    }

    #[test]
    fn oracle_staircase_annulus() {
        let w = RadialWeight::dyadic_staircase();
        let q = CapacityQuery {
            p: 4.5,
            r_inner: 2.0f64.powi(-32), // α_5
            r_outer: 2.0f64.powi(-8),  // α_3
            domain: CapDomain::FullSpace,
        };
        let closed = annulus_capacity(&w, &q).unwrap().value;
        let oracle = discrete_capacity_oracle(&w, &q, 1 << 16).unwrap();
        assert_relative_eq!(closed, oracle.value, max_relative = 1e-3);
    }

    #[test]
    fn oracle_p1_matches_essinf() {
        let w = RadialWeight::power_log(2, -1.0, 0.0).unwrap();
        let q = CapacityQuery {
            p: 1.0,
            r_inner: 0.03,
            r_outer: 0.8,
            domain: CapDomain::FullSpace,
        };
        let closed = annulus_capacity(&w, &q).unwrap().value;
        let oracle = discrete_capacity_oracle(&w, &q, 4096).unwrap();
        assert_relative_eq!(closed, oracle.value, max_relative = 1e-3);
    }

    #[test]
    fn positivity_classifier_examples() {
        assert_eq!(
            classify_powerlog_positivity(2, 3.0, 0.0, 0.0).unwrap(),
            Positivity::Positive
        );
        assert_eq!(
            classify_powerlog_positivity(2, 2.0, 0.0, 1.5).unwrap(),
            Positivity::Positive
        );
        assert_eq!(
            classify_powerlog_positivity(2, 1.0, -1.0, -0.5).unwrap(),
            Positivity::Zero
        );
        assert_eq!(
            classify_powerlog_positivity(2, 1.0, -1.0, 0.0).unwrap(),
            Positivity::Positive
        );
        assert!(classify_powerlog_positivity(2, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn point_capacity_limit_positive_and_zero() {
        // positive: α < p-n with margin
        let w = RadialWeight::power_log(2, -1.5, 0.0).unwrap();
        let lim = point_capacity_limit(&w, 2.0, 1.0, CapDomain::FullSpace).unwrap();
        assert!(lim.converged && lim.positive);
        assert_relative_eq!(lim.limit, 3.0 * PI, max_relative = 1e-6);
        // zero: α > p-n with margin (dual diverges slowly)
        let w = RadialWeight::power_log(2, 0.5, 0.0).unwrap();
        let lim = point_capacity_limit(&w, 2.0, 1.0, CapDomain::FullSpace).unwrap();
        assert!(!lim.positive);
    }

    #[test]
    fn capacity_condition_powerlog() {
        // holds: α = -1.5 < p-n = 0
        let w = RadialWeight::power_log(2, -1.5, 0.0).unwrap();
        let rep = capacity_condition_check(
            &w,
            2.0,
            ((1e-6f64).log2(), 0.0),
            &ConditionConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.verdict, ConditionVerdict::Holds);
        assert!(rep.upper_bound_ok);
        // fails: unweighted R², p=2 has zero capacity
        let w = RadialWeight::constant(2);
        let rep = capacity_condition_check(
            &w,
            2.0,
            ((1e-6f64).log2(), 0.0),
            &ConditionConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.verdict, ConditionVerdict::Fails);
        assert!(rep.zero_capacity);
    }

    #[test]
    fn staircase_decay_below_threshold_at_critical_p() {
        let w = RadialWeight::dyadic_staircase();
        let p = 10.0 / 3.0;
        let ks: Vec<u32> = (2..=12).map(|j| 1u32 << j).collect();
        let seq = staircase_point_capacity_decay(&w, p, 2, &ks).unwrap();
        for w2 in seq.windows(2) {
            assert!(w2[1].cap_log2 < w2[0].cap_log2);
        }
        assert!(
            seq.last().unwrap().cap < 1e-8,
            "cap at K=4096: {}",
            seq.last().unwrap().cap
        );
        // at p = 4.5 the same series converges to a positive limit
        let seq = staircase_point_capacity_decay(&w, 4.5, 2, &ks).unwrap();
        let last = seq.last().unwrap().cap;
        let prev = seq[seq.len() - 2].cap;
        assert!(last > 0.0 && (last - prev).abs() <= 1e-9 * last);
    }
}
