//! Weighted measures of balls, doubling and decay-exponent estimation, and
//! the log-power integral asymptotics.
//!
//! μ(B_r) for centered balls is the exact one-dimensional integral of ŵ.
//! Off-center balls reduce to ∫ ŵ(ρ)·A(ρ; t, r) dρ where A is the fraction
//! of the ρ-sphere covered by the ball; the inner region where A ≡ 1 is
//! integrated in closed form so singular weights cost nothing extra.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mag::Mag;
use crate::quad::{adaptive, Integral};
use crate::weight::{phi, unit_ball_volume, RadialWeight};

/// μ(B_r) as a magnitude; exact piecewise closed forms per family.
pub fn mu_ball_mag(w: &RadialWeight, r: f64) -> Result<Mag> {
    assert!(r > 0.0);
    mu_ball_mag_log2(w, r.log2())
}

pub fn mu_ball_mag_log2(w: &RadialWeight, log2_r: f64) -> Result<Mag> {
    let m = w.n() as f64 - 1.0;
    match w.integral_pow_log2(m, 1.0, f64::NEG_INFINITY, log2_r) {
        Integral::Divergent => Err(Error::NonIntegrable(
            "measure of a ball diverged; weight validation should have caught this".into(),
        )),
        Integral::Finite(v) => Ok(v.mul(Mag::from_f64(w.omega()))),
    }
}

/// μ(B_r) in f64; may underflow for staircase-deep radii (use the mag form
/// there).
pub fn mu_ball(w: &RadialWeight, r: f64) -> Result<f64> {
    Ok(mu_ball_mag(w, r)?.to_f64())
}

/// μ of the annulus {r0 < |x| < r1}.
pub fn mu_annulus(w: &RadialWeight, r0: f64, r1: f64) -> Result<f64> {
    assert!(r0 >= 0.0 && r1 > r0);
    let m = w.n() as f64 - 1.0;
    match w.integral_pow(m, 1.0, r0, r1) {
        Integral::Divergent => Err(Error::NonIntegrable("annulus measure diverged".into())),
        Integral::Finite(v) => Ok(v.mul(Mag::from_f64(w.omega())).to_f64()),
    }
}

/// Fraction of the sphere of radius ρ (centered at the origin) lying inside
/// B(z, r) with |z| = t, via the polar cap angle
/// cos θ* = (t² + ρ² - r²)/(2tρ).
pub fn sphere_cap_fraction(n: u32, t: f64, rho: f64, r: f64) -> f64 {
    debug_assert!(n >= 2);
    if rho <= 0.0 || rho <= r - t {
        return 1.0;
    }
    if rho >= r + t || rho <= t - r {
        return 0.0;
    }
    let cos_theta = ((t * t + rho * rho - r * r) / (2.0 * t * rho)).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    match n {
        2 => theta / std::f64::consts::PI,
        3 => 0.5 * (1.0 - cos_theta),
        _ => {
            let m = (n - 2) as f64;
            let f = |x: f64| x.sin().powf(m);
            let num = adaptive(&f, 0.0, theta, &[], 1e-12, 200).unwrap_or(0.0);
            let den = adaptive(&f, 0.0, std::f64::consts::PI, &[], 1e-12, 200).unwrap_or(1.0);
            (num / den).clamp(0.0, 1.0)
        }
    }
}

/// μ(B(z, r)) for |z| = t, by spherical-cap reduction. For n = 1 the "cap"
/// degenerates to the overlap of (t-r, t+r) with the two half-lines.
pub fn mu_offcenter_ball(w: &RadialWeight, t: f64, r: f64, tol: f64) -> Result<f64> {
    match mu_offcenter_pow(w, 1.0, t, r, tol)? {
        Integral::Divergent => Err(Error::NonIntegrable("off-center measure diverged".into())),
        Integral::Finite(v) => Ok(v.to_f64()),
    }
}

/// ∫_{B(z,r)} w^s dx with |z| = t. Divergence (for dual exponents s < 0 on
/// balls containing the origin) is certified via the closed-form core, not
/// guessed from quadrature.
pub fn mu_offcenter_pow(w: &RadialWeight, s: f64, t: f64, r: f64, tol: f64) -> Result<Integral> {
    assert!(t >= 0.0 && r > 0.0);
    let n = w.n();
    let m = n as f64 - 1.0;

    if n == 1 {
        // interval (t-r, t+r): positive part plus the reflected negative part
        let mut total = Mag::ZERO;
        let pos_lo = (t - r).max(0.0);
        let pos_hi = t + r;
        match w.integral_pow(0.0, s, pos_lo, pos_hi) {
            Integral::Divergent => return Ok(Integral::Divergent),
            Integral::Finite(v) => total = total.add(v),
        }
        if t < r {
            match w.integral_pow(0.0, s, 0.0, r - t) {
                Integral::Divergent => return Ok(Integral::Divergent),
                Integral::Finite(v) => total = total.add(v),
            }
        }
        return Ok(Integral::Finite(total));
    }

    let omega = Mag::from_f64(w.omega());
    if t == 0.0 {
        return Ok(match w.integral_pow(m, s, 0.0, r) {
            Integral::Divergent => Integral::Divergent,
            Integral::Finite(v) => Integral::Finite(v.mul(omega)),
        });
    }

    let mut total = Mag::ZERO;
    let inner = (r - t).max(0.0);
    if inner > 0.0 {
        // cap fraction is exactly 1 here; the closed form carries any
        // singularity of w^s at the origin
        match w.integral_pow(m, s, 0.0, inner) {
            Integral::Divergent => return Ok(Integral::Divergent),
            Integral::Finite(v) => total = total.add(v.mul(omega)),
        }
    }
    let lo = inner.max(t - r).max(0.0);
    let hi = t + r;
    let omega_log2 = w.omega().log2();
    let f = |rho: f64| -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        let x = rho.log2();
        let val = omega_log2 + s * w.w_log2(x) + m * x;
        val.exp2() * sphere_cap_fraction(n, t, rho, r)
    };
    let mut pts = w.breakpoints_in(lo, hi);
    pts.push(t);
    if t - r > 0.0 {
        pts.push(t - r);
    }
    let v = adaptive(&f, lo, hi, &pts, tol, 4000)?;
    total = total.add(Mag::from_f64(v.max(0.0)));
    Ok(Integral::Finite(total))
}

/// Monte-Carlo estimate of μ(B(z, r)), |z| = t, with a fixed seed. Serves
/// as an independent oracle against the cap-reduction quadrature.
pub fn mu_offcenter_ball_mc(w: &RadialWeight, t: f64, r: f64, samples: u64, seed: u64) -> f64 {
    let n = w.n() as usize;
    assert!(n <= 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol = unit_ball_volume(w.n()) * r.powi(w.n() as i32);
    let mut acc = 0.0;
    for _ in 0..samples {
        // uniform point in the ball: gaussian direction, u^{1/n} radius
        let mut v = [0.0f64; 8];
        let mut norm2 = 0.0;
        for x in v.iter_mut().take(n) {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen();
            *x = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            norm2 += *x * *x;
        }
        let norm = norm2.sqrt().max(f64::MIN_POSITIVE);
        let u: f64 = rng.gen_range(0.0f64..1.0);
        let rad = r * u.powf(1.0 / n as f64);
        let mut dist2 = 0.0;
        for (i, x) in v.iter().enumerate().take(n) {
            let coord = x / norm * rad + if i == 0 { t } else { 0.0 };
            dist2 += coord * coord;
        }
        let rho = dist2.sqrt();
        if rho > 0.0 {
            acc += w.w(rho);
        }
    }
    vol * acc / samples as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoublingVerdict {
    Doubling,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoublingReport {
    pub constant_estimate: f64,
    pub refined_estimate: f64,
    pub witness_center: f64,
    pub witness_radius: f64,
    pub grid_points: usize,
    pub verdict: DoublingVerdict,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoublingConfig {
    pub t_max: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
    pub quad_tol: f64,
}

impl Default for DoublingConfig {
    fn default() -> Self {
        DoublingConfig {
            t_max: 1e2,
            r_min: 1e-4,
            r_max: 1e2,
            per_decade: 3,
            quad_tol: 1e-9,
        }
    }
}

/// Scans sup μ(2B)/μ(B) over a log grid of center distances and radii
/// (directions are irrelevant by radial symmetry). The verdict is
/// "doubling" when one grid refinement moves the maximum by less than 5%.
pub fn doubling_estimate(w: &RadialWeight, cfg: &DoublingConfig) -> Result<DoublingReport> {
    if !(cfg.r_min > 0.0 && cfg.r_max > cfg.r_min && cfg.per_decade >= 1) {
        return Err(Error::InvalidConfig("bad doubling scan window".into()));
    }
    let scan = |per_decade: usize| -> Result<(f64, f64, f64, usize)> {
        let radii = log_lattice(cfg.r_min, cfg.r_max, per_decade);
        let mut centers = vec![0.0];
        centers.extend(log_lattice(cfg.r_min, cfg.t_max, per_decade));
        let mut best = (0.0f64, 0.0, 0.0);
        let mut count = 0;
        for &t in &centers {
            for &r in &radii {
                let small = mu_offcenter_ball(w, t, r, cfg.quad_tol)?;
                let big = mu_offcenter_ball(w, t, 2.0 * r, cfg.quad_tol)?;
                if small > 0.0 && big.is_finite() {
                    let ratio = big / small;
                    count += 1;
                    if ratio > best.0 {
                        best = (ratio, t, r);
                    }
                }
            }
        }
        Ok((best.0, best.1, best.2, count))
    };
    let (coarse, wt, wr, count) = scan(cfg.per_decade)?;
    let (fine, ft, fr, _) = scan(cfg.per_decade * 2)?;
    let stable = coarse > 0.0 && (fine - coarse).abs() <= 0.05 * coarse;
    Ok(DoublingReport {
        constant_estimate: fine.max(coarse),
        refined_estimate: fine,
        witness_center: if fine >= coarse { ft } else { wt },
        witness_radius: if fine >= coarse { fr } else { wr },
        grid_points: count,
        verdict: if stable {
            DoublingVerdict::Doubling
        } else {
            DoublingVerdict::Inconclusive
        },
    })
}

/// Deterministic log10 lattice anchored at integer multiples of
/// 1/per_decade, so nested windows give nested grids.
pub fn log_lattice(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let step = 1.0 / per_decade as f64;
    let j0 = (lo.log10() / step).ceil() as i64;
    let j1 = (hi.log10() / step).floor() as i64;
    let mut v: Vec<f64> = (j0..=j1).map(|j| 10f64.powf(j as f64 * step)).collect();
    if v.first().map(|&x| x > lo * 1.0001).unwrap_or(true) {
        v.insert(0, lo);
    }
    if v.last().map(|&x| x < hi * 0.9999).unwrap_or(true) {
        v.push(hi);
    }
    v
}

/// Upper radius limit for decay-exponent estimation. The infinite case is
/// proxied by a finite radius and flagged in the report.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusLimit {
    Finite(f64),
    InfinityProxy(f64),
}

impl RadiusLimit {
    pub fn value(&self) -> f64 {
        match self {
            RadiusLimit::Finite(r) | RadiusLimit::InfinityProxy(r) => *r,
        }
    }
    pub fn is_proxy(&self) -> bool {
        matches!(self, RadiusLimit::InfinityProxy(_))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentConfig {
    pub r_min: f64,
    pub r0: RadiusLimit,
    /// Largest dyadic pair offset: pairs (r·2^-k, r) for k = 1..=k_max.
    pub k_max: u32,
    /// Lattice density, points per octave of radius.
    pub per_octave: usize,
}

impl ExponentConfig {
    pub fn new(r_min: f64, r0: RadiusLimit) -> Self {
        ExponentConfig {
            r_min,
            r0,
            k_max: 64,
            per_octave: 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeSample {
    pub log2_rho: f64,
    pub log2_r: f64,
    pub slope: f64,
}

/// Estimated decay exponent: Q̂ is the supremum of finite-window slopes
/// log(μ(B_r)/μ(B_ρ)) / log(r/ρ).
#[derive(Clone, Debug, Serialize)]
pub struct ExponentEstimate {
    pub q_hat: f64,
    pub window_log2: (f64, f64),
    pub r0_is_proxy: bool,
    pub max_pair: SlopeSample,
    pub saturated: bool,
    pub sample_count: usize,
    /// Strongest samples, capped for report size.
    pub samples: Vec<SlopeSample>,
}

pub fn exponent_estimate(w: &RadialWeight, cfg: &ExponentConfig) -> Result<ExponentEstimate> {
    let r0 = cfg.r0.value();
    if !(cfg.r_min > 0.0 && r0 > cfg.r_min) {
        return Err(Error::InvalidConfig("exponent window must be ordered".into()));
    }
    let lo = cfg.r_min.log2();
    let hi = r0.log2();

    // absolute lattice in log2 radius plus family breakpoints
    let step = 1.0 / cfg.per_octave as f64;
    let j0 = (lo / step).ceil() as i64;
    let j1 = (hi / step).floor() as i64;
    let mut upper: Vec<f64> = (j0..=j1).map(|j| j as f64 * step).collect();
    upper.push(hi);
    upper.extend(w.breakpoints_log2_in(lo, hi));
    upper.sort_by(|a, b| a.partial_cmp(b).unwrap());
    upper.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut cache: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    let mut mu_at = |x: f64| -> Result<f64> {
        if let Some(v) = cache.get(&x.to_bits()) {
            return Ok(*v);
        }
        let v = mu_ball_mag_log2(w, x)?.log2();
        cache.insert(x.to_bits(), v);
        Ok(v)
    };

    let mut bps = w.breakpoints_log2_in(lo, hi);
    bps.push(hi);

    let collect = |k_max: u32,
                       samples: &mut Vec<SlopeSample>,
                       mu_at: &mut dyn FnMut(f64) -> Result<f64>|
     -> Result<f64> {
        samples.clear();
        let mut q = 0.0f64;
        for &x in &upper {
            let mu_r = mu_at(x)?;
            for k in 1..=k_max {
                let xr = x - k as f64;
                if xr < lo {
                    break;
                }
                let slope = (mu_r - mu_at(xr)?) / k as f64;
                samples.push(SlopeSample {
                    log2_rho: xr,
                    log2_r: x,
                    slope,
                });
                q = q.max(slope);
            }
        }
        // breakpoint-to-breakpoint pairs catch slopes the dyadic offsets miss
        if bps.len() <= 256 {
            for i in 0..bps.len() {
                for j in (i + 1)..bps.len() {
                    let (xr, x) = (bps[i], bps[j]);
                    if x - xr < 1e-9 {
                        continue;
                    }
                    let slope = (mu_at(x)? - mu_at(xr)?) / (x - xr);
                    samples.push(SlopeSample {
                        log2_rho: xr,
                        log2_r: x,
                        slope,
                    });
                    q = q.max(slope);
                }
            }
        }
        Ok(q)
    };

    let mut samples: Vec<SlopeSample> = Vec::new();
    let q_hat = collect(cfg.k_max, &mut samples, &mut mu_at)?;
    if samples.len() < 8 {
        return Err(Error::WindowTooNarrow(format!(
            "only {} slope pairs in the window",
            samples.len()
        )));
    }
    let max_pair = *samples
        .iter()
        .max_by(|a, b| a.slope.partial_cmp(&b.slope).unwrap())
        .unwrap();
    let mut wide_samples = Vec::new();
    let q_wide = collect(cfg.k_max + 2, &mut wide_samples, &mut mu_at)?;
    let saturated = (q_wide - q_hat).abs() <= 0.01 * q_hat.max(1e-12);
    let count = samples.len();
    samples.sort_by(|a, b| b.slope.partial_cmp(&a.slope).unwrap());
    samples.truncate(256);
    Ok(ExponentEstimate {
        q_hat: q_wide.max(q_hat).max(0.0),
        window_log2: (lo, hi),
        r0_is_proxy: cfg.r0.is_proxy(),
        max_pair,
        saturated,
        sample_count: count,
        samples,
    })
}

/// Asymptotic class of ∫_0^r ρ^{a-1} φ(ρ)^b dρ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogPowerClass {
    PowerLog,
    LogPower,
    OnePlusLog,
    Divergent,
}

#[derive(Clone, Debug, Serialize)]
pub struct LogPowerIntegral {
    pub class: LogPowerClass,
    /// Representative of the comparability class: r^a φ(r)^b, φ(r)^{b+1},
    /// 1 + log r, or infinity.
    pub representative: f64,
    /// The integral itself when finite.
    pub numeric: Option<f64>,
}

pub fn log_power_integral(a: f64, b: f64, r: f64) -> LogPowerIntegral {
    assert!(r > 0.0);
    let (class, representative) = if a > 0.0 {
        (LogPowerClass::PowerLog, r.powf(a) * phi(r).powf(b))
    } else if a == 0.0 && b < -1.0 && r <= 1.0 {
        (LogPowerClass::LogPower, phi(r).powf(b + 1.0))
    } else if a == 0.0 && b < -1.0 {
        (LogPowerClass::OnePlusLog, 1.0 + r.ln())
    } else {
        (LogPowerClass::Divergent, f64::INFINITY)
    };
    let numeric = if class == LogPowerClass::Divergent {
        None
    } else {
        match crate::weight::powlog_integral_raw(a - 1.0, b, f64::NEG_INFINITY, r.log2()) {
            Integral::Divergent => None,
            Integral::Finite(v) => Some(v.to_f64()),
        }
    };
    LogPowerIntegral {
        class,
        representative,
        numeric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn mu_disc() {
        let w = RadialWeight::constant(2);
        assert_relative_eq!(mu_ball(&w, 2.0).unwrap(), 4.0 * PI, max_relative = 1e-12);
        // PowerLog n=2 alpha=-1: μ(B_r) = 2π r
        let w = RadialWeight::power_log(2, -1.0, 0.0).unwrap();
        assert_relative_eq!(
            mu_ball(&w, 0.37).unwrap(),
            2.0 * PI * 0.37,
            max_relative = 1e-10
        );
    }

    #[test]
    fn mu_staircase_alpha3_vs_trapezoid_oracle() {
        // closed-form piecewise integration vs a fine-grid trapezoid oracle
        let w = RadialWeight::dyadic_staircase();
        let r = 2.0f64.powi(-8);
        let got = mu_ball(&w, r).unwrap();
        let nodes = 1_000_000usize;
        let lo = r * 1e-12;
        let lg_lo = lo.ln();
        let h = (r.ln() - lg_lo) / nodes as f64;
        let mut acc = 0.0;
        let mut prev_rho = lo;
        let mut prev_f = w.w_hat(lo);
        for i in 1..=nodes {
            let rho = (lg_lo + h * i as f64).exp();
            let f = w.w_hat(rho);
            acc += 0.5 * (prev_f + f) * (rho - prev_rho);
            prev_rho = rho;
            prev_f = f;
        }
        assert_relative_eq!(got, acc, max_relative = 1e-8);
    }

    #[test]
    fn mu_additivity_against_annulus() {
        let w = RadialWeight::power_log(2, 0.7, -1.2).unwrap();
        let (r0, r1) = (0.02, 1.7);
        let whole = mu_ball(&w, r1).unwrap();
        let inner = mu_ball(&w, r0).unwrap();
        let ann = mu_annulus(&w, r0, r1).unwrap();
        assert_relative_eq!(whole - inner, ann, max_relative = 1e-9);
    }

    #[test]
    fn offcenter_reduces_to_centered_and_translates() {
        let w = RadialWeight::constant(2);
        assert_relative_eq!(
            mu_offcenter_ball(&w, 0.0, 1.0, 1e-10).unwrap(),
            PI,
            max_relative = 1e-10
        );
        // unweighted measure is translation invariant
        assert_relative_eq!(
            mu_offcenter_ball(&w, 5.0, 1.0, 1e-10).unwrap(),
            PI,
            max_relative = 1e-8
        );
        let w3 = RadialWeight::constant(3);
        assert_relative_eq!(
            mu_offcenter_ball(&w3, 2.5, 0.7, 1e-10).unwrap(),
            4.0 / 3.0 * PI * 0.7f64.powi(3),
            max_relative = 1e-8
        );
    }

    #[test]
    fn offcenter_n1_intervals() {
        // w = 1 on R: ball = interval of length 2r
        let w = RadialWeight::constant(1);
        assert_relative_eq!(
            mu_offcenter_ball(&w, 0.3, 1.0, 1e-10).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        // w = |x|: ∫_{-0.7}^{1.3} |x| dx = (0.49 + 1.69)/2
        let w = RadialWeight::power_log(1, 1.0, 0.0).unwrap();
        assert_relative_eq!(
            mu_offcenter_ball(&w, 0.3, 1.0, 1e-10).unwrap(),
            (0.49 + 1.69) / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn offcenter_vs_monte_carlo() {
        // PowerLog n=2 α=1: w ∈ [3,5] on B(4e1, 1), so 3π ≤ μ ≤ 5π
        let w = RadialWeight::power_log(2, 1.0, 0.0).unwrap();
        let v = mu_offcenter_ball(&w, 4.0, 1.0, 1e-10).unwrap();
        assert!(v >= 3.0 * PI && v <= 5.0 * PI, "v = {v}");
        let mc = mu_offcenter_ball_mc(&w, 4.0, 1.0, 10_000_000, 0xB0717E);
        assert_relative_eq!(v, mc, max_relative = 1e-3);
    }

    #[test]
    fn doubling_constant_weight_is_2n() {
        let w = RadialWeight::constant(2);
        let cfg = DoublingConfig {
            t_max: 10.0,
            r_min: 0.01,
            r_max: 10.0,
            per_decade: 2,
            quad_tol: 1e-9,
        };
        let rep = doubling_estimate(&w, &cfg).unwrap();
        assert_eq!(rep.verdict, DoublingVerdict::Doubling);
        assert_relative_eq!(rep.constant_estimate, 4.0, max_relative = 1e-6);
    }

    #[test]
    fn exponent_constant_weight_is_n() {
        for n in [1u32, 2, 3] {
            let w = RadialWeight::constant(n);
            let cfg = ExponentConfig::new(1e-6, RadiusLimit::Finite(1.0));
            let est = exponent_estimate(&w, &cfg).unwrap();
            assert_relative_eq!(est.q_hat, n as f64, max_relative = 1e-10);
            assert!(est.saturated);
        }
    }

    #[test]
    fn exponent_example_weight_finite_vs_proxy() {
        // w = |x|^-1 for |x|<=1 else 1, n=2: Q ~ 1 for finite R0, ~2 for the proxy
        let w = RadialWeight::piecewise(
            2,
            vec![
                crate::weight::Segment {
                    lo: 0.0,
                    hi: 1.0,
                    coeff: 1.0,
                    exponent: -1.0,
                },
                crate::weight::Segment {
                    lo: 1.0,
                    hi: f64::INFINITY,
                    coeff: 1.0,
                    exponent: 0.0,
                },
            ],
        )
        .unwrap();
        let est =
            exponent_estimate(&w, &ExponentConfig::new(1e-6, RadiusLimit::Finite(1.0))).unwrap();
        assert!((est.q_hat - 1.0).abs() <= 0.05, "q_hat = {}", est.q_hat);
        let est = exponent_estimate(
            &w,
            &ExponentConfig::new(1e-6, RadiusLimit::InfinityProxy(1e6)),
        )
        .unwrap();
        assert!((est.q_hat - 2.0).abs() <= 0.1, "q_hat = {}", est.q_hat);
        assert!(est.r0_is_proxy);
    }

    #[test]
    fn exponent_monotone_in_window() {
        let w = RadialWeight::dyadic_staircase();
        let narrow = exponent_estimate(
            &w,
            &ExponentConfig::new(2.0f64.powi(-64), RadiusLimit::Finite(2.0f64.powi(-4))),
        )
        .unwrap();
        let wide = exponent_estimate(
            &w,
            &ExponentConfig::new(2.0f64.powi(-128), RadiusLimit::Finite(2.0f64.powi(-4))),
        )
        .unwrap();
        assert!(wide.q_hat >= narrow.q_hat - 1e-9);
    }

    #[test]
    fn log_power_integral_classes() {
        // a=1, b=0: ∫_0^r dρ = r
        let out = log_power_integral(1.0, 0.0, 0.5);
        assert_eq!(out.class, LogPowerClass::PowerLog);
        assert_relative_eq!(out.representative, 0.5, max_relative = 1e-12);
        assert_relative_eq!(out.numeric.unwrap(), 0.5, max_relative = 1e-10);
        // a=0, b=-2, r=0.1: representative φ^{-1} = 1/ln 10; integral equals it
        let out = log_power_integral(0.0, -2.0, 0.1);
        assert_eq!(out.class, LogPowerClass::LogPower);
        assert_relative_eq!(out.representative, 1.0 / 10f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(out.numeric.unwrap(), 1.0 / 10f64.ln(), max_relative = 1e-9);
        // a<0: divergent
        let out = log_power_integral(-0.5, 3.0, 1.0);
        assert_eq!(out.class, LogPowerClass::Divergent);
        assert!(out.numeric.is_none());
        // a=0, b >= -1: divergent
        assert_eq!(
            log_power_integral(0.0, -1.0, 0.5).class,
            LogPowerClass::Divergent
        );
    }
}
