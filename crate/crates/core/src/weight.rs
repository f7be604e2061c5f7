//! Radial weight families and their derived profiles.
//!
//! A weight is a radial profile w(ρ) on (0, ∞) together with a dimension n.
//! Everything downstream consumes three derived quantities:
//!
//! * `w_hat(ρ) = ω_{n-1} w(ρ) ρ^{n-1}` — the radialized density, so that
//!   μ(B_r) = ∫_0^r ŵ dρ;
//! * `w_tilde(ρ) = |ρ|^{n-1} w(|ρ|)` — the even line weight;
//! * integrals ∫ ρ^m w(ρ)^s dρ with certified divergence detection, which
//!   back the measure, capacity and Muckenhoupt engines.
//!
//! All families are piecewise of the form C·ρ^E·φ(ρ)^F with
//! φ(ρ) = max(1, -log ρ), so the integrals are either exact power forms or
//! smooth one-dimensional quadratures after the substitution ρ = e^{-u}.
//! Radii and coefficients are carried in base-2 log scale; the dyadic
//! staircase needs radii far below the reach of linear f64.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mag::{log2_one_minus_exp2_neg, Mag, MagSum};
use crate::quad::{exp_power_integral, Integral};

/// φ's kink: below e^{-1} the log factor is active.
pub const PHI_KINK: f64 = 0.36787944117144233; // e^{-1}

const LN_2: f64 = std::f64::consts::LN_2;

/// φ(ρ) = max(1, -log ρ).
pub fn phi(rho: f64) -> f64 {
    (-rho.ln()).max(1.0)
}

fn phi_from_log2(x: f64) -> f64 {
    (-x * LN_2).max(1.0)
}

/// Surface area of the unit (n-1)-sphere in R^n, with ω_0 = 2.
pub fn sphere_surface_area(n: u32) -> f64 {
    assert!(n >= 1);
    // 2 π^{n/2} / Γ(n/2)
    let half = n as f64 / 2.0;
    let mut gamma = 1.0;
    let mut x = half;
    while x > 1.0 + 1e-12 {
        x -= 1.0;
        gamma *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        gamma *= std::f64::consts::PI.sqrt();
    }
    2.0 * std::f64::consts::PI.powf(half) / gamma
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: u32) -> f64 {
    sphere_surface_area(n) / n as f64
}

/// One power segment of a piecewise profile: w(ρ) = coeff · ρ^exponent on
/// (lo, hi].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub coeff: f64,
    #[serde(default)]
    pub exponent: f64,
}

#[derive(Clone, Debug)]
pub enum Family {
    /// w(ρ) = ρ^α φ(ρ)^β with α > -n.
    PowerLog { alpha: f64, beta: f64 },
    /// The fixed dyadic staircase on R²: α_k = 2^{-2^k}, β_k = α_k^{3/2},
    /// w = α_{k+1} on [α_{k+1}, β_k], w = ρ²/α_k on [β_k, α_k], w = ρ for
    /// ρ ≥ 1/2. `truncation_log2`, when set, freezes w below that radius.
    DyadicStaircase { truncation_log2: Option<f64> },
    /// Power segments partitioning (0, ∞).
    Piecewise { segments: Vec<Segment> },
    /// Log-linear interpolation through (ρ_i, w_i) samples, constant
    /// outside the sampled range.
    Tabulated { log2_rho: Vec<f64>, log2_w: Vec<f64> },
}

/// A validated, immutable radial weight.
#[derive(Clone, Debug)]
pub struct RadialWeight {
    n: u32,
    omega: f64,
    family: Family,
}

/// JSON weight specification. Unknown keys are rejected.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub family: String,
    #[serde(default)]
    pub n: Option<u32>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub segments: Option<Vec<Segment>>,
    #[serde(default)]
    pub samples: Option<Vec<[f64; 2]>>,
    /// Optional truncation radius for the staircase, as log2(ρ_min).
    #[serde(default)]
    pub rho_min_log2: Option<f64>,
}

/// A single C·ρ^E·φ^F piece with log2 radius bounds, descending order.
#[derive(Clone, Copy, Debug)]
struct Piece {
    lo_log2: f64,
    hi_log2: f64,
    coeff_log2: f64,
    rho_exp: f64,
    phi_exp: f64,
}

impl RadialWeight {
    pub fn power_log(n: u32, alpha: f64, beta: f64) -> Result<RadialWeight> {
        if n < 1 {
            return Err(Error::MalformedSpec("dimension n must be >= 1".into()));
        }
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::MalformedSpec("alpha and beta must be finite".into()));
        }
        if alpha <= -(n as f64) {
            return Err(Error::NonIntegrable(format!(
                "alpha = {alpha} <= -n = {}; the radialized density is not integrable at 0",
                -(n as f64)
            )));
        }
        Ok(RadialWeight {
            n,
            omega: sphere_surface_area(n),
            family: Family::PowerLog { alpha, beta },
        })
    }

    /// w ≡ 1.
    pub fn constant(n: u32) -> RadialWeight {
        RadialWeight::power_log(n, 0.0, 0.0).expect("constant weight is always valid")
    }

    pub fn dyadic_staircase() -> RadialWeight {
        RadialWeight {
            n: 2,
            omega: sphere_surface_area(2),
            family: Family::DyadicStaircase {
                truncation_log2: None,
            },
        }
    }

    pub fn dyadic_staircase_truncated(rho_min_log2: f64) -> Result<RadialWeight> {
        if !(rho_min_log2 < -1.0) {
            return Err(Error::MalformedSpec(
                "staircase truncation must lie below log2 rho = -1".into(),
            ));
        }
        Ok(RadialWeight {
            n: 2,
            omega: sphere_surface_area(2),
            family: Family::DyadicStaircase {
                truncation_log2: Some(rho_min_log2),
            },
        })
    }

    pub fn piecewise(n: u32, segments: Vec<Segment>) -> Result<RadialWeight> {
        if n < 1 {
            return Err(Error::MalformedSpec("dimension n must be >= 1".into()));
        }
        if segments.is_empty() {
            return Err(Error::MalformedSpec("piecewise weight needs segments".into()));
        }
        if segments[0].lo != 0.0 {
            return Err(Error::MalformedSpec(
                "first segment must start at rho = 0".into(),
            ));
        }
        if segments.last().unwrap().hi != f64::INFINITY {
            return Err(Error::MalformedSpec(
                "last segment must extend to rho = inf".into(),
            ));
        }
        for seg in &segments {
            if !(seg.coeff > 0.0) || !seg.coeff.is_finite() || !seg.exponent.is_finite() {
                return Err(Error::MalformedSpec(format!(
                    "segment on ({}, {}) must have finite positive coeff and finite exponent",
                    seg.lo, seg.hi
                )));
            }
            if !(seg.hi > seg.lo) {
                return Err(Error::MalformedSpec(format!(
                    "segment bounds ({}, {}) are not increasing",
                    seg.lo, seg.hi
                )));
            }
        }
        for pair in segments.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let gap = (b.lo - a.hi).abs();
            if gap > 1e-9 * a.hi.max(1e-300) {
                return Err(Error::MalformedSpec(format!(
                    "segments do not partition (0, inf): {} -> {}",
                    a.hi, b.lo
                )));
            }
        }
        // integrability of ŵ at 0: first segment exponent + n > 0
        if segments[0].exponent + n as f64 <= 0.0 {
            return Err(Error::NonIntegrable(format!(
                "first segment exponent {} <= -n",
                segments[0].exponent
            )));
        }
        Ok(RadialWeight {
            n,
            omega: sphere_surface_area(n),
            family: Family::Piecewise { segments },
        })
    }

    pub fn tabulated(n: u32, samples: &[[f64; 2]]) -> Result<RadialWeight> {
        if n < 1 {
            return Err(Error::MalformedSpec("dimension n must be >= 1".into()));
        }
        if samples.len() < 2 {
            return Err(Error::MalformedSpec(
                "tabulated weight needs at least two samples".into(),
            ));
        }
        let mut log2_rho = Vec::with_capacity(samples.len());
        let mut log2_w = Vec::with_capacity(samples.len());
        for s in samples {
            let (rho, w) = (s[0], s[1]);
            if !(rho > 0.0) || !rho.is_finite() {
                return Err(Error::MalformedSpec(format!("sample radius {rho} invalid")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::MalformedSpec(format!(
                    "sample value {w} at rho {rho} must be positive"
                )));
            }
            log2_rho.push(rho.log2());
            log2_w.push(w.log2());
        }
        if log2_rho.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::MalformedSpec(
                "sample radii must be strictly increasing".into(),
            ));
        }
        Ok(RadialWeight {
            n,
            omega: sphere_surface_area(n),
            family: Family::Tabulated { log2_rho, log2_w },
        })
    }

    /// Builds and validates a weight from a parsed spec.
    pub fn from_spec(spec: &WeightSpec) -> Result<RadialWeight> {
        let n = spec.n;
        match spec.family.as_str() {
            "constant" => Ok(RadialWeight::constant(n.unwrap_or(2))),
            "power_log" => {
                let n = n.ok_or_else(|| Error::MalformedSpec("power_log requires n".into()))?;
                RadialWeight::power_log(n, spec.alpha.unwrap_or(0.0), spec.beta.unwrap_or(0.0))
            }
            "dyadic_staircase" => {
                if let Some(n) = n {
                    if n != 2 {
                        return Err(Error::MalformedSpec(
                            "the dyadic staircase is a weight on R^2".into(),
                        ));
                    }
                }
                match spec.rho_min_log2 {
                    Some(m) => RadialWeight::dyadic_staircase_truncated(m),
                    None => Ok(RadialWeight::dyadic_staircase()),
                }
            }
            "piecewise" => {
                let n = n.ok_or_else(|| Error::MalformedSpec("piecewise requires n".into()))?;
                let segments = spec
                    .segments
                    .clone()
                    .ok_or_else(|| Error::MalformedSpec("piecewise requires segments".into()))?;
                RadialWeight::piecewise(n, segments)
            }
            "tabulated" => {
                let n = n.ok_or_else(|| Error::MalformedSpec("tabulated requires n".into()))?;
                let samples = spec
                    .samples
                    .as_ref()
                    .ok_or_else(|| Error::MalformedSpec("tabulated requires samples".into()))?;
                RadialWeight::tabulated(n, samples)
            }
            other => Err(Error::MalformedSpec(format!("unknown family '{other}'"))),
        }
    }

    pub fn from_json(json: &str) -> Result<RadialWeight> {
        let spec: WeightSpec =
            serde_json::from_str(json).map_err(|e| Error::MalformedSpec(e.to_string()))?;
        RadialWeight::from_spec(&spec)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match &self.family {
            Family::PowerLog { .. } => "power_log",
            Family::DyadicStaircase { .. } => "dyadic_staircase",
            Family::Piecewise { .. } => "piecewise",
            Family::Tabulated { .. } => "tabulated",
        }
    }

    /// log2 w at log2 radius. The staircase is evaluated entirely in log2
    /// space; other families are exact power-log forms.
    pub fn w_log2(&self, x: f64) -> f64 {
        match &self.family {
            Family::PowerLog { alpha, beta } => {
                alpha * x + beta * phi_from_log2(x).log2()
            }
            Family::DyadicStaircase { truncation_log2 } => {
                let x = match truncation_log2 {
                    Some(m) => x.max(*m),
                    None => x,
                };
                staircase_w_log2(x)
            }
            Family::Piecewise { segments } => {
                let rho = x.exp2();
                let seg = segments
                    .iter()
                    .find(|s| rho <= s.hi)
                    .unwrap_or_else(|| segments.last().unwrap());
                seg.coeff.log2() + seg.exponent * x
            }
            Family::Tabulated { log2_rho, log2_w } => {
                if x <= log2_rho[0] {
                    return log2_w[0];
                }
                if x >= *log2_rho.last().unwrap() {
                    return *log2_w.last().unwrap();
                }
                let i = log2_rho.partition_point(|&r| r < x).max(1) - 1;
                let t = (x - log2_rho[i]) / (log2_rho[i + 1] - log2_rho[i]);
                log2_w[i] + t * (log2_w[i + 1] - log2_w[i])
            }
        }
    }

    /// w(ρ), ρ > 0. May under/overflow for extreme radii; `w_log2` is exact.
    pub fn w(&self, rho: f64) -> f64 {
        assert!(rho > 0.0);
        self.w_log2(rho.log2()).exp2()
    }

    /// ŵ(ρ) = ω_{n-1} w(ρ) ρ^{n-1}.
    pub fn w_hat(&self, rho: f64) -> f64 {
        self.w_hat_log2(rho.log2()).exp2()
    }

    pub fn w_hat_log2(&self, x: f64) -> f64 {
        self.omega.log2() + self.w_log2(x) + (self.n as f64 - 1.0) * x
    }

    /// w̃(ρ) = |ρ|^{n-1} w(|ρ|), the even line weight.
    pub fn w_tilde(&self, rho: f64) -> f64 {
        let a = rho.abs();
        assert!(a > 0.0);
        (self.w_log2(a.log2()) + (self.n as f64 - 1.0) * a.log2()).exp2()
    }

    /// Kinks and family breakpoints inside (lo, hi), in linear radii.
    pub fn breakpoints_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .breakpoints_log2_in(
                if lo > 0.0 { lo.log2() } else { -1060.0 },
                hi.log2(),
            )
            .iter()
            .map(|x| x.exp2())
            .collect();
        pts.retain(|&p| p > lo && p < hi && p.is_finite() && p > 0.0);
        pts
    }

    /// Same in log2 radii.
    pub fn breakpoints_log2_in(&self, lo_log2: f64, hi_log2: f64) -> Vec<f64> {
        let mut pts = Vec::new();
        let mut push = |x: f64| {
            if x > lo_log2 && x < hi_log2 {
                pts.push(x);
            }
        };
        match &self.family {
            Family::PowerLog { .. } => {
                push(PHI_KINK.log2());
                push(0.0);
            }
            Family::DyadicStaircase { truncation_log2 } => {
                push(-1.0);
                let floor = truncation_log2.unwrap_or(-1070.0).max(lo_log2 - 2.0);
                let mut k = 0u32;
                loop {
                    let alpha = -(2.0f64.powi(k as i32 + 1));
                    let beta = -1.5 * 2.0f64.powi(k as i32);
                    if beta < floor && alpha < floor {
                        break;
                    }
                    push(beta);
                    push(alpha);
                    k += 1;
                    if k > 2100 {
                        break;
                    }
                }
                if let Some(m) = truncation_log2 {
                    push(*m);
                }
            }
            Family::Piecewise { segments } => {
                for s in segments {
                    if s.hi.is_finite() && s.hi > 0.0 {
                        push(s.hi.log2());
                    }
                }
            }
            Family::Tabulated { log2_rho, .. } => {
                for &x in log2_rho {
                    push(x);
                }
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }

    /// ∫_{lo}^{hi} ρ^m w(ρ)^s dρ with certified divergence detection.
    /// `lo` may be 0.
    pub fn integral_pow(&self, m: f64, s: f64, lo: f64, hi: f64) -> Integral {
        assert!(lo >= 0.0 && hi > lo);
        let lo_log2 = if lo == 0.0 {
            f64::NEG_INFINITY
        } else {
            lo.log2()
        };
        self.integral_pow_log2(m, s, lo_log2, hi.log2())
    }

    /// Same with log2 bounds; `lo_log2 = -inf` integrates from 0.
    pub fn integral_pow_log2(&self, m: f64, s: f64, lo_log2: f64, hi_log2: f64) -> Integral {
        assert!(hi_log2 > lo_log2);
        match &self.family {
            Family::PowerLog { alpha, beta } => {
                powlog_integral(s * alpha + m, s * beta, lo_log2, hi_log2)
            }
            Family::DyadicStaircase { truncation_log2 } => {
                staircase_integral(m, s, lo_log2, hi_log2, *truncation_log2)
            }
            Family::Piecewise { .. } | Family::Tabulated { .. } => {
                let mut sum = MagSum::new();
                for piece in self.finite_pieces_desc(lo_log2, hi_log2) {
                    match piece_integral(&piece, m, s) {
                        Integral::Divergent => return Integral::Divergent,
                        Integral::Finite(v) => sum.add(v),
                    }
                }
                Integral::Finite(sum.total())
            }
        }
    }

    /// essinf over (lo, hi) of ρ^m w(ρ), as a magnitude.
    pub fn essinf_pow(&self, m: f64, lo_log2: f64, hi_log2: f64) -> Mag {
        assert!(hi_log2 > lo_log2);
        match &self.family {
            Family::PowerLog { alpha, beta } => {
                powlog_essinf(*alpha + m, *beta, lo_log2, hi_log2)
            }
            Family::DyadicStaircase { truncation_log2 } => {
                staircase_essinf(m, lo_log2, hi_log2, *truncation_log2)
            }
            Family::Piecewise { .. } | Family::Tabulated { .. } => {
                let mut best = Mag::INFINITY;
                for piece in self.finite_pieces_desc(lo_log2, hi_log2) {
                    best = best.min(piece_min(&piece, m));
                    if best.is_zero() {
                        break;
                    }
                }
                best
            }
        }
    }

    /// Materialized pieces for the finite families, descending, clipped.
    fn finite_pieces_desc(&self, lo_log2: f64, hi_log2: f64) -> Vec<Piece> {
        let mut out = Vec::new();
        match &self.family {
            Family::Piecewise { segments } => {
                for seg in segments.iter().rev() {
                    let s_lo = if seg.lo == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        seg.lo.log2()
                    };
                    let s_hi = if seg.hi.is_finite() {
                        seg.hi.log2()
                    } else {
                        f64::INFINITY
                    };
                    let lo = s_lo.max(lo_log2);
                    let hi = s_hi.min(hi_log2);
                    if hi > lo {
                        out.push(Piece {
                            lo_log2: lo,
                            hi_log2: hi,
                            coeff_log2: seg.coeff.log2(),
                            rho_exp: seg.exponent,
                            phi_exp: 0.0,
                        });
                    }
                }
            }
            Family::Tabulated { log2_rho, log2_w } => {
                let last = log2_rho.len() - 1;
                // above the table: constant
                if hi_log2 > log2_rho[last] {
                    let lo = log2_rho[last].max(lo_log2);
                    if hi_log2 > lo {
                        out.push(Piece {
                            lo_log2: lo,
                            hi_log2,
                            coeff_log2: log2_w[last],
                            rho_exp: 0.0,
                            phi_exp: 0.0,
                        });
                    }
                }
                for i in (0..last).rev() {
                    let lo = log2_rho[i].max(lo_log2);
                    let hi = log2_rho[i + 1].min(hi_log2);
                    if hi > lo {
                        let slope =
                            (log2_w[i + 1] - log2_w[i]) / (log2_rho[i + 1] - log2_rho[i]);
                        out.push(Piece {
                            lo_log2: lo,
                            hi_log2: hi,
                            coeff_log2: log2_w[i] - slope * log2_rho[i],
                            rho_exp: slope,
                            phi_exp: 0.0,
                        });
                    }
                }
                // below the table: constant
                if lo_log2 < log2_rho[0] {
                    let hi = log2_rho[0].min(hi_log2);
                    if hi > lo_log2 {
                        out.push(Piece {
                            lo_log2,
                            hi_log2: hi,
                            coeff_log2: log2_w[0],
                            rho_exp: 0.0,
                            phi_exp: 0.0,
                        });
                    }
                }
            }
            _ => unreachable!("finite_pieces_desc is only for piecewise/tabulated"),
        }
        out
    }
}

/// w on the staircase in log2 coordinates (untruncated).
fn staircase_w_log2(x: f64) -> f64 {
    if x >= -1.0 {
        return x; // w = ρ for ρ >= 1/2
    }
    // piece index: unique k >= 0 with -2^{k+1} <= x < -2^k
    let k = (-x).log2().ceil() - 1.0;
    let k = k.max(0.0);
    let pow_k = 2.0f64.powf(k);
    // guard against rounding at exact piece tops
    let (alpha_top, beta) = (-pow_k, -1.5 * pow_k);
    if x > alpha_top {
        // numerical spill just above the piece: treat as top of piece k-1
        return staircase_w_log2(alpha_top);
    }
    if x >= beta {
        // quadratic branch: w = ρ²/α_k, log2 = 2x + 2^k
        2.0 * x + pow_k
    } else {
        // constant branch: w = α_{k+1}
        -2.0 * pow_k
    }
}

/// Exact integral over one power(-log) piece of ρ^m (C ρ^E φ^F)^s.
fn piece_integral(piece: &Piece, m: f64, s: f64) -> Integral {
    let c = s * piece.coeff_log2;
    let e = s * piece.rho_exp + m;
    let f = s * piece.phi_exp;
    if f == 0.0 {
        power_integral_log2(c, e + 1.0, piece.lo_log2, piece.hi_log2)
    } else {
        // ρ = e^{-u}: ∫ C ρ^E φ^F dρ = C ∫ e^{-(E+1)u} u^F du
        debug_assert!(piece.hi_log2 <= PHI_KINK.log2() + 1e-9);
        let u1 = -piece.hi_log2 * LN_2;
        let u2 = if piece.lo_log2 == f64::NEG_INFINITY {
            None
        } else {
            Some(-piece.lo_log2 * LN_2)
        };
        match exp_power_integral(e + 1.0, f, u1.max(1.0), u2) {
            Integral::Divergent => Integral::Divergent,
            Integral::Finite(v) => Integral::Finite(v.mul(Mag::from_log2(c))),
        }
    }
}

/// ∫ 2^c ρ^{a-1} dρ over log2 bounds; `a` is the exponent-plus-one.
fn power_integral_log2(c: f64, a: f64, lo_log2: f64, hi_log2: f64) -> Integral {
    if hi_log2 <= lo_log2 {
        return Integral::Finite(Mag::ZERO);
    }
    if a == 0.0 {
        if lo_log2 == f64::NEG_INFINITY {
            return Integral::Divergent;
        }
        return Integral::Finite(Mag::from_log2(
            c + ((hi_log2 - lo_log2) * LN_2).log2(),
        ));
    }
    if a > 0.0 {
        let d = a * (hi_log2 - lo_log2);
        Integral::Finite(Mag::from_log2(
            c + a * hi_log2 + log2_one_minus_exp2_neg(d) - a.log2(),
        ))
    } else {
        if lo_log2 == f64::NEG_INFINITY {
            return Integral::Divergent;
        }
        let d = -a * (hi_log2 - lo_log2);
        Integral::Finite(Mag::from_log2(
            c + a * lo_log2 + log2_one_minus_exp2_neg(d) - (-a).log2(),
        ))
    }
}

/// Minimum of 2^c ρ^{E} φ^{F} ... restricted to one piece, times ρ^m.
fn piece_min(piece: &Piece, m: f64) -> Mag {
    debug_assert_eq!(piece.phi_exp, 0.0);
    let e = piece.rho_exp + m;
    let at = |x: f64| -> Mag {
        if x == f64::NEG_INFINITY {
            // limit toward 0
            return if e > 0.0 {
                Mag::ZERO
            } else if e < 0.0 {
                Mag::INFINITY
            } else {
                Mag::from_log2(piece.coeff_log2)
            };
        }
        Mag::from_log2(piece.coeff_log2 + e * x)
    };
    at(piece.lo_log2).min(at(piece.hi_log2))
}

/// ∫ ρ^{a-1} φ^b dρ over log2 radii with divergence detection; the
/// integral behind the asymptotics classifier.
pub(crate) fn powlog_integral_raw(e: f64, b: f64, lo_log2: f64, hi_log2: f64) -> Integral {
    powlog_integral(e, b, lo_log2, hi_log2)
}

/// ∫ ρ^{E} φ^B dρ over log2 bounds for the power-log family
/// (coefficient 1), split at the φ kink.
fn powlog_integral(e: f64, b: f64, lo_log2: f64, hi_log2: f64) -> Integral {
    let kink = PHI_KINK.log2();
    let mut sum = MagSum::new();
    // pure power part above the kink
    if hi_log2 > kink {
        match power_integral_log2(0.0, e + 1.0, lo_log2.max(kink), hi_log2) {
            Integral::Divergent => return Integral::Divergent,
            Integral::Finite(v) => sum.add(v),
        }
    }
    // log-active part below the kink
    if lo_log2 < kink {
        let hi = hi_log2.min(kink);
        if b == 0.0 {
            match power_integral_log2(0.0, e + 1.0, lo_log2, hi) {
                Integral::Divergent => return Integral::Divergent,
                Integral::Finite(v) => sum.add(v),
            }
        } else {
            let u1 = (-hi * LN_2).max(1.0);
            let u2 = if lo_log2 == f64::NEG_INFINITY {
                None
            } else {
                Some(-lo_log2 * LN_2)
            };
            match exp_power_integral(e + 1.0, b, u1, u2) {
                Integral::Divergent => return Integral::Divergent,
                Integral::Finite(v) => sum.add(v),
            }
        }
    }
    Integral::Finite(sum.total())
}

/// essinf of ρ^E φ^B over (lo, hi) in log2 radii.
fn powlog_essinf(e: f64, b: f64, lo_log2: f64, hi_log2: f64) -> Mag {
    let kink = PHI_KINK.log2();
    let val = |x: f64| -> Mag {
        if x == f64::NEG_INFINITY {
            // ρ -> 0 limit of ρ^E φ^B
            return if e > 0.0 {
                Mag::ZERO
            } else if e < 0.0 {
                Mag::INFINITY
            } else if b > 0.0 {
                Mag::INFINITY
            } else if b < 0.0 {
                Mag::ZERO
            } else {
                Mag::ONE
            };
        }
        Mag::from_log2(e * x + b * phi_from_log2(x).log2())
    };
    let mut best = val(lo_log2).min(val(hi_log2));
    // kink is a candidate
    if lo_log2 < kink && kink < hi_log2 {
        best = best.min(val(kink));
    }
    // interior critical point of ρ^E φ^B below the kink: φ* = B/E
    if e != 0.0 && b != 0.0 {
        let phi_star = b / e;
        if phi_star >= 1.0 {
            let x_star = -phi_star / LN_2; // ρ* = e^{-φ*}
            if x_star > lo_log2 && x_star < hi_log2.min(kink) {
                best = best.min(val(x_star));
            }
        }
    }
    best
}

/// Descending staircase integration of ∫ ρ^m w^s dρ. Piece exponents are
/// assembled as (coefficient)·2^k so that no intermediate overflows even
/// for piece indices far beyond f64 radii. Convergence of the cascade is
/// super-geometric when it happens; a non-decreasing contribution run in
/// the asymptotic regime certifies divergence.
fn staircase_integral(
    m: f64,
    s: f64,
    lo_log2: f64,
    hi_log2: f64,
    truncation_log2: Option<f64>,
) -> Integral {
    let mut sum = MagSum::new();
    let floor = match truncation_log2 {
        Some(t) => t.max(lo_log2),
        None => lo_log2,
    };

    // top region: w = ρ on ρ >= 1/2
    if hi_log2 > -1.0 {
        match power_integral_log2(0.0, s + m + 1.0, floor.max(-1.0), hi_log2) {
            Integral::Divergent => return Integral::Divergent,
            Integral::Finite(v) => sum.add(v),
        }
    }

    // staircase pieces k = 0, 1, ... descending while above `floor`
    if hi_log2 > -1.0 || hi_log2 > floor {
        let mut prev_contrib: Option<f64> = None;
        let mut flat_run = 0u32;
        let mut k: u32 = 0;
        loop {
            let pow_k = 2.0f64.powi(k as i32); // saturates to inf for huge k
            let alpha_k = -pow_k;
            let beta_k = -1.5 * pow_k;
            let alpha_k1 = -2.0 * pow_k;
            if alpha_k1 >= hi_log2 {
                // piece entirely above integration range
                k += 1;
                continue;
            }
            let mut piece_total = MagSum::new();
            // quadratic branch on (β_k, α_k): integrand 2^{s·2^k} ρ^{2s+m}
            {
                let lo = beta_k.max(floor);
                let hi = alpha_k.min(hi_log2);
                if hi > lo {
                    let a = 2.0 * s + m + 1.0;
                    // lead exponent folded to avoid inf - inf
                    let v = if a > 0.0 {
                        let lead = if hi == alpha_k {
                            -pow_k * (a - s)
                        } else {
                            s * pow_k + a * hi
                        };
                        finite_or_return(lead, a * (hi - lo), a.log2())
                    } else if a < 0.0 {
                        let lead = if lo == beta_k {
                            -pow_k * (1.5 * a - s)
                        } else {
                            s * pow_k + a * lo
                        };
                        finite_or_return(lead, -a * (hi - lo), (-a).log2())
                    } else {
                        Mag::from_log2(s * pow_k + ((hi - lo) * LN_2).log2())
                    };
                    piece_total.add(v);
                }
            }
            // constant branch on (α_{k+1}, β_k): integrand 2^{-2s·2^k} ρ^m
            {
                let lo = alpha_k1.max(floor);
                let hi = beta_k.min(hi_log2);
                if hi > lo {
                    let a = m + 1.0;
                    let v = if a > 0.0 {
                        let lead = if hi == beta_k {
                            -pow_k * (2.0 * s + 1.5 * a)
                        } else {
                            -2.0 * s * pow_k + a * hi
                        };
                        finite_or_return(lead, a * (hi - lo), a.log2())
                    } else if a < 0.0 {
                        let lead = if lo == alpha_k1 {
                            -2.0 * pow_k * (s + a)
                        } else {
                            -2.0 * s * pow_k + a * lo
                        };
                        finite_or_return(lead, -a * (hi - lo), (-a).log2())
                    } else {
                        Mag::from_log2(-2.0 * s * pow_k + ((hi - lo) * LN_2).log2())
                    };
                    piece_total.add(v);
                }
            }
            let contrib = piece_total.total();
            if contrib.is_infinite() {
                return Integral::Divergent;
            }
            sum.add(contrib);

            // reached the bottom of the requested range?
            if alpha_k1 <= floor {
                break;
            }

            // divergence / convergence bookkeeping on the infinite cascade
            if !contrib.is_zero() {
                if let Some(prev) = prev_contrib {
                    if k >= 12 && contrib.log2() >= prev - 1e-6 {
                        flat_run += 1;
                        if flat_run >= 4 {
                            return Integral::Divergent;
                        }
                    } else {
                        flat_run = 0;
                    }
                }
                prev_contrib = Some(contrib.log2());
                let total = sum.total();
                if !total.is_zero() && contrib.log2() < total.log2() - 80.0 {
                    break; // super-geometric tail is exhausted
                }
            } else if prev_contrib.is_some() {
                break; // contributions underflowed to zero: tail negligible
            }
            k += 1;
            if k > 3200 {
                // only reachable for pathological exponents; the cascade is
                // either divergent-flat or done long before this
                return Integral::Divergent;
            }
        }
    }

    // truncated constant tail below the floor
    if let Some(t) = truncation_log2 {
        if lo_log2 < t && t > lo_log2 {
            let w_floor = staircase_w_log2(t);
            match power_integral_log2(s * w_floor, m + 1.0, lo_log2, t.min(hi_log2)) {
                Integral::Divergent => return Integral::Divergent,
                Integral::Finite(v) => sum.add(v),
            }
        }
    }

    Integral::Finite(sum.total())
}

/// Assembles lead + log2(1 - 2^-d) - log2|a| into a magnitude, handling
/// saturated leads.
fn finite_or_return(lead: f64, d: f64, a_log2: f64) -> Mag {
    if lead == f64::NEG_INFINITY {
        return Mag::ZERO;
    }
    if lead == f64::INFINITY {
        return Mag::INFINITY;
    }
    let d = if d.is_finite() { d } else { f64::INFINITY };
    Mag::from_log2(lead + log2_one_minus_exp2_neg(d.max(1e-300)) - a_log2)
}

/// essinf of ρ^m w over (lo, hi) for the staircase.
fn staircase_essinf(m: f64, lo_log2: f64, hi_log2: f64, truncation_log2: Option<f64>) -> Mag {
    let floor = truncation_log2.unwrap_or(f64::NEG_INFINITY).max(lo_log2);
    let val = |x: f64| Mag::from_log2(m * x + staircase_w_log2(x));
    let mut best = Mag::INFINITY;
    // top region: ρ^{m+1} on (max(floor,-1), hi), monotone, ends suffice
    if hi_log2 > -1.0 {
        best = best.min(val(hi_log2));
        best = best.min(val(floor.max(-1.0)));
    }
    if floor >= hi_log2 {
        return best;
    }
    // walk pieces downward; per-piece minima are attained at piece ends
    let mut k: u32 = 0;
    let mut worse_run = 0u32;
    loop {
        let pow_k = 2.0f64.powi(k as i32);
        let alpha_k = -pow_k;
        let beta_k = -1.5 * pow_k;
        let alpha_k1 = -2.0 * pow_k;
        if alpha_k1 >= hi_log2 {
            k += 1;
            continue;
        }
        let lo = alpha_k1.max(floor);
        let hi = alpha_k.min(hi_log2);
        if hi > lo {
            let mut piece_best = val(hi.min(hi_log2)).min(val(lo));
            if beta_k > lo && beta_k < hi {
                piece_best = piece_best.min(val(beta_k));
            }
            if piece_best < best {
                best = piece_best;
                worse_run = 0;
            } else if k >= 8 {
                worse_run += 1;
                if worse_run >= 3 {
                    break; // minima are now monotonically receding
                }
            }
        }
        if alpha_k1 <= floor {
            break;
        }
        if best.log2() < -4200.0 {
            return Mag::ZERO; // untruncated limit toward 0
        }
        k += 1;
        if k > 3200 {
            break;
        }
    }
    // truncated constant tail
    if let Some(t) = truncation_log2 {
        if lo_log2 < t {
            let w_floor = staircase_w_log2(t);
            let e = m;
            let at = |x: f64| {
                if x == f64::NEG_INFINITY {
                    if e > 0.0 {
                        Mag::ZERO
                    } else if e < 0.0 {
                        Mag::INFINITY
                    } else {
                        Mag::from_log2(w_floor)
                    }
                } else {
                    Mag::from_log2(w_floor + e * x)
                }
            };
            best = best.min(at(lo_log2)).min(at(t.min(hi_log2)));
        }
    } else if lo_log2 == f64::NEG_INFINITY && m > -4.0 / 3.0 {
        // ρ^m w -> 0 along β_k whenever 1.5 m + 2 > 0
        return Mag::ZERO;
    }
    best
}
