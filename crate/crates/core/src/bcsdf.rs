//! Fiber scattering function for hair.
//!
//! Scattering off a fiber is split into lobes indexed by the number of
//! internal path segments: `p = 0` is surface reflection (R), `p = 1`
//! transmission through the fiber (TT), `p = 2` one internal reflection
//! (TRT), and a residual lobe collects every longer path. Each lobe is a
//! product of a longitudinal term `M_p`, an attenuation `A_p` and an
//! azimuthal term `N_p`.
//!
//! Directions are expressed in a fiber-local frame whose `x` axis is the
//! fiber tangent; `sin(theta) = w.x` and the azimuth is `atan2(w.z, w.y)`.
//! The curve offset `h` in `[-1, 1]` is measured along the local `y` axis.
//!
//! [`Bcsdf::eval`] returns `f` such that `f * |cos(theta_i)|` integrates
//! over the sphere to the scattered fraction of energy, where `theta_i` is
//! the longitudinal angle of `wi`. The renderer applies the same cosine.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{safe_asin, safe_sqrt, sqr, Rgb, Vec3, PI};
use crate::params::{total_absorption, HairParams, SpectralAbsorption};

/// Number of explicit lobes; the lobe at index `P_MAX` is the residual.
pub const P_MAX: usize = 3;

pub const DEFAULT_ETA: f64 = 1.55;
pub const DEFAULT_BETA_M: f64 = 0.3;
pub const DEFAULT_BETA_N: f64 = 0.3;
pub const DEFAULT_ALPHA_DEGREES: f64 = 2.0;

const SQRT_PI_OVER_8: f64 = 0.626_657_068_657_750_1;
const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberMaterial {
    pub sigma_a: SpectralAbsorption,
    pub eta: f64,
    pub beta_m: f64,
    pub beta_n: f64,
    /// Cuticle scale tilt in radians.
    pub alpha: f64,
}

impl FiberMaterial {
    pub fn new(
        sigma_a: SpectralAbsorption,
        eta: f64,
        beta_m: f64,
        beta_n: f64,
        alpha: f64,
    ) -> Result<Self> {
        if !(eta > 1.0 && eta.is_finite()) {
            return Err(Error::Config(format!("refractive index must exceed 1, got {eta}")));
        }
        for (name, b) in [("beta_m", beta_m), ("beta_n", beta_n)] {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {b}")));
            }
        }
        if !alpha.is_finite() {
            return Err(Error::Config("cuticle tilt must be finite".into()));
        }
        Ok(FiberMaterial {
            sigma_a,
            eta,
            beta_m,
            beta_n,
            alpha,
        })
    }

    /// Material with default optics and the given absorption.
    pub fn with_absorption(sigma_a: SpectralAbsorption) -> Self {
        FiberMaterial {
            sigma_a,
            eta: DEFAULT_ETA,
            beta_m: DEFAULT_BETA_M,
            beta_n: DEFAULT_BETA_N,
            alpha: DEFAULT_ALPHA_DEGREES.to_radians(),
        }
    }

    /// Material for a hair color at the pipeline's fixed roughness.
    pub fn from_hair(h: &HairParams) -> Self {
        Self::with_absorption(total_absorption(h, DEFAULT_BETA_N))
    }

    /// Longitudinal variances `v_p` for `p = 0..=P_MAX`.
    pub fn lobe_variances(&self) -> [f64; P_MAX + 1] {
        let b = self.beta_m;
        let v0 = sqr(0.726 * b + 0.812 * b * b + 3.7 * b.powi(20));
        [v0, 0.25 * v0, 4.0 * v0, 4.0 * v0]
    }

    /// Scale of the trimmed logistic azimuthal lobes.
    pub fn logistic_scale(&self) -> f64 {
        let b = self.beta_n;
        SQRT_PI_OVER_8 * (0.265 * b + 1.194 * b * b + 5.372 * b.powi(22))
    }
}

/// Sampled incident direction together with `eval` and `pdf` at it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterSample {
    pub wi: Vec3,
    pub value: Rgb,
    pub pdf: f64,
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    if x.abs() > 30.0 {
        return log_bessel_i0(x).exp();
    }
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// `ln(I0(x))`, switching to the asymptotic expansion for large arguments.
pub fn log_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 30.0 {
        return bessel_i0(x).ln();
    }
    let r = 1.0 / (8.0 * x);
    let series = 1.0 + r + 4.5 * r * r + 37.5 * r.powi(3) + 459.375 * r.powi(4);
    x - 0.5 * (2.0 * PI * x).ln() + series.ln()
}

/// Longitudinal scattering density with variance `v`. Normalized so that
/// its integral against `cos(theta_i)` over `[-pi/2, pi/2]` is one.
pub fn longitudinal_m(v: f64, sin_theta_i: f64, cos_theta_i: f64, sin_theta_o: f64, cos_theta_o: f64) -> f64 {
    let a = cos_theta_i * cos_theta_o / v;
    let b = sin_theta_i * sin_theta_o / v;
    if v <= 0.1 {
        (log_bessel_i0(a) - b - 1.0 / v + LN_2 + (1.0 / (2.0 * v)).ln()).exp()
    } else {
        (-b).exp() * bessel_i0(a) / ((1.0 / v).sinh() * 2.0 * v)
    }
}

fn logistic(x: f64, s: f64) -> f64 {
    let x = x.abs();
    let e = (-x / s).exp();
    e / (s * sqr(1.0 + e))
}

fn logistic_cdf(x: f64, s: f64) -> f64 {
    1.0 / (1.0 + (-x / s).exp())
}

fn trimmed_logistic(x: f64, s: f64, a: f64, b: f64) -> f64 {
    logistic(x, s) / (logistic_cdf(b, s) - logistic_cdf(a, s))
}

fn sample_trimmed_logistic(u: f64, s: f64, a: f64, b: f64) -> f64 {
    let k = logistic_cdf(b, s) - logistic_cdf(a, s);
    let x = -s * (1.0 / (u * k + logistic_cdf(a, s)) - 1.0).ln();
    x.clamp(a, b)
}

/// Wraps an angle onto `[-pi, pi]`.
pub fn wrap_angle(mut phi: f64) -> f64 {
    while phi > PI {
        phi -= 2.0 * PI;
    }
    while phi < -PI {
        phi += 2.0 * PI;
    }
    phi
}

/// Azimuthal deflection of lobe `p` for a perfectly smooth fiber.
pub fn deflection(p: usize, gamma_o: f64, gamma_t: f64) -> f64 {
    let p = p as f64;
    2.0 * p * gamma_t - 2.0 * gamma_o + p * PI
}

/// Trimmed logistic azimuthal lobe centred on the lobe's deflection angle.
pub fn azimuthal_n(phi: f64, p: usize, s: f64, gamma_o: f64, gamma_t: f64) -> f64 {
    let dphi = wrap_angle(phi - deflection(p, gamma_o, gamma_t));
    trimmed_logistic(dphi, s, -PI, PI)
}

/// Unpolarized Fresnel reflectance at a dielectric boundary.
pub fn fresnel_dielectric(cos_theta_i: f64, eta_i: f64, eta_t: f64) -> f64 {
    let mut cos_i = cos_theta_i.clamp(-1.0, 1.0);
    let (mut ei, mut et) = (eta_i, eta_t);
    if cos_i < 0.0 {
        std::mem::swap(&mut ei, &mut et);
        cos_i = -cos_i;
    }
    let sin_i = safe_sqrt(1.0 - cos_i * cos_i);
    let sin_t = ei / et * sin_i;
    if sin_t >= 1.0 {
        return 1.0;
    }
    let cos_t = safe_sqrt(1.0 - sin_t * sin_t);
    let parl = (et * cos_i - ei * cos_t) / (et * cos_i + ei * cos_t);
    let perp = (ei * cos_i - et * cos_t) / (ei * cos_i + et * cos_t);
    0.5 * (parl * parl + perp * perp)
}

/// Per-lobe attenuations `A_0..A_2` plus the residual geometric tail.
pub fn attenuation_a(cos_theta_o: f64, eta: f64, h: f64, transmittance: Rgb) -> [Rgb; P_MAX + 1] {
    let cos_gamma_o = safe_sqrt(1.0 - h * h);
    let f = fresnel_dielectric(cos_theta_o * cos_gamma_o, 1.0, eta);
    let mut ap = [Rgb::ZERO; P_MAX + 1];
    ap[0] = Rgb::splat(f);
    ap[1] = transmittance * sqr(1.0 - f);
    for p in 2..P_MAX {
        ap[p] = ap[p - 1] * transmittance * f;
    }
    let tf = transmittance * f;
    ap[P_MAX] = (ap[P_MAX - 1] * tf).zip(tf, |num, t| num / (1.0 - t));
    ap
}

/// Evaluation state for one fiber hit: material plus curve offset.
#[derive(Debug, Clone, Copy)]
pub struct Bcsdf {
    h: f64,
    gamma_o: f64,
    eta: f64,
    sigma_a: Rgb,
    v: [f64; P_MAX + 1],
    s: f64,
    sin_2k_alpha: [f64; 3],
    cos_2k_alpha: [f64; 3],
}

/// Per-`wo` quantities shared by eval, pdf and sample.
struct OutgoingTerms {
    sin_theta_o: f64,
    cos_theta_o: f64,
    phi_o: f64,
    gamma_t: f64,
    ap: [Rgb; P_MAX + 1],
}

impl Bcsdf {
    pub fn new(h: f64, mat: &FiberMaterial) -> Self {
        let h = h.clamp(-1.0, 1.0);
        let mut sin_2k_alpha = [mat.alpha.sin(), 0.0, 0.0];
        let mut cos_2k_alpha = [safe_sqrt(1.0 - sqr(sin_2k_alpha[0])), 0.0, 0.0];
        for i in 1..3 {
            sin_2k_alpha[i] = 2.0 * cos_2k_alpha[i - 1] * sin_2k_alpha[i - 1];
            cos_2k_alpha[i] = sqr(cos_2k_alpha[i - 1]) - sqr(sin_2k_alpha[i - 1]);
        }
        Bcsdf {
            h,
            gamma_o: safe_asin(h),
            eta: mat.eta,
            sigma_a: mat.sigma_a.as_rgb(),
            v: mat.lobe_variances(),
            s: mat.logistic_scale(),
            sin_2k_alpha,
            cos_2k_alpha,
        }
    }

    fn outgoing(&self, wo: Vec3) -> OutgoingTerms {
        let sin_theta_o = wo.x.clamp(-1.0, 1.0);
        let cos_theta_o = safe_sqrt(1.0 - sqr(sin_theta_o));
        let phi_o = wo.z.atan2(wo.y);

        let sin_theta_t = sin_theta_o / self.eta;
        let cos_theta_t = safe_sqrt(1.0 - sqr(sin_theta_t));
        let etap = safe_sqrt(sqr(self.eta) - sqr(sin_theta_o)) / cos_theta_o.max(1e-12);
        let sin_gamma_t = self.h / etap;
        let cos_gamma_t = safe_sqrt(1.0 - sqr(sin_gamma_t));
        let gamma_t = safe_asin(sin_gamma_t);

        let transmittance = self.sigma_a.map(|s| (-s * (2.0 * cos_gamma_t / cos_theta_t)).exp());
        let ap = attenuation_a(cos_theta_o, self.eta, self.h, transmittance);
        OutgoingTerms {
            sin_theta_o,
            cos_theta_o,
            phi_o,
            gamma_t,
            ap,
        }
    }

    /// Outgoing longitudinal angle shifted by the cuticle tilt of lobe `p`.
    fn tilted(&self, p: usize, sin_o: f64, cos_o: f64) -> (f64, f64) {
        let (sin_op, cos_op) = match p {
            0 => (
                sin_o * self.cos_2k_alpha[1] - cos_o * self.sin_2k_alpha[1],
                cos_o * self.cos_2k_alpha[1] + sin_o * self.sin_2k_alpha[1],
            ),
            1 => (
                sin_o * self.cos_2k_alpha[0] + cos_o * self.sin_2k_alpha[0],
                cos_o * self.cos_2k_alpha[0] - sin_o * self.sin_2k_alpha[0],
            ),
            2 => (
                sin_o * self.cos_2k_alpha[2] + cos_o * self.sin_2k_alpha[2],
                cos_o * self.cos_2k_alpha[2] - sin_o * self.sin_2k_alpha[2],
            ),
            _ => (sin_o, cos_o),
        };
        (sin_op, cos_op.abs())
    }

    fn lobe_pdf(ap: &[Rgb; P_MAX + 1]) -> [f64; P_MAX + 1] {
        let lum: Vec<f64> = ap.iter().map(|a| a.luminance()).collect();
        let sum: f64 = lum.iter().sum();
        let mut out = [0.0; P_MAX + 1];
        for p in 0..=P_MAX {
            out[p] = lum[p] / sum;
        }
        out
    }

    /// `f(wo, wi) * |cos(theta_i)|`, i.e. the sum of `M_p A_p N_p`.
    pub fn eval_projected(&self, wo: Vec3, wi: Vec3) -> Rgb {
        let o = self.outgoing(wo);
        let sin_theta_i = wi.x.clamp(-1.0, 1.0);
        let cos_theta_i = safe_sqrt(1.0 - sqr(sin_theta_i));
        let phi = wi.z.atan2(wi.y) - o.phi_o;

        let mut sum = Rgb::ZERO;
        for p in 0..P_MAX {
            let (sin_op, cos_op) = self.tilted(p, o.sin_theta_o, o.cos_theta_o);
            let m = longitudinal_m(self.v[p], sin_theta_i, cos_theta_i, sin_op, cos_op);
            let n = azimuthal_n(phi, p, self.s, self.gamma_o, o.gamma_t);
            sum += o.ap[p] * (m * n);
        }
        let m = longitudinal_m(self.v[P_MAX], sin_theta_i, cos_theta_i, o.sin_theta_o, o.cos_theta_o);
        sum += o.ap[P_MAX] * (m / (2.0 * PI));
        sum
    }

    pub fn eval(&self, wo: Vec3, wi: Vec3) -> Rgb {
        let cos_theta_i = safe_sqrt(1.0 - sqr(wi.x.clamp(-1.0, 1.0)));
        if cos_theta_i > 0.0 {
            self.eval_projected(wo, wi) / cos_theta_i
        } else {
            Rgb::ZERO
        }
    }

    fn pdf_with(&self, o: &OutgoingTerms, wi: Vec3) -> f64 {
        let sin_theta_i = wi.x.clamp(-1.0, 1.0);
        let cos_theta_i = safe_sqrt(1.0 - sqr(sin_theta_i));
        let phi = wi.z.atan2(wi.y) - o.phi_o;
        let lobe_pdf = Self::lobe_pdf(&o.ap);

        let mut pdf = 0.0;
        for p in 0..P_MAX {
            let (sin_op, cos_op) = self.tilted(p, o.sin_theta_o, o.cos_theta_o);
            let m = longitudinal_m(self.v[p], sin_theta_i, cos_theta_i, sin_op, cos_op);
            pdf += lobe_pdf[p] * m * azimuthal_n(phi, p, self.s, self.gamma_o, o.gamma_t);
        }
        let m = longitudinal_m(self.v[P_MAX], sin_theta_i, cos_theta_i, o.sin_theta_o, o.cos_theta_o);
        pdf + lobe_pdf[P_MAX] * m / (2.0 * PI)
    }

    /// Solid-angle density of [`Bcsdf::sample`].
    pub fn pdf(&self, wo: Vec3, wi: Vec3) -> f64 {
        let o = self.outgoing(wo);
        self.pdf_with(&o, wi)
    }

    /// Picks a lobe in proportion to its attenuation, then samples the
    /// longitudinal and azimuthal terms of that lobe.
    pub fn sample<R: Rng + ?Sized>(&self, wo: Vec3, rng: &mut R) -> ScatterSample {
        let o = self.outgoing(wo);
        let lobe_pdf = Self::lobe_pdf(&o.ap);

        let mut u_lobe: f64 = rng.gen();
        let mut p = P_MAX;
        for (i, &w) in lobe_pdf.iter().enumerate() {
            if u_lobe < w {
                p = i;
                break;
            }
            u_lobe -= w;
        }
        // Guard against round-off leaving u_lobe just above the last weight.
        if lobe_pdf[p] == 0.0 {
            p = (0..=P_MAX).rev().find(|&i| lobe_pdf[i] > 0.0).unwrap_or(0);
        }

        let (sin_op, cos_op) = self.tilted(p, o.sin_theta_o, o.cos_theta_o);

        let u_m: f64 = rng.gen::<f64>().max(1e-5);
        let v = self.v[p];
        let cos_theta = 1.0 + v * (u_m + (1.0 - u_m) * (-2.0 / v).exp()).ln();
        let sin_theta = safe_sqrt(1.0 - sqr(cos_theta));
        let cos_phi = (2.0 * PI * rng.gen::<f64>()).cos();
        let sin_theta_i = (-cos_theta * sin_op + sin_theta * cos_phi * cos_op).clamp(-1.0, 1.0);
        let cos_theta_i = safe_sqrt(1.0 - sqr(sin_theta_i));

        let u_n: f64 = rng.gen();
        let dphi = if p < P_MAX {
            deflection(p, self.gamma_o, o.gamma_t) + sample_trimmed_logistic(u_n, self.s, -PI, PI)
        } else {
            2.0 * PI * u_n
        };
        let phi_i = o.phi_o + dphi;
        let wi = Vec3::new(sin_theta_i, cos_theta_i * phi_i.cos(), cos_theta_i * phi_i.sin());

        let pdf = self.pdf_with(&o, wi);
        let value = self.eval(wo, wi);
        ScatterSample { wi, value, pdf }
    }
}

pub fn eval(wo: Vec3, wi: Vec3, h: f64, mat: &FiberMaterial) -> Rgb {
    Bcsdf::new(h, mat).eval(wo, wi)
}

pub fn pdf(wo: Vec3, wi: Vec3, h: f64, mat: &FiberMaterial) -> f64 {
    Bcsdf::new(h, mat).pdf(wo, wi)
}

pub fn sample<R: Rng + ?Sized>(wo: Vec3, h: f64, mat: &FiberMaterial, rng: &mut R) -> ScatterSample {
    Bcsdf::new(h, mat).sample(wo, rng)
}

/// Direction with longitudinal angle `theta` and azimuth `phi` in the
/// fiber frame.
pub fn direction(theta: f64, phi: f64) -> Vec3 {
    Vec3::new(theta.sin(), theta.cos() * phi.cos(), theta.cos() * phi.sin())
}

/// Importance-sampled estimate of the fraction of energy scattered for an
/// outgoing direction at longitudinal angle `theta_o`, averaged over the
/// curve offset. Equals one per channel for a lossless fiber.
pub fn furnace_energy<R: Rng + ?Sized>(mat: &FiberMaterial, theta_o: f64, samples: usize, rng: &mut R) -> Rgb {
    let mut sum = Rgb::ZERO;
    for _ in 0..samples {
        let h: f64 = rng.gen_range(-1.0..1.0);
        let phi_o: f64 = rng.gen_range(-PI..PI);
        let wo = direction(theta_o, phi_o);
        let s = Bcsdf::new(h, mat).sample(wo, rng);
        if s.pdf > 0.0 {
            sum = sum + s.value * (safe_sqrt(1.0 - sqr(s.wi.x)) / s.pdf);
        }
    }
    sum * (1.0 / samples as f64)
}
