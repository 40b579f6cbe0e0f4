//! Helpers shared by the integration tests: statistical tests and
//! independent reference implementations used as oracles.

#![allow(dead_code)]

use hairdigi::bcsdf::{Bcsdf, FiberMaterial};
use hairdigi::math::{Vec3, PI};
use hairdigi::rng::rng_from_seed;
use image::RgbImage;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// One-sample Kolmogorov-Smirnov test against the uniform distribution on
/// `[lo, hi]`; returns the asymptotic p-value.
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut x: Vec<f64> = samples.iter().map(|v| (v - lo) / (hi - lo)).collect();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - v).max(v - i as f64 / n);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

/// Energy scattered by a fiber estimated by Monte Carlo over the sphere,
/// independent of the importance sampling routine. Scattering depends on
/// the outgoing azimuth only through the difference of azimuths, so it is
/// fixed at zero; curve offset and incident direction (uniform on the
/// sphere) are jittered on a `k x k x k` grid with `k^3` close to `n`.
/// Returns channel means.
pub fn uniform_furnace(mat: &FiberMaterial, theta_o: f64, n: usize, seed: u64) -> [f64; 3] {
    let mut rng = rng_from_seed(seed);
    let k = (n as f64).cbrt().round().max(1.0) as usize;
    let wo = Vec3::new(theta_o.sin(), theta_o.cos(), 0.0);
    let cell = |i: usize, u: f64, lo: f64, hi: f64| lo + (hi - lo) * (i as f64 + u) / k as f64;
    let mut sum = [0.0; 3];
    for a in 0..k {
        for i in 0..k {
            for j in 0..k {
                let h = cell(a, rng.gen(), -1.0, 1.0);
                let x = cell(i, rng.gen(), -1.0, 1.0);
                let phi = cell(j, rng.gen(), -PI, PI);
                let r = (1.0 - x * x).max(0.0).sqrt();
                let wi = Vec3::new(x, r * phi.cos(), r * phi.sin());
                let f = Bcsdf::new(h, mat).eval_projected(wo, wi);
                for c in 0..3 {
                    sum[c] += f.0[c] * 4.0 * PI;
                }
            }
        }
    }
    sum.map(|s| s / (k * k * k) as f64)
}

/// Chi-square goodness of fit of the direction sampler against its pdf on
/// a `phi_bins x x_bins` grid over (azimuth, sin theta). Bins expected to
/// hold fewer than 5 samples are pooled. Returns the p-value.
pub fn chi_square_sampling(mat: &FiberMaterial, h: f64, wo: Vec3, n: usize, phi_bins: usize, x_bins: usize, seed: u64) -> f64 {
    let b = Bcsdf::new(h, mat);
    let mut rng = rng_from_seed(seed);
    let mut observed = vec![0.0f64; phi_bins * x_bins];
    let bin = |w: Vec3| {
        let phi = w.z.atan2(w.y);
        let i = (((phi + PI) / (2.0 * PI)) * phi_bins as f64).floor().clamp(0.0, phi_bins as f64 - 1.0) as usize;
        let j = (((w.x + 1.0) / 2.0) * x_bins as f64).floor().clamp(0.0, x_bins as f64 - 1.0) as usize;
        j * phi_bins + i
    };
    for _ in 0..n {
        let s = b.sample(wo, &mut rng);
        if s.pdf > 0.0 {
            observed[bin(s.wi)] += 1.0;
        }
    }
    // Expected counts by 8x8 midpoint integration of the pdf in
    // (phi, x), where the solid angle element is dphi dx.
    let sub = 8;
    let (dphi, dx) = (2.0 * PI / phi_bins as f64, 2.0 / x_bins as f64);
    let mut expected = vec![0.0f64; phi_bins * x_bins];
    for j in 0..x_bins {
        for i in 0..phi_bins {
            let mut acc = 0.0;
            for a in 0..sub {
                for c in 0..sub {
                    let phi = -PI + (i as f64 + (a as f64 + 0.5) / sub as f64) * dphi;
                    let x = -1.0 + (j as f64 + (c as f64 + 0.5) / sub as f64) * dx;
                    let r = (1.0 - x * x).max(0.0).sqrt();
                    acc += b.pdf(wo, Vec3::new(x, r * phi.cos(), r * phi.sin()));
                }
            }
            expected[j * phi_bins + i] = acc * dphi * dx / (sub * sub) as f64 * n as f64;
        }
    }
    let (mut chi2, mut dof) = (0.0, 0usize);
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (o, e) in observed.iter().zip(&expected) {
        if *e < 5.0 {
            pool_o += o;
            pool_e += e;
        } else {
            chi2 += (o - e) * (o - e) / e;
            dof += 1;
        }
    }
    if pool_e > 5.0 {
        chi2 += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
        dof += 1;
    }
    ChiSquared::new((dof - 1) as f64).unwrap().sf(chi2)
}

/// Straightforward MS-SSIM: a full 2-D Gaussian window evaluated at every
/// position, sums written out per window.
pub fn reference_ms_ssim(a: &RgbImage, b: &RgbImage, scales: usize) -> f64 {
    let weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
    let total: f64 = weights[..scales].iter().sum();
    let lum = |img: &RgbImage| -> (usize, usize, Vec<f64>) {
        let v = img
            .pixels()
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        (img.width() as usize, img.height() as usize, v)
    };
    let (mut w, mut h, mut x) = lum(a);
    let (_, _, mut y) = lum(b);
    let mut window = [[0.0f64; 11]; 11];
    let mut wsum = 0.0;
    for (i, row) in window.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
            wsum += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut result = 1.0;
    for s in 0..scales {
        let (mut sum_ssim, mut sum_cs, mut count) = (0.0, 0.0, 0.0);
        for oy in 0..=h - 11 {
            for ox in 0..=w - 11 {
                let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let g = window[i][j] / wsum;
                        let p = x[(oy + i) * w + ox + j];
                        let q = y[(oy + i) * w + ox + j];
                        mx += g * p;
                        my += g * q;
                        sxx += g * p * p;
                        syy += g * q * q;
                        sxy += g * p * q;
                    }
                }
                let vx = sxx - mx * mx;
                let vy = syy - my * my;
                let cov = sxy - mx * my;
                let cs = (2.0 * cov + c2) / (vx + vy + c2);
                let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
                sum_cs += cs;
                sum_ssim += l * cs;
                count += 1.0;
            }
        }
        let term = if s + 1 == scales { sum_ssim / count } else { sum_cs / count };
        result *= term.max(0.0).powf(weights[s] / total);
        if s + 1 < scales {
            let (nw, nh) = (w / 2, h / 2);
            let down = |v: &Vec<f64>| {
                let mut out = vec![0.0; nw * nh];
                for r in 0..nh {
                    for c in 0..nw {
                        out[r * nw + c] = (v[2 * r * w + 2 * c]
                            + v[2 * r * w + 2 * c + 1]
                            + v[(2 * r + 1) * w + 2 * c]
                            + v[(2 * r + 1) * w + 2 * c + 1])
                            / 4.0;
                    }
                }
                out
            };
            x = down(&x);
            y = down(&y);
            w = nw;
            h = nh;
        }
    }
    result
}

/// Random image with some spatial structure so that similarity varies.
pub fn random_image(w: u32, h: u32, seed: u64) -> RgbImage {
    let mut rng = rng_from_seed(seed);
    let (fx, fy): (f64, f64) = (rng.gen_range(0.05..0.5), rng.gen_range(0.05..0.5));
    let base: [f64; 3] = [rng.gen_range(30.0..200.0), rng.gen_range(30.0..200.0), rng.gen_range(30.0..200.0)];
    let noise: f64 = rng.gen_range(0.0..60.0);
    RgbImage::from_fn(w, h, |x, y| {
        let wave = 40.0 * ((x as f64 * fx).sin() + (y as f64 * fy).cos());
        let px = base.map(|b| (b + wave + rng.gen_range(-noise..=noise)).clamp(0.0, 255.0) as u8);
        image::Rgb(px)
    })
}

/// Hue angle in degrees of a linear RGB color.
pub fn hue_degrees(c: [f64; 3]) -> f64 {
    let [r, g, b] = c;
    let h = (3f64.sqrt() * (g - b)).atan2(2.0 * r - g - b).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

pub fn angle_between_degrees(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Rays from a sphere around the set's bounds towards random points inside
/// them, so most rays hit something.
pub fn probe_rays(set: &hairdigi::geometry::StrandSet, n: usize, seed: u64) -> Vec<hairdigi::geometry::Ray> {
    let mut rng = rng_from_seed(seed);
    let b = set.bounds();
    let c = b.center();
    let radius = b.extent().length();
    (0..n)
        .map(|_| {
            let dir = hairdigi::math::uniform_sphere(rng.gen(), rng.gen());
            let origin = c + dir * radius;
            let e = b.extent();
            let target = Vec3::new(
                b.min.x + e.x * rng.gen::<f64>(),
                b.min.y + e.y * rng.gen::<f64>(),
                b.min.z + e.z * rng.gen::<f64>(),
            );
            hairdigi::geometry::Ray::new(origin, (target - origin).normalized())
        })
        .collect()
}

/// Counts rays on which hierarchy traversal and brute force disagree on the
/// hit piece, or on `t` by more than `tol`. Also returns the number of hits.
pub fn bvh_parity(set: &hairdigi::geometry::StrandSet, n: usize, seed: u64, tol: f64) -> (usize, usize) {
    let (mut bad, mut hits) = (0, 0);
    for ray in probe_rays(set, n, seed) {
        let a = set.intersect(&ray, f64::INFINITY);
        let b = set.intersect_brute_force(&ray, f64::INFINITY);
        match (a, b) {
            (None, None) => {}
            (Some(x), Some(y)) if x.piece == y.piece && x.strand == y.strand && x.segment == y.segment && (x.t - y.t).abs() <= tol => hits += 1,
            _ => bad += 1,
        }
    }
    (bad, hits)
}

/// Three swatch configurations of different density and waviness.
pub fn parity_swatches() -> Vec<hairdigi::geometry::SwatchConfig> {
    use hairdigi::geometry::SwatchConfig;
    vec![
        SwatchConfig { count: 200, seed: 1, ..Default::default() },
        SwatchConfig { count: 600, waviness_mm: 1.5, seed: 2, ..Default::default() },
        SwatchConfig { count: 1500, length_mm: 30.0, waviness_mm: 0.0, seed: 3, ..Default::default() },
    ]
}

/// Compares the analytic gradient of `model` on a batch against central
/// differences of the loss on up to `per_tensor` random entries of every
/// parameter tensor. Returns the number of entries checked for convolution
/// and head tensors and the largest relative error, where the relative
/// error uses an absolute floor of 1e-6 for vanishing gradients.
pub fn finite_difference_check(
    model: &mut hairdigi::encoder::EncoderModel<f64>,
    images: &[&hairdigi::encoder::InputImage],
    labels: &[hairdigi::NormalizedParams],
    per_tensor: usize,
    seed: u64,
) -> (usize, usize, f64) {
    let (_, grad) = model.loss_and_gradient(images, labels).unwrap();
    let mut rng = rng_from_seed(seed);
    let eps = 1e-6;
    let (mut conv, mut head, mut worst) = (0, 0, 0.0f64);
    for (name, off, len) in model.architecture().tensors() {
        for i in rand::seq::index::sample(&mut rng, len, len.min(per_tensor)) {
            let idx = off + i;
            let orig = model.params()[idx];
            model.params_mut()[idx] = orig + eps;
            let up = model.loss(images, labels).unwrap();
            model.params_mut()[idx] = orig - eps;
            let down = model.loss(images, labels).unwrap();
            model.params_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * eps);
            let an = grad[idx];
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-6));
            if name.starts_with("conv") {
                conv += 1;
            } else {
                head += 1;
            }
        }
    }
    (conv, head, worst)
}

/// Standard architecture in double precision with small random biases, so
/// bias gradients are exercised away from their zero initialization.
pub fn gradient_probe_model(size: usize, seed: u64) -> hairdigi::encoder::EncoderModel<f64> {
    let mut model = hairdigi::encoder::EncoderModel::<f64>::new(hairdigi::encoder::Architecture::standard(size), seed).unwrap();
    let mut rng = rng_from_seed(seed + 1);
    for (name, off, len) in model.architecture().tensors() {
        if name.ends_with("bias") {
            for p in &mut model.params_mut()[off..off + len] {
                *p = rng.gen_range(-0.1..0.1);
            }
        }
    }
    model
}

pub fn random_input(size: usize, seed: u64) -> hairdigi::encoder::InputImage {
    let mut rng = rng_from_seed(seed);
    hairdigi::encoder::InputImage {
        width: size,
        height: size,
        data: (0..3 * size * size).map(|_| rng.gen::<f32>()).collect(),
    }
}

pub fn random_label(seed: u64) -> hairdigi::NormalizedParams {
    let mut rng = rng_from_seed(seed);
    hairdigi::NormalizedParams(std::array::from_fn(|_| rng.gen()))
}
