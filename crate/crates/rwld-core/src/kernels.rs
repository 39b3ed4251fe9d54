//! The wave kernel, its fractional companions, and the cross-convolution
//! decomposition that substitutes for the missing semigroup property.
//!
//! `G(t,x) = 1/2` inside the light cone `|x| < t`. The companions `E`,
//! `S_a`, `C_{1-a}` are closed-form kernels singular on the characteristic
//! lines `|x| = t`; the decomposition writes `G(t-s, x-y)` as the sum of
//! four convolutions in the intermediate space variable at any intermediate
//! time. Evaluators return NaN exactly on a characteristic so that
//! quadrature code is forced onto cell-interior nodes.

use crate::error::CoreError;
use crate::fracspace::mollifier_f_eps;
use crate::grid::{Field, Grid};
use crate::hurst::HurstParam;
use crate::quad::{gamma, tanh_sinh};

const PI: f64 = std::f64::consts::PI;

/// Which of the four kernel pairs a transform refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelTag {
    /// C_beta paired with S_{1-beta}
    K1,
    /// S_alpha paired with C_{1-alpha}
    K2,
    /// S (= G) paired with E
    K3,
    /// E paired with S (= G)
    K4,
}

/// A kernel selector with its fractional exponents.
#[derive(Debug, Clone, Copy)]
pub struct KernelId {
    pub tag: KernelTag,
    pub alpha: f64,
    pub beta: f64,
}

impl KernelId {
    pub fn new(tag: KernelTag, alpha: f64, beta: f64) -> Result<Self, CoreError> {
        if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "kernel exponents must lie in (0,1), got alpha={alpha} beta={beta}"
            )));
        }
        Ok(KernelId { tag, alpha, beta })
    }

    /// The leading kernel of the pair, the one the transform integrates.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self.tag {
            KernelTag::K1 => kernel_c_1malpha(t, x, 1.0 - self.beta),
            KernelTag::K2 => kernel_s_alpha(t, x, self.alpha),
            KernelTag::K3 => green(t, x),
            KernelTag::K4 => kernel_e(t, x),
        }
    }
}

/// Wave kernel: 1/2 on the open light cone, 0 outside.
pub fn green(t: f64, x: f64) -> f64 {
    if t > 0.0 && x.abs() < t {
        0.5
    } else {
        0.0
    }
}

/// Conjugate (Poisson) kernel `E(t,x) = t / (pi (t^2 + x^2))`.
pub fn kernel_e(t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t / (PI * (t * t + x * x))
    }
}

/// Fractional kernel `S_a(t,x) = Gamma(1-a)/(2 pi) cos(a pi/2)
/// [(t+|x|)^{a-1} + sgn(t-|x|) |t-|x||^{a-1}]`, `a` in (0,1).
/// NaN on the characteristic `|x| = t`.
pub fn kernel_s_alpha(t: f64, x: f64, a: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let d = t - ax;
    if d == 0.0 {
        return f64::NAN;
    }
    let signed = d.signum() * d.abs().powf(a - 1.0);
    gamma(1.0 - a) / (2.0 * PI) * (a * PI / 2.0).cos() * ((t + ax).powf(a - 1.0) + signed)
}

/// Fractional kernel `C_{1-a}(t,x) = Gamma(a)/(2 pi) [cos(a pi/2)
/// (|t+|x||^{-a} + |t-|x||^{-a}) - 2 cos(a arctan(|x|/t)) (t^2+x^2)^{-a/2}]`.
/// NaN on the characteristic.
pub fn kernel_c_1malpha(t: f64, x: f64, a: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let d = t - ax;
    if d == 0.0 {
        return f64::NAN;
    }
    gamma(a) / (2.0 * PI)
        * ((a * PI / 2.0).cos() * ((t + ax).powf(-a) + d.abs().powf(-a))
            - 2.0 * (a * (ax / t).atan()).cos() * (t * t + x * x).powf(-a / 2.0))
}

/// First spatial difference `D_h f(t,x) = f(t, x+h) - f(t, x)`.
pub fn diff_h(kernel: impl Fn(f64, f64) -> f64, t: f64, x: f64, h: f64) -> f64 {
    kernel(t, x + h) - kernel(t, x)
}

/// Second (rectangular) difference
/// `f(t, x+h+l) - f(t, x+h) - f(t, x+l) + f(t, x)`.
pub fn box_hl(kernel: impl Fn(f64, f64) -> f64, t: f64, x: f64, h: f64, l: f64) -> f64 {
    kernel(t, x + h + l) - kernel(t, x + h) - kernel(t, x + l) + kernel(t, x)
}

/// Composite midpoint rule on [a, b] with a quartic grading toward both
/// endpoints, so integrable power singularities `|x - end|^{g-1}` with
/// `g > 1/4` converge at order at least one in `n`.
fn graded_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let c = 0.5 * (a + b);
    let mut total = 0.0;
    for (end, other) in [(a, c), (b, c)] {
        let w = other - end;
        let mut acc = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) / n as f64;
            let x = end + w * s.powi(4);
            let v = f(x);
            if v.is_finite() {
                acc += v * 4.0 * s.powi(3);
            }
        }
        // both half-panels carry positive mass; w is signed only to place
        // the nodes on the correct side of the shared midpoint
        total += acc * w.abs() / n as f64;
    }
    total
}

/// Integrate over the whole line: graded panels between breakpoints, then
/// tails through a rational compactification.
fn line_integral(f: impl Fn(f64) -> f64, breakpoints: &[f64], n: usize) -> f64 {
    let mut bps: Vec<f64> = breakpoints.to_vec();
    bps.sort_by(|p, q| p.partial_cmp(q).unwrap());
    bps.dedup_by(|p, q| (*p - *q).abs() < 1e-13);
    let mut total = 0.0;
    for w in bps.windows(2) {
        total += graded_panel(&f, w[0], w[1], n);
    }
    let first = bps[0];
    let last = *bps.last().unwrap();
    // one graded unit next to the outermost breakpoints, then the far tails
    total += graded_panel(&f, last, last + 1.0, n);
    total += graded_panel(&f, first - 1.0, first, n);
    let tail = |sign: f64, from: f64| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let z = from + sign * u / (1.0 - u);
            let v = f(z);
            if v.is_finite() {
                acc += v / ((1.0 - u) * (1.0 - u));
            }
        }
        acc / n as f64
    };
    total += tail(1.0, last + 1.0);
    total += tail(-1.0, first - 1.0);
    total
}

/// Evaluate the four-kernel identity at one configuration and return the
/// absolute residual `|sum of convolutions - G(t-s, x-y)|`. Quadrature
/// is split at every characteristic of either factor; `quad_n` is the
/// node count per graded half-panel.
#[allow(clippy::too_many_arguments)]
pub fn verify_decomposition(
    t: f64,
    s: f64,
    r: f64,
    x: f64,
    y: f64,
    alpha: f64,
    beta: f64,
    quad_n: usize,
) -> Result<f64, CoreError> {
    if !(s < r && r < t) {
        return Err(CoreError::InvalidParameter(format!(
            "need s < r < t, got s={s} r={r} t={t}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "exponents must lie in (0,1), got alpha={alpha} beta={beta}"
        )));
    }
    let ta = t - r;
    let tb = r - s;
    let bps = [x - ta, x + ta, y - tb, y + tb];
    let n = quad_n.max(4);

    let term1 = line_integral(
        |z| kernel_c_1malpha(ta, x - z, 1.0 - beta) * kernel_s_alpha(tb, z - y, 1.0 - beta),
        &bps,
        n,
    );
    let term2 = line_integral(
        |z| kernel_s_alpha(ta, x - z, alpha) * kernel_c_1malpha(tb, z - y, alpha),
        &bps,
        n,
    );
    let term3 = line_integral(|z| green(ta, x - z) * kernel_e(tb, z - y), &bps, n);
    let term4 = line_integral(|z| kernel_e(ta, x - z) * green(tb, z - y), &bps, n);

    Ok((term1 + term2 + term3 + term4 - green(t - s, x - y)).abs())
}

/// First-difference energy of the wave kernel against the singular lag
/// weight, in closed form: `iint |D_h G(t,.)|^2 |h|^{2H-2} dx dh
/// = (2t)^{2H} / (2H (1-2H))`.
pub fn frac_integral_d(t: f64, hp: &HurstParam) -> Result<f64, CoreError> {
    if t <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    let two_h = 2.0 * hp.h;
    Ok((2.0 * t).powf(two_h) / (two_h * (1.0 - two_h)))
}

/// Same quantity by nested quadrature, independent of the closed form: the
/// inner x-integral is evaluated by a piecewise rule over the indicator
/// breakpoints, the outer h-integral by tanh-sinh plus the exact constant
/// tail past `h = 2t`.
pub fn frac_integral_d_quadrature(t: f64, hp: &HurstParam) -> Result<f64, CoreError> {
    if t <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    let mu = hp.lag_exponent();
    let inner = |h: f64| -> f64 {
        // |D_h G|^2 is piecewise constant with breaks at the shifted cones
        let mut bps = [-t, t, -t - h, t - h];
        bps.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut acc = 0.0;
        for w in bps.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let d = green(t, mid + h) - green(t, mid);
            acc += d * d * (w[1] - w[0]);
        }
        acc
    };
    let body = tanh_sinh(|h: f64| inner(h) * h.powf(mu), 0.0, 2.0 * t, 1e-10);
    // for h >= 2t the cones are disjoint and the inner integral is t
    let tail = t * (2.0 * t).powf(mu + 1.0) / (-mu - 1.0);
    Ok(2.0 * (body + tail))
}

/// Second-difference energy
/// `iiint |box_{h,l} G(t,.)|^2 |h|^{2H-2} |l|^{2H-2} dx dh dl`.
/// The x-integral has the exact overlap form `F(l,h) = K(0) - K(h) - K(l) +
/// (K(l+h) + K(l-h))/2` with `K(d) = (2t - |d|)_+`; the (h,l) integrals
/// are split at the overlap kinks with analytic constant tails.
pub fn frac_integral_box(t: f64, hp: &HurstParam) -> Result<f64, CoreError> {
    if t <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "time must be positive, got {t}"
        )));
    }
    let mu = hp.lag_exponent();
    let k = |d: f64| (2.0 * t - d.abs()).max(0.0);
    let f = |y: f64, h: f64| k(0.0) - k(h) - k(y) + 0.5 * (k(y + h) + k(y - h));
    let p1 = mu + 1.0;
    let p2 = mu + 2.0;
    // moments of y^mu against 1 and y over [a, b]
    let mom0 = |a: f64, b: f64| (b.powf(p1) - a.powf(p1)) / p1;
    let mom1 = |a: f64, b: f64| (b.powf(p2) - a.powf(p2)) / p2;

    // For h < 2t the overlap profile is piecewise linear with known breaks,
    // so the inner integral is assembled from exact moments. The naive
    // evaluation of F cancels catastrophically for small h (K(0) - K(h)
    // rounds to 0 below the ulp of 2t) exactly where the outer weight
    // concentrates, which silently deletes the singular mass.
    let inner_closed = |h: f64| -> f64 {
        let two_t = 2.0 * t;
        let tail = h * (two_t + h).powf(p1) / (-p1);
        let upper = (1.5 * h - t) * mom0(two_t - h, two_t) + 0.5 * mom1(two_t - h, two_t)
            + (1.5 * h + t) * mom0(two_t, two_t + h)
            - 0.5 * mom1(two_t, two_t + h);
        if h <= t {
            // F: y | h | 3h/2 + y/2 - t | 3h/2 + t - y/2 | h
            mom1(0.0, h) + h * mom0(h, two_t - h) + upper + tail
        } else {
            // the first two ramps trade places once h passes t
            mom1(0.0, two_t - h)
                + (0.5 * h - t) * mom0(two_t - h, h)
                + 1.5 * mom1(two_t - h, h)
                + (1.5 * h - t) * mom0(h, two_t)
                + 0.5 * mom1(h, two_t)
                + (1.5 * h + t) * mom0(two_t, two_t + h)
                - 0.5 * mom1(two_t, two_t + h)
                + tail
        }
    };
    let inner = |h: f64| -> f64 {
        if h < 2.0 * t {
            return inner_closed(h);
        }
        let mut bps: Vec<f64> = [h - 2.0 * t, h, 2.0 * t, 2.0 * t + h]
            .into_iter()
            .filter(|b| *b > 0.0)
            .collect();
        bps.sort_by(|p, q| p.partial_cmp(q).unwrap());
        bps.dedup_by(|p, q| (*p - *q).abs() < 1e-13);
        let mut val = 0.0;
        let mut lo = 0.0;
        for b in &bps {
            val += tanh_sinh(|y: f64| f(y, h) * y.powf(mu), lo, *b, 1e-9);
            lo = *b;
        }
        // beyond the last kink F is the constant K(0) - K(h)
        val + (k(0.0) - k(h)) * lo.powf(mu + 1.0) / (-mu - 1.0)
    };

    let cut = 200.0 * t;
    let mut val = 0.0;
    let mut lo = 0.0;
    // breaks at every kink of the inner profile (h = t is where the kink
    // ordering inside the y-integral flips)
    for b in [t, 2.0 * t, 3.0 * t, 4.0 * t, 10.0 * t, 40.0 * t, cut] {
        val += tanh_sinh(|h: f64| inner(h) * h.powf(mu), lo, b, 1e-9);
        lo = b;
    }
    // far tail: inner(h) = c_inf + (1/2) int K(u) (h+u)^mu du, whose
    // leading term is 2 t^2 h^mu
    let c_inf = tanh_sinh(|y: f64| (k(0.0) - k(y)) * y.powf(mu), 0.0, 2.0 * t, 1e-9)
        + k(0.0) * (2.0 * t).powf(mu + 1.0) / (-mu - 1.0);
    val += c_inf * cut.powf(mu + 1.0) / (-mu - 1.0);
    val += 2.0 * t * t * cut.powf(2.0 * mu + 1.0) / (-2.0 * mu - 1.0);
    Ok(4.0 * val)
}

/// The singular-in-time kernel transform
/// `J_theta(r, z) = int_0^r (r-s)^{-theta} <K(r-s, z-.) sigma_u(s,.),
/// g(s,.)>_{H_eps} ds` on the grid.
///
/// The mollified pairing is expanded through the kernel representation of
/// the `H_eps` product: `g` is convolved with the mollifier kernel once per
/// time slab, and each kernel correlation is a windowed sum. The time
/// singularity `(r-s)^{-theta}` is integrated exactly per slab against
/// left-point values. Kernel samples that land on a characteristic are
/// replaced by the mean of the two quarter-cell neighbours.
#[allow(clippy::too_many_arguments)]
pub fn j_theta_transform(
    kid: &KernelId,
    sigma_u: &Field,
    g: &Field,
    theta: f64,
    eps: f64,
    hp: &HurstParam,
    grid: &Grid,
) -> Result<Field, CoreError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "theta must lie in (0,1), got {theta}"
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "the mollified pairing needs eps > 0, got {eps}"
        )));
    }
    assert_eq!(sigma_u.nx, grid.nx);
    assert_eq!(sigma_u.nt, grid.nt);
    assert_eq!(g.nx, grid.nx);
    assert_eq!(g.nt, grid.nt);

    let nx = grid.nx;
    let nt = grid.nt;
    let dx = grid.dx();
    let dt = grid.dt();

    // mollifier lag table over all node separations
    let mut fe = Vec::with_capacity(nx + 1);
    for kk in 0..=nx {
        fe.push(mollifier_f_eps(kk as f64 * dx, eps, hp)?);
    }
    let pairing_scale = 2.0 * PI * hp.c1;

    // kernel rows per time lag, characteristic-safe
    let safe_eval = |tau: f64, z: f64| -> f64 {
        let v = kid.eval(tau, z);
        if v.is_finite() {
            v
        } else {
            0.5 * (kid.eval(tau, z - 0.25 * dx) + kid.eval(tau, z + 0.25 * dx))
        }
    };
    let mut kernel_rows = vec![vec![0.0; 2 * nx + 1]; nt + 1];
    for (lag, row) in kernel_rows.iter_mut().enumerate().skip(1) {
        let tau = lag as f64 * dt;
        for (d, slot) in row.iter_mut().enumerate() {
            *slot = safe_eval(tau, (d as isize - nx as isize) as f64 * dx);
        }
    }

    // per-slab: mollified control, then the sigma-weighted product row
    let mut q_rows = vec![vec![0.0; nx + 1]; nt];
    for (m, q) in q_rows.iter_mut().enumerate() {
        let gm = g.row(m);
        let sm = sigma_u.row(m);
        for w in 0..=nx {
            let mut conv = 0.0;
            for (y, gv) in gm.iter().enumerate() {
                conv += fe[w.abs_diff(y)] * gv;
            }
            q[w] = pairing_scale * sm[w] * conv * dx;
        }
    }

    let inv = 1.0 - theta;
    let mut out = Field::zeros(grid);
    for i in 1..=nt {
        let r = i as f64 * dt;
        for m in 0..i {
            let w_slab =
                ((r - m as f64 * dt).powf(inv) - (r - (m + 1) as f64 * dt).powf(inv)) / inv;
            let krow = &kernel_rows[i - m];
            let q = &q_rows[m];
            let row = out.row_mut(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let mut corr = 0.0;
                for (c, qv) in q.iter().enumerate() {
                    corr += krow[j + nx - c] * qv;
                }
                *slot += w_slab * corr * dx;
            }
        }
    }
    Ok(out)
}

/// Largest over time of the spatial L^p mass `int |u(r, z)|^p dz`,
/// the scaling diagnostic reported alongside the transform.
pub fn sup_lp_in_z(field: &Field, p: f64, grid: &Grid) -> f64 {
    let dx = grid.dx();
    let mut sup: f64 = 0.0;
    for i in 0..=field.nt {
        let mass: f64 = field.row(i).iter().map(|v| v.abs().powf(p)).sum::<f64>() * dx;
        sup = sup.max(mass);
    }
    sup
}
