//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

/// Left or right state of a one-dimensional Riemann problem in primitive
/// variables, for the covolume law `p (1 − bρ) = (γ − 1) ρ e`.
#[derive(Clone, Copy, Debug)]
pub struct Side {
    pub rho: f64,
    pub v: f64,
    pub p: f64,
}

fn sound_speed(gamma: f64, b: f64, s: &Side) -> f64 {
    (gamma * s.p / (s.rho * (1.0 - b * s.rho))).sqrt()
}

/// Velocity jump across the wave connecting `s` to pressure `p`, and the
/// mass flux of the shock when `p > s.p`.
fn wave_curve(gamma: f64, b: f64, s: &Side, p: f64) -> (f64, Option<f64>) {
    if p > s.p {
        let a = 2.0 * (1.0 - b * s.rho) / ((gamma + 1.0) * s.rho);
        let bb = (gamma - 1.0) / (gamma + 1.0) * s.p;
        let q = ((p + bb) / a).sqrt();
        ((p - s.p) / q, Some(q))
    } else {
        let c = sound_speed(gamma, b, s);
        let f = 2.0 * c * (1.0 - b * s.rho) / (gamma - 1.0) * ((p / s.p).powf((gamma - 1.0) / (2.0 * gamma)) - 1.0);
        (f, None)
    }
}

/// Exact star pressure by bisection on the pressure function (zero when
/// the rarefactions open a vacuum).
pub fn star_pressure(gamma: f64, b: f64, l: &Side, r: &Side) -> f64 {
    let f = |p: f64| wave_curve(gamma, b, l, p).0 + wave_curve(gamma, b, r, p).0 + (r.v - l.v);
    if f(0.0) >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = l.p.max(r.p).max(1e-300);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    hi
}

/// Largest absolute speed of the outermost waves of the exact solution.
pub fn exact_max_wavespeed(gamma: f64, b: f64, l: &Side, r: &Side) -> f64 {
    let p = star_pressure(gamma, b, l, r);
    let left = match wave_curve(gamma, b, l, p).1 {
        Some(q) => l.v - q / l.rho,
        None => l.v - sound_speed(gamma, b, l),
    };
    let right = match wave_curve(gamma, b, r, p).1 {
        Some(q) => r.v + q / r.rho,
        None => r.v + sound_speed(gamma, b, r),
    };
    (-left).max(0.0).max(right.max(0.0))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Prints one acceptance line and returns whether it passed. Writes to the
/// process stderr directly so the line shows up without `--nocapture`.
pub fn report(id: &str, pass: bool, detail: &str) -> bool {
    use std::io::Write;
    let line = format!("{} {id}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    pass
}

/// `[a, b, …]` in scientific notation.
pub fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Linear growth rate of mode `l` for the drift dynamics of a uniform
/// annulus `a < r < b` (unit vorticity) inside a grounded wall at `c`.
///
/// Each density edge carries a displacement wave; the two couple through
/// the mode-`l` Green's function of the disk. The rate is the imaginary part
/// of the eigenvalues of the resulting 2×2 system, in units where the
/// vorticity of the annulus is one.
pub fn annulus_growth_rate(a: f64, b: f64, c: f64, l: u32) -> f64 {
    let l_f = l as f64;
    let green = |r: f64, s: f64| {
        let (lo, hi) = (r.min(s), r.max(s));
        lo.powf(l_f) * (hi.powf(-l_f) - hi.powf(l_f) * c.powf(-2.0 * l_f))
    };
    let radii = [a, b];
    let jump = [1.0, -1.0];
    let rotation = [0.0, 0.5 * (1.0 - a * a / (b * b))];
    let m = |k: usize, j: usize| {
        let diag = if k == j { l_f * rotation[k] } else { 0.0 };
        diag + jump[j] * radii[j] * green(radii[k], radii[j]) / (2.0 * radii[k])
    };
    let (tr, det) = (m(0, 0) + m(1, 1), m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0));
    (det - 0.25 * tr * tr).max(0.0).sqrt()
}
