//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// Closed-form free Gaussian packet with ħ = m = 1.
pub fn gaussian_packet_exact(x: f64, sigma0: f64, x0: f64, k0: f64, t: f64) -> Complex64 {
    let one_plus = Complex64::new(1.0, t / (2.0 * sigma0 * sigma0));
    let norm = (2.0 * PI * sigma0 * sigma0).powf(-0.25);
    let u = x - x0 - k0 * t;
    let envelope = (-(u * u) / (4.0 * sigma0 * sigma0 * one_plus)).exp() / one_plus.sqrt();
    norm * envelope * Complex64::from_polar(1.0, k0 * (x - x0) - 0.5 * k0 * k0 * t)
}

/// σ(t) = σ0·√(1 + (ħt/2mσ0²)²).
pub fn spread_width(sigma0: f64, hbar_over_m: f64, t: f64) -> f64 {
    let s = hbar_over_m * t / (2.0 * sigma0 * sigma0);
    sigma0 * (1.0 + s * s).sqrt()
}

/// Crank–Nicolson step of iψ_t = −½ψ_xx (ħ = m = 1) on a periodic grid,
/// repeated `steps` times.
pub fn crank_nicolson(psi: &[Complex64], dx: f64, dt: f64, steps: usize) -> Vec<Complex64> {
    let n = psi.len();
    let r = Complex64::new(0.0, dt / (4.0 * dx * dx));
    // (1 + 2r)ψ_i − r(ψ_{i−1} + ψ_{i+1}) = (1 − 2r)φ_i + r(φ_{i−1} + φ_{i+1})
    let diag = Complex64::new(1.0, 0.0) + 2.0 * r;
    let off = -r;
    let mut cur = psi.to_vec();
    for _ in 0..steps {
        let rhs: Vec<Complex64> = (0..n)
            .map(|i| (Complex64::new(1.0, 0.0) - 2.0 * r) * cur[i] + r * (cur[(i + n - 1) % n] + cur[(i + 1) % n]))
            .collect();
        cur = solve_cyclic(diag, off, &rhs);
    }
    cur
}

/// Cyclic tridiagonal solve with constant coefficients via Sherman–Morrison.
fn solve_cyclic(diag: Complex64, off: Complex64, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = rhs.len();
    let gamma = -diag;
    let mut b = vec![diag; n];
    b[0] = diag - gamma;
    b[n - 1] = diag - off * off / gamma;
    let thomas = |d: &[Complex64]| -> Vec<Complex64> {
        let mut c = vec![Complex64::default(); n];
        let mut y = vec![Complex64::default(); n];
        c[0] = off / b[0];
        y[0] = d[0] / b[0];
        for i in 1..n {
            let m = b[i] - off * c[i - 1];
            c[i] = off / m;
            y[i] = (d[i] - off * y[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            y[i] = y[i] - c[i] * y[i + 1];
        }
        y
    };
    let x = thomas(rhs);
    let mut u = vec![Complex64::default(); n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = thomas(&u);
    let v0 = Complex64::new(1.0, 0.0);
    let vn = off / gamma;
    let factor = (v0 * x[0] + vn * x[n - 1]) / (Complex64::new(1.0, 0.0) + v0 * z[0] + vn * z[n - 1]);
    x.iter().zip(&z).map(|(a, b)| a - factor * b).collect()
}

fn gamma_half_integer(k: u32) -> f64 {
    // Γ(k/2) by recursion from Γ(1) = 1 and Γ(1/2) = √π.
    let (mut g, mut s) = if k % 2 == 0 { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while s + 1e-12 < k as f64 / 2.0 {
        g *= s;
        s += 1.0;
    }
    g
}

/// Upper tail of the chi-square distribution by quadrature of its density.
///
/// Substituting t = x + s² removes the t^{k/2−1} singularity at 0 and
/// composite Simpson runs on s ∈ [0, S].
pub fn chi_square_sf_quadrature(x: f64, k: u32) -> f64 {
    let log_norm = -(k as f64 / 2.0) * 2f64.ln() - gamma_half_integer(k).ln();
    let pdf = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        (log_norm + (k as f64 / 2.0 - 1.0) * t.ln() - t / 2.0).exp()
    };
    if x == 0.0 {
        // 2s·pdf(s²) reduces to a smooth s^{k−1} e^{−s²/2} term
        let f = |s: f64| 2.0 * (log_norm + (k as f64 - 1.0) * s.ln() - s * s / 2.0).exp();
        let f0 = if k == 1 { 2.0 * log_norm.exp() } else { 0.0 };
        let g = |s: f64| if s == 0.0 { f0 } else { f(s) };
        return simpson(g, 0.0, 2000f64.sqrt(), 400_000);
    }
    let f = |s: f64| 2.0 * s * pdf(x + s * s);
    simpson(f, 0.0, (4.0 * x + 2000.0).sqrt(), 400_000)
}

pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Exact two-sided binomial p-value by direct summation of products.
pub fn binomial_two_sided_direct(k: u64, n: u64, p: f64) -> f64 {
    let pmf = |j: u64| {
        // C(n, j) p^j (1−p)^(n−j) as a running product
        let mut v = 1.0;
        for i in 0..j {
            v *= (n - i) as f64 / (i + 1) as f64;
        }
        v * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32)
    };
    let observed = pmf(k);
    (0..=n).map(pmf).filter(|v| *v <= observed * (1.0 + 1e-7)).sum::<f64>().min(1.0)
}

/// Pearson chi-square p-value of samples against a gridded pattern, using
/// `bins` classes of (roughly) equal pattern mass.
pub fn equiprobable_chi_square_p(
    pattern: &qbc_core::engine::ScreenPattern,
    samples: &[f64],
    bins: usize,
) -> f64 {
    let v = pattern.intensity();
    let total: f64 = v.iter().sum();
    let mut acc = 0.0;
    let class: Vec<usize> = v
        .iter()
        .map(|w| {
            let c = (((acc + 0.5 * w) / total) * bins as f64) as usize;
            acc += w;
            c.min(bins - 1)
        })
        .collect();
    let mut mass = vec![0.0; bins];
    for (w, c) in v.iter().zip(&class) {
        mass[*c] += w / total;
    }
    let mut counts = vec![0usize; bins];
    for x in samples {
        let i = pattern.grid().bin_of(*x).expect("sample on grid");
        counts[class[i]] += 1;
    }
    let n = samples.len() as f64;
    let x2: f64 = counts.iter().zip(&mass).map(|(o, p)| (*o as f64 - p * n).powi(2) / (p * n)).sum();
    qbc_core::stats::chi_square_sf(x2, bins as u32 - 1).unwrap()
}

/// RMS width of a freely evolving field after `t`, from position-space
/// moments of the initial field (sixth-order central differences for the
/// derivative).
///
/// ⟨x²⟩ grows as ⟨x²⟩₀ + (t/m)⟨xp+px⟩₀ + (t/m)²⟨p²⟩₀ and ⟨x⟩ linearly.
pub fn free_width_from_moments(field: &qbc_core::engine::ComplexField, hbar_over_m: f64, t: f64) -> f64 {
    let psi = field.amplitudes();
    let grid = field.grid();
    let dx = grid.dx();
    let n = psi.len();
    let (mut norm, mut x1, mut x2, mut p1, mut xp, mut p2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let x = grid.x(i);
        let at = |k: isize| psi[(i as isize + k).rem_euclid(n as isize) as usize];
        let d = ((at(1) - at(-1)) * 45.0 - (at(2) - at(-2)) * 9.0 + (at(3) - at(-3))) / (60.0 * dx);
        let w = psi[i].norm_sqr();
        norm += w;
        x1 += x * w;
        x2 += x * x * w;
        p1 += (psi[i].conj() * d).im;
        xp += 2.0 * x * (psi[i].conj() * d).im;
        p2 += d.norm_sqr();
    }
    let (x1, x2, p1, xp, p2) = (x1 / norm, x2 / norm, p1 / norm, xp / norm, p2 / norm);
    let s = hbar_over_m * t;
    let mean = x1 + s * p1;
    (x2 + s * xp + s * s * p2 - mean * mean).sqrt()
}

/// Every object key path in a JSON document, with array elements merged.
pub fn field_names(v: &serde_json::Value) -> std::collections::BTreeSet<String> {
    let mut out = std::collections::BTreeSet::new();
    fn walk(v: &serde_json::Value, path: &str, out: &mut std::collections::BTreeSet<String>) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    let p = format!("{path}.{k}");
                    out.insert(p.clone());
                    walk(x, &p, out);
                }
            }
            serde_json::Value::Array(a) => a.iter().for_each(|x| walk(x, &format!("{path}[]"), out)),
            _ => {}
        }
    }
    walk(v, "", &mut out);
    out
}
