//! Test-only numerical oracles, independent of the crate's closed forms.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Adaptive Simpson quadrature of `f` on [a, b] to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// ∫₀^∞ f, split into unit-ish panels until the tail is negligible.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: &F, scale: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut width = 0.25 * scale;
    for _ in 0..400 {
        let hi = lo + width;
        let piece = integrate(f, lo, hi, tol * 1e-2);
        total += piece;
        if lo > 50.0 * scale && piece.abs() < tol * 1e-4 {
            break;
        }
        lo = hi;
        width *= 1.1;
    }
    total
}

/// Central difference with step h = 1e-5·max(1, s).
pub fn derivative<F: Fn(f64) -> f64>(f: &F, s: f64) -> f64 {
    let h = 1e-5 * s.max(1.0);
    (f(s + h) - f(s - h)) / (2.0 * h)
}

/// One-sided second derivative at 0 (the transform is only defined for s ≥ 0).
pub fn second_derivative_at_zero<F: Fn(f64) -> f64>(f: &F, h: f64) -> f64 {
    // Second-order forward formula.
    (2.0 * f(0.0) - 5.0 * f(h) + 4.0 * f(2.0 * h) - f(3.0 * h)) / (h * h)
}

pub fn random_triples(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)])
        .collect()
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}
