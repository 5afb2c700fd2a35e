//! Real roots of univariate polynomials via companion-matrix eigenvalues.

use nalgebra::{Complex, DMatrix};

/// Evaluates `sum_k a[k] t^k` and its derivative.
pub fn eval_with_derivative(a: &[f64], t: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in a.iter().rev() {
        dp = dp * t + p;
        p = p * t + c;
    }
    (p, dp)
}

/// Evaluates `sum_k a[k] t^k`.
pub fn eval(a: &[f64], t: f64) -> f64 {
    a.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

/// Aberth-Ehrlich refinement of all roots at once; eigenvalues of a badly scaled companion matrix can be far off.
fn polish_all(a: &[f64], z: &mut [Complex<f64>]) {
    let eval_c = |z: Complex<f64>| {
        let mut p = Complex::new(0.0, 0.0);
        let mut dp = Complex::new(0.0, 0.0);
        for &c in a.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    for _ in 0..100 {
        let mut moved = 0.0f64;
        for k in 0..z.len() {
            let (p, dp) = eval_c(z[k]);
            if p.norm() == 0.0 || dp.norm() == 0.0 {
                continue;
            }
            let w = p / dp;
            let mut sum = Complex::new(0.0, 0.0);
            for (j, zj) in z.iter().enumerate() {
                if j != k && *zj != z[k] {
                    sum += (z[k] - zj).inv();
                }
            }
            let step = w / (Complex::new(1.0, 0.0) - w * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[k] -= step;
                moved = moved.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if moved <= 1e-15 {
            break;
        }
    }
}

/// Real roots of `sum_k a[k] t^k` (coefficients in ascending order).
///
/// Leading coefficients negligible relative to the largest one are dropped.
/// Eigenvalues are refined jointly by Aberth-Ehrlich iteration; real roots then get two Newton steps. Roots are returned sorted.
pub fn real_roots(a: &[f64]) -> Vec<f64> {
    let amax = a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if amax == 0.0 {
        return Vec::new();
    }
    let mut d = a.len() - 1;
    while d > 0 && a[d].abs() <= 1e-14 * amax {
        d -= 1;
    }
    if d == 0 {
        return Vec::new();
    }
    // Zero roots are factored out exactly.
    let mut low = 0;
    while low < d && a[low] == 0.0 {
        low += 1;
    }
    let mut roots = Vec::new();
    if low > 0 {
        roots.push(0.0);
    }
    let core = &a[low..=d];
    let m = core.len() - 1;
    if m == 1 {
        roots.push(-core[0] / core[1]);
    } else if m >= 2 {
        // Rescale t = s u so that the monic coefficients are O(1).
        let lead = core[m];
        let s = (0..m)
            .map(|k| (core[k] / lead).abs().powf(1.0 / (m - k) as f64))
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut comp = DMatrix::zeros(m, m);
        for k in 0..m {
            comp[(0, m - 1 - k)] = -core[k] / lead / s.powi((m - k) as i32);
        }
        for i in 1..m {
            comp[(i, i - 1)] = 1.0;
        }
        let mut eig: Vec<Complex<f64>> = comp.complex_eigenvalues().iter().map(|z| z * s).collect();
        polish_all(core, &mut eig);
        for z in eig {
            if z.im.abs() <= 1e-6 * (1.0 + z.re.abs()) {
                roots.push(z.re);
            }
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = eval_with_derivative(a, *r);
            if dp != 0.0 {
                let step = p / dp;
                if step.is_finite() {
                    let cand = *r - step;
                    if eval(a, cand).abs() <= p.abs() {
                        *r = cand;
                    }
                }
            }
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).expect("finite roots"));
    roots
}
