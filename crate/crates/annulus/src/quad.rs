//! Quadrature utilities: Gauss–Legendre rules, adaptive Gauss–Kronrod
//! integration of complex-valued integrands, and the exact logarithmic
//! product-integration weights used for the log-singular kernels.

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes sorted ascending.
///
/// # Panics
///
/// Panics if `n < 2`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(n).expect("Gauss-Legendre rule needs at least two nodes");
    let mut pairs: Vec<(f64, f64)> = rule.into_node_weight_pairs();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|t| half * t).collect(),
    )
}

// Kronrod 15-point extension of the 7-point Gauss rule (abscissae on [0, 1]).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let hl = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    for j in 0..7 {
        let dx = hl * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        rk += (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            rg += (f1 + f2) * WG[j / 2];
        }
    }
    let rk = rk * hl;
    let rg = rg * hl;
    (rk, (rk - rg).norm())
}

/// Adaptive Gauss–Kronrod (7/15) integration of a complex-valued integrand
/// over `[a, b]`, bisecting panels until the summed error estimate is below
/// `tol` (absolute) or the panel budget is exhausted.
pub fn adaptive_gk<F: FnMut(f64) -> Complex64>(mut f: F, a: f64, b: f64, tol: f64) -> Complex64 {
    if a == b {
        return Complex64::new(0.0, 0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels: Vec<(f64, f64, Complex64, f64)> = vec![(a, b, v, e)];
    for _ in 0..2000 {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = gk15(&mut f, pa, mid);
        let (v2, e2) = gk15(&mut f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
    panels.iter().map(|p| p.2).sum()
}

/// Real-valued convenience wrapper around [`adaptive_gk`].
pub fn adaptive_gk_real<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    adaptive_gk(|x| Complex64::new(f(x), 0.0), a, b, tol).re
}

/// Legendre polynomials `P_0..P_{n-1}` evaluated at `x`.
pub fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n];
    if n == 0 {
        return p;
    }
    p[0] = 1.0;
    if n > 1 {
        p[1] = x;
    }
    for b in 1..n.saturating_sub(1) {
        let bf = b as f64;
        p[b + 1] = ((2.0 * bf + 1.0) * x * p[b] - bf * p[b - 1]) / (bf + 1.0);
    }
    p
}

/// `∫_{-1}^{1} P_a(x) Q_b(x) dx` for Legendre functions of the first and
/// second kind.
fn legendre_pq_moment(a: usize, b: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let (af, bf) = (a as f64, b as f64);
    let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
    (1.0 - sign) / ((af - bf) * (af + bf + 1.0))
}

/// Exact moments `L_ab = ∬_{[-1,1]²} log|x − y| P_a(x) P_b(y) dx dy`.
pub fn log_legendre_moments(n: usize) -> Vec<Vec<f64>> {
    let single = |a: usize, b: usize| -> f64 {
        // b >= 1 branch of ∫ log|x-y| P_b(y) dy = 2/(2b+1) [Q_{b+1} - Q_{b-1}].
        let bf = b as f64;
        2.0 / (2.0 * bf + 1.0) * (legendre_pq_moment(a, b + 1) - legendre_pq_moment(a, b - 1))
    };
    let mut l = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            l[a][b] = if a == 0 && b == 0 {
                4.0 * std::f64::consts::LN_2 - 6.0
            } else if b == 0 {
                single(b, a)
            } else {
                single(a, b)
            };
        }
    }
    l
}

/// Product-integration matrix `W` on the `n`-point Gauss–Legendre grid of
/// `[0, 1]` such that `∬_{[0,1]²} log|ρ − ρ′| u(ρ) v(ρ′) dρ dρ′ ≈ uᵀ W v`,
/// exact whenever `u` and `v` are polynomials of degree below `n`.
pub fn log_product_matrix(n: usize) -> Vec<Vec<f64>> {
    let (x, w) = gauss_legendre(n);
    let l = log_legendre_moments(n);
    // C[b][j] = (2b+1)/2 · P_b(x_j) · w_j extracts Legendre coefficients.
    let mut c = vec![vec![0.0; n]; n];
    for j in 0..n {
        let p = legendre_values(n, x[j]);
        for b in 0..n {
            c[b][j] = (2.0 * b as f64 + 1.0) * 0.5 * p[b] * w[j];
        }
    }
    // LC[a][j] = Σ_b L[a][b] C[b][j]
    let mut lc = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            if l[a][b] == 0.0 {
                continue;
            }
            for j in 0..n {
                lc[a][j] += l[a][b] * c[b][j];
            }
        }
    }
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for a in 0..n {
                s += c[a][i] * lc[a][j];
            }
            // Map [-1,1]² → [0,1]²: log|ρ−ρ′| = log|x−y| − log 2, measure /4.
            out[i][j] = 0.25 * (s - std::f64::consts::LN_2 * w[i] * w[j]);
        }
    }
    // Symmetrize rounding noise.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = s;
            out[j][i] = s;
        }
    }
    out
}
