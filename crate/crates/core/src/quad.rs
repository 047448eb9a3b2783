//! Adaptive Gauss–Kronrod (7/15) quadrature on finite panels, and a
//! geometric-panel scheme for integrals over `[x, inf)`.

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
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integral of `f` over `[a, b]` with relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (whole, err) = gk15(f, a, b);
    if err <= rel_tol * whole.abs() || err < 1e-300 {
        return whole;
    }
    // Global adaptive refinement: always split the panel with the largest error.
    let mut panels = vec![(a, b, whole, err)];
    for _ in 0..4000 {
        let (total, total_err) = panels.iter().fold((0.0, 0.0), |(s, e), p| (s + p.2, e + p.3));
        if total_err <= rel_tol * total.abs() || total_err < 1e-300 {
            break;
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (l, le) = gk15(f, pa, mid);
        let (r, re) = gk15(f, mid, pb);
        panels.push((pa, mid, l, le));
        panels.push((mid, pb, r, re));
    }
    panels.iter().map(|p| p.2).sum()
}

/// Integral of a nonnegative, eventually nonincreasing `f` over `[a, inf)`.
///
/// Panels double in width; the remainder after the last panel is estimated
/// from the ratio of consecutive panel integrals.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, first_width: f64, rel_tol: f64) -> f64 {
    let mut lo = a;
    let mut width = first_width.max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    let mut prev: Option<f64> = None;
    for _ in 0..4000 {
        let hi = lo + width;
        let piece = integrate(f, lo, hi, rel_tol * 1e-2);
        total += piece;
        if piece == 0.0 && total > 0.0 {
            break;
        }
        if let Some(p) = prev {
            if p > 0.0 {
                let ratio = piece / p;
                if ratio < 1.0 {
                    let remainder = piece * ratio / (1.0 - ratio);
                    if remainder <= rel_tol * total {
                        break;
                    }
                }
            }
        }
        prev = Some(piece);
        lo = hi;
        width *= 2.0;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(&|x: f64| x * x * x - 2.0 * x, 0.0, 3.0, 1e-12);
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn exponential_half_line() {
        let v = integrate_to_infinity(&|x: f64| (-x).exp(), 0.0, 1.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn slow_power_tail() {
        // ∫_1^∞ y^{-1.2} dy = 5
        let v = integrate_to_infinity(&|y: f64| y.powf(-1.2), 1.0, 1.0, 1e-10);
        assert!((v / 5.0 - 1.0).abs() < 1e-8, "{v}");
    }
}
