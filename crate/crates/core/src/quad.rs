//! Fixed-order Gauss-Legendre rules on subdivided intervals.

/// 8-point Gauss-Legendre nodes on [-1, 1] (positive half).
const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Integrates `f` over `[a, b]` with one 8-point Gauss-Legendre panel.
#[inline]
pub fn gauss8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for k in 0..4 {
        let dx = half * GL8_X[k];
        acc += GL8_W[k] * (f(mid - dx) + f(mid + dx));
    }
    acc * half
}

/// Composite 8-point rule with `panels` equal panels. Orientation follows `a`, `b`.
pub fn gauss8_composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let step = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let lo = a + step * i as f64;
        let hi = if i + 1 == panels { b } else { lo + step };
        acc += gauss8(f, lo, hi);
    }
    acc
}

/// Integrates over `[a, b]` splitting at every breakpoint strictly inside the
/// interval; each piece gets `panels` panels.
pub fn gauss8_with_breaks<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    panels: usize,
) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&c| c > lo && c < hi)
        .collect();
    cuts.sort_by(|x, y| x.total_cmp(y));
    let mut acc = 0.0;
    let mut left = lo;
    for c in cuts.into_iter().chain(std::iter::once(hi)) {
        acc += gauss8_composite(f, left, c, panels);
        left = c;
    }
    sign * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_up_to_degree_15_are_exact() {
        let f = |x: f64| x.powi(15) - 3.0 * x.powi(8) + x;
        let exact = |x: f64| x.powi(16) / 16.0 - 3.0 * x.powi(9) / 9.0 + 0.5 * x * x;
        let got = gauss8(&f, -0.3, 1.7);
        assert!((got - (exact(1.7) - exact(-0.3))).abs() < 1e-12);
    }

    #[test]
    fn breaks_and_orientation() {
        let f = |x: f64| x.abs();
        let got = gauss8_with_breaks(&f, 1.0, -2.0, &[0.0], 1);
        assert!((got + 2.5).abs() < 1e-14);
    }
}
