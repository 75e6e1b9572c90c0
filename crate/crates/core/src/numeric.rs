//! Small 1-D numerical kernels: bracketing, golden section, quadrature.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Root of `g` in `[a, b]` by bisection, assuming `g(a)` and `g(b)` differ
/// in sign. Runs until the bracket stops shrinking.
pub fn bisect<G: FnMut(f64) -> f64>(mut g: G, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a);
    if ga == 0.0 {
        return a;
    }
    let neg_at_a = ga < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == neg_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Minimises `phi` on `[a, b]` by golden-section search.
/// Returns the best abscissa seen and its value.
pub fn golden_min<P>(mut phi: P, mut a: f64, mut b: f64, iters: usize) -> Result<(f64, f64)>
where
    P: FnMut(f64) -> Result<f64>,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = phi(c)?;
    let mut fd = phi(d)?;
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = phi(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = phi(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

/// Three-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss3<G: FnMut(f64) -> Result<f64>>(mut g: G, a: f64, b: f64) -> Result<f64> {
    const NODE: f64 = 0.774_596_669_241_483_4;
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let s = 5.0 * g(m - r * NODE)? + 8.0 * g(m)? + 5.0 * g(m + r * NODE)?;
    Ok(r * s / 9.0)
}

/// True when `a` and `b` agree to `rel` relative to `max(1, |a|, |b|)`.
pub fn near(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * 1f64.max(a.abs()).max(b.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|t| t * t - 2.0, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn golden_finds_parabola_min() {
        let (x, v) = golden_min(|t| Ok((t - 0.3) * (t - 0.3) + 1.0), -1.0, 2.0, 100).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gauss3_is_exact_for_quintics() {
        let v = gauss3(|t| Ok(t.powi(5) + t * t), 0.0, 2.0).unwrap();
        assert!((v - (64.0 / 6.0 + 8.0 / 3.0)).abs() < 1e-12);
    }
}
