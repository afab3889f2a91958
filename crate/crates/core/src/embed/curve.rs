//! Fits the low-dimensional similarity kernel `1 / (1 + a d^(2b))` to the
//! offset exponential that is flat up to `min_dist` and decays as
//! `exp(-(d - min_dist))` beyond it.

pub const CURVE_SAMPLES: usize = 300;
pub const CURVE_SPAN: f64 = 3.0;

fn samples(min_dist: f64) -> Vec<(f64, f64)> {
    (0..CURVE_SAMPLES)
        .map(|i| {
            let d = CURVE_SPAN * i as f64 / (CURVE_SAMPLES - 1) as f64;
            let target = if d <= min_dist { 1.0 } else { (-(d - min_dist)).exp() };
            (d, target)
        })
        .collect()
}

#[inline]
fn kernel(d: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * d.powf(2.0 * b))
}

fn sse(pts: &[(f64, f64)], a: f64, b: f64) -> f64 {
    pts.iter().map(|&(d, y)| (kernel(d, a, b) - y).powi(2)).sum()
}

/// Levenberg-Marquardt least squares over the fixed sample grid. Returns
/// `(a, b)`.
pub fn fit_curve(min_dist: f64) -> (f64, f64) {
    let pts = samples(min_dist);
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(&pts, a, b);
    for _ in 0..1000 {
        // normal equations J^T J and J^T r for the 2-parameter model
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(d, y) in &pts {
            if d == 0.0 {
                // kernel is 1 at the origin for any (a, b)
                continue;
            }
            let p = d.powf(2.0 * b);
            let denom = 1.0 + a * p;
            let f = 1.0 / denom;
            let r = f - y;
            let da = -p / (denom * denom);
            let db = -a * p * 2.0 * d.ln() / (denom * denom);
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let mut improved = false;
        for _ in 0..50 {
            let (maa, mbb) = (jaa * (1.0 + lambda), jbb * (1.0 + lambda));
            let det = maa * mbb - jab * jab;
            if det == 0.0 || !det.is_finite() {
                lambda *= 10.0;
                continue;
            }
            let step_a = -(mbb * ga - jab * gb) / det;
            let step_b = -(maa * gb - jab * ga) / det;
            let (na, nb) = (a + step_a, b + step_b);
            let new_cost = if na > 0.0 && nb > 0.0 { sse(&pts, na, nb) } else { f64::INFINITY };
            if new_cost < cost {
                let rel = (step_a / a).abs().max((step_b / b).abs());
                a = na;
                b = nb;
                cost = new_cost;
                lambda = (lambda * 0.1).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return (a, b);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}
