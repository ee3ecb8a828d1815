//! Small quadrature rules on intervals.

/// Composite Simpson nodes and weights on `[a, b]`.
///
/// `points` is rounded up to the next odd count (Simpson needs an even
/// number of panels).
pub fn simpson(a: f64, b: f64, points: usize) -> (Vec<f64>, Vec<f64>) {
    let points = points.max(3);
    let points = if points % 2 == 0 { points + 1 } else { points };
    let panels = points - 1;
    let h = (b - a) / panels as f64;
    let nodes: Vec<f64> = (0..points)
        .map(|i| if i == panels { b } else { a + h * i as f64 })
        .collect();
    let weights = (0..points)
        .map(|i| {
            let c = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss–Legendre rule on `[a, b]`, exact for polynomials of degree ≤ 9.
pub fn gauss_legendre5(a: f64, b: f64) -> [(f64, f64); 5] {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 5];
    for (slot, (x, w)) in out.iter_mut().zip(GL5_NODES.iter().zip(GL5_WEIGHTS.iter())) {
        *slot = (mid + half * x, half * w);
    }
    out
}
