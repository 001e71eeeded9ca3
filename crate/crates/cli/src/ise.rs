use sdemap::model::DiscretePath;

/// `∫ |X_t - x(t)|² dt` by the trapezoidal rule on the grid of `truth`, with
/// `x` the piecewise-linear interpolant of `estimate`.
pub fn compute_ise(truth: &DiscretePath, estimate: &DiscretePath) -> f64 {
    let times = truth.grid().times();
    let mut x = vec![0.0; estimate.dim()];
    let sq = |k: usize, x: &mut [f64]| {
        estimate.at_into(times[k], x);
        truth.state(k).iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    };
    let mut prev = sq(0, &mut x);
    let mut total = 0.0;
    for k in 1..times.len() {
        let cur = sq(k, &mut x);
        total += 0.5 * (times[k] - times[k - 1]) * (prev + cur);
        prev = cur;
    }
    total
}
