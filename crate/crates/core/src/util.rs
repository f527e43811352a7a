/// `⌈ratio·n⌉` with slack for binary representation error in the product
/// (0.3·10 evaluates to 3.0000000000000004).
pub(crate) fn ceil_fraction(ratio: f64, n: usize) -> usize {
    let k = (ratio * n as f64 - 1e-9).ceil();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(n)
    }
}
