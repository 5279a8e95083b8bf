/// Fixed 17-significant-digit scientific formatting; round-trips every `f64`.
///
/// Negative zero is written as positive zero so output bytes do not depend
/// on the sign of an exact cancellation.
pub fn fmt_f64(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}
