//! Nine-significant-digit float canonicalization shared by the simulator and
//! the stream writer, so that in-memory values survive a JSONL round trip.

/// Rounds to 9 significant decimal digits.
pub fn q9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub fn q9_vec(xs: &mut [f64]) {
    for x in xs {
        *x = q9(*x);
    }
}

/// `serialize_with` helper that writes a float at 9 significant digits.
pub fn ser_q9<S: serde::Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(q9(*x))
}
