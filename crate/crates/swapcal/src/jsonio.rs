//! Deterministic JSON emission with fixed float formatting.
//!
//! Every float is written as `{:.16e}` — one leading digit plus sixteen
//! fractional digits, i.e. 17 significant digits — which is enough to
//! round-trip any finite `f64` exactly. Combined with the crate-wide use of
//! ordered maps, identical in-memory values serialize to identical bytes, so
//! report files can be compared with `diff` and checked into fixtures.

use std::io;

use serde::Serialize;

/// Serialize any value to compact JSON with 17-significant-digit floats.
///
/// Infallible for the crate's report and file types: they contain only
/// string keys, finite floats, integers, booleans, and nesting thereof.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("crate report types serialize to JSON");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

/// A [`serde_json::ser::Formatter`] that pins float formatting.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        // serde_json replaces non-finite floats with null before this point,
        // so `value` is always finite here.
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{:.16e}", f64::from(value))
    }
}
