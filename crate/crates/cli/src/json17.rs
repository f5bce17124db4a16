//! JSON serialization with floats printed to 17 significant digits, so that
//! identical runs produce byte-identical output regardless of the shortest
//! round-trip representation.

use serde::Serialize;
use serde_json::ser::Formatter;
use std::io;

struct SigDigits17;

impl Formatter for SigDigits17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits17);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("json is utf8"))
}
