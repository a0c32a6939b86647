//! Minimal CSV output: header row, LF endings, shortest round-trip floats.

use std::io::{self, Write};

/// Shortest decimal that parses back to the same `f64`; exponent form
/// outside `[1e-4, 1e16)`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub struct CsvWriter<'a> {
    out: &'a mut dyn Write,
}

impl<'a> CsvWriter<'a> {
    pub fn new(out: &'a mut dyn Write, header: &[&str]) -> io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 2.58e-15, 1e300, -7.25, 123456.789, 5e-324] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(1.0), "1");
        assert_eq!(fmt_f64(5.17e-16), "5.17e-16");
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(f64::NAN), "nan");
    }

    #[test]
    fn writes_header_and_rows() {
        let mut buf = Vec::new();
        let mut w = CsvWriter::new(&mut buf, &["k", "x"]).unwrap();
        w.row(&["1".into(), fmt_f64(0.5)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "k,x\n1,0.5\n");
    }
}
