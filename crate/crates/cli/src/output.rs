//! Deterministic CSV and JSON writers sharing one header block.

use std::fmt::Write as _;

use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use qldp_core::Certificate;

/// Provenance carried by every output file.
#[derive(Clone, Debug)]
pub struct Header {
    pub pipeline: String,
    pub config_sha256: String,
    pub certificate: Option<Certificate>,
    pub order: Option<usize>,
    pub tail_bound: Option<f64>,
    pub extra: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{:02x}", b);
        s
    })
}

/// 17 significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{:.16e}", v)
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn certificate_text(c: &Option<Certificate>) -> String {
    match c {
        Some(c) => format!(
            "a={} beta0={} delta={} margin={}",
            num(c.a),
            num(c.beta0),
            num(c.delta),
            num(c.margin)
        ),
        None => "none".into(),
    }
}

impl Header {
    fn lines(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("pipeline".to_string(), self.pipeline.clone()),
            ("config_sha256".to_string(), self.config_sha256.clone()),
            ("certificate".to_string(), certificate_text(&self.certificate)),
            ("K".to_string(), self.order.map_or("none".into(), |k| k.to_string())),
            ("tail_bound".to_string(), self.tail_bound.map_or("none".into(), num)),
        ];
        out.extend(self.extra.iter().cloned());
        out
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("pipeline".into(), Value::from(self.pipeline.clone()));
        m.insert("config_sha256".into(), Value::from(self.config_sha256.clone()));
        m.insert(
            "certificate".into(),
            match &self.certificate {
                Some(c) => certificate_json(c),
                None => Value::Null,
            },
        );
        m.insert("K".into(), self.order.map_or(Value::Null, Value::from));
        m.insert("tail_bound".into(), self.tail_bound.map_or(Value::Null, json_num));
        for (k, v) in &self.extra {
            m.insert(k.clone(), Value::from(v.clone()));
        }
        Value::Object(m)
    }
}

pub fn json_num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn certificate_json(c: &Certificate) -> Value {
    let mut m = Map::new();
    m.insert("a".into(), json_num(c.a));
    m.insert("beta0".into(), json_num(c.beta0));
    m.insert("delta".into(), json_num(c.delta));
    m.insert("margin".into(), json_num(c.margin));
    Value::Object(m)
}

/// A CSV table: `# key = value` header lines, column names, then rows.
pub fn csv(header: &Header, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    for (k, v) in header.lines() {
        let _ = writeln!(s, "# {} = {}", k, v);
    }
    let _ = writeln!(s, "{}", columns.join(","));
    for r in rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    s
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn json(header: &Header, mut body: Map<String, Value>) -> String {
    body.insert("header".into(), header.to_json());
    let mut s = serde_json::to_string_pretty(&Value::Object(body)).expect("JSON values are finite or null");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn numbers_have_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(-3.0), "-3.0000000000000000e0");
    }

    #[test]
    fn json_keys_are_sorted() {
        let h = Header {
            pipeline: "psinorm".into(),
            config_sha256: "x".into(),
            certificate: None,
            order: None,
            tail_bound: None,
            extra: vec![],
        };
        let mut body = Map::new();
        body.insert("zeta".into(), Value::from(1));
        body.insert("alpha".into(), Value::from(2));
        let s = json(&h, body);
        let a = s.find("\"alpha\"").unwrap();
        let hd = s.find("\"header\"").unwrap();
        let z = s.find("\"zeta\"").unwrap();
        assert!(a < hd && hd < z);
    }
}
