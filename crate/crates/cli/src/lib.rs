pub mod model_file;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

/// Pretty JSON with object keys in sorted order.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v: Value = serde_json::to_value(value).expect("serializable");
    serde_json::to_string_pretty(&v).expect("serializable")
}

pub fn complex_json(z: &Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}
