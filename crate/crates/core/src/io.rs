//! Reproducible text output: CSV with 17 significant digits and JSON with
//! sorted keys.

use serde::Serialize;

/// One number in the fixed `d.dddddddddddddddde±x` form.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

pub fn csv<R: AsRef<[f64]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let cells: Vec<String> = r.as_ref().iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Pretty JSON with keys sorted at every level.
pub fn sorted_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serializable value");
    let mut s = serde_json::to_string_pretty(&v).expect("valid JSON value");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_precision() {
        assert_eq!(fmt_f64(2.0 / 3.0), "6.6666666666666663e-1");
        assert_eq!(fmt_f64(-1.0), "-1.0000000000000000e0");
        assert_eq!(csv(&["a", "b"], &[vec![0.0, 1.5]]), "a,b\n0.0000000000000000e0,1.5000000000000000e0\n");
    }

    #[test]
    fn keys_sorted() {
        #[derive(Serialize)]
        struct S {
            z: u8,
            a: u8,
        }
        assert_eq!(sorted_json(&S { z: 1, a: 2 }), "{\n  \"a\": 2,\n  \"z\": 1\n}\n");
    }
}
