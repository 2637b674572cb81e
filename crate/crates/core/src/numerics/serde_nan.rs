//! JSON writes non-finite floats as `null`; these read `null` back as NaN.

use serde::{Deserialize, Deserializer};

pub fn f64<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub fn vec_f64<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
}

#[cfg(test)]
mod tests {
    #[derive(serde::Deserialize, serde::Serialize)]
    struct S {
        #[serde(deserialize_with = "super::f64")]
        a: f64,
        #[serde(deserialize_with = "super::vec_f64")]
        b: Vec<f64>,
    }

    #[test]
    fn nan_round_trip() {
        let s = serde_json::to_string(&S { a: f64::NAN, b: vec![1.0, f64::NAN] }).unwrap();
        let back: S = serde_json::from_str(&s).unwrap();
        assert!(back.a.is_nan() && back.b[0] == 1.0 && back.b[1].is_nan());
    }
}
