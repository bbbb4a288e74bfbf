use serde_json::{Map, Number, Value};

/// Rounds every float in `v` to 12 significant digits.
pub fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap();
            if let Some(r) = Number::from_f64(round12(x)) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(m) => m.values_mut().for_each(round_numbers),
        _ => {}
    }
}

pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

pub struct RunReport {
    pub command: &'static str,
    pub inputs: Map<String, Value>,
    pub config: Map<String, Value>,
    pub result: Value,
}

impl RunReport {
    pub fn new(command: &'static str) -> Self {
        RunReport { command, inputs: Map::new(), config: Map::new(), result: Value::Null }
    }

    pub fn input(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.inputs.insert(key.into(), value.into());
        self
    }

    pub fn config(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.config.insert(key.into(), value.into());
        self
    }

    pub fn to_json(&self) -> Value {
        let mut v = serde_json::json!({
            "command": self.command,
            "inputs": self.inputs,
            "config": self.config,
            "result": self.result,
        });
        round_numbers(&mut v);
        v
    }

    pub fn print(&self) {
        use std::io::Write;
        let text = serde_json::to_string_pretty(&self.to_json()).expect("report serializes");
        // a closed pipe is not worth a panic
        let _ = writeln!(std::io::stdout().lock(), "{text}");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(round12(4.0 / 2.2), 1.81818181818);
        assert_eq!(round12(2.0), 2.0);
        assert_eq!(round12(0.1 + 0.2), 0.3);
        let mut v = serde_json::json!({"a": [1.0 / 3.0, 7], "b": "x"});
        round_numbers(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.333333333333,7],"b":"x"}"#);
    }
}
