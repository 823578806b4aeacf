use super::ModuleResponse;
use crate::provider::Payload;

/// L∞ distance over the union of keys, absent keys read as 0.
pub fn payload_distance(a: &Payload, b: &Payload) -> f64 {
    let mut d: f64 = 0.0;
    for (k, va) in a {
        d = d.max((va - b.get(k).copied().unwrap_or(0.0)).abs());
    }
    for (k, vb) in b {
        if !a.contains_key(k) {
            d = d.max(vb.abs());
        }
    }
    d
}

/// Largest per-module payload change between two aligned response lists.
pub fn response_delta(prev: &[ModuleResponse], curr: &[ModuleResponse]) -> f64 {
    prev.iter()
        .zip(curr)
        .map(|(p, c)| payload_distance(&p.payload, &c.payload))
        .fold(0.0, f64::max)
}

pub fn check_convergence(prev: &[ModuleResponse], curr: &[ModuleResponse], epsilon: f64) -> bool {
    response_delta(prev, curr) < epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ModuleKind;

    fn r(v: f64) -> Vec<ModuleResponse> {
        vec![ModuleResponse::new(
            ModuleKind::Planning,
            "x",
            Payload::from([("plan_feasibility".to_string(), v)]),
            0.5,
        )]
    }

    #[test]
    fn identical_converges() {
        assert!(check_convergence(&r(0.4), &r(0.4), 1e-9));
    }

    #[test]
    fn tenth_difference_does_not() {
        assert!(!check_convergence(&r(0.4), &r(0.5), 0.05));
    }

    #[test]
    fn absent_key_is_zero() {
        let a = Payload::from([("x".to_string(), 0.3)]);
        assert!((payload_distance(&a, &Payload::new()) - 0.3).abs() < 1e-15);
        assert!((payload_distance(&Payload::new(), &a) - 0.3).abs() < 1e-15);
    }
}
