//! Symmetric quadrature rules on the reference triangle.
//!
//! Points are barycentric; weights sum to 1, so integrals are
//! `area * sum(w_q * f(p_q))`.

/// A quadrature rule exact for polynomials up to its degree.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The three permutations of (1-2a, a, a).
fn orbit3(a: f64) -> [[f64; 3]; 3] {
    let b = 1.0 - 2.0 * a;
    [[b, a, a], [a, b, a], [a, a, b]]
}

/// Symmetric rule of the requested exactness degree (1, 2, 4, or 5).
pub fn triangle_rule(degree: usize) -> QuadratureRule {
    match degree {
        1 => QuadratureRule {
            degree,
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
        },
        2 => QuadratureRule {
            degree,
            points: orbit3(1.0 / 6.0).to_vec(),
            weights: vec![1.0 / 3.0; 3],
        },
        4 => {
            let (a1, w1) = (0.445948490915965, 0.223381589678011);
            let (a2, w2) = (0.091576213509771, 0.109951743655322);
            QuadratureRule {
                degree,
                points: orbit3(a1).into_iter().chain(orbit3(a2)).collect(),
                weights: vec![w1, w1, w1, w2, w2, w2],
            }
        }
        5 => {
            let s15 = 15.0_f64.sqrt();
            let (a1, w1) = ((6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
            let (a2, w2) = ((6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
            let mut points = vec![[1.0 / 3.0; 3]];
            points.extend(orbit3(a1));
            points.extend(orbit3(a2));
            QuadratureRule {
                degree,
                points,
                weights: vec![9.0 / 40.0, w1, w1, w1, w2, w2, w2],
            }
        }
        other => panic!("no triangle rule of degree {other} (supported: 1, 2, 4, 5)"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of l0^a l1^b l2^c over the unit-area reference
    /// triangle: 2 a! b! c! / (a+b+c+2)!.
    fn exact_monomial(a: u32, b: u32, c: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    fn check_exactness(rule: &QuadratureRule) {
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let d = rule.degree as u32;
        for a in 0..=d {
            for b in 0..=(d - a) {
                let c = d - a - b;
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32))
                    .sum();
                let exact = exact_monomial(a, b, c);
                assert!(
                    (approx - exact).abs() < 1e-14,
                    "degree-{d} rule wrong on l^({a},{b},{c}): {approx} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        for degree in [1, 2, 4, 5] {
            check_exactness(&triangle_rule(degree));
        }
    }

    #[test]
    fn expected_point_counts() {
        assert_eq!(triangle_rule(1).len(), 1);
        assert_eq!(triangle_rule(2).len(), 3);
        assert_eq!(triangle_rule(4).len(), 6);
        assert_eq!(triangle_rule(5).len(), 7);
    }

    #[test]
    fn points_are_interior() {
        for degree in [1, 2, 4, 5] {
            for p in &triangle_rule(degree).points {
                assert!((p[0] + p[1] + p[2] - 1.0).abs() < 1e-14);
                assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
            }
        }
    }

    #[test]
    #[should_panic(expected = "no triangle rule")]
    fn unsupported_degree_panics() {
        triangle_rule(3);
    }
}
