//! Quadrature rules on the reference triangle and the unit segment.
//!
//! Triangle rules are symmetric Gauss rules (Dunavant tables) stated in
//! barycentric coordinates with weights summing to the reference measure
//! 1/2. Segment rules are Gauss-Legendre on [0, 1].

/// Quadrature on the reference triangle {x, y >= 0, x + y <= 1}.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates (l0, l1, l2) of each node.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Every polynomial up to this total degree is integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    fn from_groups(degree: usize, groups: &[(f64, [f64; 3], bool)]) -> Self {
        // weight convention in the tables: sums to 1, rescaled to area 1/2
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(w, [a, b, c], full_orbit) in groups {
            let perms: &[[f64; 3]] = if full_orbit {
                &[
                    [a, b, c],
                    [a, c, b],
                    [b, a, c],
                    [b, c, a],
                    [c, a, b],
                    [c, b, a],
                ]
            } else if (a - b).abs() < 1e-14 && (b - c).abs() < 1e-14 {
                &[[a, b, c]]
            } else {
                &[[a, b, c], [b, c, a], [c, a, b]]
            };
            for p in perms {
                points.push(*p);
                weights.push(w * 0.5);
            }
        }
        Self { points, weights, degree }
    }
}

/// Returns a triangle rule exact at least to the requested degree.
pub fn triangle_rule(degree: usize) -> QuadratureRule {
    match degree {
        0 | 1 => QuadratureRule::from_groups(1, &[(1.0, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], false)]),
        2 => QuadratureRule::from_groups(
            2,
            &[(1.0 / 3.0, [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], false)],
        ),
        3 | 4 => QuadratureRule::from_groups(
            4,
            &[
                (
                    0.223381589678011,
                    [1.0 - 2.0 * 0.445948490915965, 0.445948490915965, 0.445948490915965],
                    false,
                ),
                (
                    0.109951743655322,
                    [1.0 - 2.0 * 0.091576213509771, 0.091576213509771, 0.091576213509771],
                    false,
                ),
            ],
        ),
        5 | 6 => QuadratureRule::from_groups(
            6,
            &[
                (
                    0.116786275726379,
                    [1.0 - 2.0 * 0.249286745170910, 0.249286745170910, 0.249286745170910],
                    false,
                ),
                (
                    0.050844906370207,
                    [1.0 - 2.0 * 0.063089014491502, 0.063089014491502, 0.063089014491502],
                    false,
                ),
                (
                    0.082851075618374,
                    [
                        1.0 - 0.310352451033785 - 0.053145049844816,
                        0.310352451033785,
                        0.053145049844816,
                    ],
                    true,
                ),
            ],
        ),
        d => panic!("no triangle quadrature rule of degree {d} available (max 6)"),
    }
}

/// Gauss-Legendre points and weights on [0, 1]; weights sum to 1.
#[derive(Debug, Clone)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Returns a segment rule exact at least to the requested degree.
pub fn segment_rule(degree: usize) -> SegmentRule {
    let (pts, wts): (Vec<f64>, Vec<f64>) = match degree {
        0 | 1 => (vec![0.5], vec![1.0]),
        2 | 3 => {
            let d = 0.5 / 3.0f64.sqrt();
            (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
        }
        4 | 5 => {
            let d = 0.5 * (3.0f64 / 5.0).sqrt();
            (
                vec![0.5 - d, 0.5, 0.5 + d],
                vec![5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
            )
        }
        6 | 7 => {
            let a = 0.5 - 0.5 * 0.339981043584856;
            let b = 0.5 - 0.5 * 0.861136311594053;
            let wa = 0.652145154862546 / 2.0;
            let wb = 0.347854845137454 / 2.0;
            (vec![b, a, 1.0 - a, 1.0 - b], vec![wb, wa, wa, wb])
        }
        d => panic!("no segment quadrature rule of degree {d} available (max 7)"),
    };
    SegmentRule { points: pts, weights: wts, degree: degree.max(1) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product::<f64>().max(1.0)
    }

    /// Exact integral of x^p y^q over the reference triangle.
    fn exact_monomial(p: usize, q: usize) -> f64 {
        factorial(p) * factorial(q) / factorial(p + q + 2)
    }

    #[test]
    fn triangle_rules_pass_monomial_exactness() {
        for degree in [1usize, 2, 4, 6] {
            let rule = triangle_rule(degree);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 0.5).abs() < 1e-14, "degree {degree}: weights sum {wsum}");
            for p in 0..=degree {
                for q in 0..=(degree - p) {
                    let mut acc = 0.0;
                    for (bary, w) in rule.points.iter().zip(&rule.weights) {
                        let x = bary[1];
                        let y = bary[2];
                        acc += w * x.powi(p as i32) * y.powi(q as i32);
                    }
                    let exact = exact_monomial(p, q);
                    assert!(
                        (acc - exact).abs() < 1e-13,
                        "degree {degree}, monomial x^{p} y^{q}: got {acc}, want {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn segment_rules_pass_monomial_exactness() {
        for degree in [1usize, 3, 5, 7] {
            let rule = segment_rule(degree);
            for p in 0..=degree {
                let mut acc = 0.0;
                for (x, w) in rule.points.iter().zip(&rule.weights) {
                    acc += w * x.powi(p as i32);
                }
                let exact = 1.0 / (p as f64 + 1.0);
                assert!(
                    (acc - exact).abs() < 1e-14,
                    "degree {degree}, monomial s^{p}: got {acc}, want {exact}"
                );
            }
        }
    }
}
