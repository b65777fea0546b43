//! Tetrahedral quadrature and reference P2 shape data.

/// Number of points of the tetrahedral rule.
pub const NQ: usize = 14;

/// Local edge order of the quadratic tetrahedron (also used by VTK).
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [1, 2], [0, 2], [0, 3], [1, 3], [2, 3]];

/// Symmetric 14-point rule, exact for polynomials of degree 5.
///
/// Points are barycentric, weights sum to one (multiply by the tet volume).
pub struct TetRule {
    pub points: [[f64; 4]; NQ],
    pub weights: [f64; NQ],
}

const A1: f64 = 0.310_885_919_263_300_6;
const W1: f64 = 0.112_687_925_718_015_9;
const A2: f64 = 0.092_735_250_310_891_2;
const W2: f64 = 0.073_493_043_116_361_9;
const B3: f64 = 0.045_503_704_125_649_6;
const W3: f64 = 0.042_546_020_777_081_2;

pub fn tet_rule() -> TetRule {
    let mut points = [[0.0; 4]; NQ];
    let mut weights = [0.0; NQ];
    let mut k = 0;
    for (a, w) in [(A1, W1), (A2, W2)] {
        for i in 0..4 {
            let mut p = [a; 4];
            p[i] = 1.0 - 3.0 * a;
            points[k] = p;
            weights[k] = w;
            k += 1;
        }
    }
    let c = 0.5 - B3;
    for [i, j] in LOCAL_EDGES {
        let mut p = [B3; 4];
        p[i] = c;
        p[j] = c;
        points[k] = p;
        weights[k] = W3;
        k += 1;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    TetRule { points, weights }
}

/// P2 shape values and barycentric gradient coefficients at the rule points.
///
/// The gradient of local basis `k` at point `q` is
/// `Σ_m grad_coef[q][k][m] ∇λ_m`.
pub struct P2Reference {
    pub rule: TetRule,
    pub values: [[f64; 10]; NQ],
    pub grad_coef: [[[f64; 4]; 10]; NQ],
}

impl P2Reference {
    pub fn new() -> Self {
        let rule = tet_rule();
        let mut values = [[0.0; 10]; NQ];
        let mut grad_coef = [[[0.0; 4]; 10]; NQ];
        for q in 0..NQ {
            let l = rule.points[q];
            for k in 0..4 {
                values[q][k] = l[k] * (2.0 * l[k] - 1.0);
                grad_coef[q][k][k] = 4.0 * l[k] - 1.0;
            }
            for (e, [i, j]) in LOCAL_EDGES.iter().copied().enumerate() {
                values[q][4 + e] = 4.0 * l[i] * l[j];
                grad_coef[q][4 + e][i] = 4.0 * l[j];
                grad_coef[q][4 + e][j] = 4.0 * l[i];
            }
        }
        Self {
            rule,
            values,
            grad_coef,
        }
    }
}

impl Default for P2Reference {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn exact_for_degree_five_monomials() {
        let rule = tet_rule();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                for c in 0..=(5 - a - b) {
                    for d in 0..=(5 - a - b - c) {
                        let exact = 6.0 * factorial(a) * factorial(b) * factorial(c) * factorial(d)
                            / factorial(a + b + c + d + 3);
                        let approx: f64 = (0..NQ)
                            .map(|q| {
                                let p = rule.points[q];
                                rule.weights[q]
                                    * p[0].powi(a as i32)
                                    * p[1].powi(b as i32)
                                    * p[2].powi(c as i32)
                                    * p[3].powi(d as i32)
                            })
                            .sum();
                        assert!((approx - exact).abs() < 1e-14, "{a}{b}{c}{d}: {approx} vs {exact}");
                    }
                }
            }
        }
    }

    #[test]
    fn weights_positive_points_inside() {
        let rule = tet_rule();
        for q in 0..NQ {
            assert!(rule.weights[q] > 0.0);
            assert!((rule.points[q].iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(rule.points[q].iter().all(|&l| l > 0.0));
        }
    }

    #[test]
    fn p2_partition_of_unity() {
        let r = P2Reference::new();
        for q in 0..NQ {
            assert!((r.values[q].iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for m in 0..4 {
                let s: f64 = (0..10).map(|k| r.grad_coef[q][k][m]).sum();
                // Σ_k ∇φ_k = Σ_m s_m ∇λ_m must vanish; since Σ∇λ_m = 0 all s_m are equal.
                let s0: f64 = (0..10).map(|k| r.grad_coef[q][k][0]).sum();
                assert!((s - s0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn p2_basis_integrals() {
        let r = P2Reference::new();
        for k in 0..10 {
            let integral: f64 = (0..NQ).map(|q| r.rule.weights[q] * r.values[q][k]).sum();
            let exact = if k < 4 { -1.0 / 20.0 } else { 1.0 / 5.0 };
            assert!((integral - exact).abs() < 1e-14);
        }
    }
}
