//! Trigonometric polynomials on the 2-torus.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// `cos_coef·cos(2π k·x) + sin_coef·sin(2π k·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTerm {
    pub k: [i64; 2],
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// `constant + Σ terms` on ℝ²/ℤ².
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPoly {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    /// `amp·cos(2π x₁)`.
    pub fn cos_x1(amp: f64) -> Self {
        Self {
            constant: 0.0,
            terms: vec![TrigTerm {
                k: [1, 0],
                cos: amp,
                sin: 0.0,
            }],
        }
    }

    pub fn with_term(mut self, k: [i64; 2], cos: f64, sin: f64) -> Self {
        self.terms.push(TrigTerm { k, cos, sin });
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| {
            let phase = TAU * (t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1]);
            let (s, c) = phase.sin_cos();
            acc + t.cos * c + t.sin * s
        })
    }

    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for t in &self.terms {
            let phase = TAU * (t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1]);
            let (s, c) = phase.sin_cos();
            let dphase = -t.cos * s + t.sin * c;
            g[0] += TAU * t.k[0] as f64 * dphase;
            g[1] += TAU * t.k[1] as f64 * dphase;
        }
        g
    }

    /// `Σ (|cos| + |sin|)`, a bound on `|p − constant|`.
    pub fn oscillation_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum()
    }

    /// Bound on the Euclidean norm of the gradient.
    pub fn lipschitz_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let kn = ((t.k[0] * t.k[0] + t.k[1] * t.k[1]) as f64).sqrt();
                TAU * kn * (t.cos.abs() + t.sin.abs())
            })
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            constant: self.constant * factor,
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    k: t.k,
                    cos: t.cos * factor,
                    sin: t.sin * factor,
                })
                .collect(),
        }
    }

    /// Mean over the torus of `p(x)²`.
    pub fn mean_square(&self) -> f64 {
        // distinct frequencies are orthogonal; ±k alias onto the same mode
        let mut modes: Vec<([i64; 2], f64, f64)> = Vec::new();
        for t in &self.terms {
            if t.k == [0, 0] {
                continue;
            }
            let (key, sgn) = if t.k[0] > 0 || (t.k[0] == 0 && t.k[1] > 0) {
                (t.k, 1.0)
            } else {
                ([-t.k[0], -t.k[1]], -1.0)
            };
            if let Some(m) = modes.iter_mut().find(|m| m.0 == key) {
                m.1 += t.cos;
                m.2 += sgn * t.sin;
            } else {
                modes.push((key, t.cos, sgn * t.sin));
            }
        }
        let c0 = self.constant
            + self
                .terms
                .iter()
                .filter(|t| t.k == [0, 0])
                .map(|t| t.cos)
                .sum::<f64>();
        c0 * c0 + modes.iter().map(|m| 0.5 * (m.1 * m.1 + m.2 * m.2)).sum::<f64>()
    }

    /// Mean over the torus.
    pub fn mean(&self) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|t| t.k == [0, 0])
                .map(|t| t.cos)
                .sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let p = TrigPoly::constant(0.2)
            .with_term([1, 0], 0.3, -0.1)
            .with_term([2, -1], 0.05, 0.2);
        let x = [0.31, 0.77];
        let h = 1e-6;
        let g = p.gradient(x);
        let fd0 = (p.value([x[0] + h, x[1]]) - p.value([x[0] - h, x[1]])) / (2.0 * h);
        let fd1 = (p.value([x[0], x[1] + h]) - p.value([x[0], x[1] - h])) / (2.0 * h);
        assert!((g[0] - fd0).abs() < 1e-7);
        assert!((g[1] - fd1).abs() < 1e-7);
        let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!(gn <= p.lipschitz_bound());
    }

    #[test]
    fn mean_square_by_quadrature() {
        let p = TrigPoly::constant(1.0).with_term([1, 0], 0.1, 0.0);
        let n = 200;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = p.value([i as f64 / n as f64, j as f64 / n as f64]);
                acc += v * v;
            }
        }
        acc /= (n * n) as f64;
        assert!((acc - p.mean_square()).abs() < 1e-12);
        assert!((p.mean_square() - 1.005).abs() < 1e-15);
    }
}
