//! Closed-form separable fields: sums of terms `amp * f1(x) f2(y) f3(z)`
//! where every 1D factor is `sin(freq*t + offset + quarter*pi/2)`.
//!
//! The family is closed under differentiation (a derivative bumps `quarter`
//! and multiplies by `freq`), so curl/grad/div/Laplace compositions stay
//! exact. Quarter turns are tracked as integers to keep term merging and
//! trigonometric evaluation exact.

use nalgebra::{Matrix3, Vector3};

pub type V3 = Vector3<f64>;
pub type M3 = Matrix3<f64>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Factor1D {
    pub freq: f64,
    pub offset: f64,
    pub quarter: u8,
}

impl Factor1D {
    pub const ONE: Factor1D = Factor1D {
        freq: 0.0,
        offset: 0.0,
        quarter: 1, // sin(pi/2) = 1
    };

    pub fn sin(freq: f64) -> Self {
        Self {
            freq,
            offset: 0.0,
            quarter: 0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let theta = self.freq * t + self.offset;
        match self.quarter & 3 {
            0 => theta.sin(),
            1 => theta.cos(),
            2 => -theta.sin(),
            _ => -theta.cos(),
        }
    }

    fn diff(&self) -> (f64, Factor1D) {
        (
            self.freq,
            Factor1D {
                freq: self.freq,
                offset: self.offset,
                quarter: (self.quarter + 1) & 3,
            },
        )
    }

    fn key(&self) -> (u64, u64, u8) {
        (self.freq.to_bits(), self.offset.to_bits(), self.quarter & 3)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Wave {
    pub amp: f64,
    pub factors: [Factor1D; 3],
}

impl Wave {
    pub fn eval(&self, p: &V3) -> f64 {
        self.amp
            * self.factors[0].eval(p.x)
            * self.factors[1].eval(p.y)
            * self.factors[2].eval(p.z)
    }
}

/// Scalar field as a merged sum of separable waves.
#[derive(Clone, Debug, Default)]
pub struct ScalarField(pub Vec<Wave>);

impl ScalarField {
    pub fn zero() -> Self {
        Self(Vec::new())
    }

    pub fn from_waves(waves: Vec<Wave>) -> Self {
        let mut s = Self(waves);
        s.normalize();
        s
    }

    pub fn eval(&self, p: &V3) -> f64 {
        self.0.iter().map(|w| w.eval(p)).sum()
    }

    pub fn d(&self, axis: usize) -> Self {
        let mut out = Vec::with_capacity(self.0.len());
        for w in &self.0 {
            let (scale, f) = w.factors[axis].diff();
            if scale == 0.0 {
                continue;
            }
            let mut factors = w.factors;
            factors[axis] = f;
            out.push(Wave {
                amp: w.amp * scale,
                factors,
            });
        }
        Self::from_waves(out)
    }

    pub fn add_scaled(&mut self, other: &ScalarField, s: f64) {
        for w in &other.0 {
            self.0.push(Wave {
                amp: w.amp * s,
                factors: w.factors,
            });
        }
        self.normalize();
    }

    fn normalize(&mut self) {
        use std::collections::BTreeMap;
        let mut map: BTreeMap<_, f64> = BTreeMap::new();
        for w in &self.0 {
            *map.entry((
                w.factors[0].key(),
                w.factors[1].key(),
                w.factors[2].key(),
            ))
            .or_insert(0.0) += w.amp;
        }
        let max = map.values().fold(0.0f64, |m, v| m.max(v.abs()));
        let thresh = 1e-13 * max;
        self.0 = map
            .into_iter()
            .filter(|(_, amp)| amp.abs() > thresh)
            .map(|((k0, k1, k2), amp)| Wave {
                amp,
                factors: [unkey(k0), unkey(k1), unkey(k2)],
            })
            .collect();
    }
}

fn unkey(k: (u64, u64, u8)) -> Factor1D {
    Factor1D {
        freq: f64::from_bits(k.0),
        offset: f64::from_bits(k.1),
        quarter: k.2,
    }
}

/// Product of three single-axis factor sums, e.g. `s(x) s(y) s(z)`.
pub fn separable_product(fx: &[(f64, Factor1D)], fy: &[(f64, Factor1D)], fz: &[(f64, Factor1D)]) -> ScalarField {
    let mut waves = Vec::new();
    for &(ax, x) in fx {
        for &(ay, y) in fy {
            for &(az, z) in fz {
                waves.push(Wave {
                    amp: ax * ay * az,
                    factors: [x, y, z],
                });
            }
        }
    }
    ScalarField::from_waves(waves)
}

#[derive(Clone, Debug)]
pub struct VectorField(pub [ScalarField; 3]);

impl VectorField {
    pub fn zero() -> Self {
        Self([ScalarField::zero(), ScalarField::zero(), ScalarField::zero()])
    }

    pub fn eval(&self, p: &V3) -> V3 {
        V3::new(self.0[0].eval(p), self.0[1].eval(p), self.0[2].eval(p))
    }

    pub fn curl(&self) -> VectorField {
        let mut c0 = self.0[2].d(1);
        c0.add_scaled(&self.0[1].d(2), -1.0);
        let mut c1 = self.0[0].d(2);
        c1.add_scaled(&self.0[2].d(0), -1.0);
        let mut c2 = self.0[1].d(0);
        c2.add_scaled(&self.0[0].d(1), -1.0);
        VectorField([c0, c1, c2])
    }

    pub fn div(&self) -> ScalarField {
        let mut d = self.0[0].d(0);
        d.add_scaled(&self.0[1].d(1), 1.0);
        d.add_scaled(&self.0[2].d(2), 1.0);
        d
    }

    /// Jacobian rows are gradients of the components.
    pub fn grad(&self) -> MatrixField {
        let row = |i: usize| [self.0[i].d(0), self.0[i].d(1), self.0[i].d(2)];
        MatrixField([row(0), row(1), row(2)])
    }

    pub fn laplacian(&self) -> VectorField {
        let lap = |s: &ScalarField| {
            let mut l = s.d(0).d(0);
            l.add_scaled(&s.d(1).d(1), 1.0);
            l.add_scaled(&s.d(2).d(2), 1.0);
            l
        };
        VectorField([lap(&self.0[0]), lap(&self.0[1]), lap(&self.0[2])])
    }

    pub fn scaled(&self, s: f64) -> VectorField {
        let mut out = Self::zero();
        for a in 0..3 {
            out.0[a].add_scaled(&self.0[a], s);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct MatrixField(pub [[ScalarField; 3]; 3]);

impl MatrixField {
    pub fn eval(&self, p: &V3) -> M3 {
        M3::from_fn(|i, j| self.0[i][j].eval(p))
    }

    pub fn dev(&self) -> MatrixField {
        let mut tr = self.0[0][0].clone();
        tr.add_scaled(&self.0[1][1], 1.0);
        tr.add_scaled(&self.0[2][2], 1.0);
        let mut out = self.clone();
        for i in 0..3 {
            out.0[i][i].add_scaled(&tr, -1.0 / 3.0);
        }
        out
    }

    pub fn row_div(&self) -> VectorField {
        let div = |i: usize| {
            let mut d = self.0[i][0].d(0);
            d.add_scaled(&self.0[i][1].d(1), 1.0);
            d.add_scaled(&self.0[i][2].d(2), 1.0);
            d
        };
        VectorField([div(0), div(1), div(2)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn fd(f: impl Fn(f64) -> f64, t: f64) -> f64 {
        let h = 1e-6;
        (f(t + h) - f(t - h)) / (2.0 * h)
    }

    #[test]
    fn factor_derivative() {
        let f = Factor1D::sin(3.0 * PI);
        let (s, g) = f.diff();
        for &t in &[0.1, 0.37, 0.9] {
            assert_relative_eq!(s * g.eval(t), fd(|t| f.eval(t), t), epsilon = 1e-7);
        }
    }

    #[test]
    fn curl_grad_consistency() {
        // curl(grad phi) = 0 for a wavy scalar.
        let s = ScalarField::from_waves(vec![Wave {
            amp: 1.3,
            factors: [Factor1D::sin(PI), Factor1D::sin(2.0 * PI), Factor1D::ONE],
        }]);
        let g = VectorField([s.d(0), s.d(1), s.d(2)]);
        let c = g.curl();
        let p = V3::new(0.21, 0.43, 0.65);
        assert!(c.eval(&p).norm() < 1e-12);
    }

    #[test]
    fn merging_cancels_trace() {
        let s = separable_product(
            &[(1.0, Factor1D::sin(PI))],
            &[(1.0, Factor1D::sin(PI))],
            &[(1.0, Factor1D::sin(PI))],
        );
        let v = VectorField([s.clone(), s.clone(), ScalarField::zero()]);
        let u = v.curl();
        // div(curl v) cancels to the empty sum exactly.
        assert!(u.div().0.is_empty());
    }
}
