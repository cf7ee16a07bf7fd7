//! Bernstein-Bezier representation of the free boundary Γ.
//!
//! Γ is the image of s ∈ [0, 1] under x(s) = Σ_k B_{k,m}(s) p_k. The first and
//! last control points are the endpoints of Γ on the symmetry axis, and the
//! two neighbouring control points also sit on the axis so that Γ leaves it
//! tangentially.

use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Binomial coefficient as an exact integer converted to f64.
pub fn binomial(m: usize, k: usize) -> f64 {
    if k > m {
        return 0.0;
    }
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c * (m as u128 - k as u128 + i) / i;
    }
    c as f64
}

fn check_args(k: usize, m: usize, s: f64) -> Result<()> {
    if k > m {
        return Err(Error::InvalidArgument(format!("basis index {k} exceeds degree {m}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("parameter s = {s} outside [0, 1]")));
    }
    Ok(())
}

fn bern_unchecked(k: usize, m: usize, s: f64) -> f64 {
    binomial(m, k) * s.powi(k as i32) * (1.0 - s).powi((m - k) as i32)
}

fn bern_d1_unchecked(k: usize, m: usize, s: f64) -> f64 {
    let t = 1.0 - s;
    let mut v = 0.0;
    if k >= 1 {
        v += k as f64 * s.powi(k as i32 - 1) * t.powi((m - k) as i32);
    }
    if k < m {
        v -= (m - k) as f64 * s.powi(k as i32) * t.powi((m - k) as i32 - 1);
    }
    binomial(m, k) * v
}

fn bern_d2_unchecked(k: usize, m: usize, s: f64) -> f64 {
    let t = 1.0 - s;
    let (kf, rf) = (k as f64, (m - k) as f64);
    let mut v = 0.0;
    if k >= 2 {
        v += kf * (kf - 1.0) * s.powi(k as i32 - 2) * t.powi((m - k) as i32);
    }
    if k >= 1 && k < m {
        v -= 2.0 * kf * rf * s.powi(k as i32 - 1) * t.powi((m - k) as i32 - 1);
    }
    if k + 2 <= m {
        v += rf * (rf - 1.0) * s.powi(k as i32) * t.powi((m - k) as i32 - 2);
    }
    binomial(m, k) * v
}

/// B_{k,m}(s) = C(m,k) s^k (1-s)^(m-k).
pub fn bernstein(k: usize, m: usize, s: f64) -> Result<f64> {
    check_args(k, m, s)?;
    Ok(bern_unchecked(k, m, s))
}

/// First derivative of B_{k,m}, with the boundary indices handled explicitly.
pub fn bernstein_d1(k: usize, m: usize, s: f64) -> Result<f64> {
    check_args(k, m, s)?;
    Ok(bern_d1_unchecked(k, m, s))
}

/// Second derivative of B_{k,m}.
pub fn bernstein_d2(k: usize, m: usize, s: f64) -> Result<f64> {
    check_args(k, m, s)?;
    Ok(bern_d2_unchecked(k, m, s))
}

/// All m+1 basis values at s.
pub fn bernstein_all(m: usize, s: f64) -> Vec<f64> {
    (0..=m).map(|k| bern_unchecked(k, m, s)).collect()
}

/// Control polygon p_0..p_m of the free boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolygon {
    points: Vec<Vec2>,
}

impl ControlPolygon {
    /// Validates the axis constraints: every abscissa is nonnegative and the
    /// four control points at the two ends lie on {x1 = 0}.
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        let n = points.len();
        if n < 4 {
            return Err(Error::InvalidArgument(format!(
                "control polygon needs degree >= 3, got {} points",
                n
            )));
        }
        for (k, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(Error::InvalidArgument(format!("control point {k} is not finite")));
            }
            if p.x < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "control point {k} has negative abscissa {}",
                    p.x
                )));
            }
        }
        for k in [0, 1, n - 2, n - 1] {
            if points[k].x != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "control point {k} must lie on the axis, abscissa is {}",
                    points[k].x
                )));
            }
        }
        Ok(ControlPolygon { points })
    }

    /// Half of a superellipse |x1/r1|^e + |(x2-c)/r2|^e = 1 with endpoints pulled
    /// in to c ± tip along the axis. Interior control points p_1..p_{m-1} are
    /// spread evenly in angle from the bottom of the curve to the top, so p_1
    /// and p_{m-1} land on the axis at c ∓ r2.
    pub fn half_superellipse(
        m: usize,
        center: f64,
        r1: f64,
        r2: f64,
        exponent: f64,
        tip: f64,
    ) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidArgument(format!("degree {m} < 3")));
        }
        if !(r1 > 0.0 && r2 > 0.0 && exponent > 0.0) {
            return Err(Error::InvalidArgument("radii and exponent must be positive".into()));
        }
        if !(tip > 0.0 && tip < r2) {
            return Err(Error::InvalidArgument(format!(
                "tip offset {tip} must lie strictly inside (0, {r2})"
            )));
        }
        let mut points = Vec::with_capacity(m + 1);
        points.push(Vec2::new(0.0, center - tip));
        for k in 1..m {
            let theta = -std::f64::consts::FRAC_PI_2
                + std::f64::consts::PI * (k - 1) as f64 / (m - 2) as f64;
            let (s, c) = theta.sin_cos();
            let x = if k == 1 || k == m - 1 {
                0.0
            } else {
                r1 * c.abs().powf(2.0 / exponent)
            };
            let y = center + r2 * s.signum() * s.abs().powf(2.0 / exponent);
            points.push(Vec2::new(x, y));
        }
        points.push(Vec2::new(0.0, center + tip));
        ControlPolygon::new(points)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn degree(&self) -> usize {
        self.points.len() - 1
    }

    pub fn lower_tip(&self) -> Vec2 {
        self.points[0]
    }

    pub fn upper_tip(&self) -> Vec2 {
        self.points[self.degree()]
    }

    /// Mirror image across the horizontal line x2 = c with the index order reversed.
    pub fn reflected(&self, c: f64) -> ControlPolygon {
        let points = self.points.iter().rev().map(|p| Vec2::new(p.x, 2.0 * c - p.y)).collect();
        ControlPolygon { points }
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, factor: f64) -> ControlPolygon {
        ControlPolygon { points: self.points.iter().map(|&p| p * factor).collect() }
    }

    pub fn eval(&self, s: f64) -> Result<Vec2> {
        check_args(0, self.degree(), s)?;
        let m = self.degree();
        Ok(self
            .points
            .iter()
            .enumerate()
            .fold(Vec2::ZERO, |acc, (k, &p)| acc + p * bern_unchecked(k, m, s)))
    }

    pub fn jet(&self, s: f64) -> Result<CurveJet> {
        check_args(0, self.degree(), s)?;
        let m = self.degree();
        let (mut x, mut dx, mut ddx) = (Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
        for (k, &p) in self.points.iter().enumerate() {
            x += p * bern_unchecked(k, m, s);
            dx += p * bern_d1_unchecked(k, m, s);
            ddx += p * bern_d2_unchecked(k, m, s);
        }
        let speed = dx.norm();
        let scale = self.points.iter().fold(1.0f64, |a, p| a.max(p.norm()));
        if !(speed > 1e-12 * scale) {
            return Err(Error::DegenerateParameterization { s, speed });
        }
        let tangent = dx * (1.0 / speed);
        Ok(CurveJet {
            s,
            x,
            dx,
            ddx,
            tangent,
            normal: tangent.rot_cw(),
            curvature: dx.cross(ddx) / (speed * speed * speed),
            speed,
        })
    }

    /// Jets at s_i = i/(n-1) together with trapezoidal weights for ∫ f |x'| ds.
    pub fn sample(&self, n: usize) -> Result<CurveSampling> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
        }
        let ds = 1.0 / (n - 1) as f64;
        let m = self.degree();
        let mut jets = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        let mut basis = Vec::with_capacity(n);
        for i in 0..n {
            let s = if i == n - 1 { 1.0 } else { i as f64 * ds };
            let jet = self.jet(s)?;
            let end = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            weights.push(end * ds * jet.speed);
            basis.push(bernstein_all(m, s));
            jets.push(jet);
        }
        Ok(CurveSampling { jets, weights, basis })
    }

    /// Same curve, one degree higher.
    pub fn elevate(&self) -> ControlPolygon {
        let m = self.degree();
        let mf = (m + 1) as f64;
        let mut q = Vec::with_capacity(m + 2);
        q.push(self.points[0]);
        for k in 1..=m {
            let a = k as f64 / mf;
            q.push(self.points[k - 1] * a + self.points[k] * (1.0 - a));
        }
        q.push(self.points[m]);
        ControlPolygon { points: q }
    }
}

/// Position and differential quantities of Γ at one parameter value.
///
/// `normal` is the clockwise rotation of the tangent, which is outward when Γ
/// is traversed with the domain on its left. `curvature` is
/// (x' × x'')/|x'|^3, positive where Γ bends towards the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveJet {
    pub s: f64,
    pub x: Vec2,
    pub dx: Vec2,
    pub ddx: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
    pub curvature: f64,
    pub speed: f64,
}

/// Γ sampled on a uniform parameter grid.
#[derive(Debug, Clone)]
pub struct CurveSampling {
    pub jets: Vec<CurveJet>,
    /// Trapezoidal weights including the speed factor.
    pub weights: Vec<f64>,
    /// basis[i][k] = B_{k,m}(s_i).
    pub basis: Vec<Vec<f64>>,
}

impl CurveSampling {
    pub fn len(&self) -> usize {
        self.jets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jets.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec2> + '_ {
        self.jets.iter().map(|j| j.x)
    }

    /// Trapezoidal approximation of the length of Γ.
    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn de_casteljau(p: &[Vec2], s: f64) -> Vec2 {
        let mut w = p.to_vec();
        let n = w.len();
        for r in 1..n {
            for i in 0..n - r {
                w[i] = w[i] * (1.0 - s) + w[i + 1] * s;
            }
        }
        w[0]
    }

    fn hodograph(p: &[Vec2]) -> Vec<Vec2> {
        let m = (p.len() - 1) as f64;
        p.windows(2).map(|w| (w[1] - w[0]) * m).collect()
    }

    fn reference_polygon() -> ControlPolygon {
        ControlPolygon::half_superellipse(40, 0.5, 0.3, 0.3, 2.0, 0.233).unwrap()
    }

    #[test]
    fn binomials_match_pascal() {
        let mut row = vec![1.0f64];
        for m in 1..=50usize {
            let mut next = vec![1.0; m + 1];
            for k in 1..m {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
            for k in 0..=m {
                assert_eq!(binomial(m, k), row[k], "C({m},{k})");
            }
        }
    }

    #[test]
    fn endpoint_values() {
        for m in 1..12 {
            for k in 0..=m {
                let at0 = if k == 0 { 1.0 } else { 0.0 };
                let at1 = if k == m { 1.0 } else { 0.0 };
                assert_eq!(bernstein(k, m, 0.0).unwrap(), at0);
                assert_eq!(bernstein(k, m, 1.0).unwrap(), at1);
            }
        }
    }

    #[test]
    fn endpoint_derivatives() {
        let m = 7;
        assert_eq!(bernstein_d1(0, m, 0.0).unwrap(), -7.0);
        assert_eq!(bernstein_d1(1, m, 0.0).unwrap(), 7.0);
        assert_eq!(bernstein_d1(m, m, 1.0).unwrap(), 7.0);
        assert_eq!(bernstein_d1(m - 1, m, 1.0).unwrap(), -7.0);
        assert_eq!(bernstein_d2(0, m, 0.0).unwrap(), 42.0);
        assert_eq!(bernstein_d2(1, m, 0.0).unwrap(), -84.0);
        assert_eq!(bernstein_d2(2, m, 0.0).unwrap(), 42.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(bernstein(4, 3, 0.5).is_err());
        assert!(bernstein(1, 3, -0.1).is_err());
        assert!(bernstein_d1(1, 3, 1.5).is_err());
        assert!(bernstein_d2(1, 3, f64::NAN).is_err());
    }

    #[test]
    fn second_derivative_matches_lower_degree_identity() {
        let m = 9;
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            for k in 0..=m {
                let lower = |j: isize| {
                    if j < 0 || j as usize > m - 2 {
                        0.0
                    } else {
                        bern_unchecked(j as usize, m - 2, s)
                    }
                };
                let k = k as isize;
                let want = (m * (m - 1)) as f64 * (lower(k - 2) - 2.0 * lower(k - 1) + lower(k));
                let got = bernstein_d2(k as usize, m, s).unwrap();
                assert!((got - want).abs() <= 1e-11 * (1.0 + want.abs()), "k={k} s={s}");
            }
        }
    }

    #[test]
    fn initial_polygon_is_valid_and_tangent_to_axis() {
        let cp = reference_polygon();
        assert_eq!(cp.degree(), 40);
        assert_eq!(cp.lower_tip(), Vec2::new(0.0, 0.5 - 0.233));
        assert_eq!(cp.upper_tip(), Vec2::new(0.0, 0.5 + 0.233));
        assert!((cp.points()[1].y - 0.2).abs() < 1e-15);
        assert!((cp.points()[39].y - 0.8).abs() < 1e-15);
        let j0 = cp.jet(0.0).unwrap();
        assert!(j0.tangent.x.abs() < 1e-14 && j0.tangent.y < 0.0);
        // outward normal at the lower tip points into {x1 < 0}
        assert!((j0.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn validation_of_axis_constraints() {
        let mut pts = reference_polygon().points().to_vec();
        pts[1].x = 1e-3;
        assert!(ControlPolygon::new(pts.clone()).is_err());
        pts[1].x = 0.0;
        pts[5].x = -1e-9;
        assert!(ControlPolygon::new(pts).is_err());
        assert!(ControlPolygon::new(vec![Vec2::ZERO; 3]).is_err());
    }

    #[test]
    fn degenerate_speed_is_reported() {
        let pts = vec![Vec2::new(0.0, 0.0); 5];
        let cp = ControlPolygon::new(pts).unwrap();
        match cp.jet(0.3) {
            Err(Error::DegenerateParameterization { .. }) => {}
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn curvature_matches_cross_product_oracle() {
        let cp = reference_polygon();
        let d1 = hodograph(cp.points());
        let d2 = hodograph(&d1);
        for i in 0..=50 {
            let s = i as f64 / 50.0;
            let jet = cp.jet(s).unwrap();
            let a = de_casteljau(&d1, s);
            let b = de_casteljau(&d2, s);
            let oracle = a.cross(b) / a.norm().powi(3);
            assert!(
                (jet.curvature - oracle).abs() <= 1e-8 * oracle.abs().max(1.0),
                "s={s}: {} vs {oracle}",
                jet.curvature
            );
        }
    }

    #[test]
    fn mid_curve_frame_of_half_circle() {
        let cp = reference_polygon();
        let jet = cp.jet(0.5).unwrap();
        assert!(jet.curvature > 0.0);
        assert!(jet.normal.x > 0.99);
    }

    #[test]
    fn arc_length_matches_adaptive_quadrature() {
        let cp = reference_polygon();
        let d1 = hodograph(cp.points());
        let speed = |s: f64| de_casteljau(&d1, s).norm();
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)
                    + simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
            }
        }
        let exact = simpson(&speed, 0.0, 1.0, speed(0.0), speed(0.5), speed(1.0), 1e-13, 40);
        let coarse = (cp.sample(400).unwrap().length() - exact).abs();
        let fine = (cp.sample(1597).unwrap().length() - exact).abs();
        assert!(coarse / exact < 1e-3, "relative error {}", coarse / exact);
        // trapezoidal rule: second order in the sample spacing
        assert!(coarse / fine > 12.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn elevation_preserves_the_curve() {
        let cp = reference_polygon();
        let up = cp.elevate();
        assert_eq!(up.degree(), 41);
        for i in 0..=30 {
            let s = i as f64 / 30.0;
            assert!((cp.eval(s).unwrap() - up.eval(s).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn reflection_maps_curve_onto_itself_for_symmetric_polygon() {
        let cp = reference_polygon();
        let r = cp.reflected(0.5);
        for (a, b) in cp.points().iter().zip(r.points()) {
            assert!((*a - *b).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(m in 1usize..45, s in 0.0f64..=1.0) {
            let sum: f64 = (0..=m).map(|k| bernstein(k, m, s).unwrap()).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn derivatives_sum_to_zero(m in 2usize..45, s in 0.0f64..=1.0) {
            let d1: f64 = (0..=m).map(|k| bernstein_d1(k, m, s).unwrap()).sum();
            let d2: f64 = (0..=m).map(|k| bernstein_d2(k, m, s).unwrap()).sum();
            let scale = (m * m) as f64;
            prop_assert!(d1.abs() <= 1e-12 * scale, "d1 sum {}", d1);
            prop_assert!(d2.abs() <= 1e-12 * scale * scale, "d2 sum {}", d2);
        }

        #[test]
        fn nonnegative_on_unit_interval(m in 1usize..45, k in 0usize..45, s in 0.0f64..=1.0) {
            prop_assume!(k <= m);
            prop_assert!(bernstein(k, m, s).unwrap() >= 0.0);
        }

        #[test]
        fn evaluation_matches_de_casteljau(
            ys in proptest::collection::vec(-1.0f64..1.0, 6..20),
            s in 0.0f64..=1.0,
        ) {
            let n = ys.len();
            let pts: Vec<Vec2> = ys.iter().enumerate().map(|(k, &y)| {
                let x = if k < 2 || k + 2 >= n { 0.0 } else { (y * 7.0).sin().abs() };
                Vec2::new(x, y)
            }).collect();
            let cp = ControlPolygon::new(pts.clone()).unwrap();
            let a = cp.eval(s).unwrap();
            let b = de_casteljau(&pts, s);
            prop_assert!((a - b).norm() < 1e-12);
        }

        #[test]
        fn unit_frame(s in 0.0f64..=1.0) {
            let jet = reference_polygon().jet(s).unwrap();
            prop_assert!((jet.tangent.norm() - 1.0).abs() < 1e-14);
            prop_assert!(jet.tangent.dot(jet.normal).abs() < 1e-14);
        }
    }
}
