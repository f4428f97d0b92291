use std::f64::consts::PI;

use crate::error::VerifyError;
use crate::fespace::{ExtraForcing, MaterialParams};
use crate::image::{ImagePair, Paraboloid};
use crate::quadrature::TensorRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Smooth,
    Singular,
}

/// Closed-form displacement with the synthetic paraboloid image pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub kind: CaseKind,
    /// Regularity index of the singular solution.
    pub beta: f64,
    /// Prefactor of the closed form.
    pub amplitude: f64,
    pub params: MaterialParams,
    pub template: Paraboloid,
    pub reference: Paraboloid,
}

/// Exact data at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactValues {
    pub u: [f64; 2],
    /// `grad[i][j] = d u_i / d x_j`.
    pub grad: [[f64; 2]; 2],
    /// `(u_i,xx, u_i,xy, u_i,yy)`.
    pub hess: [[f64; 3]; 2],
    pub sigma: [[f64; 2]; 2],
    /// `-div sigma`.
    pub f_ex: [f64; 2],
    /// `alpha (T(x + u) - R(x)) grad T(x + u)`.
    pub g_ex: [f64; 2],
}

impl ManufacturedCase {
    /// Smooth case with prefactor `1/50`, the scale at which the reference error tables were computed.
    pub fn smooth() -> Self {
        Self::with(CaseKind::Smooth, 0.5, 0.02)
    }

    pub fn singular() -> Self {
        Self::with(CaseKind::Singular, 0.0, 0.1)
    }

    fn with(kind: CaseKind, kappa: f64, amplitude: f64) -> Self {
        Self {
            kind,
            beta: 2.0 / 3.0,
            amplitude,
            params: MaterialParams::new(1.0, 0.25, kappa, 1.0, 1.0).expect("valid parameters"),
            template: Paraboloid::new([0.8, 0.8]),
            reference: Paraboloid::new([0.2, 0.2]),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CaseKind::Smooth => "smooth",
            CaseKind::Singular => "singular",
        }
    }

    pub fn pair(&self) -> ImagePair<'_> {
        ImagePair::new(&self.template, &self.reference)
    }

    pub fn singular_point(&self) -> Option<[f64; 2]> {
        (self.kind == CaseKind::Singular).then_some([0.0, 0.0])
    }

    /// Displacement, gradient and Hessian.
    pub fn derivatives(&self, x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], [[f64; 3]; 2]) {
        match self.kind {
            CaseKind::Smooth => smooth(self.amplitude, self.params.lambda, x),
            CaseKind::Singular => singular(self.amplitude, self.beta, x),
        }
    }

    /// All exact fields at `x` (non-finite derivatives at the singular point).
    pub fn eval(&self, x: [f64; 2]) -> ExactValues {
        let (u, grad, hess) = self.derivatives(x);
        let sigma = self.params.stress(grad);
        let d = self.params.div_stress(hess);
        let (f, _) = self.pair().forcing_and_mismatch(x, u);
        let a = self.params.alpha;
        ExactValues { u, grad, hess, sigma, f_ex: [-d[0], -d[1]], g_ex: [a * f[0], a * f[1]] }
    }

    pub fn try_eval(&self, x: [f64; 2]) -> Result<ExactValues, VerifyError> {
        match self.singular_point() {
            Some(p) if x == p => Err(VerifyError::SingularPoint(p)),
            _ => Ok(self.eval(x)),
        }
    }

    /// `int_Omega r_i . u_ex` for `r = (1,0), (0,1), (-y,x)` on the unit square.
    pub fn rigid_moments(&self) -> [f64; 3] {
        let rule = TensorRule::new(12);
        let mut acc = [0.0; 3];
        // dyadic refinement towards the singular corner
        let mut stack = vec![([0.0, 0.0], 1.0, 0u32)];
        while let Some((o, s, depth)) = stack.pop() {
            let at_origin = self.singular_point().is_some() && o == [0.0, 0.0];
            if at_origin && depth < 40 {
                let h = s / 2.0;
                for (dx, dy) in [(0.0, 0.0), (h, 0.0), (0.0, h), (h, h)] {
                    stack.push(([o[0] + dx, o[1] + dy], h, depth + 1));
                }
                continue;
            }
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let x = [o[0] + p[0] * s, o[1] + p[1] * s];
                let (u, _, _) = self.derivatives(x);
                let ws = w * s * s;
                acc[0] += ws * u[0];
                acc[1] += ws * u[1];
                acc[2] += ws * (-x[1] * u[0] + x[0] * u[1]);
            }
        }
        acc
    }

    /// Right-hand-side data making `u_ex` the exact solution.
    pub fn forcing(&self, order: usize) -> ManufacturedForcing {
        ManufacturedForcing { case: *self, order, rm: self.rigid_moments() }
    }
}

fn smooth(amp: f64, lambda: f64, [x, y]: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], [[f64; 3]; 2]) {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    let il = 1.0 / lambda;
    let a = -sx + il * cx;
    let da = PI * (-cx - il * sx);
    let dda = -PI * PI * a;
    let b = -cx + il * sx;
    let db = PI * (sx + il * cx);
    let ddb = -PI * PI * b;
    let (s, ds, dds) = (sy, PI * cy, -PI * PI * sy);
    let (c, dc, ddc) = (cy, -PI * sy, -PI * PI * cy);
    let u = [amp * (a * s + 4.0 / (PI * PI)), amp * b * c];
    let g = [[amp * da * s, amp * a * ds], [amp * db * c, amp * b * dc]];
    let h = [[amp * dda * s, amp * da * ds, amp * a * dds], [amp * ddb * c, amp * db * dc, amp * b * ddc]];
    (u, g, h)
}

/// `z^p` on the principal branch, as `(re, im)`.
fn cpow(x: f64, y: f64, p: f64) -> (f64, f64) {
    let r = x.hypot(y);
    let t = y.atan2(x);
    let m = r.powf(p);
    (m * (p * t).cos(), m * (p * t).sin())
}

/// `u_1 + i u_2 = amp z^beta`, differentiated through the Cauchy-Riemann equations.
fn singular(amp: f64, beta: f64, [x, y]: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2], [[f64; 3]; 2]) {
    let (f0r, f0i) = cpow(x, y, beta);
    let (p1r, p1i) = cpow(x, y, beta - 1.0);
    let (p2r, p2i) = cpow(x, y, beta - 2.0);
    let (f1r, f1i) = (amp * beta * p1r, amp * beta * p1i);
    let c2 = amp * beta * (beta - 1.0);
    let (f2r, f2i) = (c2 * p2r, c2 * p2i);
    let u = [amp * f0r, amp * f0i];
    let g = [[f1r, -f1i], [f1i, f1r]];
    let h = [[f2r, -f2i, -f2r], [f2i, f2r, -f2i]];
    (u, g, h)
}

/// Source `f_ex + g_ex`, Robin datum `sigma_ex n + kappa u_ex` and rigid-body moments.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedForcing {
    pub case: ManufacturedCase,
    pub order: usize,
    pub rm: [f64; 3],
}

impl ExtraForcing for ManufacturedForcing {
    fn volume(&self, x: [f64; 2]) -> [f64; 2] {
        let e = self.case.eval(x);
        [e.f_ex[0] + e.g_ex[0], e.f_ex[1] + e.g_ex[1]]
    }

    fn boundary(&self, x: [f64; 2], n: [f64; 2]) -> [f64; 2] {
        let (u, g, _) = self.case.derivatives(x);
        let s = self.case.params.stress(g);
        let k = self.case.params.kappa;
        [s[0][0] * n[0] + s[0][1] * n[1] + k * u[0], s[1][0] * n[0] + s[1][1] * n[1] + k * u[1]]
    }

    fn rm_target(&self) -> [f64; 3] {
        self.rm
    }

    fn singular_point(&self) -> Option<[f64; 2]> {
        self.case.singular_point()
    }

    fn quadrature_order(&self) -> usize {
        self.order
    }
}
