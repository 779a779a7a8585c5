//! Scalar reverse-mode automatic differentiation with stop-gradient.
//!
//! A [`Tape`] records one scalar operation per node (value, up to two
//! parents, local partials). [`Var`] is a `Copy` handle holding a value and
//! an optional link into a tape; a `Var` without a link is a constant.
//! [`Var::detach`] returns a constant with the same value, which is the
//! stop-gradient operation: the result contributes zero adjoint to all of
//! its ancestors while leaving every forward value unchanged.
//!
//! Tapes are deliberately scalar-granular: rollouts here involve a handful
//! of bodies, and auditability of the contact gradients matters more than
//! vectorized throughput. Vectors are arrays of `Var` (see [`crate::math`]).
//!
//! A tape is confined to one thread. Independent rollouts use independent
//! tapes and may run in parallel.

use std::cell::RefCell;
use std::fmt;

use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    p1: u32,
    p2: u32,
    d1: f64,
    d2: f64,
}

/// Append-only record of scalar operations. Parents always precede
/// children, so the node list is already topologically ordered.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Checkpoint into a tape, produced by [`Tape::mark`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TapeMark(usize);

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Creates an input variable that will receive an adjoint in
    /// [`Var::backward`]. Rejects non-finite values.
    pub fn var(&self, value: f64) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(Error::NonFiniteInput(value));
        }
        Ok(Var { value, link: Some(Link { tape: self, node: self.push(NONE, NONE, 0.0, 0.0) }) })
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pushes a checkpoint. Rewinding to it discards every node recorded
    /// after the mark; variables created after the mark must not be used
    /// again (detach state you need to keep first).
    pub fn mark(&self) -> TapeMark {
        TapeMark(self.len())
    }

    /// Truncates the tape back to `mark`.
    pub fn rewind(&self, mark: TapeMark) {
        self.nodes.borrow_mut().truncate(mark.0);
    }

    fn push(&self, p1: u32, p2: u32, d1: f64, d2: f64) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let id = nodes.len();
        assert!(id < NONE as usize, "tape overflow");
        nodes.push(Node { p1, p2, d1, d2 });
        id as u32
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tape({} nodes)", self.len())
    }
}

#[derive(Clone, Copy)]
struct Link<'t> {
    tape: &'t Tape,
    node: u32,
}

/// A scalar that may participate in a reverse-mode tape.
///
/// `Var` is `Copy`; arithmetic works between any mix of taped variables
/// and constants (including plain `f64` on either side). Combining
/// variables from two different tapes is a programming error and panics.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    value: f64,
    link: Option<Link<'t>>,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.link {
            Some(l) => write!(f, "Var({} @ {})", self.value, l.node),
            None => write!(f, "Var({} const)", self.value),
        }
    }
}

impl<'t> Var<'t> {
    /// A constant: participates in arithmetic but records nothing.
    pub fn constant(value: f64) -> Self {
        Var { value, link: None }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn is_constant(self) -> bool {
        self.link.is_none()
    }

    /// Stop-gradient: same value, no tape link. The result is treated as a
    /// constant by [`Var::backward`], so no adjoint flows to ancestors.
    pub fn detach(self) -> Self {
        Var { value: self.value, link: None }
    }

    fn unary(self, value: f64, d: f64) -> Self {
        match self.link {
            None => Var::constant(value),
            Some(l) => {
                Var { value, link: Some(Link { tape: l.tape, node: l.tape.push(l.node, NONE, d, 0.0) }) }
            }
        }
    }

    fn binary(self, rhs: Self, value: f64, da: f64, db: f64) -> Self {
        match (self.link, rhs.link) {
            (None, None) => Var::constant(value),
            (Some(l), None) => {
                Var { value, link: Some(Link { tape: l.tape, node: l.tape.push(l.node, NONE, da, 0.0) }) }
            }
            (None, Some(l)) => {
                Var { value, link: Some(Link { tape: l.tape, node: l.tape.push(l.node, NONE, db, 0.0) }) }
            }
            (Some(a), Some(b)) => {
                assert!(
                    std::ptr::eq(a.tape, b.tape),
                    "operands live on different tapes"
                );
                let node = a.tape.push(a.node, b.node, da, db);
                Var { value, link: Some(Link { tape: a.tape, node }) }
            }
        }
    }

    pub fn sqrt(self) -> Self {
        let v = self.value.sqrt();
        self.unary(v, 0.5 / v)
    }

    /// Absolute value; the subgradient at zero is 0.
    pub fn abs(self) -> Self {
        let d = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(self.value.abs(), d)
    }

    /// Ties route the gradient to the first operand.
    pub fn min(self, rhs: Self) -> Self {
        if self.value <= rhs.value {
            self.binary(rhs, self.value, 1.0, 0.0)
        } else {
            self.binary(rhs, rhs.value, 0.0, 1.0)
        }
    }

    /// Ties route the gradient to the first operand.
    pub fn max(self, rhs: Self) -> Self {
        if self.value >= rhs.value {
            self.binary(rhs, self.value, 1.0, 0.0)
        } else {
            self.binary(rhs, rhs.value, 0.0, 1.0)
        }
    }

    pub fn powi(self, n: i32) -> Self {
        let v = self.value.powi(n);
        self.unary(v, f64::from(n) * self.value.powi(n - 1))
    }

    pub fn powf(self, e: f64) -> Self {
        let v = self.value.powf(e);
        self.unary(v, e * self.value.powf(e - 1.0))
    }

    pub fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }

    pub fn recip(self) -> Self {
        let v = 1.0 / self.value;
        self.unary(v, -v * v)
    }

    /// Runs the reverse pass seeded with adjoint 1 at `self`.
    ///
    /// The tape is left unchanged, so backward can be replayed; replays are
    /// bit-for-bit deterministic. A constant seed yields empty gradients.
    pub fn backward(self) -> Gradients {
        let Some(seed) = self.link else {
            return Gradients { adjoints: Vec::new() };
        };
        let nodes = seed.tape.nodes.borrow();
        let n = seed.node as usize;
        let mut adjoints = vec![0.0f64; n + 1];
        adjoints[n] = 1.0;
        for i in (0..=n).rev() {
            let a = adjoints[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            if node.p1 != NONE {
                adjoints[node.p1 as usize] += a * node.d1;
            }
            if node.p2 != NONE {
                adjoints[node.p2 as usize] += a * node.d2;
            }
        }
        Gradients { adjoints }
    }
}

/// Adjoints produced by one backward pass.
pub struct Gradients {
    adjoints: Vec<f64>,
}

impl Gradients {
    /// Adjoint of `v`, or 0 for constants and nodes the seed does not reach.
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        match v.link {
            None => 0.0,
            Some(l) => self.adjoints.get(l.node as usize).copied().unwrap_or(0.0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.adjoints.is_empty()
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> std::ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let b = rhs.value;
        self.binary(rhs, self.value / b, 1.0 / b, -self.value / (b * b))
    }
}

macro_rules! impl_f64_mix {
    ($($trait:ident :: $fn:ident),*) => {$(
        impl<'t> std::ops::$trait<f64> for Var<'t> {
            type Output = Var<'t>;
            fn $fn(self, rhs: f64) -> Var<'t> {
                std::ops::$trait::$fn(self, Var::constant(rhs))
            }
        }
        impl<'t> std::ops::$trait<Var<'t>> for f64 {
            type Output = Var<'t>;
            fn $fn(self, rhs: Var<'t>) -> Var<'t> {
                std::ops::$trait::$fn(Var::constant(self), rhs)
            }
        }
    )*};
}

impl_f64_mix!(Add::add, Sub::sub, Mul::mul, Div::div);

impl<'t> std::ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> std::ops::AddAssign for Var<'t> {
    fn add_assign(&mut self, rhs: Var<'t>) {
        *self = *self + rhs;
    }
}

impl<'t> std::ops::SubAssign for Var<'t> {
    fn sub_assign(&mut self, rhs: Var<'t>) {
        *self = *self - rhs;
    }
}

impl<'t> std::ops::MulAssign for Var<'t> {
    fn mul_assign(&mut self, rhs: Var<'t>) {
        *self = *self * rhs;
    }
}

/// The scalar abstraction the physics is written against.
///
/// `f64` implements it with `detach` as the identity, so the same rollout
/// code runs untaped (fast) or taped (differentiable). Branch conditions
/// always compare forward values (`val()`), never differentiate through
/// the branch itself.
pub trait Scalar:
    Copy
    + Clone
    + fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::Add<f64, Output = Self>
    + std::ops::Sub<f64, Output = Self>
    + std::ops::Mul<f64, Output = Self>
    + std::ops::Div<f64, Output = Self>
{
    fn constant(x: f64) -> Self;
    fn val(self) -> f64;
    /// Stop-gradient; identity for plain `f64`.
    fn detach(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn min(self, o: Self) -> Self;
    fn max(self, o: Self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn one() -> Self {
        Self::constant(1.0)
    }
    fn is_finite(self) -> bool {
        self.val().is_finite()
    }
    /// Value-level branch select.
    fn select(cond: bool, a: Self, b: Self) -> Self {
        if cond {
            a
        } else {
            b
        }
    }
    fn clamp(self, lo: f64, hi: f64) -> Self {
        self.max(Self::constant(lo)).min(Self::constant(hi))
    }
    /// Applies stop-gradient only when `flag` is set.
    fn detach_if(self, flag: bool) -> Self {
        if flag {
            self.detach()
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn constant(x: f64) -> Self {
        x
    }
    fn val(self) -> f64 {
        self
    }
    fn detach(self) -> Self {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn min(self, o: Self) -> Self {
        if self <= o {
            self
        } else {
            o
        }
    }
    fn max(self, o: Self) -> Self {
        if self >= o {
            self
        } else {
            o
        }
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
}

impl<'t> Scalar for Var<'t> {
    fn constant(x: f64) -> Self {
        Var::constant(x)
    }
    fn val(self) -> f64 {
        self.value()
    }
    fn detach(self) -> Self {
        Var::detach(self)
    }
    fn sqrt(self) -> Self {
        Var::sqrt(self)
    }
    fn abs(self) -> Self {
        Var::abs(self)
    }
    fn min(self, o: Self) -> Self {
        Var::min(self, o)
    }
    fn max(self, o: Self) -> Self {
        Var::max(self, o)
    }
    fn powi(self, n: i32) -> Self {
        Var::powi(self, n)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad1(f: impl for<'t> Fn(Var<'t>) -> Var<'t>, x: f64) -> (f64, f64) {
        let tape = Tape::new();
        let v = tape.var(x).unwrap();
        let y = f(v);
        let g = y.backward();
        (y.value(), g.wrt(v))
    }

    /// Central finite difference with a step scaled to the magnitude of x.
    fn finite_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6 * x.abs().max(1.0);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.var(3.0).unwrap();
        let y = tape.var(4.0).unwrap();
        let g = (x * y).backward();
        assert_eq!(g.wrt(x), 4.0);
        assert_eq!(g.wrt(y), 3.0);
    }

    #[test]
    fn abs_subgradient() {
        let (v, g) = grad1(|x| x.abs(), -2.0);
        assert_eq!(v, 2.0);
        assert_eq!(g, -1.0);
        let (_, g0) = grad1(|x| x.abs(), 0.0);
        assert_eq!(g0, 0.0);
    }

    #[test]
    fn square_of_sum_matches_finite_differences() {
        let tape = Tape::new();
        let x = tape.var(1.0).unwrap();
        let y = tape.var(2.0).unwrap();
        let f = (x + y) * (x + y);
        let g = f.backward();
        let fd = finite_diff(|x| (x + 2.0) * (x + 2.0), 1.0);
        assert!((g.wrt(x) - 6.0).abs() < 1e-12);
        assert!((g.wrt(y) - 6.0).abs() < 1e-12);
        assert!((g.wrt(x) - fd).abs() < 1e-4 * fd.abs());
    }

    #[test]
    fn lift_rejects_non_finite() {
        let tape = Tape::new();
        assert!(tape.var(f64::NAN).is_err());
        assert!(tape.var(f64::INFINITY).is_err());
        assert!(tape.var(0.5).is_ok());
    }

    #[test]
    fn constant_records_nothing() {
        let tape = Tape::new();
        let x = tape.var(2.0).unwrap();
        let before = tape.len();
        let c = Var::constant(1.0);
        assert_eq!(tape.len(), before);
        let y = x + c;
        assert_eq!(y.value(), 3.0);
    }

    #[test]
    fn detach_times_self() {
        // f = sg(x) * x at x = 3: value 9, gradient 3 (sg branch is constant).
        let (v, g) = grad1(|x| x.detach() * x, 3.0);
        assert_eq!(v, 9.0);
        assert_eq!(g, 3.0);
    }

    #[test]
    fn x_minus_detach_x() {
        // f = x - sg(x) at x = 7: value 0, gradient 1.
        let (v, g) = grad1(|x| x - x.detach(), 7.0);
        assert_eq!(v, 0.0);
        assert_eq!(g, 1.0);
    }

    #[test]
    fn detach_truncates_fully() {
        let (v, g) = grad1(|x| (x * x).detach(), 5.0);
        assert_eq!(v, 25.0);
        assert_eq!(g, 0.0);
    }

    #[test]
    fn detach_pattern_for_static_friction() {
        // x + (-p + sg(p)) has the value of x and full gradient through -p.
        let tape = Tape::new();
        let x = tape.var(2.0).unwrap();
        let p = tape.var(0.7).unwrap();
        let f = x + (-p + p.detach());
        assert_eq!(f.value(), 2.0);
        let g = f.backward();
        assert_eq!(g.wrt(x), 1.0);
        assert_eq!(g.wrt(p), -1.0);
    }

    #[test]
    fn backward_on_constant_is_empty() {
        let c = Var::constant(4.0);
        let g = (c * c).backward();
        assert!(g.is_empty());
        assert_eq!(g.wrt(c), 0.0);
    }

    #[test]
    fn backward_is_replayable_and_deterministic() {
        let tape = Tape::new();
        let x = tape.var(0.3).unwrap();
        let y = tape.var(-1.7).unwrap();
        let f = (x * y + y.sin() / (x + 2.0)).powi(3) - x.max(y) * y.abs();
        let g1 = f.backward();
        let g2 = f.backward();
        assert_eq!(g1.wrt(x).to_bits(), g2.wrt(x).to_bits());
        assert_eq!(g1.wrt(y).to_bits(), g2.wrt(y).to_bits());
    }

    #[test]
    fn free_fall_gradient_matches_closed_form() {
        // Semi-implicit Euler: x_T = -g dt^2 T(T+1)/2, so dx_T/dg = -dt^2 T(T+1)/2.
        let tape = Tape::new();
        let g = tape.var(9.81).unwrap();
        let dt = 0.01;
        let steps = 1000u32;
        let mut v = Var::constant(0.0);
        let mut x = Var::constant(0.0);
        for _ in 0..steps {
            v = v - g * dt;
            x = x + v * dt;
        }
        let grads = x.backward();
        let t = f64::from(steps);
        let expected = -dt * dt * t * (t + 1.0) / 2.0;
        assert!((grads.wrt(g) - expected).abs() < 1e-9 * expected.abs());
        assert!((x.value() - 9.81 * expected).abs() < 1e-9);
    }

    #[test]
    fn min_max_tie_break_toward_first() {
        let tape = Tape::new();
        let a = tape.var(1.0).unwrap();
        let b = tape.var(1.0).unwrap();
        let g = a.min(b).backward();
        assert_eq!(g.wrt(a), 1.0);
        assert_eq!(g.wrt(b), 0.0);
        let g = a.max(b).backward();
        assert_eq!(g.wrt(a), 1.0);
        assert_eq!(g.wrt(b), 0.0);
    }

    #[test]
    fn mark_and_rewind_truncate() {
        let tape = Tape::new();
        let x = tape.var(2.0).unwrap();
        let mark = tape.mark();
        let y = x * x + x.sin();
        assert!(tape.len() > 1);
        let kept = y.value();
        tape.rewind(mark);
        assert_eq!(tape.len(), 1);
        // x is still usable; values computed before the rewind survive as data.
        let z = x + 1.0;
        assert_eq!(z.value(), 3.0);
        assert!(kept.is_finite());
    }

    #[test]
    #[should_panic(expected = "different tapes")]
    fn cross_tape_ops_panic() {
        let t1 = Tape::new();
        let t2 = Tape::new();
        let a = t1.var(1.0).unwrap();
        let b = t2.var(2.0).unwrap();
        let _ = a + b;
    }

    #[test]
    fn f64_scalar_detach_is_identity() {
        let x: f64 = 3.25;
        assert_eq!(Scalar::detach(x), x);
        assert_eq!(Scalar::min(2.0_f64, 3.0), 2.0);
        assert_eq!(Scalar::max(2.0_f64, 3.0), 3.0);
    }
}
