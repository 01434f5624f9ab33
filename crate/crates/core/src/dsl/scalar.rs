use super::DslError;

fn finite(x: f64, what: &str) -> Result<f64, DslError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(DslError::Domain(format!("{what} produced a non-finite value")))
    }
}

fn is_integer(p: f64) -> bool {
    p.fract() == 0.0 && p.abs() < i32::MAX as f64
}

fn real_pow(x: f64, p: f64) -> Result<f64, DslError> {
    if is_integer(p) {
        if x == 0.0 && p < 0.0 {
            return Err(DslError::Domain("zero raised to a negative power".into()));
        }
        return finite(x.powi(p as i32), "pow");
    }
    if x < 0.0 {
        return Err(DslError::Domain(format!("negative base {x} raised to non-integer power {p}")));
    }
    if x == 0.0 && p < 0.0 {
        return Err(DslError::Domain("zero raised to a negative power".into()));
    }
    finite(x.powf(p), "pow")
}

/// Number system the expression evaluator runs over.
///
/// Every operation that can leave the real domain returns an error instead
/// of producing NaN or an infinity.
pub trait Field: Clone + Sized {
    fn constant(c: f64, like: &[Self]) -> Self;
    fn value(&self) -> f64;
    fn neg(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Result<Self, DslError>;
    fn powf(&self, p: f64) -> Result<Self, DslError>;
    fn sqrt(&self) -> Result<Self, DslError>;
    fn abs(&self) -> Result<Self, DslError>;
    fn sgn(&self) -> Result<Self, DslError>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Result<Self, DslError>;
    fn atan(&self) -> Self;
    fn exp(&self) -> Result<Self, DslError>;
    fn ln(&self) -> Result<Self, DslError>;
    fn min(&self, o: &Self) -> Result<Self, DslError>;
    fn max(&self, o: &Self) -> Result<Self, DslError>;
}

impl Field for f64 {
    fn constant(c: f64, _: &[Self]) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn neg(&self) -> Self {
        -self
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Result<Self, DslError> {
        if *o == 0.0 {
            return Err(DslError::Domain("division by zero".into()));
        }
        finite(self / o, "division")
    }
    fn powf(&self, p: f64) -> Result<Self, DslError> {
        real_pow(*self, p)
    }
    fn sqrt(&self) -> Result<Self, DslError> {
        if *self < 0.0 {
            return Err(DslError::Domain(format!("sqrt of negative value {self}")));
        }
        Ok(f64::sqrt(*self))
    }
    fn abs(&self) -> Result<Self, DslError> {
        Ok(f64::abs(*self))
    }
    fn sgn(&self) -> Result<Self, DslError> {
        Ok(if *self > 0.0 {
            1.0
        } else if *self < 0.0 {
            -1.0
        } else {
            0.0
        })
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Result<Self, DslError> {
        finite(f64::tan(*self), "tan")
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn exp(&self) -> Result<Self, DslError> {
        finite(f64::exp(*self), "exp")
    }
    fn ln(&self) -> Result<Self, DslError> {
        if *self <= 0.0 {
            return Err(DslError::Domain(format!("log of non-positive value {self}")));
        }
        Ok(f64::ln(*self))
    }
    fn min(&self, o: &Self) -> Result<Self, DslError> {
        Ok(f64::min(*self, *o))
    }
    fn max(&self, o: &Self) -> Result<Self, DslError> {
        Ok(f64::max(*self, *o))
    }
}

/// Forward-mode dual number: a value plus one partial derivative per
/// coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Dual {
    pub fn new(value: f64, partials: Vec<f64>) -> Self {
        Dual { value, partials }
    }

    pub fn constant(value: f64, n: usize) -> Self {
        Dual { value, partials: vec![0.0; n] }
    }

    /// Seeds one variable per coordinate with a unit partial.
    pub fn variables(point: &[f64]) -> Vec<Dual> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let mut partials = vec![0.0; n];
                partials[i] = 1.0;
                Dual { value: v, partials }
            })
            .collect()
    }

    fn has_derivative(&self) -> bool {
        self.partials.iter().any(|&p| p != 0.0)
    }

    /// Applies the chain rule with outer derivative `d`.
    fn chain(&self, value: f64, d: f64) -> Result<Dual, DslError> {
        let partials: Vec<f64> = self.partials.iter().map(|p| if *p == 0.0 { 0.0 } else { d * p }).collect();
        if partials.iter().any(|p| !p.is_finite()) {
            return Err(DslError::Domain("derivative is not finite".into()));
        }
        Ok(Dual { value, partials })
    }

    fn kink(&self, what: &str) -> Result<(), DslError> {
        if self.has_derivative() {
            Err(DslError::NonDifferentiable(format!("{what} at 0")))
        } else {
            Ok(())
        }
    }

    fn zip(&self, o: &Dual, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.partials.iter().zip(&o.partials).map(|(a, b)| f(*a, *b)).collect()
    }
}

impl Field for Dual {
    fn constant(c: f64, like: &[Self]) -> Self {
        Dual::constant(c, like.first().map_or(0, |d| d.partials.len()))
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn neg(&self) -> Self {
        Dual { value: -self.value, partials: self.partials.iter().map(|p| -p).collect() }
    }
    fn add(&self, o: &Self) -> Self {
        Dual { value: self.value + o.value, partials: self.zip(o, |a, b| a + b) }
    }
    fn sub(&self, o: &Self) -> Self {
        Dual { value: self.value - o.value, partials: self.zip(o, |a, b| a - b) }
    }
    fn mul(&self, o: &Self) -> Self {
        let (u, v) = (self.value, o.value);
        Dual { value: u * v, partials: self.zip(o, |a, b| a * v + u * b) }
    }
    fn div(&self, o: &Self) -> Result<Self, DslError> {
        let value = Field::div(&self.value, &o.value)?;
        let v = o.value;
        let partials = self.zip(o, |a, b| (a - value * b) / v);
        Ok(Dual { value, partials })
    }
    fn powf(&self, p: f64) -> Result<Self, DslError> {
        let value = real_pow(self.value, p)?;
        if !self.has_derivative() || p == 0.0 {
            return Ok(Dual::constant(value, self.partials.len()));
        }
        if self.value == 0.0 && p < 1.0 {
            return Err(DslError::NonDifferentiable(format!("x^{p} at x = 0")));
        }
        let d = p * real_pow(self.value, p - 1.0)?;
        self.chain(value, d)
    }
    fn sqrt(&self) -> Result<Self, DslError> {
        let value = Field::sqrt(&self.value)?;
        if value == 0.0 {
            self.kink("sqrt")?;
            return Ok(Dual::constant(0.0, self.partials.len()));
        }
        self.chain(value, 0.5 / value)
    }
    fn abs(&self) -> Result<Self, DslError> {
        if self.value == 0.0 {
            self.kink("abs")?;
            return Ok(Dual::constant(0.0, self.partials.len()));
        }
        let s = self.value.signum();
        self.chain(self.value.abs(), s)
    }
    fn sgn(&self) -> Result<Self, DslError> {
        if self.value == 0.0 {
            self.kink("sgn")?;
        }
        Ok(Dual::constant(Field::sgn(&self.value)?, self.partials.len()))
    }
    fn sin(&self) -> Self {
        self.chain(self.value.sin(), self.value.cos()).expect("bounded derivative")
    }
    fn cos(&self) -> Self {
        self.chain(self.value.cos(), -self.value.sin()).expect("bounded derivative")
    }
    fn tan(&self) -> Result<Self, DslError> {
        let value = Field::tan(&self.value)?;
        self.chain(value, 1.0 + value * value)
    }
    fn atan(&self) -> Self {
        self.chain(self.value.atan(), 1.0 / (1.0 + self.value * self.value)).expect("bounded derivative")
    }
    fn exp(&self) -> Result<Self, DslError> {
        let value = Field::exp(&self.value)?;
        self.chain(value, value)
    }
    fn ln(&self) -> Result<Self, DslError> {
        let value = Field::ln(&self.value)?;
        self.chain(value, 1.0 / self.value)
    }
    fn min(&self, o: &Self) -> Result<Self, DslError> {
        if self.value == o.value && self.partials != o.partials {
            return Err(DslError::NonDifferentiable("min at a tie".into()));
        }
        Ok(if self.value <= o.value { self.clone() } else { o.clone() })
    }
    fn max(&self, o: &Self) -> Result<Self, DslError> {
        if self.value == o.value && self.partials != o.partials {
            return Err(DslError::NonDifferentiable("max at a tie".into()));
        }
        Ok(if self.value >= o.value { self.clone() } else { o.clone() })
    }
}
