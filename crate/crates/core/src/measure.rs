//! Exact-rational cakes: piecewise-constant utility densities over `[0,1]`,
//! interval measures, cut-point inversion, and dyadic grid quantization.
//!
//! Everything in this module is a [`BigRational`], so callers can assert
//! equality instead of tolerances. Floats never appear here; decimal
//! renderings for reports are produced by [`decimal_string`] and labeled
//! approximate by the callers.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Exact rational number used for all cake arithmetic.
pub type Rational = BigRational;

/// Validation and geometry errors for densities, intervals, and grids.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeasureError {
    /// Axiom 1 (positivity): every nonempty interval must have positive value.
    #[error("axiom 1 violated: segment {index} has a non-positive density value")]
    NonPositiveValue { index: usize },
    /// Axiom 3 (normalization): the density must integrate to exactly 1.
    #[error("axiom 3 violated: density integrates to {total}, expected 1")]
    IntegralNotOne { total: String },
    #[error("malformed segments: {0}")]
    Malformed(String),
    #[error("invalid interval: endpoints must satisfy 0 <= lo <= hi <= 1")]
    BadInterval,
    #[error("cut target {target} outside [0, {available}]")]
    TargetOutOfRange { target: String, available: String },
    #[error("cannot parse {0:?} as an exact rational (expected \"a\" or \"a/b\")")]
    BadRational(String),
    #[error("grid exponent must be in 1..=62")]
    BadGrid,
    #[error("grid index {index} exceeds {max}")]
    GridIndexOutOfRange { index: u64, max: u64 },
    #[error("point {0} lies outside [0,1]")]
    PointOutOfRange(String),
}

/// Shorthand rational constructor from machine integers.
pub fn rat(numer: i64, denom: i64) -> Rational {
    assert!(denom != 0, "zero denominator");
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses `"a/b"` or `"a"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, MeasureError> {
    let bad = || MeasureError::BadRational(s.to_string());
    let t = s.trim();
    let (numer, denom) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (t, "1"),
    };
    let numer: BigInt = numer.parse().map_err(|_| bad())?;
    let denom: BigInt = denom.parse().map_err(|_| bad())?;
    if denom.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(numer, denom))
}

/// Canonical string form: `"a/b"`, or `"a"` when the denominator is 1.
pub fn rational_string(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Truncated decimal rendering with `digits` fractional digits.
pub fn decimal_string(r: &Rational, digits: u32) -> String {
    let sign = if r.is_negative() { "-" } else { "" };
    let abs = r.abs();
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = (&abs * Rational::from_integer(scale.clone())).floor().to_integer();
    let int_part = &scaled / &scale;
    let frac_part = &scaled % &scale;
    if digits == 0 {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac:0>width$}", frac = frac_part, width = digits as usize)
    }
}

/// A subinterval of the unit cake.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, MeasureError> {
        if lo.is_negative() || lo > hi || hi > Rational::one() {
            return Err(MeasureError::BadInterval);
        }
        Ok(Interval { lo, hi })
    }

    /// The whole cake `[0,1]`.
    pub fn unit() -> Self {
        Interval { lo: Rational::zero(), hi: Rational::one() }
    }

    /// `[0,x]` for `x` in `[0,1]`.
    pub fn prefix(x: Rational) -> Result<Self, MeasureError> {
        Interval::new(Rational::zero(), x)
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn len(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }
}

/// One constant-value piece of a density: value on `(start, end]` where
/// `start` is the previous segment's end (0 for the first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub end: Rational,
    pub value: Rational,
}

/// A piecewise-constant utility density over `[0,1]`.
///
/// Invariants enforced at construction: strictly increasing right endpoints
/// with the last equal to 1, strictly positive values, and total integral
/// exactly 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Density {
    segments: Vec<Segment>,
}

/// Checks the density axioms on raw `(right_endpoint, value)` pairs.
pub fn validate_density(segments: &[(Rational, Rational)]) -> Result<(), MeasureError> {
    if segments.is_empty() {
        return Err(MeasureError::Malformed("no segments".into()));
    }
    let mut prev = Rational::zero();
    let mut total = Rational::zero();
    for (i, (end, value)) in segments.iter().enumerate() {
        if *end <= prev {
            return Err(MeasureError::Malformed(format!(
                "segment {i} endpoint {} is not strictly increasing",
                rational_string(end)
            )));
        }
        if *end > Rational::one() {
            return Err(MeasureError::Malformed(format!(
                "segment {i} endpoint {} exceeds 1",
                rational_string(end)
            )));
        }
        if !value.is_positive() {
            return Err(MeasureError::NonPositiveValue { index: i });
        }
        total += value * (end - &prev);
        prev = end.clone();
    }
    if prev != Rational::one() {
        return Err(MeasureError::Malformed(format!(
            "last endpoint is {}, expected 1",
            rational_string(&prev)
        )));
    }
    if total != Rational::one() {
        return Err(MeasureError::IntegralNotOne { total: rational_string(&total) });
    }
    Ok(())
}

impl Density {
    pub fn new(segments: Vec<(Rational, Rational)>) -> Result<Self, MeasureError> {
        validate_density(&segments)?;
        Ok(Density {
            segments: segments.into_iter().map(|(end, value)| Segment { end, value }).collect(),
        })
    }

    /// Value 1 everywhere.
    pub fn uniform() -> Self {
        Density { segments: vec![Segment { end: Rational::one(), value: Rational::one() }] }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Largest density value; bounds the utility of any length-`w` sliver by
    /// `max_value * w`.
    pub fn max_value(&self) -> Rational {
        self.segments.iter().map(|s| s.value.clone()).max().expect("nonempty")
    }

    /// Exact integral of the density over `iv`.
    pub fn measure(&self, iv: &Interval) -> Rational {
        let mut acc = Rational::zero();
        let mut start = Rational::zero();
        for seg in &self.segments {
            let lo = if iv.lo() > &start { iv.lo().clone() } else { start.clone() };
            let hi = if iv.hi() < &seg.end { iv.hi().clone() } else { seg.end.clone() };
            if hi > lo {
                acc += &seg.value * (hi - lo);
            }
            start = seg.end.clone();
        }
        acc
    }

    /// `measure([0,x])`.
    pub fn prefix_measure(&self, x: &Rational) -> Rational {
        self.measure(&Interval { lo: Rational::zero(), hi: x.clone() })
    }

    /// The unique `y` in `[a,b]` with `measure([y,b]) = target`.
    ///
    /// Uniqueness follows from strict positivity of the density.
    pub fn cut_point(&self, iv: &Interval, target: &Rational) -> Result<Rational, MeasureError> {
        let available = self.measure(iv);
        if target.is_negative() || *target > available {
            return Err(MeasureError::TargetOutOfRange {
                target: rational_string(target),
                available: rational_string(&available),
            });
        }
        if target.is_zero() {
            return Ok(iv.hi().clone());
        }
        // Accumulate mass from the right end of iv; solve linearly inside the
        // segment where the running total reaches the target.
        let mut starts = Vec::with_capacity(self.segments.len());
        let mut prev = Rational::zero();
        for seg in &self.segments {
            starts.push(prev.clone());
            prev = seg.end.clone();
        }
        let mut acc = Rational::zero();
        for (seg, start) in self.segments.iter().zip(starts.iter()).rev() {
            let lo = if iv.lo() > start { iv.lo().clone() } else { start.clone() };
            let hi = if iv.hi() < &seg.end { iv.hi().clone() } else { seg.end.clone() };
            if hi <= lo {
                continue;
            }
            let mass = &seg.value * (&hi - &lo);
            if &acc + &mass >= *target {
                return Ok(&hi - (target - &acc) / &seg.value);
            }
            acc += mass;
        }
        // Unreachable: target <= available was checked above.
        Err(MeasureError::TargetOutOfRange {
            target: rational_string(target),
            available: rational_string(&available),
        })
    }

    /// The unique `t` with `measure([0,t]) = mass`.
    pub fn prefix_cut(&self, mass: &Rational) -> Result<Rational, MeasureError> {
        let rest = Rational::one() - mass;
        self.cut_point(&Interval::unit(), &rest)
    }
}

/// Dyadic grid `{0, 1, ..., 2^m}` scaled by `2^-m` onto `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    m: u32,
}

impl Grid {
    pub fn new(m: u32) -> Result<Self, MeasureError> {
        if !(1..=62).contains(&m) {
            return Err(MeasureError::BadGrid);
        }
        Ok(Grid { m })
    }

    pub fn exponent(&self) -> u32 {
        self.m
    }

    /// Number of cells, `2^m`.
    pub fn levels(&self) -> u64 {
        1u64 << self.m
    }
}

/// `floor(x * 2^m)`; the dropped sliver `[j/2^m, x]` is shorter than `2^-m`.
pub fn quantize(x: &Rational, g: &Grid) -> Result<u64, MeasureError> {
    if x.is_negative() || *x > Rational::one() {
        return Err(MeasureError::PointOutOfRange(rational_string(x)));
    }
    let scaled = x * Rational::from_integer(BigInt::from(g.levels()));
    let j = scaled.floor().to_integer();
    Ok(j.to_u64().expect("fits: j <= 2^m <= 2^62"))
}

/// `j / 2^m` exactly.
pub fn dequantize(j: u64, g: &Grid) -> Result<Rational, MeasureError> {
    let max = g.levels();
    if j > max {
        return Err(MeasureError::GridIndexOutOfRange { index: j, max });
    }
    Ok(Rational::new(BigInt::from(j), BigInt::from(max)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    #[test]
    fn uniform_density_is_valid() {
        assert_eq!(Density::uniform().measure(&Interval::unit()), Rational::one());
    }

    #[test]
    fn worked_example_densities_are_valid() {
        fixtures::density_one();
        fixtures::density_two();
        fixtures::density_three();
    }

    #[test]
    fn zero_valued_segment_fails_axiom_one() {
        let err = Density::new(vec![(rat(1, 2), rat(0, 1)), (rat(1, 1), rat(2, 1))]).unwrap_err();
        assert_eq!(err, MeasureError::NonPositiveValue { index: 0 });
    }

    #[test]
    fn unnormalized_density_fails_axiom_three() {
        let err = Density::new(vec![(rat(1, 1), rat(9, 10))]).unwrap_err();
        assert!(matches!(err, MeasureError::IntegralNotOne { .. }));
    }

    #[test]
    fn malformed_segments_are_reported() {
        assert!(matches!(Density::new(vec![]), Err(MeasureError::Malformed(_))));
        let not_increasing =
            vec![(rat(1, 2), rat(1, 1)), (rat(1, 2), rat(1, 1)), (rat(1, 1), rat(1, 1))];
        assert!(matches!(Density::new(not_increasing), Err(MeasureError::Malformed(_))));
        let last_not_one = vec![(rat(1, 2), rat(2, 1))];
        assert!(matches!(Density::new(last_not_one), Err(MeasureError::Malformed(_))));
    }

    #[test]
    fn measures_of_worked_example() {
        let u1 = fixtures::density_one();
        let u3 = fixtures::density_three();
        let tail = Interval::new(rat(5, 6), rat(1, 1)).unwrap();
        assert_eq!(u1.measure(&tail), rat(1, 3));
        assert_eq!(u1.measure(&Interval::unit()), Rational::one());
        assert_eq!(u3.measure(&Interval::new(rat(0, 1), rat(1, 3)).unwrap()), rat(2, 3));
    }

    #[test]
    fn cut_points_of_worked_example() {
        let u2 = fixtures::density_two();
        let u3 = fixtures::density_three();
        assert_eq!(u2.cut_point(&Interval::unit(), &rat(1, 3)).unwrap(), rat(2, 3));
        let prefix = Interval::new(rat(0, 1), rat(5, 6)).unwrap();
        assert_eq!(u2.cut_point(&prefix, &rat(5, 12)).unwrap(), rat(5, 12));
        assert_eq!(u3.cut_point(&prefix, &rat(11, 24)).unwrap(), rat(11, 48));
    }

    #[test]
    fn cut_point_rejects_out_of_range_target() {
        let u = Density::uniform();
        let iv = Interval::new(rat(0, 1), rat(1, 2)).unwrap();
        assert!(u.cut_point(&iv, &rat(3, 4)).is_err());
        assert!(u.cut_point(&iv, &rat(-1, 4)).is_err());
        assert_eq!(u.cut_point(&iv, &rat(0, 1)).unwrap(), rat(1, 2));
    }

    #[test]
    fn quantize_examples() {
        let g = Grid::new(10).unwrap();
        assert_eq!(quantize(&rat(0, 1), &g).unwrap(), 0);
        assert_eq!(quantize(&rat(1, 1), &g).unwrap(), 1024);
        assert_eq!(quantize(&rat(5, 6), &g).unwrap(), 853);
        assert_eq!(dequantize(853, &g).unwrap(), rat(853, 1024));
        assert_eq!(dequantize(0, &g).unwrap(), rat(0, 1));
        assert_eq!(dequantize(1024, &g).unwrap(), rat(1, 1));
        assert!(dequantize(1025, &g).is_err());
        assert!(Grid::new(0).is_err());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal_string(&rat(5, 12), 6), "0.416666");
        assert_eq!(decimal_string(&rat(35, 24), 4), "1.4583");
        assert_eq!(decimal_string(&rat(3, 1), 0), "3");
    }

    #[test]
    fn parse_rational_accepts_exact_forms_only() {
        assert_eq!(parse_rational("5/6").unwrap(), rat(5, 6));
        assert_eq!(parse_rational(" 2 ").unwrap(), rat(2, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("0.5").is_err());
        assert!(parse_rational("x").is_err());
    }

    fn arb_rational(denom: i64) -> impl Strategy<Value = Rational> {
        (1..denom).prop_map(move |n| rat(n, denom))
    }

    prop_compose! {
        fn arb_density()(raw in proptest::collection::vec((1i64..400, 1i64..30), 1..5)) -> Density {
            let mut ends: Vec<Rational> = raw.iter().map(|(a, _)| rat(*a, 400)).collect();
            ends.sort();
            ends.dedup();
            *ends.last_mut().unwrap() = Rational::one();
            let values: Vec<Rational> = raw[..ends.len()].iter().map(|(_, v)| rat(*v, 1)).collect();
            let mut total = Rational::zero();
            let mut prev = Rational::zero();
            for (end, v) in ends.iter().zip(values.iter()) {
                total += v * (end - &prev);
                prev = end.clone();
            }
            let segs = ends.into_iter().zip(values).map(|(end, v)| (end, v / &total)).collect();
            Density::new(segs).expect("normalized density is valid")
        }
    }

    proptest! {
        #[test]
        fn additivity_over_random_split(d in arb_density(), split in arb_rational(97)) {
            let left = Interval::new(Rational::zero(), split.clone()).unwrap();
            let right = Interval::new(split, Rational::one()).unwrap();
            prop_assert_eq!(d.measure(&left) + d.measure(&right), Rational::one());
        }

        #[test]
        fn inversion_round_trip(d in arb_density(), t in arb_rational(89)) {
            let iv = Interval::unit();
            let y = d.cut_point(&iv, &t).unwrap();
            let tail = Interval::new(y, Rational::one()).unwrap();
            prop_assert_eq!(d.measure(&tail), t);
        }

        #[test]
        fn cut_point_strictly_decreasing_in_target(
            d in arb_density(),
            a in arb_rational(61),
            b in arb_rational(67),
        ) {
            prop_assume!(a != b);
            let (small, large) = if a < b { (a, b) } else { (b, a) };
            let iv = Interval::unit();
            let y_small = d.cut_point(&iv, &small).unwrap();
            let y_large = d.cut_point(&iv, &large).unwrap();
            prop_assert!(y_large < y_small);
        }

        #[test]
        fn quantization_error_is_below_one_cell(
            d in arb_density(),
            x in arb_rational(101),
            m in 1u32..16,
        ) {
            let g = Grid::new(m).unwrap();
            let j = quantize(&x, &g).unwrap();
            let back = dequantize(j, &g).unwrap();
            let err = &x - &back;
            prop_assert!(!err.is_negative());
            prop_assert!(err < Rational::new(BigInt::from(1), BigInt::from(g.levels())));
            // The sliver lost to flooring is worth at most Dmax * 2^-m.
            let sliver = d.measure(&Interval::new(back, x).unwrap());
            prop_assert!(sliver <= d.max_value() * Rational::new(BigInt::from(1), BigInt::from(g.levels())));
        }
    }
}
