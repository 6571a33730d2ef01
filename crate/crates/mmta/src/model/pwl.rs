//! Convex objective terms and their piecewise-linear representations.
//!
//! A convex term `f` enters the program through an epigraph variable
//! `v >= f(x)`. Two representations are offered:
//!
//! * chord interpolation on `K` uniform segments of `[lower, upper]`, whose
//!   value overestimates `f` by at most the largest chord gap, and
//! * supporting cuts (tangents, or pieces of the lattice interpolant for
//!   integer arguments) that underestimate `f` and are refined on demand
//!   until the epigraph is tight at the solution.

use serde::Serialize;

use crate::costs::{bpr_integral, bpr_time};

/// The convex shapes used by the traffic model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Integral of the volume-delay function from 0 to `x`.
    BprIntegral {
        t0: f64,
        delay: f64,
        capacity: f64,
        beta: f64,
    },
    /// Discrete counterpart of [`Shape::BprIntegral`]: the sum of travel
    /// times `t(origin + 1) + ... + t(x)` over the unit lattice above
    /// `origin`. One more unit of flow raises it by exactly the travel time
    /// that unit experiences.
    BprSum {
        t0: f64,
        delay: f64,
        capacity: f64,
        beta: f64,
        origin: f64,
    },
    /// Total travel time `x * t(x)` of a link.
    BprTotal {
        t0: f64,
        delay: f64,
        capacity: f64,
        beta: f64,
    },
    /// `x^2`.
    Square,
}

/// `scale * shape(x)`, optionally restricted to the unit lattice
/// `origin + k` and interpolated linearly in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexFn {
    pub shape: Shape,
    pub scale: f64,
    pub lattice: Option<f64>,
}

/// A supporting line `slope * x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cut {
    pub slope: f64,
    pub intercept: f64,
}

impl Cut {
    pub fn at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

impl Shape {
    fn raw(&self, x: f64) -> f64 {
        match *self {
            Shape::BprIntegral {
                t0,
                delay,
                capacity,
                beta,
            } => bpr_integral(t0, delay, capacity, beta, x),
            Shape::BprSum {
                t0,
                delay,
                capacity,
                beta,
                origin,
            } => {
                let n = (x - origin).round() as i64;
                let t = |j: i64| bpr_time(t0, delay, capacity, beta, origin + j as f64);
                if n >= 0 {
                    (1..=n).map(t).sum()
                } else {
                    -(n + 1..=0).map(t).sum::<f64>()
                }
            }
            Shape::BprTotal {
                t0,
                delay,
                capacity,
                beta,
            } => x.max(0.0) * bpr_time(t0, delay, capacity, beta, x),
            Shape::Square => x * x,
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            Shape::BprIntegral {
                t0,
                delay,
                capacity,
                beta,
            } => bpr_time(t0, delay, capacity, beta, x),
            Shape::BprSum {
                t0,
                delay,
                capacity,
                beta,
                origin,
            } => bpr_time(t0, delay, capacity, beta, x.max(origin)),
            Shape::BprTotal {
                t0,
                delay,
                capacity,
                beta,
            } => {
                let dt = if x > 0.0 && delay > 0.0 {
                    delay * beta * x.powf(beta - 1.0) / capacity.powf(beta)
                } else {
                    0.0
                };
                bpr_time(t0, delay, capacity, beta, x) + x * dt
            }
            Shape::Square => 2.0 * x,
        }
    }
}

impl ConvexFn {
    pub fn new(shape: Shape, scale: f64) -> Self {
        let lattice = match shape {
            Shape::BprSum { origin, .. } => Some(origin),
            _ => None,
        };
        ConvexFn {
            shape,
            scale,
            lattice,
        }
    }

    /// Restricts the function to the unit lattice starting at `origin`.
    pub fn on_lattice(mut self, origin: f64) -> Self {
        self.lattice = Some(origin);
        self
    }

    fn lattice_piece(&self, origin: f64, x: f64) -> (f64, f64) {
        let k = (x - origin + 1e-9).floor();
        let p0 = origin + k;
        (p0, p0 + 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.lattice {
            Some(o) => {
                let (p0, p1) = self.lattice_piece(o, x);
                let (f0, f1) = (self.shape.raw(p0), self.shape.raw(p1));
                self.scale * (f0 + (f1 - f0) * (x - p0))
            }
            None => self.scale * self.shape.raw(x),
        }
    }

    /// A cut that never exceeds the function (at lattice points when the
    /// function is restricted to a lattice) and touches it at `x`.
    pub fn support(&self, x: f64) -> Cut {
        match self.lattice {
            Some(o) => {
                let (p0, p1) = self.lattice_piece(o, x);
                let f0 = self.eval(p0);
                let slope = self.eval(p1) - f0;
                Cut {
                    slope,
                    intercept: f0 - slope * p0,
                }
            }
            None => {
                let slope = self.scale * self.shape.derivative(x);
                Cut {
                    slope,
                    intercept: self.eval(x) - slope * x,
                }
            }
        }
    }
}

/// Chord interpolation of a convex function on uniform breakpoints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PwlApprox {
    pub breakpoints: Vec<f64>,
    pub cuts: Vec<Cut>,
    /// Largest vertical distance between the interpolant and the function.
    pub max_gap: f64,
}

impl PwlApprox {
    /// Value of the interpolant (the maximum of its chords).
    pub fn eval(&self, x: f64) -> f64 {
        self.cuts.iter().map(|c| c.at(x)).fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PwlError {
    #[error("at least two segments are required, got {0}")]
    TooFewSegments(usize),
    #[error("empty interval [{0}, {1}]")]
    EmptyInterval(f64, f64),
}

/// Chords of `f` between `segments + 1` uniform breakpoints on
/// `[lower, upper]`.
pub fn chord_approximation(
    f: &ConvexFn,
    lower: f64,
    upper: f64,
    segments: usize,
) -> Result<PwlApprox, PwlError> {
    if segments < 2 {
        return Err(PwlError::TooFewSegments(segments));
    }
    if !(upper > lower) {
        return Err(PwlError::EmptyInterval(lower, upper));
    }
    let h = (upper - lower) / segments as f64;
    let breakpoints: Vec<f64> = (0..=segments).map(|k| lower + h * k as f64).collect();
    let mut cuts = Vec::with_capacity(segments);
    let mut max_gap = 0.0f64;
    for w in breakpoints.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (f.eval(a), f.eval(b));
        let slope = (fb - fa) / (b - a);
        let cut = Cut {
            slope,
            intercept: fa - slope * a,
        };
        // The gap is concave on the segment; golden-section search finds its peak.
        let gap = |x: f64| cut.at(x) - f.eval(x);
        let (mut lo, mut hi) = (a, b);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if gap(m1) < gap(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        max_gap = max_gap.max(gap(0.5 * (lo + hi)));
        cuts.push(cut);
    }
    Ok(PwlApprox {
        breakpoints,
        cuts,
        max_gap,
    })
}

/// Chord interpolation of a road link's volume-delay integral
/// `t0 * (x + eta * x^(beta+1) / ((beta+1) * capacity^beta))` on
/// `[0, x_max]`.
pub fn linearize_bpr_integral(
    t0: f64,
    eta: f64,
    capacity: f64,
    beta: f64,
    segments: usize,
    x_max: f64,
) -> Result<PwlApprox, PwlError> {
    let f = ConvexFn::new(
        Shape::BprIntegral {
            t0,
            delay: t0 * eta,
            capacity,
            beta,
        },
        1.0,
    );
    chord_approximation(&f, 0.0, x_max, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_support_is_tight_at_integers() {
        let f = ConvexFn::new(Shape::Square, 1.0).on_lattice(0.0);
        for k in 0..6 {
            let c = f.support(k as f64);
            assert!((c.at(k as f64) - (k * k) as f64).abs() < 1e-12);
            for j in 0..8 {
                assert!(c.at(j as f64) <= (j * j) as f64 + 1e-12);
            }
        }
    }

    #[test]
    fn bpr_sum_increments_are_travel_times() {
        let shape = Shape::BprSum {
            t0: 1.0,
            delay: 0.5,
            capacity: 2.0,
            beta: 2.0,
            origin: 3.0,
        };
        let f = ConvexFn::new(shape, 1.0);
        for n in 0..5 {
            let x = 3.0 + n as f64;
            let step = f.eval(x + 1.0) - f.eval(x);
            assert!((step - bpr_time(1.0, 0.5, 2.0, 2.0, x + 1.0)).abs() < 1e-12);
        }
    }
}
