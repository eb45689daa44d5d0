/// Target set for probabilities and integrals over the strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    /// The whole strip `R x (-a, a)`.
    Whole,
    /// Closed rectangle `[x1.0, x1.1] x [x2.0, x2.1]`.
    Rect { x1: (f64, f64), x2: (f64, f64) },
}

impl Region {
    pub fn rect(x1: (f64, f64), x2: (f64, f64)) -> Self {
        Region::Rect { x1, x2 }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Region::Whole => true,
            Region::Rect { x1, x2 } => {
                p[0] >= x1.0 && p[0] <= x1.1 && p[1] >= x2.0 && p[1] <= x2.1
            }
        }
    }

    /// Intersection of the transverse range with `[-a, a]`.
    pub fn x2_range(&self, a: f64) -> (f64, f64) {
        match self {
            Region::Whole => (-a, a),
            Region::Rect { x2, .. } => (x2.0.max(-a), x2.1.min(a)),
        }
    }
}
