use num_complex::Complex64;

use super::AirlinkError;

/// Square QAM constellation with Gray-coded labels and unit average energy.
///
/// `points[label]` is the point carrying `label`; the upper half of the label
/// bits select the in-phase level and the lower half the quadrature level,
/// each Gray coded along its axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    points: Vec<Complex64>,
}

impl Constellation {
    /// `order` must be a power of four (4, 16, 64, ...).
    pub fn qam(order: usize) -> Result<Self, AirlinkError> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || !bits.is_multiple_of(2) {
            return Err(AirlinkError::UnsupportedOrder(order));
        }
        let axis_bits = bits / 2;
        let side = 1usize << axis_bits;
        let norm = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        let level = |pos: usize| (2 * pos) as f64 - (side as f64 - 1.0);
        let mut points = vec![Complex64::new(0.0, 0.0); order];
        for i in 0..side {
            for q in 0..side {
                let label = (gray(i) << axis_bits) | gray(q);
                points[label] = Complex64::new(level(i), level(q)) * norm;
            }
        }
        Ok(Self { order, points })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Index of the point closest to `z`; ties go to the lowest index.
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Label of `z` if it is exactly one of the points.
    pub fn index_of(&self, z: Complex64) -> Option<usize> {
        self.points.iter().position(|&p| p == z)
    }

    pub fn min_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.min((a - b).norm());
            }
        }
        d
    }

    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.order as f64
    }
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}
