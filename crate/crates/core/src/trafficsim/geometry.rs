//! Oriented-rectangle geometry for vehicle footprints.

/// Axis-aligned unit direction for a heading.
#[inline]
pub fn heading_axes(heading: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = heading.sin_cos();
    ([c, s], [-s, c])
}

/// Footprint of a vehicle centered at `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedRect {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl OrientedRect {
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (f, l) = heading_axes(self.heading);
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let at = |a: f64, b: f64| [self.x + f[0] * a + l[0] * b, self.y + f[1] * a + l[1] * b];
        [at(hl, hw), at(hl, -hw), at(-hl, -hw), at(-hl, hw)]
    }

    /// Point membership (boundary included).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (f, l) = heading_axes(self.heading);
        let d = [p[0] - self.x, p[1] - self.y];
        let along = d[0] * f[0] + d[1] * f[1];
        let across = d[0] * l[0] + d[1] * l[1];
        along.abs() <= self.length / 2.0 && across.abs() <= self.width / 2.0
    }

    fn project(&self, axis: [f64; 2]) -> (f64, f64) {
        self.corners()
            .iter()
            .map(|c| c[0] * axis[0] + c[1] * axis[1])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// Separating-axis overlap test. Touching edges do not count.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        let (f1, l1) = heading_axes(self.heading);
        let (f2, l2) = heading_axes(other.heading);
        [f1, l1, f2, l2].into_iter().all(|axis| {
            let (a_lo, a_hi) = self.project(axis);
            let (b_lo, b_hi) = other.project(axis);
            a_lo < b_hi && b_lo < a_hi
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x: f64, y: f64, heading: f64) -> OrientedRect {
        OrientedRect { x, y, heading, length: 4.5, width: 2.0 }
    }

    #[test]
    fn far_apart_and_identical() {
        assert!(!rect(0.0, 0.0, 0.0).overlaps(&rect(100.0, 0.0, 0.0)));
        assert!(rect(3.0, 1.0, 0.4).overlaps(&rect(3.0, 1.0, 0.4)));
    }

    #[test]
    fn side_by_side_touching_is_not_overlap() {
        assert!(!rect(0.0, 0.0, 0.0).overlaps(&rect(0.0, 2.0, 0.0)));
        assert!(rect(0.0, 0.0, 0.0).overlaps(&rect(0.0, 1.99, 0.0)));
    }

    #[test]
    fn rotated_corner_case() {
        // A 45-degree rectangle reaches (2.25 + 1.0) * cos(45deg) = 2.298 from its center.
        let a = rect(0.0, 0.0, 0.0);
        let b = rect(2.25 + 2.29, 0.0, std::f64::consts::FRAC_PI_4);
        assert!(a.overlaps(&b));
        let c = rect(2.25 + 2.31, 0.0, std::f64::consts::FRAC_PI_4);
        assert!(!a.overlaps(&c));
    }
}
