/// Row-major 2D grid of non-negative heatmap values.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// Location and value of a heatmap maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub col: usize,
    pub row: usize,
    pub value: f64,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Global maximum; ties go to the lowest row-major index.
    pub fn argmax(&self) -> Peak {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        Peak {
            col: best % self.width,
            row: best / self.width,
            value: self.data[best],
        }
    }

    /// Sub-cell offset of `peak` from a 1D parabola through each axis of its
    /// 3x3 neighborhood. Offsets lie in `[-0.5, 0.5]`; an axis at the border
    /// or without curvature gets 0.
    pub fn quadratic_offset(&self, peak: &Peak) -> (f64, f64) {
        let (c, r) = (peak.col, peak.row);
        let dx = if c > 0 && c + 1 < self.width {
            parabola_vertex(self.get(c - 1, r), peak.value, self.get(c + 1, r))
        } else {
            0.0
        };
        let dy = if r > 0 && r + 1 < self.height {
            parabola_vertex(self.get(c, r - 1), peak.value, self.get(c, r + 1))
        } else {
            0.0
        };
        (dx, dy)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }
}

fn parabola_vertex(left: f64, center: f64, right: f64) -> f64 {
    let curvature = left - 2.0 * center + right;
    if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}
