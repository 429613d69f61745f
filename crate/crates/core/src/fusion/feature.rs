use crate::error::{Error, Result};

/// Dense `C × H × W` field stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if c == 0 || h == 0 || w == 0 || data.len() != c * h * w {
            return Err(Error::DimensionMismatch(format!(
                "{c}x{h}x{w} feature map with {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature map"));
        }
        Ok(Self { c, h, w, data })
    }

    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Self {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_fn(c: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(c, h, w);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    m.data[(ch * h + y) * w + x] = f(ch, y, x);
                }
            }
        }
        m
    }

    #[inline]
    pub fn idx(&self, ch: usize, y: usize, x: usize) -> usize {
        (ch * self.h + y) * self.w + x
    }

    #[inline]
    pub fn get(&self, ch: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(ch, y, x)]
    }

    pub fn cells(&self) -> usize {
        self.h * self.w
    }

    pub fn same_spatial(&self, other: &FeatureMap) -> bool {
        self.h == other.h && self.w == other.w
    }

    pub(crate) fn check_spatial(&self, other: &FeatureMap, what: &str) -> Result<()> {
        if self.same_spatial(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.h, self.w, other.h, other.w
            )))
        }
    }

    /// Channel vector at cell `cell = y * w + x`.
    pub fn column(&self, cell: usize) -> Vec<f64> {
        let n = self.cells();
        (0..self.c).map(|ch| self.data[ch * n + cell]).collect()
    }

    pub(crate) fn set_column(&mut self, cell: usize, values: &[f64]) {
        let n = self.cells();
        for (ch, v) in values.iter().enumerate() {
            self.data[ch * n + cell] = *v;
        }
    }

    pub(crate) fn add_column(&mut self, cell: usize, values: &[f64]) {
        let n = self.cells();
        for (ch, v) in values.iter().enumerate() {
            self.data[ch * n + cell] += *v;
        }
    }

    /// Stacks `a` over `b` along channels.
    pub fn concat(a: &FeatureMap, b: &FeatureMap) -> Result<FeatureMap> {
        a.check_spatial(b, "concat")?;
        let mut data = Vec::with_capacity(a.data.len() + b.data.len());
        data.extend_from_slice(&a.data);
        data.extend_from_slice(&b.data);
        Ok(FeatureMap {
            c: a.c + b.c,
            h: a.h,
            w: a.w,
            data,
        })
    }

    /// Splits off the first `c0` channels.
    pub fn split(&self, c0: usize) -> (FeatureMap, FeatureMap) {
        let cut = c0 * self.cells();
        (
            FeatureMap {
                c: c0,
                h: self.h,
                w: self.w,
                data: self.data[..cut].to_vec(),
            },
            FeatureMap {
                c: self.c - c0,
                h: self.h,
                w: self.w,
                data: self.data[cut..].to_vec(),
            },
        )
    }

    pub fn scaled(&self, s: f64) -> FeatureMap {
        FeatureMap {
            data: self.data.iter().map(|v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &FeatureMap) -> FeatureMap {
        FeatureMap {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + s * b).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &FeatureMap) -> FeatureMap {
        self.axpy(1.0, other)
    }

    pub fn dot(&self, other: &FeatureMap) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &FeatureMap) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Per-cell camera confidence, every value strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl ConfidenceMap {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 || data.len() != h * w {
            return Err(Error::DimensionMismatch(format!(
                "{h}x{w} confidence map with {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::InvalidArgument(
                "confidence values must lie strictly inside (0, 1)".into(),
            ));
        }
        Ok(Self { h, w, data })
    }

    pub fn constant(h: usize, w: usize, value: f64) -> Result<Self> {
        Self::new(h, w, vec![value; h * w])
    }

    /// The radar share `1 - M_c`.
    pub fn complement(&self) -> Vec<f64> {
        self.data.iter().map(|m| 1.0 - m).collect()
    }
}
