use crate::error::{Error, Result};

/// Row-major `N x d` matrix of per-frame features for one file.
///
/// Frame `i` is stamped at `time_offset + i * frame_shift` seconds. MFCC
/// matrices use the window centre as offset; matrices loaded from feature files
/// use 0, i.e. frame start times.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub file_id: String,
    pub frame_shift: f64,
    pub frame_length: f64,
    pub time_offset: f64,
    data: Vec<f64>,
    n_frames: usize,
    dims: usize,
}

impl FeatureMatrix {
    pub fn new(
        file_id: impl Into<String>,
        data: Vec<f64>,
        dims: usize,
        frame_shift: f64,
        frame_length: f64,
        time_offset: f64,
    ) -> Result<Self> {
        if dims == 0 || data.is_empty() || !data.len().is_multiple_of(dims) {
            return Err(Error::BadConfig(format!(
                "feature data of length {} does not form rows of width {dims}",
                data.len()
            )));
        }
        if !(frame_shift > 0.0 && frame_shift.is_finite()) {
            return Err(Error::BadConfig(format!(
                "frame shift must be positive, got {frame_shift}"
            )));
        }
        let n_frames = data.len() / dims;
        Ok(Self {
            file_id: file_id.into(),
            frame_shift,
            frame_length,
            time_offset,
            data,
            n_frames,
            dims,
        })
    }

    /// Builds a matrix from rows of equal width, stamped at frame start times.
    pub fn from_rows(
        file_id: impl Into<String>,
        rows: &[Vec<f64>],
        frame_shift: f64,
    ) -> Result<Self> {
        let dims = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dims) {
            return Err(Error::BadConfig("rows of unequal width".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(file_id, data, dims, frame_shift, frame_shift, 0.0)
    }

    #[inline]
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    #[inline]
    pub fn dims(&self) -> usize {
        self.dims
    }

    #[inline]
    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dims)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn frame_time(&self, i: usize) -> f64 {
        self.time_offset + i as f64 * self.frame_shift
    }

    pub fn frame_times(&self) -> Vec<f64> {
        (0..self.n_frames).map(|i| self.frame_time(i)).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.frames().map(|f| f[j]).collect()
    }
}
