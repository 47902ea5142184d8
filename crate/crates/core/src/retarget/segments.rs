use nalgebra::DVector;

use crate::{Error, Result};

/// Per-segment joint index lists. Joints claimed by several segments are
/// averaged when segment increments are composed.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEmbedding {
    dof: usize,
    segments: Vec<Vec<usize>>,
    counts: Vec<usize>,
}

impl SegmentEmbedding {
    pub fn new(dof: usize, segments: Vec<Vec<usize>>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Embedding("no segments".into()));
        }
        let mut counts = vec![0usize; dof];
        for (s, seg) in segments.iter().enumerate() {
            if seg.is_empty() {
                return Err(Error::Embedding(format!("segment {s} is empty")));
            }
            for (i, &j) in seg.iter().enumerate() {
                if j >= dof {
                    return Err(Error::Embedding(format!(
                        "segment {s} joint {j} out of range"
                    )));
                }
                if seg[..i].contains(&j) {
                    return Err(Error::Embedding(format!(
                        "segment {s} lists joint {j} twice"
                    )));
                }
                counts[j] += 1;
            }
        }
        Ok(Self {
            dof,
            segments,
            counts,
        })
    }

    /// Single segment covering every joint.
    pub fn monolithic(dof: usize) -> Self {
        Self {
            dof,
            segments: vec![(0..dof).collect()],
            counts: vec![1; dof],
        }
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn segments(&self) -> &[Vec<usize>] {
        &self.segments
    }

    pub fn overlap(&self) -> Vec<usize> {
        (0..self.dof).filter(|&j| self.counts[j] > 1).collect()
    }

    pub fn covers(&self, joint: usize) -> bool {
        self.counts.get(joint).is_some_and(|&c| c > 0)
    }

    /// `Σ_s P_s dq_s` with shared joints averaged over contributing segments.
    pub fn compose(&self, parts: &[DVector<f64>]) -> Result<DVector<f64>> {
        if parts.len() != self.segments.len() {
            return Err(Error::Embedding(format!(
                "expected {} segment increments, got {}",
                self.segments.len(),
                parts.len()
            )));
        }
        let mut out = DVector::zeros(self.dof);
        for (seg, dq) in self.segments.iter().zip(parts) {
            if dq.len() != seg.len() {
                return Err(Error::Embedding(format!(
                    "segment increment has {} entries, segment has {} joints",
                    dq.len(),
                    seg.len()
                )));
            }
            for (&j, &v) in seg.iter().zip(dq.iter()) {
                out[j] += v;
            }
        }
        for j in 0..self.dof {
            if self.counts[j] > 1 {
                out[j] /= self.counts[j] as f64;
            }
        }
        Ok(out)
    }
}
