//! Prompt plans: a token template compiled into fixed embedding rows plus
//! trainable slots, so both training stages can rebuild the conditioning
//! from live vectors at every step.

use crate::embedding::EmbeddingSpace;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum PlanItem {
    Fixed(Vec<f64>),
    Slot(usize),
}

/// A compiled prompt whose `{attrs}` / `{obj}` slots index into a list of
/// caller-owned vectors (attribute slots first, then the object slot).
#[derive(Debug, Clone)]
pub struct PromptPlan {
    items: Vec<PlanItem>,
    n_slots: usize,
    dim: usize,
}

impl PromptPlan {
    /// Compile `template` against the frozen base table. Literal segments are
    /// resolved once (the base table never changes mid-run); slots stay live.
    pub fn compile(space: &EmbeddingSpace, template: &str, n_attrs: usize) -> Result<Self> {
        let mut items = Vec::new();
        for segment in crate::embedding::template_segments(template) {
            match segment {
                crate::embedding::TemplateSegment::Literal(text) => {
                    for id in space.encode_literal(text) {
                        items.push(PlanItem::Fixed(space.row(id)?));
                    }
                }
                crate::embedding::TemplateSegment::Attrs => {
                    for i in 0..n_attrs {
                        items.push(PlanItem::Slot(i));
                    }
                }
                crate::embedding::TemplateSegment::Obj => {
                    items.push(PlanItem::Slot(n_attrs));
                }
            }
        }
        Ok(PromptPlan { items, n_slots: n_attrs + 1, dim: space.dim() })
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    /// Materialize condition rows from the current slot vectors.
    pub fn rows(&self, slots: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if slots.len() != self.n_slots {
            return Err(Error::DimensionMismatch { expected: self.n_slots, got: slots.len() });
        }
        let mut rows = Vec::with_capacity(self.items.len());
        for item in &self.items {
            match item {
                PlanItem::Fixed(row) => rows.push(row.clone()),
                PlanItem::Slot(i) => {
                    let v = &slots[*i];
                    if v.len() != self.dim {
                        return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
                    }
                    rows.push(v.clone());
                }
            }
        }
        Ok(rows)
    }

    /// Fold per-row loss gradients back onto the slots (summing over repeated
    /// occurrences); fixed rows are frozen and their gradients dropped.
    pub fn slot_grads(&self, row_grads: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if row_grads.len() != self.items.len() {
            return Err(Error::DimensionMismatch {
                expected: self.items.len(),
                got: row_grads.len(),
            });
        }
        let mut grads = vec![vec![0.0; self.dim]; self.n_slots];
        for (item, g) in self.items.iter().zip(row_grads) {
            if let PlanItem::Slot(i) = item {
                crate::math::axpy(&mut grads[*i], 1.0, g);
            }
        }
        Ok(grads)
    }
}
