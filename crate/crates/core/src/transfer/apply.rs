//! Transfers between shapes through their deformations into template space.

use super::keypoints::KeypointSet;
use super::metrics::{miou, part_iou, pck};
use super::vote::{pool_labeled, transfer_attributes, Attributes};
use crate::error::{Error, Result};
use crate::fields::model::ShapeField;
use crate::geometry::kdtree::KdTree;
use crate::geometry::sample::ShapeSample;
use crate::losses::uncertainty;

type P = [f64; 3];

/// A shape's surface samples and their images in template space.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformedSurface {
    pub points: Vec<P>,
    pub deformed: Vec<P>,
}

impl DeformedSurface {
    pub fn new(sample: &ShapeSample, field: &ShapeField) -> Self {
        let (deformed, _) = field.deform_points(&sample.surface, &sample.surface_features);
        Self {
            points: sample.surface.clone(),
            deformed,
        }
    }

    /// A shape with no deformation, for transfers in the input space.
    pub fn identity(sample: &ShapeSample) -> Self {
        Self {
            points: sample.surface.clone(),
            deformed: sample.surface.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelTransfer {
    pub labels: Vec<usize>,
    /// Correspondence uncertainty of each target point against its nearest
    /// pooled source point.
    pub uncertainty: Vec<f64>,
}

/// Vote part labels from one or more labeled sources onto the target's
/// surface points; all sources are pooled into one set.
pub fn transfer_labels(
    sources: &[(&DeformedSurface, &[usize])],
    target: &DeformedSurface,
    k: usize,
    n: usize,
    gamma: f64,
) -> Result<LabelTransfer> {
    let pooled: Vec<(Vec<P>, Vec<usize>)> = sources
        .iter()
        .map(|(s, l)| {
            if l.len() != s.deformed.len() {
                return Err(Error::config(format!("{} labels for {} surface points", l.len(), s.deformed.len())));
            }
            Ok((s.deformed.clone(), l.to_vec()))
        })
        .collect::<Result<_>>()?;
    let (pts, attrs) = pool_labeled(&pooled, k);
    let Attributes::Labels { values, .. } = transfer_attributes(&pts, &attrs, &target.deformed, n)? else {
        unreachable!("label transfer yields labels")
    };
    let tree = KdTree::from_slice(&pts);
    let mut u = Vec::with_capacity(target.deformed.len());
    for &q in &target.deformed {
        let (i, _) = tree.nearest(q)?;
        u.push(uncertainty(pts[i], [0.0; 3], q, [0.0; 3], gamma));
    }
    Ok(LabelTransfer { labels: values, uncertainty: u })
}

/// Map keypoints of `source` onto `target`: each keypoint takes the
/// semantic feature of its nearest source surface sample, is deformed into
/// template space, and lands on the target surface sample whose image is
/// nearest there.
pub fn transfer_keypoints(
    keypoints: &KeypointSet,
    source: &ShapeSample,
    source_field: &ShapeField,
    target: &DeformedSurface,
) -> Result<KeypointSet> {
    if keypoints.is_empty() {
        return Ok(KeypointSet::default());
    }
    let src_tree = KdTree::from_slice(&source.surface);
    let tgt_tree = KdTree::from_slice(&target.deformed);
    let mut out = KeypointSet::default();
    for (name, x) in keypoints.iter() {
        let (i, _) = src_tree.nearest(x)?;
        let d = source_field.deform(x, source.surface_features.row(i));
        let u = [x[0] + d.delta_x[0], x[1] + d.delta_x[1], x[2] + d.delta_x[2]];
        let (j, _) = tgt_tree.nearest(u)?;
        out.push(name, target.points[j])?;
    }
    Ok(out)
}

/// Keypoints transferred without deformation: the nearest target surface
/// sample to each source keypoint.
pub fn transfer_keypoints_direct(keypoints: &KeypointSet, target: &ShapeSample) -> Result<KeypointSet> {
    let tree = KdTree::from_slice(&target.surface);
    let mut out = KeypointSet::default();
    for (name, x) in keypoints.iter() {
        let (j, _) = tree.nearest(x)?;
        out.push(name, target.surface[j])?;
    }
    Ok(out)
}

/// Evaluation summary of a transfer.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransferReport {
    /// `(threshold, PCK in percent)`.
    pub pck: Vec<(f64, f64)>,
    pub part_iou: Vec<Option<f64>>,
    pub miou: Option<f64>,
    pub uncertainty: Vec<f64>,
}

impl TransferReport {
    pub fn keypoints(predicted: &KeypointSet, truth: &KeypointSet, thresholds: &[f64]) -> Result<Self> {
        let v = pck(predicted, truth, thresholds)?;
        Ok(Self {
            pck: thresholds.iter().copied().zip(v).collect(),
            ..Self::default()
        })
    }

    pub fn labels(t: &LabelTransfer, truth: &[usize], k: usize) -> Result<Self> {
        Ok(Self {
            part_iou: part_iou(&t.labels, truth, k)?,
            miou: Some(miou(&t.labels, truth, k)?),
            uncertainty: t.uncertainty.clone(),
            ..Self::default()
        })
    }

    /// Two-column CSV `metric,value`.
    pub fn to_csv(&self) -> String {
        let g = crate::io::fmt_g9;
        let mut s = String::from("metric,value\n");
        for (t, v) in &self.pck {
            s.push_str(&format!("pck@{},{}\n", g(*t), g(*v)));
        }
        for (i, v) in self.part_iou.iter().enumerate() {
            if let Some(v) = v {
                s.push_str(&format!("iou_{i},{}\n", g(*v)));
            }
        }
        if let Some(m) = self.miou {
            s.push_str(&format!("miou,{}\n", g(m)));
        }
        if !self.uncertainty.is_empty() {
            let mean = self.uncertainty.iter().sum::<f64>() / self.uncertainty.len() as f64;
            s.push_str(&format!("uncertainty_mean,{}\n", g(mean)));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::model::tests::tiny_config;
    use crate::fields::model::Model;
    use crate::geometry::sample::sample_shape;
    use crate::geometry::synth::{family_shape, Family};

    fn chair(i: usize) -> (ShapeSample, KeypointSet) {
        let spec = family_shape(Family::Chair, i, 2);
        (sample_shape(&spec, 300, 10, i as u64).unwrap(), spec.keypoints)
    }

    fn zero_model() -> (Model, crate::autodiff::ParamVector) {
        let mut c = tiny_config();
        c.parts = 4;
        let m = Model::new(c).unwrap();
        let mut p = m.init(1);
        for head in &m.blocks.hyper.heads {
            for &(w, b) in &head.layers {
                p.block_mut(w).fill(0.0);
                p.block_mut(b).fill(0.0);
            }
        }
        (m, p)
    }

    #[test]
    fn identity_model_copies_self_labels() {
        let (m, p) = zero_model();
        let (s, _) = chair(0);
        let f = m.shape_field(&p, m.code(&p, 0)).unwrap();
        let d = DeformedSurface::new(&s, &f);
        assert_eq!(d.deformed, d.points);
        let labels = s.labels.clone().unwrap();
        let t = transfer_labels(&[(&d, &labels)], &d, 4, 10, 10.0).unwrap();
        assert_eq!(t.labels, labels);
        assert!(t.uncertainty.iter().all(|&u| u == 0.0));
        let r = TransferReport::labels(&t, &labels, 4).unwrap();
        assert_eq!(r.miou, Some(1.0));
        assert!(r.to_csv().contains("miou,1\n"));
    }

    #[test]
    fn identity_model_keypoints_snap_to_target_surface() {
        let (m, p) = zero_model();
        let (a, kp) = chair(0);
        let (b, _) = chair(1);
        let fa = m.shape_field(&p, m.code(&p, 0)).unwrap();
        let fb = m.shape_field(&p, m.code(&p, 1)).unwrap();
        let out = transfer_keypoints(&kp, &a, &fa, &DeformedSurface::new(&b, &fb)).unwrap();
        assert_eq!(out, transfer_keypoints_direct(&kp, &b).unwrap());
        // self-transfer stays within sampling resolution
        let own = transfer_keypoints(&kp, &a, &fa, &DeformedSurface::new(&a, &fa)).unwrap();
        let r = TransferReport::keypoints(&own, &kp, &[0.15]).unwrap();
        assert_eq!(r.pck[0].1, 100.0);
        assert!(transfer_keypoints(&KeypointSet::default(), &a, &fa, &DeformedSurface::identity(&b)).unwrap().is_empty());
    }
}
