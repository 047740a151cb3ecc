//! mAP@50, per-class counts and the confusion matrix for a small
//! hand-built set of detections.

use gridsight::eval::{evaluate_images, ImageEval};
use gridsight::model::{Annotation, ClassList, Detection, NormalizedBBox};

fn b(cx: f64, cy: f64, w: f64, h: f64) -> NormalizedBBox {
    NormalizedBBox::new(cx, cy, w, h).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let images = vec![
        ImageEval {
            name: "a".into(),
            ground_truth: vec![
                Annotation { class: 0, bbox: b(0.3, 0.3, 0.2, 0.2) },
                Annotation { class: 2, bbox: b(0.7, 0.7, 0.1, 0.1) },
            ],
            detections: vec![
                Detection { class: 0, bbox: b(0.31, 0.3, 0.2, 0.2), confidence: 0.92 },
                Detection { class: 2, bbox: b(0.2, 0.8, 0.1, 0.1), confidence: 0.85 },
                Detection { class: 2, bbox: b(0.7, 0.7, 0.1, 0.11), confidence: 0.6 },
            ],
        },
        ImageEval {
            name: "b".into(),
            ground_truth: vec![Annotation { class: 1, bbox: b(0.5, 0.5, 0.3, 0.3) }],
            detections: vec![Detection { class: 1, bbox: b(0.52, 0.5, 0.3, 0.3), confidence: 0.7 }],
        },
    ];
    let report = evaluate_images(&images, &ClassList::canonical(), 0.5, 0.25)?;
    print!("{}", report.render_table());
    Ok(())
}
