//! Reference implementations and fixtures shared by the integration tests.
//! The oracles here are written from the definitions, not from the library
//! code, and are deliberately slow.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use gridsight::model::{Annotation, Detection, NormalizedBBox};
use rand::Rng;

pub const N_CLASSES: usize = 3;

/// Corner-form IoU computed from scratch.
pub fn oracle_iou(a: &NormalizedBBox, b: &NormalizedBBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = (a.cx - a.w / 2.0, a.cy - a.h / 2.0, a.cx + a.w / 2.0, a.cy + a.h / 2.0);
    let (bx0, by0, bx1, by1) = (b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0);
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.w * a.h + b.w * b.h - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub images: Vec<(Vec<Annotation>, Vec<Detection>)>,
}

pub fn random_box(rng: &mut impl Rng) -> NormalizedBBox {
    let w = rng.random_range(0.05..0.5);
    let h = rng.random_range(0.05..0.5);
    let cx = rng.random_range(w / 2.0..=1.0 - w / 2.0);
    let cy = rng.random_range(h / 2.0..=1.0 - h / 2.0);
    NormalizedBBox::new(cx, cy, w, h).expect("random box is valid")
}

/// A box near `b`, so matches above 0.5 IoU are common.
pub fn jitter(rng: &mut impl Rng, b: &NormalizedBBox) -> NormalizedBBox {
    let w = (b.w * rng.random_range(0.7..1.3)).min(0.9);
    let h = (b.h * rng.random_range(0.7..1.3)).min(0.9);
    let cx = (b.cx + rng.random_range(-0.08..0.08)).clamp(w / 2.0, 1.0 - w / 2.0);
    let cy = (b.cy + rng.random_range(-0.08..0.08)).clamp(h / 2.0, 1.0 - h / 2.0);
    NormalizedBBox::new(cx, cy, w, h).expect("jittered box is valid")
}

/// Up to 5 images with up to 6 ground truths and 6 detections each over
/// three classes. Confidences come from a coarse grid so ties occur.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let n_images = rng.random_range(1..=5);
    let images = (0..n_images)
        .map(|_| {
            let n_gt = rng.random_range(0..=6);
            let gts: Vec<Annotation> = (0..n_gt)
                .map(|_| Annotation { class: rng.random_range(0..N_CLASSES), bbox: random_box(rng) })
                .collect();
            let n_det = rng.random_range(0..=6);
            let dets = (0..n_det)
                .map(|_| {
                    let (class, bbox) = if !gts.is_empty() && rng.random_bool(0.7) {
                        let g = &gts[rng.random_range(0..gts.len())];
                        let class = if rng.random_bool(0.85) { g.class } else { rng.random_range(0..N_CLASSES) };
                        (class, jitter(rng, &g.bbox))
                    } else {
                        (rng.random_range(0..N_CLASSES), random_box(rng))
                    };
                    let confidence = rng.random_range(1..=10) as f64 / 10.0;
                    Detection { class, bbox, confidence }
                })
                .collect();
            (gts, dets)
        })
        .collect();
    Instance { images }
}

/// Detection processing order: confidence descending, then best same-class
/// IoU descending, then input position.
pub fn oracle_priority(dets: &[Detection], gts: &[Annotation]) -> Vec<usize> {
    let best: Vec<f64> = dets
        .iter()
        .map(|d| {
            let mut m = 0.0f64;
            for g in gts.iter().filter(|g| g.class == d.class) {
                m = m.max(oracle_iou(&d.bbox, &g.bbox));
            }
            m
        })
        .collect();
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap()
            .then(best[b].partial_cmp(&best[a]).unwrap())
            .then(a.cmp(&b))
    });
    idx
}

/// Exhaustive matching. Every one-to-one assignment of detections to
/// same-class ground truths with IoU at or above `thresh` is enumerated; the
/// winner is the lexicographic maximum, over detections in priority order,
/// of (IoU of the assigned truth, lower truth index first), with
/// "unassigned" ranking below any assignment. Returns, per detection in
/// input order, the matched ground truth.
pub fn oracle_match(dets: &[Detection], gts: &[Annotation], thresh: f64) -> Vec<Option<usize>> {
    let order = oracle_priority(dets, gts);
    let mut best: Option<(Vec<(f64, i64)>, Vec<Option<usize>>)> = None;
    let mut current = vec![None; dets.len()];
    let mut used = vec![false; gts.len()];

    fn rec(
        k: usize,
        order: &[usize],
        dets: &[Detection],
        gts: &[Annotation],
        thresh: f64,
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Option<(Vec<(f64, i64)>, Vec<Option<usize>>)>,
    ) {
        if k == order.len() {
            let key: Vec<(f64, i64)> = order
                .iter()
                .map(|&d| match current[d] {
                    Some(g) => (oracle_iou(&dets[d].bbox, &gts[g].bbox), -(g as i64)),
                    None => (-1.0, 0),
                })
                .collect();
            let better = match best {
                None => true,
                Some((bk, _)) => key.partial_cmp(bk) == Some(std::cmp::Ordering::Greater),
            };
            if better {
                *best = Some((key, current.clone()));
            }
            return;
        }
        let d = order[k];
        rec(k + 1, order, dets, gts, thresh, current, used, best);
        for g in 0..gts.len() {
            if used[g] || gts[g].class != dets[d].class || oracle_iou(&dets[d].bbox, &gts[g].bbox) < thresh {
                continue;
            }
            used[g] = true;
            current[d] = Some(g);
            rec(k + 1, order, dets, gts, thresh, current, used, best);
            current[d] = None;
            used[g] = false;
        }
    }

    rec(0, &order, dets, gts, thresh, &mut current, &mut used, &mut best);
    best.map(|(_, a)| a).unwrap_or_default()
}

/// Per-class (tp, fp, fn) totals from oracle assignments.
pub fn oracle_counts(inst: &Instance, thresh: f64) -> Vec<(usize, usize, usize)> {
    let mut out = vec![(0, 0, 0); N_CLASSES];
    for (gts, dets) in &inst.images {
        let m = oracle_match(dets, gts, thresh);
        for (d, g) in dets.iter().zip(&m) {
            if g.is_some() {
                out[d.class].0 += 1;
            } else {
                out[d.class].1 += 1;
            }
        }
        for (gi, g) in gts.iter().enumerate() {
            if !m.contains(&Some(gi)) {
                out[g.class].2 += 1;
            }
        }
    }
    out
}

/// AP as the mean, over true-positive ranks, of the best precision at that
/// rank or any later rank. `None` when the class has no ground truth.
pub fn oracle_ap(inst: &Instance, class: usize, thresh: f64) -> Option<f64> {
    let n_gt: usize = inst.images.iter().map(|(g, _)| g.iter().filter(|a| a.class == class).count()).sum();
    if n_gt == 0 {
        return None;
    }
    // (confidence, image, priority position, hit)
    let mut ranked = Vec::new();
    for (img, (gts, dets)) in inst.images.iter().enumerate() {
        let m = oracle_match(dets, gts, thresh);
        for (pos, &d) in oracle_priority(dets, gts).iter().enumerate() {
            if dets[d].class == class {
                ranked.push((dets[d].confidence, img, pos, m[d].is_some()));
            }
        }
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let precision: Vec<f64> = ranked
        .iter()
        .scan(0usize, |tp, r| {
            *tp += r.3 as usize;
            Some(*tp as f64)
        })
        .enumerate()
        .map(|(i, tp)| tp / (i + 1) as f64)
        .collect();
    let mut sum = 0.0;
    for (k, r) in ranked.iter().enumerate() {
        if r.3 {
            sum += precision[k..].iter().cloned().fold(0.0, f64::max);
        }
    }
    Some(sum / n_gt as f64)
}

pub fn write_script(dir: &Path, name: &str, body: &str) -> PathBuf {
    use std::os::unix::fs::PermissionsExt;
    let path = dir.join(name);
    std::fs::write(&path, format!("#!/bin/sh\n{body}")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

/// Single-purpose HTTP server answering every request with `respond(path)`.
pub struct StubServer {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
    _handle: JoinHandle<()>,
}

impl StubServer {
    pub fn start<F>(respond: F) -> Self
    where
        F: Fn(&str) -> (u16, Vec<u8>) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = hits.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                if reader.read_line(&mut request_line).is_err() {
                    continue;
                }
                let mut header = String::new();
                while reader.read_line(&mut header).is_ok_and(|n| n > 2) {
                    header.clear();
                }
                counter.fetch_add(1, Ordering::SeqCst);
                let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let (status, body) = respond(&path);
                let head =
                    format!("HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n", body.len());
                let _ = stream.write_all(head.as_bytes());
                let _ = stream.write_all(&body);
                let _ = stream.flush();
                let mut sink = [0u8; 64];
                let _ = stream.read(&mut sink);
            }
        });
        Self { url, hits, _handle: handle }
    }
}

pub fn png_bytes(w: u32, h: u32, rgb: [u8; 3]) -> Vec<u8> {
    let img = image::RgbImage::from_pixel(w, h, image::Rgb(rgb));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}
