//! Aggregates per-model, per-component training results into the
//! comparison tables.

use gridsight::harness::{compare, TrainRunResult};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cells = [
        ("YOLOv8", "transformer", 0.680, 3615.33),
        ("YOLOv8", "circuit_breaker", 0.700, 4198.47),
        ("YOLOv8", "reactor", 0.450, 3633.36),
        ("YOLOv11", "transformer", 0.619, 1802.18),
        ("YOLOv11", "circuit_breaker", 0.620, 2101.55),
        ("YOLOv11", "reactor", 0.330, 1712.57),
    ];
    let results: Vec<TrainRunResult> =
        cells.iter().map(|&(m, c, map, secs)| TrainRunResult::summary(m, c, map, secs)).collect();
    let report = compare(&results)?;
    print!("{}", report.render_all());
    Ok(())
}
