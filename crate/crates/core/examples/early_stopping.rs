//! Supervises a scripted metric stream under the default stop policy,
//! then replays the recorded history.

use gridsight::harness::{replay, supervise, RunConfig, ScriptedAdapter};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // improves until epoch 12, then plateaus
    let values: Vec<f64> = (1..=80).map(|e| if e <= 12 { 0.05 * e as f64 } else { 0.58 }).collect();
    let config = RunConfig::new("YOLOv8", "transformer", std::env::temp_dir().join("gridsight-example-run"));
    let result = supervise(&mut ScriptedAdapter::from_map_values(&values), &config, None)?;
    println!(
        "stopped at epoch {} ({:?}); best epoch {} with mAP@50 {:.3}",
        result.last_epoch, result.stop_reason, result.best_epoch, result.best_map50
    );
    let again = replay(&result.history, &config)?;
    println!("replay identical: {}", again == result.without_wall_clock());
    Ok(())
}
