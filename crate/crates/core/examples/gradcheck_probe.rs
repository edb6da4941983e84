use emohrnet_core::model::HRNetConfig;
use emohrnet_core::verify::run_gradcheck;

fn main() {
    let t0 = std::time::Instant::now();
    let report = run_gradcheck(&HRNetConfig::default(), 0, false).unwrap();
    for c in &report.checks {
        println!(
            "{:20} max_rel_err {:9.3e}  tol {:6.0e}  {}",
            c.name,
            c.max_rel_err,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    println!("all_pass: {}  covers_all_ops: {}  elapsed {:?}", report.all_pass(), report.covers_all_ops(), t0.elapsed());
    println!("manifest entries: {}, total params: {}", report.manifest.len(),
        report.manifest.iter().map(|(_, s)| s.iter().product::<usize>()).sum::<usize>());
}
