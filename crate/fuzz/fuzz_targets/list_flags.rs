#![no_main]

use libfuzzer_sys::fuzz_target;
use stickpost_cli::config::{parse_levels, parse_pair, parse_partition, Command, RunConfig, Settings};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(levels) = parse_levels(text) {
        assert!(!levels.is_empty() && levels.iter().all(|&l| l >= 1));
    }
    if let Ok((l, lp)) = parse_pair(text) {
        assert!(l > lp && lp >= 1);
    }
    if let Ok(cuts) = parse_partition(text) {
        // Partition validation runs inside resolution.
        let s = Settings {
            partition: Some(cuts),
            x: Some(0.25),
            samples: Some(1000),
            ..Settings::default()
        };
        if let Ok(cfg) = RunConfig::resolve(Command::VerifyLemma3, s, None) {
            let part = cfg.partition().unwrap().unwrap();
            let total: f64 = part.cell_mass().iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }
});
