#![no_main]

use libfuzzer_sys::fuzz_target;
use stickpost_cli::config::{Command, RunConfig, Settings};

// Resolution only validates; nothing here samples.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(settings) = Settings::from_toml(text) else { return };
    for cmd in [Command::VerifyAll, Command::VerifyTheorem4, Command::VerifyLemma3, Command::SamplePosterior] {
        if let Ok(cfg) = RunConfig::resolve(cmd, settings.clone(), None) {
            assert!(cfg.c.get() > 0.0);
            assert!(!cmd.needs_observation() || cfg.x.is_some());
            assert!(cfg.pairs.iter().all(|&(l, lp)| l > lp && lp >= 1));
        }
    }
});
