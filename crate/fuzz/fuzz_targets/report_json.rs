#![no_main]

use libfuzzer_sys::fuzz_target;
use stickpost_cli::report::{decode_verify_report, to_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = decode_verify_report(text) {
        // Anything accepted must survive a round trip.
        let again = to_json(&doc).expect("decoded reports re-encode");
        let back = decode_verify_report(&again).expect("re-encoded reports decode");
        assert_eq!(back.body.reports.len(), doc.body.reports.len());
        assert_eq!(back.body.all_pass, doc.body.all_pass);
    }
});
