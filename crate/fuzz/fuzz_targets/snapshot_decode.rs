#![no_main]

use fvw::model::snapshot::Snapshot;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = Snapshot::decode(data) {
        // compare bytes, values may hold NaN
        let bytes = snap.encode().expect("decoded snapshot encodes");
        let again = Snapshot::decode(&bytes).expect("re-decodes");
        assert_eq!(again.encode().expect("encodes"), bytes);
    }
});
