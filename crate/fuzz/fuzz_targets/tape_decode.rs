#![no_main]

use fvw::adjoint::dump::TapeDump;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(dump) = TapeDump::decode(data) {
        let bytes = dump.encode();
        assert_eq!(TapeDump::decode(&bytes).expect("re-decodes").encode(), bytes);
    }
});
