#![no_main]

use libfuzzer_sys::fuzz_target;
use skein::Triangulation;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(tri) = Triangulation::parse(text) else { return };
    let again = Triangulation::parse(&tri.to_string()).expect("serialized triangulation parses");
    assert_eq!(tri, again);
});
