#![no_main]

use libfuzzer_sys::fuzz_target;
use skein::LinkExpr;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(link) = LinkExpr::parse(text) else { return };
    let again = LinkExpr::parse(&link.to_string()).expect("display output parses");
    assert_eq!(link, again);
    assert_eq!(link.components(), again.components());
});
