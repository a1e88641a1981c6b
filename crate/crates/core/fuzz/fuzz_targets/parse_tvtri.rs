#![no_main]

use libfuzzer_sys::fuzz_target;
use skein::Triangulation;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(tri) = Triangulation::parse(text) {
            // accessors must hold up on anything the parser accepts
            for t in 0..tri.num_tetrahedra() {
                let _ = tri.tetra_edge_labels(t);
            }
            let _ = tri.valence();
            let _ = tri.euler_characteristic();
        }
    }
});
