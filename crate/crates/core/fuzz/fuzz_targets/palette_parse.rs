#![no_main]

use coresample::sampler::Palette;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = Palette::parse(text) {
            assert_eq!(Palette::parse(&p.to_text()).unwrap(), p);
        }
    }
});
