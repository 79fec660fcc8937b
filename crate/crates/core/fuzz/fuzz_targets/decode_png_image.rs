#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = coresample::image_io::decode_png_image(data);
    let _ = coresample::image_io::decode_png_labels(data);
});
