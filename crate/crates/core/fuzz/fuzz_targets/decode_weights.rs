#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = coresample::extractor::decode_weights(data) {
        let again = coresample::extractor::encode_weights(&model);
        assert_eq!(coresample::extractor::decode_weights(&again).unwrap(), model);
    }
});
