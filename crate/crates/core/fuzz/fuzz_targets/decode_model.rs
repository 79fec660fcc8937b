#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(model) = coresample::pipeline::decode_model(data) {
        let again = coresample::pipeline::encode_model(&model).unwrap();
        assert_eq!(coresample::pipeline::decode_model(&again).unwrap(), model);
    }
});
