#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ck) = dimq::model::checkpoint_from_str(text) {
        let encoded = dimq::model::checkpoint_to_string(&ck);
        let back = dimq::model::checkpoint_from_str(&encoded).expect("round trip parses");
        assert_eq!(back.model.params, ck.model.params);
        assert_eq!(back.target, ck.target);
        assert_eq!(back.grad_step, ck.grad_step);
    }
});
