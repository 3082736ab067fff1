#![no_main]

use libfuzzer_sys::fuzz_target;
use vecfish::optimizer::Optimizer;
use vecfish::simulate::Layout;
use vecfish::Family;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(f) = s.parse::<Family>() {
        assert_eq!(f.name().parse::<Family>().unwrap(), f);
    }
    if let Ok(o) = s.parse::<Optimizer>() {
        assert_eq!(o.to_string().parse::<Optimizer>().unwrap(), o);
    }
    if let Ok(l) = s.parse::<Layout>() {
        assert_eq!(l.name().parse::<Layout>().unwrap(), l);
    }
});
