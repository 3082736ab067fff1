#![no_main]

use libfuzzer_sys::fuzz_target;
use vecfish::io::{read_dataset, CsvOptions};

// The first byte picks the reader options so covariate selection and the
// no-intercept path get exercised too.
fuzz_target!(|data: &[u8]| {
    let Some((&flags, body)) = data.split_first() else {
        return;
    };
    let opts = CsvOptions {
        covariates: (flags & 1 == 1).then(|| vec!["z1".to_string()]),
        intercept: flags & 2 == 0,
    };
    if let Ok(set) = read_dataset(body, &opts) {
        assert!(!set.is_empty());
        assert_eq!(set.y().len(), set.len());
        assert!(set.coords().iter().all(|v| v.is_finite()));
    }
});
