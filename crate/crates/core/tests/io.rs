use plap_core::grid::{build_grid, GridFunction};
use plap_core::io::{read_binary, read_csv, write_binary, write_csv};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn files_reproduce_fields_bit_for_bit(a in -1e3f64..1e3, b in -1e-8f64..1e-8, half_n in 2usize..12, disk in any::<bool>()) {
        let grid = build_grid(2 * half_n, disk).unwrap();
        let u = GridFunction::from_fn(&grid, |x, y| a * (x * 7.1).sin() + b * y / 3.0);
        let mut text = Vec::new();
        write_csv(&u, &[("seed".into(), "5".into())], &mut text).unwrap();
        let (back, meta) = read_csv(text.as_slice()).unwrap();
        prop_assert_eq!(back.values(), u.values());
        prop_assert_eq!(meta, vec![("seed".to_string(), "5".to_string())]);

        let mut bin = Vec::new();
        write_binary(&u, &mut bin).unwrap();
        let from_bin = read_binary(bin.as_slice()).unwrap();
        prop_assert_eq!(from_bin.values(), u.values());
    }
}

#[test]
fn truncated_binary_is_an_error() {
    let grid = build_grid(4, false).unwrap();
    let mut bin = Vec::new();
    write_binary(&GridFunction::zeros(&grid), &mut bin).unwrap();
    bin.pop();
    assert!(read_binary(bin.as_slice()).is_err());
}
