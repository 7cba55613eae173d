mod common;

use henn::encoding::{
    complete_column_shift, decode, encode_matrix, extract_row, extract_scalar, replicate_row,
    rotate_sum, sum_row_vec, EncodedMatrix, Layout,
};
use henn::engine::{Engine, EngineConfig};
use henn::Error;
use ndarray::{array, Array2};
use proptest::prelude::*;

#[test]
fn every_small_shape_matches_brute_force() {
    let summary = common::suites::encoding_suite(11).unwrap();
    println!("{summary}");
}

#[test]
fn layouts_round_trip() {
    let e = common::exact(16);
    let m = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
    for layout in [Layout::FullMatrix, Layout::RowPerCiphertext] {
        let enc = encode_matrix(&e, m.view(), layout).unwrap();
        assert_eq!(decode(&e, &enc), m);
    }
    let row = array![[7.0, 8.0]];
    let rep = encode_matrix(&e, row.view(), Layout::RepeatedRow { times: 5 }).unwrap();
    assert_eq!(rep.block_rows(), 5);
    assert_eq!(decode(&e, &rep), row);
    assert_eq!(&e.decrypt(rep.vector())[..10], &[7.0, 8.0, 7.0, 8.0, 7.0, 8.0, 7.0, 8.0, 7.0, 8.0]);
}

#[test]
fn oversized_matrices_are_rejected() {
    let e = common::exact(8);
    let m = Array2::<f64>::zeros((3, 3));
    assert!(matches!(
        encode_matrix(&e, m.view(), Layout::FullMatrix),
        Err(Error::MatrixTooLarge { .. })
    ));
    let row = Array2::<f64>::zeros((1, 3));
    assert!(matches!(
        encode_matrix(&e, row.view(), Layout::RepeatedRow { times: 3 }),
        Err(Error::MatrixTooLarge { .. })
    ));
    let wide = Array2::<f64>::zeros((2, 9));
    assert!(encode_matrix(&e, wide.view(), Layout::RowPerCiphertext).is_err());
}

#[test]
fn shifts_need_a_packed_layout() {
    let e = common::exact(16);
    let m = Array2::<f64>::ones((2, 2));
    let rows = encode_matrix(&e, m.view(), Layout::RowPerCiphertext).unwrap();
    assert!(matches!(
        complete_column_shift(&e, &rows),
        Err(Error::WrongLayout { .. })
    ));
    assert!(matches!(sum_row_vec(&e, &rows), Err(Error::WrongLayout { .. })));
}

#[test]
fn column_shift_costs_two_rotations_and_one_level() {
    let e = Engine::traced(EngineConfig::leveled(16)).unwrap();
    let m = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
    let a = encode_matrix(&e, m.view(), Layout::FullMatrix).unwrap();
    e.set_phase("shift");
    let out = complete_column_shift(&e, &a).unwrap();
    let phase = e.depth_report().unwrap().phase("shift").unwrap().clone();
    assert_eq!(phase.ops.rotate, 2);
    assert_eq!(phase.ops.cmult, 2);
    assert_eq!(phase.ops.add, 1);
    assert_eq!(phase.depth, 1);
    assert_eq!(decode(&e, &out), array![[2.0, 3.0, 1.0], [5.0, 6.0, 4.0]]);
}

fn rotations_of(count: usize) -> usize {
    let bits = (usize::BITS - count.leading_zeros()) as usize;
    bits - 1 + count.count_ones() as usize - 1
}

#[test]
fn rotate_sum_rotation_count() {
    for count in 1..=64usize {
        let e = Engine::traced(EngineConfig::exact(64)).unwrap();
        let v = e.encrypt(&[1.0]).unwrap();
        e.set_phase("sum");
        let out = rotate_sum(&e, &v, count, 3).unwrap();
        let rot = e
            .depth_report()
            .unwrap()
            .phase("sum")
            .map_or(0, |p| p.ops.rotate);
        assert_eq!(rot as usize, rotations_of(count), "count {count}");
        // slot p collects v[p + 3t] for t < count; only v[0] is set
        let got = e.decrypt(&out);
        for p in 0..64usize {
            let want = (0..count).filter(|t| (p + 3 * t) % 64 == 0).count() as f64;
            assert_eq!(got[p], want, "count {count} slot {p}");
        }
    }
}

#[test]
fn extract_and_replicate_row() {
    let e = common::leveled(32);
    let m = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
    let a = encode_matrix(&e, m.view(), Layout::FullMatrix).unwrap();
    let row = extract_row(&e, &a, 1).unwrap();
    assert_eq!(row.depth(), 1);
    let rep: EncodedMatrix = replicate_row(&e, &row, 2, 4).unwrap();
    assert_eq!(rep.vector().depth(), 1);
    let got = e.decrypt(rep.vector());
    for t in 0..4 {
        assert!((got[2 * t] - 3.0).abs() < 1e-8 && (got[2 * t + 1] - 4.0).abs() < 1e-8);
    }
    assert!(got[8..].iter().all(|x| x.abs() < 1e-8));
    let s = extract_scalar(&e, &a, 2, 1).unwrap();
    assert!(e.decrypt(&s).iter().all(|x| (x - 6.0).abs() < 1e-8));
    assert!(matches!(extract_row(&e, &a, 3), Err(Error::IndexOutOfRange { .. })));
}

fn shape_and_values() -> impl Strategy<Value = Array2<f64>> {
    (1usize..=8, 1usize..=8).prop_flat_map(|(n, c)| {
        prop::collection::vec(-10.0f64..10.0, n * c)
            .prop_map(move |v| Array2::from_shape_vec((n, c), v).unwrap())
    })
}

proptest! {
    #[test]
    fn c_column_shifts_restore_the_matrix(m in shape_and_values()) {
        let e = common::exact(64);
        let mut a = encode_matrix(&e, m.view(), Layout::FullMatrix).unwrap();
        for _ in 0..m.ncols() {
            a = complete_column_shift(&e, &a).unwrap();
        }
        prop_assert_eq!(decode(&e, &a), m);
    }

    #[test]
    fn row_sums_total_matches(m in shape_and_values()) {
        let e = common::exact(64);
        let a = encode_matrix(&e, m.view(), Layout::FullMatrix).unwrap();
        let sums = henn::encoding::decode_block(&e, &sum_row_vec(&e, &a).unwrap(), m.nrows(), m.ncols());
        let total: f64 = m.iter().sum();
        let got: f64 = sums.column(0).iter().sum();
        prop_assert!((got - total).abs() < 1e-9);
    }
}
