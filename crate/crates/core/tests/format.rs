use std::path::Path;

use intelm::data::Preprocessing;
use intelm::format::{decode, encode, read_model, write_model, ModelFile};
use intelm::{DenseMatrix, Error, FloatModel, IntegerBeta, ModelMeta, QuantizedModel, TernaryWeights, WeightMatrix};
use proptest::prelude::*;

fn meta() -> impl Strategy<Value = ModelMeta> {
    (any::<u64>(), any::<bool>(), any::<bool>(), "[ -~]{0,40}").prop_map(|(seed, z, l2, id)| ModelMeta {
        seed,
        preprocessing: Preprocessing { zero_mean: z, l2_normalize: l2 },
        prng_id: id,
    })
}

fn float_model() -> impl Strategy<Value = FloatModel> {
    (1usize..12, 1usize..12, 1usize..5, any::<bool>(), 1e-6f64..1e6, meta()).prop_flat_map(|(n, l, m, ternary, gamma, meta)| {
        let w = if ternary {
            prop::collection::vec(-1i8..=1, n * l)
                .prop_map(move |v| WeightMatrix::Ternary(TernaryWeights::from_vec(n, l, v).unwrap()))
                .boxed()
        } else {
            prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, n * l)
                .prop_map(move |v| WeightMatrix::Continuous(DenseMatrix::from_vec(n, l, v).unwrap()))
                .boxed()
        };
        (w, prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, l * m)).prop_map(move |(w, b)| {
            FloatModel::new(w, DenseMatrix::from_vec(l, m, b).unwrap(), gamma, meta.clone()).unwrap()
        })
    })
}

fn quantized_model() -> impl Strategy<Value = QuantizedModel> {
    (1usize..12, 1usize..12, 1usize..5, 0u32..20, meta()).prop_flat_map(|(n, l, m, step, meta)| {
        (
            prop::collection::vec(-1i8..=1, n * l),
            prop::collection::vec(-(1i64 << 31) + 1..(1i64 << 31), l * m),
            1e-12f64..1.0,
            -255i32..=0,
            0i32..=255,
        )
            .prop_map(move |(w, b, tau, lo, hi)| {
                QuantizedModel::new(
                    TernaryWeights::from_vec(n, l, w).unwrap(),
                    IntegerBeta::new(l, m, b, tau, step).unwrap(),
                    (lo, hi),
                    0.5,
                    meta.clone(),
                )
                .unwrap()
            })
    })
}

fn bits(m: &FloatModel) -> Vec<u64> {
    m.beta().as_slice().iter().chain(m.weights().to_dense().as_slice()).map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn float_models_round_trip_bit_exact(model in float_model()) {
        let bytes = encode(&ModelFile::Float(model.clone())).unwrap();
        let back = decode(&bytes, Path::new("mem")).unwrap();
        let ModelFile::Float(back) = back else { panic!("kind changed") };
        prop_assert_eq!(bits(&back), bits(&model));
        prop_assert_eq!(back.gamma().to_bits(), model.gamma().to_bits());
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(encode(&ModelFile::Float(back)).unwrap(), bytes);
    }

    #[test]
    fn quantized_models_round_trip(model in quantized_model()) {
        let bytes = encode(&ModelFile::Quantized(model.clone())).unwrap();
        let back = decode(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &ModelFile::Quantized(model));
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn any_truncation_is_rejected(model in float_model(), cut in 1usize..64) {
        let bytes = encode(&ModelFile::Float(model)).unwrap();
        prop_assume!(cut <= bytes.len());
        let is_format = matches!(decode(&bytes[..bytes.len() - cut], Path::new("t")), Err(Error::Format { .. }));
        prop_assert!(is_format);
    }
}

#[test]
fn corrupt_headers_are_located() {
    let model = FloatModel::new(
        WeightMatrix::Ternary(TernaryWeights::from_vec(1, 1, vec![1]).unwrap()),
        DenseMatrix::from_vec(1, 1, vec![0.5]).unwrap(),
        1.0,
        ModelMeta::default(),
    )
    .unwrap();
    let good = encode(&ModelFile::Float(model)).unwrap();
    let offset = |bytes: &[u8]| match decode(bytes, Path::new("c")) {
        Err(Error::Format { offset, .. }) => offset,
        other => panic!("{other:?}"),
    };
    let mut b = good.clone();
    b[0] = b'X';
    assert_eq!(offset(&b), 0);
    let mut b = good.clone();
    b[4] = 9;
    assert_eq!(offset(&b), 4);
    let mut b = good.clone();
    b[6] = 7;
    assert_eq!(offset(&b), 6);
    let mut b = good.clone();
    b.push(0);
    assert_eq!(offset(&b), good.len() as u64);
}

#[test]
fn existing_files_are_not_overwritten() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ielm");
    let model = ModelFile::Float(
        FloatModel::new(
            WeightMatrix::Continuous(DenseMatrix::from_vec(1, 1, vec![0.25]).unwrap()),
            DenseMatrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap(),
            2.0,
            ModelMeta::default(),
        )
        .unwrap(),
    );
    write_model(&path, &model, false).unwrap();
    assert!(matches!(write_model(&path, &model, false), Err(Error::Io { .. })));
    write_model(&path, &model, true).unwrap();
    assert_eq!(read_model(&path).unwrap(), model);
}
