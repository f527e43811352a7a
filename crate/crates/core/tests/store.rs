use std::collections::{BTreeMap, HashMap};

use proptest::prelude::*;
use safetensors::tensor::TensorView;
use safetensors::{Dtype as StDtype, SafeTensors};
use visionfuse_core::store::{decode_safetensors, encode_safetensors, LoadOptions};
use visionfuse_core::{load_safetensors, save_safetensors, validate_compatibility, Dtype, ModelWeights, Tensor};

fn st_dtype(d: Dtype) -> StDtype {
    match d {
        Dtype::F32 => StDtype::F32,
        Dtype::F16 => StDtype::F16,
        Dtype::BF16 => StDtype::BF16,
    }
}

fn dtype_strategy() -> impl Strategy<Value = Dtype> {
    prop_oneof![Just(Dtype::F32), Just(Dtype::F16), Just(Dtype::BF16)]
}

fn tensor_strategy() -> impl Strategy<Value = Tensor> {
    (dtype_strategy(), prop::collection::vec(0usize..5, 0..4)).prop_flat_map(|(dtype, shape)| {
        let n: usize = shape.iter().product();
        prop::collection::vec(-1000.0f32..1000.0, n)
            .prop_map(move |values| Tensor::new(dtype, shape.clone(), values).unwrap())
    })
}

fn model_strategy() -> impl Strategy<Value = ModelWeights> {
    (
        prop::collection::btree_map("[a-z]{1,5}(\\.[a-z0-9_]{1,4}){0,2}", tensor_strategy(), 0..8),
        prop::collection::btree_map("[a-z]{1,6}", "[ -~]{0,8}", 0..3),
    )
        .prop_map(|(tensors, meta)| {
            let mut w = ModelWeights::from_entries(tensors).unwrap();
            for (k, v) in meta {
                w.set_metadata(k, v);
            }
            w
        })
}

proptest! {
    #[test]
    fn round_trip_is_bit_exact_and_canonical(w in model_strategy()) {
        let bytes = encode_safetensors(&w).unwrap();
        let back = decode_safetensors(&bytes, LoadOptions::default()).unwrap();
        prop_assert!(back.warnings.is_empty());
        prop_assert_eq!(&back.weights, &w);
        prop_assert_eq!(back.weights.fingerprint(), w.fingerprint());
        prop_assert_eq!(encode_safetensors(&back.weights).unwrap(), bytes);
    }

    #[test]
    fn reference_reader_agrees(w in model_strategy()) {
        let bytes = encode_safetensors(&w).unwrap();
        let st = SafeTensors::deserialize(&bytes).unwrap();
        prop_assert_eq!(st.len(), w.len());
        for (name, t) in w.iter() {
            let view = st.tensor(name).unwrap();
            prop_assert_eq!(view.dtype(), st_dtype(t.dtype()));
            prop_assert_eq!(view.shape(), t.shape());
            let mut expected = Vec::new();
            for &v in t.values() {
                match t.dtype() {
                    Dtype::F32 => expected.extend_from_slice(&v.to_le_bytes()),
                    Dtype::F16 => expected.extend_from_slice(&half::f16::from_f32(v).to_le_bytes()),
                    Dtype::BF16 => expected.extend_from_slice(&half::bf16::from_f32(v).to_le_bytes()),
                }
            }
            prop_assert_eq!(view.data(), expected.as_slice());
        }
        let (_, meta) = SafeTensors::read_metadata(&bytes).unwrap();
        let got: BTreeMap<String, String> = meta.metadata().clone().unwrap_or_default().into_iter().collect();
        prop_assert_eq!(&got, w.metadata());
    }

    #[test]
    fn reads_reference_writer_output(w in model_strategy()) {
        let data: Vec<(String, Vec<u8>, StDtype, Vec<usize>)> = w
            .iter()
            .map(|(name, t)| {
                let mut bytes = Vec::new();
                for &v in t.values() {
                    match t.dtype() {
                        Dtype::F32 => bytes.extend_from_slice(&v.to_le_bytes()),
                        Dtype::F16 => bytes.extend_from_slice(&half::f16::from_f32(v).to_le_bytes()),
                        Dtype::BF16 => bytes.extend_from_slice(&half::bf16::from_f32(v).to_le_bytes()),
                    }
                }
                (name.to_string(), bytes, st_dtype(t.dtype()), t.shape().to_vec())
            })
            .collect();
        let views: Vec<(String, TensorView<'_>)> = data
            .iter()
            .map(|(n, b, d, s)| (n.clone(), TensorView::new(*d, s.clone(), b).unwrap()))
            .collect();
        let meta: Option<HashMap<String, String>> = if w.metadata().is_empty() {
            None
        } else {
            Some(w.metadata().clone().into_iter().collect())
        };
        let bytes = safetensors::serialize(views, &meta).unwrap();
        let back = decode_safetensors(&bytes, LoadOptions::default()).unwrap().weights;
        prop_assert_eq!(back.fingerprint(), w.fingerprint());
        prop_assert_eq!(back.metadata(), w.metadata());
        // Re-saving normalises to the canonical layout.
        prop_assert_eq!(encode_safetensors(&back).unwrap(), encode_safetensors(&w).unwrap());
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.safetensors");
    let mut w = ModelWeights::from_entries([
        ("layers.0.w", Tensor::new(Dtype::BF16, vec![2, 3], vec![1.0, -2.5, 3.0, 0.0, 7.0, -0.125]).unwrap()),
        ("scale", Tensor::scalar(Dtype::F32, 0.5).unwrap()),
    ])
    .unwrap();
    w.set_metadata("format", "pt");
    save_safetensors(&w, &path).unwrap();
    let back = load_safetensors(&path).unwrap();
    assert_eq!(back, w);
    assert!(validate_compatibility(&w, &back).is_compatible());
    assert_eq!(std::fs::read(&path).unwrap(), encode_safetensors(&w).unwrap());
}

#[test]
fn header_example_layout() {
    let payload = [1.0f32.to_le_bytes(), 2.0f32.to_le_bytes()].concat();
    let loose = r#"{"w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]}}"#;
    let mut file = (loose.len() as u64).to_le_bytes().to_vec();
    file.extend_from_slice(loose.as_bytes());
    file.extend_from_slice(&payload);
    let w = decode_safetensors(&file, LoadOptions::default()).unwrap().weights;
    assert_eq!(w.get("w").unwrap().values(), &[1.0, 2.0]);
    assert_eq!(w.get("w").unwrap().dtype(), Dtype::F32);

    // Canonical output sorts every key, nested ones included.
    let bytes = encode_safetensors(&w).unwrap();
    let header = r#"{"w":{"data_offsets":[0,8],"dtype":"F32","shape":[2]}}"#;
    let len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    assert_eq!(&bytes[8..8 + len], header.as_bytes());
    assert_eq!(&bytes[8 + len..], payload.as_slice());
}

#[test]
fn truncated_files_are_errors() {
    let w = ModelWeights::from_entries([("w", Tensor::new(Dtype::F16, vec![4], vec![1.0; 4]).unwrap())]).unwrap();
    let bytes = encode_safetensors(&w).unwrap();
    for cut in [0, 4, 8, 20, bytes.len() - 1] {
        assert!(decode_safetensors(&bytes[..cut], LoadOptions::default()).is_err(), "cut at {cut}");
    }
}
