//! The official MNIST files against values frozen by `scripts/idx_reference.py`.
//! Skipped with a message when the files have not been fetched.

use std::path::PathBuf;

use potatoes::data::{read_idx, IDX_MAGIC_IMAGES, IDX_MAGIC_LABELS};
use serde_json::Value;

fn mnist_dir() -> PathBuf {
    std::env::var_os("POTATOES_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

#[test]
fn official_files_match_reference_reader() {
    let dir = mnist_dir();
    if !dir.join("train-images-idx3-ubyte").is_file() {
        eprintln!("skipping: no MNIST files in {} (run scripts/fetch_mnist.sh)", dir.display());
        return;
    }
    let reference: Value = serde_json::from_str(include_str!("data/idx_reference.json")).unwrap();
    for split in ["train", "t10k"] {
        let r = &reference[split];
        assert_eq!(r["image_magic"], IDX_MAGIC_IMAGES);
        assert_eq!(r["label_magic"], IDX_MAGIC_LABELS);
        let images = read_idx(dir.join(format!("{split}-images-idx3-ubyte"))).unwrap();
        let labels = read_idx(dir.join(format!("{split}-labels-idx1-ubyte"))).unwrap();
        let dims: Vec<usize> = r["dims"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
        assert_eq!(images.dims, dims);
        assert_eq!(labels.dims, vec![dims[0]]);
        for p in r["pixels"].as_array().unwrap() {
            let p: Vec<usize> = p.as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
            assert_eq!(images.item(p[0])[p[1] * dims[2] + p[2]] as usize, p[3], "{split} pixel {p:?}");
        }
        for l in r["labels"].as_array().unwrap() {
            assert_eq!(labels.data[l[0].as_u64().unwrap() as usize] as u64, l[1].as_u64().unwrap());
        }
        let mut counts = vec![0u64; 10];
        for &l in &labels.data {
            counts[l as usize] += 1;
        }
        let want: Vec<u64> = r["class_counts"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        assert_eq!(counts, want);
    }
}
