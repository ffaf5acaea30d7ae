//! Frozen wire formats. Set `CSIPCA_BLESS=1` to rewrite the files after an
//! intentional format change.

use std::path::PathBuf;

use csipca::chanforge::{Cfr, Dataset};
use csipca::pca::{compress_ad, compress_ev, CsiReport};
use csipca::xforms::{EvMatrix, TapChannel};
use csipca::C64;
use ndarray::Array2;

fn golden(name: &str, bytes: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("CSIPCA_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, bytes).unwrap();
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(want == bytes, "{name} differs from the frozen copy");
}

/// Small dyadic values, so every platform computes identical bits.
fn fixture(rows: usize, cols: usize) -> Array2<C64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let a = ((i * 7 + j * 3) % 11) as f64 / 8.0 - 0.5;
        let b = ((i * 5 + j * 13) % 9) as f64 / 4.0 - 1.0;
        C64::new(a, b)
    })
}

#[test]
fn dataset_file() {
    let samples = (0..2)
        .map(|id| Cfr::new(fixture(4, 3).mapv(|z| z * (id + 1) as f64), 15e3, id).unwrap())
        .collect();
    let ds = Dataset::new(samples, (4, 3), 15e3, None).unwrap();
    let bytes = ds.to_bytes().unwrap();
    assert_eq!(bytes.len(), 32 + 2 * (8 + 4 * 3 * 16));
    golden("dataset.cfr", &bytes);
}

#[test]
fn ad_report_quantized() {
    let taps = TapChannel {
        data: fixture(5, 8),
        tap_indices: vec![0, 1, 2, 6, 7],
        n_full: 8,
    };
    let rep = compress_ad(&taps, 2).unwrap().quantized(8).unwrap();
    let bytes = rep.to_bytes().unwrap();
    // header 14 + N and 5 tap indices 24; each quantized payload has an
    // 18-byte header plus 2 x 8 bits per entry (5x2 and 8x2 entries).
    assert_eq!(bytes.len(), 14 + 24 + (18 + 20) + (18 + 32));
    golden("ad_report_q8.bin", &bytes);
    assert_eq!(CsiReport::from_bytes(&bytes).unwrap().to_bytes().unwrap(), bytes);
}

#[test]
fn ev_report_quantized() {
    let ev = EvMatrix { data: fixture(8, 4), rank: 1 };
    let rep = compress_ev(&ev, 3).unwrap().quantized(4).unwrap();
    let bytes = rep.to_bytes().unwrap();
    // 8x3 and 4x3 payloads at 2 x 4 bits per entry.
    assert_eq!(bytes.len(), 14 + (18 + 24) + (18 + 12));
    golden("ev_report_q4.bin", &bytes);
}
