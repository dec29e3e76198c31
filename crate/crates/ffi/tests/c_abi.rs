use std::ffi::{c_char, CString};
use std::ptr;

use vocab_compat_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { vc_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    let bytes: Vec<u8> = buf.iter().take_while(|&&c| c != 0).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

const TSV: &str = "1\tthe cat sat on the mat\n2\tthe dog sat on the log\n3\ta cat and a dog\n";

fn corpus() -> *mut VcCorpus {
    let mut c = ptr::null_mut();
    let lang = cstr("eng");
    let st = unsafe { vc_corpus_from_tsv(TSV.as_ptr(), TSV.len(), lang.as_ptr(), &mut c) };
    assert_eq!(st, VcStatus::Ok);
    c
}

#[test]
fn corpus_vocab_and_rates() {
    unsafe {
        let c = corpus();
        let mut len = 0;
        assert_eq!(vc_corpus_len(c, &mut len), VcStatus::Ok);
        assert_eq!(len, 3);
        let mut n_min = 0;
        assert_eq!(vc_corpus_min_vocab_size(c, &mut n_min), VcStatus::Ok);

        let mut v = ptr::null_mut();
        assert_eq!(vc_vocab_train(c, n_min + 10, &mut v), VcStatus::Ok);
        let mut vlen = 0;
        assert_eq!(vc_vocab_len(v, &mut vlen), VcStatus::Ok);
        assert_eq!(vlen, n_min + 10);

        let text = cstr("the cat");
        let mut ids = [0u32; 1];
        let mut needed = 0;
        assert_eq!(vc_vocab_encode(v, text.as_ptr(), ids.as_mut_ptr(), 1, &mut needed), VcStatus::BufferTooSmall);
        assert!(needed >= 2);
        let mut ids = vec![0u32; needed];
        assert_eq!(vc_vocab_encode(v, text.as_ptr(), ids.as_mut_ptr(), ids.len(), &mut needed), VcStatus::Ok);

        let mut p = ptr::null_mut();
        assert_eq!(vc_profile_build(c, 1000, &mut p), VcStatus::Ok);
        let mut r = 0.0;
        assert_eq!(vc_profile_acr(p, n_min, &mut r), VcStatus::Ok);
        assert_eq!(r, 1.0);
        let mut a = 0.0;
        assert_eq!(vc_profile_asymptote(p, &mut a), VcStatus::Ok);
        // 17 words over 45 characters
        assert!((a - 17.0 / 45.0).abs() < 1e-12);
        assert_ne!(vc_profile_acr(p, 1, &mut r), VcStatus::Ok);

        vc_profile_free(p);
        vc_vocab_free(v);
        vc_corpus_free(c);
    }
}

#[test]
fn model_functions() {
    let a = 0.3;
    let beta = -0.8;
    let n_min = 50usize;
    let sizes = [50usize, 100, 400, 1600];
    let rates: Vec<f64> = sizes
        .iter()
        .map(|&n| (1.0 - a) * (n as f64 / n_min as f64).powf(beta) + a)
        .collect();
    unsafe {
        let mut b = 0.0;
        assert_eq!(vc_fit_beta(sizes.as_ptr(), rates.as_ptr(), 4, a, n_min, &mut b), VcStatus::Ok);
        assert!((b - beta).abs() < 1e-9);
        let mut n = 0;
        assert_eq!(vc_invert_model(beta, a, n_min, 1.0, &mut n), VcStatus::Ok);
        assert_eq!(n, n_min);
        assert_eq!(vc_invert_model(beta, a, n_min, 0.2, &mut n), VcStatus::Numeric);
        assert!(last_error().contains("unreachable"));
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 7.0];
        let mut r = 0.0;
        assert_eq!(vc_pearson(x.as_ptr(), y.as_ptr(), 3, &mut r), VcStatus::Ok);
        assert!(r > 0.99);
        let mut g = 0.0;
        assert_eq!(vc_svg(x.as_ptr(), 3, x.as_ptr(), 3, 3, &mut g), VcStatus::Ok);
        assert_eq!(g, 0.0);
        assert_eq!(vc_svg(x.as_ptr(), 3, y.as_ptr(), 2, 3, &mut g), VcStatus::Data);
    }
}

#[test]
fn embeddings_round_trip() {
    unsafe {
        let c = corpus();
        let mut v = ptr::null_mut();
        assert_eq!(vc_vocab_train(c, 60, &mut v), VcStatus::Ok);
        let mut cfg = vc_embed_config_default();
        assert_eq!(cfg.dim, 100);
        cfg.dim = 40;
        cfg.epochs = 2;
        let mut e = ptr::null_mut();
        assert_eq!(vc_embedding_train(c, v, cfg, 1, &mut e), VcStatus::Ok);
        let (mut rows, mut cols) = (0, 0);
        assert_eq!(vc_embedding_shape(e, &mut rows, &mut cols), VcStatus::Ok);
        assert_eq!(cols, 40);
        let mut s = vec![0.0; 40];
        let mut len = 0;
        assert_eq!(vc_embedding_singular_values(e, s.as_mut_ptr(), s.len(), &mut len), VcStatus::Ok);
        assert_eq!(len, rows.min(cols));
        assert!(s.windows(2).all(|w| w[0] >= w[1]));

        let dir = tempfile::tempdir().unwrap();
        let path = cstr(dir.path().join("e.bin").to_str().unwrap());
        assert_eq!(vc_embedding_save(e, path.as_ptr()), VcStatus::Ok);
        let mut e2 = ptr::null_mut();
        assert_eq!(vc_embedding_load(path.as_ptr(), &mut e2), VcStatus::Ok);
        let mut s2 = vec![0.0; 40];
        assert_eq!(vc_embedding_singular_values(e2, s2.as_mut_ptr(), s2.len(), &mut len), VcStatus::Ok);
        assert_eq!(s, s2);

        cfg.dim = 10;
        let mut bad = ptr::null_mut();
        assert_eq!(vc_embedding_train(c, v, cfg, 1, &mut bad), VcStatus::Usage);
        assert!(bad.is_null());

        vc_embedding_free(e);
        vc_embedding_free(e2);
        vc_vocab_free(v);
        vc_corpus_free(c);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(vc_corpus_load(ptr::null(), ptr::null(), false, &mut c), VcStatus::NullPointer);
        let missing = cstr("/nonexistent/corpus.tsv");
        let lang = cstr("x");
        assert_eq!(vc_corpus_load(missing.as_ptr(), lang.as_ptr(), false, &mut c), VcStatus::Io);
        assert!(last_error().contains("/nonexistent/corpus.tsv"));
        let bad = [0xffu8, 0xfe, 0];
        assert_eq!(vc_corpus_load(bad.as_ptr() as *const c_char, lang.as_ptr(), false, &mut c), VcStatus::InvalidUtf8);
        let empty = "";
        assert_eq!(vc_corpus_from_tsv(empty.as_ptr(), 0, lang.as_ptr(), &mut c), VcStatus::Data);
        vc_corpus_free(ptr::null_mut());
        assert!(!vc_version().is_null());
    }
}
