use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use clintraj_ffi::*;

fn y_cloud() -> Vec<f64> {
    // three arms from the origin, 60 points each, small deterministic wobble
    let dirs = [[1.0, 0.0], [-0.5, 0.866], [-0.5, -0.866]];
    let mut v = Vec::new();
    for (a, d) in dirs.iter().enumerate() {
        for i in 0..60 {
            let t = 0.1 + i as f64 * 0.05;
            let w = 0.03 * ((i * 7 + a * 3) % 11) as f64 / 11.0;
            v.push(t * d[0] - w * d[1]);
            v.push(t * d[1] + w * d[0]);
        }
    }
    v
}

fn last_error() -> String {
    let p = clintraj_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn fit_query_and_free() {
    let data = y_cloud();
    let rows = data.len() / 2;
    let mut params = clintraj_default_params();
    params.n_nodes = 12;
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(clintraj_fit_tree(data.as_ptr(), rows, 2, &params, 1, &mut g), ClintrajStatus::Ok);
        assert!(!g.is_null());
        let n = clintraj_graph_n_nodes(g);
        let m = clintraj_graph_n_edges(g);
        assert_eq!(clintraj_graph_dim(g), 2);
        assert_eq!(m + 1, n, "a tree has one edge fewer than nodes");

        let mut nodes = vec![0.0; n * 2];
        assert_eq!(clintraj_graph_nodes(g, nodes.as_mut_ptr(), nodes.len()), ClintrajStatus::Ok);
        assert!(nodes.iter().all(|v| v.is_finite()));
        let mut small = vec![0.0; 1];
        assert_eq!(clintraj_graph_nodes(g, small.as_mut_ptr(), 1), ClintrajStatus::BufferTooSmall);

        let mut edges = vec![0usize; 2 * m];
        assert_eq!(clintraj_graph_edges(g, edges.as_mut_ptr(), edges.len()), ClintrajStatus::Ok);
        assert!(edges.iter().all(|&v| v < n));

        let mut ev = 0.0;
        assert_eq!(clintraj_explained_variance(g, data.as_ptr(), rows, 2, &mut ev), ClintrajStatus::Ok);
        assert!(ev > 0.9 && ev <= 1.0, "explained variance {ev}");

        let mut pt = vec![-1.0; rows];
        let mut n_traj = 0usize;
        assert_eq!(
            clintraj_pseudotime(g, data.as_ptr(), rows, 2, 0, pt.as_mut_ptr(), &mut n_traj),
            ClintrajStatus::Ok
        );
        assert!(pt.iter().all(|&t| t >= 0.0));
        assert!(n_traj >= 2);

        let mut json = ptr::null_mut();
        assert_eq!(clintraj_graph_to_json(g, &mut json), ClintrajStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(clintraj_graph_from_json(json, &mut back), ClintrajStatus::Ok);
        assert_eq!(clintraj_graph_n_nodes(back), n);
        clintraj_string_free(json);
        clintraj_graph_free(back);
        clintraj_graph_free(g);
    }
}

#[test]
fn errors_are_reported() {
    let data = y_cloud();
    let params = clintraj_default_params();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(clintraj_fit_tree(ptr::null(), 10, 2, &params, 0, &mut g), ClintrajStatus::NullPointer);
        assert!(last_error().contains("data"));
        let mut bad = params;
        bad.lambda = -1.0;
        assert_eq!(clintraj_fit_tree(data.as_ptr(), 180, 2, &bad, 0, &mut g), ClintrajStatus::InvalidArgument);
        assert!(last_error().contains("lambda"));
        assert!(g.is_null());

        let mut out = ptr::null_mut();
        let text = c"{not json";
        assert_eq!(clintraj_graph_from_json(text.as_ptr(), &mut out), ClintrajStatus::Io);
        assert_eq!(clintraj_graph_n_nodes(ptr::null()), 0);
        clintraj_graph_free(ptr::null_mut());
        clintraj_string_free(ptr::null_mut());
    }
}

#[test]
fn root_out_of_range_is_rejected() {
    let data = y_cloud();
    let rows = data.len() / 2;
    let mut params = clintraj_default_params();
    params.n_nodes = 6;
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(clintraj_fit_tree(data.as_ptr(), rows, 2, &params, 0, &mut g), ClintrajStatus::Ok);
        let mut pt = vec![0.0; rows];
        let s = clintraj_pseudotime(g, data.as_ptr(), rows, 2, 999, pt.as_mut_ptr(), ptr::null_mut());
        assert_eq!(s, ClintrajStatus::InvalidArgument);
        clintraj_graph_free(g);
    }
}

fn compiles_with(compiler: &str, lang: &str) {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"clintraj.h\"\nint main(void) { ClintrajElasticParams p = clintraj_default_params(); \
         ClintrajGraph *g = 0; ClintrajStatus s = clintraj_fit_tree(0, 0, 0, &p, 0, &g); \
         clintraj_graph_free(g); return s == CLINTRAJ_STATUS_OK; }\n",
    )
    .unwrap();
    let status = match Command::new(compiler)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
        .arg(&include)
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(e) => panic!("cannot run {compiler}: {e}"),
    };
    assert!(status.success(), "header does not compile as {lang}");
}

#[test]
fn header_compiles_as_c_and_cpp() {
    compiles_with("cc", "c");
    compiles_with("c++", "c++");
}
