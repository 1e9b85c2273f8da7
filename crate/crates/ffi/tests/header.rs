use std::path::Path;
use std::process::Command;

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/prunerank.h")).unwrap()
}

#[test]
fn header_declares_the_abi() {
    let h = header();
    for decl in [
        "typedef struct PrPcaModel PrPcaModel;",
        "typedef struct PrTransform PrTransform;",
        "typedef struct PrIndex PrIndex;",
        "PR_STATUS_OK = 0",
        "PR_STATUS_PANIC = 11",
        "const char *pr_last_error_message(void);",
        "void pr_model_free(struct PrPcaModel *model);",
        "enum PrStatus pr_wilcoxon(",
        "double p_two_tailed;",
    ] {
        assert!(h.contains(decl), "missing `{decl}`");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"prunerank.h\"\n\
         int check(const double *x, size_t n) {\n\
           PrPcaModel *m = 0;\n\
           PrWilcoxon w;\n\
           if (pr_model_fit(x, n, 1, 0, 1, &m) != PR_STATUS_OK) return 1;\n\
           pr_model_free(m);\n\
           return pr_wilcoxon(x, x, n, &w) == PR_STATUS_OK ? 0 : 2;\n\
         }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(Path::new(env!("CARGO_MANIFEST_DIR")).join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
