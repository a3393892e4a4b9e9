// Link the system OpenBLAS, which bundles BLAS, CBLAS, and LAPACK symbols.
// Keeping the provider out of Cargo features avoids pulling in the *-src
// build scripts; the distro library is what actually gets used either way.
fn main() {
    println!("cargo:rustc-link-lib=dylib=openblas");
}
