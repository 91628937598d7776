//! Thin wrappers over BLAS routines that ndarray does not expose.

use std::os::raw::{c_char, c_int};

use cblas_sys::{cblas_dsyrk, CblasRowMajor, CblasTrans, CblasUpper};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// `upper(c) += a^T a` for a row-major `k x n` block `a` and `n x n` `c`.
///
/// Only the upper triangle of `c` is touched; call [`mirror_upper`] before
/// handing `c` to routines that read the full matrix.
pub fn syrk_upper_acc(c: &mut Array2<f64>, a: ArrayView2<'_, f64>) {
    let (k, n) = a.dim();
    assert_eq!(c.dim(), (n, n), "syrk output must be n x n");
    if k == 0 || n == 0 {
        return;
    }
    let a = a.as_standard_layout();
    assert!(c.is_standard_layout());
    let a_ptr = a.as_ptr();
    let c_ptr = c.as_mut_ptr();
    // SAFETY: both buffers are contiguous row-major with the strides passed below,
    // `a` holds k*n and `c` holds n*n elements.
    unsafe {
        cblas_dsyrk(
            CblasRowMajor,
            CblasUpper,
            CblasTrans,
            n as i32,
            k as i32,
            1.0,
            a_ptr,
            n as i32,
            1.0,
            c_ptr,
            n as i32,
        );
    }
}

/// Copies the upper triangle onto the lower one.
pub fn mirror_upper(c: &mut Array2<f64>) {
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            c[[i, j]] = c[[j, i]];
        }
    }
}

/// Eigendecomposition of a symmetric matrix by LAPACK's divide-and-conquer
/// driver. Returns ascending eigenvalues and the eigenvectors as columns.
///
/// Only the upper triangle of `a` is read.
pub fn eigh_dc(a: Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "symmetric matrix columns",
            expected: n,
            found: a.ncols(),
        });
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let n_c = c_int::try_from(n).map_err(|_| Error::NumericalFailure(format!("matrix of order {n} too large")))?;
    // row-major upper is column-major lower; the buffer holds V^T on return
    let mut buf = a.as_standard_layout().into_owned().into_raw_vec();
    let mut w = vec![0.0; n];
    let (jobz, uplo) = (b'V' as c_char, b'L' as c_char);
    let mut info: c_int = 0;
    let mut work_q = 0.0;
    let mut iwork_q: c_int = 0;
    let query: c_int = -1;
    // SAFETY: workspace query; all pointers are valid for the sizes LAPACK reads.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_c,
            buf.as_mut_ptr(),
            &n_c,
            w.as_mut_ptr(),
            &mut work_q,
            &query,
            &mut iwork_q,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NumericalFailure(format!(
            "dsyevd workspace query failed: info = {info}"
        )));
    }
    let lwork = work_q as c_int;
    let liwork = iwork_q;
    let mut work = vec![0.0; lwork.max(1) as usize];
    let mut iwork: Vec<c_int> = vec![0; liwork.max(1) as usize];
    // SAFETY: buffers sized per the workspace query; `buf` is n*n, `w` is n.
    unsafe {
        lapack_sys::dsyevd_(
            &jobz,
            &uplo,
            &n_c,
            buf.as_mut_ptr(),
            &n_c,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NumericalFailure(format!(
            "dsyevd failed to converge: info = {info}"
        )));
    }
    let vt = Array2::from_shape_vec((n, n), buf).expect("n*n buffer");
    Ok((Array1::from(w), vt.reversed_axes()))
}

extern "C" {
    fn openblas_get_corename() -> *const c_char;
}

/// Name of the kernel family OpenBLAS selected at load time.
pub fn blas_core_name() -> String {
    // SAFETY: OpenBLAS returns a static NUL-terminated string.
    unsafe {
        let p = openblas_get_corename();
        if p.is_null() {
            return String::new();
        }
        std::ffi::CStr::from_ptr(p).to_string_lossy().into_owned()
    }
}

/// Kernel families that predate AVX; OpenBLAS falls back to these when it
/// does not recognise a newer CPU model.
const PRE_AVX_CORES: &[&str] = &[
    "Prescott",
    "Core2",
    "Penryn",
    "Dunnington",
    "Nehalem",
    "Katmai",
    "Banias",
    "Atom",
];

/// Environment override that would give OpenBLAS faster kernels on this CPU,
/// if it chose a pre-AVX fallback and the user has not picked a core type.
///
/// OpenBLAS reads `OPENBLAS_CORETYPE` only when it is loaded, so applying the
/// suggestion means restarting the process.
pub fn suggested_blas_env() -> Option<(&'static str, &'static str)> {
    const KEY: &str = "OPENBLAS_CORETYPE";
    if std::env::var_os(KEY).is_some() {
        return None;
    }
    let core = blas_core_name();
    if !PRE_AVX_CORES.iter().any(|c| core.eq_ignore_ascii_case(c)) {
        return None;
    }
    cpu_core_type().map(|t| (KEY, t))
}

#[cfg(target_arch = "x86_64")]
fn cpu_core_type() -> Option<&'static str> {
    if is_x86_feature_detected!("avx512f")
        && is_x86_feature_detected!("avx512dq")
        && is_x86_feature_detected!("avx512bw")
        && is_x86_feature_detected!("avx512vl")
    {
        Some("SkylakeX")
    } else if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
        Some("Haswell")
    } else {
        None
    }
}

#[cfg(not(target_arch = "x86_64"))]
fn cpu_core_type() -> Option<&'static str> {
    None
}

/// Restarts the current executable with [`suggested_blas_env`] applied, if
/// there is a suggestion. Returns only when no restart happens.
pub fn reexec_with_tuned_blas() {
    let Some((key, value)) = suggested_blas_env() else {
        return;
    };
    let Ok(exe) = std::env::current_exe() else {
        return;
    };
    let mut cmd = std::process::Command::new(exe);
    cmd.args(std::env::args_os().skip(1)).env(key, value);
    log::debug!("restarting with {key}={value}");
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        // only returns on failure, in which case we carry on untuned
        let _ = cmd.exec();
    }
    #[cfg(not(unix))]
    if let Ok(status) = cmd.status() {
        std::process::exit(status.code().unwrap_or(1));
    }
}
