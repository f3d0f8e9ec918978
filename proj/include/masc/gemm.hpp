#pragma once

// Row-major GEMM front end for the conv/linear kernels. Eigen does the
// packing and SIMD; everything here stays single-threaded and bit-exact
// run to run.

#include <Eigen/Core>

namespace masc::diff {

enum class Trans { N, T };

// C[m x n] (+)= A op B with row-major buffers.
template <typename S>
void gemm(Trans ta, Trans tb, int m, int n, int k, const S* a, const S* b, S* c,
          bool accumulate) {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<Mat>;
    using Map = Eigen::Map<const Mat>;
    CMap C(c, m, n);
    auto run = [&](const auto& prod) {
        if (accumulate)
            C.noalias() += prod;
        else
            C.noalias() = prod;
    };
    if (ta == Trans::N && tb == Trans::N)
        run(Map(a, m, k) * Map(b, k, n));
    else if (ta == Trans::N && tb == Trans::T)
        run(Map(a, m, k) * Map(b, n, k).transpose());
    else if (ta == Trans::T && tb == Trans::N)
        run(Map(a, k, m).transpose() * Map(b, k, n));
    else
        run(Map(a, k, m).transpose() * Map(b, n, k).transpose());
}

}  // namespace masc::diff
