#pragma once

#include "stcl/kernels.hpp"

namespace stcl::kernels {

#if defined(STCL_HAVE_AVX2_KERNELS)
template <class T>
const Table<T>& avx2_table();
#endif

}  // namespace stcl::kernels
