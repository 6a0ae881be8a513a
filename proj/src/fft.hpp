#pragma once

#include <complex>
#include <vector>

namespace corrloc::detail {

/// In-place unnormalised forward DFT of a row-major cube of side n in `dim`
/// dimensions. Planning is serialised; execution is thread-safe.
void forward_dft(std::vector<std::complex<double>>& data, int dim, int n);

/// Smallest integer >= n whose only prime factors are 2, 3 and 5.
int nice_fft_size(int n);

}  // namespace corrloc::detail
