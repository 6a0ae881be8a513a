#include "fft.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>

#include <fftw3.h>

#include "corrloc/errors.hpp"

namespace corrloc::detail {

namespace {
std::mutex planner_mutex;
}

void forward_dft(std::vector<std::complex<double>>& data, int dim, int n) {
  int dims[3] = {n, n, n};
  const std::size_t bytes = data.size() * sizeof(fftw_complex);
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(bytes));
  if (!buf) throw SizeError("fft: allocation failed");
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    plan = fftw_plan_dft(dim, dims, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  std::memcpy(buf, data.data(), bytes);
  fftw_execute(plan);
  std::memcpy(static_cast<void*>(data.data()), buf, bytes);
  {
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
}

int nice_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

}  // namespace corrloc::detail
