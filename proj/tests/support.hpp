#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ocl/cohort.hpp"
#include "ocl/matrix.hpp"
#include "ocl/random.hpp"

namespace ocl::test {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m = random_matrix(rng, rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double n = 0.0;
    for (double v : m.row(r)) n += v * v;
    n = std::sqrt(n);
    for (double& v : m.row(r)) v /= n;
  }
  return m;
}

inline std::vector<std::size_t> random_ids(Rng& rng, std::size_t n, std::size_t bound) {
  std::vector<std::size_t> ids(n);
  for (auto& id : ids) id = static_cast<std::size_t>(rng.below(bound));
  return ids;
}

/// ||a - b|| / max(||a||, ||b||); zero when both vanish.
inline double relative_error(const Matrix& a, const Matrix& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    diff += d * d;
    na += a.values()[i] * a.values()[i];
    nb += b.values()[i] * b.values()[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

/// Central differences of f around x, entry by entry.
inline Matrix central_difference(const std::function<double(const Matrix&)>& f, Matrix x,
                                 double h = 1e-5) {
  Matrix grad(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x.values()[i];
    x.values()[i] = keep + h;
    const double up = f(x);
    x.values()[i] = keep - h;
    const double down = f(x);
    x.values()[i] = keep;
    grad.values()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ocl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small hand-built cohort: three modalities, two ROIs, labels in {0,1,2}.
inline Cohort tiny_cohort(std::size_t subjects, std::uint64_t seed, double missing = 0.3) {
  Cohort c;
  c.manifest.modalities = {"A", "B", "C"};
  c.manifest.labels = {"L0", "L1", "L2"};
  c.manifest.num_rois = 2;
  Rng rng(seed);
  for (std::size_t k = 0; k < subjects; ++k) {
    Subject s;
    s.id = "s" + std::to_string(k);
    s.label = k % 3;
    s.features.resize(3);
    for (std::size_t t = 0; t < 3; ++t) {
      if (t != k % 3 && rng.uniform() < missing) continue;
      s.features[t] = std::vector<double>{static_cast<double>(s.label) + 0.1 * rng.normal(),
                                          10.0 * t + rng.normal()};
    }
    c.subjects.push_back(std::move(s));
  }
  return c;
}

}  // namespace ocl::test
