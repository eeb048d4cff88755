/* Copyright 2026 The crossmatch Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Helpers shared by the unit tests and the acceptance suite: seeded random
// maps and brute-force reference implementations that do not call into the
// library's own statistics code.

#ifndef CROSSMATCH_TESTS_TEST_UTIL_H_
#define CROSSMATCH_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "crossmatch/featurize.h"
#include "crossmatch/tensor.h"

namespace crossmatch::testing {

inline std::vector<double> RandomValues(std::mt19937_64& rng, std::size_t n,
                                        double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline FeatureMap RandomMap(std::mt19937_64& rng, int c, int h, int w,
                            std::string tag = {}) {
  return FeatureMap(c, h, w,
                    RandomValues(rng, static_cast<std::size_t>(c) * h * w), tag);
}

// Gaussian-blurred noise, smooth enough for interpolation round trips.
inline FeatureMap SmoothMap(std::mt19937_64& rng, int c, int h, int w,
                            double sigma) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> values;
  for (int k = 0; k < c; ++k) {
    std::vector<double> plane(static_cast<std::size_t>(h) * w);
    for (double& x : plane) x = n(rng);
    const auto blurred = GaussianBlur(plane, h, w, sigma);
    values.insert(values.end(), blurred.begin(), blurred.end());
  }
  return FeatureMap(c, h, w, std::move(values));
}

// Sample Pearson coefficient by the textbook formula.
inline double PearsonOracle(const std::vector<double>& x,
                            const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline std::vector<double> Plane(const FeatureMap& m, int c) {
  const auto s = m.channel(c);
  return {s.begin(), s.end()};
}

// Values of channel c inside a rectangle, row-major.
inline std::vector<double> Window(const FeatureMap& m, int c, int top, int left,
                                  int h, int w) {
  std::vector<double> out;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) out.push_back(m.at(c, top + i, left + j));
  }
  return out;
}

inline double MaxRelativeError(const std::vector<double>& a,
                               const std::vector<double>& b,
                               double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("crossmatch_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const {
    return path_ / leaf;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace crossmatch::testing

#endif  // CROSSMATCH_TESTS_TEST_UTIL_H_
