// Copyright 2026 The hdclt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdclt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Product of intervals (a_j, b_j) with extended-real endpoints.
struct Rectangle {
  std::vector<double> lower;
  std::vector<double> upper;

  Rectangle() = default;
  Rectangle(std::vector<double> a, std::vector<double> b) : lower(std::move(a)), upper(std::move(b)) {
    validate();
  }

  static Rectangle whole_space(std::size_t d) {
    return Rectangle(std::vector<double>(d, -kInf), std::vector<double>(d, kInf));
  }

  static Rectangle lower_orthant(const std::vector<double>& b) {
    return Rectangle(std::vector<double>(b.size(), -kInf), b);
  }

  std::size_t dim() const { return lower.size(); }

  void validate() const {
    if (lower.size() != upper.size())
      throw std::invalid_argument("Rectangle: endpoint vectors differ in length");
    for (std::size_t j = 0; j < lower.size(); ++j) {
      if (std::isnan(lower[j]) || std::isnan(upper[j]))
        throw std::invalid_argument("Rectangle: NaN endpoint at coordinate " + std::to_string(j));
      if (lower[j] > upper[j])
        throw std::invalid_argument("Rectangle: lower > upper at coordinate " + std::to_string(j));
    }
  }

  // Membership uses the closed box; boundaries carry zero mass for
  // continuous laws and ties are resolved consistently everywhere.
  template <typename Vec>
  bool contains(const Vec& x) const {
    for (std::size_t j = 0; j < lower.size(); ++j)
      if (x[j] < lower[j] || x[j] > upper[j]) return false;
    return true;
  }

  Rectangle negated() const {
    std::vector<double> a(dim()), b(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      a[j] = -upper[j];
      b[j] = -lower[j];
    }
    return Rectangle(std::move(a), std::move(b));
  }
};

}  // namespace hdclt
