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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hdclt {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> value{0};
  return value;
}
}  // namespace detail

// Worker count used by every replication-parallel loop. 0 means "auto":
// HDCLT_THREADS if set, else hardware concurrency.
inline void set_num_threads(unsigned n) { detail::thread_setting() = n; }

inline unsigned num_threads() {
  unsigned n = detail::thread_setting();
  if (n != 0) return n;
  if (const char* env = std::getenv("HDCLT_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, count). Work is handed out in index order; any
// output must be written to slot i so the result is schedule-independent.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(num_threads(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

// Evaluates f(rep) for every replication, in parallel, returning the values
// in replication order.
template <typename F>
std::vector<double> replicate(std::size_t reps, F&& f) {
  std::vector<double> out(reps);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (reps + kBlock - 1) / kBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(reps, lo + kBlock);
    for (std::size_t r = lo; r < hi; ++r) out[r] = f(r);
  });
  return out;
}

// Mean with a batch-means standard error.
struct McEstimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t reps = 0;
};

inline constexpr std::size_t kSeGroups = 30;

// Replications are split into contiguous groups; the SE is the standard
// deviation of group means over sqrt(groups). Falls back to the iid formula
// when there are fewer replications than groups.
inline McEstimate batch_estimate(std::span<const double> values,
                                 std::size_t groups = kSeGroups) {
  McEstimate est;
  est.reps = values.size();
  if (values.empty()) return est;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double n = static_cast<double>(values.size());
  est.value = sum / n;
  if (values.size() < 2) return est;
  if (values.size() < 2 * groups) {
    double ss = 0.0;
    for (double v : values) ss += (v - est.value) * (v - est.value);
    est.se = std::sqrt(ss / (n - 1.0) / n);
    return est;
  }
  std::vector<double> means(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * values.size() / groups;
    const std::size_t hi = (g + 1) * values.size() / groups;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += values[i];
    means[g] = s / static_cast<double>(hi - lo);
  }
  double ss = 0.0;
  for (double m : means) ss += (m - est.value) * (m - est.value);
  const double gg = static_cast<double>(groups);
  est.se = std::sqrt(ss / (gg - 1.0) / gg);
  return est;
}

}  // namespace hdclt
