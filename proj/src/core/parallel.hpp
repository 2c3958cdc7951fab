// Copyright 2026 The bnparam Authors.
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

#ifndef BNPARAM_SRC_CORE_PARALLEL_HPP
#define BNPARAM_SRC_CORE_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bnp::detail {

inline constexpr std::size_t kBlockSize = 64;

inline std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

/// Runs fn(block, begin, end) for every fixed-size block of [0, n). Blocks
/// are claimed dynamically by worker threads; callers keep per-block results
/// and reduce them in block order. If any block throws, the exception of the
/// lowest-numbered failing block is rethrown.
template <typename Fn>
void for_each_block(std::size_t n, Fn&& fn) {
  const std::size_t blocks = block_count(n);
  if (blocks == 0) return;
  const std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  const std::size_t workers = std::min(hw, blocks);

  std::vector<std::exception_ptr> errors(blocks);
  auto run = [&](std::size_t b) {
    try {
      const std::size_t begin = b * kBlockSize;
      fn(b, begin, std::min(n, begin + kBlockSize));
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };

  if (workers == 1) {
    for (std::size_t b = 0; b < blocks; ++b) run(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t b; (b = next.fetch_add(1)) < blocks;) run(b);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace bnp::detail

#endif  // BNPARAM_SRC_CORE_PARALLEL_HPP
