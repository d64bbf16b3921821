/*
 Copyright 2026 The riskpmp Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstddef>
#include <functional>

namespace riskpmp {

// Number of worker threads used by path-parallel loops. Results never depend
// on this value: every path writes only its own slot and reductions happen
// afterwards in path order.
std::size_t thread_count() noexcept;
void set_thread_count(std::size_t threads) noexcept;

// Reads RISKPMP_THREADS if set; returns the value applied.
std::size_t configure_threads_from_env();

// Calls body(begin, end) on contiguous chunks of [0, count).
void parallel_for_chunks(std::size_t count,
                         const std::function<void(std::size_t, std::size_t)>& body);

template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    parallel_for_chunks(count, [&body](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) body(i);
    });
}

}  // namespace riskpmp
