#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace strucgrad {

// Evaluation fan-out cap: STRUCGRAD_THREADS env var, else min(hardware, 8).
int eval_thread_cap();

// Runs fn(i) for i in [0, n); work is partitioned in index order so results
// written to slot i are identical regardless of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::string fmt_g17(double v);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace strucgrad
