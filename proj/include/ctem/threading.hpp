#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ctem {

// Worker count for parallel sections: CTEM_JOBS env var, else hardware threads.
inline int default_jobs() {
  if (const char* env = std::getenv("CTEM_JOBS")) {
    const int j = std::atoi(env);
    if (j >= 1) return j;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Fixed chunk count used for batched forward/backward passes. Partial results
// are produced per chunk and reduced in chunk order, so outputs are
// bit-identical for any worker count.
constexpr int kBatchChunks = 8;

struct ChunkRange {
  long begin = 0;
  long end = 0;
  long size() const { return end - begin; }
};

inline std::vector<ChunkRange> fixed_chunks(long n, int chunks) {
  if (chunks < 1) chunks = 1;
  if (n < chunks) chunks = static_cast<int>(n > 0 ? n : 1);
  std::vector<ChunkRange> out(chunks);
  const long base = n / chunks;
  const long extra = n % chunks;
  long pos = 0;
  for (int c = 0; c < chunks; ++c) {
    const long len = base + (c < extra ? 1 : 0);
    out[c] = {pos, pos + len};
    pos += len;
  }
  return out;
}

// Runs fn(chunk_index) for every chunk on up to `jobs` threads. The chunk
// decomposition is owned by the caller; fn must not throw.
template <class Fn>
void parallel_chunks(int chunks, Fn&& fn, int jobs = default_jobs()) {
  if (jobs > chunks) jobs = chunks;
  if (jobs <= 1) {
    for (int c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) fn(c);
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs - 1);
  for (int j = 1; j < jobs; ++j) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
}

}  // namespace ctem
