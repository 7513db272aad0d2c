#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "archloop/corpus.hpp"
#include "archloop/hash.hpp"
#include "archloop/shingle.hpp"
#include "archloop/simulated.hpp"

namespace testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("archloop-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
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

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Shingle set of arbitrary 64-bit elements, normalized the way shingle() does.
inline archloop::ShingleSet set_of(std::vector<std::uint64_t> xs) {
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  archloop::ShingleSet s;
  s.shingles = std::move(xs);
  s.source_token_count = s.shingles.size() + s.k - 1;
  return s;
}

// Two sets with |A n B| = shared and |A u B| = shared + only_a + only_b,
// drawn from a seeded stream so elements never collide.
inline std::pair<archloop::ShingleSet, archloop::ShingleSet> pair_with(std::size_t shared,
                                                                       std::size_t only_a,
                                                                       std::size_t only_b,
                                                                       std::uint64_t seed) {
  archloop::SplitMix64 rng(seed);
  std::vector<std::uint64_t> a, b;
  for (std::size_t i = 0; i < shared; ++i) {
    const auto x = rng.next();
    a.push_back(x);
    b.push_back(x);
  }
  for (std::size_t i = 0; i < only_a; ++i) a.push_back(rng.next());
  for (std::size_t i = 0; i < only_b; ++i) b.push_back(rng.next());
  return {set_of(a), set_of(b)};
}

// Seed corpus of `n` synthesized snippets.
inline std::string seed_jsonl(std::size_t n, std::uint64_t seed = 0) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json j{{"code", archloop::synthesize_candidate(archloop::hash_combine(seed, i))}};
    out += j.dump() + "\n";
  }
  return out;
}

inline archloop::CorpusStore make_corpus(const std::filesystem::path& dir, std::size_t n,
                                         std::uint64_t seed = 0) {
  archloop::CorpusStore store = archloop::CorpusStore::create(dir, {});
  std::istringstream in(seed_jsonl(n, seed));
  archloop::ingest_seed(in, store);
  return store;
}

}  // namespace testing
